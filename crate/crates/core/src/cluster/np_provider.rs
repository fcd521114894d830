use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;

use super::iterate::AffiliationProvider;
use crate::anp::{predict_nll, predict_nll_mc, AnpWeights};
use crate::error::{Error, Result};
use crate::physics::LogPoint;
use crate::rng::{content_seed, SeededRng};

/// Largest context handed to the network, matching the training range.
pub const DEFAULT_CONTEXT_CAP: usize = 100;

/// Predictive NLL of a trained network conditioned on the cluster's points.
#[derive(Clone, Debug)]
pub struct NpAffiliation {
    pub weights: Arc<AnpWeights>,
    pub context_cap: usize,
    pub seed: u64,
    /// Latent samples per cost evaluation; zero uses the posterior mean.
    pub mc_samples: usize,
}

pub fn np_affiliation(weights: Arc<AnpWeights>, context_cap: usize, seed: u64) -> NpAffiliation {
    NpAffiliation {
        weights,
        context_cap,
        seed,
        mc_samples: 0,
    }
}

/// Context points and the seed that selected them.
#[derive(Clone, Debug)]
pub struct NpState {
    pub context: Vec<LogPoint>,
    pub seed: u64,
}

impl AffiliationProvider for NpAffiliation {
    type State = NpState;

    fn name(&self) -> String {
        "anp".into()
    }

    fn characterize(&self, points: &[LogPoint]) -> Result<NpState> {
        if points.is_empty() {
            return Err(Error::Degenerate("cannot characterize an empty cluster".into()));
        }
        if self.context_cap == 0 {
            return Err(Error::Config("context cap must be positive".into()));
        }
        let seed = content_seed(self.seed, points);
        let context = if points.len() <= self.context_cap {
            points.to_vec()
        } else {
            let mut rng = SeededRng::seed_from_u64(seed);
            let mut idx = index::sample(&mut rng, points.len(), self.context_cap).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| points[i]).collect()
        };
        Ok(NpState { context, seed })
    }

    fn cost(&self, state: &NpState, point: &LogPoint) -> f64 {
        self.costs(state, std::slice::from_ref(point))
            .map(|v| v[0])
            .unwrap_or(f64::INFINITY)
    }

    fn costs(&self, state: &NpState, points: &[LogPoint]) -> Result<Vec<f64>> {
        let report = if self.mc_samples == 0 {
            predict_nll(&state.context, points, &self.weights)?
        } else {
            let mut rng = SeededRng::seed_from_u64(state.seed ^ 0x9e37_79b9_7f4a_7c15);
            predict_nll_mc(&state.context, points, &self.weights, self.mc_samples, &mut rng)?
        };
        Ok(report.per_point)
    }
}
