use rand::SeedableRng;

use super::iterate::AffiliationProvider;
use crate::error::Result;
use crate::physics::{fit_params, Equation, FitOptions, FitResult, LogPoint};
use crate::rng::{content_seed, SeededRng};

/// Squared error against a least-squares fit of one conductivity law.
#[derive(Clone, Debug)]
pub struct PhysicsAffiliation {
    pub equation: Equation,
    pub options: FitOptions,
    pub seed: u64,
}

pub fn physics_affiliation(equation: Equation) -> PhysicsAffiliation {
    PhysicsAffiliation {
        equation,
        options: FitOptions::default(),
        seed: 0,
    }
}

impl AffiliationProvider for PhysicsAffiliation {
    type State = FitResult;

    fn name(&self) -> String {
        format!("physics:{}", self.equation)
    }

    fn characterize(&self, points: &[LogPoint]) -> Result<FitResult> {
        let mut rng = SeededRng::seed_from_u64(content_seed(self.seed, points));
        fit_params(points, self.equation, &self.options, &mut rng)
    }

    fn cost(&self, state: &FitResult, p: &LogPoint) -> f64 {
        let r = state.params.sigma(p.phi, p.sw, p.f_clay) - p.sigma_o;
        r * r
    }
}
