use rand::seq::index;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dp::{dp_segment, CostMatrix, DpConfig};
use super::pattern::{Block, Pattern};
use crate::error::{Error, Result};
use crate::physics::LogPoint;
use crate::rng::{derive_seed, SeededRng};

/// Scores how well points belong to a cluster.
pub trait AffiliationProvider: Send + Sync {
    /// Whatever the provider learns from a cluster's points.
    type State: Send + Sync;

    fn name(&self) -> String;

    fn characterize(&self, points: &[LogPoint]) -> Result<Self::State>;

    /// Per-point cost; lower means a better fit.
    fn cost(&self, state: &Self::State, point: &LogPoint) -> f64;

    /// Costs of many points at once.
    fn costs(&self, state: &Self::State, points: &[LogPoint]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|p| self.cost(state, p)).collect())
    }
}

/// Uniformly random valid pattern: block lengths by stars and bars over the
/// slack, labels by rejection until adjacent labels differ and all appear.
pub fn random_pattern<R: Rng + ?Sized>(len: usize, config: &DpConfig, rng: &mut R) -> Result<Pattern> {
    config.check(len)?;
    let (c, l_min) = (config.c, config.l_min);
    let transitions = if c == 1 {
        0
    } else if config.at_most {
        config.n.min(len / l_min - 1)
    } else {
        config.n
    };
    let blocks = transitions + 1;
    let slack = len - blocks * l_min;
    let mut bars = index::sample(rng, slack + transitions, transitions).into_vec();
    bars.sort_unstable();
    let mut lengths = Vec::with_capacity(blocks);
    let mut last = 0;
    for (b, &bar) in bars.iter().enumerate() {
        lengths.push(l_min + bar - b - last);
        last = bar - b;
    }
    lengths.push(l_min + slack - last);

    let labels = random_labels(blocks, c, rng);
    let runs: Vec<(usize, usize)> = lengths.into_iter().zip(labels).collect();
    Ok(Pattern::from_runs(&runs))
}

fn random_labels<R: Rng + ?Sized>(blocks: usize, c: usize, rng: &mut R) -> Vec<usize> {
    let draw = |rng: &mut R, prev: Option<usize>| -> usize {
        match prev {
            None => rng.gen_range(0..c),
            Some(p) => {
                let k = rng.gen_range(0..c - 1);
                if k >= p {
                    k + 1
                } else {
                    k
                }
            }
        }
    };
    for _ in 0..1000 {
        let mut seq = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let prev = b.checked_sub(1).map(|i| seq[i]);
            seq.push(draw(rng, prev));
        }
        let mut seen = vec![false; c];
        seq.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            return seq;
        }
    }
    // coverage is rare when blocks barely exceed c: place a permutation first
    let mut seq: Vec<usize> = index::sample(rng, c, c).into_vec();
    while seq.len() < blocks {
        let prev = seq.last().copied();
        seq.push(draw(rng, prev));
    }
    seq
}

/// One restart's history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    /// Mean per-point cost after each DP step.
    pub costs: Vec<f64>,
    pub cost_per_point: f64,
    pub exact: bool,
}

/// Outcome of [`iterate`] and the clustering result record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub c: usize,
    pub n: usize,
    pub l_min: usize,
    pub seed: u64,
    pub provider: String,
    pub cost_per_point: f64,
    pub labels: Vec<usize>,
    pub blocks: Vec<Block>,
    pub iterations: usize,
    pub exact: bool,
    pub restarts_trace: Vec<RestartTrace>,
}

impl ClusterResult {
    pub fn pattern(&self) -> Pattern {
        Pattern::from_labels(self.labels.clone())
    }
}

/// Characterizes each cluster of `pattern` and builds the cost matrix.
pub fn cost_matrix<A: AffiliationProvider>(
    points: &[LogPoint],
    pattern: &Pattern,
    c: usize,
    provider: &A,
) -> Result<CostMatrix> {
    let mut columns = Vec::with_capacity(c);
    for k in 0..c {
        let members: Vec<LogPoint> = pattern
            .labels()
            .iter()
            .zip(points)
            .filter(|(&l, _)| l == k)
            .map(|(_, p)| *p)
            .collect();
        if members.is_empty() {
            return Err(Error::Degenerate(format!("cluster {k} has no points")));
        }
        let state = provider
            .characterize(&members)
            .map_err(|e| cluster_context(e, k, members.len()))?;
        let col = provider
            .costs(&state, points)
            .map_err(|e| cluster_context(e, k, members.len()))?;
        columns.push(col);
    }
    CostMatrix::from_columns(&columns)
}

fn cluster_context(e: Error, k: usize, size: usize) -> Error {
    match e {
        Error::Diverged { .. } | Error::Io { .. } | Error::Checkpoint(_) => e,
        other => Error::Degenerate(format!("cluster {k} ({size} points): {other}")),
    }
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    derive_seed(seed, format!("restart-{restart}").as_bytes())
}

fn run_restart<A: AffiliationProvider>(
    points: &[LogPoint],
    provider: &A,
    config: &DpConfig,
    restart: usize,
) -> Result<(Pattern, RestartTrace)> {
    let seed = restart_seed(config.seed, restart);
    let mut rng = SeededRng::seed_from_u64(seed);
    let len = points.len() as f64;
    let mut pattern = random_pattern(points.len(), config, &mut rng)?;
    let mut costs = Vec::new();
    let mut converged = false;
    let mut exact = true;
    let mut final_cost = None;
    let mut iterations = 0;
    while iterations < config.max_iters.max(1) {
        iterations += 1;
        let matrix = cost_matrix(points, &pattern, config.c, provider)?;
        let sol = dp_segment(&matrix, config)?;
        exact &= sol.exact;
        costs.push(sol.cost / len);
        if sol.pattern == pattern {
            converged = true;
            final_cost = Some(sol.cost);
            break;
        }
        pattern = sol.pattern;
    }
    let total = match final_cost {
        Some(v) => v,
        None => cost_matrix(points, &pattern, config.c, provider)?.pattern_cost(pattern.labels()),
    };
    let trace = RestartTrace {
        restart,
        seed,
        iterations,
        converged,
        costs,
        cost_per_point: total / len,
        exact,
    };
    Ok((pattern, trace))
}

/// Alternates characterization and segmentation from `config.restarts`
/// random starts and keeps the lowest mean cost. Restarts run on the
/// current rayon pool; the result does not depend on its size.
pub fn iterate<A: AffiliationProvider>(
    points: &[LogPoint],
    provider: &A,
    config: &DpConfig,
) -> Result<ClusterResult> {
    config.check(points.len())?;
    let runs: Vec<(Pattern, RestartTrace)> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| run_restart(points, provider, config, r))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, t)) in runs.iter().enumerate() {
        if t.cost_per_point < runs[best].1.cost_per_point {
            best = i;
        }
    }
    let (pattern, trace) = &runs[best];
    Ok(ClusterResult {
        c: config.c,
        n: config.n,
        l_min: config.l_min,
        seed: config.seed,
        provider: provider.name(),
        cost_per_point: trace.cost_per_point,
        labels: pattern.labels().to_vec(),
        blocks: pattern.blocks(),
        iterations: trace.iterations,
        exact: trace.exact,
        restarts_trace: runs.iter().map(|(_, t)| t.clone()).collect(),
    })
}
