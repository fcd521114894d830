use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{iterate, AffiliationProvider, DpConfig, Pattern};
use crate::error::{Error, Result};
use crate::physics::LogPoint;
use crate::rng::derive_seed;

/// Cluster and transition counts to sweep, sharing every other setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_values: Vec<usize>,
    pub n_values: Vec<usize>,
    /// Template for every cell; `c`, `n` and `seed` are replaced per cell.
    pub base: DpConfig,
}

impl GridSpec {
    pub fn ranges(c: std::ops::RangeInclusive<usize>, n: std::ops::RangeInclusive<usize>, base: DpConfig) -> Self {
        GridSpec {
            c_values: c.collect(),
            n_values: n.collect(),
            base,
        }
    }

    /// Seed of the `(c, n)` cell, derived from the master seed.
    pub fn cell_seed(&self, c: usize, n: usize) -> u64 {
        derive_seed(self.base.seed, format!("cell-{c}-{n}").as_bytes())
    }

    pub fn cell_config(&self, c: usize, n: usize) -> DpConfig {
        DpConfig {
            c,
            n,
            seed: self.cell_seed(c, n),
            ..self.base
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: usize,
    pub n: usize,
    pub cost_per_point: f64,
    pub pattern: Pattern,
    pub seed: u64,
    pub iterations: usize,
    pub exact: bool,
    /// Wall time of the cell; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub c: usize,
    pub n: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    /// Feasible cells sorted by `(c, n)`.
    pub cells: Vec<GridCell>,
    pub skipped: Vec<SkippedCell>,
}

/// Runs the alternating clustering for every feasible `(c, n)` pair.
///
/// Cells run in parallel on the current rayon pool; the output does not
/// depend on the pool size. Infeasible pairs are listed in `skipped`.
pub fn grid_search<A: AffiliationProvider>(
    points: &[LogPoint],
    provider: &A,
    spec: &GridSpec,
) -> Result<GridOutcome> {
    if spec.c_values.is_empty() || spec.n_values.is_empty() {
        return Err(Error::Config("grid ranges must be nonempty".into()));
    }
    let mut pairs: Vec<(usize, usize)> = spec
        .c_values
        .iter()
        .flat_map(|&c| spec.n_values.iter().map(move |&n| (c, n)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    let mut runnable = Vec::new();
    let mut skipped = Vec::new();
    for (c, n) in pairs {
        let cfg = spec.cell_config(c, n);
        match cfg.check(points.len()) {
            Ok(()) => runnable.push(cfg),
            Err(e) => skipped.push(SkippedCell {
                c,
                n,
                reason: e.to_string(),
            }),
        }
    }
    if runnable.is_empty() {
        let reasons: Vec<String> = skipped
            .iter()
            .map(|s| format!("(c={}, n={}): {}", s.c, s.n, s.reason))
            .collect();
        return Err(Error::Infeasible(format!(
            "no feasible grid cell for {} points; {}",
            points.len(),
            reasons.join("; ")
        )));
    }

    let cells = runnable
        .into_par_iter()
        .map(|cfg| {
            let start = Instant::now();
            let res = iterate(points, provider, &cfg)?;
            Ok(GridCell {
                c: cfg.c,
                n: cfg.n,
                cost_per_point: res.cost_per_point,
                pattern: Pattern::from_labels(res.labels),
                seed: cfg.seed,
                iterations: res.iterations,
                exact: res.exact,
                runtime_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridOutcome { cells, skipped })
}
