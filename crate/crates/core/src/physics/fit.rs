use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::{Equation, LogPoint, RockParams, DEFAULT_TEMPERATURE_C};
use crate::error::{Error, Result};

/// Search box for the fitted parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBox {
    pub m: (f64, f64),
    pub n: (f64, f64),
    pub rho_w: (f64, f64),
    pub cec: (f64, f64),
}

impl Default for FitBox {
    fn default() -> Self {
        FitBox {
            m: (1.7, 2.6),
            n: (1.6, 2.6),
            rho_w: (0.025, 0.06),
            cec: (0.0, 100.0),
        }
    }
}

impl FitBox {
    fn bounds(&self, free: usize) -> Vec<(f64, f64)> {
        [self.m, self.n, self.rho_w, self.cec][..free].to_vec()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub bounds: FitBox,
    pub restarts: usize,
    pub nelder_mead: NelderMeadOptions,
    pub temperature_c: f64,
    pub b_override: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bounds: FitBox::default(),
            restarts: 8,
            nelder_mead: NelderMeadOptions::default(),
            temperature_c: DEFAULT_TEMPERATURE_C,
            b_override: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: RockParams,
    /// Mean squared error of predicted against observed conductivity.
    pub mse: f64,
    /// Set when the inputs cannot determine every free parameter.
    pub ill_conditioned: bool,
}

/// Least-squares fit of `equation` to `points`.
///
/// Runs Nelder-Mead from `opts.restarts` Latin-hypercube starts inside the
/// search box, then restarts once more from the best vertex with a fresh
/// simplex. Archie fits hold the exchange capacity at zero.
pub fn fit_params<R: Rng + ?Sized>(
    points: &[LogPoint],
    equation: Equation,
    opts: &FitOptions,
    rng: &mut R,
) -> Result<FitResult> {
    if points.is_empty() {
        return Err(Error::Domain("cannot fit parameters to an empty point set".into()));
    }
    let free = if equation == Equation::Archie { 3 } else { 4 };
    let bounds = opts.bounds.bounds(free);
    for &(lo, hi) in &bounds {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Config(format!("invalid fit bounds ({lo}, {hi})")));
        }
    }

    let decode = |u: &[f64]| -> RockParams {
        let v: Vec<f64> = u
            .iter()
            .zip(&bounds)
            .map(|(x, (lo, hi))| lo + x * (hi - lo))
            .collect();
        let cec = if free == 4 { v[3] } else { 0.0 };
        RockParams {
            m: v[0],
            n: v[1],
            rho_w: v[2],
            cec,
            temperature_c: opts.temperature_c,
            equation,
            b_coeff: opts
                .b_override
                .unwrap_or_else(|| super::b_of_temperature(opts.temperature_c)),
        }
    };
    let objective = |u: &[f64]| mse(points, &decode(u));

    let starts = latin_hypercube(opts.restarts.max(1), free, rng);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let res = nelder_mead(objective, start, opts.nelder_mead);
        if best.as_ref().map_or(true, |(_, f)| res.f < *f) {
            best = Some((res.x, res.f));
        }
    }
    let (x, f) = best.expect("at least one start");
    let polish = NelderMeadOptions {
        initial_step: opts.nelder_mead.initial_step * 0.1,
        ..opts.nelder_mead
    };
    let res = nelder_mead(objective, &x, polish);
    let (x, f) = if res.f < f { (res.x, res.f) } else { (x, f) };

    Ok(FitResult {
        params: decode(&x),
        mse: f,
        ill_conditioned: distinct_inputs(points) < free,
    })
}

pub(crate) fn mse(points: &[LogPoint], params: &RockParams) -> f64 {
    let total: f64 = points
        .iter()
        .map(|p| {
            let r = params.sigma(p.phi, p.sw, p.f_clay) - p.sigma_o;
            r * r
        })
        .sum();
    total / points.len() as f64
}

fn distinct_inputs(points: &[LogPoint]) -> usize {
    let mut keys: Vec<[u64; 3]> = points
        .iter()
        .map(|p| [p.phi.to_bits(), p.sw.to_bits(), p.f_clay.to_bits()])
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn latin_hypercube<R: Rng + ?Sized>(samples: usize, dims: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dims]; samples];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..samples).collect();
        strata.shuffle(rng);
        for (s, row) in strata.into_iter().zip(out.iter_mut()) {
            row[d] = (s as f64 + rng.gen::<f64>()) / samples as f64;
        }
    }
    out
}
