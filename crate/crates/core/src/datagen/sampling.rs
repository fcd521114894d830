use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{Conditions, Equation, LogPoint, RockParams};

/// Uniform sampling box for physics parameters and log inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub m: (f64, f64),
    pub n: (f64, f64),
    pub rho_w: (f64, f64),
    /// Range of the exchange capacity when it is not zero.
    pub cec: (f64, f64),
    /// Probability that a clay-aware realization has zero exchange capacity.
    pub cec_zero_prob: f64,
    pub phi: (f64, f64),
    pub sw: (f64, f64),
    pub f_clay: (f64, f64),
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            m: (1.7, 2.6),
            n: (1.6, 2.6),
            rho_w: (0.025, 0.06),
            cec: (10.0, 100.0),
            cec_zero_prob: 0.5,
            phi: (0.05, 0.35),
            sw: (0.2, 1.0),
            f_clay: (0.0, 0.4),
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("m", self.m),
            ("n", self.n),
            ("rho_w", self.rho_w),
            ("cec", self.cec),
            ("phi", self.phi),
            ("sw", self.sw),
            ("f_clay", self.f_clay),
        ];
        for (name, (lo, hi)) in named {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("range {name}: need lo < hi, got ({lo}, {hi})")));
            }
        }
        let positive = self.m.0 > 0.0 && self.n.0 > 0.0 && self.rho_w.0 > 0.0 && self.cec.0 >= 0.0;
        let fractions = self.phi.0 > 0.0
            && self.phi.1 < 1.0
            && self.sw.0 > 0.0
            && self.sw.1 <= 1.0
            && self.f_clay.0 >= 0.0
            && self.f_clay.1 < 1.0;
        if !positive || !fractions {
            return Err(Error::Config("sampling ranges outside physical bounds".into()));
        }
        if !(0.0..=1.0).contains(&self.cec_zero_prob) {
            return Err(Error::Config(format!(
                "cec zero probability {} outside [0, 1]",
                self.cec_zero_prob
            )));
        }
        Ok(())
    }

    /// Box searched when fitting parameters, matching the sampling box.
    pub fn fit_box(&self) -> crate::physics::FitBox {
        crate::physics::FitBox {
            m: self.m,
            n: self.n,
            rho_w: self.rho_w,
            cec: (0.0, self.cec.1),
        }
    }
}

/// Relative Gaussian noise levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation on each input channel.
    pub input: f64,
    /// Standard deviation on conductivity.
    pub output: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            input: 0.01,
            output: 0.02,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig {
            input: 0.0,
            output: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input >= 0.0 && self.output >= 0.0 && self.input.is_finite() && self.output.is_finite())
        {
            return Err(Error::Config(format!("invalid noise levels {self:?}")));
        }
        Ok(())
    }
}

/// One simulated realization: inputs drawn uniformly, outputs from one
/// parameter set and equation.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    /// `(phi, sw, f_clay)` per point.
    pub inputs: Vec<[f64; 3]>,
    pub outputs: Vec<f64>,
    pub params: RockParams,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn points(&self) -> Vec<LogPoint> {
        self.inputs
            .iter()
            .zip(&self.outputs)
            .map(|(x, &y)| LogPoint {
                phi: x[0],
                sw: x[1],
                f_clay: x[2],
                sigma_o: y,
            })
            .collect()
    }
}

/// Context and target indices into one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBatch {
    pub context: Vec<usize>,
    pub targets: Vec<usize>,
}

pub const MIN_CONTEXT: usize = 50;
pub const MAX_CONTEXT: usize = 100;

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo..hi)
}

/// Draws a parameter set and an equation, each equation equally likely.
pub fn sample_params<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &SamplingRanges,
    conditions: &Conditions,
) -> Result<RockParams> {
    let m = uniform(rng, ranges.m);
    let n = uniform(rng, ranges.n);
    let rho_w = uniform(rng, ranges.rho_w);
    let equation = Equation::ALL[rng.gen_range(0..3)];
    let cec = if rng.gen_bool(ranges.cec_zero_prob) {
        0.0
    } else {
        uniform(rng, ranges.cec)
    };
    conditions.params(m, n, rho_w, cec, equation)
}

/// Applies `1 + std * N(0, 1)` to `value`. The normal deviate is drawn even
/// when `std` is zero, so noisy and noise-free runs consume the same stream.
pub(crate) fn jitter<R: Rng + ?Sized>(rng: &mut R, value: f64, std: f64) -> f64 {
    let eps: f64 = rng.sample(StandardNormal);
    if std == 0.0 {
        return value;
    }
    value * (1.0 + std * eps)
}

pub(crate) const FRACTION_EPS: f64 = 1e-6;

/// Noisy copy of a clean point, with fractions pulled back into bounds and
/// conductivity kept positive.
pub(crate) fn noisy_point<R: Rng + ?Sized>(
    rng: &mut R,
    clean: [f64; 3],
    sigma: f64,
    noise: &NoiseConfig,
) -> LogPoint {
    let phi = jitter(rng, clean[0], noise.input).clamp(FRACTION_EPS, 1.0 - FRACTION_EPS);
    let sw = jitter(rng, clean[1], noise.input).clamp(FRACTION_EPS, 1.0);
    let f_clay = jitter(rng, clean[2], noise.input).clamp(0.0, 1.0 - FRACTION_EPS);
    let sigma_o = jitter(rng, sigma, noise.output).max(f64::MIN_POSITIVE);
    LogPoint {
        phi,
        sw,
        f_clay,
        sigma_o,
    }
}

pub(crate) fn draw_inputs<R: Rng + ?Sized>(rng: &mut R, ranges: &SamplingRanges) -> [f64; 3] {
    [
        uniform(rng, ranges.phi),
        uniform(rng, ranges.sw),
        uniform(rng, ranges.f_clay),
    ]
}

/// Simulates `n_points` noisy samples of one realization.
pub fn gen_realization<R: Rng + ?Sized>(
    params: &RockParams,
    n_points: usize,
    ranges: &SamplingRanges,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<Realization> {
    if n_points == 0 {
        return Err(Error::Config("a realization needs at least one point".into()));
    }
    let mut inputs = Vec::with_capacity(n_points);
    let mut outputs = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let x = draw_inputs(rng, ranges);
        let sigma = params.sigma(x[0], x[1], x[2]);
        let p = noisy_point(rng, x, sigma, noise);
        inputs.push([p.phi, p.sw, p.f_clay]);
        outputs.push(p.sigma_o);
    }
    Ok(Realization {
        inputs,
        outputs,
        params: *params,
    })
}

/// Picks between 50 and 100 context points without replacement; targets
/// are every point.
pub fn make_training_batch<R: Rng + ?Sized>(
    realization: &Realization,
    rng: &mut R,
) -> Result<TrainingBatch> {
    let len = realization.len();
    if len < MAX_CONTEXT {
        return Err(Error::Config(format!(
            "training realizations need at least {MAX_CONTEXT} points, got {len}"
        )));
    }
    let size = rng.gen_range(MIN_CONTEXT..=MAX_CONTEXT);
    let mut context = index::sample(rng, len, size).into_vec();
    context.sort_unstable();
    Ok(TrainingBatch {
        context,
        targets: (0..len).collect(),
    })
}
