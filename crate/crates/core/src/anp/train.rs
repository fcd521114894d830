use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{draw_eps, elbo_graph, parts_of};
use super::weights::{AnpWeights, Hyperparams};
use crate::datagen::{
    gen_realization, make_training_batch, sample_params, NoiseConfig, SamplingRanges,
    DEFAULT_REALIZATION_POINTS,
};
use crate::error::{Error, Result};
use crate::grad::{Graph, Tensor, Var};
use crate::physics::{Conditions, LogPoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub sets_per_epoch: usize,
    pub lr: f64,
    pub points_per_realization: usize,
    pub hyper: Hyperparams,
    pub ranges: SamplingRanges,
    pub noise: NoiseConfig,
    pub conditions: Conditions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            sets_per_epoch: 3000,
            lr: 1e-3,
            points_per_realization: DEFAULT_REALIZATION_POINTS,
            hyper: Hyperparams::default(),
            ranges: SamplingRanges::default(),
            noise: NoiseConfig::default(),
            conditions: Conditions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.sets_per_epoch == 0 {
            return Err(Error::Config("epochs and sets per epoch must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        self.hyper.validate()?;
        self.ranges.validate()?;
        self.noise.validate()?;
        Ok(())
    }
}

/// Epoch means of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub nll: f64,
    pub kl: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: AnpWeights,
    pub curve: Vec<EpochStats>,
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, weights: &AnpWeights) -> Self {
        let zeros: Vec<Vec<f64>> = weights.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, weights: &mut AnpWeights, grads: &[Vec<f64>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let updated = weights
            .tensors()
            .iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|((t, g), (m, v))| {
                let mut data = t.data().to_vec();
                for i in 0..data.len() {
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                    data[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                }
                Tensor::new(t.shape().to_vec(), data).expect("same shape")
            })
            .collect();
        weights.set_tensors(updated);
    }
}

/// Loss terms and parameter gradients on one batch.
pub fn loss_and_grads(
    weights: &AnpWeights,
    context: &[LogPoint],
    targets: &[LogPoint],
    eps: &[f64],
) -> Result<(super::ElboParts, Vec<Vec<f64>>)> {
    let mut g = Graph::new();
    let vars: Vec<Var> = weights.tensors().iter().map(|t| g.param(t.clone())).collect();
    let out = elbo_graph(&mut g, &vars, weights.hyperparams(), context, targets, eps)?;
    g.backward(out.loss)?;
    let grads = vars
        .iter()
        .map(|&v| {
            g.grad(v)
                .map(Tensor::into_vec)
                .unwrap_or_else(|| vec![0.0; g.value(v).numel()])
        })
        .collect();
    Ok((parts_of(&g, &out), grads))
}

/// Trains freshly initialized weights.
pub fn train<R: Rng + ?Sized>(config: &TrainConfig, rng: &mut R) -> Result<TrainOutcome> {
    config.validate()?;
    let weights = AnpWeights::init(config.hyper, rng)?;
    train_from(weights, config, rng, |_| {})
}

/// Continues training `weights`, calling `on_epoch` after every epoch.
///
/// Each step draws a fresh realization, marks a random context subset and
/// takes one Adam step on the negative ELBO. A non-finite loss or gradient
/// stops training with the weights from before that step.
pub fn train_from<R: Rng + ?Sized>(
    mut weights: AnpWeights,
    config: &TrainConfig,
    rng: &mut R,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    if weights.hyperparams() != &config.hyper {
        return Err(Error::Config("weights do not match the configured architecture".into()));
    }
    let mut adam = Adam::new(config.lr, &weights);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut sums = [0.0; 3];
        for step in 0..config.sets_per_epoch {
            let params = sample_params(rng, &config.ranges, &config.conditions)?;
            let real = gen_realization(
                &params,
                config.points_per_realization,
                &config.ranges,
                &config.noise,
                rng,
            )?;
            let batch = make_training_batch(&real, rng)?;
            let points = real.points();
            let context: Vec<LogPoint> = batch.context.iter().map(|&i| points[i]).collect();
            let targets: Vec<LogPoint> = batch.targets.iter().map(|&i| points[i]).collect();
            let eps = draw_eps(rng, config.hyper.z_dim);

            let diverged = |detail: String, weights: &AnpWeights| Error::Diverged {
                epoch,
                step,
                detail,
                last_good: Box::new(weights.clone()),
            };
            let (parts, grads) = loss_and_grads(&weights, &context, &targets, &eps)?;
            if !parts.loss.is_finite() {
                return Err(diverged(
                    format!(
                        "loss {} (nll {}, kl {}) on {} context / {} target points",
                        parts.loss,
                        parts.nll,
                        parts.kl,
                        context.len(),
                        targets.len()
                    ),
                    &weights,
                ));
            }
            if grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(diverged("non-finite gradient".into(), &weights));
            }
            adam.update(&mut weights, &grads);
            sums[0] += parts.loss;
            sums[1] += parts.nll;
            sums[2] += parts.kl;
        }
        let n = config.sets_per_epoch as f64;
        let stats = EpochStats {
            epoch,
            loss: sums[0] / n,
            nll: sums[1] / n,
            kl: sums[2] / n,
        };
        on_epoch(&stats);
        curve.push(stats);
    }
    Ok(TrainOutcome { weights, curve })
}
