use rand::Rng;
use rand_distr::StandardNormal;

use super::weights::{AnpWeights, Hyperparams, TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::grad::{Graph, Tensor, Var};
use crate::physics::LogPoint;

/// Lower bound of every predicted standard deviation.
pub const SIGMA_FLOOR: f64 = 0.1;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Parameters of a diagonal Gaussian over the latent variable.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Predictive mean and standard deviation per target.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Terms of the negative evidence lower bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboParts {
    pub loss: f64,
    /// Mean Gaussian negative log-likelihood per target.
    pub nll: f64,
    /// KL divergence between target and context posteriors, before division
    /// by the number of targets.
    pub kl: f64,
}

/// Graph handles of the loss terms.
#[derive(Clone, Copy, Debug)]
pub struct ElboVars {
    pub loss: Var,
    pub nll: Var,
    pub kl: Var,
}

/// Per-target negative log-likelihood and its mean.
#[derive(Clone, Debug, PartialEq)]
pub struct NllReport {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// Parameter handles looked up by layout name.
pub(crate) struct Net<'a> {
    hyper: Hyperparams,
    vars: &'a [Var],
}

impl<'a> Net<'a> {
    pub(crate) fn new(hyper: &Hyperparams, vars: &'a [Var]) -> Result<Self> {
        if TENSOR_NAMES.len() != vars.len() {
            return Err(Error::Shape {
                op: "anp parameters",
                lhs: vec![TENSOR_NAMES.len()],
                rhs: vec![vars.len()],
            });
        }
        Ok(Net { hyper: *hyper, vars })
    }

    fn p(&self, name: &str) -> Var {
        let i = TENSOR_NAMES
            .iter()
            .position(|n| *n == name)
            .unwrap_or_else(|| panic!("layout has no tensor {name}"));
        self.vars[i]
    }

    /// Weight and bias of a dense layer, looked up without building names.
    fn pair(&self, layer: &str) -> (Var, Var) {
        let i = TENSOR_NAMES
            .iter()
            .position(|n| n.strip_suffix(".w") == Some(layer))
            .unwrap_or_else(|| panic!("layout has no layer {layer}"));
        (self.vars[i], self.vars[i + 1])
    }

    fn dense(&self, g: &mut Graph, x: Var, layer: &str) -> Result<Var> {
        let (w, b) = self.pair(layer);
        let h = g.matmul(x, w)?;
        g.broadcast_add_row(h, b)
    }

    /// ReLU between layers, linear output.
    fn mlp(&self, g: &mut Graph, x: Var, layers: &[&str]) -> Result<Var> {
        let mut h = x;
        for (i, layer) in layers.iter().enumerate() {
            h = self.dense(g, h, layer)?;
            if i + 1 < layers.len() {
                h = g.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Uniform self-attention: every row averaged with the set mean.
    fn mix_uniform(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let rows = g.value(x).rows();
        let mean = g.mean_over_axis(x, 0)?;
        let mean = g.repeat_rows(mean, rows)?;
        let sum = g.add(x, mean)?;
        g.scale(sum, 0.5)
    }

    fn bounded_sigma(&self, g: &mut Graph, raw: Var) -> Result<Var> {
        let s = g.softplus(raw)?;
        let s = g.scale(s, 1.0 - SIGMA_FLOOR)?;
        g.add_scalar(s, SIGMA_FLOOR)
    }

    /// `(mu, sigma)`, each `[1, z_dim]`.
    pub(crate) fn latent(&self, g: &mut Graph, xy: Var) -> Result<(Var, Var)> {
        let h = self.mlp(g, xy, &["latent.l0", "latent.l1", "latent.l2"])?;
        let h = self.mix_uniform(g, h)?;
        let s = g.mean_over_axis(h, 0)?;
        let s = g.relu(s)?;
        let mu = self.dense(g, s, "latent.mean")?;
        let raw = self.dense(g, s, "latent.sigma")?;
        let sigma = self.bounded_sigma(g, raw)?;
        Ok((mu, sigma))
    }

    /// Per-target representation `[n_targets, hidden]`.
    pub(crate) fn deterministic(&self, g: &mut Graph, xy_c: Var, x_c: Var, x_t: Var) -> Result<Var> {
        let v = self.mlp(g, xy_c, &["det.l0", "det.l1"])?;
        let v = self.mix_uniform(g, v)?;
        let keys = self.mlp(g, x_c, &["kq.l0", "kq.l1"])?;
        let queries = self.mlp(g, x_t, &["kq.l0", "kq.l1"])?;
        let q = g.matmul(queries, self.p("attn.wq"))?;
        let k = g.matmul(keys, self.p("attn.wk"))?;
        let v = g.matmul(v, self.p("attn.wv"))?;
        let d = self.hyper.head_dim();
        let scale = 1.0 / (d as f64).sqrt();
        let mut heads = Vec::with_capacity(self.hyper.heads);
        for h in 0..self.hyper.heads {
            let qh = g.slice_cols(q, h * d, d)?;
            let kh = g.slice_cols(k, h * d, d)?;
            let vh = g.slice_cols(v, h * d, d)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale)?;
            let attn = g.softmax_over_axis(scores, 1)?;
            heads.push(g.matmul(attn, vh)?);
        }
        let joined = g.concat(&heads, 1)?;
        let out = g.matmul(joined, self.p("attn.wo"))?;
        g.broadcast_add_row(out, self.p("attn.bo"))
    }

    /// `(mean, sigma)`, each `[n_targets, 1]`.
    pub(crate) fn decoder(&self, g: &mut Graph, x_t: Var, r: Var, z: Var) -> Result<(Var, Var)> {
        let rows = g.value(x_t).rows();
        let zt = g.repeat_rows(z, rows)?;
        let input = g.concat(&[x_t, r, zt], 1)?;
        let out = self.mlp(g, input, &["dec.l0", "dec.l1", "dec.l2"])?;
        let mean = g.slice_cols(out, 0, 1)?;
        let raw = g.slice_cols(out, 1, 1)?;
        let sigma = self.bounded_sigma(g, raw)?;
        Ok((mean, sigma))
    }
}

/// Per-entry Gaussian negative log-likelihood.
pub(crate) fn gaussian_nll(g: &mut Graph, y: Var, mean: Var, sigma: Var) -> Result<Var> {
    let log_sigma = g.log(sigma)?;
    let norm = g.add_scalar(log_sigma, HALF_LN_2PI)?;
    let resid = g.sub(y, mean)?;
    let resid2 = g.square(resid)?;
    let var = g.square(sigma)?;
    let ratio = g.div(resid2, var)?;
    let ratio = g.scale(ratio, 0.5)?;
    g.add(norm, ratio)
}

/// KL divergence between diagonal Gaussians `q` and `p`, summed over dims.
pub(crate) fn gaussian_kl(g: &mut Graph, mu_q: Var, s_q: Var, mu_p: Var, s_p: Var) -> Result<Var> {
    let log_p = g.log(s_p)?;
    let log_q = g.log(s_q)?;
    let log_ratio = g.sub(log_p, log_q)?;
    let var_q = g.square(s_q)?;
    let diff = g.sub(mu_q, mu_p)?;
    let diff2 = g.square(diff)?;
    let num = g.add(var_q, diff2)?;
    let var_p = g.square(s_p)?;
    let two_var_p = g.scale(var_p, 2.0)?;
    let frac = g.div(num, two_var_p)?;
    let terms = g.add(log_ratio, frac)?;
    let terms = g.add_scalar(terms, -0.5)?;
    g.sum_all(terms)
}

fn xy_tensor(points: &[LogPoint]) -> Result<Tensor> {
    let rows: Vec<[f64; 4]> = points
        .iter()
        .map(|p| [p.phi, p.sw, p.f_clay, p.sigma_o])
        .collect();
    Tensor::from_rows(&rows)
}

fn x_tensor(xs: &[[f64; 3]]) -> Result<Tensor> {
    Tensor::from_rows(xs)
}

fn y_tensor(points: &[LogPoint]) -> Result<Tensor> {
    let rows: Vec<[f64; 1]> = points.iter().map(|p| [p.sigma_o]).collect();
    Tensor::from_rows(&rows)
}

fn inputs_of(points: &[LogPoint]) -> Vec<[f64; 3]> {
    points.iter().map(LogPoint::inputs).collect()
}

fn nonempty(what: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain(format!("{what} is empty")));
    }
    Ok(())
}

fn constants(g: &mut Graph, weights: &AnpWeights) -> Vec<Var> {
    weights.tensors().iter().map(|t| g.constant(t.clone())).collect()
}

fn row_of(g: &Graph, v: Var) -> Vec<f64> {
    g.value(v).data().to_vec()
}

/// Posterior over the latent variable given `points`.
pub fn latent_encode(points: &[LogPoint], weights: &AnpWeights) -> Result<LatentStats> {
    nonempty("latent encoder input", points.len())?;
    let mut g = Graph::new();
    let vars = constants(&mut g, weights);
    let net = Net::new(weights.hyperparams(), &vars)?;
    let xy = g.constant(xy_tensor(points)?);
    let (mu, sigma) = net.latent(&mut g, xy)?;
    Ok(LatentStats {
        mu: row_of(&g, mu),
        sigma: row_of(&g, sigma),
    })
}

/// Attention-weighted context representation for each target input,
/// `[x_targets.len(), hidden]`.
pub fn det_encode(context: &[LogPoint], x_targets: &[[f64; 3]], weights: &AnpWeights) -> Result<Tensor> {
    nonempty("context", context.len())?;
    nonempty("target set", x_targets.len())?;
    let mut g = Graph::new();
    let vars = constants(&mut g, weights);
    let net = Net::new(weights.hyperparams(), &vars)?;
    let xy_c = g.constant(xy_tensor(context)?);
    let x_c = g.constant(x_tensor(&inputs_of(context))?);
    let x_t = g.constant(x_tensor(x_targets)?);
    let r = net.deterministic(&mut g, xy_c, x_c, x_t)?;
    Ok(g.value(r).clone())
}

/// Predictive distribution from a representation `r`, a latent sample `z`
/// and target inputs.
pub fn decode(r: &Tensor, z: &[f64], x_targets: &[[f64; 3]], weights: &AnpWeights) -> Result<Prediction> {
    nonempty("target set", x_targets.len())?;
    let mut g = Graph::new();
    let vars = constants(&mut g, weights);
    let net = Net::new(weights.hyperparams(), &vars)?;
    let r = g.constant(r.clone());
    let z = g.constant(Tensor::matrix(1, z.len(), z.to_vec())?);
    let x_t = g.constant(x_tensor(x_targets)?);
    let (mean, sigma) = net.decoder(&mut g, x_t, r, z)?;
    Ok(Prediction {
        mean: row_of(&g, mean),
        sigma: row_of(&g, sigma),
    })
}

/// Records the negative ELBO on `g` with a fixed latent noise `eps`.
///
/// `params` must follow the order of [`Hyperparams::layout`].
pub fn elbo_graph(
    g: &mut Graph,
    params: &[Var],
    hyper: &Hyperparams,
    context: &[LogPoint],
    targets: &[LogPoint],
    eps: &[f64],
) -> Result<ElboVars> {
    nonempty("context", context.len())?;
    nonempty("target set", targets.len())?;
    if eps.len() != hyper.z_dim {
        return Err(Error::Shape {
            op: "elbo noise",
            lhs: vec![eps.len()],
            rhs: vec![hyper.z_dim],
        });
    }
    let net = Net::new(hyper, params)?;
    let xy_c = g.constant(xy_tensor(context)?);
    let xy_t = g.constant(xy_tensor(targets)?);
    let x_c = g.constant(x_tensor(&inputs_of(context))?);
    let x_t = g.constant(x_tensor(&inputs_of(targets))?);
    let y_t = g.constant(y_tensor(targets)?);

    let (mu_c, s_c) = net.latent(g, xy_c)?;
    let (mu_t, s_t) = net.latent(g, xy_t)?;
    let eps = g.constant(Tensor::matrix(1, eps.len(), eps.to_vec())?);
    let noise = g.mul(s_t, eps)?;
    let z = g.add(mu_t, noise)?;

    let r = net.deterministic(g, xy_c, x_c, x_t)?;
    let (mean, sigma) = net.decoder(g, x_t, r, z)?;
    let nll_points = gaussian_nll(g, y_t, mean, sigma)?;
    let nll = g.mean_all(nll_points)?;
    let kl = gaussian_kl(g, mu_t, s_t, mu_c, s_c)?;
    let kl_per_point = g.scale(kl, 1.0 / targets.len() as f64)?;
    let loss = g.add(nll, kl_per_point)?;
    Ok(ElboVars { loss, nll, kl })
}

pub(crate) fn draw_eps<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub(crate) fn parts_of(g: &Graph, vars: &ElboVars) -> ElboParts {
    let item = |v: Var| g.value(v).data()[0];
    ElboParts {
        loss: item(vars.loss),
        nll: item(vars.nll),
        kl: item(vars.kl),
    }
}

/// Negative ELBO with the latent drawn by reparameterization from `rng`.
pub fn elbo_loss<R: Rng + ?Sized>(
    context: &[LogPoint],
    targets: &[LogPoint],
    weights: &AnpWeights,
    rng: &mut R,
) -> Result<ElboParts> {
    let eps = draw_eps(rng, weights.hyperparams().z_dim);
    let mut g = Graph::new();
    let vars = constants(&mut g, weights);
    let out = elbo_graph(&mut g, &vars, weights.hyperparams(), context, targets, &eps)?;
    let parts = parts_of(&g, &out);
    check_finite(&parts, context.len(), targets.len())?;
    Ok(parts)
}

pub(crate) fn check_finite(parts: &ElboParts, n_context: usize, n_targets: usize) -> Result<()> {
    if !parts.loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss {} (nll {}, kl {}) on a batch of {n_context} context and {n_targets} target points",
            parts.loss, parts.nll, parts.kl
        )));
    }
    Ok(())
}

fn nll_with_z(
    g: &mut Graph,
    net: &Net,
    context: &[LogPoint],
    targets: &[LogPoint],
    z: Var,
) -> Result<Vec<f64>> {
    let xy_c = g.constant(xy_tensor(context)?);
    let x_c = g.constant(x_tensor(&inputs_of(context))?);
    let x_t = g.constant(x_tensor(&inputs_of(targets))?);
    let y_t = g.constant(y_tensor(targets)?);
    let r = net.deterministic(g, xy_c, x_c, x_t)?;
    let (mean, sigma) = net.decoder(g, x_t, r, z)?;
    let nll = gaussian_nll(g, y_t, mean, sigma)?;
    Ok(row_of(g, nll))
}

fn report(per_point: Vec<f64>) -> NllReport {
    let mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    NllReport { per_point, mean }
}

/// Predictive negative log-likelihood of `targets` given `context`, with
/// the latent fixed at the context posterior mean.
pub fn predict_nll(context: &[LogPoint], targets: &[LogPoint], weights: &AnpWeights) -> Result<NllReport> {
    nonempty("context", context.len())?;
    nonempty("target set", targets.len())?;
    let mut g = Graph::new();
    let vars = constants(&mut g, weights);
    let net = Net::new(weights.hyperparams(), &vars)?;
    let xy_c = g.constant(xy_tensor(context)?);
    let (mu, _) = net.latent(&mut g, xy_c)?;
    Ok(report(nll_with_z(&mut g, &net, context, targets, mu)?))
}

/// Like [`predict_nll`] but averages the per-point NLL over `samples`
/// latent draws from the context posterior.
pub fn predict_nll_mc<R: Rng + ?Sized>(
    context: &[LogPoint],
    targets: &[LogPoint],
    weights: &AnpWeights,
    samples: usize,
    rng: &mut R,
) -> Result<NllReport> {
    nonempty("context", context.len())?;
    nonempty("target set", targets.len())?;
    if samples == 0 {
        return Err(Error::Config("need at least one latent sample".into()));
    }
    let stats = latent_encode(context, weights)?;
    let mut g = Graph::new();
    let vars = constants(&mut g, weights);
    let net = Net::new(weights.hyperparams(), &vars)?;
    let mut per_point = vec![0.0; targets.len()];
    for _ in 0..samples {
        let eps = draw_eps(rng, stats.mu.len());
        let z: Vec<f64> = stats
            .mu
            .iter()
            .zip(&stats.sigma)
            .zip(&eps)
            .map(|((m, s), e)| m + s * e)
            .collect();
        let z = g.constant(Tensor::matrix(1, z.len(), z)?);
        let nll = nll_with_z(&mut g, &net, context, targets, z)?;
        per_point.iter_mut().zip(nll).for_each(|(acc, v)| *acc += v / samples as f64);
    }
    Ok(report(per_point))
}
