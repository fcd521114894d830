use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Settings for [`grad_check`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    /// Central-difference step.
    pub step: f64,
    /// Magnitude below which errors are measured absolutely rather than
    /// relative to the gradient size.
    pub floor: f64,
    /// Decades tried on each side of `step` when an entry disagrees at
    /// `step`; the entry scores its best agreement. Large steps absorb
    /// roundoff on tiny gradients, small ones avoid straddling a ReLU kink.
    pub decades: u32,
}

/// Error below which an entry is not retried at other steps.
const SETTLED: f64 = 1e-6;

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            floor: 1e-6,
            decades: 0,
        }
    }
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences and returns the worst relative error over every entry of
/// every input.
///
/// `f` receives a fresh graph and the input variables (all registered with
/// `requires_grad`) and must return a one-element output.
pub fn grad_check<F>(f: F, inputs: &[Tensor], cfg: GradCheck) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    // probes need no tape, so inputs enter as constants
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        scalar_of(&g, out)
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    scalar_of(&g, out)?;
    g.backward(out)?;

    let mut worst = 0.0f64;
    let mut shifted: Vec<Tensor> = inputs.to_vec();
    for (which, (input, var)) in inputs.iter().zip(&vars).enumerate() {
        let analytic = g
            .grad(*var)
            .map(Tensor::into_vec)
            .unwrap_or_else(|| vec![0.0; input.numel()]);
        let mut data = input.data().to_vec();
        for entry in 0..input.numel() {
            let base = input.data()[entry];
            let mut probe = |delta: f64| -> Result<f64> {
                data[entry] = base + delta;
                shifted[which] = Tensor::new(input.shape().to_vec(), data.clone())?;
                eval(&shifted)
            };
            let a = analytic[entry];
            let mut best = f64::INFINITY;
            for h in ladder(cfg) {
                let numeric = (probe(h)? - probe(-h)?) / (2.0 * h);
                if !numeric.is_finite() || !a.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "gradient of input {which} entry {entry}: analytic {a}, numeric {numeric}"
                    )));
                }
                let scale = a.abs().max(numeric.abs()).max(cfg.floor);
                best = best.min((a - numeric).abs() / scale);
                if best < SETTLED {
                    break;
                }
            }
            data[entry] = base;
            worst = worst.max(best);
        }
        shifted[which] = input.clone();
    }
    Ok(worst)
}

/// `step`, then alternately one decade smaller and larger.
fn ladder(cfg: GradCheck) -> impl Iterator<Item = f64> {
    let d = cfg.decades as i32;
    std::iter::once(cfg.step).chain((1..=d).flat_map(move |k| {
        let f = 10f64.powi(k);
        [cfg.step / f, cfg.step * f]
    }))
}

fn scalar_of(g: &Graph, out: Var) -> Result<f64> {
    let value = g.value(out);
    let v = value.item().ok_or_else(|| Error::Shape {
        op: "grad_check",
        lhs: value.shape().to_vec(),
        rhs: vec![1],
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("function value {v}")));
    }
    Ok(v)
}
