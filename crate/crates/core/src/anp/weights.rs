use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::Tensor;

/// Architecture sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub x_dim: usize,
    pub y_dim: usize,
    pub hidden: usize,
    pub z_dim: usize,
    pub heads: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            x_dim: 3,
            y_dim: 1,
            hidden: 16,
            z_dim: 16,
            heads: 8,
        }
    }
}

/// Tensor names in storage order: dense layers as `.w`, `.b` pairs, then
/// the attention projections.
pub(crate) const TENSOR_NAMES: [&str; 29] = [
    "latent.l0.w",
    "latent.l0.b",
    "latent.l1.w",
    "latent.l1.b",
    "latent.l2.w",
    "latent.l2.b",
    "latent.mean.w",
    "latent.mean.b",
    "latent.sigma.w",
    "latent.sigma.b",
    "det.l0.w",
    "det.l0.b",
    "det.l1.w",
    "det.l1.b",
    "kq.l0.w",
    "kq.l0.b",
    "kq.l1.w",
    "kq.l1.b",
    "dec.l0.w",
    "dec.l0.b",
    "dec.l1.w",
    "dec.l1.b",
    "dec.l2.w",
    "dec.l2.b",
    "attn.wq",
    "attn.wk",
    "attn.wv",
    "attn.wo",
    "attn.bo",
];

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.x_dim == 0 || self.hidden == 0 || self.z_dim == 0 || self.heads == 0 {
            return Err(Error::Config(format!("zero-sized layer in {self:?}")));
        }
        if self.y_dim != 1 {
            return Err(Error::Config("only one-dimensional targets are supported".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// Every named tensor with its shape, in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (x, h, z) = (self.x_dim, self.hidden, self.z_dim);
        let xy = x + self.y_dim;
        let dense: [(usize, usize); 12] = [
            (xy, h),
            (h, h),
            (h, h),
            (h, z),
            (h, z),
            (xy, h),
            (h, h),
            (x, h),
            (h, h),
            (x + h + z, h),
            (h, h),
            (h, 2 * self.y_dim),
        ];
        let mut shapes: Vec<Vec<usize>> = dense
            .iter()
            .flat_map(|&(fan_in, fan_out)| [vec![fan_in, fan_out], vec![fan_out]])
            .collect();
        shapes.extend([vec![h, h], vec![h, h], vec![h, h], vec![h, h], vec![h]]);
        TENSOR_NAMES.iter().map(|n| n.to_string()).zip(shapes).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layout()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// Named parameter tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct AnpWeights {
    hyper: Hyperparams,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl AnpWeights {
    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng + ?Sized>(hyper: Hyperparams, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape) in hyper.layout() {
            let numel: usize = shape.iter().product();
            let data = if shape.len() == 2 {
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                (0..numel).map(|_| rng.gen_range(-limit..limit)).collect()
            } else {
                vec![0.0; numel]
            };
            tensors.push(Tensor::new(shape, data)?);
            names.push(name);
        }
        Ok(AnpWeights {
            hyper,
            names,
            tensors,
        })
    }

    /// Assembles weights from named tensors, checking names and shapes.
    pub fn from_named(hyper: Hyperparams, named: Vec<(String, Tensor)>) -> Result<Self> {
        hyper.validate()?;
        let layout = hyper.layout();
        if named.len() != layout.len() {
            return Err(Error::Config(format!(
                "expected {} tensors, got {}",
                layout.len(),
                named.len()
            )));
        }
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for ((want, shape), (name, t)) in layout.into_iter().zip(named) {
            if want != name || t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "tensor {name} {:?} does not match {want} {shape:?}",
                    t.shape()
                )));
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(AnpWeights {
            hyper,
            names,
            tensors,
        })
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub(crate) fn set_tensors(&mut self, tensors: Vec<Tensor>) {
        debug_assert_eq!(tensors.len(), self.tensors.len());
        self.tensors = tensors;
    }

    /// Copy with every value rounded through `f32`, as stored on disk.
    pub fn to_f32_precision(&self) -> AnpWeights {
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let data = t.data().iter().map(|&v| v as f32 as f64).collect();
                Tensor::new(t.shape().to_vec(), data).expect("same shape")
            })
            .collect();
        AnpWeights {
            hyper: self.hyper,
            names: self.names.clone(),
            tensors,
        }
    }
}
