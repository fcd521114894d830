//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! A [`Graph`] is a tape: every operation evaluated through it is appended
//! in execution order, and [`Graph::backward`] replays the tape in reverse.
//! Leaves registered with [`Graph::param`] receive gradients; leaves from
//! [`Graph::constant`] and everything computed only from constants are
//! evaluated but never differentiated.
//!
//! ```
//! use npseg::grad::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::vector(vec![3.0]));
//! let y = g.square(x).unwrap();
//! g.backward(y).unwrap();
//! assert_eq!(g.grad(x).unwrap().data(), &[6.0]);
//! ```

mod check;
mod graph;
mod tensor;

pub use check::{grad_check, GradCheck};
pub use graph::{Graph, OpKind, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
