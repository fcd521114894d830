//! Segmentation and clustering of multivariate series by constrained
//! dynamic programming.
//!
//! A series is cut into blocks and every block is assigned one of `C`
//! cluster labels, with exactly `N` label transitions and no block shorter
//! than a minimum length. How well a point fits a cluster is scored by an
//! [`AffiliationProvider`](cluster::AffiliationProvider): either the
//! predictive negative log-likelihood of an attentive neural process that
//! uses the cluster's points as context ([`anp`]), or the squared residual
//! of a petrophysical conductivity law fitted to the cluster ([`physics`]).
//!
//! The crate is organised bottom-up:
//!
//! * [`grad`]: tape-based reverse-mode autodiff used to train the network.
//! * [`physics`]: Archie, Waxman-Smits and Sen-Goode-Sibbit conductivity
//!   models and a multi-start Nelder-Mead parameter fit.
//! * [`datagen`]: seeded generators for training realizations and the
//!   labelled benchmark series.
//! * [`anp`]: the attentive neural process, its ELBO training loop and the
//!   checkpoint format.
//! * [`cluster`]: the exact constrained DP and the alternating
//!   characterize/segment loop.
//! * [`evalgrid`]: grid search over `(C, N)`, pattern selection, ARI and
//!   confusion matrices.
//! * [`pipeline`] and [`config`]: the file-level operations behind the
//!   `npseg` command-line tool.

pub mod anp;
pub mod cluster;
pub mod config;
pub mod datagen;
mod error;
pub mod evalgrid;
pub mod grad;
pub mod physics;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
