//! Attentive neural process over `(phi, sw, f_clay) -> sigma_o`.
//!
//! Three networks share the work. The latent encoder maps each context
//! pair through a three-layer MLP, pools the set, and emits a diagonal
//! Gaussian over `z`. The deterministic encoder embeds context pairs and
//! lets every target input attend to them with eight-head dot-product
//! attention; keys and queries pass through a shared two-layer MLP first.
//! The decoder reads `(x, r, z)` and predicts a mean and a standard
//! deviation, floored at [`SIGMA_FLOOR`].
//!
//! With the default [`Hyperparams`] the network has 3778 parameters.
//!
//! ```
//! use npseg::anp::{AnpWeights, Hyperparams};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let w = AnpWeights::init(Hyperparams::default(), &mut rng).unwrap();
//! assert_eq!(w.param_count(), 3778);
//! ```

mod checkpoint;
mod model;
mod train;
mod weights;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CheckpointError,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{
    decode, det_encode, elbo_graph, elbo_loss, latent_encode, predict_nll, predict_nll_mc,
    ElboParts, ElboVars, LatentStats, NllReport, Prediction, SIGMA_FLOOR,
};
pub use train::{loss_and_grads, train, train_from, Adam, EpochStats, TrainConfig, TrainOutcome};
pub use weights::{AnpWeights, Hyperparams};
