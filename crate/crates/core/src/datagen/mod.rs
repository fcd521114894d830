//! Synthetic data: training realizations for the neural process and the
//! labelled benchmark series used to evaluate clustering.
//!
//! Training data follows a simple recipe. Each realization draws one
//! parameter set and one of the three conductivity laws, samples 200
//! `(phi, sw, f_clay)` inputs uniformly, evaluates the law, and perturbs
//! inputs and output with relative Gaussian noise. A batch then marks 50 to
//! 100 random points as context and uses all points as targets.
//!
//! Benchmark series ([`build_preset`]) concatenate blocks, each generated
//! from one row of a fixed parameter table.

mod presets;
mod sampling;
mod series;

pub use presets::{
    build_preset, preset, BlockPlan, GroundTruth, Preset, PresetRow, PRESET_NAMES,
};
pub use sampling::{
    gen_realization, make_training_batch, sample_params, NoiseConfig, Realization,
    SamplingRanges, TrainingBatch, MAX_CONTEXT, MIN_CONTEXT,
};
pub use series::{LabeledSeries, SERIES_HEADER};

/// Points per training realization.
pub const DEFAULT_REALIZATION_POINTS: usize = 200;

#[cfg(test)]
mod tests;
