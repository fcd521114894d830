//! Segmentation-clustering of an ordered series.
//!
//! A [`Pattern`] assigns every point a cluster label. Valid patterns have
//! exactly `n` label changes, blocks of at least `l_min` points, and use
//! all `c` labels. [`iterate`] alternates two steps from random starts:
//! an [`AffiliationProvider`] characterizes each cluster and scores every
//! point against it, then [`dp_segment`] finds the valid pattern with the
//! lowest total score. The loop stops when the pattern no longer changes.
//!
//! ```
//! use npseg::cluster::{dp_segment, CostMatrix, DpConfig};
//!
//! // two labels, the second is cheap on the last four points
//! let rows: Vec<Vec<f64>> = (0..8)
//!     .map(|i| if i < 4 { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
//!     .collect();
//! let costs = CostMatrix::from_rows(&rows).unwrap();
//! let config = DpConfig { l_min: 2, ..DpConfig::new(2, 1) };
//! let sol = dp_segment(&costs, &config).unwrap();
//! assert_eq!(sol.pattern.labels(), &[0, 0, 0, 0, 1, 1, 1, 1]);
//! assert_eq!(sol.cost, 0.0);
//! ```

mod dp;
mod iterate;
mod np_provider;
mod pattern;
mod physics_provider;

pub use dp::{dp_segment, CostMatrix, DpConfig, DpSolution, MAX_CLUSTERS};
pub use iterate::{cost_matrix, iterate, random_pattern, AffiliationProvider, ClusterResult, RestartTrace};
pub use np_provider::{np_affiliation, NpAffiliation, NpState, DEFAULT_CONTEXT_CAP};
pub use pattern::{blocks_of, transitions, Block, Pattern};
pub use physics_provider::{physics_affiliation, PhysicsAffiliation};
