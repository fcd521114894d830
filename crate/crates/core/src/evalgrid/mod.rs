//! Grid search over cluster and transition counts, and scoring against
//! ground truth.
//!
//! [`grid_search`] runs the clustering loop for every feasible `(C, N)`
//! pair. [`select_combos`] then names two answers: the globally cheapest
//! cell, and the most common partition among a selected set of cells.
//! [`ari`] and [`confusion`] compare a labeling with the truth.
//!
//! ```
//! use npseg::evalgrid::ari;
//!
//! assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
//! assert_eq!(ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), -0.5);
//! ```

mod ari;
mod grid;
mod report;
mod scatter;
mod select;

pub use ari::{ari, canonical_labels, confusion, Confusion};
pub use grid::{grid_search, GridCell, GridOutcome, GridSpec, SkippedCell};
pub use report::{build_report, EvalReport, PatternSummary};
pub use scatter::{emit_scatter, read_scatter_csv, scatter_svg, ScatterRow};
pub use select::{parse_cell_list, select_combos, Criterion, Selection, DEFAULT_EPS_REL};
