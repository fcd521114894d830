use serde::{Deserialize, Serialize};

use super::ari::{ari, confusion, Confusion};
use super::grid::{GridCell, GridOutcome, SkippedCell};
use super::select::Selection;
use crate::cluster::Block;
use crate::error::{Error, Result};

/// A chosen cell and, when ground truth is known, its agreement with it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub c: usize,
    pub n: usize,
    pub cost_per_point: f64,
    pub labels: Vec<usize>,
    pub blocks: Vec<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub provider: String,
    pub cells: Vec<GridCell>,
    #[serde(default)]
    pub skipped: Vec<SkippedCell>,
    /// `(c, n)` of the cells that voted for the most common pattern.
    pub selected: Vec<(usize, usize)>,
    pub most_common: PatternSummary,
    pub lowest_cost: PatternSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion_most_common: Option<Confusion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion_lowest_cost: Option<Confusion>,
}

fn summary(cell: &GridCell, truth: Option<&[usize]>) -> Result<PatternSummary> {
    Ok(PatternSummary {
        c: cell.c,
        n: cell.n,
        cost_per_point: cell.cost_per_point,
        labels: cell.pattern.labels().to_vec(),
        blocks: cell.pattern.blocks(),
        ari: truth.map(|t| ari(cell.pattern.labels(), t)).transpose()?,
    })
}

/// Assembles the grid report; ARI and confusion matrices are filled in
/// when `truth` is given.
pub fn build_report(
    dataset: &str,
    provider: &str,
    outcome: GridOutcome,
    selection: &Selection,
    truth: Option<&[usize]>,
) -> Result<EvalReport> {
    let cells = outcome.cells;
    let get = |i: usize| {
        cells
            .get(i)
            .ok_or_else(|| Error::Config(format!("selection refers to missing cell {i}")))
    };
    let most = get(selection.most_common)?;
    let low = get(selection.lowest_cost)?;
    let confusion_of = |cell: &GridCell| {
        truth
            .map(|t| confusion(cell.pattern.labels(), t).map(|m| m.aligned()))
            .transpose()
    };
    Ok(EvalReport {
        dataset: dataset.to_string(),
        provider: provider.to_string(),
        selected: selection
            .selected
            .iter()
            .map(|&i| get(i).map(|c| (c.c, c.n)))
            .collect::<Result<_>>()?,
        most_common: summary(most, truth)?,
        lowest_cost: summary(low, truth)?,
        confusion_most_common: confusion_of(most)?,
        confusion_lowest_cost: confusion_of(low)?,
        skipped: outcome.skipped,
        cells,
    })
}
