use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ari::canonical_labels;
use super::grid::GridCell;
use crate::error::{Error, Result};

/// Default relative cost window for [`Criterion::Relative`].
pub const DEFAULT_EPS_REL: f64 = 0.02;

/// How cells enter the pool that votes for the most common pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    /// For every `c`, cells whose cost is within `eps_rel * |min|` of the
    /// lowest cost among cells with that `c`.
    Relative { eps_rel: f64 },
    /// Exactly these `(c, n)` cells.
    Cells(Vec<(usize, usize)>),
}

impl Default for Criterion {
    fn default() -> Self {
        Criterion::Relative {
            eps_rel: DEFAULT_EPS_REL,
        }
    }
}

/// Parses `"c:n,c:n,..."`.
pub fn parse_cell_list(text: &str) -> Result<Vec<(usize, usize)>> {
    let bad = |item: &str| Error::Config(format!("cell {item:?} is not of the form C:N"));
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (c, n) = item.split_once(':').ok_or_else(|| bad(item))?;
            let c = c.trim().parse().map_err(|_| bad(item))?;
            let n = n.trim().parse().map_err(|_| bad(item))?;
            Ok((c, n))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Indices into the cell list, in cell order.
    pub selected: Vec<usize>,
    /// Cheapest cell of the largest group of selected cells sharing one
    /// partition.
    pub most_common: usize,
    /// Size of that group.
    pub most_common_votes: usize,
    /// Globally cheapest cell.
    pub lowest_cost: usize,
}

fn cheaper(cells: &[GridCell], a: usize, b: usize) -> bool {
    cells[a].cost_per_point < cells[b].cost_per_point
}

/// Picks the lowest-cost cell and the most common pattern.
///
/// Two patterns count as the same when they induce the same partition
/// (ARI of 1). Ties between equally large groups go to the group holding
/// the cheaper cell; ties in cost go to the earlier cell.
pub fn select_combos(cells: &[GridCell], criterion: &Criterion) -> Result<Selection> {
    if cells.is_empty() {
        return Err(Error::Config("no grid cells to select from".into()));
    }
    let mut lowest_cost = 0;
    for i in 1..cells.len() {
        if cheaper(cells, i, lowest_cost) {
            lowest_cost = i;
        }
    }

    let selected: Vec<usize> = match criterion {
        Criterion::Relative { eps_rel } => {
            if !(*eps_rel >= 0.0 && eps_rel.is_finite()) {
                return Err(Error::Config(format!("eps_rel {eps_rel} must be nonnegative")));
            }
            let mut best: BTreeMap<usize, f64> = BTreeMap::new();
            for cell in cells {
                let e = best.entry(cell.c).or_insert(f64::INFINITY);
                *e = e.min(cell.cost_per_point);
            }
            (0..cells.len())
                .filter(|&i| {
                    let m = best[&cells[i].c];
                    cells[i].cost_per_point <= m + eps_rel * m.abs()
                })
                .collect()
        }
        Criterion::Cells(list) => {
            let mut out = Vec::new();
            for &(c, n) in list {
                let i = cells
                    .iter()
                    .position(|cell| cell.c == c && cell.n == n)
                    .ok_or_else(|| Error::Config(format!("selected cell ({c}, {n}) is not in the grid")))?;
                out.push(i);
            }
            out.sort_unstable();
            out.dedup();
            if out.is_empty() {
                return Err(Error::Config("the selected cell list is empty".into()));
            }
            out
        }
    };

    // group -> (votes, cheapest member)
    let mut groups: BTreeMap<Vec<usize>, (usize, usize)> = BTreeMap::new();
    for &i in &selected {
        let key = canonical_labels(cells[i].pattern.labels());
        let entry = groups.entry(key).or_insert((0, i));
        entry.0 += 1;
        if cheaper(cells, i, entry.1) {
            entry.1 = i;
        }
    }
    let rank = |votes: usize, rep: usize| (Reverse(votes), cells[rep].cost_per_point, rep);
    let mut winner: Option<(usize, usize)> = None;
    for &(votes, rep) in groups.values() {
        if winner.map_or(true, |(v, r)| rank(votes, rep) < rank(v, r)) {
            winner = Some((votes, rep));
        }
    }
    let (most_common_votes, most_common) = winner.expect("selection is nonempty");
    Ok(Selection {
        selected,
        most_common,
        most_common_votes,
        lowest_cost,
    })
}
