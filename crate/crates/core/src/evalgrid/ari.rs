use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn pairs(n: u64) -> u128 {
    u128::from(n) * u128::from(n.saturating_sub(1)) / 2
}

fn same_length(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Domain(format!("label lists differ in length: {a} and {b}")));
    }
    Ok(())
}

/// Adjusted Rand index between two labelings of the same points.
///
/// Pair counts are combined in exact integer arithmetic with a single
/// rounding at the end. When both labelings put every point in one
/// cluster, or every point in its own cluster, the index is undefined; it
/// is reported as 1 since the partitions then coincide.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    same_length(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::Domain(format!("need at least two labels, got {}", a.len())));
    }
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u128 = cells.values().map(|&v| pairs(v)).sum();
    let sum_a: u128 = rows.values().map(|&v| pairs(v)).sum();
    let sum_b: u128 = cols.values().map(|&v| pairs(v)).sum();
    let total = pairs(a.len() as u64);
    // numerator and denominator scaled by 2 * total, both exact integers
    let num = 2 * (index * total) as i128 - 2 * (sum_a * sum_b) as i128;
    let den = ((sum_a + sum_b) * total) as i128 - 2 * (sum_a * sum_b) as i128;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Counts of points per `(truth, pred)` label pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Row labels, one per row of `counts`.
    pub truth_labels: Vec<usize>,
    /// Column labels, one per column of `counts`.
    pub pred_labels: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

/// Confusion matrix with truth labels as rows and predicted labels as
/// columns, both in increasing label order.
pub fn confusion(pred: &[usize], truth: &[usize]) -> Result<Confusion> {
    same_length(pred.len(), truth.len())?;
    let mut truth_labels: Vec<usize> = truth.to_vec();
    truth_labels.sort_unstable();
    truth_labels.dedup();
    let mut pred_labels: Vec<usize> = pred.to_vec();
    pred_labels.sort_unstable();
    pred_labels.dedup();
    let mut counts = vec![vec![0; pred_labels.len()]; truth_labels.len()];
    for (p, t) in pred.iter().zip(truth) {
        let r = truth_labels.binary_search(t).expect("label collected");
        let c = pred_labels.binary_search(p).expect("label collected");
        counts[r][c] += 1;
    }
    Ok(Confusion {
        truth_labels,
        pred_labels,
        counts,
    })
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.pred_labels.len())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }

    /// Reorders columns so each truth row meets its best-matching predicted
    /// column on the diagonal. Pairs are taken greedily by decreasing count;
    /// unmatched columns keep their relative order at the end.
    pub fn aligned(&self) -> Confusion {
        let (rows, cols) = (self.truth_labels.len(), self.pred_labels.len());
        let mut cells: Vec<(usize, usize, usize)> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| (self.counts[r][c], r, c))
            .collect();
        cells.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut col_of_row: Vec<Option<usize>> = vec![None; rows];
        let mut used = vec![false; cols];
        for (_, r, c) in cells {
            if col_of_row[r].is_none() && !used[c] {
                col_of_row[r] = Some(c);
                used[c] = true;
            }
        }
        let mut order: Vec<usize> = col_of_row.iter().flatten().copied().collect();
        order.extend((0..cols).filter(|&c| !used[c]));
        Confusion {
            truth_labels: self.truth_labels.clone(),
            pred_labels: order.iter().map(|&c| self.pred_labels[c]).collect(),
            counts: self
                .counts
                .iter()
                .map(|row| order.iter().map(|&c| row[c]).collect())
                .collect(),
        }
    }

    /// CSV text: a header of predicted labels, then one row per truth label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth");
        for p in &self.pred_labels {
            out.push_str(&format!(",pred_{p}"));
        }
        out.push('\n');
        for (t, row) in self.truth_labels.iter().zip(&self.counts) {
            out.push_str(&t.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

impl std::fmt::Display for Confusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let width = self
            .counts
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(4);
        write!(f, "{:>6}", "t\\p")?;
        for p in &self.pred_labels {
            write!(f, " {p:>width$}")?;
        }
        writeln!(f)?;
        for (t, row) in self.truth_labels.iter().zip(&self.counts) {
            write!(f, "{t:>6}")?;
            for v in row {
                write!(f, " {v:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Relabels by order of first appearance, so two labelings share a
/// canonical form exactly when they describe the same partition.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}
