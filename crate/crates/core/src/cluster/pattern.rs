use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximal run of equal labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub len: usize,
    pub label: usize,
}

/// Splits a label sequence into maximal runs.
pub fn blocks_of(labels: &[usize]) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match blocks.last_mut() {
            Some(b) if b.label == label => b.len += 1,
            _ => blocks.push(Block {
                start: i,
                len: 1,
                label,
            }),
        }
    }
    blocks
}

/// Number of positions where consecutive labels differ.
pub fn transitions(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Per-index cluster assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    labels: Vec<usize>,
}

impl Pattern {
    pub fn from_labels(labels: Vec<usize>) -> Self {
        Pattern { labels }
    }

    /// Expands `(length, label)` runs.
    pub fn from_runs(runs: &[(usize, usize)]) -> Self {
        let mut labels = Vec::new();
        for &(len, label) in runs {
            labels.extend(std::iter::repeat(label).take(len));
        }
        Pattern { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn blocks(&self) -> Vec<Block> {
        blocks_of(&self.labels)
    }

    pub fn transitions(&self) -> usize {
        transitions(&self.labels)
    }

    pub fn distinct_labels(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Checks the structural constraints for `c` clusters, `n` transitions
    /// (at most `n` when `at_most`) and blocks of at least `l_min`.
    pub fn check(&self, c: usize, n: usize, l_min: usize, at_most: bool) -> Result<()> {
        let t = self.transitions();
        let transitions_ok = if at_most { t <= n } else { t == n };
        if !transitions_ok {
            return Err(Error::Degenerate(format!(
                "pattern has {t} transitions, expected {}{n}",
                if at_most { "at most " } else { "" }
            )));
        }
        if let Some(b) = self.blocks().iter().find(|b| b.len < l_min) {
            return Err(Error::Degenerate(format!(
                "block at {} has length {} < minimum {l_min}",
                b.start, b.len
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= c) {
            return Err(Error::Degenerate(format!("label {bad} outside 0..{c}")));
        }
        let used = self.distinct_labels();
        if used != c {
            return Err(Error::Degenerate(format!("pattern uses {used} of {c} labels")));
        }
        Ok(())
    }
}
