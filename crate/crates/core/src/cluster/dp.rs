use serde::{Deserialize, Serialize};

use super::pattern::Pattern;
use crate::error::{Error, Result};

/// Largest supported cluster count; the label-usage mask has one bit per label.
pub const MAX_CLUSTERS: usize = 12;

/// Upper bound on DP states (and backpointers) held in memory at once.
const STATE_BUDGET: usize = 1 << 24;

/// Segmentation constraints and the iteration schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Number of clusters; every one must be used.
    pub c: usize,
    /// Number of transitions (label changes).
    pub n: usize,
    /// Minimum block length.
    pub l_min: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Allow fewer than `n` transitions.
    pub at_most: bool,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            c: 1,
            n: 0,
            l_min: 5,
            restarts: 10,
            max_iters: 25,
            seed: 0,
            at_most: false,
        }
    }
}

impl DpConfig {
    pub fn new(c: usize, n: usize) -> Self {
        DpConfig {
            c,
            n,
            ..DpConfig::default()
        }
    }

    /// Fewest transitions a valid pattern may have.
    pub fn min_transitions(&self) -> usize {
        if self.at_most {
            self.c.saturating_sub(1)
        } else {
            self.n
        }
    }

    /// Checks that a valid pattern of `len` points exists.
    pub fn check(&self, len: usize) -> Result<()> {
        if self.c == 0 {
            return Err(Error::Infeasible("need c >= 1".into()));
        }
        if self.c > MAX_CLUSTERS {
            return Err(Error::Infeasible(format!(
                "need c <= {MAX_CLUSTERS}, got c = {}",
                self.c
            )));
        }
        if self.l_min == 0 {
            return Err(Error::Infeasible("need l_min >= 1".into()));
        }
        if self.c > self.n + 1 {
            return Err(Error::Infeasible(format!(
                "need c <= n + 1, got c = {}, n = {}",
                self.c, self.n
            )));
        }
        if self.c == 1 && self.n > 0 && !self.at_most {
            return Err(Error::Infeasible(format!(
                "need c >= 2 when n >= 1, got n = {}",
                self.n
            )));
        }
        let blocks = self.min_transitions() + 1;
        if blocks * self.l_min > len {
            return Err(Error::Infeasible(format!(
                "need ({}) * l_min <= length, got {blocks} * {} > {len}",
                if self.at_most { "c" } else { "n + 1" },
                self.l_min
            )));
        }
        Ok(())
    }
}

/// Per-point, per-label costs, row-major `len x c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    len: usize,
    c: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(len: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != len * c {
            return Err(Error::Domain(format!(
                "cost matrix {len}x{c} needs {} entries, got {}",
                len * c,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "cost at point {}, label {} is {}",
                i / c.max(1),
                i % c.max(1),
                data[i]
            )));
        }
        Ok(CostMatrix { len, c, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::Domain("cost rows have different lengths".into()));
        }
        CostMatrix::new(rows.len(), c, rows.concat())
    }

    /// Builds from one column per label.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let c = columns.len();
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|col| col.len() != len) {
            return Err(Error::Domain("cost columns have different lengths".into()));
        }
        let mut data = vec![0.0; len * c];
        for (k, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * c + k] = v;
            }
        }
        CostMatrix::new(len, c, data)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clusters(&self) -> usize {
        self.c
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.c + k]
    }

    /// Total cost of a labelling.
    pub fn pattern_cost(&self, labels: &[usize]) -> f64 {
        labels.iter().enumerate().map(|(i, &k)| self.get(i, k)).sum()
    }

    fn prefix(&self) -> Vec<f64> {
        let c = self.c;
        let mut s = vec![0.0; (self.len + 1) * c];
        for i in 0..self.len {
            for k in 0..c {
                s[(i + 1) * c + k] = s[i * c + k] + self.get(i, k);
            }
        }
        s
    }
}

/// Optimal labelling under a fixed cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DpSolution {
    pub pattern: Pattern,
    pub cost: f64,
    /// False when the problem was too large for the exact search and a
    /// coarse search plus boundary refinement was used.
    pub exact: bool,
}

/// Minimizes total cost over every pattern satisfying `config`.
///
/// Ties go to the earlier boundary, then the smaller label.
pub fn dp_segment(costs: &CostMatrix, config: &DpConfig) -> Result<DpSolution> {
    if costs.clusters() != config.c {
        return Err(Error::Domain(format!(
            "cost matrix has {} labels, config has c = {}",
            costs.clusters(),
            config.c
        )));
    }
    config.check(costs.len())?;

    let free = solve(costs, config, false).expect("feasible config has a solution");
    if distinct(&free.0) == config.c {
        return Ok(finish(costs, free.0, true));
    }
    let states = state_count(costs.len(), config);
    if states <= STATE_BUDGET {
        let (labels, _) = solve(costs, config, true).expect("feasible config has a solution");
        return Ok(finish(costs, labels, true));
    }
    coarse_then_refine(costs, config)
}

fn finish(costs: &CostMatrix, labels: Vec<usize>, exact: bool) -> DpSolution {
    let cost = costs.pattern_cost(&labels);
    DpSolution {
        pattern: Pattern::from_labels(labels),
        cost,
        exact,
    }
}

fn distinct(labels: &[usize]) -> usize {
    let mut seen = 0u32;
    for &l in labels {
        seen |= 1 << l;
    }
    seen.count_ones() as usize
}

fn state_count(len: usize, config: &DpConfig) -> usize {
    (config.n + 1) * (len + 1) * (1 << config.c) * config.c
}

#[derive(Clone, Copy)]
struct Best {
    val: f64,
    k: usize,
    second: f64,
    second_k: usize,
}

impl Best {
    const EMPTY: Best = Best {
        val: f64::INFINITY,
        k: usize::MAX,
        second: f64::INFINITY,
        second_k: usize::MAX,
    };

    fn offer(&mut self, val: f64, k: usize) {
        if val < self.val {
            self.second = self.val;
            self.second_k = self.k;
            self.val = val;
            self.k = k;
        } else if val < self.second {
            self.second = val;
            self.second_k = k;
        }
    }

    fn excluding(&self, k: usize) -> (f64, usize) {
        if self.k == k {
            (self.second, self.second_k)
        } else {
            (self.val, self.k)
        }
    }
}

const FLAG_BITS: u32 = 5;

fn pack(j: usize, k_prev: usize, dropped: bool) -> u32 {
    ((j as u32) << FLAG_BITS) | ((k_prev as u32) << 1) | dropped as u32
}

fn unpack(bp: u32) -> (usize, usize, bool) {
    (
        (bp >> FLAG_BITS) as usize,
        ((bp >> 1) & 0xF) as usize,
        bp & 1 == 1,
    )
}

/// Layered DP over (transitions, end, label mask, last label). With
/// `masked == false` the mask dimension collapses and label coverage is
/// not enforced.
fn solve(costs: &CostMatrix, config: &DpConfig, masked: bool) -> Option<(Vec<usize>, f64)> {
    let (len, c, l_min, n) = (costs.len(), config.c, config.l_min, config.n);
    let masks = if masked { 1usize << c } else { 1 };
    let bit = |k: usize| if masked { 1usize << k } else { 0 };
    let full = if masked { masks - 1 } else { 0 };
    let s = costs.prefix();
    let sp = |i: usize, k: usize| s[i * c + k];
    let width = masks * c;
    let at = |i: usize, mask: usize, k: usize| (i * masks + mask) * c + k;

    let mut prev = vec![f64::INFINITY; (len + 1) * width];
    for k in 0..c {
        for i in l_min..=len {
            prev[at(i, bit(k), k)] = sp(i, k);
        }
    }
    let mut backs: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut finals: Vec<(usize, usize, f64)> = Vec::new();
    let collect = |layer: &[f64], t: usize, finals: &mut Vec<(usize, usize, f64)>| {
        for k in 0..c {
            finals.push((t, k, layer[at(len, full, k)]));
        }
    };
    if config.min_transitions() == 0 {
        collect(&prev, 0, &mut finals);
    }

    let first_mask = usize::from(masked);
    for t in 1..=n {
        let mut best = vec![Best::EMPTY; (len + 1) * masks];
        for j in (t * l_min)..=len {
            for mask in first_mask..masks {
                let b = &mut best[j * masks + mask];
                for k in 0..c {
                    b.offer(prev[at(j, mask, k)], k);
                }
            }
        }
        let mut cur = vec![f64::INFINITY; (len + 1) * width];
        let mut back = vec![u32::MAX; (len + 1) * width];
        for mask in 0..masks {
            for k in 0..c {
                if masked && mask & bit(k) == 0 {
                    continue;
                }
                // previous mask either already held k or gains it here
                let options: &[(usize, bool)] = if !masked {
                    &[(mask, false)]
                } else if mask != bit(k) {
                    &[(mask, false), (mask & !bit(k), true)]
                } else {
                    &[]
                };
                let mut run = (f64::INFINITY, 0usize, 0usize, false);
                for i in ((t + 1) * l_min)..=len {
                    let j = i - l_min;
                    let mut cand = (f64::INFINITY, usize::MAX, false);
                    for &(mp, dropped) in options {
                        let (v, kp) = best[j * masks + mp].excluding(k);
                        if v < cand.0 || (v == cand.0 && kp < cand.1) {
                            cand = (v, kp, dropped);
                        }
                    }
                    if cand.0.is_finite() {
                        let g = cand.0 - sp(j, k);
                        if g < run.0 {
                            run = (g, j, cand.1, cand.2);
                        }
                    }
                    if run.0.is_finite() {
                        let idx = at(i, mask, k);
                        cur[idx] = sp(i, k) + run.0;
                        back[idx] = pack(run.1, run.2, run.3);
                    }
                }
            }
        }
        backs.push(back);
        if t >= config.min_transitions() {
            collect(&cur, t, &mut finals);
        }
        prev = cur;
    }

    let mut end: Option<(usize, usize, f64)> = None;
    for &(t, k, v) in &finals {
        if v.is_finite() && end.map_or(true, |e| v < e.2) {
            end = Some((t, k, v));
        }
    }
    let (mut t, mut k, total) = end?;
    let mut labels = vec![0usize; len];
    let mut i = len;
    let mut mask = full;
    while t > 0 {
        let (j, kp, dropped) = unpack(backs[t - 1][at(i, mask, k)]);
        labels[j..i].fill(k);
        if dropped {
            mask &= !bit(k);
        }
        i = j;
        k = kp;
        t -= 1;
    }
    labels[..i].fill(k);
    Some((labels, total))
}

/// Mask DP on groups of consecutive points, then an exact placement of the
/// boundaries for the label sequence it found.
fn coarse_then_refine(costs: &CostMatrix, config: &DpConfig) -> Result<DpSolution> {
    let len = costs.len();
    let c = config.c;
    let per_point = (config.n + 1) * (1 << c) * c;
    let groups = (STATE_BUDGET / per_point).saturating_sub(1).min(len);
    let too_large = || {
        Error::Infeasible(format!(
            "problem too large for label coverage search: length {len}, c = {c}, n = {}",
            config.n
        ))
    };
    if groups == 0 {
        return Err(too_large());
    }
    let edges: Vec<usize> = (0..=groups).map(|g| g * len / groups).collect();
    let smallest = edges.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(1);
    let coarse_cfg = DpConfig {
        l_min: config.l_min.div_ceil(smallest),
        ..*config
    };
    if coarse_cfg.check(groups).is_err() {
        return Err(too_large());
    }
    let mut data = vec![0.0; groups * c];
    for g in 0..groups {
        for i in edges[g]..edges[g + 1] {
            for k in 0..c {
                data[g * c + k] += costs.get(i, k);
            }
        }
    }
    let coarse = CostMatrix::new(groups, c, data)?;
    let (coarse_labels, _) = solve(&coarse, &coarse_cfg, true).ok_or_else(too_large)?;
    let sequence: Vec<usize> = super::blocks_of(&coarse_labels).iter().map(|b| b.label).collect();
    let labels = place_boundaries(costs, &sequence, config.l_min);
    Ok(finish(costs, labels, false))
}

/// Optimal block lengths for a fixed label sequence.
fn place_boundaries(costs: &CostMatrix, sequence: &[usize], l_min: usize) -> Vec<usize> {
    let len = costs.len();
    let c = costs.clusters();
    let s = costs.prefix();
    let sp = |i: usize, k: usize| s[i * c + k];
    let mut prev = vec![f64::INFINITY; len + 1];
    let k0 = sequence[0];
    for (i, v) in prev.iter_mut().enumerate().skip(l_min) {
        *v = sp(i, k0);
    }
    let mut backs = Vec::with_capacity(sequence.len());
    for &k in &sequence[1..] {
        let mut cur = vec![f64::INFINITY; len + 1];
        let mut back = vec![0usize; len + 1];
        let mut run = (f64::INFINITY, 0usize);
        for i in l_min..=len {
            let j = i - l_min;
            let g = prev[j] - sp(j, k);
            if g < run.0 {
                run = (g, j);
            }
            if run.0.is_finite() {
                cur[i] = sp(i, k) + run.0;
                back[i] = run.1;
            }
        }
        backs.push(back);
        prev = cur;
    }
    let mut labels = vec![0usize; len];
    let mut i = len;
    for (b, &k) in sequence.iter().enumerate().rev() {
        let j = if b == 0 { 0 } else { backs[b - 1][i] };
        labels[j..i].fill(k);
        i = j;
    }
    labels
}

#[cfg(test)]
pub(crate) fn solve_coarse_for_test(costs: &CostMatrix, config: &DpConfig) -> Result<DpSolution> {
    coarse_then_refine(costs, config)
}
