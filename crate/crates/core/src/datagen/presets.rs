use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{draw_inputs, noisy_point, NoiseConfig, SamplingRanges};
use super::series::LabeledSeries;
use crate::cluster::{blocks_of, Block};
use crate::error::{Error, Result};
use crate::physics::{Conditions, Equation, RockParams};

pub const PRESET_NAMES: [&str; 7] = [
    "WS-1",
    "WS-2",
    "WS-2-smooth",
    "WS-3",
    "WS-3-smooth",
    "SGS-1",
    "SGS-2",
];

/// One labelled parameter row of a benchmark table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetRow {
    pub label: usize,
    pub m: f64,
    pub n: f64,
    pub rho_w: f64,
    pub cec: f64,
    pub equation: Equation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub rows: Vec<PresetRow>,
    /// Parameters ramp linearly across block boundaries.
    pub smooth: bool,
}

const WS_1: [(f64, f64, f64, f64); 6] = [
    (2.1, 2.3, 0.052, 0.0),
    (1.9, 1.8, 0.05, 0.0),
    (1.8, 1.75, 0.052, 0.0),
    (2.05, 1.9, 0.05, 0.0),
    (2.2, 2.0, 0.048, 20.0),
    (2.4, 2.1, 0.048, 60.0),
];

const WS_2: [(f64, f64, f64, f64); 6] = [
    (1.85, 1.8, 0.052, 0.0),
    (2.1, 2.0, 0.052, 0.0),
    (2.4, 2.3, 0.049, 80.0),
    (1.9, 2.0, 0.051, 0.0),
    (2.0, 1.95, 0.051, 30.0),
    (2.0, 2.5, 0.05, 0.0),
];

const WS_3: [(f64, f64, f64, f64); 8] = [
    (1.85, 1.7, 0.03, 0.0),
    (2.0, 2.0, 0.03, 0.0),
    (2.05, 2.0, 0.029, 30.0),
    (2.3, 2.1, 0.031, 0.0),
    (2.5, 2.2, 0.049, 80.0),
    (2.0, 2.5, 0.05, 0.0),
    (2.0, 1.9, 0.05, 0.0),
    (2.1, 2.1, 0.051, 45.0),
];

const SGS_1: [(f64, f64, f64, f64, Equation); 8] = [
    (2.0, 1.95, 0.051, 30.0, Equation::Sgs),
    (1.85, 1.8, 0.052, 0.0, Equation::Ws),
    (2.1, 2.0, 0.052, 0.0, Equation::Ws),
    (2.4, 2.3, 0.049, 80.0, Equation::Sgs),
    (2.4, 2.3, 0.049, 80.0, Equation::Ws),
    (1.9, 2.0, 0.051, 0.0, Equation::Ws),
    (2.0, 1.95, 0.051, 30.0, Equation::Ws),
    (2.0, 2.5, 0.05, 0.0, Equation::Ws),
];

// The source table for this set has no equation column. Rows 4, 8 and 10
// repeat the parameters of rows 2, 5 and 9; they are assigned SGS so that
// each repeated pair differs in its law, the others WS.
const SGS_2: [(f64, f64, f64, f64, Equation); 11] = [
    (1.85, 1.7, 0.03, 0.0, Equation::Ws),
    (2.0, 2.0, 0.03, 0.0, Equation::Ws),
    (2.05, 2.0, 0.029, 30.0, Equation::Ws),
    (2.3, 2.1, 0.031, 0.0, Equation::Ws),
    (2.05, 2.0, 0.029, 30.0, Equation::Sgs),
    (2.5, 2.2, 0.049, 80.0, Equation::Ws),
    (2.0, 2.5, 0.05, 0.0, Equation::Ws),
    (2.0, 1.9, 0.05, 0.0, Equation::Ws),
    (2.5, 2.2, 0.049, 80.0, Equation::Sgs),
    (2.1, 2.1, 0.051, 45.0, Equation::Ws),
    (2.1, 2.1, 0.051, 45.0, Equation::Sgs),
];

fn ws_rows(table: &[(f64, f64, f64, f64)]) -> Vec<PresetRow> {
    table
        .iter()
        .enumerate()
        .map(|(label, &(m, n, rho_w, cec))| PresetRow {
            label,
            m,
            n,
            rho_w,
            cec,
            equation: Equation::Ws,
        })
        .collect()
}

fn tagged_rows(table: &[(f64, f64, f64, f64, Equation)]) -> Vec<PresetRow> {
    table
        .iter()
        .enumerate()
        .map(|(label, &(m, n, rho_w, cec, equation))| PresetRow {
            label,
            m,
            n,
            rho_w,
            cec,
            equation,
        })
        .collect()
}

/// Looks up one of the seven benchmark tables by name.
pub fn preset(name: &str) -> Result<Preset> {
    let (rows, smooth) = match name {
        "WS-1" => (ws_rows(&WS_1), false),
        "WS-2" => (ws_rows(&WS_2), false),
        "WS-2-smooth" => (ws_rows(&WS_2), true),
        "WS-3" => (ws_rows(&WS_3), false),
        "WS-3-smooth" => (ws_rows(&WS_3), true),
        "SGS-1" => (tagged_rows(&SGS_1), false),
        "SGS-2" => (tagged_rows(&SGS_2), false),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; valid presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(Preset {
        name: name.to_string(),
        rows,
        smooth,
    })
}

impl Preset {
    /// Builds a preset from arbitrary rows, e.g. randomly sampled ones.
    pub fn custom(name: &str, params: &[RockParams], smooth: bool) -> Self {
        Preset {
            name: name.to_string(),
            rows: params
                .iter()
                .enumerate()
                .map(|(label, p)| PresetRow {
                    label,
                    m: p.m,
                    n: p.n,
                    rho_w: p.rho_w,
                    cec: p.cec,
                    equation: p.equation,
                })
                .collect(),
            smooth,
        }
    }

    pub fn clusters(&self) -> usize {
        self.rows.len()
    }

    pub fn params(&self, conditions: &Conditions) -> Result<Vec<RockParams>> {
        self.rows
            .iter()
            .map(|r| conditions.params(r.m, r.n, r.rho_w, r.cec, r.equation))
            .collect()
    }

    /// Human-readable parameter table, including the equation chosen per row.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "preset {}{}\nlabel  m     n     rho_w   CEC   equation\n",
            self.name,
            if self.smooth { " (smoothed boundaries)" } else { "" }
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<6} {:<5} {:<5} {:<7} {:<5} {}\n",
                r.label, r.m, r.n, r.rho_w, r.cec, r.equation
            ));
        }
        out
    }
}

/// Layout of blocks in a generated series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub block_length: usize,
    /// How many blocks each label gets when `sequence` is not given.
    pub blocks_per_label: usize,
    /// Width in samples of the parameter ramp for smoothed presets.
    pub smooth_width: usize,
    /// Explicit label order; shuffled from `blocks_per_label` otherwise.
    pub sequence: Option<Vec<usize>>,
    /// Explicit per-block lengths; `block_length` for every block otherwise.
    pub lengths: Option<Vec<usize>>,
}

impl Default for BlockPlan {
    fn default() -> Self {
        BlockPlan {
            block_length: 50,
            blocks_per_label: 2,
            smooth_width: 10,
            sequence: None,
            lengths: None,
        }
    }
}

/// Shuffles `copies` of every label so no two neighbours match.
fn label_sequence<R: Rng + ?Sized>(k: usize, copies: usize, rng: &mut R) -> Vec<usize> {
    if k == 1 {
        return vec![0];
    }
    let mut seq: Vec<usize> = (0..k).flat_map(|l| std::iter::repeat(l).take(copies)).collect();
    for _ in 0..10_000 {
        seq.shuffle(rng);
        if seq.windows(2).all(|w| w[0] != w[1]) {
            return seq;
        }
    }
    // round-robin over a shuffled label order always alternates
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    (0..copies).flat_map(|_| order.clone()).collect()
}

/// Everything needed to regenerate a preset series and to score against it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub preset: Preset,
    pub params: Vec<RockParams>,
    pub plan: BlockPlan,
    pub blocks: Vec<Block>,
    pub noise: NoiseConfig,
}

/// Lays out a benchmark series block by block.
pub fn build_preset<R: Rng + ?Sized>(
    preset: &Preset,
    plan: &BlockPlan,
    noise: &NoiseConfig,
    ranges: &SamplingRanges,
    conditions: &Conditions,
    rng: &mut R,
) -> Result<(LabeledSeries, GroundTruth)> {
    noise.validate()?;
    ranges.validate()?;
    let k = preset.clusters();
    if k == 0 {
        return Err(Error::Config("preset has no parameter rows".into()));
    }
    let sequence = match &plan.sequence {
        Some(seq) => seq.clone(),
        None => label_sequence(k, plan.blocks_per_label.max(1), rng),
    };
    if sequence.is_empty() || sequence.iter().any(|&l| l >= k) {
        return Err(Error::Config(format!("block sequence must use labels 0..{k}")));
    }
    if sequence.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("adjacent blocks must have different labels".into()));
    }
    let lengths = match &plan.lengths {
        Some(l) if l.len() == sequence.len() => l.clone(),
        Some(l) => {
            return Err(Error::Config(format!(
                "{} block lengths given for {} blocks",
                l.len(),
                sequence.len()
            )))
        }
        None => vec![plan.block_length; sequence.len()],
    };
    let min_len = if preset.smooth { plan.smooth_width.max(1) } else { 1 };
    if lengths.iter().any(|&l| l < min_len) {
        return Err(Error::Config(format!(
            "every block needs at least {min_len} samples"
        )));
    }

    let params = preset.params(conditions)?;
    let mut labels = Vec::new();
    for (&label, &len) in sequence.iter().zip(&lengths) {
        labels.extend(std::iter::repeat(label).take(len));
    }
    let blocks = blocks_of(&labels);

    let mut points = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        let p = if preset.smooth {
            ramped_params(&blocks, &params, i, plan.smooth_width)
        } else {
            params[label]
        };
        let x = draw_inputs(rng, ranges);
        let sigma = p.sigma(x[0], x[1], x[2]);
        points.push(noisy_point(rng, x, sigma, noise));
    }

    let series = LabeledSeries::new(points, Some(labels))?;
    let truth = GroundTruth {
        preset: preset.clone(),
        params,
        plan: BlockPlan {
            sequence: Some(sequence),
            lengths: Some(lengths),
            ..plan.clone()
        },
        blocks,
        noise: *noise,
    };
    Ok((series, truth))
}

/// Parameters at index `i`, linearly blended across the nearest boundary
/// when `i` lies within the ramp.
fn ramped_params(blocks: &[Block], params: &[RockParams], i: usize, width: usize) -> RockParams {
    let b = blocks
        .iter()
        .position(|b| i >= b.start && i < b.start + b.len)
        .expect("index inside series");
    let half_left = width / 2;
    let half_right = width - half_left;
    let own = params[blocks[b].label];

    // boundary at the start of block `idx`
    let blend = |idx: usize| -> Option<RockParams> {
        let s = blocks[idx].start;
        if i + half_left < s || i >= s + half_right {
            return None;
        }
        let t = (i + half_left - s) as f64 + 0.5;
        let t = t / width as f64;
        let from = params[blocks[idx - 1].label];
        let to = params[blocks[idx].label];
        Some(lerp(&from, &to, t))
    };
    if b > 0 {
        if let Some(p) = blend(b) {
            return p;
        }
    }
    if b + 1 < blocks.len() {
        if let Some(p) = blend(b + 1) {
            return p;
        }
    }
    own
}

fn lerp(a: &RockParams, b: &RockParams, t: f64) -> RockParams {
    let mix = |x: f64, y: f64| x + (y - x) * t;
    RockParams {
        m: mix(a.m, b.m),
        n: mix(a.n, b.n),
        rho_w: mix(a.rho_w, b.rho_w),
        cec: mix(a.effective_cec(), b.effective_cec()),
        temperature_c: a.temperature_c,
        equation: match (a.equation, b.equation) {
            (x, y) if x == y => x,
            (x, y) => {
                if t < 0.5 {
                    x
                } else {
                    y
                }
            }
        },
        b_coeff: a.b_coeff,
    }
}
