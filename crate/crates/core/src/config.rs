//! Run configuration as flat `key = value` text.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Ranges are written `lo,hi`. Every key is optional and unknown
//! keys are rejected.
//!
//! ```
//! use npseg::config::RunConfig;
//!
//! let cfg = RunConfig::parse("seed = 7\nrange.phi = 0.1, 0.3\nl_min = 8\n").unwrap();
//! assert_eq!(cfg.seed, 7);
//! assert_eq!(cfg.ranges.phi, (0.1, 0.3));
//! assert_eq!(cfg.dp.l_min, 8);
//! assert!(RunConfig::parse("colour = blue").is_err());
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anp::TrainConfig;
use crate::cluster::{DpConfig, DEFAULT_CONTEXT_CAP};
use crate::datagen::{BlockPlan, NoiseConfig, SamplingRanges, DEFAULT_REALIZATION_POINTS};
use crate::error::{Error, Result};
use crate::evalgrid::DEFAULT_EPS_REL;
use crate::physics::Conditions;

/// Environment variable naming a default configuration file.
pub const CONFIG_ENV: &str = "NPSEG_CONFIG";

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for every random stream"),
    ("threads", "worker threads for restarts and grid cells"),
    ("noise.input", "relative noise on phi, sw and f_clay"),
    ("noise.output", "relative noise on conductivity"),
    ("range.m", "cementation exponent range"),
    ("range.n", "saturation exponent range"),
    ("range.rho_w", "water resistivity range"),
    ("range.cec", "nonzero exchange capacity range"),
    ("range.phi", "porosity range"),
    ("range.sw", "water saturation range"),
    ("range.f_clay", "clay fraction range"),
    ("cec.zero_prob", "probability of zero exchange capacity"),
    ("temperature", "formation temperature in degrees Celsius"),
    ("b_override", "fixed Waxman-Smits B, or none"),
    ("points_per_realization", "points per training realization"),
    ("block_length", "points per generated block"),
    ("blocks_per_label", "blocks per label in generated series"),
    ("smooth_width", "ramp width for smoothed presets"),
    ("clusters", "parameter sets drawn when generating without a preset"),
    ("l_min", "minimum block length"),
    ("restarts", "random restarts per clustering run"),
    ("max_iters", "iteration cap per restart"),
    ("at_most", "allow fewer transitions than requested"),
    ("epochs", "training epochs"),
    ("sets_per_epoch", "training realizations per epoch"),
    ("lr", "learning rate"),
    ("eps_rel", "relative cost window for pattern selection"),
    ("context_cap", "largest context handed to the network"),
    ("mc_samples", "latent samples per cost evaluation, 0 for the mean"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub noise: NoiseConfig,
    pub ranges: SamplingRanges,
    pub conditions: Conditions,
    pub points_per_realization: usize,
    pub plan: BlockPlan,
    pub clusters: usize,
    /// Template for clustering runs; `c` and `n` are set per run.
    pub dp: DpConfig,
    pub epochs: usize,
    pub sets_per_epoch: usize,
    pub lr: f64,
    pub eps_rel: f64,
    pub context_cap: usize,
    pub mc_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            seed: 0,
            threads: None,
            noise: NoiseConfig::default(),
            ranges: SamplingRanges::default(),
            conditions: Conditions::default(),
            points_per_realization: DEFAULT_REALIZATION_POINTS,
            plan: BlockPlan::default(),
            clusters: 3,
            dp: DpConfig::default(),
            epochs: train.epochs,
            sets_per_epoch: train.sets_per_epoch,
            lr: train.lr,
            eps_rel: DEFAULT_EPS_REL,
            context_cap: DEFAULT_CONTEXT_CAP,
            mc_samples: 0,
        }
    }
}

fn value_error(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {what}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| value_error(key, value, what))
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64)> {
    let (lo, hi) = value
        .split_once(',')
        .ok_or_else(|| value_error(key, value, "a range lo,hi"))?;
    Ok((
        parse_num(key, lo.trim(), "a range lo,hi")?,
        parse_num(key, hi.trim(), "a range lo,hi")?,
    ))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(value_error(key, value, "true or false")),
    }
}

impl RunConfig {
    /// Defaults overlaid with the file named by `NPSEG_CONFIG`, if set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = std::env::var_os(CONFIG_ENV) {
            cfg.merge_file(Path::new(&path))?;
        }
        Ok(cfg)
    }

    /// Defaults overlaid with `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.merge_text(text)?;
        Ok(cfg)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies every `key = value` line of `text`; a key may appear once.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: {key} given twice", no + 1)));
            }
            seen.push(key);
            self.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        self.validate()
    }

    /// Applies one `key=value` assignment.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{pair:?} is not of the form key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let count = "a nonnegative integer";
        let number = "a number";
        match key {
            "seed" => self.seed = parse_num(key, value, count)?,
            "threads" => {
                self.threads = match value {
                    "auto" => None,
                    v => Some(parse_num(key, v, "a positive integer or auto")?),
                }
            }
            "noise.input" => self.noise.input = parse_num(key, value, number)?,
            "noise.output" => self.noise.output = parse_num(key, value, number)?,
            "range.m" => self.ranges.m = parse_range(key, value)?,
            "range.n" => self.ranges.n = parse_range(key, value)?,
            "range.rho_w" => self.ranges.rho_w = parse_range(key, value)?,
            "range.cec" => self.ranges.cec = parse_range(key, value)?,
            "range.phi" => self.ranges.phi = parse_range(key, value)?,
            "range.sw" => self.ranges.sw = parse_range(key, value)?,
            "range.f_clay" => self.ranges.f_clay = parse_range(key, value)?,
            "cec.zero_prob" => self.ranges.cec_zero_prob = parse_num(key, value, number)?,
            "temperature" => self.conditions.temperature_c = parse_num(key, value, number)?,
            "b_override" => {
                self.conditions.b_override = match value {
                    "none" => None,
                    v => Some(parse_num(key, v, "a number or none")?),
                }
            }
            "points_per_realization" => self.points_per_realization = parse_num(key, value, count)?,
            "block_length" => self.plan.block_length = parse_num(key, value, count)?,
            "blocks_per_label" => self.plan.blocks_per_label = parse_num(key, value, count)?,
            "smooth_width" => self.plan.smooth_width = parse_num(key, value, count)?,
            "clusters" => self.clusters = parse_num(key, value, count)?,
            "l_min" => self.dp.l_min = parse_num(key, value, count)?,
            "restarts" => self.dp.restarts = parse_num(key, value, count)?,
            "max_iters" => self.dp.max_iters = parse_num(key, value, count)?,
            "at_most" => self.dp.at_most = parse_bool(key, value)?,
            "epochs" => self.epochs = parse_num(key, value, count)?,
            "sets_per_epoch" => self.sets_per_epoch = parse_num(key, value, count)?,
            "lr" => self.lr = parse_num(key, value, number)?,
            "eps_rel" => self.eps_rel = parse_num(key, value, number)?,
            "context_cap" => self.context_cap = parse_num(key, value, count)?,
            "mc_samples" => self.mc_samples = parse_num(key, value, count)?,
            other => {
                let names: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
                return Err(Error::Config(format!(
                    "unknown key {other:?}; valid keys: {}",
                    names.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.ranges.validate()?;
        let t = self.conditions.temperature_c;
        if !(t.is_finite() && (0.0..=300.0).contains(&t)) {
            return Err(Error::Config(format!("temperature {t} outside [0, 300]")));
        }
        if let Some(b) = self.conditions.b_override {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config(format!("b_override {b} must be nonnegative")));
            }
        }
        let positive = [
            ("threads", self.threads.unwrap_or(1)),
            ("points_per_realization", self.points_per_realization),
            ("block_length", self.plan.block_length),
            ("blocks_per_label", self.plan.blocks_per_label),
            ("smooth_width", self.plan.smooth_width),
            ("clusters", self.clusters),
            ("l_min", self.dp.l_min),
            ("restarts", self.dp.restarts),
            ("max_iters", self.dp.max_iters),
            ("context_cap", self.context_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.eps_rel >= 0.0 && self.eps_rel.is_finite()) {
            return Err(Error::Config(format!("eps_rel {} must be nonnegative", self.eps_rel)));
        }
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            sets_per_epoch: self.sets_per_epoch,
            lr: self.lr,
            points_per_realization: self.points_per_realization,
            ranges: self.ranges,
            noise: self.noise,
            conditions: self.conditions,
            ..TrainConfig::default()
        }
    }

    /// Clustering settings for `c` clusters and `n` transitions.
    pub fn dp_config(&self, c: usize, n: usize, seed: u64) -> DpConfig {
        DpConfig { c, n, seed, ..self.dp }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_key_is_accepted() {
        let values = |key: &str| match key {
            k if k.starts_with("range.") => "0.1,0.2",
            "at_most" => "true",
            "threads" => "2",
            "b_override" => "4.5",
            "temperature" => "60",
            _ => "1",
        };
        let mut cfg = RunConfig::default();
        for (key, _) in KEYS {
            cfg.set(key, values(key)).unwrap();
        }
        assert_eq!(cfg.threads, Some(2));
        assert!(cfg.dp.at_most);
        assert_eq!(cfg.conditions.b_override, Some(4.5));
        assert_eq!(cfg.ranges.f_clay, (0.1, 0.2));
    }

    #[test]
    fn text_overlays_defaults() {
        let text = "# comment\n\nseed=3\nnoise.output = 0.05\nb_override = none\nrestarts = 4\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.noise.output, 0.05);
        assert_eq!(cfg.noise.input, NoiseConfig::default().input);
        assert_eq!(cfg.dp.restarts, 4);
        assert_eq!(cfg.dp.l_min, 5);
        let dp = cfg.dp_config(3, 4, 9);
        assert_eq!((dp.c, dp.n, dp.seed, dp.restarts), (3, 4, 9, 4));
    }

    #[test]
    fn bad_input_is_rejected_with_context() {
        let err = RunConfig::parse("seed = 1\nspeed = 2\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("unknown key"), "{err}");
        assert!(RunConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse("seed").is_err());
        assert!(RunConfig::parse("seed = -1").is_err());
        assert!(RunConfig::parse("range.phi = 0.3").is_err());
        assert!(RunConfig::parse("range.phi = 0.3,0.1").is_err());
        assert!(RunConfig::parse("l_min = 0").is_err());
        assert!(RunConfig::parse("lr = 0").is_err());
        assert!(RunConfig::parse("at_most = maybe").is_err());
        assert!(RunConfig::parse("eps_rel = -0.1").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.set_pair("seed").is_err());
        cfg.set_pair("seed=11").unwrap();
        assert_eq!(cfg.seed, 11);
    }

    #[test]
    fn files_merge_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 5\nepochs = 3\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.merge_file(&path).unwrap();
        cfg.set_pair("epochs=9").unwrap();
        assert_eq!((cfg.seed, cfg.epochs), (5, 9));
        assert!(cfg.merge_file(&dir.path().join("absent.cfg")).unwrap_err().is_io());
    }
}
