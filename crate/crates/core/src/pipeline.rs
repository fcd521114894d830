//! File-level operations behind the `npseg` subcommands.
//!
//! Each `cmd_*` function reads its inputs, runs one stage and writes its
//! outputs. All randomness comes from the configured master seed through
//! the named streams of [`crate::rng`], and every output is a pure function
//! of the inputs and the configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anp::{load_checkpoint, save_checkpoint, train_from, AnpWeights, EpochStats};
use crate::cluster::{iterate, np_affiliation, ClusterResult, NpAffiliation, PhysicsAffiliation};
use crate::config::RunConfig;
use crate::datagen::{build_preset, preset, sample_params, GroundTruth, LabeledSeries, Preset};
use crate::error::{Error, Result};
use crate::evalgrid::{
    ari, build_report, confusion, emit_scatter, grid_search, select_combos, Confusion, Criterion,
    EvalReport, GridSpec,
};
use crate::physics::{Equation, FitOptions};
use crate::rng::{stream, Stream};

/// Which affiliation cost to cluster with.
#[derive(Clone, Debug, PartialEq)]
pub enum ProviderSpec {
    /// Trained network loaded from a checkpoint.
    Anp(PathBuf),
    /// Least-squares fit of one conductivity law.
    Physics(Equation),
}

impl std::str::FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("anp", path)) if !path.is_empty() => Ok(ProviderSpec::Anp(PathBuf::from(path))),
            Some(("physics", eq)) => Ok(ProviderSpec::Physics(eq.parse()?)),
            _ => Err(Error::Config(format!(
                "provider {s:?} must be anp:<checkpoint> or physics:<WS|SGS|ARCHIE>"
            ))),
        }
    }
}

impl std::fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProviderSpec::Anp(p) => write!(f, "anp:{}", p.display()),
            ProviderSpec::Physics(eq) => write!(f, "physics:{eq}"),
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or the default pool size.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// `ws3.csv` -> `ws3.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// `model.ckpt` -> `model.curve.csv`.
pub fn curve_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("curve.csv")
}

/// `grid.json` -> `grid.scatter`, extended to `.csv` and `.svg`.
pub fn scatter_prefix(report: &Path) -> PathBuf {
    report.with_extension("scatter")
}

/// Generating settings and ground truth stored next to a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSidecar {
    pub seed: u64,
    pub len: usize,
    pub ground_truth: GroundTruth,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct GenOutput {
    pub series: LabeledSeries,
    pub sidecar: GenSidecar,
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Generates a labelled series from a named preset, or from `cfg.clusters`
/// parameter sets drawn from the sampling ranges.
pub fn cmd_gen(preset_name: Option<&str>, cfg: &RunConfig, out: &Path) -> Result<GenOutput> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Stream::Datagen);
    let table = match preset_name {
        Some(name) => preset(name)?,
        None => {
            let params = (0..cfg.clusters)
                .map(|_| sample_params(&mut rng, &cfg.ranges, &cfg.conditions))
                .collect::<Result<Vec<_>>>()?;
            Preset::custom("random", &params, false)
        }
    };
    let (series, truth) = build_preset(&table, &cfg.plan, &cfg.noise, &cfg.ranges, &cfg.conditions, &mut rng)?;
    let sidecar = GenSidecar {
        seed: cfg.seed,
        len: series.len(),
        ground_truth: truth,
        config: RunConfig {
            threads: None,
            ..cfg.clone()
        },
    };
    let json = sidecar_path(out);
    if json == out {
        return Err(Error::Config(format!(
            "output {} would be overwritten by its sidecar; use a .csv name",
            out.display()
        )));
    }
    series.write_csv(out)?;
    write_json(&json, &sidecar)?;
    Ok(GenOutput {
        series,
        sidecar,
        csv: out.to_path_buf(),
        json,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub weights: AnpWeights,
    pub curve: Vec<EpochStats>,
    pub checkpoint: PathBuf,
    pub curve_csv: PathBuf,
}

fn write_curve(path: &Path, curve: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    if curve.is_empty() {
        w.write_record(["epoch", "loss", "nll", "kl"])
            .map_err(|e| Error::format(path, e))?;
    }
    for row in curve {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trains from fresh weights and writes the checkpoint and loss curve.
///
/// On divergence the last finite weights and the completed epochs are
/// still written before the error is returned.
pub fn cmd_train(cfg: &RunConfig, out: &Path, mut on_epoch: impl FnMut(&EpochStats)) -> Result<TrainOutput> {
    cfg.validate()?;
    let tc = cfg.train_config();
    let mut rng = stream(cfg.seed, Stream::Train);
    let weights = AnpWeights::init(tc.hyper, &mut rng)?;
    let curve_csv = curve_path(out);
    let mut curve = Vec::new();
    let result = train_from(weights, &tc, &mut rng, |s| {
        curve.push(*s);
        on_epoch(s);
    });
    match result {
        Ok(done) => {
            save_checkpoint(&done.weights, out)?;
            write_curve(&curve_csv, &done.curve)?;
            Ok(TrainOutput {
                weights: done.weights,
                curve: done.curve,
                checkpoint: out.to_path_buf(),
                curve_csv,
            })
        }
        Err(Error::Diverged {
            epoch,
            step,
            detail,
            last_good,
        }) => {
            save_checkpoint(&last_good, out)?;
            write_curve(&curve_csv, &curve)?;
            Err(Error::Diverged {
                epoch,
                step,
                detail: format!("{detail}; last finite weights saved to {}", out.display()),
                last_good,
            })
        }
        Err(e) => Err(e),
    }
}

fn physics_provider(eq: Equation, cfg: &RunConfig, seed: u64) -> PhysicsAffiliation {
    PhysicsAffiliation {
        equation: eq,
        options: FitOptions {
            bounds: cfg.ranges.fit_box(),
            temperature_c: cfg.conditions.temperature_c,
            b_override: cfg.conditions.b_override,
            ..FitOptions::default()
        },
        seed,
    }
}

fn anp_provider(path: &Path, cfg: &RunConfig, seed: u64) -> Result<NpAffiliation> {
    let weights = load_checkpoint(path)?;
    let mut p = np_affiliation(Arc::new(weights), cfg.context_cap, seed);
    p.mc_samples = cfg.mc_samples;
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct ClusterOutput {
    pub result: ClusterResult,
    /// Agreement with the series' labels, when it has them.
    pub ari: Option<f64>,
}

/// Clusters one series with `c` clusters and `n` transitions.
pub fn cmd_cluster(
    series_path: &Path,
    provider: &ProviderSpec,
    c: usize,
    n: usize,
    cfg: &RunConfig,
    out: &Path,
) -> Result<ClusterOutput> {
    cfg.validate()?;
    let series = LabeledSeries::read_csv(series_path)?;
    let mut rng = stream(cfg.seed, Stream::Cluster);
    let dp = cfg.dp_config(c, n, rng.gen());
    let provider_seed: u64 = rng.gen();
    dp.check(series.len())?;
    let result = match provider {
        ProviderSpec::Physics(eq) => iterate(&series.points, &physics_provider(*eq, cfg, provider_seed), &dp)?,
        ProviderSpec::Anp(path) => iterate(&series.points, &anp_provider(path, cfg, provider_seed)?, &dp)?,
    };
    let ari = match &series.labels {
        Some(truth) if truth.len() >= 2 => Some(ari(&result.labels, truth)?),
        _ => None,
    };
    write_json(out, &result)?;
    Ok(ClusterOutput { result, ari })
}

#[derive(Clone, Debug)]
pub struct GridOutput {
    pub report: EvalReport,
    pub scatter_csv: PathBuf,
    pub scatter_svg: PathBuf,
    /// Wall time per cell in report order, in seconds.
    pub runtimes: Vec<f64>,
}

/// Grid search, selection, report and scatter files.
#[allow(clippy::too_many_arguments)]
pub fn cmd_grid(
    series_path: &Path,
    provider: &ProviderSpec,
    c_values: Vec<usize>,
    n_values: Vec<usize>,
    cfg: &RunConfig,
    cells: Option<Vec<(usize, usize)>>,
    out: &Path,
) -> Result<GridOutput> {
    cfg.validate()?;
    let series = LabeledSeries::read_csv(series_path)?;
    let mut rng = stream(cfg.seed, Stream::Grid);
    let spec = GridSpec {
        c_values,
        n_values,
        base: cfg.dp_config(1, 0, rng.gen()),
    };
    let provider_seed: u64 = rng.gen();
    let outcome = match provider {
        ProviderSpec::Physics(eq) => grid_search(&series.points, &physics_provider(*eq, cfg, provider_seed), &spec)?,
        ProviderSpec::Anp(path) => grid_search(&series.points, &anp_provider(path, cfg, provider_seed)?, &spec)?,
    };
    let criterion = match cells {
        Some(list) => Criterion::Cells(list),
        None => Criterion::Relative { eps_rel: cfg.eps_rel },
    };
    let selection = select_combos(&outcome.cells, &criterion)?;
    let runtimes = outcome.cells.iter().map(|c| c.runtime_s).collect();
    let (scatter_csv, scatter_svg) = emit_scatter(&outcome.cells, &selection.selected, &scatter_prefix(out))?;
    let dataset = series_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = build_report(
        &dataset,
        &provider_name(provider),
        outcome,
        &selection,
        series.labels.as_deref(),
    )?;
    write_json(out, &report)?;
    Ok(GridOutput {
        report,
        scatter_csv,
        scatter_svg,
        runtimes,
    })
}

/// Provider name without local paths, so reports do not depend on where
/// the checkpoint lives.
fn provider_name(spec: &ProviderSpec) -> String {
    match spec {
        ProviderSpec::Anp(_) => "anp".into(),
        ProviderSpec::Physics(eq) => format!("physics:{eq}"),
    }
}

/// Which pattern of a grid report to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Pick {
    #[default]
    LowestCost,
    MostCommon,
}

impl std::str::FromStr for Pick {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest_cost" | "lowest-cost" => Ok(Pick::LowestCost),
            "most_common" | "most-common" => Ok(Pick::MostCommon),
            other => Err(Error::Config(format!(
                "unknown pick {other:?}; expected lowest_cost or most_common"
            ))),
        }
    }
}

/// Labels from a clustering result or a grid report.
pub fn predicted_labels(value: &serde_json::Value, pick: Pick) -> Option<Vec<usize>> {
    let node = match value.get("labels") {
        Some(_) => value,
        None => value.get(match pick {
            Pick::LowestCost => "lowest_cost",
            Pick::MostCommon => "most_common",
        })?,
    };
    serde_json::from_value(node.get("labels")?.clone()).ok()
}

#[derive(Clone, Debug)]
pub struct EvalOutput {
    pub ari: f64,
    pub confusion: Confusion,
}

/// Scores predicted labels against a labelled series and optionally
/// writes the aligned confusion matrix as CSV.
pub fn cmd_eval(pred_path: &Path, truth_path: &Path, pick: Pick, confusion_out: Option<&Path>) -> Result<EvalOutput> {
    let value: serde_json::Value = read_json(pred_path)?;
    let pred = predicted_labels(&value, pick)
        .ok_or_else(|| Error::format(pred_path, "no labels found; expected a cluster result or grid report"))?;
    let series = LabeledSeries::read_csv(truth_path)?;
    let truth = series
        .labels
        .ok_or_else(|| Error::format(truth_path, "series has no label column"))?;
    if pred.len() != truth.len() {
        return Err(Error::Domain(format!(
            "{} predicted labels for a series of {} points",
            pred.len(),
            truth.len()
        )));
    }
    let score = ari(&pred, &truth)?;
    let matrix = confusion(&pred, &truth)?.aligned();
    if let Some(path) = confusion_out {
        std::fs::write(path, matrix.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(EvalOutput {
        ari: score,
        confusion: matrix,
    })
}
