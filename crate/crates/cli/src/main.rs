//! `npseg`: generate series, train the network, cluster, grid search and
//! score results.
//!
//! Settings are layered: built-in defaults, then the file named by
//! `NPSEG_CONFIG`, then `--config`, then `--set key=value`, then the
//! dedicated flags. Exit codes: 0 success, 2 configuration or validation
//! error, 3 file error, 4 numeric divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npseg::config::{RunConfig, KEYS};
use npseg::evalgrid::parse_cell_list;
use npseg::pipeline::{cmd_cluster, cmd_eval, cmd_gen, cmd_grid, cmd_train, with_threads, Pick, ProviderSpec};
use npseg::{Error, Result};

#[derive(Parser)]
#[command(name = "npseg", version, about = "Segment and cluster multivariate well-log series")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 gives a serial reference run.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled series and its ground-truth sidecar.
    Gen {
        /// Named preset; without it, parameter sets are drawn from the ranges.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the network on random realizations.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        sets_per_epoch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Checkpoint path; the loss curve goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster one series with fixed cluster and transition counts.
    Cluster {
        #[arg(long)]
        series: PathBuf,
        /// anp:<checkpoint> or physics:<WS|SGS|ARCHIE>
        #[arg(long)]
        provider: ProviderArg,
        #[arg(short = 'c', long)]
        clusters: usize,
        #[arg(short = 'n', long)]
        transitions: usize,
        #[arg(long)]
        l_min: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over cluster and transition counts.
    Grid {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        provider: ProviderArg,
        /// Cluster counts, as `k` or `lo..hi` (inclusive).
        #[arg(long = "c-range", value_name = "RANGE")]
        c_range: RangeArg,
        /// Transition counts, as `k` or `lo..hi` (inclusive).
        #[arg(long = "n-range", value_name = "RANGE")]
        n_range: RangeArg,
        /// Vote among these cells instead of the relative-cost window, e.g. "6:8,7:8".
        #[arg(long, value_name = "C:N,...")]
        select_cells: Option<String>,
        #[arg(long)]
        l_min: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        eps_rel: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted labels against a labelled series.
    Eval {
        /// Cluster result or grid report.
        #[arg(long)]
        pred: PathBuf,
        /// Series CSV with a label column.
        #[arg(long)]
        truth: PathBuf,
        /// Pattern to score from a grid report: lowest_cost or most_common.
        #[arg(long, default_value = "lowest_cost")]
        pick: PickArg,
        /// Where to write the aligned confusion matrix.
        #[arg(long, value_name = "FILE")]
        confusion_out: Option<PathBuf>,
    },
    /// List configuration keys.
    Keys,
}

#[derive(Clone)]
struct ProviderArg(ProviderSpec);

impl std::str::FromStr for ProviderArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse().map(ProviderArg).map_err(|e: Error| e.to_string())
    }
}

#[derive(Clone, Copy)]
struct PickArg(Pick);

impl std::str::FromStr for PickArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse().map(PickArg).map_err(|e: Error| e.to_string())
    }
}

#[derive(Clone)]
struct RangeArg(Vec<usize>);

impl std::str::FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("{s:?}: expected k or lo..hi"))
        };
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
            None => {
                let k = num(s)?;
                (k, k)
            }
        };
        if lo > hi {
            return Err(format!("{s:?}: empty range"));
        }
        Ok(RangeArg((lo..=hi).collect()))
    }
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_env()?;
    if let Some(path) = &g.config {
        cfg.merge_file(path)?;
    }
    for pair in &g.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } | Error::NonFinite(_) => 4,
        e if e.is_io() => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Gen { preset, out } => {
            let done = cmd_gen(preset.as_deref(), &cfg, &out)?;
            println!(
                "wrote {} points, {} labels: {} and {}",
                done.sidecar.len,
                done.sidecar.ground_truth.params.len(),
                done.csv.display(),
                done.json.display()
            );
        }
        Command::Train {
            epochs,
            sets_per_epoch,
            lr,
            out,
        } => {
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.sets_per_epoch = sets_per_epoch.unwrap_or(cfg.sets_per_epoch);
            cfg.lr = lr.unwrap_or(cfg.lr);
            cfg.validate()?;
            println!("parameters: {}", cfg.train_config().hyper.param_count());
            let threads = cfg.threads;
            let done = with_threads(threads, || {
                cmd_train(&cfg, &out, |s| {
                    eprintln!("epoch {:>4}  loss {:.6}  nll {:.6}  kl {:.6}", s.epoch, s.loss, s.nll, s.kl)
                })
            })??;
            println!(
                "wrote {} and {}",
                done.checkpoint.display(),
                done.curve_csv.display()
            );
        }
        Command::Cluster {
            series,
            provider,
            clusters,
            transitions,
            l_min,
            restarts,
            out,
        } => {
            cfg.dp.l_min = l_min.unwrap_or(cfg.dp.l_min);
            cfg.dp.restarts = restarts.unwrap_or(cfg.dp.restarts);
            let threads = cfg.threads;
            let done = with_threads(threads, || {
                cmd_cluster(&series, &provider.0, clusters, transitions, &cfg, &out)
            })??;
            println!("cost_per_point {:.12}", done.result.cost_per_point);
            if let Some(a) = done.ari {
                println!("ari {a:.6}");
            }
            if !done.result.exact {
                eprintln!("note: segmentation fell back to the coarse search");
            }
        }
        Command::Grid {
            series,
            provider,
            c_range,
            n_range,
            select_cells,
            l_min,
            restarts,
            eps_rel,
            out,
        } => {
            cfg.dp.l_min = l_min.unwrap_or(cfg.dp.l_min);
            cfg.dp.restarts = restarts.unwrap_or(cfg.dp.restarts);
            cfg.eps_rel = eps_rel.unwrap_or(cfg.eps_rel);
            let cells = select_cells.as_deref().map(parse_cell_list).transpose()?;
            let threads = cfg.threads;
            let done = with_threads(threads, || {
                cmd_grid(&series, &provider.0, c_range.0, n_range.0, &cfg, cells, &out)
            })??;
            let r = &done.report;
            println!("cells {}  skipped {}", r.cells.len(), r.skipped.len());
            for (label, p) in [("lowest_cost", &r.lowest_cost), ("most_common", &r.most_common)] {
                print!("{label}: c={} n={} cost_per_point {:.12}", p.c, p.n, p.cost_per_point);
                match p.ari {
                    Some(a) => println!(" ari {a:.6}"),
                    None => println!(),
                }
            }
            println!(
                "wrote {}, {} and {}",
                out.display(),
                done.scatter_csv.display(),
                done.scatter_svg.display()
            );
        }
        Command::Eval {
            pred,
            truth,
            pick,
            confusion_out,
        } => {
            let done = cmd_eval(&pred, &truth, pick.0, confusion_out.as_deref())?;
            println!("ari {:.6}", done.ari);
            print!("{}", done.confusion);
            if let Some(path) = confusion_out.as_deref().map(Path::display) {
                println!("wrote {path}");
            }
        }
        Command::Keys => {
            for (key, help) in KEYS {
                println!("{key:<24} {help}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
