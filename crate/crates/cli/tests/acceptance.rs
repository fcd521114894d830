//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line
//! straight to stdout, so the lines appear even when output is captured.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use npseg::anp::{det_encode, elbo_graph, latent_encode, predict_nll, AnpWeights, Hyperparams};
use npseg::cluster::{dp_segment, CostMatrix, DpConfig};
use npseg::config::RunConfig;
use npseg::datagen::{gen_realization, sample_params, NoiseConfig, SamplingRanges};
use npseg::evalgrid::ari;
use npseg::grad::{grad_check, GradCheck, Graph, Tensor, Var};
use npseg::physics::{sigma_sgs, sigma_ws, Conditions, Equation, LogPoint, RockParams};
use npseg::pipeline::cmd_train;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, name: &str, ok: bool, detail: &str, started: Instant) {
    let line = format!(
        "{} criterion {criterion} ({name}): {detail} [{:.1}s]\n",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "{line}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = r.gen_range(lo..hi);
            // keep relu and division away from their kinks
            if v.abs() < 0.05 {
                v + 0.1f64.copysign(v)
            } else {
                v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> npseg::Result<Var> {
    let shape = g.value(y).shape().to_vec();
    let w = g.constant(random_tensor(&mut rng(seed), &shape, -1.0, 1.0));
    let p = g.mul(y, w)?;
    g.sum_all(p)
}

fn realization(seed: u64, n: usize) -> Vec<LogPoint> {
    let mut r = rng(seed);
    let ranges = SamplingRanges::default();
    let p = sample_params(&mut r, &ranges, &Conditions::default()).unwrap();
    gen_realization(&p, n, &ranges, &NoiseConfig::default(), &mut r)
        .unwrap()
        .points()
}

type OpCase = (&'static str, Vec<Tensor>, Box<dyn Fn(&mut Graph, &[Var]) -> npseg::Result<Var>>);

fn op_cases(r: &mut ChaCha8Rng) -> Vec<OpCase> {
    let a = random_tensor(r, &[3, 4], -1.5, 1.5);
    let b = random_tensor(r, &[3, 4], -1.5, 1.5);
    let p = random_tensor(r, &[3, 4], 0.3, 2.0);
    let m = random_tensor(r, &[4, 2], -1.5, 1.5);
    let row = random_tensor(r, &[1, 4], -1.5, 1.5);
    vec![
        ("add", vec![a.clone(), b.clone()], Box::new(|g, v| g.add(v[0], v[1]))),
        ("sub", vec![a.clone(), b.clone()], Box::new(|g, v| g.sub(v[0], v[1]))),
        ("mul", vec![a.clone(), b.clone()], Box::new(|g, v| g.mul(v[0], v[1]))),
        ("div", vec![a.clone(), p.clone()], Box::new(|g, v| g.div(v[0], v[1]))),
        ("matmul", vec![a.clone(), m], Box::new(|g, v| g.matmul(v[0], v[1]))),
        ("relu", vec![a.clone()], Box::new(|g, v| g.relu(v[0]))),
        ("softplus", vec![a.clone()], Box::new(|g, v| g.softplus(v[0]))),
        ("exp", vec![a.clone()], Box::new(|g, v| g.exp(v[0]))),
        ("log", vec![p], Box::new(|g, v| g.log(v[0]))),
        ("square", vec![a.clone()], Box::new(|g, v| g.square(v[0]))),
        ("scale", vec![a.clone()], Box::new(|g, v| g.scale(v[0], -2.5))),
        ("add_scalar", vec![a.clone()], Box::new(|g, v| g.add_scalar(v[0], 0.7))),
        ("mean_over_axis", vec![a.clone()], Box::new(|g, v| g.mean_over_axis(v[0], 0))),
        ("sum_over_axis", vec![a.clone()], Box::new(|g, v| g.sum_over_axis(v[0], 1))),
        ("softmax_over_axis", vec![a.clone()], Box::new(|g, v| g.softmax_over_axis(v[0], 1))),
        ("concat", vec![a.clone(), row.clone()], Box::new(|g, v| g.concat(&[v[0], v[1]], 0))),
        ("broadcast_add_row", vec![a.clone(), row.clone()], Box::new(|g, v| g.broadcast_add_row(v[0], v[1]))),
        ("transpose", vec![a.clone()], Box::new(|g, v| g.transpose(v[0]))),
        ("slice_cols", vec![b], Box::new(|g, v| g.slice_cols(v[0], 1, 2))),
        ("repeat_rows", vec![row], Box::new(|g, v| g.repeat_rows(v[0], 3))),
        ("mean_all", vec![a.clone()], Box::new(|g, v| g.mean_all(v[0]))),
        ("sum_all", vec![a], Box::new(|g, v| g.sum_all(v[0]))),
    ]
}

#[test]
fn criterion_1_gradients() {
    let started = Instant::now();
    let mut r = rng(1);
    let mut worst_op = (0.0f64, "");
    for instance in 0..50u64 {
        for (name, inputs, op) in op_cases(&mut r) {
            let err = grad_check(
                |g, v| {
                    let y = op(g, v)?;
                    if g.value(y).numel() == 1 {
                        Ok(y)
                    } else {
                        weighted_sum(g, y, 500 + instance)
                    }
                },
                &inputs,
                GradCheck::default(),
            )
            .unwrap();
            if err > worst_op.0 {
                worst_op = (err, name);
            }
        }
    }
    let mut worst_elbo = 0.0f64;
    for instance in 0..50u64 {
        let w = AnpWeights::init(Hyperparams::default(), &mut rng(1000 + instance)).unwrap();
        let pts = realization(2000 + instance, 6);
        let n_ctx = 1 + (instance as usize % 5);
        let (ctx, tgt) = (pts[..n_ctx].to_vec(), pts.clone());
        let mut er = rng(3000 + instance);
        let eps: Vec<f64> = (0..w.hyperparams().z_dim).map(|_| er.gen_range(-1.5..1.5)).collect();
        let hyper = *w.hyperparams();
        let err = grad_check(
            |g, vars| Ok(elbo_graph(g, vars, &hyper, &ctx, &tgt, &eps)?.loss),
            w.tensors(),
            GradCheck {
                decades: 2,
                ..GradCheck::default()
            },
        )
        .unwrap();
        worst_elbo = worst_elbo.max(err);
    }
    let ok = worst_op.0 < 1e-4 && worst_elbo < 1e-4;
    let detail = format!(
        "worst op error {:.2e} ({}), worst ELBO error {worst_elbo:.2e} over 50 instances",
        worst_op.0, worst_op.1
    );
    report(1, "gradient correctness", ok, &detail, started);
}

#[test]
fn criterion_2_archie_reduction() {
    let started = Instant::now();
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let (phi, sw, f_clay): (f64, f64, f64) = (r.gen_range(0.01..0.99), r.gen_range(0.01..=1.0), r.gen_range(0.0..0.99));
        let (m, n, rho_w): (f64, f64, f64) = (r.gen_range(1.0..3.0), r.gen_range(1.0..3.0), r.gen_range(0.01..1.0));
        let t = r.gen_range(0.0..150.0);
        // zero exchange capacity, or capacity with no clay
        let (cec, f_clay) = if i % 2 == 0 { (0.0, f_clay) } else { (r.gen_range(1.0..100.0), 0.0) };
        let ws = RockParams::with_temperature(m, n, rho_w, cec, Equation::Ws, t, None).unwrap();
        let sgs = RockParams { equation: Equation::Sgs, ..ws };
        let archie = phi.powf(m) * sw.powf(n) / rho_w;
        for v in [sigma_ws(phi, sw, f_clay, &ws), sigma_sgs(phi, sw, f_clay, &sgs)] {
            worst = worst.max(((v - archie) / archie).abs());
        }
    }
    report(
        2,
        "physics reduction",
        worst < 1e-12,
        &format!("worst relative difference {worst:.2e} over 10000 inputs"),
        started,
    );
}

/// Every valid labelling, as (cost, labels), by enumerating block lengths
/// and label sequences.
fn enumerate(costs: &[Vec<f64>], c: usize, n: usize, l_min: usize) -> Vec<(f64, Vec<usize>)> {
    let len = costs.len();
    let mut out = Vec::new();
    let blocks = n + 1;
    let mut lengths = Vec::new();
    fn lengths_rec(left: usize, blocks: usize, l_min: usize, cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
        if blocks == 1 {
            if left >= l_min {
                cur.push(left);
                all.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for l in l_min..=left {
            cur.push(l);
            lengths_rec(left - l, blocks - 1, l_min, cur, all);
            cur.pop();
        }
    }
    lengths_rec(len, blocks, l_min, &mut Vec::new(), &mut lengths);
    let mut seqs: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..blocks {
        seqs = seqs
            .into_iter()
            .flat_map(|s| {
                (0..c)
                    .filter(|&k| s.last() != Some(&k))
                    .map(|k| {
                        let mut t = s.clone();
                        t.push(k);
                        t
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    seqs.retain(|s| (0..c).all(|k| s.contains(&k)));
    for ls in &lengths {
        for s in &seqs {
            let labels: Vec<usize> = ls.iter().zip(s).flat_map(|(&l, &k)| std::iter::repeat(k).take(l)).collect();
            let cost = labels.iter().enumerate().map(|(i, &k)| costs[i][k]).sum();
            out.push((cost, labels));
        }
    }
    out
}

#[test]
fn criterion_3_dp_optimality() {
    let started = Instant::now();
    let mut r = rng(3);
    let (mut checked, mut infeasible, mut ties, mut failures) = (0, 0, 0, Vec::new());
    while checked < 500 {
        let len = r.gen_range(1..=14);
        let c = r.gen_range(1..=3);
        let n = r.gen_range(0..=3);
        let l_min = r.gen_range(1..=3);
        // integer costs on some instances to exercise ties
        let integer = r.gen_bool(0.3);
        let rows: Vec<Vec<f64>> = (0..len)
            .map(|_| {
                (0..c)
                    .map(|_| if integer { r.gen_range(0..4) as f64 } else { r.gen_range(0.0..1.0) })
                    .collect()
            })
            .collect();
        let all = enumerate(&rows, c, n, l_min);
        let config = DpConfig { l_min, ..DpConfig::new(c, n) };
        let costs = CostMatrix::from_rows(&rows).unwrap();
        match dp_segment(&costs, &config) {
            Err(_) => {
                if !all.is_empty() {
                    failures.push(format!("dp rejected a feasible instance len={len} c={c} n={n} l_min={l_min}"));
                }
                infeasible += 1;
            }
            Ok(sol) => {
                checked += 1;
                let best = all.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
                let winners: Vec<&Vec<usize>> = all.iter().filter(|(v, _)| *v == best).map(|(_, l)| l).collect();
                if winners.len() > 1 {
                    ties += 1;
                }
                if sol.cost != best || !winners.contains(&&sol.pattern.labels().to_vec()) {
                    failures.push(format!("len={len} c={c} n={n} l_min={l_min}: dp {} vs {best}", sol.cost));
                }
            }
        }
    }
    let detail = format!(
        "{checked} feasible instances match exhaustive search ({ties} with tied optima), {infeasible} infeasible rejected{}",
        failures.first().map(|f| format!("; first mismatch {f}")).unwrap_or_default()
    );
    report(3, "DP optimality", failures.is_empty(), &detail, started);
}

/// Adjusted Rand index from the contingency table with floating-point
/// pair counts.
fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let comb = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.iter().flatten().map(|&v| comb(v)).sum();
    let rows: f64 = table.iter().map(|r| comb(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| comb(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / comb(a.len() as f64);
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[test]
fn criterion_4_ari() {
    let started = Instant::now();
    let mut r = rng(4);
    let mut worst = 0.0f64;
    let mut perm_ok = true;
    for _ in 0..1000 {
        let len = r.gen_range(2..300);
        let (ka, kb) = (r.gen_range(1..8), r.gen_range(1..8));
        let a: Vec<usize> = (0..len).map(|_| r.gen_range(0..ka)).collect();
        let b: Vec<usize> = (0..len).map(|_| r.gen_range(0..kb)).collect();
        worst = worst.max((ari(&a, &b).unwrap() - ari_oracle(&a, &b)).abs());
        let mut names: Vec<usize> = (0..ka).collect();
        names.shuffle(&mut r);
        let relabeled: Vec<usize> = a.iter().map(|&x| names[x] + 10).collect();
        perm_ok &= ari(&a, &relabeled).unwrap() == 1.0;
    }
    let ok = worst < 1e-12 && perm_ok;
    let detail = format!("worst difference from contingency oracle {worst:.2e} over 1000 pairs, relabeled = 1 exactly: {perm_ok}");
    report(4, "ARI oracle", ok, &detail, started);
}

fn npseg(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_npseg"))
        .current_dir(dir)
        .env_remove("NPSEG_CONFIG")
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "npseg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn criterion_5_physics_baseline() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    npseg(d, &["--seed", "2", "gen", "--preset", "WS-3", "--out", "ws3.csv"]);
    let sidecar: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("ws3.json")).unwrap()).unwrap();
    let transitions = sidecar["ground_truth"]["blocks"].as_array().unwrap().len() - 1;
    let n = transitions.to_string();
    npseg(
        d,
        &[
            "--seed", "2", "--threads", "1", "grid", "--series", "ws3.csv", "--provider", "physics:WS",
            "--c-range", "8", "--n-range", &n, "--out", "grid.json",
        ],
    );
    let grid: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("grid.json")).unwrap()).unwrap();
    let score = grid["lowest_cost"]["ari"].as_f64().unwrap();
    let detail = format!("WS-3 seed 2, C=8, N={transitions}: lowest-cost ARI {score:.4}");
    report(5, "physics baseline end to end", score >= 0.90, &detail, started);
}

#[test]
fn criterion_6_training_smoke() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        seed: 6,
        epochs: 5,
        sets_per_epoch: 200,
        threads: Some(1),
        ..RunConfig::default()
    };
    let out = cmd_train(&cfg, &dir.path().join("model.ckpt"), |_| {}).unwrap();
    let nll: Vec<f64> = out.curve.iter().map(|s| s.nll).collect();
    // trailing mean over up to three epochs
    let smooth: Vec<f64> = (0..nll.len())
        .map(|e| {
            let lo = e.saturating_sub(2);
            nll[lo..=e].iter().sum::<f64>() / (e + 1 - lo) as f64
        })
        .collect();
    let improves = smooth[4] < smooth[0];

    let mut coherent = 0.0;
    let mut mismatched = 0.0;
    let sets: Vec<Vec<LogPoint>> = (0..51).map(|i| realization(60_000 + i, 200)).collect();
    for i in 0..50 {
        let ctx = &sets[i][..75];
        coherent += predict_nll(ctx, &sets[i], &out.weights).unwrap().mean / 50.0;
        mismatched += predict_nll(ctx, &sets[i + 1], &out.weights).unwrap().mean / 50.0;
    }
    let ok = improves && coherent < mismatched;
    let detail = format!(
        "smoothed epoch NLL {:.4} -> {:.4}; held-out NLL coherent {coherent:.4} vs mismatched {mismatched:.4}",
        smooth[0], smooth[4]
    );
    report(6, "training smoke", ok, &detail, started);
}

#[test]
#[ignore = "full-scale training takes about an hour"]
fn criterion_6_extended_full_training() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    npseg(d, &["--seed", "1", "train", "--epochs", "100", "--sets-per-epoch", "3000", "--out", "model.ckpt"]);
    npseg(d, &["--seed", "2", "gen", "--preset", "WS-3", "--out", "ws3.csv"]);
    npseg(
        d,
        &[
            "--seed", "2", "grid", "--series", "ws3.csv", "--provider", "anp:model.ckpt", "--c-range", "6..8",
            "--n-range", "13..17", "--out", "grid.json",
        ],
    );
    let grid: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("grid.json")).unwrap()).unwrap();
    let score = grid["lowest_cost"]["ari"].as_f64().unwrap();
    report(6, "extended full training", score >= 0.85, &format!("lowest-cost ARI {score:.4}"), started);
}

#[test]
fn criterion_7_determinism() {
    let started = Instant::now();
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let t = ["--threads", "1", "--seed", "11"];
        let with = |rest: &[&'static str]| -> Vec<&'static str> { [&t[..], rest].concat() };
        npseg(d, &with(&["gen", "--preset", "WS-1", "--out", "s.csv"]));
        npseg(d, &with(&["gen", "--out", "r.csv"]));
        npseg(d, &with(&["train", "--epochs", "2", "--sets-per-epoch", "20", "--out", "m.ckpt"]));
        npseg(d, &with(&["cluster", "--series", "s.csv", "--provider", "physics:WS", "-c", "3", "-n", "4", "--restarts", "3", "--out", "cp.json"]));
        npseg(d, &with(&["cluster", "--series", "s.csv", "--provider", "anp:m.ckpt", "-c", "3", "-n", "4", "--restarts", "2", "--out", "ca.json"]));
        npseg(d, &with(&["grid", "--series", "s.csv", "--provider", "physics:ARCHIE", "--c-range", "2..3", "--n-range", "3..4", "--restarts", "2", "--out", "g.json"]));
        npseg(d, &with(&["eval", "--pred", "g.json", "--truth", "s.csv", "--confusion-out", "conf.csv"]));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "json" || x == "ckpt" || x == "svg"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let (first, second) = (run(), run());
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let ok = first.len() == second.len() && first.len() >= 12 && differing.is_empty();
    let detail = format!(
        "{} output files byte-identical across reruns ({}){}",
        first.len(),
        names.join(", "),
        if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
    );
    report(7, "determinism", ok, &detail, started);
}

#[test]
fn criterion_8_permutation_invariance() {
    let started = Instant::now();
    let w = AnpWeights::init(Hyperparams::default(), &mut rng(8)).unwrap();
    let pts = realization(80, 60);
    let targets = realization(81, 12);
    let xt: Vec<[f64; 3]> = targets.iter().map(LogPoint::inputs).collect();
    let base_latent = latent_encode(&pts, &w).unwrap();
    let base_r = det_encode(&pts, &xt, &w).unwrap();
    let base_nll = predict_nll(&pts, &targets, &w).unwrap();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mut r = rng(88);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut r);
        let l = latent_encode(&shuffled, &w).unwrap();
        let d = det_encode(&shuffled, &xt, &w).unwrap();
        let n = predict_nll(&shuffled, &targets, &w).unwrap();
        worst = worst
            .max(diff(&l.mu, &base_latent.mu))
            .max(diff(&l.sigma, &base_latent.sigma))
            .max(diff(d.data(), base_r.data()))
            .max(diff(&n.per_point, &base_nll.per_point));
    }
    report(
        8,
        "encoder permutation invariance",
        worst < 1e-10,
        &format!("worst output change {worst:.2e} over 200 permutations"),
        started,
    );
}
