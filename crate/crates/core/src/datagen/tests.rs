use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::physics::{fit_params, Conditions, Equation, FitOptions, LogPoint};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn sample_params_is_seeded_and_in_range() {
    let ranges = SamplingRanges::default();
    let cond = Conditions::default();
    let a = sample_params(&mut rng(1), &ranges, &cond).unwrap();
    let b = sample_params(&mut rng(1), &ranges, &cond).unwrap();
    assert_eq!(a, b);

    let mut r = rng(2);
    let mut counts = [0usize; 3];
    for _ in 0..10_000 {
        let p = sample_params(&mut r, &ranges, &cond).unwrap();
        assert!((ranges.m.0..ranges.m.1).contains(&p.m));
        assert!((ranges.n.0..ranges.n.1).contains(&p.n));
        assert!((ranges.rho_w.0..ranges.rho_w.1).contains(&p.rho_w));
        assert!(p.cec == 0.0 || (ranges.cec.0..ranges.cec.1).contains(&p.cec));
        if p.equation == Equation::Archie {
            assert_eq!(p.cec, 0.0);
        }
        counts[Equation::ALL.iter().position(|&e| e == p.equation).unwrap()] += 1;
    }
    // binomial sd at p = 1/3, n = 10^4 is 0.0047; 0.02 is more than 4 sd
    for c in counts {
        let freq = c as f64 / 10_000.0;
        assert!((freq - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn zero_noise_realization_is_exact_physics() {
    // black_box stops powf(x, 2.0) from being folded into x * x
    let p = std::hint::black_box(
        crate::physics::RockParams::new(2.1, 2.0, 0.04, 40.0, Equation::Sgs).unwrap(),
    );
    let real = gen_realization(&p, 200, &SamplingRanges::default(), &NoiseConfig::none(), &mut rng(3))
        .unwrap();
    assert_eq!(real.len(), DEFAULT_REALIZATION_POINTS);
    for (x, &y) in real.inputs.iter().zip(&real.outputs) {
        assert_eq!(y, p.sigma(x[0], x[1], x[2]), "{x:?}");
    }
    for pt in real.points() {
        pt.validate().unwrap();
    }
}

#[test]
fn one_percent_noise_has_expected_magnitude() {
    let p = crate::physics::RockParams::new(2.0, 2.0, 0.03, 30.0, Equation::Ws).unwrap();
    let ranges = SamplingRanges::default();
    let noise = NoiseConfig {
        input: 0.01,
        output: 0.01,
    };
    let noisy = gen_realization(&p, 200, &ranges, &noise, &mut rng(4)).unwrap();
    let clean = gen_realization(&p, 200, &ranges, &NoiseConfig::none(), &mut rng(4)).unwrap();
    let mean_rel: f64 = noisy
        .outputs
        .iter()
        .zip(&clean.outputs)
        .map(|(a, b)| ((a - b) / b).abs())
        .sum::<f64>()
        / 200.0;
    assert!((0.005..=0.02).contains(&mean_rel), "{mean_rel}");
}

#[test]
fn realization_needs_points() {
    let p = crate::physics::RockParams::new(2.0, 2.0, 0.03, 0.0, Equation::Archie).unwrap();
    assert!(gen_realization(&p, 0, &SamplingRanges::default(), &NoiseConfig::none(), &mut rng(0)).is_err());
}

#[test]
fn training_batches_cover_context_sizes_uniformly() {
    let p = crate::physics::RockParams::new(2.0, 2.0, 0.03, 0.0, Equation::Archie).unwrap();
    let real = gen_realization(&p, 200, &SamplingRanges::default(), &NoiseConfig::default(), &mut rng(5))
        .unwrap();
    let mut r = rng(6);
    let mut hist = [0usize; 51];
    for _ in 0..1000 {
        let batch = make_training_batch(&real, &mut r).unwrap();
        let size = batch.context.len();
        assert!((MIN_CONTEXT..=MAX_CONTEXT).contains(&size));
        hist[size - MIN_CONTEXT] += 1;
        assert_eq!(batch.targets, (0..200).collect::<Vec<_>>());
        let mut dedup = batch.context.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), size, "sampled with replacement");
    }
    // every size appears (P(miss) per size is (50/51)^1000 ~ 2.5e-9)
    assert!(hist.iter().all(|&c| c > 0), "{hist:?}");
    // chi-square with 50 dof; the 0.999 quantile is 86.7
    let expected = 1000.0 / 51.0;
    let chi2: f64 = hist.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 86.7, "chi2 = {chi2}");

    let a = make_training_batch(&real, &mut rng(7)).unwrap();
    let b = make_training_batch(&real, &mut rng(7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn short_realization_cannot_batch() {
    let p = crate::physics::RockParams::new(2.0, 2.0, 0.03, 0.0, Equation::Archie).unwrap();
    let real = gen_realization(&p, 99, &SamplingRanges::default(), &NoiseConfig::none(), &mut rng(8))
        .unwrap();
    assert!(make_training_batch(&real, &mut rng(9)).is_err());
}

#[test]
fn preset_tables() {
    let ws3 = preset("WS-3").unwrap();
    assert_eq!(ws3.rows.len(), 8);
    let r = ws3.rows[4];
    assert_eq!((r.m, r.n, r.rho_w, r.cec), (2.5, 2.2, 0.049, 80.0));
    let ws1 = preset("WS-1").unwrap();
    assert_eq!(ws1.rows.len(), 6);
    let r = ws1.rows[5];
    assert_eq!((r.m, r.n, r.rho_w, r.cec), (2.4, 2.1, 0.048, 60.0));
    assert_eq!(preset("SGS-2").unwrap().rows.len(), 11);
    assert!(preset("SGS-2").unwrap().describe().contains("SGS"));
    assert!(preset("WS-2-smooth").unwrap().smooth);

    let err = preset("bogus").unwrap_err().to_string();
    for name in PRESET_NAMES {
        assert!(err.contains(name), "{err}");
    }
}

fn build(name: &str, noise: NoiseConfig, seed: u64) -> (LabeledSeries, GroundTruth) {
    build_preset(
        &preset(name).unwrap(),
        &BlockPlan::default(),
        &noise,
        &SamplingRanges::default(),
        &Conditions::default(),
        &mut rng(seed),
    )
    .unwrap()
}

#[test]
fn noise_free_preset_points_follow_their_block() {
    for name in ["WS-1", "WS-3", "SGS-1", "SGS-2"] {
        let (series, truth) = build(name, NoiseConfig::none(), 10);
        let labels = series.labels.as_ref().unwrap();
        for (p, &l) in series.points.iter().zip(labels) {
            let expected = truth.params[l].sigma(p.phi, p.sw, p.f_clay);
            assert_eq!(p.sigma_o, expected);
        }
        let k = truth.preset.clusters();
        let blocks = series.blocks().unwrap();
        assert_eq!(blocks.len(), 2 * k);
        assert!(blocks.windows(2).all(|w| w[0].label != w[1].label));
        assert!(blocks.iter().all(|b| b.len == 50));
        assert_eq!(blocks, truth.blocks);
    }
}

#[test]
fn smoothed_preset_blends_only_near_boundaries() {
    let (series, truth) = build("WS-3-smooth", NoiseConfig::none(), 11);
    let labels = series.labels.as_ref().unwrap();
    let mut blended = 0;
    for (i, (p, &l)) in series.points.iter().zip(labels).enumerate() {
        let own = truth.params[l].sigma(p.phi, p.sw, p.f_clay);
        let dist = truth
            .blocks
            .iter()
            .skip(1)
            .map(|b| (i as i64 - b.start as i64).abs())
            .min()
            .unwrap();
        if dist > 5 {
            assert_eq!(p.sigma_o, own, "index {i}");
        } else if p.sigma_o != own {
            blended += 1;
        }
    }
    // 15 boundaries with a 10-sample ramp each
    assert!(blended >= 15 * 9, "{blended}");
}

#[test]
fn noise_free_blocks_are_recovered_by_fitting() {
    let (series, truth) = build("WS-3", NoiseConfig::none(), 12);
    let mut r = rng(13);
    for b in truth.blocks.iter().take(8) {
        let pts = &series.points[b.start..b.start + b.len];
        let fit = fit_params(pts, truth.params[b.label].equation, &FitOptions::default(), &mut r)
            .unwrap();
        assert!(fit.mse < 1e-10, "label {}: {fit:?}", b.label);
    }
}

#[test]
fn regeneration_is_byte_identical() {
    let bytes = |seed| {
        let (s, _) = build("SGS-1", NoiseConfig::default(), seed);
        let mut out = Vec::new();
        s.write_csv_to(&mut out).unwrap();
        out
    };
    assert_eq!(bytes(21), bytes(21));
    assert_ne!(bytes(21), bytes(22));
}

#[test]
fn explicit_plan_is_honoured() {
    let plan = BlockPlan {
        sequence: Some(vec![0, 2, 1]),
        lengths: Some(vec![10, 20, 30]),
        ..BlockPlan::default()
    };
    let (series, _) = build_preset(
        &preset("WS-1").unwrap(),
        &plan,
        &NoiseConfig::default(),
        &SamplingRanges::default(),
        &Conditions::default(),
        &mut rng(1),
    )
    .unwrap();
    assert_eq!(series.len(), 60);
    let bad = BlockPlan {
        sequence: Some(vec![0, 0]),
        ..BlockPlan::default()
    };
    assert!(build_preset(
        &preset("WS-1").unwrap(),
        &bad,
        &NoiseConfig::default(),
        &SamplingRanges::default(),
        &Conditions::default(),
        &mut rng(1),
    )
    .is_err());
}

#[test]
fn csv_without_labels_reads_as_unlabeled() {
    let text = "depth,phi,sw,fclay,sigma_o\n0,0.2,0.5,0.1,1.5\n1,0.25,0.6,0,2\n";
    let s = LabeledSeries::read_csv_from(text.as_bytes()).unwrap();
    assert_eq!(s.len(), 2);
    assert!(s.labels.is_none());
    let bad = "depth,phi,sw,sigma_o\n0,0.2,0.5,1.5\n";
    assert!(LabeledSeries::read_csv_from(bad.as_bytes()).unwrap_err().contains("fclay"));
}

fn point() -> impl Strategy<Value = LogPoint> {
    (1e-6f64..0.999, 1e-6f64..=1.0, 0.0f64..0.999, 1e-9f64..1e3).prop_map(|(phi, sw, f_clay, sigma_o)| {
        LogPoint {
            phi,
            sw,
            f_clay,
            sigma_o,
        }
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(
        points in prop::collection::vec(point(), 1..40),
        labelled in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let labels = labelled.then(|| (0..points.len()).map(|i| (i as u64 ^ seed) as usize % 7).collect());
        let series = LabeledSeries::new(points, labels).unwrap();
        let mut buf = Vec::new();
        series.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        prop_assert!(!text.contains('\r'));
        let back = LabeledSeries::read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, series);
    }
}
