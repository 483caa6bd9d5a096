use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitopt::datasets::{load_idx, parse_idx, synth_blobs, to_idx};
use splitopt::experiment::{emit_metrics, read_metrics, run_experiment, DatasetSpec, ExperimentConfig, MetricsRecord};
use splitopt::optim::{
    adadelta_step, adagrad_step, adam_step, rmsprop_step, ssa1_ada_step, ssa1_step, AdaptiveHyperParams, AdaptiveState,
    InertialState, OptimizerKind, OptimizerSpec, SplitHyperParams, Ssa1AdaOrder,
};
use splitopt::MomentumSchedule;

#[test]
fn idx_round_trip_quantises_to_half_a_level() {
    let ds = synth_blobs(30, 3, 12, 4.0, 5).unwrap();
    let (img, lbl) = to_idx(&ds, 3, 4).unwrap();
    let back = parse_idx(&img, &lbl).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.dim(), 12);
    let worst = ds
        .images()
        .iter()
        .zip(back.images())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1.0 / 510.0 + 1e-12, "worst {worst}");
}

#[test]
fn idx_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_blobs(10, 2, 4, 3.0, 9).unwrap();
    let (img, lbl) = to_idx(&ds, 2, 2).unwrap();
    let (ip, lp) = (dir.path().join("img.idx"), dir.path().join("lbl.idx"));
    std::fs::write(&ip, &img).unwrap();
    std::fs::write(&lp, &lbl).unwrap();
    let loaded = load_idx(&ip, &lp).unwrap();
    assert_eq!(loaded.len(), 20);
    assert!(load_idx(&lp, &ip).is_err());
    assert!(load_idx(&dir.path().join("missing"), &lp).is_err());
}

#[test]
fn accumulators_stay_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 4;
    let grads: Vec<Vec<f64>> = (0..10_000)
        .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();

    let check = |s: &AdaptiveState| {
        assert!(s.acc_grad_sq.iter().all(|&x| x >= 0.0));
        assert!(s.acc_update_sq.iter().all(|&x| x >= 0.0));
        assert!(s.theta.iter().all(|x| x.is_finite()));
    };
    type Step = fn(&mut AdaptiveState, &[f64], &AdaptiveHyperParams) -> splitopt::Result<()>;
    let steps: [(Step, AdaptiveHyperParams); 4] = [
        (adagrad_step, AdaptiveHyperParams::adagrad()),
        (adadelta_step, AdaptiveHyperParams::adadelta()),
        (rmsprop_step, AdaptiveHyperParams::rmsprop()),
        (adam_step, AdaptiveHyperParams::adam()),
    ];
    for (step, hp) in steps {
        let mut s = AdaptiveState::new(vec![0.0; dim], hp.eps);
        for g in &grads {
            step(&mut s, g, &hp).unwrap();
            check(&s);
        }
    }

    let hp = AdaptiveHyperParams::ssa1_ada();
    let mut s = AdaptiveState::new(vec![0.5; dim], hp.eps);
    let mut it = grads.iter();
    for _ in 0..5_000 {
        ssa1_ada_step(
            &mut s,
            |_: &[f64]| it.next().unwrap().clone(),
            &hp,
            MomentumSchedule::NOverNPlus3,
            Ssa1AdaOrder::AsWritten,
        )
        .unwrap();
        check(&s);
    }
}

#[test]
fn rmsprop_and_adadelta_share_the_squared_gradient_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hp_r = AdaptiveHyperParams::rmsprop();
    let mut hp_d = AdaptiveHyperParams::adadelta();
    hp_d.rho = hp_r.rho;
    let mut r = AdaptiveState::new(vec![0.0; 3], hp_r.eps);
    let mut d = AdaptiveState::new(vec![0.0; 3], hp_d.eps);
    for _ in 0..500 {
        let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        rmsprop_step(&mut r, &g, &hp_r).unwrap();
        adadelta_step(&mut d, &g, &hp_d).unwrap();
        assert_eq!(r.acc_grad_sq, d.acc_grad_sq);
    }
}

#[test]
fn adadelta_fixed_point_is_scale_free() {
    let hp = AdaptiveHyperParams::adadelta();
    let last_step = |c: f64| {
        let mut s = AdaptiveState::new(vec![0.0], hp.eps);
        let mut prev = 0.0;
        for _ in 0..10_000 {
            prev = s.theta[0];
            adadelta_step(&mut s, &[c], &hp).unwrap();
        }
        (s.theta[0] - prev).abs()
    };
    let (small, large) = (last_step(1.0), last_step(100.0));
    assert!(small > 0.0);
    assert!((small - large).abs() / large < 1e-3, "{small} vs {large}");
}

#[test]
fn ssa1_ada_with_unit_rate_matches_ssa1() {
    // With a zero gradient the adaptive rate is exactly h, so both methods coast identically.
    let h = 0.3;
    let hp_a = AdaptiveHyperParams::ssa1_ada().with_h(h);
    let hp_s = SplitHyperParams::new(h, hp_a.k).unwrap();
    let schedule = MomentumSchedule::NOverNPlus3;
    let mut a = AdaptiveState::new(vec![1.0, -2.0], hp_a.eps);
    a.v = vec![0.5, 1.5];
    let mut s = InertialState::with_velocity(vec![1.0, -2.0], vec![0.5, 1.5]).unwrap();
    let zero = |x: &[f64]| vec![0.0; x.len()];
    for _ in 0..50 {
        ssa1_ada_step(&mut a, zero, &hp_a, schedule, Ssa1AdaOrder::ZFirst).unwrap();
        ssa1_step(&mut s, zero, &hp_s, schedule).unwrap();
        for i in 0..2 {
            assert!((a.theta[i] - s.u[i]).abs() <= 1e-12);
            assert!((a.v[i] - s.v[i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn adam_bias_correction_recovers_constant_gradient() {
    let hp = AdaptiveHyperParams::adam();
    let mut s = AdaptiveState::new(vec![0.0, 0.0], hp.eps);
    let g = [0.7, -3.0];
    for n in 1..=200 {
        adam_step(&mut s, &g, &hp).unwrap();
        for ((m, v), g) in s.mom.iter().zip(&s.acc_grad_sq).zip(g) {
            let m_hat = m / (1.0 - hp.beta1.powi(n));
            let v_hat = v / (1.0 - hp.beta2.powi(n));
            assert!((m_hat - g).abs() <= 1e-12 * g.abs());
            assert!((v_hat - g * g).abs() <= 1e-12 * g * g);
        }
    }
}

#[test]
fn metrics_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let records: Vec<MetricsRecord> = (1..=5)
        .map(|e| MetricsRecord {
            epoch: e,
            train_loss: 1.0 / (e as f64 * 3.7),
            train_acc: 1.0 - 0.123456789 / e as f64,
            test_loss: 2.0e-7 * e as f64,
            test_acc: 0.5,
            epoch_time_s: 0.0123456789 * e as f64,
        })
        .collect();
    emit_metrics(&records, &path).unwrap();
    let back = read_metrics(&path).unwrap();
    assert_eq!(back.len(), records.len());
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-300);
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.epoch, b.epoch);
        for (x, y) in [
            (a.train_loss, b.train_loss),
            (a.train_acc, b.train_acc),
            (a.test_loss, b.test_loss),
            (a.test_acc, b.test_acc),
            (a.epoch_time_s, b.epoch_time_s),
        ] {
            assert!(rel(x, y) <= 1e-5, "{x} vs {y}");
        }
    }
    assert!(emit_metrics(&records, &dir.path().join("no/such/dir/m.csv")).is_err());
}

#[test]
fn registry_covers_every_optimizer() {
    let names: Vec<&str> = OptimizerKind::ALL.iter().map(|k| k.name()).collect();
    for expected in [
        "sgd",
        "polyak",
        "nesterov",
        "nesterov-velocity",
        "nesterov-const",
        "ssa1",
        "ssa2",
        "ssa1-const",
        "ssa2-const",
        "adagrad",
        "adadelta",
        "rmsprop",
        "adam",
        "ssa1-ada",
        "ssa1-ada-zfirst",
    ] {
        assert!(names.contains(&expected), "missing {expected}");
    }
    assert_eq!(names.len(), 15);
}

#[test]
fn every_optimizer_trains_a_few_epochs() {
    for kind in OptimizerKind::ALL {
        let lr = if kind.is_adaptive() { kind.default_lr() } else { 0.05 };
        let mut cfg = ExperimentConfig::new(OptimizerSpec::new(kind).with_lr(lr));
        cfg.epochs = 3;
        cfg.batch_size = 16;
        cfg.dataset = DatasetSpec::Synthetic {
            n_per_class: 50,
            classes: 3,
            dim: 4,
            separation: 6.0,
        };
        let records = run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
        assert_eq!(records.len(), 3);
        for r in &records {
            assert!((0.0..=1.0).contains(&r.train_acc) && (0.0..=1.0).contains(&r.test_acc));
            assert!(r.epoch_time_s >= 0.0 && r.train_loss.is_finite());
        }
    }
}
