use irlsc::datasets::{fig1_pool, symmetric_pool, LabeledDataset, StreamProtocol};
use irlsc::harness::{aggregate, mean_std, rotate_imbalanced, run_trial, run_trials, Hyper, Method};

fn protocol(imbalanced_class: usize, n_bal: usize, checkpoints: Vec<usize>, n_test: usize, n_trials: usize) -> StreamProtocol {
    StreamProtocol {
        imbalanced_class,
        n_bal,
        checkpoints,
        n_test,
        n_trials,
        seed: 17,
    }
}

fn capacity(cfg: &StreamProtocol) -> usize {
    (cfg.n_bal + cfg.n_val()).max(cfg.max_checkpoint()) + cfg.n_test
}

/// Two-Gaussian pool with class "-1" under-represented.
fn fig1(cfg: &StreamProtocol) -> LabeledDataset {
    fig1_pool(0.9, capacity(cfg), 99).unwrap().1
}

#[test]
fn naive_ignores_a_single_new_example() {
    let cfg = protocol(1, 500, vec![1, 5], 200, 5);
    let data = fig1(&cfg);
    for t in 0..cfg.n_trials {
        let r = run_trial(&data, None, &cfg, t, &[Method::N], &Hyper::fixed(1.0, 0.0)).unwrap();
        let first = &r.records[0];
        assert_eq!(first.checkpoint, 1);
        assert_eq!(first.imbalanced, 0.0, "trial {t}");
    }
}

#[test]
fn recoding_recovers_the_new_class() {
    let cfg = protocol(1, 500, vec![1], 200, 20);
    let data = fig1(&cfg);
    let trials = run_trials(&data, None, &cfg, &[Method::N, Method::RC], &Hyper::fixed(1.0, 1.0), 1).unwrap();
    let result = aggregate(&trials);
    assert_eq!(result.cell(Method::N, 1).unwrap().imbalanced.mean, 0.0);
    assert!(result.cell(Method::RC, 1).unwrap().imbalanced.mean > 0.0);
}

#[test]
fn naive_is_recoding_at_alpha_zero() {
    let cfg = protocol(1, 200, vec![1, 10, 50], 100, 2);
    let data = fig1(&cfg);
    for t in 0..2 {
        let r = run_trial(&data, None, &cfg, t, &[Method::N, Method::RC], &Hyper::fixed(1e-2, 0.0)).unwrap();
        for pair in r.records.chunks(2) {
            let (n, rc) = (&pair[0], &pair[1]);
            assert_eq!((n.total, n.imbalanced, n.balanced), (rc.total, rc.imbalanced, rc.balanced));
        }
    }
}

#[test]
fn accuracies_recombine_by_counts() {
    let cfg = protocol(2, 60, vec![1, 5, 20], 30, 3);
    let data = symmetric_pool(3, capacity(&cfg), 5).unwrap().1;
    let trials = run_trials(&data, None, &cfg, &Method::ALL, &Hyper::fixed(1e-2, 0.7), 1).unwrap();
    let (n_imb, n_bal) = (30.0, 60.0);
    for r in trials.iter().flat_map(|t| &t.records) {
        let recombined = (r.imbalanced * n_imb + r.balanced * n_bal) / (n_imb + n_bal);
        assert!((recombined - r.total).abs() < 1e-12, "{r:?}");
        for v in [r.total, r.imbalanced, r.balanced] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn aggregate_matches_recomputation() {
    let cfg = protocol(0, 40, vec![2, 8], 20, 10);
    let data = symmetric_pool(3, capacity(&cfg), 8).unwrap().1;
    let trials = run_trials(&data, None, &cfg, &Method::ALL, &Hyper::fixed(1e-1, 0.5), 1).unwrap();
    let result = aggregate(&trials);
    assert_eq!(result.cells.len(), 6);
    for cell in &result.cells {
        let values: Vec<f64> = trials
            .iter()
            .flat_map(|t| &t.records)
            .filter(|r| r.method == cell.method && r.checkpoint == cell.checkpoint)
            .map(|r| r.total)
            .collect();
        assert_eq!(values.len(), 10);
        // two-pass textbook formulas
        let mean = values.iter().sum::<f64>() / 10.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
        assert!((cell.total.mean - mean).abs() < 1e-12);
        assert!((cell.total.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&values), (cell.total.mean, cell.total.std));
    }
}

#[test]
fn trials_are_deterministic_and_parallel_safe() {
    let cfg = protocol(1, 50, vec![1, 4], 20, 4);
    let data = fig1(&cfg);
    let hyper = Hyper::fixed(1e-3, 0.7);
    let a = run_trials(&data, None, &cfg, &Method::ALL, &hyper, 1).unwrap();
    let b = run_trials(&data, None, &cfg, &Method::ALL, &hyper, 3).unwrap();
    let strip = |v: &[irlsc::harness::TrialResult]| serde_json::to_string(v).unwrap();
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn grid_hyperparameters_pick_from_the_lists() {
    let cfg = protocol(2, 60, vec![5, 30], 30, 1);
    let data = symmetric_pool(3, capacity(&cfg), 2).unwrap().1;
    let hyper = Hyper {
        lambdas: vec![1e-4, 1e-2, 1.0],
        alphas: vec![0.0, 0.5, 1.0],
    };
    let r = run_trial(&data, None, &cfg, 0, &[Method::N, Method::RC], &hyper).unwrap();
    assert!(hyper.lambdas.contains(&r.lambda));
    for rec in &r.records {
        assert_eq!(rec.lambda, r.lambda);
        assert!(hyper.alphas.contains(&rec.alpha));
        if rec.method == Method::N {
            assert_eq!(rec.alpha, 0.0);
        }
    }
    let bad = Hyper {
        lambdas: vec![1.0],
        alphas: vec![0.5, 1.0],
    };
    assert!(run_trial(&data, None, &cfg, 0, &[Method::RC], &bad).is_err());
}

#[test]
fn rotation_runs_every_class() {
    let cfg = protocol(0, 80, vec![1, 10, 40], 60, 4);
    let data = symmetric_pool(3, capacity(&cfg), 21).unwrap().1;
    let rot = rotate_imbalanced(&data, None, &cfg, &[Method::N, Method::RC], &Hyper::fixed(1e-2, 0.7), 1).unwrap();
    assert_eq!(rot.per_class.len(), 3);
    assert_eq!(rot.trials.len(), 12);
    let mut ids: Vec<usize> = rot.trials.iter().map(|t| t.trial).collect();
    ids.dedup();
    assert_eq!(ids, (0..12).collect::<Vec<_>>());
    let cell = rot.averaged.cell(Method::RC, 40).unwrap();
    assert_eq!(cell.n_trials, 12);
    let per: Vec<f64> = rot
        .per_class
        .iter()
        .map(|(_, r)| r.cell(Method::RC, 40).unwrap().total.mean)
        .collect();
    assert!((per.iter().sum::<f64>() / 3.0 - cell.total.mean).abs() < 1e-12);

    // identical geometry: per-class curves agree within noise
    for (_, r) in &rot.per_class {
        for &c in &r.checkpoints {
            let a = r.cell(Method::RC, c).unwrap();
            let b = rot.averaged.cell(Method::RC, c).unwrap();
            let spread = 3.0 * (a.total.std.max(b.total.std) + 0.02);
            assert!((a.total.mean - b.total.mean).abs() <= spread, "checkpoint {c}");
        }
    }
}
