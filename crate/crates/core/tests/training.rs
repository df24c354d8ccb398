mod common;

use common::{history_composes, load_config};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simpo::{
    action_distribution, init_params, loss_and_grad, model_profile, simpo_fit, task_grad,
    two_stage_fit, Architecture, Dataset, LabeledSample, PredictorParams, TrainConfig,
    WeightConfig, WeightedExample,
};

fn well_specified() -> (
    simpo::Problem,
    Dataset,
    Dataset,
    Dataset,
    TrainConfig,
    Architecture,
) {
    let cfg = load_config("newsvendor_linear.json");
    let scenario = cfg.scenario();
    let (train, val, test) = scenario.splits(cfg.seed).unwrap();
    (
        scenario.problem(),
        train,
        val,
        test,
        cfg.train_config(),
        cfg.model,
    )
}

#[test]
fn reduction_matches_two_stage_bit_for_bit() {
    let (problem, train, val, _, base, arch) = well_specified();
    for seed in 0..3 {
        let config = TrainConfig {
            weights: WeightConfig {
                alpha: 0.0,
                task_term_enabled: false,
                ..base.weights
            },
            seed,
            record_trajectory: true,
            ..base
        };
        let a = simpo_fit(&problem, &train, &val, arch, &config).unwrap();
        let b = two_stage_fit(&problem, &train, &val, arch, &config).unwrap();
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (pa, pb) in a.trajectory.iter().zip(&b.trajectory) {
            let bits =
                |p: &PredictorParams| p.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(pa), bits(pb));
        }
        assert_eq!(a.z_star.to_bits(), b.z_star.to_bits());
        assert_eq!(a.iters_run, b.iters_run);
    }
}

#[test]
fn well_specified_joint_fit_recovers_the_optimum() {
    let (problem, train, val, _, config, arch) = well_specified();
    let res = simpo_fit(&problem, &train, &val, arch, &config).unwrap();
    let step = problem.grid.step();
    assert!(
        (res.z_star - 2.0).abs() <= step + 1e-12,
        "z_star = {}",
        res.z_star
    );
    history_composes(&res).unwrap();
}

#[test]
fn frozen_coefficient_objective_descends_at_small_step() {
    let (problem, train, val, _, base, arch) = well_specified();
    let config = TrainConfig {
        learning_rate: 1e-3,
        max_iters: 200,
        record_trajectory: true,
        ..base
    };
    let res = simpo_fit(&problem, &train, &val, arch, &config).unwrap();
    let batch: Vec<WeightedExample<'_>> = train
        .samples()
        .iter()
        .map(|s| WeightedExample {
            x: &s.x,
            z: s.z_obs,
            y: s.y,
            weight: 1.0,
        })
        .collect();
    let inputs = val.inputs();
    let mut before = init_params(arch, config.seed).unwrap();
    let mut descents = 0;
    for (row, after) in res.history.iter().zip(&res.trajectory) {
        let profile = model_profile(&before, &inputs, &problem.grid, &problem).unwrap();
        let probs = action_distribution(&profile, config.weights.tau).unwrap();
        let frozen = |p: &PredictorParams| {
            let pred = loss_and_grad(p, &batch, &problem).unwrap().0;
            let task = task_grad(p, &inputs, &problem.grid, &probs, &problem)
                .unwrap()
                .0;
            row.omega * pred + row.gamma * task
        };
        if frozen(after) <= frozen(&before) {
            descents += 1;
        }
        before = after.clone();
    }
    let n = res.history.len();
    assert!(
        descents as f64 >= 0.95 * n as f64,
        "{descents}/{n} descending steps"
    );
}

/// Least squares on `[x, z, 1]` by the normal equations.
fn least_squares(data: &Dataset) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = data
        .samples()
        .iter()
        .map(|s| {
            let mut r = s.x.clone();
            r.push(s.z_obs);
            r.push(1.0);
            r
        })
        .collect();
    let k = rows[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, s) in rows.iter().zip(data.samples()) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][k] += r[i] * s.y;
        }
    }
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                let pivot = a[c].clone();
                for (v, p) in a[r].iter_mut().zip(&pivot).skip(c) {
                    *v -= f * p;
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

#[test]
fn noiseless_two_stage_agrees_with_least_squares_scan() {
    let cfg = load_config("newsvendor_linear.json");
    let truth = cfg.problem.true_model.clone();
    let grid = cfg.problem.grid.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut make = |n: usize| {
        let samples = (0..n)
            .map(|_| {
                let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let z = grid.points()[rng.random_range(0..grid.n_points())];
                let y = truth.mean_outcome(&x, z);
                LabeledSample { x, z_obs: z, y }
            })
            .collect();
        Dataset::new(samples).unwrap()
    };
    let (train, val) = (make(600), make(200));
    let problem = cfg.scenario().problem();
    let arch = Architecture::linear(2);
    let config = TrainConfig {
        learning_rate: 0.05,
        max_iters: 4000,
        tol: 1e-15,
        patience: 50,
        ..cfg.train_config()
    };
    let res = two_stage_fit(&problem, &train, &val, arch, &config).unwrap();

    let ls = PredictorParams::from_weights(arch, least_squares(&train)).unwrap();
    for (got, want) in ls.weights().iter().zip([0.5, 0.3, -0.3, 2.6]) {
        assert!((got - want).abs() < 1e-9);
    }
    let oracle = model_profile(&ls, &val.inputs(), &grid, &problem).unwrap();
    let z_ls = grid.points()[oracle.argmin_index()];
    assert!(
        (res.z_star - z_ls).abs() <= grid.step() + 1e-12,
        "{} vs {}",
        res.z_star,
        z_ls
    );
    for (got, want) in res.params_star.weights().iter().zip(ls.weights()) {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn fits_are_deterministic_per_seed() {
    let (problem, train, val, _, config, _) = well_specified();
    let arch = Architecture::mlp1(2, 4);
    let cfg = TrainConfig {
        batch_size: 64,
        max_iters: 60,
        ..config
    };
    let a = simpo_fit(&problem, &train, &val, arch, &cfg).unwrap();
    let b = simpo_fit(&problem, &train, &val, arch, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simpo_fit(
        &problem,
        &train,
        &val,
        arch,
        &TrainConfig {
            seed: cfg.seed + 1,
            ..cfg
        },
    )
    .unwrap();
    assert_ne!(a.params_star, c.params_star);
}

#[test]
fn histories_compose_and_anchor_once() {
    let (problem, train, val, _, config, arch) = well_specified();
    let cfg = TrainConfig {
        max_iters: 40,
        ..config
    };
    for res in [
        simpo_fit(&problem, &train, &val, arch, &cfg).unwrap(),
        two_stage_fit(&problem, &train, &val, arch, &cfg).unwrap(),
    ] {
        history_composes(&res).unwrap();
        assert_eq!(res.history.len(), res.iters_run);
        for (i, r) in res.history.iter().enumerate() {
            assert_eq!(r.iter, i + 1);
            assert!(r.omega >= 1.0 && r.gamma > 0.0 && r.gamma <= 1.0);
            assert!(problem.grid.contains(r.z_star_test));
        }
    }
    let base = two_stage_fit(&problem, &train, &val, arch, &cfg).unwrap();
    assert!(base
        .history
        .iter()
        .all(|r| r.omega == 1.0 && r.gamma == 1.0 && r.task_term == 0.0));
}

#[test]
fn mismatched_features_are_rejected() {
    let (problem, train, val, _, config, _) = well_specified();
    let err = simpo_fit(&problem, &train, &val, Architecture::linear(3), &config).unwrap_err();
    assert!(err.to_string().contains("features"), "{err}");
}
