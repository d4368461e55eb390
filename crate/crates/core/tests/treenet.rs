use hypertrees::data::{build_design, build_lags, split_holdout, Design, FeatureSpec, Frequency, PanelDataset};
use hypertrees::datasets::{air_passengers, ar_dataset};
use hypertrees::forecast::{forecast, ForecastOptions};
use hypertrees::grad::finite_diff_check;
use hypertrees::metrics::{mape, wape};
use hypertrees::targets::{ar_derivatives, TargetModelSpec};
use hypertrees::treenet::{train, Flow, Mlp, Projection, Trainer, TreeNetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ar_design(p: usize, seed: u64) -> Design {
    let ds = build_lags(&ar_dataset(&[0.6, -0.3], 80, 1.0, seed), p).unwrap();
    build_design(&ds, &FeatureSpec::calendar_only(Frequency::Monthly)).unwrap()
}

struct Holdout {
    lagged: PanelDataset,
    features: FeatureSpec,
    design: Design,
    actual: Vec<f64>,
}

fn air_holdout(features: FeatureSpec) -> Holdout {
    let (train_part, test_part) = split_holdout(&air_passengers().unwrap(), 12).unwrap();
    let lagged = build_lags(&train_part, 12).unwrap();
    let design = build_design(&lagged, &features).unwrap();
    Holdout {
        lagged,
        features,
        design,
        actual: test_part.series[0].values.clone(),
    }
}

fn holdout_forecast(h: &Holdout, config: &TreeNetConfig) -> Vec<f64> {
    let (model, _) = train(&h.design, &TargetModelSpec::ar(12), config).unwrap();
    let fc = forecast(&model, &h.lagged, &h.features, 12, None, ForecastOptions::default()).unwrap();
    fc.series(0).to_vec()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    0.5 * (xs[(n - 1) / 2] + xs[n / 2])
}

#[test]
fn embedding_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100u64 {
        let p = 1 + (case % 3) as usize;
        let design = ar_design(p, case);
        let config = TreeNetConfig {
            d: 1 + (case % 2) as usize,
            hidden: 8,
            seed: case,
            ..TreeNetConfig::default()
        };
        let trainer = Trainer::new(&design, &TargetModelSpec::ar(p), &config).unwrap();
        let model = &trainer.model;
        let n = design.x.n_rows();
        let e: Vec<f64> = (0..n * model.d()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (gh, _) = model.embedding_grad_hess(&design.x, &design.target, &e).unwrap();
        let d = model.d();
        let analytic: Vec<f64> = (0..n * d).map(|j| gh[j % d].g[j / d]).collect();
        let err = finite_diff_check(
            |t| model.objective_at(&design.x, &design.target, t),
            &e,
            &analytic,
            // Small enough that no probe straddles a ReLU kink in these cases.
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "case {case}: relative error {err}");
        let active = &design.target.active;
        assert!(gh.iter().all(|g| g.h.iter().zip(active).all(|(&h, &a)| !a || h >= 1e-6)));
    }
}

#[test]
fn identity_network_reduces_to_ar_derivatives() {
    let design = ar_design(1, 5);
    let config = TreeNetConfig {
        hidden: 1,
        dropout: 0.0,
        ..TreeNetConfig::default()
    };
    let mut trainer = Trainer::new(&design, &TargetModelSpec::ar(1), &config).unwrap();
    let model = &mut trainer.model;
    model.projection = Some(Projection {
        k: 1,
        d: 1,
        matrix: vec![1.0],
        seed: 0,
    });
    model.mlp = Mlp {
        n_in: 1,
        hidden: 1,
        n_out: 1,
        w1: vec![1.0],
        b1: vec![0.0],
        w2: vec![1.0],
        b2: vec![0.0],
    };
    let n = design.x.n_rows();
    let e: Vec<f64> = (0..n).map(|i| 0.1 + 0.8 * i as f64 / n as f64).collect();
    let (gh, _) = model.embedding_grad_hess(&design.x, &design.target, &e).unwrap();
    let t = &design.target;
    let (_, grad, hess) = ar_derivatives(&e, &t.lags, &t.y, &t.active, 1);
    for i in 0..n {
        if t.active[i] {
            assert!((gh[0].g[i] - grad[i]).abs() <= 1e-12 * grad[i].abs().max(1.0));
            assert!((gh[0].h[i] - hess[i].max(1e-6)).abs() <= 1e-12 * hess[i].max(1.0));
        } else {
            assert_eq!(gh[0].g[i], 0.0);
        }
    }
}

#[test]
fn zero_residuals_give_zero_embedding_gradient() {
    // AR(1) data that the untrained network fits exactly: y_t = theta * y_{t-1}
    // with theta equal to the network's constant output.
    let design = ar_design(1, 2);
    let mut trainer = Trainer::new(&design, &TargetModelSpec::ar(1), &TreeNetConfig::default()).unwrap();
    trainer.model.zero_mlp();
    trainer.model.mlp.b2 = vec![0.5];
    let mut exact = design.clone();
    let t = &mut exact.target;
    for i in 0..t.y.len() {
        t.y[i] = 0.5 * t.lags[i];
    }
    let e = vec![0.3; exact.x.n_rows()];
    let (gh, obj) = trainer.model.embedding_grad_hess(&exact.x, &exact.target, &e).unwrap();
    assert_eq!(obj, 0.0);
    assert!(gh[0].g.iter().all(|&g| g == 0.0));
}

#[test]
fn frozen_zero_network_leaves_trees_as_single_leaves() {
    let design = ar_design(2, 3);
    let mut trainer = Trainer::new(&design, &TargetModelSpec::ar(2), &TreeNetConfig::default()).unwrap();
    trainer.model.zero_mlp();
    for _ in 0..5 {
        trainer.step().unwrap();
    }
    let model = &trainer.model;
    assert!(model.mlp.w1.iter().chain(&model.mlp.w2).all(|&w| w == 0.0));
    for ens in &model.embed {
        assert_eq!(ens.trees.len(), 5);
        assert!(ens.trees.iter().all(|t| t.n_leaves() == 1));
    }
    assert!(trainer.embeddings().iter().all(|&e| e == 0.0));
}

#[test]
fn untrained_model_outputs_network_at_zero_embedding() {
    let design = ar_design(2, 4);
    let config = TreeNetConfig {
        iterations: 0,
        ..TreeNetConfig::default()
    };
    let (model, log) = train(&design, &TargetModelSpec::ar(2), &config).unwrap();
    assert!(log.losses.is_empty());
    let fwd = model.forward(&design.x, None).unwrap();
    assert!(fwd.embeddings.iter().all(|&e| e == 0.0));
    // Oracle: the MLP evaluated by hand at z = P * 0 = 0.
    let m = &model.mlp;
    let act: Vec<f64> = m.b1.iter().map(|b| b.max(0.0)).collect();
    for j in 0..2 {
        let expect = m.b2[j] + (0..m.hidden).map(|h| m.w2[j * m.hidden + h] * act[h]).sum::<f64>();
        for i in 0..design.x.n_rows() {
            assert!((fwd.raw[i * 2 + j] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn eval_forward_is_deterministic_and_training_forward_is_not() {
    let design = ar_design(3, 6);
    let config = TreeNetConfig {
        iterations: 5,
        ..TreeNetConfig::default()
    };
    let (model, _) = train(&design, &TargetModelSpec::ar(3), &config).unwrap();
    let a = model.forward(&design.x, None).unwrap();
    let b = model.forward(&design.x, None).unwrap();
    assert_eq!(a.raw, b.raw);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = model.forward(&design.x, Some(&mut rng)).unwrap();
    assert_ne!(a.raw, c.raw);
    let dropped = c.raw.iter().zip(&a.raw).filter(|(c, a)| c != a && **c == 0.0).count();
    assert!(dropped > 0);
}

#[test]
fn projection_is_fixed_during_training() {
    let design = ar_design(2, 7);
    let config = TreeNetConfig {
        iterations: 10,
        seed: 9,
        ..TreeNetConfig::default()
    };
    let before = Trainer::new(&design, &TargetModelSpec::ar(2), &config).unwrap().model.projection;
    let (model, _) = train(&design, &TargetModelSpec::ar(2), &config).unwrap();
    let (a, b) = (before.unwrap(), model.projection.unwrap());
    assert_eq!(a.matrix.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.matrix.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!((a.k, a.d), (2, 1));
}

#[test]
fn flows_agree_without_updates() {
    let design = ar_design(2, 8);
    let base = TreeNetConfig {
        iterations: 10,
        dropout: 0.0,
        mlp_lr: 0.0,
        ..TreeNetConfig::default()
    };
    let (sep, _) = train(&design, &TargetModelSpec::ar(2), &base).unwrap();
    let shared_config = TreeNetConfig { flow: Flow::Shared, ..base };
    let (shared, _) = train(&design, &TargetModelSpec::ar(2), &shared_config).unwrap();
    assert_eq!(sep.mlp, shared.mlp);
    assert_eq!(sep.embed, shared.embed);
    assert_eq!(
        sep.forward(&design.x, None).unwrap().raw,
        shared.forward(&design.x, None).unwrap().raw
    );
}

#[test]
fn both_flows_reduce_training_loss() {
    let design = ar_design(2, 10);
    for flow in [Flow::Separate, Flow::Shared] {
        let config = TreeNetConfig {
            iterations: 50,
            flow,
            ..TreeNetConfig::default()
        };
        let (_, log) = train(&design, &TargetModelSpec::ar(2), &config).unwrap();
        assert_eq!(log.losses.len(), 50);
        let last = *log.losses.last().unwrap();
        assert!(last < log.initial_loss, "{flow:?}: {} -> {last}", log.initial_loss);
    }
}

#[test]
fn training_is_reproducible() {
    let design = ar_design(2, 11);
    let config = TreeNetConfig {
        iterations: 10,
        seed: 4,
        ..TreeNetConfig::default()
    };
    let (a, la) = train(&design, &TargetModelSpec::ar(2), &config).unwrap();
    let (b, lb) = train(&design, &TargetModelSpec::ar(2), &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(la.losses, lb.losses);
}

#[test]
fn invalid_config_lists_every_violation() {
    let config = TreeNetConfig {
        d: 0,
        hidden: 0,
        dropout: 1.5,
        ..TreeNetConfig::default()
    };
    let msg = config.validate().unwrap_err().to_string();
    assert!(msg.contains("d must") && msg.contains("hidden") && msg.contains("dropout"), "{msg}");
}

#[test]
fn air_passengers_embeddings_repeat_every_twelve_months() {
    let h = air_holdout(FeatureSpec::calendar_only(Frequency::Monthly));
    let config = TreeNetConfig {
        iterations: 30,
        ..TreeNetConfig::default()
    };
    let (model, _) = train(&h.design, &TargetModelSpec::ar(12), &config).unwrap();
    let e = model.embeddings(&h.design.x).unwrap();
    assert!(e.iter().any(|&v| v != 0.0));
    for i in 12..e.len() {
        assert_eq!(e[i].to_bits(), e[i - 12].to_bits(), "row {i}");
    }
    let theta = model.forward(&h.design.x, None).unwrap().raw;
    for i in 12..e.len() {
        assert_eq!(theta[i * 12..(i + 1) * 12], theta[(i - 12) * 12..(i - 11) * 12]);
    }
}

// Accuracy varies noticeably with the seed, so the checks use medians.
const SEEDS: u64 = 30;
#[test]
fn air_passengers_treenet_beats_constant_ar_and_flows_agree() {
    let h = air_holdout(FeatureSpec::for_frequency(Frequency::Monthly, false));
    let mut mapes = Vec::new();
    let mut sep = Vec::new();
    let mut shared = Vec::new();
    for seed in 0..SEEDS {
        let config = TreeNetConfig {
            seed,
            ..TreeNetConfig::default()
        };
        let f = holdout_forecast(&h, &config);
        mapes.push(mape(&h.actual, &f).unwrap());
        sep.push(wape(&h.actual, &f).unwrap());
        let f = holdout_forecast(&h, &TreeNetConfig { flow: Flow::Shared, ..config });
        shared.push(wape(&h.actual, &f).unwrap());
    }
    let m = median(mapes);
    assert!(m < 8.630, "median MAPE {m}");
    let (s, t) = (median(sep), median(shared));
    assert!((t - s).abs() <= 0.1 * s, "separate {s}, shared {t}");
}
