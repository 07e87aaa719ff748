use feederlab::anfis::{
    fit_consequents, fit_vdc_estimator, gradient_check, numeric_premise_gradient,
    parse_training_csv, premise_gradient, sse, train_hybrid, AnfisError, AnfisModel, FitOptions,
    MembershipFunction, RuleWiring, TrainingSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn grid_rows(f: impl Fn(f64, f64) -> f64, n: usize) -> Vec<[f64; 3]> {
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let y = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            rows.push([x, y, f(x, y)]);
        }
    }
    rows
}

fn default_model() -> AnfisModel {
    AnfisModel::new(2, RuleWiring::Grid, (-1.0, 1.0), (-1.0, 1.0)).unwrap()
}

fn random_model(rng: &mut ChaCha20Rng) -> AnfisModel {
    let mut m = default_model();
    for mf in m.premise.iter_mut().flatten() {
        mf.a = rng.random_range(0.5..1.5);
        mf.b = rng.random_range(1.0..3.0);
        mf.c += rng.random_range(-0.3..0.3);
    }
    for c in &mut m.consequents {
        for v in c.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    m
}

fn random_data(rng: &mut ChaCha20Rng, n: usize) -> TrainingSet {
    let rows = (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y = rng.random_range(-1.0..1.0);
            [x, y, (2.0 * x).sin() + y * y]
        })
        .collect();
    TrainingSet::new(rows).unwrap()
}

#[test]
fn premise_gradient_matches_central_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..5 {
        let m = random_model(&mut rng);
        let d = random_data(&mut rng, 20);
        let err = gradient_check(&m, &d, 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err:e}");
    }
}

#[test]
fn gradient_check_is_stable_across_steps() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let m = random_model(&mut rng);
    let d = random_data(&mut rng, 20);
    let small = gradient_check(&m, &d, 1e-6).unwrap();
    let large = gradient_check(&m, &d, 1e-5).unwrap();
    let ratio = small.max(large) / small.min(large).max(1e-300);
    assert!(ratio < 10.0, "{small:e} vs {large:e}");
    assert!(gradient_check(&m, &d, 1e-9).is_err());
}

#[test]
fn perfect_fit_of_constant_data_has_vanishing_gradients() {
    let mut m = default_model();
    let d = TrainingSet::new(grid_rows(|_, _| 2.5, 5)).unwrap();
    fit_consequents(&mut m, &d).unwrap();
    let g = premise_gradient(&m, &d).unwrap();
    let n = numeric_premise_gradient(&m, &d, 1e-5).unwrap();
    assert!(g.iter().all(|v| v.abs() <= 1e-10), "{g:?}");
    assert!(n.iter().all(|v| v.abs() <= 1e-10), "{n:?}");
}

#[test]
fn linear_target_trains_below_threshold() {
    let d = TrainingSet::new(grid_rows(|x, y| 2.0 * x + 3.0 * y - 1.0, 7)).unwrap();
    let r = train_hybrid(&default_model(), &d, 50, 0.01).unwrap();
    assert_eq!(r.rmse.len(), 51);
    assert!(r.final_rmse < 1e-3, "{}", r.final_rmse);
    assert!(r.rmse.iter().all(|v| *v >= 0.0));
}

#[test]
fn consequent_only_pass_is_exact_for_linear_targets() {
    let d = TrainingSet::new(grid_rows(|x, y| 2.0 * x + 3.0 * y - 1.0, 7)).unwrap();
    let r = train_hybrid(&default_model(), &d, 1, 0.0).unwrap();
    assert!(r.rmse[1] < 1e-6);
    assert_eq!(r.model.premise, default_model().premise);
}

#[test]
fn zero_epochs_reports_initial_rmse_only() {
    let d = TrainingSet::new(grid_rows(|x, y| x * y, 5)).unwrap();
    let m = default_model();
    let r = train_hybrid(&m, &d, 0, 0.01).unwrap();
    assert_eq!(r.rmse.len(), 1);
    assert_eq!(r.model.premise, m.premise);
    assert!(!r.converged);
}

#[test]
fn lse_step_never_increases_rmse() {
    let d = TrainingSet::new(grid_rows(|x, y| (3.0 * x).sin() * y.cos(), 9)).unwrap();
    let r = train_hybrid(&default_model(), &d, 30, 0.05).unwrap();
    for (k, before) in r.rmse_before_lse.iter().enumerate() {
        assert!(r.rmse[k + 1] <= before + 1e-12, "epoch {k}");
    }
}

#[test]
fn lse_solution_is_a_local_minimum_in_every_coefficient() {
    let d = TrainingSet::new(grid_rows(|x, y| (2.0 * x).tanh() - y * y, 8)).unwrap();
    let mut m = default_model();
    fit_consequents(&mut m, &d).unwrap();
    let base = sse(&m, &d).unwrap();
    for i in 0..m.consequents.len() {
        for k in 0..3 {
            for delta in [1e-3, -1e-3] {
                let mut p = m.clone();
                p.consequents[i][k] += delta;
                assert!(sse(&p, &d).unwrap() >= base, "rule {i} coefficient {k}");
            }
        }
    }
}

#[test]
fn normalization_and_convexity_on_random_inputs() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let m = random_model(&mut rng);
    for _ in 0..10_000 {
        let x = rng.random_range(-5.0..5.0);
        let y = rng.random_range(-5.0..5.0);
        let w = m.normalized_firing(x, y).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        let f = m.rule_outputs(x, y);
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = m.infer(x, y).unwrap();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        assert!(out >= lo - slack && out <= hi + slack);
    }
}

#[test]
fn inference_examples() {
    let mut one = AnfisModel::new(1, RuleWiring::Grid, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
    one.consequents = vec![[0.0, 0.0, 5.0]];
    assert_eq!(one.infer(0.3, -7.0).unwrap(), 5.0);

    let mut two = AnfisModel::new(2, RuleWiring::Paired, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
    two.premise[0] = vec![
        MembershipFunction::new(1.0, 2.0, 0.0).unwrap(),
        MembershipFunction::new(1.0, 2.0, 100.0).unwrap(),
    ];
    two.premise[1] = vec![
        MembershipFunction::new(1.0, 2.0, 0.0).unwrap(),
        MembershipFunction::new(1.0, 2.0, 0.0).unwrap(),
    ];
    two.consequents = vec![[0.0, 0.0, 2.0], [0.0, 0.0, 4.0]];
    // x at the first center, far from the second.
    assert!((two.infer(0.0, 0.3).unwrap() - 2.0).abs() < 1e-3);
    // Identical firing gives the midpoint.
    assert!((two.infer(50.0, 0.3).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn vdc_estimator_generalizes() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let g = |e1: f64, e2: f64| 0.5 * e1 + 0.1 * e2;
    let train: Vec<[f64; 3]> = (0..200)
        .map(|_| {
            let e1 = rng.random_range(-50.0..50.0);
            let e2 = rng.random_range(-20.0..20.0);
            [e1, e2, g(e1, e2)]
        })
        .collect();
    let est = fit_vdc_estimator(&train, &FitOptions::default()).unwrap();
    let lo = train.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    let hi = train.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max);
    let mut se = 0.0;
    let n = 100;
    for _ in 0..n {
        let e1 = rng.random_range(-45.0..45.0);
        let e2 = rng.random_range(-18.0..18.0);
        let d = est.predict(e1, e2).unwrap() - g(e1, e2);
        se += d * d;
    }
    let rmse = (se / n as f64).sqrt();
    assert!(rmse < 1e-2 * (hi - lo), "held-out rmse {rmse}");
}

#[test]
fn vdc_estimator_edge_cases() {
    let constant: Vec<[f64; 3]> = (0..30)
        .map(|k| [k as f64, (k * 7 % 11) as f64, 4.0])
        .collect();
    let est = fit_vdc_estimator(&constant, &FitOptions::default()).unwrap();
    for k in 0..30 {
        let v = est.predict(k as f64 + 0.5, 3.3).unwrap();
        assert!((v - 4.0).abs() < 1e-6);
    }
    let flat: Vec<[f64; 3]> = (0..30).map(|k| [k as f64, 1.0, k as f64]).collect();
    assert_eq!(
        fit_vdc_estimator(&flat, &FitOptions::default()).unwrap_err(),
        AnfisError::DegenerateTraceRange { input: 1 }
    );
}

#[test]
fn training_csv() {
    let rows = parse_training_csv("x,y,target\n1,2,3\n\n-0.5,0.25,1e-3\n").unwrap();
    assert_eq!(rows, vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 1e-3]]);
    assert!(parse_training_csv("\u{feff}x,y,target\n1,2,3\n").is_ok());
    assert!(matches!(
        parse_training_csv("a,b,c\n"),
        Err(AnfisError::Parse { .. })
    ));
    assert!(matches!(
        parse_training_csv("x,y,target\n1,2\n"),
        Err(AnfisError::Parse { line: 2, .. })
    ));
    assert!(matches!(
        parse_training_csv("x,y,target\n1,2,NaN\n"),
        Err(AnfisError::Parse { .. })
    ));

    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/samples/anfis_training.csv");
    let rows = parse_training_csv(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(rows.len(), 121);
}
