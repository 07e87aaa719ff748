//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture`
//! to see the lines; the test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use feederlab::anfis::{gradient_check, train_hybrid, AnfisModel, RuleWiring, TrainingSet};
use feederlab::feeder_model::{parse_feeder_dir, BusId, Phase, RadialNetwork};
use feederlab::pmu_placement::{
    brute_force_placement, ensure_partitionable, greedy_placement, observable_set, partition_zones,
    Channels, GreedyOptions, ObservabilityOptions, Placement, PlacementGraph, ZonePartition,
};
use feederlab::power_flow::{
    kcl_residual, solve_network, solve_power_flow, PhasorSet, SweepOptions,
};
use feederlab::state_estimation::{
    estimate_parallel, generate_measurements, wls_gauss_newton, EstimatorOptions, NoiseSpec,
};
use feederlab::upfc_control::{
    power_balance, series_compensation, series_reference, shunt_compensation, shunt_reference, thd,
    uniform_times, ShuntPowerForm, UpfcPowerBalance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const ROWS_MAG_PU: f64 = 0.01;
const ROWS_ANG_DEG: f64 = 0.5;
const ROWS_SECONDS: f64 = 1.0;
const BALANCE_KW: f64 = 1e-3; // 1e-6 of the 1 MVA base
const TWO_BUS_PU: f64 = 1e-10;
const EQUIV_PU: f64 = 1e-8;
const EQUIV_SECONDS: f64 = 5.0;
const CHI_TRIALS: u64 = 200;
const CHI_REL: f64 = 0.10;
const ORACLE_SECONDS: f64 = 30.0;
const GRAD_REL: f64 = 1e-4;
const LINEAR_RMSE: f64 = 1e-3;
const UPFC_BALANCE: f64 = 1e-12;
const THD_TOL_PCT: f64 = 0.1;

/// Sub-check results; the criterion passes when every entry holds.
type Checks = Vec<(bool, String)>;

fn criterion(n: u32, name: &str, f: impl FnOnce() -> Checks) -> bool {
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(checks) => {
            let pass = checks.iter().all(|c| c.0);
            let detail: Vec<String> = checks
                .iter()
                .map(|(ok, d)| {
                    if *ok {
                        d.clone()
                    } else {
                        format!("FAILED {d}")
                    }
                })
                .collect();
            (pass, detail.join("; "))
        }
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    println!(
        "criterion {n} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn printed_rows() -> Checks {
    let t = Instant::now();
    let m = parse_feeder_dir(&common::dataset_dir()).unwrap();
    let sol = solve_power_flow(&m, &SweepOptions::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let (mut dm, mut da, mut pattern_ok) = (0.0f64, 0.0f64, true);
    for (bus, row) in common::PRINTED_RESULTS {
        for p in Phase::ALL {
            let got = sol.voltages.get(BusId(bus), p);
            match (row[p.index()], got) {
                (Some((mag, ang)), Some(_)) => {
                    dm = dm.max((sol.voltages.mag_pu(BusId(bus), p).unwrap() - mag).abs());
                    da = da.max(common::angle_diff_deg(
                        sol.voltages.angle_deg(BusId(bus), p).unwrap(),
                        ang,
                    ));
                }
                (None, None) => {}
                _ => pattern_ok = false,
            }
        }
    }
    vec![
        (
            sol.converged,
            format!("converged in {} iterations", sol.iterations),
        ),
        (pattern_ok, "phase-presence pattern of 16 rows".into()),
        (
            dm <= ROWS_MAG_PU,
            format!("max |dV| {dm:.1e} pu <= {ROWS_MAG_PU}"),
        ),
        (
            da <= ROWS_ANG_DEG,
            format!("max |dtheta| {da:.1e} deg <= {ROWS_ANG_DEG}"),
        ),
        (
            secs < ROWS_SECONDS,
            format!("{secs:.3} s < {ROWS_SECONDS} s"),
        ),
    ]
}

fn physics() -> Checks {
    let m = common::ieee123();
    let sol = solve_power_flow(
        &m,
        &SweepOptions {
            tolerance_pu: 1e-10,
            ..Default::default()
        },
    )
    .unwrap();
    let dp = sol.total_source_kw + sol.total_shunt_gen_kw - sol.total_load_kw - sol.total_loss_kw;
    let dq = sol.total_source_kvar + sol.total_shunt_gen_kvar
        - sol.total_load_kvar
        - sol.total_loss_kvar;
    let kcl = kcl_residual(&m, &sol).unwrap();

    let empty = m.without_loads().without_shunts();
    let flat = solve_power_flow(&empty, &SweepOptions::default()).unwrap();
    let slack = empty.general().slack_bus;
    let exact = flat
        .voltages
        .iter()
        .all(|(_, p, v)| v == flat.voltages.get(slack, p).unwrap());

    let two = solve_power_flow(
        &common::two_bus(),
        &SweepOptions {
            tolerance_pu: 1e-14,
            ..Default::default()
        },
    )
    .unwrap();
    let want = common::two_bus_oracle();
    let vb = two.voltages.v_base_ln();
    let d2 = Phase::ALL
        .iter()
        .map(|p| (two.voltages.get(BusId(2), *p).unwrap() - want[p.index()]).norm() / vb)
        .fold(0.0, f64::max);
    vec![
        (
            dp.abs() <= BALANCE_KW && dq.abs() <= BALANCE_KW,
            format!("balance dP {dp:.1e} kW dQ {dq:.1e} kvar"),
        ),
        (kcl <= 1e-6, format!("KCL residual {kcl:.1e} pu")),
        (exact, "zero load equals slack exactly".into()),
        (
            d2 <= TWO_BUS_PU,
            format!("two-bus vs Newton oracle {d2:.1e} pu <= {TWO_BUS_PU:e}"),
        ),
    ]
}

struct Fixture {
    net: RadialNetwork,
    truth: PhasorSet,
    placement: Placement,
    partition: ZonePartition,
}

fn fixture() -> Fixture {
    let net = RadialNetwork::build(&common::ieee123()).unwrap();
    let truth = solve_network(
        &net,
        &SweepOptions {
            tolerance_pu: 1e-10,
            ..Default::default()
        },
    )
    .unwrap()
    .voltages;
    let g = PlacementGraph::from_network(&net);
    let ch = Channels::Limited(3);
    let p = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
    let p = ensure_partitionable(&g, &p, ch, Default::default()).unwrap();
    let partition = partition_zones(&g, &p, Default::default()).unwrap();
    let placement = p.pinned(&partition.assignment);
    Fixture {
        net,
        truth,
        placement,
        partition,
    }
}

fn max_diff_pu(a: &PhasorSet, b: &PhasorSet) -> f64 {
    a.iter()
        .map(|(bus, p, v)| {
            b.get(bus, p)
                .map_or(f64::INFINITY, |w| (v - w).norm() / a.v_base_ln())
        })
        .fold(0.0, f64::max)
}

fn bits(v: &PhasorSet) -> Vec<(u32, usize, u64, u64)> {
    v.iter()
        .map(|(b, p, x)| (b.0, p.index(), x.re.to_bits(), x.im.to_bits()))
        .collect()
}

fn equivalence() -> Checks {
    let t = Instant::now();
    let base = fixture();
    let g = PlacementGraph::from_network(&base.net);
    let greedy = Placement::at(&base.placement.buses(), Channels::Limited(3)).unwrap();
    let everywhere = Placement::at(&g.buses(), Channels::Unlimited).unwrap();
    let mut extra = greedy.buses();
    extra.extend(
        g.buses()
            .into_iter()
            .filter(|b| !greedy.contains(*b))
            .step_by(7),
    );
    let extra = Placement::at(&extra, Channels::Unlimited).unwrap();

    let mut partitions = vec![(greedy.clone(), ZonePartition::single(&g, &greedy).unwrap())];
    for p in [greedy, everywhere, extra] {
        let part = partition_zones(&g, &p, Default::default()).unwrap();
        partitions.push((p.pinned(&part.assignment), part));
    }
    let distinct: BTreeSet<Vec<_>> = partitions
        .iter()
        .map(|(_, part)| part.zones.iter().map(|z| z.members.clone()).collect())
        .collect();

    let opts = EstimatorOptions::default();
    let mut worst = 0.0f64;
    let mut sizes = Vec::new();
    for (p, part) in &partitions {
        let set =
            generate_measurements(&base.net, &base.truth, p, &NoiseSpec::noise_free(), 0).unwrap();
        let mono = wls_gauss_newton(&base.net, &set, &opts).unwrap();
        let par = estimate_parallel(&base.net, part, &set, &opts).unwrap();
        worst = worst.max(max_diff_pu(&par.voltages, &mono.voltages));
        sizes.push(part.zones.len().to_string());
    }

    let set = generate_measurements(
        &base.net,
        &base.truth,
        &base.placement,
        &NoiseSpec::default(),
        3,
    )
    .unwrap();
    let runs: Vec<_> = [1, 2, 4]
        .iter()
        .map(|w| {
            let o = EstimatorOptions {
                workers: Some(*w),
                ..opts
            };
            let r = estimate_parallel(&base.net, &base.partition, &set, &o).unwrap();
            (bits(&r.voltages), r.chi_square.to_bits(), r.zones)
        })
        .collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let secs = t.elapsed().as_secs_f64();
    vec![
        (
            distinct.len() >= 3,
            format!(
                "{} distinct partitions ({} zones)",
                distinct.len(),
                sizes.join("/")
            ),
        ),
        (
            worst <= EQUIV_PU,
            format!("max |V_par - V_mono| {worst:.1e} pu <= {EQUIV_PU:e}"),
        ),
        (identical, "byte-identical across 1/2/4 workers".into()),
        (
            secs < EQUIV_SECONDS,
            format!("{secs:.2} s < {EQUIV_SECONDS} s"),
        ),
    ]
}

fn chi_square() -> Checks {
    let f = fixture();
    let opts = EstimatorOptions::default();
    let mut total = 0.0;
    let mut dof = 0;
    for seed in 0..CHI_TRIALS {
        let set =
            generate_measurements(&f.net, &f.truth, &f.placement, &NoiseSpec::default(), seed)
                .unwrap();
        let r = estimate_parallel(&f.net, &f.partition, &set, &opts).unwrap();
        total += r.chi_square;
        dof = r.degrees_of_freedom;
    }
    let mean = total / CHI_TRIALS as f64;
    let rel = (mean - dof as f64).abs() / dof as f64;
    vec![(
        rel <= CHI_REL,
        format!(
            "mean chi2 {mean:.1} vs dof {dof} over {CHI_TRIALS} trials, off by {:.2}%",
            100.0 * rel
        ),
    )]
}

fn placement_oracle() -> Checks {
    let t = Instant::now();
    let obs = ObservabilityOptions::default();
    let full = |g: &PlacementGraph, p: &Placement| {
        observable_set(g, p, obs).unwrap().len() == g.bus_count()
    };
    let (mut runs, mut within, mut observable, mut small) = (0, true, true, true);
    let mut worst_gap = 0i64;
    for (_, g) in common::library() {
        small &= g.bus_count() <= 8;
        for ch in [
            Channels::Limited(1),
            Channels::Limited(2),
            Channels::Limited(3),
            Channels::Unlimited,
        ] {
            let opt = brute_force_placement(&g, ch, obs).unwrap();
            observable &= !opt.is_empty() && opt.iter().all(|p| full(&g, p));
            let greedy = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
            observable &= full(&g, &greedy);
            let gap = greedy.len() as i64 - opt[0].len() as i64;
            worst_gap = worst_gap.max(gap);
            within &= gap <= 1;
            runs += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    vec![
        (
            small,
            format!("{} library graphs, all <= 8 buses", common::library().len()),
        ),
        (
            within,
            format!("greedy - optimal <= {worst_gap} over {runs} runs"),
        ),
        (
            observable,
            "oracle and greedy placements fully observable".into(),
        ),
        (
            secs < ORACLE_SECONDS,
            format!("{secs:.2} s < {ORACLE_SECONDS} s"),
        ),
    ]
}

fn anfis() -> Checks {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mut m = AnfisModel::new(2, RuleWiring::Grid, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
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
        let rows = (0..20)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                [x, y, (2.0 * x).sin() + y * y]
            })
            .collect();
        worst = worst.max(gradient_check(&m, &TrainingSet::new(rows).unwrap(), 1e-5).unwrap());
    }

    let mut rows = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let (x, y) = (-1.0 + i as f64 / 3.0, -1.0 + j as f64 / 3.0);
            rows.push([x, y, 2.0 * x + 3.0 * y - 1.0]);
        }
    }
    let m0 = AnfisModel::new(2, RuleWiring::Grid, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
    let r = train_hybrid(&m0, &TrainingSet::new(rows).unwrap(), 50, 0.01).unwrap();

    let (mut norm, mut convex) = (0.0f64, true);
    for _ in 0..10_000 {
        let x = rng.random_range(-5.0..5.0);
        let y = rng.random_range(-5.0..5.0);
        let w = r.model.normalized_firing(x, y).unwrap();
        norm = norm.max((w.iter().sum::<f64>() - 1.0).abs());
        let f = r.model.rule_outputs(x, y);
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = r.model.infer(x, y).unwrap();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        convex &= out >= lo - slack && out <= hi + slack;
    }
    vec![
        (
            worst < GRAD_REL,
            format!("gradient relative error {worst:.1e} < {GRAD_REL:e}"),
        ),
        (
            r.final_rmse < LINEAR_RMSE,
            format!(
                "linear target rmse {:.1e} < {LINEAR_RMSE:e} in 50 epochs",
                r.final_rmse
            ),
        ),
        (
            norm <= 1e-12,
            format!("normalization error {norm:.1e} on 1e4 inputs"),
        ),
        (
            convex,
            "output within rule-output hull on 1e4 inputs".into(),
        ),
    ]
}

fn upfc() -> Checks {
    let omega = 2.0 * PI * 60.0;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut times: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let v = series_reference(1.0, omega, &times).unwrap();
    let i = shunt_reference(10.0, omega, &times).unwrap();
    let sum = v
        .wave
        .samples
        .iter()
        .chain(&i.wave.samples)
        .map(|s| (s[0] + s[1] + s[2]).abs())
        .fold(0.0, f64::max);

    let grid = uniform_times(60.0, 64, 2);
    let vg = series_reference(1.0, omega, &grid).unwrap();
    let ig = shunt_reference(10.0, omega, &grid).unwrap();
    let zero = |w: &feederlab::upfc_control::Waveform3| w.samples.iter().all(|s| s == &[0.0; 3]);
    let identity = zero(&series_compensation(&vg, &vg.wave).unwrap().wave)
        && zero(&shunt_compensation(&ig, &ig.wave).unwrap().wave);

    let base = UpfcPowerBalance {
        v_s: 1.0,
        i_s: 1.0,
        v_l: 1.0,
        ..Default::default()
    };
    let c60 = 60f64.to_radians().cos();
    let p = power_balance(
        &UpfcPowerBalance {
            phi_sr: 60.0,
            phi_sh: 0.0,
            ..base.clone()
        },
        ShuntPowerForm::AsPrinted,
    );
    let p_direct = (1.0 - c60) + (c60 - 1.0) - 1.0;
    let s90 = 90f64.to_radians().sin();
    let q = power_balance(
        &UpfcPowerBalance {
            i_l: 1.0,
            phi_sr: 90.0,
            phi_sh: 0.0,
            ..base
        },
        ShuntPowerForm::AsPrinted,
    );
    let q_direct = (s90 - 0.0) + 0.0 - s90;

    let tg = uniform_times(60.0, 64, 4);
    let wave: Vec<f64> = tg
        .iter()
        .map(|t| (omega * t).sin() + 0.1 * (3.0 * omega * t).sin())
        .collect();
    let h = thd(&wave, 60.0, 60.0 * 64.0).unwrap();
    vec![
        (
            sum <= UPFC_BALANCE,
            format!("reference phase sum {sum:.1e} <= {UPFC_BALANCE:e}"),
        ),
        (identity, "compensation of the reference is zero".into()),
        (
            p.p_l == p_direct && p.p_l == -1.0,
            format!("active substitution {}", p.p_l),
        ),
        (
            q.q_l == q_direct && q.q_l == 0.0,
            format!("reactive substitution {}", q.q_l),
        ),
        (
            (h - 10.0).abs() <= THD_TOL_PCT,
            format!("THD {h:.4}% = 10 +/- {THD_TOL_PCT}"),
        ),
    ]
}

#[test]
fn acceptance() {
    let results = [
        criterion(1, "printed load-flow rows", printed_rows),
        criterion(2, "power-flow physics", physics),
        criterion(3, "parallel estimation equivalence", equivalence),
        criterion(4, "chi-square calibration", chi_square),
        criterion(5, "placement oracle", placement_oracle),
        criterion(6, "ANFIS", anfis),
        criterion(7, "UPFC equations", upfc),
    ];
    let failed: Vec<usize> = (0..results.len())
        .filter(|k| !results[*k])
        .map(|k| k + 1)
        .collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
