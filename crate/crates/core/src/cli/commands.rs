use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::anfis::{fit_vdc_estimator, parse_training_csv, FitOptions, RuleWiring};
use crate::feeder_model::{
    parse_feeder_dir, validate_topology, FeederModel, RadialNetwork, FILE_NAMES,
};
use crate::pmu_placement::{
    brute_force_placement, ensure_partitionable, greedy_placement, observable_set,
    parse_placement_json, partition_zones, GreedyOptions, ObservabilityOptions, PlacementFile,
    PlacementGraph,
};
use crate::power_flow::{
    kcl_residual_network, solve_network, PhasorSet, PowerFlowSolution, SweepOptions,
};
use crate::state_estimation::{
    error_report, estimate_parallel, generate_measurements, parse_measurements_csv, truth_id,
    wls_gauss_newton, write_measurements_csv, EstimatorOptions, Initialization, NoiseSpec,
};
use crate::upfc_control::{parse_scenario_json, simulate};

use super::manifest::{read_text, Run};
use super::{
    AnfisArgs, Cli, CliError, Command, EstimateArgs, EstimateMode, PlaceArgs, SimulateArgs,
    WiringArg,
};

pub const SOLUTION_HEADER: &str = "bus,phase,mag_pu,angle_deg";

/// Runs the parsed command; returns warnings for stderr.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let flags = serde_json::to_value(cli).expect("arguments serialize");
    let mut run = Run::new(&cli.global.out, cli.command.name(), cli.global.seed, flags);
    let warnings = match &cli.command {
        Command::Validate => validate(cli, &mut run)?,
        Command::Powerflow => powerflow(cli, &mut run)?,
        Command::PlacePmu(a) => place_pmu(cli, a, &mut run)?,
        Command::SimulateMeasurements(a) => simulate_measurements(cli, a, &mut run)?,
        Command::Estimate(a) => estimate(cli, a, &mut run)?,
        Command::UpfcSim(a) => upfc_sim(&a.scenario, &mut run)?,
        Command::AnfisTrain(a) => anfis_train(a, &mut run)?,
        Command::Report(a) => {
            let dir = a.run.clone().unwrap_or_else(|| cli.global.out.clone());
            run.dir = dir.clone();
            super::report::report(cli, &dir, &mut run)?
        }
    };
    let deferred = run.deferred.take();
    run.finish()?;
    match deferred {
        Some(e) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            Err(e)
        }
        None => Ok(warnings),
    }
}

fn feeder_dir(cli: &Cli) -> Result<&Path, CliError> {
    cli.global
        .feeder
        .as_deref()
        .ok_or_else(|| CliError::Input("--feeder DIR is required for this subcommand".into()))
}

pub(super) fn load_feeder(dir: &Path, run: Option<&mut Run>) -> Result<FeederModel, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!(
            "missing input directory {}",
            dir.display()
        )));
    }
    if let Some(run) = run {
        for name in FILE_NAMES {
            let p = dir.join(name);
            if let Ok(bytes) = std::fs::read(&p) {
                run.input(&p, &bytes);
            }
        }
    }
    Ok(parse_feeder_dir(dir)?)
}

fn sweep_options(cli: &Cli) -> SweepOptions {
    let d = SweepOptions::default();
    SweepOptions {
        tolerance_pu: cli.global.tolerance.unwrap_or(d.tolerance_pu),
        max_iterations: cli.global.max_iter.unwrap_or(d.max_iterations),
        ..d
    }
}

fn solve_truth(cli: &Cli, net: &RadialNetwork) -> Result<PowerFlowSolution, CliError> {
    let sol = solve_network(net, &sweep_options(cli))?;
    if !sol.converged {
        return Err(CliError::Domain(format!(
            "power flow did not converge in {} iterations (mismatch {:.3e} pu)",
            sol.iterations, sol.max_mismatch_pu
        )));
    }
    Ok(sol)
}

fn fixed4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

/// `bus,phase,mag_pu,angle_deg` rows, alias buses included.
pub fn phasor_csv(v: &PhasorSet) -> String {
    let mut out = String::from(SOLUTION_HEADER);
    out.push('\n');
    for (b, p, x) in v.iter_with_aliases() {
        let _ = writeln!(
            out,
            "{b},{p},{},{}",
            fixed4(x.norm() / v.v_base_ln()),
            fixed4(x.arg().to_degrees())
        );
    }
    out
}

fn validate(cli: &Cli, run: &mut Run) -> Result<Vec<String>, CliError> {
    let model = load_feeder(feeder_dir(cli)?, Some(run))?;
    let findings = validate_topology(&model);
    run.add_json(
        "validation.json",
        json!({
            "buses": model.bus_ids().len(),
            "segments": model.segments().len(),
            "switches": model.switches().len(),
            "loads": model.loads().len(),
            "findings": findings,
        }),
    );
    if findings.is_empty() {
        Ok(Vec::new())
    } else {
        // Artifacts are still written so the findings can be inspected.
        run.deferred = Some(CliError::Domain(format!(
            "{} topology finding(s); first: {}",
            findings.len(),
            findings[0].message
        )));
        Ok(Vec::new())
    }
}

fn powerflow(cli: &Cli, run: &mut Run) -> Result<Vec<String>, CliError> {
    let model = load_feeder(feeder_dir(cli)?, Some(run))?;
    let net = RadialNetwork::build(&model)?;
    let sol = solve_network(&net, &sweep_options(cli))?;
    let kcl = kcl_residual_network(&net, &sol.voltages)?;
    run.add("solution.csv", phasor_csv(&sol.voltages).into_bytes());
    run.add_json(
        "summary.json",
        json!({
            "iterations": sol.iterations,
            "converged": sol.converged,
            "max_mismatch_pu": sol.max_mismatch_pu,
            "mismatch_history": sol.mismatch_history,
            "kcl_residual_pu": kcl,
            "truth_id": truth_id(&sol.voltages),
            "totals": {
                "source_kw": sol.total_source_kw,
                "source_kvar": sol.total_source_kvar,
                "load_kw": sol.total_load_kw,
                "load_kvar": sol.total_load_kvar,
                "loss_kw": sol.total_loss_kw,
                "loss_kvar": sol.total_loss_kvar,
                "shunt_gen_kw": sol.total_shunt_gen_kw,
                "shunt_gen_kvar": sol.total_shunt_gen_kvar,
            },
        }),
    );
    if !sol.converged {
        run.deferred = Some(CliError::Domain(format!(
            "power flow did not converge in {} iterations (mismatch {:.3e} pu)",
            sol.iterations, sol.max_mismatch_pu
        )));
    }
    Ok(Vec::new())
}

fn place_pmu(cli: &Cli, a: &PlaceArgs, run: &mut Run) -> Result<Vec<String>, CliError> {
    let model = load_feeder(feeder_dir(cli)?, Some(run))?;
    let net = RadialNetwork::build(&model)?;
    let graph = PlacementGraph::from_network(&net);
    let obs = ObservabilityOptions {
        zero_injection: a.zero_injection,
    };
    let mut warnings = Vec::new();
    let placement = if a.oracle {
        let all = brute_force_placement(&graph, a.channels, obs)?;
        all.into_iter()
            .next()
            .ok_or_else(|| CliError::Domain("no observable placement exists".into()))?
    } else {
        greedy_placement(
            &graph,
            a.channels,
            &GreedyOptions {
                max_zone_size: a.max_zone_size,
                observability: obs,
                ..GreedyOptions::default()
            },
        )?
    };
    let fixed = ensure_partitionable(&graph, &placement, a.channels, obs)?;
    if fixed.len() > placement.len() {
        warnings.push(format!(
            "added {} PMU(s) so that every zone boundary is current-measured",
            fixed.len() - placement.len()
        ));
    }
    let partition = partition_zones(&graph, &fixed, obs)?;
    if let Some(k) = a.max_zone_size {
        if partition.largest_zone() > k {
            return Err(CliError::Domain(format!(
                "largest zone has {} buses, above the bound {k}",
                partition.largest_zone()
            )));
        }
    }
    let pinned = fixed.pinned(&partition.assignment);
    let seen = observable_set(&graph, &pinned, obs)?;
    let file = PlacementFile::new(a.channels, &fixed, &partition, &seen);
    run.add_json(
        "placement.json",
        serde_json::to_value(&file).expect("placement serializes"),
    );
    Ok(warnings)
}

fn default_in(run: &Run, given: &Option<PathBuf>, name: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| run.dir.join(name))
}

fn load_placement(path: &Path, run: &mut Run) -> Result<PlacementFile, CliError> {
    let text = read_text(path)?;
    run.input(path, text.as_bytes());
    Ok(parse_placement_json(&text)?)
}

fn simulate_measurements(
    cli: &Cli,
    a: &SimulateArgs,
    run: &mut Run,
) -> Result<Vec<String>, CliError> {
    let ppath = default_in(run, &a.placement, "placement.json");
    let file = load_placement(&ppath, run)?;
    let model = load_feeder(feeder_dir(cli)?, Some(run))?;
    let net = RadialNetwork::build(&model)?;
    let truth = solve_truth(cli, &net)?;
    let noise = NoiseSpec {
        sigma_v: a.sigma_v,
        sigma_i: a.sigma_i,
        sigma_pseudo: a.sigma_pseudo,
        add_noise: !a.noise_free,
    };
    let set = generate_measurements(
        &net,
        &truth.voltages,
        &file.placement()?,
        &noise,
        cli.global.seed,
    )?;
    run.add(
        "measurements.csv",
        write_measurements_csv(&set).into_bytes(),
    );
    Ok(set.findings)
}

fn estimate(cli: &Cli, a: &EstimateArgs, run: &mut Run) -> Result<Vec<String>, CliError> {
    let ppath = default_in(run, &a.placement, "placement.json");
    let mpath = default_in(run, &a.measurements, "measurements.csv");
    let file = load_placement(&ppath, run)?;
    let text = read_text(&mpath)?;
    run.input(&mpath, text.as_bytes());
    let set = parse_measurements_csv(&text)?;
    let model = load_feeder(feeder_dir(cli)?, Some(run))?;
    let net = RadialNetwork::build(&model)?;
    let truth = solve_truth(cli, &net)?;

    let mut warnings = Vec::new();
    if !set.truth_id.is_empty() && set.truth_id != truth_id(&truth.voltages) {
        warnings.push("measurements were generated from a different power-flow solution".into());
    }
    let d = EstimatorOptions::default();
    let opts = EstimatorOptions {
        tolerance: cli.global.tolerance.unwrap_or(d.tolerance),
        max_iterations: cli.global.max_iter.unwrap_or(d.max_iterations),
        initialization: if a.flat_start {
            Initialization::Flat
        } else {
            Initialization::LinearPmu
        },
        workers: a.workers,
    };
    let partition = file.partition();
    let known: BTreeSet<_> = net.buses.iter().map(|b| b.id).collect();
    if let Some(b) = partition
        .zones
        .iter()
        .flat_map(|z| z.members.iter())
        .find(|b| !known.contains(b))
    {
        return Err(CliError::Input(format!(
            "{}: zone member {b} is not a network bus",
            ppath.display()
        )));
    }
    let result = match a.mode() {
        EstimateMode::Parallel => estimate_parallel(&net, &partition, &set, &opts)?,
        EstimateMode::Monolithic => wls_gauss_newton(&net, &set, &opts)?,
    };
    let errors = error_report(&result.voltages, &truth.voltages)?;
    run.add("estimate.csv", phasor_csv(&result.voltages).into_bytes());
    run.add_json(
        "report.json",
        json!({
            "mode": a.mode(),
            "chi_square": result.chi_square,
            "degrees_of_freedom": result.degrees_of_freedom,
            "measurements": set.len(),
            "zones": result.zones,
            "errors": errors,
        }),
    );
    Ok(warnings)
}

fn upfc_sim(path: &Path, run: &mut Run) -> Result<Vec<String>, CliError> {
    let text = read_text(path)?;
    run.input(path, text.as_bytes());
    let scenario = parse_scenario_json(&text)?;
    let sim = simulate(&scenario)?;
    let mut csv = String::from("t");
    for ph in ["a", "b", "c"] {
        for col in [
            "v_ref", "v_actual", "v_comp", "v_pulse", "i_ref", "i_actual", "i_comp", "i_pulse",
        ] {
            let _ = write!(csv, ",{col}_{ph}");
        }
    }
    csv.push('\n');
    for (i, t) in sim.v_ref.wave.times.iter().enumerate() {
        csv.push_str(&t.to_string());
        for k in 0..3 {
            let _ = write!(
                csv,
                ",{},{},{},{},{},{},{},{}",
                sim.v_ref.wave.samples[i][k],
                sim.v_actual.samples[i][k],
                sim.v_comp.wave.samples[i][k],
                sim.v_pulses[i][k],
                sim.i_ref.wave.samples[i][k],
                sim.i_actual.samples[i][k],
                sim.i_comp.wave.samples[i][k],
                sim.i_pulses[i][k],
            );
        }
        csv.push('\n');
    }
    run.add("waveforms.csv", csv.into_bytes());
    run.add_json(
        "balance.json",
        json!({
            "balance": sim.balance,
            "shunt_power_form": scenario.shunt_power_form,
            "voltage_thd_pct": sim.voltage_thd,
            "current_thd_pct": sim.current_thd,
        }),
    );
    Ok(Vec::new())
}

fn anfis_train(a: &AnfisArgs, run: &mut Run) -> Result<Vec<String>, CliError> {
    let text = read_text(&a.data)?;
    run.input(&a.data, text.as_bytes());
    let rows = parse_training_csv(&text)?;
    let est = fit_vdc_estimator(
        &rows,
        &FitOptions {
            n_mf_per_input: a.mfs,
            wiring: match a.wiring {
                WiringArg::Grid => RuleWiring::Grid,
                WiringArg::Paired => RuleWiring::Paired,
            },
            epochs: a.epochs,
            learn_rate: a.learn_rate,
        },
    )?;
    let mut csv = String::from("epoch,rmse\n");
    for (k, r) in est.report.rmse.iter().enumerate() {
        let _ = writeln!(csv, "{k},{r}");
    }
    run.add("rmse.csv", csv.into_bytes());
    run.add_json(
        "model.json",
        json!({
            "model": est.model,
            "normalization": est.normalization,
            "final_rmse": est.report.final_rmse,
            "converged": est.report.converged,
            "epochs": a.epochs,
            "rows": rows.len(),
        }),
    );
    Ok(Vec::new())
}
