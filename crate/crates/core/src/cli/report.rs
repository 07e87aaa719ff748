use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::feeder_model::{BusId, Phase, RadialNetwork};

use super::commands::{load_feeder, SOLUTION_HEADER};
use super::manifest::{read_text, Run, MANIFEST_FILE};
use super::svg::{histogram, xy_plot, Series};
use super::{Cli, CliError};

#[derive(Debug, Serialize)]
struct BusRow {
    bus: BusId,
    phase: Phase,
    mag_pu: f64,
    angle_deg: f64,
    voltage_pct: f64,
    drop_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_pct: Option<f64>,
}

/// Rounds to 4 decimals so that derived percentages print cleanly.
fn r4(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn bad(path: &Path, line: usize, msg: &str) -> CliError {
    CliError::Input(format!("{}: line {line}: {msg}", path.display()))
}

fn read_solution(path: &Path) -> Result<Vec<(BusId, Phase, f64, f64)>, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SOLUTION_HEADER) {
        return Err(bad(path, 1, &format!("expected header {SOLUTION_HEADER}")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (c.len() == 4)
            .then(|| {
                Some((
                    BusId(c[0].parse().ok()?),
                    Phase::from_letter(c[1])?,
                    c[2].parse::<f64>().ok().filter(|v| v.is_finite())?,
                    c[3].parse::<f64>().ok().filter(|v| v.is_finite())?,
                ))
            })
            .flatten();
        rows.push(parsed.ok_or_else(|| bad(path, k + 2, "malformed row"))?);
    }
    Ok(rows)
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn estimate_errors(path: &Path) -> Result<BTreeMap<(BusId, Phase), f64>, CliError> {
    let v = read_json(path)?;
    let rows = v["errors"]["rows"]
        .as_array()
        .ok_or_else(|| CliError::Input(format!("{}: no errors.rows table", path.display())))?;
    rows.iter()
        .map(|r| {
            let bus = r["bus"].as_u64().and_then(|b| u32::try_from(b).ok());
            let phase = r["phase"].as_str().and_then(Phase::from_letter);
            let err = r["magnitude_error_pct"].as_f64();
            match (bus, phase, err) {
                (Some(b), Some(p), Some(e)) => Ok(((BusId(b), p), e)),
                _ => Err(CliError::Input(format!(
                    "{}: malformed error row",
                    path.display()
                ))),
            }
        })
        .collect()
}

fn read_rmse(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (e, r) = line
            .split_once(',')
            .ok_or_else(|| bad(path, k + 1, "malformed row"))?;
        match (e.trim().parse::<f64>(), r.trim().parse::<f64>()) {
            (Ok(e), Ok(r)) => out.push((e, r)),
            _ => return Err(bad(path, k + 1, "malformed row")),
        }
    }
    Ok(out)
}

/// Feeder used by the run: the global flag, else the one recorded by the
/// run's power-flow entry.
fn feeder_for(cli: &Cli, dir: &Path) -> Option<PathBuf> {
    if let Some(f) = &cli.global.feeder {
        return Some(f.clone());
    }
    let m = read_json(&dir.join(MANIFEST_FILE)).ok()?;
    m["powerflow"]["flags"]["global"]["feeder"]
        .as_str()
        .map(PathBuf::from)
}

pub fn report(cli: &Cli, dir: &Path, run: &mut Run) -> Result<Vec<String>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!(
            "missing run directory {}",
            dir.display()
        )));
    }
    let sol_path = dir.join("solution.csv");
    let est_path = dir.join("report.json");
    let bal_path = dir.join("balance.json");
    let rmse_path = dir.join("rmse.csv");
    let has = |p: &Path| p.is_file();
    if ![&sol_path, &est_path, &bal_path, &rmse_path]
        .iter()
        .any(|p| has(p))
    {
        return Err(CliError::Input(format!(
            "empty run directory {}: no solution.csv, report.json, balance.json or rmse.csv",
            dir.display()
        )));
    }
    let mut warnings = Vec::new();
    let mut body = serde_json::Map::new();
    let mut plots = Vec::new();

    let errors = if has(&est_path) {
        let text = read_text(&est_path)?;
        run.input(&est_path, text.as_bytes());
        Some(estimate_errors(&est_path)?)
    } else {
        None
    };

    if has(&sol_path) {
        let text = read_text(&sol_path)?;
        run.input(&sol_path, text.as_bytes());
        let rows = read_solution(&sol_path)?;
        let distance: Option<BTreeMap<BusId, f64>> = match feeder_for(cli, dir) {
            Some(f) => match load_feeder(&f, None)
                .and_then(|m| RadialNetwork::build(&m).map_err(Into::into))
            {
                Ok(net) => {
                    let mut d: BTreeMap<BusId, f64> =
                        net.buses.iter().map(|b| (b.id, b.distance_ft)).collect();
                    for (alias, rep) in &net.aliases {
                        if let Some(v) = d.get(rep).copied() {
                            d.insert(*alias, v);
                        }
                    }
                    Some(d)
                }
                Err(e) => {
                    warnings.push(format!("voltage profile plotted by row order: {e}"));
                    None
                }
            },
            None => None,
        };
        let table: Vec<BusRow> = rows
            .iter()
            .map(|(bus, phase, mag, ang)| BusRow {
                bus: *bus,
                phase: *phase,
                mag_pu: *mag,
                angle_deg: *ang,
                voltage_pct: r4(100.0 * mag),
                drop_pct: r4(100.0 * (1.0 - mag)),
                error_pct: errors
                    .as_ref()
                    .and_then(|e| e.get(&(*bus, *phase)).copied()),
            })
            .collect();
        let mut series: Vec<Series> = Phase::ALL
            .iter()
            .map(|p| Series {
                name: format!("phase {p}"),
                points: Vec::new(),
                line: false,
            })
            .collect();
        let mut order: BTreeMap<BusId, usize> = BTreeMap::new();
        for r in &table {
            let next = order.len();
            let idx = *order.entry(r.bus).or_insert(next);
            let x = match &distance {
                Some(d) => d.get(&r.bus).map(|ft| ft / 5280.0).unwrap_or(f64::NAN),
                None => idx as f64,
            };
            if x.is_finite() {
                series[r.phase.index()].points.push((x, r.mag_pu));
            }
        }
        let xlabel = if distance.is_some() {
            "distance from slack (miles)"
        } else {
            "bus (row order)"
        };
        run.add(
            "report/voltage_profile.svg",
            xy_plot("Voltage profile", xlabel, "voltage (pu)", &series).into_bytes(),
        );
        plots.push("voltage_profile.svg");
        body.insert(
            "buses".into(),
            serde_json::to_value(&table).expect("rows serialize"),
        );
    }

    if let Some(e) = &errors {
        let values: Vec<f64> = e.values().copied().collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        body.insert(
            "estimation_error_pct".into(),
            json!({ "max": max, "mean": mean, "count": values.len() }),
        );
        run.add(
            "report/error_histogram.svg",
            histogram("Estimation error", "magnitude error (%)", &values, 20).into_bytes(),
        );
        plots.push("error_histogram.svg");
    }

    if has(&bal_path) {
        let text = read_text(&bal_path)?;
        run.input(&bal_path, text.as_bytes());
        let v = read_json(&bal_path)?;
        body.insert(
            "thd_pct".into(),
            json!({ "voltage": v["voltage_thd_pct"], "current": v["current_thd_pct"] }),
        );
    }

    if has(&rmse_path) {
        let text = read_text(&rmse_path)?;
        run.input(&rmse_path, text.as_bytes());
        let pts = read_rmse(&rmse_path)?;
        body.insert(
            "anfis".into(),
            json!({ "epochs": pts.len().saturating_sub(1), "final_rmse": pts.last().map(|p| p.1) }),
        );
        let s = Series {
            name: "rmse".into(),
            points: pts,
            line: true,
        };
        run.add(
            "report/rmse.svg",
            xy_plot("ANFIS training", "epoch", "RMSE", &[s]).into_bytes(),
        );
        plots.push("rmse.svg");
    }

    body.insert("plots".into(), json!(plots));
    run.add_json("report/report.json", Value::Object(body));
    Ok(warnings)
}
