use std::path::Path;

use super::parse::{
    CAPACITORS_HEADER, CONFIGS_HEADER, COORDS_HEADER, LINES_HEADER, LOADS_HEADER, SWITCHES_HEADER,
};
use super::{Connection, FeederError, FeederModel, FeederTables, LineConfig, ZipKind, FILE_NAMES};

fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Renders every table in its original column order. Reals use the
/// shortest decimal text that parses back to the same `f64`.
pub fn to_tables(model: &FeederModel) -> FeederTables {
    let g = model.general();
    let mut general = String::from("General Data,\n");
    let mut kv = |k: String, v: String| general.push_str(&format!("{k},{v}\n"));
    kv("Slack".into(), g.slack_bus.to_string());
    kv("Vnom (kV)".into(), g.v_nom_kv.to_string());
    kv(
        "InternationalSystem".into(),
        g.international_system.to_string(),
    );
    kv("DeltaLF".into(), g.delta_lf.to_string());
    for (i, ph) in ["A", "B", "C"].iter().enumerate() {
        kv(format!("V_slack_ph_{ph}"), g.slack_mag_pu[i].to_string());
    }
    for (i, ph) in ["A", "B", "C"].iter().enumerate() {
        kv(format!("Ang_slack_ph_{ph}"), g.slack_ang_deg[i].to_string());
    }
    for (bus, taps) in &g.taps {
        for (i, ph) in ["A", "B", "C"].iter().enumerate() {
            kv(format!("Tap_{bus}_ph_{ph}"), taps[i].to_string());
        }
    }

    let lines = table(
        &LINES_HEADER,
        model
            .segments()
            .iter()
            .map(|s| {
                vec![
                    s.from_bus.to_string(),
                    s.to_bus.to_string(),
                    s.length_ft.to_string(),
                    s.config_id.to_string(),
                ]
            })
            .collect(),
    );
    let configs = table(
        &CONFIGS_HEADER,
        model
            .configs()
            .values()
            .map(|c| {
                let mut row = vec![c.config_id.to_string(), u8::from(c.is_line).to_string()];
                for m in [&c.r_ohm_per_mile, &c.x_ohm_per_mile, &c.b_usiemens_per_mile] {
                    row.extend(LineConfig::upper(m).iter().map(f64::to_string));
                }
                row
            })
            .collect(),
    );
    let loads = table(
        &LOADS_HEADER,
        model
            .loads()
            .iter()
            .map(|l| {
                let mut row = vec![
                    l.bus.to_string(),
                    match l.connection {
                        Connection::Wye => "1",
                        Connection::Delta => "0",
                    }
                    .to_string(),
                    match l.zip_kind {
                        ZipKind::ConstantPower => "0",
                        ZipKind::ConstantCurrent => "1",
                        ZipKind::ConstantImpedance => "2",
                    }
                    .to_string(),
                ];
                for k in 0..3 {
                    row.push(l.p_kw[k].to_string());
                    row.push(l.q_kvar[k].to_string());
                }
                row
            })
            .collect(),
    );
    let coords = table(
        &COORDS_HEADER,
        model
            .coords()
            .unwrap_or(&[])
            .iter()
            .map(|c| vec![c.bus.to_string(), c.x.to_string(), c.y.to_string()])
            .collect(),
    );
    let switches = table(
        &SWITCHES_HEADER,
        model
            .switches()
            .iter()
            .map(|s| {
                vec![
                    s.bus_a.to_string(),
                    s.bus_b.to_string(),
                    u8::from(s.closed).to_string(),
                ]
            })
            .collect(),
    );
    let capacitors = (!model.capacitors().is_empty()).then(|| {
        table(
            &CAPACITORS_HEADER,
            model
                .capacitors()
                .iter()
                .map(|c| {
                    let mut row = vec![c.bus.to_string()];
                    row.extend(c.kvar.iter().map(f64::to_string));
                    row
                })
                .collect(),
        )
    });
    FeederTables {
        general,
        lines,
        configs,
        loads,
        coords,
        switches,
        capacitors,
    }
}

pub fn write_feeder_dir(model: &FeederModel, dir: &Path) -> Result<(), FeederError> {
    let t = to_tables(model);
    std::fs::create_dir_all(dir).map_err(|e| FeederError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let files = [
        Some(&t.general),
        Some(&t.lines),
        Some(&t.configs),
        Some(&t.loads),
        Some(&t.coords),
        Some(&t.switches),
        t.capacitors.as_ref(),
    ];
    for (name, text) in FILE_NAMES.iter().zip(files) {
        if let Some(text) = text {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| FeederError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
    }
    Ok(())
}

/// Normalized JSON dump of the model.
pub fn to_json(model: &FeederModel) -> serde_json::Value {
    serde_json::to_value(model).expect("model is plain data")
}
