use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{
    BusId, Connection, FeederError, FeederModel, GeneralData, LineConfig, LineSegment, NodeCoord,
    ShuntCapacitor, SpotLoad, SwitchLink, ZipKind,
};

/// File names of the dataset directory, in the order of [`FeederTables`].
pub const FILE_NAMES: [&str; 7] = [
    "general.csv",
    "lines.csv",
    "configs.csv",
    "loads.csv",
    "coords.csv",
    "switches.csv",
    "capacitors.csv",
];

pub(crate) const GENERAL_HEADER: [&str; 2] = ["General Data", ""];
pub(crate) const LINES_HEADER: [&str; 4] = ["Node A", "Node B", "Length (ft.)", "Config."];
pub(crate) const CONFIGS_HEADER: [&str; 20] = [
    "Conf",
    "Lin=1, Trafo=0",
    "R11",
    "R12",
    "R13",
    "R22",
    "R23",
    "R33",
    "X11",
    "X12",
    "X13",
    "X22",
    "X23",
    "X33",
    "B11",
    "B12",
    "B13",
    "B22",
    "B23",
    "B33",
];
pub(crate) const LOADS_HEADER: [&str; 9] = [
    "Node",
    "Y=1, D=0",
    "Alfa (PQ=0, I=1, Z=2)",
    "Ph-1 (kW)",
    "Ph-1 (kVAr)",
    "Ph-2 (kW)",
    "Ph-2 (kVAr)",
    "Ph-3 (kW)",
    "Ph-3 (kVAr)",
];
pub(crate) const COORDS_HEADER: [&str; 3] = ["Node", "Pos X", "Pos Y"];
pub(crate) const SWITCHES_HEADER: [&str; 3] = ["NODE1", "NODE2", "Closed=1"];
pub(crate) const CAPACITORS_HEADER: [&str; 4] =
    ["Node", "Ph-1 (kVAr)", "Ph-2 (kVAr)", "Ph-3 (kVAr)"];

/// Raw text of each dataset table. `capacitors` is optional.
#[derive(Clone, Debug, Default)]
pub struct FeederTables {
    pub general: String,
    pub lines: String,
    pub configs: String,
    pub loads: String,
    pub coords: String,
    pub switches: String,
    pub capacitors: Option<String>,
}

impl FeederTables {
    pub fn read_dir(dir: &Path) -> Result<FeederTables, FeederError> {
        let read = |name: &str| -> Result<String, FeederError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    Err(FeederError::MissingFile(path.display().to_string()))
                }
                Err(e) => Err(FeederError::Io {
                    path: path.display().to_string(),
                    source: e,
                }),
            }
        };
        let capacitors = match read(FILE_NAMES[6]) {
            Ok(s) => Some(s),
            Err(FeederError::MissingFile(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(FeederTables {
            general: read(FILE_NAMES[0])?,
            lines: read(FILE_NAMES[1])?,
            configs: read(FILE_NAMES[2])?,
            loads: read(FILE_NAMES[3])?,
            coords: read(FILE_NAMES[4])?,
            switches: read(FILE_NAMES[5])?,
            capacitors,
        })
    }
}

pub fn parse_feeder_dir(dir: &Path) -> Result<FeederModel, FeederError> {
    parse_feeder(&FeederTables::read_dir(dir)?)
}

/// Parses and validates all tables. Closed switches are recorded, not merged.
pub fn parse_feeder(tables: &FeederTables) -> Result<FeederModel, FeederError> {
    let general = parse_general(&tables.general)?;
    let configs = parse_configs(&tables.configs)?;
    let segments = parse_lines(&tables.lines)?;
    let loads = parse_loads(&tables.loads)?;
    let coords = parse_coords(&tables.coords)?;
    let switches = parse_switches(&tables.switches)?;
    let capacitors = match &tables.capacitors {
        Some(text) => parse_capacitors(text)?,
        None => Vec::new(),
    };
    FeederModel::new(
        general,
        configs,
        segments,
        loads,
        capacitors,
        switches,
        Some(coords),
    )
}

struct Row {
    line: u64,
    cells: Vec<String>,
}

struct Table<'a> {
    file: &'a str,
    header: &'a [&'a str],
    rows: Vec<Row>,
}

impl Table<'_> {
    fn cell<T: std::str::FromStr>(&self, row: &Row, col: usize) -> Result<T, FeederError> {
        let raw = &row.cells[col];
        raw.parse::<T>().map_err(|_| self.bad_cell(row, col))
    }

    fn real(&self, row: &Row, col: usize) -> Result<f64, FeederError> {
        let v: f64 = self.cell(row, col)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad_cell(row, col))
        }
    }

    fn bus(&self, row: &Row, col: usize) -> Result<BusId, FeederError> {
        self.cell::<u32>(row, col).map(BusId)
    }

    fn flag(&self, row: &Row, col: usize, max: u8) -> Result<u8, FeederError> {
        let v: u8 = self.cell(row, col)?;
        if v > max {
            return Err(self.bad_cell(row, col));
        }
        Ok(v)
    }

    fn bad_cell(&self, row: &Row, col: usize) -> FeederError {
        FeederError::UnparseableCell {
            file: self.file.to_string(),
            line: row.line,
            column: self.header.get(col).unwrap_or(&"?").to_string(),
            value: row.cells[col].clone(),
        }
    }

    fn invalid(&self, row: &Row, reason: impl Into<String>) -> FeederError {
        FeederError::InvalidRow {
            file: self.file.to_string(),
            line: row.line,
            reason: reason.into(),
        }
    }
}

/// Splits off and checks the header, then reads the body as plain CSV.
/// Headers whose titles contain commas may be quoted or written verbatim.
fn read_table<'a>(
    file: &'a str,
    text: &str,
    header: &'a [&'a str],
    optional_trailing_empty: bool,
) -> Result<Table<'a>, FeederError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let (first, body) = match text.find('\n') {
        Some(i) => (&text[..i], &text[i + 1..]),
        None => (text, ""),
    };
    let first = first.trim_end_matches('\r');
    let literal = header.join(",");
    let mut accepted = first.trim() == literal;
    let mut alt = header.to_vec();
    if optional_trailing_empty && alt.last() == Some(&"") {
        alt.pop();
        accepted |= first.trim() == alt.join(",");
    }
    if !accepted {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(first.as_bytes());
        if let Some(Ok(rec)) = rdr.records().next() {
            let found: Vec<&str> = rec.iter().collect();
            accepted = found == header || (optional_trailing_empty && found == alt);
        }
    }
    if !accepted {
        return Err(FeederError::BadHeader {
            file: file.to_string(),
            expected: literal,
            found: first.to_string(),
        });
    }

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FeederError::InvalidRow {
            file: file.to_string(),
            line: e.position().map(|p| p.line() + 1).unwrap_or(0),
            reason: format!("malformed csv: {e}"),
        })?;
        let line = rec.position().map(|p| p.line() + 1).unwrap_or(0);
        let mut cells: Vec<String> = rec.iter().map(str::to_string).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        if optional_trailing_empty && cells.len() == header.len() - 1 {
            cells.push(String::new());
        }
        if cells.len() != header.len() {
            return Err(FeederError::InvalidRow {
                file: file.to_string(),
                line,
                reason: format!("expected {} cells, found {}", header.len(), cells.len()),
            });
        }
        rows.push(Row { line, cells });
    }
    Ok(Table { file, header, rows })
}

pub(crate) fn parse_general(text: &str) -> Result<GeneralData, FeederError> {
    let t = read_table("general.csv", text, &GENERAL_HEADER, true)?;
    let mut seen = BTreeSet::new();
    let mut slack = None;
    let mut vnom = None;
    let mut intl = 0i64;
    let mut delta_lf = 0.0;
    let mut mags = [None; 3];
    let mut angs = [None; 3];
    let mut taps: BTreeMap<BusId, [f64; 3]> = BTreeMap::new();
    for row in &t.rows {
        let key = row.cells[0].as_str();
        if !seen.insert(key.to_string()) {
            return Err(t.invalid(row, format!("duplicate key `{key}`")));
        }
        match key {
            "Slack" => slack = Some(t.bus(row, 1)?),
            "Vnom (kV)" => vnom = Some(t.real(row, 1)?),
            "InternationalSystem" => intl = t.cell(row, 1)?,
            "DeltaLF" => delta_lf = t.real(row, 1)?,
            _ => {
                if let Some(p) = key.strip_prefix("V_slack_ph_") {
                    let i = phase_index(p).ok_or_else(|| t.invalid(row, "unknown phase"))?;
                    mags[i] = Some(t.real(row, 1)?);
                } else if let Some(p) = key.strip_prefix("Ang_slack_ph_") {
                    let i = phase_index(p).ok_or_else(|| t.invalid(row, "unknown phase"))?;
                    angs[i] = Some(t.real(row, 1)?);
                } else if let Some(rest) = key.strip_prefix("Tap_") {
                    let (bus, p) = rest
                        .split_once("_ph_")
                        .ok_or_else(|| t.invalid(row, format!("malformed tap key `{key}`")))?;
                    let bus: u32 = bus
                        .parse()
                        .map_err(|_| t.invalid(row, format!("malformed tap key `{key}`")))?;
                    let i = phase_index(p).ok_or_else(|| t.invalid(row, "unknown phase"))?;
                    taps.entry(BusId(bus)).or_insert([1.0; 3])[i] = t.real(row, 1)?;
                } else {
                    return Err(t.invalid(row, format!("unknown key `{key}`")));
                }
            }
        }
    }
    let missing = |name: &str| FeederError::InvalidRow {
        file: "general.csv".into(),
        line: 0,
        reason: format!("missing key `{name}`"),
    };
    let mut slack_mag_pu = [0.0; 3];
    let mut slack_ang_deg = [0.0; 3];
    for i in 0..3 {
        let ph = ['A', 'B', 'C'][i];
        slack_mag_pu[i] = mags[i].ok_or_else(|| missing(&format!("V_slack_ph_{ph}")))?;
        slack_ang_deg[i] = angs[i].ok_or_else(|| missing(&format!("Ang_slack_ph_{ph}")))?;
    }
    let general = GeneralData {
        slack_bus: slack.ok_or_else(|| missing("Slack"))?,
        v_nom_kv: vnom.ok_or_else(|| missing("Vnom (kV)"))?,
        slack_mag_pu,
        slack_ang_deg,
        international_system: intl,
        delta_lf,
        taps,
    };
    validate_general(&general, "general.csv", 0)?;
    Ok(general)
}

fn phase_index(s: &str) -> Option<usize> {
    match s {
        "A" => Some(0),
        "B" => Some(1),
        "C" => Some(2),
        _ => None,
    }
}

fn wrap_deg(d: f64) -> f64 {
    let mut d = d % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d <= -180.0 {
        d += 360.0;
    }
    d
}

pub(crate) fn validate_general(g: &GeneralData, file: &str, line: u64) -> Result<(), FeederError> {
    let err = |reason: String| FeederError::InvalidRow {
        file: file.to_string(),
        line,
        reason,
    };
    if !(g.v_nom_kv > 0.0 && g.v_nom_kv.is_finite()) {
        return Err(err(format!("Vnom must be positive, got {}", g.v_nom_kv)));
    }
    if g.international_system != 0 {
        return Err(err(format!(
            "InternationalSystem={} is not supported (only 0: feet and per-mile data)",
            g.international_system
        )));
    }
    for m in g.slack_mag_pu {
        if !(m > 0.5 && m < 1.5) {
            return Err(err(format!("slack magnitude {m} pu outside (0.5, 1.5)")));
        }
    }
    let [a, b, c] = g.slack_ang_deg;
    let db = wrap_deg(b - a);
    let dc = wrap_deg(c - a);
    let tol = 1e-9;
    let abc = (db + 120.0).abs() <= tol && (dc - 120.0).abs() <= tol;
    let acb = (db - 120.0).abs() <= tol && (dc + 120.0).abs() <= tol;
    if !(abc || acb) {
        return Err(err(format!(
            "slack angles {a}, {b}, {c} are not mutually 120 degrees apart"
        )));
    }
    for (bus, taps) in &g.taps {
        for t in taps {
            if !(*t > 0.5 && *t < 1.5) {
                return Err(err(format!("tap {t} for bus {bus} outside (0.5, 1.5)")));
            }
        }
    }
    Ok(())
}

pub(crate) fn parse_configs(text: &str) -> Result<Vec<LineConfig>, FeederError> {
    let t = read_table("configs.csv", text, &CONFIGS_HEADER, false)?;
    let mut out = Vec::with_capacity(t.rows.len());
    let mut ids = BTreeSet::new();
    for row in &t.rows {
        let id: u32 = t.cell(row, 0)?;
        let is_line = t.flag(row, 1, 1)? == 1;
        let mut vals = [0.0; 18];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = t.real(row, 2 + k)?;
        }
        let six = |o: usize| -> [f64; 6] { vals[o..o + 6].try_into().expect("six entries") };
        let cfg = LineConfig::from_upper(id, is_line, six(0), six(6), six(12));
        validate_config(&cfg, "configs.csv", row.line)?;
        if !ids.insert(id) {
            return Err(t.invalid(row, format!("duplicate config id {id}")));
        }
        out.push(cfg);
    }
    Ok(out)
}

pub(crate) fn validate_config(c: &LineConfig, file: &str, line: u64) -> Result<(), FeederError> {
    let err = |reason: String| FeederError::InvalidRow {
        file: file.to_string(),
        line,
        reason,
    };
    if c.is_line {
        if c.phasing.is_empty() {
            return Err(err(format!("config {} has no phases", c.config_id)));
        }
        for p in super::Phase::ALL {
            if c.phasing.contains(p) {
                continue;
            }
            let i = p.index();
            for j in 0..3 {
                for m in [&c.r_ohm_per_mile, &c.x_ohm_per_mile, &c.b_usiemens_per_mile] {
                    if m[i][j] != 0.0 {
                        return Err(err(format!(
                            "config {}: absent phase {p} has nonzero entry",
                            c.config_id
                        )));
                    }
                }
            }
        }
    } else if !(c.r_ohm_per_mile[0][0] > 0.0 || c.x_ohm_per_mile[0][0] > 0.0) {
        return Err(err(format!(
            "transformer config {} needs a positive series impedance",
            c.config_id
        )));
    }
    for m in [&c.r_ohm_per_mile, &c.x_ohm_per_mile] {
        for i in 0..3 {
            if m[i][i] < 0.0 {
                return Err(err(format!("config {}: negative diagonal", c.config_id)));
            }
        }
    }
    Ok(())
}

pub(crate) fn parse_lines(text: &str) -> Result<Vec<LineSegment>, FeederError> {
    let t = read_table("lines.csv", text, &LINES_HEADER, false)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let seg = LineSegment {
            from_bus: t.bus(row, 0)?,
            to_bus: t.bus(row, 1)?,
            length_ft: t.real(row, 2)?,
            config_id: t.cell(row, 3)?,
        };
        if !(seg.length_ft > 0.0) {
            return Err(t.invalid(row, "segment length must be positive"));
        }
        if seg.from_bus == seg.to_bus {
            return Err(t.invalid(row, "segment connects a bus to itself"));
        }
        out.push(seg);
    }
    Ok(out)
}

pub(crate) fn validate_segments(
    segments: &[LineSegment],
    configs: &BTreeMap<u32, LineConfig>,
) -> Result<(), FeederError> {
    let mut pairs = BTreeSet::new();
    for s in segments {
        if !(s.length_ft > 0.0 && s.length_ft.is_finite()) || s.from_bus == s.to_bus {
            return Err(FeederError::InvalidRow {
                file: "lines.csv".into(),
                line: 0,
                reason: format!("invalid segment {}->{}", s.from_bus, s.to_bus),
            });
        }
        if !configs.contains_key(&s.config_id) {
            return Err(FeederError::DanglingConfigReference {
                from: s.from_bus,
                to: s.to_bus,
                config_id: s.config_id,
            });
        }
        let key = (s.from_bus.min(s.to_bus), s.from_bus.max(s.to_bus));
        if !pairs.insert(key) {
            return Err(FeederError::DuplicateSegment(key.0, key.1));
        }
    }
    Ok(())
}

pub(crate) fn parse_loads(text: &str) -> Result<Vec<SpotLoad>, FeederError> {
    let t = read_table("loads.csv", text, &LOADS_HEADER, false)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let connection = match t.flag(row, 1, 1)? {
            1 => Connection::Wye,
            _ => Connection::Delta,
        };
        let zip_kind = match t.flag(row, 2, 2)? {
            0 => ZipKind::ConstantPower,
            1 => ZipKind::ConstantCurrent,
            _ => ZipKind::ConstantImpedance,
        };
        let mut p_kw = [0.0; 3];
        let mut q_kvar = [0.0; 3];
        for k in 0..3 {
            p_kw[k] = t.real(row, 3 + 2 * k)?;
            q_kvar[k] = t.real(row, 4 + 2 * k)?;
        }
        let load = SpotLoad {
            bus: t.bus(row, 0)?,
            connection,
            zip_kind,
            p_kw,
            q_kvar,
        };
        validate_load(&load, "loads.csv", row.line)?;
        out.push(load);
    }
    Ok(out)
}

pub(crate) fn validate_load(l: &SpotLoad, file: &str, line: u64) -> Result<(), FeederError> {
    let err = |reason: String| FeederError::InvalidRow {
        file: file.to_string(),
        line,
        reason,
    };
    if l.p_kw
        .iter()
        .chain(&l.q_kvar)
        .any(|v| !(*v >= 0.0) || !v.is_finite())
    {
        return Err(err(format!("load at bus {} has a negative entry", l.bus)));
    }
    if l.p_kw.iter().chain(&l.q_kvar).all(|v| *v == 0.0) {
        return Err(err(format!("load at bus {} has no nonzero phase", l.bus)));
    }
    Ok(())
}

pub(crate) fn parse_coords(text: &str) -> Result<Vec<NodeCoord>, FeederError> {
    let t = read_table("coords.csv", text, &COORDS_HEADER, false)?;
    t.rows
        .iter()
        .map(|row| {
            Ok(NodeCoord {
                bus: t.bus(row, 0)?,
                x: t.real(row, 1)?,
                y: t.real(row, 2)?,
            })
        })
        .collect()
}

pub(crate) fn parse_switches(text: &str) -> Result<Vec<SwitchLink>, FeederError> {
    let t = read_table("switches.csv", text, &SWITCHES_HEADER, false)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let s = SwitchLink {
            bus_a: t.bus(row, 0)?,
            bus_b: t.bus(row, 1)?,
            closed: t.flag(row, 2, 1)? == 1,
        };
        validate_switch(&s, "switches.csv", row.line)?;
        out.push(s);
    }
    Ok(out)
}

pub(crate) fn validate_switch(s: &SwitchLink, file: &str, line: u64) -> Result<(), FeederError> {
    if s.bus_a == s.bus_b {
        return Err(FeederError::InvalidRow {
            file: file.to_string(),
            line,
            reason: format!("switch connects bus {} to itself", s.bus_a),
        });
    }
    Ok(())
}

pub(crate) fn parse_capacitors(text: &str) -> Result<Vec<ShuntCapacitor>, FeederError> {
    let t = read_table("capacitors.csv", text, &CAPACITORS_HEADER, false)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let cap = ShuntCapacitor {
            bus: t.bus(row, 0)?,
            kvar: [t.real(row, 1)?, t.real(row, 2)?, t.real(row, 3)?],
        };
        validate_capacitor(&cap, "capacitors.csv", row.line)?;
        out.push(cap);
    }
    Ok(out)
}

pub(crate) fn validate_capacitor(
    c: &ShuntCapacitor,
    file: &str,
    line: u64,
) -> Result<(), FeederError> {
    if c.kvar.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || c.kvar.iter().all(|v| *v == 0.0) {
        return Err(FeederError::InvalidRow {
            file: file.to_string(),
            line,
            reason: format!(
                "capacitor at bus {} needs nonnegative kvar with one nonzero phase",
                c.bus
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GENERAL: &str = "General Data,\nSlack,149\nVnom (kV),4.16\nInternationalSystem,0\nDeltaLF,0\nV_slack_ph_A,1.01\nV_slack_ph_B,1.01\nV_slack_ph_C,1.01\nAng_slack_ph_A,0\nAng_slack_ph_B,-120\nAng_slack_ph_C,120\n";

    #[test]
    fn general_table() {
        let g = parse_general(GENERAL).unwrap();
        assert_eq!(g.slack_bus, BusId(149));
        assert_eq!(g.v_nom_kv, 4.16);
        assert_eq!(g.slack_mag_pu, [1.01; 3]);
        assert_eq!(g.slack_ang_deg, [0.0, -120.0, 120.0]);
    }

    #[test]
    fn general_accepts_crlf_and_bom() {
        let text = format!("\u{feff}{}", GENERAL.replace('\n', "\r\n"));
        assert_eq!(
            parse_general(&text).unwrap(),
            parse_general(GENERAL).unwrap()
        );
    }

    #[test]
    fn general_rejects_skewed_angles() {
        let text = GENERAL.replace("Ang_slack_ph_C,120", "Ang_slack_ph_C,119");
        assert!(matches!(
            parse_general(&text),
            Err(FeederError::InvalidRow { .. })
        ));
    }

    #[test]
    fn general_taps() {
        let text = format!("{GENERAL}Tap_14_ph_A,1.0125\n");
        let g = parse_general(&text).unwrap();
        assert_eq!(g.taps[&BusId(14)], [1.0125, 1.0, 1.0]);
    }

    #[test]
    fn header_quoted_or_literal() {
        let quoted = "Node,\"Y=1, D=0\",\"Alfa (PQ=0, I=1, Z=2)\",Ph-1 (kW),Ph-1 (kVAr),Ph-2 (kW),Ph-2 (kVAr),Ph-3 (kW),Ph-3 (kVAr)\n5,1,1,0,0,0,0,20,10\n";
        let literal = quoted.replace('"', "");
        let a = parse_loads(quoted).unwrap();
        let b = parse_loads(&literal).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].zip_kind, ZipKind::ConstantCurrent);
        assert_eq!(a[0].p_kw, [0.0, 0.0, 20.0]);
        assert_eq!(a[0].q_kvar, [0.0, 0.0, 10.0]);
    }

    #[test]
    fn bad_header_is_reported() {
        let err = parse_lines("Node A,Node B,Length,Config.\n149,1,400,1\n").unwrap_err();
        assert!(matches!(err, FeederError::BadHeader { .. }));
    }

    #[test]
    fn unparseable_cell_names_line_and_column() {
        let err = parse_lines("Node A,Node B,Length (ft.),Config.\n149,1,400,1\n1,2,x75,10\n")
            .unwrap_err();
        match err {
            FeederError::UnparseableCell {
                line,
                column,
                value,
                ..
            } => {
                assert_eq!(line, 3);
                assert_eq!(column, "Length (ft.)");
                assert_eq!(value, "x75");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_cells_rejected() {
        assert!(parse_lines("Node A,Node B,Length (ft.),Config.\n149,1,NaN,1\n").is_err());
        assert!(parse_lines("Node A,Node B,Length (ft.),Config.\n149,1,inf,1\n").is_err());
    }

    #[test]
    fn negative_load_rejected() {
        let text = "Node,Y=1, D=0,Alfa (PQ=0, I=1, Z=2),Ph-1 (kW),Ph-1 (kVAr),Ph-2 (kW),Ph-2 (kVAr),Ph-3 (kW),Ph-3 (kVAr)\n1,1,0,-40,20,0,0,0,0\n";
        assert!(matches!(
            parse_loads(text),
            Err(FeederError::InvalidRow { .. })
        ));
    }

    #[test]
    fn switch_to_itself_rejected() {
        assert!(parse_switches("NODE1,NODE2,Closed=1\n18,18,1\n").is_err());
    }

    #[test]
    fn absent_phase_must_be_zero() {
        // Phase A absent but R12 nonzero.
        let row = "7,1,0,0.1,0,0.4666,0,0.4615,0,0,0,1.0482,0,1.0651,0,0,0,5,0,5";
        let text = format!(
            "{}\n{row}\n",
            CONFIGS_HEADER
                .map(|h| if h.contains(',') {
                    format!("\"{h}\"")
                } else {
                    h.to_string()
                })
                .join(",")
        );
        assert!(parse_configs(&text).is_err());
    }
}
