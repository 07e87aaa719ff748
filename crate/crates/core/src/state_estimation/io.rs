use crate::feeder_model::{BusId, Phase};

use super::{EstimationError, Location, Measurement, MeasurementKind, MeasurementSet};

pub const MEASUREMENTS_HEADER: [&str; 6] =
    ["kind", "location", "phase", "re_or_p", "im_or_q", "sigma"];

/// CSV text with `# seed=` and `# truth=` comment lines ahead of the
/// header. Reals use shortest round-trip formatting.
pub fn write_measurements_csv(set: &MeasurementSet) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(MEASUREMENTS_HEADER)
        .expect("in-memory write");
    for m in &set.measurements {
        w.write_record([
            m.kind.label().to_string(),
            m.location_label(),
            m.phase.to_string(),
            m.value[0].to_string(),
            m.value[1].to_string(),
            m.sigma.to_string(),
        ])
        .expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii");
    format!("# seed={}\n# truth={}\n{body}", set.seed, set.truth_id)
}

fn bus(s: &str, line: usize) -> Result<BusId, EstimationError> {
    s.trim()
        .parse::<u32>()
        .map(BusId)
        .map_err(|_| EstimationError::Parse {
            line,
            msg: format!("bad bus id {s:?}"),
        })
}

fn real(s: &str, what: &str, line: usize) -> Result<f64, EstimationError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(EstimationError::Parse {
            line,
            msg: format!("bad {what} {s:?}"),
        }),
    }
}

pub fn parse_measurements_csv(text: &str) -> Result<MeasurementSet, EstimationError> {
    let mut seed = 0u64;
    let mut truth = String::new();
    let mut body_start = 0;
    let mut line_no = 0;
    for line in text.lines() {
        let t = line.trim();
        if let Some(c) = t.strip_prefix('#') {
            line_no += 1;
            body_start += line.len() + 1;
            let c = c.trim();
            if let Some(v) = c.strip_prefix("seed=") {
                seed = v.trim().parse().map_err(|_| EstimationError::Parse {
                    line: line_no,
                    msg: format!("bad seed {v:?}"),
                })?;
            } else if let Some(v) = c.strip_prefix("truth=") {
                truth = v.trim().to_string();
            }
        } else {
            break;
        }
    }
    let body = text.get(body_start.min(text.len())..).unwrap_or("");
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut out = Vec::new();
    let mut saw_header = false;
    for rec in rd.records() {
        let rec = rec.map_err(|e| EstimationError::Parse {
            line: line_no + 1,
            msg: e.to_string(),
        })?;
        let line = line_no + rec.position().map_or(0, |p| p.line() as usize);
        let cells: Vec<&str> = rec.iter().map(str::trim).collect();
        if !saw_header {
            if cells != MEASUREMENTS_HEADER {
                return Err(EstimationError::Parse {
                    line,
                    msg: format!("expected header {}", MEASUREMENTS_HEADER.join(",")),
                });
            }
            saw_header = true;
            continue;
        }
        if cells.len() != MEASUREMENTS_HEADER.len() {
            return Err(EstimationError::Parse {
                line,
                msg: format!(
                    "expected {} cells, found {}",
                    MEASUREMENTS_HEADER.len(),
                    cells.len()
                ),
            });
        }
        let kind = MeasurementKind::from_label(cells[0]).ok_or_else(|| EstimationError::Parse {
            line,
            msg: format!("unknown kind {:?}", cells[0]),
        })?;
        let location = match cells[1].split_once('>') {
            Some((a, b)) => Location::Branch {
                at: bus(a, line)?,
                toward: bus(b, line)?,
            },
            None => Location::Bus(bus(cells[1], line)?),
        };
        let branch = matches!(location, Location::Branch { .. });
        if branch != (kind == MeasurementKind::PmuCurrent) {
            return Err(EstimationError::Parse {
                line,
                msg: format!("location {:?} does not fit kind {}", cells[1], kind.label()),
            });
        }
        let phase = Phase::from_letter(cells[2]).ok_or_else(|| EstimationError::Parse {
            line,
            msg: format!("bad phase {:?}", cells[2]),
        })?;
        let sigma = real(cells[5], "sigma", line)?;
        if sigma <= 0.0 {
            return Err(EstimationError::Parse {
                line,
                msg: format!("sigma must be positive, found {sigma}"),
            });
        }
        out.push(Measurement {
            kind,
            location,
            phase,
            value: [
                real(cells[3], "value", line)?,
                real(cells[4], "value", line)?,
            ],
            sigma,
        });
    }
    if !saw_header {
        return Err(EstimationError::Parse {
            line: line_no + 1,
            msg: "missing header".into(),
        });
    }
    Ok(MeasurementSet::new(out, seed, truth))
}
