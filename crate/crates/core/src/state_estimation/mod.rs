//! Weighted least squares estimation of per-phase bus voltages from PMU
//! phasors and load pseudo-measurements.

mod io;
mod model;
mod solve;

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::feeder_model::{BusId, Connection, FeederError, Phase, RadialNetwork};
use crate::pmu_placement::{
    assign_channels, observable_set, ObservabilityOptions, Placement, PlacementError,
    PlacementGraph,
};
use crate::power_flow::PhasorSet;

pub use io::{parse_measurements_csv, write_measurements_csv, MEASUREMENTS_HEADER};
pub use solve::{
    chi_square_at, estimate_parallel, jacobian_check, wls_gauss_newton, wls_linear_pmu,
    EstimationResult, EstimatorOptions, Initialization, ZoneStats,
};

/// Smallest standard deviation accepted; smaller values are raised to it.
pub const SIGMA_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("placement does not observe buses {0:?}")]
    UnobservablePlacement(Vec<BusId>),
    #[error("{}rank-deficient measurement model: {detail}", zone_prefix(*zone))]
    RankDeficient { zone: Option<usize>, detail: String },
    #[error("{}estimator diverged after {iterations} iterations", zone_prefix(*zone))]
    Diverged {
        zone: Option<usize>,
        iterations: usize,
    },
    #[error("{}estimator did not converge in {iterations} iterations", zone_prefix(*zone))]
    MaxIterations {
        zone: Option<usize>,
        iterations: usize,
    },
    #[error(
        "zones {} and {} disagree at bus {bus} phase {}: {difference_pu:.3e} pu exceeds {limit_pu:.3e} pu",
        zones.0, zones.1, phase.letter()
    )]
    MergeConflict {
        bus: BusId,
        phase: Phase,
        zones: (usize, usize),
        difference_pu: f64,
        limit_pu: f64,
    },
    #[error("estimate and truth cover different buses: {0}")]
    IndexMismatch(String),
    #[error("measurement location {0} is not in the network")]
    UnknownLocation(String),
    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),
    #[error("invalid estimator options: {0}")]
    InvalidOptions(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("measurements line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Feeder(#[from] FeederError),
}

fn zone_prefix(zone: Option<usize>) -> String {
    zone.map(|z| format!("zone {z}: ")).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    PmuVoltage,
    PmuCurrent,
    PseudoInjection,
}

impl MeasurementKind {
    pub fn label(self) -> &'static str {
        match self {
            MeasurementKind::PmuVoltage => "pmu-voltage",
            MeasurementKind::PmuCurrent => "pmu-current",
            MeasurementKind::PseudoInjection => "pseudo-injection",
        }
    }

    pub fn from_label(s: &str) -> Option<MeasurementKind> {
        [
            MeasurementKind::PmuVoltage,
            MeasurementKind::PmuCurrent,
            MeasurementKind::PseudoInjection,
        ]
        .into_iter()
        .find(|k| k.label() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    Bus(BusId),
    /// Branch terminal current leaving `at` toward `toward`.
    Branch {
        at: BusId,
        toward: BusId,
    },
}

/// One complex measurement in per-unit. Phasors are rectangular
/// (re, im); pseudo-injections hold (P, Q) on the per-phase power base.
/// `sigma` applies to each of the two components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub location: Location,
    pub phase: Phase,
    pub value: [f64; 2],
    pub sigma: f64,
}

impl Measurement {
    pub fn bus(&self) -> BusId {
        match self.location {
            Location::Bus(b) => b,
            Location::Branch { at, .. } => at,
        }
    }

    fn order_key(&self) -> (BusId, Phase, MeasurementKind, BusId) {
        let toward = match self.location {
            Location::Bus(_) => BusId(0),
            Location::Branch { toward, .. } => toward,
        };
        (self.bus(), self.phase, self.kind, toward)
    }

    pub fn location_label(&self) -> String {
        match self.location {
            Location::Bus(b) => b.to_string(),
            Location::Branch { at, toward } => format!("{at}>{toward}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    /// Ordered by bus, phase, kind, then far bus.
    pub measurements: Vec<Measurement>,
    pub seed: u64,
    pub truth_id: String,
    /// Warnings raised while generating, such as floored sigmas.
    pub findings: Vec<String>,
}

impl MeasurementSet {
    /// Sorts into the stable order. Equal keys keep their input order.
    pub fn new(mut measurements: Vec<Measurement>, seed: u64, truth_id: String) -> MeasurementSet {
        measurements.sort_by_key(Measurement::order_key);
        MeasurementSet {
            measurements,
            seed,
            truth_id,
            findings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Same measurements with every sigma multiplied by `k`.
    pub fn scaled_sigmas(&self, k: f64) -> MeasurementSet {
        let mut out = self.clone();
        for m in &mut out.measurements {
            m.sigma *= k;
        }
        out
    }
}

/// Standard deviations: voltage and current in pu per rectangular
/// component, pseudo-injection as a fraction of the rated per-phase load.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_v: f64,
    pub sigma_i: f64,
    pub sigma_pseudo: f64,
    /// When false the values are exact and sigmas only set the weights.
    pub add_noise: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_v: 0.001,
            sigma_i: 0.002,
            sigma_pseudo: 0.1,
            add_noise: true,
        }
    }
}

impl NoiseSpec {
    pub fn noise_free() -> NoiseSpec {
        NoiseSpec {
            add_noise: false,
            ..NoiseSpec::default()
        }
    }
}

/// Content hash of a voltage solution, used to tie measurements to it.
pub fn truth_id(v: &PhasorSet) -> String {
    let mut h = Sha256::new();
    for (b, p, x) in v.iter() {
        h.update(b.0.to_le_bytes());
        h.update([p.index() as u8]);
        h.update(x.re.to_le_bytes());
        h.update(x.im.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Rated per-phase apparent power in pu at a bus. A delta leg splits
/// evenly between the two phases it connects.
fn rated_pu(net: &RadialNetwork, bus: usize) -> [f64; 3] {
    let per_phase_kva = crate::feeder_model::S_BASE_VA / 3.0 / 1e3;
    let mut out = [0.0; 3];
    for l in &net.buses[bus].loads {
        for k in 0..3 {
            let s = l.p_kw[k].hypot(l.q_kvar[k]) / per_phase_kva;
            match l.connection {
                Connection::Wye => out[k] += s,
                Connection::Delta => {
                    out[k] += s / 2.0;
                    out[(k + 1) % 3] += s / 2.0;
                }
            }
        }
    }
    out
}

fn floored(sigma: f64, what: &str, findings: &mut Vec<String>) -> Result<f64, EstimationError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(EstimationError::InvalidNoise(format!(
            "{what} sigma {sigma}"
        )));
    }
    if sigma < SIGMA_FLOOR {
        findings.push(format!("{what} sigma {sigma} raised to {SIGMA_FLOOR}"));
        return Ok(SIGMA_FLOOR);
    }
    Ok(sigma)
}

/// Measurements implied by the true voltages: PMU voltages and channel
/// currents, plus load pseudo-injections at every loaded phase. Channels
/// come from the placement (pinned lists are honored). Noise is drawn in
/// the set's stable order, two normals per measurement.
pub fn generate_measurements(
    net: &RadialNetwork,
    truth: &PhasorSet,
    placement: &Placement,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<MeasurementSet, EstimationError> {
    let graph = PlacementGraph::from_network(net);
    let seen = observable_set(&graph, placement, ObservabilityOptions::default())?;
    let blind: Vec<BusId> = graph
        .buses()
        .into_iter()
        .filter(|b| !seen.contains(b))
        .collect();
    if !blind.is_empty() {
        return Err(EstimationError::UnobservablePlacement(blind));
    }
    let assignment = assign_channels(&graph, placement)?;

    let mut findings = Vec::new();
    let sigma_v = floored(noise.sigma_v, "voltage", &mut findings)?;
    let sigma_i = floored(noise.sigma_i, "current", &mut findings)?;
    if !noise.sigma_pseudo.is_finite() || noise.sigma_pseudo < 0.0 {
        return Err(EstimationError::InvalidNoise(format!(
            "pseudo sigma {}",
            noise.sigma_pseudo
        )));
    }

    let mut raw = Vec::new();
    let mut pseudo_floored = BTreeSet::new();
    for (pmu, list) in &assignment {
        let bus = &net.buses[net.index[pmu]];
        for p in bus.phases.iter() {
            raw.push((MeasurementKind::PmuVoltage, Location::Bus(*pmu), p, sigma_v));
        }
        for v in list {
            for p in graph.edge_phases(*pmu, *v).iter() {
                let loc = Location::Branch {
                    at: *pmu,
                    toward: *v,
                };
                raw.push((MeasurementKind::PmuCurrent, loc, p, sigma_i));
            }
        }
    }
    for (k, bus) in net.buses.iter().enumerate() {
        if bus.loads.is_empty() {
            continue;
        }
        let rated = rated_pu(net, k);
        for p in bus.phases.iter() {
            if rated[p.index()] == 0.0 {
                continue;
            }
            let mut s = noise.sigma_pseudo * rated[p.index()];
            if s < SIGMA_FLOOR {
                pseudo_floored.insert(bus.id);
                s = SIGMA_FLOOR;
            }
            raw.push((
                MeasurementKind::PseudoInjection,
                Location::Bus(bus.id),
                p,
                s,
            ));
        }
    }
    if !pseudo_floored.is_empty() {
        findings.push(format!(
            "pseudo-injection sigma raised to {SIGMA_FLOOR} at buses {:?}",
            pseudo_floored
        ));
    }

    let grid = model::Grid::new(net);
    let x = solve::state_vector(&grid, truth)?;
    let exact: Vec<Measurement> = raw
        .into_iter()
        .map(|(kind, location, phase, sigma)| {
            let mut m = Measurement {
                kind,
                location,
                phase,
                value: [0.0; 2],
                sigma,
            };
            let h: Complex64 = grid.func(&m)?.eval(&x);
            m.value = [h.re, h.im];
            Ok(m)
        })
        .collect::<Result<_, EstimationError>>()?;

    let mut set = MeasurementSet::new(exact, seed, truth_id(truth));
    if noise.add_noise {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for m in &mut set.measurements {
            for c in &mut m.value {
                let e: f64 = StandardNormal.sample(&mut rng);
                *c += m.sigma * e;
            }
        }
    }
    set.findings = findings;
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub bus: BusId,
    pub phase: Phase,
    pub magnitude_error_pct: f64,
    pub angle_error_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub rows: Vec<ErrorRow>,
    pub max_magnitude_error_pct: f64,
    pub mean_magnitude_error_pct: f64,
    pub max_angle_error_deg: f64,
    pub mean_angle_error_deg: f64,
}

/// Percent magnitude error `100·|V_est − V_true| / |V_true|` and absolute
/// angle difference in degrees for every bus and phase.
pub fn error_report(
    estimate: &PhasorSet,
    truth: &PhasorSet,
) -> Result<EstimationReport, EstimationError> {
    let keys = |s: &PhasorSet| s.iter().map(|(b, p, _)| (b, p)).collect::<Vec<_>>();
    if keys(estimate) != keys(truth) {
        let a: BTreeSet<_> = keys(estimate).into_iter().collect();
        let b: BTreeSet<_> = keys(truth).into_iter().collect();
        let diff: Vec<_> = a.symmetric_difference(&b).take(5).collect();
        return Err(EstimationError::IndexMismatch(format!("{diff:?}")));
    }
    let rows: Vec<ErrorRow> = truth
        .iter()
        .map(|(bus, phase, t)| {
            let e = estimate.get(bus, phase).expect("same keys");
            let mut da = (e.arg() - t.arg()).to_degrees();
            da = (da + 180.0).rem_euclid(360.0) - 180.0;
            ErrorRow {
                bus,
                phase,
                magnitude_error_pct: 100.0 * (e - t).norm() / t.norm(),
                angle_error_deg: da.abs(),
            }
        })
        .collect();
    let n = rows.len().max(1) as f64;
    let max = |f: fn(&ErrorRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let mean = |f: fn(&ErrorRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(EstimationReport {
        max_magnitude_error_pct: max(|r| r.magnitude_error_pct),
        mean_magnitude_error_pct: mean(|r| r.magnitude_error_pct),
        max_angle_error_deg: max(|r| r.angle_error_deg),
        mean_angle_error_deg: mean(|r| r.angle_error_deg),
        rows,
    })
}
