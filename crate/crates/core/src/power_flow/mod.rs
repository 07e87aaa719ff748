//! Forward/backward sweep power flow for radial unbalanced feeders.
//!
//! All arithmetic is in volts, amperes and ohms. Per-unit values appear only
//! in the reported mismatch and in [`PhasorSet`] accessors.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::feeder_model::{
    BusId, Connection, FeederError, FeederModel, Phase, RadialNetwork, SpotLoad, ZipKind,
};

pub type C3 = [Complex64; 3];
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("network is not radial: {0}")]
    NotRadial(String),
    #[error("slack bus {0} is missing from the network")]
    MissingSlack(BusId),
    #[error("zero voltage at load on bus {bus} phase {phase}")]
    ZeroVoltageAtLoad { bus: BusId, phase: Phase },
    #[error("invalid sweep options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Feeder(FeederError),
}

impl From<FeederError> for PowerFlowError {
    fn from(e: FeederError) -> Self {
        match e {
            FeederError::Topology(msg) => PowerFlowError::NotRadial(msg),
            FeederError::MergeCreatesCycle { .. } => PowerFlowError::NotRadial(e.to_string()),
            other => PowerFlowError::Feeder(other),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOptions {
    pub tolerance_pu: f64,
    pub max_iterations: usize,
    pub flat_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tolerance_pu: 1e-6,
            max_iterations: 100,
            flat_start: true,
        }
    }
}

impl SweepOptions {
    fn check(&self) -> Result<(), PowerFlowError> {
        if !(self.tolerance_pu > 0.0) {
            return Err(PowerFlowError::InvalidOptions(format!(
                "tolerance must be positive, got {}",
                self.tolerance_pu
            )));
        }
        if self.max_iterations == 0 {
            return Err(PowerFlowError::InvalidOptions(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Line-to-neutral phasors in volts for every present (bus, phase).
/// Buses merged away by closed switches resolve to their representative.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasorSet {
    values: BTreeMap<BusId, BTreeMap<Phase, Complex64>>,
    aliases: BTreeMap<BusId, BusId>,
    v_base_ln: f64,
}

impl PhasorSet {
    pub fn new(v_base_ln: f64, aliases: BTreeMap<BusId, BusId>) -> PhasorSet {
        PhasorSet {
            values: BTreeMap::new(),
            aliases,
            v_base_ln,
        }
    }

    pub fn from_network(net: &RadialNetwork, v: &[C3]) -> PhasorSet {
        let mut set = PhasorSet::new(net.v_base_ln, net.aliases.clone());
        for (i, bus) in net.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                set.insert(bus.id, p, v[i][p.index()]);
            }
        }
        set
    }

    pub fn insert(&mut self, bus: BusId, phase: Phase, v: Complex64) {
        self.values.entry(bus).or_default().insert(phase, v);
    }

    fn resolve(&self, bus: BusId) -> BusId {
        self.aliases.get(&bus).copied().unwrap_or(bus)
    }

    pub fn get(&self, bus: BusId, phase: Phase) -> Option<Complex64> {
        self.values.get(&self.resolve(bus))?.get(&phase).copied()
    }

    pub fn get_pu(&self, bus: BusId, phase: Phase) -> Option<Complex64> {
        self.get(bus, phase).map(|v| v / self.v_base_ln)
    }

    pub fn mag_pu(&self, bus: BusId, phase: Phase) -> Option<f64> {
        self.get(bus, phase).map(|v| v.norm() / self.v_base_ln)
    }

    pub fn angle_deg(&self, bus: BusId, phase: Phase) -> Option<f64> {
        self.get(bus, phase).map(|v| v.arg().to_degrees())
    }

    pub fn v_base_ln(&self) -> f64 {
        self.v_base_ln
    }

    pub fn aliases(&self) -> &BTreeMap<BusId, BusId> {
        &self.aliases
    }

    /// Entries of the solved network buses, ordered by bus id then phase.
    pub fn iter(&self) -> impl Iterator<Item = (BusId, Phase, Complex64)> + '_ {
        self.values
            .iter()
            .flat_map(|(b, m)| m.iter().map(move |(p, v)| (*b, *p, *v)))
    }

    /// Like [`PhasorSet::iter`] but also lists every alias bus with its
    /// representative's value.
    pub fn iter_with_aliases(&self) -> Vec<(BusId, Phase, Complex64)> {
        let mut out: Vec<_> = self.iter().collect();
        for (alias, rep) in &self.aliases {
            if let Some(m) = self.values.get(rep) {
                for (p, v) in m {
                    out.push((*alias, *p, *v));
                }
            }
        }
        out.sort_by_key(|(b, p, _)| (*b, *p));
        out
    }

    pub fn len(&self) -> usize {
        self.values.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phases_of(&self, bus: BusId) -> Vec<Phase> {
        self.values
            .get(&self.resolve(bus))
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
pub struct PowerFlowSolution {
    pub voltages: PhasorSet,
    pub iterations: usize,
    pub converged: bool,
    pub max_mismatch_pu: f64,
    /// Max per-unit voltage change of each sweep.
    pub mismatch_history: Vec<f64>,
    pub total_source_kw: f64,
    pub total_source_kvar: f64,
    pub total_load_kw: f64,
    pub total_load_kvar: f64,
    pub total_loss_kw: f64,
    pub total_loss_kvar: f64,
    /// Reactive power produced by capacitor banks and line charging.
    pub total_shunt_gen_kvar: f64,
    pub total_shunt_gen_kw: f64,
}

fn polar(mag: f64, ang: f64) -> Complex64 {
    Complex64::from_polar(mag, ang)
}

/// Per-phase line currents drawn by one load at bus voltages `v` (volts).
/// Delta legs k = AB, BC, CA use `v[k] - v[k+1]`; leg currents leave phase k
/// and return on phase k+1.
pub fn load_current(load: &SpotLoad, v: &C3, v_nom_kv: f64) -> Result<C3, PowerFlowError> {
    let v_ll = v_nom_kv * 1000.0;
    let v_ln = v_ll / 3f64.sqrt();
    let mut out = [ZERO; 3];
    for k in 0..3 {
        let s = Complex64::new(load.p_kw[k], load.q_kvar[k]) * 1000.0;
        if s == ZERO {
            continue;
        }
        let (vk, vnom) = match load.connection {
            Connection::Wye => (v[k], v_ln),
            Connection::Delta => (v[k] - v[(k + 1) % 3], v_ll),
        };
        if vk.norm() == 0.0 {
            return Err(PowerFlowError::ZeroVoltageAtLoad {
                bus: load.bus,
                phase: Phase::from_index(k),
            });
        }
        let i = match load.zip_kind {
            ZipKind::ConstantPower => (s / vk).conj(),
            ZipKind::ConstantCurrent => polar(s.norm() / vnom, vk.arg() - s.arg()),
            ZipKind::ConstantImpedance => vk * s.conj() / (vnom * vnom),
        };
        match load.connection {
            Connection::Wye => out[k] += i,
            Connection::Delta => {
                out[k] += i;
                out[(k + 1) % 3] -= i;
            }
        }
    }
    Ok(out)
}

fn matvec(m: &[[Complex64; 3]; 3], v: &C3) -> C3 {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn add(a: &C3, b: &C3) -> C3 {
    std::array::from_fn(|i| a[i] + b[i])
}

fn sub(a: &C3, b: &C3) -> C3 {
    std::array::from_fn(|i| a[i] - b[i])
}

fn scale(t: &[f64; 3], v: &C3) -> C3 {
    std::array::from_fn(|i| v[i] * t[i])
}

/// Current leaving bus `i` into its own loads and capacitor bank.
pub fn bus_demand_current(net: &RadialNetwork, i: usize, v: &C3) -> Result<C3, PowerFlowError> {
    let bus = &net.buses[i];
    let mut out = [ZERO; 3];
    for l in &bus.loads {
        out = add(&out, &load_current(l, v, net.v_nom_kv)?);
    }
    for k in 0..3 {
        out[k] += Complex64::new(0.0, bus.cap_siemens[k]) * v[k];
    }
    Ok(out)
}

/// Series current (through Z) and sending current (after the tap) of every
/// branch, obtained by one backward pass at fixed voltages.
pub struct BranchCurrents {
    pub series: Vec<C3>,
    pub sending: Vec<C3>,
    /// Sending current referred to the parent side of the tap.
    pub from_parent: Vec<C3>,
}

pub fn backward_pass(net: &RadialNetwork, v: &[C3]) -> Result<BranchCurrents, PowerFlowError> {
    let nb = net.branches.len();
    let mut series = vec![[ZERO; 3]; nb];
    let mut sending = vec![[ZERO; 3]; nb];
    let mut from_parent = vec![[ZERO; 3]; nb];
    for i in (1..net.buses.len()).rev() {
        let bus = &net.buses[i];
        let mut j = bus_demand_current(net, i, &v[i])?;
        for &c in &bus.children {
            j = add(&j, &from_parent[c]);
        }
        let b = bus.parent_branch.expect("non-slack bus has a parent");
        let br = &net.branches[b];
        let i_ser = add(&j, &matvec(&br.y_half, &v[i]));
        let v_s = scale(&br.taps, &v[br.from]);
        let i_s = add(&i_ser, &matvec(&br.y_half, &v_s));
        series[b] = i_ser;
        sending[b] = i_s;
        from_parent[b] = scale(&br.taps, &i_s);
    }
    Ok(BranchCurrents {
        series,
        sending,
        from_parent,
    })
}

fn initial_voltages(net: &RadialNetwork, flat: bool) -> Vec<C3> {
    let mut v = vec![[ZERO; 3]; net.buses.len()];
    v[0] = net.slack_voltage;
    for i in 1..net.buses.len() {
        let bus = &net.buses[i];
        let br = &net.branches[bus.parent_branch.expect("parent")];
        for p in bus.phases.iter() {
            let k = p.index();
            v[i][k] = if flat {
                net.slack_voltage[k]
            } else {
                v[br.from][k] * br.taps[k]
            };
        }
    }
    v
}

pub fn solve_power_flow(
    model: &FeederModel,
    opts: &SweepOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let net = RadialNetwork::build(model)?;
    if net.buses.first().map(|b| b.id) != Some(model.general().slack_bus) {
        return Err(PowerFlowError::MissingSlack(model.general().slack_bus));
    }
    solve_network(&net, opts)
}

pub fn solve_network(
    net: &RadialNetwork,
    opts: &SweepOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    opts.check()?;
    let mut v = initial_voltages(net, opts.flat_start);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let cur = backward_pass(net, &v)?;
        let mut max_change = 0.0f64;
        for i in 1..net.buses.len() {
            let bus = &net.buses[i];
            let b = bus.parent_branch.expect("parent");
            let br = &net.branches[b];
            let v_s = scale(&br.taps, &v[br.from]);
            let drop = matvec(&br.z, &cur.series[b]);
            let mut new = sub(&v_s, &drop);
            for k in 0..3 {
                if !bus.phases.contains(Phase::from_index(k)) {
                    new[k] = ZERO;
                }
                max_change = max_change.max((new[k] - v[i][k]).norm() / net.v_base_ln);
            }
            v[i] = new;
        }
        history.push(max_change);
        if max_change <= opts.tolerance_pu {
            converged = true;
            break;
        }
    }
    let max_mismatch_pu = history.last().copied().unwrap_or(0.0);
    let totals = power_totals(net, &v)?;
    Ok(PowerFlowSolution {
        voltages: PhasorSet::from_network(net, &v),
        iterations,
        converged,
        max_mismatch_pu,
        mismatch_history: history,
        total_source_kw: totals.source.re / 1e3,
        total_source_kvar: totals.source.im / 1e3,
        total_load_kw: totals.load.re / 1e3,
        total_load_kvar: totals.load.im / 1e3,
        total_loss_kw: totals.loss.re / 1e3,
        total_loss_kvar: totals.loss.im / 1e3,
        total_shunt_gen_kw: totals.shunt_gen.re / 1e3,
        total_shunt_gen_kvar: totals.shunt_gen.im / 1e3,
    })
}

struct Totals {
    source: Complex64,
    load: Complex64,
    loss: Complex64,
    shunt_gen: Complex64,
}

fn vi(v: &C3, i: &C3) -> Complex64 {
    (0..3).map(|k| v[k] * i[k].conj()).sum()
}

fn power_totals(net: &RadialNetwork, v: &[C3]) -> Result<Totals, PowerFlowError> {
    let cur = backward_pass(net, v)?;
    let mut load = ZERO;
    let mut shunt_gen = ZERO;
    for (i, bus) in net.buses.iter().enumerate() {
        for l in &bus.loads {
            load += vi(&v[i], &load_current(l, &v[i], net.v_nom_kv)?);
        }
        let cap: C3 = std::array::from_fn(|k| Complex64::new(0.0, bus.cap_siemens[k]) * v[i][k]);
        shunt_gen -= vi(&v[i], &cap);
    }
    let mut loss = ZERO;
    let mut source = vi(&v[0], &bus_demand_current(net, 0, &v[0])?);
    for (b, br) in net.branches.iter().enumerate() {
        let v_s = scale(&br.taps, &v[br.from]);
        loss += vi(&sub(&v_s, &v[br.to]), &cur.series[b]);
        shunt_gen -= vi(&v_s, &matvec(&br.y_half, &v_s));
        shunt_gen -= vi(&v[br.to], &matvec(&br.y_half, &v[br.to]));
        if br.from == 0 {
            source += vi(&v[0], &cur.from_parent[b]);
        }
    }
    // Slack-bus own demand is load, already counted above.
    Ok(Totals {
        source,
        load,
        loss,
        shunt_gen,
    })
}

fn invert_block(z: &[[Complex64; 3]; 3], idx: &[usize]) -> Option<DMatrix<Complex64>> {
    let n = idx.len();
    let m = DMatrix::from_fn(n, n, |r, c| z[idx[r]][idx[c]]);
    m.try_inverse()
}

/// Worst per-unit KCL mismatch over all non-slack (bus, phase) nodes, with
/// branch currents recomputed from voltages through the series impedances.
pub fn kcl_residual(
    model: &FeederModel,
    solution: &PowerFlowSolution,
) -> Result<f64, PowerFlowError> {
    let net = RadialNetwork::build(model)?;
    kcl_residual_network(&net, &solution.voltages)
}

pub fn kcl_residual_network(
    net: &RadialNetwork,
    voltages: &PhasorSet,
) -> Result<f64, PowerFlowError> {
    let v: Vec<C3> = net
        .buses
        .iter()
        .map(|b| std::array::from_fn(|k| voltages.get(b.id, Phase::from_index(k)).unwrap_or(ZERO)))
        .collect();
    let nb = net.branches.len();
    let mut series = vec![[ZERO; 3]; nb];
    for (b, br) in net.branches.iter().enumerate() {
        let idx: Vec<usize> = br.phases.iter().map(Phase::index).collect();
        let v_s = scale(&br.taps, &v[br.from]);
        let dv = sub(&v_s, &v[br.to]);
        let zi = invert_block(&br.z, &idx).ok_or_else(|| {
            PowerFlowError::InvalidOptions(format!(
                "singular impedance on branch {}-{}",
                br.from_bus, br.to_bus
            ))
        })?;
        for (r, &kr) in idx.iter().enumerate() {
            series[b][kr] = idx
                .iter()
                .enumerate()
                .map(|(c, &kc)| zi[(r, c)] * dv[kc])
                .sum();
        }
    }
    let i_base = net.i_base();
    let mut worst = 0.0f64;
    for i in 1..net.buses.len() {
        let bus = &net.buses[i];
        let b = bus.parent_branch.expect("parent");
        let br = &net.branches[b];
        let mut r = sub(&series[b], &matvec(&br.y_half, &v[i]));
        r = sub(&r, &bus_demand_current(net, i, &v[i])?);
        for &c in &bus.children {
            let ch = &net.branches[c];
            let v_s = scale(&ch.taps, &v[i]);
            let i_s = add(&series[c], &matvec(&ch.y_half, &v_s));
            r = sub(&r, &scale(&ch.taps, &i_s));
        }
        for p in bus.phases.iter() {
            worst = worst.max(r[p.index()].norm() / i_base);
        }
    }
    Ok(worst)
}
