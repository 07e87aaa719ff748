use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::feeder_model::{BusId, Phase, PhaseSet, RadialNetwork};

use super::{EstimationError, Location, Measurement, MeasurementKind};

type C = Complex64;
const J: C = C::new(0.0, 1.0);

/// Sparse complex linear form `Σ c_j x_j` over state indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Lin(pub Vec<(usize, C)>);

impl Lin {
    fn add(&mut self, j: usize, c: C) {
        if c != C::new(0.0, 0.0) {
            self.0.push((j, c));
        }
    }

    fn extend_scaled(&mut self, other: &Lin, k: C) {
        for &(j, c) in &other.0 {
            self.add(j, c * k);
        }
    }

    pub fn eval(&self, x: &[C]) -> C {
        self.0.iter().map(|(j, c)| c * x[*j]).sum()
    }

    fn remap(&self, map: &[Option<usize>]) -> Option<Lin> {
        self.0
            .iter()
            .map(|(j, c)| map[*j].map(|k| (k, *c)))
            .collect::<Option<Vec<_>>>()
            .map(Lin)
    }
}

/// Measurement function of one complex measurement.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Func {
    /// Phasor `h = Σ c x`.
    Phasor(Lin),
    /// Complex power `S = x_v · conj(Σ c x)`.
    Power { v: usize, i: Lin },
}

impl Func {
    pub fn eval(&self, x: &[C]) -> C {
        match self {
            Func::Phasor(l) => l.eval(x),
            Func::Power { v, i } => x[*v] * i.eval(x).conj(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Func::Phasor(_))
    }

    pub fn remap(&self, map: &[Option<usize>]) -> Option<Func> {
        match self {
            Func::Phasor(l) => l.remap(map).map(Func::Phasor),
            Func::Power { v, i } => Some(Func::Power {
                v: map[*v]?,
                i: i.remap(map)?,
            }),
        }
    }

    /// Sparse real Jacobian rows (real part, imaginary part) over the real
    /// state `[e0, f0, e1, f1, ...]`. Columns may repeat; entries add.
    pub fn jacobian(&self, x: &[C]) -> [Vec<(usize, f64)>; 2] {
        let mut re = Vec::new();
        let mut im = Vec::new();
        let mut push = |j: usize, de: C, df: C| {
            re.push((2 * j, de.re));
            re.push((2 * j + 1, df.re));
            im.push((2 * j, de.im));
            im.push((2 * j + 1, df.im));
        };
        match self {
            Func::Phasor(l) => {
                for &(j, c) in &l.0 {
                    push(j, c, J * c);
                }
            }
            Func::Power { v, i } => {
                let vk = x[*v];
                let ic = i.eval(x).conj();
                push(*v, ic, J * ic);
                for &(j, c) in &i.0 {
                    push(j, vk * c.conj(), -J * vk * c.conj());
                }
            }
        }
        [re, im]
    }
}

struct BranchPu {
    u: BusId,
    v: BusId,
    phases: PhaseSet,
    y: [[C; 3]; 3],
    yh: [[C; 3]; 3],
    a: [f64; 3],
}

/// Per-unit network view with one complex state per present (bus, phase),
/// ordered by bus id then phase.
pub(crate) struct Grid {
    pub states: Vec<(BusId, Phase)>,
    pub index: BTreeMap<(BusId, Phase), usize>,
    pub aliases: BTreeMap<BusId, BusId>,
    pub v_base: f64,
    branches: Vec<BranchPu>,
    by_pair: BTreeMap<(BusId, BusId), usize>,
    incident: BTreeMap<BusId, Vec<usize>>,
    cap_pu: BTreeMap<BusId, [f64; 3]>,
}

fn invert(z: &[[C; 3]; 3], phases: PhaseSet) -> [[C; 3]; 3] {
    let idx: Vec<usize> = phases.iter().map(Phase::index).collect();
    let n = idx.len();
    let m = DMatrix::from_fn(n, n, |r, c| z[idx[r]][idx[c]]);
    let inv = m.try_inverse().unwrap_or_else(|| DMatrix::zeros(n, n));
    let mut out = [[C::new(0.0, 0.0); 3]; 3];
    for r in 0..n {
        for c in 0..n {
            out[idx[r]][idx[c]] = inv[(r, c)];
        }
    }
    out
}

impl Grid {
    pub fn new(net: &RadialNetwork) -> Grid {
        let v_base = net.v_base_ln;
        let z_base = v_base / net.i_base();
        let mut states: Vec<(BusId, Phase)> = net
            .buses
            .iter()
            .flat_map(|b| b.phases.iter().map(move |p| (b.id, p)))
            .collect();
        states.sort();
        let index = states.iter().enumerate().map(|(k, s)| (*s, k)).collect();

        let mut branches = Vec::new();
        let mut by_pair = BTreeMap::new();
        let mut incident: BTreeMap<BusId, Vec<usize>> = BTreeMap::new();
        for br in &net.branches {
            let zpu = br.z.map(|row| row.map(|e| e / z_base));
            let k = branches.len();
            branches.push(BranchPu {
                u: br.from_bus,
                v: br.to_bus,
                phases: br.phases,
                y: invert(&zpu, br.phases),
                yh: br.y_half.map(|row| row.map(|e| e * z_base)),
                a: br.taps,
            });
            by_pair.insert((br.from_bus.min(br.to_bus), br.from_bus.max(br.to_bus)), k);
            incident.entry(br.from_bus).or_default().push(k);
            incident.entry(br.to_bus).or_default().push(k);
        }
        let cap_pu = net
            .buses
            .iter()
            .filter(|b| b.cap_siemens.iter().any(|s| *s != 0.0))
            .map(|b| (b.id, b.cap_siemens.map(|s| s * z_base)))
            .collect();
        Grid {
            states,
            index,
            aliases: net.aliases.clone(),
            v_base,
            branches,
            by_pair,
            incident,
            cap_pu,
        }
    }

    pub fn resolve(&self, bus: BusId) -> BusId {
        self.aliases.get(&bus).copied().unwrap_or(bus)
    }

    fn state(&self, bus: BusId, p: Phase) -> Option<usize> {
        self.index.get(&(bus, p)).copied()
    }

    /// Current leaving `at` into the branch toward the other end, one form
    /// per branch phase.
    fn terminal(&self, k: usize, at: BusId) -> [Option<Lin>; 3] {
        let b = &self.branches[k];
        let mut out: [Option<Lin>; 3] = Default::default();
        for p in b.phases.iter() {
            let pi = p.index();
            let mut l = Lin::default();
            for q in b.phases.iter() {
                let qi = q.index();
                let xu = self.index[&(b.u, q)];
                let xv = self.index[&(b.v, q)];
                let y = b.y[pi][qi];
                let yy = y + b.yh[pi][qi];
                if at == b.u {
                    l.add(xu, b.a[pi] * yy * b.a[qi]);
                    l.add(xv, -b.a[pi] * y);
                } else {
                    l.add(xu, -y * b.a[qi]);
                    l.add(xv, yy);
                }
            }
            out[pi] = Some(l);
        }
        out
    }

    /// Current drawn by the load at (bus, phase): whatever enters the node
    /// and is not carried away by branches or capacitors.
    pub fn load_current(&self, bus: BusId, p: Phase) -> Option<Lin> {
        let x = self.state(bus, p)?;
        let mut l = Lin::default();
        for &k in self.incident.get(&bus).map(Vec::as_slice).unwrap_or(&[]) {
            if let Some(t) = &self.terminal(k, bus)[p.index()] {
                l.extend_scaled(t, C::new(-1.0, 0.0));
            }
        }
        if let Some(b) = self.cap_pu.get(&bus) {
            l.add(x, -J * b[p.index()]);
        }
        Some(l)
    }

    pub fn func(&self, m: &Measurement) -> Result<Func, EstimationError> {
        let missing = || EstimationError::UnknownLocation(m.location_label());
        match (m.kind, m.location) {
            (MeasurementKind::PmuVoltage, Location::Bus(b)) => {
                let x = self.state(self.resolve(b), m.phase).ok_or_else(missing)?;
                Ok(Func::Phasor(Lin(vec![(x, C::new(1.0, 0.0))])))
            }
            (MeasurementKind::PmuCurrent, Location::Branch { at, toward }) => {
                let (at, toward) = (self.resolve(at), self.resolve(toward));
                let k = *self
                    .by_pair
                    .get(&(at.min(toward), at.max(toward)))
                    .ok_or_else(missing)?;
                let l = self.terminal(k, at)[m.phase.index()]
                    .clone()
                    .ok_or_else(missing)?;
                Ok(Func::Phasor(l))
            }
            (MeasurementKind::PseudoInjection, Location::Bus(b)) => {
                let b = self.resolve(b);
                let v = self.state(b, m.phase).ok_or_else(missing)?;
                let i = self.load_current(b, m.phase).ok_or_else(missing)?;
                Ok(Func::Power { v, i })
            }
            _ => Err(missing()),
        }
    }
}

/// Measurement functions with their values and weights, in set order.
pub(crate) struct System {
    pub funcs: Vec<Func>,
    pub z: Vec<C>,
    pub sigma: Vec<f64>,
    pub n: usize,
}

impl System {
    pub fn real_rows(&self) -> usize {
        2 * self.funcs.len()
    }

    pub fn residual(&self, x: &[C]) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.real_rows());
        for (f, z) in self.funcs.iter().zip(&self.z) {
            let d = z - f.eval(x);
            r.push(d.re);
            r.push(d.im);
        }
        r
    }

    pub fn weights(&self) -> Vec<f64> {
        self.sigma
            .iter()
            .flat_map(|s| {
                let w = 1.0 / (s * s);
                [w, w]
            })
            .collect()
    }

    pub fn weighted_sse(&self, x: &[C]) -> f64 {
        self.residual(x)
            .iter()
            .zip(self.weights())
            .map(|(r, w)| w * r * r)
            .sum()
    }

    pub fn dense_jacobian(&self, x: &[C]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.real_rows(), 2 * self.n);
        for (k, f) in self.funcs.iter().enumerate() {
            for (part, row) in f.jacobian(x).iter().enumerate() {
                for &(c, v) in row {
                    h[(2 * k + part, c)] += v;
                }
            }
        }
        h
    }
}
