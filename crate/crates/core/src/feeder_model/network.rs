use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;

use super::{
    branch_impedance, merge_switches, transformer_impedance, BusId, FeederError, FeederModel,
    Phase, PhaseSet, SpotLoad,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    Line,
    Transformer,
}

/// Tree edge oriented parent → child. Quantities are SI: series impedance
/// in ohms, half-charging admittance `j·B/2` in siemens.
#[derive(Clone, Debug)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub kind: BranchKind,
    pub config_id: u32,
    pub length_ft: f64,
    pub phases: PhaseSet,
    pub z: [[Complex64; 3]; 3],
    pub y_half: [[Complex64; 3]; 3],
    /// Ideal per-phase ratio applied at the sending end.
    pub taps: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct NetworkBus {
    pub id: BusId,
    pub phases: PhaseSet,
    pub parent: Option<usize>,
    pub parent_branch: Option<usize>,
    /// Branch indices leaving this bus.
    pub children: Vec<usize>,
    pub hops: usize,
    pub distance_ft: f64,
    pub loads: Vec<SpotLoad>,
    /// Capacitor bank susceptance per phase in siemens.
    pub cap_siemens: [f64; 3],
}

/// Solver view of a merged, validated feeder: buses in breadth-first order
/// from the slack (index 0), branches indexed by creation order.
#[derive(Clone, Debug)]
pub struct RadialNetwork {
    pub buses: Vec<NetworkBus>,
    pub branches: Vec<Branch>,
    pub index: BTreeMap<BusId, usize>,
    pub aliases: BTreeMap<BusId, BusId>,
    pub v_nom_kv: f64,
    pub v_base_ln: f64,
    /// Slack phasors in volts.
    pub slack_voltage: [Complex64; 3],
}

impl RadialNetwork {
    pub fn build(model: &FeederModel) -> Result<RadialNetwork, FeederError> {
        let m = merge_switches(model)?;
        let g = m.general();
        let slack = g.slack_bus;
        let v_base = g.v_base_ln();

        let mut adj: BTreeMap<BusId, Vec<(BusId, usize)>> = BTreeMap::new();
        adj.entry(slack).or_default();
        for (k, s) in m.segments().iter().enumerate() {
            adj.entry(s.from_bus).or_default().push((s.to_bus, k));
            adj.entry(s.to_bus).or_default().push((s.from_bus, k));
        }
        for l in m.loads() {
            adj.entry(l.bus).or_default();
        }
        for c in m.capacitors() {
            adj.entry(c.bus).or_default();
        }
        for list in adj.values_mut() {
            list.sort();
        }
        let edge_count = m.segments().len();
        if edge_count + 1 != adj.len() {
            return Err(FeederError::Topology(format!(
                "network is not radial: {} buses, {} segments after switch merging",
                adj.len(),
                edge_count
            )));
        }

        let mut buses: Vec<NetworkBus> = Vec::with_capacity(adj.len());
        let mut branches: Vec<Branch> = Vec::with_capacity(edge_count);
        let mut index = BTreeMap::new();
        index.insert(slack, 0);
        buses.push(NetworkBus {
            id: slack,
            phases: PhaseSet::ABC,
            parent: None,
            parent_branch: None,
            children: Vec::new(),
            hops: 0,
            distance_ft: 0.0,
            loads: Vec::new(),
            cap_siemens: [0.0; 3],
        });
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let uid = buses[u].id;
            for &(vid, k) in &adj[&uid] {
                if index.contains_key(&vid) {
                    continue;
                }
                let seg = &m.segments()[k];
                let cfg = m.config(seg.config_id).expect("validated config reference");
                let (kind, imp) = if cfg.is_line {
                    (BranchKind::Line, branch_impedance(seg, cfg)?)
                } else {
                    (
                        BranchKind::Transformer,
                        transformer_impedance(cfg, g.v_nom_kv),
                    )
                };
                if !buses[u].phases.is_superset(cfg.phasing) {
                    return Err(FeederError::Topology(format!(
                        "segment {}-{} carries phases {} but bus {} has only {}",
                        seg.from_bus, seg.to_bus, cfg.phasing, uid, buses[u].phases
                    )));
                }
                let phases = cfg.phasing;
                let mut y_half = [[Complex64::new(0.0, 0.0); 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        y_half[i][j] = Complex64::new(0.0, imp.b_us[i][j] * 1e-6 / 2.0);
                    }
                }
                let b = branches.len();
                let v = buses.len();
                branches.push(Branch {
                    from: u,
                    to: v,
                    from_bus: uid,
                    to_bus: vid,
                    kind,
                    config_id: seg.config_id,
                    length_ft: seg.length_ft,
                    phases,
                    z: imp.z_ohm,
                    y_half,
                    taps: [1.0; 3],
                });
                buses[u].children.push(b);
                let hops = buses[u].hops + 1;
                let distance_ft = buses[u].distance_ft + seg.length_ft;
                buses.push(NetworkBus {
                    id: vid,
                    phases,
                    parent: Some(u),
                    parent_branch: Some(b),
                    children: Vec::new(),
                    hops,
                    distance_ft,
                    loads: Vec::new(),
                    cap_siemens: [0.0; 3],
                });
                index.insert(vid, v);
                queue.push_back(v);
            }
        }
        if buses.len() != adj.len() {
            let missing: Vec<String> = adj
                .keys()
                .filter(|b| !index.contains_key(b))
                .map(|b| b.to_string())
                .collect();
            return Err(FeederError::Topology(format!(
                "buses not reachable from slack {slack}: {}",
                missing.join(", ")
            )));
        }

        for (bus, taps) in &g.taps {
            let i = *index.get(bus).ok_or_else(|| {
                FeederError::Topology(format!("tap defined for unknown bus {bus}"))
            })?;
            let b = buses[i]
                .parent_branch
                .ok_or_else(|| FeederError::Topology(format!("tap defined at slack bus {bus}")))?;
            branches[b].taps = *taps;
        }
        for l in m.loads() {
            let i = index[&l.bus];
            if !buses[i].phases.is_superset(l.phases()) {
                return Err(FeederError::Topology(format!(
                    "load at bus {} needs phases {} but bus has {}",
                    l.bus,
                    l.phases(),
                    buses[i].phases
                )));
            }
            buses[i].loads.push(l.clone());
        }
        for c in m.capacitors() {
            let i = index[&c.bus];
            for p in Phase::ALL {
                let q = c.kvar[p.index()];
                if q == 0.0 {
                    continue;
                }
                if !buses[i].phases.contains(p) {
                    return Err(FeederError::Topology(format!(
                        "capacitor at bus {} on absent phase {p}",
                        c.bus
                    )));
                }
                buses[i].cap_siemens[p.index()] += q * 1e3 / (v_base * v_base);
            }
        }

        let slack_voltage = std::array::from_fn(|k| {
            Complex64::from_polar(g.slack_mag_pu[k] * v_base, g.slack_ang_deg[k].to_radians())
        });
        Ok(RadialNetwork {
            buses,
            branches,
            index,
            aliases: m.aliases().clone(),
            v_nom_kv: g.v_nom_kv,
            v_base_ln: v_base,
            slack_voltage,
        })
    }

    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        let rep = self.aliases.get(&bus).copied().unwrap_or(bus);
        self.index.get(&rep).copied()
    }

    /// Base current in amperes for the crate-wide power base.
    pub fn i_base(&self) -> f64 {
        super::S_BASE_VA / (3.0 * self.v_base_ln)
    }

    /// Bus indices sharing an edge with `i`, with the connecting branch.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, usize)> {
        let bus = &self.buses[i];
        let mut out = Vec::with_capacity(bus.children.len() + 1);
        if let (Some(p), Some(b)) = (bus.parent, bus.parent_branch) {
            out.push((p, b));
        }
        for &b in &bus.children {
            out.push((self.branches[b].to, b));
        }
        out
    }

    /// Total count of (bus, phase) pairs.
    pub fn node_count(&self) -> usize {
        self.buses.iter().map(|b| b.phases.len()).sum()
    }
}
