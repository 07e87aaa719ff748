//! Feeder dataset: tabular parse, validation, switch merging and the
//! derived radial network used by every solver in the crate.
//!
//! Units follow the dataset: configuration matrices are per mile (ohms and
//! microsiemens), segment lengths are in feet, loads in kW / kVAr per phase.

mod impedance;
mod network;
mod parse;
mod serialize;
mod topology;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use impedance::{
    branch_impedance, transformer_impedance, BranchImpedance, FEET_PER_MILE, S_BASE_VA,
};
pub use network::{Branch, BranchKind, NetworkBus, RadialNetwork};
pub use parse::{parse_feeder, parse_feeder_dir, FeederTables, FILE_NAMES};
pub use serialize::{to_json, to_tables, write_feeder_dir};
pub use topology::{merge_switches, validate_topology, Finding, FindingKind};

/// Opaque bus identifier. Ids are not assumed contiguous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    pub fn letter(self) -> char {
        ['A', 'B', 'C'][self.index()]
    }

    pub fn from_letter(c: &str) -> Option<Phase> {
        match c {
            "A" | "a" => Some(Phase::A),
            "B" | "b" => Some(Phase::B),
            "C" | "c" => Some(Phase::C),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Set of phases as a three-bit mask (bit 0 = A).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const EMPTY: PhaseSet = PhaseSet(0);
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn single(p: Phase) -> PhaseSet {
        PhaseSet(1 << p.index())
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn insert(&mut self, p: Phase) {
        self.0 |= 1 << p.index();
    }

    pub fn is_superset(self, other: PhaseSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn intersection(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 & other.0)
    }

    pub fn union(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 | other.0)
    }

    pub fn difference(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

/// Symmetric 3×3 real matrix stored dense.
pub type Mat3 = [[f64; 3]; 3];

/// Slack definition and global settings (the `general.csv` table).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralData {
    pub slack_bus: BusId,
    /// Line-to-line nominal voltage.
    pub v_nom_kv: f64,
    pub slack_mag_pu: [f64; 3],
    pub slack_ang_deg: [f64; 3],
    /// 0 = imperial units (feet, per-mile matrices). Other systems are rejected.
    pub international_system: i64,
    pub delta_lf: f64,
    /// Fixed ideal regulator taps keyed by the to-bus of the regulated segment.
    pub taps: BTreeMap<BusId, [f64; 3]>,
}

impl GeneralData {
    /// Line-to-neutral base voltage in volts.
    pub fn v_base_ln(&self) -> f64 {
        self.v_nom_kv * 1000.0 / 3f64.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineConfig {
    pub config_id: u32,
    /// `false` marks a transformer row.
    pub is_line: bool,
    pub r_ohm_per_mile: Mat3,
    pub x_ohm_per_mile: Mat3,
    pub b_usiemens_per_mile: Mat3,
    pub phasing: PhaseSet,
}

impl LineConfig {
    /// Builds a configuration from the six upper-triangle entries of each
    /// matrix (order 11, 12, 13, 22, 23, 33).
    pub fn from_upper(
        config_id: u32,
        is_line: bool,
        r: [f64; 6],
        x: [f64; 6],
        b: [f64; 6],
    ) -> LineConfig {
        let r = symmetric(r);
        let x = symmetric(x);
        let b = symmetric(b);
        let phasing = if is_line {
            let mut set = PhaseSet::EMPTY;
            for p in Phase::ALL {
                let i = p.index();
                if r[i][i] != 0.0 || x[i][i] != 0.0 {
                    set.insert(p);
                }
            }
            set
        } else {
            PhaseSet::ABC
        };
        LineConfig {
            config_id,
            is_line,
            r_ohm_per_mile: r,
            x_ohm_per_mile: x,
            b_usiemens_per_mile: b,
            phasing,
        }
    }

    pub fn upper(m: &Mat3) -> [f64; 6] {
        [m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]]
    }
}

fn symmetric(u: [f64; 6]) -> Mat3 {
    [[u[0], u[1], u[2]], [u[1], u[3], u[4]], [u[2], u[4], u[5]]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub length_ft: f64,
    pub config_id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connection {
    Wye,
    Delta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZipKind {
    ConstantPower,
    ConstantCurrent,
    ConstantImpedance,
}

/// Spot load. For delta connections the three entries are the AB, BC and
/// CA legs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotLoad {
    pub bus: BusId,
    pub connection: Connection,
    pub zip_kind: ZipKind,
    pub p_kw: [f64; 3],
    pub q_kvar: [f64; 3],
}

impl SpotLoad {
    /// Phases that carry current for this load.
    pub fn phases(&self) -> PhaseSet {
        let mut set = PhaseSet::EMPTY;
        for k in 0..3 {
            if self.p_kw[k] == 0.0 && self.q_kvar[k] == 0.0 {
                continue;
            }
            match self.connection {
                Connection::Wye => set.insert(Phase::from_index(k)),
                Connection::Delta => {
                    set.insert(Phase::from_index(k));
                    set.insert(Phase::from_index((k + 1) % 3));
                }
            }
        }
        set
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchLink {
    pub bus_a: BusId,
    pub bus_b: BusId,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCoord {
    pub bus: BusId,
    pub x: f64,
    pub y: f64,
}

/// Wye-connected shunt capacitor bank, kVAr per phase at nominal voltage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuntCapacitor {
    pub bus: BusId,
    pub kvar: [f64; 3],
}

/// Immutable feeder description. Build it through [`parse_feeder`] or
/// [`FeederModel::new`]; both run the same validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeederModel {
    general: GeneralData,
    configs: BTreeMap<u32, LineConfig>,
    segments: Vec<LineSegment>,
    loads: Vec<SpotLoad>,
    capacitors: Vec<ShuntCapacitor>,
    switches: Vec<SwitchLink>,
    coords: Option<Vec<NodeCoord>>,
    /// Bus → representative, filled by [`merge_switches`].
    aliases: BTreeMap<BusId, BusId>,
    merged: bool,
}

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("missing input file `{0}`")]
    MissingFile(String),
    #[error("{file}: bad header, expected `{expected}`, found `{found}`")]
    BadHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{file}: line {line}, column `{column}`: cannot parse `{value}`")]
    UnparseableCell {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{file}: line {line}: {reason}")]
    InvalidRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("segment {from}->{to} references unknown config {config_id}")]
    DanglingConfigReference {
        from: BusId,
        to: BusId,
        config_id: u32,
    },
    #[error("duplicate segment between buses {0} and {1}")]
    DuplicateSegment(BusId, BusId),
    #[error("config {0} is a transformer; use the transformer branch handler")]
    TransformerConfigPassed(u32),
    #[error("closing switch {a}-{b} creates a loop through buses {cycle:?}")]
    MergeCreatesCycle {
        a: BusId,
        b: BusId,
        cycle: Vec<BusId>,
    },
    #[error("{0}")]
    Topology(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FeederModel {
    /// Assembles and validates a model from already-typed tables.
    pub fn new(
        general: GeneralData,
        configs: Vec<LineConfig>,
        segments: Vec<LineSegment>,
        loads: Vec<SpotLoad>,
        capacitors: Vec<ShuntCapacitor>,
        switches: Vec<SwitchLink>,
        coords: Option<Vec<NodeCoord>>,
    ) -> Result<FeederModel, FeederError> {
        parse::validate_general(&general, "general", 0)?;
        let mut map = BTreeMap::new();
        for c in configs {
            parse::validate_config(&c, "configs", 0)?;
            if map.insert(c.config_id, c.clone()).is_some() {
                return Err(FeederError::InvalidRow {
                    file: "configs".into(),
                    line: 0,
                    reason: format!("duplicate config id {}", c.config_id),
                });
            }
        }
        parse::validate_segments(&segments, &map)?;
        for l in &loads {
            parse::validate_load(l, "loads", 0)?;
        }
        for c in &capacitors {
            parse::validate_capacitor(c, "capacitors", 0)?;
        }
        for s in &switches {
            parse::validate_switch(s, "switches", 0)?;
        }
        Ok(FeederModel {
            general,
            configs: map,
            segments,
            loads,
            capacitors,
            switches,
            coords,
            aliases: BTreeMap::new(),
            merged: false,
        })
    }

    pub fn general(&self) -> &GeneralData {
        &self.general
    }

    pub fn configs(&self) -> &BTreeMap<u32, LineConfig> {
        &self.configs
    }

    pub fn config(&self, id: u32) -> Option<&LineConfig> {
        self.configs.get(&id)
    }

    pub fn segments(&self) -> &[LineSegment] {
        &self.segments
    }

    pub fn loads(&self) -> &[SpotLoad] {
        &self.loads
    }

    pub fn capacitors(&self) -> &[ShuntCapacitor] {
        &self.capacitors
    }

    pub fn switches(&self) -> &[SwitchLink] {
        &self.switches
    }

    pub fn coords(&self) -> Option<&[NodeCoord]> {
        self.coords.as_deref()
    }

    /// Aliases introduced by switch merging (bus → representative).
    pub fn aliases(&self) -> &BTreeMap<BusId, BusId> {
        &self.aliases
    }

    pub fn is_merged(&self) -> bool {
        self.merged
    }

    /// Representative bus after merging (identity when not aliased).
    pub fn resolve(&self, bus: BusId) -> BusId {
        self.aliases.get(&bus).copied().unwrap_or(bus)
    }

    /// Every bus id mentioned by segments, closed switches, loads,
    /// capacitors and the slack definition.
    pub fn bus_ids(&self) -> Vec<BusId> {
        let mut set = std::collections::BTreeSet::new();
        set.insert(self.general.slack_bus);
        for s in &self.segments {
            set.insert(s.from_bus);
            set.insert(s.to_bus);
        }
        for s in self.switches.iter().filter(|s| s.closed) {
            set.insert(s.bus_a);
            set.insert(s.bus_b);
        }
        for l in &self.loads {
            set.insert(l.bus);
        }
        for c in &self.capacitors {
            set.insert(c.bus);
        }
        set.into_iter().collect()
    }

    /// Copy of the model with every load removed.
    pub fn without_loads(&self) -> FeederModel {
        FeederModel {
            loads: Vec::new(),
            ..self.clone()
        }
    }

    /// Copy of the model with every load scaled by `factor`. A zero factor
    /// drops the loads entirely (a load row must carry some power).
    pub fn with_load_scale(&self, factor: f64) -> FeederModel {
        if factor == 0.0 {
            return self.without_loads();
        }
        let loads = self
            .loads
            .iter()
            .map(|l| SpotLoad {
                p_kw: l.p_kw.map(|v| v * factor),
                q_kvar: l.q_kvar.map(|v| v * factor),
                ..l.clone()
            })
            .collect();
        FeederModel {
            loads,
            ..self.clone()
        }
    }

    /// Copy of the model with line charging and capacitor banks removed.
    pub fn without_shunts(&self) -> FeederModel {
        let configs = self
            .configs
            .iter()
            .map(|(k, c)| {
                (
                    *k,
                    LineConfig {
                        b_usiemens_per_mile: [[0.0; 3]; 3],
                        ..c.clone()
                    },
                )
            })
            .collect();
        FeederModel {
            configs,
            capacitors: Vec::new(),
            ..self.clone()
        }
    }

    /// Copy of the model with the general table replaced.
    pub fn with_general(&self, general: GeneralData) -> Result<FeederModel, FeederError> {
        parse::validate_general(&general, "general", 0)?;
        Ok(FeederModel {
            general,
            ..self.clone()
        })
    }
}
