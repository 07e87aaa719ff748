//! Channel-limited PMU observability, minimum placement and PMU-rooted zone
//! partitioning.
//!
//! Observability is topological: a PMU observes its own bus and, through
//! each current channel, the far end of one incident branch. Channels are
//! assigned jointly across PMUs by maximum bipartite b-matching so that no
//! channel is wasted on a bus another PMU already covers; spare channels then
//! take the remaining incident branches in ascending neighbor order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::feeder_model::{BusId, FeederError, FeederModel, PhaseSet, RadialNetwork};

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("bus {0} is not in the network")]
    UnknownBus(BusId),
    #[error("duplicate PMU at bus {0}")]
    DuplicatePmu(BusId),
    #[error("PMU at bus {pmu} cannot measure non-adjacent bus {other}")]
    NotAdjacent { pmu: BusId, other: BusId },
    #[error("PMU at bus {pmu} lists {listed} measured branches but has {channels} channels")]
    TooManyMeasured {
        pmu: BusId,
        listed: usize,
        channels: u32,
    },
    #[error("network has {0} buses; the exhaustive oracle is limited to 20")]
    TooLargeForOracle(usize),
    #[error("zone size bound must be at least 1, got {0}")]
    InfeasibleZoneBound(usize),
    #[error("placement leaves buses unobservable: {0:?}")]
    UnobservableInput(Vec<BusId>),
    #[error("boundary branch {0}-{1} cannot be current-measured by an adjacent PMU")]
    UncoverableBoundary(BusId, BusId),
    #[error("graph is not connected")]
    Disconnected,
    #[error("placement file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Feeder(#[from] FeederError),
}

/// Current-channel budget of one PMU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channels {
    Limited(u32),
    Unlimited,
}

impl Channels {
    fn cap(self) -> usize {
        match self {
            Channels::Limited(n) => n as usize,
            Channels::Unlimited => usize::MAX,
        }
    }
}

impl fmt::Display for Channels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channels::Limited(n) => write!(f, "{n}"),
            Channels::Unlimited => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Channels {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "unlimited" => Ok(Channels::Unlimited),
            t => t
                .parse::<u32>()
                .map(Channels::Limited)
                .map_err(|_| format!("channels must be a count or `inf`, got `{s}`")),
        }
    }
}

impl Serialize for Channels {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Channels::Limited(n) => s.serialize_u32(*n),
            Channels::Unlimited => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Channels {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Channels::Limited(n)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmuDevice {
    pub bus: BusId,
    pub channels: Channels,
    /// Pinned current channels (far-end buses). `None` lets the assignment
    /// choose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<Vec<BusId>>,
}

impl PmuDevice {
    pub fn new(bus: BusId, channels: Channels) -> PmuDevice {
        PmuDevice {
            bus,
            channels,
            measured: None,
        }
    }
}

/// At most one PMU per bus, kept sorted by bus id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    devices: Vec<PmuDevice>,
}

impl Placement {
    pub fn new(mut devices: Vec<PmuDevice>) -> Result<Placement, PlacementError> {
        devices.sort_by_key(|d| d.bus);
        for w in devices.windows(2) {
            if w[0].bus == w[1].bus {
                return Err(PlacementError::DuplicatePmu(w[0].bus));
            }
        }
        Ok(Placement { devices })
    }

    pub fn at(buses: &[BusId], channels: Channels) -> Result<Placement, PlacementError> {
        Placement::new(buses.iter().map(|b| PmuDevice::new(*b, channels)).collect())
    }

    pub fn devices(&self) -> &[PmuDevice] {
        &self.devices
    }

    pub fn buses(&self) -> Vec<BusId> {
        self.devices.iter().map(|d| d.bus).collect()
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn contains(&self, bus: BusId) -> bool {
        self.devices.binary_search_by_key(&bus, |d| d.bus).is_ok()
    }

    fn with(&self, dev: PmuDevice) -> Placement {
        let mut devices = self.devices.clone();
        devices.push(dev);
        Placement::new(devices).expect("caller adds a new bus")
    }

    /// Copy with every device's channels pinned to `assignment`.
    pub fn pinned(&self, assignment: &ChannelAssignment) -> Placement {
        Placement {
            devices: self
                .devices
                .iter()
                .map(|d| PmuDevice {
                    measured: Some(assignment.get(&d.bus).cloned().unwrap_or_default()),
                    ..d.clone()
                })
                .collect(),
        }
    }
}

/// PMU bus → far-end buses of its current-measured branches (ascending).
pub type ChannelAssignment = BTreeMap<BusId, Vec<BusId>>;

/// Undirected bus graph used by every placement routine. Buses and edges
/// carry phase sets; a channel on edge (r, v) observes v only when the edge
/// carries every phase of v.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementGraph {
    adj: BTreeMap<BusId, Vec<BusId>>,
    zero_injection: BTreeSet<BusId>,
    bus_phases: BTreeMap<BusId, PhaseSet>,
    edge_phases: BTreeMap<(BusId, BusId), PhaseSet>,
}

impl PlacementGraph {
    pub fn from_edges(buses: &[BusId], edges: &[(BusId, BusId)]) -> PlacementGraph {
        let mut adj: BTreeMap<BusId, Vec<BusId>> = buses.iter().map(|b| (*b, Vec::new())).collect();
        for &(a, b) in edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        for list in adj.values_mut() {
            list.sort();
            list.dedup();
        }
        PlacementGraph {
            adj,
            zero_injection: BTreeSet::new(),
            bus_phases: BTreeMap::new(),
            edge_phases: BTreeMap::new(),
        }
    }

    /// Merged feeder graph. Buses without load or capacitor are marked
    /// zero-injection.
    pub fn from_model(model: &FeederModel) -> Result<PlacementGraph, PlacementError> {
        let net = RadialNetwork::build(model)?;
        Ok(PlacementGraph::from_network(&net))
    }

    pub fn from_network(net: &RadialNetwork) -> PlacementGraph {
        let buses: Vec<BusId> = net.buses.iter().map(|b| b.id).collect();
        let edges: Vec<(BusId, BusId)> = net
            .branches
            .iter()
            .map(|b| (b.from_bus, b.to_bus))
            .collect();
        let mut g = PlacementGraph::from_edges(&buses, &edges);
        g.bus_phases = net.buses.iter().map(|b| (b.id, b.phases)).collect();
        g.edge_phases = net
            .branches
            .iter()
            .map(|b| {
                (
                    (b.from_bus.min(b.to_bus), b.from_bus.max(b.to_bus)),
                    b.phases,
                )
            })
            .collect();
        g.zero_injection = net
            .buses
            .iter()
            .filter(|b| b.loads.is_empty() && b.cap_siemens.iter().all(|c| *c == 0.0))
            .map(|b| b.id)
            .collect();
        g
    }

    pub fn with_zero_injection(mut self, buses: BTreeSet<BusId>) -> PlacementGraph {
        self.zero_injection = buses;
        self
    }

    pub fn buses(&self) -> Vec<BusId> {
        self.adj.keys().copied().collect()
    }

    pub fn bus_phases(&self, b: BusId) -> PhaseSet {
        self.bus_phases.get(&b).copied().unwrap_or(PhaseSet::ABC)
    }

    pub fn edge_phases(&self, a: BusId, b: BusId) -> PhaseSet {
        self.edge_phases
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(PhaseSet::ABC)
    }

    /// Whether a current channel at `pmu` toward `v` determines every
    /// phase voltage of `v`.
    pub fn covers(&self, pmu: BusId, v: BusId) -> bool {
        self.edge_phases(pmu, v).is_superset(self.bus_phases(v))
    }

    pub fn bus_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, b: BusId) -> &[BusId] {
        self.adj.get(&b).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, b: BusId) -> bool {
        self.adj.contains_key(&b)
    }

    pub fn edges(&self) -> Vec<(BusId, BusId)> {
        let mut out = Vec::new();
        for (a, list) in &self.adj {
            for b in list {
                if a < b {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.adj.keys().next() else {
            return true;
        };
        self.bfs_hops(&[start]).len() == self.adj.len()
    }

    fn bfs_hops(&self, sources: &[BusId]) -> BTreeMap<BusId, usize> {
        let mut dist = BTreeMap::new();
        let mut q = VecDeque::new();
        for &s in sources {
            dist.insert(s, 0);
            q.push_back(s);
        }
        while let Some(u) = q.pop_front() {
            let d = dist[&u];
            for &v in self.neighbors(u) {
                if !dist.contains_key(&v) {
                    dist.insert(v, d + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityOptions {
    /// Apply the zero-injection (KCL) propagation rule.
    pub zero_injection: bool,
}

fn validate(graph: &PlacementGraph, placement: &Placement) -> Result<(), PlacementError> {
    for d in placement.devices() {
        if !graph.contains(d.bus) {
            return Err(PlacementError::UnknownBus(d.bus));
        }
        if let Some(m) = &d.measured {
            if m.len() > d.channels.cap() {
                return Err(PlacementError::TooManyMeasured {
                    pmu: d.bus,
                    listed: m.len(),
                    channels: match d.channels {
                        Channels::Limited(n) => n,
                        Channels::Unlimited => u32::MAX,
                    },
                });
            }
            for o in m {
                if !graph.neighbors(d.bus).contains(o) {
                    return Err(PlacementError::NotAdjacent {
                        pmu: d.bus,
                        other: *o,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Deterministic channel assignment: pinned devices keep their lists; the
/// rest maximize the number of distinct non-PMU buses covered, then fill
/// leftover channels in ascending neighbor order.
pub fn assign_channels(
    graph: &PlacementGraph,
    placement: &Placement,
) -> Result<ChannelAssignment, PlacementError> {
    validate(graph, placement)?;
    let pmu: BTreeSet<BusId> = placement.buses().into_iter().collect();
    let mut out: ChannelAssignment = BTreeMap::new();
    let mut owner: BTreeMap<BusId, BusId> = BTreeMap::new();
    let mut free: Vec<&PmuDevice> = Vec::new();
    for d in placement.devices() {
        match &d.measured {
            Some(m) => {
                let mut m = m.clone();
                m.sort();
                m.dedup();
                for o in &m {
                    if !pmu.contains(o) && graph.covers(d.bus, *o) {
                        owner.entry(*o).or_insert(d.bus);
                    }
                }
                out.insert(d.bus, m);
            }
            None => {
                out.insert(d.bus, Vec::new());
                free.push(d);
            }
        }
    }

    // Kuhn augmenting paths over channel slots (left) and buses not yet
    // covered by a PMU or a pinned channel (right).
    let slots: Vec<BusId> = free
        .iter()
        .flat_map(|d| {
            let deg = graph.neighbors(d.bus).len();
            std::iter::repeat(d.bus).take(d.channels.cap().min(deg))
        })
        .collect();
    let mut matched: BTreeMap<BusId, usize> = BTreeMap::new();
    fn augment(
        graph: &PlacementGraph,
        slots: &[BusId],
        s: usize,
        blocked: &dyn Fn(BusId) -> bool,
        matched: &mut BTreeMap<BusId, usize>,
        seen: &mut BTreeSet<BusId>,
    ) -> bool {
        for &v in graph.neighbors(slots[s]) {
            if blocked(v) || !graph.covers(slots[s], v) || !seen.insert(v) {
                continue;
            }
            let prev = matched.get(&v).copied();
            let ok = match prev {
                None => true,
                Some(t) => augment(graph, slots, t, blocked, matched, seen),
            };
            if ok {
                matched.insert(v, s);
                return true;
            }
        }
        false
    }
    let blocked = |v: BusId| pmu.contains(&v) || owner.contains_key(&v);
    for s in 0..slots.len() {
        let mut seen = BTreeSet::new();
        augment(graph, &slots, s, &blocked, &mut matched, &mut seen);
    }
    for (v, s) in &matched {
        out.get_mut(&slots[*s]).expect("free pmu").push(*v);
    }
    let cap: BTreeMap<BusId, usize> = free.iter().map(|d| (d.bus, d.channels.cap())).collect();
    for d in &free {
        let list = out.get_mut(&d.bus).expect("free pmu");
        for &v in graph.neighbors(d.bus) {
            if list.len() >= cap[&d.bus] {
                break;
            }
            if !list.contains(&v) {
                list.push(v);
            }
        }
        list.sort();
    }
    Ok(out)
}

fn closure(
    graph: &PlacementGraph,
    placement: &Placement,
    assignment: &ChannelAssignment,
    opts: ObservabilityOptions,
) -> BTreeSet<BusId> {
    let mut obs: BTreeSet<BusId> = placement.buses().into_iter().collect();
    for (pmu, list) in assignment {
        obs.extend(list.iter().copied().filter(|v| graph.covers(*pmu, *v)));
    }
    if opts.zero_injection {
        loop {
            let mut grew = false;
            for &z in &graph.zero_injection {
                let nb = graph.neighbors(z);
                let mut group: Vec<BusId> = nb.to_vec();
                group.push(z);
                let missing: Vec<BusId> =
                    group.iter().filter(|b| !obs.contains(b)).copied().collect();
                if missing.len() == 1 {
                    obs.insert(missing[0]);
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
    }
    obs
}

pub fn observable_set(
    graph: &PlacementGraph,
    placement: &Placement,
    opts: ObservabilityOptions,
) -> Result<BTreeSet<BusId>, PlacementError> {
    let assignment = assign_channels(graph, placement)?;
    Ok(closure(graph, placement, &assignment, opts))
}

fn is_full(graph: &PlacementGraph, placement: &Placement, opts: ObservabilityOptions) -> bool {
    observable_set(graph, placement, opts)
        .map(|s| s.len() == graph.bus_count())
        .unwrap_or(false)
}

/// All minimum-cardinality placements with full observability, sorted.
pub fn brute_force_placement(
    graph: &PlacementGraph,
    channels: Channels,
    opts: ObservabilityOptions,
) -> Result<Vec<Placement>, PlacementError> {
    let buses = graph.buses();
    let n = buses.len();
    if n > 20 {
        return Err(PlacementError::TooLargeForOracle(n));
    }
    for k in 1..=n {
        let mut found = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let chosen: Vec<BusId> = idx.iter().map(|&i| buses[i]).collect();
            let p = Placement::at(&chosen, channels)?;
            if is_full(graph, &p, opts) {
                found.push(p);
            }
            // Next k-combination in lexicographic order.
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        if !found.is_empty() {
            found.sort_by(|a, b| a.buses().cmp(&b.buses()));
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

#[derive(Clone, Debug, Default)]
pub struct GreedyOptions {
    pub max_zone_size: Option<usize>,
    pub warm_start: Option<Placement>,
    pub observability: ObservabilityOptions,
}

/// Adds the PMU with the largest observability gain (lowest bus id on ties)
/// until every bus is observable. With a zone-size cap, keeps adding the
/// PMU that most reduces the largest zone of a coverable partition.
pub fn greedy_placement(
    graph: &PlacementGraph,
    channels: Channels,
    opts: &GreedyOptions,
) -> Result<Placement, PlacementError> {
    if let Some(bound) = opts.max_zone_size {
        if bound < 1 {
            return Err(PlacementError::InfeasibleZoneBound(bound));
        }
    }
    if !graph.is_connected() {
        return Err(PlacementError::Disconnected);
    }
    let obs_opts = opts.observability;
    let mut p = opts.warm_start.clone().unwrap_or_default();
    validate(graph, &p)?;
    let mut current = observable_set(graph, &p, obs_opts)?.len();
    while current < graph.bus_count() {
        let mut best: Option<(usize, BusId)> = None;
        for b in graph.buses() {
            if p.contains(b) {
                continue;
            }
            let n = observable_set(graph, &p.with(PmuDevice::new(b, channels)), obs_opts)?.len();
            if best.map_or(true, |(bn, _)| n > bn) {
                best = Some((n, b));
            }
        }
        let (n, b) = best.expect("an unobserved bus can host a PMU");
        p = p.with(PmuDevice::new(b, channels));
        current = n;
    }
    if let Some(bound) = opts.max_zone_size {
        p = ensure_partitionable(graph, &p, channels, obs_opts)?;
        loop {
            let part = partition_zones(graph, &p, obs_opts)?;
            let largest = part.largest_zone();
            if largest <= bound {
                break;
            }
            let mut best: Option<(usize, usize, BusId, Placement)> = None;
            for b in graph.buses() {
                if p.contains(b) {
                    continue;
                }
                let cand = ensure_partitionable(
                    graph,
                    &p.with(PmuDevice::new(b, channels)),
                    channels,
                    obs_opts,
                )?;
                let Ok(cp) = partition_zones(graph, &cand, obs_opts) else {
                    continue;
                };
                let key = (cp.largest_zone(), cand.len());
                if best.as_ref().map_or(true, |(l, c, _, _)| key < (*l, *c)) {
                    best = Some((key.0, key.1, b, cand));
                }
            }
            match best {
                Some((_, _, _, cand)) => p = cand,
                None => break,
            }
        }
    }
    Ok(p)
}

/// Adds PMUs until the placement admits a valid partition: at the lower-id
/// non-PMU endpoint of an uncoverable boundary, or, when both endpoints
/// already host PMUs, at their lowest non-PMU neighbor.
pub fn ensure_partitionable(
    graph: &PlacementGraph,
    placement: &Placement,
    channels: Channels,
    opts: ObservabilityOptions,
) -> Result<Placement, PlacementError> {
    let mut p = placement.clone();
    loop {
        match partition_zones(graph, &p, opts) {
            Ok(_) => return Ok(p),
            Err(PlacementError::UncoverableBoundary(a, b)) => {
                let pick = [a.min(b), a.max(b)]
                    .into_iter()
                    .find(|x| !p.contains(*x))
                    .or_else(|| {
                        let mut nb: Vec<BusId> = graph
                            .neighbors(a)
                            .iter()
                            .chain(graph.neighbors(b))
                            .copied()
                            .filter(|x| !p.contains(*x))
                            .collect();
                        nb.sort();
                        nb.first().copied()
                    });
                match pick {
                    Some(x) => p = p.with(PmuDevice::new(x, channels)),
                    None => return Err(PlacementError::UncoverableBoundary(a, b)),
                }
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub id: usize,
    pub root: BusId,
    pub members: BTreeSet<BusId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryBranch {
    pub a: BusId,
    pub b: BusId,
    pub measured_by: BusId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZonePartition {
    pub zones: Vec<Zone>,
    pub boundaries: Vec<BoundaryBranch>,
    /// Channel assignment after any boundary re-assignment.
    pub assignment: ChannelAssignment,
}

impl ZonePartition {
    pub fn zone_of(&self, bus: BusId) -> Option<usize> {
        self.zones.iter().position(|z| z.members.contains(&bus))
    }

    pub fn largest_zone(&self) -> usize {
        self.zones
            .iter()
            .map(|z| z.members.len())
            .max()
            .unwrap_or(0)
    }

    /// Single zone holding every bus, rooted at the lowest PMU bus.
    pub fn single(
        graph: &PlacementGraph,
        placement: &Placement,
    ) -> Result<ZonePartition, PlacementError> {
        let root = *placement
            .buses()
            .first()
            .ok_or_else(|| PlacementError::UnobservableInput(graph.buses()))?;
        Ok(ZonePartition {
            zones: vec![Zone {
                id: 0,
                root,
                members: graph.buses().into_iter().collect(),
            }],
            boundaries: Vec::new(),
            assignment: assign_channels(graph, placement)?,
        })
    }
}

/// On-disk placement: devices with pinned channels plus the derived
/// observable set and zone partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementFile {
    pub channels: Channels,
    pub pmu_count: usize,
    pub devices: Vec<PmuDevice>,
    pub observable: Vec<BusId>,
    pub zones: Vec<Zone>,
    pub boundaries: Vec<BoundaryBranch>,
}

impl PlacementFile {
    pub fn new(
        channels: Channels,
        placement: &Placement,
        partition: &ZonePartition,
        observable: &BTreeSet<BusId>,
    ) -> PlacementFile {
        let pinned = placement.pinned(&partition.assignment);
        PlacementFile {
            channels,
            pmu_count: pinned.len(),
            devices: pinned.devices().to_vec(),
            observable: observable.iter().copied().collect(),
            zones: partition.zones.clone(),
            boundaries: partition.boundaries.clone(),
        }
    }

    pub fn placement(&self) -> Result<Placement, PlacementError> {
        Placement::new(self.devices.clone())
    }

    /// Zone partition with the channel assignment taken from the pinned
    /// device lists.
    pub fn partition(&self) -> ZonePartition {
        ZonePartition {
            zones: self.zones.clone(),
            boundaries: self.boundaries.clone(),
            assignment: self
                .devices
                .iter()
                .map(|d| (d.bus, d.measured.clone().unwrap_or_default()))
                .collect(),
        }
    }
}

/// Parses and checks internal consistency: unique devices, pinned lists
/// within budget, zones with ids in order and disjoint members.
pub fn parse_placement_json(text: &str) -> Result<PlacementFile, PlacementError> {
    let f: PlacementFile =
        serde_json::from_str(text).map_err(|e| PlacementError::BadFile(e.to_string()))?;
    let placement = f.placement()?;
    for d in placement.devices() {
        if let Some(m) = &d.measured {
            if m.len() > d.channels.cap() {
                return Err(PlacementError::TooManyMeasured {
                    pmu: d.bus,
                    listed: m.len(),
                    channels: match d.channels {
                        Channels::Limited(n) => n,
                        Channels::Unlimited => u32::MAX,
                    },
                });
            }
        }
    }
    if f.pmu_count != f.devices.len() {
        return Err(PlacementError::BadFile(format!(
            "pmu_count {} but {} devices",
            f.pmu_count,
            f.devices.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for (k, z) in f.zones.iter().enumerate() {
        if z.id != k {
            return Err(PlacementError::BadFile(format!(
                "zone {} listed at position {k}",
                z.id
            )));
        }
        for b in &z.members {
            if !seen.insert(*b) {
                return Err(PlacementError::BadFile(format!(
                    "bus {b} is in more than one zone"
                )));
            }
        }
    }
    Ok(f)
}

fn zones_for(graph: &PlacementGraph, roots: &[BusId]) -> BTreeMap<BusId, BusId> {
    // Multi-source BFS; each bus inherits the lowest root id among its
    // upstream neighbors, which keeps every zone connected.
    let dist = graph.bfs_hops(roots);
    let mut order: Vec<BusId> = dist.keys().copied().collect();
    order.sort_by_key(|b| (dist[b], *b));
    let mut zone: BTreeMap<BusId, BusId> = BTreeMap::new();
    for b in order {
        let d = dist[&b];
        let pick = if d == 0 {
            b
        } else {
            graph
                .neighbors(b)
                .iter()
                .filter(|n| dist.get(n) == Some(&(d - 1)))
                .map(|n| zone[n])
                .min()
                .expect("bfs parent")
        };
        zone.insert(b, pick);
    }
    zone
}

/// PMU-rooted zones. Every bus joins the nearest root (lowest root id on
/// ties). Channels are then re-assigned so that every boundary branch, and
/// every non-PMU member without a measured boundary to a PMU, carries a
/// current channel of an adjacent PMU.
pub fn partition_zones(
    graph: &PlacementGraph,
    placement: &Placement,
    opts: ObservabilityOptions,
) -> Result<ZonePartition, PlacementError> {
    let base = assign_channels(graph, placement)?;
    let obs = closure(graph, placement, &base, opts);
    if obs.len() != graph.bus_count() {
        let missing = graph
            .buses()
            .into_iter()
            .filter(|b| !obs.contains(b))
            .collect();
        return Err(PlacementError::UnobservableInput(missing));
    }
    let roots = placement.buses();
    let zone = zones_for(graph, &roots);
    let is_pmu = |b: BusId| placement.contains(b);

    let mut demands: Vec<(BusId, BusId)> = Vec::new();
    let mut boundary_edges = Vec::new();
    for (a, b) in graph.edges() {
        if zone[&a] != zone[&b] {
            demands.push((a, b));
            boundary_edges.push((a, b));
        }
    }
    for b in graph.buses() {
        if is_pmu(b) || !graph.neighbors(b).contains(&zone[&b]) {
            continue;
        }
        let seen_across = graph
            .neighbors(b)
            .iter()
            .any(|n| is_pmu(*n) && zone[n] != zone[&b] && graph.covers(*n, b));
        if !seen_across {
            let r = zone[&b];
            if !graph.covers(r, b) {
                return Err(PlacementError::UncoverableBoundary(r.min(b), r.max(b)));
            }
            demands.push((r.min(b), r.max(b)));
        }
    }
    demands.sort();
    demands.dedup();

    let dev = |b: BusId| placement.devices().iter().find(|d| d.bus == b);
    let mut server: BTreeMap<(BusId, BusId), BusId> = BTreeMap::new();
    let mut open: Vec<(BusId, BusId)> = Vec::new();
    for &(a, b) in &demands {
        let pinned = [(a, b), (b, a)].into_iter().find(|(p, o)| {
            dev(*p).is_some_and(|d| d.measured.as_ref().is_some_and(|m| m.contains(o)))
        });
        match pinned {
            Some((p, _)) => {
                server.insert((a, b), p);
            }
            None => open.push((a, b)),
        }
    }
    let slots: Vec<BusId> = placement
        .devices()
        .iter()
        .filter(|d| d.measured.is_none())
        .flat_map(|d| {
            let deg = graph.neighbors(d.bus).len();
            std::iter::repeat(d.bus).take(d.channels.cap().min(deg))
        })
        .collect();
    let mut slot_of: BTreeMap<BusId, Vec<usize>> = BTreeMap::new();
    for (k, b) in slots.iter().enumerate() {
        slot_of.entry(*b).or_default().push(k);
    }
    fn augment(
        d: usize,
        open: &[(BusId, BusId)],
        slot_of: &BTreeMap<BusId, Vec<usize>>,
        owner: &mut Vec<Option<usize>>,
        seen: &mut Vec<bool>,
    ) -> bool {
        let (a, b) = open[d];
        for end in [a, b] {
            for &s in slot_of.get(&end).map(Vec::as_slice).unwrap_or(&[]) {
                if seen[s] {
                    continue;
                }
                seen[s] = true;
                let ok = match owner[s] {
                    None => true,
                    Some(other) => augment(other, open, slot_of, owner, seen),
                };
                if ok {
                    owner[s] = Some(d);
                    return true;
                }
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; slots.len()];
    for d in 0..open.len() {
        let mut seen = vec![false; slots.len()];
        if !augment(d, &open, &slot_of, &mut owner, &mut seen) {
            return Err(PlacementError::UncoverableBoundary(open[d].0, open[d].1));
        }
    }
    let mut assignment: ChannelAssignment = BTreeMap::new();
    for d in placement.devices() {
        assignment.insert(d.bus, d.measured.clone().unwrap_or_default());
    }
    for (s, o) in owner.iter().enumerate() {
        if let Some(d) = o {
            let (a, b) = open[*d];
            let p = slots[s];
            let other = if p == a { b } else { a };
            server.insert((a, b), p);
            assignment.get_mut(&p).expect("pmu").push(other);
        }
    }
    for d in placement.devices().iter().filter(|d| d.measured.is_none()) {
        let list = assignment.get_mut(&d.bus).expect("pmu");
        for &v in graph.neighbors(d.bus) {
            if list.len() >= d.channels.cap() {
                break;
            }
            if !list.contains(&v) {
                list.push(v);
            }
        }
    }
    for list in assignment.values_mut() {
        list.sort();
        list.dedup();
    }

    let mut zones: Vec<Zone> = roots
        .iter()
        .enumerate()
        .map(|(id, r)| Zone {
            id,
            root: *r,
            members: BTreeSet::new(),
        })
        .collect();
    for (bus, r) in &zone {
        let id = roots.binary_search(r).expect("root");
        zones[id].members.insert(*bus);
    }
    let boundaries = boundary_edges
        .into_iter()
        .map(|(a, b)| BoundaryBranch {
            a,
            b,
            measured_by: server[&(a, b)],
        })
        .collect();
    Ok(ZonePartition {
        zones,
        boundaries,
        assignment,
    })
}
