use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::{BusId, FeederError, FeederModel, PhaseSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    Connectivity,
    Radiality,
    PhaseConsistency,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

struct UnionFind {
    parent: BTreeMap<BusId, BusId>,
}

impl UnionFind {
    fn new() -> UnionFind {
        UnionFind {
            parent: BTreeMap::new(),
        }
    }

    fn find(&mut self, b: BusId) -> BusId {
        let p = *self.parent.entry(b).or_insert(b);
        if p == b {
            return b;
        }
        let root = self.find(p);
        self.parent.insert(b, root);
        root
    }

    /// Returns false when both buses were already in one class.
    fn union(&mut self, a: BusId, b: BusId) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent.insert(hi, lo);
        true
    }
}

/// Shortest path between two buses over an undirected edge list.
fn path_between(edges: &[(BusId, BusId)], from: BusId, to: BusId) -> Vec<BusId> {
    let mut adj: BTreeMap<BusId, Vec<BusId>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut prev: BTreeMap<BusId, BusId> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(v) {
                prev.insert(v, u);
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while let Some(&p) = prev.get(&cur) {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

fn has_cycle(edges: &[(BusId, BusId)]) -> Option<(BusId, BusId, Vec<BusId>)> {
    let mut uf = UnionFind::new();
    for (k, &(a, b)) in edges.iter().enumerate() {
        if !uf.union(a, b) {
            let mut cycle = path_between(&edges[..k], a, b);
            cycle.push(a);
            return Some((a, b, cycle));
        }
    }
    None
}

/// Identifies the endpoints of every closed switch. The representative of
/// each merged class is the slack bus when present, else the lowest id.
/// Segments, loads and capacitors are re-pointed at representatives and the
/// alias map keeps the original ids for reporting.
pub fn merge_switches(model: &FeederModel) -> Result<FeederModel, FeederError> {
    if model.merged {
        return Ok(model.clone());
    }
    let closed: Vec<(BusId, BusId)> = model
        .switches
        .iter()
        .filter(|s| s.closed)
        .map(|s| (s.bus_a, s.bus_b))
        .collect();
    let mut uf = UnionFind::new();
    for (k, &(a, b)) in closed.iter().enumerate() {
        if !uf.union(a, b) {
            let mut cycle = path_between(&closed[..k], a, b);
            cycle.push(a);
            return Err(FeederError::MergeCreatesCycle { a, b, cycle });
        }
    }

    let slack = model.general.slack_bus;
    let mut classes: BTreeMap<BusId, Vec<BusId>> = BTreeMap::new();
    let members: BTreeSet<BusId> = closed.iter().flat_map(|&(a, b)| [a, b]).collect();
    for &m in &members {
        let root = uf.find(m);
        classes.entry(root).or_default().push(m);
    }
    let mut aliases = BTreeMap::new();
    for class in classes.values() {
        let rep = if class.contains(&slack) {
            slack
        } else {
            *class.iter().min().expect("nonempty class")
        };
        for &m in class {
            if m != rep {
                aliases.insert(m, rep);
            }
        }
    }
    let resolve = |b: BusId| aliases.get(&b).copied().unwrap_or(b);

    let mut merged = model.clone();
    for s in &mut merged.segments {
        s.from_bus = resolve(s.from_bus);
        s.to_bus = resolve(s.to_bus);
    }
    let before: Vec<(BusId, BusId)> = model
        .segments
        .iter()
        .map(|s| (s.from_bus, s.to_bus))
        .collect();
    let after: Vec<(BusId, BusId)> = merged
        .segments
        .iter()
        .map(|s| (s.from_bus, s.to_bus))
        .collect();
    if has_cycle(&before).is_none() {
        if let Some((a, b, cycle)) = has_cycle(&after) {
            return Err(FeederError::MergeCreatesCycle { a, b, cycle });
        }
    }
    for l in &mut merged.loads {
        l.bus = resolve(l.bus);
    }
    for c in &mut merged.capacitors {
        c.bus = resolve(c.bus);
    }
    let taps = std::mem::take(&mut merged.general.taps);
    merged.general.taps = taps.into_iter().map(|(b, t)| (resolve(b), t)).collect();
    merged.aliases = aliases;
    merged.merged = true;
    Ok(merged)
}

/// Connectivity, radiality and phase-consistency findings. An empty list
/// means the feeder is ready to solve.
pub fn validate_topology(model: &FeederModel) -> Vec<Finding> {
    let mut findings = Vec::new();
    let m = match merge_switches(model) {
        Ok(m) => m,
        Err(e) => {
            findings.push(Finding {
                kind: FindingKind::Radiality,
                message: e.to_string(),
            });
            model.clone()
        }
    };
    let slack = m.general.slack_bus;

    if let Some(coords) = &m.coords {
        let known: BTreeSet<BusId> = coords.iter().map(|c| c.bus).collect();
        let mut referenced = BTreeSet::new();
        for s in &model.segments {
            referenced.insert(s.from_bus);
            referenced.insert(s.to_bus);
        }
        for l in &model.loads {
            referenced.insert(l.bus);
        }
        for c in &model.capacitors {
            referenced.insert(c.bus);
        }
        for b in referenced.difference(&known) {
            findings.push(Finding {
                kind: FindingKind::Connectivity,
                message: format!("bus {b} is referenced but not defined in coords"),
            });
        }
    }

    let mut adj: BTreeMap<BusId, Vec<(BusId, usize)>> = BTreeMap::new();
    adj.entry(slack).or_default();
    for (k, s) in m.segments.iter().enumerate() {
        adj.entry(s.from_bus).or_default().push((s.to_bus, k));
        adj.entry(s.to_bus).or_default().push((s.from_bus, k));
    }
    for l in &m.loads {
        adj.entry(l.bus).or_default();
    }
    for c in &m.capacitors {
        adj.entry(c.bus).or_default();
    }
    for list in adj.values_mut() {
        list.sort();
    }

    // BFS from the slack; the first visit fixes the parent segment.
    let mut parent_seg: BTreeMap<BusId, Option<usize>> = BTreeMap::from([(slack, None)]);
    let mut order = vec![slack];
    let mut queue = VecDeque::from([slack]);
    while let Some(u) = queue.pop_front() {
        for &(v, k) in &adj[&u] {
            if let std::collections::btree_map::Entry::Vacant(e) = parent_seg.entry(v) {
                e.insert(Some(k));
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    let unreached: Vec<BusId> = adj
        .keys()
        .filter(|b| !parent_seg.contains_key(b))
        .copied()
        .collect();
    if !unreached.is_empty() {
        findings.push(Finding {
            kind: FindingKind::Connectivity,
            message: format!(
                "buses not reachable from slack {slack}: {}",
                join_ids(&unreached)
            ),
        });
    }

    let edges: Vec<(BusId, BusId)> = m.segments.iter().map(|s| (s.from_bus, s.to_bus)).collect();
    let mut uf = UnionFind::new();
    for (k, &(a, b)) in edges.iter().enumerate() {
        if !uf.union(a, b) {
            let mut cycle = path_between(&edges[..k], a, b);
            cycle.push(a);
            findings.push(Finding {
                kind: FindingKind::Radiality,
                message: format!("segment {a}-{b} closes a loop through {}", join_ids(&cycle)),
            });
        }
    }

    // Phases available at each reached bus are the intersection of segment
    // phasings along its path from the slack.
    let mut avail: BTreeMap<BusId, PhaseSet> = BTreeMap::new();
    for &b in &order {
        let set = match parent_seg[&b] {
            None => PhaseSet::ABC,
            Some(k) => {
                let s = &m.segments[k];
                let up = if s.from_bus == b {
                    s.to_bus
                } else {
                    s.from_bus
                };
                let cfg = &m.configs[&s.config_id];
                let here = avail[&up].intersection(cfg.phasing);
                if !avail[&up].is_superset(cfg.phasing) {
                    findings.push(Finding {
                        kind: FindingKind::PhaseConsistency,
                        message: format!(
                            "segment {}-{} (config {}, phases {}) is fed with phases {} only",
                            s.from_bus, s.to_bus, s.config_id, cfg.phasing, avail[&up]
                        ),
                    });
                }
                here
            }
        };
        avail.insert(b, set);
    }
    for l in &m.loads {
        if let Some(have) = avail.get(&l.bus) {
            let need = l.phases();
            if !have.is_superset(need) {
                findings.push(Finding {
                    kind: FindingKind::PhaseConsistency,
                    message: format!(
                        "load at bus {} needs phases {} but only {} are supplied",
                        l.bus, need, have
                    ),
                });
            }
        }
    }
    for c in &m.capacitors {
        if let Some(have) = avail.get(&c.bus) {
            let mut need = PhaseSet::EMPTY;
            for (i, q) in c.kvar.iter().enumerate() {
                if *q != 0.0 {
                    need.insert(super::Phase::from_index(i));
                }
            }
            if !have.is_superset(need) {
                findings.push(Finding {
                    kind: FindingKind::PhaseConsistency,
                    message: format!(
                        "capacitor at bus {} needs phases {} but only {} are supplied",
                        c.bus, need, have
                    ),
                });
            }
        }
    }
    findings
}

fn join_ids(ids: &[BusId]) -> String {
    ids.iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
