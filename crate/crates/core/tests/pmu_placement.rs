mod common;

use std::collections::{BTreeSet, VecDeque};

use common::{binary_tree, feeder_prefix, graph, ids, library, path, star};
use feederlab::feeder_model::BusId;
use feederlab::pmu_placement::{
    brute_force_placement, ensure_partitionable, greedy_placement, observable_set,
    parse_placement_json, partition_zones, Channels, GreedyOptions, ObservabilityOptions,
    Placement, PlacementError, PlacementFile, PlacementGraph, ZonePartition,
};
use proptest::prelude::*;

const OBS: ObservabilityOptions = ObservabilityOptions {
    zero_injection: false,
};
const CHANNELS: [Channels; 4] = [
    Channels::Limited(1),
    Channels::Limited(2),
    Channels::Limited(3),
    Channels::Unlimited,
];

fn fully_observable(g: &PlacementGraph, p: &Placement) -> bool {
    observable_set(g, p, OBS).unwrap().len() == g.bus_count()
}

#[test]
fn greedy_is_within_one_of_the_oracle_on_the_library() {
    for (name, g) in library() {
        assert!(g.bus_count() <= 8);
        for ch in CHANNELS {
            let opt = brute_force_placement(&g, ch, OBS).unwrap();
            assert!(!opt.is_empty(), "{name} {ch}");
            let k = opt[0].len();
            for p in &opt {
                assert_eq!(p.len(), k);
                assert!(
                    fully_observable(&g, p),
                    "{name} {ch}: oracle answer unobservable"
                );
            }
            let greedy = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
            assert!(fully_observable(&g, &greedy), "{name} {ch}");
            assert!(
                greedy.len() <= k + 1,
                "{name} {ch}: greedy {} vs {k}",
                greedy.len()
            );
            assert!(greedy.len() >= k);
        }
    }
}

#[test]
fn oracle_minimality_is_exhaustive_on_small_graphs() {
    // Independent check: no placement of size k−1 observes a library graph.
    for (name, g) in library().into_iter().filter(|(_, g)| g.bus_count() <= 6) {
        let k = brute_force_placement(&g, Channels::Limited(1), OBS).unwrap()[0].len();
        let buses = g.buses();
        for mask in 0u32..(1 << buses.len()) {
            if mask.count_ones() as usize != k - 1 {
                continue;
            }
            let chosen: Vec<BusId> = (0..buses.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| buses[i])
                .collect();
            let p = Placement::at(&chosen, Channels::Limited(1)).unwrap();
            assert!(
                !fully_observable(&g, &p),
                "{name}: {chosen:?} is smaller and observable"
            );
        }
    }
}

#[test]
fn oracle_examples() {
    let p = brute_force_placement(&path(3), Channels::Limited(2), OBS).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].buses(), ids(&[2]));
    let p = brute_force_placement(&path(1), Channels::Limited(2), OBS).unwrap();
    assert_eq!(p[0].buses(), ids(&[1]));
    let p = brute_force_placement(&star(7), Channels::Limited(6), OBS).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].buses(), ids(&[1]));
    let big = path(21);
    assert!(matches!(
        brute_force_placement(&big, Channels::Limited(2), OBS),
        Err(PlacementError::TooLargeForOracle(21))
    ));
}

#[test]
fn greedy_examples() {
    let g = path(3);
    let greedy = greedy_placement(&g, Channels::Limited(2), &GreedyOptions::default()).unwrap();
    assert_eq!(greedy.buses(), ids(&[2]));

    let full = Placement::at(&g.buses(), Channels::Limited(0)).unwrap();
    let warm = GreedyOptions {
        warm_start: Some(full.clone()),
        ..Default::default()
    };
    assert_eq!(
        greedy_placement(&g, Channels::Limited(2), &warm).unwrap(),
        full
    );

    let bad = GreedyOptions {
        max_zone_size: Some(0),
        ..Default::default()
    };
    assert!(matches!(
        greedy_placement(&g, Channels::Limited(2), &bad),
        Err(PlacementError::InfeasibleZoneBound(0))
    ));
    let split = PlacementGraph::from_edges(&ids(&[1, 2, 3]), &[(BusId(1), BusId(2))]);
    assert!(matches!(
        greedy_placement(&split, Channels::Limited(2), &GreedyOptions::default()),
        Err(PlacementError::Disconnected)
    ));
}

#[test]
fn observability_examples() {
    let g = path(3);
    let obs =
        |b: &[u32], ch| observable_set(&g, &Placement::at(&ids(b), ch).unwrap(), OBS).unwrap();
    assert_eq!(
        obs(&[2], Channels::Limited(2)),
        ids(&[1, 2, 3]).into_iter().collect()
    );
    assert_eq!(
        obs(&[1], Channels::Limited(1)),
        ids(&[1, 2]).into_iter().collect()
    );
    assert_eq!(obs(&[1, 2, 3], Channels::Limited(0)).len(), 3);
    assert!(matches!(
        observable_set(
            &g,
            &Placement::at(&ids(&[9]), Channels::Limited(1)).unwrap(),
            OBS
        ),
        Err(PlacementError::UnknownBus(_))
    ));
}

#[test]
fn fifteen_bus_binary_tree() {
    let g = binary_tree(15);
    let ch = Channels::Limited(3);
    let opt = brute_force_placement(&g, ch, OBS).unwrap();
    let greedy = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
    assert!(fully_observable(&g, &greedy));
    assert!(greedy.len() <= opt[0].len() + 1);
}

#[test]
fn twenty_bus_feeder_prefix() {
    let g = feeder_prefix(20);
    assert!(g.is_connected());
    for ch in [Channels::Limited(2), Channels::Limited(3)] {
        let opt = brute_force_placement(&g, ch, OBS).unwrap();
        for p in &opt {
            assert!(fully_observable(&g, p));
        }
        let greedy = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
        assert!(fully_observable(&g, &greedy));
        assert!(
            greedy.len() <= opt[0].len() + 1,
            "{ch}: {} vs {}",
            greedy.len(),
            opt[0].len()
        );
    }
}

fn connected_within(g: &PlacementGraph, members: &BTreeSet<BusId>) -> bool {
    let Some(&start) = members.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut q = VecDeque::from([start]);
    while let Some(u) = q.pop_front() {
        for v in g.neighbors(u) {
            if members.contains(v) && seen.insert(*v) {
                q.push_back(*v);
            }
        }
    }
    seen.len() == members.len()
}

fn assert_valid_partition(g: &PlacementGraph, p: &Placement, part: &ZonePartition) {
    let mut all = BTreeSet::new();
    for z in &part.zones {
        for b in &z.members {
            assert!(all.insert(*b), "bus {b} in two zones");
        }
        assert!(
            connected_within(g, &z.members),
            "zone {} disconnected",
            z.id
        );
        let roots: Vec<BusId> = z
            .members
            .iter()
            .copied()
            .filter(|b| p.contains(*b))
            .collect();
        assert_eq!(roots, vec![z.root], "zone {} PMU roots", z.id);
    }
    assert_eq!(all, g.buses().into_iter().collect::<BTreeSet<_>>());
    for br in &part.boundaries {
        assert_ne!(part.zone_of(br.a), part.zone_of(br.b));
        assert!(br.measured_by == br.a || br.measured_by == br.b);
        assert!(p.contains(br.measured_by));
        let far = if br.measured_by == br.a { br.b } else { br.a };
        assert!(part.assignment[&br.measured_by].contains(&far));
    }
}

#[test]
fn feeder_partition_is_valid_and_deterministic() {
    let g = PlacementGraph::from_model(&common::ieee123()).unwrap();
    for ch in [
        Channels::Limited(2),
        Channels::Limited(3),
        Channels::Unlimited,
    ] {
        let p = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
        let p = ensure_partitionable(&g, &p, ch, OBS).unwrap();
        assert!(fully_observable(&g, &p));
        let part = partition_zones(&g, &p, OBS).unwrap();
        assert_valid_partition(&g, &p, &part);
        assert_eq!(part.zones.len(), p.len());

        let again = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
        let again = ensure_partitionable(&g, &again, ch, OBS).unwrap();
        assert_eq!(again, p);
        assert_eq!(partition_zones(&g, &again, OBS).unwrap(), part);
    }
}

#[test]
fn zone_size_cap_is_honored() {
    let g = PlacementGraph::from_model(&common::ieee123()).unwrap();
    let opts = GreedyOptions {
        max_zone_size: Some(6),
        ..Default::default()
    };
    let p = greedy_placement(&g, Channels::Limited(3), &opts).unwrap();
    let part = partition_zones(&g, &p, OBS).unwrap();
    assert!(part.largest_zone() <= 6);
    assert_valid_partition(&g, &p, &part);
}

#[test]
fn partition_examples() {
    let g = path(3);
    let one = Placement::at(&ids(&[2]), Channels::Limited(2)).unwrap();
    let part = partition_zones(&g, &one, OBS).unwrap();
    assert_eq!(part.zones.len(), 1);
    assert!(part.boundaries.is_empty());

    // The middle bus is one hop from both roots; the lower root wins.
    let two = Placement::at(&ids(&[1, 3]), Channels::Limited(1)).unwrap();
    let part = partition_zones(&g, &two, OBS).unwrap();
    assert_eq!(part.zones[0].members, ids(&[1, 2]).into_iter().collect());
    assert_eq!(part.zones[1].members, ids(&[3]).into_iter().collect());
    assert_eq!(part.boundaries.len(), 1);
    assert_eq!(
        (part.boundaries[0].a, part.boundaries[0].b),
        (BusId(2), BusId(3))
    );
    assert_eq!(part.boundaries[0].measured_by, BusId(3));

    let blind = Placement::at(&ids(&[1]), Channels::Limited(1)).unwrap();
    assert!(matches!(
        partition_zones(&g, &blind, OBS),
        Err(PlacementError::UnobservableInput(_))
    ));
}

#[test]
fn placement_file_round_trip() {
    let g = PlacementGraph::from_model(&common::ieee123()).unwrap();
    let ch = Channels::Limited(3);
    let p = ensure_partitionable(
        &g,
        &greedy_placement(&g, ch, &GreedyOptions::default()).unwrap(),
        ch,
        OBS,
    )
    .unwrap();
    let part = partition_zones(&g, &p, OBS).unwrap();
    let obs = observable_set(&g, &p, OBS).unwrap();
    let file = PlacementFile::new(ch, &p, &part, &obs);
    let text = serde_json::to_string_pretty(&file).unwrap();
    let back = parse_placement_json(&text).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.partition(), part);
    let pinned = back.placement().unwrap();
    assert_eq!(pinned.buses(), p.buses());
    assert_eq!(observable_set(&g, &pinned, OBS).unwrap(), obs);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["pmu_count"] = serde_json::json!(1);
    assert!(matches!(
        parse_placement_json(&v.to_string()),
        Err(PlacementError::BadFile(_))
    ));
    assert!(matches!(
        parse_placement_json("[1,2]"),
        Err(PlacementError::BadFile(_))
    ));
}

proptest! {
    #[test]
    fn observability_is_monotone(
        n in 2u32..12,
        parents in proptest::collection::vec(any::<u32>(), 11),
        small in proptest::collection::vec(any::<bool>(), 12),
        extra in proptest::collection::vec(any::<bool>(), 12),
        ch in 0u32..4,
    ) {
        let edges: Vec<(u32, u32)> = (2..=n).map(|k| (1 + parents[k as usize - 2] % (k - 1), k)).collect();
        let g = graph(n, &edges);
        let p1: Vec<u32> = (1..=n).filter(|b| small[*b as usize - 1]).collect();
        let p2: Vec<u32> = (1..=n).filter(|b| small[*b as usize - 1] || extra[*b as usize - 1]).collect();
        let ch = Channels::Limited(ch);
        let o1 = observable_set(&g, &Placement::at(&ids(&p1), ch).unwrap(), OBS).unwrap();
        let o2 = observable_set(&g, &Placement::at(&ids(&p2), ch).unwrap(), OBS).unwrap();
        prop_assert!(o1.is_subset(&o2), "{:?} ⊄ {:?}", o1, o2);
    }

    #[test]
    fn random_tree_partitions_are_valid(
        n in 2u32..16,
        parents in proptest::collection::vec(any::<u32>(), 15),
        ch in 1u32..4,
    ) {
        let edges: Vec<(u32, u32)> = (2..=n).map(|k| (1 + parents[k as usize - 2] % (k - 1), k)).collect();
        let g = graph(n, &edges);
        let ch = Channels::Limited(ch);
        let p = greedy_placement(&g, ch, &GreedyOptions::default()).unwrap();
        let p = ensure_partitionable(&g, &p, ch, OBS).unwrap();
        let part = partition_zones(&g, &p, OBS).unwrap();
        assert_valid_partition(&g, &p, &part);
        prop_assert_eq!(partition_zones(&g, &p, OBS).unwrap(), part);
    }
}
