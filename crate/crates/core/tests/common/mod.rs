#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use feederlab::feeder_model::{
    parse_feeder_dir, BusId, Connection, FeederModel, GeneralData, LineConfig, LineSegment,
    RadialNetwork, SpotLoad, ZipKind,
};
use feederlab::pmu_placement::PlacementGraph;
use num_complex::Complex64;

pub fn dataset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/ieee123")
}

pub fn ieee123() -> FeederModel {
    parse_feeder_dir(&dataset_dir()).expect("bundled dataset parses")
}

/// Printed load-flow rows: bus, then (magnitude pu, angle deg) per phase,
/// `None` where the table shows a dot.
pub type Row = (u32, [Option<(f64, f64)>; 3]);

pub const PRINTED_RESULTS: [Row; 16] = [
    (
        1,
        [
            Some((0.9971, -0.6474)),
            Some((1.0074, -120.3275)),
            Some((1.0009, 119.6171)),
        ],
    ),
    (2, [None, Some((1.0072, -120.3319)), None]),
    (3, [None, None, Some((0.9993, 119.5851))]),
    (4, [None, None, Some((0.9988, 119.5748))]),
    (5, [None, None, Some((0.9980, 119.5601))]),
    (6, [None, None, Some((0.9974, 119.5473))]),
    (
        7,
        [
            Some((0.9876, -1.1228)),
            Some((1.0056, -120.5896)),
            Some((0.9951, 119.3643)),
        ],
    ),
    (
        8,
        [
            Some((0.9814, -1.4381)),
            Some((1.0043, -120.7637)),
            Some((0.9912, 119.1905)),
        ],
    ),
    (9, [Some((0.9799, -1.4675)), None, None]),
    (10, [Some((0.9779, -1.5070)), None, None]),
    (11, [Some((0.9776, -1.5133)), None, None]),
    (12, [None, Some((1.0040, -120.7694)), None]),
    (
        13,
        [
            Some((0.9731, -1.8756)),
            Some((1.0020, -121.0084)),
            Some((0.9854, 118.9030)),
        ],
    ),
    (14, [Some((0.9782, -1.5005)), None, None]),
    (15, [None, None, Some((0.9840, 118.8754))]),
    (16, [None, None, Some((0.9830, 118.8555))]),
];

pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d < -180.0 {
        d += 360.0;
    }
    d.abs()
}

pub fn two_bus() -> FeederModel {
    let general = GeneralData {
        slack_bus: BusId(1),
        v_nom_kv: 4.16,
        slack_mag_pu: [1.0; 3],
        slack_ang_deg: [0.0, -120.0, 120.0],
        international_system: 0,
        delta_lf: 0.0,
        taps: BTreeMap::new(),
    };
    let cfg = LineConfig::from_upper(
        1,
        true,
        [0.4576, 0.1560, 0.1535, 0.4666, 0.1580, 0.4615],
        [1.0780, 0.5017, 0.3849, 1.0482, 0.4236, 1.0651],
        [0.0; 6],
    );
    let seg = LineSegment {
        from_bus: BusId(1),
        to_bus: BusId(2),
        length_ft: 400.0,
        config_id: 1,
    };
    let load = SpotLoad {
        bus: BusId(2),
        connection: Connection::Wye,
        zip_kind: ZipKind::ConstantPower,
        p_kw: [40.0, 0.0, 0.0],
        q_kvar: [20.0, 0.0, 0.0],
    };
    FeederModel::new(
        general,
        vec![cfg],
        vec![seg],
        vec![load],
        vec![],
        vec![],
        None,
    )
    .unwrap()
}

/// Newton iteration on the single complex unknown I = conj(S / (Vs − Z·I)),
/// written as f(I) = I·conj(Vs − Z·I) − conj(S) = 0 in real coordinates.
pub fn two_bus_oracle() -> [Complex64; 3] {
    let vb = 4160.0 / 3f64.sqrt();
    let vs = [
        Complex64::from_polar(vb, 0.0),
        Complex64::from_polar(vb, (-120f64).to_radians()),
        Complex64::from_polar(vb, 120f64.to_radians()),
    ];
    let k = 400.0 / 5280.0;
    let zaa = Complex64::new(0.4576, 1.0780) * k;
    let zba = Complex64::new(0.1560, 0.5017) * k;
    let zca = Complex64::new(0.1535, 0.3849) * k;
    let s = Complex64::new(40_000.0, 20_000.0);
    let f = |i: Complex64| i * (vs[0] - zaa * i).conj() - s.conj();
    let mut i = (s / vs[0]).conj();
    for _ in 0..50 {
        let r = f(i);
        // Real 2×2 Jacobian by exact complex differentiation in x and y.
        let h = 1e-7;
        let fx = (f(i + Complex64::new(h, 0.0)) - f(i - Complex64::new(h, 0.0))) / (2.0 * h);
        let fy = (f(i + Complex64::new(0.0, h)) - f(i - Complex64::new(0.0, h))) / (2.0 * h);
        let det = fx.re * fy.im - fy.re * fx.im;
        let dx = (r.re * fy.im - fy.re * r.im) / det;
        let dy = (fx.re * r.im - r.re * fx.im) / det;
        i -= Complex64::new(dx, dy);
        if dx.hypot(dy) < 1e-14 {
            break;
        }
    }
    assert!(f(i).norm() < 1e-8);
    [vs[0] - zaa * i, vs[1] - zba * i, vs[2] - zca * i]
}

pub fn ids(v: &[u32]) -> Vec<BusId> {
    v.iter().map(|b| BusId(*b)).collect()
}

pub fn graph(n: u32, edges: &[(u32, u32)]) -> PlacementGraph {
    let buses: Vec<BusId> = (1..=n).map(BusId).collect();
    let edges: Vec<(BusId, BusId)> = edges.iter().map(|&(a, b)| (BusId(a), BusId(b))).collect();
    PlacementGraph::from_edges(&buses, &edges)
}

pub fn path(n: u32) -> PlacementGraph {
    graph(n, &(1..n).map(|k| (k, k + 1)).collect::<Vec<_>>())
}

pub fn star(n: u32) -> PlacementGraph {
    graph(n, &(2..=n).map(|k| (1, k)).collect::<Vec<_>>())
}

pub fn binary_tree(n: u32) -> PlacementGraph {
    graph(n, &(2..=n).map(|k| (k / 2, k)).collect::<Vec<_>>())
}

/// First `n` buses of the feeder in breadth-first order from the slack,
/// with the branches among them.
pub fn feeder_prefix(n: usize) -> PlacementGraph {
    let net = RadialNetwork::build(&ieee123()).unwrap();
    let keep: Vec<BusId> = net.buses.iter().take(n).map(|b| b.id).collect();
    let set: BTreeSet<BusId> = keep.iter().copied().collect();
    let edges: Vec<(BusId, BusId)> = net
        .branches
        .iter()
        .filter(|b| set.contains(&b.from_bus) && set.contains(&b.to_bus))
        .map(|b| (b.from_bus, b.to_bus))
        .collect();
    PlacementGraph::from_edges(&keep, &edges)
}

/// Fixed library of connected graphs with at most eight buses.
pub fn library() -> Vec<(String, PlacementGraph)> {
    let mut out = Vec::new();
    for n in 1..=8 {
        out.push((format!("path{n}"), path(n)));
    }
    for n in 3..=8 {
        out.push((format!("star{n}"), star(n)));
    }
    out.push(("binary7".into(), binary_tree(7)));
    out.push((
        "spider".into(),
        graph(7, &[(1, 2), (2, 3), (1, 4), (4, 5), (1, 6), (6, 7)]),
    ));
    out.push((
        "caterpillar".into(),
        graph(8, &[(1, 2), (2, 3), (3, 4), (1, 5), (2, 6), (3, 7), (4, 8)]),
    ));
    out.push((
        "broom".into(),
        graph(8, &[(1, 2), (2, 3), (3, 4), (4, 5), (4, 6), (4, 7), (4, 8)]),
    ));
    out.push((
        "ring6".into(),
        graph(6, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)]),
    ));
    out.push((
        "k4".into(),
        graph(4, &[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]),
    ));
    out.push(("feeder8".into(), feeder_prefix(8)));
    out
}
