//! Brute-force checks of the flow solver on tiny random instances.

use serde::Serialize;

use crate::capacities::{hash_words, quantize, unit_interval};
use crate::lattice::LatticeGraph;
use crate::maxflow::{is_cut, verify_stream, FlowProblem};

/// Largest edge count of a generated instance.
pub const MAX_ORACLE_EDGES: usize = 12;

/// Small lattice graph with terminals and quantized capacities.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub graph: LatticeGraph,
    pub sources: Vec<u32>,
    pub sinks: Vec<u32>,
    pub caps: Vec<u64>,
}

/// Counter-driven uniform variates.
struct Draws {
    seed: u64,
    counter: u64,
}

impl Draws {
    fn next(&mut self) -> f64 {
        self.counter += 1;
        unit_interval(hash_words(self.seed, &[self.counter]))
    }

    fn below(&mut self, k: usize) -> usize {
        ((self.next() * k as f64) as usize).min(k - 1)
    }
}

/// Random subgraph of a small 2D grid with at most [`MAX_ORACLE_EDGES`]
/// edges, two disjoint nonempty terminal sets and capacities in `[0, 9]`.
pub fn random_instance(seed: u64) -> SmallInstance {
    let mut r = Draws { seed, counter: 0 };
    let w = 2 + r.below(3) as i64;
    let h = 2 + r.below(2) as i64;
    let mut points: Vec<[i64; 2]> = Vec::new();
    for x in 0..w {
        for y in 0..h {
            if r.next() < 0.85 {
                points.push([x, y]);
            }
        }
    }
    while points.len() < 2 {
        points.push([points.len() as i64, 0]);
    }
    let build = |pts: &[[i64; 2]]| {
        LatticeGraph::from_vertices(2, 1, pts.iter().flat_map(|p| p.iter().copied()).collect())
    };
    let mut graph = build(&points);
    while graph.edge_count() > MAX_ORACLE_EDGES {
        points.remove(r.below(points.len()));
        graph = build(&points);
    }

    let count = graph.vertex_count() as u32;
    let (mut sources, mut sinks) = (Vec::new(), Vec::new());
    for v in 0..count {
        let u = r.next();
        if u < 0.3 {
            sources.push(v);
        } else if u < 0.6 {
            sinks.push(v);
        }
    }
    if sources.is_empty() {
        sinks.retain(|&s| s != 0);
        sources.push(0);
    }
    if sinks.is_empty() {
        // Two vertices at least, so a source can be spared if need be.
        match (0..count).rev().find(|v| !sources.contains(v)) {
            Some(v) => sinks.push(v),
            None => sinks.push(sources.pop().expect("two vertices")),
        }
    }
    sinks.sort_unstable();

    let caps = (0..graph.edge_count())
        .map(|_| {
            if r.next() < 0.5 {
                quantize(r.below(10) as f64)
            } else {
                quantize(9.0 * r.next())
            }
        })
        .collect();
    SmallInstance {
        graph,
        sources,
        sinks,
        caps,
    }
}

/// Minimum coboundary capacity over all vertex bipartitions with the
/// sources on one side and the sinks on the other.
pub fn brute_force_min_cut(inst: &SmallInstance) -> u64 {
    let nv = inst.graph.vertex_count();
    assert!(nv <= 24, "exhaustive enumeration needs a tiny graph");
    let free: Vec<usize> = (0..nv as u32)
        .filter(|v| !inst.sources.contains(v) && !inst.sinks.contains(v))
        .map(|v| v as usize)
        .collect();
    let mut side = vec![false; nv];
    for &s in &inst.sources {
        side[s as usize] = true;
    }
    let mut best = u64::MAX;
    for mask in 0u64..(1 << free.len()) {
        for (bit, &v) in free.iter().enumerate() {
            side[v] = mask >> bit & 1 == 1;
        }
        let cut: u64 = inst
            .graph
            .edges()
            .iter()
            .zip(&inst.caps)
            .filter(|(ge, _)| side[ge.a as usize] != side[ge.b as usize])
            .map(|(_, &c)| c)
            .sum();
        best = best.min(cut);
    }
    best
}

/// Outcome of checking one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceCheck {
    pub value: u64,
    pub brute_force: u64,
    pub duality: bool,
    pub stream_valid: bool,
    pub cut_valid: bool,
    pub symmetric: bool,
}

impl InstanceCheck {
    pub fn passed(&self) -> bool {
        self.duality && self.stream_valid && self.cut_valid && self.symmetric
    }
}

pub fn check_instance(inst: &SmallInstance) -> InstanceCheck {
    let forward = FlowProblem::new(&inst.graph, &inst.sources, &inst.sinks)
        .and_then(|mut p| p.solve(&inst.caps))
        .expect("generated instances are valid");
    let backward = FlowProblem::new(&inst.graph, &inst.sinks, &inst.sources)
        .and_then(|mut p| p.solve(&inst.caps))
        .expect("generated instances are valid");
    let brute_force = brute_force_min_cut(inst);
    InstanceCheck {
        value: forward.value,
        brute_force,
        duality: forward.value == brute_force && forward.cutset.capacity == forward.value,
        stream_valid: verify_stream(
            &forward.stream,
            &inst.graph,
            &inst.sources,
            &inst.sinks,
            &inst.caps,
            forward.value,
        ),
        cut_valid: is_cut(
            &forward.cutset.edges,
            &inst.graph,
            &inst.sources,
            &inst.sinks,
        ),
        symmetric: backward.value == forward.value,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelftestReport {
    pub instances: usize,
    pub failures: Vec<u64>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `count` random instances derived from `seed`.
pub fn selftest(count: usize, seed: u64) -> SelftestReport {
    let failures = (0..count as u64)
        .map(|i| hash_words(seed, &[i]))
        .filter(|&s| !check_instance(&random_instance(s)).passed())
        .collect();
    SelftestReport {
        instances: count,
        failures,
    }
}
