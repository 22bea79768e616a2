//! Exact maximal flow between two vertex sets of a lattice graph.
//!
//! Capacities are quantized integers, so the computed optimum is exact and
//! equals the capacity of the extracted cut. Each undirected lattice edge is
//! one pair of antiparallel arcs sharing the capacity; the terminal sets are
//! attached to a virtual source and sink by arcs of effectively infinite
//! capacity, and the problem is solved with Dinic's blocking-flow algorithm.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::Serialize;

use crate::capacities::{dequantize, CapacityField};
use crate::error::{Error, Result};
use crate::lattice::{LatticeGraph, OrientedEdge};

/// Largest admissible total capacity in quantized units.
pub const CAPACITY_LIMIT: u64 = 1 << 62;

/// A stream `(g, o)`: per-edge amount and orientation. `increasing[e]` is
/// true when fluid runs from the lower endpoint of `e` to the upper one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub amount: Vec<u64>,
    pub increasing: Vec<bool>,
}

impl Stream {
    pub fn zero(edge_count: usize) -> Self {
        Stream {
            amount: vec![0; edge_count],
            increasing: vec![true; edge_count],
        }
    }

    /// `o(e)` for graph edge `e`.
    pub fn orientation(&self, graph: &LatticeGraph, e: usize) -> OrientedEdge {
        let ge = graph.edges()[e];
        let (a, b) = (graph.vertex(ge.a).to_vec(), graph.vertex(ge.b).to_vec());
        if self.increasing[e] {
            OrientedEdge { from: a, to: b }
        } else {
            OrientedEdge { from: b, to: a }
        }
    }

    /// Signed flow along the lower-to-upper direction of edge `e`.
    fn signed(&self, e: usize) -> i128 {
        let g = i128::from(self.amount[e]);
        if self.increasing[e] {
            g
        } else {
            -g
        }
    }

    /// Net amount of fluid delivered into `sinks`, counted on the edges that
    /// enter the sink set from the rest of the graph.
    pub fn delivered(&self, graph: &LatticeGraph, sinks: &[u32]) -> i128 {
        let mark = membership(graph.vertex_count(), sinks);
        graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, ge)| match (mark[ge.a as usize], mark[ge.b as usize]) {
                (false, true) => self.signed(e),
                (true, false) => -self.signed(e),
                _ => 0,
            })
            .sum()
    }
}

/// Edge set with its capacity `V(E)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cutset {
    /// Graph edge indices, sorted.
    pub edges: Vec<usize>,
    pub capacity: u64,
}

impl Cutset {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    /// Optimum in quantized units.
    pub value: u64,
    pub stream: Stream,
    pub cutset: Cutset,
    /// Vertices reachable from the sources in the final residual graph.
    pub source_side: Vec<u32>,
    pub n: u32,
    pub seed: Option<u64>,
}

impl FlowResult {
    pub fn value_real(&self) -> f64 {
        dequantize(self.value)
    }

    pub fn cut_size(&self) -> usize {
        self.cutset.len()
    }
}

/// Quantized capacities of every graph edge.
pub fn edge_capacities(graph: &LatticeGraph, field: &CapacityField) -> Vec<u64> {
    graph
        .edges()
        .iter()
        .map(|ge| field.quantized_at(graph.vertex(ge.a), ge.axis as usize))
        .collect()
}

/// `φ(F₁ → F₂ in C)` on the graph carried by `C`.
pub fn max_flow(
    graph: &LatticeGraph,
    sources: &[u32],
    sinks: &[u32],
    field: &CapacityField,
) -> Result<FlowResult> {
    let caps = edge_capacities(graph, field);
    let mut problem = FlowProblem::new(graph, sources, sinks)?;
    let mut result = problem.solve(&caps)?;
    result.seed = Some(field.seed);
    Ok(result)
}

/// Max-flow problem with fixed topology and terminals, solvable repeatedly
/// for different capacity vectors.
#[derive(Debug, Clone)]
pub struct FlowProblem<'g> {
    graph: &'g LatticeGraph,
    sources: Vec<u32>,
    sinks: Vec<u32>,
    solver: Dinic,
}

impl<'g> FlowProblem<'g> {
    pub fn new(graph: &'g LatticeGraph, sources: &[u32], sinks: &[u32]) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::EmptyTerminal("sources"));
        }
        if sinks.is_empty() {
            return Err(Error::EmptyTerminal("sinks"));
        }
        let vertex_count = graph.vertex_count();
        let src_mark = membership(vertex_count, sources);
        if sinks.iter().any(|&v| src_mark[v as usize]) {
            return Err(Error::OverlappingTerminals);
        }
        let mut sources = sources.to_vec();
        let mut sinks = sinks.to_vec();
        sources.sort_unstable();
        sources.dedup();
        sinks.sort_unstable();
        sinks.dedup();

        let s = vertex_count as u32;
        let t = s + 1;
        let mut arcs = Vec::with_capacity(graph.edge_count() + sources.len() + sinks.len());
        for ge in graph.edges() {
            arcs.push((ge.a, ge.b, true));
        }
        for &v in &sources {
            arcs.push((s, v, false));
        }
        for &v in &sinks {
            arcs.push((v, t, false));
        }
        let solver = Dinic::new(vertex_count + 2, &arcs, s, t);
        Ok(FlowProblem {
            graph,
            sources,
            sinks,
            solver,
        })
    }

    /// Solves and returns only `(value, cut size)`.
    pub fn solve_summary(&mut self, caps: &[u64]) -> Result<(u64, usize)> {
        let value = self.run(caps)?;
        let reach = self.solver.residual_reach();
        let cut = self
            .graph
            .edges()
            .iter()
            .filter(|ge| reach[ge.a as usize] != reach[ge.b as usize])
            .count();
        Ok((value, cut))
    }

    pub fn solve(&mut self, caps: &[u64]) -> Result<FlowResult> {
        let value = self.run(caps)?;
        let reach = self.solver.residual_reach();
        let m = self.graph.edge_count();
        let mut stream = Stream::zero(m);
        let mut cut_edges = Vec::new();
        for (e, ge) in self.graph.edges().iter().enumerate() {
            let f = self.solver.net_flow(e, caps[e]);
            stream.amount[e] = f.unsigned_abs();
            stream.increasing[e] = f >= 0;
            if reach[ge.a as usize] != reach[ge.b as usize] {
                cut_edges.push(e);
            }
        }
        let capacity = cut_capacity(&cut_edges, caps)?;
        debug_assert_eq!(capacity, value, "flow value equals cut capacity");
        if capacity != value {
            return Err(Error::InvalidDomain(format!(
                "internal error: flow {value} differs from cut {capacity}"
            )));
        }
        let source_side = (0..self.graph.vertex_count() as u32)
            .filter(|&v| reach[v as usize])
            .collect();
        Ok(FlowResult {
            value,
            stream,
            cutset: Cutset {
                edges: cut_edges,
                capacity,
            },
            source_side,
            n: self.graph.mesh(),
            seed: None,
        })
    }

    fn run(&mut self, caps: &[u64]) -> Result<u64> {
        assert_eq!(caps.len(), self.graph.edge_count(), "one capacity per edge");
        let total = caps.iter().try_fold(0u64, |acc, &c| {
            acc.checked_add(c).filter(|&s| s < CAPACITY_LIMIT)
        });
        let total = total.ok_or(Error::CapacityOverflow)?;
        let infinite = total as i64 + 1;
        let terminal_arcs = self.sources.len() + self.sinks.len();
        let edge_caps = caps
            .iter()
            .map(|&c| c as i64)
            .chain(std::iter::repeat_n(infinite, terminal_arcs));
        self.solver.reset(edge_caps);
        Ok(self.solver.max_flow() as u64)
    }

    pub fn graph(&self) -> &LatticeGraph {
        self.graph
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn sinks(&self) -> &[u32] {
        &self.sinks
    }
}

/// Checks capacity bounds, conservation off the terminals, and that the
/// fluid delivered into `sinks` equals `claimed`.
pub fn verify_stream(
    stream: &Stream,
    graph: &LatticeGraph,
    sources: &[u32],
    sinks: &[u32],
    caps: &[u64],
    claimed: u64,
) -> bool {
    let m = graph.edge_count();
    if stream.amount.len() != m || stream.increasing.len() != m || caps.len() != m {
        return false;
    }
    if stream.amount.iter().zip(caps).any(|(g, c)| g > c) {
        return false;
    }
    let nv = graph.vertex_count();
    let mut balance = vec![0i128; nv];
    for (e, ge) in graph.edges().iter().enumerate() {
        let f = stream.signed(e);
        balance[ge.a as usize] -= f;
        balance[ge.b as usize] += f;
    }
    let terminal = {
        let mut mark = membership(nv, sources);
        for &v in sinks {
            mark[v as usize] = true;
        }
        mark
    };
    if (0..nv).any(|v| !terminal[v] && balance[v] != 0) {
        return false;
    }
    stream.delivered(graph, sinks) == i128::from(claimed)
}

/// True when no path joins `sources` to `sinks` once `removed` is deleted.
pub fn is_cut(removed: &[usize], graph: &LatticeGraph, sources: &[u32], sinks: &[u32]) -> bool {
    let nv = graph.vertex_count();
    let sink_mark = membership(nv, sinks);
    if sources.iter().any(|&v| sink_mark[v as usize]) {
        return false;
    }
    let mut dead = vec![false; graph.edge_count()];
    for &e in removed {
        dead[e] = true;
    }
    let adjacency = Adjacency::new(graph);
    let mut seen = membership(nv, sources);
    let mut queue: VecDeque<u32> = sources.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &(w, e) in adjacency.neighbours(v) {
            if dead[e as usize] || seen[w as usize] {
                continue;
            }
            if sink_mark[w as usize] {
                return false;
            }
            seen[w as usize] = true;
            queue.push_back(w);
        }
    }
    true
}

/// `V(E) = Σ_{e ∈ E} t(e)` in quantized units.
pub fn cut_capacity(edges: &[usize], caps: &[u64]) -> Result<u64> {
    edges
        .iter()
        .try_fold(0u64, |acc, &e| {
            acc.checked_add(caps[e]).filter(|&s| s < CAPACITY_LIMIT)
        })
        .ok_or(Error::CapacityOverflow)
}

/// Writes the cut edges as CSV rows `z0,…,z{d-1},axis,capacity`.
pub fn write_cut_csv<W: Write>(
    mut out: W,
    graph: &LatticeGraph,
    cut: &Cutset,
    caps: &[u64],
) -> io::Result<()> {
    let header: Vec<String> = (0..graph.dim()).map(|k| format!("z{k}")).collect();
    writeln!(out, "{},axis,capacity", header.join(","))?;
    for &e in &cut.edges {
        let ge = graph.edges()[e];
        let z: Vec<String> = graph.vertex(ge.a).iter().map(i64::to_string).collect();
        writeln!(out, "{},{},{}", z.join(","), ge.axis, dequantize(caps[e]))?;
    }
    Ok(())
}

fn membership(n: usize, set: &[u32]) -> Vec<bool> {
    let mut mark = vec![false; n];
    for &v in set {
        mark[v as usize] = true;
    }
    mark
}

/// Undirected adjacency lists `(neighbour, edge index)` in CSR layout.
pub(crate) struct Adjacency {
    start: Vec<u32>,
    list: Vec<(u32, u32)>,
}

impl Adjacency {
    pub(crate) fn new(graph: &LatticeGraph) -> Self {
        let nv = graph.vertex_count();
        let mut degree = vec![0u32; nv + 1];
        for ge in graph.edges() {
            degree[ge.a as usize] += 1;
            degree[ge.b as usize] += 1;
        }
        let mut start = vec![0u32; nv + 1];
        for v in 0..nv {
            start[v + 1] = start[v] + degree[v];
        }
        let mut fill = start.clone();
        let mut list = vec![(0, 0); start[nv] as usize];
        for (e, ge) in graph.edges().iter().enumerate() {
            list[fill[ge.a as usize] as usize] = (ge.b, e as u32);
            fill[ge.a as usize] += 1;
            list[fill[ge.b as usize] as usize] = (ge.a, e as u32);
            fill[ge.b as usize] += 1;
        }
        Adjacency { start, list }
    }

    pub(crate) fn neighbours(&self, v: u32) -> &[(u32, u32)] {
        &self.list[self.start[v as usize] as usize..self.start[v as usize + 1] as usize]
    }
}

/// Dinic's algorithm on a fixed arc set. Arc `2i` runs along input edge `i`
/// and arc `2i + 1` against it; for undirected edges both carry the full
/// capacity, for directed ones the reverse arc starts empty.
#[derive(Debug, Clone)]
struct Dinic {
    node_count: usize,
    source: u32,
    sink: u32,
    head: Vec<u32>,
    arc_to: Vec<u32>,
    undirected: Vec<bool>,
    residual: Vec<i64>,
    level: Vec<i32>,
    cursor: Vec<u32>,
    queue: Vec<u32>,
}

impl Dinic {
    fn new(node_count: usize, edges: &[(u32, u32, bool)], source: u32, sink: u32) -> Self {
        let mut degree = vec![0u32; node_count + 1];
        for &(a, b, _) in edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut head = vec![0u32; node_count + 1];
        for v in 0..node_count {
            head[v + 1] = head[v] + degree[v];
        }
        // Adjacency entries hold arc ids; arc ids index `arc_to`/`residual`.
        let mut fill = head.clone();
        let mut adjacency = vec![0u32; head[node_count] as usize];
        let mut arc_to = vec![0u32; 2 * edges.len()];
        for (i, &(a, b, _)) in edges.iter().enumerate() {
            arc_to[2 * i] = b;
            arc_to[2 * i + 1] = a;
            adjacency[fill[a as usize] as usize] = (2 * i) as u32;
            fill[a as usize] += 1;
            adjacency[fill[b as usize] as usize] = (2 * i + 1) as u32;
            fill[b as usize] += 1;
        }
        Dinic {
            node_count,
            source,
            sink,
            head: head.into_iter().chain(adjacency).collect(),
            arc_to,
            undirected: edges.iter().map(|e| e.2).collect(),
            residual: vec![0; 2 * edges.len()],
            level: vec![-1; node_count],
            cursor: vec![0; node_count],
            queue: Vec::with_capacity(node_count),
        }
    }

    /// Start of the adjacency block of `v` inside `head`.
    #[inline]
    fn adj(&self, v: u32) -> (usize, usize) {
        let base = self.node_count + 1;
        (
            base + self.head[v as usize] as usize,
            base + self.head[v as usize + 1] as usize,
        )
    }

    fn reset(&mut self, caps: impl Iterator<Item = i64>) {
        for (i, c) in caps.enumerate() {
            self.residual[2 * i] = c;
            self.residual[2 * i + 1] = if self.undirected[i] { c } else { 0 };
        }
    }

    /// Net flow along undirected input edge `i` given its capacity.
    fn net_flow(&self, i: usize, cap: u64) -> i64 {
        cap as i64 - self.residual[2 * i]
    }

    fn bfs(&mut self) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.queue.clear();
        self.level[self.source as usize] = 0;
        self.queue.push(self.source);
        let mut qi = 0;
        while qi < self.queue.len() {
            let v = self.queue[qi];
            qi += 1;
            let (lo, hi) = self.adj(v);
            for k in lo..hi {
                let arc = self.head[k] as usize;
                let w = self.arc_to[arc] as usize;
                if self.residual[arc] > 0 && self.level[w] < 0 {
                    self.level[w] = self.level[v as usize] + 1;
                    if w as u32 == self.sink {
                        // Levels beyond the sink are never used.
                        continue;
                    }
                    self.queue.push(w as u32);
                }
            }
        }
        self.level[self.sink as usize] >= 0
    }

    /// One blocking flow by repeated augmenting along level-increasing
    /// paths, with an explicit stack instead of recursion.
    fn blocking_flow(&mut self) -> i64 {
        for v in 0..self.node_count {
            self.cursor[v] = self.adj(v as u32).0 as u32;
        }
        let mut total = 0i64;
        let mut path: Vec<usize> = Vec::new();
        let mut v = self.source;
        loop {
            if v == self.sink {
                let push = path
                    .iter()
                    .map(|&a| self.residual[a])
                    .min()
                    .expect("nonempty path");
                for &a in &path {
                    self.residual[a] -= push;
                    self.residual[a ^ 1] += push;
                }
                total += push;
                // Retreat to the tail of the first saturated arc.
                let first_sat = path
                    .iter()
                    .position(|&a| self.residual[a] == 0)
                    .expect("some arc saturates");
                path.truncate(first_sat);
                v = match path.last() {
                    Some(&a) => self.arc_to[a],
                    None => self.source,
                };
                continue;
            }
            let (_, hi) = self.adj(v);
            let mut advanced = false;
            while (self.cursor[v as usize] as usize) < hi {
                let arc = self.head[self.cursor[v as usize] as usize] as usize;
                let w = self.arc_to[arc];
                if self.residual[arc] > 0 && self.level[w as usize] == self.level[v as usize] + 1 {
                    path.push(arc);
                    v = w;
                    advanced = true;
                    break;
                }
                self.cursor[v as usize] += 1;
            }
            if advanced {
                continue;
            }
            // Dead end: remove v from the level graph and step back.
            self.level[v as usize] = -1;
            match path.pop() {
                Some(a) => {
                    let tail = self.arc_to[a ^ 1];
                    self.cursor[tail as usize] += 1;
                    v = tail;
                }
                None => return total,
            }
        }
    }

    fn max_flow(&mut self) -> i64 {
        let mut flow = 0;
        while self.bfs() {
            flow += self.blocking_flow();
        }
        flow
    }

    /// Nodes reachable from the source through arcs with residual capacity,
    /// restricted to the graph vertices (the last two nodes are terminals).
    fn residual_reach(&mut self) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        self.queue.clear();
        seen[self.source as usize] = true;
        self.queue.push(self.source);
        let mut qi = 0;
        while qi < self.queue.len() {
            let v = self.queue[qi];
            qi += 1;
            let (lo, hi) = self.adj(v);
            for k in lo..hi {
                let arc = self.head[k] as usize;
                let w = self.arc_to[arc] as usize;
                if self.residual[arc] > 0 && !seen[w] {
                    seen[w] = true;
                    self.queue.push(w as u32);
                }
            }
        }
        seen.truncate(self.node_count - 2);
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacities::{quantize, CapacityLaw};

    /// Path graph 0 — 1 — 2 along axis 0.
    fn path3() -> LatticeGraph {
        LatticeGraph::from_vertices(2, 1, vec![0, 0, 1, 0, 2, 0])
    }

    fn grid(w: i64, h: i64) -> LatticeGraph {
        let mut coords = Vec::new();
        for x in 0..w {
            for y in 0..h {
                coords.extend_from_slice(&[x, y]);
            }
        }
        LatticeGraph::from_vertices(2, 1, coords)
    }

    fn column(g: &LatticeGraph, x: i64, h: i64) -> Vec<u32> {
        (0..h).map(|y| g.index_of(&[x, y]).unwrap()).collect()
    }

    #[test]
    fn bottleneck_path() {
        let g = path3();
        let caps = vec![quantize(3.0), quantize(2.0)];
        let mut p = FlowProblem::new(&g, &[0], &[2]).unwrap();
        let r = p.solve(&caps).unwrap();
        assert_eq!(r.value, quantize(2.0));
        assert_eq!(r.cutset.edges, vec![1]);
        assert_eq!(r.source_side, vec![0, 1]);
        assert!(verify_stream(&r.stream, &g, &[0], &[2], &caps, r.value));
    }

    #[test]
    fn two_disjoint_unit_paths() {
        // Columns x = 0 and x = 2 of a 3×2 grid joined by two rows.
        let g = grid(3, 2);
        let caps = vec![quantize(1.0); g.edge_count()];
        let src = column(&g, 0, 2);
        let snk = column(&g, 2, 2);
        let r = FlowProblem::new(&g, &src, &snk)
            .unwrap()
            .solve(&caps)
            .unwrap();
        assert_eq!(r.value, quantize(2.0));
        assert!(is_cut(&r.cutset.edges, &g, &src, &snk));
    }

    #[test]
    fn terminal_errors() {
        let g = path3();
        assert_eq!(
            FlowProblem::new(&g, &[], &[2]).unwrap_err(),
            Error::EmptyTerminal("sources")
        );
        assert_eq!(
            FlowProblem::new(&g, &[0], &[]).unwrap_err(),
            Error::EmptyTerminal("sinks")
        );
        assert_eq!(
            FlowProblem::new(&g, &[0, 1], &[1, 2]).unwrap_err(),
            Error::OverlappingTerminals
        );
    }

    #[test]
    fn overflow_is_reported() {
        let g = path3();
        let caps = vec![CAPACITY_LIMIT - 1, 5];
        let err = FlowProblem::new(&g, &[0], &[2])
            .unwrap()
            .solve(&caps)
            .unwrap_err();
        assert_eq!(err, Error::CapacityOverflow);
        assert_eq!(
            cut_capacity(&[0, 1], &caps).unwrap_err(),
            Error::CapacityOverflow
        );
    }

    #[test]
    fn cut_capacity_examples() {
        let caps = vec![quantize(1.0); 5];
        assert_eq!(cut_capacity(&[], &caps).unwrap(), 0);
        assert_eq!(cut_capacity(&[3], &caps).unwrap(), quantize(1.0));
        assert_eq!(
            cut_capacity(&[0, 1, 2, 3, 4], &caps).unwrap(),
            quantize(5.0)
        );
    }

    #[test]
    fn is_cut_examples() {
        let g = grid(3, 3);
        let src = column(&g, 0, 3);
        let snk = column(&g, 2, 3);
        assert!(!is_cut(&[], &g, &src, &snk));
        let all: Vec<usize> = (0..g.edge_count()).collect();
        assert!(is_cut(&all, &g, &src, &snk));
    }

    #[test]
    fn stream_checks() {
        let g = path3();
        let caps = vec![quantize(3.0), quantize(2.0)];
        let zero = Stream::zero(2);
        assert!(verify_stream(&zero, &g, &[0], &[2], &caps, 0));
        let r = FlowProblem::new(&g, &[0], &[2])
            .unwrap()
            .solve(&caps)
            .unwrap();
        let mut bad = r.stream.clone();
        bad.amount[1] = caps[1] + 1;
        assert!(!verify_stream(&bad, &g, &[0], &[2], &caps, r.value));
        let mut leaky = r.stream.clone();
        leaky.amount[0] -= 1;
        assert!(!verify_stream(&leaky, &g, &[0], &[2], &caps, r.value));
        assert!(!verify_stream(
            &r.stream,
            &g,
            &[0],
            &[2],
            &caps,
            r.value + 1
        ));
    }

    #[test]
    fn max_flow_from_field() {
        let g = grid(4, 4);
        let field = CapacityField::new(CapacityLaw::Constant { a: 1.0 }, 3);
        let r = max_flow(&g, &column(&g, 0, 4), &column(&g, 3, 4), &field).unwrap();
        assert_eq!(r.value, quantize(4.0));
        assert_eq!(r.seed, Some(3));
        assert_eq!(r.cut_size(), 4);
    }

    #[test]
    fn cut_csv_lists_edges() {
        let g = path3();
        let caps = vec![quantize(3.0), quantize(2.0)];
        let r = FlowProblem::new(&g, &[0], &[2])
            .unwrap()
            .solve(&caps)
            .unwrap();
        let mut buf = Vec::new();
        write_cut_csv(&mut buf, &g, &r.cutset, &caps).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "z0,z1,axis,capacity\n1,0,0,2\n"
        );
    }
}
