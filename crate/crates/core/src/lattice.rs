//! Lattice discretization `(Ω_n, Γ_n, Γ¹_n, Γ²_n)` and the induced graph.
//!
//! Vertices of `ℤᵈ/n` are stored unscaled as integer coordinates `z`; the
//! point they stand for is `z/n`.

use std::collections::HashMap;
use std::io::{self, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Cylinder, Domain, FaceTag, RBox};

/// Mesh `n ≥ 1` of the rescaled lattice `ℤᵈ/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct MeshIndex(u32);

impl MeshIndex {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDiscretization { n });
        }
        Ok(MeshIndex(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for MeshIndex {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        MeshIndex::new(n)
    }
}

impl From<MeshIndex> for u32 {
    fn from(m: MeshIndex) -> u32 {
        m.0
    }
}

/// Undirected nearest-neighbour edge `⟨z, z + e_axis⟩`, stored by its lower
/// endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeEdge {
    pub lo: Vec<i64>,
    pub axis: usize,
}

impl LatticeEdge {
    /// Canonical edge between two L¹-nearest neighbours, in either order.
    pub fn between(a: &[i64], b: &[i64]) -> Option<Self> {
        if a.len() != b.len() {
            return None;
        }
        let mut axis = None;
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            match y - x {
                0 => {}
                1 | -1 if axis.is_none() => axis = Some(k),
                _ => return None,
            }
        }
        let axis = axis?;
        let lo = if a[axis] < b[axis] { a } else { b };
        Some(LatticeEdge {
            lo: lo.to_vec(),
            axis,
        })
    }

    pub fn hi(&self) -> Vec<i64> {
        let mut z = self.lo.clone();
        z[self.axis] += 1;
        z
    }

    /// Endpoints as points of ℝᵈ at mesh `n`.
    pub fn endpoints_f64(&self, n: u32) -> (Vec<f64>, Vec<f64>) {
        let s = n as f64;
        let a: Vec<f64> = self.lo.iter().map(|&z| z as f64 / s).collect();
        let mut b = a.clone();
        b[self.axis] = (self.lo[self.axis] + 1) as f64 / s;
        (a, b)
    }
}

/// Edge `⟨⟨x, y⟩⟩` oriented from `x` towards `y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub from: Vec<i64>,
    pub to: Vec<i64>,
}

impl OrientedEdge {
    pub fn new(from: Vec<i64>, to: Vec<i64>) -> Option<Self> {
        LatticeEdge::between(&from, &to)?;
        Some(OrientedEdge { from, to })
    }

    pub fn edge(&self) -> LatticeEdge {
        LatticeEdge::between(&self.from, &self.to).expect("endpoints are adjacent")
    }

    /// True when oriented from the lower endpoint to the upper one.
    pub fn is_increasing(&self) -> bool {
        self.from < self.to
    }
}

/// Regions supporting the "edge belongs to A" test: the open segment between
/// the endpoints lies inside `A`.
pub trait Region {
    fn contains_edge(&self, e: &LatticeEdge, n: u32) -> bool;
}

/// Open box, tested exactly.
impl Region for RBox {
    fn contains_edge(&self, e: &LatticeEdge, n: u32) -> bool {
        let scale = BigInt::from(n);
        let at = |z: i64| BigRational::new(BigInt::from(z), scale.clone());
        (0..self.dim()).all(|k| {
            if k == e.axis {
                self.lo[k] <= at(e.lo[k]) && at(e.lo[k] + 1) <= self.hi[k]
            } else {
                let x = at(e.lo[k]);
                self.lo[k] < x && x < self.hi[k]
            }
        })
    }
}

/// Closed convex set: the open segment lies inside iff both endpoints do.
impl Region for Cylinder {
    fn contains_edge(&self, e: &LatticeEdge, n: u32) -> bool {
        let (a, b) = e.endpoints_f64(n);
        self.contains(&a) && self.contains(&b)
    }
}

impl Region for Ball {
    fn contains_edge(&self, e: &LatticeEdge, n: u32) -> bool {
        let (a, b) = e.endpoints_f64(n);
        self.contains(&a) && self.contains(&b)
    }
}

pub fn edge_in_region<R: Region + ?Sized>(e: &LatticeEdge, n: u32, region: &R) -> bool {
    region.contains_edge(e, n)
}

/// `(Ω_n, Γ_n, Γ¹_n, Γ²_n)` with vertices in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain {
    n: u32,
    dim: usize,
    coords: Vec<i64>,
    gamma: Vec<bool>,
    gamma1: Vec<bool>,
    gamma2: Vec<bool>,
}

impl DiscreteDomain {
    pub fn mesh(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[i64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn is_gamma(&self, i: usize) -> bool {
        self.gamma[i]
    }

    pub fn is_source(&self, i: usize) -> bool {
        self.gamma1[i]
    }

    pub fn is_sink(&self, i: usize) -> bool {
        self.gamma2[i]
    }

    pub fn gamma_indices(&self) -> Vec<u32> {
        flagged(&self.gamma)
    }

    /// Indices of `Γ¹_n`.
    pub fn source_indices(&self) -> Vec<u32> {
        flagged(&self.gamma1)
    }

    /// Indices of `Γ²_n`.
    pub fn sink_indices(&self) -> Vec<u32> {
        flagged(&self.gamma2)
    }

    /// CSV dump: `z0,...,z{d-1},omega,gamma,gamma1,gamma2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("z{k}")).collect();
        writeln!(out, "{},omega,gamma,gamma1,gamma2", header.join(","))?;
        for (i, z) in self.vertices().enumerate() {
            let zs: Vec<String> = z.iter().map(i64::to_string).collect();
            writeln!(
                out,
                "{},1,{},{},{}",
                zs.join(","),
                self.gamma[i] as u8,
                self.gamma1[i] as u8,
                self.gamma2[i] as u8
            )?;
        }
        Ok(())
    }
}

fn flagged(flags: &[bool]) -> Vec<u32> {
    flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| i as u32)
        .collect()
}

/// Integer range of `z` with `d_∞(z/n, [lo, hi]) < 1/n` along one axis:
/// `n·lo − 1 < z < n·hi + 1`, i.e. `⌊n·lo⌋ ≤ z ≤ ⌈n·hi⌉`.
fn near_range(lo: &BigRational, hi: &BigRational, n: u32) -> (i64, i64) {
    let scale = BigRational::from_integer(BigInt::from(n));
    let a = (lo * &scale).floor().to_integer();
    let b = (hi * &scale).ceil().to_integer();
    (to_i64(&a), to_i64(&b))
}

fn to_i64(x: &BigInt) -> i64 {
    i64::try_from(x).expect("lattice coordinate fits in i64")
}

/// Axis-aligned integer box of lattice points, tested per coordinate.
#[derive(Debug, Clone)]
struct IntBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl IntBox {
    fn near(lo: &[BigRational], hi: &[BigRational], n: u32) -> Self {
        let (lo, hi) = lo.iter().zip(hi).map(|(l, h)| near_range(l, h, n)).unzip();
        IntBox { lo, hi }
    }

    fn contains(&self, z: &[i64]) -> bool {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x <= h)
    }
}

/// Discretizes the domain at mesh `n` with exact rational distances.
pub fn discretize(domain: &Domain, n: MeshIndex) -> Result<DiscreteDomain> {
    let n = n.get();
    let dim = domain.dim();
    let boxes: Vec<IntBox> = domain
        .boxes()
        .iter()
        .map(|b| IntBox::near(&b.lo, &b.hi, n))
        .collect();
    let near_tag = |tag: FaceTag| -> Vec<IntBox> {
        domain
            .facets_tagged(tag)
            .map(|f| IntBox::near(&f.lo, &f.hi, n))
            .collect()
    };
    let sources = near_tag(FaceTag::Source);
    let sinks = near_tag(FaceTag::Sink);

    let mut lo = boxes[0].lo.clone();
    let mut hi = boxes[0].hi.clone();
    for b in &boxes[1..] {
        for k in 0..dim {
            lo[k] = lo[k].min(b.lo[k]);
            hi[k] = hi[k].max(b.hi[k]);
        }
    }
    let in_omega = |z: &[i64]| boxes.iter().any(|b| b.contains(z));

    let mut coords = Vec::new();
    let mut z = lo.clone();
    'outer: loop {
        if in_omega(&z) {
            coords.extend_from_slice(&z);
        }
        // Odometer over the bounding range; the last axis varies fastest so
        // that the output is lexicographically sorted.
        let mut k = dim;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            if z[k] < hi[k] {
                z[k] += 1;
                z[k + 1..].copy_from_slice(&lo[k + 1..dim]);
                break;
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyDiscretization { n });
    }

    let count = coords.len() / dim;
    let mut gamma = vec![false; count];
    let mut gamma1 = vec![false; count];
    let mut gamma2 = vec![false; count];
    let mut probe = vec![0i64; dim];
    for i in 0..count {
        let x = &coords[i * dim..(i + 1) * dim];
        probe.copy_from_slice(x);
        let mut boundary = false;
        'axes: for k in 0..dim {
            for step in [-1, 1] {
                probe[k] += step;
                let outside = !in_omega(&probe);
                probe[k] -= step;
                if outside {
                    boundary = true;
                    break 'axes;
                }
            }
        }
        if !boundary {
            continue;
        }
        gamma[i] = true;
        let near_src = sources.iter().any(|b| b.contains(x));
        let near_snk = sinks.iter().any(|b| b.contains(x));
        gamma1[i] = near_src && !near_snk;
        gamma2[i] = near_snk && !near_src;
    }

    Ok(DiscreteDomain {
        n,
        dim,
        coords,
        gamma,
        gamma1,
        gamma2,
    })
}

/// Undirected lattice edge between two graph vertices; `a` is the lower
/// endpoint along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphEdge {
    pub a: u32,
    pub b: u32,
    pub axis: u8,
}

/// Compact graph over a finite set of lattice vertices, keeping every
/// lattice edge with both endpoints in the set.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    dim: usize,
    n: u32,
    coords: Vec<i64>,
    edges: Vec<GraphEdge>,
    index: HashMap<Vec<i64>, u32>,
}

impl LatticeGraph {
    /// `coords` holds `dim` integers per vertex; the vertex order is kept.
    pub fn from_vertices(dim: usize, n: u32, coords: Vec<i64>) -> Self {
        assert_eq!(coords.len() % dim.max(1), 0);
        let count = coords.len() / dim;
        let mut index = HashMap::with_capacity(count);
        for i in 0..count {
            index.insert(coords[i * dim..(i + 1) * dim].to_vec(), i as u32);
        }
        let mut edges = Vec::new();
        let mut probe = vec![0i64; dim];
        for i in 0..count {
            probe.copy_from_slice(&coords[i * dim..(i + 1) * dim]);
            for k in 0..dim {
                probe[k] += 1;
                if let Some(&j) = index.get(&probe) {
                    edges.push(GraphEdge {
                        a: i as u32,
                        b: j,
                        axis: k as u8,
                    });
                }
                probe[k] -= 1;
            }
        }
        LatticeGraph {
            dim,
            n,
            coords,
            edges,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> u32 {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, i: u32) -> &[i64] {
        let i = i as usize;
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn index_of(&self, z: &[i64]) -> Option<u32> {
        self.index.get(z).copied()
    }

    pub fn lattice_edge(&self, e: usize) -> LatticeEdge {
        let ge = self.edges[e];
        LatticeEdge {
            lo: self.vertex(ge.a).to_vec(),
            axis: ge.axis as usize,
        }
    }

    /// True when `z` has a lattice neighbour outside the vertex set.
    pub fn has_outside_neighbour(&self, z: &[i64]) -> bool {
        let mut probe = z.to_vec();
        for k in 0..self.dim {
            for step in [-1, 1] {
                probe[k] += step;
                let outside = !self.index.contains_key(&probe);
                probe[k] -= step;
                if outside {
                    return true;
                }
            }
        }
        false
    }
}

/// Graph carried by `Ω_n`: both endpoints of every edge lie in `Ω_n`.
pub fn induced_graph(d: &DiscreteDomain) -> LatticeGraph {
    LatticeGraph::from_vertices(d.dim, d.n, d.coords.clone())
}
