//! Flows through a cylinder `cyl(A, h)`: side to side (`τ`) and bottom to
//! top (`φ`).

use std::time::Instant;

use serde::Serialize;

use crate::capacities::CapacityField;
use crate::error::{Error, Result};
use crate::geometry::{cyl, Cylinder, Hyperrectangle, UnitVector, GEOM_TOL};
use crate::lattice::LatticeGraph;
use crate::maxflow::{edge_capacities, max_flow, FlowProblem, FlowResult};

/// Which of the two cylinder variables to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CylinderFlow {
    Tau,
    Phi,
}

impl CylinderFlow {
    pub fn name(self) -> &'static str {
        match self {
            CylinderFlow::Tau => "tau",
            CylinderFlow::Phi => "phi",
        }
    }
}

/// Lattice picture of `cyl(A, h)` at mesh `n`.
#[derive(Debug, Clone)]
pub struct CylinderInstance {
    cylinder: Cylinder,
    n: u32,
    graph: LatticeGraph,
    side1: Vec<u32>,
    side2: Vec<u32>,
    top: Vec<u32>,
    bottom: Vec<u32>,
}

impl CylinderInstance {
    pub fn build(base: Hyperrectangle, h: f64, n: u32) -> Result<Self> {
        let cylinder = cyl(base, h)?;
        let d = cylinder.dim();
        let scale = f64::from(n);
        let (lo, hi) = cylinder.bounding_box();
        let lo: Vec<i64> = lo
            .iter()
            .map(|x| (x * scale - 1e-9).floor() as i64)
            .collect();
        let hi: Vec<i64> = hi
            .iter()
            .map(|x| (x * scale + 1e-9).ceil() as i64)
            .collect();

        let mut coords = Vec::new();
        let mut z = lo.clone();
        let mut point = vec![0.0; d];
        'odometer: loop {
            for k in 0..d {
                point[k] = z[k] as f64 / scale;
            }
            if cylinder.contains(&point) {
                coords.extend_from_slice(&z);
            }
            for k in (0..d).rev() {
                if z[k] < hi[k] {
                    z[k] += 1;
                    continue 'odometer;
                }
                z[k] = lo[k];
            }
            break;
        }
        let graph = LatticeGraph::from_vertices(d, n, coords);
        if graph.edge_count() == 0 {
            return Err(Error::EmptyInstance);
        }

        let (top_face, bottom_face) = (cylinder.top(), cylinder.bottom());
        let (mut side1, mut side2, mut top, mut bottom) = (vec![], vec![], vec![], vec![]);
        let mut y = vec![0i64; d];
        let mut yp = vec![0.0; d];
        for v in 0..graph.vertex_count() as u32 {
            let x = graph.vertex(v);
            let xp: Vec<f64> = x.iter().map(|&c| c as f64 / scale).collect();
            let (mut exits, mut hits_top, mut hits_bottom) = (false, false, false);
            for k in 0..d {
                for step in [-1, 1] {
                    y.copy_from_slice(x);
                    y[k] += step;
                    if graph.index_of(&y).is_some() {
                        continue;
                    }
                    exits = true;
                    for (p, &c) in yp.iter_mut().zip(&y) {
                        *p = c as f64 / scale;
                    }
                    hits_top |= top_face.intersects_segment(&xp, &yp);
                    hits_bottom |= bottom_face.intersects_segment(&xp, &yp);
                }
            }
            if exits {
                let height = cylinder.height_of(&xp);
                if height > GEOM_TOL {
                    side1.push(v);
                } else if height < -GEOM_TOL {
                    side2.push(v);
                }
            }
            if hits_top {
                top.push(v);
            }
            if hits_bottom {
                bottom.push(v);
            }
        }
        Ok(CylinderInstance {
            cylinder,
            n,
            graph,
            side1,
            side2,
            top,
            bottom,
        })
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cylinder
    }

    pub fn mesh(&self) -> u32 {
        self.n
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    /// `A₁ʰ`: boundary vertices on the side `v` points to.
    pub fn side1(&self) -> &[u32] {
        &self.side1
    }

    /// `A₂ʰ`.
    pub fn side2(&self) -> &[u32] {
        &self.side2
    }

    /// `T(A, h)`.
    pub fn top(&self) -> &[u32] {
        &self.top
    }

    /// `B(A, h)`.
    pub fn bottom(&self) -> &[u32] {
        &self.bottom
    }

    /// Source and sink sets of the requested variable.
    pub fn terminals(&self, which: CylinderFlow) -> (&[u32], &[u32]) {
        match which {
            CylinderFlow::Tau => (&self.side1, &self.side2),
            CylinderFlow::Phi => (&self.bottom, &self.top),
        }
    }

    /// Solver reusable across capacity fields.
    pub fn problem(&self, which: CylinderFlow) -> Result<FlowProblem<'_>> {
        let (s, t) = self.terminals(which);
        FlowProblem::new(&self.graph, s, t)
    }

    pub fn solve(&self, which: CylinderFlow, field: &CapacityField) -> Result<FlowResult> {
        let (s, t) = self.terminals(which);
        max_flow(&self.graph, s, t, field)
    }

    /// `τ(A, h)` for the given field.
    pub fn tau(&self, field: &CapacityField) -> Result<FlowResult> {
        self.solve(CylinderFlow::Tau, field)
    }

    /// `φ(A, h)` for the given field.
    pub fn phi(&self, field: &CapacityField) -> Result<FlowResult> {
        self.solve(CylinderFlow::Phi, field)
    }

    pub fn capacities(&self, field: &CapacityField) -> Vec<u64> {
        edge_capacities(&self.graph, field)
    }
}

/// `τ_n(A, h)` in real units.
pub fn tau(base: Hyperrectangle, h: f64, n: u32, field: &CapacityField) -> Result<f64> {
    Ok(CylinderInstance::build(base, h, n)?
        .tau(field)?
        .value_real())
}

/// `φ_n(A, h)` in real units.
pub fn phi_cyl(base: Hyperrectangle, h: f64, n: u32, field: &CapacityField) -> Result<f64> {
    Ok(CylinderInstance::build(base, h, n)?
        .phi(field)?
        .value_real())
}

/// One CSV row per cylinder solve.
#[derive(Debug, Clone, Serialize)]
pub struct CylinderRow {
    pub direction: Vec<f64>,
    pub area: f64,
    pub h: f64,
    pub n: u32,
    pub seed: u64,
    pub kind: CylinderFlow,
    pub value: f64,
    pub cut_size: usize,
    pub millis: f64,
}

impl CylinderRow {
    pub const HEADER: &'static str = "direction,area,h,n,seed,tau_or_phi,value,cut_size,millis";

    pub fn to_csv(&self) -> String {
        let dir: Vec<String> = self.direction.iter().map(|x| format!("{x}")).collect();
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            dir.join(" "),
            self.area,
            self.h,
            self.n,
            self.seed,
            self.kind.name(),
            self.value,
            self.cut_size,
            self.millis
        )
    }
}

/// Solves and records a CSV row.
pub fn solve_row(
    instance: &CylinderInstance,
    which: CylinderFlow,
    field: &CapacityField,
) -> Result<CylinderRow> {
    let start = Instant::now();
    let result = instance.solve(which, field)?;
    let cylinder = instance.cylinder();
    Ok(CylinderRow {
        direction: cylinder.normal().as_slice().to_vec(),
        area: cylinder.base.area(),
        h: cylinder.half_height,
        n: instance.mesh(),
        seed: field.seed,
        kind: which,
        value: result.value_real(),
        cut_size: result.cut_size(),
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Unit-side square base with one corner at the origin, orthogonal to `v`.
pub fn unit_base(v: &UnitVector) -> Result<Hyperrectangle> {
    Hyperrectangle::square_from_corner(&vec![0.0; v.dim()], v, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacities::{quantize, CapacityLaw, LatticeIsometry};

    fn constant(a: f64) -> CapacityField {
        CapacityField::new(CapacityLaw::Constant { a }, 1)
    }

    /// `[0, len] × {0}` with normal `(0, 1)`.
    fn flat_base(len: f64) -> Hyperrectangle {
        Hyperrectangle::new(
            vec![0.5 * len, 0.0],
            vec![UnitVector::axis(2, 0)],
            vec![len],
            UnitVector::axis(2, 1),
        )
        .unwrap()
    }

    fn coords_of(inst: &CylinderInstance, set: &[u32]) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = set
            .iter()
            .map(|&v| inst.graph().vertex(v).to_vec())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn axis_instance_sets() {
        let inst = CylinderInstance::build(flat_base(1.0), 0.5, 4).unwrap();
        let mut verts: Vec<Vec<i64>> = (0..inst.graph().vertex_count() as u32)
            .map(|v| inst.graph().vertex(v).to_vec())
            .collect();
        verts.sort();
        let mut expected = Vec::new();
        for x in 0..=4 {
            for y in -2..=2 {
                expected.push(vec![x, y]);
            }
        }
        assert_eq!(verts, expected);
        let row = |y: i64| (0..=4).map(|x| vec![x, y]).collect::<Vec<_>>();
        assert_eq!(coords_of(&inst, inst.bottom()), row(-2));
        assert_eq!(coords_of(&inst, inst.top()), row(2));
        // Upper boundary: the top row plus the two side vertices at y = 1.
        let mut s1 = row(2);
        s1.extend([vec![0, 1], vec![4, 1]]);
        s1.sort();
        assert_eq!(coords_of(&inst, inst.side1()), s1);
        assert_eq!(inst.side1().len(), inst.side2().len());
    }

    /// Vertex enumeration against a direct scan with the two-inequality test.
    #[test]
    fn tilted_vertices_match_scan() {
        let v = UnitVector::normalize(&[1.0, 1.0]).unwrap();
        let base = unit_base(&v).unwrap();
        for n in 1..=12u32 {
            let Ok(inst) = CylinderInstance::build(base.clone(), 0.5, n) else {
                assert!(n < 4);
                continue;
            };
            let c = cyl(base.clone(), 0.5).unwrap();
            let mut scan = Vec::new();
            let r = 3 * n as i64;
            for x in -r..=r {
                for y in -r..=r {
                    let p = [x as f64 / n as f64, y as f64 / n as f64];
                    let rel = [p[0] - base.center[0], p[1] - base.center[1]];
                    let along = rel[0] * v.as_slice()[0] + rel[1] * v.as_slice()[1];
                    let u = &base.frame[0];
                    let across = rel[0] * u.as_slice()[0] + rel[1] * u.as_slice()[1];
                    if along.abs() <= 0.5 + 1e-12 && across.abs() <= 0.5 + 1e-12 {
                        assert!(c.contains(&p));
                        scan.push(vec![x, y]);
                    }
                }
            }
            let mut verts: Vec<Vec<i64>> = (0..inst.graph().vertex_count() as u32)
                .map(|v| inst.graph().vertex(v).to_vec())
                .collect();
            verts.sort();
            assert_eq!(verts, scan, "n = {n}");
            if n >= 4 {
                assert!(!inst.side1().is_empty() && !inst.side2().is_empty());
                assert!(!inst.top().is_empty() && !inst.bottom().is_empty());
            }
        }
    }

    #[test]
    fn sides_are_disjoint_and_off_the_hyperplane() {
        let v = UnitVector::planar(0.3);
        let inst = CylinderInstance::build(unit_base(&v).unwrap(), 0.4, 9).unwrap();
        for &a in inst.side1() {
            assert!(!inst.side2().contains(&a));
        }
        let heights = |set: &[u32]| -> Vec<f64> {
            set.iter()
                .map(|&i| {
                    let p: Vec<f64> = inst
                        .graph()
                        .vertex(i)
                        .iter()
                        .map(|&c| c as f64 / 9.0)
                        .collect();
                    inst.cylinder().height_of(&p)
                })
                .collect()
        };
        assert!(heights(inst.side1()).iter().all(|&h| h > 0.0));
        assert!(heights(inst.side2()).iter().all(|&h| h < 0.0));
    }

    #[test]
    fn constant_law_values() {
        for n in [2u32, 4, 8, 16] {
            let inst = CylinderInstance::build(flat_base(1.0), 0.5, n).unwrap();
            assert_eq!(
                inst.tau(&constant(1.0)).unwrap().value,
                quantize(f64::from(n + 1))
            );
            assert_eq!(
                inst.phi(&constant(1.0)).unwrap().value,
                quantize(f64::from(n + 1))
            );
        }
        assert_eq!(tau(flat_base(1.0), 0.5, 4, &constant(0.0)).unwrap(), 0.0);
        assert_eq!(
            phi_cyl(flat_base(1.0), 0.5, 4, &constant(0.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn height_doubling_keeps_tau() {
        for n in 2..=10u32 {
            let a = tau(flat_base(1.0), 0.5, n, &constant(1.0)).unwrap();
            let b = tau(flat_base(1.0), 1.0, n, &constant(1.0)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rotation_by_lattice_symmetry() {
        // (x, y) ↦ (−y, x) carries the e₁ instance onto the e₂ instance.
        let rot = LatticeIsometry {
            perm: vec![1, 0],
            signs: vec![1, -1],
        };
        let e1 = unit_base(&UnitVector::axis(2, 0)).unwrap();
        let e2 = unit_base(&UnitVector::axis(2, 1)).unwrap();
        let law = CapacityLaw::Bernoulli { p: 0.6, a: 1.0 };
        for n in [3u32, 6, 9] {
            let i1 = CylinderInstance::build(e1.clone(), 0.5, n).unwrap();
            let i2 = CylinderInstance::build(e2.clone(), 0.5, n).unwrap();
            for seed in 0..20 {
                let f = CapacityField::new(law, seed);
                let g = f.relabelled(rot.inverse());
                assert_eq!(i1.tau(&f).unwrap().value, i2.tau(&g).unwrap().value);
                assert_eq!(i1.phi(&f).unwrap().value, i2.phi(&g).unwrap().value);
            }
        }
    }

    #[test]
    fn tau_monotone_in_capacities() {
        let inst =
            CylinderInstance::build(unit_base(&UnitVector::planar(0.4)).unwrap(), 0.5, 7).unwrap();
        let mut problem = inst.problem(CylinderFlow::Tau).unwrap();
        let field = CapacityField::new(CapacityLaw::UniformInt { lo: 0, hi: 3 }, 9);
        let caps = inst.capacities(&field);
        let base = problem.solve_summary(&caps).unwrap().0;
        for i in 0..100usize {
            let e = (i * 7919) % caps.len();
            let mut lower = caps.clone();
            lower[e] /= 2;
            assert!(problem.solve_summary(&lower).unwrap().0 <= base);
        }
    }

    #[test]
    fn halves_bound_the_whole() {
        for n in [4u32, 8, 12] {
            let whole = tau(flat_base(1.0), 0.5, n, &constant(1.0)).unwrap();
            let left = tau(flat_base(0.5), 0.5, n, &constant(1.0)).unwrap();
            let right_base = Hyperrectangle::new(
                vec![0.75, 0.0],
                vec![UnitVector::axis(2, 0)],
                vec![0.5],
                UnitVector::axis(2, 1),
            )
            .unwrap();
            let right = tau(right_base, 0.5, n, &constant(1.0)).unwrap();
            assert!(whole <= left + right);
        }
    }

    #[test]
    fn straight_box_phi_close_to_tau() {
        let base = flat_base(2.0);
        let t = tau(base.clone(), 0.5, 16, &constant(1.0)).unwrap();
        let p = phi_cyl(base, 0.5, 16, &constant(1.0)).unwrap();
        assert!(p >= 0.0);
        assert!((p - t).abs() <= 0.1 * t);
    }

    #[test]
    fn thin_instance_errors() {
        let err = CylinderInstance::build(flat_base(0.5), 0.01, 1).unwrap_err();
        assert_eq!(err, Error::EmptyInstance);
        assert_eq!(
            CylinderInstance::build(flat_base(1.0), 0.0, 4).unwrap_err(),
            Error::NonpositiveHeight(0.0)
        );
    }

    #[test]
    fn csv_row() {
        let inst = CylinderInstance::build(flat_base(1.0), 0.5, 4).unwrap();
        let row = solve_row(&inst, CylinderFlow::Tau, &constant(1.0)).unwrap();
        let line = row.to_csv();
        assert!(line.starts_with("0 1,1,0.5,4,1,tau,5,5,"), "{line}");
    }
}
