//! Monte Carlo estimates of the flow constant `ν(v)`, its homogeneous
//! extension `ν₀`, and the structural checks it should pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacities::{derive_seed, law_checks, CapacityField, CapacityLaw};
use crate::cylinder::{CylinderFlow, CylinderInstance};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Hyperrectangle, UnitVector};
use crate::maxflow::edge_capacities;
use crate::stats::{mean_stderr, slope, wilson, Wilson, Z95};

/// Replica count below which estimates carry a warning.
pub const MIN_REPLICAS: usize = 30;

/// Largest admissible angle between a queried direction and the nearest
/// table direction of its interpolation cone.
pub const MAX_INTERPOLATION_ANGLE: f64 = 30.0 * std::f64::consts::PI / 180.0;

/// Sampling plan for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuPlan {
    pub meshes: Vec<u32>,
    pub replicas: usize,
    /// Side length of the square base `A`.
    #[serde(default = "default_side")]
    pub side: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    pub seed: u64,
}

fn default_side() -> f64 {
    1.0
}

fn default_h() -> f64 {
    0.5
}

impl NuPlan {
    pub fn new(meshes: Vec<u32>, replicas: usize, seed: u64) -> Self {
        NuPlan {
            meshes,
            replicas,
            side: default_side(),
            h: default_h(),
            seed,
        }
    }

    /// Base hyperrectangle for direction `v`: a square with one corner at
    /// the origin.
    pub fn base(&self, v: &UnitVector) -> Result<Hyperrectangle> {
        Hyperrectangle::square_from_corner(&vec![0.0; v.dim()], v, self.side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStat {
    pub n: u32,
    pub replicas: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    pub v: Vec<f64>,
    pub nu_hat: f64,
    pub stderr: f64,
    pub meshes: Vec<MeshStat>,
    /// Slope of the per-mesh means against `1/n`, with two meshes or more.
    pub trend_slope: Option<f64>,
    pub replicas: usize,
    #[serde(rename = "A")]
    pub area: f64,
    pub h: f64,
    pub law: CapacityLaw,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Sub-seed tag for a direction.
fn direction_tag(v: &UnitVector) -> u64 {
    v.as_slice()
        .iter()
        .fold(0u64, |acc, x| acc.rotate_left(17) ^ x.to_bits())
}

/// Rescaled samples `τ_n / (n^{d−1} ℋ^{d−1}(A))`, one per replica.
pub fn tau_samples(v: &UnitVector, law: &CapacityLaw, plan: &NuPlan, n: u32) -> Result<Vec<f64>> {
    let instance = CylinderInstance::build(plan.base(v)?, plan.h, n)?;
    let area = instance.cylinder().base.area();
    let scale = f64::from(n).powi(v.dim() as i32 - 1) * area;
    let problem = instance.problem(CylinderFlow::Tau)?;
    let tag = direction_tag(v);
    (0..plan.replicas as u64)
        .into_par_iter()
        .map_init(
            || problem.clone(),
            |p, r| {
                let field =
                    CapacityField::new(*law, derive_seed(plan.seed, &[tag, u64::from(n), r]));
                let caps = edge_capacities(instance.graph(), &field);
                p.solve_summary(&caps)
                    .map(|(q, _)| crate::capacities::dequantize(q) / scale)
            },
        )
        .collect()
}

/// `ν̂(v)`: largest-mesh mean of the rescaled cylinder flow.
pub fn estimate_nu(v: &UnitVector, law: &CapacityLaw, plan: &NuPlan) -> Result<NuEstimate> {
    law.validate()?;
    let mut meshes = plan.meshes.clone();
    meshes.sort_unstable();
    meshes.dedup();
    if meshes.is_empty() {
        return Err(Error::InvalidDomain("no meshes requested".into()));
    }
    let mut warnings = Vec::new();
    if plan.replicas < MIN_REPLICAS {
        warnings.push(format!(
            "only {} replicas per mesh (fewer than {MIN_REPLICAS})",
            plan.replicas
        ));
    }
    let report = law_checks(law, v.dim());
    if report.subcritical == Some(false) {
        warnings.push("mass at zero reaches 1 - p_c(d): nu is expected to vanish".into());
    }
    let mut stats = Vec::with_capacity(meshes.len());
    for &n in &meshes {
        let samples = tau_samples(v, law, plan, n)?;
        let (mean, stderr) = mean_stderr(&samples);
        stats.push(MeshStat {
            n,
            replicas: samples.len(),
            mean,
            stderr,
        });
    }
    let inv: Vec<f64> = stats.iter().map(|s| 1.0 / f64::from(s.n)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let trend_slope = (stats.len() >= 2).then(|| slope(&inv, &means).0);
    let last = stats.last().expect("nonempty meshes");
    Ok(NuEstimate {
        v: v.as_slice().to_vec(),
        nu_hat: last.mean,
        stderr: last.stderr,
        trend_slope,
        replicas: plan.replicas,
        area: plan.side.powi(v.dim() as i32 - 1),
        h: plan.h,
        law: *law,
        seed: plan.seed,
        warnings,
        meshes: stats,
    })
}

/// Direction grid: 36 directions at 10° steps in the plane, the 26
/// normalized nonzero points of `{−1, 0, 1}³` in space, signed axes beyond.
pub fn direction_grid(d: usize) -> Vec<UnitVector> {
    match d {
        2 => (0..36)
            .map(|k| match k {
                // Exact axes, so boundary normals hit the grid.
                0 => UnitVector::axis(2, 0),
                9 => UnitVector::axis(2, 1),
                18 => UnitVector::axis(2, 0).neg(),
                27 => UnitVector::axis(2, 1).neg(),
                _ => UnitVector::planar(f64::from(k) * std::f64::consts::PI / 18.0),
            })
            .collect(),
        3 => {
            let mut out = Vec::new();
            for x in -1i32..=1 {
                for y in -1i32..=1 {
                    for z in -1i32..=1 {
                        if (x, y, z) != (0, 0, 0) {
                            let w = [f64::from(x), f64::from(y), f64::from(z)];
                            out.push(UnitVector::normalize(&w).expect("nonzero"));
                        }
                    }
                }
            }
            out
        }
        _ => (0..d)
            .flat_map(|k| {
                let e = UnitVector::axis(d, k);
                [e.clone(), e.neg()]
            })
            .collect(),
    }
}

/// Interpolated value of `ν` at a direction, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuValue {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuTable {
    pub entries: Vec<NuEstimate>,
}

impl NuTable {
    pub fn new(entries: Vec<NuEstimate>) -> Result<Self> {
        let d = entries
            .first()
            .map(|e| e.v.len())
            .ok_or(Error::EmptyInstance)?;
        for e in &entries {
            if e.v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: e.v.len(),
                });
            }
            UnitVector::new(e.v.clone())?;
        }
        Ok(NuTable { entries })
    }

    /// Estimates every direction of `directions` with the same plan.
    pub fn estimate(directions: &[UnitVector], law: &CapacityLaw, plan: &NuPlan) -> Result<Self> {
        let entries = directions
            .iter()
            .map(|v| estimate_nu(v, law, plan))
            .collect::<Result<Vec<_>>>()?;
        NuTable::new(entries)
    }

    /// Table whose value at each direction is `f(v)` with zero error.
    pub fn from_fn(directions: &[UnitVector], f: impl Fn(&[f64]) -> f64) -> Self {
        let entries = directions
            .iter()
            .map(|v| NuEstimate {
                v: v.as_slice().to_vec(),
                nu_hat: f(v.as_slice()),
                stderr: 0.0,
                meshes: Vec::new(),
                trend_slope: None,
                replicas: 0,
                area: 1.0,
                h: 0.5,
                law: CapacityLaw::Constant { a: 0.0 },
                seed: 0,
                warnings: Vec::new(),
            })
            .collect();
        NuTable { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries[0].v.len()
    }

    /// Same table with every value and error multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        for e in &mut t.entries {
            e.nu_hat *= factor;
            e.stderr *= factor;
        }
        t
    }

    pub fn nu_min(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.nu_hat)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nu_max(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.nu_hat)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entry with the largest estimate.
    pub fn max_entry(&self) -> &NuEstimate {
        self.entries
            .iter()
            .max_by(|a, b| a.nu_hat.total_cmp(&b.nu_hat))
            .expect("nonempty table")
    }

    /// `ν` at unit direction `u`, interpolated linearly inside the cone of
    /// `d` table directions that contains `u` and lies on the convex hull of
    /// the table directions (the cone minimizing `Σ aᵢ`).
    pub fn lookup(&self, u: &[f64]) -> Result<NuValue> {
        let d = self.dim();
        if u.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: u.len(),
            });
        }
        let dirs: Vec<&[f64]> = self.entries.iter().map(|e| e.v.as_slice()).collect();
        // Exact hits skip the linear solve.
        if let Some(i) = dirs.iter().position(|v| *v == u) {
            let e = &self.entries[i];
            return Ok(NuValue {
                value: e.nu_hat,
                stderr: e.stderr,
            });
        }
        let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
        let mut subset: Vec<usize> = (0..d).collect();
        let m = dirs.len();
        if m >= d {
            loop {
                if let Some(a) = cone_coefficients(&dirs, &subset, u) {
                    let total: f64 = a.iter().sum();
                    if best.as_ref().is_none_or(|(b, _)| total < b - 1e-12) {
                        best = Some((total, subset.iter().copied().zip(a).collect()));
                    }
                }
                if !next_subset(&mut subset, m) {
                    break;
                }
            }
        }
        let (_, combo) = best.ok_or_else(|| Error::MissingDirection(u.to_vec()))?;
        let nearest = combo
            .iter()
            .map(|&(i, _)| dot(dirs[i], u).clamp(-1.0, 1.0).acos())
            .fold(f64::INFINITY, f64::min);
        if nearest > MAX_INTERPOLATION_ANGLE {
            return Err(Error::MissingDirection(u.to_vec()));
        }
        let value = combo.iter().map(|&(i, a)| a * self.entries[i].nu_hat).sum();
        let var: f64 = combo
            .iter()
            .map(|&(i, a)| (a * self.entries[i].stderr).powi(2))
            .sum();
        Ok(NuValue {
            value,
            stderr: var.sqrt(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let entries: Vec<NuEstimate> =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        NuTable::new(entries)
    }
}

/// Nonnegative coefficients `a` with `Σ aᵢ dirs[subset[i]] = u`, if any.
fn cone_coefficients(dirs: &[&[f64]], subset: &[usize], u: &[f64]) -> Option<Vec<f64>> {
    let d = u.len();
    // Augmented matrix with the chosen directions as columns.
    let mut m: Vec<Vec<f64>> = (0..d)
        .map(|r| {
            let mut row: Vec<f64> = subset.iter().map(|&i| dirs[i][r]).collect();
            row.push(u[r]);
            row
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..d {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot_row = m[col].clone();
                for (x, p) in m[r][col..=d].iter_mut().zip(&pivot_row[col..=d]) {
                    *x -= f * p;
                }
            }
        }
    }
    let a: Vec<f64> = (0..d).map(|r| m[r][d] / m[r][r]).collect();
    if a.iter().all(|&x| x >= -1e-12) {
        Some(a.into_iter().map(|x| x.max(0.0)).collect())
    } else {
        None
    }
}

/// Advances to the next `k`-subset of `0..m` in lexicographic order.
fn next_subset(s: &mut [usize], m: usize) -> bool {
    let k = s.len();
    for i in (0..k).rev() {
        if s[i] < m - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `ν₀(w) = |w|₂ ν(w/|w|₂)`, `ν₀(0) = 0`.
pub fn nu0(w: &[f64], table: &NuTable) -> Result<f64> {
    Ok(nu0_with_error(w, table)?.value)
}

pub fn nu0_with_error(w: &[f64], table: &NuTable) -> Result<NuValue> {
    let r = norm(w);
    if r == 0.0 {
        return Ok(NuValue {
            value: 0.0,
            stderr: 0.0,
        });
    }
    let u: Vec<f64> = w.iter().map(|x| x / r).collect();
    let at = table.lookup(&u)?;
    Ok(NuValue {
        value: r * at.value,
        stderr: r * at.stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleReport {
    /// `ℋ¹([AB]) ν(v_C)`.
    pub lhs: f64,
    /// `ℋ¹([AC]) ν(v_B) + ℋ¹([BC]) ν(v_A)`.
    pub rhs: f64,
    /// Three combined standard errors.
    pub margin: f64,
    pub violated: bool,
}

/// Exterior unit normal to side `[PQ]` of triangle `PQR`, in its plane.
fn exterior_normal(p: &[f64], q: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    let side: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    let to_r: Vec<f64> = r.iter().zip(p).map(|(a, b)| a - b).collect();
    let s2 = dot(&side, &side);
    if s2 == 0.0 {
        return Err(Error::DegenerateTriangle);
    }
    let t = dot(&to_r, &side) / s2;
    let perp: Vec<f64> = to_r.iter().zip(&side).map(|(a, b)| a - t * b).collect();
    let len = norm(&perp);
    if len <= 1e-12 * s2.sqrt().max(norm(&to_r)) {
        return Err(Error::DegenerateTriangle);
    }
    Ok(perp.iter().map(|x| -x / len).collect())
}

/// Weak triangle inequality for triangle `ABC`, flagged only beyond three
/// combined standard errors.
pub fn check_weak_triangle(
    table: &NuTable,
    a: &[f64],
    b: &[f64],
    c: &[f64],
) -> Result<TriangleReport> {
    let dist =
        |p: &[f64], q: &[f64]| norm(&p.iter().zip(q).map(|(x, y)| x - y).collect::<Vec<_>>());
    let v_c = table.lookup(&exterior_normal(a, b, c)?)?;
    let v_b = table.lookup(&exterior_normal(a, c, b)?)?;
    let v_a = table.lookup(&exterior_normal(b, c, a)?)?;
    let (ab, ac, bc) = (dist(a, b), dist(a, c), dist(b, c));
    let lhs = ab * v_c.value;
    let rhs = ac * v_b.value + bc * v_a.value;
    let margin = 3.0
        * ((ab * v_c.stderr).powi(2) + (ac * v_b.stderr).powi(2) + (bc * v_a.stderr).powi(2))
            .sqrt();
    Ok(TriangleReport {
        lhs,
        rhs,
        margin,
        violated: lhs > rhs + margin + 1e-12 * (lhs + rhs),
    })
}

/// Lower tail of `τ_n` at one mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    pub n: u32,
    pub replicas: u64,
    pub hits: u64,
    pub wilson: Wilson,
    /// `−ln p̂ / n^{d−1}`; absent without hits.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub threshold: f64,
    pub points: Vec<TailPoint>,
    /// Meshes at which no replica fell in the tail.
    pub zero_hits: Vec<u32>,
}

/// Empirical `P[τ_n / (n^{d−1} ℋ^{d−1}(A)) ≤ ν̂ − ε]` per mesh.
pub fn tau_lower_tail(
    v: &UnitVector,
    law: &CapacityLaw,
    plan: &NuPlan,
    nu_hat: f64,
    eps: f64,
) -> Result<TailReport> {
    let threshold = nu_hat - eps;
    let mut points = Vec::new();
    let mut zero_hits = Vec::new();
    for &n in &plan.meshes {
        let samples = tau_samples(v, law, plan, n)?;
        let hits = samples.iter().filter(|&&x| x <= threshold + 1e-12).count() as u64;
        let trials = samples.len() as u64;
        let w = wilson(hits, trials, Z95);
        let rate = (hits > 0).then(|| -w.p_hat.ln() / f64::from(n).powi(v.dim() as i32 - 1));
        if hits == 0 {
            zero_hits.push(n);
        }
        points.push(TailPoint {
            n,
            replicas: trials,
            hits,
            wilson: w,
            rate,
        });
    }
    Ok(TailReport {
        threshold,
        points,
        zero_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(p: f64) -> CapacityLaw {
        CapacityLaw::Bernoulli { p, a: 1.0 }
    }

    fn l1_table(d: usize) -> NuTable {
        NuTable::from_fn(&direction_grid(d), |v| v.iter().map(|x| x.abs()).sum())
    }

    #[test]
    fn constant_law_exact_per_mesh_values() {
        let plan = NuPlan::new(vec![4, 8], 3, 5);
        let est = estimate_nu(
            &UnitVector::axis(2, 0),
            &CapacityLaw::Constant { a: 1.0 },
            &plan,
        )
        .unwrap();
        assert_eq!(est.meshes[0].mean, 1.25);
        assert_eq!(est.meshes[1].mean, 1.125);
        assert_eq!(est.nu_hat, 1.125);
        assert_eq!(est.stderr, 0.0);
        // Means fall as 1 + 1/n, so the slope against 1/n is 1.
        assert!((est.trend_slope.unwrap() - 1.0).abs() < 1e-12);
        assert!(est.warnings.iter().any(|w| w.contains("replicas")));
    }

    #[test]
    fn zero_law_gives_zero() {
        let plan = NuPlan::new(vec![4], 30, 1);
        let est = estimate_nu(
            &UnitVector::planar(0.7),
            &CapacityLaw::Constant { a: 0.0 },
            &plan,
        )
        .unwrap();
        assert_eq!(est.nu_hat, 0.0);
    }

    #[test]
    fn linear_in_constant_value() {
        let plan = NuPlan::new(vec![5], 30, 2);
        let v = UnitVector::planar(0.35);
        let one = estimate_nu(&v, &CapacityLaw::Constant { a: 1.0 }, &plan).unwrap();
        let two = estimate_nu(&v, &CapacityLaw::Constant { a: 2.0 }, &plan).unwrap();
        assert_eq!(two.nu_hat, 2.0 * one.nu_hat);
    }

    #[test]
    fn axis_directions_agree() {
        let plan = NuPlan::new(vec![6], 60, 3);
        let law = bern(0.6);
        let ests: Vec<NuEstimate> = (0..2)
            .flat_map(|k| {
                let e = UnitVector::axis(2, k);
                [e.clone(), e.neg()]
            })
            .map(|v| estimate_nu(&v, &law, &plan).unwrap())
            .collect();
        for a in &ests {
            for b in &ests {
                let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
                assert!((a.nu_hat - b.nu_hat).abs() <= 3.0 * se + 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let plan = NuPlan::new(vec![5], 40, 8);
        let v = UnitVector::planar(0.2);
        let a = estimate_nu(&v, &bern(0.6), &plan).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| estimate_nu(&v, &bern(0.6), &plan).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn grids() {
        assert_eq!(direction_grid(2).len(), 36);
        assert_eq!(direction_grid(3).len(), 26);
        for v in direction_grid(3) {
            assert!((norm(v.as_slice()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn lookup_reproduces_linear_data() {
        // A linear function on one cone is reproduced exactly inside it.
        let t = NuTable::from_fn(&direction_grid(2), |v| 2.0 * v[0] + v[1]);
        let u = UnitVector::planar(0.05);
        let got = t.lookup(u.as_slice()).unwrap().value;
        assert!((got - (2.0 * u.as_slice()[0] + u.as_slice()[1])).abs() < 1e-12);
        let t3 = NuTable::from_fn(&direction_grid(3), |v| v[0] + 3.0 * v[1] + 2.0 * v[2]);
        let w = UnitVector::normalize(&[0.9, 0.3, 0.1]).unwrap();
        let expect = w.as_slice()[0] + 3.0 * w.as_slice()[1] + 2.0 * w.as_slice()[2];
        assert!((t3.lookup(w.as_slice()).unwrap().value - expect).abs() < 1e-12);
    }

    #[test]
    fn lookup_outside_coverage() {
        let t = NuTable::from_fn(&[UnitVector::axis(2, 0), UnitVector::axis(2, 1)], |_| 1.0);
        assert!(matches!(
            t.lookup(&[-1.0, 0.0]),
            Err(Error::MissingDirection(_))
        ));
        // Inside the quadrant but too far from both directions.
        let diag = [0.5f64.sqrt(), 0.5f64.sqrt()];
        assert!(matches!(t.lookup(&diag), Err(Error::MissingDirection(_))));
    }

    #[test]
    fn nu0_basics() {
        let t = l1_table(2);
        assert_eq!(nu0(&[0.0, 0.0], &t).unwrap(), 0.0);
        for k in 0..50 {
            let th = 0.37 * f64::from(k);
            let w = [2.3 * th.cos(), 2.3 * th.sin()];
            let w2 = [2.0 * w[0], 2.0 * w[1]];
            assert_eq!(nu0(&w2, &t).unwrap(), 2.0 * nu0(&w, &t).unwrap());
        }
        // The L¹ norm is linear on each quadrant, so interpolation is exact.
        let w = [0.3, -1.1];
        assert!((nu0(&w, &t).unwrap() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn nu0_midpoint_convexity_for_norm_data() {
        let t = l1_table(3);
        let mut s = 1u64;
        let mut next = || {
            s = crate::capacities::mix64(s);
            crate::capacities::unit_interval(s) * 2.0 - 1.0
        };
        for _ in 0..200 {
            let u = [next(), next(), next()];
            let w = [next(), next(), next()];
            let mid: Vec<f64> = u.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = nu0(&mid, &t).unwrap();
            let rhs = 0.5 * (nu0(&u, &t).unwrap() + nu0(&w, &t).unwrap());
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn triangle_checks() {
        let t = l1_table(2);
        let h = 3f64.sqrt() / 2.0;
        let r = check_weak_triangle(&t, &[0.0, 0.0], &[1.0, 0.0], &[0.5, h]).unwrap();
        assert!(!r.violated);
        // Side AB has exterior normal (0, −1); the others ±(√3/2, 1/2).
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!((r.rhs - 2.0 * (h + 0.5)).abs() < 1e-12);
        assert_eq!(
            check_weak_triangle(&t, &[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]).unwrap_err(),
            Error::DegenerateTriangle
        );
    }

    #[test]
    fn triangle_in_space_uses_the_plane_normals() {
        let t = l1_table(3);
        let r =
            check_weak_triangle(&t, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        // Right triangle in the xy-plane: v_C = (0,−1,0), v_B = (−1,0,0),
        // v_A = (1,1,0)/√2.
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!((r.rhs - (1.0 + 2f64.sqrt() * 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn constant_tail_is_empty() {
        let plan = NuPlan::new(vec![4, 6], 30, 1);
        let law = CapacityLaw::Constant { a: 1.0 };
        let v = UnitVector::axis(2, 0);
        let est = estimate_nu(&v, &law, &plan).unwrap();
        let tail = tau_lower_tail(&v, &law, &plan, est.nu_hat, 0.01).unwrap();
        assert!(tail.points.iter().all(|p| p.hits == 0 && p.rate.is_none()));
        assert_eq!(tail.zero_hits, vec![4, 6]);
    }

    #[test]
    fn table_json_round_trip() {
        let plan = NuPlan::new(vec![3], 30, 1);
        let t = NuTable::estimate(&[UnitVector::axis(2, 0)], &bern(0.6), &plan).unwrap();
        let back = NuTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        for key in [
            "v", "nu_hat", "stderr", "meshes", "replicas", "A", "h", "law", "seed",
        ] {
            assert!(v[0].get(key).is_some(), "{key}");
        }
    }
}
