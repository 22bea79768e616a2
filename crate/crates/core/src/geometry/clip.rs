//! Exact clipping of box domains by half-spaces.
//!
//! The measure of `box ∩ {w·x ≤ c}` is computed in exact rational arithmetic
//! by the divergence identity `m·V = Σ_faces ((p − q)·n_f) A_f` with the
//! reference point `q` on the cutting hyperplane, so the cap face drops out
//! and the recursion only visits axis-aligned faces.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::domain::{Domain, FaceTag};
use super::shapes::UnitVector;

/// Where a boundary piece of `F` sits relative to `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetClass {
    /// `∂F ∩ Ω`.
    Interior,
    /// On the sink set, as part of `∂(F ∩ Ω)`.
    Sink,
    /// On the source set, as part of `∂(Ω ∖ F)`.
    Source,
    /// On a part of `Γ` that carries no energy.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceFacet {
    pub area: f64,
    /// Exact measure when it is rational (axis-aligned pieces).
    #[serde(skip)]
    pub exact_area: Option<BigRational>,
    pub normal: Vec<f64>,
    pub class: FacetClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceOrigin {
    Empty,
    Full,
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

/// Polyhedral subset `F ⊆ Ω` with its boundary decomposed into classified
/// flat pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSet {
    pub dim: usize,
    pub origin: SurfaceOrigin,
    #[serde(skip)]
    pub volume: BigRational,
    #[serde(skip)]
    pub complement_volume: BigRational,
    pub facets: Vec<SurfaceFacet>,
}

impl SurfaceSet {
    /// `F = ∅`: the whole source set bounds `Ω ∖ F`.
    pub fn empty(domain: &Domain) -> Self {
        let facets = domain
            .facets_tagged(FaceTag::Source)
            .map(|f| {
                let a = f.area();
                SurfaceFacet {
                    area: to_f64(&a),
                    exact_area: Some(a),
                    normal: f.normal(),
                    class: FacetClass::Source,
                }
            })
            .collect();
        SurfaceSet {
            dim: domain.dim(),
            origin: SurfaceOrigin::Empty,
            volume: BigRational::zero(),
            complement_volume: domain.volume(),
            facets,
        }
    }

    /// `F = Ω`: every declared facet bounds `F`.
    pub fn full(domain: &Domain) -> Self {
        let facets = domain
            .facets()
            .iter()
            .map(|f| {
                let a = f.area();
                SurfaceFacet {
                    area: to_f64(&a),
                    exact_area: Some(a),
                    normal: f.normal(),
                    class: if f.tag == FaceTag::Sink {
                        FacetClass::Sink
                    } else {
                        FacetClass::Neutral
                    },
                }
            })
            .collect();
        SurfaceSet {
            dim: domain.dim(),
            origin: SurfaceOrigin::Full,
            volume: domain.volume(),
            complement_volume: BigRational::zero(),
            facets,
        }
    }

    /// Sum of the areas of the pieces in `class`.
    pub fn area_of(&self, class: FacetClass) -> f64 {
        self.facets
            .iter()
            .filter(|f| f.class == class)
            .map(|f| f.area)
            .sum()
    }

    /// Relative perimeter `𝒫(F, Ω)`: for a polyhedron, the area of `∂F ∩ Ω`.
    pub fn perimeter_in_domain(&self) -> f64 {
        self.area_of(FacetClass::Interior)
    }
}

/// `F = Ω ∩ {x·v ≤ c}` for a unit normal `v`.
///
/// The normal and offset are converted exactly to (dyadic) rationals, so the
/// volume bookkeeping stays exact; areas of tilted pieces are rounded to f64.
pub fn halfspace_clip(domain: &Domain, v: &UnitVector, c: f64) -> SurfaceSet {
    let w: Vec<BigRational> = v
        .as_slice()
        .iter()
        .map(|&x| BigRational::from_float(x).expect("finite normal"))
        .collect();
    let c_exact = BigRational::from_float(c).expect("finite offset");
    let mut set = halfspace_clip_exact(domain, &w, &c_exact);
    if let SurfaceOrigin::HalfSpace { normal, offset } = &mut set.origin {
        *normal = v.as_slice().to_vec();
        *offset = c;
    }
    set
}

/// `F = Ω ∩ {x·w ≤ c}` for any nonzero rational `w`.
pub fn halfspace_clip_exact(domain: &Domain, w: &[BigRational], c: &BigRational) -> SurfaceSet {
    let dim = domain.dim();
    assert_eq!(w.len(), dim, "normal dimension");
    assert!(w.iter().any(|x| !x.is_zero()), "normal must be nonzero");

    let neg_w: Vec<BigRational> = w.iter().map(|x| -x).collect();
    let neg_c = -c;
    let mut volume = BigRational::zero();
    let mut complement_volume = BigRational::zero();
    let mut cap_area = 0.0;
    for b in domain.boxes() {
        let inside = clipped_measure(&b.lo, &b.hi, w, c);
        let outside = clipped_measure(&b.lo, &b.hi, &neg_w, &neg_c);
        if !inside.is_zero() && !outside.is_zero() {
            cap_area += cap_measure(&b.lo, &b.hi, w, c);
        }
        volume += inside;
        complement_volume += outside;
    }
    if volume.is_zero() {
        return SurfaceSet::empty(domain);
    }
    if complement_volume.is_zero() {
        return SurfaceSet::full(domain);
    }

    let wf: Vec<f64> = w.iter().map(to_f64).collect();
    let wn = wf.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut facets = vec![SurfaceFacet {
        area: cap_area,
        exact_area: None,
        normal: wf.iter().map(|x| x / wn).collect(),
        class: FacetClass::Interior,
    }];

    for f in domain.facets() {
        let total = f.area();
        let (sub_lo, sub_hi) = drop_axis(&f.lo, &f.hi, f.axis);
        let (sub_w, sub_c) = restrict(w, c, f.axis, f.offset());
        let inside = if sub_w.iter().all(Zero::is_zero) {
            // Facet parallel to the cutting plane: it lies wholly on one
            // side; when it lies in the plane, the body side decides.
            let outward_dot = if f.upper { &w[f.axis] } else { &-&w[f.axis] };
            if sub_c.is_positive() || (sub_c.is_zero() && outward_dot.is_positive()) {
                total.clone()
            } else {
                BigRational::zero()
            }
        } else {
            clipped_measure(&sub_lo, &sub_hi, &sub_w, &sub_c)
        };
        let outside = &total - &inside;
        let normal = f.normal();
        if !inside.is_zero() {
            facets.push(SurfaceFacet {
                area: to_f64(&inside),
                exact_area: Some(inside),
                normal: normal.clone(),
                class: if f.tag == FaceTag::Sink {
                    FacetClass::Sink
                } else {
                    FacetClass::Neutral
                },
            });
        }
        if f.tag == FaceTag::Source && !outside.is_zero() {
            facets.push(SurfaceFacet {
                area: to_f64(&outside),
                exact_area: Some(outside),
                normal,
                class: FacetClass::Source,
            });
        }
    }

    SurfaceSet {
        dim,
        origin: SurfaceOrigin::HalfSpace {
            normal: facets[0].normal.clone(),
            offset: to_f64(c) / wn,
        },
        volume,
        complement_volume,
        facets,
    }
}

/// Exact `m`-dimensional measure of `[lo, hi] ∩ {w·x ≤ c}` for a
/// full-dimensional box in ℝᵐ.
pub fn clipped_measure(
    lo: &[BigRational],
    hi: &[BigRational],
    w: &[BigRational],
    c: &BigRational,
) -> BigRational {
    let m = lo.len();
    if m == 0 {
        return if c.is_negative() {
            BigRational::zero()
        } else {
            BigRational::from_integer(BigInt::from(1))
        };
    }
    if w.iter().all(Zero::is_zero) {
        return if c.is_negative() {
            BigRational::zero()
        } else {
            box_volume(lo, hi)
        };
    }
    if m == 1 {
        let cut = c / &w[0];
        let len = if w[0].is_positive() {
            cut.min(hi[0].clone()) - &lo[0]
        } else {
            hi[0].clone() - cut.max(lo[0].clone())
        };
        return len.max(BigRational::zero());
    }
    let w2: BigRational = w.iter().map(|x| x * x).sum();
    let mut acc = BigRational::zero();
    for k in 0..m {
        let q_k = c * &w[k] / &w2;
        let (sub_lo, sub_hi) = drop_axis(lo, hi, k);
        for (bound, sign) in [(&hi[k], 1), (&lo[k], -1)] {
            let (sub_w, sub_c) = restrict(w, c, k, bound);
            let face = clipped_measure(&sub_lo, &sub_hi, &sub_w, &sub_c);
            if face.is_zero() {
                continue;
            }
            let lever = bound - &q_k;
            if sign > 0 {
                acc += lever * face;
            } else {
                acc -= lever * face;
            }
        }
    }
    acc / BigRational::from_integer(BigInt::from(m))
}

/// Area of `{w·x = c} ∩ box`: by the divergence theorem on the clipped box,
/// the cap area is the norm of `Σ n_f A_f` over the clipped box faces.
fn cap_measure(lo: &[BigRational], hi: &[BigRational], w: &[BigRational], c: &BigRational) -> f64 {
    let m = lo.len();
    let mut sum_sq = 0.0;
    for k in 0..m {
        let (sub_lo, sub_hi) = drop_axis(lo, hi, k);
        let (w_hi, c_hi) = restrict(w, c, k, &hi[k]);
        let (w_lo, c_lo) = restrict(w, c, k, &lo[k]);
        let comp = clipped_measure(&sub_lo, &sub_hi, &w_hi, &c_hi)
            - clipped_measure(&sub_lo, &sub_hi, &w_lo, &c_lo);
        let x = to_f64(&comp);
        sum_sq += x * x;
    }
    sum_sq.sqrt()
}

fn drop_axis(
    lo: &[BigRational],
    hi: &[BigRational],
    axis: usize,
) -> (Vec<BigRational>, Vec<BigRational>) {
    let keep = |v: &[BigRational]| {
        v.iter()
            .enumerate()
            .filter(|&(k, _)| k != axis)
            .map(|(_, x)| x.clone())
            .collect::<Vec<_>>()
    };
    (keep(lo), keep(hi))
}

/// Restricts `{w·x ≤ c}` to the hyperplane `x_axis = at`.
fn restrict(
    w: &[BigRational],
    c: &BigRational,
    axis: usize,
    at: &BigRational,
) -> (Vec<BigRational>, BigRational) {
    let sub_w = w
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != axis)
        .map(|(_, x)| x.clone())
        .collect();
    (sub_w, c - &w[axis] * at)
}

fn box_volume(lo: &[BigRational], hi: &[BigRational]) -> BigRational {
    lo.iter()
        .zip(hi)
        .fold(BigRational::from_integer(BigInt::from(1)), |acc, (l, h)| {
            acc * (h - l)
        })
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
