//! Box-union domains with tagged boundary facets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary role of a facet: part of the source set, the sink set, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceTag {
    Source,
    Sink,
    Neutral,
}

/// One of the `2d` faces of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaceId {
    pub axis: usize,
    pub upper: bool,
}

impl FaceId {
    pub fn lower(axis: usize) -> Self {
        FaceId { axis, upper: false }
    }

    pub fn upper(axis: usize) -> Self {
        FaceId { axis, upper: true }
    }
}

/// Open axis-aligned box with exact rational bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RBox {
    pub lo: Vec<BigRational>,
    pub hi: Vec<BigRational>,
}

impl RBox {
    pub fn new(lo: Vec<BigRational>, hi: Vec<BigRational>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (axis, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l >= h {
                return Err(Error::EmptyBox { axis });
            }
        }
        Ok(RBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> BigRational {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(one(), |acc, (l, h)| acc * (h - l))
    }

    /// L∞ distance from `x` to the box (the open box and its closure are at
    /// the same distance from every point).
    pub fn linf_distance(&self, x: &[BigRational]) -> BigRational {
        closed_box_distance(&self.lo, &self.hi, x)
    }

    pub fn contains_closed(&self, x: &[BigRational]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (l, h))| l <= xi && xi <= h)
    }

    pub fn contains_open(&self, x: &[BigRational]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (l, h))| l < xi && xi < h)
    }
}

/// Closed boundary facet: a degenerate box whose extent along `axis` is a
/// single value, with outward normal `±e_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub box_index: usize,
    pub axis: usize,
    pub upper: bool,
    pub lo: Vec<BigRational>,
    pub hi: Vec<BigRational>,
    pub tag: FaceTag,
}

impl Facet {
    /// Outward unit normal of the domain along this facet.
    pub fn normal(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.lo.len()];
        v[self.axis] = if self.upper { 1.0 } else { -1.0 };
        v
    }

    /// Position of the facet hyperplane along its axis.
    pub fn offset(&self) -> &BigRational {
        &self.lo[self.axis]
    }

    /// Exact (d−1)-dimensional measure.
    pub fn area(&self) -> BigRational {
        (0..self.lo.len())
            .filter(|&k| k != self.axis)
            .fold(one(), |acc, k| acc * (&self.hi[k] - &self.lo[k]))
    }

    pub fn linf_distance(&self, x: &[BigRational]) -> BigRational {
        closed_box_distance(&self.lo, &self.hi, x)
    }
}

/// Bounded open domain given as the interior of a finite union of boxes,
/// together with tagged boundary facets.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    dim: usize,
    boxes: Vec<RBox>,
    facets: Vec<Facet>,
}

impl Domain {
    /// Builds a domain from boxes and `(box, face, tag)` facet declarations.
    /// Faces of boxes that are not declared carry no boundary role.
    pub fn from_boxes(boxes: Vec<RBox>, faces: &[(usize, FaceId, FaceTag)]) -> Result<Self> {
        let dim = match boxes.first() {
            Some(b) => b.dim(),
            None => return Err(Error::InvalidDomain("no boxes".into())),
        };
        if dim < 1 {
            return Err(Error::InvalidDomain("dimension must be positive".into()));
        }
        for b in &boxes {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.dim(),
                });
            }
        }
        check_connected(&boxes)?;

        let mut facets = Vec::with_capacity(faces.len());
        for &(box_index, face, tag) in faces {
            let b = boxes.get(box_index).ok_or_else(|| {
                Error::InvalidDomain(format!("facet refers to missing box {box_index}"))
            })?;
            if face.axis >= dim {
                return Err(Error::InvalidDomain(format!(
                    "facet axis {} out of range",
                    face.axis
                )));
            }
            let mut lo = b.lo.clone();
            let mut hi = b.hi.clone();
            let at = if face.upper {
                b.hi[face.axis].clone()
            } else {
                b.lo[face.axis].clone()
            };
            lo[face.axis] = at.clone();
            hi[face.axis] = at;
            facets.push(Facet {
                box_index,
                axis: face.axis,
                upper: face.upper,
                lo,
                hi,
                tag,
            });
        }

        let domain = Domain { dim, boxes, facets };
        domain.check_facets()?;
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[RBox] {
        &self.boxes
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facets_tagged(&self, tag: FaceTag) -> impl Iterator<Item = &Facet> {
        self.facets.iter().filter(move |f| f.tag == tag)
    }

    /// Exact Lebesgue measure (boxes have disjoint interiors).
    pub fn volume(&self) -> BigRational {
        self.boxes.iter().map(RBox::volume).sum()
    }

    /// Exact (d−1)-measure of the facets with the given tag.
    pub fn tagged_area(&self, tag: FaceTag) -> BigRational {
        self.facets_tagged(tag).map(Facet::area).sum()
    }

    /// Smallest box containing the domain.
    pub fn bounding_box(&self) -> (Vec<BigRational>, Vec<BigRational>) {
        let mut lo = self.boxes[0].lo.clone();
        let mut hi = self.boxes[0].hi.clone();
        for b in &self.boxes[1..] {
            for k in 0..self.dim {
                if b.lo[k] < lo[k] {
                    lo[k] = b.lo[k].clone();
                }
                if b.hi[k] > hi[k] {
                    hi[k] = b.hi[k].clone();
                }
            }
        }
        (lo, hi)
    }

    pub fn linf_distance(&self, x: &[BigRational]) -> BigRational {
        self.boxes
            .iter()
            .map(|b| b.linf_distance(x))
            .min()
            .expect("domain has at least one box")
    }

    /// Distance to the union of facets carrying `tag`; `None` if there are none.
    pub fn linf_distance_to_tag(&self, x: &[BigRational], tag: FaceTag) -> Option<BigRational> {
        self.facets_tagged(tag).map(|f| f.linf_distance(x)).min()
    }

    fn check_facets(&self) -> Result<()> {
        let sources: Vec<&Facet> = self.facets_tagged(FaceTag::Source).collect();
        let sinks: Vec<&Facet> = self.facets_tagged(FaceTag::Sink).collect();
        if sources.is_empty() || sinks.is_empty() {
            return Err(Error::NoSourceOrSink);
        }
        for s in &sources {
            for t in &sinks {
                if closed_boxes_meet(&s.lo, &s.hi, &t.lo, &t.hi) {
                    return Err(Error::InvalidDomain("source and sink facets touch".into()));
                }
            }
        }
        // A declared facet must face the exterior: the point just outside its
        // centre may not belong to another box.
        let two = BigRational::from_integer(BigInt::from(2));
        for f in &self.facets {
            let b = &self.boxes[f.box_index];
            let mut probe: Vec<BigRational> = (0..self.dim)
                .map(|k| (&f.lo[k] + &f.hi[k]) / &two)
                .collect();
            let extent = &b.hi[f.axis] - &b.lo[f.axis];
            let step = extent / BigRational::from_integer(BigInt::from(1_000_000));
            if f.upper {
                probe[f.axis] += step;
            } else {
                probe[f.axis] -= step;
            }
            if self.boxes.iter().any(|other| other.contains_closed(&probe)) {
                return Err(Error::InvalidDomain(format!(
                    "facet of box {} on axis {} is interior",
                    f.box_index, f.axis
                )));
            }
        }
        for (i, a) in self.facets.iter().enumerate() {
            for b in &self.facets[i + 1..] {
                if a.axis == b.axis
                    && a.upper == b.upper
                    && a.offset() == b.offset()
                    && overlap_positive(a, b)
                {
                    return Err(Error::InvalidDomain("facets overlap".into()));
                }
            }
        }
        Ok(())
    }
}

/// Axis-aligned box domain with the given per-face tags; faces not listed are
/// neutral.
pub fn make_box_domain(
    bounds: &[(BigRational, BigRational)],
    tags: &[(FaceId, FaceTag)],
) -> Result<Domain> {
    let (lo, hi): (Vec<_>, Vec<_>) = bounds.iter().cloned().unzip();
    let b = RBox::new(lo, hi)?;
    let dim = b.dim();
    let mut faces = Vec::with_capacity(2 * dim);
    for axis in 0..dim {
        for upper in [false, true] {
            let id = FaceId { axis, upper };
            let tag = tags
                .iter()
                .find(|(f, _)| *f == id)
                .map(|(_, t)| *t)
                .unwrap_or(FaceTag::Neutral);
            faces.push((0, id, tag));
        }
    }
    Domain::from_boxes(vec![b], &faces)
}

/// Unit cube `(0,1)^d` with the lower face of axis 0 as source and the upper
/// face of axis 0 as sink.
pub fn unit_cube_domain(dim: usize) -> Domain {
    let bounds = vec![(BigRational::zero(), one()); dim];
    make_box_domain(
        &bounds,
        &[
            (FaceId::lower(0), FaceTag::Source),
            (FaceId::upper(0), FaceTag::Sink),
        ],
    )
    .expect("unit cube is a valid domain")
}

fn one() -> BigRational {
    BigRational::from_integer(BigInt::from(1))
}

fn closed_box_distance(lo: &[BigRational], hi: &[BigRational], x: &[BigRational]) -> BigRational {
    let mut best = BigRational::zero();
    for ((xi, l), h) in x.iter().zip(lo).zip(hi) {
        let d = if xi < l {
            l - xi
        } else if xi > h {
            xi - h
        } else {
            continue;
        };
        if d > best {
            best = d;
        }
    }
    best
}

fn closed_boxes_meet(
    alo: &[BigRational],
    ahi: &[BigRational],
    blo: &[BigRational],
    bhi: &[BigRational],
) -> bool {
    (0..alo.len()).all(|k| alo[k] <= bhi[k] && blo[k] <= ahi[k])
}

fn overlap_positive(a: &Facet, b: &Facet) -> bool {
    (0..a.lo.len())
        .filter(|&k| k != a.axis)
        .all(|k| std::cmp::max(&a.lo[k], &b.lo[k]) < std::cmp::min(&a.hi[k], &b.hi[k]))
}

/// Boxes must form a connected body: two boxes are adjacent when their
/// closures share a piece of positive (d−1)-measure.
fn check_connected(boxes: &[RBox]) -> Result<()> {
    let n = boxes.len();
    let adjacent = |a: &RBox, b: &RBox| {
        let mut touching_axes = 0;
        for k in 0..a.dim() {
            let lo = a.lo[k].clone().max(b.lo[k].clone());
            let hi = a.hi[k].clone().min(b.hi[k].clone());
            if lo > hi {
                return false;
            }
            if lo == hi {
                touching_axes += 1;
            }
        }
        touching_axes <= 1
    };
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            let overlap = (0..a.dim()).all(|k| {
                a.lo[k].clone().max(b.lo[k].clone()) < a.hi[k].clone().min(b.hi[k].clone())
            });
            if overlap {
                return Err(Error::InvalidDomain("boxes overlap".into()));
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && adjacent(&boxes[i], &boxes[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(Error::InvalidDomain("boxes are not connected".into()))
    }
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mut r = BigRational::new(frac_part, scale);
        if negative {
            r = -r;
        }
        return Ok(BigRational::from_integer(int_part) + r);
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(p))
}

pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FaceSpec {
    #[serde(rename = "box")]
    box_index: usize,
    normal: Vec<i32>,
    tag: FaceTag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DomainSpec {
    d: usize,
    boxes: Vec<[Vec<String>; 2]>,
    faces: Vec<FaceSpec>,
}

impl Domain {
    /// Reads `{d, boxes:[[lo,hi]…], faces:[{box, normal, tag}…]}` with
    /// coordinates given as rational strings.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DomainSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut boxes = Vec::with_capacity(spec.boxes.len());
        for [lo, hi] in &spec.boxes {
            if lo.len() != spec.d || hi.len() != spec.d {
                return Err(Error::DimensionMismatch {
                    expected: spec.d,
                    got: lo.len().max(hi.len()),
                });
            }
            let lo = lo
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<_>>()?;
            let hi = hi
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<_>>()?;
            boxes.push(RBox::new(lo, hi)?);
        }
        let mut faces = Vec::with_capacity(spec.faces.len());
        for f in &spec.faces {
            faces.push((f.box_index, face_from_normal(&f.normal, spec.d)?, f.tag));
        }
        Domain::from_boxes(boxes, &faces)
    }

    pub fn to_json(&self) -> String {
        let spec = DomainSpec {
            d: self.dim,
            boxes: self
                .boxes
                .iter()
                .map(|b| {
                    [
                        b.lo.iter().map(format_rational).collect(),
                        b.hi.iter().map(format_rational).collect(),
                    ]
                })
                .collect(),
            faces: self
                .facets
                .iter()
                .map(|f| {
                    let mut normal = vec![0; self.dim];
                    normal[f.axis] = if f.upper { 1 } else { -1 };
                    FaceSpec {
                        box_index: f.box_index,
                        normal,
                        tag: f.tag,
                    }
                })
                .collect(),
        };
        serde_json::to_string(&spec).expect("domain spec serializes")
    }

    /// Stable content hash used to label run outputs.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn face_from_normal(normal: &[i32], dim: usize) -> Result<FaceId> {
    if normal.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: normal.len(),
        });
    }
    let nonzero: Vec<(usize, i32)> = normal
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, c)| *c != 0)
        .collect();
    match nonzero.as_slice() {
        [(axis, c)] if c.abs() == 1 => Ok(FaceId {
            axis: *axis,
            upper: c.is_positive(),
        }),
        _ => Err(Error::Parse(format!(
            "face normal {normal:?} is not a signed axis vector"
        ))),
    }
}
