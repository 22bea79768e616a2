//! Euclidean shapes used to carve flow regions out of the lattice: unit
//! normals, hyperrectangles, cylinders and balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for floating-point geometric predicates.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Accepts a vector whose Euclidean norm is 1 within [`GEOM_TOL`].
    pub fn new(components: Vec<f64>) -> Result<Self> {
        let norm = norm(&components);
        if (norm - 1.0).abs() > GEOM_TOL {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVector(components))
    }

    /// Normalizes any nonzero vector.
    pub fn normalize(components: &[f64]) -> Result<Self> {
        let n = norm(components);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(UnitVector(components.iter().map(|c| c / n).collect()))
    }

    pub fn axis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        UnitVector(v)
    }

    /// Unit vector at angle `theta` (radians) from the first axis in the plane.
    pub fn planar(theta: f64) -> Self {
        UnitVector(vec![theta.cos(), theta.sin()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn neg(&self) -> Self {
        UnitVector(self.0.iter().map(|c| -c).collect())
    }

    /// Orthonormal basis of the hyperplane orthogonal to `self`. In the plane
    /// the basis is the quarter-turn `(-v₁, v₀)`; in higher dimension it is
    /// built by Gram–Schmidt from the coordinate axes, skipping the axis most
    /// aligned with `self`.
    pub fn orthonormal_frame(&self) -> Vec<UnitVector> {
        let d = self.dim();
        if d == 2 {
            return vec![UnitVector(vec![-self.0[1], self.0[0]])];
        }
        let skip = (0..d)
            .max_by(|&a, &b| self.0[a].abs().total_cmp(&self.0[b].abs()))
            .unwrap_or(0);
        let mut basis: Vec<Vec<f64>> = vec![self.0.clone()];
        for axis in (0..d).filter(|&k| k != skip) {
            let mut e = vec![0.0; d];
            e[axis] = 1.0;
            for b in &basis {
                let p = dot(&e, b);
                for (ei, bi) in e.iter_mut().zip(b) {
                    *ei -= p * bi;
                }
            }
            let n = norm(&e);
            basis.push(e.into_iter().map(|c| c / n).collect());
        }
        basis.into_iter().skip(1).map(UnitVector).collect()
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.0
    }
}

/// Closed (d−1)-dimensional box in ℝᵈ, orthogonal to `normal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    pub center: Vec<f64>,
    pub frame: Vec<UnitVector>,
    pub sides: Vec<f64>,
    pub normal: UnitVector,
}

impl Hyperrectangle {
    pub fn new(
        center: Vec<f64>,
        frame: Vec<UnitVector>,
        sides: Vec<f64>,
        normal: UnitVector,
    ) -> Result<Self> {
        let d = normal.dim();
        if center.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: center.len(),
            });
        }
        if frame.len() + 1 != d || sides.len() + 1 != d {
            return Err(Error::DimensionMismatch {
                expected: d - 1,
                got: frame.len().min(sides.len()),
            });
        }
        if sides.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidDomain(
                "hyperrectangle sides must be positive".into(),
            ));
        }
        for (i, u) in frame.iter().enumerate() {
            if u.dim() != d || normal.dot(u.as_slice()).abs() > 1e-9 {
                return Err(Error::InvalidDomain(
                    "frame not orthogonal to normal".into(),
                ));
            }
            for w in &frame[i + 1..] {
                if u.dot(w.as_slice()).abs() > 1e-9 {
                    return Err(Error::InvalidDomain("frame not orthonormal".into()));
                }
            }
        }
        Ok(Hyperrectangle {
            center,
            frame,
            sides,
            normal,
        })
    }

    /// Square hyperrectangle of side `side` orthogonal to `normal`, with its
    /// frame from [`UnitVector::orthonormal_frame`] and one corner at `corner`.
    pub fn square_from_corner(corner: &[f64], normal: &UnitVector, side: f64) -> Result<Self> {
        let frame = normal.orthonormal_frame();
        let mut center = corner.to_vec();
        for u in &frame {
            for (c, ui) in center.iter_mut().zip(u.as_slice()) {
                *c += 0.5 * side * ui;
            }
        }
        let sides = vec![side; frame.len()];
        Hyperrectangle::new(center, frame, sides, normal.clone())
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    /// ℋ^{d−1} measure: product of side lengths.
    pub fn area(&self) -> f64 {
        self.sides.iter().product()
    }

    /// Coordinates of `x` relative to the centre: `(normal, frame...)`.
    pub fn local_coords(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let rel: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let along = self.normal.dot(&rel);
        let tangential = self.frame.iter().map(|u| u.dot(&rel)).collect();
        (along, tangential)
    }

    pub fn translated(&self, offset: f64) -> Hyperrectangle {
        let center = self
            .center
            .iter()
            .zip(self.normal.as_slice())
            .map(|(c, v)| c + offset * v)
            .collect();
        Hyperrectangle {
            center,
            ..self.clone()
        }
    }

    /// Closed-face intersection test for the segment `[a, b]`.
    ///
    /// Segments lying in the face plane (within [`GEOM_TOL`]) are classified
    /// by their midpoint.
    pub fn intersects_segment(&self, a: &[f64], b: &[f64]) -> bool {
        let (fa, ta) = self.local_coords(a);
        let (fb, tb) = self.local_coords(b);
        let in_face = |t: &[f64]| {
            t.iter()
                .zip(&self.sides)
                .all(|(c, s)| c.abs() <= 0.5 * s + GEOM_TOL)
        };
        if fa.abs() <= GEOM_TOL && fb.abs() <= GEOM_TOL {
            let mid: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| 0.5 * (x + y)).collect();
            return in_face(&mid);
        }
        if (fa > GEOM_TOL && fb > GEOM_TOL) || (fa < -GEOM_TOL && fb < -GEOM_TOL) {
            return false;
        }
        let t = if fa.abs() <= GEOM_TOL {
            0.0
        } else if fb.abs() <= GEOM_TOL {
            1.0
        } else {
            fa / (fa - fb)
        };
        let hit: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| x + t * (y - x)).collect();
        in_face(&hit)
    }
}

/// `cyl(A, h) = {x + t v : x ∈ A, t ∈ [−h, h]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub base: Hyperrectangle,
    pub half_height: f64,
}

/// Builds `cyl(A, h)`.
pub fn cyl(base: Hyperrectangle, half_height: f64) -> Result<Cylinder> {
    if half_height <= 0.0 || !half_height.is_finite() {
        return Err(Error::NonpositiveHeight(half_height));
    }
    Ok(Cylinder { base, half_height })
}

impl Cylinder {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn normal(&self) -> &UnitVector {
        &self.base.normal
    }

    /// Signed height of `x` above the base hyperplane.
    pub fn height_of(&self, x: &[f64]) -> f64 {
        self.base.local_coords(x).0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (along, tangential) = self.base.local_coords(x);
        along.abs() <= self.half_height + GEOM_TOL
            && tangential
                .iter()
                .zip(&self.base.sides)
                .all(|(c, s)| c.abs() <= 0.5 * s + GEOM_TOL)
    }

    /// Top face `A + h v`.
    pub fn top(&self) -> Hyperrectangle {
        self.base.translated(self.half_height)
    }

    /// Bottom face `A − h v`.
    pub fn bottom(&self) -> Hyperrectangle {
        self.base.translated(-self.half_height)
    }

    /// Axis-aligned box containing the cylinder.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = self.base.center.clone();
        let mut hi = self.base.center.clone();
        for k in 0..d {
            let mut r = self.half_height * self.base.normal.as_slice()[k].abs();
            for (u, s) in self.base.frame.iter().zip(&self.base.sides) {
                r += 0.5 * s * u.as_slice()[k].abs();
            }
            lo[k] -= r;
            hi[k] += r;
        }
        (lo, hi)
    }
}

/// Closed Euclidean ball `B(x, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        d2.sqrt() <= self.radius + GEOM_TOL
    }
}

/// Volume α_d of the unit ball of ℝᵈ.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment_cylinder() -> Cylinder {
        let a = Hyperrectangle::new(
            vec![0.5, 0.0],
            vec![UnitVector::axis(2, 0)],
            vec![1.0],
            UnitVector::axis(2, 1),
        )
        .unwrap();
        cyl(a, 0.5).unwrap()
    }

    #[test]
    fn segment_cylinder_is_rectangle() {
        let c = segment_cylinder();
        assert!(c.contains(&[0.0, -0.5]));
        assert!(c.contains(&[1.0, 0.5]));
        assert!(!c.contains(&[1.0, 0.51]));
        assert!(!c.contains(&[-0.01, 0.0]));
        let (lo, hi) = c.bounding_box();
        assert_eq!(lo, vec![0.0, -0.5]);
        assert_eq!(hi, vec![1.0, 0.5]);
    }

    #[test]
    fn centre_in_cylinder_and_beyond_height_not() {
        let v = UnitVector::normalize(&[1.0, 2.0, 2.0]).unwrap();
        let a = Hyperrectangle::square_from_corner(&[0.0, 0.0, 0.0], &v, 1.0).unwrap();
        for h in [1e-3, 0.5, 3.0] {
            let c = cyl(a.clone(), h).unwrap();
            assert!(c.contains(&a.center));
            let out: Vec<f64> = a
                .center
                .iter()
                .zip(v.as_slice())
                .map(|(x, vi)| x + 1.01 * h * vi)
                .collect();
            assert!(!c.contains(&out));
        }
    }

    #[test]
    fn nonpositive_height_is_rejected() {
        let c = segment_cylinder();
        assert_eq!(
            cyl(c.base.clone(), 0.0).unwrap_err(),
            Error::NonpositiveHeight(0.0)
        );
    }

    #[test]
    fn frames_are_orthonormal() {
        for v in [
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![0.3, -0.1, 0.7],
            vec![1.0, 0.0, 0.0, 1.0],
        ] {
            let v = UnitVector::normalize(&v).unwrap();
            let frame = v.orthonormal_frame();
            assert_eq!(frame.len(), v.dim() - 1);
            for (i, u) in frame.iter().enumerate() {
                assert!((norm(u.as_slice()) - 1.0).abs() < 1e-12);
                assert!(v.dot(u.as_slice()).abs() < 1e-12);
                for w in &frame[i + 1..] {
                    assert!(u.dot(w.as_slice()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_vector_rejects_non_unit() {
        assert!(UnitVector::new(vec![1.0, 1.0]).is_err());
        assert!(UnitVector::normalize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn face_intersection_closed() {
        let c = segment_cylinder();
        let top = c.top();
        // Vertical edge leaving through the top face.
        assert!(top.intersects_segment(&[0.5, 0.5], &[0.5, 0.75]));
        // Crossing the face plane exactly at the corner counts.
        assert!(top.intersects_segment(&[0.0, 0.25], &[0.0, 0.75]));
        // Segments lying in the face plane follow the midpoint rule.
        assert!(!top.intersects_segment(&[-0.25, 0.5], &[0.0, 0.5]));
        assert!(top.intersects_segment(&[0.75, 0.5], &[1.0, 0.5]));
        // Passing beside the face does not.
        assert!(!top.intersects_segment(&[1.25, 0.25], &[1.25, 0.75]));
        assert!(!top.intersects_segment(&[0.5, 0.0], &[0.5, 0.25]));
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
