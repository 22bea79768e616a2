//! Capacity laws and the seeded capacity field `t(e)`.
//!
//! `t(e)` is a pure function of the master seed and the canonical edge: the
//! edge coordinates are hashed together with the seed, the hash is turned
//! into a uniform variate, and the law's inverse CDF maps it to a capacity.
//! No state is kept, so evaluation order and thread count never matter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeEdge;

/// Fixed-point scale: flows are computed on `q(e) = round(t(e)·2^20)`.
pub const QUANT_SCALE: f64 = (1u64 << 20) as f64;

/// Critical probability of bond percolation on ℤ² (Kesten's theorem).
pub const P_C_2: f64 = 0.5;
/// Critical probability of bond percolation on ℤ³; numerical estimate from
/// the literature (≈ 0.2488), not an exact value.
pub const P_C_3: f64 = 0.2488;

/// Truncation point of the exponential law, in units of its mean.
pub const EXP_TRUNCATION: f64 = 40.0;

/// Law of a single edge capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapacityLaw {
    Constant {
        a: f64,
    },
    /// `a` with probability `p`, else 0.
    Bernoulli {
        p: f64,
        a: f64,
    },
    /// `a` with probability `p`, else `b`.
    TwoPoint {
        p: f64,
        a: f64,
        b: f64,
    },
    /// Uniform on the integers `lo..=hi`.
    UniformInt {
        lo: u32,
        hi: u32,
    },
    /// Exponential with the given rate, conditioned on `t ≤ 40/rate`.
    Exponential {
        rate: f64,
    },
}

impl CapacityLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidLaw(msg.to_string()));
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        match *self {
            CapacityLaw::Constant { a } if !nonneg(a) => bad("a must be finite and >= 0"),
            CapacityLaw::Bernoulli { p, a } if !prob(p) || !nonneg(a) => {
                bad("need 0 <= p <= 1 and a >= 0")
            }
            CapacityLaw::TwoPoint { p, a, b } if !prob(p) || !nonneg(a) || !nonneg(b) => {
                bad("need 0 <= p <= 1 and a, b >= 0")
            }
            CapacityLaw::UniformInt { lo, hi } if lo > hi => bad("need lo <= hi"),
            CapacityLaw::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                bad("rate must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Exact mass at zero, `Λ(0) = P[t = 0]`.
    pub fn atom0(&self) -> f64 {
        match *self {
            CapacityLaw::Constant { a } => indicator(a == 0.0),
            CapacityLaw::Bernoulli { p, a } => {
                if a == 0.0 {
                    1.0
                } else {
                    1.0 - p
                }
            }
            CapacityLaw::TwoPoint { p, a, b } => {
                p * indicator(a == 0.0) + (1.0 - p) * indicator(b == 0.0)
            }
            CapacityLaw::UniformInt { lo, hi } => {
                if lo == 0 {
                    1.0 / f64::from(hi - lo + 1)
                } else {
                    0.0
                }
            }
            CapacityLaw::Exponential { .. } => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CapacityLaw::Constant { a } => a,
            CapacityLaw::Bernoulli { p, a } => p * a,
            CapacityLaw::TwoPoint { p, a, b } => p * a + (1.0 - p) * b,
            CapacityLaw::UniformInt { lo, hi } => 0.5 * (f64::from(lo) + f64::from(hi)),
            CapacityLaw::Exponential { rate } => {
                let tail = (-EXP_TRUNCATION).exp();
                (1.0 - (1.0 + EXP_TRUNCATION) * tail) / ((1.0 - tail) * rate)
            }
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let second = match *self {
            CapacityLaw::Constant { a } => a * a,
            CapacityLaw::Bernoulli { p, a } => p * a * a,
            CapacityLaw::TwoPoint { p, a, b } => p * a * a + (1.0 - p) * b * b,
            CapacityLaw::UniformInt { lo, hi } => {
                let k = f64::from(hi - lo + 1);
                let lo = f64::from(lo);
                // E[(lo + J)²] with J uniform on 0..k.
                lo * lo + lo * (k - 1.0) + (k - 1.0) * (2.0 * k - 1.0) / 6.0
            }
            CapacityLaw::Exponential { rate } => {
                let t = EXP_TRUNCATION;
                let tail = (-t).exp();
                (2.0 - (t * t + 2.0 * t + 2.0) * tail) / ((1.0 - tail) * rate * rate)
            }
        };
        (second - m * m).max(0.0)
    }

    /// Every supported law is bounded, so an exponential moment exists.
    pub fn has_exp_moment(&self) -> bool {
        true
    }

    /// True when every value the law takes is an integer multiple of
    /// `2^-20`, so quantization is exact.
    pub fn is_exactly_quantized(&self) -> bool {
        let exact = |x: f64| (x * QUANT_SCALE).fract() == 0.0 && x * QUANT_SCALE < 2f64.powi(53);
        match *self {
            CapacityLaw::Constant { a } | CapacityLaw::Bernoulli { a, .. } => exact(a),
            CapacityLaw::TwoPoint { a, b, .. } => exact(a) && exact(b),
            CapacityLaw::UniformInt { .. } => true,
            CapacityLaw::Exponential { .. } => false,
        }
    }

    /// Largest value the law can produce.
    pub fn max_value(&self) -> f64 {
        match *self {
            CapacityLaw::Constant { a } | CapacityLaw::Bernoulli { a, .. } => a,
            CapacityLaw::TwoPoint { a, b, .. } => a.max(b),
            CapacityLaw::UniformInt { hi, .. } => f64::from(hi),
            CapacityLaw::Exponential { rate } => EXP_TRUNCATION / rate,
        }
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            CapacityLaw::Constant { a } => a,
            CapacityLaw::Bernoulli { p, a } => {
                if u < p {
                    a
                } else {
                    0.0
                }
            }
            CapacityLaw::TwoPoint { p, a, b } => {
                if u < p {
                    a
                } else {
                    b
                }
            }
            CapacityLaw::UniformInt { lo, hi } => {
                let k = f64::from(hi - lo + 1);
                f64::from(lo) + (u * k).floor().min(k - 1.0)
            }
            CapacityLaw::Exponential { rate } => {
                let mass = 1.0 - (-EXP_TRUNCATION).exp();
                -(-u * mass).ln_1p() / rate
            }
        }
    }

    /// The same law with every value multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> CapacityLaw {
        match *self {
            CapacityLaw::Constant { a } => CapacityLaw::Constant { a: a * factor },
            CapacityLaw::Bernoulli { p, a } => CapacityLaw::Bernoulli { p, a: a * factor },
            CapacityLaw::TwoPoint { p, a, b } => CapacityLaw::TwoPoint {
                p,
                a: a * factor,
                b: b * factor,
            },
            other => other,
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Critical bond-percolation probability, when known for `d`.
pub fn critical_probability(d: usize) -> Option<f64> {
    match d {
        2 => Some(P_C_2),
        3 => Some(P_C_3),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawReport {
    pub atom0: f64,
    pub mean: f64,
    pub has_exp_moment: bool,
    pub p_c: Option<f64>,
    /// `Λ(0) < 1 − p_c(d)`; `None` when `p_c(d)` is not tabulated.
    pub subcritical: Option<bool>,
}

pub fn law_checks(law: &CapacityLaw, d: usize) -> LawReport {
    let atom0 = law.atom0();
    let p_c = critical_probability(d);
    LawReport {
        atom0,
        mean: law.mean(),
        has_exp_moment: law.has_exp_moment(),
        p_c,
        subcritical: p_c.map(|pc| atom0 < 1.0 - pc),
    }
}

/// Signed axis permutation of ℤᵈ: coordinate `k` of a point is sent to
/// coordinate `perm[k]` and multiplied by `signs[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeIsometry {
    pub perm: Vec<usize>,
    pub signs: Vec<i64>,
}

impl LatticeIsometry {
    pub fn identity(d: usize) -> Self {
        LatticeIsometry {
            perm: (0..d).collect(),
            signs: vec![1; d],
        }
    }

    pub fn apply(&self, z: &[i64], out: &mut [i64]) {
        for (k, &x) in z.iter().enumerate() {
            out[self.perm[k]] = self.signs[k] * x;
        }
    }

    pub fn inverse(&self) -> Self {
        let d = self.perm.len();
        let mut perm = vec![0; d];
        let mut signs = vec![1; d];
        for k in 0..d {
            perm[self.perm[k]] = k;
            signs[self.perm[k]] = self.signs[k];
        }
        LatticeIsometry { perm, signs }
    }

    /// Image of a canonical edge, canonicalized again.
    pub fn map_edge(&self, lo: &[i64], axis: usize, out: &mut [i64]) -> usize {
        self.apply(lo, out);
        let image_axis = self.perm[axis];
        if self.signs[axis] < 0 {
            out[image_axis] -= 1;
        }
        image_axis
    }
}

/// Deterministic i.i.d. capacity field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityField {
    pub law: CapacityLaw,
    pub seed: u64,
    /// When set, `t(e)` is read at the image of `e` under this isometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relabel: Option<LatticeIsometry>,
}

impl CapacityField {
    pub fn new(law: CapacityLaw, seed: u64) -> Self {
        CapacityField {
            law,
            seed,
            relabel: None,
        }
    }

    /// Field `e ↦ t(iso(e))`: the original field seen through a lattice
    /// symmetry.
    pub fn relabelled(&self, iso: LatticeIsometry) -> Self {
        CapacityField {
            relabel: Some(iso),
            ..self.clone()
        }
    }

    pub fn quantization_scale(&self) -> f64 {
        QUANT_SCALE
    }

    /// Uniform variate attached to the edge `(lo, axis)`.
    fn uniform_at(&self, lo: &[i64], axis: usize) -> f64 {
        let h = match &self.relabel {
            None => edge_hash(self.seed, lo, axis),
            Some(iso) => {
                let mut buf = [0i64; 8];
                let mut heap;
                let out: &mut [i64] = if lo.len() <= buf.len() {
                    &mut buf[..lo.len()]
                } else {
                    heap = vec![0i64; lo.len()];
                    &mut heap
                };
                let axis = iso.map_edge(lo, axis, out);
                edge_hash(self.seed, out, axis)
            }
        };
        unit_interval(h)
    }

    pub fn value_at(&self, lo: &[i64], axis: usize) -> f64 {
        self.law.quantile(self.uniform_at(lo, axis))
    }

    pub fn quantized_at(&self, lo: &[i64], axis: usize) -> u64 {
        quantize(self.value_at(lo, axis))
    }

    pub fn sample(&self, e: &LatticeEdge) -> f64 {
        self.value_at(&e.lo, e.axis)
    }

    pub fn quantized(&self, e: &LatticeEdge) -> u64 {
        self.quantized_at(&e.lo, e.axis)
    }
}

pub fn quantize(t: f64) -> u64 {
    (t * QUANT_SCALE).round() as u64
}

pub fn dequantize(q: u64) -> f64 {
    q as f64 / QUANT_SCALE
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective 64-bit mix with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(seed, words…)`, chaining one mix per word.
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &w) in words.iter().enumerate() {
        h = mix64(h ^ mix64(w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
    }
    h
}

#[inline]
fn edge_hash(seed: u64, lo: &[i64], axis: usize) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &z) in lo.iter().enumerate() {
        h = mix64(h ^ mix64((z as u64).wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
    }
    mix64(h ^ (axis as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sub-seed derived from a master seed and a path such as
/// `(mesh, replica)`; used so that replicas are independent work items.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    hash_words(master, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_law_is_constant() {
        let f = CapacityField::new(CapacityLaw::Constant { a: 1.0 }, 7);
        for x in -5..5 {
            for axis in 0..2 {
                assert_eq!(f.value_at(&[x, 2 * x], axis), 1.0);
                assert_eq!(f.quantized_at(&[x, 2 * x], axis), 1 << 20);
            }
        }
    }

    #[test]
    fn bernoulli_mean_within_three_sigma() {
        let f = CapacityField::new(CapacityLaw::Bernoulli { p: 0.6, a: 1.0 }, 2024);
        let mut sum = 0.0;
        for x in 0..1000 {
            for y in 0..1000 {
                sum += f.value_at(&[x, y], 0);
            }
        }
        let mean = sum / 1e6;
        // 3σ for a Binomial(1e6, 0.6) mean is 3·sqrt(0.24/1e6) ≈ 0.00147.
        assert!((mean - 0.6).abs() <= 0.0015, "mean {mean}");
    }

    #[test]
    fn deterministic_and_order_independent() {
        let f = CapacityField::new(CapacityLaw::Exponential { rate: 2.0 }, 99);
        let edges: Vec<(Vec<i64>, usize)> = (0..100_000i64)
            .map(|i| (vec![i % 317, i / 317, -i % 7], (i % 3) as usize))
            .collect();
        let forward: Vec<u64> = edges.iter().map(|(z, a)| f.quantized_at(z, *a)).collect();
        let mut order: Vec<usize> = (0..edges.len()).collect();
        // Deterministic shuffle.
        order.sort_by_key(|&i| mix64(i as u64));
        for &i in &order {
            let (z, a) = &edges[i];
            assert_eq!(f.quantized_at(z, *a), forward[i]);
        }
    }

    #[test]
    fn quantization_error_bound() {
        let f = CapacityField::new(CapacityLaw::Exponential { rate: 0.7 }, 5);
        for x in 0..2000 {
            let t = f.value_at(&[x, 3], 1);
            let q = f.quantized_at(&[x, 3], 1);
            assert!((dequantize(q) - t).abs() <= 0.5 / QUANT_SCALE + 1e-15);
            assert!(t <= EXP_TRUNCATION / 0.7);
        }
        let g = CapacityField::new(CapacityLaw::UniformInt { lo: 0, hi: 9 }, 5);
        for x in 0..2000 {
            let t = g.value_at(&[x, 3], 1);
            assert_eq!(dequantize(g.quantized_at(&[x, 3], 1)), t);
        }
    }

    #[test]
    fn law_report_examples() {
        let r = law_checks(&CapacityLaw::Bernoulli { p: 0.6, a: 1.0 }, 2);
        assert!((r.atom0 - 0.4).abs() < 1e-15);
        assert_eq!(r.subcritical, Some(true));
        let r = law_checks(&CapacityLaw::Bernoulli { p: 0.4, a: 1.0 }, 2);
        assert!((r.atom0 - 0.6).abs() < 1e-15);
        assert_eq!(r.subcritical, Some(false));
        let r = law_checks(&CapacityLaw::Constant { a: 1.0 }, 3);
        assert_eq!(r.atom0, 0.0);
        assert!(r.has_exp_moment);
        assert_eq!(
            law_checks(&CapacityLaw::Constant { a: 1.0 }, 5).subcritical,
            None
        );
    }

    #[test]
    fn analytic_means_match_quadrature() {
        let laws = [
            CapacityLaw::TwoPoint {
                p: 0.3,
                a: 2.0,
                b: 0.5,
            },
            CapacityLaw::UniformInt { lo: 2, hi: 6 },
            CapacityLaw::Exponential { rate: 1.5 },
        ];
        for law in laws {
            // Midpoint rule on the quantile function.
            let k = 200_000;
            let (mut m1, mut m2) = (0.0, 0.0);
            for i in 0..k {
                let t = law.quantile((i as f64 + 0.5) / k as f64);
                m1 += t;
                m2 += t * t;
            }
            m1 /= k as f64;
            m2 /= k as f64;
            assert!((m1 - law.mean()).abs() < 1e-3, "{law:?}");
            assert!((m2 - m1 * m1 - law.variance()).abs() < 5e-3, "{law:?}");
        }
    }

    #[test]
    fn law_json_shape() {
        let law: CapacityLaw =
            serde_json::from_str(r#"{"kind":"bernoulli","p":0.6,"a":1}"#).unwrap();
        assert_eq!(law, CapacityLaw::Bernoulli { p: 0.6, a: 1.0 });
        let law: CapacityLaw =
            serde_json::from_str(r#"{"kind":"uniform_int","lo":1,"hi":3}"#).unwrap();
        assert_eq!(law, CapacityLaw::UniformInt { lo: 1, hi: 3 });
        assert!(CapacityLaw::Bernoulli { p: 1.5, a: 1.0 }
            .validate()
            .is_err());
        assert!(CapacityLaw::Exponential { rate: 0.0 }.validate().is_err());
    }

    #[test]
    fn isometry_relabels_edges() {
        // Quarter turn in the plane: (x, y) ↦ (−y, x).
        let rot = LatticeIsometry {
            perm: vec![1, 0],
            signs: vec![1, -1],
        };
        let mut out = [0i64; 2];
        rot.apply(&[2, 5], &mut out);
        assert_eq!(out, [-5, 2]);
        // Horizontal edge (0,0)-(1,0) ↦ vertical edge (0,0)-(0,1).
        let axis = rot.map_edge(&[0, 0], 0, &mut out);
        assert_eq!((out, axis), ([0, 0], 1));
        // Vertical edge (0,0)-(0,1) ↦ horizontal edge (−1,0)-(0,0).
        let axis = rot.map_edge(&[0, 0], 1, &mut out);
        assert_eq!((out, axis), ([-1, 0], 0));
        let inv = rot.inverse();
        let mut back = [0i64; 2];
        inv.apply(&[-5, 2], &mut back);
        assert_eq!(back, [2, 5]);
    }

    #[test]
    fn disjoint_region_sums_look_independent() {
        // Chi-square test of independence on the 2×2 table of
        // (sum in region A above median, sum in region B above median) over
        // 1000 disjoint pairs of 4×4 blocks.
        let f = CapacityField::new(CapacityLaw::UniformInt { lo: 0, hi: 9 }, 31);
        let block = |ox: i64, oy: i64| -> u64 {
            let mut s = 0;
            for x in 0..4 {
                for y in 0..4 {
                    s += f.quantized_at(&[ox + x, oy + y], 0);
                }
            }
            s
        };
        let pairs: Vec<(u64, u64)> = (0..1000)
            .map(|i| (block(10 * i, 0), block(10 * i, 100)))
            .collect();
        let median = |mut v: Vec<u64>| {
            v.sort_unstable();
            v[v.len() / 2]
        };
        let ma = median(pairs.iter().map(|p| p.0).collect());
        let mb = median(pairs.iter().map(|p| p.1).collect());
        let mut table = [[0f64; 2]; 2];
        for &(a, b) in &pairs {
            table[(a >= ma) as usize][(b >= mb) as usize] += 1.0;
        }
        let total = 1000.0;
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let row: f64 = table[i].iter().sum();
                let col = table[0][j] + table[1][j];
                let expected = row * col / total;
                chi2 += (table[i][j] - expected).powi(2) / expected;
            }
        }
        // 99th percentile of χ² with one degree of freedom.
        assert!(chi2 < 6.635, "chi2 {chi2}");
    }
}
