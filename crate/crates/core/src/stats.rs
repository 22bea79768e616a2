//! Small statistics helpers for the Monte Carlo estimators.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// One-sided 5% normal quantile.
pub const Z_ONE_SIDED_5: f64 = 1.644_853_626_951_472_2;

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Empirical quantile (type 7, linear interpolation) of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilson {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson(hits: u64, trials: u64, z: f64) -> Wilson {
    if trials == 0 {
        return Wilson {
            p_hat: f64::NAN,
            lo: 0.0,
            hi: 1.0,
        };
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Wilson {
        p_hat: p,
        lo: if hits == 0 {
            0.0
        } else {
            (center - half).max(0.0)
        },
        hi: if hits == trials {
            1.0
        } else {
            (center + half).min(1.0)
        },
    }
}

/// Least-squares line `y = a + b x`: returns `(b, stderr of b)`.
pub fn slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    if n == 2 {
        return (b, 0.0);
    }
    let a = my - b * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    (b, (rss / (n - 2) as f64 / sxx).sqrt())
}

/// Weighted least-squares slope with known per-point standard errors:
/// returns `(b, stderr of b)`.
pub fn weighted_slope(xs: &[f64], ys: &[f64], sds: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = sds.iter().map(|s| 1.0 / (s * s).max(1e-300)).collect();
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// One-sided test that a proportion decreases with `xs`: weighted slope of
/// `p̂` against `xs` significantly below zero at the 5% level.
pub fn decreasing_trend(xs: &[f64], hits: &[u64], trials: &[u64]) -> bool {
    let ps: Vec<f64> = hits
        .iter()
        .zip(trials)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect();
    // Pooled variance keeps zero-hit points from getting infinite weight.
    let pooled = hits.iter().sum::<u64>() as f64 / trials.iter().sum::<u64>() as f64;
    let sds: Vec<f64> = trials
        .iter()
        .map(|&t| (pooled * (1.0 - pooled) / t as f64).sqrt())
        .collect();
    let (b, se) = weighted_slope(xs, &ps, &sds);
    b / se < -Z_ONE_SIDED_5
}
