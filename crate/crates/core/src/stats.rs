//! Small statistics toolkit: order-independent sums, mean/standard error,
//! ordinary least squares with t-based intervals, Wilson intervals, rank
//! tests and the Kolmogorov–Smirnov distance.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let n = xs.len();
    if n == 0 {
        return MeanStderr { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return MeanStderr { mean, stderr: 0.0, n };
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    pub r2: f64,
    pub n: usize,
}

impl LineFit {
    /// Two-sided confidence interval for the slope at `level` (e.g. 0.95).
    pub fn slope_interval(&self, level: f64) -> (f64, f64) {
        let q = t_quantile(level, self.n.saturating_sub(2));
        (self.slope - q * self.slope_stderr, self.slope + q * self.slope_stderr)
    }
}

fn t_quantile(level: f64, dof: usize) -> f64 {
    let p = 0.5 + 0.5 * level;
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(p))
        .unwrap_or(f64::INFINITY)
}

/// Weighted least squares; pass `None` for ordinary least squares.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::Invalid("fit_line: length mismatch".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs 2 points, got {n}")));
    }
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let sw = pairwise_sum(&w);
    let mx = pairwise_sum(&x.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>()) / sw;
    let my = pairwise_sum(&y.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>()) / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("line fit needs two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    for i in 0..n {
        let r = y[i] - intercept - slope * x[i];
        sse += w[i] * r * r;
    }
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let sigma2 = sse / (n - 2) as f64;
        let se_slope = (sigma2 / sxx).sqrt();
        let se_int = (sigma2 * (1.0 / sw + mx * mx / sxx)).sqrt();
        (se_slope, se_int)
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        intercept,
        slope,
        intercept_stderr,
        slope_stderr,
        r2,
        n,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for k in i..=j {
            r[order[k]] = avg;
        }
        i = j + 1;
    }
    r
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RankTest {
    pub u: f64,
    pub z: f64,
    /// One-sided p-value for "a tends to exceed b".
    pub p_greater: f64,
    pub p_two_sided: f64,
}

/// Mann–Whitney U test with normal approximation and tie correction.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<RankTest> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::InsufficientData("Mann–Whitney needs two non-empty samples".into()));
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&all);
    let r1: f64 = r[..n1].iter().sum();
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let u = r1 - n1f * (n1f + 1.0) / 2.0;
    let mean_u = n1f * n2f / 2.0;
    let n = n1f + n2f;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie += t * t * t - t;
        i = j + 1;
    }
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
    let z = if var > 0.0 { (u - mean_u) / var.sqrt() } else { 0.0 };
    let normal = Normal::standard();
    Ok(RankTest {
        u,
        z,
        p_greater: 1.0 - normal.cdf(z),
        p_two_sided: 2.0 * (1.0 - normal.cdf(z.abs())),
    })
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData("spearman needs two equal-length samples".into()));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// the continuous distribution function `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        acc.max(lo).max(hi)
    })
}

/// One-sided p-value of the standard normal for `z`.
pub fn normal_upper_tail(z: f64) -> f64 {
    1.0 - Normal::standard().cdf(z)
}
