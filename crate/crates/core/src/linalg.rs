//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Threshold below which a reciprocal condition estimate counts as singular.
pub const RCOND_SINGULAR: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn unit(n: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[i] = Complex64::new(1.0, 0.0);
    v
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value.
pub fn min_singular(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.singular_values().min()
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest elementwise `|a - b|`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `max |a - b| / max(|a|, |b|, tiny)`.
pub fn relative_deviation(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = max_abs(a).max(max_abs(b)).max(f64::MIN_POSITIVE);
    max_abs_diff(a, b) / scale
}

/// LU factorization with partial pivoting and a cached 1-norm.
pub struct Factorization {
    lu: LU<Complex64, Dyn, Dyn>,
    n: usize,
    norm1: f64,
}

impl Factorization {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        let norm1 = norm1(&m);
        let lu = m.lu();
        let f = Factorization { lu, n, norm1 };
        if (0..n).any(|i| f.lu.u()[(i, i)].norm() == 0.0) {
            return Err(Error::Singular { rcond: 0.0 });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &CVector) -> Result<CVector> {
        self.lu.solve(b).ok_or(Error::Singular { rcond: 0.0 })
    }

    pub fn solve_matrix(&self, b: &CMatrix) -> Result<CMatrix> {
        self.lu.solve(b).ok_or(Error::Singular { rcond: 0.0 })
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.lu.try_inverse().ok_or(Error::Singular { rcond: 0.0 })
    }

    /// `log |det|` from the diagonal of `U`.
    pub fn log_abs_det(&self) -> f64 {
        let u = self.lu.u();
        (0..self.n).map(|i| u[(i, i)].norm().ln()).sum()
    }

    pub fn determinant(&self) -> Complex64 {
        self.lu.determinant()
    }

    /// Reciprocal 1-norm condition estimate (Hager–Higham). Valid for
    /// Hermitian matrices, where the adjoint solve equals the direct solve;
    /// `H - E` with real `E` is the only case it is used for.
    pub fn rcond_hermitian(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let inv_norm = self.inverse_norm1_estimate();
        if !inv_norm.is_finite() || self.norm1 == 0.0 {
            return 0.0;
        }
        1.0 / (self.norm1 * inv_norm)
    }

    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        let one = Complex64::new(1.0, 0.0);
        let mut x = CVector::from_element(n, one / n as f64);
        let mut est = 0.0f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let Ok(y) = self.solve(&x) else { return f64::INFINITY };
            est = est.max(y.iter().map(|v| v.norm()).sum());
            let xi = y.map(|v| if v.norm() > 0.0 { v / v.norm() } else { one });
            let Ok(z) = self.solve(&xi) else { return f64::INFINITY };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, p| if p.1 > acc.1 { p } else { acc });
            let zx = z.dotc(&x).re;
            if zmax <= zx || j == last_j {
                break;
            }
            last_j = j;
            x = unit(n, j);
        }
        // alternating-sign safeguard
        let b = CVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let scale = if n > 1 { 1.0 + i as f64 / (n - 1) as f64 } else { 1.0 };
            Complex64::new(sign * scale, 0.0)
        });
        if let Ok(y) = self.solve(&b) {
            let alt = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
            est = est.max(alt);
        }
        est
    }
}

/// Inverse through LU; singular input is an error.
pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    Factorization::new(m.clone())?.inverse()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}
