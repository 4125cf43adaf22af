//! Single-site coupling densities with compact support.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Density of the i.i.d. couplings `ω_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Density {
    /// Flat on `[a, b]`. Jumps at the endpoints, so `ρ ∉ W^{1,1}`.
    Uniform { a: f64, b: f64 },
    /// Symmetric tent of half-width `half_width` around `center`.
    Triangular { center: f64, half_width: f64 },
    /// `cos²(π(x-c)/(2h)) / h` on `[c-h, c+h]`; continuously differentiable.
    Bump { center: f64, half_width: f64 },
    /// Piecewise linear through `values` at equally spaced nodes from `lo`
    /// to `hi`, renormalised to unit mass.
    Table { lo: f64, hi: f64, values: Vec<f64> },
}

impl Density {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let d = Density::Uniform { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn triangular(center: f64, half_width: f64) -> Result<Self> {
        let d = Density::Triangular { center, half_width };
        d.validate()?;
        Ok(d)
    }

    pub fn bump(center: f64, half_width: f64) -> Result<Self> {
        let d = Density::Bump { center, half_width };
        d.validate()?;
        Ok(d)
    }

    pub fn table(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        let d = Density::Table { lo, hi, values };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match self {
            Density::Uniform { a, b } => {
                if !(finite(*a) && finite(*b) && a < b) {
                    return Err(Error::Invalid(format!("uniform density needs a < b, got [{a}, {b}]")));
                }
            }
            Density::Triangular { center, half_width } | Density::Bump { center, half_width } => {
                if !(finite(*center) && finite(*half_width) && *half_width > 0.0) {
                    return Err(Error::Invalid(format!(
                        "density needs a finite center and positive half-width, got ({center}, {half_width})"
                    )));
                }
            }
            Density::Table { lo, hi, values } => {
                if !(finite(*lo) && finite(*hi) && lo < hi) {
                    return Err(Error::Invalid(format!("table density needs lo < hi, got [{lo}, {hi}]")));
                }
                if values.len() < 2 {
                    return Err(Error::Invalid("table density needs at least two nodes".into()));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Invalid("table density values must be finite and non-negative".into()));
                }
                if self.table_mass() <= 0.0 {
                    return Err(Error::Invalid("table density has zero mass".into()));
                }
            }
        }
        Ok(())
    }

    fn table_mass(&self) -> f64 {
        match self {
            Density::Table { lo, hi, values } => {
                let h = (hi - lo) / (values.len() - 1) as f64;
                values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
            }
            _ => 1.0,
        }
    }

    /// `[inf supp ρ, sup supp ρ]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Uniform { a, b } => (*a, *b),
            Density::Triangular { center, half_width } | Density::Bump { center, half_width } => {
                (center - half_width, center + half_width)
            }
            Density::Table { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// `R = max(|inf supp ρ|, |sup supp ρ|)`.
    pub fn radius(&self) -> f64 {
        let (lo, hi) = self.support();
        lo.abs().max(hi.abs())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            Density::Uniform { a, b } => 1.0 / (b - a),
            Density::Triangular { center, half_width: h } => (h - (x - center).abs()).max(0.0) / (h * h),
            Density::Bump { center, half_width: h } => {
                let c = (PI * (x - center) / (2.0 * h)).cos();
                c * c / h
            }
            Density::Table { lo, hi, values } => {
                let m = values.len() - 1;
                let h = (hi - lo) / m as f64;
                let pos = ((x - lo) / h).clamp(0.0, m as f64);
                let i = (pos.floor() as usize).min(m - 1);
                let f = pos - i as f64;
                ((1.0 - f) * values[i] + f * values[i + 1]) / self.table_mass()
            }
        }
    }

    /// Derivative where it exists (one-sided limits at kinks are not needed).
    pub fn dpdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        match self {
            Density::Uniform { .. } => 0.0,
            Density::Triangular { center, half_width: h } => -(x - center).signum() / (h * h),
            Density::Bump { center, half_width: h } => -(PI / (2.0 * h * h)) * (PI * (x - center) / h).sin(),
            Density::Table { lo, hi, values } => {
                let m = values.len() - 1;
                let h = (hi - lo) / m as f64;
                let i = (((x - lo) / h).floor() as usize).min(m - 1);
                (values[i + 1] - values[i]) / (h * self.table_mass())
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match self {
            Density::Uniform { a, b } => (x - a) / (b - a),
            Density::Triangular { center, half_width: h } => {
                let y = x - center;
                if y <= 0.0 {
                    (h + y).powi(2) / (2.0 * h * h)
                } else {
                    1.0 - (h - y).powi(2) / (2.0 * h * h)
                }
            }
            Density::Bump { center, half_width: h } => {
                let y = x - center;
                (y + h + (h / PI) * (PI * y / h).sin()) / (2.0 * h)
            }
            Density::Table { lo, hi, values } => {
                let m = values.len() - 1;
                let h = (hi - lo) / m as f64;
                let mass = self.table_mass();
                let pos = (x - lo) / h;
                let i = (pos.floor() as usize).min(m - 1);
                let f = pos - i as f64;
                let before: f64 = values[..=i].windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
                let slope = values[i + 1] - values[i];
                let partial = h * (values[i] * f + 0.5 * slope * f * f);
                ((before + partial) / mass).clamp(0.0, 1.0)
            }
        }
    }

    /// Inverse distribution function on `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let (lo, hi) = self.support();
        match self {
            Density::Uniform { a, b } => a + p * (b - a),
            Density::Triangular { center, half_width: h } => {
                if p <= 0.5 {
                    center - h + h * (2.0 * p).sqrt()
                } else {
                    center + h - h * (2.0 * (1.0 - p)).sqrt()
                }
            }
            Density::Bump { .. } => self.invert_monotone(p, lo, hi),
            Density::Table { lo, hi, values } => {
                let m = values.len() - 1;
                let h = (hi - lo) / m as f64;
                let target = p * self.table_mass();
                let mut acc = 0.0;
                for i in 0..m {
                    let cell = 0.5 * h * (values[i] + values[i + 1]);
                    if acc + cell >= target || i == m - 1 {
                        // solve h (v_i f + ½ Δ f²) = target - acc for f ∈ [0,1]
                        let rem = (target - acc).max(0.0) / h;
                        let (v, dv) = (values[i], values[i + 1] - values[i]);
                        let f = if dv.abs() < 1e-15 * v.abs().max(1e-300) {
                            if v > 0.0 {
                                rem / v
                            } else {
                                0.5
                            }
                        } else {
                            let disc = (v * v + 2.0 * dv * rem).max(0.0);
                            2.0 * rem / (v + disc.sqrt()).max(f64::MIN_POSITIVE)
                        };
                        return lo + h * (i as f64 + f.clamp(0.0, 1.0));
                    }
                    acc += cell;
                }
                *hi
            }
        }
    }

    fn invert_monotone(&self, p: f64, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        let mut x = lo + p * (hi - lo);
        for _ in 0..100 {
            let f = self.cdf(x) - p;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let d = self.pdf(x);
            let newton = if d > 0.0 { x - f / d } else { f64::NAN };
            x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Density::Uniform { a, b } => rng.random_range(*a..*b),
            _ => self.quantile(rng.random::<f64>()),
        }
    }

    /// Points where `ρ` or `ρ'` fails to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        match self {
            Density::Uniform { .. } | Density::Bump { .. } => vec![lo, hi],
            Density::Triangular { center, .. } => vec![lo, *center, hi],
            Density::Table { values, .. } => {
                let m = values.len() - 1;
                (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
            }
        }
    }

    /// `‖ρ‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Density::Uniform { a, b } => 1.0 / (b - a),
            Density::Triangular { half_width, .. } | Density::Bump { half_width, .. } => 1.0 / half_width,
            Density::Table { values, .. } => values.iter().copied().fold(0.0, f64::max) / self.table_mass(),
        }
    }

    /// `∫ρ` by adaptive quadrature (should be 1).
    pub fn mass(&self) -> f64 {
        let (lo, hi) = self.support();
        integrate(|x| self.pdf(x), lo, hi, &self.breakpoints(), Tolerance::default()).value
    }

    /// Whether `ρ ∈ W^{1,1}(R)`: continuous with integrable derivative.
    /// All built-in kinds are piecewise smooth, so this reduces to
    /// vanishing at the support endpoints.
    pub fn is_sobolev(&self) -> bool {
        match self {
            Density::Uniform { .. } => false,
            Density::Triangular { .. } | Density::Bump { .. } => true,
            Density::Table { values, .. } => values[0] == 0.0 && values[values.len() - 1] == 0.0,
        }
    }

    /// `‖ρ'‖_{L¹}` when `ρ ∈ W^{1,1}`, computed by quadrature.
    pub fn derivative_l1(&self) -> Option<f64> {
        if !self.is_sobolev() {
            return None;
        }
        let (lo, hi) = self.support();
        let q = integrate(|x| self.dpdf(x).abs(), lo, hi, &self.breakpoints(), Tolerance::default());
        Some(q.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::sample_rng;
    use crate::stats::ks_statistic;

    fn all() -> Vec<Density> {
        vec![
            Density::uniform(-0.5, 1.5).unwrap(),
            Density::triangular(0.5, 0.5).unwrap(),
            Density::bump(0.2, 0.7).unwrap(),
            Density::table(0.0, 2.0, vec![0.0, 1.0, 3.0, 0.5, 0.0]).unwrap(),
            Density::table(-1.0, 1.0, vec![2.0, 1.0, 2.0]).unwrap(),
        ]
    }

    #[test]
    fn unit_mass() {
        for d in all() {
            assert!((d.mass() - 1.0).abs() < 1e-10, "{d:?}");
        }
    }

    #[test]
    fn cdf_is_integral_of_pdf() {
        for d in all() {
            let (lo, hi) = d.support();
            for k in 1..10 {
                let x = lo + (hi - lo) * k as f64 / 10.0;
                let q = integrate(|t| d.pdf(t), lo, x, &d.breakpoints(), Tolerance::default()).value;
                assert!((q - d.cdf(x)).abs() < 1e-10, "{d:?} at {x}");
                assert!((d.quantile(d.cdf(x)) - x).abs() < 1e-9, "{d:?} at {x}");
            }
        }
    }

    #[test]
    fn sampler_ks() {
        for (j, d) in all().into_iter().enumerate() {
            let mut rng = sample_rng(11, j as u64);
            let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
            let ks = ks_statistic(&xs, |x| d.cdf(x));
            assert!(ks < 0.01, "{d:?}: KS = {ks}");
        }
    }

    #[test]
    fn derivative_norms() {
        // tent and bump: ∫|ρ'| = 2 sup ρ = 2/h
        let t = Density::triangular(0.0, 0.5).unwrap();
        assert!((t.derivative_l1().unwrap() - 4.0).abs() < 1e-10);
        let b = Density::bump(0.0, 0.25).unwrap();
        assert!((b.derivative_l1().unwrap() - 8.0).abs() < 1e-9);
        assert!(Density::uniform(0.0, 1.0).unwrap().derivative_l1().is_none());
    }

    #[test]
    fn radius_and_sup() {
        let d = Density::uniform(-2.0, 1.0).unwrap();
        assert_eq!(d.radius(), 2.0);
        assert!((d.sup_norm() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Density::uniform(1.0, 1.0).is_err());
        assert!(Density::bump(0.0, -1.0).is_err());
        assert!(Density::table(0.0, 1.0, vec![0.0, 0.0]).is_err());
        assert!(Density::table(0.0, 1.0, vec![1.0, -1.0]).is_err());
    }
}
