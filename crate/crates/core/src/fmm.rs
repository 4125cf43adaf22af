//! Monte Carlo fractional moments `E|G_Γ(z;x,y)|^t`, a-priori bound
//! experiments, decay profiles and the finite-volume criterion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{annulus_geometry, components, exterior_boundary, interior_boundary, metrics, Region, Site, SiteSet};
use crate::linalg::{unit, Factorization, RCOND_SINGULAR};
use crate::model::{check_assumptions, AlloyModel, Density, SingleSitePotential};
use crate::montecarlo::{sample_rng, Workers};
use crate::stats::{fit_line, mean_stderr, spearman, LineFit};

/// How the moment exponent is derived from `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentRule {
    /// `t = s / (2|Θ|)`.
    Theorem,
    /// `t = s`.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub s: f64,
    pub rule: ExponentRule,
    pub z_re: f64,
    pub z_im: f64,
    pub lambda: f64,
    pub samples: usize,
    pub seed: u64,
    /// Enforce `s < 1/3`, the range of the decay theorems.
    pub theorem_mode: bool,
}

pub const MIN_SAMPLES: usize = 100;

impl MomentConfig {
    pub fn new(s: f64, rule: ExponentRule, z: Complex64, lambda: f64, samples: usize, seed: u64) -> Self {
        MomentConfig {
            s,
            rule,
            z_re: z.re,
            z_im: z.im,
            lambda,
            samples,
            seed,
            theorem_mode: false,
        }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.z_re, self.z_im)
    }

    pub fn exponent(&self, support_size: usize) -> f64 {
        match self.rule {
            ExponentRule::Theorem => self.s / (2.0 * support_size as f64),
            ExponentRule::Raw => self.s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Invalid(format!("s must lie in (0,1), got {}", self.s)));
        }
        if self.theorem_mode && self.s >= 1.0 / 3.0 {
            return Err(Error::Hypothesis(format!("theorem mode needs s < 1/3, got {}", self.s)));
        }
        if self.theorem_mode && self.rule != ExponentRule::Theorem {
            return Err(Error::Hypothesis("theorem mode evaluates moments at s/(2|Θ|)".into()));
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::Invalid(format!(
                "at least {MIN_SAMPLES} samples are required, got {}",
                self.samples
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("λ must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.z_re.is_finite() && self.z_im.is_finite()) {
            return Err(Error::Invalid("z must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub x: Site,
    pub y: Site,
    pub exponent: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Samples that entered `mean`.
    pub samples: usize,
    /// Real-`z` samples with reciprocal condition below the threshold.
    pub resonant: usize,
    /// Samples whose factorization broke down; excluded everywhere.
    pub failed: usize,
    pub mean_without_resonant: f64,
    pub stderr_without_resonant: f64,
}

impl MomentEstimate {
    pub fn flagged(&self) -> bool {
        self.resonant > 0 || self.failed > 0
    }
}

struct SampleOutcome {
    values: Vec<f64>,
    resonant: bool,
}

/// `|G(z; x, y_j)|^t` for every target, one solve per sample. The column
/// at `x` gives `G(y, x) = G(x, y)` because `H` is real symmetric.
fn sample_moments(
    model: &AlloyModel,
    x: &Site,
    targets: &[Site],
    cfg: &MomentConfig,
    rho: &Density,
    workers: &Workers,
) -> Result<Vec<Option<SampleOutcome>>> {
    cfg.validate()?;
    let gamma = model.gamma();
    let ix = gamma.index_of(x).ok_or_else(|| Error::NotMember(x.to_string()))?;
    let rows: Vec<Option<usize>> = targets.iter().map(|y| gamma.index_of(y)).collect();
    let t = cfg.exponent(model.potential_profile().support_size());
    let z = cfg.z();
    let real = z.im == 0.0;
    let e = unit(gamma.len(), ix);
    Ok(workers.map(cfg.samples, |i| {
        let mut rng = sample_rng(cfg.seed, i as u64);
        let omegas = model.sample_couplings(rho, &mut rng);
        let f = Factorization::new(model.shifted(cfg.lambda, &omegas, z)).ok()?;
        let resonant = real && f.rcond_hermitian() < RCOND_SINGULAR;
        let g = f.solve(&e).ok()?;
        let values: Vec<f64> = rows
            .iter()
            .map(|r| match r {
                Some(j) => g[*j].norm().powf(t),
                None => 0.0,
            })
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(SampleOutcome { values, resonant })
    }))
}

/// Estimates `E|G(z; x, y)|^t` for every `y` in `targets` from one set of
/// disorder samples.
pub fn fractional_moments(
    model: &AlloyModel,
    x: &Site,
    targets: &[Site],
    cfg: &MomentConfig,
    rho: &Density,
    workers: &Workers,
) -> Result<Vec<MomentEstimate>> {
    let outcomes = sample_moments(model, x, targets, cfg, rho, workers)?;
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    let ok: Vec<&SampleOutcome> = outcomes.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Singular { rcond: 0.0 });
    }
    let resonant = ok.iter().filter(|o| o.resonant).count();
    let t = cfg.exponent(model.potential_profile().support_size());
    Ok(targets
        .iter()
        .enumerate()
        .map(|(j, y)| {
            let all: Vec<f64> = ok.iter().map(|o| o.values[j]).collect();
            let clean: Vec<f64> = ok.iter().filter(|o| !o.resonant).map(|o| o.values[j]).collect();
            let a = mean_stderr(&all);
            let b = if clean.is_empty() {
                mean_stderr(&[f64::NAN])
            } else {
                mean_stderr(&clean)
            };
            MomentEstimate {
                x: x.clone(),
                y: y.clone(),
                exponent: t,
                mean: a.mean,
                stderr: a.stderr,
                samples: ok.len(),
                resonant,
                failed,
                mean_without_resonant: b.mean,
                stderr_without_resonant: b.stderr,
            }
        })
        .collect())
}

pub fn fractional_moment(
    model: &AlloyModel,
    x: &Site,
    y: &Site,
    cfg: &MomentConfig,
    rho: &Density,
    workers: &Workers,
) -> Result<MomentEstimate> {
    Ok(fractional_moments(model, x, std::slice::from_ref(y), cfg, rho, workers)?.remove(0))
}

/// `Ξ_s(λ) = max(λ^{-s/(2|Θ|)}, λ^{-2s})`.
pub fn xi_s(lambda: f64, s: f64, support_size: usize) -> f64 {
    let a = lambda.powf(-s / (2.0 * support_size as f64));
    let b = lambda.powf(-2.0 * s);
    a.max(b)
}

/// The exponent of `Ξ_s` active at `λ`.
pub fn xi_exponent(lambda: f64, s: f64, support_size: usize) -> f64 {
    if lambda >= 1.0 {
        -s / (2.0 * support_size as f64)
    } else {
        -2.0 * s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriRow {
    pub lambda: f64,
    pub xi: f64,
    pub estimates: Vec<MomentEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSlope {
    pub x: Site,
    pub y: Site,
    pub fit: LineFit,
    /// Largest `estimate / Ξ_s(λ)` over the grid.
    pub max_ratio: f64,
    /// Exponent the slope is compared against.
    pub predicted: f64,
    /// `slope ≤ predicted + tolerance`.
    pub bounded: bool,
    /// `|slope - predicted| ≤ tolerance`.
    pub tracks: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub s: f64,
    pub exponent: f64,
    pub positive_rim: bool,
    pub rows: Vec<AprioriRow>,
    pub slopes: Vec<PairSlope>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Slope tolerance for the a-priori scaling checks.
pub const APRIORI_SLOPE_TOLERANCE: f64 = 0.15;

fn check_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 2 {
        return Err(Error::InsufficientData("need at least two disorder strengths".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Invalid("disorder strengths must be positive".into()));
    }
    Ok(())
}

fn sweep(
    model: &AlloyModel,
    pairs: &[(Site, Site)],
    lambdas: &[f64],
    cfg: &MomentConfig,
    rho: &Density,
    workers: &Workers,
) -> Result<Vec<AprioriRow>> {
    let theta = model.potential_profile().support_size();
    lambdas
        .iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.lambda = lambda;
            let mut estimates = Vec::with_capacity(pairs.len());
            // group by x so each sample needs one solve per distinct x
            let mut xs: Vec<&Site> = pairs.iter().map(|p| &p.0).collect();
            xs.sort();
            xs.dedup();
            let mut by_x = Vec::new();
            for x in xs {
                let ys: Vec<Site> = pairs.iter().filter(|p| &p.0 == x).map(|p| p.1.clone()).collect();
                by_x.push((x.clone(), fractional_moments(model, x, &ys, &c, rho, workers)?));
            }
            for (x, y) in pairs {
                let (_, list) = by_x.iter().find(|(bx, _)| bx == x).expect("grouped");
                estimates.push(list.iter().find(|e| &e.y == y).expect("grouped").clone());
            }
            Ok(AprioriRow {
                lambda,
                xi: xi_s(lambda, cfg.s, theta),
                estimates,
            })
        })
        .collect()
}

fn slopes(rows: &[AprioriRow], pairs: &[(Site, Site)], predicted: impl Fn(f64) -> f64) -> Result<Vec<PairSlope>> {
    let grid: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let half = crate::averaging::upper_half(&grid);
    let pred = predicted(grid[half[0]].min(grid[*half.last().expect("non-empty")]));
    pairs
        .iter()
        .enumerate()
        .map(|(p, (x, y))| {
            let xs: Vec<f64> = half.iter().map(|&i| rows[i].lambda.ln()).collect();
            let ys: Vec<f64> = half.iter().map(|&i| rows[i].estimates[p].mean.ln()).collect();
            let fit = fit_line(&xs, &ys, None)?;
            let max_ratio = rows
                .iter()
                .map(|r| r.estimates[p].mean / r.xi)
                .fold(0.0, f64::max);
            Ok(PairSlope {
                x: x.clone(),
                y: y.clone(),
                max_ratio,
                predicted: pred,
                bounded: fit.slope <= pred + APRIORI_SLOPE_TOLERANCE,
                tracks: (fit.slope - pred).abs() <= APRIORI_SLOPE_TOLERANCE,
                fit,
            })
        })
        .collect()
}

/// Part (a): `E|G|^t` along a λ-grid against `Ξ_s(λ)`. The pass criterion
/// is the one-sided slope bound in the large-λ half of the grid; whether
/// the slope also tracks the prediction is reported per pair.
pub fn apriori_experiment(
    gamma: &SiteSet,
    pairs: &[(Site, Site)],
    lambdas: &[f64],
    cfg: &MomentConfig,
    u: &SingleSitePotential,
    rho: &Density,
    workers: &Workers,
) -> Result<AprioriReport> {
    check_grid(lambdas)?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no site pairs requested".into()));
    }
    let assumptions = check_assumptions(u, rho);
    if cfg.theorem_mode && !assumptions.positive_rim {
        return Err(Error::Assumption("u must be positive on the interior boundary of its support".into()));
    }
    let model = AlloyModel::new(gamma.clone(), u.clone())?;
    let theta = u.support_size();
    let rows = sweep(&model, pairs, lambdas, cfg, rho, workers)?;
    let s = cfg.s;
    let slopes = slopes(&rows, pairs, |l| xi_exponent(l, s, theta))?;
    let pass = slopes.iter().all(|p| p.bounded);
    Ok(AprioriReport {
        s,
        exponent: cfg.exponent(theta),
        positive_rim: assumptions.positive_rim,
        rows,
        slopes,
        tolerance: APRIORI_SLOPE_TOLERANCE,
        pass,
    })
}

/// A coupling site `b` with `y ∈ Θ + b` and `(Θ + b) ∩ Γ` contained in the
/// interior boundary of `Θ + b`; the smallest such `b` is returned.
pub fn boundary_anchor(gamma: &SiteSet, theta: &SiteSet, y: &Site) -> Option<Site> {
    let mut candidates: Vec<Site> = theta.iter().map(|t| y.sub(t)).collect();
    candidates.sort();
    candidates.into_iter().find(|b| {
        let translate = theta.translate(b);
        let rim = interior_boundary(&translate);
        translate.iter().filter(|k| gamma.contains(k)).all(|k| rim.contains(k))
    })
}

/// Part (b): pairs whose second site is anchored at the edge of `Γ`,
/// moments with the raw exponent `s`, slope compared with `-s`.
pub fn apriori_boundary_experiment(
    gamma: &SiteSet,
    pairs: &[(Site, Site)],
    lambdas: &[f64],
    cfg: &MomentConfig,
    u: &SingleSitePotential,
    rho: &Density,
    workers: &Workers,
) -> Result<AprioriReport> {
    check_grid(lambdas)?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no site pairs requested".into()));
    }
    let assumptions = check_assumptions(u, rho);
    if !assumptions.positive_rim {
        return Err(Error::Assumption("u must be positive on the interior boundary of its support".into()));
    }
    for (_, y) in pairs {
        if boundary_anchor(gamma, u.support(), y).is_none() {
            return Err(Error::Geometry(format!(
                "no translate of the support through {y} meets Γ only in its interior boundary"
            )));
        }
    }
    let mut c = cfg.clone();
    c.rule = ExponentRule::Raw;
    c.theorem_mode = false;
    let model = AlloyModel::new(gamma.clone(), u.clone())?;
    let rows = sweep(&model, pairs, lambdas, &c, rho, workers)?;
    let s = cfg.s;
    let slopes = slopes(&rows, pairs, |_| -s)?;
    let pass = slopes.iter().all(|p| p.tracks);
    Ok(AprioriReport {
        s,
        exponent: s,
        positive_rim: assumptions.positive_rim,
        rows,
        slopes,
        tolerance: APRIORI_SLOPE_TOLERANCE,
        pass,
    })
}

/// Fit of `ln E|G(z; x, y_r)|^t ≈ ln A - μ r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub prefactor: f64,
    pub rate: f64,
    /// 95% interval for the rate.
    pub rate_interval: (f64, f64),
    pub r2: f64,
    pub spearman: f64,
    pub distances: Vec<i64>,
    pub estimates: Vec<MomentEstimate>,
    pub fit: LineFit,
}

impl DecayFit {
    /// Lower confidence bound on the rate above zero and `r² ≥ 0.9`.
    pub fn is_exponential(&self) -> bool {
        self.rate_interval.0 > 0.0 && self.r2 >= 0.9
    }
}

pub const MIN_DISTANCES: usize = 4;

/// Moments at `y_r = x + r e_axis` for each distance `r`.
pub fn decay_profile(
    model: &AlloyModel,
    x: &Site,
    distances: &[i64],
    axis: usize,
    cfg: &MomentConfig,
    rho: &Density,
    workers: &Workers,
) -> Result<DecayFit> {
    let d = model.dim();
    if axis >= d {
        return Err(Error::Invalid(format!("axis {axis} out of range for dimension {d}")));
    }
    let mut distances: Vec<i64> = distances.to_vec();
    distances.sort_unstable();
    distances.dedup();
    let targets: Vec<Site> = distances.iter().map(|&r| x.add(&Site::axis(d, axis, r))).collect();
    if let Some(y) = targets.iter().find(|y| !model.gamma().contains(y)) {
        return Err(Error::NotMember(format!("{y} (requested distance leaves Γ)")));
    }
    if distances.len() < MIN_DISTANCES {
        return Err(Error::InsufficientData(format!(
            "a decay fit needs {MIN_DISTANCES} distinct distances, got {}",
            distances.len()
        )));
    }
    let estimates = fractional_moments(model, x, &targets, cfg, rho, workers)?;
    let usable: Vec<usize> = (0..estimates.len())
        .filter(|&i| estimates[i].mean > 0.0 && estimates[i].mean.is_finite())
        .collect();
    if usable.len() < MIN_DISTANCES {
        return Err(Error::InsufficientData(format!(
            "only {} distances have a positive finite estimate",
            usable.len()
        )));
    }
    let rs: Vec<f64> = usable.iter().map(|&i| distances[i] as f64).collect();
    let ls: Vec<f64> = usable.iter().map(|&i| estimates[i].mean.ln()).collect();
    let fit = fit_line(&rs, &ls, None)?;
    let (lo, hi) = fit.slope_interval(0.95);
    Ok(DecayFit {
        prefactor: fit.intercept.exp(),
        rate: -fit.slope,
        rate_interval: (-hi, -lo),
        r2: fit.r2,
        spearman: spearman(&rs, &ls)?,
        distances,
        estimates,
        fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionTerm {
    pub w: Site,
    /// `false` when `w` is cut off from `x`; the entry is then zero.
    pub connected: bool,
    pub estimate: Option<MomentEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub x: Site,
    pub l: i64,
    pub lambda: f64,
    pub exponent: f64,
    pub terms: Vec<CriterionTerm>,
    pub raw_sum: f64,
    pub raw_sum_stderr: f64,
    /// `L^{3(d-1)}`.
    pub volume_factor: f64,
    pub xi: f64,
    /// `λ^{-s/|Θ|}`.
    pub lambda_factor: f64,
    /// Product of the three factors above.
    pub prefactor: f64,
    /// `B_s · prefactor · raw_sum` when `B_s` is given.
    pub b_s: Option<f64>,
    /// The same with `B_s = 1`; a diagnostic.
    pub b_diagnostic: f64,
    /// `|ln b| / (L + diam Θ + 2)` for `b < 1`.
    pub predicted_rate: Option<f64>,
    /// `A / C_s = Ξ_s(λ) / b`.
    pub predicted_prefactor_ratio: Option<f64>,
}

/// `L^{3(d-1)} · Ξ_s(λ) · λ^{-s/|Θ|}`, cross-checked against the form
/// with `λ^{-2s/(2|Θ|)}`.
pub fn criterion_prefactor(l: i64, dim: usize, lambda: f64, s: f64, support_size: usize) -> (f64, f64, f64) {
    let volume = (l as f64).powi(3 * (dim as i32 - 1));
    let xi = xi_s(lambda, s, support_size);
    let lam = lambda.powf(-s / support_size as f64);
    let other = lambda.powf(-2.0 * s / (2.0 * support_size as f64));
    assert!(
        (lam - other).abs() <= 1e-14 * lam.abs().max(other.abs()),
        "prefactor spellings disagree: {lam} vs {other}"
    );
    (volume, xi, lam)
}

/// Sum over the outer boundary of `W_x` of `E|G_{Λ∖W_x}(z; x, w)|^t`.
/// `Λ` must lie in `Γ`; the annulus is built inside `Γ`.
#[allow(clippy::too_many_arguments)]
pub fn finite_volume_criterion(
    gamma: &SiteSet,
    lambda_set: &SiteSet,
    x: &Site,
    l: i64,
    cfg: &MomentConfig,
    u: &SingleSitePotential,
    rho: &Density,
    b_s: Option<f64>,
    workers: &Workers,
) -> Result<CriterionResult> {
    cfg.validate()?;
    if !lambda_set.is_subset(gamma) {
        return Err(Error::Geometry("Λ must be a subset of Γ".into()));
    }
    if let Some(b) = b_s {
        if !(b > 0.0) {
            return Err(Error::Invalid(format!("B_s must be positive, got {b}")));
        }
    }
    let region = Region::Finite(gamma.clone());
    let geo = annulus_geometry(&region, u.support(), x, l)?;
    let outer = exterior_boundary(&geo.w, &region);
    let domain = lambda_set.difference(&geo.w);
    if !domain.contains(x) {
        return Err(Error::NotMember(format!("{x} (x must lie in Λ ∖ W_x)")));
    }
    let x_part = components(&domain).component_of(x)?.clone();
    let model = AlloyModel::new(x_part.clone(), u.clone())?;
    let reachable: Vec<Site> = outer.iter().filter(|w| x_part.contains(w)).cloned().collect();
    let estimates = if reachable.is_empty() {
        Vec::new()
    } else {
        fractional_moments(&model, x, &reachable, cfg, rho, workers)?
    };
    let terms: Vec<CriterionTerm> = outer
        .iter()
        .map(|w| CriterionTerm {
            w: w.clone(),
            connected: x_part.contains(w),
            estimate: estimates.iter().find(|e| &e.y == w).cloned(),
        })
        .collect();
    let raw_sum: f64 = estimates.iter().map(|e| e.mean).sum();
    let raw_sum_stderr = estimates.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt();
    let theta = u.support_size();
    let (volume_factor, xi, lambda_factor) = criterion_prefactor(l, x.dim(), cfg.lambda, cfg.s, theta);
    let prefactor = volume_factor * xi * lambda_factor;
    let b_diagnostic = prefactor * raw_sum;
    let diam = metrics(u.support())?.diam_inf;
    let b = b_s.map(|bs| bs * b_diagnostic).unwrap_or(b_diagnostic);
    let (predicted_rate, predicted_prefactor_ratio) = if b > 0.0 && b < 1.0 {
        (Some(b.ln().abs() / (l + diam + 2) as f64), Some(xi / b))
    } else {
        (None, None)
    };
    Ok(CriterionResult {
        x: x.clone(),
        l,
        lambda: cfg.lambda,
        exponent: cfg.exponent(theta),
        terms,
        raw_sum,
        raw_sum_stderr,
        volume_factor,
        xi,
        lambda_factor,
        prefactor,
        b_s: b_s.map(|bs| bs * b_diagnostic),
        b_diagnostic,
        predicted_rate,
        predicted_prefactor_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cube;
    use crate::linalg::c;
    use crate::quadrature::{integrate, Tolerance};
    use crate::resolvent::green;

    fn chain(n: i64) -> SiteSet {
        SiteSet::line(0..n)
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi_s(1.0, 0.3, 2), 1.0);
        assert!((xi_s(4.0, 0.3, 2) - 4f64.powf(-0.075)).abs() < 1e-15);
        assert!((xi_s(4.0, 0.3, 2) - 0.9013).abs() < 1e-4);
        assert!((xi_s(0.5, 0.3, 2) - 1.5157).abs() < 1e-4);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MomentConfig::new(0.3, ExponentRule::Theorem, c(0.0, 1.0), 1.0, 100, 0);
        assert!(cfg.validate().is_ok());
        assert!((cfg.exponent(3) - 0.05).abs() < 1e-15);
        cfg.samples = 99;
        assert!(cfg.validate().is_err());
        cfg.samples = 100;
        cfg.s = 0.4;
        cfg.theorem_mode = true;
        assert!(matches!(cfg.validate(), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn zero_disorder_is_deterministic() {
        let gamma = chain(9);
        let u = SingleSitePotential::line(&[1.0, -0.5, 1.0]).unwrap();
        let model = AlloyModel::new(gamma.clone(), u.clone()).unwrap();
        let rho = Density::uniform(0.0, 1.0).unwrap();
        let cfg = MomentConfig::new(0.5, ExponentRule::Raw, c(0.3, 0.2), 0.0, 100, 3);
        let est = fractional_moment(&model, &Site::from([2]), &Site::from([6]), &cfg, &rho, &Workers::serial()).unwrap();
        let field = crate::model::DisorderField::from_fn(model.couplings().clone(), |_| 0.0);
        let h = crate::model::hamiltonian(&gamma, 0.0, &u, &field).unwrap();
        let g = green(&h, c(0.3, 0.2), &[(Site::from([2]), Site::from([6]))]).unwrap()[0];
        assert!((est.mean - g.norm().sqrt()).abs() < 1e-13);
        assert!(est.stderr < 1e-13);
    }

    #[test]
    fn single_site_matches_quadrature() {
        let gamma = SiteSet::line([0]);
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let model = AlloyModel::new(gamma, u).unwrap();
        let rho = Density::uniform(0.0, 1.0).unwrap();
        let lambda = 2.0;
        let cfg = MomentConfig::new(0.5, ExponentRule::Raw, c(0.0, 1.0), lambda, 20_000, 5);
        let o = Site::from([0]);
        let est = fractional_moment(&model, &o, &o, &cfg, &rho, &Workers::serial()).unwrap();
        let exact = integrate(
            |w| (lambda * lambda * w * w + 1.0).powf(-0.25),
            0.0,
            1.0,
            &[],
            Tolerance::default(),
        )
        .value;
        assert!((est.mean - exact).abs() < 3.0 * est.stderr, "{} vs {exact} ± {}", est.mean, est.stderr);
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let gamma = chain(15);
        let u = SingleSitePotential::line(&[1.0, -0.5, 1.0]).unwrap();
        let model = AlloyModel::new(gamma, u).unwrap();
        let rho = Density::triangular(0.5, 0.5).unwrap();
        let cfg = MomentConfig::new(0.3, ExponentRule::Theorem, c(0.5, 0.01), 10.0, 400, 9);
        let ts = [Site::from([3]), Site::from([9])];
        let a = fractional_moments(&model, &Site::from([1]), &ts, &cfg, &rho, &Workers::serial()).unwrap();
        let b = fractional_moments(&model, &Site::from([1]), &ts, &cfg, &rho, &Workers::new(4).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn anchors_at_the_edge() {
        let theta = SiteSet::line([0, 1, 2]);
        let gamma = chain(20);
        assert_eq!(boundary_anchor(&gamma, &theta, &Site::from([0])), Some(Site::from([-2])));
        assert_eq!(boundary_anchor(&gamma, &theta, &Site::from([10])), None);
        let full = cube(3, &Site::origin(2));
        let sq = SiteSet::new(2, [Site::from([0, 0]), Site::from([1, 0]), Site::from([0, 1]), Site::from([1, 1])]).unwrap();
        assert!(boundary_anchor(&full, &sq, &Site::from([3, 3])).is_some());
    }

    #[test]
    fn prefactor_spellings_agree() {
        for l in [0.5, 3.0, 80.0] {
            let (v, xi, lam) = criterion_prefactor(5, 1, l, 0.3, 3);
            assert_eq!(v, 1.0);
            assert!(xi > 0.0 && lam > 0.0);
        }
        assert_eq!(criterion_prefactor(4, 2, 1.0, 0.3, 1).0, 64.0);
    }

    #[test]
    fn criterion_cut_off_terms_are_zero() {
        let gamma = chain(41);
        let u = SingleSitePotential::line(&[1.0, -0.5, 1.0]).unwrap();
        let rho = Density::triangular(0.5, 0.5).unwrap();
        let cfg = MomentConfig::new(0.3, ExponentRule::Theorem, c(0.5, 0.01), 40.0, 200, 2);
        let r = finite_volume_criterion(&gamma, &gamma, &Site::from([20]), 5, &cfg, &u, &rho, Some(2.0), &Workers::serial()).unwrap();
        assert!(r.terms.iter().any(|t| !t.connected));
        for t in &r.terms {
            assert_eq!(t.connected, t.estimate.is_some());
        }
        assert!(r.raw_sum > 0.0);
        assert!((r.b_s.unwrap() - 2.0 * r.b_diagnostic).abs() < 1e-15);
    }

    #[test]
    fn free_decay_matches_combes_thomas_scale() {
        // at λ = 0, z = 5 the chain resolvent decays like e^{-κ r}, cosh κ = 5/2
        let gamma = chain(61);
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let model = AlloyModel::new(gamma, u).unwrap();
        let rho = Density::uniform(0.0, 1.0).unwrap();
        let cfg = MomentConfig::new(0.5, ExponentRule::Raw, c(5.0, 0.0), 0.0, 100, 1);
        let fit = decay_profile(&model, &Site::from([10]), &[2, 4, 6, 8, 10, 12], 0, &cfg, &rho, &Workers::serial()).unwrap();
        let kappa = (2.5f64).acosh();
        assert!((fit.rate - 0.5 * kappa).abs() < 1e-6, "{} vs {}", fit.rate, 0.5 * kappa);
        let ct = crate::resolvent::CombesThomas::new(1, 3.0).unwrap();
        let gamma_ct = ct.gamma.max(1e-3);
        assert!(fit.rate / 0.5 >= gamma_ct * 0.5 || ct.gamma <= 0.0);
    }

    #[test]
    fn decay_needs_four_distances() {
        let model = AlloyModel::new(chain(10), SingleSitePotential::line(&[1.0]).unwrap()).unwrap();
        let rho = Density::uniform(0.0, 1.0).unwrap();
        let cfg = MomentConfig::new(0.5, ExponentRule::Raw, c(0.0, 1.0), 1.0, 100, 1);
        assert!(matches!(
            decay_profile(&model, &Site::from([0]), &[1, 2, 2, 3], 0, &cfg, &rho, &Workers::serial()),
            Err(Error::InsufficientData(_))
        ));
    }
}
