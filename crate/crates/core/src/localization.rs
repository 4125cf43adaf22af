//! Box regularity at real energies, certified energy scans, two-box
//! probabilities, eigenvalue counts and eigenvector decay.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cube, interior_boundary, metrics, Site, SiteSet};
use crate::model::{AlloyModel, Density, LatticeOperator, SingleSitePotential};
use crate::montecarlo::{sample_rng, Workers};
use crate::stats::{fit_line, mann_whitney, mean_stderr, median, wilson_interval, LineFit, MeanStderr};

/// Relative distance to the spectrum below which `E` counts as an
/// eigenvalue.
pub const IN_SPECTRUM_RELATIVE: f64 = 1e-12;

/// Eigendecomposition of a real symmetric box Hamiltonian.
#[derive(Clone, Debug)]
pub struct BoxSpectrum {
    index: SiteSet,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    norm: f64,
}

impl BoxSpectrum {
    pub fn new(index: SiteSet, h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != index.len() || h.ncols() != index.len() {
            return Err(Error::Dimension {
                expected: index.len(),
                found: h.nrows(),
            });
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..index.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(index.len(), index.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(BoxSpectrum {
            index,
            values,
            vectors,
            norm,
        })
    }

    pub fn from_operator(h: &LatticeOperator) -> Result<Self> {
        if !h.is_hermitian(1e-12) || h.matrix.iter().any(|z| z.im != 0.0) {
            return Err(Error::Invalid("box Hamiltonian must be real symmetric".into()));
        }
        Self::new(h.index.clone(), h.real())
    }

    pub fn index(&self) -> &SiteSet {
        &self.index
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvector(&self, n: usize) -> DVector<f64> {
        self.vectors.column(n).into_owned()
    }

    /// Distance from `[lo, hi]` to the spectrum.
    pub fn distance(&self, lo: f64, hi: f64) -> f64 {
        let i = self.values.partition_point(|&v| v < lo);
        if i < self.values.len() && self.values[i] <= hi {
            return 0.0;
        }
        let below = if i > 0 { lo - self.values[i - 1] } else { f64::INFINITY };
        let above = if i < self.values.len() { self.values[i] - hi } else { f64::INFINITY };
        below.min(above)
    }

    pub fn in_spectrum(&self, e: f64) -> bool {
        self.distance(e, e) < IN_SPECTRUM_RELATIVE * self.norm.max(1.0)
    }

    /// `G(E; x, w)` for each `w`, from the spectral expansion.
    pub fn green_row(&self, x: &Site, targets: &[Site], e: f64) -> Result<Vec<f64>> {
        let i = self.index.index_of(x).ok_or_else(|| Error::NotMember(x.to_string()))?;
        let weights: Vec<f64> = (0..self.values.len())
            .map(|n| self.vectors[(i, n)] / (self.values[n] - e))
            .collect();
        targets
            .iter()
            .map(|w| {
                let j = self.index.index_of(w).ok_or_else(|| Error::NotMember(w.to_string()))?;
                Ok((0..self.values.len()).map(|n| weights[n] * self.vectors[(j, n)]).sum())
            })
            .collect()
    }

    /// Eigenvalues in `[a, b]`.
    pub fn count(&self, a: f64, b: f64) -> usize {
        self.values.partition_point(|&v| v <= b) - self.values.partition_point(|&v| v < a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularityStatus {
    Regular,
    Singular,
    InSpectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub center: Site,
    pub l: i64,
    pub energy: f64,
    pub rate: f64,
    pub status: RegularityStatus,
    /// Boundary site attaining the maximum; absent when `E ∈ σ(H)`.
    pub witness: Option<Site>,
    pub value: f64,
    /// `e^{-mL}`.
    pub threshold: f64,
}

impl RegularityVerdict {
    pub fn is_regular(&self) -> bool {
        self.status == RegularityStatus::Regular
    }
}

/// `max_{w ∈ ∂^i Λ} |G(E; x, w)|` and its maximiser.
fn boundary_max(spec: &BoxSpectrum, x: &Site, rim: &[Site], e: f64) -> Result<(f64, Site)> {
    let row = spec.green_row(x, rim, e)?;
    let (k, v) = row
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v.abs() > acc.1 { (k, v.abs()) } else { acc });
    Ok((v, rim[k].clone()))
}

fn rim_of(spec: &BoxSpectrum) -> Vec<Site> {
    interior_boundary(spec.index()).sites().to_vec()
}

/// `(m, E)`-regularity of the box `spec` around `x` with side parameter
/// `l`: `max_{w ∈ ∂^i Λ} |G(E; x, w)| ≤ e^{-m l}`.
pub fn regularity(spec: &BoxSpectrum, x: &Site, l: i64, e: f64, m: f64) -> Result<RegularityVerdict> {
    if l < 1 {
        return Err(Error::Invalid(format!("box size must be at least 1, got {l}")));
    }
    if !e.is_finite() {
        return Err(Error::Invalid("energy must be finite".into()));
    }
    let threshold = (-m * l as f64).exp();
    if spec.in_spectrum(e) {
        return Ok(RegularityVerdict {
            center: x.clone(),
            l,
            energy: e,
            rate: m,
            status: RegularityStatus::InSpectrum,
            witness: None,
            value: f64::INFINITY,
            threshold,
        });
    }
    let (value, witness) = boundary_max(spec, x, &rim_of(spec), e)?;
    Ok(RegularityVerdict {
        center: x.clone(),
        l,
        energy: e,
        rate: m,
        status: if value <= threshold {
            RegularityStatus::Regular
        } else {
            RegularityStatus::Singular
        },
        witness: Some(witness),
        value,
        threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub lo: f64,
    pub hi: f64,
    /// Boundary maximum at the midpoint.
    pub value: f64,
    /// Propagated bound `(width/2) / dist([lo,hi], σ)²`.
    pub margin: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub threshold: f64,
    pub cells: Vec<ScanCell>,
}

impl ScanResult {
    pub fn certified_fraction(&self) -> f64 {
        let total: f64 = self.cells.iter().map(|c| c.hi - c.lo).sum();
        let ok: f64 = self.cells.iter().filter(|c| c.certified).map(|c| c.hi - c.lo).sum();
        if total > 0.0 {
            ok / total
        } else {
            0.0
        }
    }
}

/// Splits `[a, b]` into `ceil((b-a)/Δ)` equal cells and certifies a cell
/// when the midpoint value plus the resolvent Lipschitz margin stays below
/// `e^{-m l}`. Grids whose cell counts divide each other refine
/// monotonically.
pub fn certified_scan(spec: &BoxSpectrum, x: &Site, l: i64, interval: (f64, f64), m: f64, delta: f64) -> Result<ScanResult> {
    let (a, b) = interval;
    if !(delta > 0.0) || !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::Invalid(format!("bad scan: [{a}, {b}] with Δ = {delta}")));
    }
    let n = (((b - a) / delta).ceil() as usize).max(1);
    let threshold = (-m * l as f64).exp();
    let rim = rim_of(spec);
    let cells = (0..n)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / n as f64;
            let hi = a + (b - a) * (i + 1) as f64 / n as f64;
            let mid = 0.5 * (lo + hi);
            let d = spec.distance(lo, hi);
            if d <= IN_SPECTRUM_RELATIVE * spec.norm.max(1.0) {
                return Ok(ScanCell {
                    lo,
                    hi,
                    value: f64::INFINITY,
                    margin: f64::INFINITY,
                    certified: false,
                });
            }
            let (value, _) = boundary_max(spec, x, &rim, mid)?;
            let margin = 0.5 * (hi - lo) / (d * d);
            Ok(ScanCell {
                lo,
                hi,
                value,
                margin,
                certified: value + margin <= threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult { threshold, cells })
}

/// `m = μ/8` from a fitted decay rate.
pub fn rate_from_decay(mu: f64) -> f64 {
    mu / 8.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBoxConfig {
    pub l: i64,
    pub x: Site,
    pub y: Site,
    pub interval: (f64, f64),
    pub rate: f64,
    pub delta: f64,
    pub lambda: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBoxReport {
    pub lambda: f64,
    pub l: i64,
    pub samples: usize,
    pub successes: usize,
    pub probability: f64,
    /// 95% Wilson interval.
    pub interval: (f64, f64),
    /// Mean share of `I` certified by neither box.
    pub uncertified: f64,
}

/// Probability that for every `E ∈ I` one of the boxes around `x` and `y`
/// is `(m, E)`-regular, with uncovered cells counted against the event.
pub fn two_box_experiment(
    cfg: &TwoBoxConfig,
    u: &SingleSitePotential,
    rho: &Density,
    workers: &Workers,
) -> Result<TwoBoxReport> {
    let diam = metrics(u.support())?.diam_inf;
    let need = 2 * cfg.l + diam + 1;
    if cfg.x.dist_inf(&cfg.y) < need {
        return Err(Error::Hypothesis(format!(
            "boxes must be separated by at least 2L + diam(Θ) + 1 = {need}, got {}",
            cfg.x.dist_inf(&cfg.y)
        )));
    }
    if cfg.samples == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let bx = AlloyModel::new(cube(cfg.l, &cfg.x), u.clone())?;
    let by = AlloyModel::new(cube(cfg.l, &cfg.y), u.clone())?;
    let outcomes = workers.try_map(cfg.samples, |i| {
        let mut rng = sample_rng(cfg.seed, i as u64);
        let wx = bx.sample_couplings(rho, &mut rng);
        let wy = by.sample_couplings(rho, &mut rng);
        let sx = BoxSpectrum::new(bx.gamma().clone(), bx.real_hamiltonian(cfg.lambda, &wx))?;
        let sy = BoxSpectrum::new(by.gamma().clone(), by.real_hamiltonian(cfg.lambda, &wy))?;
        let a = certified_scan(&sx, &cfg.x, cfg.l, cfg.interval, cfg.rate, cfg.delta)?;
        let b = certified_scan(&sy, &cfg.y, cfg.l, cfg.interval, cfg.rate, cfg.delta)?;
        let width = cfg.interval.1 - cfg.interval.0;
        let uncovered: f64 = a
            .cells
            .iter()
            .zip(&b.cells)
            .filter(|(p, q)| !p.certified && !q.certified)
            .map(|(p, _)| p.hi - p.lo)
            .sum();
        let all = a.cells.iter().zip(&b.cells).all(|(p, q)| p.certified || q.certified);
        Ok((all, if width > 0.0 { uncovered / width } else { 0.0 }))
    })?;
    let successes = outcomes.iter().filter(|o| o.0).count();
    let uncertified = mean_stderr(&outcomes.iter().map(|o| o.1).collect::<Vec<_>>()).mean;
    Ok(TwoBoxReport {
        lambda: cfg.lambda,
        l: cfg.l,
        samples: cfg.samples,
        successes,
        probability: successes as f64 / cfg.samples as f64,
        interval: wilson_interval(successes, cfg.samples, 0.95),
        uncertified,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerRow {
    pub width: f64,
    pub count: MeanStderr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub sites: usize,
    pub center: f64,
    pub rows: Vec<WegnerRow>,
    pub fit: LineFit,
    pub exponent: f64,
    /// `Σ_widths E[count] / |Λ|`.
    pub count_per_site: f64,
}

impl WegnerReport {
    /// Fitted exponent at least `s - 0.15`.
    pub fn satisfies(&self, s: f64) -> bool {
        self.exponent >= s - 0.15
    }
}

/// Eigenvalue counts in `[c - w/2, c + w/2]` for each width `w`.
#[allow(clippy::too_many_arguments)]
pub fn wegner_experiment(
    gamma: &SiteSet,
    u: &SingleSitePotential,
    rho: &Density,
    lambda: f64,
    center: f64,
    widths: &[f64],
    samples: usize,
    seed: u64,
    workers: &Workers,
) -> Result<WegnerReport> {
    if widths.len() < 2 || widths.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Invalid("need at least two positive widths".into()));
    }
    if samples == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let model = AlloyModel::new(gamma.clone(), u.clone())?;
    let counts: Vec<Vec<f64>> = workers.map(samples, |i| {
        let mut rng = sample_rng(seed, i as u64);
        let omegas = model.sample_couplings(rho, &mut rng);
        let values = model.real_hamiltonian(lambda, &omegas).symmetric_eigenvalues();
        widths
            .iter()
            .map(|w| {
                let (a, b) = (center - w / 2.0, center + w / 2.0);
                values.iter().filter(|&&v| v >= a && v <= b).count() as f64
            })
            .collect()
    });
    let rows: Vec<WegnerRow> = widths
        .iter()
        .enumerate()
        .map(|(j, &width)| WegnerRow {
            width,
            count: mean_stderr(&counts.iter().map(|c| c[j]).collect::<Vec<_>>()),
        })
        .collect();
    let positive: Vec<&WegnerRow> = rows.iter().filter(|r| r.count.mean > 0.0).collect();
    let fit = fit_line(
        &positive.iter().map(|r| r.width.ln()).collect::<Vec<_>>(),
        &positive.iter().map(|r| r.count.mean.ln()).collect::<Vec<_>>(),
        None,
    )?;
    let count_per_site = rows.iter().map(|r| r.count.mean).sum::<f64>() / gamma.len() as f64;
    Ok(WegnerReport {
        sites: gamma.len(),
        center,
        rows,
        exponent: fit.slope,
        fit,
        count_per_site,
    })
}

/// `|a/b - 1|` for the per-site counts of two box sizes.
pub fn volume_linearity(a: &WegnerReport, b: &WegnerReport) -> f64 {
    (a.count_per_site / b.count_per_site - 1.0).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub sample: usize,
    pub energy: f64,
    pub center: Site,
    /// `-slope` of `ln max_{|y-x|∞=r} |ψ(y)|` against `r`.
    pub rate: f64,
    pub ipr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenlocReport {
    pub lambda: f64,
    pub sites: usize,
    pub records: Vec<EigenRecord>,
    pub median_rate: f64,
    pub median_ipr: f64,
}

impl EigenlocReport {
    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rate).collect()
    }

    pub fn iprs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ipr).collect()
    }
}

/// Shell maxima of `|v|` around `center` at distances `r_min..`.
fn shell_profile(index: &SiteSet, v: &DVector<f64>, center: &Site, r_min: i64) -> Vec<(f64, f64)> {
    let mut shells: Vec<f64> = Vec::new();
    for (i, s) in index.iter().enumerate() {
        let r = s.dist_inf(center) as usize;
        if shells.len() <= r {
            shells.resize(r + 1, 0.0);
        }
        shells[r] = shells[r].max(v[i].abs());
    }
    shells
        .iter()
        .enumerate()
        .filter(|(r, m)| *r as i64 >= r_min && **m > 0.0)
        .map(|(r, m)| (r as f64, m.ln()))
        .collect()
}

/// Per-eigenvector decay rates and IPRs for `H_Λ` on the box `cube(l, 0)`.
/// Tails are taken from one inverse-iteration step, which resolves
/// amplitudes far below the accuracy of the dense eigenvectors.
#[allow(clippy::too_many_arguments)]
pub fn eigen_localization(
    l: i64,
    dim: usize,
    u: &SingleSitePotential,
    rho: &Density,
    lambda: f64,
    samples: usize,
    window: Option<(f64, f64)>,
    seed: u64,
    workers: &Workers,
) -> Result<EigenlocReport> {
    if l < 4 {
        return Err(Error::Invalid(format!("box half-width must be at least 4, got {l}")));
    }
    let gamma = cube(l, &Site::origin(dim));
    let model = AlloyModel::new(gamma.clone(), u.clone())?;
    let core = (l as f64 / 4.0).ceil() as i64;
    let per_sample = workers.try_map(samples, |i| {
        let mut rng = sample_rng(seed, i as u64);
        let omegas = model.sample_couplings(rho, &mut rng);
        let h = model.real_hamiltonian(lambda, &omegas);
        let spec = BoxSpectrum::new(gamma.clone(), h.clone())?;
        let scale = spec.norm.max(1.0);
        let mut out = Vec::new();
        for (n, &e) in spec.eigenvalues().iter().enumerate() {
            if let Some((a, b)) = window {
                if e < a || e > b {
                    continue;
                }
            }
            let psi = spec.eigenvector(n);
            let ipr = psi.iter().map(|v| v.powi(4)).sum::<f64>();
            let imax = psi.iamax();
            let center = gamma.get(imax).clone();
            let shift = e + 1e-10 * scale;
            let mut m = h.clone();
            for k in 0..m.nrows() {
                m[(k, k)] -= shift;
            }
            let mut rhs = DVector::zeros(m.nrows());
            rhs[imax] = 1.0;
            let v = m.lu().solve(&rhs).unwrap_or_else(|| psi.clone());
            let profile = shell_profile(&gamma, &v, &center, core);
            let rate = if profile.len() >= 2 {
                let (xs, ys): (Vec<f64>, Vec<f64>) = profile.into_iter().unzip();
                -fit_line(&xs, &ys, None)?.slope
            } else {
                f64::NAN
            };
            out.push(EigenRecord {
                sample: i,
                energy: e,
                center,
                rate,
                ipr,
            });
        }
        Ok(out)
    })?;
    let records: Vec<EigenRecord> = per_sample.into_iter().flatten().filter(|r| r.rate.is_finite()).collect();
    if records.is_empty() {
        return Err(Error::InsufficientData("no eigenvectors in the window".into()));
    }
    let rates: Vec<f64> = records.iter().map(|r| r.rate).collect();
    let iprs: Vec<f64> = records.iter().map(|r| r.ipr).collect();
    Ok(EigenlocReport {
        lambda,
        sites: gamma.len(),
        median_rate: median(&rates),
        median_ipr: median(&iprs),
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationContrast {
    pub strong_median_rate: f64,
    pub free_median_rate: f64,
    /// One-sided rank test that strong-disorder IPRs are larger.
    pub ipr_p_value: f64,
    /// One-sided rank test that strong-disorder rates are larger.
    pub rate_p_value: f64,
}

pub fn contrast(strong: &EigenlocReport, free: &EigenlocReport) -> Result<LocalizationContrast> {
    Ok(LocalizationContrast {
        strong_median_rate: strong.median_rate,
        free_median_rate: free.median_rate,
        ipr_p_value: mann_whitney(&strong.iprs(), &free.iprs())?.p_greater,
        rate_p_value: mann_whitney(&strong.rates(), &free.rates())?.p_greater,
    })
}

/// Multiscale schedule `L_k = round(L_{k-1}^α)` with `1 < α < 2p/d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSequence {
    pub l0: i64,
    pub alpha: f64,
    pub scales: Vec<i64>,
}

impl ScaleSequence {
    pub fn new(l0: i64, alpha: f64, p: f64, dim: usize, count: usize) -> Result<Self> {
        if l0 < 2 {
            return Err(Error::Invalid(format!("initial scale must be at least 2, got {l0}")));
        }
        if !(p > dim as f64) {
            return Err(Error::Invalid(format!("need p > d, got p = {p}, d = {dim}")));
        }
        if !(alpha > 1.0 && alpha < 2.0 * p / dim as f64) {
            return Err(Error::Invalid(format!(
                "α must lie in (1, 2p/d) = (1, {}), got {alpha}",
                2.0 * p / dim as f64
            )));
        }
        let mut scales = vec![l0];
        while scales.len() < count {
            let last = *scales.last().expect("non-empty") as f64;
            let next = last.powf(alpha).round();
            if next > i64::MAX as f64 / 2.0 {
                return Err(Error::Resource("scale sequence overflows".into()));
            }
            if next <= last {
                return Err(Error::Invalid(format!(
                    "round({last}^{alpha}) = {next} does not grow; raise the initial scale or α"
                )));
            }
            scales.push(next as i64);
        }
        Ok(ScaleSequence { l0, alpha, scales })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DisorderField;

    fn free_box(l: i64) -> BoxSpectrum {
        let gamma = cube(l, &Site::from([0]));
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let model = AlloyModel::new(gamma.clone(), u).unwrap();
        let w = vec![0.0; model.couplings().len()];
        BoxSpectrum::new(gamma, model.real_hamiltonian(0.0, &w)).unwrap()
    }

    #[test]
    fn far_energy_is_regular() {
        let spec = free_box(10);
        let v = regularity(&spec, &Site::from([0]), 10, 5.0, 0.1).unwrap();
        assert!(v.is_regular(), "{v:?}");
        assert!(v.value <= (-1.0f64).exp());
    }

    #[test]
    fn eigenvalue_is_in_spectrum() {
        let spec = free_box(6);
        let e = spec.eigenvalues()[3];
        let v = regularity(&spec, &Site::from([0]), 6, e, 0.1).unwrap();
        assert_eq!(v.status, RegularityStatus::InSpectrum);
        assert!(!v.is_regular());
    }

    #[test]
    fn spectral_green_matches_solve() {
        let gamma = cube(5, &Site::from([0]));
        let u = SingleSitePotential::line(&[1.0, -0.5]).unwrap();
        let model = AlloyModel::new(gamma.clone(), u.clone()).unwrap();
        let mut rng = sample_rng(1, 0);
        let w = model.sample_couplings(&Density::uniform(0.0, 1.0).unwrap(), &mut rng);
        let spec = BoxSpectrum::new(gamma.clone(), model.real_hamiltonian(3.0, &w)).unwrap();
        let field = DisorderField::new(model.couplings().clone(), w).unwrap();
        let h = crate::model::hamiltonian(&gamma, 3.0, &u, &field).unwrap();
        let e = 0.123;
        let sites = [Site::from([-5]), Site::from([5])];
        let a = spec.green_row(&Site::from([0]), &sites, e).unwrap();
        let pairs: Vec<_> = sites.iter().map(|s| (Site::from([0]), s.clone())).collect();
        let b = crate::resolvent::green(&h, num_complex::Complex64::new(e, 0.0), &pairs).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q.re).abs() < 1e-10 * (1.0 + q.norm()));
        }
    }

    #[test]
    fn gap_scan_is_fully_certified() {
        let spec = free_box(10);
        let r = certified_scan(&spec, &Site::from([0]), 10, (4.0, 6.0), 0.1, 0.1).unwrap();
        assert!(r.cells.iter().all(|c| c.certified));
        assert_eq!(r.certified_fraction(), 1.0);
    }

    #[test]
    fn cell_holding_eigenvalue_is_uncertified() {
        let spec = free_box(6);
        let e = spec.eigenvalues()[5];
        let r = certified_scan(&spec, &Site::from([0]), 6, (e - 0.05, e + 0.05), 0.0, 0.1).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(!r.cells[0].certified);
    }

    #[test]
    fn refinement_grows_certified_set() {
        let gamma = cube(6, &Site::from([0]));
        let u = SingleSitePotential::line(&[1.0, -0.5, 1.0]).unwrap();
        let model = AlloyModel::new(gamma.clone(), u).unwrap();
        let rho = Density::triangular(0.5, 0.5).unwrap();
        for i in 0..20 {
            let w = model.sample_couplings(&rho, &mut sample_rng(3, i));
            let spec = BoxSpectrum::new(gamma.clone(), model.real_hamiltonian(8.0, &w)).unwrap();
            let scans: Vec<ScanResult> = [0.1, 0.05, 0.01]
                .iter()
                .map(|&d| certified_scan(&spec, &Site::from([0]), 6, (-0.2, 0.2), 0.2, d).unwrap())
                .collect();
            for pair in scans.windows(2) {
                for c in pair[0].cells.iter().filter(|c| c.certified) {
                    for f in pair[1].cells.iter().filter(|f| f.lo >= c.lo - 1e-12 && f.hi <= c.hi + 1e-12) {
                        assert!(f.certified, "coarse {c:?} certified but fine {f:?} not");
                    }
                }
            }
        }
    }

    #[test]
    fn two_box_free_gap_is_certain() {
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let cfg = TwoBoxConfig {
            l: 4,
            x: Site::from([0]),
            y: Site::from([20]),
            interval: (4.0, 5.0),
            rate: 0.1,
            delta: 0.05,
            lambda: 0.0,
            samples: 20,
            seed: 1,
        };
        let r = two_box_experiment(&cfg, &u, &Density::uniform(0.0, 1.0).unwrap(), &Workers::serial()).unwrap();
        assert_eq!(r.probability, 1.0);
        let close = TwoBoxConfig { y: Site::from([5]), ..cfg };
        assert!(matches!(
            two_box_experiment(&close, &u, &Density::uniform(0.0, 1.0).unwrap(), &Workers::serial()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn wide_window_counts_everything() {
        let gamma = cube(5, &Site::from([0]));
        let u = SingleSitePotential::line(&[1.0, -0.5]).unwrap();
        let r = wegner_experiment(&gamma, &u, &Density::uniform(0.0, 1.0).unwrap(), 1.0, 0.0, &[100.0, 50.0], 10, 0, &Workers::serial()).unwrap();
        assert_eq!(r.rows[0].count.mean, 11.0);
        assert_eq!(r.rows[0].count.stderr, 0.0);
    }

    #[test]
    fn scale_sequence_values() {
        let s = ScaleSequence::new(6, 1.5, 2.0, 1, 4).unwrap();
        assert_eq!(s.scales, vec![6, 15, 58, 442]);
        assert!(ScaleSequence::new(6, 4.5, 2.0, 1, 3).is_err());
        assert!(ScaleSequence::new(6, 1.0, 2.0, 1, 3).is_err());
        assert!(ScaleSequence::new(2, 1.05, 2.0, 1, 3).is_err());
    }

    #[test]
    fn free_eigenvectors_are_extended() {
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let rho = Density::uniform(0.0, 1.0).unwrap();
        let r = eigen_localization(15, 1, &u, &rho, 0.0, 1, None, 0, &Workers::serial()).unwrap();
        assert!(r.median_rate.abs() < 0.1, "{}", r.median_rate);
        assert!(r.median_ipr < 5.0 / r.sites as f64);
    }
}
