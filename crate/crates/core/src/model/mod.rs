//! The alloy-type operator `H = -Δ + λ V_ω` with
//! `V_ω(x) = Σ_k ω_k u(x - k)`, restricted to finite sets.

mod density;

pub use density::Density;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{interior_boundary, metrics, Site, SiteSet};
use crate::linalg::CMatrix;

/// Finitely supported single-site potential `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleSitePotential {
    support: SiteSet,
    values: Vec<f64>,
}

impl SingleSitePotential {
    /// `values[i]` belongs to `support.get(i)`; every value must be non-zero
    /// and the support must contain the origin.
    pub fn new(support: SiteSet, values: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Invalid("single-site potential needs a non-empty support".into()));
        }
        if support.len() != values.len() {
            return Err(Error::Invalid(format!(
                "{} support sites but {} values",
                support.len(),
                values.len()
            )));
        }
        if !support.contains(&Site::origin(support.dim())) {
            return Err(Error::Invalid("the support of u must contain the origin".into()));
        }
        if let Some(i) = values.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "u({}) = {} must be finite and non-zero on its support",
                support.get(i),
                values[i]
            )));
        }
        Ok(SingleSitePotential { support, values })
    }

    pub fn from_pairs(dim: usize, pairs: &[(Site, f64)]) -> Result<Self> {
        let support = SiteSet::new(dim, pairs.iter().map(|(s, _)| s.clone()))?;
        if support.len() != pairs.len() {
            return Err(Error::Invalid("duplicate site in single-site potential".into()));
        }
        let mut values = vec![0.0; pairs.len()];
        for (s, v) in pairs {
            values[support.index_of(s).expect("just inserted")] = *v;
        }
        Self::new(support, values)
    }

    /// One-dimensional profile on `{0, 1, …, n-1}`.
    pub fn line(values: &[f64]) -> Result<Self> {
        Self::new(SiteSet::line(0..values.len() as i64), values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &SiteSet {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, f64)> {
        self.support.iter().zip(self.values.iter().copied())
    }

    pub fn value(&self, k: &Site) -> f64 {
        self.support.index_of(k).map_or(0.0, |i| self.values[i])
    }

    /// `|Θ|`.
    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// `ū = Σ_k u(k)`.
    pub fn mean_value(&self) -> f64 {
        crate::stats::pairwise_sum(&self.values)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// `ℓ¹`-diameter of the support.
    pub fn l1_diameter(&self) -> i64 {
        metrics(&self.support).expect("non-empty").diam_l1
    }

    /// `ℓ^∞`-diameter of the support.
    pub fn diameter(&self) -> i64 {
        metrics(&self.support).expect("non-empty").diam_inf
    }

    pub fn is_sign_indefinite(&self) -> bool {
        self.values.iter().any(|v| *v > 0.0) && self.values.iter().any(|v| *v < 0.0)
    }

    /// `-u`; the model with `(-u, -ω)` is the same operator.
    pub fn negated(&self) -> Self {
        SingleSitePotential {
            support: self.support.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Bounded density with compact support (always true for built-ins).
    pub bounded_density: bool,
    /// `u > 0` on the interior boundary of its support.
    pub positive_rim: bool,
    /// `ρ ∈ W^{1,1}`.
    pub sobolev_density: bool,
    /// `ū ≠ 0`.
    pub nonzero_mean: bool,
    pub u_mean: f64,
    pub u_l1: f64,
    pub l1_diameter: i64,
    pub diameter: i64,
    pub support_size: usize,
    pub sign_indefinite: bool,
    pub radius: f64,
    pub rho_sup: f64,
    pub rho_mass: f64,
    pub rho_derivative_l1: Option<f64>,
}

pub fn check_assumptions(u: &SingleSitePotential, rho: &Density) -> AssumptionReport {
    let boundary = interior_boundary(u.support());
    let positive_rim = boundary.iter().all(|k| u.value(k) > 0.0);
    let u_mean = u.mean_value();
    let mass = rho.mass();
    AssumptionReport {
        bounded_density: rho.validate().is_ok() && (mass - 1.0).abs() < 1e-10,
        positive_rim,
        sobolev_density: rho.is_sobolev(),
        nonzero_mean: u_mean.abs() > 1e-12 * u.l1_norm(),
        u_mean,
        u_l1: u.l1_norm(),
        l1_diameter: u.l1_diameter(),
        diameter: u.diameter(),
        support_size: u.support_size(),
        sign_indefinite: u.is_sign_indefinite(),
        radius: rho.radius(),
        rho_sup: rho.sup_norm(),
        rho_mass: mass,
        rho_derivative_l1: rho.derivative_l1(),
    }
}

/// `Λ₊ = {k : u(x - k) ≠ 0 for some x ∈ Λ}`.
pub fn coupling_sites(lambda: &SiteSet, u: &SingleSitePotential) -> SiteSet {
    let sites = lambda
        .iter()
        .flat_map(|x| u.support().iter().map(move |t| x.sub(t)));
    SiteSet::new(lambda.dim(), sites).expect("same dimension")
}

/// `2d + λ R ‖u‖₁`, an upper bound on `‖H‖` when `|ω_k| ≤ R`.
pub fn norm_bound(dim: usize, lambda: f64, radius: f64, u: &SingleSitePotential) -> f64 {
    2.0 * dim as f64 + lambda * radius * u.l1_norm()
}

/// Where a field's couplings came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub sample: u64,
}

/// Couplings `ω_k` on a finite set of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderField {
    sites: SiteSet,
    values: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl DisorderField {
    pub fn new(sites: SiteSet, values: Vec<f64>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::Invalid(format!(
                "{} sites but {} couplings",
                sites.len(),
                values.len()
            )));
        }
        Ok(DisorderField {
            sites,
            values,
            provenance: None,
        })
    }

    pub fn from_fn(sites: SiteSet, f: impl Fn(&Site) -> f64) -> Self {
        let values = sites.iter().map(f).collect();
        DisorderField {
            sites,
            values,
            provenance: None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(sites: SiteSet, rho: &Density, rng: &mut R) -> Self {
        let values = (0..sites.len()).map(|_| rho.sample(rng)).collect();
        DisorderField {
            sites,
            values,
            provenance: None,
        }
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: &Site) -> Option<f64> {
        self.sites.index_of(k).map(|i| self.values[i])
    }

    /// Text dump: dimension header, then one `coords… value` line per site.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = self.provenance {
            let _ = writeln!(out, "# seed {} sample {}", p.master_seed, p.sample);
        }
        let _ = writeln!(out, "{}", self.sites.dim());
        for (s, v) in self.sites.iter().zip(&self.values) {
            for c in s.coords() {
                let _ = write!(out, "{c} ");
            }
            let _ = writeln!(out, "{v:e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let dim: usize = lines
            .next()
            .ok_or_else(|| Error::Invalid("empty field dump".into()))?
            .parse()
            .map_err(|e| Error::Invalid(format!("bad dimension header: {e}")))?;
        let mut pairs = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != dim + 1 {
                return Err(Error::Invalid(format!("expected {} columns in '{line}'", dim + 1)));
            }
            let coords = parts[..dim]
                .iter()
                .map(|p| p.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Invalid(format!("bad coordinate in '{line}': {e}")))?;
            let v: f64 = parts[dim]
                .parse()
                .map_err(|e| Error::Invalid(format!("bad coupling in '{line}': {e}")))?;
            pairs.push((Site::new(coords), v));
        }
        let sites = SiteSet::new(dim, pairs.iter().map(|p| p.0.clone()))?;
        if sites.len() != pairs.len() {
            return Err(Error::Invalid("duplicate site in field dump".into()));
        }
        let mut values = vec![0.0; pairs.len()];
        for (s, v) in pairs {
            values[sites.index_of(&s).expect("present")] = v;
        }
        DisorderField::new(sites, values)
    }
}

/// `V_ω(x)` for every `x ∈ Γ`, in `Γ`'s order.
pub fn potential_field(field: &DisorderField, u: &SingleSitePotential, gamma: &SiteSet) -> Result<Vec<f64>> {
    gamma
        .iter()
        .map(|x| {
            let mut v = 0.0;
            for (t, ut) in u.iter() {
                let k = x.sub(t);
                let w = field.get(&k).ok_or_else(|| Error::MissingCoupling(k.to_string()))?;
                v += w * ut;
            }
            Ok(v)
        })
        .collect()
}

/// A square complex matrix whose rows and columns are labelled by sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeOperator {
    pub index: SiteSet,
    pub matrix: CMatrix,
}

impl LatticeOperator {
    pub fn new(index: SiteSet, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != index.len() || matrix.ncols() != index.len() {
            return Err(Error::Dimension {
                expected: index.len(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(LatticeOperator { index, matrix })
    }

    pub fn zeros(index: SiteSet) -> Self {
        let n = index.len();
        LatticeOperator {
            index,
            matrix: CMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Matrix element; zero when either site is outside the index.
    pub fn entry(&self, x: &Site, y: &Site) -> Complex64 {
        match (self.index.index_of(x), self.index.index_of(y)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// `P_Λ A P_Λ*` for `Λ ⊆ index`.
    pub fn restrict(&self, lambda: &SiteSet) -> Result<LatticeOperator> {
        let idx = self.positions(lambda)?;
        let m = self.matrix.select_rows(&idx).select_columns(&idx);
        Ok(LatticeOperator {
            index: lambda.clone(),
            matrix: m,
        })
    }

    /// Rows `rows`, columns `cols` as a plain matrix.
    pub fn block(&self, rows: &SiteSet, cols: &SiteSet) -> Result<CMatrix> {
        let r = self.positions(rows)?;
        let c = self.positions(cols)?;
        Ok(self.matrix.select_rows(&r).select_columns(&c))
    }

    pub fn positions(&self, set: &SiteSet) -> Result<Vec<usize>> {
        set.iter()
            .map(|s| self.index.index_of(s).ok_or_else(|| Error::NotMember(s.to_string())))
            .collect()
    }

    /// `A - z`.
    pub fn shifted(&self, z: Complex64) -> CMatrix {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= z;
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..=i).all(|j| (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() <= tol))
    }

    /// Real part, for real symmetric eigen-solvers.
    pub fn real(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.re)
    }

    /// Eigenvalues in ascending order (Hermitian input).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.real().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// `H_Γ = -Δ_Γ + λ V_ω` on `Γ`.
pub fn hamiltonian(gamma: &SiteSet, lambda: f64, u: &SingleSitePotential, field: &DisorderField) -> Result<LatticeOperator> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Invalid(format!("disorder strength must be non-negative, got {lambda}")));
    }
    if gamma.dim() != u.dim() {
        return Err(Error::Dimension {
            expected: gamma.dim(),
            found: u.dim(),
        });
    }
    let v = potential_field(field, u, gamma)?;
    let n = gamma.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, x) in gamma.iter().enumerate() {
        m[(i, i)] = Complex64::new(lambda * v[i], 0.0);
        for y in x.neighbors() {
            if let Some(j) = gamma.index_of(&y) {
                m[(i, j)] = Complex64::new(-1.0, 0.0);
            }
        }
    }
    LatticeOperator::new(gamma.clone(), m)
}

/// `H` with every hopping term across the `Λ | Γ∖Λ` cut removed, and the
/// removed hopping `T` (entries `+1` on cut bonds), so that `H = H_dep - T`.
#[derive(Clone, Debug)]
pub struct Depletion {
    pub depleted: LatticeOperator,
    pub cut: LatticeOperator,
}

pub fn deplete(h: &LatticeOperator, lambda: &SiteSet) -> Result<Depletion> {
    if let Some(s) = lambda.iter().find(|s| !h.index.contains(s)) {
        return Err(Error::NotMember(format!("{s} (Λ must be a subset of Γ)")));
    }
    let n = h.dim();
    let inside: Vec<bool> = h.index.iter().map(|s| lambda.contains(s)).collect();
    let mut dep = h.matrix.clone();
    let mut cut = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if inside[i] != inside[j] && h.matrix[(i, j)] != Complex64::new(0.0, 0.0) {
                cut[(i, j)] = -h.matrix[(i, j)];
                dep[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(Depletion {
        depleted: LatticeOperator::new(h.index.clone(), dep)?,
        cut: LatticeOperator::new(h.index.clone(), cut)?,
    })
}

/// Precomputed assembly data for repeated sampling on a fixed `Γ`.
#[derive(Clone, Debug)]
pub struct AlloyModel {
    gamma: SiteSet,
    u: SingleSitePotential,
    couplings: SiteSet,
    stencil: Vec<Vec<(usize, f64)>>,
    hops: Vec<(usize, usize)>,
}

impl AlloyModel {
    pub fn new(gamma: SiteSet, u: SingleSitePotential) -> Result<Self> {
        if gamma.dim() != u.dim() {
            return Err(Error::Dimension {
                expected: gamma.dim(),
                found: u.dim(),
            });
        }
        let couplings = coupling_sites(&gamma, &u);
        let stencil = gamma
            .iter()
            .map(|x| {
                u.iter()
                    .map(|(t, ut)| (couplings.index_of(&x.sub(t)).expect("closure"), ut))
                    .collect()
            })
            .collect();
        let mut hops = Vec::new();
        for (i, x) in gamma.iter().enumerate() {
            for y in x.neighbors() {
                if let Some(j) = gamma.index_of(&y) {
                    if i < j {
                        hops.push((i, j));
                    }
                }
            }
        }
        Ok(AlloyModel {
            gamma,
            u,
            couplings,
            stencil,
            hops,
        })
    }

    pub fn gamma(&self) -> &SiteSet {
        &self.gamma
    }

    pub fn potential_profile(&self) -> &SingleSitePotential {
        &self.u
    }

    /// `Γ₊`, the sites whose couplings enter `H_Γ`.
    pub fn couplings(&self) -> &SiteSet {
        &self.couplings
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn sample_couplings<R: Rng + ?Sized>(&self, rho: &Density, rng: &mut R) -> Vec<f64> {
        (0..self.couplings.len()).map(|_| rho.sample(rng)).collect()
    }

    pub fn field(&self, omegas: Vec<f64>) -> Result<DisorderField> {
        DisorderField::new(self.couplings.clone(), omegas)
    }

    pub fn potential(&self, omegas: &[f64]) -> Vec<f64> {
        assert_eq!(omegas.len(), self.couplings.len(), "coupling vector length");
        self.stencil
            .iter()
            .map(|row| row.iter().map(|&(k, ut)| omegas[k] * ut).sum())
            .collect()
    }

    pub fn real_hamiltonian(&self, lambda: f64, omegas: &[f64]) -> DMatrix<f64> {
        let n = self.gamma.len();
        let v = self.potential(omegas);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = lambda * v[i];
        }
        for &(i, j) in &self.hops {
            m[(i, j)] = -1.0;
            m[(j, i)] = -1.0;
        }
        m
    }

    /// `H_Γ - z` assembled directly.
    pub fn shifted(&self, lambda: f64, omegas: &[f64], z: Complex64) -> CMatrix {
        let n = self.gamma.len();
        let v = self.potential(omegas);
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(lambda * v[i], 0.0) - z;
        }
        for &(i, j) in &self.hops {
            m[(i, j)] = Complex64::new(-1.0, 0.0);
            m[(j, i)] = Complex64::new(-1.0, 0.0);
        }
        m
    }

    pub fn hamiltonian(&self, lambda: f64, omegas: &[f64]) -> LatticeOperator {
        LatticeOperator {
            index: self.gamma.clone(),
            matrix: self.shifted(lambda, omegas, Complex64::new(0.0, 0.0)),
        }
    }

    /// Couplings of `self` read off a field sampled for `parent`, which must
    /// cover `self.couplings()`.
    pub fn project_couplings(&self, parent: &AlloyModel, omegas: &[f64]) -> Result<Vec<f64>> {
        self.couplings
            .iter()
            .map(|k| {
                parent
                    .couplings
                    .index_of(k)
                    .map(|i| omegas[i])
                    .ok_or_else(|| Error::MissingCoupling(k.to_string()))
            })
            .collect()
    }
}
