//! Green functions `G_Γ(z; x, y) = ⟨δ_x, (H_Γ - z)^{-1} δ_y⟩`, Schur
//! complements, the depletion resolvent expansions and Combes–Thomas
//! bounds.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Site, SiteSet};
use crate::linalg::{inverse, max_abs, relative_deviation, unit, CMatrix, CVector, Factorization, RCOND_SINGULAR};
use crate::model::{deplete, LatticeOperator};

/// Default relative tolerance for the exact identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// One factorization of `H_Γ - z`, reused for every requested entry.
pub struct GreenEvaluator {
    index: SiteSet,
    z: Complex64,
    factor: Factorization,
    rcond: Option<f64>,
    shifted: CMatrix,
}

impl GreenEvaluator {
    /// Factorizes `H - z`. At real `z` a reciprocal condition estimate
    /// below [`RCOND_SINGULAR`] is reported as [`Error::Singular`].
    pub fn new(h: &LatticeOperator, z: Complex64) -> Result<Self> {
        Self::from_shifted(h.index.clone(), h.shifted(z), z)
    }

    pub fn from_shifted(index: SiteSet, shifted: CMatrix, z: Complex64) -> Result<Self> {
        let factor = Factorization::new(shifted.clone())?;
        let rcond = if z.im == 0.0 {
            let r = factor.rcond_hermitian();
            if r < RCOND_SINGULAR {
                return Err(Error::Singular { rcond: r });
            }
            Some(r)
        } else {
            None
        };
        Ok(GreenEvaluator {
            index,
            z,
            factor,
            rcond,
            shifted,
        })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn index(&self) -> &SiteSet {
        &self.index
    }

    /// Condition estimate, available for real `z`.
    pub fn rcond(&self) -> Option<f64> {
        self.rcond
    }

    /// `(H - z)^{-1} δ_y`, checked against the solve residual.
    pub fn column(&self, y: &Site) -> Result<CVector> {
        let j = self
            .index
            .index_of(y)
            .ok_or_else(|| Error::NotMember(y.to_string()))?;
        let e = unit(self.index.len(), j);
        let g = self.factor.solve(&e)?;
        let vmax = |v: &CVector| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let residual = vmax(&(&self.shifted * &g - &e));
        if residual >= 1e-10 * (1.0 + vmax(&g)) {
            return Err(Error::Singular {
                rcond: self.rcond.unwrap_or(0.0),
            });
        }
        Ok(g)
    }

    /// `G(z; x, y)`, zero when either site lies outside `Γ`.
    pub fn entry(&self, x: &Site, y: &Site) -> Result<Complex64> {
        match (self.index.index_of(x), self.index.contains(y)) {
            (Some(i), true) => Ok(self.column(y)?[i]),
            _ => Ok(Complex64::new(0.0, 0.0)),
        }
    }

    /// Entries for many pairs; one column solve per distinct `y`.
    pub fn entries(&self, pairs: &[(Site, Site)]) -> Result<Vec<Complex64>> {
        let mut cols: HashMap<usize, CVector> = HashMap::new();
        pairs
            .iter()
            .map(|(x, y)| match (self.index.index_of(x), self.index.index_of(y)) {
                (Some(i), Some(j)) => {
                    if let std::collections::hash_map::Entry::Vacant(e) = cols.entry(j) {
                        e.insert(self.column(y)?);
                    }
                    Ok(cols[&j][i])
                }
                _ => Ok(Complex64::new(0.0, 0.0)),
            })
            .collect()
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.factor.inverse()
    }
}

/// `G(z; x, y)` for each pair.
pub fn green(h: &LatticeOperator, z: Complex64, pairs: &[(Site, Site)]) -> Result<Vec<Complex64>> {
    GreenEvaluator::new(h, z)?.entries(pairs)
}

/// Full resolvent `(H - z)^{-1}`.
pub fn resolvent(h: &LatticeOperator, z: Complex64) -> Result<CMatrix> {
    GreenEvaluator::new(h, z)?.inverse()
}

/// Schur complement `B` of `H_Γ` onto `Λ ⊆ Γ`:
/// `P_Λ (H_Γ - z)^{-1} P_Λ* = (H_Λ - B - z)^{-1}`, where
/// `B = H_{Λ,Γ∖Λ} G_{Γ∖Λ}(z) H_{Γ∖Λ,Λ}`.
pub fn schur_complement(h_gamma: &LatticeOperator, lambda: &SiteSet, z: Complex64) -> Result<LatticeOperator> {
    if let Some(s) = lambda.iter().find(|s| !h_gamma.index.contains(s)) {
        return Err(Error::NotMember(format!("{s} (Λ must be a subset of Γ)")));
    }
    let rest = h_gamma.index.difference(lambda);
    if rest.is_empty() || lambda.is_empty() {
        return Ok(LatticeOperator::zeros(lambda.clone()));
    }
    let inner = h_gamma.restrict(&rest)?;
    let coupling_out = h_gamma.block(&rest, lambda)?;
    let coupling_in = h_gamma.block(lambda, &rest)?;
    let g = Factorization::new(inner.shifted(z))?;
    let b = coupling_in * g.solve_matrix(&coupling_out)?;
    LatticeOperator::new(lambda.clone(), b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    /// Largest elementwise deviation relative to the largest operand entry.
    pub deviation: f64,
    pub abs_deviation: f64,
    pub dims: Vec<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn compare(name: &str, a: &CMatrix, b: &CMatrix, dims: Vec<usize>, tolerance: f64) -> Self {
        let deviation = relative_deviation(a, b);
        let abs_deviation = crate::linalg::max_abs_diff(a, b);
        IdentityReport {
            identity: name.to_string(),
            deviation,
            abs_deviation,
            dims,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

/// Checks the one-level Schur identity on `Λ₁` and the nested two-level
/// formula for `Λ₁ ⊆ Λ₂ ⊆ Γ`. The nesting hypothesis is that no site of
/// `Λ₁` has a neighbour in `Γ∖Λ₂`; for `Γ = Z^d` this is `∂^iΛ₂ ∩ Λ₁ = ∅`.
pub fn verify_schur_identities(
    h_gamma: &LatticeOperator,
    lambda1: &SiteSet,
    lambda2: &SiteSet,
    z: Complex64,
    tolerance: f64,
) -> Result<[IdentityReport; 2]> {
    if !lambda1.is_subset(lambda2) || !lambda2.is_subset(&h_gamma.index) {
        return Err(Error::Hypothesis("need Λ₁ ⊆ Λ₂ ⊆ Γ".into()));
    }
    let outside = h_gamma.index.difference(lambda2);
    if relative_boundary(lambda2, &outside).iter().any(|s| lambda1.contains(s)) {
        return Err(Error::Hypothesis("the interior boundary of Λ₂ meets Λ₁".into()));
    }
    let g = resolvent(h_gamma, z)?;
    let idx1 = h_gamma.positions(lambda1)?;
    let oracle = g.select_rows(&idx1).select_columns(&idx1);

    let h1 = h_gamma.restrict(lambda1)?;
    let b1 = schur_complement(h_gamma, lambda1, z)?;
    let reduced = inverse(&(h1.shifted(z) - &b1.matrix))?;
    let dims = vec![h_gamma.dim(), lambda1.len(), lambda2.len()];
    let r1 = IdentityReport::compare("schur-one-level", &oracle, &reduced, dims.clone(), tolerance);

    // Two levels: only the (Λ₂∖Λ₁) block of B_Γ^{Λ₂} enters, and Λ₁
    // talks to Λ₂∖Λ₁ through plain hopping.
    let b2 = schur_complement(h_gamma, lambda2, z)?;
    let mid = lambda2.difference(lambda1);
    let nested = if mid.is_empty() {
        inverse(&h1.shifted(z))?
    } else {
        let b_mid = b2.restrict(&mid)?;
        let h_mid = h_gamma.restrict(&mid)?;
        let inner = Factorization::new(h_mid.shifted(z) - &b_mid.matrix)?;
        let c_in = h_gamma.block(lambda1, &mid)?;
        let c_out = h_gamma.block(&mid, lambda1)?;
        inverse(&(h1.shifted(z) - c_in * inner.solve_matrix(&c_out)?))?
    };
    let r2 = IdentityReport::compare("schur-two-level", &oracle, &nested, dims, tolerance);
    Ok([r1, r2])
}

/// Sites of `set` with a nearest neighbour in `outside`.
pub fn relative_boundary(set: &SiteSet, outside: &SiteSet) -> SiteSet {
    set.filter(|s| s.neighbors().any(|n| outside.contains(&n)))
}

/// Checks, for the depletion of `Λ` in `Γ`: the first-order expansion in
/// both orderings, the second-order expansion, and the block structure of
/// the depleted resolvent.
pub fn verify_geometric_identities(
    h_gamma: &LatticeOperator,
    lambda: &SiteSet,
    z: Complex64,
    tolerance: f64,
) -> Result<[IdentityReport; 3]> {
    let dep = deplete(h_gamma, lambda)?;
    let g = resolvent(h_gamma, z)?;
    let gd = resolvent(&dep.depleted, z)?;
    let t = &dep.cut.matrix;
    let dims = vec![h_gamma.dim(), lambda.len()];

    let right = &gd + &gd * t * &g;
    let left = &gd + &g * t * &gd;
    let a = IdentityReport::compare("first-order", &g, &right, dims.clone(), tolerance);
    let b = IdentityReport::compare("first-order", &g, &left, dims.clone(), tolerance);
    let first = if a.deviation >= b.deviation { a } else { b };

    let second_rhs = &gd + &gd * t * &gd + &gd * t * &g * t * &gd;
    let second = IdentityReport::compare("second-order", &g, &second_rhs, dims.clone(), tolerance);

    // Block structure of G^Λ.
    let rest = h_gamma.index.difference(lambda);
    let pos_in = h_gamma.positions(lambda)?;
    let pos_out = h_gamma.positions(&rest)?;
    let mut cross_zero = true;
    for &i in &pos_in {
        for &j in &pos_out {
            if gd[(i, j)] != Complex64::new(0.0, 0.0) || gd[(j, i)] != Complex64::new(0.0, 0.0) {
                cross_zero = false;
            }
        }
    }
    let mut dev: f64 = 0.0;
    let mut abs_dev: f64 = 0.0;
    for (set, pos) in [(lambda, &pos_in), (&rest, &pos_out)] {
        if set.is_empty() {
            continue;
        }
        let direct = resolvent(&h_gamma.restrict(set)?, z)?;
        let from_dep = gd.select_rows(pos).select_columns(pos);
        dev = dev.max(relative_deviation(&direct, &from_dep));
        abs_dev = abs_dev.max(crate::linalg::max_abs_diff(&direct, &from_dep));
    }
    let complement = deplete(h_gamma, &rest)?;
    let same = complement.depleted.matrix == dep.depleted.matrix;
    let block = IdentityReport {
        identity: "depleted-blocks".into(),
        deviation: dev,
        abs_deviation: abs_dev,
        dims,
        tolerance,
        pass: cross_zero && same && dev <= tolerance,
    };
    Ok([first, second, block])
}

/// The three terms of the second-order expansion at `(x, y)`:
/// `G^Λ(x,y)`, `(G^Λ T G^Λ)(x,y)`, `(G^Λ T G T G^Λ)(x,y)`.
pub fn second_order_terms(
    h_gamma: &LatticeOperator,
    lambda: &SiteSet,
    z: Complex64,
    x: &Site,
    y: &Site,
) -> Result<[Complex64; 3]> {
    let dep = deplete(h_gamma, lambda)?;
    let g = resolvent(h_gamma, z)?;
    let gd = resolvent(&dep.depleted, z)?;
    let t = &dep.cut.matrix;
    let i = h_gamma.index.index_of(x).ok_or_else(|| Error::NotMember(x.to_string()))?;
    let j = h_gamma.index.index_of(y).ok_or_else(|| Error::NotMember(y.to_string()))?;
    let one = (&gd * t * &gd)[(i, j)];
    let two = (&gd * t * &g * t * &gd)[(i, j)];
    Ok([gd[(i, j)], one, two])
}

/// Decay parameters of the Combes–Thomas bound
/// `|G(z;x,y)| ≤ (2/M) e^{-γ |x-y|₁}` for `dist(z, σ(H)) ≥ M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombesThomas {
    pub dim: usize,
    pub margin: f64,
    pub gamma: f64,
}

impl CombesThomas {
    pub fn new(dim: usize, margin: f64) -> Result<Self> {
        if !(margin >= 1.0) || dim == 0 {
            return Err(Error::Invalid(format!("need M ≥ 1 and d ≥ 1, got M = {margin}, d = {dim}")));
        }
        let gamma = (margin / (4.0 * dim as f64)).ln().min(1.0);
        Ok(CombesThomas { dim, margin, gamma })
    }

    /// `γ ≤ 0`: the bound does not decay and is not checked.
    pub fn is_decaying(&self) -> bool {
        self.gamma > 0.0
    }

    pub fn bound(&self, x: &Site, y: &Site) -> f64 {
        2.0 / self.margin * (-self.gamma * x.dist_l1(y) as f64).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombesThomasCheck {
    pub gamma: f64,
    pub pairs: usize,
    /// Largest `|G| / bound` seen.
    pub max_ratio: f64,
    pub violations: usize,
    pub skipped: bool,
}

/// Compares every entry of `(H - z)^{-1}` with the bound. `norm_bound` is
/// an a-priori bound `K ≥ ‖H‖`; requires `|z| ≥ K + M`.
pub fn verify_combes_thomas(h: &LatticeOperator, z: Complex64, norm_bound: f64, ct: &CombesThomas) -> Result<CombesThomasCheck> {
    if z.norm() < norm_bound + ct.margin {
        return Err(Error::Hypothesis(format!(
            "|z| = {} is below K + M = {}",
            z.norm(),
            norm_bound + ct.margin
        )));
    }
    if !ct.is_decaying() {
        return Ok(CombesThomasCheck {
            gamma: ct.gamma,
            pairs: 0,
            max_ratio: 0.0,
            violations: 0,
            skipped: true,
        });
    }
    let g = resolvent(h, z)?;
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for (i, x) in h.index.iter().enumerate() {
        for (j, y) in h.index.iter().enumerate() {
            let r = g[(i, j)].norm() / ct.bound(x, y);
            max_ratio = max_ratio.max(r);
            if r > 1.0 + 1e-12 {
                violations += 1;
            }
        }
    }
    Ok(CombesThomasCheck {
        gamma: ct.gamma,
        pairs: h.dim() * h.dim(),
        max_ratio,
        violations,
        skipped: false,
    })
}

/// `‖(H - z)^{-1}‖ ≤ 1/|Im z|`; returns `(norm, bound)`.
pub fn resolvent_norm_check(h: &LatticeOperator, z: Complex64) -> Result<(f64, f64)> {
    let g = resolvent(h, z)?;
    Ok((crate::linalg::op_norm(&g), 1.0 / z.im.abs()))
}

/// Largest entry magnitude, for scale-aware tolerances.
pub fn scale(m: &CMatrix) -> f64 {
    max_abs(m)
}
