//! Randomized case generators for the identity and averaging suites.
//! Case `i` of a run with master seed `m` depends only on `(m, i)`.

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    det_average_check, inverse_norm_check, monotone_tail_check, random_complex, random_conditioned, random_dissipative,
    random_real, w_transform, WeightProfile,
};
use crate::error::Result;
use crate::geometry::{cube, Site, SiteSet};
use crate::model::{AlloyModel, Density, SingleSitePotential};
use crate::montecarlo::{sample_rng, SampleRng};
use crate::resolvent::{relative_boundary, schur_complement, verify_geometric_identities, verify_schur_identities, IdentityReport};

/// Random rectangle (d = 2) or chain (d = 1) with at most `max_sites` sites.
fn random_domain(rng: &mut SampleRng, dim: usize, max_sites: usize) -> SiteSet {
    // skew towards small cases; large ones still occur
    let f: f64 = rng.random::<f64>().powi(2);
    let target = 4 + (f * (max_sites - 4) as f64) as usize;
    if dim == 1 {
        SiteSet::line(0..target as i64)
    } else {
        let a = rng.random_range(2..=((target as f64).sqrt().ceil() as usize).max(2));
        let b = (target / a).max(2);
        let sites = (0..a as i64).flat_map(|i| (0..b as i64).map(move |j| Site::from([i, j])));
        SiteSet::new(2, sites).expect("planar")
    }
}

/// Random `u` with the origin and up to three more sites within ℓ∞ radius 1.
fn random_potential(rng: &mut SampleRng, dim: usize) -> SingleSitePotential {
    let near = cube(1, &Site::origin(dim));
    let extra = rng.random_range(0..=3usize);
    let mut pairs = vec![(Site::origin(dim), rng.random_range(0.3..1.0))];
    for _ in 0..extra {
        let s = near.sites().choose(rng).expect("non-empty").clone();
        if pairs.iter().all(|(p, _)| *p != s) {
            let v: f64 = rng.random_range(0.2..1.0);
            pairs.push((s, if rng.random_bool(0.5) { v } else { -v }));
        }
    }
    SingleSitePotential::from_pairs(dim, &pairs).expect("valid potential")
}

fn random_energy(rng: &mut SampleRng) -> Complex64 {
    let im: f64 = rng.random_range(0.05..1.0);
    Complex64::new(rng.random_range(-4.0..4.0), if rng.random_bool(0.5) { im } else { -im })
}

fn random_box_in(rng: &mut SampleRng, gamma: &SiteSet) -> SiteSet {
    let centre = gamma.sites().choose(rng).expect("non-empty").clone();
    let r = rng.random_range(1..=4);
    cube(r, &centre).filter(|s| gamma.contains(s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub index: u64,
    pub dim: usize,
    pub sites: usize,
    pub reports: Vec<IdentityReport>,
}

impl IdentityCase {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// One randomized case: both Schur identities, both depletion expansions
/// and the depleted block structure.
pub fn identity_case(master: u64, index: u64, max_sites: usize, tolerance: f64) -> Result<IdentityCase> {
    let mut rng = sample_rng(master, index);
    let dim = if rng.random_bool(0.5) { 1 } else { 2 };
    let gamma = random_domain(&mut rng, dim, max_sites.max(5));
    let u = random_potential(&mut rng, dim);
    let model = AlloyModel::new(gamma.clone(), u)?;
    let rho = Density::uniform(-1.0, 1.0)?;
    let omegas = model.sample_couplings(&rho, &mut rng);
    let lambda = rng.random_range(0.5..5.0);
    let h = model.hamiltonian(lambda, &omegas);
    let z = random_energy(&mut rng);

    // depletion set: a random subset or a box
    let lam = if rng.random_bool(0.5) {
        gamma.filter(|_| rng.random_bool(0.4))
    } else {
        random_box_in(&mut rng, &gamma)
    };
    let mut reports: Vec<IdentityReport> = verify_geometric_identities(&h, &lam, z, tolerance)?.into();

    // nesting Λ₁ ⊆ Λ₂ away from Γ∖Λ₂; Λ₂ = Γ now and then
    let l2 = if rng.random_bool(0.15) {
        gamma.clone()
    } else {
        random_box_in(&mut rng, &gamma)
    };
    let inner = l2.difference(&relative_boundary(&l2, &gamma.difference(&l2)));
    let l1 = if inner.is_empty() {
        None
    } else {
        let mut pick = inner.filter(|_| rng.random_bool(0.5));
        if pick.is_empty() {
            pick = SiteSet::new(dim, [inner.sites().choose(&mut rng).expect("non-empty").clone()])?;
        }
        Some(pick)
    };
    if let Some(l1) = l1 {
        reports.extend(verify_schur_identities(&h, &l1, &l2, z, tolerance)?);
    }
    Ok(IdentityCase {
        index,
        dim,
        sites: gamma.len(),
        reports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCase {
    pub index: u64,
    /// Couplings whose translate of `Θ` meets `Γ` only inside `Λ`.
    pub perturbed: usize,
    pub max_abs_change: f64,
    pub scale: f64,
}

impl IndependenceCase {
    pub fn pass(&self, tolerance: f64) -> bool {
        self.perturbed > 0 && self.max_abs_change <= tolerance * self.scale.max(1.0)
    }
}

/// Perturbs every coupling that only touches `Λ` and compares the Schur
/// complement before and after.
pub fn independence_case(master: u64, index: u64) -> Result<IndependenceCase> {
    let mut rng = sample_rng(master, index);
    let dim = if rng.random_bool(0.5) { 1 } else { 2 };
    let gamma = if dim == 1 {
        SiteSet::line(0..rng.random_range(20..80))
    } else {
        cube(rng.random_range(4..7), &Site::origin(2))
    };
    let u = random_potential(&mut rng, dim);
    let model = AlloyModel::new(gamma.clone(), u.clone())?;
    let rho = Density::uniform(-1.0, 1.0)?;
    let omegas = model.sample_couplings(&rho, &mut rng);
    let lambda = rng.random_range(0.5..5.0);
    let z = random_energy(&mut rng);
    let centre = gamma.get(gamma.len() / 2).clone();
    let lam = cube(rng.random_range(2..=3), &centre).filter(|s| gamma.contains(s));

    let inside: Vec<usize> = model
        .couplings()
        .iter()
        .enumerate()
        .filter(|(_, k)| u.support().iter().map(|t| t.add(k)).filter(|s| gamma.contains(s)).all(|s| lam.contains(&s)))
        .map(|(i, _)| i)
        .collect();
    let before = schur_complement(&model.hamiltonian(lambda, &omegas), &lam, z)?;
    let mut moved = omegas.clone();
    for &i in &inside {
        moved[i] += rng.random_range(-3.0..3.0);
    }
    let after = schur_complement(&model.hamiltonian(lambda, &moved), &lam, z)?;
    Ok(IndependenceCase {
        index,
        perturbed: inside.len(),
        max_abs_change: crate::linalg::max_abs_diff(&before.matrix, &after.matrix),
        scale: crate::linalg::max_abs(&before.matrix),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingCase {
    pub index: u64,
    pub n: usize,
    pub real: bool,
    pub det_integral: f64,
    pub det_bound: f64,
    pub det_pass: bool,
    pub norm_average: f64,
    pub norm_bound: f64,
    pub norm_pass: bool,
}

/// Determinant and inverse-norm checks on random `(A, V)` with `cond(V) ≤ 10³`.
pub fn averaging_case(master: u64, index: u64) -> Result<AveragingCase> {
    let mut rng = sample_rng(master, index);
    let n = rng.random_range(2..=4);
    let real = rng.random_bool(0.3);
    let a = if real { random_real(n, &mut rng) } else { random_complex(n, &mut rng) };
    let v = if real {
        random_conditioned(n, 1e3, &mut rng).map(|z| Complex64::new(z.re, 0.0))
    } else {
        random_conditioned(n, 1e3, &mut rng)
    };
    let rho = match rng.random_range(0..3) {
        0 => Density::triangular(rng.random_range(-0.5..0.5), rng.random_range(0.3..1.0))?,
        1 => Density::uniform(-1.0, rng.random_range(-0.5..1.0))?,
        _ => Density::bump(0.0, rng.random_range(0.3..1.0))?,
    };
    let s = rng.random_range(0.1..0.9);
    let det = det_average_check(&a, &v, &rho, s)?;
    let norm = inverse_norm_check(&a, &v, &rho, s, rho.radius())?;
    Ok(AveragingCase {
        index,
        n,
        real,
        det_integral: det.integral,
        det_bound: det.bound,
        det_pass: det.pass,
        norm_average: norm.average,
        norm_bound: norm.average_bound,
        norm_pass: norm.pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCase {
    pub index: u64,
    pub n: usize,
    pub slope: f64,
    pub slope_pass: bool,
    pub empirical_constant: f64,
    pub moments_pass: bool,
}

/// Monotone tail check on a random dissipative `A`.
pub fn tail_case(master: u64, index: u64) -> Result<TailCase> {
    let mut rng = sample_rng(master, index);
    let n = rng.random_range(1..=5);
    let a = random_dissipative(n, &mut rng);
    let v: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
    let m1 = random_complex(n, &mut rng);
    let m2 = random_complex(n, &mut rng);
    let rho = Density::uniform(-1.0, 1.0)?;
    let r = monotone_tail_check(&a, &v, &m1, &m2, None, &rho, &[0.3, 0.7])?;
    Ok(TailCase {
        index,
        n,
        slope: r.fit.map(|f| f.slope).unwrap_or(f64::NAN),
        slope_pass: r.slope_pass,
        empirical_constant: r.empirical_constant,
        moments_pass: r.moments.iter().all(|m| m.pass),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCase {
    pub index: u64,
    pub dim: usize,
    pub sites: usize,
    pub min_ratio: f64,
    pub u_mean: f64,
    pub bound_holds: bool,
    pub endpoints_hold: bool,
    pub lipschitz_holds: bool,
}

/// `W ≥ αū/2` on a random box for random `u` with `ū > 0`, plus spot checks
/// of the Lipschitz bound on `α`.
pub fn weight_case(master: u64, index: u64) -> Result<WeightCase> {
    let mut rng = sample_rng(master, index);
    let dim = if rng.random_bool(0.5) { 1 } else { 2 };
    let u = loop {
        let u = random_potential(&mut rng, dim);
        if u.mean_value() > 1e-3 {
            break u;
        }
        if u.mean_value() < -1e-3 {
            break u.negated();
        }
    };
    let r = if dim == 1 { rng.random_range(3..30) } else { rng.random_range(2..8) };
    let lam = cube(r, &Site::origin(dim));
    let x = lam.sites().choose(&mut rng).expect("non-empty").clone();
    let y = lam.sites().choose(&mut rng).expect("non-empty").clone();
    let p = WeightProfile::new(&u, &x, &y)?;
    let w = w_transform(&p, &u, &lam);
    let n = p.spread;
    let factor = p.lipschitz_factor();
    let lipschitz_holds = (0..200).all(|_| {
        let k = lam.sites().choose(&mut rng).expect("non-empty");
        let step: Vec<i64> = (0..dim).map(|_| rng.random_range(-n..=n)).collect();
        let mut j = k.clone();
        let mut budget = n;
        let mut coords = j.coords().to_vec();
        for (c, s) in coords.iter_mut().zip(step) {
            let s = s.clamp(-budget, budget);
            *c += s;
            budget -= s.abs();
        }
        j = Site::new(coords);
        (p.alpha(k) - p.alpha(&j)).abs() <= p.alpha(k) * factor * (1.0 + 1e-12) + 1e-300
    });
    Ok(WeightCase {
        index,
        dim,
        sites: lam.len(),
        min_ratio: w.min_ratio,
        u_mean: u.mean_value(),
        bound_holds: w.bound_holds,
        endpoints_hold: w.endpoints_hold,
        lipschitz_holds,
    })
}
