use std::collections::HashMap;

use alloyfmm::averaging::{det_average_check, det_bound_at, random_complex, random_conditioned, w_transform, WeightProfile};
use alloyfmm::fmm::{criterion_prefactor, fractional_moments, xi_exponent, xi_s, ExponentRule, MomentConfig};
use alloyfmm::geometry::{annulus_geometry, boundaries, components, cube, metrics, Region, Site, SiteSet};
use alloyfmm::linalg::{c, op_norm, Factorization};
use alloyfmm::localization::{certified_scan, regularity, BoxSpectrum, RegularityStatus, ScaleSequence};
use alloyfmm::model::{coupling_sites, deplete, hamiltonian, norm_bound, AlloyModel, Density, DisorderField, SingleSitePotential};
use alloyfmm::montecarlo::{sample_rng, Workers};
use alloyfmm::resolvent::GreenEvaluator;
use proptest::prelude::*;

fn site_set_2d(max: usize, span: i64) -> impl Strategy<Value = SiteSet> {
    prop::collection::vec((-span..=span, -span..=span), 1..max)
        .prop_map(|v| SiteSet::new(2, v.into_iter().map(|(a, b)| Site::from([a, b]))).unwrap())
}

fn potential_1d() -> impl Strategy<Value = SingleSitePotential> {
    prop::collection::vec(-1.0f64..1.0, 1..5).prop_filter_map("u must not vanish", |mut v| {
        v[0] = v[0].signum().max(0.0) + 0.5 * v[0];
        SingleSitePotential::line(&v).ok()
    })
}

fn positive_potential_2d() -> impl Strategy<Value = SingleSitePotential> {
    prop::collection::vec(((0i64..3, 0i64..3), -1.0f64..1.0), 1..5).prop_filter_map("ū > 0", |terms| {
        let pairs: Vec<(Site, f64)> = terms.into_iter().map(|((a, b), v)| (Site::from([a, b]), v)).collect();
        let u = SingleSitePotential::from_pairs(2, &pairs).ok()?;
        (u.mean_value() > 1e-3).then_some(u)
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }

    fn join(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn boundary_relations(set in site_set_2d(80, 6)) {
        let b = boundaries(&set, &Region::Lattice { dim: 2 });
        prop_assert!(b.interior.is_subset(&set));
        prop_assert!(b.exterior.iter().all(|s| !set.contains(s)));
        for (inner, outer) in &b.bonds {
            prop_assert!(b.interior.contains(inner));
            prop_assert!(b.exterior.contains(outer));
            prop_assert_eq!(inner.dist_l1(outer), 1);
        }
    }

    #[test]
    fn cube_rim_count(d in 1usize..=3, l in 1i64..5) {
        let b = boundaries(&cube(l, &Site::origin(d)), &Region::Lattice { dim: d });
        let expected = (2 * l + 1).pow(d as u32) - (2 * l - 1).pow(d as u32);
        prop_assert_eq!(b.interior.len() as i64, expected);
    }

    #[test]
    fn components_match_union_find(set in site_set_2d(200, 8)) {
        let comps = components(&set);
        let mut uf = UnionFind((0..set.len()).collect());
        for (i, s) in set.iter().enumerate() {
            for n in s.neighbors() {
                if let Some(j) = set.index_of(&n) {
                    uf.join(i, j);
                }
            }
        }
        let mut roots = HashMap::new();
        for i in 0..set.len() {
            let r = uf.find(i);
            roots.entry(r).or_insert(i);
        }
        prop_assert_eq!(comps.len(), roots.len());
        for i in 0..set.len() {
            for j in (i + 1)..set.len().min(i + 20) {
                let same = uf.find(i) == uf.find(j);
                prop_assert_eq!(comps.same_component(set.get(i), set.get(j)).unwrap(), same);
            }
        }
    }

    #[test]
    fn annulus_nesting_and_separation(theta in site_set_2d(5, 1), extra in 0i64..3, shift in (-2i64..=2, -2i64..=2)) {
        let theta = theta.union(&SiteSet::new(2, [Site::origin(2)]).unwrap());
        let diam = metrics(&theta).unwrap().diam_inf;
        let l = diam + 2 + extra;
        let x = Site::from([shift.0, shift.1]);
        let reach = 2 * l + diam + 1;
        let gamma = cube(reach + l + diam + 2, &Site::origin(2));
        let g = annulus_geometry(&Region::Finite(gamma.clone()), &theta, &x, l).unwrap();
        prop_assert!(g.hat_w.is_subset(&g.w));
        prop_assert!(g.hat_w.is_subset(&g.hat_lambda));
        prop_assert!(g.hat_lambda.is_subset(&g.lambda));
        prop_assert!(!g.w.contains(&x));
        let y = x.add(&Site::axis(2, 0, reach));
        prop_assert!(gamma.contains(&y));
        prop_assert!(!g.w.contains(&y));
    }

    #[test]
    fn hamiltonian_symmetric_and_restricts(u in potential_1d(), lambda in 0.0f64..50.0, seed in any::<u64>(), cut in 2i64..10) {
        let rho = Density::uniform(-1.0, 1.0).unwrap();
        let gamma = SiteSet::line(-6..=6);
        let sub = SiteSet::line(-6..cut - 6);
        let mut rng = sample_rng(seed, 0);
        let field = DisorderField::sample(coupling_sites(&gamma, &u), &rho, &mut rng);
        let h = hamiltonian(&gamma, lambda, &u, &field).unwrap();
        let m = h.real();
        prop_assert_eq!(&m, &m.transpose());
        let direct = hamiltonian(&sub, lambda, &u, &field).unwrap();
        let restricted = h.restrict(&sub).unwrap();
        prop_assert_eq!(direct.real(), restricted.real());
        let dep = deplete(&h, &sub).unwrap();
        let outside = gamma.difference(&sub);
        let cross = dep.depleted.block(&sub, &outside).unwrap();
        prop_assert!(cross.iter().all(|z| *z == c(0.0, 0.0)));
        let eig = h.eigenvalues();
        let spread = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
        prop_assert!(spread <= norm_bound(1, lambda, rho.radius(), &u) * (1.0 + 1e-12));
    }

    #[test]
    fn green_symmetry_and_norm(seed in any::<u64>(), e in -3.0f64..3.0, eta in 1e-3f64..1.0) {
        let u = SingleSitePotential::line(&[1.0, -0.5]).unwrap();
        let model = AlloyModel::new(SiteSet::line(0..12), u).unwrap();
        let rho = Density::triangular(0.0, 1.0).unwrap();
        let omegas = model.sample_couplings(&rho, &mut sample_rng(seed, 1));
        let h = model.hamiltonian(5.0, &omegas);
        let g = GreenEvaluator::new(&h, c(e, eta)).unwrap().inverse().unwrap();
        let tol = 1e-12 * g.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!((&g - g.transpose()).iter().all(|z| z.norm() <= tol));
        prop_assert!(op_norm(&g) <= (1.0 / eta) * (1.0 + 1e-10));
    }

    #[test]
    fn weights_positive_summable_lipschitz(
        u in positive_potential_2d(),
        x in (-4i64..=4, -4i64..=4),
        y in (-4i64..=4, -4i64..=4),
        r in 0i64..8,
        k in (-8i64..=8, -8i64..=8),
        step in (-3i64..=3, -3i64..=3),
    ) {
        let x = Site::from([x.0, x.1]);
        let y = Site::from([y.0, y.1]);
        let p = WeightProfile::new(&u, &x, &y).unwrap();
        let k = Site::from([k.0, k.1]);
        if p.rate.is_finite() {
            prop_assert!(p.alpha(&k) > 0.0);
        }
        let boxed = cube(r, &x);
        let sum: f64 = boxed.iter().map(|s| p.alpha(s)).sum();
        prop_assert!(sum <= p.total * (1.0 + 1e-12));
        prop_assert!(p.total - sum <= p.tail_outside_box(r) * (1.0 + 1e-9) + 1e-12);
        let n = p.spread;
        let j = Site::from([k.coords()[0] + step.0.clamp(-n, n), k.coords()[1] + (step.1).clamp(-(n - step.0.clamp(-n, n).abs()), n - step.0.clamp(-n, n).abs())]);
        prop_assert!(k.dist_l1(&j) <= n);
        let lhs = (p.alpha(&k) - p.alpha(&j)).abs();
        prop_assert!(lhs <= p.alpha(&k) * p.lipschitz_factor() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn transformed_potential_lower_bound(u in positive_potential_2d(), x in (-3i64..=3, -3i64..=3), y in (-3i64..=3, -3i64..=3), r in 1i64..6) {
        let x = Site::from([x.0, x.1]);
        let y = Site::from([y.0, y.1]);
        let p = WeightProfile::new(&u, &x, &y).unwrap();
        let w = w_transform(&p, &u, &cube(r, &Site::origin(2)));
        for (k, v) in w.sites.iter().zip(&w.values) {
            prop_assert!(*v >= p.alpha(k) * p.u_mean / 2.0, "W({k}) = {v}");
        }
        prop_assert!(w.bound_holds);
    }

    #[test]
    fn optimised_det_bound_below_every_split(seed in any::<u64>(), n in 1usize..4, s in 0.05f64..0.95, kappa in 1e-3f64..10.0) {
        let mut rng = sample_rng(seed, 2);
        let a = random_complex(n, &mut rng);
        let v = random_conditioned(n, 1e2, &mut rng);
        let rho = Density::triangular(0.0, 1.0).unwrap();
        let report = det_average_check(&a, &v, &rho, s).unwrap();
        let log_det = Factorization::new(v).unwrap().log_abs_det();
        prop_assert!(report.bound <= det_bound_at(log_det, n, &rho, s, kappa) * (1.0 + 1e-12));
    }

    #[test]
    fn xi_is_the_larger_power(lambda in 1e-3f64..1e3, s in 0.01f64..0.99, theta in 1usize..6) {
        let xi = xi_s(lambda, s, theta);
        prop_assert!(xi >= lambda.powf(-s / (2.0 * theta as f64)));
        prop_assert!(xi >= lambda.powf(-2.0 * s));
        let spelled = lambda.powf(xi_exponent(lambda, s, theta));
        prop_assert!((xi - spelled).abs() <= 1e-12 * xi);
        prop_assert!(xi_s(lambda * 1.5, s, theta) <= xi);
    }

    #[test]
    fn prefactor_spellings_agree(l in 1i64..40, d in 1usize..=3, lambda in 1e-2f64..1e3, s in 0.01f64..0.99, theta in 1usize..6) {
        let (volume, xi, lam) = criterion_prefactor(l, d, lambda, s, theta);
        prop_assert_eq!(volume, (l as f64).powi(3 * (d as i32 - 1)));
        prop_assert_eq!(xi, xi_s(lambda, s, theta));
        prop_assert!((lam - lambda.powf(-2.0 * s / (2.0 * theta as f64))).abs() <= 1e-14 * lam);
    }

    #[test]
    fn scale_sequence_increases(l0 in 2i64..8, frac in 0.05f64..0.95, excess in 0.1f64..3.0, d in 1usize..=3) {
        let p = d as f64 + excess;
        let upper = 2.0 * p / d as f64;
        let alpha = 1.0 + frac * (upper.min(2.0) - 1.0);
        // oracle: does any rounding step fail to grow?
        let mut l = l0 as f64;
        let mut stalls = false;
        for _ in 1..4 {
            let next = l.powf(alpha).round();
            stalls |= next <= l;
            l = next;
        }
        match ScaleSequence::new(l0, alpha, p, d, 4) {
            Ok(seq) => prop_assert!(!stalls && seq.scales.windows(2).all(|w| w[1] > w[0])),
            Err(_) => prop_assert!(stalls),
        }
    }

    #[test]
    fn counts_bounded_and_monotone(seed in any::<u64>(), lambda in 0.0f64..20.0, center in -4.0f64..4.0, w1 in 0.0f64..2.0, w2 in 0.0f64..2.0) {
        let u = SingleSitePotential::line(&[1.0, -0.5]).unwrap();
        let model = AlloyModel::new(SiteSet::line(0..15), u).unwrap();
        let rho = Density::uniform(-1.0, 1.0).unwrap();
        let omegas = model.sample_couplings(&rho, &mut sample_rng(seed, 3));
        let spec = BoxSpectrum::new(model.gamma().clone(), model.real_hamiltonian(lambda, &omegas)).unwrap();
        let (small, big) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let a = spec.count(center - small / 2.0, center + small / 2.0);
        let b = spec.count(center - big / 2.0, center + big / 2.0);
        prop_assert!(b <= 15);
        prop_assert!(a <= b);
    }

    #[test]
    fn regularity_stable_under_tiny_shifts(seed in any::<u64>(), e in -2.5f64..2.5, m in 0.01f64..1.0) {
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let gamma = cube(5, &Site::from([0]));
        let model = AlloyModel::new(gamma.clone(), u).unwrap();
        let rho = Density::uniform(-1.0, 1.0).unwrap();
        let omegas = model.sample_couplings(&rho, &mut sample_rng(seed, 4));
        let spec = BoxSpectrum::new(gamma, model.real_hamiltonian(3.0, &omegas)).unwrap();
        prop_assume!(spec.distance(e, e) > 1e-6);
        let x = Site::from([0]);
        let v0 = regularity(&spec, &x, 5, e, m).unwrap();
        // skip energies sitting on the threshold itself
        prop_assume!((v0.value - v0.threshold).abs() > 1e-9 * v0.threshold);
        let v1 = regularity(&spec, &x, 5, e + 5e-15, m).unwrap();
        prop_assert_eq!(v0.status, v1.status);
    }

    #[test]
    fn certified_cells_are_regular_on_a_finer_grid(seed in any::<u64>(), m in 0.05f64..0.5) {
        let u = SingleSitePotential::line(&[1.0]).unwrap();
        let gamma = cube(6, &Site::from([0]));
        let model = AlloyModel::new(gamma.clone(), u).unwrap();
        let rho = Density::uniform(-1.0, 1.0).unwrap();
        let omegas = model.sample_couplings(&rho, &mut sample_rng(seed, 5));
        let spec = BoxSpectrum::new(gamma, model.real_hamiltonian(8.0, &omegas)).unwrap();
        let x = Site::from([0]);
        let scan = certified_scan(&spec, &x, 6, (-1.0, 1.0), m, 0.05).unwrap();
        for cell in scan.cells.iter().filter(|c| c.certified) {
            for i in 0..=10 {
                let e = cell.lo + (cell.hi - cell.lo) * i as f64 / 10.0;
                let v = regularity(&spec, &x, 6, e, m).unwrap();
                prop_assert_eq!(v.status, RegularityStatus::Regular, "E = {} in [{}, {}]", e, cell.lo, cell.hi);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_depend_only_on_seed(seed in any::<u64>(), workers in 2usize..5) {
        let u = SingleSitePotential::line(&[1.0, -0.5]).unwrap();
        let model = AlloyModel::new(SiteSet::line(0..10), u).unwrap();
        let rho = Density::triangular(0.0, 1.0).unwrap();
        let cfg = MomentConfig::new(0.3, ExponentRule::Raw, c(0.2, 0.05), 10.0, 100, seed);
        let targets = [Site::from([3]), Site::from([8])];
        let a = fractional_moments(&model, &Site::from([1]), &targets, &cfg, &rho, &Workers::serial()).unwrap();
        let b = fractional_moments(&model, &Site::from([1]), &targets, &cfg, &rho, &Workers::new(workers).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
