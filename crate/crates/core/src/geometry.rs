//! Lattice geometry on `Z^d`: sites, ordered site sets, vertex and bond
//! boundaries, cubes, the annulus sets used by the finite-volume criterion,
//! and connected components under nearest-neighbour adjacency.
//!
//! Every set is kept sorted lexicographically so that operators assembled
//! from it have a deterministic row order.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A point of the integer lattice `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(SmallVec<[i64; 4]>);

impl Site {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        Site(coords.into_iter().collect())
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    /// `t * e_axis` in dimension `dim`.
    pub fn axis(dim: usize, axis: usize, t: i64) -> Self {
        let mut s = Self::origin(dim);
        s.0[axis] = t;
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|a| -a).collect())
    }

    pub fn dist_l1(&self, other: &Site) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn dist_inf(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    /// The `2d` nearest neighbours, in a fixed order.
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut n = self.clone();
                n.0[axis] += step;
                n
            })
        })
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<&[i64]> for Site {
    fn from(c: &[i64]) -> Self {
        Site::new(c.iter().copied())
    }
}

impl<const N: usize> From<[i64; N]> for Site {
    fn from(c: [i64; N]) -> Self {
        Site::new(c)
    }
}

/// A finite set of lattice sites with a bijective index onto `0..len`.
#[derive(Clone, PartialEq, Eq)]
pub struct SiteSet {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sites.iter()).finish()
    }
}

impl SiteSet {
    pub fn empty(dim: usize) -> Self {
        SiteSet {
            dim,
            sites: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a set from arbitrary sites; duplicates are dropped and the
    /// result is sorted.
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut v: Vec<Site> = sites.into_iter().collect();
        if let Some(bad) = v.iter().find(|s| s.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.dim(),
            });
        }
        v.sort();
        v.dedup();
        Ok(Self::from_sorted(dim, v))
    }

    fn from_sorted(dim: usize, sites: Vec<Site>) -> Self {
        let index = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        SiteSet { dim, sites, index }
    }

    /// Convenience constructor for one-dimensional sets.
    pub fn line(points: impl IntoIterator<Item = i64>) -> Self {
        Self::new(1, points.into_iter().map(|p| Site::new([p]))).expect("1-d sites")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn get(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let all = self.sites.iter().chain(other.sites.iter()).cloned();
        SiteSet::new(self.dim, all).expect("same dimension")
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        let v = self
            .sites
            .iter()
            .filter(|s| !other.contains(s))
            .cloned()
            .collect();
        Self::from_sorted(self.dim, v)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Site) -> bool) -> SiteSet {
        let v = self.sites.iter().filter(|s| keep(s)).cloned().collect();
        Self::from_sorted(self.dim, v)
    }

    pub fn restrict(&self, region: &Region) -> SiteSet {
        self.filter(|s| region.contains(s))
    }

    pub fn translate(&self, by: &Site) -> SiteSet {
        // translation preserves lexicographic order
        let v = self.sites.iter().map(|s| s.add(by)).collect();
        Self::from_sorted(self.dim, v)
    }

    /// Line format: the dimension on the first line, then one site per line
    /// as space-separated integers.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.dim);
        for s in &self.sites {
            let line: Vec<String> = s.coords().iter().map(|c| c.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SiteSet> {
        text.parse()
    }
}

impl FromStr for SiteSet {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let dim: usize = lines
            .next()
            .ok_or_else(|| Error::Invalid("empty site-set text".into()))?
            .parse()
            .map_err(|e| Error::Invalid(format!("bad dimension header: {e}")))?;
        let mut sites = Vec::new();
        for (n, line) in lines.enumerate() {
            let coords: std::result::Result<Vec<i64>, _> =
                line.split_whitespace().map(str::parse).collect();
            let coords =
                coords.map_err(|e| Error::Invalid(format!("site line {}: {e}", n + 1)))?;
            sites.push(Site::new(coords));
        }
        SiteSet::new(dim, sites)
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Site;
    type IntoIter = std::slice::Iter<'a, Site>;
    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

/// An ambient region `Γ ⊆ Z^d`, possibly infinite.
#[derive(Clone, Debug)]
pub enum Region {
    Lattice { dim: usize },
    /// `{k : k[axis] >= min}`
    HalfSpace { dim: usize, axis: usize, min: i64 },
    Finite(SiteSet),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Lattice { dim } | Region::HalfSpace { dim, .. } => *dim,
            Region::Finite(s) => s.dim(),
        }
    }

    pub fn contains(&self, s: &Site) -> bool {
        match self {
            Region::Lattice { .. } => true,
            Region::HalfSpace { axis, min, .. } => s.coords()[*axis] >= *min,
            Region::Finite(set) => set.contains(s),
        }
    }

    pub fn as_finite(&self) -> Option<&SiteSet> {
        match self {
            Region::Finite(s) => Some(s),
            _ => None,
        }
    }
}

impl From<SiteSet> for Region {
    fn from(s: SiteSet) -> Self {
        Region::Finite(s)
    }
}

/// `∂^iΛ`: sites of `set` with fewer than `2d` neighbours inside `set`.
/// Always computed in the full lattice.
pub fn interior_boundary(set: &SiteSet) -> SiteSet {
    let two_d = 2 * set.dim();
    set.filter(|s| s.neighbors().filter(|n| set.contains(n)).count() < two_d)
}

/// `∂^oΛ ∩ Γ`: sites of the ambient region outside `set` adjacent to it.
pub fn exterior_boundary(set: &SiteSet, ambient: &Region) -> SiteSet {
    let out = set
        .iter()
        .flat_map(|s| s.neighbors())
        .filter(|n| !set.contains(n) && ambient.contains(n));
    SiteSet::new(set.dim(), out).expect("same dimension")
}

/// `Λ⁺ ∩ Γ = (Λ ∪ ∂^oΛ) ∩ Γ`.
pub fn fatten(set: &SiteSet, ambient: &Region) -> SiteSet {
    set.restrict(ambient).union(&exterior_boundary(set, ambient))
}

#[derive(Clone, Debug)]
pub struct Boundaries {
    pub interior: SiteSet,
    pub exterior: SiteSet,
    /// Ordered pairs `(inner, outer)` with `|inner - outer|_1 = 1`.
    pub bonds: Vec<(Site, Site)>,
}

/// Interior, exterior and bond boundary of `set` relative to `ambient`.
/// Exterior sites and bonds are clipped to the ambient region.
pub fn boundaries(set: &SiteSet, ambient: &Region) -> Boundaries {
    let mut bonds = Vec::new();
    for s in set {
        for n in s.neighbors() {
            if !set.contains(&n) && ambient.contains(&n) {
                bonds.push((s.clone(), n));
            }
        }
    }
    Boundaries {
        interior: interior_boundary(set),
        exterior: exterior_boundary(set, ambient),
        bonds,
    }
}

/// `Λ_{L,x} = {k : |x - k|_∞ <= L}`.
pub fn cube(l: i64, center: &Site) -> SiteSet {
    assert!(l >= 0, "cube half-width must be non-negative");
    let d = center.dim();
    let side = (2 * l + 1) as usize;
    let total = side.pow(d as u32);
    let mut sites = Vec::with_capacity(total);
    let mut offs = vec![-l; d];
    for _ in 0..total {
        sites.push(Site::new(
            center.coords().iter().zip(&offs).map(|(c, o)| c + o),
        ));
        // odometer, last axis fastest => lexicographic order
        for axis in (0..d).rev() {
            offs[axis] += 1;
            if offs[axis] <= l {
                break;
            }
            offs[axis] = -l;
        }
    }
    SiteSet::from_sorted(d, sites)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub diam_inf: i64,
    pub diam_l1: i64,
}

pub fn metrics(set: &SiteSet) -> Result<Metrics> {
    if set.is_empty() {
        return Err(Error::Geometry("diameter of an empty set".into()));
    }
    let mut m = Metrics {
        diam_inf: 0,
        diam_l1: 0,
    };
    for (i, a) in set.iter().enumerate() {
        for b in &set.sites()[i + 1..] {
            m.diam_inf = m.diam_inf.max(a.dist_inf(b));
            m.diam_l1 = m.diam_l1.max(a.dist_l1(b));
        }
    }
    Ok(m)
}

/// Partition of a finite set into nearest-neighbour connected components.
#[derive(Clone, Debug)]
pub struct Components {
    parts: Vec<SiteSet>,
    label: HashMap<Site, usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[SiteSet] {
        &self.parts
    }

    pub fn label_of(&self, s: &Site) -> Result<usize> {
        self.label
            .get(s)
            .copied()
            .ok_or_else(|| Error::NotMember(s.to_string()))
    }

    pub fn component_of(&self, s: &Site) -> Result<&SiteSet> {
        Ok(&self.parts[self.label_of(s)?])
    }

    pub fn same_component(&self, a: &Site, b: &Site) -> Result<bool> {
        Ok(self.label_of(a)? == self.label_of(b)?)
    }
}

/// Breadth-first flood fill. Components are numbered by their smallest site.
pub fn components(set: &SiteSet) -> Components {
    let mut label: HashMap<Site, usize> = HashMap::with_capacity(set.len());
    let mut parts = Vec::new();
    for start in set {
        if label.contains_key(start) {
            continue;
        }
        let id = parts.len();
        let mut members = vec![start.clone()];
        label.insert(start.clone(), id);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(cur) = queue.pop_front() {
            for n in cur.neighbors() {
                if set.contains(&n) && !label.contains_key(&n) {
                    label.insert(n.clone(), id);
                    members.push(n.clone());
                    queue.push_back(n);
                }
            }
        }
        parts.push(SiteSet::new(set.dim(), members).expect("same dimension"));
    }
    Components { parts, label }
}

/// Sites `k ∈ Γ` lying in some translate `Θ_b = Θ + b`, `b ∈ centers`.
pub fn translates_union(theta: &SiteSet, centers: &SiteSet, gamma: &Region) -> SiteSet {
    let all = centers
        .iter()
        .flat_map(|b| theta.iter().map(move |t| t.add(b)))
        .filter(|k| gamma.contains(k));
    SiteSet::new(theta.dim(), all).expect("same dimension")
}

/// The annulus construction around `x` used by the finite-volume criterion.
#[derive(Clone, Debug)]
pub struct AnnulusGeometry {
    pub x: Site,
    pub l: i64,
    /// `B_x = ∂^i Λ_{L,x}` in the full lattice.
    pub sphere: SiteSet,
    /// `Ŵ_x`: translates of `Θ` centred on the sphere, clipped to `Γ`.
    pub hat_w: SiteSet,
    /// `W_x = Ŵ_x⁺ ∩ Γ`.
    pub w: SiteSet,
    /// `Λ̂_x`: translates of `Θ` centred in `Λ_{L,x}`, clipped to `Γ`.
    pub hat_lambda: SiteSet,
    /// `Λ_x = Λ̂_x⁺ ∩ Γ`.
    pub lambda: SiteSet,
    /// Component of `x` in `Γ ∖ Ŵ_x` (always finite).
    pub x_component: SiteSet,
    /// Number of components of `Γ ∖ Ŵ_x` inside the inspection window.
    pub window_components: usize,
}

pub fn annulus_geometry(gamma: &Region, theta: &SiteSet, x: &Site, l: i64) -> Result<AnnulusGeometry> {
    let d = x.dim();
    if theta.dim() != d || gamma.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            found: if theta.dim() != d { theta.dim() } else { gamma.dim() },
        });
    }
    let origin = Site::origin(d);
    if !theta.contains(&origin) {
        return Err(Error::Geometry("the support of u must contain the origin".into()));
    }
    let diam = metrics(theta)?.diam_inf;
    if l < diam + 2 {
        return Err(Error::Hypothesis(format!(
            "annulus side parameter L = {l} is below diam(Θ) + 2 = {}",
            diam + 2
        )));
    }
    if !gamma.contains(x) {
        return Err(Error::NotMember(x.to_string()));
    }

    let block = cube(l, x);
    let sphere = interior_boundary(&block);
    let hat_w = translates_union(theta, &sphere, gamma);
    let w = fatten(&hat_w, gamma);
    let hat_lambda = translates_union(theta, &block, gamma);
    let lambda = fatten(&hat_lambda, gamma);

    if w.contains(x) {
        return Err(Error::Geometry(format!("x = {x} fell inside W_x")));
    }

    // Inspect Γ ∖ Ŵ_x on a window strictly larger than Λ_x.
    let reach = theta.iter().map(Site::norm_inf).max().unwrap_or(0);
    let radius = l + reach + 2;
    let window_cube = cube(radius, x);
    let window = window_cube.restrict(gamma).difference(&hat_w);
    let comps = components(&window);
    let x_component = comps.component_of(x)?.clone();
    let rim = interior_boundary(&window_cube);
    if x_component.iter().any(|s| rim.contains(s)) {
        return Err(Error::Geometry(
            "removing Ŵ_x does not disconnect x from infinity".into(),
        ));
    }
    if !x_component.is_subset(&lambda) {
        return Err(Error::Geometry("the x-component of Γ∖Ŵ_x leaves Λ_x".into()));
    }
    let beyond = window.iter().any(|s| !lambda.contains(s));
    if beyond && comps.len() < 2 {
        return Err(Error::Geometry("Γ∖Ŵ_x is connected".into()));
    }

    Ok(AnnulusGeometry {
        x: x.clone(),
        l,
        sphere,
        hat_w,
        w,
        hat_lambda,
        lambda,
        x_component,
        window_components: comps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1(p: i64) -> Site {
        Site::new([p])
    }

    #[test]
    fn chain_boundaries() {
        let set = SiteSet::line(0..4);
        let b = boundaries(&set, &Region::Lattice { dim: 1 });
        assert_eq!(b.interior, SiteSet::line([0, 3]));
        assert_eq!(b.exterior, SiteSet::line([-1, 4]));
        assert_eq!(b.bonds, vec![(s1(0), s1(-1)), (s1(3), s1(4))]);
    }

    #[test]
    fn square_boundaries() {
        let set = cube(1, &Site::origin(2)).filter(|s| s.coords().iter().all(|&c| c >= 0));
        assert_eq!(set.len(), 4);
        let b = boundaries(&set, &Region::Lattice { dim: 2 });
        assert_eq!(b.interior.len(), 4);
        assert_eq!(b.exterior.len(), 8);
        assert_eq!(b.bonds.len(), 8);
    }

    #[test]
    fn half_line_ambient_clips_exterior() {
        let set = cube(2, &s1(0));
        let half = Region::HalfSpace { dim: 1, axis: 0, min: 0 };
        let b = boundaries(&set, &half);
        assert_eq!(b.exterior, SiteSet::line([3]));
        assert_eq!(b.bonds, vec![(s1(2), s1(3))]);
    }

    #[test]
    fn empty_set_has_empty_boundaries() {
        let b = boundaries(&SiteSet::empty(2), &Region::Lattice { dim: 2 });
        assert!(b.interior.is_empty() && b.exterior.is_empty() && b.bonds.is_empty());
    }

    #[test]
    fn cubes() {
        assert_eq!(cube(0, &Site::origin(2)).sites(), &[Site::origin(2)]);
        assert_eq!(cube(1, &Site::origin(2)).len(), 9);
        assert_eq!(cube(3, &s1(5)), SiteSet::line(2..=8));
        let c = cube(2, &Site::new([1, -1, 0]));
        assert_eq!(c.len(), 125);
        assert!(c.sites().windows(2).all(|w| w[0] < w[1]));
        for l in 1..4 {
            let b = interior_boundary(&cube(l, &Site::origin(3)));
            assert_eq!(b.len() as i64, (2 * l + 1).pow(3) - (2 * l - 1).pow(3));
        }
    }

    #[test]
    fn point_annulus() {
        let theta = SiteSet::line([0]);
        let g = annulus_geometry(&Region::Lattice { dim: 1 }, &theta, &s1(0), 2).unwrap();
        assert_eq!(g.sphere, SiteSet::line([-2, 2]));
        assert_eq!(g.hat_w, SiteSet::line([-2, 2]));
        assert_eq!(g.w, SiteSet::line([-3, -2, -1, 1, 2, 3]));
        assert_eq!(g.x_component, SiteSet::line([-1, 0, 1]));
    }

    #[test]
    fn two_point_annulus() {
        let theta = SiteSet::line([0, 1]);
        let g = annulus_geometry(&Region::Lattice { dim: 1 }, &theta, &s1(0), 3).unwrap();
        assert_eq!(g.hat_w, SiteSet::line([-3, -2, 3, 4]));
        assert_eq!(g.x_component, SiteSet::line([-1, 0, 1, 2]));
        assert!(g.window_components >= 2);
    }

    #[test]
    fn annulus_rejects_small_l() {
        let theta = SiteSet::line([0, 1, 2]);
        let err = annulus_geometry(&Region::Lattice { dim: 1 }, &theta, &s1(0), 3).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)), "{err}");
    }

    /// d = 2, Γ the right half-plane, Θ two disjoint squares, L = 10.
    #[test]
    fn half_plane_two_square_annulus() {
        let origin = Site::origin(2);
        let theta = cube(2, &origin).union(&cube(1, &Site::new([5, 5])));
        let gamma = Region::HalfSpace { dim: 2, axis: 0, min: 0 };
        let g = annulus_geometry(&gamma, &theta, &origin, 10).unwrap();

        assert!(g.hat_w.iter().all(|k| k.coords()[0] >= 0));
        assert!(g.sphere.restrict(&gamma).is_subset(&g.hat_w));
        // inner band corner and shifted outer band corner
        assert!(g.hat_w.contains(&Site::new([12, 12])));
        assert!(g.hat_w.contains(&Site::new([16, 16])));
        // the corridor between the two bands is not covered
        assert!(!g.hat_w.contains(&Site::new([13, 13])));
        assert!(!g.hat_w.contains(&Site::new([13, 0])));
        // the shifted band folds back inside the box along the bottom side
        assert!(g.hat_w.contains(&Site::new([3, -5])));

        let window = cube(25, &origin).restrict(&gamma).difference(&g.hat_w);
        let comps = components(&window);
        let cx = comps.label_of(&origin).unwrap();
        let corridor = comps.label_of(&Site::new([13, 0])).unwrap();
        let far = comps.label_of(&Site::new([25, 0])).unwrap();
        assert!(cx != corridor && corridor != far && cx != far);
        assert!(comps.len() >= 3);
        let rim = interior_boundary(&cube(25, &origin));
        assert!(!comps.parts()[corridor].iter().any(|s| rim.contains(s)));
        assert!(g.x_component.iter().all(|s| s.dist_inf(&origin) < 10));
    }

    #[test]
    fn component_examples() {
        let c = components(&SiteSet::line([0, 1, 5, 6]));
        assert_eq!(c.parts(), &[SiteSet::line([0, 1]), SiteSet::line([5, 6])]);
        let punctured = cube(1, &s1(0)).difference(&SiteSet::line([0]));
        let c = components(&punctured);
        assert_eq!(c.len(), 2);
        assert!(c.component_of(&s1(0)).is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(metrics(&SiteSet::line([0])).unwrap(), Metrics { diam_inf: 0, diam_l1: 0 });
        assert_eq!(metrics(&SiteSet::line(0..3)).unwrap(), Metrics { diam_inf: 2, diam_l1: 2 });
        let pair = SiteSet::new(2, [Site::new([0, 0]), Site::new([2, 3])]).unwrap();
        assert_eq!(metrics(&pair).unwrap(), Metrics { diam_inf: 3, diam_l1: 5 });
        assert!(metrics(&SiteSet::empty(1)).is_err());
    }

    #[test]
    fn text_format() {
        let set = cube(1, &Site::origin(2));
        let text = set.to_text();
        assert!(text.starts_with("2\n-1 -1\n"));
        assert_eq!(SiteSet::from_text(&text).unwrap(), set);
        assert!(SiteSet::from_text("2\n1 x\n").is_err());
    }
}
