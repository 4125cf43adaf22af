//! Config-driven experiment runs: a TOML file names the experiment and its
//! parameters, the run writes CSV/JSON artifacts and a manifest into a
//! run-scoped directory, and `report` summarises manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::averaging::nonlocal_apriori_check;
use crate::error::{Error, Result};
use crate::fmm::{
    apriori_boundary_experiment, apriori_experiment, decay_profile, finite_volume_criterion, ExponentRule,
    MomentConfig, MomentEstimate,
};
use crate::fuzz::{averaging_case, identity_case, independence_case, tail_case, weight_case};
use crate::geometry::{cube, Site, SiteSet};
use crate::localization::{eigen_localization, two_box_experiment, volume_linearity, wegner_experiment, TwoBoxConfig};
use crate::model::{AlloyModel, Density, SingleSitePotential};
use crate::montecarlo::Workers;

pub const WORKERS_ENV: &str = "ALLOYFMM_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Identities,
    Averaging,
    Apriori,
    Decay,
    Criterion,
    Wegner,
    Twobox,
    Eigenloc,
    NonlocalApriori,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Identities => "identities",
            ExperimentKind::Averaging => "averaging",
            ExperimentKind::Apriori => "apriori",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Criterion => "criterion",
            ExperimentKind::Wegner => "wegner",
            ExperimentKind::Twobox => "twobox",
            ExperimentKind::Eigenloc => "eigenloc",
            ExperimentKind::NonlocalApriori => "nonlocal-apriori",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTerm {
    pub site: Vec<i64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub dim: usize,
    /// `Γ` is the cube of this half-width around the origin.
    pub half_width: i64,
    pub potential: Vec<PotentialTerm>,
    pub density: Density,
    pub lambda: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    /// `[Re z, Im z]`.
    pub z: Option<[f64; 2]>,
    pub s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Run even when an assumption of the experiment fails.
    #[serde(default)]
    pub exploratory: bool,
}

fn default_samples() -> usize {
    1000
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            samples: default_samples(),
            seed: 0,
            workers: None,
            tolerance: default_tolerance(),
            exploratory: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_dir() }
    }
}

/// Per-experiment parameters; unset fields get kind-specific defaults,
/// which are written back into the resolved config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub cases: Option<usize>,
    pub max_sites: Option<usize>,
    pub x: Option<Vec<i64>>,
    pub y: Option<Vec<i64>>,
    pub distances: Option<Vec<i64>>,
    pub axis: Option<usize>,
    pub theorem_mode: Option<bool>,
    /// Also run the boundary-anchored variant of the a-priori sweep.
    pub boundary: Option<bool>,
    pub l: Option<i64>,
    pub b_s: Option<f64>,
    pub interval: Option<[f64; 2]>,
    pub rate: Option<f64>,
    pub delta: Option<f64>,
    pub widths: Option<Vec<f64>>,
    pub center_energy: Option<f64>,
    /// Second box half-width for the volume-linearity check.
    pub compare_half_width: Option<i64>,
    pub window: Option<[f64; 2]>,
    pub min_rate: Option<f64>,
    pub min_probability: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| schema(e.to_string()))
    }

    /// SHA-256 of the resolved TOML.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn potential(&self) -> Result<SingleSitePotential> {
        let d = self.model.dim;
        let pairs: Vec<(Site, f64)> = self
            .model
            .potential
            .iter()
            .map(|t| {
                if t.site.len() != d {
                    return Err(schema(format!("potential site {:?} does not have {d} coordinates", t.site)));
                }
                Ok((Site::new(t.site.iter().copied()), t.value))
            })
            .collect::<Result<_>>()?;
        SingleSitePotential::from_pairs(d, &pairs).map_err(|e| schema(e.to_string()))
    }

    pub fn domain(&self) -> SiteSet {
        cube(self.model.half_width, &Site::origin(self.model.dim))
    }

    fn site(&self, v: &[i64]) -> Result<Site> {
        if v.len() != self.model.dim {
            return Err(schema(format!("site {v:?} does not have {} coordinates", self.model.dim)));
        }
        Ok(Site::new(v.iter().copied()))
    }

    fn need_lambda(&self) -> Result<f64> {
        self.model.lambda.ok_or_else(|| schema("model.lambda is required for this experiment"))
    }

    fn need_lambdas(&self) -> Result<Vec<f64>> {
        match (&self.model.lambdas, self.model.lambda) {
            (Some(l), _) => Ok(l.clone()),
            (None, Some(l)) => Ok(vec![l]),
            _ => Err(schema("model.lambdas (or model.lambda) is required for this experiment")),
        }
    }

    fn need_z(&self) -> Result<[f64; 2]> {
        self.model.z.ok_or_else(|| schema("model.z is required for this experiment"))
    }

    fn need_s(&self) -> Result<f64> {
        self.model.s.ok_or_else(|| schema("model.s is required for this experiment"))
    }

    /// Validates the schema and fills every default for the kind.
    pub fn resolve(mut self) -> Result<Self> {
        use ExperimentKind::*;
        let d = self.model.dim;
        if d == 0 || d > 3 {
            return Err(schema(format!("model.dim must be 1, 2 or 3, got {d}")));
        }
        if self.model.half_width < 1 {
            return Err(schema("model.half_width must be at least 1"));
        }
        self.potential()?;
        self.model.density.validate().map_err(|e| schema(e.to_string()))?;
        if self.run.samples == 0 {
            return Err(schema("run.samples must be positive"));
        }
        let hw = self.model.half_width;
        let e = &mut self.experiment;
        let origin = vec![0; d];
        match self.kind {
            Identities | Averaging => {
                e.cases.get_or_insert(100);
                if self.kind == Identities {
                    e.max_sites.get_or_insert(300);
                }
            }
            Apriori | NonlocalApriori => {
                e.x.get_or_insert(origin.clone());
                e.y.get_or_insert(origin.clone());
                if self.kind == Apriori {
                    e.theorem_mode.get_or_insert(true);
                    e.boundary.get_or_insert(false);
                }
            }
            Decay => {
                e.x.get_or_insert(origin.clone());
                e.axis.get_or_insert(0);
                e.distances.get_or_insert((1..=hw).collect());
                e.theorem_mode.get_or_insert(true);
            }
            Criterion => {
                e.x.get_or_insert(origin.clone());
                e.theorem_mode.get_or_insert(true);
            }
            Wegner => {
                e.center_energy.get_or_insert(0.0);
                e.widths.get_or_insert(vec![0.2, 0.1, 0.05, 0.025]);
            }
            Twobox => {
                e.interval.get_or_insert([-0.2, 0.2]);
                e.delta.get_or_insert(0.01);
                e.x.get_or_insert(origin.clone());
            }
            Eigenloc => {}
        }
        // required fields per kind
        match self.kind {
            Identities | Averaging => {}
            Apriori | NonlocalApriori => {
                self.need_lambdas()?;
                self.need_z()?;
                self.need_s()?;
            }
            Decay => {
                self.need_lambda()?;
                self.need_z()?;
                self.need_s()?;
            }
            Criterion => {
                self.need_lambdas()?;
                self.need_z()?;
                self.need_s()?;
                if self.experiment.l.is_none() {
                    return Err(schema("experiment.l is required for the criterion"));
                }
            }
            Wegner => {
                self.need_lambda()?;
                self.need_s()?;
            }
            Twobox => {
                self.need_lambdas()?;
                if self.experiment.l.is_none() || self.experiment.rate.is_none() {
                    return Err(schema("experiment.l and experiment.rate are required for two-box runs"));
                }
            }
            Eigenloc => {
                self.need_lambda()?;
            }
        }
        Ok(self)
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const PROPERTY_FAILED: i32 = 1;
    pub const SCHEMA: i32 = 2;
    pub const ASSUMPTION: i32 = 3;
    pub const RESOURCE: i32 = 4;
    pub const IO: i32 = 5;
    pub const NUMERICAL: i32 = 6;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Invalid(_)
        | Error::Geometry(_)
        | Error::Dimension { .. }
        | Error::NotMember(_)
        | Error::MissingCoupling(_) => exit::SCHEMA,
        Error::Assumption(_) | Error::Hypothesis(_) => exit::ASSUMPTION,
        Error::Resource(_) => exit::RESOURCE,
        Error::Io(_) | Error::MissingArtifact(_) | Error::Json(_) => exit::IO,
        Error::Singular { .. } | Error::InsufficientData(_) => exit::NUMERICAL,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub workers: usize,
    pub summary: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    /// File names relative to the run directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Columns shared by every moment table.
#[derive(Serialize)]
struct MomentRow {
    distance: i64,
    mean: f64,
    stderr: f64,
    samples: usize,
    t: f64,
    lambda: f64,
    z_re: f64,
    z_im: f64,
}

fn moment_row(e: &MomentEstimate, lambda: f64, z: [f64; 2]) -> MomentRow {
    MomentRow {
        distance: e.x.dist_inf(&e.y),
        mean: e.mean,
        stderr: e.stderr,
        samples: e.samples,
        t: e.exponent,
        lambda,
        z_re: z[0],
        z_im: z[1],
    }
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(value)?)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut text = String::new();
        for r in rows {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        fs::write(self.dir.join(name), text)?;
        self.names.push(name.to_string());
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("csv: {other:?}")),
    }
}

/// Worker count: environment override, then the config, then one.
pub fn resolve_workers(cfg: &ExperimentConfig) -> Result<Workers> {
    let env = std::env::var(WORKERS_ENV).ok();
    let n = match env {
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| schema(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?,
        None => cfg.run.workers.unwrap_or(1),
    };
    if n == 0 {
        return Err(schema("worker count must be positive"));
    }
    Workers::new(n)
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// Resolves, runs and writes a config. Nothing is written when the config
/// fails validation.
pub fn run(cfg: ExperimentConfig) -> Result<RunOutcome> {
    let cfg = cfg.resolve()?;
    let workers = resolve_workers(&cfg)?;
    let hash = cfg.hash()?;
    let dir = cfg.output.dir.join(format!("{}-{}", cfg.kind.name(), &hash[..8]));
    let start = Instant::now();
    // compute first so a failing experiment leaves no partial directory
    let staged = execute(&cfg, &workers)?;
    fs::create_dir_all(&dir)?;
    let mut art = Artifacts {
        dir: dir.clone(),
        names: Vec::new(),
    };
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    art.names.push("config.toml".into());
    let (summary, checks) = staged.write(&mut art)?;
    let manifest = RunManifest {
        kind: cfg.kind,
        config_hash: hash,
        seed: cfg.run.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        workers: workers.count(),
        pass: checks.iter().all(|c| c.pass),
        summary,
        checks,
        artifacts: art.names.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome { dir, manifest })
}

type Writer = Box<dyn FnOnce(&mut Artifacts) -> Result<(Value, Vec<Check>)>>;

struct Staged(Writer);

impl Staged {
    fn write(self, art: &mut Artifacts) -> Result<(Value, Vec<Check>)> {
        (self.0)(art)
    }
}

fn staged(f: impl FnOnce(&mut Artifacts) -> Result<(Value, Vec<Check>)> + 'static) -> Staged {
    Staged(Box::new(f))
}

fn moment_config(cfg: &ExperimentConfig, lambda: f64) -> Result<MomentConfig> {
    let z = cfg.need_z()?;
    let theorem = cfg.experiment.theorem_mode.unwrap_or(false);
    let mut m = MomentConfig::new(
        cfg.need_s()?,
        if theorem { ExponentRule::Theorem } else { ExponentRule::Raw },
        num_complex::Complex64::new(z[0], z[1]),
        lambda,
        cfg.run.samples,
        cfg.run.seed,
    );
    m.theorem_mode = theorem && !cfg.run.exploratory;
    Ok(m)
}

fn execute(cfg: &ExperimentConfig, workers: &Workers) -> Result<Staged> {
    let u = cfg.potential()?;
    let rho = cfg.model.density.clone();
    let e = cfg.experiment.clone();
    let seed = cfg.run.seed;
    match cfg.kind {
        ExperimentKind::Identities => {
            let n = e.cases.unwrap_or(100);
            let tol = cfg.run.tolerance;
            let max_sites = e.max_sites.unwrap_or(300);
            let cases = workers.try_map(n, |i| identity_case(seed, i as u64, max_sites, tol))?;
            let indep = workers.try_map(n, |i| independence_case(seed, i as u64))?;
            Ok(staged(move |art| {
                art.jsonl("identities.jsonl", &cases)?;
                art.jsonl("independence.jsonl", &indep)?;
                let failures = cases.iter().filter(|c| !c.pass()).count();
                let worst = cases
                    .iter()
                    .flat_map(|c| c.reports.iter().map(|r| r.deviation))
                    .fold(0.0, f64::max);
                let indep_fail = indep.iter().filter(|c| !c.pass(1e-12)).count();
                Ok((
                    json!({"cases": n, "failures": failures, "worst_deviation": worst, "independence_failures": indep_fail}),
                    vec![
                        check("identities", failures == 0, format!("{failures}/{n} cases failed, worst deviation {worst:.2e}")),
                        check("schur-independence", indep_fail == 0, format!("{indep_fail}/{n} cases failed")),
                    ],
                ))
            }))
        }
        ExperimentKind::Averaging => {
            let n = e.cases.unwrap_or(100);
            let avg = workers.try_map(n, |i| averaging_case(seed, i as u64))?;
            let tails = workers.try_map(n, |i| tail_case(seed, i as u64))?;
            let weights = workers.try_map(n, |i| weight_case(seed, i as u64))?;
            Ok(staged(move |art| {
                art.jsonl("averaging.jsonl", &avg)?;
                art.jsonl("tails.jsonl", &tails)?;
                art.jsonl("weights.jsonl", &weights)?;
                let det = avg.iter().filter(|c| !c.det_pass).count();
                let norm = avg.iter().filter(|c| !c.norm_pass).count();
                let slope = tails.iter().filter(|c| !c.slope_pass).count();
                let w = weights
                    .iter()
                    .filter(|c| !(c.bound_holds && c.endpoints_hold && c.lipschitz_holds))
                    .count();
                Ok((
                    json!({"cases": n, "det_failures": det, "norm_failures": norm, "tail_failures": slope, "weight_failures": w}),
                    vec![
                        check("determinant-average", det == 0, format!("{det}/{n} failed")),
                        check("inverse-norm", norm == 0, format!("{norm}/{n} failed")),
                        check("monotone-tail", slope == 0, format!("{slope}/{n} slopes outside -1 ± 0.1")),
                        check("weights", w == 0, format!("{w}/{n} weight cases failed")),
                    ],
                ))
            }))
        }
        ExperimentKind::Apriori => {
            let gamma = cfg.domain();
            let lambdas = cfg.need_lambdas()?;
            let pair = (cfg.site(e.x.as_deref().unwrap_or(&[]))?, cfg.site(e.y.as_deref().unwrap_or(&[]))?);
            let mc = moment_config(cfg, 1.0)?;
            let z = cfg.need_z()?;
            let report = apriori_experiment(&gamma, std::slice::from_ref(&pair), &lambdas, &mc, &u, &rho, workers)?;
            let boundary = if e.boundary.unwrap_or(false) {
                // anchor the second site at the lower edge of the first axis
                let mut edge = pair.1.coords().to_vec();
                edge[0] = -cfg.model.half_width;
                let pairs = vec![(pair.0.clone(), Site::new(edge))];
                Some(apriori_boundary_experiment(&gamma, &pairs, &lambdas, &mc, &u, &rho, workers)?)
            } else {
                None
            };
            Ok(staged(move |art| {
                let rows: Vec<MomentRow> = report
                    .rows
                    .iter()
                    .flat_map(|r| r.estimates.iter().map(move |e| moment_row(e, r.lambda, z)))
                    .collect();
                art.csv("moments.csv", &rows)?;
                art.json("apriori.json", &report)?;
                let mut checks: Vec<Check> = report
                    .slopes
                    .iter()
                    .map(|p| {
                        check(
                            "apriori-slope",
                            p.bounded,
                            format!("slope {:.4} vs predicted {:.4} (+{})", p.fit.slope, p.predicted, report.tolerance),
                        )
                    })
                    .collect();
                let mut summary = json!({
                    "exponent": report.exponent,
                    "slopes": report.slopes.iter().map(|p| json!({"slope": p.fit.slope, "predicted": p.predicted, "tracks": p.tracks})).collect::<Vec<_>>(),
                });
                if let Some(b) = boundary {
                    art.json("apriori_boundary.json", &b)?;
                    for p in &b.slopes {
                        checks.push(check(
                            "apriori-boundary-slope",
                            p.tracks,
                            format!("slope {:.4} vs {:.4} ± {}", p.fit.slope, p.predicted, b.tolerance),
                        ));
                    }
                    summary["boundary_slopes"] = json!(b.slopes.iter().map(|p| p.fit.slope).collect::<Vec<_>>());
                }
                Ok((summary, checks))
            }))
        }
        ExperimentKind::NonlocalApriori => {
            let gamma = cfg.domain();
            let lambdas = cfg.need_lambdas()?;
            let x = cfg.site(e.x.as_deref().unwrap_or(&[]))?;
            let y = cfg.site(e.y.as_deref().unwrap_or(&[]))?;
            let mut mc = moment_config(cfg, 1.0)?;
            mc.rule = ExponentRule::Raw;
            mc.theorem_mode = false;
            let z = cfg.need_z()?;
            let report = nonlocal_apriori_check(&gamma, &x, &y, &lambdas, &u, &rho, &mc, workers)?;
            Ok(staged(move |art| {
                let rows: Vec<MomentRow> = report.rows.iter().map(|r| moment_row(&r.estimate, r.lambda, z)).collect();
                art.csv("moments.csv", &rows)?;
                art.json("nonlocal.json", &report)?;
                Ok((
                    json!({"slope": report.fit.slope, "limit": report.slope_limit, "s": report.s}),
                    vec![check(
                        "nonlocal-slope",
                        report.pass,
                        format!("slope {:.4} vs limit {:.4}", report.fit.slope, report.slope_limit),
                    )],
                ))
            }))
        }
        ExperimentKind::Decay => {
            let lambda = cfg.need_lambda()?;
            let model = AlloyModel::new(cfg.domain(), u.clone())?;
            let x = cfg.site(e.x.as_deref().unwrap_or(&[]))?;
            let mc = moment_config(cfg, lambda)?;
            let z = cfg.need_z()?;
            let fit = decay_profile(
                &model,
                &x,
                e.distances.as_deref().unwrap_or(&[]),
                e.axis.unwrap_or(0),
                &mc,
                &rho,
                workers,
            )?;
            Ok(staged(move |art| {
                let rows: Vec<MomentRow> = fit.estimates.iter().map(|e| moment_row(e, lambda, z)).collect();
                art.csv("profile.csv", &rows)?;
                art.json("fit.json", &fit)?;
                Ok((
                    json!({"lambda": lambda, "rate": fit.rate, "rate_interval": fit.rate_interval, "prefactor": fit.prefactor, "r2": fit.r2, "spearman": fit.spearman}),
                    vec![check(
                        "exponential-decay",
                        fit.is_exponential(),
                        format!("μ = {:.4} (CI {:.4}..{:.4}), r² = {:.3}", fit.rate, fit.rate_interval.0, fit.rate_interval.1, fit.r2),
                    )],
                ))
            }))
        }
        ExperimentKind::Criterion => {
            let gamma = cfg.domain();
            let x = cfg.site(e.x.as_deref().unwrap_or(&[]))?;
            let l = e.l.unwrap_or(0);
            let z = cfg.need_z()?;
            let results = cfg
                .need_lambdas()?
                .iter()
                .map(|&lambda| {
                    let mc = moment_config(cfg, lambda)?;
                    finite_volume_criterion(&gamma, &gamma, &x, l, &mc, &u, &rho, e.b_s, workers)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(staged(move |art| {
                let rows: Vec<MomentRow> = results
                    .iter()
                    .flat_map(|r| r.terms.iter().filter_map(move |t| t.estimate.as_ref().map(|e| moment_row(e, r.lambda, z))))
                    .collect();
                art.csv("terms.csv", &rows)?;
                art.json("criterion.json", &results)?;
                let monotone = results.windows(2).all(|p| {
                    let noise = 3.0 * (p[0].raw_sum_stderr.powi(2) + p[1].raw_sum_stderr.powi(2)).sqrt();
                    p[1].lambda < p[0].lambda || p[1].raw_sum <= p[0].raw_sum + noise
                });
                Ok((
                    json!(results
                        .iter()
                        .map(|r| json!({"lambda": r.lambda, "raw_sum": r.raw_sum, "b": r.b_diagnostic, "b_s": r.b_s, "predicted_rate": r.predicted_rate}))
                        .collect::<Vec<_>>()),
                    vec![check("raw-sum-monotone", monotone, "raw sums non-increasing in λ within 3σ".into())],
                ))
            }))
        }
        ExperimentKind::Wegner => {
            let lambda = cfg.need_lambda()?;
            let s = cfg.need_s()?;
            let widths = e.widths.clone().unwrap_or_default();
            let center = e.center_energy.unwrap_or(0.0);
            let main = wegner_experiment(&cfg.domain(), &u, &rho, lambda, center, &widths, cfg.run.samples, seed, workers)?;
            let other = match e.compare_half_width {
                Some(hw) => Some(wegner_experiment(
                    &cube(hw, &Site::origin(cfg.model.dim)),
                    &u,
                    &rho,
                    lambda,
                    center,
                    &widths,
                    cfg.run.samples,
                    seed.wrapping_add(1),
                    workers,
                )?),
                None => None,
            };
            Ok(staged(move |art| {
                #[derive(Serialize)]
                struct Row {
                    sites: usize,
                    width: f64,
                    mean: f64,
                    stderr: f64,
                    samples: usize,
                    lambda: f64,
                }
                let rows: Vec<Row> = std::iter::once(&main)
                    .chain(other.as_ref())
                    .flat_map(|r| {
                        r.rows.iter().map(move |w| Row {
                            sites: r.sites,
                            width: w.width,
                            mean: w.count.mean,
                            stderr: w.count.stderr,
                            samples: w.count.n,
                            lambda,
                        })
                    })
                    .collect();
                art.csv("counts.csv", &rows)?;
                art.json("wegner.json", &(&main, &other))?;
                let mut checks = vec![check(
                    "width-exponent",
                    main.satisfies(s),
                    format!("exponent {:.3} vs s - 0.15 = {:.3}", main.exponent, s - 0.15),
                )];
                let mut summary = json!({"exponent": main.exponent, "count_per_site": main.count_per_site});
                if let Some(o) = &other {
                    let lin = volume_linearity(&main, o);
                    checks.push(check("volume-linearity", lin <= 0.25, format!("per-site mismatch {:.1}%", 100.0 * lin)));
                    summary["linearity"] = json!(lin);
                }
                Ok((summary, checks))
            }))
        }
        ExperimentKind::Twobox => {
            let l = e.l.unwrap_or(0);
            let rate = e.rate.unwrap_or(0.0);
            let x = cfg.site(e.x.as_deref().unwrap_or(&[]))?;
            let diam = crate::geometry::metrics(u.support())?.diam_inf;
            let y = match &e.y {
                Some(v) => cfg.site(v)?,
                None => x.add(&Site::axis(cfg.model.dim, 0, 2 * l + diam + 1)),
            };
            let iv = e.interval.unwrap_or([-0.2, 0.2]);
            let reports = cfg
                .need_lambdas()?
                .iter()
                .enumerate()
                .map(|(k, &lambda)| {
                    let c = TwoBoxConfig {
                        l,
                        x: x.clone(),
                        y: y.clone(),
                        interval: (iv[0], iv[1]),
                        rate,
                        delta: e.delta.unwrap_or(0.01),
                        lambda,
                        samples: cfg.run.samples,
                        seed: crate::montecarlo::derive_seed(seed, k as u64),
                    };
                    two_box_experiment(&c, &u, &rho, workers)
                })
                .collect::<Result<Vec<_>>>()?;
            let min_p = e.min_probability;
            Ok(staged(move |art| {
                #[derive(Serialize)]
                struct Row {
                    l: i64,
                    lambda: f64,
                    probability: f64,
                    lower: f64,
                    upper: f64,
                    uncertified: f64,
                    samples: usize,
                }
                let rows: Vec<Row> = reports
                    .iter()
                    .map(|r| Row {
                        l: r.l,
                        lambda: r.lambda,
                        probability: r.probability,
                        lower: r.interval.0,
                        upper: r.interval.1,
                        uncertified: r.uncertified,
                        samples: r.samples,
                    })
                    .collect();
                art.csv("twobox.csv", &rows)?;
                let monotone = reports
                    .windows(2)
                    .all(|p| p[1].lambda < p[0].lambda || p[1].interval.1 >= p[0].interval.0);
                let mut checks = vec![check("monotone-in-lambda", monotone, "probabilities non-decreasing within CIs".into())];
                if let Some(p) = min_p {
                    let worst = reports.iter().map(|r| r.probability).fold(1.0, f64::min);
                    checks.push(check("min-probability", worst >= p, format!("smallest probability {worst:.3} vs {p}")));
                }
                Ok((json!(reports), checks))
            }))
        }
        ExperimentKind::Eigenloc => {
            let lambda = cfg.need_lambda()?;
            let window = e.window.map(|w| (w[0], w[1]));
            let r = eigen_localization(cfg.model.half_width, cfg.model.dim, &u, &rho, lambda, cfg.run.samples, window, seed, workers)?;
            let min_rate = e.min_rate;
            Ok(staged(move |art| {
                #[derive(Serialize)]
                struct Row {
                    sample: usize,
                    energy: f64,
                    center: String,
                    rate: f64,
                    ipr: f64,
                }
                let rows: Vec<Row> = r
                    .records
                    .iter()
                    .map(|x| Row {
                        sample: x.sample,
                        energy: x.energy,
                        center: x.center.to_string(),
                        rate: x.rate,
                        ipr: x.ipr,
                    })
                    .collect();
                art.csv("eigenvectors.csv", &rows)?;
                let mut checks = Vec::new();
                if let Some(m) = min_rate {
                    checks.push(check("median-rate", r.median_rate > m, format!("median rate {:.3} vs {m}", r.median_rate)));
                }
                Ok((
                    json!({"lambda": r.lambda, "median_rate": r.median_rate, "median_ipr": r.median_ipr, "eigenvectors": r.records.len()}),
                    checks,
                ))
            }))
        }
    }
}

/// Markdown summary of several runs; failures come first.
pub fn report(paths: &[PathBuf]) -> Result<(String, bool)> {
    if paths.is_empty() {
        return Err(Error::MissingArtifact("no manifests given".into()));
    }
    let mut runs = Vec::new();
    for p in paths {
        let m = RunManifest::load(p)?;
        let dir = p.parent().unwrap_or(Path::new("."));
        for a in &m.artifacts {
            if !dir.join(a).exists() {
                return Err(Error::MissingArtifact(format!("{} (listed in {})", dir.join(a).display(), p.display())));
            }
        }
        runs.push((p.clone(), m));
    }
    runs.sort_by_key(|(_, m)| m.pass);
    let all = runs.iter().all(|(_, m)| m.pass);
    let mut out = String::new();
    let failed = runs.iter().filter(|(_, m)| !m.pass).count();
    let _ = writeln!(out, "# Run report\n\n{} runs, {} failed\n", runs.len(), failed);
    for (p, m) in &runs {
        let _ = writeln!(
            out,
            "## {} {} ({})\n\nconfig {} · seed {} · {:.1} s\n",
            if m.pass { "PASS" } else { "FAIL" },
            m.kind.name(),
            p.display(),
            &m.config_hash[..12],
            m.seed,
            m.wall_time_s
        );
        for c in &m.checks {
            let _ = writeln!(out, "- {} {}: {}", if c.pass { "ok" } else { "FAILED" }, c.name, c.detail);
        }
        out.push('\n');
        match m.kind {
            ExperimentKind::Decay => {
                let s = &m.summary;
                let _ = writeln!(out, "| λ | μ fit | A fit | r² |\n|---|---|---|---|");
                let _ = writeln!(
                    out,
                    "| {} | {:.4} | {:.4} | {:.4} |\n",
                    s["lambda"], num(&s["rate"]), num(&s["prefactor"]), num(&s["r2"])
                );
            }
            ExperimentKind::Apriori => {
                let _ = writeln!(out, "| slope | predicted | agrees |\n|---|---|---|");
                for p in m.summary["slopes"].as_array().into_iter().flatten() {
                    let agrees = p["tracks"].as_bool().unwrap_or(false);
                    let _ = writeln!(
                        out,
                        "| {:.4} | {:.4} | {} |",
                        num(&p["slope"]),
                        num(&p["predicted"]),
                        if agrees { "yes" } else { "DISAGREES" }
                    );
                }
                out.push('\n');
            }
            ExperimentKind::NonlocalApriori => {
                let _ = writeln!(
                    out,
                    "slope {:.4} against predicted -s = {:.4}\n",
                    num(&m.summary["slope"]),
                    -num(&m.summary["s"])
                );
            }
            _ => {
                let _ = writeln!(out, "```json\n{}\n```\n", serde_json::to_string_pretty(&m.summary)?);
            }
        }
    }
    Ok((out, all))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}
