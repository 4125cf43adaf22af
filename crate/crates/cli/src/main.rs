//! `alloyfmm` command-line runner.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | every asserted property passed |
//! | 1 | a property failed |
//! | 2 | malformed config or invalid input |
//! | 3 | an assumption or hypothesis of the experiment does not hold |
//! | 4 | resource limit |
//! | 5 | IO error or missing artifact |
//! | 6 | singular operator or insufficient data |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alloyfmm::fuzz::{averaging_case, identity_case, independence_case, tail_case, weight_case};
use alloyfmm::runner::{self, exit, ExperimentConfig, ExperimentKind};
use alloyfmm::{Error, Result, SiteSet, Workers};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alloyfmm", version, about = "Fractional-moment experiments for alloy-type random operators")]
struct Cli {
    /// Worker threads; overrides the config's `run.workers`.
    #[arg(long, global = true, env = runner::WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run(RunArgs),
    /// Summarise one or more run manifests as markdown.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Random-domain fuzzing of the resolvent identities.
    FuzzIdentities(FuzzArgs),
    /// Random checks of the spectral-averaging inequalities.
    VerifyAveraging(FuzzArgs),
    /// Dump the lattice box of a config as a site list.
    Geometry { config: PathBuf },
    Identities(KindArgs),
    Averaging(KindArgs),
    Apriori(KindArgs),
    Decay(KindArgs),
    Criterion(KindArgs),
    Wegner(KindArgs),
    Twobox(KindArgs),
    Eigenloc(KindArgs),
    NonlocalApriori(KindArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Override `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when an assumption of the experiment fails.
    #[arg(long)]
    exploratory: bool,
}

#[derive(Args)]
struct KindArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Identities: allowed relative deviation. Averaging: allowed relative
    /// excess over the bound.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Largest domain for identity fuzzing.
    #[arg(long, default_value_t = 300)]
    max_sites: usize,
    /// JSON-lines output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(w) = cli.workers {
        // the runner reads the override from the environment
        std::env::set_var(runner::WORKERS_ENV, w.to_string());
    }
    let workers = || match cli.workers {
        Some(n) => Workers::new(n),
        None => Ok(Workers::serial()),
    };
    match cli.command {
        Command::Run(a) => run(&a, None),
        Command::Report { manifests, output } => {
            let (text, pass) = runner::report(&manifests)?;
            match output {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(if pass { exit::OK } else { exit::PROPERTY_FAILED })
        }
        Command::FuzzIdentities(a) => fuzz_identities(&a, &workers()?),
        Command::VerifyAveraging(a) => verify_averaging(&a, &workers()?),
        Command::Geometry { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let set: SiteSet = cfg.domain();
            print!("{}", set.to_text());
            Ok(exit::OK)
        }
        Command::Identities(a) => run(&a.run, Some(ExperimentKind::Identities)),
        Command::Averaging(a) => run(&a.run, Some(ExperimentKind::Averaging)),
        Command::Apriori(a) => run(&a.run, Some(ExperimentKind::Apriori)),
        Command::Decay(a) => run(&a.run, Some(ExperimentKind::Decay)),
        Command::Criterion(a) => run(&a.run, Some(ExperimentKind::Criterion)),
        Command::Wegner(a) => run(&a.run, Some(ExperimentKind::Wegner)),
        Command::Twobox(a) => run(&a.run, Some(ExperimentKind::Twobox)),
        Command::Eigenloc(a) => run(&a.run, Some(ExperimentKind::Eigenloc)),
        Command::NonlocalApriori(a) => run(&a.run, Some(ExperimentKind::NonlocalApriori)),
    }
}

fn run(a: &RunArgs, expect: Option<ExperimentKind>) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(k) = expect {
        if cfg.kind != k {
            return Err(Error::Config(format!(
                "config kind is {}, but the {} subcommand was used",
                cfg.kind.name(),
                k.name()
            )));
        }
    }
    if let Some(out) = &a.out {
        cfg.output.dir = out.clone();
    }
    cfg.run.exploratory |= a.exploratory;
    let outcome = runner::run(cfg)?;
    let m = &outcome.manifest;
    for c in &m.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{}", outcome.dir.join("manifest.json").display());
    Ok(if m.pass { exit::OK } else { exit::PROPERTY_FAILED })
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(Path::new(p))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn fuzz_identities(a: &FuzzArgs, workers: &Workers) -> Result<i32> {
    let tol = a.tolerance.unwrap_or(1e-8);
    let cases = workers.try_map(a.cases, |i| identity_case(a.seed, i as u64, a.max_sites, tol))?;
    let indep = workers.try_map(a.cases, |i| independence_case(a.seed, i as u64))?;
    let mut w = sink(&a.out)?;
    let mut failures = 0;
    for c in &cases {
        for r in &c.reports {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        failures += usize::from(!c.pass());
    }
    for c in &indep {
        writeln!(w, "{}", serde_json::to_string(c)?)?;
        failures += usize::from(!c.pass(tol.max(1e-12)));
    }
    w.flush()?;
    eprintln!("{failures} failing cases out of {}", 2 * a.cases);
    Ok(if failures == 0 { exit::OK } else { exit::PROPERTY_FAILED })
}

fn verify_averaging(a: &FuzzArgs, workers: &Workers) -> Result<i32> {
    let slack = 1.0 + a.tolerance.unwrap_or(0.0);
    let avg = workers.try_map(a.cases, |i| averaging_case(a.seed, i as u64))?;
    let tails = workers.try_map(a.cases, |i| tail_case(a.seed, i as u64))?;
    let weights = workers.try_map(a.cases, |i| weight_case(a.seed, i as u64))?;
    let mut w = sink(&a.out)?;
    let mut failures = 0;
    for c in &avg {
        writeln!(w, "{}", serde_json::to_string(c)?)?;
        let det = c.det_pass || c.det_integral <= c.det_bound * slack;
        let norm = c.norm_pass || c.norm_average <= c.norm_bound * slack;
        failures += usize::from(!(det && norm));
    }
    for c in &tails {
        writeln!(w, "{}", serde_json::to_string(c)?)?;
        failures += usize::from(!(c.slope_pass && c.moments_pass));
    }
    for c in &weights {
        writeln!(w, "{}", serde_json::to_string(c)?)?;
        failures += usize::from(!(c.bound_holds && c.endpoints_hold && c.lipschitz_holds));
    }
    w.flush()?;
    eprintln!("{failures} failing cases out of {}", 3 * a.cases);
    Ok(if failures == 0 { exit::OK } else { exit::PROPERTY_FAILED })
}
