//! Command-line front end.
//!
//! Exit codes: 0 on success or a passed check, 1 when a verification check
//! fails, 2 for configuration errors and any other failure.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotics::{
    coeff_fgm_infinite, coeff_fgm_sweep, coeff_infinite, coeff_sweep, CoefficientSet, DEFAULT_TRUNCATION_TOL,
};
use crate::distributions::{FgmPairSpec, TailDistribution};
use crate::error::{Error, Result};
use crate::estimate::{coefficients_for, estimate_tails, join_ratios, RatioDiagnostic, Source};
use crate::mc::MonteCarlo;
use crate::model::{Dependence, Horizon, ModelSpec, Target};
use crate::tailcalc::{
    verify_c2, verify_kesten, verify_l2, verify_pakes, verify_potter, verify_remainder, LogTransformTail, ReportRow,
    VerificationReport,
};

pub use config::{load_config, parse_config, ExperimentConfig, LoadedConfig};
use config::GridSpec;
use output::{coeff_csv, ratio_csv, ratio_svg, report_csv, report_summary, Provenance, Series};

#[derive(Debug, Parser)]
#[command(name = "ruinsim", version, about = "Tail asymptotics of discounted aggregate losses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate tails of S_n and M_n and compare them with the asymptotics.
    Simulate(Common),
    /// Asymptotic coefficients A, B, C.
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Tabulate horizons 1..=N.
        #[arg(short = 'n', conflicts_with = "infinite")]
        n: Option<usize>,
        /// Infinite-horizon coefficients.
        #[arg(long)]
        infinite: bool,
    },
    /// Run one numeric check.
    Verify {
        lemma: Lemma,
        #[command(flatten)]
        common: Common,
    },
    /// Like `simulate` with FGM coupling between X and Y.
    Fgm {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination, overriding output.csv_path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Lemma {
    C2,
    L2,
    Pakes,
    Kesten,
    Remainder,
    Potter,
    Ratio,
}

impl Lemma {
    fn id(self) -> &'static str {
        match self {
            Lemma::C2 => "c2",
            Lemma::L2 => "l2",
            Lemma::Pakes => "pakes",
            Lemma::Kesten => "kesten",
            Lemma::Remainder => "remainder",
            Lemma::Potter => "potter",
            Lemma::Ratio => "ratio",
        }
    }
}

/// Parse the process arguments and run.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(cli.command))
}

/// Run one command and return its exit code, reporting errors on stderr.
pub fn run(command: Command) -> u8 {
    match dispatch(command) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::Verified(true)) => 0,
        Ok(Outcome::Verified(false)) => 1,
        Err(e) => {
            eprintln!("ruinsim: {e}");
            2
        }
    }
}

enum Outcome {
    Done,
    Verified(bool),
}

/// A loaded config with command-line overrides applied.
struct Session {
    config: ExperimentConfig,
    sha256: String,
    csv_path: PathBuf,
    tolerance: Option<f64>,
}

impl Session {
    fn open(common: &Common) -> Result<Self> {
        let LoadedConfig { mut config, sha256 } = load_config(&common.config)?;
        if let Some(seed) = common.seed {
            config.run.seed = seed;
        }
        if let Some(samples) = common.samples {
            config.run.samples = samples;
        }
        if let Some(workers) = common.workers {
            config.run.workers = workers;
        }
        config.validate()?;
        let csv_path = common.out.clone().unwrap_or_else(|| config.output.csv_path.clone());
        let tolerance = common.tolerance.or(config.verify.tolerance);
        Ok(Self {
            config,
            sha256,
            csv_path,
            tolerance,
        })
    }

    fn mc(&self) -> MonteCarlo {
        MonteCarlo::new(self.config.run.samples, self.config.run.seed).with_workers(self.config.run.workers)
    }

    fn moment_mc(&self) -> MonteCarlo {
        MonteCarlo::new(self.config.run.moment_samples, self.config.run.seed).with_workers(self.config.run.workers)
    }

    fn provenance<'a>(&'a self, command: &'a str) -> Provenance<'a> {
        Provenance {
            config_sha256: &self.sha256,
            seed: self.config.run.seed,
            samples: self.config.run.samples,
            command,
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(common) => {
            let session = Session::open(&common)?;
            let spec = session.config.model_spec()?;
            simulate(&session, &spec, "simulate")
        }
        Command::Fgm { common, theta } => {
            let session = Session::open(&common)?;
            let spec = session.config.model_spec()?.with_dependence(Dependence::Fgm { theta })?;
            simulate(&session, &spec, "fgm")
        }
        Command::Coeffs { common, n, infinite } => {
            let session = Session::open(&common)?;
            let spec = session.config.model_spec()?;
            coeffs(&session, &spec, n, infinite)
        }
        Command::Verify { lemma, common } => {
            let session = Session::open(&common)?;
            let spec = session.config.model_spec()?;
            let report = verify(&session, &spec, lemma)?;
            write_file(&session.csv_path, &report_csv(&session.provenance(lemma.id()), &report))?;
            println!("{}", report_summary(&report));
            Ok(Outcome::Verified(report.passed()))
        }
    }
}

fn ratio_rows(session: &Session, spec: &ModelSpec) -> Result<(CoefficientSet, Vec<RatioDiagnostic>)> {
    let grid = session.config.grid()?;
    let coeffs = coefficients_for(spec, &session.moment_mc())?;
    let sweep = estimate_tails(spec, &grid, &session.mc(), Source::Forward)?;
    let mut rows = join_ratios(&sweep.sum, &coeffs, spec.f(), spec.g());
    rows.extend(join_ratios(&sweep.max, &coeffs, spec.f(), spec.g()));
    Ok((coeffs, rows))
}

fn simulate(session: &Session, spec: &ModelSpec, command: &str) -> Result<Outcome> {
    let (_, rows) = ratio_rows(session, spec)?;
    write_file(&session.csv_path, &ratio_csv(&session.provenance(command), &rows))?;
    if let Some(svg) = &session.config.output.svg_path {
        let series: Vec<Series> = [Target::Sum, Target::Max]
            .iter()
            .map(|t| Series {
                name: format!("{} n={}", t.label(), spec.horizon().label()),
                points: rows
                    .iter()
                    .filter(|r| r.estimate.target == *t)
                    .map(|r| (r.x, r.ratio))
                    .collect(),
            })
            .collect();
        write_file(svg, &ratio_svg(&series))?;
    }
    println!("wrote {} rows to {}", rows.len(), session.csv_path.display());
    Ok(Outcome::Done)
}

fn coeffs(session: &Session, spec: &ModelSpec, n: Option<usize>, infinite: bool) -> Result<Outcome> {
    let mc = session.moment_mc();
    let pair = match spec.dependence() {
        Dependence::Independent => None,
        Dependence::Fgm { theta } => Some(FgmPairSpec::new(theta, spec.f().clone(), spec.g().clone())?),
    };
    let tol = match spec.horizon() {
        Horizon::Infinite { truncation_tol } => truncation_tol,
        Horizon::Finite(_) => DEFAULT_TRUNCATION_TOL,
    };
    let infinite = infinite || (n.is_none() && matches!(spec.horizon(), Horizon::Infinite { .. }));
    let rows = if infinite {
        vec![match &pair {
            None => coeff_infinite(spec, &mc)?,
            Some(p) => coeff_fgm_infinite(p, spec.alpha(), tol, &mc)?,
        }]
    } else {
        let n_max = match (n, spec.horizon()) {
            (Some(n), _) | (None, Horizon::Finite(n)) => n,
            (None, Horizon::Infinite { .. }) => unreachable!("handled above"),
        };
        if n_max == 0 {
            return Err(Error::Config("-n must be at least 1".to_string()));
        }
        match &pair {
            None => coeff_sweep(spec, n_max, &mc)?,
            Some(p) => coeff_fgm_sweep(p, spec.alpha(), n_max, &mc)?,
        }
    };
    let prov = Provenance {
        samples: session.config.run.moment_samples,
        ..session.provenance("coeffs")
    };
    write_file(&session.csv_path, &coeff_csv(&prov, &rows))?;
    println!("wrote {} rows to {}", rows.len(), session.csv_path.display());
    Ok(Outcome::Done)
}

fn verify(session: &Session, spec: &ModelSpec, lemma: Lemma) -> Result<VerificationReport> {
    let v = &session.config.verify;
    let laws = |default: Vec<TailDistribution>| v.laws.clone().unwrap_or(default);
    let tol = |default: f64| session.tolerance.unwrap_or(default);
    match lemma {
        Lemma::C2 => {
            let ds = laws(vec![spec.f().clone(), spec.g().clone()]);
            verify_c2(&ds, spec.alpha(), &session.config.grid()?, &session.mc(), tol(0.10))
        }
        Lemma::L2 => {
            let vs = laws(vec![spec.g().clone(), spec.g().clone()])
                .into_iter()
                .map(LogTransformTail::new)
                .collect::<Result<Vec<_>>>()?;
            // The grid is given on the original scale.
            let s_grid: Vec<f64> = session.config.grid()?.iter().filter(|x| **x > 0.0).map(|x| x.ln()).collect();
            verify_l2(&vs, spec.alpha(), &s_grid, tol(0.10))
        }
        Lemma::Pakes => {
            let source = laws(vec![spec.g().clone()]).swap_remove(0);
            verify_pakes(&source, spec.alpha(), v.level, tol(0.10))
        }
        Lemma::Kesten => {
            let grid = match &session.config.run.x_grid {
                GridSpec::Explicit(xs) => xs.clone(),
                GridSpec::Window(w) => log_grid(1.0, spec.g().tail_quantile(1e-4)?, w.points),
            };
            verify_kesten(spec.g(), spec.alpha(), v.eps, v.n_max, &grid, &session.mc())
        }
        Lemma::Remainder => verify_remainder(spec, &v.n_list, &session.config.grid()?, &session.mc(), tol(0.05)),
        Lemma::Potter => {
            let d = laws(vec![spec.g().clone()]).swap_remove(0);
            // Tails are evaluated exactly, so a window config gets a wide grid.
            let grid = match &session.config.run.x_grid {
                GridSpec::Explicit(xs) => xs.clone(),
                GridSpec::Window(_) => log_grid(d.tail_quantile(1e-1)?, d.tail_quantile(1e-12)?, 40),
            };
            verify_potter(&d, spec.alpha(), v.potter_b, v.potter_eps, &grid, &[0.5, 2.0, 10.0])
        }
        Lemma::Ratio => {
            let (_, rows) = ratio_rows(session, spec)?;
            Ok(ratio_report(&rows, v.score_last, tol(0.10)))
        }
    }
}

fn log_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..points)
        .map(|i| (la + (lb - la) * i as f64 / (points - 1).max(1) as f64).exp())
        .collect()
}

/// `|ratio - 1|` per row, scoring the `score_last` largest grid points of
/// each target.
pub fn ratio_report(rows: &[RatioDiagnostic], score_last: usize, tolerance: f64) -> VerificationReport {
    let mut out = Vec::with_capacity(rows.len());
    for target in [Target::Sum, Target::Max] {
        let these: Vec<&RatioDiagnostic> = rows.iter().filter(|r| r.estimate.target == target).collect();
        let first_scored = these.len().saturating_sub(score_last);
        for (i, r) in these.iter().enumerate() {
            out.push(ReportRow {
                label: format!("{} n={}", target.label(), r.estimate.horizon.label()),
                x: r.x,
                observed: r.estimate.p_hat,
                predicted: r.asymptotic,
                rel_err: (r.ratio - 1.0).abs(),
                scored: i >= first_scored,
            });
        }
    }
    VerificationReport::new("ratio", out, tolerance)
}
