//! Command-line front end. Every experiment writes CSV tables headed by
//! `# seed=<seed> tool-version=<semver>` and, where useful, a JSON report.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::{landscape_report, neg_fraction, risk_hessian};
use crate::infogeo::{decompose_likelihood, fp_bp_semantics_check, ContractionModel, LayeredModel, LayeredModelFile};
use crate::net::{Dataset, LossL0, NetworkParams};
use crate::numeric::{linspace, symmetric_eigenvalues};
use crate::poset::SystemFile;
use crate::report::{read_text, write_text, CsvTable};
use crate::rmt::ensembles::Ensemble;
use crate::rmt::{esd_from_eigenvalues, solve_mde, stieltjes_invert, MDEProblem, SelfEnergy};
use crate::rng::trial_rng;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "SPECTRAL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "spectral",
    version,
    about = "Spectral diagnostics for layered-network loss landscapes"
)]
pub struct RunConfig {
    /// Seed of the per-trial random streams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Primary output file (CSV); printed to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (falls back to SPECTRAL_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic-equivalent density from the matrix Dyson equation.
    Mde {
        #[command(subcommand)]
        action: MdeAction,
    },
    /// Empirical spectral densities of seeded ensembles.
    Esd {
        #[command(subcommand)]
        action: EsdAction,
    },
    /// Exact risk Hessian, written as `row,col,value` triples.
    Hessian(NetArgs),
    /// Landscape report: risk, operator norm, bound and negative fraction.
    Landscape {
        #[command(flatten)]
        net: NetArgs,
        /// Eigenvalue CSV (`index,lambda`); defaults next to `--out`.
        #[arg(long)]
        eigs: Option<PathBuf>,
    },
    /// Divergence along a chain of stochastic maps or network layers.
    Contract {
        #[arg(long)]
        model: PathBuf,
        /// JSON report path; printed to stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Log-likelihood = expected log-likelihood + per-scale divergences.
    Decompose {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Random assignments tested against the posterior (0 skips the check).
        #[arg(long, default_value_t = 0)]
        competitors: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum MdeAction {
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        emin: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        emax: f64,
        #[arg(long, default_value_t = 601)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Residual tolerance of the fixed-point iteration.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum EsdAction {
    Sample {
        /// `wigner` or `centered-hessian`.
        #[arg(long)]
        ensemble: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        bins: usize,
    },
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Chain-shaped network JSON.
    #[arg(long)]
    pub net: PathBuf,
    /// Dataset CSV with header `x1,...,xn,y`.
    #[arg(long)]
    pub data: PathBuf,
    /// `hinge` or `absolute`.
    #[arg(long, default_value = "hinge")]
    pub loss: String,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 success, 2 invalid input, 3 numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spectral: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence { .. } | Error::Stability(_) | Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn thread_count(config: &RunConfig) -> Result<Option<usize>> {
    let n = match config.threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Error::Domain("thread count must be positive".into()));
    }
    Ok(n)
}

pub fn execute(config: &RunConfig) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(config)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("worker pool: {e}")))?;
    pool.install(|| dispatch(config))
}

fn dispatch(config: &RunConfig) -> Result<()> {
    let seed = config.seed;
    match &config.command {
        Command::Mde {
            action:
                MdeAction::Solve {
                    problem,
                    emin,
                    emax,
                    points,
                    eta,
                    tol,
                },
        } => {
            if !(emin < emax) || *points < 2 {
                return Err(Error::Domain(format!(
                    "energy grid needs emin < emax and at least 2 points (got {emin}, {emax}, {points})"
                )));
            }
            if !(*eta > 0.0) || !(*tol > 0.0) {
                return Err(Error::Domain("eta and tol must be positive".into()));
            }
            let mut p = load_problem(problem)?;
            p.options.tol = *tol;
            let grid = linspace(*emin, *emax, *points);
            let p = p.with_energies(&grid, *eta);
            let sol = solve_mde(&p)?;
            let density = stieltjes_invert(&sol, &grid, *eta)?;
            let mut t = CsvTable::new(seed, &["E", "rho"]);
            for (e, r) in density.grid.iter().zip(&density.density) {
                t.row(&[*e, *r]);
            }
            emit(config, &t)
        }
        Command::Esd {
            action:
                EsdAction::Sample {
                    ensemble,
                    n,
                    trials,
                    bins,
                },
        } => {
            let kind = Ensemble::parse(ensemble).ok_or_else(|| {
                Error::Domain(format!(
                    "unknown ensemble {ensemble:?}; expected wigner or centered-hessian"
                ))
            })?;
            if *n == 0 || *trials == 0 || *bins == 0 {
                return Err(Error::Domain("n, trials and bins must be positive".into()));
            }
            let spectra = (0..*trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed, t);
                    symmetric_eigenvalues(&kind.sample(*n, &mut rng)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let pooled: Vec<f64> = spectra.iter().flatten().copied().collect();
            let esd = esd_from_eigenvalues(&pooled, *bins, None)?;
            let mut t = CsvTable::new(seed, &["E", "density"]);
            for (e, r) in esd.grid.iter().zip(&esd.density) {
                t.row(&[*e, *r]);
            }
            let summary = EsdSummary {
                ensemble: ensemble.clone(),
                n: *n,
                trials: *trials,
                dimension: spectra[0].len(),
                neg_fraction: spectra.iter().map(|s| neg_fraction(s)).collect(),
            };
            println!("{}", to_json(&summary));
            emit(config, &t)
        }
        Command::Hessian(args) => {
            let (params, loss, data) = load_net(args)?;
            let h = risk_hessian(&params, loss, &data)?.assemble();
            let mut t = CsvTable::new(seed, &["row", "col", "value"]);
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    t.row(&[i as f64, j as f64, h[(i, j)]]);
                }
            }
            emit(config, &t)
        }
        Command::Landscape { net, eigs } => {
            let (params, loss, data) = load_net(net)?;
            let r = landscape_report(&params, loss, &data)?;
            let eigs_path = eigs.clone().or_else(|| {
                config
                    .out
                    .as_ref()
                    .map(|o| o.with_file_name(format!("{}_eigs.csv", stem(o))))
            });
            let mut t = CsvTable::new(seed, &["index", "lambda"]);
            for (i, l) in r.eigs.iter().enumerate() {
                t.indexed_row(i, &[*l]);
            }
            if let Some(p) = &eigs_path {
                t.write(p)?;
            }
            let report = LandscapeJson {
                risk: r.risk,
                op_norm: r.op_norm,
                bound: r.bound,
                bound_holds: r.bound_holds(),
                neg_fraction: r.neg_fraction,
                lambda0: r.lambda0,
                mean_lprime: r.mean_lprime,
                kink_samples: r.kink_samples.clone(),
                eigs_csv_path: eigs_path.map(|p| p.display().to_string()),
            };
            emit_json(config.out.as_deref(), &to_json(&report))
        }
        Command::Contract { model, report } => {
            let m = ContractionModel::from_json(&read_text(model)?)?;
            let (d, holds) = m.run()?;
            let mut t = CsvTable::new(seed, &["stage", "divergence"]);
            for (i, v) in d.iter().enumerate() {
                t.indexed_row(i, &[*v]);
            }
            let json = to_json(&ContractJson {
                divergences: d,
                non_increasing: holds,
            });
            emit_json(report.as_deref(), &json)?;
            emit(config, &t)
        }
        Command::Decompose {
            model,
            report,
            competitors,
        } => {
            let file = LayeredModelFile::from_json(&read_text(model)?)?;
            let (m, data, nu) = LayeredModel::from_file(&file)?;
            let nu = nu.unwrap_or_else(|| m.posterior());
            let r = decompose_likelihood(&m, &data, &nu)?;
            let mut t = CsvTable::new(seed, &["stage", "divergence"]);
            for (i, v) in r.kl_terms.iter().enumerate() {
                t.indexed_row(i + 1, &[*v]);
            }
            let fp_bp = if *competitors > 0 {
                Some(fp_bp_semantics_check(&m, &data, *competitors, &mut trial_rng(seed, 0))?)
            } else {
                None
            };
            let json = to_json(&DecomposeJson {
                decomposition: r,
                fp_bp,
            });
            emit_json(report.as_deref(), &json)?;
            emit(config, &t)
        }
    }
}

#[derive(Serialize)]
struct EsdSummary {
    ensemble: String,
    n: usize,
    trials: usize,
    dimension: usize,
    neg_fraction: Vec<f64>,
}

#[derive(Serialize)]
struct LandscapeJson {
    risk: f64,
    op_norm: f64,
    bound: f64,
    bound_holds: bool,
    neg_fraction: f64,
    lambda0: f64,
    mean_lprime: f64,
    kink_samples: Vec<usize>,
    eigs_csv_path: Option<String>,
}

#[derive(Serialize)]
struct ContractJson {
    divergences: Vec<f64>,
    non_increasing: bool,
}

#[derive(Serialize)]
struct DecomposeJson {
    decomposition: crate::infogeo::DecompositionReport,
    fp_bp: Option<crate::infogeo::FpBpReport>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
}

fn emit(config: &RunConfig, table: &CsvTable) -> Result<()> {
    match &config.out {
        Some(p) => table.write(p),
        None => {
            print!("{}", table.as_str());
            Ok(())
        }
    }
}

fn emit_json(path: Option<&Path>, json: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, &format!("{json}\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn load_net(args: &NetArgs) -> Result<(NetworkParams, LossL0, Dataset)> {
    let loss = LossL0::parse(&args.loss)
        .ok_or_else(|| Error::Domain(format!("unknown loss {:?}; expected hinge or absolute", args.loss)))?;
    let params = NetworkParams::from_system_file(&SystemFile::load(&args.net)?)?;
    let data = Dataset::load_csv(&args.data)?;
    Ok((params, loss, data))
}

/// Row-major matrix given either as nested rows or as a flat square array.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixJson {
    fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixJson::Rows(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Shape(format!("{what} is not square")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
            MatrixJson::Flat(v) => {
                let n = (v.len() as f64).sqrt().round() as usize;
                if n * n != v.len() {
                    return Err(Error::Shape(format!(
                        "{what} has {} entries, not a square count",
                        v.len()
                    )));
                }
                Ok(DMatrix::from_row_slice(n, n, v))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SelfEnergyJson {
    Isotropic {
        c: f64,
    },
    /// Path (relative to the problem file) of a JSON array of sample matrices.
    Empirical {
        samples: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
struct ProblemJson {
    #[serde(rename = "A")]
    a: MatrixJson,
    #[serde(rename = "S")]
    s: SelfEnergyJson,
}

/// Reads an MDE problem description.
pub fn load_problem(path: &Path) -> Result<MDEProblem> {
    let p: ProblemJson =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let a = p.a.to_matrix("A")?;
    let s = match p.s {
        SelfEnergyJson::Isotropic { c } => SelfEnergy::Isotropic { c },
        SelfEnergyJson::Empirical { samples } => {
            let sp = path.parent().unwrap_or(Path::new("")).join(samples);
            let raw: Vec<MatrixJson> =
                serde_json::from_str(&read_text(&sp)?).map_err(|e| Error::Parse(format!("{}: {e}", sp.display())))?;
            let mats = raw
                .iter()
                .enumerate()
                .map(|(i, m)| m.to_matrix(&format!("sample {i}")))
                .collect::<Result<Vec<_>>>()?;
            SelfEnergy::empirical(&mats)?
        }
    };
    MDEProblem::new(a, s)
}
