//! Command-line front end of the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use walksat_lab::commands::{
    self, render_json, render_sweep_csv, render_sweep_json,
};
use walksat_lab::config::{clause_count, Density, HarnessError, ParamOverrides};
use walksat_lab::HarnessError as Error;
use walksat_lab_core::dimacs::parse_dimacs;
use walksat_lab_core::formula::{generate_uniform, Formula};
use walksat_lab_core::revelation::ScriptChoice;
use walksat_lab_core::rng::derive_seed;
use walksat_lab_core::trace::Trace;

#[derive(Parser)]
#[command(
    name = "walksat-lab",
    about = "Walksat on random k-CNF: solver, instrumentation, and experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy, Default)]
struct ParamFlags {
    /// Override the flipped-slot reveal threshold k1.
    #[arg(long)]
    k1: Option<usize>,
    /// Override the active-clause threshold k2.
    #[arg(long)]
    k2: Option<usize>,
    /// Override the passive-clause threshold k3.
    #[arg(long)]
    k3: Option<usize>,
    /// Override the cascade threshold lambda.
    #[arg(long)]
    lambda: Option<usize>,
    /// Override the dense-set budget fraction epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the step-budget fraction theta (t* = ceil(theta n)).
    #[arg(long)]
    theta: Option<f64>,
}

impl ParamFlags {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
            lambda: self.lambda,
            epsilon: self.epsilon,
            theta: self.theta,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver once on a generated or loaded instance.
    Solve {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Clause density r = m/n.
        #[arg(long, conflicts_with = "rho")]
        r: Option<f64>,
        /// Normalized density rho = r k / 2^k.
        #[arg(long)]
        rho: Option<f64>,
        /// Flip budget (default: n).
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// DIMACS file to solve instead of generating.
        #[arg(long)]
        formula: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success-rate sweep over one or more densities.
    Sweep {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        /// Densities r, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "rho")]
        r: Vec<f64>,
        /// Densities rho, comma separated.
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-step drift of S' + H' over instrumented runs.
    Drift {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "rho")]
        r: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Step cap (default: t*).
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a choice script on a fixed formula.
    Replay {
        /// DIMACS file with the instance.
        #[arg(long)]
        formula: PathBuf,
        /// JSON array of {t, i, j} choices (1-based).
        #[arg(long)]
        script: PathBuf,
        /// Expected trace to compare against.
        #[arg(long)]
        expect: Option<PathBuf>,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monitor |D| and |Z| maxima against their budget bounds.
    Bounds {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "rho")]
        r: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sample comparison of eager vs lazy generation.
    LazyEquivalence {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "rho")]
        r: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        /// Runs per mode.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bias the lazy sampler on purpose; the test must reject it.
        #[arg(long, default_value_t = false)]
        negative_control: bool,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn density(r: Option<f64>, rho: Option<f64>, k: usize) -> Result<f64, Error> {
    match (r, rho) {
        (Some(r), None) => Ok(r),
        (None, Some(rho)) => Ok(Density::Rho(rho).r(k)),
        (None, None) => Err(HarnessError::BadConfig("one of --r or --rho is required".into())),
        (Some(_), Some(_)) => Err(HarnessError::BadConfig("--r conflicts with --rho".into())),
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_formula(path: &PathBuf) -> Result<Formula, Error> {
    Ok(parse_dimacs(&std::fs::read_to_string(path)?)?)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve {
            k,
            n,
            r,
            rho,
            tmax,
            seed,
            formula,
            out,
        } => {
            let f = match formula {
                Some(path) => load_formula(&path)?,
                None => {
                    let k = k.ok_or_else(|| {
                        HarnessError::BadConfig("--k is required without --formula".into())
                    })?;
                    let n = n.ok_or_else(|| {
                        HarnessError::BadConfig("--n is required without --formula".into())
                    })?;
                    let r = density(r, rho, k)?;
                    generate_uniform(n, clause_count(r, n), k, derive_seed(seed, 0))?
                }
            };
            let report = commands::cmd_solve(&f, tmax, seed)?;
            let satisfied = report.outcome == "satisfied";
            emit(out.as_ref(), &render_json(&report))?;
            Ok(if satisfied {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Sweep {
            k,
            n,
            r,
            rho,
            trials,
            tmax,
            seed,
            format,
            params,
            out,
        } => {
            let densities: Vec<f64> = if !r.is_empty() {
                r
            } else {
                rho.iter().map(|&x| Density::Rho(x).r(k)).collect()
            };
            let p = params.overrides().apply(k, n);
            let rows = commands::cmd_sweep(k, n, &densities, trials, tmax, seed, &p)?;
            let text = match format {
                Format::Csv => render_sweep_csv(&rows),
                Format::Json => render_sweep_json(&rows),
            };
            emit(out.as_ref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Drift {
            k,
            n,
            r,
            rho,
            trials,
            tmax,
            seed,
            params,
            out,
        } => {
            let r = density(r, rho, k)?;
            let p = params.overrides().apply(k, n);
            let report = commands::cmd_drift(k, n, r, trials, tmax, seed, &p)?;
            emit(out.as_ref(), &render_json(&report))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            formula,
            script,
            expect,
            params,
            out,
        } => {
            let f = load_formula(&formula)?;
            let choices: Vec<ScriptChoice> =
                serde_json::from_str(&std::fs::read_to_string(&script)?)?;
            let expected: Option<Trace> = match expect {
                Some(path) => Some(serde_json::from_str(&std::fs::read_to_string(&path)?)?),
                None => None,
            };
            let p = params.overrides().apply(f.k(), f.n());
            let report = commands::cmd_replay(&f, &choices, &p, expected.as_ref())?;
            let diverged = report.matches == Some(false);
            emit(out.as_ref(), &render_json(&report))?;
            Ok(if diverged {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Bounds {
            k,
            n,
            r,
            rho,
            trials,
            tmax,
            seed,
            params,
            out,
        } => {
            let r = density(r, rho, k)?;
            let p = params.overrides().apply(k, n);
            let report = commands::cmd_bounds(k, n, r, trials, tmax, seed, &p)?;
            emit(out.as_ref(), &render_json(&report))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::LazyEquivalence {
            k,
            n,
            r,
            rho,
            trials,
            tmax,
            seed,
            negative_control,
            params,
            out,
        } => {
            let r = density(r, rho, k)?;
            let p = params.overrides().apply(k, n);
            let report = commands::cmd_lazy_equivalence(
                k,
                n,
                r,
                trials,
                tmax,
                seed,
                &p,
                negative_control,
            )?;
            emit(out.as_ref(), &render_json(&report))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
