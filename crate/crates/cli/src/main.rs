//! Command-line surface: run, sweep, verify and conjugate-table.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 diagnostics failure, 5 I/O or artifact integrity error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use slipflow::artifact::{run_to_dir, verify_dir};
use slipflow::config::parse_config;
use slipflow::constitutive::{MollifiedPotential, PotentialSpec, SymTensor};
use slipflow::limit_lab::{parse_plan, sweep_to_dir};
use slipflow::Error;

const CONFIG_ERROR: u8 = 2;
const SOLVER_FAILURE: u8 = 3;
const DIAGNOSTICS_FAILURE: u8 = 4;
const IO_ERROR: u8 = 5;

#[derive(Parser)]
#[command(name = "slipflow", version, about = "Regularized compressible channel flow with friction walls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write its artifact directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every level of a sweep plan and the limit reports.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute diagnostics from an artifact directory.
    Verify { artifact: PathBuf },
    /// Print F, F_delta and their conjugates on a tensor grid as CSV.
    ConjugateTable {
        #[arg(long, value_enum)]
        kind: Kind,
        /// `lo:hi:count`, applied to each of the entries xx, yy, xy.
        #[arg(long, default_value = "-1:1:5", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 0.2)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.5)]
        q: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Newtonian,
    Powerlaw,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter { .. } | Error::Domain(_) | Error::Resolution { .. } => CONFIG_ERROR,
        e if e.is_solver_failure() => SOLVER_FAILURE,
        _ => IO_ERROR,
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(config: &Path, out: &Path) -> Result<u8, Error> {
    let config = parse_config(&read_text(config)?)?;
    let summary = run_to_dir(&config, out)?;
    if let Some(f) = &summary.failure {
        eprintln!("solver failure: {f}");
        return Ok(SOLVER_FAILURE);
    }
    match summary.report {
        Some(r) if !r.passed => {
            eprintln!("diagnostics failed; see {}", out.join("reports.json").display());
            Ok(DIAGNOSTICS_FAILURE)
        }
        Some(r) => {
            println!(
                "completed {} steps; integrated energy residual {:.3e}",
                summary.manifest.steps, r.integrated_residual
            );
            Ok(0)
        }
        None => {
            println!("completed {} steps", summary.manifest.steps);
            Ok(0)
        }
    }
}

fn sweep(plan: &Path, out: &Path) -> Result<u8, Error> {
    let plan = parse_plan(&read_text(plan)?)?;
    let outcome = sweep_to_dir(&plan, out)?;
    for s in &outcome.convergence.series {
        println!("{}: {:?} decreasing={}", s.norm, s.distances, s.strictly_decreasing);
    }
    if !outcome.convergence.failures.is_empty() {
        for (k, m) in &outcome.convergence.failures {
            eprintln!("level {k}: {m}");
        }
        return Ok(SOLVER_FAILURE);
    }
    if outcome.reports.iter().flatten().any(|r| !r.passed) {
        return Ok(DIAGNOSTICS_FAILURE);
    }
    Ok(0)
}

fn verify(dir: &Path) -> Result<u8, Error> {
    let v = verify_dir(dir)?;
    match v.report {
        Some(r) if !r.passed => Ok(DIAGNOSTICS_FAILURE),
        _ => {
            println!("ledger reproduced; artifact schema {}", v.manifest.schema);
            Ok(0)
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(vec![format!("grid: expected `lo:hi:count`, got `{spec}`")]);
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !(lo <= hi) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

fn conjugate_table(kind: Kind, grid: &str, mu: f64, lambda: f64, q: f64, delta: f64) -> Result<u8, Error> {
    let axis = parse_grid(grid)?;
    let spec = match kind {
        Kind::Newtonian => PotentialSpec::newtonian(mu, lambda, 2)?,
        Kind::Powerlaw => PotentialSpec::power_law(mu, q, lambda, 2)?,
    };
    let mollified = MollifiedPotential::new(spec.clone(), delta)?;
    println!("xx,yy,xy,f,f_delta,f_conj,f_delta_conj");
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                let x = SymTensor::new2(a, b, c);
                println!(
                    "{a:?},{b:?},{c:?},{:?},{:?},{:?},{:?}",
                    spec.value(&x),
                    mollified.value(&x),
                    spec.conjugate(&x)?,
                    mollified.conjugate(&x)?
                );
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Sweep { plan, out } => sweep(plan, out),
        Command::Verify { artifact } => verify(artifact),
        Command::ConjugateTable {
            kind,
            grid,
            mu,
            lambda,
            q,
            delta,
        } => conjugate_table(*kind, grid, *mu, *lambda, *q, *delta),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
