//! Run diagnostics: energy ledger, density bounds, momentum inequality,
//! Korn ratio, Fenchel audit and renormalised entropy balance.

pub mod inequality;
pub mod korn;
pub mod ledger;

use serde::{Deserialize, Serialize};

pub use inequality::{default_battery, envelope, momentum_inequality_check, InequalityReport, TestFunction};
pub use korn::{dissipation_audit, korn_ratio, korn_row, FenchelAudit, KornReport, KornRow};
pub use ledger::{
    energy_ledger, integrated_residual, ledger_csv, min_dissipation_entry, step_residuals, EnergyLedgerRow,
    LEDGER_COLUMNS,
};

use crate::density::{
    cfl_report, density_bounds_check, entropy_balance, entropy_inequality_excess, BoundReport, CflReport,
    Renormalization,
};
use crate::error::Result;
use crate::geometry::VelocitySamples;
use crate::simulation::{Problem, Trajectory};

/// A trajectory paired with the problem that produced it.
pub struct RunView<'a> {
    pub problem: &'a Problem,
    pub trajectory: &'a Trajectory,
    /// Grid velocity at every level.
    pub velocity: Vec<VelocitySamples>,
}

impl<'a> RunView<'a> {
    pub fn new(problem: &'a Problem, trajectory: &'a Trajectory) -> Result<Self> {
        let velocity = trajectory.velocity_samples(&problem.space)?;
        Ok(Self {
            problem,
            trajectory,
            velocity,
        })
    }

    /// Velocities driving each step, `u[k]` moves level `k` to `k + 1`.
    pub fn step_velocities(&self) -> &[VelocitySamples] {
        &self.velocity[1..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticOptions {
    pub bounds_tol: f64,
    pub momentum_tol: f64,
    pub fenchel_tol: f64,
    pub audit_stride: usize,
    pub battery_random: usize,
    pub seed: u64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            bounds_tol: 1e-8,
            momentum_tol: 1e-8,
            fenchel_tol: 1e-6,
            audit_stride: 1,
            battery_random: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub renormalization: Renormalization,
    pub max_abs_residual: f64,
    /// Largest `int zeta(rho(t)) + int_0^t int (zeta' rho - zeta) div u - int zeta(rho_0)`.
    pub max_excess: f64,
    pub max_dissipation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub integrated_residual: f64,
    pub final_residual: f64,
    pub min_dissipation: f64,
    pub ledger_has_nan: bool,
    pub mass_drift: f64,
    pub bounds: BoundReport,
    pub momentum: Vec<InequalityReport>,
    pub momentum_passed: bool,
    pub korn: KornReport,
    pub fenchel: FenchelAudit,
    pub entropy: Vec<EntropySummary>,
    pub cfl: Vec<CflReport>,
    pub mean_contraction: Option<f64>,
    pub mean_iterations: f64,
    pub passed: bool,
}

/// Renormalised balance summary for one `zeta`.
pub fn entropy_summary(view: &RunView<'_>, zeta: Renormalization) -> Result<EntropySummary> {
    let p = view.problem;
    let rows = entropy_balance(
        &p.space.domain,
        &view.trajectory.rho,
        view.step_velocities(),
        &p.continuity_params(),
        zeta,
    )?;
    let initial = p.space.domain.cell_area() * view.trajectory.rho[0].values.iter().map(|&r| zeta.value(r)).sum::<f64>();
    let excess = entropy_inequality_excess(initial, &rows, view.trajectory.dt);
    Ok(EntropySummary {
        renormalization: zeta,
        max_abs_residual: rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_dissipation: rows.iter().map(|r| r.dissipation).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Runs every diagnostic and returns the rows of the energy ledger with the
/// summary report.
pub fn run_diagnostics(view: &RunView<'_>, opts: &DiagnosticOptions) -> Result<(Vec<EnergyLedgerRow>, DiagnosticsReport)> {
    let p = view.problem;
    let traj = view.trajectory;
    let domain = &p.space.domain;
    let rows = energy_ledger(view)?;

    let m0 = traj.rho[0].mass(domain);
    let mass_drift = traj
        .rho
        .iter()
        .map(|r| ((r.mass(domain) - m0) / m0).abs())
        .fold(0.0, f64::max);

    let bounds = density_bounds_check(&traj.rho, view.step_velocities(), &p.continuity_params(), opts.bounds_tol);
    let battery = default_battery(view, opts.battery_random, opts.seed);
    let momentum = momentum_inequality_check(view, &battery, opts.momentum_tol)?;
    let momentum_passed = momentum.iter().all(|r| r.passed);

    let rho_values: Vec<Vec<f64>> = traj.rho.iter().map(|r| r.values.clone()).collect();
    let korn = korn_ratio(domain, &view.velocity, &rho_values, p.model.potential.base.coercivity().1);
    let fenchel = dissipation_audit(domain, &p.model.potential, &view.velocity, opts.audit_stride, opts.fenchel_tol)?;
    let entropy = [Renormalization::EntropyLog, Renormalization::Square]
        .into_iter()
        .map(|z| entropy_summary(view, z))
        .collect::<Result<Vec<_>>>()?;
    let cfl = view
        .step_velocities()
        .iter()
        .map(|u| cfl_report(domain, u, p.model.epsilon))
        .collect();

    let min_dissipation = min_dissipation_entry(&rows);
    let ledger_has_nan = rows.iter().any(|r| r.has_nan());
    let passed = !ledger_has_nan
        && min_dissipation >= -1e-12
        && bounds.passed
        && momentum_passed
        && korn.bounded
        && fenchel.passed
        && mass_drift <= 1e-12;
    let report = DiagnosticsReport {
        integrated_residual: integrated_residual(&rows),
        final_residual: rows.last().map(|r| r.residual).unwrap_or(0.0),
        min_dissipation,
        ledger_has_nan,
        mass_drift,
        bounds,
        momentum,
        momentum_passed,
        korn,
        fenchel,
        entropy,
        cfl,
        mean_contraction: traj.mean_contraction(),
        mean_iterations: traj.mean_iterations(),
        passed,
    };
    Ok((rows, report))
}
