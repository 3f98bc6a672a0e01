//! Discrete energy ledger.

use serde::{Deserialize, Serialize};

use super::RunView;
use crate::constitutive::SymTensor;
use crate::error::Result;
use crate::geometry::Mat2;
use crate::momentum::{assemble_mass, DataSamples};

pub const LEDGER_COLUMNS: [&str; 9] = [
    "time",
    "kinetic",
    "internal",
    "viscous",
    "delta_dissipation",
    "eps_dissipation",
    "friction",
    "external_power",
    "residual",
];

/// One row of the energy balance. Rates are evaluated at `time`; `residual`
/// is cumulative from the initial time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedgerRow {
    pub time: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub viscous: f64,
    pub delta_dissipation: f64,
    pub eps_dissipation: f64,
    pub friction: f64,
    pub external_power: f64,
    pub residual: f64,
}

impl EnergyLedgerRow {
    pub fn total_energy(&self) -> f64 {
        self.kinetic + self.internal
    }

    pub fn dissipation(&self) -> f64 {
        self.viscous + self.delta_dissipation + self.eps_dissipation + self.friction
    }

    fn values(&self) -> [f64; 9] {
        [
            self.time,
            self.kinetic,
            self.internal,
            self.viscous,
            self.delta_dissipation,
            self.eps_dissipation,
            self.friction,
            self.external_power,
            self.residual,
        ]
    }

    pub fn has_nan(&self) -> bool {
        self.values().iter().any(|v| v.is_nan())
    }
}

fn sym(m: &Mat2) -> SymTensor {
    SymTensor::new2(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))
}

/// Ledger rows at every stored level, computed with the solver's own
/// quadratures.
pub fn energy_ledger(view: &RunView<'_>) -> Result<Vec<EnergyLedgerRow>> {
    let problem = view.problem;
    let space = &problem.space;
    let domain = &space.domain;
    let model = &problem.model;
    let w = domain.cell_area();
    let traj = view.trajectory;
    let dt = traj.dt;

    let mut rows = Vec::with_capacity(traj.rho.len());
    let mut cumulative = 0.0;
    let mut prev_energy = 0.0;
    for (n, (rho, c)) in traj.rho.iter().zip(&traj.coeffs).enumerate() {
        let u = &view.velocity[n];
        let data = problem.data.sample(rho.time, space);
        let kinetic = 0.5 * assemble_mass(&rho.values, space)?.quadratic(&c.values);
        let internal = w * rho.values.iter().map(|&r| model.pressure.potential(r)).sum::<f64>();

        let mut viscous = 0.0;
        let mut grad_sq = 0.0;
        let mut power = 0.0;
        for k in 0..u.len() {
            let g = &u.gradients[k];
            let d = sym(g);
            viscous += model.potential.gradient(&d)?.ddot(&d);
            grad_sq += g.iter().flatten().map(|x| x * x).sum::<f64>();
            let f = data.force[k];
            let v = u.values[k];
            power += rho.values[k] * (f[0] * v[0] + f[1] * v[1]);
        }
        let h: Vec<f64> = rho.values.iter().map(|&r| model.pressure.potential_prime(r)).collect();
        let (hx, hy) = domain.gradient(&h);
        let (rx, ry) = domain.gradient(&rho.values);
        let eps_dot: f64 = (0..h.len()).map(|k| hx[k] * rx[k] + hy[k] * ry[k]).sum();

        let friction = friction_work(view, n, &data)?;
        let row_energy = kinetic + internal;
        let mut row = EnergyLedgerRow {
            time: rho.time,
            kinetic,
            internal,
            viscous: w * viscous,
            delta_dissipation: model.delta * w * grad_sq,
            eps_dissipation: model.epsilon * w * eps_dot,
            friction,
            external_power: w * power,
            residual: 0.0,
        };
        if n > 0 {
            cumulative += row_energy - prev_energy + dt * (row.dissipation() - row.external_power);
        }
        row.residual = cumulative;
        prev_energy = row_energy;
        rows.push(row);
    }
    Ok(rows)
}

/// `int_Gamma g grad j_delta(u) . u` at level `n`.
fn friction_work(view: &RunView<'_>, n: usize, data: &DataSamples) -> Result<f64> {
    let space = &view.problem.space;
    let tq = &space.trace_quadrature;
    let trace = space.trace_on_walls(&view.trajectory.coeffs[n].values)?;
    let stress = view.problem.model.friction_stress(&trace, &data.threshold);
    Ok((0..tq.len())
        .map(|s| tq.weights[s] * (stress[s][0] * trace[s][0] + stress[s][1] * trace[s][1]))
        .sum())
}

/// Per-step residual increments.
pub fn step_residuals(rows: &[EnergyLedgerRow]) -> Vec<f64> {
    rows.windows(2).map(|p| p[1].residual - p[0].residual).collect()
}

/// `sum |step residual|`.
pub fn integrated_residual(rows: &[EnergyLedgerRow]) -> f64 {
    step_residuals(rows).iter().map(|r| r.abs()).sum()
}

/// Most negative entry over all dissipation columns.
pub fn min_dissipation_entry(rows: &[EnergyLedgerRow]) -> f64 {
    rows.iter()
        .flat_map(|r| [r.viscous, r.delta_dissipation, r.eps_dissipation, r.friction])
        .fold(f64::INFINITY, f64::min)
}

/// CSV with a header row; floats in shortest round-trip form.
pub fn ledger_csv(rows: &[EnergyLedgerRow]) -> String {
    let mut s = LEDGER_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.values().iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
