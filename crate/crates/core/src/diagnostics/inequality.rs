//! Discrete momentum inequality over a battery of Galerkin test functions.
//!
//! For a test function with coefficients `a_n` at the time levels the check is
//!
//! ```text
//! sum_n (M_{n+1} c_{n+1} - M_n c_n) . a_{n+1}
//!     >= dt sum_n B_{n+1} . a_{n+1}
//!      + dt sum_n int_Gamma g [j(u_{n+1}) - j(u_{n+1} + phi_{n+1})]
//! ```
//!
//! where `B` is the forcing without the friction term. It follows from the
//! Galerkin equation and the convexity of `j`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RunView;
use crate::error::Result;
use crate::momentum::{assemble_mass, DensitySamples};

/// Coefficients of a test function at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub coeffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub scale: f64,
    pub passed: bool,
}

/// `(1 - t/T)^k`.
pub fn envelope(t: f64, final_time: f64, k: i32) -> f64 {
    if final_time <= 0.0 {
        return 0.0;
    }
    (1.0 - t / final_time).max(0.0).powi(k)
}

/// Modes times envelopes `k = 1, 2`, `random` seeded combinations and the
/// damped negative velocity `-u (1 - t/T)`.
pub fn default_battery(view: &RunView<'_>, random: usize, seed: u64) -> Vec<TestFunction> {
    let traj = view.trajectory;
    let times = traj.times();
    let n = view.problem.space.dim();
    let final_time = *times.last().unwrap_or(&1.0);
    let mut out = Vec::new();
    for i in 0..n {
        for k in [1, 2] {
            let coeffs = times
                .iter()
                .map(|&t| {
                    let mut a = vec![0.0; n];
                    a[i] = envelope(t, final_time, k);
                    a
                })
                .collect();
            out.push(TestFunction {
                id: format!("mode{i}-env{k}"),
                coeffs,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..random {
        let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let k = 1 + (r % 2) as i32;
        let coeffs = times
            .iter()
            .map(|&t| dir.iter().map(|d| d * envelope(t, final_time, k)).collect())
            .collect();
        out.push(TestFunction {
            id: format!("random{r}"),
            coeffs,
        });
    }
    out.push(TestFunction {
        id: "minus-velocity".into(),
        coeffs: traj
            .coeffs
            .iter()
            .zip(&times)
            .map(|(c, &t)| c.values.iter().map(|v| -v * envelope(t, final_time, 1)).collect())
            .collect(),
    });
    out
}

/// Evaluates both sides for every test function.
pub fn momentum_inequality_check(
    view: &RunView<'_>,
    battery: &[TestFunction],
    tolerance: f64,
) -> Result<Vec<InequalityReport>> {
    let problem = view.problem;
    let space = &problem.space;
    let model = &problem.model;
    let tq = &space.trace_quadrature;
    let traj = view.trajectory;
    let dt = traj.dt;
    let steps = traj.steps();

    // Per-step ingredients shared by all test functions.
    let mut momentum = Vec::with_capacity(steps + 1);
    for (rho, c) in traj.rho.iter().zip(&traj.coeffs) {
        momentum.push(assemble_mass(&rho.values, space)?.apply(&c.values));
    }
    let mut bulk = Vec::with_capacity(steps);
    let mut traces = Vec::with_capacity(steps);
    let mut thresholds = Vec::with_capacity(steps);
    for n in 0..steps {
        let (old, new) = (&traj.rho[n], &traj.rho[n + 1]);
        let c = &traj.coeffs[n + 1].values;
        let data = problem.data.sample(new.time, space);
        let ds = DensitySamples::discrete(&space.domain, &old.values, &new.values, &model.pressure);
        let mut terms = model.assemble_forcing(space, &ds, c, &view.velocity[n + 1], &data)?;
        terms.friction.iter_mut().for_each(|f| *f = 0.0);
        bulk.push(terms.total());
        traces.push(space.trace_on_walls(c)?);
        thresholds.push(data.threshold);
    }

    let mut reports = Vec::with_capacity(battery.len());
    for phi in battery {
        let mut lhs = 0.0;
        let mut rhs_bulk = 0.0;
        let mut rhs_wall = 0.0;
        let mut largest: f64 = 0.0;
        for n in 0..steps {
            let a = &phi.coeffs[n + 1];
            let dm: f64 = (0..a.len()).map(|i| (momentum[n + 1][i] - momentum[n][i]) * a[i]).sum();
            let b: f64 = dt * (0..a.len()).map(|i| bulk[n][i] * a[i]).sum::<f64>();
            let mut wall = 0.0;
            for s in 0..tq.len() {
                let mut p = [0.0; 2];
                for (i, ai) in a.iter().enumerate() {
                    let m = space.mode_trace(i, s);
                    p[0] += ai * m[0];
                    p[1] += ai * m[1];
                }
                let u = traces[n][s];
                let g = thresholds[n][s];
                wall += tq.weights[s]
                    * g
                    * (model.friction.value(&u) - model.friction.value(&[u[0] + p[0], u[1] + p[1]]));
            }
            wall *= dt;
            lhs += dm;
            rhs_bulk += b;
            rhs_wall += wall;
            largest = largest.max(dm.abs()).max(b.abs()).max(wall.abs());
        }
        let rhs = rhs_bulk + rhs_wall;
        let scale = largest.max(lhs.abs()).max(rhs.abs()).max(1.0);
        let margin = lhs - rhs;
        reports.push(InequalityReport {
            id: phi.id.clone(),
            lhs,
            rhs,
            margin,
            scale,
            passed: margin >= -tolerance * scale,
        });
    }
    Ok(reports)
}
