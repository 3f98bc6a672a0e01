//! Time loop producing a stored trajectory.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{ContinuityParams, DensityField};
use crate::error::{Error, Result};
use crate::geometry::{GalerkinSpace, Vec2, VelocitySamples};
use crate::momentum::{initial_projection, ExternalData, MomentumModel, StepParams, Stepper, VelocityCoefficients};

/// A fully specified initial-boundary value problem.
#[derive(Clone)]
pub struct Problem {
    pub space: GalerkinSpace,
    pub model: MomentumModel,
    pub data: Arc<dyn ExternalData>,
    pub rho0: DensityField,
    /// Initial momentum `(rho u)_0` at volume nodes.
    pub momentum0: Vec<Vec2>,
    pub final_time: f64,
    pub step: StepParams,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.space.dim())
            .field("domain", &self.space.domain)
            .field("final_time", &self.final_time)
            .field("step", &self.step)
            .finish()
    }
}

impl Problem {
    pub fn steps(&self) -> usize {
        (self.final_time / self.step.dt).round() as usize
    }

    pub fn continuity_params(&self) -> ContinuityParams {
        ContinuityParams {
            epsilon: self.model.epsilon,
            dt: self.step.dt,
            bound: self.step.density_bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.continuity_params().validate()?;
        self.continuity_params().check_initial(&self.rho0)?;
        let steps = self.steps();
        if steps == 0 || ((steps as f64) * self.step.dt - self.final_time).abs() > 1e-9 * self.final_time {
            return Err(Error::param(
                "dt",
                format!("final time {} is not a whole number of steps of {}", self.final_time, self.step.dt),
            ));
        }
        Ok(())
    }
}

/// States at every time level; index 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub rho: Vec<DensityField>,
    pub coeffs: Vec<VelocityCoefficients>,
    /// Picard iterations per step (length `steps`).
    pub iterations: Vec<usize>,
    pub contraction: Vec<Option<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.iterations.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r.time).collect()
    }

    /// Grid velocity samples at every level.
    pub fn velocity_samples(&self, space: &GalerkinSpace) -> Result<Vec<VelocitySamples>> {
        self.coeffs.iter().map(|c| space.evaluate_on_grid(&c.values)).collect()
    }

    /// Mean of the per-step contraction ratios that were measurable.
    pub fn mean_contraction(&self) -> Option<f64> {
        let v: Vec<f64> = self.contraction.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_iterations(&self) -> f64 {
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len().max(1) as f64
    }
}

/// Outcome of a run that may stop early.
#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

/// Runs the problem to its final time, keeping the partial trajectory on
/// solver failure.
pub fn simulate(problem: &Problem) -> Result<RunOutcome> {
    problem.validate()?;
    let space = &problem.space;
    let c0 = initial_projection(&problem.momentum0, &problem.rho0.values, space)?;
    let stepper = Stepper::new(space, &problem.model, c0.norm());
    let mut traj = Trajectory {
        dt: problem.step.dt,
        rho: vec![problem.rho0.clone()],
        coeffs: vec![c0],
        iterations: Vec::new(),
        contraction: Vec::new(),
    };
    for n in 0..problem.steps() {
        let t_new = (n + 1) as f64 * problem.step.dt;
        let data = problem.data.sample(t_new, space);
        let rho = traj.rho.last().expect("initial state");
        let c = traj.coeffs.last().expect("initial state");
        match stepper.fixed_point_step(rho, c, &problem.step, &data) {
            Ok(mut out) => {
                // Pin times to the grid so repeated runs agree bitwise.
                out.rho.time = t_new;
                out.coeffs.time = t_new;
                traj.rho.push(out.rho);
                traj.coeffs.push(out.coeffs);
                traj.iterations.push(out.iterations);
                traj.contraction.push(out.contraction);
            }
            Err(e) if e.is_solver_failure() => {
                return Ok(RunOutcome {
                    trajectory: traj,
                    failure: Some(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunOutcome {
        trajectory: traj,
        failure: None,
    })
}
