//! Sweeps over the approximation parameters and the numerical counterparts of
//! the three limit passages: velocity Cauchy distances in the friction
//! regularization, strong density and velocity distances in the artificial
//! viscosity, and weak observables, boundary Young measures and window
//! defects in the Galerkin dimension.

pub mod defect;
pub mod distance;
pub mod young;

use std::fs;
use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};

pub use defect::{defect_estimate, jensen_gaps, DefectEstimate, LevelDefect, WindowDefect, WINDOWS_PER_DIRECTION};
pub use distance::{
    coefficient_max_distance, coefficient_l2_distance, density_l2_distance, empirical_rates, weak_consistency,
    weak_observables, Window, WeakGap, WeakReport,
};
pub use young::{boundary_young_measure, wasserstein1, BoundaryMeasure, BoundaryReport, StationMeasure, HISTOGRAM_BINS};

use crate::artifact::{render_artifact, write_atomic};
use crate::config::{from_toml, RunConfig};
use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::geometry::VelocitySamples;
use crate::simulation::{simulate, Problem, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Delta,
    Epsilon,
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub base: RunConfig,
}

impl SweepPlan {
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self.base.violations().into_iter().map(|m| format!("base.{m}")).collect();
        if self.values.len() < 3 {
            v.push(format!("values: a sweep needs at least 3 levels, got {}", self.values.len()));
        }
        let up = self.values.windows(2).all(|p| p[1] > p[0]);
        let down = self.values.windows(2).all(|p| p[1] < p[0]);
        if !(up || down) {
            v.push("values: must be strictly monotone".into());
        }
        for (k, cfg) in self.values.iter().map(|&x| self.level_config(x)).enumerate() {
            for m in cfg.violations() {
                v.push(format!("values[{k}]: {m}"));
            }
        }
        if self.axis == SweepAxis::N && self.values.iter().any(|x| x.fract() != 0.0 || *x < 1.0) {
            v.push("values: dimensions must be positive integers".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// The base configuration with the swept parameter replaced.
    pub fn level_config(&self, value: f64) -> RunConfig {
        let mut c = self.base.clone();
        match self.axis {
            SweepAxis::Delta => c.regularization.delta = value,
            SweepAxis::Epsilon => c.regularization.epsilon = value,
            SweepAxis::N => c.space.n = value as usize,
        }
        c
    }

    pub fn configs(&self) -> Vec<RunConfig> {
        self.values.iter().map(|&v| self.level_config(v)).collect()
    }

    /// Index of the finest level.
    pub fn reference(&self) -> usize {
        finest_index(self.axis, &self.values)
    }
}

/// Largest dimension or smallest regularization parameter.
fn finest_index(axis: SweepAxis, values: &[f64]) -> usize {
    let n = values.len();
    let increasing = n > 1 && values[n - 1] > values[0];
    match (axis, increasing) {
        (SweepAxis::N, true) | (SweepAxis::Delta | SweepAxis::Epsilon, false) => n - 1,
        _ => 0,
    }
}

pub fn parse_plan(text: &str) -> Result<SweepPlan> {
    let (plan, mut errors): (SweepPlan, _) = from_toml(text)?;
    errors.extend(plan.violations());
    if errors.is_empty() {
        Ok(plan)
    } else {
        Err(Error::Config(errors))
    }
}

/// One executed level.
#[derive(Debug)]
pub struct LevelRun {
    pub config: RunConfig,
    pub problem: Problem,
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

impl LevelRun {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn velocity(&self) -> Result<Vec<VelocitySamples>> {
        self.trajectory.velocity_samples(&self.problem.space)
    }
}

/// Runs every configuration concurrently; results come back in input order.
pub fn run_levels(configs: &[RunConfig]) -> Result<Vec<LevelRun>> {
    let results: Vec<Result<LevelRun>> = thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                s.spawn(move || {
                    let problem = c.build_problem()?;
                    let outcome = simulate(&problem)?;
                    Ok(LevelRun {
                        config: c.clone(),
                        problem,
                        trajectory: outcome.trajectory,
                        failure: outcome.failure,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep level panicked"))
            .collect()
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub from: usize,
    pub to: usize,
    pub norm: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub norm: String,
    pub distances: Vec<f64>,
    /// `log(d_k / d_{k+1}) / log(h_k / h_{k+1})` for consecutive pairs.
    pub rates: Vec<f64>,
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub pairs: Vec<PairDistance>,
    pub series: Vec<NormSeries>,
    /// `(level, message)` for levels stopped by a solver failure.
    pub failures: Vec<(usize, String)>,
}

impl ConvergenceReport {
    pub fn series(&self, norm: &str) -> Option<&NormSeries> {
        self.series.iter().find(|s| s.norm == norm)
    }
}

/// Distances between consecutive levels; on the dimension axis, weak gaps of
/// every level against the finest.
pub fn convergence_report(axis: SweepAxis, values: &[f64], runs: &[LevelRun]) -> Result<ConvergenceReport> {
    let failures: Vec<(usize, String)> = runs
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.failure.as_ref().map(|e| (k, e.to_string())))
        .collect();
    let mut pairs = Vec::new();
    let velocities: Vec<Option<Vec<VelocitySamples>>> = runs
        .iter()
        .map(|r| if r.completed() && axis == SweepAxis::N { r.velocity().map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let pair_list: Vec<(usize, usize)> = match axis {
        // Weak observables are compared against the finest level.
        SweepAxis::N => {
            let reference = finest_index(axis, values);
            let mut v: Vec<(usize, usize)> = (0..runs.len()).filter(|&k| k != reference).map(|k| (k, reference)).collect();
            if reference == 0 {
                v.reverse();
            }
            v
        }
        _ => (0..runs.len().saturating_sub(1)).map(|k| (k, k + 1)).collect(),
    };
    for (from, to) in pair_list {
        let (a, b) = (&runs[from], &runs[to]);
        if !(a.completed() && b.completed()) {
            continue;
        }
        let domain = &a.problem.space.domain;
        let mut push = |norm: &str, value: f64| {
            pairs.push(PairDistance {
                from,
                to,
                norm: norm.into(),
                value,
            })
        };
        match axis {
            SweepAxis::Delta => push("u-coeff-max", coefficient_max_distance(&a.trajectory, &b.trajectory)?),
            SweepAxis::Epsilon => {
                push("rho-l2", density_l2_distance(domain, &a.trajectory, &b.trajectory)?);
                push("u-coeff-l2", coefficient_l2_distance(&a.trajectory, &b.trajectory)?);
            }
            SweepAxis::N => {
                let va = velocities[from].as_ref().expect("completed");
                let vb = velocities[to].as_ref().expect("completed");
                let obs = distance::default_windows();
                let w = weak_consistency(domain, (&b.trajectory, vb), (&a.trajectory, va), &obs)?;
                for field in ["rho", "u", "rho-u"] {
                    push(&format!("weak-{field}"), w.max_gap(field));
                }
            }
        }
    }
    let mut norms: Vec<String> = Vec::new();
    for p in &pairs {
        if !norms.contains(&p.norm) {
            norms.push(p.norm.clone());
        }
    }
    let series = norms
        .into_iter()
        .map(|norm| {
            let sel: Vec<&PairDistance> = pairs.iter().filter(|p| p.norm == norm).collect();
            let distances: Vec<f64> = sel.iter().map(|p| p.value).collect();
            let steps: Vec<f64> = sel.iter().map(|p| values[p.from]).collect();
            NormSeries {
                rates: empirical_rates(&distances, &steps),
                strictly_decreasing: distances.windows(2).all(|d| d[1] < d[0]),
                distances,
                norm,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        axis,
        values: values.to_vec(),
        pairs,
        series,
        failures,
    })
}

/// Everything a sweep produces.
#[derive(Debug)]
pub struct SweepOutcome {
    pub plan: SweepPlan,
    pub runs: Vec<LevelRun>,
    pub reports: Vec<Option<DiagnosticsReport>>,
    pub convergence: ConvergenceReport,
    pub boundary: Option<BoundaryReport>,
    pub defect: Option<DefectEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub convergence: ConvergenceReport,
    pub boundary: Option<BoundaryReport>,
    pub defect: Option<DefectEstimate>,
}

/// Runs all levels, level diagnostics and the axis-specific reports.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepOutcome> {
    plan.validate()?;
    let runs = run_levels(&plan.configs())?;
    let reports = thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|r| {
                s.spawn(move || -> Result<Option<DiagnosticsReport>> {
                    let (_, report) = render_artifact(&r.config, &r.problem, &r.trajectory, r.failure.as_ref())?;
                    Ok(report)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("diagnostics panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let convergence = convergence_report(plan.axis, &plan.values, &runs)?;
    let all_done = runs.iter().all(LevelRun::completed);
    let (boundary, defect) = if plan.axis == SweepAxis::N && all_done {
        let order = level_order(plan);
        let ordered: Vec<&LevelRun> = order.iter().map(|&k| &runs[k]).collect();
        let stations: Vec<usize> = (0..ordered[0].problem.space.trace_quadrature.len()).collect();
        let phi = vec![0.0; stations.len()];
        (
            Some(boundary_young_measure(&ordered, &stations, &phi)?),
            Some(defect_estimate(&ordered)?),
        )
    } else {
        (None, None)
    };
    Ok(SweepOutcome {
        plan: plan.clone(),
        runs,
        reports,
        convergence,
        boundary,
        defect,
    })
}

/// Level indices ordered from coarsest to finest.
pub fn level_order(plan: &SweepPlan) -> Vec<usize> {
    let n = plan.values.len();
    if plan.reference() == n - 1 {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    }
}

/// Runs a sweep and writes `level-<k>/` artifacts plus `sweep.json`.
pub fn sweep_to_dir(plan: &SweepPlan, out: &Path) -> Result<SweepOutcome> {
    let outcome = run_sweep(plan)?;
    for (k, r) in outcome.runs.iter().enumerate() {
        let dir = out.join(format!("level-{k}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let (files, _) = render_artifact(&r.config, &r.problem, &r.trajectory, r.failure.as_ref())?;
        for (name, bytes) in &files {
            write_atomic(&dir, name, bytes)?;
        }
    }
    let summary = SweepSummary {
        convergence: outcome.convergence.clone(),
        boundary: outcome.boundary.clone(),
        defect: outcome.defect.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serde(e.to_string()))?;
    write_atomic(out, "sweep.json", json.as_bytes())?;
    Ok(outcome)
}
