//! Window defects of the convective-pressure flux and of the energy.
//!
//! For a run and a space-time window `W = box x (0, T)` the Jensen gaps are
//!
//! ```text
//! G_R = <rho u (x) u + p(rho) Id>_W - (rho_W v_W (x) v_W + p(rho_W) Id)
//! G_E = <rho |u|^2 / 2 + P(rho)>_W  - (rho_W |v_W|^2 / 2 + P(rho_W))
//! ```
//!
//! with `rho_W = <rho>_W` and `v_W = <rho u>_W / rho_W`; both are nonnegative
//! by convexity. The defect of a level is its gap minus the gap of the finest
//! level, so identical runs and constant states give zero.

use serde::{Deserialize, Serialize};

use super::LevelRun;
use crate::error::{Error, Result};

pub const WINDOWS_PER_DIRECTION: usize = 4;

/// Windows with `|E|` below this carry no ratio.
pub const RESOLVABLE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDefect {
    pub ix: usize,
    pub iy: usize,
    /// `[R_xx, R_yy, R_xy]`.
    pub r: [f64; 3],
    pub e: f64,
    pub min_eigenvalue: f64,
    /// `tr R / E` where `E > RESOLVABLE`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDefect {
    pub level: usize,
    pub windows: Vec<WindowDefect>,
    pub max_abs_e: f64,
    pub min_e: f64,
    pub min_trace: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectEstimate {
    /// Coarser levels, coarsest first; the finest level is the reference.
    pub levels: Vec<LevelDefect>,
    pub max_abs_e: Vec<f64>,
    pub decreasing: bool,
    /// `[lower, upper]` bracket of `tr R / E` over resolvable windows.
    pub ratio_bracket: Option<[f64; 2]>,
    /// Bracket exists, is finite and has a positive lower end.
    pub bracket_positive: bool,
}

/// `[G_xx, G_yy, G_xy, G_E]` per window, row-major with `y` outer.
pub fn jensen_gaps(run: &LevelRun) -> Result<Vec<[f64; 4]>> {
    let domain = &run.problem.space.domain;
    let pressure = &run.problem.model.pressure;
    let traj = &run.trajectory;
    let u = run.velocity()?;
    let nw = WINDOWS_PER_DIRECTION;
    let levels = traj.rho.len();
    // Sums of weight, rho, rho u (2), rho u u (3), p, kinetic, P.
    let mut acc = vec![[0.0f64; 10]; nw * nw];
    for n in 0..levels {
        let tw = if levels == 1 {
            1.0
        } else if n == 0 || n + 1 == levels {
            0.5 * traj.dt
        } else {
            traj.dt
        };
        for j in 0..domain.ny {
            let iy = j * nw / domain.ny;
            for i in 0..domain.nx {
                let ix = i * nw / domain.nx;
                let k = domain.index(i, j);
                let r = traj.rho[n].values[k];
                let v = u[n].values[k];
                let a = &mut acc[iy * nw + ix];
                a[0] += tw;
                a[1] += tw * r;
                a[2] += tw * r * v[0];
                a[3] += tw * r * v[1];
                a[4] += tw * r * v[0] * v[0];
                a[5] += tw * r * v[1] * v[1];
                a[6] += tw * r * v[0] * v[1];
                a[7] += tw * pressure.pressure(r);
                a[8] += tw * 0.5 * r * (v[0] * v[0] + v[1] * v[1]);
                a[9] += tw * pressure.potential(r);
            }
        }
    }
    Ok(acc
        .iter()
        .map(|a| {
            let m: Vec<f64> = a[1..].iter().map(|x| x / a[0]).collect();
            let rho = m[0];
            let v = [m[1] / rho, m[2] / rho];
            let p = pressure.pressure(rho);
            [
                m[3] + m[6] - (rho * v[0] * v[0] + p),
                m[4] + m[6] - (rho * v[1] * v[1] + p),
                m[5] - rho * v[0] * v[1],
                m[7] + m[8] - (0.5 * rho * (v[0] * v[0] + v[1] * v[1]) + pressure.potential(rho)),
            ]
        })
        .collect())
}

fn min_eigenvalue(r: &[f64; 3]) -> f64 {
    let mean = 0.5 * (r[0] + r[1]);
    let rad = (0.25 * (r[0] - r[1]).powi(2) + r[2] * r[2]).sqrt();
    mean - rad
}

/// Defects of each coarser level against the finest; `runs` are ordered from
/// coarsest to finest.
pub fn defect_estimate(runs: &[&LevelRun]) -> Result<DefectEstimate> {
    if runs.len() < 3 {
        return Err(Error::param("runs", "the finest level must be at least 2 refinements above the coarsest"));
    }
    let gaps = runs.iter().map(|r| jensen_gaps(r)).collect::<Result<Vec<_>>>()?;
    let fine = gaps.last().expect("levels");
    let nw = WINDOWS_PER_DIRECTION;
    let mut levels = Vec::new();
    for (level, g) in gaps[..gaps.len() - 1].iter().enumerate() {
        let windows: Vec<WindowDefect> = g
            .iter()
            .zip(fine)
            .enumerate()
            .map(|(w, (c, f))| {
                let r = [c[0] - f[0], c[1] - f[1], c[2] - f[2]];
                let e = c[3] - f[3];
                WindowDefect {
                    ix: w % nw,
                    iy: w / nw,
                    r,
                    e,
                    min_eigenvalue: min_eigenvalue(&r),
                    ratio: (e > RESOLVABLE).then(|| (r[0] + r[1]) / e),
                }
            })
            .collect();
        levels.push(LevelDefect {
            level,
            max_abs_e: windows.iter().map(|w| w.e.abs()).fold(0.0, f64::max),
            min_e: windows.iter().map(|w| w.e).fold(f64::INFINITY, f64::min),
            min_trace: windows.iter().map(|w| w.r[0] + w.r[1]).fold(f64::INFINITY, f64::min),
            min_eigenvalue: windows.iter().map(|w| w.min_eigenvalue).fold(f64::INFINITY, f64::min),
            windows,
        });
    }
    let ratios: Vec<f64> = levels.iter().flat_map(|l| &l.windows).filter_map(|w| w.ratio).collect();
    let ratio_bracket = (!ratios.is_empty()).then(|| {
        [
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ]
    });
    let max_abs_e: Vec<f64> = levels.iter().map(|l| l.max_abs_e).collect();
    Ok(DefectEstimate {
        decreasing: max_abs_e.windows(2).all(|p| p[1] < p[0]),
        bracket_positive: ratio_bracket.is_some_and(|[lo, hi]| lo > 0.0 && hi.is_finite()),
        ratio_bracket,
        max_abs_e,
        levels,
    })
}
