//! Strong distances between trajectories and weak observables.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChannelDomain, VelocitySamples};
use crate::simulation::Trajectory;

fn same_levels(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.rho.len() != b.rho.len() || a.dt != b.dt {
        return Err(Error::DimensionMismatch {
            expected: a.rho.len(),
            got: b.rho.len(),
        });
    }
    Ok(())
}

/// Euclidean distance of coefficient vectors, padding the shorter with zeros.
fn coeff_gap(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `max_t |c_a(t) - c_b(t)|`.
pub fn coefficient_max_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    same_levels(a, b)?;
    Ok(a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| coeff_gap(&x.values, &y.values))
        .fold(0.0, f64::max))
}

/// `(sum_n dt |c_a - c_b|^2)^{1/2}` over the levels after the initial one.
pub fn coefficient_l2_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    same_levels(a, b)?;
    Ok((a.coeffs[1..]
        .iter()
        .zip(&b.coeffs[1..])
        .map(|(x, y)| a.dt * coeff_gap(&x.values, &y.values).powi(2))
        .sum::<f64>())
    .sqrt())
}

/// `(sum_n dt int |rho_a - rho_b|^2)^{1/2}` over the levels after the initial one.
pub fn density_l2_distance(domain: &ChannelDomain, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    same_levels(a, b)?;
    let w = domain.cell_area();
    Ok((a.rho[1..]
        .iter()
        .zip(&b.rho[1..])
        .map(|(x, y)| a.dt * w * x.values.iter().zip(&y.values).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
        .sum::<f64>())
    .sqrt())
}

/// `log(d_k / d_{k+1}) / |log(h_k / h_{k+1})|`.
pub fn empirical_rates(distances: &[f64], steps: &[f64]) -> Vec<f64> {
    (0..distances.len().saturating_sub(1))
        .map(|k| (distances[k] / distances[k + 1]).ln() / (steps[k] / steps[k + 1]).ln().abs())
        .collect()
}

/// Smooth space-time window
/// `amplitude sin(pi t/T) cos^2(pi (x/Lx - xc)) (1 + side cos(pi y/H)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub xc: f64,
    pub side: f64,
    pub amplitude: f64,
}

impl Window {
    pub fn eval(&self, t: f64, final_time: f64, p: [f64; 2], domain: &ChannelDomain) -> f64 {
        let time = (PI * t / final_time).sin();
        let x = (PI * (p[0] / domain.lx - self.xc)).cos().powi(2);
        let y = 0.5 * (1.0 + self.side * (PI * p[1] / domain.height).cos());
        self.amplitude * time * x * y
    }
}

/// Four windows: centred at `x = 0` and `x = Lx/2`, weighted to each wall.
pub fn default_windows() -> Vec<Window> {
    let mut v = Vec::new();
    for xc in [0.0, 0.5] {
        for side in [1.0, -1.0] {
            v.push(Window {
                xc,
                side,
                amplitude: 1.0,
            });
        }
    }
    v
}

/// `[<rho,psi>, <rho u_x,psi>, <rho u_y,psi>, <u_x,psi>, <u_y,psi>]` per
/// window, trapezoidal in time.
pub fn weak_observables(
    domain: &ChannelDomain,
    traj: &Trajectory,
    u: &[VelocitySamples],
    windows: &[Window],
) -> Vec<[f64; 5]> {
    let nodes = domain.volume_nodes();
    let w = domain.cell_area();
    let levels = traj.rho.len();
    let final_time = traj.rho.last().map(|r| r.time).unwrap_or(0.0);
    windows
        .iter()
        .map(|win| {
            let mut acc = [0.0; 5];
            if final_time <= 0.0 {
                return acc;
            }
            for n in 0..levels {
                let tw = if n == 0 || n + 1 == levels { 0.5 } else { 1.0 } * traj.dt;
                let t = traj.rho[n].time;
                for (k, p) in nodes.iter().enumerate() {
                    let psi = win.eval(t, final_time, *p, domain) * w * tw;
                    if psi == 0.0 {
                        continue;
                    }
                    let r = traj.rho[n].values[k];
                    let v = u[n].values[k];
                    acc[0] += r * psi;
                    acc[1] += r * v[0] * psi;
                    acc[2] += r * v[1] * psi;
                    acc[3] += v[0] * psi;
                    acc[4] += v[1] * psi;
                }
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakGap {
    pub window: usize,
    /// `rho`, `rho-u` or `u`.
    pub field: String,
    pub component: usize,
    pub fine: f64,
    pub coarse: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakReport {
    pub gaps: Vec<WeakGap>,
}

impl WeakReport {
    pub fn max_gap(&self, field: &str) -> f64 {
        self.gaps
            .iter()
            .filter(|g| g.field == field)
            .map(|g| g.gap)
            .fold(0.0, f64::max)
    }
}

/// Gaps between the weak observables of a coarse run and a fine run on the
/// same grid.
pub fn weak_consistency(
    domain: &ChannelDomain,
    fine: (&Trajectory, &[VelocitySamples]),
    coarse: (&Trajectory, &[VelocitySamples]),
    windows: &[Window],
) -> Result<WeakReport> {
    same_levels(fine.0, coarse.0)?;
    let f = weak_observables(domain, fine.0, fine.1, windows);
    let c = weak_observables(domain, coarse.0, coarse.1, windows);
    let labels = [("rho", 0), ("rho-u", 0), ("rho-u", 1), ("u", 0), ("u", 1)];
    let mut gaps = Vec::new();
    for (wi, (fo, co)) in f.iter().zip(&c).enumerate() {
        for (q, (field, component)) in labels.iter().enumerate() {
            gaps.push(WeakGap {
                window: wi,
                field: (*field).into(),
                component: *component,
                fine: fo[q],
                coarse: co[q],
                gap: (fo[q] - co[q]).abs(),
            });
        }
    }
    Ok(WeakReport { gaps })
}
