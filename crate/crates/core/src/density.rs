//! Parabolic-regularised continuity equation on the channel grid.
//!
//! One step of `d_t rho + div(rho u) = eps lap rho` is
//!
//! ```text
//! (I - eps dt L) rho' = rho - dt div_h(rho u)
//! ```
//!
//! with central conservative advection and the wide Laplacian
//! `L = div_h grad_h`. `L` is diagonal in the real Fourier basis along `x`
//! and the DCT-II basis along `y`, so the implicit solve is exact and costs
//! four dense transforms. The constant mode has eigenvalue zero, which keeps
//! the mean density fixed.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChannelDomain, VelocitySamples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub time: f64,
    /// Nodal values in the domain's row-major order.
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(time: f64, values: Vec<f64>) -> Self {
        Self { time, values }
    }

    pub fn constant(domain: &ChannelDomain, c: f64) -> Self {
        Self::new(0.0, vec![c; domain.node_count()])
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(domain: &ChannelDomain, f: F) -> Self {
        Self::new(0.0, domain.sample(f))
    }

    pub fn mass(&self, domain: &ChannelDomain) -> f64 {
        domain.integrate(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityParams {
    pub epsilon: f64,
    pub dt: f64,
    /// `1/n_b <= rho_0 <= n_b`.
    pub bound: f64,
}

impl ContinuityParams {
    pub fn new(epsilon: f64, dt: f64, bound: f64) -> Result<Self> {
        let p = Self { epsilon, dt, bound };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::param("epsilon", format!("must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.bound >= 1.0) {
            return Err(Error::param("density_bound", format!("must be >= 1, got {}", self.bound)));
        }
        Ok(())
    }

    /// Checks `1/n_b <= rho_0 <= n_b`.
    pub fn check_initial(&self, rho0: &DensityField) -> Result<()> {
        let (lo, hi) = (rho0.min(), rho0.max());
        if lo < 1.0 / self.bound || hi > self.bound {
            return Err(Error::param(
                "density_bound",
                format!("initial density range [{lo}, {hi}] exceeds [1/{b}, {b}]", b = self.bound),
            ));
        }
        Ok(())
    }
}

/// Exact solver for `(I - c L) x = b` by separable diagonalisation.
#[derive(Debug, Clone)]
pub struct HelmholtzSolver {
    domain: ChannelDomain,
    /// Orthonormal real Fourier basis along `x`, columns are modes.
    fx: DMatrix<f64>,
    /// Orthonormal DCT-II basis along `y`, columns are modes.
    cy: DMatrix<f64>,
    /// `-eigenvalue` of `L` per `x` mode and per `y` mode.
    lam_x: Vec<f64>,
    lam_y: Vec<f64>,
}

impl HelmholtzSolver {
    pub fn new(domain: &ChannelDomain) -> Self {
        let (nx, ny) = (domain.nx, domain.ny);
        let (hx, hy) = (domain.hx(), domain.hy());
        let mut fx = DMatrix::zeros(nx, nx);
        let mut lam_x = vec![0.0; nx];
        let a0 = 1.0 / (nx as f64).sqrt();
        let a = (2.0 / nx as f64).sqrt();
        for i in 0..nx {
            fx[(i, 0)] = a0;
        }
        let mut col = 1;
        for m in 1..nx / 2 {
            let s = (2.0 * PI * m as f64 / nx as f64).sin() / hx;
            for i in 0..nx {
                let th = 2.0 * PI * (m * i) as f64 / nx as f64;
                fx[(i, col)] = a * th.cos();
                fx[(i, col + 1)] = a * th.sin();
            }
            lam_x[col] = s * s;
            lam_x[col + 1] = s * s;
            col += 2;
        }
        // Nyquist mode; nx is even.
        for i in 0..nx {
            fx[(i, col)] = if i % 2 == 0 { a0 } else { -a0 };
        }

        let mut cy = DMatrix::zeros(ny, ny);
        let mut lam_y = vec![0.0; ny];
        let b0 = 1.0 / (ny as f64).sqrt();
        let b = (2.0 / ny as f64).sqrt();
        for k in 0..ny {
            let s = (PI * k as f64 / ny as f64).sin() / hy;
            lam_y[k] = s * s;
            for j in 0..ny {
                cy[(j, k)] = if k == 0 {
                    b0
                } else {
                    b * (PI * k as f64 * (j as f64 + 0.5) / ny as f64).cos()
                };
            }
        }
        Self {
            domain: *domain,
            fx,
            cy,
            lam_x,
            lam_y,
        }
    }

    /// Solves `(I - c L) x = rhs` for `c >= 0`.
    pub fn solve(&self, c: f64, rhs: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.domain.nx, self.domain.ny);
        // Row j of the matrix holds the grid row y_j.
        let a = DMatrix::from_row_slice(ny, nx, rhs);
        let mut hat = self.cy.transpose() * a * &self.fx;
        for k in 0..ny {
            for m in 0..nx {
                hat[(k, m)] /= 1.0 + c * (self.lam_x[m] + self.lam_y[k]);
            }
        }
        let back = &self.cy * hat * self.fx.transpose();
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(back[(j, i)]);
            }
        }
        out
    }
}

/// Time-step limits for a sampled velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CflReport {
    pub max_speed: f64,
    /// `min(hx / max|u_x|, hy / max|u_y|)`.
    pub advective_dt: f64,
    /// `2 eps / max|u|^2`, the stability limit of explicit central advection
    /// against implicit diffusion.
    pub stability_dt: f64,
}

impl CflReport {
    pub fn recommended_dt(&self) -> f64 {
        self.advective_dt.min(self.stability_dt)
    }
}

pub fn cfl_report(domain: &ChannelDomain, u: &VelocitySamples, epsilon: f64) -> CflReport {
    let mut ux: f64 = 0.0;
    let mut uy: f64 = 0.0;
    let mut speed2: f64 = 0.0;
    for v in &u.values {
        ux = ux.max(v[0].abs());
        uy = uy.max(v[1].abs());
        speed2 = speed2.max(v[0] * v[0] + v[1] * v[1]);
    }
    let adv_x = if ux > 0.0 { domain.hx() / ux } else { f64::INFINITY };
    let adv_y = if uy > 0.0 { domain.hy() / uy } else { f64::INFINITY };
    CflReport {
        max_speed: speed2.sqrt(),
        advective_dt: adv_x.min(adv_y),
        stability_dt: if speed2 > 0.0 { 2.0 * epsilon / speed2 } else { f64::INFINITY },
    }
}

/// Density stepper bound to one grid.
#[derive(Debug, Clone)]
pub struct DensitySolver {
    pub domain: ChannelDomain,
    helmholtz: HelmholtzSolver,
}

impl DensitySolver {
    pub fn new(domain: &ChannelDomain) -> Self {
        Self {
            domain: *domain,
            helmholtz: HelmholtzSolver::new(domain),
        }
    }

    /// Advective flux divergence `div_h(rho u)`.
    pub fn flux_divergence(&self, rho: &[f64], u: &VelocitySamples) -> Vec<f64> {
        let fx: Vec<f64> = rho.iter().zip(&u.values).map(|(r, v)| r * v[0]).collect();
        let fy: Vec<f64> = rho.iter().zip(&u.values).map(|(r, v)| r * v[1]).collect();
        self.domain.divergence(&fx, &fy)
    }

    /// One step without the positivity check.
    pub fn step_unchecked(&self, rho: &DensityField, u: &VelocitySamples, params: &ContinuityParams) -> DensityField {
        let div = self.flux_divergence(&rho.values, u);
        let rhs: Vec<f64> = rho.values.iter().zip(&div).map(|(r, d)| r - params.dt * d).collect();
        let values = self.helmholtz.solve(params.epsilon * params.dt, &rhs);
        DensityField::new(rho.time + params.dt, values)
    }

    pub fn advance(&self, rho: &DensityField, u: &VelocitySamples, params: &ContinuityParams) -> Result<DensityField> {
        if u.len() != rho.values.len() || rho.values.len() != self.domain.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.node_count(),
                got: u.len().min(rho.values.len()),
            });
        }
        let next = self.step_unchecked(rho, u, params);
        let (k, &v) = next
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        if !(v > 0.0) {
            let cfl = cfl_report(&self.domain, u, params.epsilon);
            return Err(Error::Positivity {
                i: k % self.domain.nx,
                j: k / self.domain.nx,
                value: v,
                suggested_dt: (0.5 * params.dt).min(cfl.recommended_dt()),
            });
        }
        Ok(next)
    }
}

/// Convenience wrapper building a solver for a single step.
pub fn advance_density(
    domain: &ChannelDomain,
    rho: &DensityField,
    u: &VelocitySamples,
    params: &ContinuityParams,
) -> Result<DensityField> {
    DensitySolver::new(domain).advance(rho, u, params)
}

/// `Sum_steps dt (max|u| + max|grad u|)` at each step, starting from zero.
pub fn velocity_lip_norm_series(u: &[VelocitySamples], dt: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(u.len() + 1);
    out.push(0.0);
    for s in u {
        let mut vmax: f64 = 0.0;
        let mut gmax: f64 = 0.0;
        for (v, g) in s.values.iter().zip(&s.gradients) {
            vmax = vmax.max((v[0] * v[0] + v[1] * v[1]).sqrt());
            let f = g.iter().flatten().map(|c| c * c).sum::<f64>().sqrt();
            gmax = gmax.max(f);
        }
        acc += dt * (vmax + gmax);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub step: usize,
    pub node: usize,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Smallest `min(rho - lower, upper - rho)` over all nodes and steps.
    pub min_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst: Option<BoundViolation>,
    pub violations: usize,
}

/// Checks `exp(-|u|) / n_b <= rho <= n_b exp(|u|)` along a run.
///
/// `rho[0]` is the initial density and `u[k]` the velocity driving the step
/// from `rho[k]` to `rho[k + 1]`.
pub fn density_bounds_check(
    rho: &[DensityField],
    u: &[VelocitySamples],
    params: &ContinuityParams,
    tolerance: f64,
) -> BoundReport {
    let norms = velocity_lip_norm_series(u, params.dt);
    let mut min_margin = f64::INFINITY;
    let mut worst = None;
    let mut violations = 0;
    for (step, field) in rho.iter().enumerate() {
        let w = norms[step.min(norms.len() - 1)];
        let lower = (-w).exp() / params.bound;
        let upper = params.bound * w.exp();
        for (node, &v) in field.values.iter().enumerate() {
            let m = (v - lower).min(upper - v);
            if m < -tolerance {
                violations += 1;
            }
            if m < min_margin {
                min_margin = m;
                worst = Some(BoundViolation {
                    step,
                    node,
                    value: v,
                    lower,
                    upper,
                });
            }
        }
    }
    BoundReport {
        min_margin,
        tolerance,
        passed: violations == 0,
        worst,
        violations,
    }
}

/// Renormalisations `zeta` for the entropy balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Renormalization {
    Linear,
    EntropyLog,
    Square,
    Power { kappa: f64, theta: f64 },
}

impl Renormalization {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Self::Linear => r,
            Self::EntropyLog => r * r.ln(),
            Self::Square => r * r,
            Self::Power { kappa, theta } => (r + kappa).powf(theta),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Self::Linear => 1.0,
            Self::EntropyLog => r.ln() + 1.0,
            Self::Square => 2.0 * r,
            Self::Power { kappa, theta } => theta * (r + kappa).powf(theta - 1.0),
        }
    }

    /// `zeta'(r) r - zeta(r)`.
    pub fn compression(&self, r: f64) -> f64 {
        self.derivative(r) * r - self.value(r)
    }

    pub fn in_domain(&self, r: f64) -> bool {
        match *self {
            Self::EntropyLog => r > 0.0,
            Self::Power { kappa, .. } => r + kappa > 0.0,
            _ => r.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub time: f64,
    /// `int zeta(rho)` at the new level.
    pub total: f64,
    /// `(int zeta(rho') - int zeta(rho)) / dt`.
    pub rate: f64,
    /// `int (zeta'(rho) rho - zeta(rho)) div u`.
    pub compression: f64,
    /// `-eps int grad_h zeta'(rho) . grad_h rho`, the discrete form of
    /// `-eps int zeta''(rho) |grad rho|^2`; non-positive for convex `zeta`.
    pub dissipation: f64,
    /// `rate + compression - dissipation`.
    pub residual: f64,
}

/// Per-step renormalised balance along a run, with the conventions of
/// [`density_bounds_check`].
pub fn entropy_balance(
    domain: &ChannelDomain,
    rho: &[DensityField],
    u: &[VelocitySamples],
    params: &ContinuityParams,
    zeta: Renormalization,
) -> Result<Vec<EntropyRow>> {
    let integral = |f: &DensityField| -> Result<f64> {
        let mut s = 0.0;
        for &v in &f.values {
            if !zeta.in_domain(v) {
                return Err(Error::param("renormalization", format!("density {v} outside its domain")));
            }
            s += zeta.value(v);
        }
        Ok(s * domain.cell_area())
    };
    let mut rows = Vec::with_capacity(rho.len().saturating_sub(1));
    let mut prev = integral(&rho[0])?;
    for (k, pair) in rho.windows(2).enumerate() {
        let next = &pair[1];
        let total = integral(next)?;
        let rate = (total - prev) / params.dt;
        let us = &u[k];
        let compression = domain.cell_area()
            * next
                .values
                .iter()
                .enumerate()
                .map(|(n, &r)| zeta.compression(r) * us.divergence(n))
                .sum::<f64>();
        let zp: Vec<f64> = next.values.iter().map(|&r| zeta.derivative(r)).collect();
        let (ax, ay) = domain.gradient(&zp);
        let (bx, by) = domain.gradient(&next.values);
        let dot: f64 = (0..zp.len()).map(|n| ax[n] * bx[n] + ay[n] * by[n]).sum();
        let dissipation = -params.epsilon * dot * domain.cell_area();
        rows.push(EntropyRow {
            time: next.time,
            total,
            rate,
            compression,
            dissipation,
            residual: rate + compression - dissipation,
        });
        prev = total;
    }
    Ok(rows)
}

/// `int zeta(rho(t)) + int_0^t int (zeta' rho - zeta) div u - int zeta(rho_0)`
/// at each step; non-positive up to discretisation error for convex `zeta`.
pub fn entropy_inequality_excess(initial_total: f64, rows: &[EntropyRow], dt: f64) -> Vec<f64> {
    let mut acc = 0.0;
    rows.iter()
        .map(|r| {
            acc += dt * r.compression;
            r.total + acc - initial_total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(n: usize) -> ChannelDomain {
        ChannelDomain::new(2.0, n, n, 8).unwrap()
    }

    #[test]
    fn helmholtz_inverts_operator() {
        let d = ChannelDomain::new(2.0, 12, 8, 4).unwrap();
        let h = HelmholtzSolver::new(&d);
        let x: Vec<f64> = (0..d.node_count()).map(|k| ((k * 37 % 11) as f64).sin()).collect();
        let c = 0.3;
        let lx = d.laplacian(&x);
        let b: Vec<f64> = x.iter().zip(&lx).map(|(x, l)| x - c * l).collect();
        let y = h.solve(c, &b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_are_steady() {
        let d = domain(16);
        let s = DensitySolver::new(&d);
        let p = ContinuityParams::new(0.1, 0.01, 4.0).unwrap();
        let mut rho = DensityField::constant(&d, 1.7);
        let u = VelocitySamples::zeros(d.node_count());
        for _ in 0..10 {
            rho = s.advance(&rho, &u, &p).unwrap();
        }
        assert!(rho.values.iter().all(|v| (v - 1.7).abs() < 1e-12));
    }

    #[test]
    fn x_independent_density_under_tangential_flow() {
        let d = domain(16);
        let s = DensitySolver::new(&d);
        let p = ContinuityParams::new(0.05, 0.01, 4.0).unwrap();
        let rho0 = DensityField::from_fn(&d, |_, y| 1.0 + 0.2 * (PI * y).cos());
        let mut u = VelocitySamples::zeros(d.node_count());
        for v in u.values.iter_mut() {
            *v = [0.7, 0.0];
        }
        let div = s.flux_divergence(&rho0.values, &u);
        assert!(div.iter().all(|v| v.abs() < 1e-12));
        let m0 = rho0.mass(&d);
        let rho1 = s.advance(&rho0, &u, &p).unwrap();
        assert!(((rho1.mass(&d) - m0) / m0).abs() < 1e-12);
    }

    #[test]
    fn positivity_failure_suggests_smaller_step() {
        let d = domain(8);
        let s = DensitySolver::new(&d);
        let p = ContinuityParams::new(0.01, 10.0, 4.0).unwrap();
        let rho = DensityField::from_fn(&d, |x, _| 1.0 + 0.9 * (PI * x).sin());
        let mut u = VelocitySamples::zeros(d.node_count());
        for v in u.values.iter_mut() {
            *v = [5.0, 0.0];
        }
        match s.advance(&rho, &u, &p) {
            Err(Error::Positivity { suggested_dt, .. }) => assert!(suggested_dt < 10.0),
            other => panic!("expected positivity failure, got {other:?}"),
        }
    }

    #[test]
    fn bounds_reduce_to_initial_range_without_flow() {
        let d = domain(8);
        let p = ContinuityParams::new(0.1, 0.01, 2.0).unwrap();
        let rho0 = DensityField::from_fn(&d, |x, _| if x < 1.0 { 2.0 } else { 0.5 });
        let u = vec![VelocitySamples::zeros(d.node_count())];
        let report = density_bounds_check(&[rho0], &u, &p, 1e-8);
        assert!(report.passed);
        assert_eq!(report.min_margin, 0.0);
    }

    #[test]
    fn linear_renormalization_is_mass_balance() {
        let d = domain(16);
        let s = DensitySolver::new(&d);
        let p = ContinuityParams::new(0.05, 0.01, 4.0).unwrap();
        let mut rho = vec![DensityField::from_fn(&d, |x, y| 1.0 + 0.3 * (PI * x).cos() * (PI * y).cos())];
        let mut u = Vec::new();
        for _ in 0..5 {
            let mut us = VelocitySamples::zeros(d.node_count());
            for (k, p) in d.volume_nodes().iter().enumerate() {
                us.values[k] = [0.3 * (PI * p[1]).cos(), 0.0];
                us.gradients[k] = [[0.0, -0.3 * PI * (PI * p[1]).sin()], [0.0, 0.0]];
            }
            let next = s.advance(rho.last().unwrap(), &us, &p).unwrap();
            rho.push(next);
            u.push(us);
        }
        let rows = entropy_balance(&d, &rho, &u, &p, Renormalization::Linear).unwrap();
        for r in rows {
            assert!(r.residual.abs() <= 1e-12 * rho[0].mass(&d));
        }
    }

    #[test]
    fn entropy_dissipates_without_flow() {
        let d = domain(16);
        let s = DensitySolver::new(&d);
        let p = ContinuityParams::new(0.05, 0.01, 4.0).unwrap();
        let mut rho = vec![DensityField::from_fn(&d, |_, y| 1.0 + 0.1 * (PI * y).cos())];
        let u = vec![VelocitySamples::zeros(d.node_count()); 20];
        for us in &u {
            let next = s.advance(rho.last().unwrap(), us, &p).unwrap();
            rho.push(next);
        }
        for zeta in [Renormalization::EntropyLog, Renormalization::Square] {
            let rows = entropy_balance(&d, &rho, &u, &p, zeta).unwrap();
            for r in &rows {
                assert!(r.dissipation <= 0.0);
                assert!(r.compression == 0.0);
                // Backward Euler dissipates at least as much as the rate.
                assert!(r.rate <= r.dissipation + 1e-14);
            }
        }
    }
}
