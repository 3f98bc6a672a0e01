//! Galerkin momentum balance: mass operator, forcing functional and the
//! Picard time stepper.
//!
//! Each step solves for `(rho', c')` with
//!
//! ```text
//! rho' = density step from rho driven by u(c')
//! M(rho') c' = M(rho) c + dt N(rho, rho', c')
//! ```
//!
//! by fixed-point iteration on `c`. In the default skew form the convective,
//! pressure and compensation terms of `N` are written so that `N(c') . c'`
//! reproduces the discrete kinetic and internal energy exchange exactly. The
//! energy identity then closes up to the backward-Euler defects
//! `-1/2 |c' - c|_M^2` and the Bregman term of `P`, both `O(dt^2)` per step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constitutive::{MollifiedPotential, PressureLaw, SmoothedAbsolute, SymTensor};
use crate::density::{ContinuityParams, DensityField, DensitySolver};
use crate::error::{Error, Result};
use crate::geometry::{ChannelDomain, GalerkinSpace, Mat2, Vec2, VelocitySamples};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityCoefficients {
    pub time: f64,
    pub values: Vec<f64>,
}

impl VelocityCoefficients {
    pub fn new(time: f64, values: Vec<f64>) -> Self {
        Self { time, values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(0.0, vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn frob(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn sym(m: &Mat2) -> SymTensor {
    SymTensor::new2(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))
}

/// `S : grad phi` for symmetric `S`.
fn stress_contract(s: &SymTensor, g: &Mat2) -> f64 {
    s.get(0, 0) * g[0][0] + s.get(1, 1) * g[1][1] + s.get(0, 1) * (g[0][1] + g[1][0])
}

/// Symmetric positive definite mass matrix with its factorisation.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    pub matrix: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
}

impl MassMatrix {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.cholesky.solve(&DVector::from_column_slice(b)).as_slice().to_vec()
    }

    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(c)).as_slice().to_vec()
    }

    /// `c^T M c`.
    pub fn quadratic(&self, c: &[f64]) -> f64 {
        self.apply(c).iter().zip(c).map(|(a, b)| a * b).sum()
    }

    /// Smallest and largest eigenvalues.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let e = SymmetricEigen::new(self.matrix.clone()).eigenvalues;
        (e.min(), e.max())
    }

    pub fn condition(&self) -> f64 {
        let (lo, hi) = self.spectrum_bounds();
        hi / lo
    }
}

/// `M_ij = int rho phi_i . phi_j`.
pub fn assemble_mass(rho: &[f64], space: &GalerkinSpace) -> Result<MassMatrix> {
    let n = space.dim();
    let npts = space.node_count();
    if rho.len() != npts {
        return Err(Error::DimensionMismatch {
            expected: npts,
            got: rho.len(),
        });
    }
    let w = space.domain.cell_area();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut s = 0.0;
            for (k, &r) in rho.iter().enumerate() {
                s += r * dot(space.mode_value(a, k), space.mode_value(b, k));
            }
            m[(a, b)] = s * w;
        }
    }
    for a in 0..n {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    match m.clone().cholesky() {
        Some(cholesky) => Ok(MassMatrix { matrix: m, cholesky }),
        None => {
            let e = SymmetricEigen::new(m).eigenvalues;
            Err(Error::MassMatrix { min_eigenvalue: e.min() })
        }
    }
}

/// Solves `M(rho_0) c = (int (rho u)_0 . phi_i)_i`.
pub fn initial_projection(momentum: &[Vec2], rho0: &[f64], space: &GalerkinSpace) -> Result<VelocityCoefficients> {
    let npts = space.node_count();
    if momentum.len() != npts {
        return Err(Error::DimensionMismatch {
            expected: npts,
            got: momentum.len(),
        });
    }
    let mass = assemble_mass(rho0, space)?;
    let rhs = project_vector_field(momentum, space);
    Ok(VelocityCoefficients::new(0.0, mass.solve(&rhs)))
}

/// `(int v . phi_i)_i`.
pub fn project_vector_field(v: &[Vec2], space: &GalerkinSpace) -> Vec<f64> {
    let w = space.domain.cell_area();
    (0..space.dim())
        .map(|i| w * v.iter().enumerate().map(|(k, vk)| dot(*vk, space.mode_value(i, k))).sum::<f64>())
        .collect()
}

/// How the forcing functional is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForcingForm {
    /// Energy-consistent skew forms paired with the density scheme.
    #[default]
    Skew,
    /// Direct quadrature of `(rho u x u) : grad phi`, `p div phi` and
    /// `-eps (grad u grad rho) . phi` from supplied density samples.
    Literal,
}

/// Density data entering the forcing functional.
#[derive(Debug, Clone)]
pub struct DensitySamples {
    /// Density carried by the advective flux of the step (old level).
    pub rho_flux: Vec<f64>,
    /// Density at the new level.
    pub rho: Vec<f64>,
    pub grad_rho: Vec<Vec2>,
    /// Gradient of the enthalpy `P'(rho)` at the new level.
    pub grad_enthalpy: Vec<Vec2>,
}

impl DensitySamples {
    /// Samples built with the grid's central difference operator.
    pub fn discrete(domain: &ChannelDomain, rho_flux: &[f64], rho: &[f64], pressure: &PressureLaw) -> Self {
        let (gx, gy) = domain.gradient(rho);
        let h: Vec<f64> = rho.iter().map(|&r| pressure.potential_prime(r)).collect();
        let (hx, hy) = domain.gradient(&h);
        Self {
            rho_flux: rho_flux.to_vec(),
            rho: rho.to_vec(),
            grad_rho: gx.into_iter().zip(gy).map(|(a, b)| [a, b]).collect(),
            grad_enthalpy: hx.into_iter().zip(hy).map(|(a, b)| [a, b]).collect(),
        }
    }

    /// Samples from a closed-form density and its gradient.
    pub fn analytic<F, G>(nodes: &[Vec2], rho: F, grad: G, pressure: &PressureLaw) -> Self
    where
        F: Fn(Vec2) -> f64,
        G: Fn(Vec2) -> Vec2,
    {
        let r: Vec<f64> = nodes.iter().map(|p| rho(*p)).collect();
        let g: Vec<Vec2> = nodes.iter().map(|p| grad(*p)).collect();
        let ge = r
            .iter()
            .zip(&g)
            .map(|(&rv, gv)| {
                let s = pressure.potential_second(rv);
                [s * gv[0], s * gv[1]]
            })
            .collect();
        Self {
            rho_flux: r.clone(),
            rho: r,
            grad_rho: g,
            grad_enthalpy: ge,
        }
    }
}

/// External force at volume nodes and slip threshold at wall stations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSamples {
    pub force: Vec<Vec2>,
    pub threshold: Vec<f64>,
}

impl DataSamples {
    pub fn zeros(space: &GalerkinSpace) -> Self {
        Self {
            force: vec![[0.0; 2]; space.node_count()],
            threshold: vec![0.0; space.trace_quadrature.len()],
        }
    }
}

/// Time-dependent data `f(t, x)` on the volume and `g(t, x) >= 0` on the walls.
pub trait ExternalData: Send + Sync {
    fn force(&self, t: f64, p: Vec2) -> Vec2;
    fn threshold(&self, t: f64, p: Vec2) -> f64;

    fn sample(&self, t: f64, space: &GalerkinSpace) -> DataSamples {
        DataSamples {
            force: space.domain.volume_nodes().iter().map(|p| self.force(t, *p)).collect(),
            threshold: space.trace_quadrature.nodes.iter().map(|p| self.threshold(t, *p)).collect(),
        }
    }
}

/// Per-term breakdown of the forcing vector.
#[derive(Debug, Clone, Default)]
pub struct ForcingTerms {
    pub convection: Vec<f64>,
    pub viscous: Vec<f64>,
    pub gradient_penalty: Vec<f64>,
    pub pressure: Vec<f64>,
    pub external: Vec<f64>,
    pub compensation: Vec<f64>,
    pub friction: Vec<f64>,
}

impl ForcingTerms {
    /// `convection - viscous - gradient_penalty + pressure + external
    /// + compensation - friction`.
    pub fn total(&self) -> Vec<f64> {
        (0..self.convection.len())
            .map(|i| {
                self.convection[i] - self.viscous[i] - self.gradient_penalty[i] + self.pressure[i] + self.external[i]
                    + self.compensation[i]
                    - self.friction[i]
            })
            .collect()
    }
}

/// Physical model and regularisation shared by every step.
#[derive(Debug, Clone)]
pub struct MomentumModel {
    pub potential: MollifiedPotential,
    pub pressure: PressureLaw,
    pub friction: SmoothedAbsolute,
    pub delta: f64,
    pub epsilon: f64,
    pub form: ForcingForm,
}

impl MomentumModel {
    /// Stress `dF_delta(Du)` at every node.
    pub fn stresses(&self, u: &VelocitySamples) -> Result<Vec<SymTensor>> {
        u.gradients.iter().map(|g| self.potential.gradient(&sym(g))).collect()
    }

    /// Friction stress `g grad j_delta(u)` at wall stations.
    pub fn friction_stress(&self, trace: &[Vec2], threshold: &[f64]) -> Vec<Vec2> {
        trace
            .iter()
            .zip(threshold)
            .map(|(u, g)| {
                let d = self.friction.gradient(*u);
                [g * d[0], g * d[1]]
            })
            .collect()
    }

    /// Forcing vector with its term breakdown.
    pub fn assemble_forcing(
        &self,
        space: &GalerkinSpace,
        density: &DensitySamples,
        coeffs: &[f64],
        u: &VelocitySamples,
        data: &DataSamples,
    ) -> Result<ForcingTerms> {
        let n = space.dim();
        let npts = space.node_count();
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: coeffs.len(),
            });
        }
        let domain = &space.domain;
        let w = domain.cell_area();
        let stress = self.stresses(u)?;
        let trace = space.trace_on_walls(coeffs)?;
        let tq = &space.trace_quadrature;
        let fr_stress = self.friction_stress(&trace, &data.threshold);

        let mut t = ForcingTerms {
            convection: vec![0.0; n],
            viscous: vec![0.0; n],
            gradient_penalty: vec![0.0; n],
            pressure: vec![0.0; n],
            external: vec![0.0; n],
            compensation: vec![0.0; n],
            friction: vec![0.0; n],
        };

        let grad_u_grad_rho: Vec<Vec2> = (0..npts).map(|k| mat_vec(&u.gradients[k], density.grad_rho[k])).collect();
        let advective: Vec<Vec2> = (0..npts).map(|k| mat_vec(&u.gradients[k], u.values[k])).collect();
        let pressure: Vec<f64> = density.rho.iter().map(|&r| self.pressure.pressure(r)).collect();
        let mut u_dot_phi = vec![0.0; npts];

        for i in 0..n {
            let (mut conv, mut visc, mut pen, mut pres, mut ext, mut comp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            if self.form == ForcingForm::Skew {
                for (k, o) in u_dot_phi.iter_mut().enumerate() {
                    *o = dot(u.values[k], space.mode_value(i, k));
                }
            }
            let (dx, dy) = match self.form {
                ForcingForm::Skew => domain.gradient(&u_dot_phi),
                ForcingForm::Literal => (Vec::new(), Vec::new()),
            };
            for k in 0..npts {
                let phi = space.mode_value(i, k);
                let gphi = space.mode_gradient(i, k);
                let uk = u.values[k];
                let guk = &u.gradients[k];
                visc += stress_contract(&stress[k], &gphi);
                pen += frob(guk, &gphi);
                ext += density.rho[k] * dot(data.force[k], phi);
                // (u x u) : grad phi = u . (grad phi u).
                let uu_gphi = dot(uk, mat_vec(&gphi, uk));
                match self.form {
                    ForcingForm::Skew => {
                        let rf = density.rho_flux[k];
                        let d_uphi = [dx[k], dy[k]];
                        conv += rf * (0.5 * dot(uk, d_uphi) + 0.5 * uu_gphi - 0.5 * dot(phi, advective[k]));
                        pres -= rf * dot(phi, density.grad_enthalpy[k]);
                        let gr = density.grad_rho[k];
                        comp -= 0.5 * dot(d_uphi, gr) + 0.5 * (dot(grad_u_grad_rho[k], phi) - dot(mat_vec(&gphi, gr), uk));
                    }
                    ForcingForm::Literal => {
                        conv += density.rho[k] * uu_gphi;
                        pres += pressure[k] * (gphi[0][0] + gphi[1][1]);
                        comp -= dot(grad_u_grad_rho[k], phi);
                    }
                }
            }
            t.convection[i] = w * conv;
            t.viscous[i] = w * visc;
            t.gradient_penalty[i] = self.delta * w * pen;
            t.pressure[i] = w * pres;
            t.external[i] = w * ext;
            t.compensation[i] = self.epsilon * w * comp;
            t.friction[i] = (0..tq.len())
                .map(|s| tq.weights[s] * dot(fr_stress[s], space.mode_trace(i, s)))
                .sum();
        }
        Ok(t)
    }
}

/// Solver controls for the Picard loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub dt: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    /// Bound parameter passed through to the density step.
    pub density_bound: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub rho: DensityField,
    pub coeffs: VelocityCoefficients,
    pub iterations: usize,
    /// Geometric mean of successive change ratios; `None` when fewer than two
    /// changes exceed the noise floor.
    pub contraction: Option<f64>,
    pub last_change: f64,
}

/// Everything needed to advance one run.
pub struct Stepper<'a> {
    pub space: &'a GalerkinSpace,
    pub model: &'a MomentumModel,
    pub density: DensitySolver,
    pub guard: f64,
}

impl<'a> Stepper<'a> {
    /// `initial_norm` sets the blow-up guard `1e6 max(1, initial_norm)`.
    pub fn new(space: &'a GalerkinSpace, model: &'a MomentumModel, initial_norm: f64) -> Self {
        Self {
            space,
            model,
            density: DensitySolver::new(&space.domain),
            guard: 1e6 * initial_norm.max(1.0),
        }
    }

    pub fn continuity_params(&self, p: &StepParams) -> ContinuityParams {
        ContinuityParams {
            epsilon: self.model.epsilon,
            dt: p.dt,
            bound: p.density_bound,
        }
    }

    /// One backward-Euler step by Picard iteration on the coefficients.
    pub fn fixed_point_step(
        &self,
        rho: &DensityField,
        coeffs: &VelocityCoefficients,
        params: &StepParams,
        data: &DataSamples,
    ) -> Result<StepOutcome> {
        let space = self.space;
        let cp = self.continuity_params(params);
        let m_old = assemble_mass(&rho.values, space)?;
        let momentum_old = m_old.apply(&coeffs.values);
        let floor = 1e-13 * coeffs.norm().max(1.0);
        let t_new = rho.time + params.dt;

        let mut c = coeffs.values.clone();
        let mut changes: Vec<f64> = Vec::new();
        for it in 1..=params.max_iter {
            let u = space.evaluate_on_grid(&c)?;
            let rho_new = self.density.advance(rho, &u, &cp)?;
            let samples = DensitySamples::discrete(&space.domain, &rho.values, &rho_new.values, &self.model.pressure);
            let forcing = self.model.assemble_forcing(space, &samples, &c, &u, data)?.total();
            let m_new = assemble_mass(&rho_new.values, space)?;
            let rhs: Vec<f64> = momentum_old.iter().zip(&forcing).map(|(a, f)| a + params.dt * f).collect();
            let c_new = m_new.solve(&rhs);
            let change = norm(&c_new.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>());
            let size = norm(&c_new);
            if !size.is_finite() || size > self.guard {
                return Err(Error::BlowUp {
                    norm: size,
                    guard: self.guard,
                    time: t_new,
                });
            }
            changes.push(change);
            c = c_new;
            if change < params.tol_fp {
                return Ok(StepOutcome {
                    rho: rho_new,
                    coeffs: VelocityCoefficients::new(t_new, c),
                    iterations: it,
                    contraction: contraction_ratio(&changes, floor),
                    last_change: change,
                });
            }
        }
        Err(Error::FixedPoint {
            iterations: params.max_iter,
            last_ratio: contraction_ratio(&changes, floor).unwrap_or(f64::NAN),
            last_change: changes.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Geometric mean of `d_{k+1} / d_k` over consecutive changes above `floor`.
pub fn contraction_ratio(changes: &[f64], floor: f64) -> Option<f64> {
    let mut acc = 0.0;
    let mut count = 0;
    for pair in changes.windows(2) {
        if pair[0] > floor && pair[1] > floor {
            acc += (pair[1] / pair[0]).ln();
            count += 1;
        }
    }
    (count > 0).then(|| (acc / count as f64).exp())
}
