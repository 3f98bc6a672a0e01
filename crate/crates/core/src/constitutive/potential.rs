//! Viscous potentials `F`, their gradients and convex conjugates.

use std::fmt;
use std::sync::Arc;

use super::tensor::SymTensor;
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&SymTensor) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&SymTensor) -> SymTensor + Send + Sync>;

/// User-supplied potential. The caller vouches for convexity and `F(0) = 0`;
/// [`PotentialSpec::validate_samples`] spot-checks both.
#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub value: ScalarFn,
    pub gradient: Option<TensorFn>,
    pub coercivity: (f64, f64),
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("name", &self.name)
            .field("has_gradient", &self.gradient.is_some())
            .field("coercivity", &self.coercivity)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `F(D) = mu/2 |D|^2 + lambda/2 tr(D)^2`.
    Newtonian { mu: f64, lambda: f64 },
    /// `F(D) = mu |D|^q + lambda/2 tr(D)^2`.
    PowerLaw { mu: f64, q: f64, lambda: f64 },
    Custom(CustomPotential),
}

#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub dim: usize,
}

impl PotentialSpec {
    pub fn newtonian(mu: f64, lambda: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            kind: PotentialKind::Newtonian { mu, lambda },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn power_law(mu: f64, q: f64, lambda: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            kind: PotentialKind::PowerLaw { mu, q, lambda },
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn custom(custom: CustomPotential, dim: usize) -> Self {
        Self {
            kind: PotentialKind::Custom(custom),
            dim,
        }
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            PotentialKind::Newtonian { .. } => "newtonian",
            PotentialKind::PowerLaw { .. } => "powerlaw",
            PotentialKind::Custom(c) => &c.name,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim as f64;
        match self.kind {
            PotentialKind::Newtonian { mu, lambda } => {
                if !(mu > 0.0) {
                    return Err(Error::param("mu", format!("must be positive, got {mu}")));
                }
                // Convexity and F >= 0 need mu/d + lambda > 0.
                if !(mu / d + lambda > 0.0) {
                    return Err(Error::param(
                        "lambda",
                        format!("must exceed -mu/d = {}, got {lambda}", -mu / d),
                    ));
                }
            }
            PotentialKind::PowerLaw { mu, q, lambda } => {
                if !(mu > 0.0) {
                    return Err(Error::param("mu", format!("must be positive, got {mu}")));
                }
                if !(q > 1.0) {
                    return Err(Error::param("q", format!("must exceed 1, got {q}")));
                }
                if !(lambda >= 0.0) {
                    return Err(Error::param("lambda", format!("must be >= 0, got {lambda}")));
                }
            }
            PotentialKind::Custom(_) => {}
        }
        Ok(())
    }

    /// Quadratic potentials are fixed points of radial mollification.
    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, PotentialKind::Newtonian { .. })
    }

    /// `(mu_c, q)` with `F(D) >= mu_c |D - tr(D)/d Id|^q` for `|D| > 1`.
    pub fn coercivity(&self) -> (f64, f64) {
        match &self.kind {
            PotentialKind::Newtonian { mu, .. } => (0.5 * mu, 2.0),
            PotentialKind::PowerLaw { mu, q, .. } => (*mu, *q),
            PotentialKind::Custom(c) => c.coercivity,
        }
    }

    pub fn value(&self, d: &SymTensor) -> f64 {
        match &self.kind {
            PotentialKind::Newtonian { mu, lambda } => {
                let tr = d.trace();
                0.5 * mu * d.norm_sq() + 0.5 * lambda * tr * tr
            }
            PotentialKind::PowerLaw { mu, q, lambda } => {
                let tr = d.trace();
                mu * d.norm().powf(*q) + 0.5 * lambda * tr * tr
            }
            PotentialKind::Custom(c) => (c.value)(d),
        }
    }

    pub fn has_gradient(&self) -> bool {
        match &self.kind {
            PotentialKind::Custom(c) => c.gradient.is_some(),
            _ => true,
        }
    }

    pub fn gradient(&self, d: &SymTensor) -> Result<SymTensor> {
        let dim = d.dim();
        Ok(match &self.kind {
            PotentialKind::Newtonian { mu, lambda } => {
                *mu * *d + (lambda * d.trace()) * SymTensor::identity(dim)
            }
            PotentialKind::PowerLaw { mu, q, lambda } => {
                let n = d.norm();
                let radial = if n > 0.0 {
                    (mu * q * n.powf(q - 2.0)) * *d
                } else {
                    SymTensor::zeros(dim)
                };
                radial + (lambda * d.trace()) * SymTensor::identity(dim)
            }
            PotentialKind::Custom(c) => match &c.gradient {
                Some(g) => g(d),
                None => return Err(Error::NoGradient(c.name.clone())),
            },
        })
    }

    /// Closed-form conjugate where one exists.
    pub fn conjugate_closed_form(&self, s: &SymTensor) -> Option<f64> {
        match self.kind {
            PotentialKind::Newtonian { mu, lambda } => {
                let d = s.dim() as f64;
                let tr = s.trace();
                Some(s.deviatoric().norm_sq() / (2.0 * mu) + tr * tr / (2.0 * d * d * (mu / d + lambda)))
            }
            _ => None,
        }
    }

    /// `F*(S) = sup_D [S:D - F(D)]`: closed form for quadratic kinds, damped
    /// ascent otherwise.
    pub fn conjugate(&self, s: &SymTensor) -> Result<f64> {
        if let Some(v) = self.conjugate_closed_form(s) {
            return Ok(v);
        }
        let out = maximize_conjugate(
            |x| self.value(x),
            |x| self.gradient(x),
            s,
            &AscentOptions::default(),
        )?;
        Ok(out.value)
    }

    /// `F(D) + F*(S) - D:S`, non-negative by Fenchel-Young.
    pub fn fenchel_residual(&self, d: &SymTensor, s: &SymTensor) -> Result<f64> {
        Ok(self.value(d) + self.conjugate(s)? - d.ddot(s))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Stop once the predicted gain of a step falls below this.
    pub gap_tol: f64,
    pub grad_tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            gap_tol: 1e-10,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConjugateValue {
    pub value: f64,
    pub argmax: SymTensor,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Maximises the concave map `X -> S:X - F(X)` from `X = 0` by gradient
/// ascent with Barzilai-Borwein trial steps and Armijo backtracking.
pub fn maximize_conjugate<F, G>(f: F, grad: G, s: &SymTensor, opts: &AscentOptions) -> Result<ConjugateValue>
where
    F: Fn(&SymTensor) -> f64,
    G: Fn(&SymTensor) -> Result<SymTensor>,
{
    let dim = s.dim();
    let scale = s.norm().max(1.0);
    let objective = |x: &SymTensor| s.ddot(x) - f(x);
    let mut x = SymTensor::zeros(dim);
    let mut phi = objective(&x);
    let mut g = *s - grad(&x)?;
    let mut step = 1.0;
    let mut prev: Option<(SymTensor, SymTensor)> = None;
    let mut gain = f64::INFINITY;

    for it in 0..opts.max_iter {
        let gn2 = g.norm_sq();
        if gn2.sqrt() <= opts.grad_tol * scale || gain < opts.gap_tol * opts.gap_tol * scale {
            return Ok(ConjugateValue {
                value: phi,
                argmax: x,
                iterations: it,
                gradient_norm: gn2.sqrt(),
            });
        }
        if let Some((xp, gp)) = prev {
            let sk = x - xp;
            let yk = gp - g;
            let sy = sk.ddot(&yk);
            if sy > 0.0 {
                step = sk.norm_sq() / sy;
            }
        }
        let mut t = step;
        let (xn, phin) = loop {
            let xn = x + t * g;
            let phin = objective(&xn);
            if phin.is_finite() && phin >= phi + 1e-4 * t * gn2 {
                break (xn, phin);
            }
            t *= 0.5;
            if t < 1e-300 {
                return Err(Error::ConjugateNotConverged {
                    iterations: it,
                    gap_bound: gn2,
                    last_iterate: x.entries().to_vec(),
                });
            }
        };
        gain = phin - phi;
        let gnew = *s - grad(&xn)?;
        prev = Some((x, g));
        x = xn;
        phi = phin;
        g = gnew;
        step = t;
    }
    Err(Error::ConjugateNotConverged {
        iterations: opts.max_iter,
        gap_bound: step * g.norm_sq(),
        last_iterate: x.entries().to_vec(),
    })
}
