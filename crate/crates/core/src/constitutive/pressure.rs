//! Isentropic pressure law and its potential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `p(rho) = a rho^gamma`, potential `P(rho) = rho * int_1^rho p(z)/z^2 dz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureLaw {
    pub a: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSample {
    pub pressure: f64,
    pub potential: f64,
    pub potential_prime: f64,
}

impl PressureLaw {
    pub fn isentropic(a: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param("a", format!("must be positive, got {a}")));
        }
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::param(
                "gamma",
                format!("must exceed 1 for the internal energy to be coercive, got {gamma}"),
            ));
        }
        Ok(Self { a, gamma })
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }

    pub fn potential(&self, rho: f64) -> f64 {
        self.a * (rho.powf(self.gamma) - rho) / (self.gamma - 1.0)
    }

    /// `P'(rho)`, the enthalpy.
    pub fn potential_prime(&self, rho: f64) -> f64 {
        self.a * (self.gamma * rho.powf(self.gamma - 1.0) - 1.0) / (self.gamma - 1.0)
    }

    /// `P''(rho) = p'(rho) / rho`, non-negative.
    pub fn potential_second(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 2.0)
    }

    pub fn eval(&self, rho: f64) -> Result<PressureSample> {
        if rho < 0.0 || rho.is_nan() {
            return Err(Error::NegativeDensity { value: rho });
        }
        Ok(PressureSample {
            pressure: self.pressure(rho),
            potential: self.potential(rho),
            potential_prime: self.potential_prime(rho),
        })
    }

    /// `c` with `P(rho) >= c rho^gamma` for every `rho >= 2`.
    ///
    /// `P(1) = 0`, so no positive constant works down to `rho = 1`.
    pub fn coercivity_constant(&self) -> f64 {
        self.a * (1.0 - 2f64.powf(1.0 - self.gamma)) / (self.gamma - 1.0)
    }
}
