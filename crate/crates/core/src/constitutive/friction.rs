//! Smoothed absolute value used by the friction law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `j(v) = |v|` outside the ball of radius `delta`, `|v|^2/(2 delta) + delta/2`
/// inside. `C^1`, convex, `|grad j| <= 1`, `0 <= j(v) - |v| <= delta/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedAbsolute {
    pub delta: f64,
}

impl SmoothedAbsolute {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::param("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        let r = norm(v);
        if r > self.delta {
            r
        } else {
            r * r / (2.0 * self.delta) + 0.5 * self.delta
        }
    }

    pub fn gradient<const N: usize>(&self, v: [f64; N]) -> [f64; N] {
        let r = norm(&v);
        let s = if r > self.delta { 1.0 / r } else { 1.0 / self.delta };
        v.map(|c| c * s)
    }
}

pub fn j_delta(delta: f64, v: &[f64]) -> f64 {
    SmoothedAbsolute { delta }.value(v)
}

pub fn grad_j_delta<const N: usize>(delta: f64, v: [f64; N]) -> [f64; N] {
    SmoothedAbsolute { delta }.gradient(v)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_branch() {
        let j = SmoothedAbsolute::new(0.1).unwrap();
        assert_eq!(j.value(&[1.0, 0.0]), 1.0);
        assert_eq!(j.gradient([1.0, 0.0]), [1.0, 0.0]);
    }

    #[test]
    fn origin_value_is_half_delta() {
        let j = SmoothedAbsolute::new(0.1).unwrap();
        assert_eq!(j.value(&[0.0, 0.0]), 0.05);
        assert_eq!(j.gradient([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn branches_meet_on_the_sphere() {
        let j = SmoothedAbsolute::new(0.25).unwrap();
        let v = [0.15, 0.2];
        assert!((j.value(&v) - 0.25).abs() < 1e-15);
        let g = j.gradient(v);
        assert!((norm(&g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_delta() {
        assert!(SmoothedAbsolute::new(0.0).is_err());
        assert!(SmoothedAbsolute::new(-1.0).is_err());
    }
}
