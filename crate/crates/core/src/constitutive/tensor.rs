//! Symmetric tensors stored by their upper triangle.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A `d x d` symmetric tensor, `d` in `{2, 3}`.
///
/// Entries are stored diagonal first, then the strict upper triangle in
/// row-major order: `[11, 22, 12]` for `d = 2` and
/// `[11, 22, 33, 12, 13, 23]` for `d = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dim: usize,
    entries: [f64; 6],
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "SymTensor supports d = 2 or 3");
        Self {
            dim,
            entries: [0.0; 6],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim {
            t.entries[k] = 1.0;
        }
        t
    }

    /// `[d11, d22, d12]`.
    pub fn new2(d11: f64, d22: f64, d12: f64) -> Self {
        Self {
            dim: 2,
            entries: [d11, d22, d12, 0.0, 0.0, 0.0],
        }
    }

    pub fn from_entries(dim: usize, entries: &[f64]) -> Self {
        let mut t = Self::zeros(dim);
        assert_eq!(entries.len(), Self::entry_count(dim));
        t.entries[..entries.len()].copy_from_slice(entries);
        t
    }

    /// Symmetric part of a full matrix given row-major.
    pub fn sym_part(dim: usize, m: &[f64]) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, 0.5 * (m[i * dim + j] + m[j * dim + i]));
            }
        }
        t
    }

    pub fn entry_count(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries[..Self::entry_count(self.dim)]
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if i == j {
            return i;
        }
        match (self.dim, i, j) {
            (2, 0, 1) => 2,
            (3, 0, 1) => 3,
            (3, 0, 2) => 4,
            (3, 1, 2) => 5,
            _ => unreachable!(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[self.slot(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.entries[s] = v;
    }

    pub fn trace(&self) -> f64 {
        self.entries[..self.dim].iter().sum()
    }

    /// Frobenius product `A : B`.
    pub fn ddot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let n = Self::entry_count(self.dim);
        let diag: f64 = (0..self.dim).map(|k| self.entries[k] * other.entries[k]).sum();
        let off: f64 = (self.dim..n).map(|k| self.entries[k] * other.entries[k]).sum();
        diag + 2.0 * off
    }

    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Trace-free part `A - tr(A)/d Id`.
    pub fn deviatoric(&self) -> Self {
        let mut t = *self;
        let m = self.trace() / self.dim as f64;
        for k in 0..self.dim {
            t.entries[k] -= m;
        }
        t
    }

    /// Isometric coordinates: diagonal entries and `sqrt(2)` times off-diagonal
    /// entries, so that the Euclidean norm equals the Frobenius norm.
    pub fn to_coords(&self) -> Vec<f64> {
        let n = Self::entry_count(self.dim);
        (0..n)
            .map(|k| {
                if k < self.dim {
                    self.entries[k]
                } else {
                    std::f64::consts::SQRT_2 * self.entries[k]
                }
            })
            .collect()
    }

    pub fn from_coords(dim: usize, coords: &[f64]) -> Self {
        let mut t = Self::zeros(dim);
        for (k, &c) in coords.iter().enumerate() {
            t.entries[k] = if k < dim {
                c
            } else {
                c / std::f64::consts::SQRT_2
            };
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

impl Add for SymTensor {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.entries.iter_mut().zip(rhs.entries) {
            *a += b;
        }
        self
    }
}

impl Sub for SymTensor {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.entries.iter_mut().zip(rhs.entries) {
            *a -= b;
        }
        self
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, mut rhs: SymTensor) -> SymTensor {
        for a in rhs.entries.iter_mut() {
            *a *= self;
        }
        rhs
    }
}

impl Neg for SymTensor {
    type Output = Self;
    fn neg(self) -> Self {
        -1.0 * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_counts_off_diagonal_twice() {
        let a = SymTensor::new2(1.0, 2.0, 3.0);
        assert_eq!(a.norm_sq(), 1.0 + 4.0 + 18.0);
        let coords = a.to_coords();
        let e: f64 = coords.iter().map(|c| c * c).sum();
        assert!((e - a.norm_sq()).abs() < 1e-14);
        assert_eq!(SymTensor::from_coords(2, &coords), a);
    }

    #[test]
    fn deviatoric_is_trace_free_in_both_dims() {
        let a = SymTensor::new2(1.0, 5.0, 3.0);
        assert!(a.deviatoric().trace().abs() < 1e-15);
        let b = SymTensor::from_entries(3, &[1.0, 2.0, 6.0, 0.5, -1.0, 2.0]);
        assert!(b.deviatoric().trace().abs() < 1e-15);
        assert_eq!(b.get(2, 0), -1.0);
    }

    #[test]
    fn sym_part_averages() {
        let t = SymTensor::sym_part(2, &[1.0, 2.0, 4.0, 3.0]);
        assert_eq!(t, SymTensor::new2(1.0, 3.0, 3.0));
    }
}
