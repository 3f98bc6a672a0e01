//! Empirical boundary Young measures of the tangential wall trace.
//!
//! At every station the measure is the empirical law of the trace over the
//! stored time levels of a run. Identification compares the time average of
//! `|phi + u|` with the integral of `|phi + z|` against that measure; across
//! levels the measures are compared in the Wasserstein-1 distance.

use serde::{Deserialize, Serialize};

use super::LevelRun;
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeasure {
    pub station: usize,
    /// Sorted samples, each carrying mass `1 / atoms.len()`.
    pub atoms: Vec<f64>,
    /// `HISTOGRAM_BINS + 1` uniform edges.
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl StationMeasure {
    /// Empirical measure of `samples` binned on `[lo, hi]`.
    pub fn new(station: usize, samples: &[f64], lo: f64, hi: f64) -> Self {
        let mut atoms = samples.to_vec();
        atoms.sort_by(f64::total_cmp);
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|b| lo + b as f64 * width).collect();
        let mut masses = vec![0.0; HISTOGRAM_BINS];
        let m = 1.0 / atoms.len() as f64;
        for &z in &atoms {
            let b = (((z - lo) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
            masses[b] += m;
        }
        Self {
            station,
            atoms,
            edges,
            masses,
        }
    }

    /// `int f(z) dnu(z)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&z| f(z)).sum::<f64>() / self.atoms.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Wasserstein-1 distance of two empirical measures on the line,
/// `int |F_a - F_b|`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (wa, wb) = (1.0 / a.len() as f64, 1.0 / b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut last: Option<f64> = None;
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        if let Some(l) = last {
            total += (fa - fb).abs() * (x - l);
        }
        while i < a.len() && a[i] == x {
            fa += wa;
            i += 1;
        }
        while j < b.len() && b[j] == x {
            fb += wb;
            j += 1;
        }
        last = Some(x);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    pub stations: Vec<StationMeasure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    /// Measures of the finest level.
    pub measure: BoundaryMeasure,
    /// `|time average of |phi + u| - int |phi + z| dnu|` per station.
    pub identification: Vec<f64>,
    pub max_identification_error: f64,
    /// Wasserstein-1 distance to the finest measure, per coarser level and station.
    pub drift: Vec<Vec<f64>>,
    pub max_drift: Vec<f64>,
}

/// Tangential trace samples over time at each station.
fn trace_samples(run: &LevelRun, stations: &[usize]) -> Result<Vec<Vec<f64>>> {
    let space = &run.problem.space;
    let tq = &space.trace_quadrature;
    let mut out = vec![Vec::with_capacity(run.trajectory.coeffs.len()); stations.len()];
    for c in &run.trajectory.coeffs {
        let tr = space.trace_on_walls(&c.values)?;
        for (o, &s) in out.iter_mut().zip(stations) {
            let t = tq.tangents[s];
            o.push(tr[s][0] * t[0] + tr[s][1] * t[1]);
        }
    }
    Ok(out)
}

/// Builds the finest-level measures, checks identification for the test
/// trace `phi` (one tangential value per station) and reports drift of the
/// coarser levels. `runs` are ordered from coarsest to finest.
pub fn boundary_young_measure(runs: &[&LevelRun], stations: &[usize], phi: &[f64]) -> Result<BoundaryReport> {
    if stations.is_empty() {
        return Err(Error::param("stations", "station set is empty"));
    }
    if runs.len() < 2 {
        return Err(Error::param("runs", "needs at least 2 levels"));
    }
    if phi.len() != stations.len() {
        return Err(Error::DimensionMismatch {
            expected: stations.len(),
            got: phi.len(),
        });
    }
    let samples = runs
        .iter()
        .map(|r| trace_samples(r, stations))
        .collect::<Result<Vec<_>>>()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for z in samples.iter().flatten().flatten() {
        lo = lo.min(*z);
        hi = hi.max(*z);
    }
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.1 * lo.abs().max(1.0) };
    let (lo, hi) = (lo - pad, hi + pad);

    let finest = samples.last().expect("two levels");
    let measure = BoundaryMeasure {
        stations: stations
            .iter()
            .zip(finest)
            .map(|(&s, z)| StationMeasure::new(s, z, lo, hi))
            .collect(),
    };
    let identification: Vec<f64> = measure
        .stations
        .iter()
        .zip(finest)
        .zip(phi)
        .map(|((m, z), &p)| {
            let time_avg = z.iter().map(|u| (p + u).abs()).sum::<f64>() / z.len() as f64;
            (time_avg - m.integrate(|x| (p + x).abs())).abs()
        })
        .collect();
    let drift: Vec<Vec<f64>> = samples[..samples.len() - 1]
        .iter()
        .map(|lvl| lvl.iter().zip(finest).map(|(a, b)| wasserstein1(a, b)).collect())
        .collect();
    Ok(BoundaryReport {
        max_identification_error: identification.iter().copied().fold(0.0, f64::max),
        identification,
        max_drift: drift.iter().map(|d| d.iter().copied().fold(0.0, f64::max)).collect(),
        drift,
        measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_is_a_point_mass() {
        let m = StationMeasure::new(0, &[0.3; 5], 0.0, 1.0);
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(m.masses.iter().filter(|&&x| x > 0.0).count(), 1);
        assert!((m.integrate(|z| (0.2 + z).abs()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair() {
        let m = StationMeasure::new(0, &[0.7, -0.7], -1.0, 1.0);
        assert_eq!(m.integrate(f64::abs), 0.7);
    }

    #[test]
    fn wasserstein_of_shift() {
        let a = [0.0, 1.0, 2.0];
        let b = [0.5, 1.5, 2.5];
        assert!((wasserstein1(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        assert!((wasserstein1(&[0.0], &[0.0, 2.0]) - 1.0).abs() < 1e-15);
    }
}
