//! Korn-type ratio and Fenchel dissipation audit.

use serde::{Deserialize, Serialize};

use crate::constitutive::{MollifiedPotential, SymTensor};
use crate::error::Result;
use crate::geometry::{ChannelDomain, Mat2, VelocitySamples};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KornRow {
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the denominator is degenerate.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornReport {
    pub exponent: f64,
    pub rows: Vec<KornRow>,
    pub max: f64,
    pub median: f64,
    /// `max / median <= 10`.
    pub bounded: bool,
}

fn sym(m: &Mat2) -> SymTensor {
    SymTensor::new2(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))
}

/// `|u|_{W^{1,q}} / (|Du - tr(Du)/d Id|_{L^q} + int rho + int rho |u|^2)`.
pub fn korn_row(domain: &ChannelDomain, u: &VelocitySamples, rho: &[f64], q: f64) -> KornRow {
    let w = domain.cell_area();
    let mut w1q = 0.0;
    let mut dev = 0.0;
    let mut mass = 0.0;
    let mut kin = 0.0;
    for k in 0..u.len() {
        let v = u.values[k];
        let g = &u.gradients[k];
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let gn = g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        w1q += speed.powf(q) + gn.powf(q);
        dev += sym(g).deviatoric().norm().powf(q);
        mass += rho[k];
        kin += rho[k] * speed * speed;
    }
    let numerator = (w * w1q).powf(1.0 / q);
    let denominator = (w * dev).powf(1.0 / q) + w * mass + w * kin;
    let degenerate = (w * dev).powf(1.0 / q) < 1e-14 && w * mass < 1e-14 && w * kin < 1e-14;
    KornRow {
        numerator,
        denominator,
        ratio: (!degenerate).then(|| numerator / denominator),
    }
}

pub fn korn_ratio(domain: &ChannelDomain, u: &[VelocitySamples], rho: &[Vec<f64>], q: f64) -> KornReport {
    let rows: Vec<KornRow> = u.iter().zip(rho).map(|(u, r)| korn_row(domain, u, r, q)).collect();
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let max = ratios.last().copied().unwrap_or(0.0);
    let median = if ratios.is_empty() {
        0.0
    } else if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
    };
    let bounded = median == 0.0 && max == 0.0 || (median > 0.0 && max / median <= 10.0);
    KornReport {
        exponent: q,
        rows,
        max,
        median,
        bounded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FenchelAudit {
    /// `int |F(Du) + F*(S) - S:Du|` per level with `S = grad F(Du)`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Audits the Fenchel equality on every `stride`-th node of each level.
pub fn dissipation_audit(
    domain: &ChannelDomain,
    potential: &MollifiedPotential,
    u: &[VelocitySamples],
    stride: usize,
    tolerance: f64,
) -> Result<FenchelAudit> {
    let stride = stride.max(1);
    let w = domain.cell_area() * stride as f64;
    let mut residuals = Vec::with_capacity(u.len());
    let mut largest: f64 = 0.0;
    for s in u {
        let mut r = 0.0;
        for k in (0..s.len()).step_by(stride) {
            let d = sym(&s.gradients[k]);
            let f = potential.value(&d);
            let st = potential.gradient(&d)?;
            let work = st.ddot(&d);
            let conj = potential.conjugate(&st)?;
            largest = largest.max(f.abs()).max(work.abs());
            r += (f + conj - work).abs();
        }
        residuals.push(w * r);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let scale = (largest * domain.area()).max(1.0);
    Ok(FenchelAudit {
        residuals,
        max_residual,
        scale,
        tolerance,
        passed: max_residual <= tolerance * scale,
    })
}
