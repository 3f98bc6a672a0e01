//! Run configuration: TOML schema, validation and problem construction.
//!
//! Every section is optional; omitted keys take the defaults of
//! [`RunConfig::default`], which describe the reference channel run.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{MollifiedPotential, PotentialSpec, PressureLaw, SmoothedAbsolute};
use crate::density::DensityField;
use crate::diagnostics::DiagnosticOptions;
use crate::error::{Error, Result};
use crate::geometry::{ChannelDomain, GalerkinSpace, Vec2};
use crate::momentum::{ExternalData, ForcingForm, MomentumModel, StepParams};
use crate::simulation::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainConfig {
    pub lx: f64,
    pub nx: usize,
    pub ny: usize,
    pub nb: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lx: 2.0,
            nx: 32,
            ny: 32,
            nb: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpaceConfig {
    pub n: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self { n: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViscosityKind {
    Newtonian,
    Powerlaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViscosityConfig {
    pub kind: ViscosityKind,
    pub mu: f64,
    pub lambda: f64,
    /// Growth exponent of the power-law kind.
    pub q: f64,
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        Self {
            kind: ViscosityKind::Newtonian,
            mu: 0.2,
            lambda: 0.0,
            q: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PressureConfig {
    pub a: f64,
    pub gamma: f64,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self { a: 1.0, gamma: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingKind {
    Zero,
    Constant,
    TangentialShear,
    SpaceTimeCosine,
    Tabulated,
}

/// Cell-centred table on an `nx x ny` grid, row-major with `y` outer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub nx: usize,
    pub ny: usize,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForcingConfig {
    pub kind: ForcingKind,
    /// Components for `constant`.
    pub fx: f64,
    pub fy: f64,
    /// Amplitude for `tangential-shear` and `space-time-cosine`.
    pub amplitude: f64,
    /// Angular frequency for `space-time-cosine`.
    pub omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<GridTable>,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self {
            kind: ForcingKind::SpaceTimeCosine,
            fx: 0.0,
            fy: 0.0,
            amplitude: 0.5,
            omega: 2.0 * PI,
            table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    Constant,
    Cosine,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrictionConfig {
    pub kind: ThresholdKind,
    /// Mean threshold.
    pub g: f64,
    /// Relative modulation for `cosine`: `g (1 + amplitude cos(2 pi x / Lx))`.
    pub amplitude: f64,
    /// Periodic samples along `x` for `tabulated`, shared by both walls.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Default for FrictionConfig {
    fn default() -> Self {
        Self {
            kind: ThresholdKind::Constant,
            g: 0.5,
            amplitude: 0.0,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumShape {
    Zero,
    Bump,
    Shear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConfig {
    /// `rho_0 = 1 + A cos(2 pi x / Lx) cos(pi y / H)`.
    pub density_amplitude: f64,
    /// `1/b <= rho_0 <= b`.
    pub density_bound: f64,
    pub momentum: MomentumShape,
    pub momentum_amplitude: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            density_amplitude: 0.1,
            density_bound: 2.0,
            momentum: MomentumShape::Bump,
            momentum_amplitude: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizationConfig {
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeConfig {
    pub final_time: f64,
    pub dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            final_time: 0.5,
            dt: 0.0125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol_fp: f64,
    pub max_iter: usize,
    pub form: ForcingForm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_fp: 1e-12,
            max_iter: 200,
            form: ForcingForm::Skew,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub enabled: bool,
    pub bounds_tol: f64,
    pub momentum_tol: f64,
    pub fenchel_tol: f64,
    pub audit_stride: usize,
    pub battery_random: usize,
    /// Store every `k`-th level; `verify` needs `1`.
    pub snapshot_every: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            bounds_tol: 1e-8,
            momentum_tol: 1e-8,
            fenchel_tol: 1e-6,
            audit_stride: 1,
            battery_random: 20,
            snapshot_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub domain: DomainConfig,
    pub space: SpaceConfig,
    pub viscosity: ViscosityConfig,
    pub pressure: PressureConfig,
    pub forcing: ForcingConfig,
    pub friction: FrictionConfig,
    pub initial: InitialConfig,
    pub regularization: RegularizationConfig,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            domain: DomainConfig::default(),
            space: SpaceConfig::default(),
            viscosity: ViscosityConfig::default(),
            pressure: PressureConfig::default(),
            forcing: ForcingConfig::default(),
            friction: FrictionConfig::default(),
            initial: InitialConfig::default(),
            regularization: RegularizationConfig::default(),
            time: TimeConfig::default(),
            solver: SolverConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// `(line, column)`, both 1-based, of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
    (line, col)
}

/// Deserialises a TOML document, reporting every unknown key.
pub fn from_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<(T, Vec<String>)> {
    let syntax = |e: toml::de::Error| {
        let at = e
            .span()
            .map(|s| {
                let (l, c) = line_column(text, s.start);
                format!("line {l}, column {c}: ")
            })
            .unwrap_or_default();
        Error::Config(vec![format!("{at}{}", e.message().trim())])
    };
    let de = toml::de::Deserializer::parse(text).map_err(syntax)?;
    let mut unknown = Vec::new();
    let value: T = serde_ignored::deserialize(de, |path| unknown.push(format!("{path}: unknown key")))
        .map_err(syntax)?;
    Ok((value, unknown))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let (config, mut errors): (RunConfig, _) = from_toml(text)?;
    errors.extend(config.violations());
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(Error::Config(errors))
    }
}

pub fn serialize_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("config is always representable in TOML")
}

impl RunConfig {
    /// Every constraint violation, keyed by path.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, path: &str, msg: String| {
            if !ok {
                v.push(format!("{path}: {msg}"));
            }
        };
        let d = &self.domain;
        check(d.lx > 0.0 && d.lx.is_finite(), "domain.lx", format!("must be positive, got {}", d.lx));
        for (name, val) in [("domain.nx", d.nx), ("domain.ny", d.ny), ("domain.nb", d.nb)] {
            check(val >= 4 && val % 2 == 0, name, format!("must be even and >= 4, got {val}"));
        }
        check(self.space.n >= 1, "space.n", "must be at least 1".into());

        let vc = &self.viscosity;
        check(vc.mu > 0.0, "viscosity.mu", format!("must be positive, got {}", vc.mu));
        match vc.kind {
            ViscosityKind::Newtonian => check(
                vc.mu / 2.0 + vc.lambda > 0.0,
                "viscosity.lambda",
                format!("must exceed -mu/2 for a convex potential, got {}", vc.lambda),
            ),
            ViscosityKind::Powerlaw => {
                check(vc.q > 1.0, "viscosity.q", format!("must exceed 1, got {}", vc.q));
                check(vc.lambda >= 0.0, "viscosity.lambda", format!("must be >= 0, got {}", vc.lambda));
            }
        }

        let p = &self.pressure;
        check(p.a > 0.0, "pressure.a", format!("must be positive, got {}", p.a));
        check(
            p.gamma > 1.0,
            "pressure.gamma",
            format!("must exceed 1 so that the pressure potential is coercive, got {}", p.gamma),
        );

        let f = &self.forcing;
        if f.kind == ForcingKind::Tabulated {
            match &f.table {
                None => check(false, "forcing.table", "required for the tabulated forcing".into()),
                Some(t) => {
                    check(t.nx >= 2 && t.ny >= 2, "forcing.table", "needs at least 2x2 entries".into());
                    check(
                        t.fx.len() == t.nx * t.ny && t.fy.len() == t.nx * t.ny,
                        "forcing.table",
                        format!("fx and fy must have nx*ny = {} entries", t.nx * t.ny),
                    );
                    check(
                        t.fx.iter().chain(&t.fy).all(|x| x.is_finite()),
                        "forcing.table",
                        "entries must be finite".into(),
                    );
                }
            }
        }
        for (name, val) in [("forcing.fx", f.fx), ("forcing.fy", f.fy), ("forcing.amplitude", f.amplitude), ("forcing.omega", f.omega)] {
            check(val.is_finite(), name, "must be finite".into());
        }

        let g = &self.friction;
        check(g.g >= 0.0, "friction.g", format!("slip threshold must be >= 0, got {}", g.g));
        match g.kind {
            ThresholdKind::Cosine => check(
                g.amplitude.abs() <= 1.0,
                "friction.amplitude",
                format!("must lie in [-1, 1] to keep the threshold non-negative, got {}", g.amplitude),
            ),
            ThresholdKind::Tabulated => {
                check(g.values.len() >= 2, "friction.values", "needs at least 2 samples".into());
                check(g.values.iter().all(|x| *x >= 0.0), "friction.values", "must be >= 0".into());
            }
            ThresholdKind::Constant => {}
        }

        let i = &self.initial;
        check(i.density_bound >= 1.0, "initial.density_bound", format!("must be >= 1, got {}", i.density_bound));
        let (lo, hi) = (1.0 - i.density_amplitude.abs(), 1.0 + i.density_amplitude.abs());
        check(
            lo > 0.0 && lo >= 1.0 / i.density_bound && hi <= i.density_bound,
            "initial.density_amplitude",
            format!("initial density range [{lo}, {hi}] must lie in [1/b, b] with b = {}", i.density_bound),
        );

        let r = &self.regularization;
        check(
            r.delta > 0.0 && r.delta <= 1.0,
            "regularization.delta",
            format!("the regularization requires delta in (0, 1], got {}", r.delta),
        );
        check(
            r.epsilon > 0.0 && r.epsilon <= 1.0,
            "regularization.epsilon",
            format!("the artificial viscosity requires epsilon in (0, 1], got {}", r.epsilon),
        );

        let t = &self.time;
        check(t.final_time > 0.0, "time.final_time", format!("must be positive, got {}", t.final_time));
        check(t.dt > 0.0, "time.dt", format!("must be positive, got {}", t.dt));
        if t.final_time > 0.0 && t.dt > 0.0 {
            let steps = (t.final_time / t.dt).round();
            check(
                steps >= 1.0 && (steps * t.dt - t.final_time).abs() <= 1e-9 * t.final_time,
                "time.dt",
                "final_time must be a whole number of steps".into(),
            );
        }

        let s = &self.solver;
        check(s.tol_fp > 0.0, "solver.tol_fp", format!("must be positive, got {}", s.tol_fp));
        check(s.max_iter >= 1, "solver.max_iter", "must be at least 1".into());

        let dg = &self.diagnostics;
        for (name, val) in [
            ("diagnostics.bounds_tol", dg.bounds_tol),
            ("diagnostics.momentum_tol", dg.momentum_tol),
            ("diagnostics.fenchel_tol", dg.fenchel_tol),
        ] {
            check(val > 0.0, name, format!("must be positive, got {val}"));
        }
        check(dg.audit_stride >= 1, "diagnostics.audit_stride", "must be at least 1".into());
        check(dg.snapshot_every >= 1, "diagnostics.snapshot_every", "must be at least 1".into());
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn domain(&self) -> Result<ChannelDomain> {
        ChannelDomain::new(self.domain.lx, self.domain.nx, self.domain.ny, self.domain.nb)
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let v = &self.viscosity;
        match v.kind {
            ViscosityKind::Newtonian => PotentialSpec::newtonian(v.mu, v.lambda, ChannelDomain::DIM),
            ViscosityKind::Powerlaw => PotentialSpec::power_law(v.mu, v.q, v.lambda, ChannelDomain::DIM),
        }
    }

    pub fn diagnostic_options(&self) -> DiagnosticOptions {
        let d = &self.diagnostics;
        DiagnosticOptions {
            bounds_tol: d.bounds_tol,
            momentum_tol: d.momentum_tol,
            fenchel_tol: d.fenchel_tol,
            audit_stride: d.audit_stride,
            battery_random: d.battery_random,
            seed: self.seed,
        }
    }

    pub fn initial_density(&self, x: f64, y: f64) -> f64 {
        1.0 + self.initial.density_amplitude * (2.0 * PI * x / self.domain.lx).cos() * (PI * y).cos()
    }

    pub fn initial_velocity(&self, x: f64, y: f64) -> Vec2 {
        let a = self.initial.momentum_amplitude;
        let lx = self.domain.lx;
        match self.initial.momentum {
            MomentumShape::Zero => [0.0, 0.0],
            MomentumShape::Shear => [a * (PI * y).cos(), 0.0],
            MomentumShape::Bump => {
                let r2 = (x - 0.5 * lx).powi(2) + (y - 0.5).powi(2);
                let b = (-r2 / 0.08).exp();
                [a * (0.5 + b), 0.5 * a * b * (PI * y).sin()]
            }
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        self.validate()?;
        let domain = self.domain()?;
        let space = GalerkinSpace::new(self.space.n, &domain)?;
        let delta = self.regularization.delta;
        let model = MomentumModel {
            potential: MollifiedPotential::new(self.potential()?, delta)?,
            pressure: PressureLaw::isentropic(self.pressure.a, self.pressure.gamma)?,
            friction: SmoothedAbsolute::new(delta)?,
            delta,
            epsilon: self.regularization.epsilon,
            form: self.solver.form,
        };
        let rho0 = DensityField::from_fn(&domain, |x, y| self.initial_density(x, y));
        let momentum0 = domain
            .volume_nodes()
            .iter()
            .zip(&rho0.values)
            .map(|(p, r)| {
                let u = self.initial_velocity(p[0], p[1]);
                [r * u[0], r * u[1]]
            })
            .collect();
        Ok(Problem {
            space,
            model,
            data: Arc::new(PresetData {
                forcing: self.forcing.clone(),
                friction: self.friction.clone(),
                lx: domain.lx,
                height: domain.height,
            }),
            rho0,
            momentum0,
            final_time: self.time.final_time,
            step: StepParams {
                dt: self.time.dt,
                tol_fp: self.solver.tol_fp,
                max_iter: self.solver.max_iter,
                density_bound: self.initial.density_bound,
            },
        })
    }
}

/// Forcing and slip threshold from the named presets.
#[derive(Debug, Clone)]
pub struct PresetData {
    pub forcing: ForcingConfig,
    pub friction: FrictionConfig,
    pub lx: f64,
    pub height: f64,
}

/// Periodic linear interpolation of equally spaced samples on `[0, period)`.
fn periodic_lerp(values: &[f64], x: f64, period: f64) -> f64 {
    let n = values.len();
    let s = (x / period).rem_euclid(1.0) * n as f64;
    let i = s.floor() as usize % n;
    let t = s - s.floor();
    (1.0 - t) * values[i] + t * values[(i + 1) % n]
}

/// Bilinear interpolation of a cell-centred table, periodic in `x`, clamped
/// in `y`.
fn table_lookup(t: &GridTable, v: &[f64], x: f64, y: f64, lx: f64, h: f64) -> f64 {
    let sx = (x / lx).rem_euclid(1.0) * t.nx as f64 - 0.5;
    let sy = (y / h * t.ny as f64 - 0.5).clamp(0.0, (t.ny - 1) as f64);
    let i0 = sx.floor();
    let tx = sx - i0;
    let i0 = (i0 as i64).rem_euclid(t.nx as i64) as usize;
    let i1 = (i0 + 1) % t.nx;
    let j0 = (sy.floor() as usize).min(t.ny - 1);
    let j1 = (j0 + 1).min(t.ny - 1);
    let ty = sy - j0 as f64;
    let at = |i: usize, j: usize| v[j * t.nx + i];
    (1.0 - ty) * ((1.0 - tx) * at(i0, j0) + tx * at(i1, j0)) + ty * ((1.0 - tx) * at(i0, j1) + tx * at(i1, j1))
}

impl ExternalData for PresetData {
    fn force(&self, t: f64, p: Vec2) -> Vec2 {
        let f = &self.forcing;
        let (x, y) = (p[0], p[1]);
        let kx = 2.0 * PI * x / self.lx;
        let ky = PI * y / self.height;
        match f.kind {
            ForcingKind::Zero => [0.0, 0.0],
            ForcingKind::Constant => [f.fx, f.fy],
            ForcingKind::TangentialShear => [f.amplitude * ky.cos(), 0.0],
            ForcingKind::SpaceTimeCosine => {
                let a = f.amplitude * (f.omega * t).cos();
                [a * kx.cos() * ky.cos(), a * kx.sin() * ky.sin()]
            }
            ForcingKind::Tabulated => {
                let tab = f.table.as_ref().expect("validated table");
                [
                    table_lookup(tab, &tab.fx, x, y, self.lx, self.height),
                    table_lookup(tab, &tab.fy, x, y, self.lx, self.height),
                ]
            }
        }
    }

    fn threshold(&self, _t: f64, p: Vec2) -> f64 {
        let g = &self.friction;
        match g.kind {
            ThresholdKind::Constant => g.g,
            ThresholdKind::Cosine => g.g * (1.0 + g.amplitude * (2.0 * PI * p[0] / self.lx).cos()),
            ThresholdKind::Tabulated => periodic_lerp(&g.values, p[0], self.lx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.forcing.kind = ForcingKind::Tabulated;
        c.forcing.table = Some(GridTable {
            nx: 2,
            ny: 2,
            fx: vec![0.1, 0.2, 0.3, 1.0 / 3.0],
            fy: vec![0.0; 4],
        });
        c.friction.kind = ThresholdKind::Tabulated;
        c.friction.values = vec![0.5, 0.25];
        c.time.dt = 0.1 / 3.0;
        c.time.final_time = 0.1;
        let text = serialize_config(&c);
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    #[test]
    fn gamma_one_is_rejected() {
        let e = parse_config("[pressure]\ngamma = 1.0\n").unwrap_err();
        let Error::Config(v) = e else { panic!() };
        assert!(v.iter().any(|m| m.starts_with("pressure.gamma")));
    }

    #[test]
    fn zero_delta_points_at_regularization() {
        let Error::Config(v) = parse_config("[regularization]\ndelta = 0.0\n").unwrap_err() else {
            panic!()
        };
        assert!(v.iter().any(|m| m.starts_with("regularization.delta") && m.contains("regularization")));
    }

    #[test]
    fn all_violations_are_collected() {
        let text = "bogus = 1\n[pressure]\ngamma = 0.5\n[regularization]\ndelta = 0.0\nepsilon = 2.0\n[domain]\nnx = 7\nwat = 3\n";
        let Error::Config(v) = parse_config(text).unwrap_err() else { panic!() };
        assert!(v.len() >= 6, "{v:?}");
        assert!(v.iter().any(|m| m.contains("domain.wat")));
        assert!(v.iter().any(|m| m.starts_with("bogus")));
    }

    #[test]
    fn syntax_error_has_position() {
        let Error::Config(v) = parse_config("[time]\ndt = = 3\n").unwrap_err() else { panic!() };
        assert!(v[0].starts_with("line 2, column"), "{v:?}");
    }

    #[test]
    fn presets_are_sampled() {
        let c = RunConfig::default();
        let p = c.build_problem().unwrap();
        let f = p.data.force(0.0, [0.0, 0.0]);
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert_eq!(p.data.threshold(0.3, [1.0, 0.0]), 0.5);
        let t = periodic_lerp(&[0.0, 1.0], 0.5, 2.0);
        assert!((t - 0.5).abs() < 1e-15);
    }
}
