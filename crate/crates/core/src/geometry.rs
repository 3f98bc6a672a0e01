//! Periodic channel geometry, Galerkin velocity spaces and quadrature.
//!
//! The domain is the slab `[0, Lx) x [0, H]`, periodic in `x`, with solid
//! walls at `y = 0` and `y = H`. Volume quadrature uses the cell-centred
//! midpoint rule on an `Nx x Ny` grid; boundary integrals use `Nb` midpoint
//! stations per wall.
//!
//! Velocity modes are trigonometric. Tangentially polarised modes carry a
//! `cos(k pi y / H)` wall profile and wall-normal modes a `sin(k pi y / H)`
//! profile, so every mode has an identically zero normal trace.
//!
//! The grid also carries the central difference operators used by the density
//! solver. Scalars are reflected evenly across the walls and `y`-components of
//! vectors oddly, which makes the operators skew-adjoint under the midpoint
//! quadrature (summation by parts holds exactly).

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D vector.
pub type Vec2 = [f64; 2];
/// 2x2 matrix with `m[i][j] = d u_i / d x_j` when used as a velocity gradient.
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDomain {
    pub lx: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub nb: usize,
}

impl ChannelDomain {
    pub const DIM: usize = 2;

    pub fn new(lx: f64, nx: usize, ny: usize, nb: usize) -> Result<Self> {
        let domain = Self {
            lx,
            height: 1.0,
            nx,
            ny,
            nb,
        };
        domain.validate()?;
        Ok(domain)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.lx.is_finite()) {
            return Err(Error::Domain(format!("Lx must be positive, got {}", self.lx)));
        }
        if self.height != 1.0 {
            return Err(Error::Domain(format!("H is fixed to 1, got {}", self.height)));
        }
        for (name, v) in [("Nx", self.nx), ("Ny", self.ny), ("Nb", self.nb)] {
            if v < 4 || v % 2 != 0 {
                return Err(Error::Domain(format!("{name} must be even and >= 4, got {v}")));
            }
        }
        Ok(())
    }

    /// The same domain with every grid resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nx: self.nx * factor,
            ny: self.ny * factor,
            nb: self.nb * factor,
            ..*self
        }
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.height
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        [(i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    /// Cell-centred volume quadrature nodes in row-major (`y` outer) order.
    pub fn volume_nodes(&self) -> Vec<Vec2> {
        let mut nodes = Vec::with_capacity(self.node_count());
        for j in 0..self.ny {
            for i in 0..self.nx {
                nodes.push(self.node(i, j));
            }
        }
        nodes
    }

    /// Midpoint-rule integral of a nodal field.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_area()
    }

    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.volume_nodes().iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Central gradient of a scalar that is even across the walls.
    /// The returned `y` component is odd across the walls.
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let (ax, ay) = (0.5 / self.hx(), 0.5 / self.hy());
        let mut gx = vec![0.0; f.len()];
        let mut gy = vec![0.0; f.len()];
        for j in 0..ny {
            let jm = if j == 0 { 0 } else { j - 1 };
            let jp = if j + 1 == ny { ny - 1 } else { j + 1 };
            for i in 0..nx {
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                let k = j * nx + i;
                gx[k] = ax * (f[j * nx + ip] - f[j * nx + im]);
                gy[k] = ay * (f[jp * nx + i] - f[jm * nx + i]);
            }
        }
        (gx, gy)
    }

    /// Central divergence of a vector field whose `y` component is odd
    /// across the walls (zero normal flux).
    pub fn divergence(&self, fx: &[f64], fy: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let (ax, ay) = (0.5 / self.hx(), 0.5 / self.hy());
        let mut out = vec![0.0; fx.len()];
        for j in 0..ny {
            for i in 0..nx {
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                let k = j * nx + i;
                let up = if j + 1 == ny { -fy[k] } else { fy[k + nx] };
                let down = if j == 0 { -fy[k] } else { fy[k - nx] };
                out[k] = ax * (fx[j * nx + ip] - fx[j * nx + im]) + ay * (up - down);
            }
        }
        out
    }

    /// Wide-stencil Laplacian `div(grad f)` with homogeneous Neumann walls.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let (gx, gy) = self.gradient(f);
        self.divergence(&gx, &gy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    Tangential,
    Normal,
}

/// One trigonometric velocity mode.
///
/// `kx >= 0` selects `cos(2 pi kx x / Lx)`, `kx < 0` selects
/// `sin(2 pi |kx| x / Lx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub kx: i32,
    pub ky: u32,
    pub polarization: Polarization,
}

impl Mode {
    /// Squared wavenumber magnitude divided by `pi^2`.
    pub fn wavenumber_sq(&self, domain: &ChannelDomain) -> f64 {
        let a = 2.0 * self.kx as f64 / domain.lx;
        let b = self.ky as f64 / domain.height;
        a * a + b * b
    }

    fn x_profile(&self, x: f64, lx: f64) -> (f64, f64) {
        if self.kx == 0 {
            return (1.0, 0.0);
        }
        let w = 2.0 * PI * self.kx.unsigned_abs() as f64 / lx;
        if self.kx > 0 {
            (SQRT_2 * (w * x).cos(), -SQRT_2 * w * (w * x).sin())
        } else {
            (SQRT_2 * (w * x).sin(), SQRT_2 * w * (w * x).cos())
        }
    }

    fn y_profile(&self, y: f64, h: f64) -> (f64, f64) {
        let w = PI * self.ky as f64 / h;
        match self.polarization {
            Polarization::Tangential if self.ky == 0 => (1.0, 0.0),
            Polarization::Tangential => (SQRT_2 * (w * y).cos(), -SQRT_2 * w * (w * y).sin()),
            Polarization::Normal => (SQRT_2 * (w * y).sin(), SQRT_2 * w * (w * y).cos()),
        }
    }

    /// Closed-form value and gradient at `(x, y)`, L2-normalised on the domain.
    pub fn eval(&self, p: Vec2, domain: &ChannelDomain) -> (Vec2, Mat2) {
        let c = 1.0 / domain.area().sqrt();
        let (xv, xd) = self.x_profile(p[0], domain.lx);
        let (yv, yd) = self.y_profile(p[1], domain.height);
        let s = c * xv * yv;
        let sx = c * xd * yv;
        let sy = c * xv * yd;
        match self.polarization {
            Polarization::Tangential => ([s, 0.0], [[sx, sy], [0.0, 0.0]]),
            Polarization::Normal => ([0.0, s], [[0.0, 0.0], [sx, sy]]),
        }
    }
}

/// Enumerates the first `n` modes ordered by `(|k|, kx, polarization)`.
pub fn enumerate_modes(n: usize, domain: &ChannelDomain) -> Vec<Mode> {
    let mut kmax = 1i32;
    loop {
        let mut modes = Vec::new();
        for kx in -kmax..=kmax {
            for ky in 0..=kmax as u32 {
                modes.push(Mode {
                    kx,
                    ky,
                    polarization: Polarization::Tangential,
                });
                if ky > 0 {
                    modes.push(Mode {
                        kx,
                        ky,
                        polarization: Polarization::Normal,
                    });
                }
            }
        }
        // Rounded key so that equal shells tie exactly for any Lx.
        let key = |m: &Mode| (m.wavenumber_sq(domain) * 1e9).round() as i64;
        modes.sort_by(|a, b| {
            key(a)
                .cmp(&key(b))
                .then(a.kx.cmp(&b.kx))
                .then(a.polarization.cmp(&b.polarization))
        });
        if modes.len() >= n {
            let cutoff = modes[n - 1].wavenumber_sq(domain);
            let next_x = (2.0 * (kmax + 1) as f64 / domain.lx).powi(2);
            let next_y = ((kmax + 1) as f64 / domain.height).powi(2);
            if cutoff < next_x.min(next_y) {
                modes.truncate(n);
                return modes;
            }
        }
        kmax *= 2;
    }
}

/// Velocity samples on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySamples {
    pub values: Vec<Vec2>,
    pub gradients: Vec<Mat2>,
}

impl VelocitySamples {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![[0.0; 2]; len],
            gradients: vec![[[0.0; 2]; 2]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn divergence(&self, k: usize) -> f64 {
        let g = &self.gradients[k];
        g[0][0] + g[1][1]
    }

    /// Symmetric gradient `Du = (grad u + grad u^T) / 2` as `[d11, d22, d12]`.
    pub fn sym_grad(&self, k: usize) -> [f64; 3] {
        let g = &self.gradients[k];
        [g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0])]
    }
}

/// Boundary trace quadrature on the two walls.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceQuadrature {
    pub nodes: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
}

impl TraceQuadrature {
    /// `Nb` midpoint stations on `y = 0` followed by `Nb` on `y = H`.
    pub fn new(domain: &ChannelDomain) -> Self {
        let nb = domain.nb;
        let h = domain.lx / nb as f64;
        let mut tq = Self {
            nodes: Vec::with_capacity(2 * nb),
            weights: Vec::with_capacity(2 * nb),
            normals: Vec::with_capacity(2 * nb),
            tangents: Vec::with_capacity(2 * nb),
        };
        for (y, ny) in [(0.0, -1.0), (domain.height, 1.0)] {
            for k in 0..nb {
                tq.nodes.push([(k as f64 + 0.5) * h, y]);
                tq.weights.push(h);
                tq.normals.push([0.0, ny]);
                tq.tangents.push([1.0, 0.0]);
            }
        }
        tq
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}

/// The `n`-dimensional Galerkin velocity space on a channel grid.
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    pub domain: ChannelDomain,
    pub modes: Vec<Mode>,
    /// L2 Gram matrix computed by volume quadrature.
    pub gram: DMatrix<f64>,
    /// Mode values/gradients at volume nodes, `mode * N + node`.
    values: Vec<Vec2>,
    gradients: Vec<Mat2>,
    /// Mode values at the domain's own trace stations, `mode * 2Nb + station`.
    trace: Vec<Vec2>,
    pub trace_quadrature: TraceQuadrature,
}

pub fn build_space(n: usize, domain: &ChannelDomain) -> Result<GalerkinSpace> {
    GalerkinSpace::new(n, domain)
}

impl GalerkinSpace {
    pub fn new(n: usize, domain: &ChannelDomain) -> Result<Self> {
        domain.validate()?;
        if n == 0 {
            return Err(Error::param("n", "space dimension must be at least 1"));
        }
        let modes = enumerate_modes(n, domain);
        let kx_max = modes.iter().map(|m| m.kx.unsigned_abs() as usize).max().unwrap_or(0);
        let ky_max = modes.iter().map(|m| m.ky as usize).max().unwrap_or(0);
        if 2 * kx_max >= domain.nx || ky_max >= domain.ny {
            return Err(Error::Resolution {
                requested: n,
                nx: domain.nx,
                ny: domain.ny,
                reason: format!(
                    "modes reach kx = {kx_max}, ky = {ky_max}; products are integrated exactly only if 2*kx < Nx and ky < Ny"
                ),
            });
        }

        let nodes = domain.volume_nodes();
        let npts = nodes.len();
        let mut values = Vec::with_capacity(n * npts);
        let mut gradients = Vec::with_capacity(n * npts);
        for mode in &modes {
            for p in &nodes {
                let (v, g) = mode.eval(*p, domain);
                values.push(v);
                gradients.push(g);
            }
        }
        let trace_quadrature = TraceQuadrature::new(domain);
        let mut trace = Vec::with_capacity(n * trace_quadrature.len());
        for mode in &modes {
            for p in &trace_quadrature.nodes {
                trace.push(mode.eval(*p, domain).0);
            }
        }

        let w = domain.cell_area();
        let mut gram = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let va = &values[a * npts..(a + 1) * npts];
                let vb = &values[b * npts..(b + 1) * npts];
                let s: f64 = va
                    .iter()
                    .zip(vb)
                    .map(|(x, y)| x[0] * y[0] + x[1] * y[1])
                    .sum();
                gram[(a, b)] = s * w;
                gram[(b, a)] = s * w;
            }
        }

        Ok(Self {
            domain: *domain,
            modes,
            gram,
            values,
            gradients,
            trace,
            trace_quadrature,
        })
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn node_count(&self) -> usize {
        self.domain.node_count()
    }

    /// Value of mode `i` at volume node `k`.
    #[inline]
    pub fn mode_value(&self, i: usize, k: usize) -> Vec2 {
        self.values[i * self.node_count() + k]
    }

    #[inline]
    pub fn mode_gradient(&self, i: usize, k: usize) -> Mat2 {
        self.gradients[i * self.node_count() + k]
    }

    #[inline]
    pub fn mode_trace(&self, i: usize, s: usize) -> Vec2 {
        self.trace[i * self.trace_quadrature.len() + s]
    }

    /// Inverse Cholesky factor `L^{-1}` of the Gram matrix; `L^{-1} G L^{-T} = I`.
    pub fn orthonormalizer(&self) -> Result<DMatrix<f64>> {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or(Error::MassMatrix { min_eigenvalue: f64::NAN })?;
        let l = chol.l();
        l.try_inverse()
            .ok_or(Error::MassMatrix { min_eigenvalue: 0.0 })
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        Ok(())
    }

    /// Velocity samples at the volume grid nodes.
    pub fn evaluate_on_grid(&self, coeffs: &[f64]) -> Result<VelocitySamples> {
        self.check_len(coeffs)?;
        let npts = self.node_count();
        let mut out = VelocitySamples::zeros(npts);
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let vs = &self.values[i * npts..(i + 1) * npts];
            let gs = &self.gradients[i * npts..(i + 1) * npts];
            for k in 0..npts {
                let (v, g) = (vs[k], gs[k]);
                let ov = &mut out.values[k];
                ov[0] += c * v[0];
                ov[1] += c * v[1];
                let og = &mut out.gradients[k];
                og[0][0] += c * g[0][0];
                og[0][1] += c * g[0][1];
                og[1][0] += c * g[1][0];
                og[1][1] += c * g[1][1];
            }
        }
        Ok(out)
    }

    /// Velocity samples at arbitrary points from the closed-form modes.
    pub fn evaluate_velocity(&self, coeffs: &[f64], points: &[Vec2]) -> Result<VelocitySamples> {
        self.check_len(coeffs)?;
        let mut out = VelocitySamples::zeros(points.len());
        for (k, p) in points.iter().enumerate() {
            for (mode, &c) in self.modes.iter().zip(coeffs) {
                let (v, g) = mode.eval(*p, &self.domain);
                out.values[k][0] += c * v[0];
                out.values[k][1] += c * v[1];
                for a in 0..2 {
                    for b in 0..2 {
                        out.gradients[k][a][b] += c * g[a][b];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Tangential velocity trace at the space's own wall stations.
    pub fn trace_on_walls(&self, coeffs: &[f64]) -> Result<Vec<Vec2>> {
        self.check_len(coeffs)?;
        let ns = self.trace_quadrature.len();
        let mut out = vec![[0.0; 2]; ns];
        for (i, &c) in coeffs.iter().enumerate() {
            for (s, o) in out.iter_mut().enumerate() {
                let v = self.mode_trace(i, s);
                o[0] += c * v[0];
                o[1] += c * v[1];
            }
        }
        Ok(out)
    }

    /// Tangential trace `u - (u.n) n` at the stations of `tq`.
    pub fn boundary_trace(&self, coeffs: &[f64], tq: &TraceQuadrature) -> Result<Vec<Vec2>> {
        let samples = self.evaluate_velocity(coeffs, &tq.nodes)?;
        Ok(samples
            .values
            .iter()
            .zip(&tq.normals)
            .map(|(u, n)| {
                let un = u[0] * n[0] + u[1] * n[1];
                [u[0] - un * n[0], u[1] - un * n[1]]
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn domain() -> ChannelDomain {
        ChannelDomain::new(2.0, 16, 16, 16).unwrap()
    }

    #[test]
    fn rejects_odd_or_small_grids() {
        assert!(ChannelDomain::new(2.0, 15, 16, 16).is_err());
        assert!(ChannelDomain::new(2.0, 16, 2, 16).is_err());
        assert!(ChannelDomain::new(0.0, 16, 16, 16).is_err());
    }

    #[test]
    fn first_mode_is_constant_tangential() {
        let d = domain();
        let space = build_space(1, &d).unwrap();
        let m = space.modes[0];
        assert_eq!((m.kx, m.ky, m.polarization), (0, 0, Polarization::Tangential));
        let (v, g) = m.eval([0.3, 0.0], &d);
        assert_eq!(v[1], 0.0);
        assert!(v[0] > 0.0);
        assert_eq!(g, [[0.0; 2]; 2]);
    }

    #[test]
    fn enumeration_is_nested_and_ordered() {
        let d = domain();
        let m8 = enumerate_modes(8, &d);
        let m16 = enumerate_modes(16, &d);
        assert_eq!(&m16[..8], &m8[..]);
        for w in m16.windows(2) {
            assert!(w[0].wavenumber_sq(&d) <= w[1].wavenumber_sq(&d) + 1e-12);
        }
        // Shell |k| = pi on the Lx = 2 channel.
        let shell: Vec<_> = m8[1..5].iter().map(|m| (m.kx, m.ky, m.polarization)).collect();
        assert_eq!(
            shell,
            vec![
                (-1, 0, Polarization::Tangential),
                (0, 1, Polarization::Tangential),
                (0, 1, Polarization::Normal),
                (1, 0, Polarization::Tangential)
            ]
        );
    }

    #[test]
    fn refuses_unresolvable_space() {
        let d = ChannelDomain::new(2.0, 4, 4, 4).unwrap();
        let err = build_space(16, &d).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }), "{err}");
    }

    #[test]
    fn orthonormalized_gram_is_identity_against_refined_quadrature() {
        let d = domain();
        let space = build_space(8, &d).unwrap();
        let fine = build_space(8, &d.refined(4)).unwrap();
        let linv = space.orthonormalizer().unwrap();
        let ident = &linv * &fine.gram * linv.transpose();
        let dev = (ident - DMatrix::<f64>::identity(8, 8)).abs().max();
        assert!(dev <= 1e-12, "deviation {dev}");
    }

    #[test]
    fn zero_normal_trace_for_every_mode() {
        let d = domain();
        let space = build_space(32, &ChannelDomain::new(2.0, 32, 32, 32).unwrap()).unwrap();
        let tq = TraceQuadrature::new(&d);
        for m in &space.modes {
            for (p, n) in tq.nodes.iter().zip(&tq.normals) {
                let (v, _) = m.eval(*p, &d);
                assert!((v[0] * n[0] + v[1] * n[1]).abs() <= 1e-14, "{m:?}");
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let d = domain();
        let space = build_space(21, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for m in &space.modes {
            for _ in 0..100 {
                let p = [rng.gen_range(0.0..d.lx), rng.gen_range(0.05..0.95)];
                let (_, g) = m.eval(p, &d);
                for b in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[b] += h;
                    pm[b] -= h;
                    let (vp, _) = m.eval(pp, &d);
                    let (vm, _) = m.eval(pm, &d);
                    for a in 0..2 {
                        let fd = (vp[a] - vm[a]) / (2.0 * h);
                        let scale = g[a][b].abs().max(1.0);
                        assert!((fd - g[a][b]).abs() / scale <= 1e-6, "{m:?} {p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_coefficients_give_zero_samples() {
        let space = build_space(8, &domain()).unwrap();
        let s = space.evaluate_on_grid(&[0.0; 8]).unwrap();
        assert!(s.values.iter().all(|v| *v == [0.0, 0.0]));
        let tr = space.boundary_trace(&[0.0; 8], &space.trace_quadrature).unwrap();
        assert!(tr.iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn single_mode_reproduces_closed_form() {
        let d = domain();
        let space = build_space(8, &d).unwrap();
        let mut c = vec![0.0; 8];
        c[5] = 1.0;
        let pts = d.volume_nodes();
        let s = space.evaluate_velocity(&c, &pts).unwrap();
        for (k, p) in pts.iter().enumerate() {
            let (v, g) = space.modes[5].eval(*p, &d);
            assert_eq!(s.values[k], v);
            assert_eq!(s.gradients[k], g);
        }
    }

    #[test]
    fn divergence_matches_gradient_trace() {
        let d = domain();
        let space = build_space(16, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = space.evaluate_on_grid(&c).unwrap();
        for k in 0..s.len() {
            // analytic divergence from the closed forms
            let p = d.volume_nodes()[k];
            let div: f64 = space
                .modes
                .iter()
                .zip(&c)
                .map(|(m, ci)| {
                    let (_, g) = m.eval(p, &d);
                    ci * (g[0][0] + g[1][1])
                })
                .sum();
            assert!((div - s.divergence(k)).abs() <= 1e-12);
            let du = s.sym_grad(k);
            let g = s.gradients[k];
            assert_eq!(du[2], 0.5 * (g[0][1] + g[1][0]));
        }
    }

    #[test]
    fn constant_mode_trace_is_constant() {
        let d = domain();
        let space = build_space(4, &d).unwrap();
        let c = [0.7, 0.0, 0.0, 0.0];
        let tr = space.boundary_trace(&c, &space.trace_quadrature).unwrap();
        let expect = 0.7 / d.area().sqrt();
        for v in tr {
            assert!((v[0] - expect).abs() < 1e-15);
            assert_eq!(v[1], 0.0);
        }
    }

    #[test]
    fn trace_integral_matches_refined_quadrature() {
        let d = ChannelDomain::new(2.0, 16, 16, 32).unwrap();
        let space = build_space(16, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // A dominant mean flow keeps u_tau away from zero so |u_tau| is smooth.
        let mut c: Vec<f64> = (0..16).map(|_| rng.gen_range(-0.05..0.05)).collect();
        c[0] = 2.0;
        let tq = TraceQuadrature::new(&d);
        let tq4 = TraceQuadrature::new(&d.refined(4));
        let norm = |tr: Vec<Vec2>, tq: &TraceQuadrature| {
            let f: Vec<f64> = tr.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()).collect();
            tq.integrate(&f)
        };
        let coarse = norm(space.boundary_trace(&c, &tq).unwrap(), &tq);
        let fine = norm(space.boundary_trace(&c, &tq4).unwrap(), &tq4);
        assert!(((coarse - fine) / fine).abs() <= 1e-8);
        let grid_trace = space.trace_on_walls(&c).unwrap();
        let direct = space.boundary_trace(&c, &tq).unwrap();
        for (a, b) in grid_trace.iter().zip(&direct) {
            assert!((a[0] - b[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_weights_sum_to_wall_length() {
        let d = ChannelDomain::new(3.0, 8, 8, 12).unwrap();
        let tq = TraceQuadrature::new(&d);
        let total: f64 = tq.weights.iter().sum();
        assert!((total - 2.0 * d.lx).abs() <= 1e-12);
    }

    #[test]
    fn basis_products_integrate_exactly() {
        let d = ChannelDomain::new(2.0, 16, 16, 16).unwrap();
        let space = build_space(21, &d).unwrap();
        let dev = (&space.gram - DMatrix::<f64>::identity(21, 21)).abs().max();
        assert!(dev <= 1e-12, "{dev}");
    }

    #[test]
    fn difference_operators_sum_by_parts() {
        let d = ChannelDomain::new(2.0, 8, 10, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = d.node_count();
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fx: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fy: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let div = d.divergence(&fx, &fy);
        let (gx, gy) = d.gradient(&a);
        let lhs: f64 = a.iter().zip(&div).map(|(x, y)| x * y).sum();
        let rhs: f64 = -(0..n).map(|k| gx[k] * fx[k] + gy[k] * fy[k]).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(div.iter().sum::<f64>().abs() < 1e-12);
    }
}
