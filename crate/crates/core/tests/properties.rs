//! Property tests for the structural invariants of every module.

use proptest::prelude::*;

use slipflow::config::{parse_config, serialize_config, ForcingKind, MomentumShape, RunConfig, ThresholdKind};
use slipflow::constitutive::{grad_j_delta, j_delta, PotentialSpec, PressureLaw, SymTensor};
use slipflow::density::{ContinuityParams, DensityField, DensitySolver};
use slipflow::geometry::{ChannelDomain, GalerkinSpace, VelocitySamples};
use slipflow::limit_lab::{wasserstein1, StationMeasure};
use slipflow::momentum::assemble_mass;
use std::sync::OnceLock;

fn space() -> &'static GalerkinSpace {
    static SPACE: OnceLock<GalerkinSpace> = OnceLock::new();
    SPACE.get_or_init(|| {
        let d = ChannelDomain::new(2.0, 16, 16, 16).unwrap();
        GalerkinSpace::new(8, &d).unwrap()
    })
}

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![
        [-0.1f64..0.1, -0.1f64..0.1],
        [-10.0f64..10.0, -10.0f64..10.0],
    ]
}

fn tensor() -> impl Strategy<Value = SymTensor> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b, c)| SymTensor::new2(a, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn smoothed_absolute_bounds(v in vec2(), delta in 0.01f64..1.0) {
        let g = grad_j_delta(delta, v);
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        prop_assert!((g[0] * g[0] + g[1] * g[1]).sqrt() <= 1.0 + 1e-14);
        prop_assert!((j_delta(delta, &v) - n).abs() <= delta + 1e-14);
        prop_assert!(g[0] * v[0] + g[1] * v[1] >= -1e-14);
    }

    #[test]
    fn smoothed_absolute_supporting_line(v in vec2(), w in vec2(), delta in 0.01f64..1.0, g in 0.0f64..5.0) {
        let grad = grad_j_delta(delta, v);
        let lhs = g * (grad[0] * w[0] + grad[1] * w[1]);
        let rhs = g * j_delta(delta, &[v[0] + w[0], v[1] + w[1]]) - g * j_delta(delta, &v);
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn fenchel_young_inequality(d in tensor(), s in tensor(), mu in 0.05f64..2.0, lambda in 0.0f64..1.0) {
        let f = PotentialSpec::newtonian(mu, lambda, 2).unwrap();
        let gap = f.value(&d) + f.conjugate(&s).unwrap() - d.ddot(&s);
        prop_assert!(gap >= -1e-12);
    }

    #[test]
    fn pressure_second_differences(a in 0.1f64..5.0, gamma in 1.05f64..4.0, r in 0.01f64..5.0, h in 1e-3f64..0.1) {
        let p = PressureLaw::isentropic(a, gamma).unwrap();
        let second = p.pressure(r + h) - 2.0 * p.pressure(r) + p.pressure((r - h).max(0.0));
        prop_assert!(second >= -1e-12);
    }

    #[test]
    fn zero_normal_trace(coeffs in prop::collection::vec(-1.0f64..1.0, 8)) {
        let s = space();
        let tq = &s.trace_quadrature;
        let tr = s.trace_on_walls(&coeffs).unwrap();
        for (t, n) in tr.iter().zip(&tq.normals) {
            prop_assert!((t[0] * n[0] + t[1] * n[1]).abs() <= 1e-14);
        }
    }

    #[test]
    fn evaluation_is_deterministic(coeffs in prop::collection::vec(-1.0f64..1.0, 8)) {
        let s = space();
        let a = s.evaluate_on_grid(&coeffs).unwrap();
        let b = s.evaluate_on_grid(&coeffs).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn mass_matrix_spectrum_within_density_range(lo in 0.2f64..1.0, span in 0.0f64..2.0, seed in 0u64..1000) {
        let s = space();
        let hi = lo + span;
        let n = s.node_count();
        let rho: Vec<f64> = (0..n).map(|k| lo + span * (((k as u64 * 2654435761 + seed) % 1000) as f64 / 999.0)).collect();
        let (gmin, gmax) = assemble_mass(&vec![1.0; n], s).unwrap().spectrum_bounds();
        let (mmin, mmax) = assemble_mass(&rho, s).unwrap().spectrum_bounds();
        prop_assert!(mmin >= lo * gmin - 1e-12);
        prop_assert!(mmax <= hi * gmax + 1e-12);
    }

    #[test]
    fn density_step_conserves_mass(coeffs in prop::collection::vec(-1.0f64..1.0, 8), amp in 0.0f64..0.3) {
        let s = space();
        let d = &s.domain;
        let u = s.evaluate_on_grid(&coeffs).unwrap();
        let rho = DensityField::from_fn(d, |x, y| 1.0 + amp * (3.0 * x).sin() * (2.0 * y).cos());
        let params = ContinuityParams::new(0.05, 0.01, 2.0).unwrap();
        let next = DensitySolver::new(d).step_unchecked(&rho, &u, &params);
        let (m0, m1) = (rho.mass(d), next.mass(d));
        prop_assert!(((m1 - m0) / m0).abs() <= 1e-12);
    }

    #[test]
    fn tangential_flow_does_not_transport_layered_density(c in -2.0f64..2.0, amp in 0.0f64..0.5) {
        let d = &space().domain;
        let rho = DensityField::from_fn(d, |_, y| 1.0 + amp * (std::f64::consts::PI * y).cos());
        let mut u = VelocitySamples::zeros(d.node_count());
        u.values.iter_mut().for_each(|v| *v = [c, 0.0]);
        let params = ContinuityParams::new(0.05, 0.01, 2.0).unwrap();
        let solver = DensitySolver::new(d);
        let moved = solver.step_unchecked(&rho, &u, &params);
        let still = solver.step_unchecked(&rho, &VelocitySamples::zeros(d.node_count()), &params);
        for (a, b) in moved.values.iter().zip(&still.values) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn constants_are_fixed_points(coeffs in prop::collection::vec(-1.0f64..1.0, 8), level in 0.5f64..2.0) {
        let s = space();
        let d = &s.domain;
        let u = s.evaluate_on_grid(&coeffs).unwrap();
        let rho = DensityField::constant(d, level);
        let params = ContinuityParams::new(0.05, 0.01, 4.0).unwrap();
        let next = DensitySolver::new(d).step_unchecked(&rho, &VelocitySamples::zeros(d.node_count()), &params);
        for v in &next.values {
            prop_assert!((v - level).abs() <= 1e-12);
        }
        // Under flow a constant changes only through the velocity divergence.
        let moved = DensitySolver::new(d).step_unchecked(&rho, &u, &params);
        prop_assert!(((moved.mass(d) - rho.mass(d)) / rho.mass(d)).abs() <= 1e-12);
    }

    #[test]
    fn friction_work_is_nonnegative(coeffs in prop::collection::vec(-3.0f64..3.0, 8), g in 0.0f64..2.0, delta in 0.01f64..0.5) {
        let s = space();
        let tq = &s.trace_quadrature;
        let tr = s.trace_on_walls(&coeffs).unwrap();
        let work: f64 = tr.iter().zip(&tq.weights).map(|(u, w)| {
            let gr = grad_j_delta(delta, *u);
            w * g * (gr[0] * u[0] + gr[1] * u[1])
        }).sum();
        prop_assert!(work >= -1e-12);
    }

    #[test]
    fn friction_generator_inequality(
        coeffs in prop::collection::vec(-3.0f64..3.0, 8),
        phi in prop::collection::vec(-3.0f64..3.0, 8),
        g in 0.0f64..2.0,
        delta in 0.01f64..0.5,
    ) {
        let s = space();
        let tq = &s.trace_quadrature;
        let u = s.trace_on_walls(&coeffs).unwrap();
        let p = s.trace_on_walls(&phi).unwrap();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for k in 0..tq.len() {
            let gr = grad_j_delta(delta, u[k]);
            lhs -= tq.weights[k] * g * (gr[0] * p[k][0] + gr[1] * p[k][1]);
            rhs += tq.weights[k] * g * (j_delta(delta, &u[k]) - j_delta(delta, &[u[k][0] + p[k][0], u[k][1] + p[k][1]]));
        }
        prop_assert!(lhs >= rhs - 1e-12);
    }

    #[test]
    fn wasserstein_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        prop_assert_eq!(wasserstein1(&a, &a), 0.0);
        prop_assert!((wasserstein1(&a, &b) - wasserstein1(&b, &a)).abs() <= 1e-12);
    }

    #[test]
    fn station_measure_is_a_probability(z in prop::collection::vec(-5.0f64..5.0, 1..200)) {
        let m = StationMeasure::new(0, &z, -5.5, 5.5);
        prop_assert!(m.masses.iter().all(|&x| x >= 0.0));
        prop_assert!((m.total_mass() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip(
        seed in any::<u64>(),
        lx in 0.5f64..4.0,
        n in 1usize..20,
        mu in 0.01f64..2.0,
        gamma in 1.01f64..3.0,
        delta in 1e-3f64..1.0,
        eps in 1e-3f64..1.0,
        amp in -0.4f64..0.4,
        g in 0.0f64..3.0,
        forcing in 0usize..4,
        shape in 0usize..3,
        steps in 1usize..50,
        dt in 1e-4f64..0.1,
    ) {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.domain.lx = lx;
        c.space.n = n;
        c.viscosity.mu = mu;
        c.pressure.gamma = gamma;
        c.regularization.delta = delta;
        c.regularization.epsilon = eps;
        c.initial.density_amplitude = amp;
        c.friction.g = g;
        c.friction.kind = ThresholdKind::Cosine;
        c.friction.amplitude = amp;
        c.forcing.kind = [ForcingKind::Zero, ForcingKind::Constant, ForcingKind::TangentialShear, ForcingKind::SpaceTimeCosine][forcing];
        c.initial.momentum = [MomentumShape::Zero, MomentumShape::Bump, MomentumShape::Shear][shape];
        c.time.dt = dt;
        c.time.final_time = dt * steps as f64;
        let text = serialize_config(&c);
        match parse_config(&text) {
            Ok(back) => prop_assert_eq!(back, c),
            // Rounding of `steps * dt` may leave a fractional step count.
            Err(e) => prop_assert!(e.to_string().contains("time.dt"), "{e}"),
        }
    }
}
