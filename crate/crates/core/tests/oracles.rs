//! Quadrature of the Galerkin operators against 4x refined grids.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipflow::config::RunConfig;
use slipflow::geometry::{GalerkinSpace, Vec2};
use slipflow::momentum::{assemble_mass, DensitySamples, ForcingForm};

#[test]
fn mass_matrix_matches_refined_quadrature() {
    let mut c = RunConfig::default();
    c.space.n = 8;
    let problem = c.build_problem().unwrap();
    let coarse = &problem.space;
    let fine = GalerkinSpace::new(8, &coarse.domain.refined(4)).unwrap();
    let rho = |s: &GalerkinSpace| -> Vec<f64> {
        s.domain
            .volume_nodes()
            .iter()
            .map(|p| 1.0 + 0.5 * (PI * p[1] / s.domain.height).cos())
            .collect()
    };
    let a = assemble_mass(&rho(coarse), coarse).unwrap().matrix;
    let b = assemble_mass(&rho(&fine), &fine).unwrap().matrix;
    let diff = (a - b).abs().max();
    assert!(diff <= 1e-10, "{diff:e}");
}

#[test]
fn literal_forcing_matches_refined_quadrature() {
    let mut c = RunConfig::default();
    c.space.n = 8;
    c.solver.form = ForcingForm::Literal;
    let problem = c.build_problem().unwrap();
    let model = &problem.model;
    let coarse = &problem.space;
    let fine = GalerkinSpace::new(8, &coarse.domain.refined(4)).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut coeffs: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.3..0.3)).collect();
    // A dominant tangential mean keeps the wall speed clear of the smoothing radius.
    coeffs[0] = 2.0;
    let lx = coarse.domain.lx;
    let rho = |p: Vec2| 1.0 + 0.2 * (2.0 * PI * p[0] / lx).cos() * (PI * p[1]).cos();
    let grad = |p: Vec2| -> Vec2 {
        [
            -0.2 * 2.0 * PI / lx * (2.0 * PI * p[0] / lx).sin() * (PI * p[1]).cos(),
            -0.2 * PI * (2.0 * PI * p[0] / lx).cos() * (PI * p[1]).sin(),
        ]
    };
    let forcing = |s: &GalerkinSpace| -> Vec<f64> {
        let nodes = s.domain.volume_nodes();
        let ds = DensitySamples::analytic(&nodes, rho, grad, &model.pressure);
        let u = s.evaluate_on_grid(&coeffs).unwrap();
        let data = problem.data.sample(0.1, s);
        model.assemble_forcing(s, &ds, &coeffs, &u, &data).unwrap().total()
    };
    let (a, b) = (forcing(coarse), forcing(&fine));
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8, "{diff:e}");
}
