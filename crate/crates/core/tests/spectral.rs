//! The Fourier-multiplier fractional Laplacian, the quotient J and ⟨·,·⟩_ε.

use std::f64::consts::PI;

use fkl_core::spectral::{apply_frac_laplacian, eps_inner, eps_norm, gagliardo_energy, gns_quotient, EpsInnerProduct};
use fkl_core::{integrate, make_grid, Exterior, Field, FracOperator, Grid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smooth_random(rng: &mut ChaCha8Rng, g: Grid) -> Field {
    let terms: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-4.0..4.0), rng.gen_range(0.6..2.5)))
        .collect();
    Field::from_fn(g, |[x, y]| {
        terms
            .iter()
            .map(|(a, c, w)| a * (-((x - c).powi(2) + (y - 0.5 * c).powi(2)) / (w * w)).exp())
            .sum()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn on_grid_cosine_is_an_eigenfunction() {
    let g = make_grid(1, 20.0, 256).unwrap();
    let k0 = 7.0 * PI / 20.0;
    for s in [0.3, 0.5, 0.75] {
        let op = FracOperator::periodic(g, s).unwrap();
        let f = Field::from_fn(g, |[x, _]| (k0 * x).cos());
        let out = apply_frac_laplacian(&op, &f).unwrap();
        assert!(out.sub(&f.scaled(k0.powf(2.0 * s))).unwrap().linf_norm() < 1e-12);
        let e = gagliardo_energy(&op, &f).unwrap();
        assert!(rel(e, k0.powf(2.0 * s) * f.l2_norm().powi(2)) < 1e-12);
    }
}

#[test]
fn order_one_on_sine_is_the_identity() {
    let g = make_grid(1, 3.0 * PI, 128).unwrap();
    let op = FracOperator::periodic(g, 1.0).unwrap();
    let f = Field::from_fn(g, |[x, _]| x.sin());
    assert!(op.apply(&f).unwrap().sub(&f).unwrap().linf_norm() < 1e-12);
}

#[test]
fn zero_field_has_zero_energy() {
    let g = make_grid(2, 5.0, 32).unwrap();
    let op = FracOperator::periodic(g, 0.6).unwrap();
    assert_eq!(gagliardo_energy(&op, &Field::zeros(g)).unwrap(), 0.0);
}

#[test]
fn half_laplacian_of_the_lorentzian() {
    // (-Δ)^{1/2} [2/(1+x²)] = 2(1-x²)/(1+x²)², checked on the inner half.
    let g = make_grid(1, 200.0, 8192).unwrap();
    let op = FracOperator::new(g, 0.5, Exterior::ZeroPadded(8)).unwrap();
    let q = Field::from_fn(g, |[x, _]| 2.0 / (1.0 + x * x));
    let out = op.apply(&q).unwrap();
    let err = (0..g.total_points())
        .filter(|&i| g.coord(i).abs() <= 100.0)
        .map(|i| {
            let x = g.coord(i);
            (out.samples()[i] - 2.0 * (1.0 - x * x) / (1.0 + x * x).powi(2)).abs()
        })
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "interior error {err:e}");
}

#[test]
fn plancherel_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (dim, ext) in [(1, Exterior::Periodic), (1, Exterior::ZeroPadded(4)), (2, Exterior::ZeroPadded(2))] {
        let g = make_grid(dim, 12.0, if dim == 1 { 256 } else { 64 }).unwrap();
        let op = FracOperator::new(g, 0.7, ext).unwrap();
        let f = op.masked(&smooth_random(&mut rng, g));
        let e = gagliardo_energy(&op, &f).unwrap();
        let direct = integrate(&f.mul(&op.apply(&f).unwrap()).unwrap());
        assert!(rel(e, direct) < 1e-10, "{ext:?}: {e} vs {direct}");
    }
}

#[test]
fn operator_is_self_adjoint_and_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = make_grid(1, 15.0, 512).unwrap();
    let op = FracOperator::new(g, 0.6, Exterior::ZeroPadded(8)).unwrap();
    for _ in 0..10 {
        let f = op.masked(&smooth_random(&mut rng, g));
        let h = op.masked(&smooth_random(&mut rng, g));
        let a = integrate(&h.mul(&op.apply(&f).unwrap()).unwrap());
        let b = integrate(&f.mul(&op.apply(&h).unwrap()).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-3));
        let lin = op.apply(&f.scaled(2.5).add_scaled(-0.5, &h).unwrap()).unwrap();
        let sep = op.apply(&f).unwrap().scaled(2.5).add_scaled(-0.5, &op.apply(&h).unwrap()).unwrap();
        assert!(lin.sub(&sep).unwrap().linf_norm() <= 1e-12 * sep.linf_norm());
    }
}

#[test]
fn composition_squares_the_multiplier() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = make_grid(2, 8.0, 64).unwrap();
    let op = FracOperator::periodic(g, 0.35).unwrap();
    let f = smooth_random(&mut rng, g);
    let twice = op.apply(&op.apply(&f).unwrap()).unwrap();
    let once = op.apply_power(&f, 0.7).unwrap();
    assert!(twice.sub(&once).unwrap().linf_norm() <= 1e-12 * once.linf_norm().max(1.0));
}

#[test]
fn order_near_one_approaches_the_laplacian() {
    let g = make_grid(1, 20.0, 512).unwrap();
    let f = Field::from_fn(g, |[x, _]| (-(x * x) / 2.0).exp());
    let near = FracOperator::periodic(g, 0.999).unwrap().apply(&f).unwrap();
    let exact = FracOperator::periodic(g, 1.0).unwrap().apply(&f).unwrap();
    let second = op_second_derivative(&f);
    assert!(exact.sub(&second).unwrap().l2_norm() < 1e-8 * second.l2_norm());
    assert!(near.sub(&exact).unwrap().l2_norm() <= 0.01 * exact.l2_norm());
}

/// `-f''` of the Gaussian `exp(-x²/2)` in closed form.
fn op_second_derivative(f: &Field) -> Field {
    Field::from_fn(*f.grid(), |[x, _]| (1.0 - x * x) * (-(x * x) / 2.0).exp())
}

#[test]
fn quotient_is_scale_and_dilation_invariant() {
    let g = make_grid(1, 40.0, 2048).unwrap();
    let op = FracOperator::new(g, 0.75, Exterior::ZeroPadded(8)).unwrap();
    let f = Field::from_fn(g, |[x, _]| 1.0 / (1.0 + x * x).powf(1.25));
    let j = gns_quotient(&op, &f, 2.0).unwrap();
    let j_scaled = gns_quotient(&op, &f.scaled(3.7), 2.0).unwrap();
    assert!(rel(j, j_scaled) < 1e-10);
    let dilated = Field::from_fn(g, |[x, _]| 1.0 / (1.0 + 4.0 * x * x).powf(1.25));
    let j_dilated = gns_quotient(&op, &dilated, 2.0).unwrap();
    assert!(rel(j, j_dilated) < 1e-3, "{j} vs {j_dilated}");
    assert!(j > 0.0);
    assert!(gns_quotient(&op, &Field::zeros(g), 2.0).is_err());
}

#[test]
fn eps_inner_reduces_to_the_hs_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = make_grid(1, 15.0, 256).unwrap();
    let op = FracOperator::periodic(g, 0.6).unwrap();
    let ip = EpsInnerProduct::new(1.0, 1.0, op.clone(), Field::constant(g, 1.0)).unwrap();
    let u = smooth_random(&mut rng, g);
    let expect = gagliardo_energy(&op, &u).unwrap() + u.l2_norm().powi(2);
    assert!(rel(eps_inner(&ip, &u, &u).unwrap(), expect) < 1e-12);
    assert_eq!(eps_norm(&ip, &Field::zeros(g)).unwrap(), 0.0);
}

#[test]
fn eps_inner_rejects_nonpositive_potential() {
    let g = make_grid(1, 5.0, 32).unwrap();
    let op = FracOperator::periodic(g, 0.6).unwrap();
    let v = Field::from_fn(g, |[x, _]| x);
    assert!(EpsInnerProduct::new(0.1, 1.0, op, v).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eps_inner_is_symmetric_and_cauchy_schwarz(seed in any::<u64>(), eps in 0.05f64..1.0, a in 0.2f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = make_grid(1, 10.0, 128).unwrap();
        let op = FracOperator::new(g, 0.7, Exterior::ZeroPadded(2)).unwrap();
        let v = Field::from_fn(g, |[x, _]| 1.0 + 0.5 * (x * 0.3).sin().powi(2));
        let ip = EpsInnerProduct::new(eps, a, op, v).unwrap();
        let u = smooth_random(&mut rng, g);
        let w = smooth_random(&mut rng, g);
        let uw = eps_inner(&ip, &u, &w).unwrap();
        prop_assert_eq!(uw, eps_inner(&ip, &w, &u).unwrap());
        let nu = eps_norm(&ip, &u).unwrap();
        let nw = eps_norm(&ip, &w).unwrap();
        prop_assert!(uw * uw <= nu * nu * nw * nw * (1.0 + 1e-12));
        prop_assert!(nu >= u.l2_norm() * (1.0 - 1e-12));
    }
}
