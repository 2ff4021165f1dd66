//! The semiclassical reduction: energy pieces, projection, corrector and the
//! reduced functional.

use std::sync::OnceLock;

use fkl_core::ground_state::{solve_q, BaseParams, SolveOptions};
use fkl_core::scaling::{build_kirchhoff, KirchhoffParams};
use fkl_core::semiclassical::{
    expansion_constants, expansion_residual, loglog_slope, minimize_j, reduced_functional_j, sobolev_scaling_check,
    solve_corrector, sweep_row, CorrectorOptions, MinimizeOptions, PotentialKind, PotentialSpec, Semiclassical,
    SweepOptions, DEFAULT_LAB_DX,
};
use fkl_core::{make_grid, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const X0: [f64; 2] = [0.3, 0.0];

fn setup_with(s: f64, l: f64, n: usize, kind: PotentialKind) -> Semiclassical {
    let params = BaseParams::new(s, 2.0, 1).unwrap();
    let gs = solve_q(&params, make_grid(1, l, n).unwrap(), &SolveOptions::default()).unwrap();
    let sr = build_kirchhoff(&gs, &KirchhoffParams::new(1.0, 0.5, 1.0, params).unwrap()).unwrap();
    let v = PotentialSpec::new(kind, 1, X0, 1.0, s).unwrap();
    Semiclassical::new(&sr, v, DEFAULT_LAB_DX).unwrap()
}

fn quadratic() -> PotentialKind {
    PotentialKind::QuadraticWell {
        curvature: 1.0,
        height: 1.0,
    }
}

/// `s = 0.75, p = 2, a = 1, b = 0.5`, `V = 1 + min(|x - 0.3|², 1)` on a
/// moderate grid.
fn setup() -> &'static Semiclassical {
    static SETUP: OnceLock<Semiclassical> = OnceLock::new();
    SETUP.get_or_init(|| setup_with(0.75, 100.0, 2048, quadratic()))
}

fn random_field(rng: &mut ChaCha8Rng, setup: &Semiclassical, amp: f64) -> Field {
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-4.0..4.0), rng.gen_range(0.5..3.0)))
        .collect();
    let f = Field::from_fn(*setup.grid(), |[z, _]| {
        amp * terms.iter().map(|(a, c, w)| a * (-((z - c) / w).powi(2)).exp()).sum::<f64>()
    });
    setup.operator().masked(&f)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn potential_hypotheses() {
    let good = PotentialSpec::new(quadratic(), 1, X0, 1.0, 0.75).unwrap();
    assert_eq!(good.r0, 1.0);
    assert_eq!((good.floor, good.ceiling), (1.0, 2.0));
    // (N+4s)/2 = 2 at N = 1, s = 0.75: the quadratic order is capped below it.
    assert!(good.alpha < 2.0 && good.alpha > 2.0 - 1e-5);
    assert!(PotentialSpec::new(quadratic(), 1, X0, 0.0, 0.75).is_err());
    assert!(PotentialSpec::new(quadratic(), 3, X0, 1.0, 0.75).is_err());
    let flat_table = PotentialKind::CustomTable {
        radii: vec![0.0, 1.0],
        values: vec![1.0, 1.0],
        holder: 1.0,
    };
    assert!(PotentialSpec::new(flat_table, 1, X0, 1.0, 0.75).is_err());
}

#[test]
fn resolution_guard() {
    let s = setup();
    assert_eq!(s.min_eps(), 32.0 * DEFAULT_LAB_DX);
    assert!(s.frame(0.01, X0).is_err());
    assert!(s.frame(s.min_eps(), X0).is_ok());
    assert!(s.frame(-0.1, X0).is_err());
}

#[test]
fn zero_field_has_zero_energy() {
    let s = setup();
    let frame = s.frame(0.1, X0).unwrap();
    assert_eq!(frame.energy(&Field::zeros(*s.grid())).unwrap(), 0.0);
}

#[test]
fn flat_potential_energy_is_a_eps_n() {
    let s = setup();
    let k = expansion_constants(s).unwrap();
    assert!(k.a > 0.0 && k.b > 0.0);
    assert!(rel(k.b, 0.5 * s.profile().dot(s.profile()).unwrap()) < 1e-15);
    for eps in [0.2, 0.05] {
        for y in [X0, [0.5, 0.0]] {
            let frame = s.flat_frame(eps, y).unwrap();
            let e = frame.energy(s.profile()).unwrap();
            assert!(rel(e, k.a * eps) <= 1e-8, "ε={eps}: {e} vs {}", k.a * eps);
        }
    }
}

#[test]
fn flat_potential_has_no_linear_term_and_no_corrector() {
    let s = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let frame = s.flat_frame(0.1, X0).unwrap();
    for _ in 0..5 {
        let phi = random_field(&mut rng, s, 1.0);
        let l = frame.l_eps(&phi).unwrap();
        assert!(l.value.abs() <= 1e-10 * frame.norm(&phi).unwrap(), "{l:?}");
    }
    let corr = solve_corrector(&frame, &CorrectorOptions::default()).unwrap();
    assert!(corr.phi_norm <= 1e-10, "{}", corr.phi_norm);

    // j_ε is then A ε^N at every centre.
    let k = expansion_constants(s).unwrap();
    for y in [X0, [0.4, 0.0], [0.1, 0.0]] {
        let frame = s.flat_frame(0.1, y).unwrap();
        let corr = solve_corrector(&frame, &CorrectorOptions::default()).unwrap();
        let j = frame.energy(&s.profile().add_scaled(1.0, &corr.phi).unwrap()).unwrap();
        assert!(rel(j, k.a * 0.1) <= 1e-9, "{j}");
    }
}

#[test]
fn linear_term_matches_direct_quadrature() {
    let s = setup();
    let u = s.profile();
    for eps in [0.2, 0.1, 0.05] {
        let frame = s.frame(eps, X0).unwrap();
        let l = frame.l_eps(u).unwrap();
        let g = u.grid();
        let direct: f64 = (0..g.total_points())
            .map(|i| {
                let v = s.potential().eval([X0[0] + eps * g.coord(i), 0.0]) - 1.0;
                v * u.samples()[i].powi(2)
            })
            .sum::<f64>()
            * g.cell_volume()
            * eps;
        assert!(rel(l.value, direct) <= 1e-10, "ε={eps}: {} vs {direct}", l.value);
        assert!(l.relative_gap <= 1e-8, "{l:?}");
    }
}

#[test]
fn projection_onto_e() {
    let s = setup();
    let frame = s.frame(0.1, [0.35, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let phi = random_field(&mut rng, s, 1.0);
        let p1 = frame.project_to_e(&phi).unwrap();
        assert!(frame.orthogonality_residual(&p1).unwrap() <= 1e-11);
        let p2 = frame.project_to_e(&p1).unwrap();
        assert!(p2.sub(&p1).unwrap().linf_norm() <= 1e-12 * p1.linf_norm());
        let psi = random_field(&mut rng, s, 1.0);
        let a = frame.inner(&frame.project_to_e(&psi).unwrap(), &phi).unwrap();
        let b = frame.inner(&psi, &p1).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");
    }
    let mode = &frame.translation_modes()[0];
    let pm = frame.project_to_e(mode).unwrap();
    assert!(pm.l2_norm() <= 1e-11 * mode.l2_norm());
}

#[test]
fn flat_l_eps_is_eps_n_times_lplus() {
    let s = setup();
    let lplus = s.lplus().unwrap();
    let frame = s.flat_frame(0.1, X0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let phi = random_field(&mut rng, s, 1.0);
        let a = frame.apply_l_eps(&phi).unwrap();
        let b = lplus.apply(&phi).unwrap().scaled(0.1);
        assert!(a.sub(&b).unwrap().l2_norm() <= 1e-10 * b.l2_norm());
    }
    let d = &frame.translation_modes()[0];
    let q = frame.apply_l_eps(d).unwrap().dot(d).unwrap();
    assert!(q.abs() <= 1e-5 * frame.norm(d).unwrap().powi(2), "{q:e}");
}

#[test]
fn l_eps_is_symmetric_and_bounded_below_on_e() {
    let s = setup();
    let frame = s.frame(0.1, X0).unwrap();
    let a = s.params().a();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // ‖𝓛_εφ‖ on E is a supremum over test directions, so any ψ ∈ E gives a
    // lower bound. ψ is an approximate Riesz representative of 𝓛_εφ,
    // built with the constant-coefficient part of the inner product.
    let mut rho = f64::INFINITY;
    for _ in 0..200 {
        let phi = frame.project_to_e(&random_field(&mut rng, s, 1.0)).unwrap();
        let lphi = frame.apply_l_eps(&phi).unwrap();
        let riesz = s.operator().solve_shifted(a, 1.0, &frame.apply_l_z(&phi).unwrap(), 1e-10).unwrap();
        let psi = frame.project_to_e(&riesz).unwrap();
        let bound = lphi.dot(&psi).unwrap() / (frame.norm(&psi).unwrap() * frame.norm(&phi).unwrap());
        rho = rho.min(bound);
    }
    assert!(rho > 0.0, "min ‖𝓛_εφ‖/‖φ‖ lower bound {rho}");

    // The quadratic form itself is indefinite on E: the profile direction
    // carries the single negative eigenvalue of the linearization.
    let pu = frame.project_to_e(s.profile()).unwrap();
    assert!(frame.apply_l_eps(&pu).unwrap().dot(&pu).unwrap() < 0.0);

    for _ in 0..10 {
        let f = random_field(&mut rng, s, 1.0);
        let g = random_field(&mut rng, s, 1.0);
        let a = frame.apply_l_eps(&f).unwrap().dot(&g).unwrap();
        let b = f.dot(&frame.apply_l_eps(&g).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }
}

#[test]
fn remainder_is_of_third_order() {
    let s = setup();
    let frame = s.frame(0.1, X0).unwrap();
    let zero = Field::zeros(*s.grid());
    assert_eq!(frame.remainder(&zero).unwrap(), 0.0);
    assert_eq!(frame.remainder_gradient(&zero).unwrap().linf_norm(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi = random_field(&mut rng, s, 0.1);
    let ratio = |t: f64| frame.remainder(&phi.scaled(t)).unwrap() / t.powi(3);
    let (r1, r2, r3) = (ratio(0.4), ratio(0.2), ratio(0.1));
    // Richardson: the ratio converges linearly in t.
    let limit = 2.0 * r3 - r2;
    assert!(limit.is_finite() && limit != 0.0);
    assert!((r3 - limit).abs() < (r2 - limit).abs() && (r2 - limit).abs() < (r1 - limit).abs());
}

#[test]
fn gateaux_derivative_matches_finite_differences() {
    let s = setup();
    let frame = s.frame(0.1, [0.35, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..3 {
        let u = s.profile().add_scaled(1.0, &random_field(&mut rng, s, 0.2)).unwrap();
        let psi = random_field(&mut rng, s, 1.0);
        let t = 1e-5;
        let fd = (frame.energy(&u.add_scaled(t, &psi).unwrap()).unwrap()
            - frame.energy(&u.add_scaled(-t, &psi).unwrap()).unwrap())
            / (2.0 * t);
        let g = frame.gateaux(&u, &psi).unwrap();
        assert!(rel(g, fd) <= 1e-6, "{g} vs {fd}");
    }
}

#[test]
fn sobolev_scaling_ratios() {
    let s = setup();
    let g = s.profile().clone();
    let eps = [0.4, 0.2, 0.1, 0.05, 0.025];
    let two = sobolev_scaling_check(s, &eps, 2.0, &g).unwrap();
    assert!(two.ratios.iter().all(|&r| r <= 1.0 + 1e-12), "{two:?}");
    let three = sobolev_scaling_check(s, &eps, 3.0, &g).unwrap();
    assert!(three.slope.abs() <= 0.1 && three.spread < 10.0, "{three:?}");
    assert!(sobolev_scaling_check(s, &eps, 1.5, &g).is_err());

    // With s = 0.4 the critical exponent 2N/(N-2s) = 10 is finite.
    let low = setup_with(0.4, 200.0, 4096, quadratic());
    let g = low.profile().clone();
    assert!(sobolev_scaling_check(&low, &eps, 9.5, &g).is_ok());
    assert!(sobolev_scaling_check(&low, &eps, 10.5, &g).is_err());
}

#[test]
fn expansion_residual_slopes_for_each_kind() {
    let eps = [0.2, 0.1, 0.05, 0.025];
    let radii: Vec<f64> = (0..=20000).map(|k| k as f64 * 1e-4).collect();
    let values: Vec<f64> = radii.iter().map(|r| 1.0 + r.powf(1.5)).collect();
    let kinds = [
        (quadratic(), 2.0),
        (
            PotentialKind::CosineWell {
                amplitude: 0.5,
                frequency: 1.0,
            },
            2.0,
        ),
        (
            PotentialKind::CustomTable {
                radii,
                values,
                holder: 1.5,
            },
            1.5,
        ),
    ];
    for (kind, alpha) in kinds {
        let label = kind.label();
        let s = setup_with(0.75, 100.0, 2048, kind);
        let res: Vec<f64> = eps.iter().map(|&e| expansion_residual(&s, e, X0).unwrap()).collect();
        let slope = loglog_slope(&eps, &res);
        assert!(slope >= 1.0 + alpha - 0.15, "{label}: slope {slope}, residuals {res:?}");
    }
}

#[test]
fn symmetric_well_is_minimized_at_its_centre() {
    let s = setup();
    let m = minimize_j(s, 0.1, &MinimizeOptions::default()).unwrap();
    let step = 2.0 * m.delta / 16.0;
    assert!((m.y[0] - X0[0]).abs() <= step, "{:?}", m.y);
    assert!(m.interior);
    assert!(m.corrector.orthogonality <= 1e-9);
    let (j, _) = reduced_functional_j(s, 0.1, m.y, &CorrectorOptions::default()).unwrap();
    assert!(rel(j, m.j_value) <= 1e-10);
}

#[test]
fn corrector_agrees_with_an_unconstrained_newton_solve() {
    let s = setup();
    let opts = SweepOptions {
        newton_check: true,
        ..SweepOptions::default()
    };
    let row = sweep_row(s, 0.1, &opts).unwrap();
    let gap = row.newton_gap.unwrap();
    assert!(gap <= 1e-6, "Newton gap {gap:e}");
    assert!(row.residual_scaled <= 1e-6);
}
