use planar_morse::field::{rat, rat_int, Domain, Nonlinearity, Point, Poly2, Rect, ScalarField};
use planar_morse::solver::{convergence_order, solve_dirichlet, SolveConfig};

fn quartic(alpha: (i64, i64)) -> Poly2 {
    Poly2::from_terms([
        (0, 0, rat(alpha.0, alpha.1)),
        (0, 2, rat(-1, 2)),
        (4, 0, rat_int(-1)),
        (2, 2, rat_int(6)),
        (0, 4, rat_int(-1)),
    ])
}

fn quartic_config(h: f64) -> (SolveConfig, ScalarField) {
    let u: ScalarField = quartic((1, 200)).into();
    let domain = Domain::with_level(Rect::new(-0.3, 0.3, -0.12, 0.12), u.clone());
    (SolveConfig::new(domain, h, Nonlinearity::constant(1.0)), u)
}

#[test]
fn torsion_hessian_at_center_is_diagonal_and_negative() {
    let cfg = SolveConfig::unit_square(1.0 / 128.0, Nonlinearity::constant(1.0));
    let s = solve_dirichlet(&cfg, None).unwrap();
    assert!(s.residual <= 1e-10);
    let d = ScalarField::Grid(s.field.clone()).derivs(Point::new(0.5, 0.5), 2).unwrap();
    let [uxx, uxy, uyy] = d.hessian();
    assert!(uxx < 0.0 && uyy < 0.0);
    assert!(uxy.abs() <= 1e-6 * uxx.abs(), "uxy {uxy:e} uxx {uxx:e}");
}

#[test]
fn disk_first_eigenvalue() {
    let cfg = SolveConfig::unit_disk(1.0 / 128.0, Nonlinearity::constant(1.0));
    let s = solve_dirichlet(&cfg, None).unwrap();
    let r = s.spectrum(1).unwrap();
    // square of the first zero of J0
    let lambda = 2.404825557695773f64.powi(2);
    assert!((r.eigenvalues[0] - lambda).abs() <= 0.01 * lambda, "{:?}", r.eigenvalues);
    assert_eq!(r.morse_index, 0);
    assert!(r.semi_stable);
}

#[test]
fn quartic_example_converges_at_second_order() {
    let (cfg, u) = quartic_config(1.0 / 64.0);
    let r = convergence_order(&cfg, &u, &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]).unwrap();
    let p = r.order.unwrap();
    assert!((1.5..=2.5).contains(&p), "{r:?}");
}

#[test]
fn quartic_example_is_semi_stable_and_nonnegative() {
    let (cfg, _) = quartic_config(1.0 / 128.0);
    let s = solve_dirichlet(&cfg, None).unwrap();
    assert!(s.values().iter().all(|&v| v >= 0.0));
    let r = s.spectrum(1).unwrap();
    assert_eq!(r.morse_index, 0);
    assert!(r.semi_stable);
}

#[test]
fn zero_problem_is_exact_at_every_spacing() {
    let cfg = SolveConfig::unit_disk(0.1, Nonlinearity::constant(0.0));
    let r = convergence_order(&cfg, &ScalarField::Poly(Poly2::zero()), &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]).unwrap();
    assert!(r.exact);
    assert_eq!(r.order, None);
}

#[test]
fn square_torsion_against_fine_self_reference() {
    let f = Nonlinearity::constant(1.0);
    let mut fine = SolveConfig::unit_square(1.0 / 1024.0, f.clone());
    fine.tol = 1e-8;
    let reference: ScalarField = solve_dirichlet(&fine, None).unwrap().field.into();
    let cfg = SolveConfig::unit_square(1.0 / 16.0, f);
    let r = convergence_order(&cfg, &reference, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]).unwrap();
    let p = r.order.unwrap();
    assert!((1.5..=2.5).contains(&p), "{r:?}");
}
