use planar_morse::classify::{check_harmonic_chain, classify_point, ChainCase, ClassifyContext, CriticalPoint, Tolerances};
use planar_morse::field::io::{parse_field, write_field};
use planar_morse::field::{rat, Rational};
use planar_morse::index::robust_index;
use planar_morse::jets::{jet_exact, jet_numeric};
use planar_morse::levelset::curvature_at;
use planar_morse::replicate::example_harmonic;
use planar_morse::{Point, Poly2, ScalarField};
use proptest::prelude::*;

fn small_rational() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

fn nonzero_mix() -> impl Strategy<Value = (Rational, Rational)> {
    (small_rational(), small_rational()).prop_filter("zero mix", |(a, b)| *a != rat(0, 1) || *b != rat(0, 1))
}

/// Rational points on the unit circle from Pythagorean parametrization.
fn rotation() -> impl Strategy<Value = (Rational, Rational)> {
    (-9i64..=9, 1i64..=9).prop_map(|(m, k)| {
        let (m2, k2) = (m * m, k * k);
        (rat(k2 - m2, k2 + m2), rat(2 * m * k, k2 + m2))
    })
}

fn poly(max_deg: u32) -> impl Strategy<Value = Poly2> {
    prop::collection::vec((0..=max_deg, 0..=max_deg, small_rational()), 1..8)
        .prop_map(move |t| Poly2::from_terms(t.into_iter().filter(|(a, b, _)| a + b <= max_deg)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn harmonic_index_is_one_minus_n(n in 2u32..=6, (a, b) in nonzero_mix()) {
        let p = example_harmonic(n, &a, &b).unwrap();
        prop_assert_eq!(robust_index(&p.into(), Point::ORIGIN).unwrap().value, 1 - n as i64);
    }

    #[test]
    fn index_is_rotation_invariant(n in 2u32..=5, (a, b) in nonzero_mix(), (c, s) in rotation()) {
        let p = example_harmonic(n, &a, &b).unwrap();
        let i0 = robust_index(&p.clone().into(), Point::ORIGIN).unwrap().value;
        let i1 = robust_index(&p.rotate(&c, &s).into(), Point::ORIGIN).unwrap().value;
        prop_assert_eq!(i0, i1);
    }

    #[test]
    fn chains_vanish_on_harmonic_mixes(n in 3u32..=6, (a, b) in nonzero_mix()) {
        let p = example_harmonic(n, &a, &b).unwrap();
        let j = jet_exact(&p, Point::ORIGIN, n as usize);
        let r = check_harmonic_chain(&j, n as usize, ChainCase::KernelDegenerate).unwrap();
        prop_assert!(r.iter().all(|v| *v == 0.0), "{:?}", r);
    }

    #[test]
    fn level_circles_have_curvature_minus_one_over_radius(rho in 0.05f64..20.0, t in 0.0f64..std::f64::consts::TAU) {
        let p = Poly2::from_terms([(2, 0, rat(1, 1)), (0, 2, rat(1, 1))]);
        let k = curvature_at(&p.into(), Point::new(rho * t.cos(), rho * t.sin())).unwrap();
        prop_assert!((k + 1.0 / rho).abs() <= 1e-12 / rho, "k = {}, rho = {}", k, rho);
    }

    #[test]
    fn numeric_jet_agrees_with_exact(p in poly(4), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let c = Point::new(x, y);
        let u: ScalarField = p.clone().into();
        let num = jet_numeric(&u, c, 4, None).unwrap();
        let ex = jet_exact(&p, c, 4);
        for k in 0..=4 {
            for b in 0..=k {
                let d = (num.coeff(k - b, b) - ex.coeff(k - b, b)).abs();
                prop_assert!(d <= 10.0 * num.err(k - b, b) + 1e-12, "({}, {}): diff {:e}, err {:e}", k - b, b, d, num.err(k - b, b));
            }
        }
    }

    #[test]
    fn laplacian_commutes_with_rotation(p in poly(5), (c, s) in rotation()) {
        prop_assert_eq!(p.rotate(&c, &s).laplacian(), p.laplacian().rotate(&c, &s));
    }

    #[test]
    fn poly_field_round_trips(p in poly(6)) {
        let f: ScalarField = p.clone().into();
        let back = parse_field(&write_field(&f)).unwrap();
        prop_assert_eq!(back.as_poly(), Some(&p));
    }

    #[test]
    fn zero_hessian_sign_pattern_is_rotation_invariant(n in 3u32..=6, (a, b) in nonzero_mix(), (c, s) in rotation()) {
        let p = example_harmonic(n, &a, &b).unwrap();
        let pattern = |u: ScalarField| {
            let cp = CriticalPoint::at(&u, Point::ORIGIN).unwrap();
            let r = classify_point(&u, &cp, &ClassifyContext::default(), &Tolerances::default()).unwrap();
            (r.class, r.n, r.sign_pattern())
        };
        prop_assert_eq!(pattern(p.clone().into()), pattern(p.rotate(&c, &s).into()));
    }
}
