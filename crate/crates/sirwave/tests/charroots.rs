//! Quadratic roots, delay continuation and argument-principle certificates.

use proptest::prelude::*;
use sirwave::charroots::*;
use sirwave::model::SirParameters;
use sirwave::Error;

fn demo() -> (SirParameters, [f64; 3]) {
    let p = SirParameters {
        d_s: 1.0,
        d_i: 1.0,
        d_r: 1.0,
        b: 3.0,
        mu1: 1.0,
        mu2: 1.1,
        mu3: 1.05,
        gamma: 0.1,
        alpha: 0.0,
        beta: 0.6,
        tau: [0.01; 4],
        c: 4.091454509095756,
    };
    (p, [0.13, 1.7, 0.115])
}

fn quad(c: f64, q: f64) -> QuadraticChar {
    QuadraticChar { c, q, label: 1 }
}

#[test]
fn quadratic_root_examples() {
    assert!((smallest_positive_root(&quad(2.0, -1.0)).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-15);
    assert!((smallest_positive_root(&quad(3.0, 2.0)).unwrap() - 1.0).abs() < 1e-15);
    // Cancellation-free: the small root of l^2 - 1e8 l + 1 is 1e-8.
    let r = smallest_positive_root(&quad(1e8, 1.0)).unwrap();
    assert!((r - 1e-8).abs() < 1e-22);
    assert!(matches!(smallest_positive_root(&quad(1.0, 1.0)), Err(Error::ComplexRoots { .. })));
    assert!(matches!(smallest_positive_root(&quad(-3.0, 2.0)), Err(Error::NoPositiveRoot { .. })));
}

#[test]
fn continuation_matches_independent_root() {
    // Bracketed root of eta^2 + (-1 - 2 eta) e^{0.01 eta} near 1 + sqrt 2.
    let ec = ExpCharPolynomial {
        c: 2.0,
        q: -1.0,
        r: 0.01,
        label: 1,
    };
    let lambda = smallest_positive_root(&ec.quadratic()).unwrap();
    let cont = continue_root(&ec, lambda).unwrap();
    assert!((cont.root - 2.465626257170246).abs() < 1e-12, "{}", cont.root);
    assert!(cont.residual < 1e-12);
    let last = cont.trace.last().unwrap();
    assert_eq!(last.r, 0.01);
    assert!(last.final_residual < 1e-12);
}

#[test]
fn zero_delay_continuation_is_the_seed() {
    let ec = ExpCharPolynomial {
        c: 3.0,
        q: 2.0,
        r: 0.0,
        label: 1,
    };
    let cont = continue_root(&ec, 1.0).unwrap();
    assert_eq!(cont.root, 1.0);
    assert!(cont.trace.is_empty());
}

#[test]
fn continuation_fails_past_the_fold() {
    // eta^2 = (4 + 6 eta) e^{0.06 eta} has no positive root.
    let ec = ExpCharPolynomial {
        c: 6.0,
        q: -4.0,
        r: 0.06,
        label: 1,
    };
    let lambda = smallest_positive_root(&ec.quadratic()).unwrap();
    assert!(matches!(continue_root(&ec, lambda), Err(Error::ContinuationFailed { .. })));
}

#[test]
fn demo_root_table_matches_oracle() {
    let (p, m) = demo();
    let expected = [
        (0.08790271616939482, 0.08789563354179197),
        (4.322786761895018, 5.320068244087192),
        (0.5209321863501875, 0.5190766773226795),
        (4.366287531722337, 5.376210424095222),
        (0.1074963265016915, 0.10748324948954051),
        (4.333739492277388, 5.334182290837259),
    ];
    let rows = root_table(&p, m).unwrap();
    for (row, (l, e)) in rows.iter().zip(expected) {
        assert!((row.lambda - l).abs() < 1e-10 * l.max(1.0), "{row:?}");
        assert!((row.eta - e).abs() < 1e-9 * e.max(1.0), "{row:?}");
        assert!(row.residual < 1e-12);
    }
}

#[test]
fn axis_certificates() {
    let c = imaginary_axis_clear(&GeneralChar::new(1.0, 1.0, 0.0).unwrap()).unwrap();
    assert!((c.min_modulus - 1.0).abs() < 1e-9 && c.min_modulus >= 0.75);
    assert!(c.margin > 0.0);
    let c = imaginary_axis_clear(&GeneralChar::new(1.0, 2.0, 0.05).unwrap()).unwrap();
    assert!((c.min_modulus - 2.0).abs() < 1e-9, "{c:?}");
    assert!(c.argmin.abs() < 1e-9);
}

#[test]
fn general_char_rejects_degenerate_coefficients() {
    assert!(GeneralChar::new(0.0, 1.0, 0.0).is_err());
    assert!(GeneralChar::new(1.0, 0.0, 0.0).is_err());
    assert!(GeneralChar::new(f64::NAN, 1.0, 0.0).is_err());
}

#[test]
fn strip_counts_separate_the_quadratic_roots() {
    // l^2 - l - 2 = (l - 2)(l + 1).
    let gc = GeneralChar::new(1.0, 2.0, 0.0).unwrap();
    assert_eq!(gc.quadratic_roots(), (-1.0, 2.0));
    assert_eq!(strip_root_count(&gc, 0.5, 3.0).unwrap(), 1);
    assert_eq!(strip_root_count(&gc, -0.5, 0.5).unwrap(), 0);
    assert_eq!(strip_root_count(&gc, -2.0, -0.5).unwrap(), 1);
}

#[test]
fn root_on_contour_is_reported() {
    let gc = GeneralChar::new(1.0, 2.0, 0.0).unwrap();
    let rect = Rect {
        re_min: 2.0,
        re_max: 3.0,
        im_min: -1.0,
        im_max: 1.0,
    };
    assert!(matches!(rect_root_count(&gc, &rect), Err(Error::BoundaryRoot { .. })));
}

proptest! {
    #[test]
    fn smallest_root_solves_the_quadratic(c in 0.5f64..10.0, q in -10.0f64..0.0) {
        let l = smallest_positive_root(&quad(c, q)).unwrap();
        prop_assert!(l > 0.0);
        prop_assert!((l * l - c * l + q).abs() < 1e-12 * (1.0 + c * l + q.abs()));
    }

    #[test]
    fn continued_roots_have_small_residual(c in 1.0f64..5.0, q in -3.0f64..-0.1, r in 0.0f64..0.02) {
        let ec = ExpCharPolynomial { c, q, r, label: 1 };
        let l = smallest_positive_root(&ec.quadratic()).unwrap();
        if let Ok(cont) = continue_root(&ec, l) {
            prop_assert!(cont.residual < 1e-12);
            prop_assert!(cont.root > 0.0);
        }
    }
}
