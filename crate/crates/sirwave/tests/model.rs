//! Equilibria, thresholds, critical speed, nonlinearities and shift constants.

use proptest::prelude::*;
use sirwave::model::*;
use sirwave::Error;

fn base() -> SirParameters {
    SirParameters {
        d_s: 1.0,
        d_i: 1.0,
        d_r: 1.0,
        b: 2.0,
        mu1: 1.0,
        mu2: 0.5,
        mu3: 1.0,
        gamma: 0.5,
        alpha: 0.0,
        beta: 1.0,
        tau: [0.01; 4],
        c: 6.0,
    }
}

fn demo() -> (SirParameters, [f64; 3]) {
    let p = SirParameters {
        b: 3.0,
        mu2: 1.1,
        mu3: 1.05,
        gamma: 0.1,
        beta: 0.6,
        c: 4.091454509095756,
        ..base()
    };
    (p, [0.13, 1.7, 0.115])
}

#[test]
fn reproduction_number_examples() {
    assert_eq!(reproduction_number(&base()), 2.0);
    let p = SirParameters {
        b: 1.0,
        mu1: 2.0,
        ..base()
    };
    assert_eq!(reproduction_number(&p), 0.5);
    let mut p = base();
    p.b = p.mu1 * (p.mu2 + p.gamma) / p.beta;
    assert!((reproduction_number(&p) - 1.0).abs() < 1e-15);
}

#[test]
fn endemic_equilibrium_examples() {
    let (s, i, r) = endemic_equilibrium(&base()).unwrap();
    assert!((s - 1.0).abs() < 1e-12 && (i - 1.0).abs() < 1e-12 && (r - 0.5).abs() < 1e-12);

    // With alpha = 1 the steady state solves S = 1 + I, 2 - S - I = 0.
    let p = SirParameters { alpha: 1.0, ..base() };
    let (s, i, r) = endemic_equilibrium(&p).unwrap();
    assert!((s - 1.5).abs() < 1e-12 && (i - 0.5).abs() < 1e-12 && (r - 0.25).abs() < 1e-12);

    let mut p = base();
    p.b = p.mu1 * (p.mu2 + p.gamma) / p.beta;
    assert_eq!(endemic_equilibrium(&p).unwrap(), disease_free_equilibrium(&p));

    let p = SirParameters { beta: 0.25, ..base() };
    assert!(matches!(endemic_equilibrium(&p), Err(Error::NoEndemicState { .. })));
}

#[test]
fn printed_closed_form_disagrees_without_saturation() {
    // The printed I* numerator is B alpha - mu1 (mu2 + gamma): negative at alpha = 0.
    let cmp = compare_closed_form(&base()).unwrap();
    assert!(!cmp.agrees);
    assert!(cmp.printed.1 < 0.0);
}

#[test]
fn endemic_branch_crosses_zero_at_threshold() {
    let mut p = base();
    p.b = p.mu1 * (p.mu2 + p.gamma) / p.beta;
    assert!(endemic_branch(&p).unwrap().1.abs() < 1e-12);
    p.b *= 0.5;
    assert!(endemic_branch(&p).unwrap().1 < 0.0);
}

#[test]
fn critical_speed_examples() {
    // With mu1 = mu2 = mu3 and no recovery all six constants are about -1.
    let p = SirParameters {
        mu2: 1.0,
        gamma: 0.0,
        ..base()
    };
    assert!((critical_wave_speed(&p, [1.0, 1e-3, 1e-3]) - 2.0).abs() < 1e-12);

    // mu3 = 4 dominates: 2 sqrt(4) = 4.
    let p = SirParameters {
        mu2: 1.0,
        gamma: 1.0,
        mu3: 4.0,
        ..base()
    };
    let m = [1.0, 1e-3, 1e-3];
    let q = char_constants(&p, m);
    assert!(q.iter().all(|v| v.abs() <= 4.0));
    assert_eq!(critical_wave_speed(&p, m), 4.0);
}

#[test]
fn threshold_gates() {
    let (p, m) = demo();
    check_thresholds(&p, m).unwrap();
    let low = SirParameters { beta: 0.2, ..p };
    assert!(matches!(check_thresholds(&low, m), Err(Error::NoEndemicState { .. })));
    let slow = SirParameters { c: 0.5 * p.c / 1.5, ..p };
    assert!(matches!(check_thresholds(&slow, m), Err(Error::SubcriticalSpeed { .. })));
}

#[test]
fn reference_frame_has_negative_first_limit() {
    let p = base();
    let k = wave_limits(&p).unwrap();
    assert!((k[0] + 0.5).abs() < 1e-12);
    let e = WaveFrameParameters::new(&p, [0.25, 1.5, 0.25]).unwrap_err();
    assert!(matches!(e, Error::InvalidParameter { ref name, .. } if name == "k1"), "{e}");
}

#[test]
fn demo_frame() {
    let (p, m) = demo();
    let wp = WaveFrameParameters::new(&p, m).unwrap();
    assert!((wp.k[0] - 0.0873015873015873).abs() < 1e-12);
    assert!((wp.k[1] - 5.0 / 6.0).abs() < 1e-12);
    assert!((wp.k[2] - 0.0793650793650793).abs() < 1e-12);
    assert!((critical_wave_speed(&p, m) * 1.5 - p.c).abs() < 1e-12);
    assert_eq!(wp.r, [p.c * 0.01; 4]);
}

#[test]
fn nonlinearity_zero_and_equilibrium() {
    let (p, _) = demo();
    let zero = [0.0; 5];
    let seg = Segment {
        values: &zero,
        span: 0.1,
    };
    for c in Component::ALL {
        assert_eq!(nonlinearity(&p, c, &seg, &seg, &seg).unwrap(), 0.0);
    }
    let k = wave_limits(&p).unwrap();
    for c in Component::ALL {
        let v = reaction(&p, c, &WavePoint::constant(k));
        assert!(v.abs() < 1e-10, "{c:?}: {v}");
    }
}

#[test]
fn incidence_linearization() {
    let (p, _) = demo();
    let eps = 1e-6;
    let f = reaction(&p, Component::Psi, &WavePoint::constant([eps; 3]));
    let slope = p.beta * p.b / p.mu1 - (p.mu2 + p.gamma);
    assert!((f / eps - slope).abs() < 1e-5);
}

#[test]
fn nonlinearity_reads_lagged_incidence() {
    let (p, _) = demo();
    let phi = [0.05; 11];
    let chi = [0.04; 11];
    // psi rises linearly over the segment; the incidence reads it at -r4.
    let psi: Vec<f64> = (0..11).map(|j| 0.1 + 0.01 * j as f64).collect();
    let span = 0.1;
    let phi_seg = Segment { values: &phi, span };
    let chi_seg = Segment { values: &chi, span };
    let psi_seg = Segment { values: &psi, span };
    let got = nonlinearity(&p, Component::Psi, &phi_seg, &psi_seg, &chi_seg).unwrap();
    let lag = psi_seg.at(-p.c * p.tau[3]);
    let x = WavePoint {
        phi: 0.05,
        psi: 0.2,
        chi: 0.04,
        psi_lag: lag,
    };
    assert_eq!(got, reaction(&p, Component::Psi, &x));
    assert!((lag - (0.2 - p.c * p.tau[3])).abs() < 1e-12);
}

#[test]
fn nonlinearity_rejects_overfull_state() {
    let (p, _) = demo();
    let big = [p.capacity(); 3];
    let seg = Segment { values: &big, span: 0.0 };
    assert!(matches!(
        nonlinearity(&p, Component::Phi, &seg, &seg, &seg),
        Err(Error::DomainViolation { .. })
    ));
}

#[test]
fn shift_constants_pass_random_verification() {
    let (p, m) = demo();
    let wp = WaveFrameParameters::new(&p, m).unwrap();
    let betas = pqm_constants(&p, &wp, 11).unwrap();
    assert_eq!(betas[0], p.mu1);
    let rep = verify_pqm(&p, m, betas, 10_000, 3).unwrap();
    assert!(rep.worst_margin.iter().all(|&w| w >= 0.0));
}

#[test]
fn pqm_identical_arguments_give_zero_differences() {
    let (p, m) = demo();
    let x = WavePoint {
        phi: 0.1,
        psi: 1.0,
        chi: 0.05,
        psi_lag: 0.9,
    };
    for c in Component::ALL {
        assert_eq!(reaction(&p, c, &x) - reaction(&p, c, &x), 0.0);
    }
    assert!(verify_pqm(&p, m, shift_constants(&p, m), 100, 0).is_ok());
}

#[test]
fn pqm_detects_too_small_shift() {
    let (p, m) = demo();
    let mut betas = shift_constants(&p, m);
    betas[1] = 0.0;
    assert!(matches!(
        verify_pqm(&p, m, betas, 10_000, 5),
        Err(Error::PqmVerificationFailed { .. })
    ));
}

#[test]
fn lipschitz_bounds_hold_on_samples() {
    let (p, m) = demo();
    let r = lipschitz_ratio(&p, m, 20_000, 9);
    assert!(r.iter().all(|&v| v <= 1.0 + 1e-12), "{r:?}");
}

#[test]
fn validation_names_the_field() {
    let cases: [(&str, fn(&mut SirParameters)); 5] = [
        ("d_i", |p| p.d_i = 0.0),
        ("gamma", |p| p.gamma = f64::NAN),
        ("alpha", |p| p.alpha = -1.0),
        ("tau2", |p| p.tau[1] = -0.1),
        ("tau4", |p| p.tau[3] = 0.5),
    ];
    for (name, f) in cases {
        let mut p = base();
        f(&mut p);
        match p.validate() {
            Err(Error::InvalidParameter { name: n, .. }) => assert_eq!(n, name),
            other => panic!("{name}: {other:?}"),
        }
    }
}

proptest! {
    #[test]
    fn validate_never_panics(v in proptest::array::uniform12(prop_oneof![
        -2.0f64..2.0, Just(0.0), Just(f64::NAN), Just(f64::INFINITY)
    ])) {
        let p = SirParameters {
            d_s: v[0], d_i: v[1], d_r: v[2], b: v[3], mu1: v[4], mu2: v[5], mu3: v[6],
            gamma: v[7], alpha: v[8], beta: v[9], tau: [v[10], v[10], v[10], v[11]], c: 1.0,
        };
        let _ = p.validate();
        let _ = WaveFrameParameters::new(&p, [0.1, 0.5, 0.1]);
    }

    #[test]
    fn endemic_state_is_a_steady_state(b in 1.5f64..4.0, beta in 0.5f64..2.0, alpha in 0.0f64..2.0) {
        let p = SirParameters { b, beta, alpha, ..base() };
        prop_assume!(reproduction_number(&p) > 1.0 + 1e-6);
        let (s, i, r) = endemic_equilibrium(&p).unwrap();
        let incidence = p.beta * s * i / (1.0 + p.alpha * i);
        prop_assert!((p.b - p.mu1 * s - incidence).abs() < 1e-9);
        prop_assert!((incidence - (p.mu2 + p.gamma) * i).abs() < 1e-9);
        prop_assert!((p.gamma * i - p.mu3 * r).abs() < 1e-9);
    }
}
