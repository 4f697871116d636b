//! Sine and cosine integrals, needed for the analytic tails of Fourier
//! integrals with algebraically decaying integrands.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

const EULER: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_IT: usize = 200;

/// `(Si(x), Ci(x))` for `x > 0`.
///
/// Power series below 2, continued fraction for `E1(ix)` above (modified Lentz).
pub fn sici(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "sici requires x > 0");
    if x > 2.0 {
        let h = e1_cf(x);
        (FRAC_PI_2 + h.im, -h.re)
    } else {
        let (mut sum, mut sums, mut sumc) = (0.0, 0.0, 0.0);
        let (mut sign, mut fact, mut odd) = (1.0, 1.0, true);
        for k in 1..=MAX_IT {
            fact *= x / k as f64;
            let term = fact / k as f64;
            sum += sign * term;
            let err = term / sum.abs();
            if odd {
                sign = -sign;
                sums = sum;
                sum = sumc;
            } else {
                sumc = sum;
                sum = sums;
            }
            if err < EPS {
                break;
            }
            odd = !odd;
        }
        (sums, sumc + x.ln() + EULER)
    }
}

/// `pi/2 - Si(x)` without cancellation for large `x`.
pub fn si_complement(x: f64) -> f64 {
    if x > 2.0 {
        -e1_cf(x).im
    } else {
        FRAC_PI_2 - sici(x).0
    }
}

// e^{-ix} * (continued fraction for e^{ix} E1(ix)); Re = -Ci, Im = Si - pi/2.
fn e1_cf(x: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1e300, 0.0);
    let mut d = one / b;
    let mut h = d;
    for i in 2..=MAX_IT {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += 2.0;
        d = one / (d * a + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    Complex64::new(x.cos(), -x.sin()) * h
}

/// `∫_H^∞ cos(wη)/η² dη` for `H > 0`.
pub fn tail_cos2(w: f64, h: f64) -> f64 {
    let w = w.abs();
    if w == 0.0 {
        return 1.0 / h;
    }
    (w * h).cos() / h - w * si_complement(w * h)
}

/// `∫_H^∞ sin(wη)/η³ dη` for `H > 0`.
pub fn tail_sin3(w: f64, h: f64) -> f64 {
    let s = w.signum();
    let w = w.abs();
    if w == 0.0 {
        return 0.0;
    }
    s * ((w * h).sin() / (2.0 * h * h) + 0.5 * w * tail_cos2(w, h))
}

/// `∫_H^∞ cos(wη)/η⁴ dη` for `H > 0`.
pub fn tail_cos4(w: f64, h: f64) -> f64 {
    let w = w.abs();
    (w * h).cos() / (3.0 * h * h * h) - w / 3.0 * tail_sin3(w, h)
}
