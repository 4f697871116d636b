//! Characteristic roots: the six quadratics, their delayed counterparts, root
//! continuation in the delay, and argument-principle certificates for the
//! mixed-type operator `x'' - a x'(t+r) - b x(t+r)`.

use crate::error::{Error, Result};
use crate::model::{char_constants, SirParameters};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// `l^2 - c l + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticChar {
    pub c: f64,
    pub q: f64,
    /// 1..=6.
    pub label: usize,
}

/// `D(eta) = eta^2 - c eta e^{r eta} + q e^{r eta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpCharPolynomial {
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub label: usize,
}

impl ExpCharPolynomial {
    pub fn quadratic(&self) -> QuadraticChar {
        QuadraticChar {
            c: self.c,
            q: self.q,
            label: self.label,
        }
    }

    pub fn with_delay(&self, r: f64) -> Self {
        ExpCharPolynomial { r, ..*self }
    }

    #[inline]
    pub fn value(&self, eta: f64) -> f64 {
        eta * eta + (self.q - self.c * eta) * (self.r * eta).exp()
    }

    #[inline]
    pub fn derivative(&self, eta: f64) -> f64 {
        let e = (self.r * eta).exp();
        2.0 * eta + (-self.c + self.r * (self.q - self.c * eta)) * e
    }
}

/// `D(z) = z^2 - (a z + b) e^{r z}`, the characteristic function of
/// `x'' - a x'(t+r) - b x(t+r) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralChar {
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

impl GeneralChar {
    pub fn new(a: f64, b: f64, r: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "a".into(),
                reason: "must be finite and nonzero".into(),
            });
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "b".into(),
                reason: "must be finite and > 0".into(),
            });
        }
        Ok(GeneralChar { a, b, r })
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        z * z - (z * self.a + self.b) * (z * self.r).exp()
    }

    /// Roots `(l-, l+)` of the zero-delay quadratic `l^2 - a l - b`.
    pub fn quadratic_roots(&self) -> (f64, f64) {
        let s = (self.a * self.a + 4.0 * self.b).sqrt();
        ((self.a - s) / 2.0, (self.a + s) / 2.0)
    }
}

/// Smallest positive root of `l^2 - c l + q`, via the cancellation-free
/// quadratic formula.
pub fn smallest_positive_root(pq: &QuadraticChar) -> Result<f64> {
    let (c, q) = (pq.c, pq.q);
    let mut disc = c * c - 4.0 * q;
    if disc < 0.0 {
        if disc < -1e-14 * (c * c).max(q.abs()) {
            return Err(Error::ComplexRoots { c, q });
        }
        disc = 0.0;
    }
    let big = 0.5 * (c + c.signum() * disc.sqrt());
    if big == 0.0 {
        return Err(Error::NoPositiveRoot { c, q });
    }
    let small = q / big;
    [big, small]
        .into_iter()
        .filter(|&x| x > 0.0)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))))
        .ok_or(Error::NoPositiveRoot { c, q })
}

/// One accepted substep of the delay continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub r: f64,
    pub eta: f64,
    /// `|D|` at the previous root, before any Newton correction.
    pub start_residual: f64,
    pub final_residual: f64,
    pub newton_iterations: usize,
}

/// A continued root with its substep trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuedRoot {
    pub root: f64,
    pub residual: f64,
    pub trace: Vec<ContinuationStep>,
}

fn newton(ec: &ExpCharPolynomial, start: f64) -> Option<(f64, usize)> {
    let mut eta = start;
    for it in 1..=60 {
        let d = ec.derivative(eta);
        if d.abs() < 1e-10 {
            return None;
        }
        let step = ec.value(eta) / d;
        eta -= step;
        if !eta.is_finite() {
            return None;
        }
        if step.abs() <= 1e-15 * eta.abs().max(1.0) {
            return Some((eta, it));
        }
    }
    None
}

/// Continue the root `seed` of the zero-delay quadratic to delay `ec.r`
/// by substeps of at most `0.01 (1 + |r|)` with Newton correction.
pub fn continue_root(ec: &ExpCharPolynomial, seed: f64) -> Result<ContinuedRoot> {
    let mut trace = Vec::new();
    let target = ec.r;
    let max_step = 0.01 * (1.0 + target.abs());
    let (mut r, mut eta) = (0.0f64, seed);
    if target == 0.0 {
        let residual = ec.value(seed).abs();
        return Ok(ContinuedRoot {
            root: seed,
            residual,
            trace,
        });
    }
    let dir = target.signum();
    let mut step = max_step;
    while (target - r).abs() > 0.0 {
        let next = if (target - r).abs() <= step {
            target
        } else {
            r + dir * step
        };
        let here = ec.with_delay(next);
        let start_residual = here.value(eta).abs();
        match newton(&here, eta) {
            Some((e, it)) if (e - eta).abs() <= 0.5 * (1.0 + eta.abs()) => {
                let final_residual = here.value(e).abs();
                trace.push(ContinuationStep {
                    r: next,
                    eta: e,
                    start_residual,
                    final_residual,
                    newton_iterations: it,
                });
                r = next;
                eta = e;
                step = max_step;
            }
            _ => {
                step *= 0.5;
                if step < 1e-10 {
                    return Err(Error::ContinuationFailed { r, eta });
                }
            }
        }
    }
    let residual = ec.value(eta).abs();
    if residual >= 1e-12 {
        return Err(Error::ContinuationFailed { r, eta });
    }
    Ok(ContinuedRoot {
        root: eta,
        residual,
        trace,
    })
}

/// The six (quadratic, delayed) characteristic pairs of the construction.
/// Pairs 1-2 use delay `r1`, 3-4 use `r2`, 5-6 use `r3`.
pub fn characteristic_set(p: &SirParameters, m: [f64; 3]) -> [ExpCharPolynomial; 6] {
    let q = char_constants(p, m);
    let r = p.wave_delays();
    std::array::from_fn(|i| ExpCharPolynomial {
        c: p.c,
        q: q[i],
        r: r[i / 2],
        label: i + 1,
    })
}

/// One row of the root table: `lambda_i`, continued `eta_i(r)`, `|D_i(eta_i)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootRow {
    pub label: usize,
    pub q: f64,
    pub r: f64,
    pub lambda: f64,
    pub eta: f64,
    pub residual: f64,
}

/// Smallest positive roots and their continuations for all six pairs.
pub fn root_table(p: &SirParameters, m: [f64; 3]) -> Result<[RootRow; 6]> {
    let set = characteristic_set(p, m);
    let mut rows = Vec::with_capacity(6);
    for ec in set {
        let lambda = smallest_positive_root(&ec.quadratic())?;
        let cont = continue_root(&ec, lambda)?;
        rows.push(RootRow {
            label: ec.label,
            q: ec.q,
            r: ec.r,
            lambda,
            eta: cont.root,
            residual: cont.residual,
        });
    }
    Ok(rows.try_into().expect("six rows"))
}

/// Certificate that `D(i eta)` stays away from zero on the whole real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisCertificate {
    /// Grid half-width; beyond it `|D(i eta)| >= eta^2 / 2` analytically.
    pub cutoff: f64,
    pub spacing: f64,
    pub min_modulus: f64,
    pub argmin: f64,
    /// Bound on `|d/deta D(i eta)|` over the grid window.
    pub lipschitz: f64,
    /// `min_modulus - spacing/2 * lipschitz`; positive certifies the window.
    pub margin: f64,
}

/// Dense scan of `|D(i eta)|` on `[-H, H]` with a Lipschitz gap bound plus
/// the quadratic tail bound outside.
pub fn imaginary_axis_clear(gc: &GeneralChar) -> Result<AxisCertificate> {
    let cutoff = 4.0 * 1f64.max(gc.a.abs()).max(gc.b.sqrt());
    let spacing = 1e-3;
    let n = (2.0 * cutoff / spacing).ceil() as usize;
    let h = 2.0 * cutoff / n as f64;
    let (mut min_modulus, mut argmin) = (f64::INFINITY, 0.0);
    for j in 0..=n {
        let eta = -cutoff + j as f64 * h;
        let m = gc.eval(Complex64::new(0.0, eta)).norm();
        if m < min_modulus {
            min_modulus = m;
            argmin = eta;
        }
    }
    let lipschitz = 2.0 * cutoff + gc.a.abs() + gc.r.abs() * (gc.a.abs() * cutoff + gc.b);
    let margin = min_modulus - 0.5 * h * lipschitz;
    if !(margin > 0.0) {
        return Err(Error::CertificateFailed {
            eta: argmin,
            modulus: min_modulus,
        });
    }
    Ok(AxisCertificate {
        cutoff,
        spacing: h,
        min_modulus,
        argmin,
        lipschitz,
        margin,
    })
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

fn edge_winding(
    gc: &GeneralChar,
    z0: Complex64,
    z1: Complex64,
    f0: Complex64,
    f1: Complex64,
    depth: usize,
) -> Result<f64> {
    let dtheta = (f1 / f0).arg();
    if dtheta.abs() <= PI / 8.0 || depth >= 40 {
        return Ok(dtheta);
    }
    let zm = 0.5 * (z0 + z1);
    let fm = check_modulus(gc, zm)?;
    Ok(edge_winding(gc, z0, zm, f0, fm, depth + 1)? + edge_winding(gc, zm, z1, fm, f1, depth + 1)?)
}

fn check_modulus(gc: &GeneralChar, z: Complex64) -> Result<Complex64> {
    let f = gc.eval(z);
    let tol = 1e-10 * (1.0 + z.norm_sqr());
    if f.norm() < tol {
        return Err(Error::BoundaryRoot {
            re: z.re,
            im: z.im,
            modulus: f.norm(),
        });
    }
    Ok(f)
}

/// Number of roots of `D` inside `rect`, by the argument principle with
/// adaptive refinement (phase increments kept below pi/8).
pub fn rect_root_count(gc: &GeneralChar, rect: &Rect) -> Result<i64> {
    let corners = [
        Complex64::new(rect.re_min, rect.im_min),
        Complex64::new(rect.re_max, rect.im_min),
        Complex64::new(rect.re_max, rect.im_max),
        Complex64::new(rect.re_min, rect.im_max),
    ];
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let n = 256;
        let mut za = a;
        let mut fa = check_modulus(gc, za)?;
        for k in 1..=n {
            let zb = a + (b - a) * (k as f64 / n as f64);
            let fb = check_modulus(gc, zb)?;
            total += edge_winding(gc, za, zb, fa, fb, 0)?;
            za = zb;
            fa = fb;
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Roots with `re_min <= Re z <= re_max`; the strip is closed off at a
/// height beyond which `|z|^2` dominates `(|a||z| + b) e^{r Re z}`.
pub fn strip_root_count(gc: &GeneralChar, re_min: f64, re_max: f64) -> Result<i64> {
    let e = (gc.r * re_min).exp().max((gc.r * re_max).exp());
    let y = e * gc.a.abs() + (e * gc.b).sqrt() + re_min.abs().max(re_max.abs()) + 1.0;
    rect_root_count(
        gc,
        &Rect {
            re_min,
            re_max,
            im_min: -y,
            im_max: y,
        },
    )
}
