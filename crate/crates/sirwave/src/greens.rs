//! Bounded Green's kernel of `x''(t) - a x'(t+r) - b x(t+r) = f(t)` and the
//! convolution inverse `x = G * f`.
//!
//! The kernel is the Fourier integral `G(xi) = (1/pi) ∫_0^∞ Re(e^{i xi eta} / D(i eta)) d eta`
//! with `D(z) = z^2 - (a z + b) e^{r z}`. It is evaluated as a periodized
//! trapezoid sum folded onto one FFT. The leading `-1/eta^2` part of `1/D` is
//! summed over the whole lattice in closed form (a Bernoulli polynomial). The
//! `eta^-3` and `eta^-4` terms beyond the cutoff are integrated analytically
//! with sine/cosine integrals.
//!
//! Convolutions never use point samples of `G`: the weights are the exact
//! integrals of `G` against hat functions (Fourier factor `dxi sinc^2`), so the
//! discrete operator is the true inverse applied to the piecewise-linear
//! interpolant of the right-hand side. Profile tails enter as constants.

use crate::charroots::{imaginary_axis_clear, AxisCertificate, GeneralChar};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::{Grid, ProfileFunction};
use crate::special::{tail_cos4, tail_sin3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Closed-form zero-delay kernel: `A e^{l- xi}` for `xi >= 0`, `A e^{l+ xi}`
/// for `xi < 0`, `A = 1/(l- - l+)`.
pub fn green_closed_form_r0(a: f64, b: f64, xi: f64) -> f64 {
    let s = (a * a + 4.0 * b).sqrt();
    let (lm, lp) = ((a - s) / 2.0, (a + s) / 2.0);
    let amp = 1.0 / (lm - lp);
    if xi >= 0.0 {
        amp * (lm * xi).exp()
    } else {
        amp * (lp * xi).exp()
    }
}

/// Quadrature bookkeeping for a sampled kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureInfo {
    pub cutoff: f64,
    pub spacing: f64,
    pub period: f64,
    /// Bound on the neglected `O(eta^-5)` tail beyond the cutoff.
    pub tail_estimate: f64,
}

/// Sampled kernel with its fitted exponential envelope `K e^{-alpha |xi|}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenKernel {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub decay_k: f64,
    pub decay_alpha: f64,
    pub quadrature: QuadratureInfo,
    pub certificate: AxisCertificate,
}

// Closed-form lattice sums for theta in [0, 2pi], extended periodically.
fn clausen_c2(t: f64) -> f64 {
    let t = t.rem_euclid(2.0 * PI);
    PI * PI / 6.0 - PI * t / 2.0 + t * t / 4.0
}
#[inline]
fn inv_delta(gc: &GeneralChar, eta: f64) -> Complex64 {
    1.0 / gc.eval(Complex64::new(0.0, eta))
}

// Asymptotic model of `1/D(i eta) + 1/eta^2` through `O(eta^-4)`.
#[inline]
fn model(gc: &GeneralChar, eta: f64) -> Complex64 {
    let e1 = Complex64::from_polar(1.0, gc.r * eta);
    let (i3, i4) = (1.0 / (eta * eta * eta), 1.0 / (eta * eta * eta * eta));
    Complex64::new(0.0, gc.a * i3) * e1 + e1 * (gc.b * i4) + e1 * e1 * (gc.a * gc.a * i4)
}

// ∫_H^∞ Re(e^{i xi eta} model(eta)) d eta.
fn model_tail(gc: &GeneralChar, cutoff: f64, xi: f64) -> f64 {
    let (a, b, r) = (gc.a, gc.b, gc.r);
    -a * tail_sin3(xi + r, cutoff) + b * tail_cos4(xi + r, cutoff) + a * a * tail_cos4(xi + 2.0 * r, cutoff)
}

/// Decay-rate estimate from the zero-delay quadratic `l^2 - a l - b`.
fn decay_estimate(gc: &GeneralChar) -> f64 {
    let (lm, lp) = gc.quadratic_roots();
    (-lm).min(lp)
}

/// Decay-rate estimate of the kernel for `(a, b, r)`.
pub fn decay_estimate_for(a: f64, b: f64, r: f64) -> Result<f64> {
    Ok(decay_estimate(&GeneralChar::new(a, b, r)?))
}

fn inverse_fft(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
}

/// Sixteen times `max(64, 32 (1 + sqrt b))`. The fold makes extra
/// frequencies nearly free, and the larger cutoff pushes the quadrature
/// floor to ~1e-12, so the far tail of `G` stays above noise.
pub fn default_cutoff(b: f64) -> f64 {
    16.0 * 64f64.max(32.0 * (1.0 + b.sqrt()))
}

/// Sample `G` on `grid`.
pub fn green_numeric(a: f64, b: f64, r: f64, grid: Grid, exec: Execution) -> Result<GreenKernel> {
    green_numeric_with(a, b, r, grid, default_cutoff(b), 1e-6, exec)
}

/// [`green_numeric`] with an explicit frequency cutoff and tail tolerance.
pub fn green_numeric_with(
    a: f64,
    b: f64,
    r: f64,
    grid: Grid,
    cutoff: f64,
    tol_quad: f64,
    exec: Execution,
) -> Result<GreenKernel> {
    let gc = GeneralChar::new(a, b, r)?;
    let certificate =
        imaginary_axis_clear(&gc).map_err(|e| Error::NoCertificate(e.to_string()))?;
    let alpha_est = decay_estimate(&gc);
    let span = grid.len as f64 * grid.dx + grid.start.abs().max(grid.end().abs());
    let nf = ((span + 36.0 / (0.8 * alpha_est)) / grid.dx)
        .ceil()
        .max(grid.len as f64) as usize;
    let nf = nf.next_power_of_two();
    let period = nf as f64 * grid.dx;
    let h = 2.0 * PI / period;
    let jmax = (cutoff / h).ceil() as usize;
    let cutoff = jmax as f64 * h;

    let xi_max = grid.start.abs().max(grid.end().abs());
    let rest = |eta: f64| inv_delta(&gc, eta) + 1.0 / (eta * eta);
    // Beyond the model: O(eta^-5) integrand, plus the next Euler-Maclaurin
    // term of the lattice-to-integral switch at the cutoff.
    let remainder = (rest(cutoff) - model(&gc, cutoff)).norm();
    let em = h * h / 12.0 * (xi_max + gc.r.abs() + 3.0 / cutoff) * rest(cutoff).norm();
    let tail_estimate = (remainder * cutoff / 4.0 + em) / PI;
    if tail_estimate > tol_quad {
        return Err(Error::QuadratureStalled {
            estimate: tail_estimate,
            tol: tol_quad,
        });
    }

    let start = grid.start;
    let terms = exec::map(exec, jmax, |k| {
        let eta = (k + 1) as f64 * h;
        rest(eta) * Complex64::from_polar(h, start * eta)
    });
    let mut bins = vec![Complex64::new(0.0, 0.0); nf];
    for (k, t) in terms.iter().enumerate() {
        bins[(k + 1) % nf] += *t;
    }
    inverse_fft(&mut bins);
    let end_value = rest(cutoff);
    let values = exec::map(exec, grid.len, |m| {
        let xi = grid.point(m);
        let lattice = -clausen_c2(xi * h) / h;
        let beyond = model_tail(&gc, cutoff, xi)
            - 0.5 * h * (Complex64::from_polar(1.0, xi * cutoff) * end_value).re;
        (bins[m].re + 0.5 * h * (-1.0 / b) + lattice + beyond) / PI
    });
    let mut kernel = GreenKernel {
        a,
        b,
        r,
        grid,
        values,
        decay_k: 0.0,
        decay_alpha: 0.0,
        quadrature: QuadratureInfo {
            cutoff,
            spacing: h,
            period,
            tail_estimate,
        },
        certificate,
    };
    let (k, alpha) = decay_fit(&kernel)?;
    kernel.decay_k = k;
    kernel.decay_alpha = alpha;
    Ok(kernel)
}

/// Least-squares fit of `log|G|` against `|xi|` on each side over the tail
/// region: below `1e-2 max|G|` and above both `1e-10 max|G|` and `1e4` times
/// the quadrature error bound. The slower rate is kept, and `K` is inflated
/// until the envelope covers every sample.
pub fn decay_fit(k: &GreenKernel) -> Result<(f64, f64)> {
    let gmax = k.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-10 * gmax).max(1e4 * k.quadrature.tail_estimate);
    let mut rates = Vec::new();
    let mut used = 0;
    for side in [-1.0, 1.0] {
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (j, &v) in k.values.iter().enumerate() {
            let xi = k.grid.point(j);
            if xi * side <= 0.0 {
                continue;
            }
            let g = v.abs();
            if g > floor && g < 1e-2 * gmax {
                let (x, y) = (xi.abs(), g.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                n += 1.0;
            }
        }
        if n >= 8.0 {
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            if slope < 0.0 {
                rates.push(-slope);
                used += n as usize;
            }
        }
    }
    if used < 16 || rates.is_empty() {
        return Err(Error::FitFailed { found: used });
    }
    let alpha = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let kk = k
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v.abs() * (alpha * k.grid.point(j).abs()).exp())
        .fold(0.0f64, f64::max);
    Ok((kk, alpha))
}

impl GreenKernel {
    /// `∫ G` by the trapezoid rule, corrected for the unit jump of `G'` at the
    /// origin when the origin is a grid node.
    pub fn mass(&self) -> f64 {
        let dx = self.grid.dx;
        let n = self.values.len();
        let mut s = 0.5 * (self.values[0] + self.values[n - 1]);
        s += self.values[1..n - 1].iter().sum::<f64>();
        s *= dx;
        let origin = -self.grid.start / dx;
        if (origin - origin.round()).abs() < 1e-9 && origin > 0.0 && origin < (n - 1) as f64 {
            s += dx * dx / 12.0;
        }
        s
    }

    /// Number of samples outside the fitted envelope.
    pub fn envelope_violations(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .filter(|(j, v)| {
                v.abs() > self.decay_k * (-self.decay_alpha * self.grid.point(*j).abs()).exp() * (1.0 + 1e-12)
            })
            .count()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Hat-function weights `W_m = ∫ G(m dxi + shift + u) hat(u) du`, `|m| <= L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelWeights {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub shift: f64,
    pub dxi: f64,
    pub half_width: usize,
    pub weights: Vec<f64>,
}

impl KernelWeights {
    /// Weights out to where the kernel envelope falls below `1e-16`.
    pub fn new(a: f64, b: f64, r: f64, dxi: f64, shift: f64, exec: Execution) -> Result<Self> {
        let gc = GeneralChar::new(a, b, r)?;
        imaginary_axis_clear(&gc).map_err(|e| Error::NoCertificate(e.to_string()))?;
        let alpha = 0.8 * decay_estimate(&gc);
        let half_width = ((37.0 / alpha + shift.abs()) / dxi).ceil() as usize;
        Self::with_half_width(gc, dxi, shift, half_width, exec)
    }

    fn with_half_width(gc: GeneralChar, dxi: f64, shift: f64, half_width: usize, exec: Execution) -> Result<Self> {
        let alpha = 0.8 * decay_estimate(&gc);
        let span = (2 * half_width + 1) as f64 * dxi;
        let nf = (((span + 36.0 / alpha) / dxi).ceil() as usize)
            .max(2 * half_width + 1)
            .next_power_of_two();
        let h = 2.0 * PI / (nf as f64 * dxi);
        // sinc^2 makes the integrand O(eta^-4); 16 Nyquist bands leave a
        // truncation error ~1e-6 dxi^2.
        let jmax = 16 * nf;
        let terms = exec::map(exec, jmax + 1, |j| {
            let eta = j as f64 * h;
            let w = if j == 0 || j == jmax { 0.5 * h } else { h };
            let x = 0.5 * eta * dxi;
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            inv_delta(&gc, eta) * Complex64::from_polar(w * dxi * sinc * sinc, shift * eta)
        });
        let mut bins = vec![Complex64::new(0.0, 0.0); nf];
        for (j, t) in terms.iter().enumerate() {
            bins[j % nf] += *t;
        }
        inverse_fft(&mut bins);
        let weights = (0..=2 * half_width)
            .map(|i| {
                let m = i as isize - half_width as isize;
                bins[m.rem_euclid(nf as isize) as usize].re / PI
            })
            .collect();
        Ok(KernelWeights {
            a: gc.a,
            b: gc.b,
            r: gc.r,
            shift,
            dxi,
            half_width,
            weights,
        })
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `W_m` for `m in [-L, L]`.
    pub fn weight(&self, m: isize) -> f64 {
        self.weights[(m + self.half_width as isize) as usize]
    }
}

/// FFT-planned linear convolution of one weight set with profiles of a fixed
/// length.
#[derive(Clone)]
pub struct Convolver {
    weights: KernelWeights,
    n: usize,
    size: usize,
    spectrum: Vec<Complex64>,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("n", &self.n)
            .field("size", &self.size)
            .field("half_width", &self.weights.half_width)
            .finish()
    }
}

impl Convolver {
    pub fn new(weights: KernelWeights, n: usize) -> Self {
        let l = weights.half_width;
        let size = (n + 4 * l + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); size];
        for (i, &w) in weights.weights.iter().enumerate() {
            spectrum[i] = Complex64::new(w, 0.0);
        }
        fwd.process(&mut spectrum);
        Convolver {
            weights,
            n,
            size,
            spectrum,
            fwd,
            inv,
        }
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    /// `x_j = sum_m W_m h_{j-m}` with `h` extended by its tail constants; the
    /// output tails are `W`-sums of the input tails.
    pub fn apply(&self, h: &ProfileFunction) -> Result<ProfileFunction> {
        if (h.grid.dx - self.weights.dxi).abs() > 1e-12 * self.weights.dxi {
            return Err(Error::GridMismatch(format!(
                "kernel spacing {} vs profile spacing {}",
                self.weights.dxi, h.grid.dx
            )));
        }
        if h.values.len() != self.n {
            return Err(Error::GridMismatch(format!(
                "convolver planned for {} points, profile has {}",
                self.n,
                h.values.len()
            )));
        }
        let l = self.weights.half_width as isize;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        // Subtract the left tail so the padded signal is zero beyond the
        // right edge of the buffer after wrap-around.
        let base = h.left;
        for k in 0..(self.n as isize + 2 * l) {
            buf[k as usize] = Complex64::new(h.sample(k - l) - base, 0.0);
        }
        self.fwd.process(&mut buf);
        for (x, s) in buf.iter_mut().zip(&self.spectrum) {
            *x *= s;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        let total = self.weights.sum();
        let values = (0..self.n)
            .map(|j| buf[j + 2 * l as usize].re * scale + base * total)
            .collect();
        Ok(ProfileFunction::new(h.grid, values, h.left * total, h.right * total))
    }
}

/// One-shot convolution `W * h`.
pub fn convolve(weights: &KernelWeights, h: &ProfileFunction) -> Result<ProfileFunction> {
    Convolver::new(weights.clone(), h.values.len()).apply(h)
}

/// `x = G * f`, the bounded solution of `x'' - a x'(t+r) - b x(t+r) = f`.
pub fn solve_linear_fde(a: f64, b: f64, r: f64, f: &ProfileFunction, exec: Execution) -> Result<ProfileFunction> {
    let w = KernelWeights::new(a, b, r, f.grid.dx, 0.0, exec)?;
    let mut x = convolve(&w, f)?;
    x.left = -f.left / b;
    x.right = -f.right / b;
    Ok(x)
}

/// Sup over interior nodes of `|x'' - a x'(t+r) - b x(t+r) - f|` with a
/// centered second difference and cubic interpolation at the shifted points.
pub fn fde_defect(a: f64, b: f64, r: f64, x: &ProfileFunction, f: &ProfileFunction) -> f64 {
    let g = x.grid;
    let margin = 2 + (r.abs() / g.dx).ceil() as usize;
    (margin..g.len - margin)
        .map(|i| {
            let t = g.point(i);
            (x.second_difference(i) - a * x.derivative(t + r) - b * x.eval(t + r) - f.values[i]).abs()
        })
        .fold(0.0, f64::max)
}
