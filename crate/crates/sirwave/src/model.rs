//! SIR model with delayed diffusion: parameters, equilibria, the wave-frame
//! nonlinearities and the constants the existence construction is built on.
//!
//! Wave-frame variables are `phi = B/mu1 - N` (with `N = S + I + R`),
//! `psi = I`, `chi = R`; the wave front runs from `(0, 0, 0)` at `-inf` to the
//! endemic limits `k = (B/mu1 - S* - I* - R*, I*, R*)` at `+inf`.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The three unknowns of the wave system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Phi,
    Psi,
    Chi,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Phi, Component::Psi, Component::Chi];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["phi", "psi", "chi"][self as usize]
    }
}

/// Epidemiological and diffusion constants, the four delays and the wave speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParameters {
    pub d_s: f64,
    pub d_i: f64,
    pub d_r: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `tau1..tau3` delay the diffusion of S, I, R; `tau4` delays the incidence.
    pub tau: [f64; 4],
    pub c: f64,
}

fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}

impl SirParameters {
    /// Check the type invariants; every violation is reported by field name.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_s", self.d_s),
            ("d_i", self.d_i),
            ("d_r", self.d_r),
            ("b", self.b),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("c", self.c),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(invalid("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        for (i, &t) in self.tau.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(invalid(&format!("tau{}", i + 1), format!("must be >= 0, got {t}")));
            }
        }
        let min123 = self.tau[0].min(self.tau[1]).min(self.tau[2]);
        if self.tau[3] > min123 {
            return Err(invalid(
                "tau4",
                format!("must not exceed min(tau1, tau2, tau3) = {min123}"),
            ));
        }
        Ok(())
    }

    pub fn diffusion(&self, c: Component) -> f64 {
        [self.d_s, self.d_i, self.d_r][c.index()]
    }

    /// `B / mu1`, the total population at the disease-free state.
    pub fn capacity(&self) -> f64 {
        self.b / self.mu1
    }

    /// Wave-frame delays `r_i = c * tau_i`.
    pub fn wave_delays(&self) -> [f64; 4] {
        self.tau.map(|t| self.c * t)
    }
}

/// Wave-frame delays, PQM shift constants, profile bounds and endemic limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveFrameParameters {
    pub r: [f64; 4],
    pub beta_shift: [f64; 3],
    pub m: [f64; 3],
    pub k: [f64; 3],
}

impl WaveFrameParameters {
    /// Derive the wave-frame constants for bounds `m`, rejecting
    /// configurations where the construction cannot apply.
    pub fn new(p: &SirParameters, m: [f64; 3]) -> Result<Self> {
        p.validate()?;
        for (i, &mi) in m.iter().enumerate() {
            if !mi.is_finite() || mi <= 0.0 {
                return Err(invalid(&format!("m{}", i + 1), format!("must be > 0, got {mi}")));
            }
        }
        check_thresholds(p, m)?;
        let total: f64 = m.iter().sum();
        if total > p.capacity() * (1.0 + 1e-12) {
            return Err(invalid(
                "m1+m2+m3",
                format!("sum {total} exceeds B/mu1 = {}", p.capacity()),
            ));
        }
        let k = wave_limits(p)?;
        for i in 0..3 {
            if k[i] <= 0.0 {
                return Err(invalid(
                    &format!("k{}", i + 1),
                    format!("endemic wave limit {} is not positive", k[i]),
                ));
            }
            if k[i] >= m[i] {
                return Err(invalid(
                    &format!("m{}", i + 1),
                    format!("bound {} must exceed the limit k{} = {}", m[i], i + 1, k[i]),
                ));
            }
        }
        Ok(WaveFrameParameters {
            r: p.wave_delays(),
            beta_shift: shift_constants(p, m),
            m,
            k,
        })
    }
}

/// `R0 = B beta / (mu1 (mu2 + gamma))`.
pub fn reproduction_number(p: &SirParameters) -> f64 {
    p.b * p.beta / (p.mu1 * (p.mu2 + p.gamma))
}

/// Gate on the two threshold conditions: `R0 > 1` and `c >= c*`.
pub fn check_thresholds(p: &SirParameters, m: [f64; 3]) -> Result<()> {
    let r0 = reproduction_number(p);
    if r0 <= 1.0 {
        return Err(Error::NoEndemicState { r0 });
    }
    let c_star = critical_wave_speed(p, m);
    if p.c < c_star {
        return Err(Error::SubcriticalSpeed { c: p.c, c_star });
    }
    Ok(())
}

/// `(B/mu1, 0, 0)`.
pub fn disease_free_equilibrium(p: &SirParameters) -> (f64, f64, f64) {
    (p.capacity(), 0.0, 0.0)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::NonConvergence(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// Steady-state residual in I after eliminating S = (mu2+gamma)(1+alpha I)/beta.
fn steady_residual(p: &SirParameters, i: f64) -> f64 {
    let g = p.mu2 + p.gamma;
    p.b - p.mu1 * g * (1.0 + p.alpha * i) / p.beta - g * i
}

fn from_infected(p: &SirParameters, i: f64) -> (f64, f64, f64) {
    let g = p.mu2 + p.gamma;
    (g * (1.0 + p.alpha * i) / p.beta, i, p.gamma * i / p.mu3)
}

/// Positive steady state `(S*, I*, R*)`, solved numerically.
///
/// At `R0 = 1` (to 1e-12) the endemic state merges with the disease-free one.
pub fn endemic_equilibrium(p: &SirParameters) -> Result<(f64, f64, f64)> {
    let r0 = reproduction_number(p);
    if (r0 - 1.0).abs() <= 1e-12 {
        return Ok(disease_free_equilibrium(p));
    }
    if r0 < 1.0 {
        return Err(Error::NoEndemicState { r0 });
    }
    let hi = p.b / (p.mu2 + p.gamma);
    let i = bisect(|i| steady_residual(p, i), 0.0, hi)?;
    Ok(from_infected(p, i))
}

/// The non-trivial steady-state branch continued through the threshold:
/// `I*` is negative (unphysical) for `R0 < 1` and crosses zero at `R0 = 1`.
pub fn endemic_branch(p: &SirParameters) -> Result<(f64, f64, f64)> {
    let span = 1.0 + p.b / (p.mu2 + p.gamma) + p.mu1 / p.beta;
    let i = bisect(|i| steady_residual(p, i), -span, span)?;
    Ok(from_infected(p, i))
}

/// The closed forms as printed in the source (with `B alpha` in the I*, R*
/// numerators).
pub fn printed_endemic_closed_form(p: &SirParameters) -> (f64, f64, f64) {
    let g = p.mu2 + p.gamma;
    let den = p.beta + p.alpha * p.mu1;
    let num = p.b * p.alpha - p.mu1 * g;
    (
        (p.b * p.alpha + g) / den,
        num / (den * g),
        p.gamma * num / (p.mu3 * den * g),
    )
}

/// Numeric equilibrium compared with the printed closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormComparison {
    pub numeric: (f64, f64, f64),
    pub printed: (f64, f64, f64),
    pub max_abs_diff: f64,
    pub agrees: bool,
}

pub fn compare_closed_form(p: &SirParameters) -> Result<ClosedFormComparison> {
    let numeric = endemic_equilibrium(p)?;
    let printed = printed_endemic_closed_form(p);
    let d = (numeric.0 - printed.0)
        .abs()
        .max((numeric.1 - printed.1).abs())
        .max((numeric.2 - printed.2).abs());
    Ok(ClosedFormComparison {
        numeric,
        printed,
        max_abs_diff: d,
        agrees: d < 1e-9,
    })
}

/// Endemic wave limits `k = (B/mu1 - S* - I* - R*, I*, R*)`.
pub fn wave_limits(p: &SirParameters) -> Result<[f64; 3]> {
    let (s, i, r) = endemic_equilibrium(p)?;
    Ok([p.capacity() - s - i - r, i, r])
}

/// Constant terms `q_1..q_6` of the quadratics `l^2 - c l + q`.
///
/// `q_3` uses the constant of the delayed polynomial, `beta B M2 - (gamma + mu2)`,
/// for both the quadratic and its delayed counterpart so the pair agree at zero delay.
pub fn char_constants(p: &SirParameters, m: [f64; 3]) -> [f64; 6] {
    let [m1, m2, m3] = m;
    [
        -p.mu1 + (p.mu2 - p.mu1) * m2 / m1 + (p.mu3 - p.mu1) * m3 / m1,
        -p.mu1,
        p.beta * p.b * m2 - (p.gamma + p.mu2),
        -(p.gamma + p.mu2),
        p.gamma * m2 / m3 - p.mu3,
        -p.mu3,
    ]
}

/// `c* = max_i 2 sqrt(|q_i|)` over the six characteristic constants.
pub fn critical_wave_speed(p: &SirParameters, m: [f64; 3]) -> f64 {
    char_constants(p, m)
        .iter()
        .map(|q| 2.0 * q.abs().sqrt())
        .fold(0.0, f64::max)
}

/// Point values a wave-frame nonlinearity reads: the three components at
/// the evaluation time and `psi` one incidence delay earlier.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WavePoint {
    pub phi: f64,
    pub psi: f64,
    pub chi: f64,
    pub psi_lag: f64,
}

impl WavePoint {
    pub fn constant(v: [f64; 3]) -> Self {
        WavePoint {
            phi: v[0],
            psi: v[1],
            chi: v[2],
            psi_lag: v[1],
        }
    }

    pub fn sup_distance(&self, o: &WavePoint) -> f64 {
        (self.phi - o.phi)
            .abs()
            .max((self.psi - o.psi).abs())
            .max((self.chi - o.chi).abs())
            .max((self.psi_lag - o.psi_lag).abs())
    }
}

/// Wave-frame nonlinearity without the domain check.
#[inline]
pub fn reaction(p: &SirParameters, c: Component, x: &WavePoint) -> f64 {
    match c {
        Component::Phi => {
            -p.mu1 * x.phi + (p.mu2 - p.mu1) * x.psi + (p.mu3 - p.mu1) * x.chi
        }
        Component::Psi => {
            let s = p.capacity() - x.phi - x.psi - x.chi;
            -(p.mu2 + p.gamma) * x.psi + p.beta * s * x.psi_lag / (1.0 + p.alpha * x.psi_lag)
        }
        Component::Chi => -p.mu3 * x.chi + p.gamma * x.psi,
    }
}

/// A history segment sampled uniformly on `[-span, 0]` (last sample at 0).
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub values: &'a [f64],
    pub span: f64,
}

impl<'a> Segment<'a> {
    /// Linear interpolation at `s in [-span, 0]`.
    pub fn at(&self, s: f64) -> f64 {
        let n = self.values.len();
        if n == 1 || self.span == 0.0 {
            return self.values[n - 1];
        }
        let h = self.span / (n - 1) as f64;
        let x = ((s + self.span) / h).clamp(0.0, (n - 1) as f64);
        let j = (x.floor() as usize).min(n - 2);
        let u = x - j as f64;
        (1.0 - u) * self.values[j] + u * self.values[j + 1]
    }

    pub fn now(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// `f_{ci}` on history segments; the incidence reads `psi(-r4)`.
pub fn nonlinearity(
    p: &SirParameters,
    i: Component,
    phi: &Segment,
    psi: &Segment,
    chi: &Segment,
) -> Result<f64> {
    let r4 = p.c * p.tau[3];
    let x = WavePoint {
        phi: phi.now(),
        psi: psi.now(),
        chi: chi.now(),
        psi_lag: psi.at(-r4),
    };
    let slack = p.capacity() - x.phi - x.psi - x.chi;
    if slack < -1e-12 * p.capacity() {
        return Err(Error::DomainViolation { slack });
    }
    Ok(reaction(p, i, &x))
}

/// Shift constants making the H operators monotone on the box `[0, m]`:
/// `beta1 = mu1`, `beta2 = mu2 + gamma + beta M2 + beta B/mu1`, `beta3 = mu3 + gamma`.
pub fn shift_constants(p: &SirParameters, m: [f64; 3]) -> [f64; 3] {
    [
        p.mu1,
        p.mu2 + p.gamma + p.beta * m[1] + p.beta * p.capacity(),
        p.mu3 + p.gamma,
    ]
}

/// Outcome of the randomized PQM verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PqmReport {
    pub betas: [f64; 3],
    pub samples: usize,
    /// Worst signed margin per inequality (P1, P2, P3, P4, P5 as printed,
    /// P5' in the removed compartment); all must be >= 0.
    pub worst_margin: [f64; 6],
}

/// Names of the checked PQM inequalities, in report order.
pub const PQM_NAMES: [&str; 6] = ["P1", "P2", "P3", "P4", "P5", "P5'"];

fn ordered_pair(rng: &mut ChaCha8Rng, hi: f64) -> (f64, f64) {
    let a = rng.random::<f64>() * hi;
    let b = rng.random::<f64>() * hi;
    (a.max(b), a.min(b))
}

/// Evaluate the PQM inequalities for shift constants `betas` on `samples`
/// random ordered pairs in the box `[0, M1] x [0, M2] x [0, M3]`.
pub fn verify_pqm(
    p: &SirParameters,
    m: [f64; 3],
    betas: [f64; 3],
    samples: usize,
    seed: u64,
) -> Result<PqmReport> {
    use Component::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [f64::INFINITY; 6];
    let scale = 1.0 + betas.iter().fold(0.0f64, |a, &b| a.max(b)) * m.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = 1e-12 * scale;
    for _ in 0..samples {
        let (ph1, ph2) = ordered_pair(&mut rng, m[0]);
        let (ps1, ps2) = ordered_pair(&mut rng, m[1]);
        let (pl1, pl2) = ordered_pair(&mut rng, m[1]);
        let (ch1, ch2) = ordered_pair(&mut rng, m[2]);
        let hi = WavePoint { phi: ph1, psi: ps1, chi: ch1, psi_lag: pl1 };
        let lo = WavePoint { phi: ph2, psi: ps2, chi: ch2, psi_lag: pl2 };
        let psi_lo = WavePoint { psi: ps2, psi_lag: pl2, ..hi };
        let phi_lo = WavePoint { phi: ph2, ..hi };
        let chi_lo = WavePoint { chi: ch2, ..hi };
        let margins = [
            reaction(p, Phi, &hi) - reaction(p, Phi, &lo) + betas[0] * (ph1 - ph2),
            reaction(p, Psi, &hi) - reaction(p, Psi, &psi_lo) + betas[1] * (ps1 - ps2),
            -(reaction(p, Psi, &hi) - reaction(p, Psi, &phi_lo)),
            -(reaction(p, Psi, &hi) - reaction(p, Psi, &chi_lo)),
            reaction(p, Chi, &hi) - reaction(p, Chi, &psi_lo) + betas[2] * (ps1 - ps2),
            reaction(p, Chi, &hi) - reaction(p, Chi, &chi_lo) + betas[2] * (ch1 - ch2),
        ];
        for (j, &v) in margins.iter().enumerate() {
            if v < -tol {
                return Err(Error::PqmVerificationFailed {
                    which: PQM_NAMES[j].to_string(),
                    amount: v,
                    sample: vec![ph1, ph2, ps1, ps2, pl1, pl2, ch1, ch2],
                });
            }
            worst[j] = worst[j].min(v);
        }
    }
    Ok(PqmReport {
        betas,
        samples,
        worst_margin: worst,
    })
}

/// Shift constants, confirmed on 10^4 random ordered samples.
pub fn pqm_constants(p: &SirParameters, wp: &WaveFrameParameters, seed: u64) -> Result<[f64; 3]> {
    let betas = shift_constants(p, wp.m);
    verify_pqm(p, wp.m, betas, 10_000, seed)?;
    Ok(betas)
}

/// Lipschitz constants of `f_{c1..3}` on the box in the sup norm over histories.
pub fn lipschitz_bounds(p: &SirParameters, m: [f64; 3]) -> [f64; 3] {
    [
        p.mu1 + (p.mu2 - p.mu1).abs() + (p.mu3 - p.mu1).abs(),
        p.mu2 + p.gamma + 3.0 * p.beta * m[1] + p.beta * p.capacity(),
        p.mu3 + p.gamma,
    ]
}

/// Largest observed `|f_i(x) - f_i(y)| / (L_i |x - y|)` over random pairs.
pub fn lipschitz_ratio(p: &SirParameters, m: [f64; 3], samples: usize, seed: u64) -> [f64; 3] {
    let l = lipschitz_bounds(p, m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| WavePoint {
        phi: rng.random::<f64>() * m[0],
        psi: rng.random::<f64>() * m[1],
        chi: rng.random::<f64>() * m[2],
        psi_lag: rng.random::<f64>() * m[1],
    };
    let mut worst = [0.0f64; 3];
    for _ in 0..samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let d = x.sup_distance(&y);
        if d == 0.0 {
            continue;
        }
        for c in Component::ALL {
            let ratio = (reaction(p, c, &x) - reaction(p, c, &y)).abs() / (l[c.index()] * d);
            worst[c.index()] = worst[c.index()].max(ratio);
        }
    }
    worst
}
