//! Crossed monotone iteration between a super and a sub solution.
//!
//! Each wave equation is rewritten as `x = F_i(x) = -(1/D_i) W_i * H_i(x)`
//! with `H_i = f_i + beta_i x_i`, where `W_i` are the hat weights of the
//! Green's kernel for `(c/D_i, beta_i/D_i, r_i)` shifted by `r_i`. The upper
//! sequence starts at the super solution and reads `phi`, `chi` from the
//! lower sequence in the infected equation (and vice versa), because the
//! incidence is decreasing in those two arguments.
//!
//! Nothing here assumes the iteration is monotone; every step is measured
//! and the trace says exactly where it was not.

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::greens::{decay_estimate_for, Convolver, KernelWeights};
use crate::grid::{Grid, ProfileFunction};
use crate::model::{reaction, Component, SirParameters, WaveFrameParameters, WavePoint};
use crate::profiles::ProfileTriple;
use serde::Serialize;

/// `sup_t e^{-mu |t|} |Phi(t)|` with the Euclidean norm of the triple at
/// each node. The tails carry weight `e^{-mu |t|} -> 0`, so only the grid
/// contributes.
pub fn decay_norm(delta: &ProfileTriple, mu: f64) -> f64 {
    let g = delta.grid();
    (0..g.len)
        .map(|i| {
            let v = delta.phi.values[i].powi(2) + delta.psi.values[i].powi(2) + delta.chi.values[i].powi(2);
            v.sqrt() * (-mu * g.point(i).abs()).exp()
        })
        .fold(0.0, f64::max)
}

/// Componentwise `a - b`.
pub fn difference(a: &ProfileTriple, b: &ProfileTriple) -> ProfileTriple {
    ProfileTriple {
        phi: sub(&a.phi, &b.phi),
        psi: sub(&a.psi, &b.psi),
        chi: sub(&a.chi, &b.chi),
    }
}

/// Componentwise `(a + b) / 2`.
pub fn midpoint(a: &ProfileTriple, b: &ProfileTriple) -> ProfileTriple {
    let mid = |x: &ProfileFunction, y: &ProfileFunction| {
        ProfileFunction::new(
            x.grid,
            x.values.iter().zip(&y.values).map(|(p, q)| 0.5 * (p + q)).collect(),
            0.5 * (x.left + y.left),
            0.5 * (x.right + y.right),
        )
    };
    ProfileTriple {
        phi: mid(&a.phi, &b.phi),
        psi: mid(&a.psi, &b.psi),
        chi: mid(&a.chi, &b.chi),
    }
}

fn sub(a: &ProfileFunction, b: &ProfileFunction) -> ProfileFunction {
    ProfileFunction::new(
        a.grid,
        a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
        a.left - b.left,
        a.right - b.right,
    )
}

/// The fixed-point map on one grid.
#[derive(Debug, Clone)]
pub struct WaveOperator {
    pub params: SirParameters,
    pub beta_shift: [f64; 3],
    pub grid: Grid,
    conv: [Convolver; 3],
    /// Smallest kernel decay rate; the weighted norm uses half of it.
    pub decay: f64,
    pub exec: Execution,
}

impl WaveOperator {
    pub fn new(p: &SirParameters, wp: &WaveFrameParameters, grid: Grid, exec: Execution) -> Result<Self> {
        let mut conv = Vec::with_capacity(3);
        let mut decay = f64::INFINITY;
        for c in Component::ALL {
            let i = c.index();
            let d = p.diffusion(c);
            let (a, b, r) = (p.c / d, wp.beta_shift[i] / d, wp.r[i]);
            let w = KernelWeights::new(a, b, r, grid.dx, r, exec)?;
            decay = decay.min(decay_estimate_for(a, b, r)?);
            conv.push(Convolver::new(w, grid.len));
        }
        Ok(WaveOperator {
            params: *p,
            beta_shift: wp.beta_shift,
            grid,
            conv: conv.try_into().expect("three convolvers"),
            decay,
            exec,
        })
    }

    /// Weight for [`decay_norm`].
    pub fn mu(&self) -> f64 {
        0.5 * self.decay
    }

    /// `H_i` at the grid nodes and tails; the `psi` lag is read by linear
    /// interpolation, which keeps `H` order-preserving.
    pub fn apply_h(&self, eq: Component, own: &ProfileTriple, cross: &ProfileTriple) -> ProfileFunction {
        let p = &self.params;
        let r4 = p.c * p.tau[3];
        let bi = self.beta_shift[eq.index()];
        let (phi, chi) = match eq {
            Component::Psi => (&cross.phi, &cross.chi),
            _ => (&own.phi, &own.chi),
        };
        let g = self.grid;
        let h_at = |x: WavePoint, v: f64| reaction(p, eq, &x) + bi * v;
        let own_x = own.get(eq);
        let values = exec::map(self.exec, g.len, |i| {
            let t = g.point(i);
            let x = WavePoint {
                phi: phi.values[i],
                psi: own.psi.values[i],
                chi: chi.values[i],
                psi_lag: own.psi.eval_linear(t - r4),
            };
            h_at(x, own_x.values[i])
        });
        let tail = |ph: f64, ps: f64, ch: f64, v: f64| {
            h_at(
                WavePoint {
                    phi: ph,
                    psi: ps,
                    chi: ch,
                    psi_lag: ps,
                },
                v,
            )
        };
        ProfileFunction::new(
            g,
            values,
            tail(phi.left, own.psi.left, chi.left, own_x.left),
            tail(phi.right, own.psi.right, chi.right, own_x.right),
        )
    }

    /// `F(own; cross)` for all three components.
    pub fn apply(&self, own: &ProfileTriple, cross: &ProfileTriple) -> Result<ProfileTriple> {
        let mut out = Vec::with_capacity(3);
        for c in Component::ALL {
            let h = self.apply_h(c, own, cross);
            let d = self.params.diffusion(c);
            let x = self.conv[c.index()].apply(&h)?.map(|v| -v / d);
            out.push(x);
        }
        let [phi, psi, chi]: [ProfileFunction; 3] = out.try_into().expect("three components");
        Ok(ProfileTriple { phi, psi, chi })
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterStep {
    pub iterate: usize,
    /// `|U_n - L_n|_mu`.
    pub gap: f64,
    /// `max_i ||U_n - U_{n-1}||_inf`.
    pub upper_step: f64,
    /// `max_i ||L_n - L_{n-1}||_inf`.
    pub lower_step: f64,
    /// `max(U_n - U_{n-1})` over all components (should be <= 0).
    pub upper_rise: f64,
    /// `max(L_{n-1} - L_n)` (should be <= 0).
    pub lower_drop: f64,
    /// `min(U_n - L_n)` (should be >= 0).
    pub sandwich: f64,
    /// Wave-equation residual of `U_n`.
    pub residual: f64,
}

impl IterStep {
    pub fn monotone(&self, tol: f64) -> bool {
        self.upper_rise <= tol && self.lower_drop <= tol && self.sandwich >= -tol
    }
}

/// Stopping and strictness controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationOptions {
    pub max_iter: usize,
    /// Stop when the gap or the upper residual falls below this.
    pub tol: f64,
    /// Allowance for round-off in the monotonicity checks.
    pub mono_tol: f64,
    /// Abort with [`Error::MonotonicityViolation`] at the first violation.
    pub strict: bool,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            max_iter: 400,
            tol: 1e-4,
            mono_tol: 1e-9,
            strict: false,
        }
    }
}

/// Which stopping test ended the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stop {
    /// `|U - L|_mu < tol`; the wave is the midpoint.
    Gap,
    /// Only the upper residual met `tol`; the wave is the upper iterate.
    UpperResidual,
    /// Iteration budget exhausted; the wave is the last upper iterate.
    Budget,
}

/// Final iterates and their trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationResult {
    pub wave: ProfileTriple,
    pub upper: ProfileTriple,
    pub lower: ProfileTriple,
    pub trace: Vec<IterStep>,
    pub stop: Stop,
    /// Whether every step kept the order `L_{n-1} <= L_n <= U_n <= U_{n-1}`.
    pub monotone: bool,
    /// Worst violation of that order over the run.
    pub worst_violation: f64,
    pub mu: f64,
}

impl IterationResult {
    pub fn converged(&self) -> bool {
        self.stop != Stop::Budget
    }

    /// Whether the first `n` gaps strictly decrease.
    pub fn gap_decreasing(&self, n: usize) -> bool {
        self.trace.len() >= n && self.trace[..n].windows(2).all(|w| w[1].gap < w[0].gap)
    }
}

fn max_over(a: &ProfileTriple, b: &ProfileTriple, f: impl Fn(&ProfileFunction, &ProfileFunction) -> f64) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| f(x, y))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sup_diff(x: &ProfileFunction, y: &ProfileFunction) -> f64 {
    sub(x, y).max_abs()
}

fn max_rise(new: &ProfileFunction, old: &ProfileFunction) -> f64 {
    new.values
        .iter()
        .zip(&old.values)
        .map(|(a, b)| a - b)
        .chain([new.left - old.left, new.right - old.right])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Run `U_{n+1} = F(U_n; L_n)`, `L_{n+1} = F(L_n; U_n)` from the given pair.
///
/// Stops when `|U - L|_mu` or the wave residual of `U` drops below
/// `opts.tol`. Without `strict`, order violations and an exhausted budget
/// are recorded, not fatal.
pub fn cross_iterate(
    op: &WaveOperator,
    upper0: &ProfileTriple,
    lower0: &ProfileTriple,
    opts: &IterationOptions,
) -> Result<IterationResult> {
    upper0.grid().check_compatible(&op.grid)?;
    lower0.grid().check_compatible(&op.grid)?;
    let mu = op.mu();
    let (mut u, mut l) = (upper0.clone(), lower0.clone());
    let mut trace = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 1..=opts.max_iter {
        let (nu, nl) = exec::join(op.exec, || op.apply(&u, &l), || op.apply(&l, &u));
        let (nu, nl) = (nu?, nl?);
        let step = IterStep {
            iterate: n,
            gap: decay_norm(&difference(&nu, &nl), mu),
            upper_step: max_over(&nu, &u, sup_diff),
            lower_step: max_over(&nl, &l, sup_diff),
            upper_rise: max_over(&nu, &u, max_rise),
            lower_drop: max_over(&l, &nl, max_rise),
            sandwich: -max_over(&nl, &nu, max_rise),
            residual: wave_residual(&op.params, &nu).into_iter().fold(0.0, f64::max),
        };
        let violation = step.upper_rise.max(step.lower_drop).max(-step.sandwich);
        if violation > opts.mono_tol {
            worst = worst.max(violation);
            if opts.strict {
                let what = if step.upper_rise == violation {
                    "upper sequence increased"
                } else if step.lower_drop == violation {
                    "lower sequence decreased"
                } else {
                    "lower iterate crossed the upper iterate"
                };
                return Err(Error::MonotonicityViolation {
                    iterate: n,
                    amount: violation,
                    what: what.into(),
                });
            }
        }
        let stop = if step.gap < opts.tol {
            Some(Stop::Gap)
        } else if step.residual < opts.tol {
            Some(Stop::UpperResidual)
        } else {
            None
        };
        trace.push(step);
        u = nu;
        l = nl;
        if let Some(stop) = stop {
            let wave = if stop == Stop::Gap { midpoint(&u, &l) } else { u.clone() };
            return Ok(IterationResult {
                wave,
                upper: u,
                lower: l,
                trace,
                stop,
                monotone: worst <= opts.mono_tol,
                worst_violation: worst,
                mu,
            });
        }
    }
    if opts.strict {
        let gap = trace.last().map_or(f64::NAN, |s| s.gap);
        return Err(Error::MaxIterExceeded {
            iterations: opts.max_iter,
            gap,
        });
    }
    Ok(IterationResult {
        wave: u.clone(),
        upper: u,
        lower: l,
        trace,
        stop: Stop::Budget,
        monotone: worst <= opts.mono_tol,
        worst_violation: worst,
        mu,
    })
}

/// Interior sup of `|D_i x_i'' - c x_i'(t+r_i) + f_i(x(t+r_i))|` per
/// component: second differences at nodes, cubic interpolation at shifted
/// points. Nodes whose stencil leaves the grid are skipped.
pub fn wave_residual(p: &SirParameters, x: &ProfileTriple) -> [f64; 3] {
    let g = x.grid();
    let r = p.wave_delays();
    let reach = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let margin = 3 + (reach / g.dx).ceil() as usize;
    let mut out = [0.0; 3];
    if g.len <= 2 * margin {
        return out;
    }
    for c in Component::ALL {
        let i = c.index();
        let f = x.get(c);
        let d = p.diffusion(c);
        let mut worst: f64 = 0.0;
        for j in margin..g.len - margin {
            let t = g.point(j);
            let s = t + r[i];
            let pt = WavePoint {
                phi: x.phi.eval(s),
                psi: x.psi.eval(s),
                chi: x.chi.eval(s),
                psi_lag: x.psi.eval(s - r[3]),
            };
            let v = d * f.second_difference(j) - p.c * f.derivative(s) + reaction(p, c, &pt);
            worst = worst.max(v.abs());
        }
        out[i] = worst;
    }
    out
}

/// Distance of the grid ends from the expected limits `0` and `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticsCheck {
    pub left: [f64; 3],
    pub right: [f64; 3],
}

impl AsymptoticsCheck {
    pub fn worst(&self) -> f64 {
        self.left.iter().chain(&self.right).fold(0.0, |m, v| m.max(*v))
    }
}

pub fn asymptotics_check(x: &ProfileTriple, k: [f64; 3]) -> AsymptoticsCheck {
    let n = x.grid().len;
    let mut out = AsymptoticsCheck {
        left: [0.0; 3],
        right: [0.0; 3],
    };
    for (i, f) in x.components().iter().enumerate() {
        out.left[i] = f.values[0].abs();
        out.right[i] = (f.values[n - 1] - k[i]).abs();
    }
    out
}
