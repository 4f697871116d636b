//! Explicit method-of-lines simulation of the transformed delayed-diffusion
//! system, for cross-checking the wave solver.
//!
//! Fields are the transformed variables `(B/mu1 - N, I, R)`, so the reaction
//! terms are exactly the wave-frame nonlinearities and the two uniform
//! states are `0` and `k`. Each diffusion term acts on the field `tau_i` in
//! the past, read from a ring buffer of past states with linear
//! interpolation between stored steps; the incidence reads `I` at `t - tau4`.
//! Boundaries are zero-flux.

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::{Grid, ProfileFunction};
use crate::model::{reaction, Component, SirParameters, WavePoint};
use crate::profiles::ProfileTriple;
use serde::Serialize;
use std::collections::VecDeque;

/// Threshold for [`Error::BlowUp`].
pub const BLOW_UP: f64 = 1e6;

type Fields = [Vec<f64>; 3];

/// Smallest grid spacing that keeps delayed diffusion well behaved.
///
/// `u_t = D u_xx(t - tau)` amplifies Fourier modes with `D k^2 tau > pi/2`,
/// so the grid must not resolve them: with the discrete Laplacian's largest
/// eigenvalue `4 D / dx^2` this needs `dx > sqrt(8 D tau / pi)`. The factor
/// 1.5 leaves room for the time discretization.
pub fn stable_dx(p: &SirParameters) -> f64 {
    let mut worst: f64 = 0.0;
    for (d, t) in [p.d_s, p.d_i, p.d_r].iter().zip(&p.tau[..3]) {
        worst = worst.max(d * t);
    }
    1.5 * (8.0 * worst / std::f64::consts::PI).sqrt()
}

/// Largest step for spacing `dx`: `tau_min / m` for the smallest `m` such
/// that explicit Euler with an `m`-step lag stays inside its stability bound
/// `lambda dt < 2 sin(pi / (2 (2m + 1)))` (with margin 0.8) for every
/// delayed component, and never above `0.4 dx^2 / D_max`.
pub fn stable_dt(p: &SirParameters, dx: f64) -> f64 {
    let d = [p.d_s, p.d_i, p.d_r];
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let cap = 0.4 * dx * dx / dmax;
    let tmin = p.tau.iter().cloned().filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min);
    if !tmin.is_finite() {
        return cap;
    }
    for m in 1..100_000usize {
        let dt = tmin / m as f64;
        let ok = (0..3).all(|i| {
            let lambda = 4.0 * d[i] / (dx * dx);
            let lag = (p.tau[i] / dt).round();
            lambda * dt < 0.8 * 2.0 * (std::f64::consts::PI / (2.0 * (2.0 * lag + 1.0))).sin()
        });
        if ok && dt <= cap {
            return dt;
        }
    }
    cap
}

/// Current fields plus enough past steps to cover the largest delay.
#[derive(Debug, Clone)]
pub struct PdeState {
    pub grid: Grid,
    pub fields: Fields,
    /// Most recent first; `history[m]` is the state `m` steps ago
    /// (`history[0]` equals `fields`).
    history: VecDeque<Fields>,
    pub dt: f64,
    pub time: f64,
    /// Number of point values clipped back to zero in `I` or `R`.
    pub clips: usize,
}

impl PdeState {
    /// Start from `fields`, held constant over `[-tau_max, 0]`.
    pub fn new(grid: Grid, fields: Fields, p: &SirParameters, dt: f64) -> Result<Self> {
        for f in &fields {
            if f.len() != grid.len {
                return Err(Error::GridMismatch(format!(
                    "field has {} points, grid has {}",
                    f.len(),
                    grid.len
                )));
            }
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt".into(),
                reason: format!("must be > 0, got {dt}"),
            });
        }
        let tau_max = p.tau.iter().cloned().fold(0.0, f64::max);
        let depth = (tau_max / dt).ceil() as usize + 2;
        let history = std::iter::repeat_n(fields.clone(), depth).collect();
        Ok(PdeState {
            grid,
            fields,
            history,
            dt,
            time: 0.0,
            clips: 0,
        })
    }

    /// Spatially uniform state.
    pub fn uniform(grid: Grid, v: [f64; 3], p: &SirParameters, dt: f64) -> Result<Self> {
        Self::new(grid, v.map(|x| vec![x; grid.len]), p, dt)
    }

    /// `u(x, 0) = wave(x + shift)`.
    pub fn from_wave(grid: Grid, wave: &ProfileTriple, shift: f64, p: &SirParameters, dt: f64) -> Result<Self> {
        let f = |c: &ProfileFunction| (0..grid.len).map(|j| c.eval(grid.point(j) + shift)).collect();
        Self::new(grid, [f(&wave.phi), f(&wave.psi), f(&wave.chi)], p, dt)
    }

    pub fn depth(&self) -> usize {
        self.history.len()
    }

    /// Component `c` at `t - lag`, linearly interpolated between stored steps.
    fn delayed(&self, c: usize, lag: f64, j: usize) -> f64 {
        let s = lag / self.dt;
        let m = s.floor() as usize;
        let u = s - m as f64;
        let a = self.history[m][c][j];
        if u == 0.0 {
            a
        } else {
            (1.0 - u) * a + u * self.history[m + 1][c][j]
        }
    }

    /// Centered second difference of the delayed field with mirrored ghosts.
    fn delayed_laplacian(&self, c: usize, lag: f64, j: usize) -> f64 {
        let n = self.grid.len;
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j + 1 == n { n - 2 } else { j + 1 };
        let h2 = self.grid.dx * self.grid.dx;
        (self.delayed(c, lag, jm) - 2.0 * self.delayed(c, lag, j) + self.delayed(c, lag, jp)) / h2
    }

    /// Sum of each field times `dx` (trapezoid with half end weights).
    pub fn mass(&self) -> [f64; 3] {
        self.fields.clone().map(|f| {
            let n = f.len();
            let inner: f64 = f.iter().sum();
            (inner - 0.5 * (f[0] + f[n - 1])) * self.grid.dx
        })
    }

    pub fn field(&self, c: Component) -> &[f64] {
        &self.fields[c.index()]
    }
}

/// Advance one explicit Euler step of size `dt` (must equal the state's
/// history spacing).
pub fn step(state: &mut PdeState, p: &SirParameters, dt: f64, exec: Execution) -> Result<()> {
    if (dt - state.dt).abs() > 1e-12 * state.dt {
        return Err(Error::HistoryUnderflow {
            dt,
            spacing: state.dt,
        });
    }
    let n = state.grid.len;
    let d = [p.d_s, p.d_i, p.d_r];
    let st = &*state;
    let next: Vec<[f64; 3]> = exec::map(exec, n, |j| {
        let u = [st.fields[0][j], st.fields[1][j], st.fields[2][j]];
        let pt = WavePoint {
            phi: u[0],
            psi: u[1],
            chi: u[2],
            psi_lag: st.delayed(1, p.tau[3], j),
        };
        std::array::from_fn(|i| {
            let c = Component::ALL[i];
            u[i] + dt * (d[i] * st.delayed_laplacian(i, p.tau[i], j) + reaction(p, c, &pt))
        })
    });
    let mut fields: Fields = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut clips = 0;
    for (j, v) in next.iter().enumerate() {
        for i in 0..3 {
            let mut x = v[i];
            if !x.is_finite() || x.abs() > BLOW_UP {
                return Err(Error::BlowUp {
                    t: state.time + dt,
                    value: x.abs(),
                });
            }
            if i > 0 && x < 0.0 {
                x = 0.0;
                clips += 1;
            }
            fields[i][j] = x;
        }
    }
    state.clips += clips;
    state.time += dt;
    state.history.pop_back();
    state.history.push_front(fields.clone());
    state.fields = fields;
    Ok(())
}

/// Classical (undelayed) explicit step, written independently of [`step`]
/// as the zero-delay reference.
pub fn reference_step_zero_delay(p: &SirParameters, grid: Grid, fields: &Fields, dt: f64) -> Fields {
    let n = grid.len;
    let h2 = grid.dx * grid.dx;
    let (s, i, r) = (&fields[0], &fields[1], &fields[2]);
    let lap = |f: &Vec<f64>, j: usize| {
        let l = if j == 0 { f[1] } else { f[j - 1] };
        let rr = if j == n - 1 { f[n - 2] } else { f[j + 1] };
        (l - 2.0 * f[j] + rr) / h2
    };
    let mut out: Fields = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for j in 0..n {
        let inc = p.beta * (p.b / p.mu1 - s[j] - i[j] - r[j]) * i[j] / (1.0 + p.alpha * i[j]);
        let fs = -p.mu1 * s[j] + (p.mu2 - p.mu1) * i[j] + (p.mu3 - p.mu1) * r[j];
        let fi = inc - (p.mu2 + p.gamma) * i[j];
        let fr = p.gamma * i[j] - p.mu3 * r[j];
        out[0][j] = s[j] + dt * (p.d_s * lap(s, j) + fs);
        out[1][j] = (i[j] + dt * (p.d_i * lap(i, j) + fi)).max(0.0);
        out[2][j] = (r[j] + dt * (p.d_r * lap(r, j) + fr)).max(0.0);
    }
    out
}

/// Recorded snapshots of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub snapshots: Vec<Fields>,
    pub clips: usize,
}

/// Step to `t_final`, recording every `snapshot_every` steps (and the start).
pub fn simulate(
    state: &mut PdeState,
    p: &SirParameters,
    t_final: f64,
    snapshot_every: usize,
    exec: Execution,
) -> Result<Trajectory> {
    let every = snapshot_every.max(1);
    let steps = ((t_final - state.time) / state.dt).round().max(0.0) as usize;
    let mut traj = Trajectory {
        grid: state.grid,
        times: vec![state.time],
        snapshots: vec![state.fields.clone()],
        clips: 0,
    };
    for k in 1..=steps {
        let dt = state.dt;
        step(state, p, dt, exec)?;
        if k % every == 0 || k == steps {
            traj.times.push(state.time);
            traj.snapshots.push(state.fields.clone());
        }
    }
    traj.clips = state.clips;
    Ok(traj)
}

/// Leftmost upward crossing of `level` inside the middle 60% of the domain.
pub fn level_position(grid: Grid, f: &[f64], level: f64) -> Option<f64> {
    let n = grid.len;
    let lo = (0.2 * n as f64).floor() as usize;
    let hi = (0.8 * n as f64).ceil() as usize;
    (lo.max(1)..hi.min(n)).find_map(|j| {
        let (a, b) = (f[j - 1], f[j]);
        if a < level && b >= level {
            Some(grid.point(j - 1) + grid.dx * (level - a) / (b - a))
        } else {
            None
        }
    })
}

/// Least-squares slope.
fn slope(t: &[f64], x: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(x).map(|(a, b)| (a - tm) * (b - xm)).sum();
    let den: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    num / den
}

/// Front speed in the wave-frame convention (`xi = x + c t`, so the front
/// moves toward `-x` at speed `c`): minus the least-squares slope of the `I`
/// level-set position over the second half of the trajectory.
pub fn front_speed(traj: &Trajectory, level_frac: f64, k2: f64) -> Result<f64> {
    let level = level_frac * k2;
    let half = traj.times.len() / 2;
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    for (t, s) in traj.times.iter().zip(&traj.snapshots).skip(half) {
        match level_position(traj.grid, &s[1], level) {
            Some(x) => {
                ts.push(*t);
                xs.push(x);
            }
            None => {
                return Err(Error::NoFront(format!(
                    "level {level:.4} not crossed inside the tracking window at t={t}"
                )))
            }
        }
    }
    if ts.len() < 2 {
        return Err(Error::NoFront("fewer than two snapshots in the second half".into()));
    }
    let moved = (xs[xs.len() - 1] - xs[0]).abs() / traj.grid.dx;
    if moved < 1.0 {
        return Err(Error::NoFront(format!("level set moved only {moved:.2} cells")));
    }
    Ok(-slope(&ts, &xs))
}

/// Per-snapshot discrepancy between the simulated `I` and the wave.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveComparison {
    pub times: Vec<f64>,
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    /// Alignment shift from the first snapshot: `x + shift` is the wave
    /// coordinate at `t = 0`.
    pub shift: f64,
}

impl WaveComparison {
    pub fn max_sup(&self) -> f64 {
        self.sup.iter().cloned().fold(0.0, f64::max)
    }
}

/// Align the first snapshot to the wave by the `I` level set at `k2/2`, then
/// predict later snapshots by translating the wave at speed `c`. Errors are
/// taken over the middle 60% of the domain.
pub fn compare_with_wave(traj: &Trajectory, wave: &ProfileTriple, c: f64, k2: f64) -> Result<WaveComparison> {
    let level = 0.5 * k2;
    let x0 = level_position(traj.grid, &traj.snapshots[0][1], level)
        .ok_or_else(|| Error::NoFront("initial I profile has no level crossing".into()))?;
    let wg = wave.psi.grid;
    let xi0 = (1..wg.len)
        .find_map(|j| {
            let (a, b) = (wave.psi.values[j - 1], wave.psi.values[j]);
            (a < level && b >= level).then(|| wg.point(j - 1) + wg.dx * (level - a) / (b - a))
        })
        .ok_or_else(|| Error::NoFront("wave profile has no level crossing".into()))?;
    let shift = xi0 - x0;
    let g = traj.grid;
    let lo = (0.2 * g.len as f64).floor() as usize;
    let hi = (0.8 * g.len as f64).ceil() as usize;
    let mut out = WaveComparison {
        times: Vec::new(),
        sup: Vec::new(),
        l2: Vec::new(),
        shift,
    };
    for (t, s) in traj.times.iter().zip(&traj.snapshots) {
        let (mut sup, mut l2) = (0.0f64, 0.0);
        for j in lo..hi {
            let xi = g.point(j) + shift + c * (t - traj.times[0]);
            let e = s[1][j] - wave.psi.eval(xi);
            sup = sup.max(e.abs());
            l2 += e * e * g.dx;
        }
        out.times.push(*t);
        out.sup.push(sup);
        out.l2.push(l2.sqrt());
    }
    Ok(out)
}
