//! Piecewise-exponential super/sub solutions, the parameter search that
//! certifies them, and the per-case differential-inequality scans.
//!
//! Shapes are kept analytic ([`Shape`]) so the case checks use exact
//! one-sided derivatives; [`ShapeTriple::sample`] turns them into grid
//! profiles for the iteration.
//!
//! Each component is `A e^{g t}` glued continuously to `k ± eps e^{-eta t}`;
//! the sub solution's kink is concave, so it is a sub solution only almost
//! everywhere.

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::{Grid, ProfileFunction};
use crate::model::{bisect, reaction, Component, SirParameters, WaveFrameParameters, WavePoint};
use serde::Serialize;

/// Which inequality a profile satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Super,
    Sub,
}

/// `A e^{g t}` for `t <= break_t`, `k ± eps e^{-eta t}` after, with
/// `A = k` (super) or `k / M` (sub).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiecewiseExpProfile {
    pub k: f64,
    pub growth: f64,
    pub break_t: f64,
    pub eps: f64,
    pub eta: f64,
    pub big_m: f64,
    pub side: Side,
}

impl PiecewiseExpProfile {
    /// Build and locate the break from the continuity equation: the unique
    /// crossing for a super profile, the last crossing for a sub profile.
    pub fn new(k: f64, growth: f64, eps: f64, eta: f64, big_m: f64, side: Side) -> Result<Self> {
        if !(k > 0.0 && growth > 0.0 && eps > 0.0 && eta > 0.0 && big_m >= 1.0) {
            return Err(Error::BreakNotFound(format!(
                "invalid profile constants k={k} g={growth} eps={eps} eta={eta} M={big_m}"
            )));
        }
        let mut pr = PiecewiseExpProfile {
            k,
            growth,
            break_t: 0.0,
            eps,
            eta,
            big_m,
            side,
        };
        let f = |t: f64| pr.left(t, 0) - pr.right(t, 0);
        pr.break_t = match side {
            Side::Super => {
                let (mut lo, mut hi) = (-1.0, 1.0);
                while f(lo) > 0.0 {
                    lo *= 2.0;
                    if lo < -1e6 {
                        return Err(Error::BreakNotFound("super: no left bracket".into()));
                    }
                }
                while f(hi) < 0.0 {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return Err(Error::BreakNotFound("super: no right bracket".into()));
                    }
                }
                bisect(f, lo, hi)?
            }
            Side::Sub => {
                // f decreases then increases; the minimum sits where the
                // two derivatives balance.
                let tm = (eps * eta * big_m / (k * growth)).ln() / (growth + eta);
                if f(tm) >= 0.0 {
                    return Err(Error::BreakNotFound(format!(
                        "sub: left branch never drops below the right branch (gap {:.3e})",
                        f(tm)
                    )));
                }
                let mut hi = tm + 1.0;
                while f(hi) < 0.0 {
                    hi = tm + 2.0 * (hi - tm);
                    if hi > 1e6 {
                        return Err(Error::BreakNotFound("sub: no right bracket".into()));
                    }
                }
                bisect(f, tm, hi)?
            }
        };
        Ok(pr)
    }

    fn amplitude(&self) -> f64 {
        match self.side {
            Side::Super => self.k,
            Side::Sub => self.k / self.big_m,
        }
    }

    fn sign(&self) -> f64 {
        match self.side {
            Side::Super => 1.0,
            Side::Sub => -1.0,
        }
    }

    /// `d`-th derivative of the left branch.
    pub fn left(&self, t: f64, d: i32) -> f64 {
        self.amplitude() * self.growth.powi(d) * (self.growth * t).exp()
    }

    /// `d`-th derivative of the right branch.
    pub fn right(&self, t: f64, d: i32) -> f64 {
        let tail = self.sign() * self.eps * (-self.eta).powi(d) * (-self.eta * t).exp();
        if d == 0 {
            self.k + tail
        } else {
            tail
        }
    }

    /// `d`-th derivative; the right branch is used at the break itself.
    pub fn eval(&self, t: f64, d: i32) -> f64 {
        if t < self.break_t {
            self.left(t, d)
        } else {
            self.right(t, d)
        }
    }

    /// Continuity defect at the break.
    pub fn break_defect(&self) -> f64 {
        (self.left(self.break_t, 0) - self.right(self.break_t, 0)).abs()
    }
}

/// One analytic profile component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Shape {
    Exp(PiecewiseExpProfile),
}

impl Shape {
    pub fn eval(&self, t: f64, d: i32) -> f64 {
        match self {
            Shape::Exp(p) => p.eval(t, d),
        }
    }

    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Shape::Exp(p) => vec![p.break_t],
        }
    }

    pub fn limit_right(&self) -> f64 {
        match self {
            Shape::Exp(p) => p.k,
        }
    }

    /// Left-branch exponent (how fast the profile leaves zero).
    pub fn growth(&self) -> f64 {
        match self {
            Shape::Exp(p) => p.growth,
        }
    }

    pub fn tail_rate(&self) -> f64 {
        match self {
            Shape::Exp(p) => p.eta,
        }
    }
}

/// Three analytic components `(phi, psi, chi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeTriple {
    pub side: Side,
    pub shapes: [Shape; 3],
}

/// Three sampled components on one grid, with tail constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileTriple {
    pub phi: ProfileFunction,
    pub psi: ProfileFunction,
    pub chi: ProfileFunction,
}

impl ProfileTriple {
    pub fn new(phi: ProfileFunction, psi: ProfileFunction, chi: ProfileFunction) -> Result<Self> {
        phi.grid.check_compatible(&psi.grid)?;
        phi.grid.check_compatible(&chi.grid)?;
        Ok(ProfileTriple { phi, psi, chi })
    }

    pub fn constant(grid: Grid, v: [f64; 3]) -> Self {
        ProfileTriple {
            phi: ProfileFunction::constant(grid, v[0]),
            psi: ProfileFunction::constant(grid, v[1]),
            chi: ProfileFunction::constant(grid, v[2]),
        }
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid
    }

    pub fn get(&self, c: Component) -> &ProfileFunction {
        match c {
            Component::Phi => &self.phi,
            Component::Psi => &self.psi,
            Component::Chi => &self.chi,
        }
    }

    pub fn components(&self) -> [&ProfileFunction; 3] {
        [&self.phi, &self.psi, &self.chi]
    }

    /// `min_t (other - self)` over grid and tails, per component.
    pub fn min_gap_below(&self, other: &ProfileTriple) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, (a, b)) in self.components().iter().zip(other.components()).enumerate() {
            let mut m = (b.left - a.left).min(b.right - a.right);
            for (x, y) in a.values.iter().zip(&b.values) {
                m = m.min(y - x);
            }
            out[i] = m;
        }
        out
    }

    /// Whether every sample and tail lies in `[0, m_i]` (to `tol`).
    pub fn in_box(&self, m: [f64; 3], tol: f64) -> bool {
        self.components().iter().zip(m).all(|(f, mi)| {
            f.values
                .iter()
                .chain([&f.left, &f.right])
                .all(|&v| v >= -tol && v <= mi + tol)
        })
    }
}

impl ShapeTriple {
    pub fn eval(&self, c: Component, t: f64, d: i32) -> f64 {
        self.shapes[c.index()].eval(t, d)
    }

    pub fn limits_right(&self) -> [f64; 3] {
        [
            self.shapes[0].limit_right(),
            self.shapes[1].limit_right(),
            self.shapes[2].limit_right(),
        ]
    }

    /// Sample on `grid` with exact tails (0 on the left, `k` on the right).
    pub fn sample(&self, grid: Grid) -> ProfileTriple {
        let f = |i: usize| {
            let s = &self.shapes[i];
            ProfileFunction::from_fn(grid, |t| s.eval(t, 0), 0.0, s.limit_right())
        };
        ProfileTriple {
            phi: f(0),
            psi: f(1),
            chi: f(2),
        }
    }

    pub fn all_kinks(&self) -> Vec<f64> {
        self.shapes.iter().flat_map(|s| s.kinks()).collect()
    }

    /// `min_t (upper - self)` over a dense scan, per component.
    pub fn min_gap_below(&self, upper: &ShapeTriple, lo: f64, hi: f64, n: usize) -> [f64; 3] {
        let mut out = [f64::INFINITY; 3];
        for j in 0..=n {
            let t = lo + (hi - lo) * j as f64 / n as f64;
            for (i, o) in out.iter_mut().enumerate() {
                *o = o.min(upper.shapes[i].eval(t, 0) - self.shapes[i].eval(t, 0));
            }
        }
        out
    }
}

/// Left-hand side of wave equation `eq` for the triple `own`, with the
/// incidence reading `phi`, `chi` from `cross` (the crossed partner).
pub fn wave_defect(
    p: &SirParameters,
    eq: Component,
    own: &ShapeTriple,
    cross: &ShapeTriple,
    t: f64,
) -> f64 {
    let r = p.wave_delays();
    let s = t + r[eq.index()];
    let x = own;
    let pt = match eq {
        Component::Psi => WavePoint {
            phi: cross.eval(Component::Phi, s, 0),
            psi: x.eval(Component::Psi, s, 0),
            chi: cross.eval(Component::Chi, s, 0),
            psi_lag: x.eval(Component::Psi, s - r[3], 0),
        },
        _ => WavePoint {
            phi: x.eval(Component::Phi, s, 0),
            psi: x.eval(Component::Psi, s, 0),
            chi: x.eval(Component::Chi, s, 0),
            psi_lag: x.eval(Component::Psi, s - r[3], 0),
        },
    };
    p.diffusion(eq) * x.eval(eq, t, 2) - p.c * x.eval(eq, s, 1) + reaction(p, eq, &pt)
}

/// The six residuals of the inequality system behind the case proofs.
///
/// `eps = [eps1..eps6]`; `roots = [eta1..eta6]` are the continued roots.
pub fn solcond_residuals(
    p: &SirParameters,
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    eps: &[f64; 6],
) -> [f64; 6] {
    let [k1, k2, k3] = wp.k;
    let [m1, m2, m3] = wp.m;
    let [e1, e2, e3, e4, e5, e6] = *eps;
    let (mu1, mu2, mu3, g, be, al) = (p.mu1, p.mu2, p.mu3, p.gamma, p.beta, p.alpha);
    let cap = p.capacity();
    let (et1, et3, et5) = (roots[0], roots[2], roots[4]);
    let lo2 = k2 - e4;
    [
        mu1 * (k1 + e1) - k1 * et1 * et1 - (mu2 - mu1) * m2 - (mu3 - mu1) * m3,
        -mu1 * (k1 - e2) + (mu2 - mu1) * (k2 - e4) + (mu3 - mu1) * (k3 - e6),
        (mu2 + g) * (k2 + e3)
            - k2 * et3 * et3
            - be * (cap - k1 + e2 - k2 - e3 - k3 + e6) * m2 / (1.0 + al * m2),
        be * (cap - m1 - k2 + e4 - m3) * lo2 / (1.0 + al * lo2) - (mu2 + g) * lo2,
        mu3 * (k3 + e5) - g * m2 - k3 * et5 * et5,
        g * lo2 - mu3 * (k3 - e6),
    ]
}

/// `eps0..eps6` with the six residuals minus `eps0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolcondCertificate {
    pub eps: [f64; 7],
    pub residuals: [f64; 6],
}

impl SolcondCertificate {
    pub fn is_valid(&self) -> bool {
        self.eps[0] > 0.0 && self.residuals.iter().all(|&r| r > 0.0)
    }
}

/// Everything needed to build the super/sub pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileParameters {
    pub certificate: SolcondCertificate,
    pub roots: [f64; 6],
    /// `t1..t6`: super breaks for phi, psi, chi then sub breaks.
    pub breaks: [f64; 6],
    pub eta: f64,
    pub big_m: f64,
    /// Bisected `eta*` per (equation, case) for the two sides, super first.
    pub eta_thresholds: Vec<f64>,
    /// `false` when the parameters come from [`find_scan_parameters`].
    pub certified: bool,
    /// `eps1..eps6` actually used by the profiles.
    pub eps: [f64; 6],
}

/// Log-spaced grid of `n` values in `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn min6(r: &[f64; 6]) -> (f64, usize) {
    r.iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(m, j), (i, &v)| if v < m { (v, i) } else { (m, j) })
}

/// Coordinate ascent of `min_j R_j` over a log grid in each `eps_i` in
/// `[1e-4, k_i / 2]`; each residual is affine (or concave) in each `eps_i`,
/// so a few sweeps settle.
pub fn search_eps(p: &SirParameters, wp: &WaveFrameParameters, roots: &[f64; 6]) -> ([f64; 6], [f64; 6]) {
    let kk = [wp.k[0], wp.k[0], wp.k[1], wp.k[1], wp.k[2], wp.k[2]];
    let grids: Vec<Vec<f64>> = kk
        .iter()
        .map(|&k| log_grid(1e-4, (0.5 * k).max(2e-4), 60))
        .collect();
    let mut eps: [f64; 6] = std::array::from_fn(|i| 0.1 * kk[i]);
    let mut best = min6(&solcond_residuals(p, wp, roots, &eps)).0;
    for _ in 0..30 {
        let before = best;
        for i in 0..6 {
            for &v in &grids[i] {
                let mut trial = eps;
                trial[i] = v;
                let m = min6(&solcond_residuals(p, wp, roots, &trial)).0;
                if m > best {
                    best = m;
                    eps = trial;
                }
            }
        }
        if best <= before {
            break;
        }
    }
    (eps, solcond_residuals(p, wp, roots, &eps))
}

/// Super triple `(phi, psi, chi)` from roots `eta1, eta3, eta5` and `eps1, eps3, eps5`.
pub fn build_super(wp: &WaveFrameParameters, roots: &[f64; 6], eps: &[f64; 6], eta: f64) -> Result<ShapeTriple> {
    let mk = |i: usize| -> Result<Shape> {
        Ok(Shape::Exp(PiecewiseExpProfile::new(
            wp.k[i],
            roots[2 * i],
            eps[2 * i],
            eta,
            1.0,
            Side::Super,
        )?))
    };
    Ok(ShapeTriple {
        side: Side::Super,
        shapes: [mk(0)?, mk(1)?, mk(2)?],
    })
}

/// Sub triple from roots `eta2, eta4, eta6`, `eps2, eps4, eps6` and divisor `M`.
pub fn build_sub(
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    eps: &[f64; 6],
    eta: f64,
    big_m: f64,
) -> Result<ShapeTriple> {
    let mk = |i: usize| -> Result<Shape> {
        Ok(Shape::Exp(PiecewiseExpProfile::new(
            wp.k[i],
            roots[2 * i + 1],
            eps[2 * i + 1],
            eta,
            big_m,
            Side::Sub,
        )?))
    };
    Ok(ShapeTriple {
        side: Side::Sub,
        shapes: [mk(0)?, mk(1)?, mk(2)?],
    })
}

/// Worst sampled margin of one (equation, case) region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseMargin {
    pub equation: usize,
    pub case: usize,
    pub window: (f64, f64),
    /// Signed so that `>= 0` means the inequality holds.
    pub worst: f64,
    pub worst_t: f64,
    pub samples: usize,
    pub excluded: usize,
}

/// Per-region scan for one side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub side: Side,
    pub cases: Vec<CaseMargin>,
}

/// Round-off allowance for margins that vanish identically in a region.
pub const CASE_TOL: f64 = 1e-10;

impl CaseReport {
    pub fn all_pass(&self) -> bool {
        self.cases.iter().all(|c| c.worst >= -CASE_TOL)
    }

    pub fn worst(&self) -> f64 {
        self.cases.iter().map(|c| c.worst).fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.worst >= -CASE_TOL).count()
    }

    /// First failing region as an error.
    pub fn first_violation(&self) -> Option<Error> {
        self.cases.iter().find(|c| c.worst < -CASE_TOL).map(|c| Error::CaseViolation {
            equation: c.equation,
            case: c.case,
            t: c.worst_t,
            value: c.worst,
        })
    }
}

/// Points per case region.
pub const CASE_SAMPLES: usize = 1000;

/// Scan the three case regions of each equation for `own` (which reads the
/// incidence from `cross`). Regions are cut at the first and last kink of
/// the equation's own component: left of the first kink (shifted point
/// included), right of the last kink, and the band in between. Points whose
/// evaluation times fall within round-off of any kink are excluded.
pub fn check_cases(
    p: &SirParameters,
    own: &ShapeTriple,
    cross: &ShapeTriple,
    exec: Execution,
) -> CaseReport {
    let r = p.wave_delays();
    let mut kinks = own.all_kinks();
    kinks.extend(cross.all_kinks());
    let shifts = [0.0, r[0], r[1], r[2], r[1] - r[3]];
    let growth_min = own
        .shapes
        .iter()
        .chain(cross.shapes.iter())
        .map(|s| s.growth())
        .fold(f64::INFINITY, f64::min);
    let tail_min = own
        .shapes
        .iter()
        .chain(cross.shapes.iter())
        .map(|s| s.tail_rate())
        .fold(f64::INFINITY, f64::min);
    let wl = (40.0 / growth_min).min(2000.0);
    let wr = (40.0 / tail_min).min(4000.0);
    let sign = match own.side {
        Side::Super => -1.0,
        Side::Sub => 1.0,
    };
    let mut cases = Vec::with_capacity(9);
    for eq in Component::ALL {
        let i = eq.index();
        let own_k = own.shapes[i].kinks();
        let first = own_k.iter().cloned().fold(f64::INFINITY, f64::min);
        let last = own_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let windows = [
            (first - wl, first - r[i]),
            (last, last + wr),
            (first - r[i], last),
        ];
        for (ci, &(a, b)) in windows.iter().enumerate() {
            let n = CASE_SAMPLES;
            let ts: Vec<f64> = (0..n)
                .map(|j| a + (b - a) * j as f64 / (n - 1).max(1) as f64)
                .collect();
            let vals = exec::map(exec, n, |j| {
                let t = ts[j];
                let near = kinks.iter().any(|&kx| {
                    shifts
                        .iter()
                        .any(|&s| (t + s - kx).abs() <= 1e-9 * (1.0 + kx.abs()))
                });
                if near || b <= a {
                    None
                } else {
                    Some(sign * wave_defect(p, eq, own, cross, t))
                }
            });
            let mut worst = f64::INFINITY;
            let mut worst_t = a;
            let mut excluded = 0;
            for (j, v) in vals.iter().enumerate() {
                match v {
                    Some(v) if *v < worst => {
                        worst = *v;
                        worst_t = ts[j];
                    }
                    Some(_) => {}
                    None => excluded += 1,
                }
            }
            if !worst.is_finite() {
                worst = 0.0;
            }
            cases.push(CaseMargin {
                equation: i + 1,
                case: ci + 1,
                window: (a, b),
                worst,
                worst_t,
                samples: n - excluded,
                excluded,
            });
        }
    }
    CaseReport {
        side: own.side,
        cases,
    }
}

/// Super inequalities (`<= 0`) for `upper`, incidence read from `lower`.
pub fn check_super_cases(p: &SirParameters, upper: &ShapeTriple, lower: &ShapeTriple, exec: Execution) -> CaseReport {
    check_cases(p, upper, lower, exec)
}

/// Sub inequalities (`>= 0`) for `lower`, incidence read from `upper`.
pub fn check_sub_cases(p: &SirParameters, upper: &ShapeTriple, lower: &ShapeTriple, exec: Execution) -> CaseReport {
    check_cases(p, lower, upper, exec)
}

/// `[min over a dense scan of (super - sub)]` per component.
pub fn ordering_gap(upper: &ShapeTriple, lower: &ShapeTriple) -> [f64; 3] {
    let kinks = upper.all_kinks();
    let lo = kinks.iter().cloned().fold(f64::INFINITY, f64::min) - 400.0;
    let hi = kinks.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 400.0;
    lower.min_gap_below(upper, lo, hi, 200_000)
}

fn min_margin(p: &SirParameters, upper: &ShapeTriple, lower: &ShapeTriple, exec: Execution) -> f64 {
    let s = check_super_cases(p, upper, lower, exec);
    let l = check_sub_cases(p, upper, lower, exec);
    s.worst().min(l.worst())
}

/// Case margin of the classical pair as a function of `eta` (and `M`).
fn pair_margin(
    p: &SirParameters,
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    eps: &[f64; 6],
    eta: f64,
    big_m: f64,
    exec: Execution,
) -> Option<(f64, Vec<f64>)> {
    let up = build_super(wp, roots, eps, eta).ok()?;
    let lo = build_sub(wp, roots, eps, eta, big_m).ok()?;
    let s = check_super_cases(p, &up, &lo, exec);
    let l = check_sub_cases(p, &up, &lo, exec);
    let per: Vec<f64> = s.cases.iter().chain(&l.cases).map(|c| c.worst).collect();
    Some((s.worst().min(l.worst()), per))
}

/// Search `eps`, the tail rate `eta` and the divisor `M` for the classical
/// pair.
///
/// The `eps` come from [`search_eps`] and must give a positive slack
/// `eps0`. Each of the 18 (side, equation, case) sign conditions gives a
/// threshold `eta*_j` by bisection on `(0, 1]`, and `eta` is half the
/// smallest. `M` starts at `2 max(M_i / k_i)` and doubles until
/// sub <= super.
pub fn find_parameters(
    p: &SirParameters,
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    exec: Execution,
) -> Result<ProfileParameters> {
    let (eps, res) = search_eps(p, wp, roots);
    let (worst, which) = min6(&res);
    if worst <= 0.0 {
        return Err(Error::InfeasibleSolcond(format!(
            "inequality {} cannot be satisfied: best achievable residual {worst:.4e}",
            which + 1
        )));
    }
    let eps0 = 0.5 * worst;
    let certificate = SolcondCertificate {
        eps: [eps0, eps[0], eps[1], eps[2], eps[3], eps[4], eps[5]],
        residuals: res.map(|r| r - eps0),
    };
    let m0 = 2.0 * (0..3).map(|i| wp.m[i] / wp.k[i]).fold(0.0, f64::max);
    let thresholds = eta_thresholds(p, wp, roots, &eps, m0, exec)?;
    let eta = 0.5 * thresholds.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut big_m = m0;
    loop {
        let up = build_super(wp, roots, &eps, eta)?;
        if let Ok(lo) = build_sub(wp, roots, &eps, eta, big_m) {
            if ordering_gap(&up, &lo).iter().all(|&g| g >= 0.0) {
                let bs = |s: &ShapeTriple| -> [f64; 3] { std::array::from_fn(|i| s.shapes[i].kinks()[0]) };
                let (a, b) = (bs(&up), bs(&lo));
                return Ok(ProfileParameters {
                    certificate,
                    roots: *roots,
                    breaks: [a[0], a[1], a[2], b[0], b[1], b[2]],
                    eta,
                    big_m,
                    eta_thresholds: thresholds,
                    certified: true,
                    eps,
                });
            }
        }
        big_m *= 2.0;
        if big_m > 1e12 {
            return Err(Error::BreakNotFound(
                "no divisor M orders the sub below the super".into(),
            ));
        }
    }
}

/// Smallest `M` from `2 max(M_i / k_i)` (doubling) that orders the sub
/// below the super.
pub fn ordering_divisor(
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    eps: &[f64; 6],
    eta: f64,
) -> Option<(ShapeTriple, ShapeTriple, f64)> {
    let up = build_super(wp, roots, eps, eta).ok()?;
    let mut big_m = 2.0 * (0..3).map(|i| wp.m[i] / wp.k[i]).fold(0.0, f64::max);
    while big_m <= 1e12 {
        if let Ok(lo) = build_sub(wp, roots, eps, eta, big_m) {
            if ordering_gap(&up, &lo).iter().all(|&g| g >= 0.0) {
                return Some((up, lo, big_m));
            }
        }
        big_m *= 2.0;
    }
    None
}

/// Uncertified fallback for configurations where the inequality system has
/// no solution: coordinate ascent over `eps_i / k_i` and `eta` (log grids)
/// maximizing the worst case margin of the pair, each region's margin
/// divided by its `k_i`. The result is flagged `certified = false` and its
/// certificate holds whatever residuals those `eps` give.
pub fn find_scan_parameters(
    p: &SirParameters,
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    exec: Execution,
) -> Result<ProfileParameters> {
    let score = |eps: &[f64; 6], eta: f64| -> f64 {
        let Some((up, lo, _)) = ordering_divisor(wp, roots, eps, eta) else {
            return f64::NEG_INFINITY;
        };
        let s = check_super_cases(p, &up, &lo, exec);
        let l = check_sub_cases(p, &up, &lo, exec);
        s.cases
            .iter()
            .chain(&l.cases)
            .map(|c| c.worst / wp.k[c.equation - 1])
            .fold(f64::INFINITY, f64::min)
    };
    let cap = |i: usize, f: f64| -> f64 {
        let k = wp.k[i / 2];
        let v = f * k;
        if i % 2 == 0 {
            v.min(0.999 * (wp.m[i / 2] - k))
        } else {
            v.min(0.999 * k)
        }
    };
    let fracs = log_grid(0.01, 0.9, 12);
    let etas = log_grid(1e-3, 1.0, 16);
    let mut eps: [f64; 6] = std::array::from_fn(|i| cap(i, 0.1));
    let mut eta = 0.02;
    let mut best = score(&eps, eta);
    for _ in 0..4 {
        let before = best;
        for i in 0..6 {
            for &f in &fracs {
                let mut trial = eps;
                trial[i] = cap(i, f);
                let v = score(&trial, eta);
                if v > best {
                    best = v;
                    eps = trial;
                }
            }
        }
        for &e in &etas {
            let v = score(&eps, e);
            if v > best {
                best = v;
                eta = e;
            }
        }
        if best <= before {
            break;
        }
    }
    let (up, lo, big_m) = ordering_divisor(wp, roots, &eps, eta)
        .ok_or_else(|| Error::BreakNotFound("no divisor M orders the sub below the super".into()))?;
    let res = solcond_residuals(p, wp, roots, &eps);
    let eps0 = 0.5 * min6(&res).0;
    let brk = |s: &ShapeTriple, i: usize| s.shapes[i].kinks()[0];
    Ok(ProfileParameters {
        certificate: SolcondCertificate {
            eps: [eps0, eps[0], eps[1], eps[2], eps[3], eps[4], eps[5]],
            residuals: res.map(|r| r - eps0),
        },
        roots: *roots,
        breaks: [brk(&up, 0), brk(&up, 1), brk(&up, 2), brk(&lo, 0), brk(&lo, 1), brk(&lo, 2)],
        eta,
        big_m,
        eta_thresholds: Vec::new(),
        certified: false,
        eps,
    })
}

impl ProfileParameters {
    /// Rebuild the super/sub pair these parameters describe.
    pub fn build(&self, wp: &WaveFrameParameters) -> Result<SuperSubPair> {
        Ok(SuperSubPair {
            upper: build_super(wp, &self.roots, &self.eps, self.eta)?,
            lower: build_sub(wp, &self.roots, &self.eps, self.eta, self.big_m)?,
        })
    }
}

/// `eta*_j` for every (side, equation, case): the largest `eta` in `(0, 1]`
/// (to bisection precision) at which that region's margin keeps its sign.
pub fn eta_thresholds(
    p: &SirParameters,
    wp: &WaveFrameParameters,
    roots: &[f64; 6],
    eps: &[f64; 6],
    big_m: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let margins = |eta: f64| pair_margin(p, wp, roots, eps, eta, big_m, exec).map(|(_, per)| per);
    let ok = |eta: f64| margins(eta).map(|per| per.iter().map(|&v| v >= -CASE_TOL).collect::<Vec<_>>());
    let floor = 1e-4;
    let base = margins(floor)
        .ok_or_else(|| Error::BreakNotFound("profiles do not build at small eta".into()))?;
    if let Some(j) = base.iter().position(|&v| v < -CASE_TOL) {
        // Regions 0..9 are the super side, 9..18 the sub side.
        let rest = j % 9;
        return Err(Error::CaseViolation {
            equation: rest / 3 + 1,
            case: rest % 3 + 1,
            t: f64::NAN,
            value: base[j],
        });
    }
    let mut out = vec![1.0; base.len()];
    let top = ok(1.0);
    for j in 0..base.len() {
        if top.as_ref().is_some_and(|v| v[j]) {
            continue;
        }
        let (mut lo, mut hi) = (floor, 1.0);
        for _ in 0..30 {
            let mid = (lo * hi).sqrt();
            if ok(mid).is_some_and(|v| v[j]) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo < 1.02 {
                break;
            }
        }
        out[j] = lo;
    }
    Ok(out)
}

/// Smoothness class, weakest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SmoothClass {
    /// Continuous with derivative jumps.
    Super,
    /// C1 with a jump in the second derivative.
    Quasi,
    /// C2 within tolerance.
    Smooth,
}

/// One-sided derivative mismatch at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpMeasure {
    pub t: f64,
    pub first: f64,
    pub second: f64,
}

// Derivatives of the quartic through five nodes, evaluated at `t`.
fn one_sided(f: &ProfileFunction, t: f64, right: bool) -> (f64, f64) {
    let g = f.grid;
    let s = (t - g.start) / g.dx;
    let j0 = if right { s.ceil() as isize } else { s.floor() as isize };
    let nodes: Vec<isize> = (0..5)
        .map(|m| if right { j0 + m } else { j0 - m })
        .collect();
    let xs: Vec<f64> = nodes.iter().map(|&j| g.start + j as f64 * g.dx - t).collect();
    let ys: Vec<f64> = nodes.iter().map(|&j| f.sample(j)).collect();
    // Newton divided differences, then differentiate at 0.
    let mut c = ys.clone();
    for k in 1..5 {
        for i in (k..5).rev() {
            c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - k]);
        }
    }
    // p(x) = sum c_k prod_{m<k} (x - x_m); derivatives at x = 0.
    let (mut d1, mut d2) = (0.0, 0.0);
    let mut poly = vec![1.0];
    for k in 0..5 {
        if k > 0 {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, &a) in poly.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * xs[k - 1];
            }
            poly = next;
        }
        if poly.len() > 1 {
            d1 += c[k] * poly[1];
        }
        if poly.len() > 2 {
            d2 += c[k] * 2.0 * poly[2];
        }
    }
    (d1, d2)
}

/// One-sided first/second derivative jumps at `t` from quartic fits on each
/// side (grid-node data only).
pub fn derivative_jump(f: &ProfileFunction, t: f64) -> JumpMeasure {
    let (l1, l2) = one_sided(f, t, false);
    let (r1, r2) = one_sided(f, t, true);
    JumpMeasure {
        t,
        first: (r1 - l1).abs(),
        second: (r2 - l2).abs(),
    }
}

/// Tolerance on first-derivative jumps for the quasi class.
pub const C1_TOL: f64 = 1e-6;
/// Tolerance on second-derivative jumps for the smooth class.
pub const C2_TOL: f64 = 1e-4;

/// Classification of a sampled triple at the given break points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothReport {
    pub class: SmoothClass,
    pub jumps: Vec<JumpMeasure>,
}

/// Lowest class supported by the one-sided derivative comparisons at
/// `breaks` (per component).
pub fn check_quasi_and_smooth(triple: &ProfileTriple, breaks: &[[f64; 3]]) -> SmoothReport {
    let mut jumps = Vec::new();
    for b in breaks {
        for (i, f) in triple.components().iter().enumerate() {
            jumps.push(derivative_jump(f, b[i]));
        }
    }
    let j1 = jumps.iter().map(|j| j.first).fold(0.0, f64::max);
    let j2 = jumps.iter().map(|j| j.second).fold(0.0, f64::max);
    let class = if j1 >= C1_TOL {
        SmoothClass::Super
    } else if j2 >= C2_TOL {
        SmoothClass::Quasi
    } else {
        SmoothClass::Smooth
    };
    SmoothReport { class, jumps }
}

/// Sampled pair used by the iteration, plus its analytic origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperSubPair {
    pub upper: ShapeTriple,
    pub lower: ShapeTriple,
}

impl SuperSubPair {
    pub fn sample(&self, grid: Grid) -> (ProfileTriple, ProfileTriple) {
        (self.upper.sample(grid), self.lower.sample(grid))
    }

    pub fn check(&self, p: &SirParameters, exec: Execution) -> (CaseReport, CaseReport) {
        (
            check_super_cases(p, &self.upper, &self.lower, exec),
            check_sub_cases(p, &self.upper, &self.lower, exec),
        )
    }

    pub fn margin(&self, p: &SirParameters, exec: Execution) -> f64 {
        min_margin(p, &self.upper, &self.lower, exec)
    }
}
