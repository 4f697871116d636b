//! The solver stages, each runnable on its own from a parsed config.
//!
//! Stages return plain serializable reports; writing them to disk is the
//! job of [`crate::artifacts`].

use serde::Serialize;
use sirwave::charroots::{root_table, RootRow};
use sirwave::config::RunConfig;
use sirwave::greens::{decay_estimate_for, green_closed_form_r0, green_numeric, GreenKernel};
use sirwave::iteration::{
    asymptotics_check, cross_iterate, wave_residual, AsymptoticsCheck, IterationOptions, IterationResult,
    WaveOperator,
};
use sirwave::model::{
    check_thresholds, pqm_constants, shift_constants, Component, PqmReport, SirParameters, WaveFrameParameters,
};
use sirwave::pdesim::{compare_with_wave, front_speed, simulate, stable_dt, stable_dx, PdeState, Trajectory, WaveComparison};
use sirwave::profiles::{
    find_parameters, find_scan_parameters, CaseReport, ProfileParameters, ProfileTriple, SuperSubPair,
};
use sirwave::{Error, Execution, Grid, Result};

/// Wave residual (per equation) a run must reach to count as a success.
pub const RESIDUAL_TOL: f64 = 1e-4;

/// Number of random ordered pairs used to confirm the shift constants.
pub const PQM_SAMPLES: usize = 10_000;

/// Knobs shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Seed for every randomized verification.
    pub seed: u64,
    /// Fall back to the uncertified parameter scan when the profile
    /// inequalities have no solution.
    pub uncertified: bool,
    pub exec: Execution,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: 0,
            uncertified: false,
            exec: Execution::default(),
        }
    }
}

/// Validated parameters plus the wave-frame constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub cfg: RunConfig,
    pub wp: WaveFrameParameters,
    pub betas: [f64; 3],
}

impl Context {
    pub fn params(&self) -> &SirParameters {
        &self.cfg.params
    }
}

/// Gate the config: field invariants, `R0 > 1`, `c >= c*`, the frame
/// constants, and the shift constants on random samples.
pub fn prepare(cfg: &RunConfig, opts: &Options) -> Result<Context> {
    cfg.params.validate()?;
    check_thresholds(&cfg.params, cfg.m)?;
    let wp = WaveFrameParameters::new(&cfg.params, cfg.m)?;
    let betas = pqm_constants(&cfg.params, &wp, opts.seed)?;
    Ok(Context { cfg: *cfg, wp, betas })
}

/// The randomized shift-constant check on its own, for reporting.
pub fn pqm_report(ctx: &Context, opts: &Options) -> Result<PqmReport> {
    sirwave::model::verify_pqm(ctx.params(), ctx.wp.m, ctx.betas, PQM_SAMPLES, opts.seed)
}

/// Six continued roots. Needs only the field invariants, not the frame.
pub fn roots(cfg: &RunConfig) -> Result<[RootRow; 6]> {
    cfg.params.validate()?;
    root_table(&cfg.params, cfg.m)
}

/// Kernel check for one component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub component: &'static str,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub mass: f64,
    /// `-1/b`.
    pub expected_mass: f64,
    pub decay_k: f64,
    pub decay_alpha: f64,
    pub envelope_violations: usize,
    pub min_axis_modulus: f64,
    pub tail_estimate: f64,
}

/// `(a, b)` of the linear operator for component `c` with delay `r`.
fn kernel_coefficients(p: &SirParameters, betas: [f64; 3], c: Component) -> (f64, f64) {
    let d = p.diffusion(c);
    (p.c / d, betas[c.index()] / d)
}

/// Kernel sampled on a window wide enough for its mass to settle.
pub fn kernel(p: &SirParameters, betas: [f64; 3], c: Component, r: f64, exec: Execution) -> Result<GreenKernel> {
    let (a, b) = kernel_coefficients(p, betas, c);
    let decay = decay_estimate_for(a, b, r)?;
    let half = (40.0 / decay).clamp(10.0, 400.0);
    green_numeric(a, b, r, Grid::centered(half, (half / 4000.0).min(0.01)), exec)
}

/// Kernels of the three fixed-point maps at the configured delays.
pub fn kernels(cfg: &RunConfig, exec: Execution) -> Result<Vec<KernelSummary>> {
    cfg.params.validate()?;
    let betas = shift_constants(&cfg.params, cfg.m);
    let r = cfg.params.wave_delays();
    Component::ALL
        .iter()
        .map(|&c| {
            let k = kernel(&cfg.params, betas, c, r[c.index()], exec)?;
            Ok(KernelSummary {
                component: c.name(),
                a: k.a,
                b: k.b,
                r: k.r,
                mass: k.mass(),
                expected_mass: -1.0 / k.b,
                decay_k: k.decay_k,
                decay_alpha: k.decay_alpha,
                envelope_violations: k.envelope_violations(),
                min_axis_modulus: k.certificate.min_modulus,
                tail_estimate: k.quadrature.tail_estimate,
            })
        })
        .collect()
}

/// One row of the `greens` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSample {
    pub component: &'static str,
    pub xi: f64,
    pub g: f64,
    /// Closed-form kernel value; only defined at zero delay.
    pub closed_form: Option<f64>,
}

/// Kernels of the three components, with delays `r`, on `[-10, 10]`.
pub fn kernel_table(cfg: &RunConfig, r: [f64; 3], exec: Execution) -> Result<Vec<KernelSample>> {
    cfg.params.validate()?;
    let betas = shift_constants(&cfg.params, cfg.m);
    let grid = Grid::centered(10.0, 0.01);
    let mut out = Vec::new();
    for c in Component::ALL {
        let (a, b) = kernel_coefficients(&cfg.params, betas, c);
        let ri = r[c.index()];
        let k = green_numeric(a, b, ri, grid, exec)?;
        for (j, &g) in k.values.iter().enumerate() {
            let xi = grid.point(j);
            out.push(KernelSample {
                component: c.name(),
                xi,
                g,
                closed_form: (ri == 0.0).then(|| green_closed_form_r0(a, b, xi)),
            });
        }
    }
    Ok(out)
}

/// Parameters, the analytic pair and both case scans.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileStage {
    pub parameters: ProfileParameters,
    pub pair: SuperSubPair,
    pub super_cases: CaseReport,
    pub sub_cases: CaseReport,
}

impl ProfileStage {
    pub fn verified(&self) -> bool {
        self.parameters.certified && self.super_cases.all_pass() && self.sub_cases.all_pass()
    }
}

/// Certified parameter search; with `opts.uncertified` an infeasible
/// inequality system falls back to the margin scan.
pub fn profiles(ctx: &Context, rows: &[RootRow; 6], opts: &Options) -> Result<ProfileStage> {
    let p = ctx.params();
    let roots = rows.map(|r| r.eta);
    let parameters = match find_parameters(p, &ctx.wp, &roots, opts.exec) {
        Err(Error::InfeasibleSolcond(_)) if opts.uncertified => find_scan_parameters(p, &ctx.wp, &roots, opts.exec)?,
        other => other?,
    };
    let pair = parameters.build(&ctx.wp)?;
    let (super_cases, sub_cases) = pair.check(p, opts.exec);
    Ok(ProfileStage {
        parameters,
        pair,
        super_cases,
        sub_cases,
    })
}

/// Iteration window from the profile scales: 30 e-folds of the slowest
/// left rate below the first break, 30 of `eta` above the last, each
/// capped at 600.
pub fn wave_window(stage: &ProfileStage) -> (f64, f64) {
    let pp = &stage.parameters;
    let first = pp.breaks.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = pp.breaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let left_rate = pp.roots[0].min(pp.roots[2]).min(pp.roots[4]);
    (first - (30.0 / left_rate).min(600.0), last + (30.0 / pp.eta).min(600.0))
}

/// `len` nodes spanning [`wave_window`].
pub fn window_grid(stage: &ProfileStage, len: usize) -> Grid {
    let (lo, hi) = wave_window(stage);
    Grid {
        start: lo,
        dx: (hi - lo) / (len - 1) as f64,
        len,
    }
}

/// Grid for the iteration: `half_width` around 0 when configured, else
/// [`wave_window`] at spacing about `dxi`.
pub fn wave_grid(ctx: &Context, stage: &ProfileStage) -> Grid {
    let run = &ctx.cfg.run;
    if let Some(h) = run.half_width {
        return Grid::centered(h, run.dxi);
    }
    let (lo, hi) = wave_window(stage);
    window_grid(stage, ((hi - lo) / run.dxi).ceil() as usize + 1)
}

/// Iteration outcome with the final wave checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStage {
    pub result: IterationResult,
    pub residual: [f64; 3],
    pub asymptotics: AsymptoticsCheck,
}

impl IterationStage {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }

    /// Converged, order-preserving and a genuine wave.
    pub fn success(&self) -> bool {
        self.result.converged() && self.result.monotone && self.max_residual() < RESIDUAL_TOL
    }
}

/// Cross-iterate from the sampled pair on `grid`.
pub fn iterate(ctx: &Context, stage: &ProfileStage, grid: Grid, opts: &Options) -> Result<IterationStage> {
    let op = WaveOperator::new(ctx.params(), &ctx.wp, grid, opts.exec)?;
    let (u, l) = stage.pair.sample(grid);
    let run = &ctx.cfg.run;
    let iopts = IterationOptions {
        max_iter: run.max_iter,
        tol: run.tol_iter,
        ..Default::default()
    };
    let result = cross_iterate(&op, &u, &l, &iopts)?;
    let residual = wave_residual(ctx.params(), &result.wave);
    let asymptotics = asymptotics_check(&result.wave, ctx.wp.k);
    Ok(IterationStage {
        result,
        residual,
        asymptotics,
    })
}

/// PDE discretization; `None` picks the stable defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimSettings {
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub half_width: f64,
    pub t_final: f64,
    pub snapshot_every: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            dx: None,
            dt: None,
            half_width: 150.0,
            t_final: 20.0,
            snapshot_every: 250,
        }
    }
}

/// Trajectory from the wave plus speed and shape comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStage {
    pub dx: f64,
    pub dt: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub clips: usize,
    /// Measured front speed, or why none could be measured.
    pub speed: std::result::Result<f64, String>,
    pub comparison: WaveComparison,
    /// `max sup |I - wave| / k2`.
    pub relative_discrepancy: f64,
}

/// Simulate the PDE from `wave` on `[-half_width, half_width]`.
pub fn simulate_wave(ctx: &Context, wave: &ProfileTriple, s: &SimSettings, opts: &Options) -> Result<SimStage> {
    let p = ctx.params();
    let dx = s.dx.unwrap_or_else(|| stable_dx(p).max(0.1));
    let dt = s.dt.unwrap_or_else(|| stable_dt(p, dx));
    let grid = Grid::centered(s.half_width, dx);
    let mut state = PdeState::from_wave(grid, wave, 0.0, p, dt)?;
    let trajectory = simulate(&mut state, p, s.t_final, s.snapshot_every, opts.exec)?;
    let k2 = ctx.wp.k[1];
    let speed = front_speed(&trajectory, 0.5, k2).map_err(|e| e.to_string());
    let comparison = compare_with_wave(&trajectory, wave, p.c, k2)?;
    let relative_discrepancy = comparison.max_sup() / k2;
    Ok(SimStage {
        dx,
        dt,
        clips: trajectory.clips,
        trajectory,
        speed,
        comparison,
        relative_discrepancy,
    })
}
