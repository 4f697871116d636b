//! Subcommand bodies. Each writes its artifacts into the sink and returns
//! either success or a [`Failure`] carrying the exit status.

use serde::Serialize;
use serde_json::json;
use sirwave::config::{self, RunConfig};
use sirwave::iteration::Stop;
use sirwave::Error;
use std::path::Path;

use crate::artifacts::{self, Failure, Sink};
use crate::pipeline::{self, Context, IterationStage, Options, ProfileStage, SimSettings, RESIDUAL_TOL};

pub type Outcome = std::result::Result<(), Failure>;

fn io_failure(stage: &str, e: std::io::Error) -> Failure {
    Failure::numerical(stage, "Io", e.to_string())
}

fn fail(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |e| Failure::from_error(stage, &e)
}

/// Read and parse a config file; unreadable files count as invalid input.
pub fn load(path: &Path) -> std::result::Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        stage: "config".into(),
        kind: "Io".into(),
        reason: format!("cannot read {}", path.display()),
        message: e.to_string(),
        exit_code: 2,
    })?;
    config::parse(&text).map_err(fail("config"))
}

pub fn roots(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let rows = pipeline::roots(cfg).map_err(fail("roots"))?;
    sink.text("roots.csv", &artifacts::roots_csv(&rows))
        .map_err(|e| io_failure("roots", e))
}

pub fn greens(cfg: &RunConfig, r: Option<f64>, sink: &Sink, opts: &Options) -> Outcome {
    let stage = "greens";
    let w = cfg.params.wave_delays();
    let delays = r.map_or([w[0], w[1], w[2]], |r| [r; 3]);
    let table = pipeline::kernel_table(cfg, delays, opts.exec).map_err(fail(stage))?;
    let summary = pipeline::kernels(cfg, opts.exec).map_err(fail(stage))?;
    sink.text("greens.csv", &artifacts::greens_csv(&table))
        .and_then(|_| sink.json("kernels.json", "kernels", json!({ "kernels": summary })))
        .map_err(|e| io_failure(stage, e))
}

fn prepared(cfg: &RunConfig, opts: &Options) -> std::result::Result<Context, Failure> {
    pipeline::prepare(cfg, opts).map_err(fail("prepare"))
}

fn profile_stage(ctx: &Context, sink: &Sink, opts: &Options) -> std::result::Result<ProfileStage, Failure> {
    let stage = "profiles";
    let rows = pipeline::roots(&ctx.cfg).map_err(fail("roots"))?;
    sink.text("roots.csv", &artifacts::roots_csv(&rows))
        .map_err(|e| io_failure("roots", e))?;
    let ps = pipeline::profiles(ctx, &rows, opts).map_err(fail(stage))?;
    let grid = pipeline::wave_grid(ctx, &ps);
    let (u, l) = ps.pair.sample(grid);
    sink.text("profiles.csv", &artifacts::profiles_csv(&u, &l))
        .and_then(|_| sink.json("profiles.json", "profiles", &ps))
        .map_err(|e| io_failure(stage, e))?;
    Ok(ps)
}

pub fn profiles(cfg: &RunConfig, sink: &Sink, opts: &Options) -> Outcome {
    let ctx = prepared(cfg, opts)?;
    let ps = profile_stage(&ctx, sink, opts)?;
    let bad = ps
        .super_cases
        .first_violation()
        .or_else(|| ps.sub_cases.first_violation());
    match bad {
        Some(e) => Err(Failure::from_error("profiles", &e)),
        None => Ok(()),
    }
}

/// Summary written as `residual.json`.
#[derive(Debug, Serialize)]
struct ResidualReport<'a> {
    residual: [f64; 3],
    residual_tol: f64,
    asymptotics: &'a sirwave::iteration::AsymptoticsCheck,
    stop: Stop,
    iterations: usize,
    monotone: bool,
    worst_violation: f64,
    mu: f64,
    certified_profiles: bool,
    grid: sirwave::Grid,
}

fn iteration_stage(
    ctx: &Context,
    ps: &ProfileStage,
    sink: &Sink,
    emit_every: usize,
    opts: &Options,
) -> std::result::Result<IterationStage, Failure> {
    let stage = "iterate";
    let grid = pipeline::wave_grid(ctx, ps);
    let it = pipeline::iterate(ctx, ps, grid, opts).map_err(fail(stage))?;
    let every = emit_every.max(1);
    let n = it.result.trace.len();
    let rows: Vec<_> = it
        .result
        .trace
        .iter()
        .filter(|s| s.iterate % every == 0 || s.iterate == n)
        .cloned()
        .collect();
    let report = ResidualReport {
        residual: it.residual,
        residual_tol: RESIDUAL_TOL,
        asymptotics: &it.asymptotics,
        stop: it.result.stop,
        iterations: n,
        monotone: it.result.monotone,
        worst_violation: it.result.worst_violation,
        mu: it.result.mu,
        certified_profiles: ps.parameters.certified,
        grid,
    };
    sink.text("wave.csv", &artifacts::wave_csv(&it.result.wave))
        .and_then(|_| sink.text("iteration.csv", &artifacts::iteration_csv(&rows)))
        .and_then(|_| sink.json("residual.json", "residual", &report))
        .map_err(|e| io_failure(stage, e))?;
    Ok(it)
}

fn judge(it: &IterationStage) -> Outcome {
    let r = &it.result;
    if !r.converged() {
        let gap = r.trace.last().map_or(f64::NAN, |s| s.gap);
        return Err(Failure::from_error(
            "iterate",
            &Error::MaxIterExceeded {
                iterations: r.trace.len(),
                gap,
            },
        ));
    }
    if !r.monotone {
        return Err(Failure::numerical(
            "iterate",
            "MonotonicityViolation",
            format!("order of the iterates violated by {:e}", r.worst_violation),
        ));
    }
    if it.max_residual() >= RESIDUAL_TOL {
        return Err(Failure::numerical(
            "iterate",
            "ResidualTooLarge",
            format!("wave residual {:e} >= {RESIDUAL_TOL:e}", it.max_residual()),
        ));
    }
    Ok(())
}

pub fn iterate(cfg: &RunConfig, sink: &Sink, emit_every: usize, opts: &Options) -> Outcome {
    let ctx = prepared(cfg, opts)?;
    let ps = profile_stage(&ctx, sink, opts)?;
    let it = iteration_stage(&ctx, &ps, sink, emit_every, opts)?;
    judge(&it)
}

pub fn simulate(cfg: &RunConfig, sink: &Sink, sim: &SimSettings, opts: &Options) -> Outcome {
    let stage = "simulate";
    let ctx = prepared(cfg, opts)?;
    let ps = profile_stage(&ctx, sink, opts)?;
    let it = iteration_stage(&ctx, &ps, sink, 1, opts)?;
    let s = pipeline::simulate_wave(&ctx, &it.result.wave, sim, opts).map_err(fail(stage))?;
    sink.text("pde.csv", &artifacts::pde_csv(&s))
        .and_then(|_| sink.json("pde.json", "pde", json!({ "settings": sim, "c": cfg.params.c, "result": &s })))
        .map_err(|e| io_failure(stage, e))?;
    match s.speed {
        Ok(v) if (v - cfg.params.c).abs() <= 0.1 * cfg.params.c => Ok(()),
        Ok(v) => Err(Failure::numerical(
            stage,
            "SpeedMismatch",
            format!("front speed {v} differs from c = {} by more than 10%", cfg.params.c),
        )),
        Err(m) => Err(Failure::numerical(stage, "NoFront", m)),
    }
}

/// Full pipeline: gates, roots, kernels, parameters, case verification,
/// cross iteration and the residual report.
pub fn run(cfg: &RunConfig, sink: &Sink, emit_every: usize, opts: &Options) -> Outcome {
    let ctx = prepared(cfg, opts)?;
    let kernels = pipeline::kernels(cfg, opts.exec).map_err(fail("kernels"))?;
    sink.json("kernels.json", "kernels", json!({ "kernels": kernels }))
        .map_err(|e| io_failure("kernels", e))?;
    let ps = profile_stage(&ctx, sink, opts)?;
    let it = iteration_stage(&ctx, &ps, sink, emit_every, opts)?;
    let verdict = judge(&it);
    sink.json(
        "run.json",
        "run",
        json!({
            "seed": opts.seed,
            "certified_profiles": ps.parameters.certified,
            "cases_verified": ps.super_cases.all_pass() && ps.sub_cases.all_pass(),
            "iteration_success": verdict.is_ok(),
            "max_residual": it.max_residual(),
        }),
    )
    .map_err(|e| io_failure("run", e))?;
    verdict
}

/// One line of the `validate` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

struct Suites(Vec<SuiteResult>);

impl Suites {
    fn add(&mut self, suite: &'static str, ok: bool, detail: String) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.0.push(SuiteResult { suite, status, detail });
    }

    fn skip(&mut self, suites: &[&'static str], why: &str) {
        for &suite in suites {
            self.0.push(SuiteResult {
                suite,
                status: Status::Skip,
                detail: why.into(),
            });
        }
    }
}

const LATER: [&str; 7] = [
    "solution-conditions",
    "super-cases",
    "sub-cases",
    "smoothing",
    "iteration-order",
    "wave-residual",
    "asymptotics",
];

/// Run every invariant check the configuration admits.
pub fn validate_suites(cfg: &RunConfig, opts: &Options) -> Vec<SuiteResult> {
    let mut s = Suites(Vec::new());
    match pipeline::roots(cfg) {
        Ok(rows) => {
            let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            s.add("roots", worst < 1e-12, format!("max |Delta(eta)| = {worst:.3e}"));
        }
        Err(e) => s.add("roots", false, e.to_string()),
    }
    match pipeline::kernels(cfg, opts.exec) {
        Ok(ks) => {
            let mass = ks
                .iter()
                .map(|k| (k.mass - k.expected_mass).abs())
                .fold(0.0, f64::max);
            let env: usize = ks.iter().map(|k| k.envelope_violations).sum();
            s.add("kernel-mass", mass < 1e-6, format!("max |mass + 1/b| = {mass:.3e}"));
            s.add("kernel-envelope", env == 0, format!("{env} samples outside the envelope"));
        }
        Err(e) => {
            s.add("kernel-mass", false, e.to_string());
            s.skip(&["kernel-envelope"], "no kernel");
        }
    }
    let ctx = match pipeline::prepare(cfg, opts) {
        Ok(c) => {
            s.add("parameters", true, format!("k = {:?}", c.wp.k));
            c
        }
        Err(e) => {
            s.add("parameters", false, e.to_string());
            s.skip(&["shift-constants"], "parameters rejected");
            s.skip(&LATER, "parameters rejected");
            return s.0;
        }
    };
    match pipeline::pqm_report(&ctx, opts) {
        Ok(r) => s.add(
            "shift-constants",
            true,
            format!("{} samples, worst margin {:.3e}", r.samples, r.worst_margin.iter().cloned().fold(f64::INFINITY, f64::min)),
        ),
        Err(e) => s.add("shift-constants", false, e.to_string()),
    }
    let rows = match pipeline::roots(cfg) {
        Ok(r) => r,
        Err(_) => {
            s.skip(&LATER, "no roots");
            return s.0;
        }
    };
    let ps = match pipeline::profiles(&ctx, &rows, opts) {
        Ok(ps) => ps,
        Err(e) => {
            s.add("solution-conditions", false, e.to_string());
            s.skip(&LATER[1..], "no profile parameters");
            return s.0;
        }
    };
    let cert = &ps.parameters.certificate;
    s.add(
        "solution-conditions",
        ps.parameters.certified && cert.is_valid(),
        format!(
            "certified = {}, min residual {:.3e}",
            ps.parameters.certified,
            cert.residuals.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    );
    for (name, rep) in [("super-cases", &ps.super_cases), ("sub-cases", &ps.sub_cases)] {
        s.add(
            name,
            rep.all_pass(),
            format!("{}/{} regions, worst margin {:.3e}", rep.passed(), rep.cases.len(), rep.worst()),
        );
    }
    let grid = pipeline::wave_grid(&ctx, &ps);
    match smoothing(&ctx, &ps, opts) {
        Ok((class, jump)) => s.add(
            "smoothing",
            class >= sirwave::profiles::SmoothClass::Quasi,
            format!("F(super) is {class:?}, max C1 jump {jump:.3e}"),
        ),
        Err(e) => s.add("smoothing", false, e.to_string()),
    }
    match pipeline::iterate(&ctx, &ps, grid, opts) {
        Ok(it) => {
            let r = &it.result;
            s.add(
                "iteration-order",
                r.monotone && r.gap_decreasing(10.min(r.trace.len())),
                format!("worst order violation {:.3e}, stop {:?} after {}", r.worst_violation, r.stop, r.trace.len()),
            );
            s.add(
                "wave-residual",
                it.max_residual() < RESIDUAL_TOL,
                format!("max residual {:.3e}", it.max_residual()),
            );
            s.add(
                "asymptotics",
                it.asymptotics.worst() < 1e-6,
                format!("max distance from limits {:.3e}", it.asymptotics.worst()),
            );
        }
        Err(e) => {
            s.add("iteration-order", false, e.to_string());
            s.skip(&LATER[5..], "iteration failed");
        }
    }
    s.0
}

/// Half-width and points of the window used for the smoothing check.
pub const SMOOTHING_WINDOW: (f64, usize) = (40.0, 65_536);

/// Class of `F(super)` on a fine window around the breaks and its largest
/// first-derivative jump.
pub fn smoothing(
    ctx: &Context,
    ps: &ProfileStage,
    opts: &Options,
) -> sirwave::Result<(sirwave::profiles::SmoothClass, f64)> {
    use sirwave::iteration::WaveOperator;
    let (w, n) = SMOOTHING_WINDOW;
    let b = &ps.parameters.breaks;
    let mid = 0.5 * (b.iter().cloned().fold(f64::INFINITY, f64::min) + b.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let grid = sirwave::Grid {
        start: mid - w,
        dx: 2.0 * w / (n - 1) as f64,
        len: n,
    };
    let op = WaveOperator::new(ctx.params(), &ctx.wp, grid, opts.exec)?;
    let (u, l) = ps.pair.sample(grid);
    let f = op.apply(&u, &l)?;
    let rep = sirwave::profiles::check_quasi_and_smooth(&f, &[[b[0], b[1], b[2]]]);
    let jump = rep.jumps.iter().map(|j| j.first).fold(0.0, f64::max);
    Ok((rep.class, jump))
}

/// Print the table and write `validate.json`; fails if any suite failed.
pub fn validate(cfg: &RunConfig, sink: &Sink, opts: &Options) -> Outcome {
    let suites = validate_suites(cfg, opts);
    println!("{:<20} {:<6} detail", "suite", "status");
    for r in &suites {
        println!("{:<20} {:<6} {}", r.suite, r.status, r.detail);
    }
    sink.json("validate.json", "validate", json!({ "suites": &suites }))
        .map_err(|e| io_failure("validate", e))?;
    let failed: Vec<_> = suites.iter().filter(|r| r.status == Status::Fail).collect();
    if failed.is_empty() {
        return Ok(());
    }
    // Gate failures are configuration problems; anything later is numerical.
    let gate = failed.iter().any(|r| r.suite == "parameters" || r.suite == "solution-conditions");
    let names: Vec<_> = failed.iter().map(|r| r.suite).collect();
    Err(Failure {
        stage: "validate".into(),
        kind: "SuiteFailed".into(),
        reason: format!("failed suites: {}", names.join(", ")),
        message: failed[0].detail.clone(),
        exit_code: if gate { 2 } else { 3 },
    })
}
