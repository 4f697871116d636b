use clap::{Args, Parser, Subcommand};
use sirwave::Execution;
use sirwave_cli::artifacts::{self, Sink};
use sirwave_cli::commands::{self, Outcome};
use sirwave_cli::pipeline::{Options, SimSettings};
use std::path::PathBuf;
use std::process::ExitCode;

const AFTER_HELP: &str = "\
Exit status: 0 success, 2 infeasible configuration (R0 <= 1, c < c*, invalid
fields, unsatisfiable profile inequalities), 3 numerical failure. Failures
also write failure.json.

CSV artifacts (fixed columns):
  roots.csv      label,q,r,lambda,eta,residual
  greens.csv     component,xi,g,closed_form   (closed_form empty unless r = 0)
  profiles.csv   xi,upper_phi,upper_psi,upper_chi,lower_phi,lower_psi,lower_chi
  wave.csv       xi,phi,psi,chi
  iteration.csv  iterate,gap,upper_step,lower_step,upper_rise,lower_drop,sandwich,residual
  pde.csv        t,x,s,i,r
JSON artifacts carry \"schema_version\": \"1\".";

/// Traveling waves of a delayed diffusive SIR model.
#[derive(Debug, Parser)]
#[command(name = "sirwave", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Seed for all randomized verification sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fall back to an uncertified parameter scan when the profile
    /// inequalities have no solution.
    #[arg(long)]
    uncertified: bool,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Continued characteristic roots.
    Roots(Common),
    /// Green's kernels on [-10, 10].
    Greens {
        #[command(flatten)]
        common: Common,
        /// Delay for all three kernels (default: the configured wave delays).
        #[arg(long)]
        r: Option<f64>,
    },
    /// Super/sub parameter search and case verification.
    Profiles(Common),
    /// Cross iteration from the super/sub pair.
    Iterate {
        #[command(flatten)]
        common: Common,
        /// Override `tol_iter`.
        #[arg(long)]
        tol: Option<f64>,
        /// Override `max_iter`.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Write every n-th trace row (the last row is always written).
        #[arg(long, default_value_t = 1)]
        emit_every: usize,
    },
    /// PDE simulation started from the computed wave.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Grid spacing (default: the smallest spacing stable under the delays).
        #[arg(long)]
        dx: Option<f64>,
        /// Time step (default: stable for the spacing and delays).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        t_final: f64,
        /// Snapshot cadence in steps.
        #[arg(long, default_value_t = 250)]
        snapshot_every: usize,
        /// Spatial half-width.
        #[arg(long, default_value_t = 150.0)]
        half_width: f64,
    },
    /// Full invariant suite with a pass/fail table.
    Validate(Common),
    /// Whole pipeline: roots, kernels, profiles, iteration, residual report.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        emit_every: usize,
    },
}

fn options(c: &Common) -> Options {
    Options {
        seed: c.seed,
        uncertified: c.uncertified,
        exec: if c.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    }
}

fn dispatch(cmd: &Command, common: &Common) -> Outcome {
    let mut cfg = commands::load(&common.config)?;
    let sink = Sink::new(&common.out).map_err(|e| artifacts::Failure::numerical("output", "Io", e.to_string()))?;
    let opts = options(common);
    match cmd {
        Command::Roots(_) => commands::roots(&cfg, &sink),
        Command::Greens { r, .. } => commands::greens(&cfg, *r, &sink, &opts),
        Command::Profiles(_) => commands::profiles(&cfg, &sink, &opts),
        Command::Iterate {
            tol,
            max_iter,
            emit_every,
            ..
        } => {
            if let Some(t) = tol {
                cfg.run.tol_iter = *t;
            }
            if let Some(m) = max_iter {
                cfg.run.max_iter = *m;
            }
            commands::iterate(&cfg, &sink, *emit_every, &opts)
        }
        Command::Simulate {
            dx,
            dt,
            t_final,
            snapshot_every,
            half_width,
            ..
        } => {
            let sim = SimSettings {
                dx: *dx,
                dt: *dt,
                half_width: *half_width,
                t_final: *t_final,
                snapshot_every: *snapshot_every,
            };
            commands::simulate(&cfg, &sink, &sim, &opts)
        }
        Command::Validate(_) => commands::validate(&cfg, &sink, &opts),
        Command::Run { emit_every, .. } => commands::run(&cfg, &sink, *emit_every, &opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Roots(c) | Command::Profiles(c) | Command::Validate(c) => c,
        Command::Greens { common, .. }
        | Command::Iterate { common, .. }
        | Command::Simulate { common, .. }
        | Command::Run { common, .. } => common,
    };
    match dispatch(&cli.command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}] {}: {}", f.stage, f.kind, f.reason);
            if std::fs::create_dir_all(&common.out).is_ok() {
                let _ = std::fs::write(
                    common.out.join("failure.json"),
                    artifacts::to_json(&artifacts::document("failure", &f)),
                );
            }
            ExitCode::from(f.exit_code as u8)
        }
    }
}
