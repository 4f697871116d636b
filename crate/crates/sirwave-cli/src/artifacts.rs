//! CSV and JSON artifacts.
//!
//! Every JSON document carries `"schema_version": "1"`. CSV columns are
//! fixed per file (see [`COLUMNS`]); floats use Rust's shortest round-trip
//! formatting, so identical inputs give byte-identical files.

use serde::Serialize;
use serde_json::{json, Value};
use sirwave::charroots::RootRow;
use sirwave::iteration::IterStep;
use sirwave::profiles::ProfileTriple;
use sirwave::Error;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::pipeline::{KernelSample, SimStage};

pub const SCHEMA_VERSION: &str = "1";

/// File name and header of every CSV artifact.
pub const COLUMNS: [(&str, &str); 6] = [
    ("roots.csv", "label,q,r,lambda,eta,residual"),
    ("greens.csv", "component,xi,g,closed_form"),
    ("profiles.csv", "xi,upper_phi,upper_psi,upper_chi,lower_phi,lower_psi,lower_chi"),
    ("wave.csv", "xi,phi,psi,chi"),
    ("iteration.csv", "iterate,gap,upper_step,lower_step,upper_rise,lower_drop,sandwich,residual"),
    ("pde.csv", "t,x,s,i,r"),
];

fn header(file: &str) -> &'static str {
    COLUMNS
        .iter()
        .find(|(f, _)| *f == file)
        .map(|(_, h)| *h)
        .expect("known artifact")
}

fn table<R>(file: &str, rows: impl IntoIterator<Item = R>, row: impl Fn(&mut String, R)) -> String {
    let mut s = String::from(header(file));
    s.push('\n');
    for r in rows {
        row(&mut s, r);
        s.push('\n');
    }
    s
}

pub fn roots_csv(rows: &[RootRow]) -> String {
    table("roots.csv", rows, |s, r| {
        let _ = write!(s, "{},{},{},{},{},{}", r.label, r.q, r.r, r.lambda, r.eta, r.residual);
    })
}

pub fn greens_csv(rows: &[KernelSample]) -> String {
    table("greens.csv", rows, |s, r| {
        let cf = r.closed_form.map(|v| v.to_string()).unwrap_or_default();
        let _ = write!(s, "{},{},{},{}", r.component, r.xi, r.g, cf);
    })
}

pub fn profiles_csv(upper: &ProfileTriple, lower: &ProfileTriple) -> String {
    let g = upper.grid();
    table("profiles.csv", 0..g.len, |s, j| {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{}",
            g.point(j),
            upper.phi.values[j],
            upper.psi.values[j],
            upper.chi.values[j],
            lower.phi.values[j],
            lower.psi.values[j],
            lower.chi.values[j]
        );
    })
}

pub fn wave_csv(w: &ProfileTriple) -> String {
    let g = w.grid();
    table("wave.csv", 0..g.len, |s, j| {
        let _ = write!(s, "{},{},{},{}", g.point(j), w.phi.values[j], w.psi.values[j], w.chi.values[j]);
    })
}

pub fn iteration_csv(trace: &[IterStep]) -> String {
    table("iteration.csv", trace, |s, t| {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            t.iterate, t.gap, t.upper_step, t.lower_step, t.upper_rise, t.lower_drop, t.sandwich, t.residual
        );
    })
}

pub fn pde_csv(sim: &SimStage) -> String {
    let tr = &sim.trajectory;
    let g = tr.grid;
    let rows = tr
        .times
        .iter()
        .zip(&tr.snapshots)
        .flat_map(|(t, f)| (0..g.len).map(move |j| (*t, j, f)));
    table("pde.csv", rows, |s, (t, j, f)| {
        let _ = write!(s, "{},{},{},{},{}", t, g.point(j), f[0][j], f[1][j], f[2][j]);
    })
}

/// `{"schema_version": "1", "kind": kind, ...body}`.
pub fn document(kind: &str, body: impl Serialize) -> Value {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "kind": kind });
    match serde_json::to_value(body).expect("serializable artifact") {
        Value::Object(m) => v.as_object_mut().expect("object").extend(m),
        other => {
            v["data"] = other;
        }
    }
    v
}

/// Pretty JSON with a trailing newline. Non-finite floats become `null`.
pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable artifact");
    s.push('\n');
    s
}

/// Short reason for the two threshold gates; `None` for other errors.
pub fn threshold_reason(e: &Error) -> Option<&'static str> {
    match e {
        Error::NoEndemicState { .. } => Some("reproduction number below threshold"),
        Error::SubcriticalSpeed { .. } => Some("wave speed below critical"),
        _ => None,
    }
}

/// Exit status for an error: 2 if the configuration is outside the theory,
/// 3 if the numerics failed.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_infeasible() {
        2
    } else {
        3
    }
}

/// Machine-readable record of a failed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub kind: String,
    pub reason: String,
    pub message: String,
    pub exit_code: i32,
}

impl Failure {
    pub fn from_error(stage: &str, e: &Error) -> Self {
        let debug = format!("{e:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("Error")
            .to_string();
        Failure {
            stage: stage.into(),
            kind,
            reason: threshold_reason(e).map(str::to_string).unwrap_or_else(|| e.to_string()),
            message: e.to_string(),
            exit_code: exit_code(e),
        }
    }

    /// A run that finished but did not meet its numerical targets.
    pub fn numerical(stage: &str, kind: &str, message: String) -> Self {
        Failure {
            stage: stage.into(),
            kind: kind.into(),
            reason: message.clone(),
            message,
            exit_code: 3,
        }
    }
}

/// Writes artifacts into one directory.
#[derive(Debug, Clone)]
pub struct Sink<'a> {
    pub dir: &'a Path,
}

impl Sink<'_> {
    pub fn new(dir: &Path) -> io::Result<Sink<'_>> {
        std::fs::create_dir_all(dir)?;
        Ok(Sink { dir })
    }

    pub fn text(&self, name: &str, body: &str) -> io::Result<()> {
        std::fs::write(self.dir.join(name), body)
    }

    pub fn json(&self, name: &str, kind: &str, body: impl Serialize) -> io::Result<()> {
        self.text(name, &to_json(&document(kind, body)))
    }
}
