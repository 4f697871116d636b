//! Flat `key = value` configuration files.
//!
//! Model keys (all required): `d_s d_i d_r b mu1 mu2 mu3 gamma alpha beta
//! tau1 tau2 tau3 tau4 c m1 m2 m3`. Run keys (optional, with defaults):
//! `dxi half_width tol_iter tol_quad max_iter`. `#` starts a comment; blank
//! lines are ignored; unknown or repeated keys are errors.

use crate::error::{Error, Result};
use crate::model::SirParameters;
use serde::Serialize;
use std::collections::BTreeMap;

/// Every key a model file must define, in canonical order.
pub const MODEL_KEYS: [&str; 18] = [
    "d_s", "d_i", "d_r", "b", "mu1", "mu2", "mu3", "gamma", "alpha", "beta", "tau1", "tau2", "tau3", "tau4",
    "c", "m1", "m2", "m3",
];

/// Optional numerical settings.
pub const RUN_KEYS: [&str; 5] = ["dxi", "half_width", "tol_iter", "tol_quad", "max_iter"];

/// Grid and tolerance settings of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSettings {
    /// Shared grid spacing.
    pub dxi: f64,
    /// Truncation half-width; `None` picks one from the profile scales.
    pub half_width: Option<f64>,
    pub tol_iter: f64,
    pub tol_quad: f64,
    pub max_iter: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            dxi: 0.05,
            half_width: None,
            tol_iter: 1e-4,
            tol_quad: 1e-6,
            max_iter: 400,
        }
    }
}

/// Parsed configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: SirParameters,
    pub m: [f64; 3],
    pub run: RunSettings,
}

fn cfg_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

/// Parse the text of a config file. Values are checked for syntax and
/// range of the run keys only; model invariants are left to
/// [`SirParameters::validate`].
pub fn parse(text: &str) -> Result<RunConfig> {
    let mut seen: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{body}`")))?;
        let k = k.trim();
        let key = MODEL_KEYS
            .iter()
            .chain(RUN_KEYS.iter())
            .find(|&&x| x == k)
            .ok_or_else(|| cfg_err(line, format!("unknown key `{k}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| cfg_err(line, format!("`{k}`: `{}` is not a number", v.trim())))?;
        if !v.is_finite() {
            return Err(cfg_err(line, format!("`{k}` must be finite")));
        }
        if let Some((first, _)) = seen.insert(key, (line, v)) {
            return Err(cfg_err(line, format!("`{k}` repeated (first set on line {first})")));
        }
    }
    let get = |k: &str| -> Result<f64> {
        seen.get(k)
            .map(|&(_, v)| v)
            .ok_or_else(|| cfg_err(0, format!("missing key `{k}`")))
    };
    let params = SirParameters {
        d_s: get("d_s")?,
        d_i: get("d_i")?,
        d_r: get("d_r")?,
        b: get("b")?,
        mu1: get("mu1")?,
        mu2: get("mu2")?,
        mu3: get("mu3")?,
        gamma: get("gamma")?,
        alpha: get("alpha")?,
        beta: get("beta")?,
        tau: [get("tau1")?, get("tau2")?, get("tau3")?, get("tau4")?],
        c: get("c")?,
    };
    let m = [get("m1")?, get("m2")?, get("m3")?];
    let mut run = RunSettings::default();
    let positive = |k: &str| -> Result<Option<f64>> {
        match seen.get(k) {
            None => Ok(None),
            Some(&(_, v)) if v > 0.0 => Ok(Some(v)),
            Some(&(line, v)) => Err(cfg_err(line, format!("`{k}` must be > 0, got {v}"))),
        }
    };
    if let Some(v) = positive("dxi")? {
        run.dxi = v;
    }
    run.half_width = positive("half_width")?;
    if let Some(v) = positive("tol_iter")? {
        run.tol_iter = v;
    }
    if let Some(v) = positive("tol_quad")? {
        run.tol_quad = v;
    }
    if let Some(v) = positive("max_iter")? {
        if v.fract() != 0.0 {
            let line = seen["max_iter"].0;
            return Err(cfg_err(line, format!("`max_iter` must be an integer, got {v}")));
        }
        run.max_iter = v as usize;
    }
    Ok(RunConfig { params, m, run })
}

/// Render a config back to text (model keys in canonical order).
pub fn render(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let vals = [
        p.d_s, p.d_i, p.d_r, p.b, p.mu1, p.mu2, p.mu3, p.gamma, p.alpha, p.beta, p.tau[0], p.tau[1], p.tau[2],
        p.tau[3], p.c, cfg.m[0], cfg.m[1], cfg.m[2],
    ];
    let mut out: String = MODEL_KEYS
        .iter()
        .zip(vals)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    let r = &cfg.run;
    out.push_str(&format!("dxi = {}\n", r.dxi));
    if let Some(h) = r.half_width {
        out.push_str(&format!("half_width = {h}\n"));
    }
    out.push_str(&format!(
        "tol_iter = {}\ntol_quad = {}\nmax_iter = {}\n",
        r.tol_iter, r.tol_quad, r.max_iter
    ));
    out
}
