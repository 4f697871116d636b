//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between parameter parsing and the PDE run.
///
/// Variants carry enough context (offending value, location, last good state)
/// for the CLI to emit a machine-readable failure record.
#[derive(Debug, Clone, Error, PartialEq)]
#[non_exhaustive]
pub enum Error {
    // ---- configuration / model ----
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("no endemic state: reproduction number {r0} <= 1")]
    NoEndemicState { r0: f64 },
    #[error("wave speed {c} below critical speed {c_star}")]
    SubcriticalSpeed { c: f64, c_star: f64 },
    #[error("root solve did not converge: {0}")]
    NonConvergence(String),
    #[error("domain violation: B/mu1 - phi - psi - chi = {slack} < 0")]
    DomainViolation { slack: f64 },
    #[error("PQM inequality {which} violated by {amount:e} at sample {sample:?}")]
    PqmVerificationFailed {
        which: String,
        amount: f64,
        sample: Vec<f64>,
    },

    // ---- characteristic roots ----
    #[error("quadratic has no positive root (c={c}, q={q})")]
    NoPositiveRoot { c: f64, q: f64 },
    #[error("quadratic has complex roots (c={c}, q={q})")]
    ComplexRoots { c: f64, q: f64 },
    #[error("continuation failed; last good (r, eta) = ({r}, {eta})")]
    ContinuationFailed { r: f64, eta: f64 },
    #[error("imaginary-axis certificate failed: |Delta(i*{eta})| = {modulus:e}")]
    CertificateFailed { eta: f64, modulus: f64 },
    #[error("root on contour: |Delta| = {modulus:e} at {re}+{im}i")]
    BoundaryRoot { re: f64, im: f64, modulus: f64 },

    // ---- kernels ----
    #[error("no imaginary-axis certificate for kernel: {0}")]
    NoCertificate(String),
    #[error("quadrature tail estimate {estimate:e} exceeds tolerance {tol:e}")]
    QuadratureStalled { estimate: f64, tol: f64 },
    #[error("decay fit needs 16 tail samples, found {found}")]
    FitFailed { found: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    // ---- profiles ----
    #[error("solution conditions infeasible: {0}")]
    InfeasibleSolcond(String),
    #[error("break point not found: {0}")]
    BreakNotFound(String),
    #[error("case violation: equation {equation}, case {case}, t={t}, value={value:e}")]
    CaseViolation {
        equation: usize,
        case: usize,
        t: f64,
        value: f64,
    },

    // ---- iteration ----
    #[error("monotonicity violated by {amount:e} at iterate {iterate}: {what}")]
    MonotonicityViolation {
        iterate: usize,
        amount: f64,
        what: String,
    },
    #[error("no convergence after {iterations} iterations (gap {gap:e})")]
    MaxIterExceeded { iterations: usize, gap: f64 },

    // ---- pde ----
    #[error("blow-up at t={t}: |value| = {value:e}")]
    BlowUp { t: f64, value: f64 },
    #[error("time step {dt} is incompatible with history spacing {spacing}")]
    HistoryUnderflow { dt: f64, spacing: f64 },
    #[error("no front: {0}")]
    NoFront(String),

    // ---- io ----
    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },
}

impl Error {
    /// True for errors that mean "this configuration is outside the theory"
    /// rather than "the numerics broke".
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NoEndemicState { .. }
                | Error::SubcriticalSpeed { .. }
                | Error::Config { .. }
                | Error::InfeasibleSolcond(_)
        )
    }
}
