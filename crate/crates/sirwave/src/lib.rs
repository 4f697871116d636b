//! Constructive traveling-wave machinery for a diffusive SIR model whose
//! diffusion terms carry delays.
//!
//! The pipeline mirrors the existence argument step by step:
//!
//! 1. [`model`]: parameters, equilibria, reproduction number, critical
//!    speed, wave-frame nonlinearities and shift constants;
//! 2. [`charroots`]: smallest positive roots of the characteristic
//!    quadratics, continued in the delay to roots of the exponential
//!    polynomials, plus argument-principle certificates;
//! 3. [`greens`]: the bounded Green's kernel of the mixed-type linear
//!    operator and its convolution inverse;
//! 4. [`profiles`]: piecewise-exponential super/sub solutions and the case
//!    checks that certify them;
//! 5. [`iteration`]: the crossed monotone iteration producing the wave;
//! 6. [`pdesim`]: a direct delayed-diffusion simulation for cross-validation.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the default
//! `parallel` feature they run on rayon, otherwise sequentially.

pub mod charroots;
pub mod config;
pub mod error;
pub mod exec;
pub mod greens;
pub mod grid;
pub mod iteration;
pub mod model;
pub mod pdesim;
pub mod profiles;
pub mod special;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{Grid, ProfileFunction};
pub use model::{SirParameters, WaveFrameParameters};
