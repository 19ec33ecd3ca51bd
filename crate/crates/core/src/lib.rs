//! Expected number of real zeros of random trigonometric and cosine
//! polynomials whose Gaussian coefficients are i.i.d. or `ℓ`-periodic.
//!
//! The crate has two sides that check each other:
//!
//! * an analytic side: Kac–Rice integrals ([`kac_rice`]), closed-form
//!   zero counts for the factorizable `r = 0` case, and the limiting
//!   proportionality constants computed by double quadrature
//!   ([`constants`]);
//! * an empirical side: seeded Gaussian ensembles ([`coeff_models`]),
//!   a certified sign-change zero counter ([`zeros`]) and a Monte Carlo
//!   driver ([`experiment`]).
//!
//! Data-parallel loops (trials, quadrature panels) go through [`par`],
//! which uses rayon when the `parallel` feature is enabled and runs
//! sequentially otherwise. Reductions are always done in index order so
//! results are bit-identical either way.

pub mod coeff_models;
pub mod constants;
pub mod error;
pub mod experiment;
pub mod kac_rice;
pub mod numeric;
pub mod par;
pub mod quadrature;
pub mod trigpoly;
pub mod verify;
pub mod zeros;

pub use coeff_models::{
    decompose_degree, sample_coefficients, trial_seed, validate_model, CoefficientModel,
    Dependence, PeriodDecomposition, PolyKind, PolySample,
};
pub use error::{Error, Result};
pub use par::Execution;
