//! Channel acquisition for HF skywave massive MIMO-OFDM in the triple-beam
//! (angle × delay × Doppler) domain.
//!
//! Pipeline: [`grid`] fixes dimensions and sampling grids, [`scenario`]
//! synthesizes multipath channels and their bin-wise power profiles,
//! [`pilots`] groups terminals and assigns phase-shifted pilots,
//! [`fast_ops`] applies the structured sensing operator with chirp-z
//! transforms, [`estimators`] recovers the beam-domain channel (linear MMSE or
//! the iterative message-passing estimator), [`predictor`] extends it over the
//! data symbols, and [`metrics`] / [`harness`] score and orchestrate runs.

pub mod error;
pub mod estimators;
pub mod fast_ops;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod pilots;
pub mod predictor;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
