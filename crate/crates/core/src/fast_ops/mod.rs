//! Structured beam-domain operators.
//!
//! [`TbOperator`] maps beam-domain coefficients to space-frequency-time
//! observations without ever forming the dictionary: a zero-padded FFT along
//! delay, a chirp-z transform along angle (per subcarrier), and a chirp-z
//! transform along Doppler. [`materialize`] builds the same matrix densely for
//! small oracle problems.

pub mod czt;
mod dense;
mod tb;

pub use czt::{czt_apply, CztPlan};
pub use dense::{materialize, materialize_capped, DenseOperator, DEFAULT_DENSE_CAP};
pub use tb::{OperatorMode, TbOperator};

use crate::error::check_len;
use crate::{Result, C64};

/// A linear map with forward and adjoint applies, as consumed by the estimators.
pub trait SensingOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>>;
    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>>;

    /// Forward apply of a vector that is zero outside `support`.
    fn apply_sparse(&self, support: &[usize], vals: &[C64]) -> Result<Vec<C64>> {
        check_len("sparse values", support.len(), vals.len())?;
        let mut x = vec![C64::new(0.0, 0.0); self.cols()];
        for (&j, &v) in support.iter().zip(vals) {
            x[j] = v;
        }
        self.apply(&x)
    }

    /// Adjoint apply evaluated only at the `support` entries.
    fn apply_adjoint_on(&self, y: &[C64], support: &[usize]) -> Result<Vec<C64>> {
        let full = self.apply_adjoint(y)?;
        Ok(support.iter().map(|&j| full[j]).collect())
    }

    /// Column `j` of the matrix.
    fn column(&self, j: usize) -> Result<Vec<C64>> {
        let mut e = vec![C64::new(0.0, 0.0); self.cols()];
        e[j] = C64::new(1.0, 0.0);
        self.apply(&e)
    }

    /// Per-terminal channel (pilots removed) implied by beam-domain
    /// coefficients, when the operator models one.
    fn channel_rows(&self, _x: &[C64]) -> Option<Result<Vec<Vec<C64>>>> {
        None
    }
}
