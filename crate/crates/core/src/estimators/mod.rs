//! Beam-domain channel estimators: exact linear MMSE and the iterative
//! message-passing estimator built on fast operator applies.

mod cbfem;
mod gaussian;
mod mmse;

pub use cbfem::{cbfem_estimate, cbfem_estimate_traced, CbfemOptions, CbfemState};
pub use gaussian::{gaussian_product, GaussianBelief};
pub use mmse::{mmse_estimate, mmse_observation_form, mmse_support_form};

use serde::{Deserialize, Serialize};

use crate::fast_ops::SensingOperator;
use crate::scenario::StatCsi;
use crate::{Error, Result, C64};

/// Prior variances below this fraction of the largest one are treated as zero.
pub const SUPPORT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mmse,
    Cbfem,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Mmse => "mmse",
            Algorithm::Cbfem => "cbfem",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmse" => Ok(Algorithm::Mmse),
            "cbfem" => Ok(Algorithm::Cbfem),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Output of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Beam-domain estimate, all terminals stacked.
    pub h_tb_hat: Vec<C64>,
    /// Per-terminal channel estimate on the operator's symbols, when the
    /// operator carries a channel model.
    pub h_sft_p_hat: Option<Vec<Vec<C64>>>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative change of the estimate per iteration.
    pub residual_trace: Vec<f64>,
    /// Number of clamped precision updates.
    pub clamp_count: usize,
}

/// Active entries of the stacked prior with their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub support: Vec<usize>,
    pub var: Vec<f64>,
    pub cols: usize,
}

/// Collect stacked prior support, pruning entries below `floor · max`.
pub fn prior_support(csi: &StatCsi, floor: f64) -> Result<Prior> {
    let tb = csi.tb_len();
    let peak = csi.tb.iter().map(|d| d.max()).fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let mut support = Vec::new();
    let mut var = Vec::new();
    for (u, d) in csi.tb.iter().enumerate() {
        crate::error::check_len("beam-domain profile", tb, d.len())?;
        for &(i, v) in d.entries() {
            if v >= floor * peak {
                support.push(u * tb + i);
                var.push(v);
            }
        }
    }
    Ok(Prior { support, var, cols: tb * csi.num_uts() })
}

fn check_noise(sigma_z: f64) -> Result<()> {
    if !(sigma_z.is_finite() && sigma_z >= 0.0) {
        return Err(Error::OutOfRange(format!("noise level {sigma_z} must be finite and nonnegative")));
    }
    Ok(())
}

fn finish<O: SensingOperator + ?Sized>(op: &O, prior: &Prior, vals: &[C64]) -> Result<(Vec<C64>, Option<Vec<Vec<C64>>>)> {
    let mut h = vec![C64::new(0.0, 0.0); prior.cols];
    for (&j, &v) in prior.support.iter().zip(vals) {
        h[j] = v;
    }
    let ch = op.channel_rows(&h).transpose()?;
    Ok((h, ch))
}
