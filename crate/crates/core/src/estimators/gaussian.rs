use crate::error::check_len;
use crate::{Error, Result, C64};

/// Independent complex Gaussians (diagonal covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vec<C64>,
    pub var: Vec<f64>,
}

/// Product of a zero-mean prior `CN(0, prior_var)` with a message
/// `CN(msg_mean, 1/msg_prec)`, elementwise. `prior_var = ∞` is a flat prior.
pub fn gaussian_product(prior_var: &[f64], msg_mean: &[C64], msg_prec: &[f64]) -> Result<GaussianBelief> {
    check_len("message mean", prior_var.len(), msg_mean.len())?;
    check_len("message precision", prior_var.len(), msg_prec.len())?;
    let mut mean = Vec::with_capacity(prior_var.len());
    let mut var = Vec::with_capacity(prior_var.len());
    for ((&pv, &mm), &mp) in prior_var.iter().zip(msg_mean).zip(msg_prec) {
        if pv < 0.0 || pv.is_nan() {
            return Err(Error::OutOfRange(format!("prior variance {pv} is negative")));
        }
        let prec = 1.0 / pv + mp;
        if !(prec > 0.0) {
            return Err(Error::OutOfRange(format!("posterior precision {prec} is not positive")));
        }
        mean.push(mm * (mp / prec));
        var.push(1.0 / prec);
    }
    Ok(GaussianBelief { mean, var })
}
