use nalgebra::{Cholesky, DMatrix, DVector};

use super::{check_noise, finish, prior_support, EstimateResult, Prior, SUPPORT_FLOOR};
use crate::error::check_len;
use crate::fast_ops::{SensingOperator, DEFAULT_DENSE_CAP};
use crate::scenario::StatCsi;
use crate::{Error, Result, C64};

/// Exact linear MMSE estimate on the prior support. Uses the support-side
/// (Gram) form when the support is smaller than the observation, otherwise
/// the observation-side form.
pub fn mmse_estimate<O: SensingOperator + ?Sized>(op: &O, csi: &StatCsi, y: &[C64], sigma_z: f64) -> Result<EstimateResult> {
    check_noise(sigma_z)?;
    check_len("observation", op.rows(), y.len())?;
    let prior = prior_support(csi, SUPPORT_FLOOR)?;
    check_len("operator columns", prior.cols, op.cols())?;
    let vals = if prior.support.len() < op.rows() {
        mmse_support_form(op, &prior, y, sigma_z)?
    } else {
        mmse_observation_form(op, &prior, y, sigma_z)?
    };
    let (h_tb_hat, h_sft_p_hat) = finish(op, &prior, &vals)?;
    Ok(EstimateResult { h_tb_hat, h_sft_p_hat, iterations: 1, converged: true, residual_trace: Vec::new(), clamp_count: 0 })
}

fn support_columns<O: SensingOperator + ?Sized>(op: &O, prior: &Prior) -> Result<DMatrix<C64>> {
    if prior.support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let requested = op.rows().saturating_mul(prior.support.len());
    if requested > 16 * DEFAULT_DENSE_CAP {
        return Err(Error::SizeCap { requested, cap: 16 * DEFAULT_DENSE_CAP });
    }
    let cols = prior.support.iter().map(|&j| op.column(j).map(DVector::from_vec)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// `R̄ (Āᴴ Ā R̄ + σ² I)⁻¹ Āᴴ y`, evaluated in the symmetric form
/// `D (D Āᴴ Ā D + σ² I)⁻¹ D Āᴴ y` with `D = R̄^{1/2}`.
pub fn mmse_support_form<O: SensingOperator + ?Sized>(op: &O, prior: &Prior, y: &[C64], sigma_z: f64) -> Result<Vec<C64>> {
    let a = support_columns(op, prior)?;
    let d = DVector::from_iterator(prior.var.len(), prior.var.iter().map(|v| C64::new(v.sqrt(), 0.0)));
    let mut g = a.adjoint() * &a;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            g[(i, j)] *= d[i] * d[j];
        }
        g[(i, i)] += C64::new(sigma_z * sigma_z, 0.0);
    }
    let rhs = (a.adjoint() * DVector::from_column_slice(y)).component_mul(&d);
    let chol = Cholesky::new(g).ok_or(Error::Singular)?;
    Ok(chol.solve(&rhs).component_mul(&d).data.into())
}

/// `R̄ Āᴴ (Ā R̄ Āᴴ + σ² I)⁻¹ y` — needs an observation-sized dense solve.
pub fn mmse_observation_form<O: SensingOperator + ?Sized>(op: &O, prior: &Prior, y: &[C64], sigma_z: f64) -> Result<Vec<C64>> {
    let rows = op.rows();
    if rows.saturating_mul(rows) > DEFAULT_DENSE_CAP {
        return Err(Error::SizeCap { requested: rows * rows, cap: DEFAULT_DENSE_CAP });
    }
    let a = support_columns(op, prior)?;
    let mut ar = a.clone();
    for (j, &v) in prior.var.iter().enumerate() {
        ar.column_mut(j).scale_mut(v);
    }
    let mut c = &ar * a.adjoint();
    for i in 0..rows {
        c[(i, i)] += C64::new(sigma_z * sigma_z, 0.0);
    }
    let chol = Cholesky::new(c).ok_or(Error::Singular)?;
    let w = chol.solve(&DVector::from_column_slice(y));
    Ok((ar.adjoint() * w).data.into())
}
