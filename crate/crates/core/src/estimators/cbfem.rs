//! Iterative estimator from constrained Bethe free-energy minimization.
//!
//! Each iteration costs one forward and one (support-restricted) adjoint
//! apply of the sensing operator. All state lives on the prior support.

use serde::{Deserialize, Serialize};

use super::{check_noise, finish, gaussian_product, prior_support, EstimateResult, GaussianBelief};
use crate::error::check_len;
use crate::fast_ops::SensingOperator;
use crate::scenario::StatCsi;
use crate::{Error, Result, C64};

fn d_max_iter() -> usize {
    300
}
fn d_damping() -> f64 {
    0.7
}
fn d_tol() -> f64 {
    1e-6
}
fn d_support_floor() -> f64 {
    super::SUPPORT_FLOOR
}
fn d_precision_floor() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbfemOptions {
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    /// Weight of the new value in `x ← (1-δ) x_old + δ x_new`.
    #[serde(default = "d_damping")]
    pub damping: f64,
    /// Stop when `‖m - m_old‖ / ‖m‖` falls below this.
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_support_floor")]
    pub support_floor: f64,
    /// Message precisions are kept at or above this.
    #[serde(default = "d_precision_floor")]
    pub precision_floor: f64,
}

impl Default for CbfemOptions {
    fn default() -> Self {
        CbfemOptions {
            max_iter: d_max_iter(),
            damping: d_damping(),
            tol: d_tol(),
            support_floor: d_support_floor(),
            precision_floor: d_precision_floor(),
        }
    }
}

impl CbfemOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping {} not in (0, 1]", self.damping)));
        }
        if !(self.tol >= 0.0 && self.support_floor >= 0.0 && self.precision_floor > 0.0) {
            return Err(Error::Config("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Iteration state on the active support.
///
/// `eta_bw` / `eta_bh` are the (negative) multipliers tying the belief to the
/// prior-side and likelihood-side factors; `kappa` is the Onsager-style
/// correction fed back through the operator as `psi`, and `varpi` the
/// likelihood-side message mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfemState {
    pub belief: GaussianBelief,
    pub eta_bw: Vec<f64>,
    pub eta_bh: Vec<f64>,
    pub tau_tilde: Vec<C64>,
    pub kappa: Vec<C64>,
    pub psi: Vec<C64>,
    pub varpi: Vec<C64>,
    pub iter: usize,
    pub damping: f64,
    pub clamps: usize,
}

pub fn cbfem_estimate<O: SensingOperator + ?Sized>(
    op: &O,
    csi: &StatCsi,
    y: &[C64],
    sigma_p: f64,
    sigma_z: f64,
    opts: &CbfemOptions,
) -> Result<EstimateResult> {
    cbfem_estimate_traced(op, csi, y, sigma_p, sigma_z, opts, |_, _, _| {})
}

/// As [`cbfem_estimate`], calling `observe(iter, support, mean)` after every
/// iteration.
pub fn cbfem_estimate_traced<O, F>(
    op: &O,
    csi: &StatCsi,
    y: &[C64],
    sigma_p: f64,
    sigma_z: f64,
    opts: &CbfemOptions,
    mut observe: F,
) -> Result<EstimateResult>
where
    O: SensingOperator + ?Sized,
    F: FnMut(usize, &[usize], &[C64]),
{
    opts.validate()?;
    check_noise(sigma_z)?;
    if !(sigma_p.is_finite() && sigma_p > 0.0) {
        return Err(Error::OutOfRange(format!("pilot amplitude {sigma_p} must be positive")));
    }
    check_len("observation", op.rows(), y.len())?;
    let prior = prior_support(csi, opts.support_floor)?;
    check_len("operator columns", prior.cols, op.cols())?;

    let n_obs = op.rows() as f64;
    let noise_ratio = sigma_z * sigma_z / (sigma_p * sigma_p);
    let r = &prior.var;
    let j = r.len();
    let delta = opts.damping;
    let damp = |old: f64, new: f64| (1.0 - delta) * old + delta * new;
    let zero = C64::new(0.0, 0.0);

    let mut st = CbfemState {
        belief: GaussianBelief { mean: vec![zero; j], var: r.clone() },
        eta_bw: vec![0.0; j],
        eta_bh: vec![0.0; j],
        tau_tilde: vec![zero; j],
        kappa: vec![zero; j],
        psi: Vec::new(),
        varpi: vec![zero; j],
        iter: 0,
        damping: delta,
        clamps: 0,
    };
    let mut trace = Vec::new();
    let mut converged = false;

    for it in 1..=opts.max_iter {
        st.iter = it;
        let nonfinite = || Error::NonFinite { iter: it };

        for k in 0..j {
            let new = -1.0 / st.belief.var[k] - st.eta_bh[k] / n_obs;
            st.eta_bw[k] = if it == 1 { new } else { damp(st.eta_bw[k], new) };
        }
        let inv_sum: f64 = st.eta_bw.iter().map(|e| 1.0 / e).sum();
        for k in 0..j {
            let new = n_obs / (inv_sum - noise_ratio - 1.0 / st.eta_bw[k]);
            let mut e = damp(st.eta_bh[k], new);
            if !e.is_finite() {
                return Err(nonfinite());
            }
            if e > -opts.precision_floor {
                e = -opts.precision_floor;
                st.clamps += 1;
            }
            st.eta_bh[k] = e;
        }

        for k in 0..j {
            st.tau_tilde[k] = st.belief.mean[k] / st.belief.var[k];
            st.kappa[k] = st.tau_tilde[k] / st.eta_bw[k];
        }
        st.psi = op.apply_sparse(&prior.support, &st.kappa)?;
        let resid: Vec<C64> = y.iter().zip(&st.psi).map(|(a, b)| a + b).collect();
        let back = op.apply_adjoint_on(&resid, &prior.support)?;
        let scale = 1.0 / (n_obs * sigma_p * sigma_p);
        for k in 0..j {
            st.varpi[k] = back[k] * scale - st.kappa[k];
        }

        let prec: Vec<f64> = st.eta_bh.iter().map(|e| -e).collect();
        let GaussianBelief { mean: fresh_mean, var: fresh_var } =
            gaussian_product(r, &st.varpi, &prec).map_err(|_| nonfinite())?;
        st.belief.var = fresh_var;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for k in 0..j {
            let m_new = st.belief.mean[k] * (1.0 - delta) + fresh_mean[k] * delta;
            diff += (m_new - st.belief.mean[k]).norm_sqr();
            norm += m_new.norm_sqr();
            st.belief.mean[k] = m_new;
        }
        if !(diff.is_finite() && norm.is_finite()) {
            return Err(nonfinite());
        }
        let change = if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() };
        trace.push(change);
        observe(it, &prior.support, &st.belief.mean);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let (h_tb_hat, h_sft_p_hat) = finish(op, &prior, &st.belief.mean)?;
    Ok(EstimateResult {
        h_tb_hat,
        h_sft_p_hat,
        iterations: st.iter,
        converged,
        residual_trace: trace,
        clamp_count: st.clamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fast_ops::DenseOperator;
    use crate::scenario::SparseDiag;
    use nalgebra::DMatrix;

    #[test]
    fn scalar_fixed_point() {
        let (a, r, sz, y) = (C64::new(-0.4, 1.1), 0.7, 0.5, C64::new(1.5, 0.2));
        let op = DenseOperator::new(DMatrix::from_element(1, 1, a));
        let csi = StatCsi::from_profiles(vec![SparseDiag::from_dense(&[r])], 1).unwrap();
        let opts = CbfemOptions { tol: 1e-15, max_iter: 50, ..Default::default() };
        let e = cbfem_estimate(&op, &csi, &[y], a.norm(), sz, &opts).unwrap();
        let want = a.conj() * y * r / (a.norm_sqr() * r + sz * sz);
        assert!((e.h_tb_hat[0] - want).norm() < 1e-12 * want.norm());
        assert_eq!(e.clamp_count, 0);
    }

    #[test]
    fn zero_observation_stays_zero() {
        let op = DenseOperator::new(DMatrix::from_fn(4, 2, |i, j| C64::from_polar(1.0, (i * j) as f64)));
        let csi = StatCsi::from_profiles(vec![SparseDiag::from_dense(&[1.0, 0.5])], 2).unwrap();
        let mut all_zero = true;
        let e = cbfem_estimate_traced(&op, &csi, &[C64::new(0.0, 0.0); 4], 1.0, 0.3, &CbfemOptions::default(), |_, _, m| {
            all_zero &= m.iter().all(|z| *z == C64::new(0.0, 0.0));
        })
        .unwrap();
        assert!(all_zero);
        assert!(e.converged);
    }

    #[test]
    fn rejects_bad_options() {
        let op = DenseOperator::new(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        let csi = StatCsi::from_profiles(vec![SparseDiag::from_dense(&[1.0])], 1).unwrap();
        let y = [C64::new(1.0, 0.0)];
        let bad = CbfemOptions { damping: 0.0, ..Default::default() };
        assert!(cbfem_estimate(&op, &csi, &y, 1.0, 1.0, &bad).is_err());
        assert!(cbfem_estimate(&op, &csi, &y, 0.0, 1.0, &CbfemOptions::default()).is_err());
    }
}
