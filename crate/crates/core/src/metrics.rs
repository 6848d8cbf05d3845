//! NMSE (Monte Carlo and closed form) and pilot cross-interference diagnostics.

use std::f64::consts::{LN_10, PI};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::check_len;
use crate::estimators::{prior_support, Prior, SUPPORT_FLOOR};
use crate::fast_ops::{OperatorMode, TbOperator, DEFAULT_DENSE_CAP};
use crate::grid::Bin;
use crate::scenario::StatCsi;
use crate::{Error, Result, C64};

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmseMode {
    /// Every pilot row of the frame.
    All,
    /// Rows of the last (current) slot only.
    Current,
}

/// Per-trial NMSE, normalized per terminal by its large-scale fading.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmseReport {
    pub nmse_all: f64,
    pub nmse_current: f64,
    pub per_ut_all: Vec<f64>,
    pub per_ut_current: Vec<f64>,
}

impl NmseReport {
    pub fn all_db(&self) -> f64 {
        to_db(self.nmse_all)
    }
    pub fn current_db(&self) -> f64 {
        to_db(self.nmse_current)
    }
}

fn per_ut(truth: &[C64], est: &[C64], fading: f64) -> f64 {
    let e: f64 = truth.iter().zip(est).map(|(a, b)| (a - b).norm_sqr()).sum();
    e / (truth.len() as f64 * fading)
}

/// `(1/U) Σ_u ‖h_u − ĥ_u‖² / (rows · ϑ_u)` over the selected rows;
/// `rows_per_slot` sizes the current-slot tail of each vector.
pub fn empirical_nmse(truth: &[Vec<C64>], estimate: &[Vec<C64>], fading: &[f64], rows_per_slot: usize) -> Result<NmseReport> {
    check_len("estimate terminals", truth.len(), estimate.len())?;
    check_len("fading terminals", truth.len(), fading.len())?;
    if truth.is_empty() {
        return Err(Error::DimensionMismatch { what: "terminals", expected: 1, got: 0 });
    }
    let mut all = Vec::with_capacity(truth.len());
    let mut cur = Vec::with_capacity(truth.len());
    for ((t, e), &f) in truth.iter().zip(estimate).zip(fading) {
        check_len("estimate rows", t.len(), e.len())?;
        if rows_per_slot == 0 || t.len() % rows_per_slot != 0 || t.is_empty() {
            return Err(Error::DimensionMismatch { what: "slot rows", expected: rows_per_slot, got: t.len() });
        }
        if !(f > 0.0) {
            return Err(Error::OutOfRange(format!("fading {f} must be positive")));
        }
        all.push(per_ut(t, e, f));
        let tail = t.len() - rows_per_slot;
        cur.push(per_ut(&t[tail..], &e[tail..], f));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(NmseReport { nmse_all: mean(&all), nmse_current: mean(&cur), per_ut_all: all, per_ut_current: cur })
}

pub fn nmse_value(report: &NmseReport, mode: NmseMode) -> f64 {
    match mode {
        NmseMode::All => report.nmse_all,
        NmseMode::Current => report.nmse_current,
    }
}

/// Running mean / standard error of per-trial values, summed in insertion
/// order so results are reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeanAccumulator {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }
    pub fn count(&self) -> usize {
        self.n
    }
    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }
    /// Standard error of the mean (0 for fewer than two samples).
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
    /// Standard error of `10 log10(mean)` by the delta method.
    pub fn std_err_db(&self) -> f64 {
        10.0 / LN_10 * self.std_err() / self.mean()
    }
}

fn sensing_columns(op: &TbOperator, prior: &Prior) -> Result<DMatrix<C64>> {
    let cols = prior.support.iter().map(|&j| op.dense_column(j).map(DVector::from_vec)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

fn require_sensing(op: &TbOperator) -> Result<()> {
    if op.mode() != OperatorMode::Sensing {
        return Err(Error::Config("diagnostic needs a sensing operator".into()));
    }
    Ok(())
}

/// Closed-form MMSE NMSE of the pilot-segment channel,
/// `(1/U) Σ_u tr{R_u − R_u X_uᴴ C⁻¹ X_u R_u} / (rows · ϑ_u)` with
/// `R_u` the pilot-row channel covariance and `C = Σ X_u R_u X_uᴴ + σ² I`.
/// Dense; oracle-scale only.
pub fn analytic_nmse(op: &TbOperator, csi: &StatCsi, sigma_z: f64) -> Result<f64> {
    require_sensing(op)?;
    let rows = op.rows();
    if rows.saturating_mul(rows) > DEFAULT_DENSE_CAP {
        return Err(Error::SizeCap { requested: rows * rows, cap: DEFAULT_DENSE_CAP });
    }
    let prior = prior_support(csi, SUPPORT_FLOOR)?;
    check_len("operator columns", prior.cols, op.cols())?;
    let a = sensing_columns(op, &prior)?;
    let mut ar = a.clone();
    for (j, &v) in prior.var.iter().enumerate() {
        ar.column_mut(j).scale_mut(v);
    }
    let mut c = &ar * a.adjoint();
    for i in 0..rows {
        c[(i, i)] += C64::new(sigma_z * sigma_z, 0.0);
    }
    let chol = Cholesky::new(c).ok_or(Error::Singular)?;
    let channel = TbOperator::pilot_rows(op.grid())?;
    let tb = op.grid().tb_len();

    let mut total = 0.0;
    for u in 0..csi.num_uts() {
        let idx: Vec<usize> = (0..prior.support.len()).filter(|&k| prior.support[k] / tb == u).collect();
        let fading = csi.fading[u];
        if idx.is_empty() {
            total += 1.0;
            continue;
        }
        // B: channel columns; Z = L⁻¹ Ā_u R_u
        let b = DMatrix::from_columns(
            &idx.iter().map(|&k| channel.dense_column(prior.support[k] % tb).map(DVector::from_vec)).collect::<Result<Vec<_>>>()?,
        );
        let aru = DMatrix::from_columns(&idx.iter().map(|&k| ar.column(k).into_owned()).collect::<Vec<_>>());
        let z = chol.l().solve_lower_triangular(&aru).ok_or(Error::Singular)?;
        let m = z.adjoint() * z;
        let gb = b.adjoint() * &b;
        let explained: C64 = (0..idx.len()).flat_map(|p| (0..idx.len()).map(move |q| (p, q))).map(|(p, q)| m[(p, q)] * gb[(q, p)]).sum();
        let trace_r: f64 = idx.iter().enumerate().map(|(p, &k)| prior.var[k] * gb[(p, p)].re).sum();
        total += (trace_r - explained.re) / (rows as f64 * fading);
    }
    Ok(total / csi.num_uts() as f64)
}

/// Interference-free NMSE floor: every terminal estimated as if alone,
/// `tr{R − R (R + σ²/σ_p² I)⁻¹ R} / (rows · ϑ)` averaged over terminals.
pub fn interference_free_nmse(op: &TbOperator, csi: &StatCsi, sigma_z: f64) -> Result<f64> {
    require_sensing(op)?;
    let sigma_p = op.pilot_plan().map(|p| p.sigma_p).ok_or_else(|| Error::Config("missing pilot plan".into()))?;
    let c = sigma_z * sigma_z / (sigma_p * sigma_p);
    let channel = TbOperator::pilot_rows(op.grid())?;
    let rows = channel.rows() as f64;
    let mut total = 0.0;
    for (u, d) in csi.tb.iter().enumerate() {
        let ent = d.entries();
        if ent.is_empty() {
            total += 1.0;
            continue;
        }
        let b = DMatrix::from_columns(&ent.iter().map(|&(i, _)| channel.dense_column(i).map(DVector::from_vec)).collect::<Result<Vec<_>>>()?);
        let s = DVector::from_iterator(ent.len(), ent.iter().map(|&(_, v)| C64::new(v.sqrt(), 0.0)));
        // nonzero spectrum of R equals that of K = S Bᴴ B S; Σ cλ/(λ+c) = c·(n − c·tr{(K + cI)⁻¹})
        let mut k = b.adjoint() * &b;
        for p in 0..ent.len() {
            for q in 0..ent.len() {
                k[(p, q)] *= s[p] * s[q];
            }
        }
        if c == 0.0 {
            continue;
        }
        for p in 0..ent.len() {
            k[(p, p)] += C64::new(c, 0.0);
        }
        let inv = Cholesky::new(k).ok_or(Error::Singular)?.inverse();
        let tr_inv: f64 = (0..ent.len()).map(|p| inv[(p, p)].re).sum();
        total += c * (ent.len() as f64 - c * tr_inv) / (rows * csi.fading[u]);
    }
    Ok(total / csi.num_uts() as f64)
}

/// Frobenius norm of the normalized cross term
/// `(1/rows) R_u A_uᴴ A_u' R_u'` between two terminals' beam-domain supports.
pub fn cross_interference_norm(op: &TbOperator, csi: &StatCsi, u: usize, v: usize) -> Result<f64> {
    require_sensing(op)?;
    let tb = op.grid().tb_len();
    for &w in &[u, v] {
        if w >= csi.num_uts() {
            return Err(Error::OutOfRange(format!("terminal {w} of {}", csi.num_uts())));
        }
    }
    let ent_u = csi.tb[u].entries();
    let ent_v = csi.tb[v].entries();
    let requested = op.rows().saturating_mul(ent_u.len() + ent_v.len());
    if requested > DEFAULT_DENSE_CAP {
        return Err(Error::SizeCap { requested, cap: DEFAULT_DENSE_CAP });
    }
    let cols = |w: usize, ent: &[(usize, f64)]| -> Result<Vec<Vec<C64>>> {
        ent.iter().map(|&(i, _)| op.dense_column(w * tb + i)).collect()
    };
    let (cu, cv) = (cols(u, ent_u)?, cols(v, ent_v)?);
    let rows = op.rows() as f64;
    let mut fro = 0.0;
    for (a, &(_, ra)) in cu.iter().zip(ent_u) {
        for (b, &(_, rb)) in cv.iter().zip(ent_v) {
            let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            fro += (ip * ra * rb / rows).norm_sqr();
        }
    }
    Ok(fro.sqrt())
}

/// Closed-form factors of one normalized cross-term entry
/// `(1/rows) a_{u,b}ᴴ a_{u',b'}` between sensing columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossFactors {
    /// Average over pilot symbols of the Doppler-difference phasor.
    pub temporal: C64,
    /// Average over subcarriers of the delay-plus-shift phasor.
    pub frequency: C64,
    /// Average over antennas of the angle-difference phasor at the carrier.
    pub spatial: C64,
    /// The entry itself (`σ_p² · temporal · ⟨frequency × spatial⟩_k`).
    pub entry: C64,
}

pub fn cross_factors(op: &TbOperator, u: usize, bu: Bin, v: usize, bv: Bin) -> Result<CrossFactors> {
    require_sensing(op)?;
    let g = op.grid();
    let plan = op.pilot_plan().ok_or_else(|| Error::Config("missing pilot plan".into()))?;
    let (pu, pv) = (
        *plan.phi.get(u).ok_or_else(|| Error::OutOfRange(format!("terminal {u}")))?,
        *plan.phi.get(v).ok_or_else(|| Error::OutOfRange(format!("terminal {v}")))?,
    );
    let d_do = bv.doppler as f64 - bu.doppler as f64;
    let d_de = bv.delay as f64 - bu.delay as f64 + pv as f64 - pu as f64;
    let d_an = bv.angle as f64 - bu.angle as f64;

    let mean = |it: &mut dyn Iterator<Item = C64>, n: usize| it.sum::<C64>() / n as f64;
    let temporal = mean(
        &mut g.pilot_symbols().into_iter().map(|n| {
            C64::from_polar(
                1.0,
                2.0 * PI * n as f64 * g.doppler_base as f64 * d_do / (g.doppler_bins * g.total_symbols) as f64,
            )
        }),
        g.slots,
    );
    let freq_k = |i: usize| {
        C64::from_polar(
            1.0,
            -2.0 * PI * g.subcarrier(i) as f64 * g.delay_base as f64 * d_de / (g.delay_bins * g.valid_subcarriers) as f64,
        )
    };
    let spatial_at = |f: f64| {
        (0..g.antennas)
            .map(|m| C64::from_polar(1.0, -2.0 * PI * f * m as f64 * g.element_delay * 2.0 * d_an / g.angle_bins as f64))
            .sum::<C64>()
            / g.antennas as f64
    };
    let frequency = mean(&mut (0..g.valid_subcarriers).map(freq_k), g.valid_subcarriers);
    let spatial = spatial_at(g.carrier_hz);
    let joint = mean(&mut (0..g.valid_subcarriers).map(|i| freq_k(i) * spatial_at(g.array_freq(i))), g.valid_subcarriers);
    let entry = temporal * joint * plan.sigma_p * plan.sigma_p;
    Ok(CrossFactors { temporal, frequency, spatial, entry })
}
