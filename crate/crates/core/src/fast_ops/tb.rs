use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::czt::{CztPlan, CztWork};
use super::SensingOperator;
use crate::error::check_len;
use crate::grid::GridSpec;
use crate::pilots::{check_shift, PilotPlan};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Which rows and pilots the operator carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// Channel dictionary restricted to the pilot symbols.
    PilotRows,
    /// Channel dictionary over every symbol of the frame.
    FullFrame,
    /// Pilot-segment sensing matrix of all terminals (pilots applied, summed).
    Sensing,
}

/// Delay-axis transform: `out[i] = Σ_j line[j] · e^{-j2π (i + k0) delay_base · j / (delay_bins · valid)}`.
#[derive(Clone)]
enum DelayStage {
    /// Exact when the padded length equals `fine.delay * valid_subcarriers`:
    /// a plain FFT with the output index rotated by `k0`.
    Fft { fwd: Arc<dyn Fft<f64>>, inv: Arc<dyn Fft<f64>> },
    Czt { fwd: CztPlan, adj: CztPlan },
}

#[derive(Clone)]
pub struct TbOperator {
    grid: GridSpec,
    mode: OperatorMode,
    plan: Option<PilotPlan>,
    symbols: Vec<usize>,
    padded: usize,
    delay: DelayStage,
    spatial: Vec<(CztPlan, CztPlan)>,
    temporal: (CztPlan, CztPlan),
    /// Per-subcarrier pilot gain (`σ_p · base_seq`) in sensing mode, else ones.
    row_gain: Vec<C64>,
    shifts: Vec<usize>,
}

impl fmt::Debug for TbOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TbOperator")
            .field("mode", &self.mode)
            .field("rows", &self.rows())
            .field("cols", &self.cols())
            .field("padded_delay", &self.padded)
            .field("fft_delay", &matches!(self.delay, DelayStage::Fft { .. }))
            .field("spatial_plans", &self.spatial.len())
            .finish()
    }
}

/// Scratch shared by the stages of one apply.
#[derive(Default)]
struct Work {
    czt: CztWork,
    fft_scratch: Vec<C64>,
}

impl TbOperator {
    /// Channel dictionary on the pilot symbols.
    pub fn pilot_rows(grid: &GridSpec) -> Result<Self> {
        Self::build(grid, OperatorMode::PilotRows, None)
    }

    /// Channel dictionary over the full frame (used for prediction).
    pub fn full_frame(grid: &GridSpec) -> Result<Self> {
        Self::build(grid, OperatorMode::FullFrame, None)
    }

    /// Sensing operator of all terminals under `plan`.
    pub fn sensing(grid: &GridSpec, plan: &PilotPlan) -> Result<Self> {
        Self::build(grid, OperatorMode::Sensing, Some(plan.clone()))
    }

    fn build(grid: &GridSpec, mode: OperatorMode, plan: Option<PilotPlan>) -> Result<Self> {
        let g = grid;
        let mut planner = FftPlanner::new();
        let padded = g.padded_delay_len();
        if padded == 0 {
            return Err(Error::InvalidGrid("fewer valid subcarriers than the delay base".into()));
        }

        let (row_gain, shifts) = match (&plan, mode) {
            (Some(p), OperatorMode::Sensing) => {
                check_len("base sequence", g.valid_subcarriers, p.base_seq.len())?;
                if p.phi.is_empty() {
                    return Err(Error::InvalidPilot("pilot plan has no terminals".into()));
                }
                for &phi in &p.phi {
                    check_shift(g, phi)?;
                }
                (p.base_seq.iter().map(|&b| b * p.sigma_p).collect(), p.phi.clone())
            }
            (None, OperatorMode::Sensing) => {
                return Err(Error::InvalidPilot("sensing mode requires a pilot plan".into()))
            }
            _ => (vec![C64::new(1.0, 0.0); g.valid_subcarriers], vec![0]),
        };

        let delay = if g.valid_subcarriers % g.delay_base == 0 {
            DelayStage::Fft { fwd: planner.plan_fft_forward(padded), inv: planner.plan_fft_inverse(padded) }
        } else {
            let theta = -2.0 * PI * g.delay_base as f64 / (g.delay_bins * g.valid_subcarriers) as f64;
            let fwd = CztPlan::with_planner(&mut planner, theta, padded, g.valid_subcarriers, 0.0, g.first_valid as f64)?;
            let adj = fwd.adjoint_with(&mut planner)?;
            DelayStage::Czt { fwd, adj }
        };

        // Angle axis: phase -2π f Δτ m (2a/N_an - 1) = θ · m · (a - N_an/2).
        let spatial_plan = |planner: &mut FftPlanner<f64>, freq: f64| -> Result<(CztPlan, CztPlan)> {
            let theta = -4.0 * PI * freq * g.element_delay / g.angle_bins as f64;
            let fwd = CztPlan::with_planner(planner, theta, g.angle_bins, g.antennas, -(g.angle_bins as f64) / 2.0, 0.0)?;
            let adj = fwd.adjoint_with(planner)?;
            Ok((fwd, adj))
        };
        let spatial = if g.spatial_wideband {
            (0..g.valid_subcarriers).map(|i| spatial_plan(&mut planner, g.array_freq(i))).collect::<Result<Vec<_>>>()?
        } else {
            vec![spatial_plan(&mut planner, g.carrier_hz)?]
        };

        // Doppler axis: phase 2π N_d n (d - N_do/2) / (N_do N).
        let base = 2.0 * PI * g.doppler_base as f64 / (g.doppler_bins * g.total_symbols) as f64;
        let (symbols, theta, out_offset) = match mode {
            OperatorMode::FullFrame => ((0..g.total_symbols).collect(), base, 0.0),
            _ => (
                g.pilot_symbols(),
                base * g.symbols_per_slot as f64,
                g.pilot_symbol as f64 / g.symbols_per_slot as f64,
            ),
        };
        let t_fwd = CztPlan::with_planner(
            &mut planner,
            theta,
            g.doppler_bins,
            symbols.len(),
            -(g.doppler_bins as f64) / 2.0,
            out_offset,
        )?;
        let t_adj = t_fwd.adjoint_with(&mut planner)?;

        Ok(TbOperator { grid: g.clone(), mode, plan, symbols, padded, delay, spatial, temporal: (t_fwd, t_adj), row_gain, shifts })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn mode(&self) -> OperatorMode {
        self.mode
    }
    pub fn pilot_plan(&self) -> Option<&PilotPlan> {
        self.plan.as_ref()
    }
    /// Frame symbol indices of the output rows.
    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }
    pub fn num_blocks(&self) -> usize {
        self.shifts.len()
    }
    pub fn rows(&self) -> usize {
        self.grid.symbol_rows() * self.symbols.len()
    }
    pub fn cols(&self) -> usize {
        self.grid.tb_len() * self.shifts.len()
    }

    fn spatial_fwd(&self, i: usize) -> &CztPlan {
        &self.spatial[if self.spatial.len() == 1 { 0 } else { i }].0
    }
    fn spatial_adj(&self, i: usize) -> &CztPlan {
        &self.spatial[if self.spatial.len() == 1 { 0 } else { i }].1
    }

    pub fn forward_apply(&self, kappa: &[C64]) -> Result<Vec<C64>> {
        check_len("beam-domain input", self.cols(), kappa.len())?;
        Ok(self.run_forward(kappa, &self.shifts, true))
    }

    pub fn adjoint_apply(&self, r: &[C64]) -> Result<Vec<C64>> {
        check_len("observation input", self.rows(), r.len())?;
        Ok(self.run_adjoint(r, None))
    }

    /// Per-terminal channel over this operator's symbols (pilot gains and
    /// shifts removed).
    pub fn channel_apply(&self, x: &[C64]) -> Result<Vec<Vec<C64>>> {
        check_len("beam-domain input", self.cols(), x.len())?;
        let tb = self.grid.tb_len();
        Ok(x.chunks(tb).map(|blk| self.run_forward(blk, &[0], false)).collect())
    }

    fn run_forward(&self, x: &[C64], shifts: &[usize], with_gain: bool) -> Vec<C64> {
        let g = &self.grid;
        let (na, nde, ndo, nv, m) = (g.angle_bins, g.delay_bins, g.doppler_bins, g.valid_subcarriers, g.antennas);
        let tb = g.tb_len();
        let nbar = self.padded;
        let mut w = Work::default();

        // delay: t[d][i][a]
        let mut t = vec![ZERO; ndo * nv * na];
        let mut live = vec![false; ndo];
        let mut line = vec![ZERO; nbar];
        let mut dout = vec![ZERO; nv];
        for d in 0..ndo {
            for a in 0..na {
                line.fill(ZERO);
                let mut nz = false;
                for (u, &phi) in shifts.iter().enumerate() {
                    let base = u * tb + d * na * nde + a;
                    for de in 0..nde {
                        let v = x[base + de * na];
                        if v != ZERO {
                            line[phi + de] += v;
                            nz = true;
                        }
                    }
                }
                if !nz {
                    continue;
                }
                live[d] = true;
                self.delay_forward(&mut line, &mut dout, &mut w);
                for (i, &v) in dout.iter().enumerate() {
                    t[(d * nv + i) * na + a] = v;
                }
            }
        }

        // angle: s[d][i][m]
        let mut s = vec![ZERO; ndo * nv * m];
        for d in (0..ndo).filter(|&d| live[d]) {
            for i in 0..nv {
                let off = d * nv + i;
                self.spatial_fwd(i).apply_into(&t[off * na..][..na], &mut s[off * m..][..m], &mut w.czt);
            }
        }

        // Doppler: out[r][i][m]
        let rows = nv * m;
        let nt = self.symbols.len();
        let mut out = vec![ZERO; nt * rows];
        if !live.iter().any(|&l| l) {
            return out;
        }
        let mut col = vec![ZERO; ndo];
        let mut res = vec![ZERO; nt];
        for q in 0..rows {
            for d in 0..ndo {
                col[d] = s[d * rows + q];
            }
            self.temporal.0.apply_into(&col, &mut res, &mut w.czt);
            let gain = if with_gain { self.row_gain[q / m] } else { C64::new(1.0, 0.0) };
            for (r, v) in res.iter().enumerate() {
                out[r * rows + q] = v * gain;
            }
        }
        out
    }

    /// Adjoint; with `need = Some(lines)` only the flagged (Doppler, angle)
    /// lines of the output are computed (others left zero).
    fn run_adjoint(&self, y: &[C64], need: Option<&[bool]>) -> Vec<C64> {
        let g = &self.grid;
        let (na, nde, ndo, nv, m) = (g.angle_bins, g.delay_bins, g.doppler_bins, g.valid_subcarriers, g.antennas);
        let tb = g.tb_len();
        let nbar = self.padded;
        let rows = nv * m;
        let nt = self.symbols.len();
        let mut w = Work::default();
        let need_d: Vec<bool> = match need {
            Some(lines) => (0..ndo).map(|d| lines[d * na..][..na].iter().any(|&b| b)).collect(),
            None => vec![true; ndo],
        };

        let mut s = vec![ZERO; ndo * rows];
        let mut col = vec![ZERO; nt];
        let mut res = vec![ZERO; ndo];
        for q in 0..rows {
            let gain = self.row_gain[q / m].conj();
            for r in 0..nt {
                col[r] = y[r * rows + q] * gain;
            }
            self.temporal.1.apply_into(&col, &mut res, &mut w.czt);
            for d in 0..ndo {
                s[d * rows + q] = res[d];
            }
        }

        let mut t = vec![ZERO; ndo * nv * na];
        for d in (0..ndo).filter(|&d| need_d[d]) {
            for i in 0..nv {
                let off = d * nv + i;
                self.spatial_adj(i).apply_into(&s[off * m..][..m], &mut t[off * na..][..na], &mut w.czt);
            }
        }

        let mut out = vec![ZERO; tb * self.shifts.len()];
        let mut line = vec![ZERO; nbar];
        let mut din = vec![ZERO; nv];
        for d in 0..ndo {
            for a in 0..na {
                if let Some(lines) = need {
                    if !lines[d * na + a] {
                        continue;
                    }
                }
                for (i, v) in din.iter_mut().enumerate() {
                    *v = t[(d * nv + i) * na + a];
                }
                self.delay_adjoint(&din, &mut line, &mut w);
                for (u, &phi) in self.shifts.iter().enumerate() {
                    let base = u * tb + d * na * nde + a;
                    for de in 0..nde {
                        out[base + de * na] = line[phi + de];
                    }
                }
            }
        }
        out
    }

    /// `line` (length padded) → `out` (length valid). `line` is clobbered.
    fn delay_forward(&self, line: &mut [C64], out: &mut [C64], w: &mut Work) {
        match &self.delay {
            DelayStage::Fft { fwd, .. } => {
                w.fft_scratch.resize(fwd.get_inplace_scratch_len(), ZERO);
                fwd.process_with_scratch(line, &mut w.fft_scratch);
                let k0 = self.grid.first_valid;
                let n = line.len();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = line[(i + k0) % n];
                }
            }
            DelayStage::Czt { fwd, .. } => fwd.apply_into(line, out, &mut w.czt),
        }
    }

    /// `din` (length valid) → `line` (length padded).
    fn delay_adjoint(&self, din: &[C64], line: &mut [C64], w: &mut Work) {
        match &self.delay {
            DelayStage::Fft { inv, .. } => {
                line.fill(ZERO);
                let k0 = self.grid.first_valid;
                let n = line.len();
                for (i, &v) in din.iter().enumerate() {
                    line[(i + k0) % n] += v;
                }
                w.fft_scratch.resize(inv.get_inplace_scratch_len(), ZERO);
                inv.process_with_scratch(line, &mut w.fft_scratch);
            }
            DelayStage::Czt { adj, .. } => adj.apply_into(din, line, &mut w.czt),
        }
    }

    /// Column `j` evaluated from the steering-vector definitions (no fast
    /// transforms involved).
    pub fn dense_column(&self, j: usize) -> Result<Vec<C64>> {
        if j >= self.cols() {
            return Err(Error::OutOfRange(format!("column {j} of {}", self.cols())));
        }
        let g = &self.grid;
        let tb = g.tb_len();
        let (u, idx) = (j / tb, j % tb);
        let b = g.unflat(idx);
        let mut col =
            g.triple_steering_rows(g.angle_point(b.angle), g.delay_point(b.delay), g.doppler_point(b.doppler), &self.symbols);
        if let (OperatorMode::Sensing, Some(plan)) = (self.mode, &self.plan) {
            let pilot = crate::pilots::make_pilot(plan, g, u)?;
            let sr = g.symbol_rows();
            for (r, v) in col.iter_mut().enumerate() {
                *v *= pilot[(r % sr) / g.antennas];
            }
        }
        Ok(col)
    }
}

impl SensingOperator for TbOperator {
    fn rows(&self) -> usize {
        TbOperator::rows(self)
    }
    fn cols(&self) -> usize {
        TbOperator::cols(self)
    }
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.forward_apply(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.adjoint_apply(y)
    }
    fn apply_adjoint_on(&self, y: &[C64], support: &[usize]) -> Result<Vec<C64>> {
        check_len("observation input", self.rows(), y.len())?;
        let g = &self.grid;
        let (na, tb) = (g.angle_bins, g.tb_len());
        let plane = na * g.delay_bins;
        let mut need = vec![false; g.doppler_bins * na];
        for &j in support {
            if j >= self.cols() {
                return Err(Error::OutOfRange(format!("support index {j} of {}", self.cols())));
            }
            let idx = j % tb;
            need[(idx / plane) * na + idx % na] = true;
        }
        let full = self.run_adjoint(y, Some(&need));
        Ok(support.iter().map(|&j| full[j]).collect())
    }
    fn column(&self, j: usize) -> Result<Vec<C64>> {
        self.dense_column(j)
    }
    fn channel_rows(&self, x: &[C64]) -> Option<Result<Vec<Vec<C64>>>> {
        Some(self.channel_apply(x))
    }
}
