//! Chirp-z transform via Bluestein's identity.
//!
//! A plan evaluates the generalized DFT
//! `y[n] = Σ_m x[m] · W^{(n + a)(m + b)}`, `W = e^{jθ}`,
//! for `n < out_len`, `m < in_len` and real offsets `a` (output) and `b` (input),
//! using one forward and one inverse power-of-two FFT.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::check_len;
use crate::{Error, Result, C64};

#[derive(Clone)]
pub struct CztPlan {
    theta: f64,
    in_len: usize,
    out_len: usize,
    in_offset: f64,
    out_offset: f64,
    fft_len: usize,
    pre: Vec<C64>,
    post: Vec<C64>,
    /// FFT of the chirp kernel, pre-divided by the FFT length.
    kernel: Vec<C64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl fmt::Debug for CztPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CztPlan")
            .field("theta", &self.theta)
            .field("in_len", &self.in_len)
            .field("out_len", &self.out_len)
            .field("in_offset", &self.in_offset)
            .field("out_offset", &self.out_offset)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

/// Reusable buffers for repeated applies of plans sharing an FFT length.
#[derive(Debug, Default)]
pub struct CztWork {
    buf: Vec<C64>,
    scratch: Vec<C64>,
}

#[inline]
fn cis(phase: f64) -> C64 {
    let (s, c) = phase.sin_cos();
    C64::new(c, s)
}

impl CztPlan {
    /// Plan for chirp angle `theta` (W = e^{jθ}).
    pub fn new(theta: f64, in_len: usize, out_len: usize, in_offset: f64, out_offset: f64) -> Result<Self> {
        Self::with_planner(&mut FftPlanner::new(), theta, in_len, out_len, in_offset, out_offset)
    }

    /// Plan from a unit-modulus chirp base.
    pub fn from_base(w: C64, in_len: usize, out_len: usize, in_offset: f64, out_offset: f64) -> Result<Self> {
        if (w.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange(format!("chirp base {w} is not unit-modulus")));
        }
        Self::new(w.arg(), in_len, out_len, in_offset, out_offset)
    }

    pub fn with_planner(
        planner: &mut FftPlanner<f64>,
        theta: f64,
        in_len: usize,
        out_len: usize,
        in_offset: f64,
        out_offset: f64,
    ) -> Result<Self> {
        if in_len == 0 || out_len == 0 {
            return Err(Error::OutOfRange("chirp-z lengths must be positive".into()));
        }
        if !(theta.is_finite() && in_offset.is_finite() && out_offset.is_finite()) {
            return Err(Error::OutOfRange("chirp-z parameters must be finite".into()));
        }
        let fft_len = (in_len + out_len - 1).next_power_of_two();
        let (a, b) = (out_offset, in_offset);
        let pre = (0..in_len)
            .map(|m| {
                let m = m as f64;
                cis(theta * (a * m + 0.5 * m * m))
            })
            .collect();
        let post = (0..out_len)
            .map(|n| {
                let n = n as f64;
                cis(theta * (a * b + n * b + 0.5 * n * n))
            })
            .collect();

        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let mut kernel = vec![C64::new(0.0, 0.0); fft_len];
        for k in -(in_len as i64 - 1)..=(out_len as i64 - 1) {
            let kf = k as f64;
            kernel[k.rem_euclid(fft_len as i64) as usize] = cis(-0.5 * theta * kf * kf);
        }
        let mut scratch = vec![C64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(&mut kernel, &mut scratch);
        let scale = 1.0 / fft_len as f64;
        kernel.iter_mut().for_each(|z| *z *= scale);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());

        Ok(CztPlan { theta, in_len, out_len, in_offset, out_offset, fft_len, pre, post, kernel, fwd, inv, scratch_len })
    }

    /// DFT of length `n` (`W = e^{-j2π/n}`, zero offsets).
    pub fn dft(n: usize) -> Result<Self> {
        Self::new(-2.0 * PI / n as f64, n, n, 0.0, 0.0)
    }

    /// Plan for the conjugate transpose: `W → W*`, lengths and offsets swapped.
    pub fn adjoint(&self) -> Result<Self> {
        Self::new(-self.theta, self.out_len, self.in_len, self.out_offset, self.in_offset)
    }

    pub fn adjoint_with(&self, planner: &mut FftPlanner<f64>) -> Result<Self> {
        Self::with_planner(planner, -self.theta, self.out_len, self.in_len, self.out_offset, self.in_offset)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn base(&self) -> C64 {
        cis(self.theta)
    }
    pub fn in_len(&self) -> usize {
        self.in_len
    }
    pub fn out_len(&self) -> usize {
        self.out_len
    }
    pub fn in_offset(&self) -> f64 {
        self.in_offset
    }
    pub fn out_offset(&self) -> f64 {
        self.out_offset
    }
    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len("chirp-z input", self.in_len, x.len())?;
        let mut out = vec![C64::new(0.0, 0.0); self.out_len];
        self.apply_into(x, &mut out, &mut CztWork::default());
        Ok(out)
    }

    /// Unchecked hot-path apply; `x.len() == in_len`, `out.len() == out_len`.
    pub(crate) fn apply_into(&self, x: &[C64], out: &mut [C64], work: &mut CztWork) {
        debug_assert_eq!(x.len(), self.in_len);
        debug_assert_eq!(out.len(), self.out_len);
        let buf = &mut work.buf;
        buf.clear();
        buf.extend(x.iter().zip(&self.pre).map(|(a, b)| a * b));
        buf.resize(self.fft_len, C64::new(0.0, 0.0));
        if work.scratch.len() < self.scratch_len {
            work.scratch.resize(self.scratch_len, C64::new(0.0, 0.0));
        }
        let scratch = &mut work.scratch[..self.scratch_len];
        self.fwd.process_with_scratch(buf, scratch);
        buf.iter_mut().zip(&self.kernel).for_each(|(a, k)| *a *= k);
        self.inv.process_with_scratch(buf, scratch);
        for ((o, c), p) in out.iter_mut().zip(buf.iter()).zip(&self.post) {
            *o = c * p;
        }
    }
}

/// Apply a plan to `x` (length must equal the plan's input length).
pub fn czt_apply(plan: &CztPlan, x: &[C64]) -> Result<Vec<C64>> {
    plan.apply(x)
}
