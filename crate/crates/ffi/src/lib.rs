//! C ABI over the `hfsky` library.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns an [`HfskyStatus`];
//! the message of the last failure on the calling thread is available from
//! [`hfsky_last_error`]. Complex arrays are interleaved `(re, im)` pairs of
//! `double`, i.e. arrays of [`HfskyComplex`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hfsky::estimators::{cbfem_estimate, mmse_estimate, CbfemOptions};
use hfsky::fast_ops::TbOperator;
use hfsky::grid::{build_grid, FineFactors, GridParams, GridSpec};
use hfsky::pilots::{schedule_pilots, PilotPlan};
use hfsky::scenario::{SparseDiag, StatCsi};
use hfsky::{Error, C64};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfskyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidGrid = 2,
    OutOfRange = 3,
    DimensionMismatch = 4,
    InvalidPilot = 5,
    Numerical = 6,
    InvalidConfig = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfskyComplex {
    pub re: f64,
    pub im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfskyAlgorithm {
    Mmse = 0,
    Cbfem = 1,
}

/// Numeric grid inputs. `max_freq_hz <= 0` derives it from `spacing_m`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HfskyGridParams {
    pub carrier_hz: f64,
    pub max_freq_hz: f64,
    pub spacing_m: f64,
    pub antennas: usize,
    pub subcarriers: usize,
    pub cp_len: usize,
    pub subcarrier_spacing: f64,
    pub valid_subcarriers: usize,
    pub slots: usize,
    pub symbols_per_slot: usize,
    pub pilot_symbol: usize,
    pub doppler_base: usize,
    pub fine_angle: usize,
    pub fine_delay: usize,
    pub fine_doppler: usize,
    pub spatial_wideband: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HfskyGridDims {
    pub angle_bins: usize,
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub tb_len: usize,
    pub pilot_rows: usize,
    pub shift_slots: usize,
}

pub struct HfskyGrid(GridSpec);
pub struct HfskyPlan(PilotPlan);
pub struct HfskyOperator(TbOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HfskyStatus {
    match e {
        Error::InvalidGrid(_) => HfskyStatus::InvalidGrid,
        Error::OutOfRange(_) | Error::InvalidGenerator(_) => HfskyStatus::OutOfRange,
        Error::DimensionMismatch { .. } | Error::SizeCap { .. } => HfskyStatus::DimensionMismatch,
        Error::InvalidPilot(_) => HfskyStatus::InvalidPilot,
        Error::EmptySupport | Error::Singular | Error::NonFinite { .. } => HfskyStatus::Numerical,
        Error::Config(_) | Error::Parse(_) => HfskyStatus::InvalidConfig,
        Error::Io(_) => HfskyStatus::Io,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), HfskyStatus>>(f: F) -> HfskyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HfskyStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            HfskyStatus::Panic
        }
    }
}

fn lift<T>(r: hfsky::Result<T>) -> Result<T, HfskyStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null() -> HfskyStatus {
    set_error("null pointer argument".into());
    HfskyStatus::NullPointer
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], HfskyStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize) -> Result<&'a mut [T], HfskyStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, HfskyStatus> {
    p.as_ref().ok_or_else(null)
}

fn to_c64(x: &[HfskyComplex]) -> Vec<C64> {
    x.iter().map(|z| C64::new(z.re, z.im)).collect()
}

fn write_out(src: &[C64], dst: &mut [HfskyComplex]) -> Result<(), HfskyStatus> {
    if src.len() != dst.len() {
        set_error(format!("output buffer holds {} values, need {}", dst.len(), src.len()));
        return Err(HfskyStatus::DimensionMismatch);
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d = HfskyComplex { re: s.re, im: s.im };
    }
    Ok(())
}

fn boxed<T>(out: *mut *mut T, value: T) -> Result<(), HfskyStatus> {
    if out.is_null() {
        return Err(null());
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last error on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hfsky_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parameters of the built-in desk-scale grid.
#[no_mangle]
pub extern "C" fn hfsky_grid_params_desk() -> HfskyGridParams {
    let p = GridParams::desk();
    HfskyGridParams {
        carrier_hz: p.carrier_hz,
        max_freq_hz: p.max_freq_hz.unwrap_or(0.0),
        spacing_m: p.spacing_m.unwrap_or(0.0),
        antennas: p.antennas,
        subcarriers: p.subcarriers,
        cp_len: p.cp_len,
        subcarrier_spacing: p.subcarrier_spacing,
        valid_subcarriers: p.valid_subcarriers,
        slots: p.slots,
        symbols_per_slot: p.symbols_per_slot,
        pilot_symbol: p.pilot_symbol,
        doppler_base: p.doppler_base,
        fine_angle: p.fine.angle,
        fine_delay: p.fine.delay,
        fine_doppler: p.fine.doppler,
        spatial_wideband: p.spatial_wideband,
    }
}

/// # Safety
/// `params` must point to a valid struct and `out` to writable storage for
/// one pointer. Release the result with [`hfsky_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn hfsky_grid_new(params: *const HfskyGridParams, out: *mut *mut HfskyGrid) -> HfskyStatus {
    guard(|| {
        let p = *as_ref(params)?;
        let gp = GridParams {
            carrier_hz: p.carrier_hz,
            max_freq_hz: (p.max_freq_hz > 0.0).then_some(p.max_freq_hz),
            spacing_m: (p.spacing_m > 0.0).then_some(p.spacing_m),
            antennas: p.antennas,
            subcarriers: p.subcarriers,
            cp_len: p.cp_len,
            subcarrier_spacing: p.subcarrier_spacing,
            valid_subcarriers: p.valid_subcarriers,
            slots: p.slots,
            symbols_per_slot: p.symbols_per_slot,
            pilot_symbol: p.pilot_symbol,
            doppler_base: p.doppler_base,
            fine: FineFactors { angle: p.fine_angle, delay: p.fine_delay, doppler: p.fine_doppler },
            spatial_wideband: p.spatial_wideband,
            ..GridParams::desk()
        };
        boxed(out, HfskyGrid(lift(build_grid(&gp))?))
    })
}

/// # Safety
/// `grid` must be null or a handle from [`hfsky_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hfsky_grid_free(grid: *mut HfskyGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfsky_grid_dims(grid: *const HfskyGrid, out: *mut HfskyGridDims) -> HfskyStatus {
    guard(|| {
        let g = &as_ref(grid)?.0;
        if out.is_null() {
            return Err(null());
        }
        *out = HfskyGridDims {
            angle_bins: g.angle_bins,
            delay_bins: g.delay_bins,
            doppler_bins: g.doppler_bins,
            tb_len: g.tb_len(),
            pilot_rows: g.pilot_rows(),
            shift_slots: g.shift_slots(),
        };
        Ok(())
    })
}

/// Pilot plan from a per-terminal group index (`group_of[u]` in
/// `0..num_groups`, every group nonempty).
///
/// # Safety
/// `grid` must be a live handle, `group_of` must hold `num_uts` values and
/// `out` must be writable. Release with [`hfsky_plan_free`].
#[no_mangle]
pub unsafe extern "C" fn hfsky_plan_new(
    grid: *const HfskyGrid,
    group_of: *const usize,
    num_uts: usize,
    sigma_p: f64,
    zc_root: usize,
    out: *mut *mut HfskyPlan,
) -> HfskyStatus {
    guard(|| {
        let g = &as_ref(grid)?.0;
        let labels = slice(group_of, num_uts)?;
        let groups = labels.iter().max().map_or(0, |m| m + 1);
        let mut partition = vec![Vec::new(); groups];
        for (u, &s) in labels.iter().enumerate() {
            partition[s].push(u);
        }
        if partition.iter().any(Vec::is_empty) {
            set_error("group labels must be contiguous from 0".into());
            return Err(HfskyStatus::InvalidPilot);
        }
        boxed(out, HfskyPlan(lift(schedule_pilots(g, &partition, sigma_p, zc_root))?))
    })
}

/// # Safety
/// `plan` must be null or a live handle from [`hfsky_plan_new`].
#[no_mangle]
pub unsafe extern "C" fn hfsky_plan_free(plan: *mut HfskyPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Sensing operator for a grid and pilot plan. The handle is independent of
/// its inputs, which may be freed afterwards.
///
/// # Safety
/// `grid` and `plan` must be live handles and `out` writable. Release with
/// [`hfsky_operator_free`].
#[no_mangle]
pub unsafe extern "C" fn hfsky_operator_new(
    grid: *const HfskyGrid,
    plan: *const HfskyPlan,
    out: *mut *mut HfskyOperator,
) -> HfskyStatus {
    guard(|| {
        let g = &as_ref(grid)?.0;
        let p = &as_ref(plan)?.0;
        boxed(out, HfskyOperator(lift(TbOperator::sensing(g, p))?))
    })
}

/// # Safety
/// `op` must be null or a live handle from [`hfsky_operator_new`].
#[no_mangle]
pub unsafe extern "C" fn hfsky_operator_free(op: *mut HfskyOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Row and column counts; either output may be null.
///
/// # Safety
/// `op` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfsky_operator_shape(op: *const HfskyOperator, rows: *mut usize, cols: *mut usize) -> HfskyStatus {
    guard(|| {
        let o = &as_ref(op)?.0;
        if !rows.is_null() {
            *rows = o.rows();
        }
        if !cols.is_null() {
            *cols = o.cols();
        }
        Ok(())
    })
}

/// `y = A x` with `x` of length cols and `y` of length rows.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn hfsky_operator_forward(
    op: *const HfskyOperator,
    x: *const HfskyComplex,
    x_len: usize,
    y: *mut HfskyComplex,
    y_len: usize,
) -> HfskyStatus {
    guard(|| {
        let o = &as_ref(op)?.0;
        let r = lift(o.forward_apply(&to_c64(slice(x, x_len)?)))?;
        write_out(&r, slice_mut(y, y_len)?)
    })
}

/// `x = Aᴴ y` with `y` of length rows and `x` of length cols.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn hfsky_operator_adjoint(
    op: *const HfskyOperator,
    y: *const HfskyComplex,
    y_len: usize,
    x: *mut HfskyComplex,
    x_len: usize,
) -> HfskyStatus {
    guard(|| {
        let o = &as_ref(op)?.0;
        let r = lift(o.adjoint_apply(&to_c64(slice(y, y_len)?)))?;
        write_out(&r, slice_mut(x, x_len)?)
    })
}

/// Estimate beam-domain coefficients (length cols) from observation `y`.
/// `variances` holds the prior variance of every column (length cols,
/// terminal-major). `iterations` may be null.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn hfsky_estimate(
    op: *const HfskyOperator,
    algorithm: HfskyAlgorithm,
    variances: *const f64,
    var_len: usize,
    y: *const HfskyComplex,
    y_len: usize,
    sigma_z: f64,
    h_out: *mut HfskyComplex,
    h_len: usize,
    iterations: *mut usize,
) -> HfskyStatus {
    guard(|| {
        let o = &as_ref(op)?.0;
        let var = slice(variances, var_len)?;
        let tb = o.grid().tb_len();
        if var_len != o.cols() {
            set_error(format!("{var_len} variances for {} columns", o.cols()));
            return Err(HfskyStatus::DimensionMismatch);
        }
        let csi = lift(StatCsi::from_profiles(var.chunks(tb).map(SparseDiag::from_dense).collect(), o.grid().angle_bins))?;
        let y = to_c64(slice(y, y_len)?);
        let est = match algorithm {
            HfskyAlgorithm::Mmse => lift(mmse_estimate(o, &csi, &y, sigma_z))?,
            HfskyAlgorithm::Cbfem => {
                let sigma_p = o.pilot_plan().map_or(1.0, |p| p.sigma_p);
                lift(cbfem_estimate(o, &csi, &y, sigma_p, sigma_z, &CbfemOptions::default()))?
            }
        };
        write_out(&est.h_tb_hat, slice_mut(h_out, h_len)?)?;
        if !iterations.is_null() {
            *iterations = est.iterations;
        }
        Ok(())
    })
}
