use std::ffi::CStr;
use std::ptr;

use hfsky_ffi::*;

fn small_params() -> HfskyGridParams {
    HfskyGridParams {
        antennas: 3,
        subcarriers: 16,
        cp_len: 4,
        valid_subcarriers: 8,
        slots: 2,
        symbols_per_slot: 2,
        pilot_symbol: 1,
        doppler_base: 2,
        fine_angle: 2,
        fine_delay: 2,
        fine_doppler: 2,
        ..hfsky_grid_params_desk()
    }
}

struct Handles {
    grid: *mut HfskyGrid,
    plan: *mut HfskyPlan,
    op: *mut HfskyOperator,
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            hfsky_operator_free(self.op);
            hfsky_plan_free(self.plan);
            hfsky_grid_free(self.grid);
        }
    }
}

fn setup() -> Handles {
    let mut h = Handles { grid: ptr::null_mut(), plan: ptr::null_mut(), op: ptr::null_mut() };
    unsafe {
        assert_eq!(hfsky_grid_new(&small_params(), &mut h.grid), HfskyStatus::Ok);
        let groups = [0usize, 1];
        assert_eq!(hfsky_plan_new(h.grid, groups.as_ptr(), 2, 1.0, 1, &mut h.plan), HfskyStatus::Ok);
        assert_eq!(hfsky_operator_new(h.grid, h.plan, &mut h.op), HfskyStatus::Ok);
    }
    h
}

fn c(re: f64, im: f64) -> HfskyComplex {
    HfskyComplex { re, im }
}

fn dot(a: &[HfskyComplex], b: &[HfskyComplex]) -> (f64, f64) {
    a.iter().zip(b).fold((0.0, 0.0), |(r, i), (x, y)| (r + x.re * y.re + x.im * y.im, i + x.re * y.im - x.im * y.re))
}

#[test]
fn forward_adjoint_through_c_abi() {
    let h = setup();
    let (mut rows, mut cols) = (0, 0);
    unsafe {
        assert_eq!(hfsky_operator_shape(h.op, &mut rows, &mut cols), HfskyStatus::Ok);
        let mut dims = HfskyGridDims::default();
        assert_eq!(hfsky_grid_dims(h.grid, &mut dims), HfskyStatus::Ok);
        assert_eq!(cols, 2 * dims.tb_len);
        assert_eq!(rows, dims.pilot_rows);

        let x: Vec<_> = (0..cols).map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let y: Vec<_> = (0..rows).map(|i| c((i as f64 * 0.53).cos(), (i as f64 * 0.29).sin())).collect();
        let mut ax = vec![c(0.0, 0.0); rows];
        let mut ahy = vec![c(0.0, 0.0); cols];
        assert_eq!(hfsky_operator_forward(h.op, x.as_ptr(), cols, ax.as_mut_ptr(), rows), HfskyStatus::Ok);
        assert_eq!(hfsky_operator_adjoint(h.op, y.as_ptr(), rows, ahy.as_mut_ptr(), cols), HfskyStatus::Ok);
        // <Ax, y> = <x, Aᴴy>
        let (a, b) = (dot(&ax, &y), dot(&x, &ahy));
        assert!((a.0 - b.0).abs() + (a.1 - b.1).abs() < 1e-9 * (1.0 + a.0.abs() + a.1.abs()));
    }
}

#[test]
fn estimators_agree_through_c_abi() {
    let h = setup();
    let (mut rows, mut cols) = (0, 0);
    unsafe {
        hfsky_operator_shape(h.op, &mut rows, &mut cols);
        let mut var = vec![0.0; cols];
        var[3] = 1.0;
        var[cols / 2 + 7] = 0.5;
        let mut x = vec![c(0.0, 0.0); cols];
        x[3] = c(0.8, -0.3);
        x[cols / 2 + 7] = c(-0.2, 0.6);
        let mut y = vec![c(0.0, 0.0); rows];
        hfsky_operator_forward(h.op, x.as_ptr(), cols, y.as_mut_ptr(), rows);

        let mut a = vec![c(0.0, 0.0); cols];
        let mut b = vec![c(0.0, 0.0); cols];
        let mut iters = 0;
        let s = hfsky_estimate(h.op, HfskyAlgorithm::Mmse, var.as_ptr(), cols, y.as_ptr(), rows, 0.1, a.as_mut_ptr(), cols, ptr::null_mut());
        assert_eq!(s, HfskyStatus::Ok);
        let s = hfsky_estimate(h.op, HfskyAlgorithm::Cbfem, var.as_ptr(), cols, y.as_ptr(), rows, 0.1, b.as_mut_ptr(), cols, &mut iters);
        assert_eq!(s, HfskyStatus::Ok);
        assert!(iters >= 1);
        for (p, q) in a.iter().zip(&b) {
            assert!((p.re - q.re).abs() < 1e-3 && (p.im - q.im).abs() < 1e-3);
        }
        assert!((a[3].re - 0.8).abs() < 0.01 && (b[cols / 2 + 7].im - 0.6).abs() < 0.01);
    }
}

#[test]
fn errors_are_reported() {
    let h = setup();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(hfsky_grid_new(ptr::null(), &mut out), HfskyStatus::NullPointer);
        let bad = HfskyGridParams { valid_subcarriers: 32, ..small_params() };
        assert_eq!(hfsky_grid_new(&bad, &mut out), HfskyStatus::InvalidGrid);
        assert!(out.is_null());
        let msg = CStr::from_ptr(hfsky_last_error()).to_string_lossy();
        assert!(msg.contains("subcarriers"), "{msg}");

        let mut plan = ptr::null_mut();
        let groups = [0usize, 2];
        assert_eq!(hfsky_plan_new(h.grid, groups.as_ptr(), 2, 1.0, 1, &mut plan), HfskyStatus::InvalidPilot);

        let y = [c(1.0, 0.0)];
        let mut x = [c(0.0, 0.0)];
        assert_eq!(hfsky_operator_adjoint(h.op, y.as_ptr(), 1, x.as_mut_ptr(), 1), HfskyStatus::DimensionMismatch);
        hfsky_grid_free(ptr::null_mut());
    }
}

#[test]
fn header_is_generated_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/hfsky.h")).unwrap();
    for sym in ["hfsky_grid_new", "hfsky_operator_forward", "hfsky_estimate", "HFSKY_STATUS_OK"] {
        assert!(header.contains(sym), "{sym} missing");
    }
    // syntax-check with the system C compiler when one is present
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", &format!("{dir}/include/hfsky.h")])
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
