//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach the console.

mod common;

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;

use common::*;
use hfsky::estimators::{cbfem_estimate, mmse_estimate, mmse_observation_form, mmse_support_form, prior_support, Algorithm, CbfemOptions, SUPPORT_FLOOR};
use hfsky::fast_ops::{materialize, CztPlan, DenseOperator, TbOperator};
use hfsky::grid::{build_grid, Bin, FineFactors, GridParams, GridSpec};
use hfsky::harness::{run_experiment, run_prediction, ExperimentConfig, ResultRow};
use hfsky::metrics::{analytic_nmse, cross_interference_norm, empirical_nmse, MeanAccumulator};
use hfsky::pilots::{schedule_pilots, GroupingMode};
use hfsky::scenario::{SparseDiag, StatCsi};
use hfsky::C64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn operator_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let (g, plan) = random_oracle(&mut rng);
        let op = match case % 3 {
            0 => TbOperator::pilot_rows(&g),
            1 => TbOperator::full_frame(&g),
            _ => TbOperator::sensing(&g, &plan),
        }
        .unwrap();
        let a = materialize(&op).unwrap();
        let x = cn_vec(&mut rng, op.cols());
        let y = cn_vec(&mut rng, op.rows());
        let ax: Vec<C64> = (&a * DVector::from_vec(x.clone())).iter().copied().collect();
        let ahy: Vec<C64> = (a.adjoint() * DVector::from_vec(y.clone())).iter().copied().collect();
        worst = worst.max(rel_err(&op.forward_apply(&x).unwrap(), &ax));
        worst = worst.max(rel_err(&op.adjoint_apply(&y).unwrap(), &ahy));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-9 && secs < 10.0, format!("max rel err {worst:.2e}, {secs:.2} s"))
}

fn czt_oracle() -> Outcome {
    let mut rng = rng(202);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n1 = rng.random_range(1..=32);
        let n2 = rng.random_range(1..=32);
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (a, b) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let plan = CztPlan::new(theta, n1, n2, b, a).unwrap();
        let x = cn_vec(&mut rng, n1);
        let direct: Vec<C64> = (0..n2)
            .map(|n| (0..n1).map(|m| x[m] * C64::from_polar(1.0, theta * (n as f64 + a) * (m as f64 + b))).sum())
            .collect();
        worst = worst.max(rel_err(&plan.apply(&x).unwrap(), &direct));
    }
    outcome(worst <= 1e-10, format!("max rel err {worst:.2e}"))
}

fn orthogonality() -> Outcome {
    let g = build_grid(&GridParams {
        antennas: 4,
        subcarriers: 16,
        cp_len: 8,
        valid_subcarriers: 8,
        slots: 2,
        symbols_per_slot: 2,
        pilot_symbol: 1,
        doppler_base: 4,
        fine: FineFactors::UNIT,
        spatial_wideband: false,
        max_freq_hz: Some(16e6),
        spacing_m: None,
        ..GridParams::reference()
    })
    .unwrap();
    let p = materialize(&TbOperator::full_frame(&g).unwrap()).unwrap();
    let gram = p.adjoint() * &p;
    let scale = (g.antennas * g.valid_subcarriers * g.total_symbols) as f64;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let want = if i == j { scale } else { 0.0 };
            worst = worst.max((gram[(i, j)] - want).norm() / scale);
        }
    }
    outcome(worst <= 1e-9, format!("{}x{} Gram, max rel deviation {worst:.2e}", gram.nrows(), gram.ncols()))
}

fn mmse_dual_forms() -> Outcome {
    let mut rng = rng(404);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (g, plan) = random_oracle(&mut rng);
        let op = TbOperator::sensing(&g, &plan).unwrap();
        let k = rng.random_range(1..=6);
        let csi = random_csi(&mut rng, &g, plan.num_uts(), k);
        let prior = prior_support(&csi, SUPPORT_FLOOR).unwrap();
        let y = cn_vec(&mut rng, op.rows());
        let sz = rng.random_range(0.05..2.0);
        let a = mmse_support_form(&op, &prior, &y, sz).unwrap();
        let b = mmse_observation_form(&op, &prior, &y, sz).unwrap();
        worst = worst.max(rel_err(&a, &b));
    }
    outcome(worst <= 1e-10, format!("max rel diff {worst:.2e}"))
}

fn cbfem_scalar() -> Outcome {
    let mut rng = rng(505);
    let mut worst: f64 = 0.0;
    let mut max_iter = 0;
    let opts = CbfemOptions { max_iter: 50, tol: 1e-15, ..Default::default() };
    for _ in 0..100 {
        let a = C64::from_polar(rng.random_range(0.2..3.0), rng.random_range(0.0..6.3));
        let r = rng.random_range(0.05..3.0);
        let sz = rng.random_range(0.05..3.0);
        let y = cn(&mut rng) * rng.random_range(0.1..4.0);
        let op = DenseOperator::new(nalgebra::DMatrix::from_element(1, 1, a));
        let csi = StatCsi::from_profiles(vec![SparseDiag::from_dense(&[r])], 1).unwrap();
        let e = cbfem_estimate(&op, &csi, &[y], a.norm(), sz, &opts).unwrap();
        let want = a.conj() * y * r / (a.norm_sqr() * r + sz * sz);
        worst = worst.max((e.h_tb_hat[0] - want).norm() / want.norm());
        max_iter = max_iter.max(e.iterations);
    }
    outcome(worst <= 1e-10 && max_iter <= 50, format!("max rel err {worst:.2e}, max iterations {max_iter}"))
}

fn find<'a>(rows: &'a [ResultRow], algo: &str, grouping: &str, snr: f64, fine: usize) -> &'a ResultRow {
    rows.iter()
        .find(|r| r.algo == algo && r.grouping == grouping && r.snr_db == snr && r.fine_an == fine)
        .expect("sweep row")
}

fn fine_factor_trend() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(GridParams::desk());
    cfg.experiment_id = "fine-factor".into();
    cfg.seed = Some(2);
    cfg.trials = 100;
    cfg.sweep.snr_db = vec![0.0, 10.0, 20.0];
    cfg.sweep.fine = vec![FineFactors::UNIT, FineFactors::uniform(2)];
    let rows = run_experiment(&cfg).unwrap();
    let mut gaps = Vec::new();
    for snr in [0.0, 10.0, 20.0] {
        let m = find(&rows, "mmse", "tb-ug", snr, 2).nmse_all_db;
        let c = find(&rows, "cbfem", "tb-ug", snr, 2).nmse_all_db;
        gaps.push((c - m).abs());
    }
    let f1 = find(&rows, "cbfem", "tb-ug", 20.0, 1).nmse_all_db;
    let f2 = find(&rows, "cbfem", "tb-ug", 20.0, 2).nmse_all_db;
    let worst_gap = gaps.iter().cloned().fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_gap <= 1.0 && f2 <= f1 && secs < 1800.0,
        format!("max |CBFEM-MMSE| {worst_gap:.3} dB; 20 dB: F=1 {f1:.2} dB, F=2 {f2:.2} dB; {secs:.0} s"),
    )
}

fn grouping_trend() -> Outcome {
    // co-located terminals (shared azimuth clusters, overlapping delays) so
    // that pilot contamination is what grouping has to fix
    let mut cfg = ExperimentConfig::new(GridParams { fine: FineFactors::uniform(4), ..GridParams::desk() });
    cfg.experiment_id = "grouping".into();
    cfg.seed = Some(5);
    cfg.trials = 6;
    cfg.generator.num_uts = 16;
    cfg.generator.clusters = 4;
    cfg.generator.angle_spread_deg = 0.5;
    cfg.generator.delay_range = [0.0, 0.3];
    cfg.sweep.snr_db = vec![20.0];
    cfg.sweep.groupings = vec![GroupingMode::TripleBeam, GroupingMode::Beam, GroupingMode::Random];
    let rows = run_experiment(&cfg).unwrap();
    let nmse = |algo: &str| {
        ["tb-ug", "b-ug", "random-ug"].map(|g| find(&rows, algo, g, 20.0, 4).nmse_all_db)
    };
    let holds = |[tb, b, r]: [f64; 3]| r - tb >= 2.0 && r - b >= 2.0 && (tb - b).abs() <= 0.5;
    let (c, m) = (nmse("cbfem"), nmse("mmse"));
    // the MMSE reference guards against a gap that only reflects CBFEM
    // failing to converge on contaminated groups
    outcome(
        holds(c) && holds(m),
        format!(
            "CBFEM: TB-UG {:.2} dB, B-UG {:.2} dB, Random-UG {:.2} dB; MMSE: {:.2} / {:.2} / {:.2} dB",
            c[0], c[1], c[2], m[0], m[1], m[2]
        ),
    )
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for k in i..=j {
                r[idx[k]] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn prediction_trend() -> Outcome {
    let grid = GridParams {
        symbols_per_slot: 14,
        pilot_symbol: 6,
        doppler_base: 8,
        fine: FineFactors::uniform(4),
        ..GridParams::desk()
    };
    let mut cfg = ExperimentConfig::new(grid);
    cfg.experiment_id = "prediction".into();
    cfg.seed = Some(6);
    cfg.trials = 40;
    cfg.generator.speed_kmh = 250.0;
    // half the reference frame length: double the Doppler to keep ν·N·T_sym
    cfg.generator.doppler_scale = 2.0;
    cfg.sweep.snr_db = vec![15.0];
    cfg.estimator.algorithms = vec![Algorithm::Cbfem];
    let rows = run_prediction(&cfg).unwrap();
    let dist: Vec<f64> = rows.iter().map(|r| r.distance as f64).collect();
    let reuse: Vec<f64> = rows.iter().map(|r| r.nmse_reuse_db).collect();
    let rho = spearman(&dist, &reuse);
    let far = rows.iter().max_by_key(|r| (r.distance, r.symbol)).unwrap();
    let edge = rows.last().unwrap();
    let margin = far.nmse_reuse_db - edge.nmse_predict_db;
    outcome(
        rho > 0.9 && margin >= 3.0,
        format!(
            "Spearman(distance, reuse) {rho:.3}; reuse at symbol {} {:.2} dB vs predictor at edge {:.2} dB",
            far.symbol, far.nmse_reuse_db, edge.nmse_predict_db
        ),
    )
}

fn diag_grid(antennas: usize, valid: usize, max_freq: Option<f64>, wideband: bool) -> GridSpec {
    build_grid(&GridParams {
        antennas,
        subcarriers: 64,
        cp_len: 16,
        valid_subcarriers: valid,
        slots: 2,
        symbols_per_slot: 2,
        pilot_symbol: 1,
        doppler_base: 1,
        fine: FineFactors::uniform(2),
        spatial_wideband: wideband,
        max_freq_hz: max_freq,
        spacing_m: if max_freq.is_some() { None } else { Some(9.0) },
        ..GridParams::reference()
    })
    .unwrap()
}

fn pair_norm(g: &GridSpec, bins_u: &[Bin], bins_v: &[Bin], shared_shift: bool) -> f64 {
    let profile = |bins: &[Bin]| SparseDiag::new(g.tb_len(), bins.iter().map(|&b| (g.flat_index(b), 0.5)).collect()).unwrap();
    let csi = StatCsi::from_profiles(vec![profile(bins_u), profile(bins_v)], g.angle_bins).unwrap();
    let partition = if shared_shift { vec![vec![0, 1]] } else { vec![vec![0], vec![1]] };
    let plan = schedule_pilots(g, &partition, 1.0, 1).unwrap();
    cross_interference_norm(&TbOperator::sensing(g, &plan).unwrap(), &csi, 0, 1).unwrap()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Strictly decreasing until the sequence reaches numerical zero (relative
/// to its first value), where it may only stay there.
fn strictly_decreasing(v: &[f64]) -> bool {
    let zero = 1e-12 * v[0];
    v.windows(2).all(|w| w[1] < w[0] || (w[0] <= zero && w[1] <= zero))
}

fn cross_interference_decay() -> Outcome {
    // different shifts, overlapping two-bin delay supports: N_v 8 → 16 → 32
    let cond1: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&nv| {
            let g = diag_grid(2, nv, None, true);
            let bins = [Bin { angle: 1, delay: 0, doppler: 1 }, Bin { angle: 1, delay: 1, doppler: 1 }];
            pair_norm(&g, &bins, &bins, false)
        })
        .collect();
    // shared shift, fixed angular separation: M 4 → 8 → 16
    let cond2: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&m| {
            let g = diag_grid(m, 8, Some(16e6), false);
            let at = |omega: f64| g.bin_of(omega, 0.0, 0.0).unwrap();
            pair_norm(&g, &[at(0.0)], &[at(0.3)], true)
        })
        .collect();
    // negative control: shared shift and identical bins
    let control: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&nv| {
            let g = diag_grid(2, nv, None, true);
            let bins = [Bin { angle: 1, delay: 0, doppler: 1 }];
            pair_norm(&g, &bins, &bins, true)
        })
        .collect();
    let pass = strictly_decreasing(&cond1) && strictly_decreasing(&cond2) && control.iter().all(|&c| c >= 0.5 * control[0]);
    outcome(
        pass,
        format!("condition 1 {}; condition 2 {}; control {}", sci(&cond1), sci(&cond2), sci(&control)),
    )
}

fn analytic_consistency() -> Outcome {
    let mut rng = rng(1010);
    let g = oracle_grid(3, 8, 2, true);
    let plan = schedule_pilots(&g, &[vec![0, 1]], 1.0, 1).unwrap();
    let op = TbOperator::sensing(&g, &plan).unwrap();
    let csi = random_csi(&mut rng, &g, 2, 5);
    let sz = 0.4;
    let analytic = analytic_nmse(&op, &csi, sz).unwrap();
    let prior = prior_support(&csi, SUPPORT_FLOOR).unwrap();
    let mut acc = MeanAccumulator::default();
    for _ in 0..200 {
        let mut x = vec![C64::new(0.0, 0.0); op.cols()];
        for (&j, &v) in prior.support.iter().zip(&prior.var) {
            x[j] = cn(&mut rng) * v.sqrt();
        }
        let truth = op.channel_apply(&x).unwrap();
        let mut y = op.forward_apply(&x).unwrap();
        for v in y.iter_mut() {
            *v += cn(&mut rng) * sz;
        }
        let est = mmse_estimate(&op, &csi, &y, sz).unwrap();
        let rep = empirical_nmse(&truth, est.h_sft_p_hat.as_ref().unwrap(), &csi.fading, g.symbol_rows()).unwrap();
        acc.push(rep.nmse_all);
    }
    let (mean, se) = (acc.mean(), acc.std_err());
    outcome(
        (mean - analytic).abs() <= 3.0 * se,
        format!("Monte Carlo {mean:.5} ± {se:.5} vs analytic {analytic:.5}"),
    )
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("hfsky-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |name: &str| {
        let out = dir.join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_hfsky"))
            .args(["sweep", "--seed", "11", "--trials", "3", "--set", "sweep.snr_db=[0.0,10.0]", "--set", "generator.num_uts=4", "--out"])
            .arg(&out)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let _ = std::fs::remove_dir_all(&dir);
    outcome(!a.is_empty() && a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("operator matches dense materialization", operator_oracle),
        ("chirp-z matches direct summation", czt_oracle),
        ("unit-fine-factor steering columns are orthogonal", orthogonality),
        ("MMSE observation and support forms agree", mmse_dual_forms),
        ("CBFEM scalar fixed point equals MMSE", cbfem_scalar),
        ("fine-factor trend and CBFEM/MMSE gap", fine_factor_trend),
        ("grouping trend", grouping_trend),
        ("prediction vs. reuse trend", prediction_trend),
        ("cross-interference decay diagnostics", cross_interference_decay),
        ("analytic vs. Monte Carlo NMSE", analytic_consistency),
        ("sweep output is bit-identical across runs", determinism),
    ];
    // optional comma-separated criterion numbers, e.g. HFSKY_ACCEPTANCE=1,2,9
    let only: Option<Vec<usize>> = std::env::var("HFSKY_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let (mut run, mut failed) = (0, 0);
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        run += 1;
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name} — {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", run - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
