//! Experiment orchestration: configuration, per-trial RNG streams, Monte
//! Carlo sweeps and result persistence.
//!
//! Every trial draws from ChaCha streams keyed by `(seed, trial, purpose)`,
//! so a trial's scenario, noise and random grouping are identical across all
//! sweep points (common random numbers) and independent of scheduling.
//! Trials run in parallel; aggregation is sequential in trial order.

mod config;
mod output;

pub use config::{EstimatorConfig, ExperimentConfig, PilotConfig, SweepConfig};
pub use output::{plot_script, prediction_csv, write_csv, CSV_COLUMNS};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::estimators::{cbfem_estimate, mmse_estimate, Algorithm, CbfemOptions, EstimateResult};
use crate::fast_ops::TbOperator;
use crate::grid::{FineFactors, GridSpec};
use crate::metrics::{empirical_nmse, to_db, MeanAccumulator, NmseReport};
use crate::pilots::{group_by_mode, make_pilot, schedule_pilots, GroupingMode, PilotPlan};
use crate::predictor::predict;
use crate::scenario::{generate_paths, synth_pilot_channel, synth_sft_rows, tb_profile, GeneratorConfig, Path, StatCsi};
use crate::{Error, Result, C64};

/// Independent random streams within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scenario = 0,
    Noise = 1,
    Grouping = 2,
}

pub fn trial_rng(seed: u64, trial: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * 3 + stream as u64);
    rng
}

/// Noise level for a received SNR: `σ_z² = σ_p² · E / 10^{snr/10}`, where
/// `E = Σ_u ϑ_u` is the expected per-element channel power summed over
/// terminals.
pub fn snr_to_sigma_z(sigma_p: f64, channel_energy: f64, snr_db: f64) -> f64 {
    (sigma_p * sigma_p * channel_energy / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// `n` samples of unit-variance circular complex Gaussian noise.
pub fn unit_noise<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * s, im * s)
        })
        .collect()
}

/// `Σ_u X_u h_u`: pilot-weighted sum of per-terminal pilot-row channels.
pub fn received_signal(grid: &GridSpec, plan: &PilotPlan, channels: &[Vec<C64>]) -> Result<Vec<C64>> {
    let rows = grid.pilot_rows();
    let mut y = vec![C64::new(0.0, 0.0); rows];
    for (u, h) in channels.iter().enumerate() {
        crate::error::check_len("pilot-row channel", rows, h.len())?;
        let x = make_pilot(plan, grid, u)?;
        for (r, (acc, hv)) in y.iter_mut().zip(h).enumerate() {
            *acc += x[(r % grid.symbol_rows()) / grid.antennas] * hv;
        }
    }
    Ok(y)
}

/// One Monte Carlo realization at a fixed grid and grouping mode.
#[derive(Debug, Clone)]
pub struct Trial {
    pub grid: GridSpec,
    pub paths: Vec<Vec<Path>>,
    pub csi: StatCsi,
    pub plan: PilotPlan,
    pub op: TbOperator,
    /// Pilot-row channel per terminal.
    pub truth: Vec<Vec<C64>>,
    pub signal: Vec<C64>,
    pub noise: Vec<C64>,
}

impl Trial {
    pub fn prepare(
        cfg: &ExperimentConfig,
        fine: FineFactors,
        speed_kmh: f64,
        mode: GroupingMode,
        seed: u64,
        trial: usize,
    ) -> Result<Trial> {
        let grid = cfg.grid_for(fine)?;
        let gen = GeneratorConfig { speed_kmh, ..cfg.generator.clone() };
        let paths = generate_paths(&grid, &gen, &mut trial_rng(seed, trial, Stream::Scenario))?;
        Self::from_paths(cfg, grid, paths, mode, seed, trial)
    }

    pub fn from_paths(
        cfg: &ExperimentConfig,
        grid: GridSpec,
        paths: Vec<Vec<Path>>,
        mode: GroupingMode,
        seed: u64,
        trial: usize,
    ) -> Result<Trial> {
        let tb = paths.iter().map(|p| tb_profile(&grid, p)).collect::<Result<Vec<_>>>()?;
        let csi = StatCsi::from_profiles(tb, grid.angle_bins)?;
        let groups = cfg.pilots.groups.unwrap_or(grid.shift_slots()).min(paths.len());
        let partition = group_by_mode(&csi, mode, groups, &mut trial_rng(seed, trial, Stream::Grouping))?;
        let plan = schedule_pilots(&grid, &partition, cfg.pilots.sigma_p, cfg.pilots.zc_root)?;
        let op = TbOperator::sensing(&grid, &plan)?;
        let truth = paths.iter().map(|p| synth_pilot_channel(&grid, p)).collect::<Result<Vec<_>>>()?;
        let signal = received_signal(&grid, &plan, &truth)?;
        let noise = unit_noise(&mut trial_rng(seed, trial, Stream::Noise), grid.pilot_rows());
        Ok(Trial { grid, paths, csi, plan, op, truth, signal, noise })
    }

    pub fn channel_energy(&self) -> f64 {
        self.csi.fading.iter().sum()
    }

    pub fn sigma_z(&self, snr_db: f64) -> f64 {
        snr_to_sigma_z(self.plan.sigma_p, self.channel_energy(), snr_db)
    }

    pub fn observation(&self, sigma_z: f64) -> Vec<C64> {
        self.signal.iter().zip(&self.noise).map(|(s, n)| s + n * sigma_z).collect()
    }

    pub fn estimate(&self, algo: Algorithm, y: &[C64], sigma_z: f64, opts: &CbfemOptions) -> Result<EstimateResult> {
        match algo {
            Algorithm::Mmse => mmse_estimate(&self.op, &self.csi, y, sigma_z),
            Algorithm::Cbfem => cbfem_estimate(&self.op, &self.csi, y, self.plan.sigma_p, sigma_z, opts),
        }
    }

    pub fn nmse(&self, est: &EstimateResult) -> Result<NmseReport> {
        let h = est.h_sft_p_hat.as_ref().ok_or_else(|| Error::Config("estimate lacks a channel".into()))?;
        empirical_nmse(&self.truth, h, &self.csi.fading, self.grid.symbol_rows())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub algo: String,
    pub grouping: String,
    pub snr_db: f64,
    pub speed_kmh: f64,
    pub fine_an: usize,
    pub fine_de: usize,
    pub fine_do: usize,
    pub trial_count: usize,
    pub nmse_all_db: f64,
    pub nmse_current_db: f64,
    pub stderr_db: f64,
    pub iters_mean: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    all: f64,
    current: f64,
    iters: usize,
    wall_ms: f64,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    speed: f64,
    fine: FineFactors,
    mode: GroupingMode,
    snr: f64,
    algo: Algorithm,
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<Point> {
    let mut pts = Vec::new();
    for speed in cfg.speed_axis() {
        for fine in cfg.fine_axis() {
            for mode in cfg.grouping_axis() {
                for &snr in &cfg.sweep.snr_db {
                    for &algo in &cfg.estimator.algorithms {
                        pts.push(Point { speed, fine, mode, snr, algo });
                    }
                }
            }
        }
    }
    pts
}

fn run_trial(cfg: &ExperimentConfig, seed: u64, t: usize) -> Result<Vec<Option<Sample>>> {
    let mut out = Vec::new();
    for speed in cfg.speed_axis() {
        for fine in cfg.fine_axis() {
            for mode in cfg.grouping_axis() {
                let trial = Trial::prepare(cfg, fine, speed, mode, seed, t)?;
                for &snr in &cfg.sweep.snr_db {
                    let sz = trial.sigma_z(snr);
                    let y = trial.observation(sz);
                    for &algo in &cfg.estimator.algorithms {
                        let start = Instant::now();
                        let sample = match trial.estimate(algo, &y, sz, &cfg.estimator.cbfem) {
                            Ok(est) => {
                                let wall_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                                let rep = trial.nmse(&est)?;
                                Some(Sample { all: rep.nmse_all, current: rep.nmse_current, iters: est.iterations, wall_ms })
                            }
                            Err(Error::NonFinite { iter }) => {
                                eprintln!("trial {t}: {} diverged at iteration {iter} (snr {snr} dB)", algo.label());
                                None
                            }
                            Err(e) => return Err(e),
                        };
                        out.push(sample);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn require_seed(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| Error::Config("a seed is required".into()))
}

/// Run every sweep point for `cfg.trials` trials and aggregate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let seed = require_seed(cfg)?;
    let per_trial: Vec<Vec<Option<Sample>>> =
        (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, seed, t)).collect::<Result<_>>()?;

    let points = sweep_points(cfg);
    let mut rows = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let (mut all, mut cur) = (MeanAccumulator::default(), MeanAccumulator::default());
        let (mut iters, mut wall) = (0.0, 0.0);
        for s in per_trial.iter().filter_map(|t| t[k]) {
            all.push(s.all);
            cur.push(s.current);
            iters += s.iters as f64;
            wall += s.wall_ms;
        }
        let n = all.count();
        let nan = f64::NAN;
        rows.push(ResultRow {
            experiment_id: cfg.experiment_id.clone(),
            algo: p.algo.label().into(),
            grouping: p.mode.label().into(),
            snr_db: p.snr,
            speed_kmh: p.speed,
            fine_an: p.fine.angle,
            fine_de: p.fine.delay,
            fine_do: p.fine.doppler,
            trial_count: n,
            nmse_all_db: if n > 0 { to_db(all.mean()) } else { nan },
            nmse_current_db: if n > 0 { to_db(cur.mean()) } else { nan },
            stderr_db: if n > 0 { cur.std_err_db() } else { nan },
            iters_mean: if n > 0 { iters / n as f64 } else { nan },
            wall_ms: if n > 0 { wall / n as f64 } else { nan },
        });
    }
    Ok(rows)
}

/// Per-symbol NMSE of predicted vs. reused channels in the current slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub symbol: usize,
    pub distance: usize,
    pub trial_count: usize,
    pub nmse_predict_db: f64,
    pub nmse_reuse_db: f64,
    pub stderr_predict_db: f64,
    pub stderr_reuse_db: f64,
}

fn per_symbol_nmse(truth: &[Vec<C64>], est: &[&[C64]], fading: &[f64]) -> f64 {
    let u = truth.len() as f64;
    truth
        .iter()
        .zip(est)
        .zip(fading)
        .map(|((t, e), f)| t.iter().zip(e.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / (t.len() as f64 * f))
        .sum::<f64>()
        / u
}

/// Compare prediction against reusing the last pilot estimate over every
/// symbol of the current slot. Uses the first value of each sweep axis.
pub fn run_prediction(cfg: &ExperimentConfig) -> Result<Vec<PredictionRow>> {
    cfg.validate()?;
    let seed = require_seed(cfg)?;
    let fine = cfg.fine_axis()[0];
    let speed = cfg.speed_axis()[0];
    let mode = cfg.grouping_axis()[0];
    let snr = cfg.sweep.snr_db[0];
    let algo = cfg.estimator.algorithms[0];
    let grid = cfg.grid_for(fine)?;
    let op_full = TbOperator::full_frame(&grid)?;
    let ns = grid.symbols_per_slot;
    let rows = grid.symbol_rows();

    let per_trial: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let trial = Trial::prepare(cfg, fine, speed, mode, seed, t)?;
            let sz = trial.sigma_z(snr);
            let est = match trial.estimate(algo, &trial.observation(sz), sz, &cfg.estimator.cbfem) {
                Ok(e) => e,
                Err(Error::NonFinite { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let pred = predict(&op_full, &est.h_tb_hat)?;
            let reuse = est.h_sft_p_hat.as_ref().ok_or_else(|| Error::Config("estimate lacks a channel".into()))?;
            let first = (grid.slots - 1) * ns;
            let mut p = Vec::with_capacity(ns);
            let mut r = Vec::with_capacity(ns);
            for s in 0..ns {
                let truth =
                    trial.paths.iter().map(|pp| synth_sft_rows(&grid, pp, &[first + s])).collect::<Result<Vec<_>>>()?;
                let pe: Vec<&[C64]> = pred.per_ut.iter().map(|u| u[s].as_slice()).collect();
                let re: Vec<&[C64]> = reuse.iter().map(|h| &h[h.len() - rows..]).collect();
                p.push(per_symbol_nmse(&truth, &pe, &trial.csi.fading));
                r.push(per_symbol_nmse(&truth, &re, &trial.csi.fading));
            }
            Ok(Some((p, r)))
        })
        .collect::<Result<_>>()?;

    Ok((0..ns)
        .map(|s| {
            let (mut p, mut r) = (MeanAccumulator::default(), MeanAccumulator::default());
            for (pv, rv) in per_trial.iter().flatten() {
                p.push(pv[s]);
                r.push(rv[s]);
            }
            PredictionRow {
                symbol: s,
                distance: s.abs_diff(grid.pilot_symbol),
                trial_count: p.count(),
                nmse_predict_db: to_db(p.mean()),
                nmse_reuse_db: to_db(r.mean()),
                stderr_predict_db: p.std_err_db(),
                stderr_reuse_db: r.std_err_db(),
            }
        })
        .collect())
}
