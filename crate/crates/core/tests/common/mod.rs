#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hfsky::grid::{build_grid, FineFactors, GridParams, GridSpec};
use hfsky::pilots::{schedule_pilots, PilotPlan};
use hfsky::scenario::{SparseDiag, StatCsi};
use hfsky::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| cn(rng)).collect()
}

pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (e / n.max(f64::MIN_POSITIVE)).sqrt()
}

/// Small grid with two delay base bins: 16 subcarriers, CP chosen so the
/// delay base count is 2, two slots of two symbols.
pub fn oracle_grid(antennas: usize, valid: usize, fine: usize, wideband: bool) -> GridSpec {
    build_grid(&GridParams {
        antennas,
        subcarriers: 16,
        cp_len: 32 / valid,
        valid_subcarriers: valid,
        slots: 2,
        symbols_per_slot: 2,
        pilot_symbol: 1,
        doppler_base: 2 / fine,
        fine: FineFactors::uniform(fine),
        spatial_wideband: wideband,
        ..GridParams::reference()
    })
    .unwrap()
}

/// Random oracle-scale grid and a pilot plan for one or two terminals.
pub fn random_oracle<R: Rng>(rng: &mut R) -> (GridSpec, PilotPlan) {
    let m = rng.random_range(2..=4);
    let nv = if rng.random_bool(0.5) { 4 } else { 8 };
    let f = rng.random_range(1..=2);
    let g = oracle_grid(m, nv, f, rng.random_bool(0.5));
    let partition = match rng.random_range(0..3) {
        0 => vec![vec![0]],
        1 => vec![vec![0, 1]],
        _ => vec![vec![0], vec![1]],
    };
    let plan = schedule_pilots(&g, &partition, rng.random_range(0.5..2.0), 1).unwrap();
    (g, plan)
}

/// Random sparse profiles with `k` active bins per terminal.
pub fn random_csi<R: Rng>(rng: &mut R, grid: &GridSpec, uts: usize, k: usize) -> StatCsi {
    let tb = grid.tb_len();
    let profiles = (0..uts)
        .map(|_| {
            let mut idx: Vec<usize> = (0..tb).collect();
            for i in 0..k.min(tb) {
                let j = rng.random_range(i..tb);
                idx.swap(i, j);
            }
            SparseDiag::new(tb, idx[..k.min(tb)].iter().map(|&i| (i, rng.random_range(0.1..1.0))).collect()).unwrap()
        })
        .collect();
    StatCsi::from_profiles(profiles, grid.angle_bins).unwrap()
}
