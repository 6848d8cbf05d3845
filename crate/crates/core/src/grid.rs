//! System dimensions, beam-domain sampling grids and steering vectors.
//!
//! Index conventions used everywhere in the crate:
//! * beam-domain flat index = `dop * (angle_bins * delay_bins) + del * angle_bins + ang`
//!   (angle fastest, then delay, then Doppler);
//! * space-frequency-time index = `sym * (antennas * valid_subcarriers) + sub * antennas + ant`,
//!   where `sub` counts valid subcarriers from `first_valid`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub const DEFAULT_C_LIGHT: f64 = 3.0e8;

/// Per-dimension oversampling of the beam grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineFactors {
    pub angle: usize,
    pub delay: usize,
    pub doppler: usize,
}

impl FineFactors {
    pub const UNIT: FineFactors = FineFactors { angle: 1, delay: 1, doppler: 1 };

    pub fn uniform(f: usize) -> Self {
        FineFactors { angle: f, delay: f, doppler: f }
    }
}

impl Default for FineFactors {
    fn default() -> Self {
        Self::UNIT
    }
}

fn default_c_light() -> f64 {
    DEFAULT_C_LIGHT
}
fn default_true() -> bool {
    true
}

/// Raw, unvalidated system parameters (the `[grid]` table of a config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub carrier_hz: f64,
    /// Highest operating frequency; takes precedence over `spacing_m`.
    #[serde(default)]
    pub max_freq_hz: Option<f64>,
    /// Antenna spacing (half a wavelength at the highest frequency).
    #[serde(default)]
    pub spacing_m: Option<f64>,
    #[serde(default = "default_c_light")]
    pub c_light: f64,
    pub antennas: usize,
    pub subcarriers: usize,
    pub cp_len: usize,
    pub subcarrier_spacing: f64,
    pub valid_subcarriers: usize,
    /// Defaults to the centered block `(subcarriers - valid_subcarriers) / 2`.
    #[serde(default)]
    pub first_valid: Option<usize>,
    pub slots: usize,
    pub symbols_per_slot: usize,
    pub pilot_symbol: usize,
    pub doppler_base: usize,
    #[serde(default)]
    pub fine: FineFactors,
    #[serde(default = "default_true")]
    pub spatial_wideband: bool,
}

impl GridParams {
    /// The full-scale system of the reference deployment (128 antennas,
    /// 1536 of 2048 subcarriers at 250 Hz, 8 slots of 14 symbols).
    pub fn reference() -> Self {
        GridParams {
            carrier_hz: 16e6,
            max_freq_hz: None,
            spacing_m: Some(9.0),
            c_light: DEFAULT_C_LIGHT,
            antennas: 128,
            subcarriers: 2048,
            cp_len: 512,
            subcarrier_spacing: 250.0,
            valid_subcarriers: 1536,
            first_valid: None,
            slots: 8,
            symbols_per_slot: 14,
            pilot_symbol: 6,
            doppler_base: 8,
            fine: FineFactors::uniform(2),
            spatial_wideband: true,
        }
    }

    /// Reduced configuration used by the desk-scale experiments: 32 antennas,
    /// 128 valid subcarriers (delay base 32), 4 slots of 4 symbols.
    pub fn desk() -> Self {
        GridParams {
            antennas: 32,
            valid_subcarriers: 128,
            slots: 4,
            symbols_per_slot: 4,
            pilot_symbol: 1,
            doppler_base: 4,
            ..Self::reference()
        }
    }
}

/// Validated grid with every derived quantity populated. Immutable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub carrier_hz: f64,
    pub max_freq_hz: f64,
    pub c_light: f64,
    pub spacing_m: f64,
    /// Inter-element propagation delay `spacing_m / c_light`.
    pub element_delay: f64,
    pub antennas: usize,
    pub subcarriers: usize,
    pub cp_len: usize,
    pub subcarrier_spacing: f64,
    pub sample_period: f64,
    pub valid_subcarriers: usize,
    pub first_valid: usize,
    pub slots: usize,
    pub symbols_per_slot: usize,
    pub pilot_symbol: usize,
    pub total_symbols: usize,
    pub symbol_period: f64,
    pub doppler_base: usize,
    pub delay_base: usize,
    pub max_delay: f64,
    pub max_doppler: f64,
    pub fine: FineFactors,
    pub angle_bins: usize,
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub spatial_wideband: bool,
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidGrid(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

fn positive_f(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        Err(Error::InvalidGrid(format!("{name} must be finite and positive, got {v}")))
    } else {
        Ok(())
    }
}

/// Ceiling that forgives floating-point noise just above an integer.
fn tolerant_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Validate raw parameters and derive the sampling grids.
pub fn build_grid(p: &GridParams) -> Result<GridSpec> {
    positive("antennas", p.antennas)?;
    positive("subcarriers", p.subcarriers)?;
    positive("cp_len", p.cp_len)?;
    positive("valid_subcarriers", p.valid_subcarriers)?;
    positive("slots", p.slots)?;
    positive("symbols_per_slot", p.symbols_per_slot)?;
    positive("doppler_base", p.doppler_base)?;
    positive("fine.angle", p.fine.angle)?;
    positive("fine.delay", p.fine.delay)?;
    positive("fine.doppler", p.fine.doppler)?;
    positive_f("carrier_hz", p.carrier_hz)?;
    positive_f("c_light", p.c_light)?;
    positive_f("subcarrier_spacing", p.subcarrier_spacing)?;

    let max_freq_hz = match (p.max_freq_hz, p.spacing_m) {
        (Some(fo), _) => fo,
        (None, Some(d)) => {
            positive_f("spacing_m", d)?;
            p.c_light / (2.0 * d)
        }
        (None, None) => {
            return Err(Error::InvalidGrid("one of max_freq_hz or spacing_m is required".into()))
        }
    };
    positive_f("max_freq_hz", max_freq_hz)?;
    if p.carrier_hz > max_freq_hz * (1.0 + 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "carrier {} Hz exceeds highest operating frequency {} Hz",
            p.carrier_hz, max_freq_hz
        )));
    }
    let spacing_m = p.c_light / max_freq_hz / 2.0;

    if (p.valid_subcarriers * p.cp_len) % p.subcarriers != 0 {
        return Err(Error::InvalidGrid(format!(
            "valid_subcarriers*cp_len = {} not divisible by subcarriers = {}",
            p.valid_subcarriers * p.cp_len,
            p.subcarriers
        )));
    }
    let delay_base = p.valid_subcarriers * p.cp_len / p.subcarriers;
    if delay_base == 0 {
        return Err(Error::InvalidGrid("delay base count is zero".into()));
    }
    if p.valid_subcarriers > p.subcarriers {
        return Err(Error::InvalidGrid("more valid subcarriers than subcarriers".into()));
    }
    let first_valid = p.first_valid.unwrap_or((p.subcarriers - p.valid_subcarriers) / 2);
    if first_valid + p.valid_subcarriers > p.subcarriers {
        return Err(Error::InvalidGrid(format!(
            "valid block [{first_valid}, {}) exceeds {} subcarriers",
            first_valid + p.valid_subcarriers,
            p.subcarriers
        )));
    }
    if p.pilot_symbol >= p.symbols_per_slot {
        return Err(Error::InvalidGrid(format!(
            "pilot symbol {} not below symbols per slot {}",
            p.pilot_symbol, p.symbols_per_slot
        )));
    }
    let doppler_bins = p.fine.doppler * p.doppler_base;
    if doppler_bins % 2 != 0 {
        return Err(Error::InvalidGrid(format!("Doppler bin count {doppler_bins} is odd")));
    }

    let sample_period = 1.0 / (p.subcarriers as f64 * p.subcarrier_spacing);
    let symbol_period = (p.subcarriers + p.cp_len) as f64 * sample_period;
    let total_symbols = p.slots * p.symbols_per_slot;
    let angle_bins =
        tolerant_ceil(p.fine.angle as f64 * p.antennas as f64 * p.carrier_hz / max_freq_hz);

    Ok(GridSpec {
        carrier_hz: p.carrier_hz,
        max_freq_hz,
        c_light: p.c_light,
        spacing_m,
        element_delay: spacing_m / p.c_light,
        antennas: p.antennas,
        subcarriers: p.subcarriers,
        cp_len: p.cp_len,
        subcarrier_spacing: p.subcarrier_spacing,
        sample_period,
        valid_subcarriers: p.valid_subcarriers,
        first_valid,
        slots: p.slots,
        symbols_per_slot: p.symbols_per_slot,
        pilot_symbol: p.pilot_symbol,
        total_symbols,
        symbol_period,
        doppler_base: p.doppler_base,
        delay_base,
        max_delay: p.cp_len as f64 / (p.subcarriers as f64 * p.subcarrier_spacing),
        max_doppler: p.doppler_base as f64 / (2.0 * total_symbols as f64 * symbol_period),
        fine: p.fine,
        angle_bins,
        delay_bins: p.fine.delay * delay_base,
        doppler_bins,
        spatial_wideband: p.spatial_wideband,
    })
}

/// Sample positions of the three beam grids (lower interval edges).
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoints {
    pub angle: Vec<f64>,
    pub delay: Vec<f64>,
    pub doppler: Vec<f64>,
}

/// Position of one beam-domain bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bin {
    pub angle: usize,
    pub delay: usize,
    pub doppler: usize,
}

impl GridSpec {
    pub fn tb_len(&self) -> usize {
        self.angle_bins * self.delay_bins * self.doppler_bins
    }

    /// Observations per OFDM symbol (antennas × valid subcarriers).
    pub fn symbol_rows(&self) -> usize {
        self.antennas * self.valid_subcarriers
    }

    /// Observation length of the pilot segment (one pilot symbol per slot).
    pub fn pilot_rows(&self) -> usize {
        self.symbol_rows() * self.slots
    }

    pub fn frame_rows(&self) -> usize {
        self.symbol_rows() * self.total_symbols
    }

    /// Number of distinct pilot phase shifts, `⌊valid_subcarriers / delay_base⌋`.
    pub fn shift_slots(&self) -> usize {
        self.valid_subcarriers / self.delay_base
    }

    /// Length of the delay axis after embedding all phase-shifted groups.
    pub fn padded_delay_len(&self) -> usize {
        self.shift_slots() * self.delay_bins
    }

    /// Symbol index (within the frame) of the pilot of slot `slot`.
    pub fn pilot_symbol_index(&self, slot: usize) -> usize {
        slot * self.symbols_per_slot + self.pilot_symbol
    }

    pub fn flat_index(&self, b: Bin) -> usize {
        b.doppler * self.angle_bins * self.delay_bins + b.delay * self.angle_bins + b.angle
    }

    pub fn unflat(&self, idx: usize) -> Bin {
        let plane = self.angle_bins * self.delay_bins;
        let rem = idx % plane;
        Bin { angle: rem % self.angle_bins, delay: rem / self.angle_bins, doppler: idx / plane }
    }

    /// Absolute subcarrier index of the `i`-th valid subcarrier.
    pub fn subcarrier(&self, i: usize) -> usize {
        self.first_valid + i
    }

    /// Frequency seen by the array on valid subcarrier `i` (carrier only when
    /// the spatial-wideband effect is disabled).
    pub fn array_freq(&self, i: usize) -> f64 {
        if self.spatial_wideband {
            self.carrier_hz + self.subcarrier(i) as f64 * self.subcarrier_spacing
        } else {
            self.carrier_hz
        }
    }

    pub fn angle_point(&self, n: usize) -> f64 {
        (2.0 * n as f64 - self.angle_bins as f64) / self.angle_bins as f64
    }

    pub fn delay_point(&self, n: usize) -> f64 {
        self.delay_base as f64 * n as f64
            / (self.delay_bins as f64 * self.valid_subcarriers as f64 * self.subcarrier_spacing)
    }

    pub fn doppler_point(&self, n: usize) -> f64 {
        self.doppler_base as f64 * (n as f64 - self.doppler_bins as f64 / 2.0)
            / (self.doppler_bins as f64 * self.total_symbols as f64 * self.symbol_period)
    }

    pub fn grid_points(&self) -> GridPoints {
        GridPoints {
            angle: (0..self.angle_bins).map(|n| self.angle_point(n)).collect(),
            delay: (0..self.delay_bins).map(|n| self.delay_point(n)).collect(),
            doppler: (0..self.doppler_bins).map(|n| self.doppler_point(n)).collect(),
        }
    }

    /// Bin whose half-open cell contains `(omega, tau, nu)`.
    pub fn bin_of(&self, omega: f64, tau: f64, nu: f64) -> Result<Bin> {
        if !(-1.0..1.0).contains(&omega) {
            return Err(Error::OutOfRange(format!("directional cosine {omega} not in [-1, 1)")));
        }
        if !(0.0..self.max_delay).contains(&tau) {
            return Err(Error::OutOfRange(format!("delay {tau} not in [0, {})", self.max_delay)));
        }
        if !(-self.max_doppler..self.max_doppler).contains(&nu) {
            return Err(Error::OutOfRange(format!(
                "Doppler {nu} not in [-{0}, {0})",
                self.max_doppler
            )));
        }
        // grid points sit on lower bin edges; absorb rounding so they map to their own bin
        let cell = |x: f64, n: usize| {
            let v = x * n as f64;
            let r = v.round();
            let k = if (v - r).abs() < 1e-9 * (1.0 + r.abs()) { r } else { v.floor() };
            (k.max(0.0) as usize).min(n - 1)
        };
        Ok(Bin {
            angle: cell((omega + 1.0) / 2.0, self.angle_bins),
            delay: cell(tau / self.max_delay, self.delay_bins),
            doppler: cell((nu + self.max_doppler) / (2.0 * self.max_doppler), self.doppler_bins),
        })
    }

    pub fn flat_bin_of(&self, omega: f64, tau: f64, nu: f64) -> Result<usize> {
        Ok(self.flat_index(self.bin_of(omega, tau, nu)?))
    }

    /// Array response on valid subcarrier `i`.
    fn space_vec(&self, omega: f64, i: usize) -> Vec<C64> {
        let step = -2.0 * PI * self.array_freq(i) * self.element_delay * omega;
        (0..self.antennas).map(|m| C64::from_polar(1.0, step * m as f64)).collect()
    }

    /// Array response at absolute subcarrier index `k`.
    pub fn steering_space(&self, omega: f64, k: usize) -> Result<Vec<C64>> {
        if k < self.first_valid || k >= self.first_valid + self.valid_subcarriers {
            return Err(Error::OutOfRange(format!("subcarrier {k} is not a valid subcarrier")));
        }
        Ok(self.space_vec(omega, k - self.first_valid))
    }

    pub fn steering_freq(&self, tau: f64) -> Vec<C64> {
        (0..self.valid_subcarriers)
            .map(|i| {
                let k = self.subcarrier(i) as f64;
                C64::from_polar(1.0, -2.0 * PI * k * self.subcarrier_spacing * tau)
            })
            .collect()
    }

    pub fn steering_time(&self, nu: f64) -> Vec<C64> {
        (0..self.total_symbols)
            .map(|n| C64::from_polar(1.0, 2.0 * PI * nu * n as f64 * self.symbol_period))
            .collect()
    }

    /// Sampled space-frequency-time response of a single path, restricted to
    /// the listed symbol indices.
    pub fn triple_steering_rows(&self, omega: f64, tau: f64, nu: f64, symbols: &[usize]) -> Vec<C64> {
        let freq = self.steering_freq(tau);
        let time = self.steering_time(nu);
        let sf: Vec<C64> = (0..self.valid_subcarriers)
            .flat_map(|i| {
                let fi = freq[i];
                self.space_vec(omega, i).into_iter().map(move |v| v * fi)
            })
            .collect();
        let mut out = Vec::with_capacity(sf.len() * symbols.len());
        for &n in symbols {
            out.extend(sf.iter().map(|&x| x * time[n]));
        }
        out
    }

    /// Full-frame space-frequency-time response of a single path.
    pub fn triple_steering(&self, omega: f64, tau: f64, nu: f64) -> Vec<C64> {
        let all: Vec<usize> = (0..self.total_symbols).collect();
        self.triple_steering_rows(omega, tau, nu, &all)
    }

    /// Pilot symbol indices across the frame.
    pub fn pilot_symbols(&self) -> Vec<usize> {
        (0..self.slots).map(|s| self.pilot_symbol_index(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(fine: usize) -> GridSpec {
        build_grid(&GridParams {
            carrier_hz: 10e6,
            max_freq_hz: Some(10e6),
            spacing_m: None,
            c_light: DEFAULT_C_LIGHT,
            antennas: 2,
            subcarriers: 16,
            cp_len: 4,
            subcarrier_spacing: 1000.0,
            valid_subcarriers: 8,
            first_valid: None,
            slots: 2,
            symbols_per_slot: 2,
            pilot_symbol: 1,
            doppler_base: 2,
            fine: FineFactors::uniform(fine),
            spatial_wideband: true,
        })
        .unwrap()
    }

    #[test]
    fn reference_dimensions() {
        let g = build_grid(&GridParams::reference()).unwrap();
        assert_eq!(g.delay_base, 384);
        assert!((g.max_delay - 1e-3).abs() < 1e-15);
        assert!((g.symbol_period - 5e-3).abs() < 1e-15);
        assert_eq!(g.total_symbols, 112);
        assert!((g.max_doppler - 7.142857142857143).abs() < 1e-9);
        assert_eq!(g.delay_bins, 768);
        assert_eq!(g.doppler_bins, 16);
        assert!((g.max_freq_hz - 3e8 / 18.0).abs() < 1e-6);
        // 2·128·16/16.6667 = 245.76
        assert_eq!(g.angle_bins, 246);
        assert_eq!(g.first_valid, 256);
        assert_eq!(g.shift_slots(), 4);
    }

    #[test]
    fn unit_fine_factors_reduce_to_base_counts() {
        let mut p = GridParams::reference();
        p.antennas = 8;
        p.max_freq_hz = Some(p.carrier_hz);
        p.valid_subcarriers = 16; // delay base 4
        p.doppler_base = 2;
        p.fine = FineFactors::UNIT;
        let g = build_grid(&p).unwrap();
        assert_eq!((g.angle_bins, g.delay_bins, g.doppler_bins), (8, 4, 2));
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = GridParams::reference();
        p.valid_subcarriers = 1535;
        assert!(matches!(build_grid(&p), Err(Error::InvalidGrid(_))));
        let mut p = GridParams::reference();
        p.doppler_base = 3;
        p.fine.doppler = 1;
        assert!(build_grid(&p).is_err());
        let mut p = GridParams::reference();
        p.pilot_symbol = 14;
        assert!(build_grid(&p).is_err());
        let mut p = GridParams::reference();
        p.max_freq_hz = Some(15e6);
        assert!(build_grid(&p).is_err());
    }

    #[test]
    fn grid_points_small() {
        let mut g = small(1);
        g.angle_bins = 4;
        assert_eq!(g.grid_points().angle, vec![-1.0, -0.5, 0.0, 0.5]);
        assert_eq!(g.bin_of(0.1, 0.0, 0.0).unwrap().angle, 2);
        let pts = g.grid_points();
        assert_eq!(pts.doppler.len(), 2);
        assert!((pts.doppler[0] + g.max_doppler).abs() < 1e-15);
        assert_eq!(pts.doppler[1], 0.0);
    }

    #[test]
    fn reference_delay_grid_step() {
        let g = build_grid(&GridParams::reference()).unwrap();
        let pts = g.grid_points();
        assert_eq!(pts.delay[0], 0.0);
        let step = 1e-3 / 768.0;
        for (n, t) in pts.delay.iter().enumerate() {
            assert!((t - n as f64 * step).abs() < 1e-18);
        }
        assert!(*pts.delay.last().unwrap() < g.max_delay);
    }

    #[test]
    fn bin_boundaries() {
        let g = small(2);
        assert_eq!(g.bin_of(-1.0, 0.0, -g.max_doppler).unwrap(), Bin { angle: 0, delay: 0, doppler: 0 });
        assert_eq!(g.bin_of(0.0, g.max_delay * (1.0 - 1e-12), 0.0).unwrap().delay, g.delay_bins - 1);
        assert!(g.bin_of(1.0, 0.0, 0.0).is_err());
        assert!(g.bin_of(0.0, g.max_delay, 0.0).is_err());
        assert!(g.bin_of(0.0, 0.0, g.max_doppler).is_err());
    }

    #[test]
    fn lower_edges_map_to_own_bin() {
        let g = small(2);
        let pts = g.grid_points();
        for (a, &om) in pts.angle.iter().enumerate() {
            for (d, &t) in pts.delay.iter().enumerate() {
                for (n, &nu) in pts.doppler.iter().enumerate() {
                    let b = g.bin_of(om, t, nu).unwrap();
                    assert_eq!(b, Bin { angle: a, delay: d, doppler: n });
                    assert_eq!(g.unflat(g.flat_index(b)), b);
                }
            }
        }
    }

    #[test]
    fn steering_basics() {
        let g = small(1);
        assert!(g.steering_space(0.0, g.first_valid + 3).unwrap().iter().all(|z| (z - 1.0).norm() < 1e-15));
        assert!(g.steering_space(0.0, 0).is_err());
        assert!(g.steering_time(0.0).iter().all(|z| *z == C64::new(1.0, 0.0)));
        assert!(g.triple_steering(0.0, 0.0, 0.0).iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn doppler_quarter_turn() {
        // four symbols, ν = 1/(4·T_sym): phases step by a quarter turn.
        let g = build_grid(&GridParams {
            slots: 2,
            symbols_per_slot: 2,
            pilot_symbol: 0,
            doppler_base: 2,
            ..GridParams::desk()
        })
        .unwrap();
        assert_eq!(g.total_symbols, 4);
        let d = g.steering_time(1.0 / (4.0 * g.symbol_period));
        let want = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn triple_steering_matches_loop() {
        let g = small(1);
        let (om, tau, nu) = (0.37, 0.3 * g.max_delay, -0.4 * g.max_doppler);
        let p = g.triple_steering(om, tau, nu);
        for n in 0..g.total_symbols {
            for i in 0..g.valid_subcarriers {
                let k = (g.first_valid + i) as f64;
                for m in 0..g.antennas {
                    let fk = g.carrier_hz + k * g.subcarrier_spacing;
                    let ph = -2.0 * PI * fk * m as f64 * g.element_delay * om
                        - 2.0 * PI * k * g.subcarrier_spacing * tau
                        + 2.0 * PI * nu * n as f64 * g.symbol_period;
                    let idx = n * g.symbol_rows() + i * g.antennas + m;
                    assert!((p[idx] - C64::from_polar(1.0, ph)).norm() < 1e-12);
                }
            }
        }
        assert!(p.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
