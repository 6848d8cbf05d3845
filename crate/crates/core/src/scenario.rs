//! Synthetic multipath scenarios, ground-truth channels and bin-wise
//! statistical CSI.
//!
//! The generator is a parametric stand-in for ray-traced skywave channels:
//! each terminal sees a handful of paths clustered in angle, spread in delay,
//! and Doppler-shifted by terminal motion plus an ionospheric term.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::{Error, Result, C64};

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Gain magnitude (linear).
    pub beta: f64,
    /// Initial phase in [0, 2π).
    pub phi0: f64,
    /// Directional cosine in [-1, 1).
    pub omega: f64,
    /// Delay in seconds.
    pub tau: f64,
    /// Doppler shift in Hz.
    pub nu: f64,
}

impl Path {
    pub fn gain(&self) -> C64 {
        C64::from_polar(self.beta, self.phi0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridSpec,
    pub uts: Vec<Vec<Path>>,
    pub seed: u64,
}

/// Diagonal of a nonnegative beam-domain covariance stored sparsely
/// (sorted indices, strictly positive values).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseDiag {
    len: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseDiag {
    pub fn new(len: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::OutOfRange(format!("duplicate diagonal index {}", w[0].0)));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= len {
                return Err(Error::OutOfRange(format!("diagonal index {i} beyond length {len}")));
            }
        }
        if entries.iter().any(|&(_, v)| !(v.is_finite() && v > 0.0)) {
            return Err(Error::OutOfRange("diagonal entries must be finite and nonnegative".into()));
        }
        Ok(SparseDiag { len, entries })
    }

    pub fn from_dense(d: &[f64]) -> Self {
        SparseDiag {
            len: d.len(),
            entries: d.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, &v)| (i, v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
    pub fn get(&self, i: usize) -> f64 {
        self.entries.binary_search_by_key(&i, |&(j, _)| j).map_or(0.0, |p| self.entries[p].1)
    }
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len];
        for &(i, v) in &self.entries {
            d[i] = v;
        }
        d
    }
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }
    pub fn dot(&self, other: &SparseDiag) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Statistical CSI of every terminal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatCsi {
    /// Beam-domain power profile per terminal.
    pub tb: Vec<SparseDiag>,
    /// Spatial-beam marginal per terminal.
    pub beam: Vec<Vec<f64>>,
    /// Large-scale fading (total power) per terminal.
    pub fading: Vec<f64>,
}

impl StatCsi {
    /// Build from per-terminal beam-domain profiles; marginals are formed over
    /// `angle_bins` (pass the profile length for a flat, one-bin-per-entry view).
    pub fn from_profiles(tb: Vec<SparseDiag>, angle_bins: usize) -> Result<Self> {
        if angle_bins == 0 {
            return Err(Error::OutOfRange("angle bin count must be positive".into()));
        }
        let beam = tb
            .iter()
            .map(|d| {
                let mut m = vec![0.0; angle_bins];
                for &(i, v) in d.entries() {
                    m[i % angle_bins] += v;
                }
                m
            })
            .collect();
        let fading = tb.iter().map(SparseDiag::sum).collect();
        Ok(StatCsi { tb, beam, fading })
    }

    pub fn num_uts(&self) -> usize {
        self.tb.len()
    }

    /// Length of one terminal's beam-domain vector.
    pub fn tb_len(&self) -> usize {
        self.tb.first().map_or(0, SparseDiag::len)
    }

    /// Reordered copy (terminal `perm[i]` becomes terminal `i`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        StatCsi {
            tb: perm.iter().map(|&p| self.tb[p].clone()).collect(),
            beam: perm.iter().map(|&p| self.beam[p].clone()).collect(),
            fading: perm.iter().map(|&p| self.fading[p]).collect(),
        }
    }
}

fn default_num_uts() -> usize {
    8
}
fn default_paths_min() -> usize {
    2
}
fn default_paths_max() -> usize {
    5
}
fn default_angle_spread() -> f64 {
    1.0
}
fn default_delay_range() -> [f64; 2] {
    [0.0, 0.9]
}
fn default_gain_span() -> f64 {
    10.0
}
fn default_fading() -> Option<f64> {
    Some(1.0)
}
fn default_speed() -> f64 {
    100.0
}
fn default_iono() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}

/// Parameters of the synthetic scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_num_uts")]
    pub num_uts: usize,
    #[serde(default = "default_paths_min")]
    pub paths_min: usize,
    #[serde(default = "default_paths_max")]
    pub paths_max: usize,
    /// Per-path azimuth jitter (full width, degrees) around the terminal's center.
    #[serde(default = "default_angle_spread")]
    pub angle_spread_deg: f64,
    /// Number of shared azimuth clusters; 0 gives every terminal its own
    /// uniformly drawn center.
    #[serde(default)]
    pub clusters: usize,
    /// Full width (degrees) of terminal centers around their cluster center.
    #[serde(default)]
    pub cluster_spread_deg: f64,
    /// Delay draw range as fractions of the maximum delay.
    #[serde(default = "default_delay_range")]
    pub delay_range: [f64; 2],
    /// Path powers are log-uniform over this many dB.
    #[serde(default = "default_gain_span")]
    pub gain_span_db: f64,
    /// Normalize each terminal's total power to this value (None keeps raw draws).
    #[serde(default = "default_fading")]
    pub fading: Option<f64>,
    #[serde(default = "default_speed")]
    pub speed_kmh: f64,
    #[serde(default = "default_iono")]
    pub iono_doppler_hz: f64,
    /// Multiplier on the Doppler spread, for frames shorter than the reference.
    #[serde(default = "default_one")]
    pub doppler_scale: f64,
    #[serde(default)]
    pub elevation_deg: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_uts: default_num_uts(),
            paths_min: default_paths_min(),
            paths_max: default_paths_max(),
            angle_spread_deg: default_angle_spread(),
            clusters: 0,
            cluster_spread_deg: 0.0,
            delay_range: default_delay_range(),
            gain_span_db: default_gain_span(),
            fading: default_fading(),
            speed_kmh: default_speed(),
            iono_doppler_hz: default_iono(),
            doppler_scale: 1.0,
            elevation_deg: 0.0,
        }
    }
}

/// Maximum Doppler magnitude drawn by the generator:
/// `scale · (ν_iono / 2 + v / c · f_c)`.
pub fn scenario_max_doppler(grid: &GridSpec, gen: &GeneratorConfig) -> f64 {
    let v = gen.speed_kmh / 3.6;
    gen.doppler_scale * (gen.iono_doppler_hz / 2.0 + v / grid.c_light * grid.carrier_hz)
}

impl GeneratorConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGenerator(m));
        if self.num_uts == 0 {
            return bad("num_uts must be positive".into());
        }
        if self.paths_min == 0 || self.paths_min > self.paths_max {
            return bad(format!("empty path range [{}, {}]", self.paths_min, self.paths_max));
        }
        if !(0.0..180.0).contains(&self.angle_spread_deg) || !(0.0..180.0).contains(&self.cluster_spread_deg) {
            return bad("angle spreads must lie in [0, 180) degrees".into());
        }
        let [lo, hi] = self.delay_range;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad(format!("delay range [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"));
        }
        if !(self.gain_span_db >= 0.0 && self.gain_span_db.is_finite()) {
            return bad("gain span must be nonnegative".into());
        }
        if let Some(f) = self.fading {
            if !(f > 0.0 && f.is_finite()) {
                return bad("fading must be positive".into());
            }
        }
        if !(self.speed_kmh >= 0.0 && self.iono_doppler_hz >= 0.0 && self.doppler_scale >= 0.0) {
            return bad("speed, ionospheric Doppler and Doppler scale must be nonnegative".into());
        }
        if self.elevation_deg.abs() >= 90.0 {
            return bad("elevation must lie in (-90, 90) degrees".into());
        }
        let nu = scenario_max_doppler(grid, self);
        if nu > grid.max_doppler {
            return bad(format!("Doppler spread {nu:.4} Hz exceeds grid range {:.4} Hz", grid.max_doppler));
        }
        Ok(())
    }
}

/// Generate a scenario with an RNG seeded from `seed`.
pub fn generate_scenario(grid: &GridSpec, gen: &GeneratorConfig, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uts = generate_paths(grid, gen, &mut rng)?;
    Ok(Scenario { grid: grid.clone(), uts, seed })
}

/// Draw per-terminal path lists from `rng`.
pub fn generate_paths<R: Rng + ?Sized>(grid: &GridSpec, gen: &GeneratorConfig, rng: &mut R) -> Result<Vec<Vec<Path>>> {
    gen.validate(grid)?;
    let nu_max = scenario_max_doppler(grid, gen);
    let cos_el = gen.elevation_deg.to_radians().cos();
    let centers: Vec<f64> = (0..gen.clusters).map(|_| rng.random_range(-90.0..90.0)).collect();
    let jitter = |rng: &mut R, width: f64| if width > 0.0 { rng.random_range(-width / 2.0..width / 2.0) } else { 0.0 };
    let mut uts = Vec::with_capacity(gen.num_uts);
    for u in 0..gen.num_uts {
        let center = if centers.is_empty() {
            rng.random_range(-90.0..90.0)
        } else {
            centers[u % centers.len()] + jitter(rng, gen.cluster_spread_deg)
        };
        let count = rng.random_range(gen.paths_min..=gen.paths_max);
        let mut paths = Vec::with_capacity(count);
        for _ in 0..count {
            let az: f64 = center + jitter(rng, gen.angle_spread_deg);
            let mut omega = az.to_radians().sin() * cos_el;
            if omega >= 1.0 {
                omega = 1.0 - f64::EPSILON;
            }
            let [lo, hi] = gen.delay_range;
            let tau = rng.random_range(lo..hi) * grid.max_delay;
            let nu = if nu_max > 0.0 { rng.random_range(-nu_max..nu_max) } else { 0.0 };
            let power_db: f64 = if gen.gain_span_db > 0.0 { rng.random_range(0.0..gen.gain_span_db) } else { 0.0 };
            let phi0 = rng.random_range(0.0..2.0 * PI);
            paths.push(Path { beta: 10f64.powf(-power_db / 20.0), phi0, omega, tau, nu });
        }
        if let Some(target) = gen.fading {
            let total: f64 = paths.iter().map(|p| p.beta * p.beta).sum();
            let s = (target / total).sqrt();
            paths.iter_mut().for_each(|p| p.beta *= s);
        }
        uts.push(paths);
    }
    Ok(uts)
}

fn check_paths(grid: &GridSpec, paths: &[Path]) -> Result<()> {
    for p in paths {
        grid.bin_of(p.omega, p.tau, p.nu)?;
        if !(p.beta.is_finite() && p.beta >= 0.0 && p.phi0.is_finite()) {
            return Err(Error::OutOfRange(format!("invalid path gain {p:?}")));
        }
    }
    Ok(())
}

/// Space-frequency-time channel of one terminal on the listed symbols.
pub fn synth_sft_rows(grid: &GridSpec, paths: &[Path], symbols: &[usize]) -> Result<Vec<C64>> {
    check_paths(grid, paths)?;
    if let Some(&s) = symbols.iter().find(|&&s| s >= grid.total_symbols) {
        return Err(Error::OutOfRange(format!("symbol {s} beyond frame of {}", grid.total_symbols)));
    }
    let mut h = vec![C64::new(0.0, 0.0); grid.symbol_rows() * symbols.len()];
    for p in paths {
        let g = p.gain();
        for (acc, s) in h.iter_mut().zip(grid.triple_steering_rows(p.omega, p.tau, p.nu, symbols)) {
            *acc += g * s;
        }
    }
    Ok(h)
}

/// Full-frame space-frequency-time channel of one terminal (off-grid, exact).
pub fn synth_sft_channel(grid: &GridSpec, paths: &[Path]) -> Result<Vec<C64>> {
    let all: Vec<usize> = (0..grid.total_symbols).collect();
    synth_sft_rows(grid, paths, &all)
}

/// Channel on the pilot symbols only.
pub fn synth_pilot_channel(grid: &GridSpec, paths: &[Path]) -> Result<Vec<C64>> {
    synth_sft_rows(grid, paths, &grid.pilot_symbols())
}

/// Beam-domain power profile of one terminal: path powers summed per bin.
pub fn tb_profile(grid: &GridSpec, paths: &[Path]) -> Result<SparseDiag> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for p in paths {
        *acc.entry(grid.flat_bin_of(p.omega, p.tau, p.nu)?).or_default() += p.beta * p.beta;
    }
    SparseDiag::new(grid.tb_len(), acc.into_iter().collect())
}

pub fn compute_stat_csi(grid: &GridSpec, scenario: &Scenario) -> Result<StatCsi> {
    let tb = scenario.uts.iter().map(|p| tb_profile(grid, p)).collect::<Result<Vec<_>>>()?;
    StatCsi::from_profiles(tb, grid.angle_bins)
}

/// On-grid beam-domain coefficients: each bin holds the summed complex gain
/// of the paths falling inside it.
pub fn tb_ground_truth(grid: &GridSpec, paths: &[Path]) -> Result<Vec<C64>> {
    let mut h = vec![C64::new(0.0, 0.0); grid.tb_len()];
    for p in paths {
        h[grid.flat_bin_of(p.omega, p.tau, p.nu)?] += p.gain();
    }
    Ok(h)
}

const FILE_HEADER: &str = "# hfsky scenario v1: per path `beta phi0 omega tau nu`";

/// Serialize path lists as text; every float carries 17 significant digits.
pub fn write_scenario(scenario: &Scenario) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FILE_HEADER}");
    let _ = writeln!(s, "seed {}", scenario.seed);
    let _ = writeln!(s, "uts {}", scenario.uts.len());
    for (u, paths) in scenario.uts.iter().enumerate() {
        let _ = writeln!(s, "ut {u} {}", paths.len());
        for p in paths {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}", p.beta, p.phi0, p.omega, p.tau, p.nu);
        }
    }
    s
}

/// Parse the text format of [`write_scenario`] and validate it against `grid`.
pub fn read_scenario(grid: &GridSpec, text: &str) -> Result<Scenario> {
    let perr = |line: usize, m: &str| Error::Parse(format!("line {}: {m}", line + 1));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let field = |lines: &mut dyn Iterator<Item = (usize, &str)>, key: &str| -> Result<(usize, Vec<String>)> {
        let (n, l) = lines.next().ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
        let toks: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        if toks.first().map(String::as_str) != Some(key) {
            return Err(perr(n, &format!("expected `{key}`")));
        }
        Ok((n, toks))
    };
    let parse_usize = |n: usize, t: Option<&String>| -> Result<usize> {
        t.ok_or_else(|| perr(n, "missing count"))?.parse().map_err(|_| perr(n, "bad integer"))
    };
    let (n, toks) = field(&mut lines, "seed")?;
    let seed: u64 = toks.get(1).ok_or_else(|| perr(n, "missing seed"))?.parse().map_err(|_| perr(n, "bad seed"))?;
    let (n, toks) = field(&mut lines, "uts")?;
    let num = parse_usize(n, toks.get(1))?;
    let mut uts = Vec::with_capacity(num);
    for u in 0..num {
        let (n, toks) = field(&mut lines, "ut")?;
        if parse_usize(n, toks.get(1))? != u {
            return Err(perr(n, "terminals out of order"));
        }
        let count = parse_usize(n, toks.get(2))?;
        let mut paths = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, l) = lines.next().ok_or_else(|| Error::Parse("truncated path list".into()))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| perr(n, "bad number")))
                .collect::<Result<_>>()?;
            if v.len() != 5 {
                return Err(perr(n, "expected 5 values"));
            }
            paths.push(Path { beta: v[0], phi0: v[1], omega: v[2], tau: v[3], nu: v[4] });
        }
        check_paths(grid, &paths)?;
        if paths.is_empty() {
            return Err(Error::Parse(format!("terminal {u} has no paths")));
        }
        uts.push(paths);
    }
    if let Some((n, _)) = lines.next() {
        return Err(perr(n, "trailing content"));
    }
    Ok(Scenario { grid: grid.clone(), uts, seed })
}
