//! Phase-shift pilots, channel-overlap degrees and terminal grouping.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::scenario::{SparseDiag, StatCsi};
use crate::{Error, Result, C64};

/// Pilot assignment for every terminal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PilotPlan {
    /// Unit-modulus base sequence over the valid subcarriers.
    pub base_seq: Vec<C64>,
    /// Pilot amplitude (square root of pilot power).
    pub sigma_p: f64,
    /// Delay-domain phase-shift factor per terminal, a multiple of the delay bin count.
    pub phi: Vec<usize>,
    /// Partition of terminal indices; group `s` uses shift `s * delay_bins`.
    pub groups: Vec<Vec<usize>>,
}

impl PilotPlan {
    pub fn num_uts(&self) -> usize {
        self.phi.len()
    }
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }
}

/// How terminals are partitioned into pilot-sharing groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupingMode {
    /// Agglomerative grouping on full beam-domain overlaps.
    #[serde(rename = "tb-ug")]
    TripleBeam,
    /// Agglomerative grouping on spatial-beam marginals only.
    #[serde(rename = "b-ug")]
    Beam,
    /// Uniformly random balanced partition.
    #[serde(rename = "random-ug")]
    Random,
}

impl GroupingMode {
    pub fn label(self) -> &'static str {
        match self {
            GroupingMode::TripleBeam => "tb-ug",
            GroupingMode::Beam => "b-ug",
            GroupingMode::Random => "random-ug",
        }
    }
}

impl std::str::FromStr for GroupingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tb-ug" => Ok(GroupingMode::TripleBeam),
            "b-ug" => Ok(GroupingMode::Beam),
            "random-ug" => Ok(GroupingMode::Random),
            _ => Err(Error::Config(format!("unknown grouping mode {s:?}"))),
        }
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff–Chu sequence of the given length and root.
pub fn zc_sequence(length: usize, root: usize) -> Result<Vec<C64>> {
    if length == 0 {
        return Err(Error::InvalidPilot("sequence length must be positive".into()));
    }
    if gcd(root, length) != 1 {
        return Err(Error::InvalidPilot(format!("root {root} is not coprime with length {length}")));
    }
    let l = length as f64;
    let r = root as f64;
    let odd = length % 2 == 1;
    Ok((0..length)
        .map(|n| {
            let n = n as f64;
            let q = if odd { n * (n + 1.0) } else { n * n };
            C64::from_polar(1.0, -PI * r * q / l)
        })
        .collect())
}

/// Base sequence over `len` subcarriers: a Zadoff–Chu sequence of odd length
/// (`len`, or `len - 1` cyclically extended by one sample).
pub fn base_sequence(len: usize, root: usize) -> Result<Vec<C64>> {
    if len % 2 == 1 {
        return zc_sequence(len, root);
    }
    let mut s = zc_sequence(len - 1, root)?;
    s.push(s[0]);
    Ok(s)
}

/// Frequency-domain pilot of terminal `u` over the valid subcarriers.
pub fn make_pilot(plan: &PilotPlan, grid: &GridSpec, u: usize) -> Result<Vec<C64>> {
    let phi = *plan
        .phi
        .get(u)
        .ok_or_else(|| Error::OutOfRange(format!("terminal {u} not in plan of {}", plan.num_uts())))?;
    check_shift(grid, phi)?;
    crate::error::check_len("base sequence", grid.valid_subcarriers, plan.base_seq.len())?;
    let rate = grid.delay_base as f64 * phi as f64 / (grid.delay_bins * grid.valid_subcarriers) as f64;
    Ok((0..grid.valid_subcarriers)
        .map(|i| {
            let k = grid.subcarrier(i) as f64;
            plan.base_seq[i] * plan.sigma_p * C64::from_polar(1.0, -2.0 * PI * k * rate)
        })
        .collect())
}

pub(crate) fn check_shift(grid: &GridSpec, phi: usize) -> Result<()> {
    if phi % grid.delay_bins != 0 || phi / grid.delay_bins >= grid.shift_slots() {
        return Err(Error::InvalidPilot(format!(
            "shift {phi} not in {{0, {}, …, {}}}",
            grid.delay_bins,
            (grid.shift_slots() - 1) * grid.delay_bins
        )));
    }
    Ok(())
}

/// Normalized inner product of two nonnegative profiles.
pub fn overlap(a: &[f64], b: &[f64]) -> Result<f64> {
    crate::error::check_len("overlap profile", a.len(), b.len())?;
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::EmptySupport);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

/// Overlap degree of two beam-domain power profiles.
pub fn overlap_tb(a: &SparseDiag, b: &SparseDiag) -> Result<f64> {
    crate::error::check_len("beam-domain profile", a.len(), b.len())?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::EmptySupport);
    }
    Ok((a.dot(b) / (na * nb)).clamp(0.0, 1.0))
}

/// Overlap degree of two spatial-beam marginals.
pub fn overlap_beam(a: &[f64], b: &[f64]) -> Result<f64> {
    overlap(a, b)
}

/// Pairwise overlap matrix for the chosen profile type.
pub fn overlap_matrix(csi: &StatCsi, mode: GroupingMode) -> Result<DMatrix<f64>> {
    let u = csi.num_uts();
    let mut m = DMatrix::from_element(u, u, 0.0);
    for a in 0..u {
        m[(a, a)] = 1.0;
        for b in a + 1..u {
            let v = match mode {
                GroupingMode::Beam => overlap_beam(&csi.beam[a], &csi.beam[b])?,
                _ => overlap_tb(&csi.tb[a], &csi.tb[b])?,
            };
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// Agglomerative grouping: repeatedly merge the two groups with the smallest
/// mean pairwise overlap until `groups` remain. Ties go to the pair with the
/// smallest merged size, then to the lexicographically smallest pair of group
/// ids (a group's id is its smallest member). Output groups are sorted by
/// smallest member.
///
/// The size rule matters when many overlaps are exactly zero: a purely
/// lexicographic tie-break would keep growing group 0 and stack most
/// terminals on one phase shift.
pub fn group_uts(overlaps: &DMatrix<f64>, groups: usize) -> Result<Vec<Vec<usize>>> {
    let u = overlaps.nrows();
    if overlaps.ncols() != u {
        return Err(Error::DimensionMismatch { what: "overlap matrix", expected: u, got: overlaps.ncols() });
    }
    if groups == 0 || groups > u {
        return Err(Error::InvalidPilot(format!("cannot form {groups} groups from {u} terminals")));
    }
    let mut members: Vec<Vec<usize>> = (0..u).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..u).collect();
    while active.len() > groups {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (ai, &s) in active.iter().enumerate() {
            for &t in &active[ai + 1..] {
                let sum: f64 = members[s]
                    .iter()
                    .flat_map(|&a| members[t].iter().map(move |&b| overlaps[(a, b)]))
                    .sum();
                let cost = sum / (members[s].len() * members[t].len()) as f64;
                let size = members[s].len() + members[t].len();
                if best.is_none_or(|(c, n, _, _)| cost < c || (cost == c && size < n)) {
                    best = Some((cost, size, s, t));
                }
            }
        }
        let (_, _, s, t) = best.expect("at least two active groups");
        let moved = std::mem::take(&mut members[t]);
        members[s].extend(moved);
        members[s].sort_unstable();
        active.retain(|&g| g != t);
    }
    Ok(active.into_iter().map(|g| std::mem::take(&mut members[g])).collect())
}

/// Balanced random partition: shuffle, then deal round-robin.
pub fn random_groups<R: Rng + ?Sized>(num_uts: usize, groups: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if groups == 0 || groups > num_uts {
        return Err(Error::InvalidPilot(format!("cannot form {groups} groups from {num_uts} terminals")));
    }
    let mut order: Vec<usize> = (0..num_uts).collect();
    order.shuffle(rng);
    let mut out = vec![Vec::new(); groups];
    for (pos, u) in order.into_iter().enumerate() {
        out[pos % groups].push(u);
    }
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort_by_key(|g| g[0]);
    Ok(out)
}

/// Partition terminals according to `mode`.
pub fn group_by_mode<R: Rng + ?Sized>(
    csi: &StatCsi,
    mode: GroupingMode,
    groups: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    match mode {
        GroupingMode::Random => random_groups(csi.num_uts(), groups, rng),
        _ => group_uts(&overlap_matrix(csi, mode)?, groups),
    }
}

/// Assign phase shifts: the `s`-th group (ordered by smallest member) gets
/// shift `s * delay_bins`.
pub fn schedule_pilots(grid: &GridSpec, partition: &[Vec<usize>], sigma_p: f64, zc_root: usize) -> Result<PilotPlan> {
    if partition.is_empty() {
        return Err(Error::InvalidPilot("empty partition".into()));
    }
    if partition.len() > grid.shift_slots() {
        return Err(Error::InvalidPilot(format!(
            "{} groups but only {} phase shifts available",
            partition.len(),
            grid.shift_slots()
        )));
    }
    if !(sigma_p.is_finite() && sigma_p > 0.0) {
        return Err(Error::InvalidPilot(format!("pilot amplitude {sigma_p} must be positive")));
    }
    let num_uts: usize = partition.iter().map(Vec::len).sum();
    let mut groups: Vec<Vec<usize>> = partition
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g
        })
        .collect();
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::InvalidPilot("empty group in partition".into()));
    }
    groups.sort_by_key(|g| g[0]);
    let mut phi = vec![usize::MAX; num_uts];
    for (s, g) in groups.iter().enumerate() {
        for &u in g {
            if u >= num_uts || phi[u] != usize::MAX {
                return Err(Error::InvalidPilot(format!("partition is not a partition of 0..{num_uts}")));
            }
            phi[u] = s * grid.delay_bins;
        }
    }
    Ok(PilotPlan { base_seq: base_sequence(grid.valid_subcarriers, zc_root)?, sigma_p, phi, groups })
}
