//! Global and local Moran statistics with permutation inference.
//!
//! All statistics are computed over the *active* regions: those with at
//! least one neighbor. Islands keep their value but never enter the
//! permutation pool, and their local results are undefined.
//!
//! Random permutations come from ChaCha8 (`rand_chacha`) seeded with the
//! caller's 64-bit seed. Each region `i` draws from its own stream `i`
//! (local statistics) and each global permutation `k` from stream
//! `2^63 + k`, so results do not depend on how work is split across threads.

mod global;
mod local;
mod perm;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

pub use global::{global_bivariate_moran, global_bivariate_moran_inference, global_moran, global_moran_inference, MoranResult};
pub use local::{bivariate_local_moran, local_moran, LisaOptions, LisaResult};

pub const DEFAULT_PERMUTATIONS: usize = 999;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MIN_PERMUTATIONS: usize = 99;
/// Largest arrangement count accepted by exhaustive enumeration.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// How the reference distribution of a statistic is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inference {
    /// `permutations` random relabelings from a seeded generator.
    MonteCarlo { permutations: usize, seed: u64 },
    /// Every arrangement, for small lattices.
    Exhaustive,
}

impl Inference {
    pub fn monte_carlo(permutations: usize, seed: u64) -> Self {
        Inference::MonteCarlo { permutations, seed }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Inference::MonteCarlo { seed, .. } => Some(*seed),
            Inference::Exhaustive => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Inference::MonteCarlo { permutations, .. } if permutations < MIN_PERMUTATIONS => {
                Err(Error::InvalidPermutations(permutations))
            }
            _ => Ok(()),
        }
    }
}

impl Default for Inference {
    fn default() -> Self {
        Inference::monte_carlo(DEFAULT_PERMUTATIONS, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterClass {
    HighHigh,
    LowLow,
    LowHigh,
    HighLow,
    NotSignificant,
    Undefined,
}

impl ClusterClass {
    pub const ALL: [ClusterClass; 6] = [
        ClusterClass::HighHigh,
        ClusterClass::LowLow,
        ClusterClass::LowHigh,
        ClusterClass::HighLow,
        ClusterClass::NotSignificant,
        ClusterClass::Undefined,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClusterClass::HighHigh => "HH",
            ClusterClass::LowLow => "LL",
            ClusterClass::LowHigh => "LH",
            ClusterClass::HighLow => "HL",
            ClusterClass::NotSignificant => "NS",
            ClusterClass::Undefined => "UNDEF",
        }
    }

    /// Class obtained when the sign of the focal variable is reversed and
    /// the neighbor variable flips with it.
    pub fn mirrored(self) -> Self {
        match self {
            ClusterClass::HighHigh => ClusterClass::LowLow,
            ClusterClass::LowLow => ClusterClass::HighHigh,
            ClusterClass::LowHigh => ClusterClass::HighLow,
            ClusterClass::HighLow => ClusterClass::LowHigh,
            c => c,
        }
    }
}

impl fmt::Display for ClusterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClusterClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClusterClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown cluster class \"{s}\"")))
    }
}

/// Quadrant of (focal value, spatial lag) for a significant region.
pub fn classify(z: f64, lag: f64, pseudo_p: f64, alpha: f64, is_island: bool) -> ClusterClass {
    if is_island {
        return ClusterClass::Undefined;
    }
    if pseudo_p >= alpha || z == 0.0 || lag == 0.0 {
        return ClusterClass::NotSignificant;
    }
    match (z > 0.0, lag > 0.0) {
        (true, true) => ClusterClass::HighHigh,
        (false, false) => ClusterClass::LowLow,
        (false, true) => ClusterClass::LowHigh,
        (true, false) => ClusterClass::HighLow,
    }
}

/// Z-scores with the population standard deviation.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    let (mean, sd) = mean_sd(values)?;
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

pub(crate) fn mean_sd(values: &[f64]) -> Result<(f64, f64)> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingValue(i));
    }
    if values.len() < 2 {
        return Err(Error::TooFewRegions(values.len()));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Err(Error::ZeroVariance);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((mean, sd))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLag {
    pub values: Vec<f64>,
    /// Regions with no neighbors; their lag is 0.
    pub islands: Vec<bool>,
}

pub fn spatial_lag(weights: &SpatialWeights, z: &[f64]) -> Result<SpatialLag> {
    check_len(weights, z.len())?;
    Ok(SpatialLag {
        values: (0..weights.n()).map(|i| lag_at(weights, z, i)).collect(),
        islands: (0..weights.n()).map(|i| weights.is_island(i)).collect(),
    })
}

pub(crate) fn lag_at(weights: &SpatialWeights, z: &[f64], i: usize) -> f64 {
    let mut acc = 0.0;
    for (j, w) in weights.neighbors(i) {
        acc += w * z[j];
    }
    acc
}

pub(crate) fn check_len(weights: &SpatialWeights, len: usize) -> Result<()> {
    if len != weights.n() {
        return Err(Error::DimensionMismatch {
            expected: weights.n(),
            actual: len,
        });
    }
    Ok(())
}

/// Values standardized over the active (non-island) regions.
pub(crate) struct ActiveField {
    pub active: Vec<usize>,
    /// Position of each region within `active`, if active.
    pub position: Vec<Option<usize>>,
    /// Standardized values for every region; islands use the active mean and sd.
    pub z: Vec<f64>,
}

impl ActiveField {
    pub fn n_eff(&self) -> usize {
        self.active.len()
    }
}

pub(crate) fn active_field(values: &[f64], weights: &SpatialWeights) -> Result<ActiveField> {
    check_len(weights, values.len())?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingValue(i));
    }
    let active: Vec<usize> = (0..weights.n()).filter(|&i| !weights.is_island(i)).collect();
    if active.len() < 3 {
        return Err(Error::TooFewRegions(active.len()));
    }
    let active_values: Vec<f64> = active.iter().map(|&i| values[i]).collect();
    let (mean, sd) = mean_sd(&active_values)?;
    let mut position = vec![None; weights.n()];
    for (k, &i) in active.iter().enumerate() {
        position[i] = Some(k);
    }
    Ok(ActiveField {
        active,
        position,
        z: values.iter().map(|v| (v - mean) / sd).collect(),
    })
}

#[inline]
fn tie_tolerance(x: f64) -> f64 {
    1e-10 * (1.0 + x.abs())
}

/// Whether `sim` is at least as extreme as `observed` in the given tail.
/// Differences within floating-point noise count as ties.
#[inline]
pub(crate) fn as_extreme(sim: f64, observed: f64, upper: bool) -> bool {
    let tol = tie_tolerance(observed);
    if upper {
        sim >= observed - tol
    } else {
        sim <= observed + tol
    }
}

/// Tail of the test: upper when `observed` is at or above `center`, with
/// values within floating-point noise of `center` going to the upper tail.
#[inline]
pub(crate) fn upper_tail(observed: f64, center: f64) -> bool {
    observed >= center - tie_tolerance(center)
}
