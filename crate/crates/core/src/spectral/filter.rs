//! Radial dyadic partition of unity on the resolved frequency grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Inner radius of the transition region of χ.
pub const CHI_INNER: f64 = 0.75;
/// Outer radius of the support of χ.
pub const CHI_OUTER: f64 = 4.0 / 3.0;
/// Support of φ(2^{-j}·) is `[PHI_INNER 2^j, PHI_OUTER 2^j]`.
pub const PHI_INNER: f64 = 0.75;
pub const PHI_OUTER: f64 = 8.0 / 3.0;

#[inline]
fn flat_exp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth radial profile: 1 on `[0, 3/4]`, 0 on `[4/3, ∞)`, C^∞ and nonincreasing.
#[inline]
pub fn chi(r: f64) -> f64 {
    if r <= CHI_INNER {
        return 1.0;
    }
    if r >= CHI_OUTER {
        return 0.0;
    }
    let t = (r - CHI_INNER) / (CHI_OUTER - CHI_INNER);
    let a = flat_exp(1.0 - t);
    a / (a + flat_exp(t))
}

/// `φ(r) = χ(r/2) − χ(r)`.
#[inline]
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// SHA-256 of χ sampled on 4096 points of `[0, 2]`, recorded in every output so
/// that block-boundary values can be traced to the profile that produced them.
pub fn profile_hash() -> String {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        let mut h = Sha256::new();
        for i in 0..4096 {
            let r = 2.0 * i as f64 / 4095.0;
            h.update(chi(r).to_le_bytes());
        }
        hex::encode(h.finalize())
    })
    .clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Homogeneous,
    Nonhomogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockIndex {
    pub j: i32,
    pub flavor: Flavor,
}

impl BlockIndex {
    pub fn homogeneous(j: i32) -> Self {
        BlockIndex { j, flavor: Flavor::Homogeneous }
    }
    pub fn nonhomogeneous(j: i32) -> Self {
        BlockIndex { j, flavor: Flavor::Nonhomogeneous }
    }
}

/// χ and φ(2^{-j}·) sampled at every resolved frequency of a grid.
///
/// Blocks use physical frequencies `2πk/L`; on a box of side 2π these are the
/// integer wavenumbers.
#[derive(Debug)]
pub struct FilterBank {
    pub grid: GridSpec,
    pub chi_hat: Vec<f64>,
    /// `phi_hat[j - j_min]`
    pub phi_hat: Vec<Vec<f64>>,
    pub j_min: i32,
    pub j_max: i32,
    /// Frequencies with |ξ| at most this radius are covered by the partition.
    pub guard_radius: f64,
}

impl FilterBank {
    pub fn build(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let j_max = (grid.nyquist() * 3.0 / 8.0).log2().floor() as i32;
        if j_max < 1 {
            return Err(Error::GridTooCoarse { j_max });
        }
        // smallest block whose open support reaches the lowest nonzero frequency
        let j_min = ((grid.k0() / PHI_OUTER).log2().floor() as i32 + 1).min(j_max);
        let m = grid.points();
        let norms: Vec<f64> = (0..m).map(|i| grid.freq_norm(i)).collect();
        let chi_hat = norms.iter().map(|&r| chi(r)).collect();
        let phi_hat = (j_min..=j_max)
            .map(|j| {
                let s = 2f64.powi(-j);
                norms.iter().map(|&r| phi(s * r)).collect()
            })
            .collect();
        let guard_radius = (grid.nyquist() * 3.0 / 8.0).min(1.5 * 2f64.powi(j_max));
        Ok(FilterBank { grid: *grid, chi_hat, phi_hat, j_min, j_max, guard_radius })
    }

    /// Shared bank for a grid (component count ignored).
    pub fn for_grid(grid: &GridSpec) -> Result<Arc<FilterBank>> {
        type Key = (usize, usize, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<FilterBank>>>> = OnceLock::new();
        let key = (grid.d, grid.n_points, grid.length.to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().expect("filter cache poisoned").get(&key) {
            return Ok(b.clone());
        }
        let bank = Arc::new(FilterBank::build(&grid.with_components(1))?);
        cache.lock().expect("filter cache poisoned").insert(key, bank.clone());
        Ok(bank)
    }

    /// Range of block indices that can be nonzero for a flavor.
    pub fn block_range(&self, flavor: Flavor) -> std::ops::RangeInclusive<i32> {
        match flavor {
            Flavor::Homogeneous => self.j_min..=self.j_max,
            Flavor::Nonhomogeneous => -1..=self.j_max,
        }
    }

    /// Multiplier of block `b`, or `None` for a block that is identically zero.
    pub fn multiplier(&self, b: BlockIndex) -> Option<&[f64]> {
        match b.flavor {
            Flavor::Homogeneous => {
                if b.j < self.j_min || b.j > self.j_max {
                    None
                } else {
                    Some(&self.phi_hat[(b.j - self.j_min) as usize])
                }
            }
            Flavor::Nonhomogeneous => {
                if b.j == -1 {
                    Some(&self.chi_hat)
                } else if b.j < -1 || b.j > self.j_max {
                    None
                } else if b.j < self.j_min {
                    // only possible for boxes much smaller than 2π: no resolved
                    // nonzero frequency in this annulus
                    None
                } else {
                    Some(&self.phi_hat[(b.j - self.j_min) as usize])
                }
            }
        }
    }

    /// Multiplier of the low-frequency cutoff `Ṡ_m` (homogeneous) or `S_m`.
    pub fn cutoff_multiplier(&self, m: i32, flavor: Flavor) -> Vec<f64> {
        let pts = self.grid.points();
        if flavor == Flavor::Nonhomogeneous && m <= -1 {
            return vec![0.0; pts];
        }
        let s = 2f64.powi(-m);
        (0..pts).map(|i| chi(s * self.grid.freq_norm(i))).collect()
    }

    /// `χ(ξ) + Σ_{j=0}^{j_max} φ(2^{-j}ξ)` at one spectral index.
    pub fn partition_sum(&self, flat: usize) -> f64 {
        let mut s = self.chi_hat[flat];
        for j in 0..=self.j_max {
            if let Some(m) = self.multiplier(BlockIndex::nonhomogeneous(j)) {
                s += m[flat];
            }
        }
        s
    }
}
