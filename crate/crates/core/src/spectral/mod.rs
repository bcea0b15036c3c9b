//! Periodic grids, fields, and the Littlewood-Paley machinery.

pub mod fft;
mod field;
mod filter;
mod grid;
pub mod io;
mod ops;

pub use field::Field;
pub use filter::{chi, phi, profile_hash, BlockIndex, FilterBank, Flavor, CHI_INNER, CHI_OUTER, PHI_INNER, PHI_OUTER};
pub use grid::GridSpec;
pub use ops::{
    apply_real_multiplier, dealias, divergence, dyadic_block, energy_above, low_freq_cutoff, partial,
    resample, spectral_gradient,
};

/// Filter bank for a grid; errors if the grid is too coarse.
pub fn build_filter_bank(grid: &GridSpec) -> crate::error::Result<std::sync::Arc<FilterBank>> {
    FilterBank::for_grid(grid)
}
