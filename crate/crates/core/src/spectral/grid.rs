use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic grid on `[0, L)^d` with `N` points per axis carrying `n` components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, n_points: usize, length: f64, n: usize) -> Result<Self> {
        let g = GridSpec { d, n_points, length, n };
        g.validate()?;
        Ok(g)
    }

    /// Box of side 2π, where physical and normalized frequencies coincide.
    pub fn torus(d: usize, n_points: usize, n: usize) -> Result<Self> {
        Self::new(d, n_points, 2.0 * PI, n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Grid(format!("dimension d = {} outside 1..=3", self.d)));
        }
        if self.n_points < 8 || !self.n_points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "N = {} must be a power of two and at least 8",
                self.n_points
            )));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Grid(format!("box length L = {} must be positive", self.length)));
        }
        if self.n == 0 {
            return Err(Error::Grid("component count n must be positive".into()));
        }
        Ok(())
    }

    pub fn with_components(&self, n: usize) -> GridSpec {
        GridSpec { n, ..*self }
    }

    /// Points per component, `N^d`.
    pub fn points(&self) -> usize {
        self.n_points.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.points() * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.d as i32)
    }

    /// Physical frequency of one unit of integer wavenumber.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.n_points as f64 / self.length
    }

    /// Integer wavenumber stored at FFT index `i` along one axis, in `[-N/2, N/2)`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n_points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Splits a flat point index into per-axis indices (last axis fastest).
    #[inline]
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.d).rev() {
            idx[a] = flat % self.n_points;
            flat /= self.n_points;
        }
        idx
    }

    #[inline]
    pub fn integer_wavevector(&self, flat: usize) -> [i64; 3] {
        let idx = self.unravel(flat);
        let mut k = [0i64; 3];
        for a in 0..self.d {
            k[a] = self.wavenumber(idx[a]);
        }
        k
    }

    /// Physical wavevector `2πk/L`.
    #[inline]
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let k = self.integer_wavevector(flat);
        let k0 = self.k0();
        [k[0] as f64 * k0, k[1] as f64 * k0, k[2] as f64 * k0]
    }

    #[inline]
    pub fn freq_norm(&self, flat: usize) -> f64 {
        let xi = self.wavevector(flat);
        (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt()
    }

    /// Symbol of the first derivative along `alpha`; the unpaired Nyquist mode is zeroed
    /// so derivatives of real fields stay real.
    #[inline]
    pub fn derivative_symbol(&self, flat: usize, alpha: usize) -> f64 {
        let idx = self.unravel(flat);
        let n = self.n_points;
        if idx[alpha] == n / 2 {
            0.0
        } else {
            self.wavenumber(idx[alpha]) as f64 * self.k0()
        }
    }

    /// Wavevector as seen by the discrete first derivatives.
    #[inline]
    pub fn derivative_wavevector(&self, flat: usize) -> [f64; 3] {
        let mut xi = [0.0; 3];
        for (a, x) in xi.iter_mut().enumerate().take(self.d) {
            *x = self.derivative_symbol(flat, a);
        }
        xi
    }

    /// Largest integer wavenumber kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        ((self.n_points - 1) / 3) as i64
    }

    #[inline]
    pub fn is_dealiased_mode(&self, flat: usize) -> bool {
        let k = self.integer_wavevector(flat);
        let c = self.dealias_cutoff();
        (0..self.d).all(|a| k[a].abs() <= c)
    }

    /// Coordinates of grid point `flat`.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let dx = self.dx();
        [idx[0] as f64 * dx, idx[1] as f64 * dx, idx[2] as f64 * dx]
    }

    pub fn same_space(&self, other: &GridSpec) -> bool {
        self.d == other.d && self.n_points == other.n_points && self.length == other.length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::torus(1, 4, 1).is_err());
        assert!(GridSpec::torus(1, 12, 1).is_err());
        assert!(GridSpec::torus(4, 16, 1).is_err());
        assert!(GridSpec::new(1, 16, -1.0, 1).is_err());
        assert!(GridSpec::torus(2, 16, 0).is_err());
    }

    #[test]
    fn wavenumbers_cover_symmetric_band() {
        let g = GridSpec::torus(1, 8, 1).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.derivative_symbol(4, 0), 0.0);
    }

    #[test]
    fn unravel_last_axis_fastest() {
        let g = GridSpec::torus(2, 8, 1).unwrap();
        assert_eq!(g.unravel(8 * 3 + 5), [3, 5, 0]);
    }
}
