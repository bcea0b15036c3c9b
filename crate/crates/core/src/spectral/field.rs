use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::fft;
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::par;

struct FieldData {
    grid: GridSpec,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

/// An `n`-component real function on a periodic grid.
///
/// Values are stored component-major, each component laid out with the last
/// axis fastest. The Fourier transform is computed on first use and shared by
/// all clones.
#[derive(Clone)]
pub struct Field {
    inner: Arc<FieldData>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.inner.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "expected {} values for {} components on {}^{} points, got {}",
                grid.len(),
                grid.n,
                grid.n_points,
                grid.d,
                values.len()
            )));
        }
        Ok(Self::from_parts(grid, values))
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>) -> Self {
        Field { inner: Arc::new(FieldData { grid, values, spectrum: OnceLock::new() }) }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_parts(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: GridSpec, per_component: &[f64]) -> Self {
        assert_eq!(per_component.len(), grid.n);
        let m = grid.points();
        let mut v = Vec::with_capacity(grid.len());
        for &c in per_component {
            v.extend(std::iter::repeat(c).take(m));
        }
        Self::from_parts(grid, v)
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64], usize) -> f64 + Sync + Send,
    {
        let m = grid.points();
        let mut v = vec![0.0; grid.len()];
        par::fill(&mut v, |i| {
            let x = grid.point(i % m);
            f(&x[..grid.d], i / m)
        });
        Self::from_parts(grid, v)
    }

    /// Builds a field from a full complex spectrum (component-major). The imaginary
    /// part of the inverse transform is discarded.
    pub fn from_spectrum(grid: GridSpec, spectrum: Vec<Complex64>) -> Self {
        assert_eq!(spectrum.len(), grid.len());
        let m = grid.points();
        let mut values = vec![0.0; grid.len()];
        let comps = par::map_range(grid.n, |c| fft::inverse_real(&spectrum[c * m..(c + 1) * m], grid.n_points, grid.d));
        for (c, comp) in comps.into_iter().enumerate() {
            values[c * m..(c + 1) * m].copy_from_slice(&comp);
        }
        Self::from_parts(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.inner.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.inner.values
    }

    pub fn into_values(self) -> Vec<f64> {
        match Arc::try_unwrap(self.inner) {
            Ok(data) => data.values,
            Err(shared) => shared.values.clone(),
        }
    }

    pub fn n_components(&self) -> usize {
        self.inner.grid.n
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let m = self.inner.grid.points();
        &self.inner.values[c * m..(c + 1) * m]
    }

    /// State vector at grid point `p`.
    pub fn point_values(&self, p: usize, out: &mut [f64]) {
        let m = self.inner.grid.points();
        for (c, o) in out.iter_mut().enumerate().take(self.inner.grid.n) {
            *o = self.inner.values[c * m + p];
        }
    }

    pub fn has_spectrum(&self) -> bool {
        self.inner.spectrum.get().is_some()
    }

    /// Unnormalized DFT of every component.
    pub fn spectrum(&self) -> &[Complex64] {
        self.inner.spectrum.get_or_init(|| {
            let g = &self.inner.grid;
            let m = g.points();
            let comps = par::map_range(g.n, |c| fft::forward_real(self.component(c), g.n_points, g.d));
            let mut out = Vec::with_capacity(g.len());
            for comp in comps {
                out.extend(comp);
            }
            debug_assert_eq!(out.len(), m * g.n);
            out
        })
    }

    pub fn component_spectrum(&self, c: usize) -> &[Complex64] {
        let m = self.inner.grid.points();
        &self.spectrum()[c * m..(c + 1) * m]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.inner.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Components `range` as a new field.
    pub fn select(&self, range: std::ops::Range<usize>) -> Field {
        let g = self.inner.grid;
        assert!(range.end <= g.n && range.start <= range.end);
        let m = g.points();
        if range.is_empty() {
            return Field::from_parts(g.with_components(1), vec![0.0; m]);
        }
        let values = self.inner.values[range.start * m..range.end * m].to_vec();
        let field = Self::from_parts(g.with_components(range.len()), values);
        if let Some(s) = self.inner.spectrum.get() {
            let _ = field.inner.spectrum.set(s[range.start * m..range.end * m].to_vec());
        }
        field
    }

    /// Stacks the components of several fields on the same grid.
    pub fn concat(parts: &[&Field]) -> Result<Field> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        let g = *first.grid();
        let mut values = Vec::new();
        let mut n = 0;
        for p in parts {
            if !p.grid().same_space(&g) {
                return Err(Error::Shape("concatenating fields on different grids".into()));
            }
            values.extend_from_slice(p.values());
            n += p.n_components();
        }
        Ok(Self::from_parts(g.with_components(n), values))
    }

    pub fn map<F: Fn(f64) -> f64 + Sync + Send>(&self, f: F) -> Field {
        let src = self.values();
        let mut v = vec![0.0; src.len()];
        par::fill(&mut v, |i| f(src[i]));
        Self::from_parts(self.inner.grid, v)
    }

    fn zip_with<F: Fn(f64, f64) -> f64 + Sync + Send>(&self, other: &Field, f: F) -> Field {
        assert_eq!(self.values().len(), other.values().len(), "field shapes differ");
        let (a, b) = (self.values(), other.values());
        let mut v = vec![0.0; a.len()];
        par::fill(&mut v, |i| f(a[i], b[i]));
        Self::from_parts(self.inner.grid, v)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|a| s * a)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        self.zip_with(other, |a, b| a + s * b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_with(other, |a, b| a * b)
    }

    /// Physical L² norm over all components: `(dx^d Σ |u|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values().iter().map(|v| v * v).sum();
        (s * self.inner.grid.cell_volume()).sqrt()
    }

    /// Pointwise Euclidean norm of the state vector, maximized over the grid.
    pub fn linf_norm(&self) -> f64 {
        let g = self.inner.grid;
        let m = g.points();
        let v = self.values();
        (0..m)
            .map(|p| (0..g.n).map(|c| v[c * m + p] * v[c * m + p]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self, c: usize) -> f64 {
        let comp = self.component(c);
        comp.iter().sum::<f64>() / comp.len() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.values().iter().all(|&v| v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn shape_is_checked() {
        let g = GridSpec::torus(1, 16, 2).unwrap();
        assert!(Field::new(g, vec![0.0; 31]).is_err());
        assert!(Field::new(g, vec![0.0; 32]).is_ok());
    }

    #[test]
    fn spectrum_matches_single_mode() {
        let g = GridSpec::torus(1, 16, 1).unwrap();
        let u = Field::from_fn(g, |x, _| (3.0 * x[0]).cos());
        let s = u.spectrum();
        assert!((s[3].re - 8.0).abs() < 1e-12);
        assert!((s[13].re - 8.0).abs() < 1e-12);
        let back = Field::from_spectrum(g, s.to_vec());
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn l2_norm_of_cosine() {
        let g = GridSpec::new(2, 16, 3.0, 1).unwrap();
        let u = Field::from_fn(g, |x, _| (2.0 * PI * x[0] / 3.0).cos());
        let expected = (9.0f64 / 2.0).sqrt();
        assert!((u.l2_norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn select_and_concat_roundtrip() {
        let g = GridSpec::torus(1, 8, 3).unwrap();
        let u = Field::from_fn(g, |x, c| x[0] + c as f64);
        let a = u.select(0..1);
        let b = u.select(1..3);
        let w = Field::concat(&[&a, &b]).unwrap();
        assert_eq!(w.values(), u.values());
    }
}
