//! Exact solution operator of `S̄ ∂_t V − Z̄^{αβ}∂_α∂_β V = 0` on the torus.

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::spectral::{Field, GridSpec};
use crate::systems::SystemSpec;
use crate::trajectory::Trajectory;

/// Constant-coefficient parabolic operator with its per-mode exponential.
pub struct ConstantParabolicOp {
    pub d: usize,
    pub n2: usize,
    pub s_bar: DMatrix<f64>,
    /// `Z̄^{αβ}` stored at `α·d + β`.
    pub z_bar: Vec<DMatrix<f64>>,
    /// `Re(Z(ξ)z·z) ≥ κ|ξ|²|z|²` on the sampled unit directions.
    pub kappa: f64,
    /// Extreme eigenvalues of the symmetric part of `S̄^{-1/2}Z(ξ)S̄^{-1/2}` over unit `ξ`.
    pub a_min: f64,
    pub a_max: f64,
    s_half: DMatrix<f64>,
    s_inv_half: DMatrix<f64>,
    symmetric: bool,
    cache: Mutex<Option<(GridSpec, Arc<ModeDecomposition>)>>,
}

impl Clone for ConstantParabolicOp {
    fn clone(&self) -> Self {
        ConstantParabolicOp {
            d: self.d,
            n2: self.n2,
            s_bar: self.s_bar.clone(),
            z_bar: self.z_bar.clone(),
            kappa: self.kappa,
            a_min: self.a_min,
            a_max: self.a_max,
            s_half: self.s_half.clone(),
            s_inv_half: self.s_inv_half.clone(),
            symmetric: self.symmetric,
            cache: Mutex::new(None),
        }
    }
}

impl std::fmt::Debug for ConstantParabolicOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstantParabolicOp")
            .field("d", &self.d)
            .field("n2", &self.n2)
            .field("kappa", &self.kappa)
            .field("a_min", &self.a_min)
            .field("a_max", &self.a_max)
            .finish()
    }
}

fn symbol_of(z_bar: &[DMatrix<f64>], d: usize, n2: usize, xi: &[f64]) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(n2, n2);
    for a in 0..d {
        for b in 0..d {
            let w = xi[a] * xi[b];
            if w != 0.0 {
                acc += &z_bar[a * d + b] * w;
            }
        }
    }
    acc
}

impl ConstantParabolicOp {
    pub fn new(s_bar: DMatrix<f64>, z_bar: Vec<DMatrix<f64>>, d: usize) -> Result<Self> {
        let n2 = s_bar.nrows();
        if s_bar.ncols() != n2 || z_bar.len() != d * d || z_bar.iter().any(|z| z.shape() != (n2, n2)) {
            return Err(Error::Shape("S_bar must be n2×n2 and Z_bar d² matrices of the same size".into()));
        }
        linalg::check_spd(&s_bar, "S_bar")?;
        let (s_half, s_inv_half) = linalg::spd_sqrt_pair(&s_bar);
        let dirs = linalg::unit_directions(d, if d == 2 { 90 } else { 400 });
        let mut kappa = f64::INFINITY;
        let (mut a_min, mut a_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut symmetric = true;
        for xi in &dirs {
            let z = symbol_of(&z_bar, d, n2, xi);
            symmetric &= (&z - z.transpose()).amax() <= 1e-13 * z.amax().max(1e-300);
            kappa = kappa.min(linalg::sym_eig_range(&z).0);
            let w = &s_inv_half * &z * &s_inv_half;
            let (lo, hi) = linalg::sym_eig_range(&w);
            a_min = a_min.min(lo);
            a_max = a_max.max(hi);
        }
        if !(kappa > 0.0) {
            return Err(Error::Ellipticity(format!("constant symbol has Re(Z(xi)z.z) >= {kappa:e} |xi|^2|z|^2")));
        }
        Ok(ConstantParabolicOp {
            d,
            n2,
            s_bar,
            z_bar,
            kappa,
            a_min,
            a_max,
            s_half,
            s_inv_half,
            symmetric,
            cache: Mutex::new(None),
        })
    }

    /// `∂_t V = ΔV` for `n2` decoupled components.
    pub fn heat(d: usize, n2: usize) -> Self {
        let z = (0..d * d)
            .map(|k| if k / d == k % d { DMatrix::identity(n2, n2) } else { DMatrix::zeros(n2, n2) })
            .collect();
        Self::new(DMatrix::identity(n2, n2), z, d).expect("heat operator is valid")
    }

    /// The parabolic block of a system, frozen at its reference state.
    pub fn from_system(spec: &SystemSpec) -> Result<Self> {
        let (s22, z) = spec.reference_parabolic();
        Self::new(s22, z, spec.d)
    }

    /// `(c, C₀, C_L¹)`: the per-block decay rate `c = a_min(3/4)²`,
    /// `C₀ = cond(S̄)^{1/2}` and `C_L¹ = C₀(1 + a_max(8/3)²)/c`.
    pub fn smoothing_constants(&self) -> (f64, f64, f64) {
        let c0 = self.condition().sqrt();
        let c = self.a_min * 0.75f64.powi(2);
        (c, c0, c0 * (1.0 + self.a_max * (8.0f64 / 3.0).powi(2)) / c)
    }

    pub fn symbol(&self, xi: &[f64]) -> DMatrix<f64> {
        symbol_of(&self.z_bar, self.d, self.n2, xi)
    }

    pub fn condition(&self) -> f64 {
        linalg::condition_spd(&self.s_bar)
    }

    pub fn s_half(&self) -> &DMatrix<f64> {
        &self.s_half
    }

    pub fn s_inv_half(&self) -> &DMatrix<f64> {
        &self.s_inv_half
    }

    /// Per-mode data for `exp(−t S̄⁻¹Z(ξ))` on `grid`, cached for the last grid used.
    pub fn decompose(&self, grid: &GridSpec) -> Arc<ModeDecomposition> {
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((g, dec)) = guard.as_ref() {
            if g.same_space(grid) {
                return dec.clone();
            }
        }
        let dec = Arc::new(ModeDecomposition::build(self, grid));
        *guard = Some((*grid, dec.clone()));
        dec
    }

    /// `V(t) = exp(−t S̄⁻¹Z(D)) V₀`.
    pub fn apply(&self, v: &Field, t: f64) -> Field {
        self.decompose(v.grid()).propagator(t).apply(v)
    }

    /// `−S̄⁻¹Z(D)V`, the exact time derivative along the flow.
    pub fn time_derivative(&self, v: &Field) -> Field {
        self.decompose(v.grid()).generator().apply(v)
    }

    /// `Z̄(D)V`, the symbol `Z(ξ)` applied per mode.
    pub fn apply_symbol(&self, v: &Field) -> Field {
        self.decompose(v.grid()).symbol_matrices().apply(v)
    }
}

enum ModeData {
    /// `exp(−tM) = P diag(e^{−tλ}) P⁻¹`, stored as `(P, P⁻¹, λ)`.
    Eigen { p: Vec<f64>, p_inv: Vec<f64>, lambda: Vec<f64> },
    /// General case; `M = S̄⁻¹Z(ξ)` per mode, exponentiated on demand.
    General { m: Vec<f64> },
}

/// Per-mode data of `M(ξ) = S̄⁻¹Z(ξ)` on one grid.
pub struct ModeDecomposition {
    grid: GridSpec,
    n2: usize,
    data: ModeData,
    symbols: Vec<f64>,
}

impl ModeDecomposition {
    fn build(op: &ConstantParabolicOp, grid: &GridSpec) -> Self {
        let m = grid.points();
        let n2 = op.n2;
        let nn = n2 * n2;
        let s_inv = op.s_bar.clone().try_inverse().expect("S_bar is SPD");
        let mut symbols = vec![0.0; m * nn];
        par::for_each_chunk_mut(&mut symbols, nn, |p, out| {
            let xi = grid.derivative_wavevector(p);
            out.copy_from_slice(&linalg::from_matrix(&op.symbol(&xi[..op.d])));
        });
        let data = if op.symmetric {
            let mut p_all = vec![0.0; m * nn];
            let mut pinv_all = vec![0.0; m * nn];
            let mut lam_all = vec![0.0; m * n2];
            let per_mode: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = par::map_range(m, |p| {
                let z = linalg::to_matrix(&symbols[p * nn..(p + 1) * nn], n2);
                let w = &op.s_inv_half * z * &op.s_inv_half;
                let w = (&w + w.transpose()) * 0.5;
                let eig = SymmetricEigen::new(w);
                let q = eig.eigenvectors;
                let pm = &op.s_inv_half * &q;
                let pi = q.transpose() * &op.s_half;
                (linalg::from_matrix(&pm), linalg::from_matrix(&pi), eig.eigenvalues.iter().copied().collect())
            });
            for (p, (a, b, l)) in per_mode.into_iter().enumerate() {
                p_all[p * nn..(p + 1) * nn].copy_from_slice(&a);
                pinv_all[p * nn..(p + 1) * nn].copy_from_slice(&b);
                lam_all[p * n2..(p + 1) * n2].copy_from_slice(&l);
            }
            ModeData::Eigen { p: p_all, p_inv: pinv_all, lambda: lam_all }
        } else {
            let mut mm = vec![0.0; m * nn];
            par::for_each_chunk_mut(&mut mm, nn, |p, out| {
                let z = linalg::to_matrix(&symbols[p * nn..(p + 1) * nn], n2);
                out.copy_from_slice(&linalg::from_matrix(&(&s_inv * z)));
            });
            ModeData::General { m: mm }
        };
        ModeDecomposition { grid: *grid, n2, data, symbols }
    }

    /// `exp(−tM(ξ))` for every mode.
    pub fn propagator(&self, t: f64) -> ModeMatrices {
        let n2 = self.n2;
        let nn = n2 * n2;
        let m = self.grid.points();
        let mut out = vec![0.0; m * nn];
        match &self.data {
            ModeData::Eigen { p, p_inv, lambda } => {
                par::for_each_chunk_mut(&mut out, nn, |k, o| {
                    let pm = &p[k * nn..(k + 1) * nn];
                    let pi = &p_inv[k * nn..(k + 1) * nn];
                    let l = &lambda[k * n2..(k + 1) * n2];
                    for i in 0..n2 {
                        for j in 0..n2 {
                            let mut acc = 0.0;
                            for r in 0..n2 {
                                acc += pm[i * n2 + r] * (-t * l[r]).exp() * pi[r * n2 + j];
                            }
                            o[i * n2 + j] = acc;
                        }
                    }
                });
            }
            ModeData::General { m: mm } => {
                par::for_each_chunk_mut(&mut out, nn, |k, o| {
                    let e = (linalg::to_matrix(&mm[k * nn..(k + 1) * nn], n2) * (-t)).exp();
                    o.copy_from_slice(&linalg::from_matrix(&e));
                });
            }
        }
        ModeMatrices { grid: self.grid, n2, mats: out }
    }

    /// `−M(ξ)` for every mode.
    pub fn generator(&self) -> ModeMatrices {
        let n2 = self.n2;
        let nn = n2 * n2;
        let mats = match &self.data {
            ModeData::Eigen { p, p_inv, lambda } => {
                let mut out = vec![0.0; p.len()];
                par::for_each_chunk_mut(&mut out, nn, |k, o| {
                    for i in 0..n2 {
                        for j in 0..n2 {
                            let mut acc = 0.0;
                            for r in 0..n2 {
                                acc -= p[k * nn + i * n2 + r] * lambda[k * n2 + r] * p_inv[k * nn + r * n2 + j];
                            }
                            o[i * n2 + j] = acc;
                        }
                    }
                });
                out
            }
            ModeData::General { m } => m.iter().map(|v| -v).collect(),
        };
        ModeMatrices { grid: self.grid, n2, mats }
    }

    pub fn symbol_matrices(&self) -> ModeMatrices {
        ModeMatrices { grid: self.grid, n2: self.n2, mats: self.symbols.clone() }
    }
}

/// One real `n2×n2` matrix per Fourier mode.
pub struct ModeMatrices {
    grid: GridSpec,
    n2: usize,
    mats: Vec<f64>,
}

impl ModeMatrices {
    pub fn apply(&self, v: &Field) -> Field {
        let g = *v.grid();
        assert!(g.same_space(&self.grid) && g.n == self.n2, "field does not match the mode matrices");
        let n2 = self.n2;
        let m = g.points();
        let spec = v.spectrum();
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        // component-major output; fill one component row at a time
        par::fill(&mut out, |idx| {
            let i = idx / m;
            let p = idx % m;
            let mat = &self.mats[p * n2 * n2 + i * n2..p * n2 * n2 + (i + 1) * n2];
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &a) in mat.iter().enumerate() {
                acc += spec[j * m + p] * a;
            }
            acc
        });
        Field::from_spectrum(g, out)
    }
}

/// Exact samples `V(t_k)`, `t_k = kT/(samples−1)`.
pub fn solve_constant_parabolic(v0: &Field, op: &ConstantParabolicOp, t_end: f64, samples: usize) -> Result<Trajectory> {
    if v0.n_components() != op.n2 {
        return Err(Error::Shape(format!("initial data has {} components, operator {}", v0.n_components(), op.n2)));
    }
    if v0.grid().d != op.d {
        return Err(Error::Shape("grid dimension differs from the operator's".into()));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) || samples < 2 {
        return Err(Error::InvalidArgument("need T >= 0 and at least two samples".into()));
    }
    let dt = t_end / (samples - 1) as f64;
    let dec = op.decompose(v0.grid());
    let fields = (0..samples).map(|k| dec.propagator(k as f64 * dt).apply(v0)).collect();
    Trajectory::new(if dt > 0.0 { dt } else { 1.0 }, fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_single_mode() {
        let g = GridSpec::torus(2, 16, 1).unwrap();
        let v0 = Field::from_fn(g, |x, _| (3.0 * x[0] + 4.0 * x[1]).cos());
        let op = ConstantParabolicOp::heat(2, 1);
        let v = op.apply(&v0, 0.01);
        let exact = v0.scale((-25.0f64 * 0.01).exp());
        assert!(v.sub(&exact).max_abs() < 1e-12);
        let dv = op.time_derivative(&v0);
        assert!(dv.sub(&v0.scale(-25.0)).max_abs() < 1e-11);
    }

    #[test]
    fn semigroup() {
        let g = GridSpec::torus(1, 32, 2).unwrap();
        let z = vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])];
        let op = ConstantParabolicOp::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]), z, 1).unwrap();
        let v0 = Field::from_fn(g, |x, c| (x[0] * (c + 1) as f64).sin() + (5.0 * x[0]).cos());
        let a = op.apply(&op.apply(&v0, 0.05), 0.05);
        let b = op.apply(&v0, 0.1);
        assert!(a.sub(&b).max_abs() < 1e-12);
    }

    #[test]
    fn general_path_matches_eigen_path() {
        // nonsymmetric Z(ξ) forces the Padé route; compare to an explicit series at small t
        let g = GridSpec::torus(1, 16, 2).unwrap();
        let z = vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.3, 1.0])];
        let op = ConstantParabolicOp::new(DMatrix::identity(2, 2), z, 1).unwrap();
        assert!((op.kappa - 1.0).abs() < 1e-12);
        let v0 = Field::from_fn(g, |x, c| if c == 0 { x[0].cos() } else { 0.0 });
        let v = op.apply(&v0, 0.2);
        // mode k=1: exp(−0.2 [[1, .3], [−.3, 1]]) = e^{−0.2} rotation by 0.06
        let r = (-0.2f64).exp();
        let expect0 = r * (0.06f64).cos();
        let expect1 = r * (0.06f64).sin();
        assert!((v.component(0)[0] - expect0).abs() < 1e-12);
        assert!((v.component(1)[0] - expect1).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_s() {
        let z = vec![DMatrix::identity(1, 1)];
        assert!(ConstantParabolicOp::new(DMatrix::from_element(1, 1, -1.0), z, 1).is_err());
    }
}
