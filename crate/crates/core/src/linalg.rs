//! Small dense helpers on row-major slices, used in per-gridpoint hot loops.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn to_matrix(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n * m.ncols()];
    for i in 0..n {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    out
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `false` for a (numerically) singular matrix.
pub fn solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    true
}

/// Largest state dimension handled by the allocation-free pointwise kernels.
pub const MAX_STATE: usize = 6;

/// Stack scratch for one `n×n` matrix with `n ≤ MAX_STATE`.
pub type Scratch = [f64; MAX_STATE * MAX_STATE];

pub const SCRATCH: Scratch = [0.0; MAX_STATE * MAX_STATE];

/// Gauss-Jordan inverse into `out` without allocating; `false` if singular.
pub fn invert_into(a: &[f64], n: usize, out: &mut [f64]) -> bool {
    if n == 1 {
        out[0] = 1.0 / a[0];
        return a[0] != 0.0;
    }
    let mut w: Scratch = SCRATCH;
    let w = &mut w[..n * n];
    w.copy_from_slice(&a[..n * n]);
    for (k, o) in out[..n * n].iter_mut().enumerate() {
        *o = if k / n == k % n { 1.0 } else { 0.0 };
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| w[i * n + col].abs().total_cmp(&w[j * n + col].abs())).unwrap_or(col);
        if w[piv * n + col] == 0.0 || !w[piv * n + col].is_finite() {
            return false;
        }
        if piv != col {
            for k in 0..n {
                w.swap(piv * n + k, col * n + k);
                out.swap(piv * n + k, col * n + k);
            }
        }
        let inv = 1.0 / w[col * n + col];
        for k in 0..n {
            w[col * n + k] *= inv;
            out[col * n + k] *= inv;
        }
        for r in 0..n {
            if r != col {
                let f = w[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        w[r * n + k] -= f * w[col * n + k];
                        out[r * n + k] -= f * out[col * n + k];
                    }
                }
            }
        }
    }
    true
}

/// Inverse of a small matrix, `None` if singular.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    if n == 1 {
        return if a[0] != 0.0 { Some(vec![1.0 / a[0]]) } else { None };
    }
    let mut out = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        let mut work = a.to_vec();
        col.iter_mut().enumerate().for_each(|(i, c)| *c = if i == j { 1.0 } else { 0.0 });
        if !solve_in_place(&mut work, n, &mut col) {
            return None;
        }
        for i in 0..n {
            out[i * n + j] = col[i];
        }
    }
    Some(out)
}

/// `c = a b` for square `n×n` row-major matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize, c: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            c[i * n + j] = acc;
        }
    }
}

/// Largest entry of `|a - aᵀ|`.
pub fn asymmetry(a: &[f64], n: usize) -> f64 {
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            m = m.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    m
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Smallest eigenvalue of the symmetric part of a small matrix.
pub fn min_sym_eigenvalue(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => {
            let p = a[0];
            let q = 0.5 * (a[1] + a[2]);
            let r = a[3];
            let m = 0.5 * (p + r);
            let h = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            m - h
        }
        _ => {
            let m = to_matrix(a, n);
            let s = (&m + m.transpose()) * 0.5;
            s.symmetric_eigenvalues().iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
        }
    }
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let s = (m + m.transpose()) * 0.5;
    let ev = s.symmetric_eigenvalues();
    let lo = ev.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let hi = ev.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    (lo, hi)
}

/// Checks symmetry and positive definiteness; returns the eigenvalue range.
pub fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<(f64, f64)> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric (residual {asym:e})")));
    }
    let (lo, hi) = sym_eig_range(m);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("{what} has eigenvalue {lo:e}")));
    }
    Ok((lo, hi))
}

/// Spectral condition number of an SPD matrix.
pub fn condition_spd(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = sym_eig_range(m);
    hi / lo
}

/// `m^{1/2}` and `m^{-1/2}` of an SPD matrix.
pub fn spd_sqrt_pair(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let isq = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    (q * sq * q.transpose(), q * isq * q.transpose())
}

/// Deterministic unit directions covering the sphere in `d` dimensions.
pub fn unit_directions(d: usize, count: usize) -> Vec<[f64; 3]> {
    match d {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => (0..count)
            .map(|i| {
                // half circle suffices for even quadratic forms
                let a = std::f64::consts::PI * i as f64 / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    [r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_into_matches_invert() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let mut out = [0.0; 9];
        assert!(invert_into(&a, 3, &mut out));
        let reference = invert(&a, 3).unwrap();
        for (x, y) in out.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(!invert_into(&[1.0, 2.0, 2.0, 4.0], 2, &mut out));
    }

    #[test]
    fn solve_and_invert() {
        let a = [4.0, 1.0, 2.0, 0.0, 3.0, 1.0, 1.0, 0.0, 2.0];
        let inv = invert(&a, 3).unwrap();
        let mut c = [0.0; 9];
        matmul(&a, &inv, 3, &mut c);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((c[i * 3 + j] - e).abs() < 1e-14);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn min_eigen_closed_forms_agree() {
        let a = [2.0, 0.3, 0.5, 1.0];
        let closed = min_sym_eigenvalue(&a, 2);
        let (lo, _) = sym_eig_range(&to_matrix(&a, 2));
        assert!((closed - lo).abs() < 1e-14);
    }

    #[test]
    fn spd_check() {
        assert!(check_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), "m").is_err());
        let (lo, hi) = check_spd(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]), "m").unwrap();
        assert_eq!((lo, hi), (2.0, 8.0));
        let (s, is) = spd_sqrt_pair(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));
        assert!((s[(1, 1)] - 3.0).abs() < 1e-14 && (is[(0, 0)] - 0.5).abs() < 1e-14);
    }
}
