//! Fourier multipliers: dyadic blocks, cutoffs, derivatives, dealiasing.

use num_complex::Complex64;

use super::field::Field;
use super::filter::{BlockIndex, FilterBank, Flavor};
use super::grid::GridSpec;
use crate::error::Result;
use crate::par;

/// Applies the same real multiplier to every component.
pub fn apply_real_multiplier(u: &Field, mult: &[f64]) -> Field {
    let g = *u.grid();
    let m = g.points();
    assert_eq!(mult.len(), m);
    let spec = u.spectrum();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    par::fill(&mut out, |i| spec[i] * mult[i % m]);
    Field::from_spectrum(g, out)
}

/// `Δ_j u` or `Δ̇_j u`; blocks outside the resolved range give the zero field.
pub fn dyadic_block(u: &Field, b: BlockIndex) -> Result<Field> {
    let bank = FilterBank::for_grid(u.grid())?;
    Ok(match bank.multiplier(b) {
        Some(mult) => apply_real_multiplier(u, mult),
        None => Field::zeros(*u.grid()),
    })
}

/// `Ṡ_m u` (homogeneous flavor) or `S_m u` (nonhomogeneous flavor).
pub fn low_freq_cutoff(u: &Field, m: i32, flavor: Flavor) -> Result<Field> {
    let bank = FilterBank::for_grid(u.grid())?;
    let g = u.grid();
    let top = g.nyquist() * (g.d as f64).sqrt();
    if 0.75 * 2f64.powi(m) >= top {
        return Ok(u.clone());
    }
    let mult = bank.cutoff_multiplier(m, flavor);
    Ok(apply_real_multiplier(u, &mult))
}

/// All first derivatives; component `alpha * n + c` holds `∂_alpha u^c`.
pub fn spectral_gradient(u: &Field) -> Field {
    let g = *u.grid();
    let n = g.n;
    let m = g.points();
    let spec = u.spectrum();
    let out_grid = g.with_components(g.d * n);
    let mut out = vec![Complex64::new(0.0, 0.0); m * n * g.d];
    par::fill(&mut out, |i| {
        let comp = i / m;
        let p = i % m;
        let alpha = comp / n;
        let c = comp % n;
        let xi = g.derivative_symbol(p, alpha);
        spec[c * m + p] * Complex64::new(0.0, xi)
    });
    Field::from_spectrum(out_grid, out)
}

/// `∂_alpha` of every component.
pub fn partial(u: &Field, alpha: usize) -> Field {
    let g = *u.grid();
    let m = g.points();
    let spec = u.spectrum();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    par::fill(&mut out, |i| spec[i] * Complex64::new(0.0, g.derivative_symbol(i % m, alpha)));
    Field::from_spectrum(g, out)
}

/// Divergence of a flux stored as `d` blocks of `n` components (`alpha * n + c`).
pub fn divergence(flux: &Field, n: usize) -> Field {
    let g = *flux.grid();
    assert_eq!(g.n, g.d * n, "flux must carry d * n components");
    let m = g.points();
    let spec = flux.spectrum();
    let out_grid = g.with_components(n);
    let mut out = vec![Complex64::new(0.0, 0.0); n * m];
    par::fill(&mut out, |i| {
        let c = i / m;
        let p = i % m;
        let mut acc = Complex64::new(0.0, 0.0);
        for alpha in 0..g.d {
            let xi = g.derivative_symbol(p, alpha);
            acc += spec[(alpha * n + c) * m + p] * Complex64::new(0.0, xi);
        }
        acc
    });
    Field::from_spectrum(out_grid, out)
}

/// 2/3-rule truncation.
pub fn dealias(u: &Field) -> Field {
    let g = *u.grid();
    let m = g.points();
    let spec = u.spectrum();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    par::fill(&mut out, |i| {
        if g.is_dealiased_mode(i % m) {
            spec[i]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Field::from_spectrum(g, out)
}

/// Fraction of spectral energy (Parseval) above the partition's guard radius.
pub fn energy_above(u: &Field, radius: f64) -> f64 {
    let g = u.grid();
    let m = g.points();
    let spec = u.spectrum();
    let mut above = 0.0;
    let mut total = 0.0;
    for (i, z) in spec.iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if g.freq_norm(i % m) > radius {
            above += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        above / total
    }
}

/// Trigonometric interpolation onto `n_points` per axis. Modes that do not fit
/// the target grid (and the Nyquist modes of either grid) are dropped.
pub fn resample(u: &Field, n_points: usize) -> Result<Field> {
    let g = *u.grid();
    let target = GridSpec { n_points, ..g };
    target.validate()?;
    let (m_old, m_new) = (g.points(), target.points());
    let half = (g.n_points.min(n_points) / 2) as i64;
    let spec = u.spectrum();
    let mut out = vec![Complex64::new(0.0, 0.0); m_new * g.n];
    let scale = m_new as f64 / m_old as f64;
    for p in 0..m_old {
        let k = g.integer_wavevector(p);
        if k[..g.d].iter().any(|&ka| ka.abs() >= half) {
            continue;
        }
        let mut q = 0usize;
        for &ka in &k[..g.d] {
            q = q * n_points + ka.rem_euclid(n_points as i64) as usize;
        }
        for c in 0..g.n {
            out[c * m_new + q] = spec[c * m_old + p] * scale;
        }
    }
    Ok(Field::from_spectrum(target, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    #[test]
    fn gradient_of_sine() {
        let g = GridSpec::new(1, 32, 3.0, 1).unwrap();
        let w = 2.0 * std::f64::consts::PI / 3.0;
        let u = Field::from_fn(g, |x, _| (w * x[0]).sin());
        let du = spectral_gradient(&u);
        let g2 = *du.grid();
        let expect = Field::from_fn(g2, |x, _| w * (w * x[0]).cos());
        assert!(du.sub(&expect).l2_norm() <= 1e-12 * expect.l2_norm());
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = GridSpec::torus(2, 16, 1).unwrap();
        let u = Field::from_fn(g, |x, _| (2.0 * x[0]).cos() * (3.0 * x[1]).sin());
        let lap = divergence(&spectral_gradient(&u), 1);
        let expect = u.scale(-13.0);
        assert!(lap.sub(&expect).max_abs() < 1e-11);
    }

    #[test]
    fn dealias_removes_top_third() {
        let g = GridSpec::torus(1, 32, 1).unwrap();
        let u = Field::from_fn(g, |x, _| (12.0 * x[0]).cos() + (3.0 * x[0]).cos());
        let v = dealias(&u);
        let expect = Field::from_fn(g, |x, _| (3.0 * x[0]).cos());
        assert!(v.sub(&expect).max_abs() < 1e-13);
    }

    #[test]
    fn cutoff_identity_above_band() {
        let g = GridSpec::torus(1, 32, 1).unwrap();
        let u = Field::from_fn(g, |x, _| (5.0 * x[0]).sin());
        let v = low_freq_cutoff(&u, 10, Flavor::Homogeneous).unwrap();
        assert_eq!(v.values(), u.values());
        let z = low_freq_cutoff(&u, -1, Flavor::Nonhomogeneous).unwrap();
        assert!(z.max_abs() == 0.0);
    }

    #[test]
    fn resample_round_trip() {
        let g = GridSpec::torus(2, 16, 2).unwrap();
        let u = Field::from_fn(g, |x, c| (2.0 * x[0]).cos() * (3.0 * x[1] + c as f64).sin() + 0.5);
        let fine = resample(&u, 32).unwrap();
        let expect = Field::from_fn(*fine.grid(), |x, c| (2.0 * x[0]).cos() * (3.0 * x[1] + c as f64).sin() + 0.5);
        assert!(fine.sub(&expect).max_abs() < 1e-13);
        assert!(resample(&fine, 16).unwrap().sub(&u).max_abs() < 1e-13);
    }
}
