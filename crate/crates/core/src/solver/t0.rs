use crate::besov::BlockProfile;
use crate::error::{Error, Result};
use crate::propagators::ConstantParabolicOp;
use crate::spectral::{Field, Flavor};

/// Root of an increasing function on `[lo, hi]` with `g(lo) ≤ 0 ≤ g(hi)`.
pub(crate) fn bisect_increasing<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} must be positive and finite")))
    }
}

/// `(c, C)` for [`compute_t0`] derived from the reference parabolic operator:
/// the block decay rate and the `L¹`-in-time smoothing constant.
pub fn default_t0_constants(op: &ConstantParabolicOp) -> (f64, f64) {
    let (c, _, l1) = op.smoothing_constants();
    (c, l1)
}

/// Largest `h` with `h + Σ_{j≥0}(1 − e^{−c4^j h})2^{js}‖Δ_jV₀²‖ ≤ η²/C`.
pub fn compute_t0(v0_2: &Field, s: f64, eta: f64, c: f64, big_c: f64) -> Result<f64> {
    check_positive("c", c)?;
    check_positive("C", big_c)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must lie in (0, 1)")));
    }
    let prof = BlockProfile::of(v0_2)?;
    let all = prof.n_components();
    let weighted: Vec<(f64, f64)> = prof
        .block_range(Flavor::Nonhomogeneous)
        .zip(prof.blocks(Flavor::Nonhomogeneous, 0..all))
        .filter(|(j, _)| *j >= 0)
        .map(|(j, b)| (c * 4f64.powi(j), 2f64.powf(j as f64 * s) * b))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let target = eta * eta / big_c;
    if weighted.is_empty() {
        return Ok(target);
    }
    let g = |h: f64| h + weighted.iter().map(|(rate, w)| -(-rate * h).exp_m1() * w).sum::<f64>() - target;
    Ok(bisect_increasing(g, 0.0, target))
}

/// Largest `h` with `C Σ_j (1 − e^{−c4^j h})2^{j(d/2−1)}‖Δ̇_jV₀²‖ ≤ η²`
/// (homogeneous blocks); infinite when the left side stays below `η²`.
pub fn critical_time_cap(v0_2: &Field, eta: f64, c: f64, big_c: f64) -> Result<f64> {
    check_positive("c", c)?;
    check_positive("C", big_c)?;
    let d = v0_2.grid().d as f64;
    let prof = BlockProfile::of(v0_2)?;
    let all = prof.n_components();
    let weighted: Vec<(f64, f64)> = prof
        .block_range(Flavor::Homogeneous)
        .zip(prof.blocks(Flavor::Homogeneous, 0..all))
        .map(|(j, b)| (c * 4f64.powi(j), big_c * 2f64.powf(j as f64 * (d / 2.0 - 1.0)) * b))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let target = eta * eta;
    if weighted.iter().map(|(_, w)| w).sum::<f64>() <= target {
        return Ok(f64::INFINITY);
    }
    let g = |h: f64| weighted.iter().map(|(rate, w)| -(-rate * h).exp_m1() * w).sum::<f64>() - target;
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    Ok(bisect_increasing(g, 0.0, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    #[test]
    fn zero_data_gives_target() {
        let g = GridSpec::torus(1, 64, 1).unwrap();
        let t = compute_t0(&Field::zeros(g), 1.0, 0.5, 1.0, 4.0).unwrap();
        assert_eq!(t, 0.0625);
        assert!(critical_time_cap(&Field::zeros(g), 0.5, 1.0, 4.0).unwrap().is_infinite());
    }

    #[test]
    fn rejects_bad_constants() {
        let g = GridSpec::torus(1, 64, 1).unwrap();
        assert!(compute_t0(&Field::zeros(g), 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(compute_t0(&Field::zeros(g), 1.0, 1.5, 1.0, 1.0).is_err());
    }
}
