//! Coercivity of the variable-coefficient diffusion form.

use serde::{Deserialize, Serialize};

use super::{InequalityReport, Instance};
use crate::error::{Error, Result};
use crate::linalg::{Scratch, SCRATCH};
use crate::propagators::{check_phase, per_point};
use crate::spectral::{dyadic_block, partial, BlockIndex, Field, FilterBank, Flavor};
use crate::systems::{check_strong_ellipticity, random_vectors, SystemSpec};

/// The quantities entering the Gårding inequality for one test field `f`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GardingTerms {
    /// `−Σ ∫ f·Z^{αβ}(U)∂_α∂_β f`.
    pub form: f64,
    pub grad_sq: f64,
    /// `‖∇²f‖_{L²}` over all second derivatives.
    pub hessian: f64,
    pub l2_sq: f64,
}

/// `U` is a full state field (`n` components), `f` has `n2` components.
pub fn garding_terms(spec: &SystemSpec, u: &Field, f: &Field) -> Result<GardingTerms> {
    let (n, n2, d) = (spec.n(), spec.n2, spec.d);
    if u.n_components() != n || f.n_components() != n2 || !u.grid().same_space(f.grid()) {
        return Err(Error::Shape(format!("Gårding needs U with {n} and f with {n2} components on one grid")));
    }
    let grads: Vec<Field> = (0..d).map(|a| partial(f, a)).collect();
    let mut hess = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            hess.push(partial(&grads[a], b));
        }
    }
    let mut parts: Vec<&Field> = vec![u, f];
    parts.extend(hess.iter());
    let cat = Field::concat(&parts)?;
    let model = spec.model();
    let dens = per_point(&cat, 1, |_, s, o| {
        let state = &s[..n];
        let fv = &s[n..n + n2];
        let h = &s[n + n2..];
        let mut z: Scratch = SCRATCH;
        let z = &mut z[..n2 * n2];
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                model.z(state, a, b, z);
                let hab = &h[(a * d + b) * n2..(a * d + b + 1) * n2];
                for i in 0..n2 {
                    for j in 0..n2 {
                        acc += fv[i] * z[i * n2 + j] * hab[j];
                    }
                }
            }
        }
        o[0] = -acc;
    });
    let vol = u.grid().cell_volume();
    let grad_sq = grads.iter().map(|g| g.l2_norm().powi(2)).sum();
    let hessian = hess.iter().map(|h| h.l2_norm().powi(2)).sum::<f64>().sqrt();
    Ok(GardingTerms { form: dens.iter().sum::<f64>() * vol, grad_sq, hessian, l2_sq: f.l2_norm().powi(2) })
}

/// Sampled ellipticity constant of `Z` along the values of `U`.
fn ellipticity_along(spec: &SystemSpec, u: &Field) -> Result<f64> {
    let m = u.grid().points();
    let stride = (m / 512).max(1);
    let mut states = Vec::new();
    let mut buf = vec![0.0; spec.n()];
    for p in (0..m).step_by(stride) {
        u.point_values(p, &mut buf);
        states.push(buf.clone());
    }
    let xi = random_vectors(spec.d, 2048, 11);
    let lam = random_vectors(spec.n2, 2048, 12);
    Ok(check_strong_ellipticity(spec, &states, &xi, &lam)?.c1_hat)
}

fn validate_state(spec: &SystemSpec, u: &Field) -> Result<()> {
    u.check_finite()?;
    check_phase(spec, u, 0.0)
}

/// `−Σ∫Z^{αβ}_{ij}(U)∂_α∂_βf^i f^j ≥ c‖∇f‖² − ε‖∇²f‖‖f‖ − C‖f‖²` over `fs`, with
/// `c` the sampled ellipticity constant along `U`. Each instance carries the
/// deficit `c‖∇f‖² − ε‖∇²f‖‖f‖ − form` against `‖f‖²`, so the fitted constant
/// is the smallest `C` that makes every instance hold.
pub fn verify_garding(spec: &SystemSpec, u: &Field, fs: &[Field], epsilon: f64) -> Result<InequalityReport> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    validate_state(spec, u)?;
    let c = ellipticity_along(spec, u)?;
    let terms: Vec<GardingTerms> =
        crate::par::map_slice(fs, |f| garding_terms(spec, u, f)).into_iter().collect::<Result<_>>()?;
    let instances = terms
        .iter()
        .enumerate()
        .map(|(k, t)| Instance {
            label: format!("f{k}"),
            lhs: c * t.grad_sq - epsilon * t.hessian * t.l2_sq.sqrt() - t.form,
            rhs: t.l2_sq,
        })
        .collect();
    let mut r = InequalityReport::from_instances(format!("garding eps={epsilon}"), instances);
    r.extras.push(("c".into(), c));
    r.extras.push(("epsilon".into(), epsilon));
    Ok(r)
}

/// The block-localized consequence: for `j ≥ 0`,
/// `−Σ∫Z(U)∂∂f_j·f_j ≥ (c/2)4^j‖f_j‖² − C‖f_j‖²` with `f_j = Δ_jf`.
pub fn verify_garding_localized(spec: &SystemSpec, u: &Field, fs: &[Field]) -> Result<InequalityReport> {
    validate_state(spec, u)?;
    let c = ellipticity_along(spec, u)?;
    let bank = FilterBank::for_grid(u.grid())?;
    let k0sq = u.grid().k0().powi(2);
    let mut jobs = Vec::new();
    for (k, f) in fs.iter().enumerate() {
        for j in 0..=bank.j_max {
            jobs.push((k, f, j));
        }
    }
    let instances: Vec<Instance> = crate::par::map_slice(&jobs, |&(k, f, j)| {
        let fj = dyadic_block(f, BlockIndex { j, flavor: Flavor::Nonhomogeneous })?;
        let t = garding_terms(spec, u, &fj)?;
        // 4^j in physical frequency units
        let gain = 0.5 * c * 4f64.powi(j) * k0sq;
        Ok(Instance { label: format!("f{k} j={j}"), lhs: gain * t.l2_sq - t.form, rhs: t.l2_sq })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut r = InequalityReport::from_instances("garding-localized", instances);
    r.extras.push(("c".into(), c));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;
    use crate::systems::{assemble_barotropic, PressureLaw, Transport};

    #[test]
    fn constant_state_single_mode_is_exact() {
        // μ = 1, λ = 0, d = 1: Z = 2μ, form = 2k²‖f‖²
        let spec = assemble_barotropic(
            1,
            PressureLaw { a: 1.0, gamma: 2.0 },
            Transport { mu: 1.0, lambda: 0.0, beta: 0.0 },
            1.0,
            (0.1, 10.0),
        )
        .unwrap();
        let g = GridSpec::torus(1, 32, 2).unwrap();
        let u = Field::constant(g, &[1.0, 0.0]);
        let f = Field::from_fn(g.with_components(1), |x, _| (3.0 * x[0]).sin());
        let t = garding_terms(&spec, &u, &f).unwrap();
        assert!((t.form - 2.0 * 9.0 * t.l2_sq).abs() < 1e-11 * t.form);
        let zero = garding_terms(&spec, &u, &Field::zeros(g.with_components(1))).unwrap();
        assert_eq!((zero.form, zero.grad_sq, zero.l2_sq), (0.0, 0.0, 0.0));
    }
}
