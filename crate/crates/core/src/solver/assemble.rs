//! Pointwise assembly of iteration sources, nonlinear residuals and
//! coefficient-derived fields.

use crate::error::Result;
use crate::linalg::{Scratch, SCRATCH};
use crate::propagators::per_point;
use crate::spectral::{dealias, divergence, spectral_gradient, Field};
use crate::systems::SystemSpec;
use crate::trajectory::Trajectory;

/// `Ū + V`.
pub fn with_reference(spec: &SystemSpec, v: &Field) -> Field {
    Field::constant(*v.grid(), &spec.u_bar).add(v)
}

fn stacked(parts: &[&Field]) -> Result<Field> {
    Field::concat(parts)
}

/// Sources of the next iterate, frozen at `U = Ū + V`:
/// `Θ¹ = f¹ − Σ S^α₁₂(U)∂_αV²` and `Θ² = f² − Σ(S^α₂₁(U)∂_αV¹ + S^α₂₂(U)∂_αV²)`.
pub fn iteration_sources(spec: &SystemSpec, v: &Field) -> Result<(Field, Field)> {
    let (n, n1, d) = (spec.n(), spec.n1, spec.d);
    let u = with_reference(spec, v);
    let grad = spectral_gradient(v);
    let cat = stacked(&[&u, &grad])?;
    let model = spec.model();
    let with_source = model.has_source();
    let raw = per_point(&cat, n, |_, s, o| {
        let (state, g) = s.split_at(n);
        if with_source {
            o.copy_from_slice(&spec.source(state, g).total());
        } else {
            o.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut sa: Scratch = SCRATCH;
        for a in 0..d {
            model.s_alpha(state, a, &mut sa[..n * n]);
            for i in 0..n {
                // the transported rows only see the diffused block
                let cols = if i < n1 { n1..n } else { 0..n };
                for j in cols {
                    o[i] -= sa[i * n + j] * g[a * n + j];
                }
            }
        }
    });
    let m = u.grid().points();
    let mut values = vec![0.0; n * m];
    for (p, row) in raw.chunks(n).enumerate() {
        for c in 0..n {
            values[c * m + p] = row[c];
        }
    }
    let theta = dealias(&Field::new(u.grid().with_components(n), values)?);
    Ok((theta.select(0..n1), theta.select(n1..n)))
}

/// Transposes point-major rows (`width` per point) into a component-major field.
pub(crate) fn field_from_rows(like: &Field, rows: &[f64], width: usize) -> Result<Field> {
    let m = like.grid().points();
    let mut values = vec![0.0; width * m];
    for (p, row) in rows.chunks(width).enumerate() {
        for c in 0..width {
            values[c * m + p] = row[c];
        }
    }
    Field::new(like.grid().with_components(width), values)
}

/// `Σ_α ∂_α(Σ_β Z^{αβ}(U)∂_βW)` for a diffused-block field `W`.
pub fn diffusion_term(spec: &SystemSpec, u: &Field, w: &Field) -> Result<Field> {
    let (n, n2, d) = (spec.n(), spec.n2, spec.d);
    let grad = spectral_gradient(w);
    let cat = stacked(&[u, &grad])?;
    let model = spec.model();
    let rows = per_point(&cat, d * n2, |_, s, o| {
        let (state, g) = s.split_at(n);
        let mut z: Scratch = SCRATCH;
        let z = &mut z[..n2 * n2];
        o.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..d {
            for b in 0..d {
                model.z(state, a, b, z);
                for i in 0..n2 {
                    for j in 0..n2 {
                        o[a * n2 + i] += z[i * n2 + j] * g[b * n2 + j];
                    }
                }
            }
        }
    });
    let flux = field_from_rows(u, &rows, d * n2)?;
    Ok(divergence(&flux, n2))
}

/// Pointwise residual of the full nonlinear system for `V`, given `∂_tV`:
/// `S⁰(U)∂_tV + ΣS^α(U)∂_αV − (0, div(Z(U)∇V²)) − f(U, ∇U)`, dealiased.
pub fn residual_field(spec: &SystemSpec, v: &Field, dv: &Field) -> Result<Field> {
    let (n, n1, d) = (spec.n(), spec.n1, spec.d);
    let u = with_reference(spec, v);
    let grad = spectral_gradient(v);
    let diff = diffusion_term(spec, &u, &v.select(n1..n))?;
    let cat = stacked(&[&u, &grad, dv, &diff])?;
    let model = spec.model();
    let with_source = model.has_source();
    let rows = per_point(&cat, n, |_, s, o| {
        let state = &s[..n];
        let g = &s[n..n + d * n];
        let dt = &s[n + d * n..2 * n + d * n];
        let df = &s[2 * n + d * n..];
        let mut mat: Scratch = SCRATCH;
        let mat = &mut mat[..n * n];
        model.s0(state, mat);
        for i in 0..n {
            o[i] = (0..n).map(|j| mat[i * n + j] * dt[j]).sum();
        }
        for a in 0..d {
            model.s_alpha(state, a, mat);
            for i in 0..n {
                o[i] += (0..n).map(|j| mat[i * n + j] * g[a * n + j]).sum::<f64>();
            }
        }
        for i in n1..n {
            o[i] -= df[i - n1];
        }
        if with_source {
            for (oi, fi) in o.iter_mut().zip(spec.source(state, g).total()) {
                *oi -= fi;
            }
        }
    });
    Ok(dealias(&field_from_rows(v, &rows, n)?))
}

/// `‖r(t_k)‖_{L²}` at every sample, with second-order finite differences in time.
pub fn residual_series(spec: &SystemSpec, v: &Trajectory) -> Result<Vec<f64>> {
    let dv = v.time_derivative()?;
    let idx: Vec<usize> = (0..v.len()).collect();
    crate::par::map_slice(&idx, |&k| residual_field(spec, v.field(k), dv.field(k)).map(|r| r.l2_norm()))
        .into_iter()
        .collect()
}

/// `(S⁰₂₂(U_m) − S⁰₂₂(U))∂_tV² + div((Z(U) − Z(U_m))∇V²)`: the terms moved to the
/// right-hand side when the diffused block is frozen at `U_m` instead of `U`.
pub fn frozen_correction(spec: &SystemSpec, u_m: &Field, u: &Field, v2: &Field, dv2: &Field) -> Result<Field> {
    let (n, n1, n2) = (spec.n(), spec.n1, spec.n2);
    let div_u = diffusion_term(spec, u, v2)?;
    let div_m = diffusion_term(spec, u_m, v2)?;
    let cat = stacked(&[u_m, u, dv2])?;
    let model = spec.model();
    let rows = per_point(&cat, n2, |_, s, o| {
        let (mut a, mut b): (Scratch, Scratch) = (SCRATCH, SCRATCH);
        model.s0(&s[..n], &mut a[..n * n]);
        model.s0(&s[n..2 * n], &mut b[..n * n]);
        let dt = &s[2 * n..];
        for i in 0..n2 {
            o[i] = (0..n2).map(|j| (a[(n1 + i) * n + n1 + j] - b[(n1 + i) * n + n1 + j]) * dt[j]).sum();
        }
    });
    let s_part = field_from_rows(v2, &rows, n2)?;
    Ok(dealias(&s_part.add(&div_u).sub(&div_m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{assemble_barotropic, PressureLaw, Transport};
    use crate::spectral::GridSpec;

    fn baro() -> SystemSpec {
        assemble_barotropic(
            1,
            PressureLaw { a: 1.0, gamma: 2.0 },
            Transport { mu: 1.0, lambda: 0.0, beta: 0.0 },
            1.0,
            (0.2, 5.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_state_has_zero_sources_and_residual() {
        let spec = baro();
        let g = GridSpec::torus(1, 32, 2).unwrap();
        let v = Field::zeros(g);
        let (t1, t2) = iteration_sources(&spec, &v).unwrap();
        assert!(t1.is_zero() && t2.is_zero());
        assert_eq!(residual_field(&spec, &v, &v).unwrap().l2_norm(), 0.0);
    }

    #[test]
    fn acoustic_sources_match_hand_computation() {
        // barotropic d = 1, ρ = ρ̄ = 1, P(ρ) = ρ²: Θ¹ = −P'(1)∂_xu and Θ² = −u∂_xu
        let spec = baro();
        let g = GridSpec::torus(1, 32, 2).unwrap();
        let eps = 1e-3;
        let v = Field::from_fn(g, |x, c| if c == 0 { 0.0 } else { eps * x[0].sin() });
        let (t1, t2) = iteration_sources(&spec, &v).unwrap();
        let g1 = g.with_components(1);
        let e1 = Field::from_fn(g1, |x, _| -2.0 * eps * x[0].cos());
        let e2 = Field::from_fn(g1, |x, _| -eps * eps * x[0].sin() * x[0].cos());
        assert!(t1.sub(&e1).max_abs() < 1e-14);
        assert!(t2.sub(&e2).max_abs() < 1e-16);
    }
}
