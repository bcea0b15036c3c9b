//! Time steppers for the linear equations with coefficients frozen at a given state.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::constant::{ConstantParabolicOp, ModeMatrices};
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::spectral::{dealias, divergence, spectral_gradient, Field, GridSpec};
use crate::systems::SystemSpec;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Classical explicit RK4 (hyperbolic block).
    Rk4,
    /// Lawson integrating-factor RK2 around the reference operator (parabolic block).
    IntegratingFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenCoeffStep {
    pub scheme: Scheme,
    pub dt: f64,
    pub cfl_safety: f64,
}

impl FrozenCoeffStep {
    pub fn hyperbolic(dt: f64) -> Self {
        FrozenCoeffStep { scheme: Scheme::Rk4, dt, cfl_safety: 0.5 }
    }

    pub fn parabolic(dt: f64) -> Self {
        FrozenCoeffStep { scheme: Scheme::IntegratingFactor, dt, cfl_safety: 0.5 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {} must be positive", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::InvalidArgument(format!("cfl_safety {} must lie in (0, 1)", self.cfl_safety)));
        }
        Ok(())
    }
}

/// A field given as a function of time.
#[derive(Clone, Copy)]
pub enum TimeField<'a> {
    Fixed(&'a Field),
    /// Samples at `k·dt` starting from `t = 0`, interpolated in between.
    Sampled(&'a Trajectory),
}

impl<'a> TimeField<'a> {
    pub fn at(&self, t: f64) -> Field {
        match self {
            TimeField::Fixed(f) => (*f).clone(),
            TimeField::Sampled(tr) => tr.interpolate(t),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            TimeField::Fixed(f) => f.grid(),
            TimeField::Sampled(tr) => tr.grid(),
        }
    }
}

/// Memo of the last few coefficient evaluations, keyed on time.
struct Memo<T> {
    slots: Vec<(f64, Arc<T>)>,
}

impl<T> Memo<T> {
    fn new() -> Self {
        Memo { slots: Vec::new() }
    }

    fn get_or(&mut self, t: f64, make: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
        if let Some((_, v)) = self.slots.iter().find(|(s, _)| *s == t) {
            return Ok(v.clone());
        }
        let v = Arc::new(make()?);
        if self.slots.len() >= 3 {
            self.slots.remove(0);
        }
        self.slots.push((t, v.clone()));
        Ok(v)
    }
}

/// Runs `f(p, out, state)` for every grid point, with `width` outputs per point.
pub(crate) fn per_point<F>(u: &Field, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &[f64], &mut [f64]) + Sync + Send,
{
    let m = u.grid().points();
    let n = u.n_components();
    let mut out = vec![0.0; m * width];
    if width == 0 {
        return out;
    }
    const PTS: usize = 256;
    par::for_each_chunk_mut(&mut out, PTS * width, |ci, chunk| {
        let mut state = vec![0.0; n];
        for (k, o) in chunk.chunks_mut(width).enumerate() {
            let p = ci * PTS + k;
            u.point_values(p, &mut state);
            f(p, &state, o);
        }
    });
    out
}

/// Aborts with the worst offending point when the state leaves the phase space.
pub fn check_phase(spec: &SystemSpec, u: &Field, t: f64) -> Result<()> {
    let dist = per_point(u, 1, |_, s, o| o[0] = spec.phase_distance(s));
    let (mut worst, mut at) = (f64::INFINITY, 0);
    for (p, &v) in dist.iter().enumerate() {
        if !(v >= worst) {
            worst = v;
            at = p;
        }
    }
    if !(worst > 0.0) {
        let mut state = vec![0.0; u.n_components()];
        u.point_values(at, &mut state);
        return Err(Error::PhaseExit { t, point: at, state });
    }
    Ok(())
}

fn check_state(spec: &SystemSpec, u: &Field) -> Result<()> {
    if u.n_components() != spec.n() || u.grid().d != spec.d {
        return Err(Error::Shape(format!(
            "frozen state has {} components on a {}-dimensional grid; system needs {} in {} dimensions",
            u.n_components(),
            u.grid().d,
            spec.n(),
            spec.d
        )));
    }
    Ok(())
}

/// Pointwise `A^α = (S⁰₁₁)⁻¹S^α₁₁` and `(S⁰₁₁)⁻¹` of a frozen state.
pub struct HyperbolicCoefficients {
    n1: usize,
    d: usize,
    /// `[p][α][i][j]`
    a: Vec<f64>,
    /// `[p][i][j]`
    s11_inv: Vec<f64>,
    pub max_speed: f64,
}

impl HyperbolicCoefficients {
    pub fn build(spec: &SystemSpec, u: &Field, t: f64) -> Result<Self> {
        check_state(spec, u)?;
        check_phase(spec, u, t)?;
        let (n, n1, d) = (spec.n(), spec.n1, spec.d);
        let nn1 = n1 * n1;
        let width = nn1 * (d + 1) + 1;
        let model = spec.model();
        let dirs = linalg::unit_directions(d, 16);
        let raw = per_point(u, width, |_, s, o| {
            let (mut s0, mut s11, mut inv): (linalg::Scratch, linalg::Scratch, linalg::Scratch) =
                (linalg::SCRATCH, linalg::SCRATCH, linalg::SCRATCH);
            model.s0(s, &mut s0[..n * n]);
            for k in 0..nn1 {
                s11[k] = s0[(k / n1) * n + k % n1];
            }
            let inv = &mut inv[..nn1];
            if !linalg::invert_into(&s11[..nn1], n1, inv) {
                inv.iter_mut().for_each(|v| *v = f64::NAN);
            }
            for a in 0..d {
                model.s_alpha(s, a, &mut s0[..n * n]);
                for k in 0..nn1 {
                    s11[k] = s0[(k / n1) * n + k % n1];
                }
                linalg::matmul(inv, &s11[..nn1], n1, &mut o[a * nn1..(a + 1) * nn1]);
            }
            o[d * nn1..(d + 1) * nn1].copy_from_slice(inv);
            // spectral radius of Σ ξ_α A^α over sampled unit directions
            let speed = if n1 == 1 {
                (0..d).map(|a| o[a] * o[a]).sum::<f64>().sqrt()
            } else {
                let mut best = 0.0f64;
                for xi in &dirs {
                    let mut m = DMatrix::zeros(n1, n1);
                    for a in 0..d {
                        m += linalg::to_matrix(&o[a * nn1..(a + 1) * nn1], n1) * xi[a];
                    }
                    let r = m.complex_eigenvalues().iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
                    best = best.max(r);
                }
                best
            };
            o[width - 1] = speed;
        });
        let m = u.grid().points();
        let mut a = Vec::with_capacity(m * d * nn1);
        let mut s11_inv = Vec::with_capacity(m * nn1);
        let mut max_speed = 0.0f64;
        for (p, row) in raw.chunks(width).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NotPositiveDefinite(format!("S0_11 singular at grid point {p}")));
            }
            a.extend_from_slice(&row[..d * nn1]);
            s11_inv.extend_from_slice(&row[d * nn1..(d + 1) * nn1]);
            max_speed = max_speed.max(row[width - 1]);
        }
        Ok(HyperbolicCoefficients { n1, d, a, s11_inv, max_speed })
    }

    /// Largest admissible step for the given grid and safety factor.
    pub fn admissible_dt(&self, grid: &GridSpec, safety: f64) -> f64 {
        if self.max_speed > 0.0 {
            safety * grid.dx() / self.max_speed
        } else {
            f64::INFINITY
        }
    }

    /// `−Σ A^α ∂_α V + (S⁰₁₁)⁻¹Θ`, dealiased.
    fn rhs(&self, v: &Field, theta: Option<&Field>) -> Field {
        let g = *v.grid();
        let (n1, d) = (self.n1, self.d);
        let m = g.points();
        let grad = spectral_gradient(v);
        let gv = grad.values();
        let th = theta.map(|t| t.values());
        let nn1 = n1 * n1;
        let mut out = vec![0.0; n1 * m];
        par::fill(&mut out, |idx| {
            let i = idx / m;
            let p = idx % m;
            let mut acc = 0.0;
            for a in 0..d {
                let row = &self.a[p * d * nn1 + a * nn1 + i * n1..p * d * nn1 + a * nn1 + (i + 1) * n1];
                for (j, &aij) in row.iter().enumerate() {
                    acc -= aij * gv[(a * n1 + j) * m + p];
                }
            }
            if let Some(th) = th {
                let row = &self.s11_inv[p * nn1 + i * n1..p * nn1 + (i + 1) * n1];
                for (j, &sij) in row.iter().enumerate() {
                    acc += sij * th[j * m + p];
                }
            }
            acc
        });
        dealias(&Field::new(g, out).expect("shape by construction"))
    }
}

/// Explicit RK4 for `S⁰₁₁(U)∂_tV + ΣS^α₁₁(U)∂_αV = Θ`, with `U` and `Θ` given
/// as functions of time. Returns every step, starting at `t0`.
pub fn integrate_hyperbolic(
    spec: &SystemSpec,
    v0: &Field,
    coeff: TimeField,
    source: Option<TimeField>,
    step: &FrozenCoeffStep,
    t0: f64,
    steps: usize,
) -> Result<Trajectory> {
    step.validate()?;
    if v0.n_components() != spec.n1 {
        return Err(Error::Shape(format!("V1 has {} components, system n1 = {}", v0.n_components(), spec.n1)));
    }
    let g = *v0.grid();
    let dt = step.dt;
    let mut memo = Memo::new();
    let mut coeffs_at = |t: f64| -> Result<Arc<HyperbolicCoefficients>> {
        memo.get_or(t, || {
            let c = HyperbolicCoefficients::build(spec, &coeff.at(t), t)?;
            let adm = c.admissible_dt(&g, step.cfl_safety);
            if dt > adm {
                return Err(Error::Cfl { dt, admissible: adm });
            }
            Ok(c)
        })
    };
    let src = |t: f64| source.map(|s| s.at(t));
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = v0.clone();
    out.push(v.clone());
    for k in 0..steps {
        // end times computed from k + 1 so the memo hits on the next step
        let (t, t_next) = (t0 + k as f64 * dt, t0 + (k + 1) as f64 * dt);
        let (c0, c1, c2) = (coeffs_at(t)?, coeffs_at(t + 0.5 * dt)?, coeffs_at(t_next)?);
        let (s0, s1, s2) = (src(t), src(t + 0.5 * dt), src(t_next));
        let k1 = c0.rhs(&v, s0.as_ref());
        let k2 = c1.rhs(&v.axpy(0.5 * dt, &k1), s1.as_ref());
        let k3 = c1.rhs(&v.axpy(0.5 * dt, &k2), s1.as_ref());
        let k4 = c2.rhs(&v.axpy(dt, &k3), s2.as_ref());
        v = v.axpy(dt / 6.0, &k1).axpy(dt / 3.0, &k2).axpy(dt / 3.0, &k3).axpy(dt / 6.0, &k4);
        v.check_finite()?;
        out.push(v.clone());
    }
    Trajectory::new(dt, out)
}

/// One RK4 step with coefficients and source frozen in time.
pub fn step_linear_hyperbolic(
    spec: &SystemSpec,
    v1: &Field,
    u_frozen: &Field,
    theta1: &Field,
    step: &FrozenCoeffStep,
) -> Result<Field> {
    let tr = integrate_hyperbolic(spec, v1, TimeField::Fixed(u_frozen), Some(TimeField::Fixed(theta1)), step, 0.0, 1)?;
    Ok(tr.last().clone())
}

/// Pointwise data of the parabolic block at a frozen state:
/// `S⁰₂₂(U)⁻¹`, `S⁰₂₂(U)⁻¹ − S̄⁻¹` and `Z^{αβ}(U) − Z̄^{αβ}`.
pub struct ParabolicCoefficients {
    n2: usize,
    d: usize,
    s_inv: Vec<f64>,
    ds_inv: Option<Vec<f64>>,
    dz: Option<Vec<f64>>,
    /// Smallest sampled ellipticity ratio over grid points.
    pub min_ellipticity: f64,
}

impl ParabolicCoefficients {
    pub fn build(spec: &SystemSpec, op: &ConstantParabolicOp, u: &Field, t: f64) -> Result<Self> {
        check_state(spec, u)?;
        check_phase(spec, u, t)?;
        let (n, n1, n2, d) = (spec.n(), spec.n1, spec.n2, spec.d);
        let nn2 = n2 * n2;
        let zw = d * d * nn2;
        let width = 2 * nn2 + zw + 1;
        let model = spec.model();
        let s_bar_inv = linalg::from_matrix(&op.s_bar.clone().try_inverse().expect("S_bar is SPD"));
        let z_bar: Vec<f64> = op.z_bar.iter().flat_map(linalg::from_matrix).collect();
        let dirs = linalg::unit_directions(d, 8);
        let raw = per_point(u, width, |_, s, o| {
            let (mut s0, mut s22, mut inv): (linalg::Scratch, linalg::Scratch, linalg::Scratch) =
                (linalg::SCRATCH, linalg::SCRATCH, linalg::SCRATCH);
            model.s0(s, &mut s0[..n * n]);
            for k in 0..nn2 {
                s22[k] = s0[(n1 + k / n2) * n + n1 + k % n2];
            }
            let inv = &mut inv[..nn2];
            if !linalg::invert_into(&s22[..nn2], n2, inv) {
                inv.iter_mut().for_each(|v| *v = f64::NAN);
            }
            o[..nn2].copy_from_slice(inv);
            for k in 0..nn2 {
                o[nn2 + k] = inv[k] - s_bar_inv[k];
            }
            let z = &mut o[2 * nn2..2 * nn2 + zw];
            for a in 0..d {
                for b in 0..d {
                    model.z(s, a, b, &mut z[(a * d + b) * nn2..(a * d + b + 1) * nn2]);
                }
            }
            let mut ell = f64::INFINITY;
            let mut sym: linalg::Scratch = linalg::SCRATCH;
            let sym = &mut sym[..nn2];
            for xi in &dirs {
                sym.iter_mut().for_each(|v| *v = 0.0);
                for a in 0..d {
                    for b in 0..d {
                        let w = xi[a] * xi[b];
                        for k in 0..nn2 {
                            sym[k] += w * z[(a * d + b) * nn2 + k];
                        }
                    }
                }
                ell = ell.min(linalg::min_sym_eigenvalue(&sym, n2));
            }
            for k in 0..zw {
                z[k] -= z_bar[k];
            }
            o[width - 1] = ell;
        });
        let m = u.grid().points();
        let mut s_inv = Vec::with_capacity(m * nn2);
        let mut ds_inv = Vec::with_capacity(m * nn2);
        let mut dz = Vec::with_capacity(m * zw);
        let mut min_ell = f64::INFINITY;
        let mut worst = 0;
        for (p, row) in raw.chunks(width).enumerate() {
            if row[..nn2].iter().any(|v| !v.is_finite()) {
                return Err(Error::NotPositiveDefinite(format!("S0_22 singular at grid point {p}")));
            }
            s_inv.extend_from_slice(&row[..nn2]);
            ds_inv.extend_from_slice(&row[nn2..2 * nn2]);
            dz.extend_from_slice(&row[2 * nn2..2 * nn2 + zw]);
            if row[width - 1] < min_ell {
                min_ell = row[width - 1];
                worst = p;
            }
        }
        if !(min_ell > 0.0) {
            let mut state = vec![0.0; n];
            u.point_values(worst, &mut state);
            return Err(Error::Ellipticity(format!(
                "Z(U)(xi) loses positivity ({min_ell:e}) at t = {t}, grid point {worst}, state {state:?}"
            )));
        }
        let nonzero = |v: &[f64]| v.iter().any(|x| *x != 0.0);
        Ok(ParabolicCoefficients {
            n2,
            d,
            s_inv,
            ds_inv: if nonzero(&ds_inv) { Some(ds_inv) } else { None },
            dz: if nonzero(&dz) { Some(dz) } else { None },
            min_ellipticity: min_ell,
        })
    }

    /// `S(U)⁻¹[div((Z(U) − Z̄)∇V) + Θ] − (S(U)⁻¹ − S̄⁻¹)Z̄(D)V`, dealiased.
    fn nonlinear(&self, op: &ConstantParabolicOp, v: &Field, theta: Option<&Field>) -> Field {
        let g = *v.grid();
        let (n2, d) = (self.n2, self.d);
        let nn2 = n2 * n2;
        let m = g.points();
        let div = self.dz.as_ref().map(|dz| {
            let grad = spectral_gradient(v);
            let gv = grad.values();
            let mut flux = vec![0.0; d * n2 * m];
            par::fill(&mut flux, |idx| {
                let comp = idx / m;
                let p = idx % m;
                let (a, i) = (comp / n2, comp % n2);
                let mut acc = 0.0;
                for b in 0..d {
                    let z = &dz[p * d * d * nn2 + (a * d + b) * nn2 + i * n2..][..n2];
                    for (j, &zij) in z.iter().enumerate() {
                        acc += zij * gv[(b * n2 + j) * m + p];
                    }
                }
                acc
            });
            let flux = dealias(&Field::new(g.with_components(d * n2), flux).expect("shape"));
            divergence(&flux, n2)
        });
        let q = self.ds_inv.as_ref().map(|_| op.apply_symbol(v));
        let (dv, qv, th) = (div.as_ref().map(|f| f.values()), q.as_ref().map(|f| f.values()), theta.map(|t| t.values()));
        let mut out = vec![0.0; n2 * m];
        par::fill(&mut out, |idx| {
            let i = idx / m;
            let p = idx % m;
            let mut acc = 0.0;
            let s = &self.s_inv[p * nn2 + i * n2..][..n2];
            for j in 0..n2 {
                let mut r = 0.0;
                if let Some(dv) = dv {
                    r += dv[j * m + p];
                }
                if let Some(th) = th {
                    r += th[j * m + p];
                }
                acc += s[j] * r;
            }
            if let (Some(ds), Some(qv)) = (self.ds_inv.as_ref(), qv) {
                let row = &ds[p * nn2 + i * n2..][..n2];
                for j in 0..n2 {
                    acc -= row[j] * qv[j * m + p];
                }
            }
            acc
        });
        dealias(&Field::new(g.with_components(n2), out).expect("shape"))
    }
}

/// Lawson IF-RK2 for `S⁰₂₂(U)∂_tV − Σ∂_α(Z^{αβ}(U)∂_βV) = Θ`: the reference
/// operator `op` is integrated exactly, the remainder explicitly.
#[allow(clippy::too_many_arguments)]
pub fn integrate_parabolic(
    spec: &SystemSpec,
    op: &ConstantParabolicOp,
    v0: &Field,
    coeff: TimeField,
    source: Option<TimeField>,
    step: &FrozenCoeffStep,
    t0: f64,
    steps: usize,
) -> Result<Trajectory> {
    step.validate()?;
    if v0.n_components() != spec.n2 || op.n2 != spec.n2 {
        return Err(Error::Shape(format!("V2 has {} components, system n2 = {}", v0.n_components(), spec.n2)));
    }
    let dt = step.dt;
    let e: ModeMatrices = op.decompose(v0.grid()).propagator(dt);
    let mut memo = Memo::new();
    let mut coeffs_at = |t: f64| memo.get_or(t, || ParabolicCoefficients::build(spec, op, &coeff.at(t), t));
    let src = |t: f64| source.map(|s| s.at(t));
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = v0.clone();
    out.push(v.clone());
    for k in 0..steps {
        let (t, t_next) = (t0 + k as f64 * dt, t0 + (k + 1) as f64 * dt);
        let (c0, c1) = (coeffs_at(t)?, coeffs_at(t_next)?);
        let k1 = c0.nonlinear(op, &v, src(t).as_ref());
        let w = e.apply(&v.axpy(dt, &k1));
        let k2 = c1.nonlinear(op, &w, src(t_next).as_ref());
        v = e.apply(&v.axpy(0.5 * dt, &k1)).axpy(0.5 * dt, &k2);
        v.check_finite()?;
        out.push(v.clone());
    }
    Trajectory::new(dt, out)
}

/// One integrating-factor step with coefficients and source frozen in time.
pub fn step_linear_parabolic_variable(
    spec: &SystemSpec,
    op: &ConstantParabolicOp,
    v2: &Field,
    u_frozen: &Field,
    theta2: &Field,
    step: &FrozenCoeffStep,
) -> Result<Field> {
    let tr =
        integrate_parabolic(spec, op, v2, TimeField::Fixed(u_frozen), Some(TimeField::Fixed(theta2)), step, 0.0, 1)?;
    Ok(tr.last().clone())
}
