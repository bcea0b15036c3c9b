//! Hyperbolic-parabolic systems in normal form
//! `S⁰(U)∂_t V + Σ S^α(U)∂_α V − Σ ∂_α(Y^{αβ}(U)∂_β V) = f(U, ∇U)`,
//! with `V = U − Ū` split into a transported block (first `n1` components)
//! and a diffused block (last `n2` components).

mod barotropic;
mod checks;
mod nsf;
mod registry;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use barotropic::{assemble_barotropic, Barotropic, PressureLaw, Transport};
pub use checks::{
    check_assumption_b, check_assumption_c, check_entropy_dissipativity, check_strong_ellipticity,
    random_vectors, sample_states, AssumptionReport, CheckItem, EllipticityReport, EntropyReport, StructureOptions,
};
pub use nsf::{assemble_nsf, Gas, Nsf, NsfTransport};
pub use registry::{register_system, system_from_config, SystemConstructor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssumptionProfile {
    B,
    C,
}

/// Source split `f = (f¹(U), f²¹(U) + f²²(U, ∇U¹) + f²³(U, ∇U²))`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceParts {
    pub f1: Vec<f64>,
    pub f21: Vec<f64>,
    pub f22: Vec<f64>,
    pub f23: Vec<f64>,
}

impl SourceParts {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        SourceParts { f1: vec![0.0; n1], f21: vec![0.0; n2], f22: vec![0.0; n2], f23: vec![0.0; n2] }
    }

    pub fn total(&self) -> Vec<f64> {
        let mut out = self.f1.clone();
        out.extend(self.f21.iter().zip(&self.f22).zip(&self.f23).map(|((a, b), c)| a + b + c));
        out
    }
}

/// Matrix evaluators of a system. Every evaluator is a pure function of the
/// state `u` (length `n1 + n2`) writing a row-major matrix into `out`.
pub trait SystemModel: Send + Sync {
    fn name(&self) -> &str;
    fn n1(&self) -> usize;
    fn n2(&self) -> usize;
    fn dim(&self) -> usize;
    fn reference_state(&self) -> Vec<f64>;
    fn profile(&self) -> AssumptionProfile;

    /// `S⁰(U)`, `n × n`.
    fn s0(&self, u: &[f64], out: &mut [f64]);
    /// `S^α(U)`, `n × n`.
    fn s_alpha(&self, u: &[f64], alpha: usize, out: &mut [f64]);
    /// `Z^{αβ}(U)`, `n2 × n2`.
    fn z(&self, u: &[f64], alpha: usize, beta: usize, out: &mut [f64]);

    /// Source terms; `grad[alpha * n + c] = ∂_α U^c`.
    fn source(&self, u: &[f64], grad: &[f64]) -> SourceParts {
        let _ = (u, grad);
        SourceParts::zeros(self.n1(), self.n2())
    }

    /// Whether `source` is identically zero (lets the solver skip gradient work).
    fn has_source(&self) -> bool {
        true
    }

    /// Positive inside the phase space, with magnitude a distance to its boundary.
    fn phase_distance(&self, u: &[f64]) -> f64;

    /// Same for the first block alone (`U¹ ∈ 𝒰¹`).
    fn phase_distance_first(&self, u1: &[f64]) -> f64 {
        let _ = u1;
        f64::INFINITY
    }
}

/// Immutable, shareable system description.
#[derive(Clone)]
pub struct SystemSpec {
    model: Arc<dyn SystemModel>,
    pub n1: usize,
    pub n2: usize,
    pub d: usize,
    pub u_bar: Vec<f64>,
    pub profile: AssumptionProfile,
    pub params: serde_json::Value,
}

impl std::fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.model.name())
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("d", &self.d)
            .field("u_bar", &self.u_bar)
            .finish()
    }
}

impl SystemSpec {
    pub fn new<M: SystemModel + 'static>(model: M, params: serde_json::Value) -> Self {
        Self::from_arc(Arc::new(model), params)
    }

    pub fn from_arc(model: Arc<dyn SystemModel>, params: serde_json::Value) -> Self {
        assert!(
            model.n1() + model.n2() <= crate::linalg::MAX_STATE,
            "state dimension above {} is not supported",
            crate::linalg::MAX_STATE
        );
        SystemSpec {
            n1: model.n1(),
            n2: model.n2(),
            d: model.dim(),
            u_bar: model.reference_state(),
            profile: model.profile(),
            model,
            params,
        }
    }

    pub fn model(&self) -> &dyn SystemModel {
        self.model.as_ref()
    }

    pub fn name(&self) -> &str {
        self.model.name()
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// Same system with a different reference state.
    pub fn with_reference(&self, u_bar: Vec<f64>) -> Self {
        assert_eq!(u_bar.len(), self.n());
        SystemSpec { u_bar, ..self.clone() }
    }

    pub fn s0(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        self.model.s0(u, &mut out);
        DMatrix::from_row_slice(n, n, &out)
    }

    pub fn s_alpha(&self, u: &[f64], alpha: usize) -> DMatrix<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        self.model.s_alpha(u, alpha, &mut out);
        DMatrix::from_row_slice(n, n, &out)
    }

    pub fn z(&self, u: &[f64], alpha: usize, beta: usize) -> DMatrix<f64> {
        let n2 = self.n2;
        let mut out = vec![0.0; n2 * n2];
        self.model.z(u, alpha, beta, &mut out);
        DMatrix::from_row_slice(n2, n2, &out)
    }

    /// `Z(ξ) = Σ ξ_α ξ_β Z^{αβ}(U)`.
    pub fn z_symbol(&self, u: &[f64], xi: &[f64]) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.n2, self.n2);
        for a in 0..self.d {
            for b in 0..self.d {
                if xi[a] != 0.0 && xi[b] != 0.0 {
                    acc += self.z(u, a, b) * (xi[a] * xi[b]);
                }
            }
        }
        acc
    }

    pub fn source(&self, u: &[f64], grad: &[f64]) -> SourceParts {
        self.model.source(u, grad)
    }

    pub fn phase_distance(&self, u: &[f64]) -> f64 {
        self.model.phase_distance(u)
    }

    pub fn in_phase_space(&self, u: &[f64]) -> bool {
        self.model.phase_distance(u) > 0.0
    }

    pub fn phase_distance_first(&self, u1: &[f64]) -> f64 {
        self.model.phase_distance_first(u1)
    }

    /// Block `[r0..r1) × [c0..c1)` of an `n×n` matrix.
    pub fn block(m: &DMatrix<f64>, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> DMatrix<f64> {
        m.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
    }

    /// Constant-coefficient parabolic data at the reference state: `(S̄⁰₂₂, [Z̄^{αβ}])`.
    pub fn reference_parabolic(&self) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = self.n();
        let s0 = self.s0(&self.u_bar);
        let s22 = Self::block(&s0, self.n1..n, self.n1..n);
        let mut z = Vec::with_capacity(self.d * self.d);
        for a in 0..self.d {
            for b in 0..self.d {
                z.push(self.z(&self.u_bar, a, b));
            }
        }
        (s22, z)
    }
}
