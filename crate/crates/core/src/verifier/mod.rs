//! Numerical stress tests of the functional inequalities behind the
//! existence theory.
//!
//! An inequality `LHS ≤ C·RHS` is "verified" when no instance has `RHS = 0`
//! with `LHS > 0`, the fitted `C = max LHS/RHS` is finite, and `C` moves by
//! less than 25% when the resolution is doubled.

mod apriori;
mod corpus;
mod garding;
mod inequalities;

pub use apriori::{verify_apriori_hyperbolic, verify_apriori_parabolic, AprioriSeries, LinearRun};
pub use corpus::{Corpus, Family, Member};
pub use garding::{garding_terms, verify_garding, verify_garding_localized, GardingTerms};
pub use inequalities::{verify_commutator, verify_composition, CommutatorForm, ScalarMap};
pub use inequalities::verify_product_law;

use serde::{Deserialize, Serialize};

/// Relative size below which a quantity counts as zero.
pub const ZERO_TOL: f64 = 1e-12;
/// Share below which a fitted correction constant is considered irrelevant.
pub const NEGLIGIBLE_SHARE: f64 = 1e-6;
/// Largest relative change of a fitted constant under refinement.
pub const STABILITY_TOL: f64 = 0.25;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub label: String,
    pub lhs: f64,
    /// Right-hand side without the constant.
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub instances: Vec<Instance>,
    pub fitted_c: f64,
    /// Fitted constant of the same check at the refined resolution.
    pub refined_c: Option<f64>,
    pub stable: Option<bool>,
    pub violations: Vec<String>,
    /// `C·max(term C multiplies) / max(LHS)` for estimates where the fitted
    /// constant multiplies a correction term; tiny shares make `C` meaningless.
    pub c_term_share: Option<f64>,
    /// Named auxiliary numbers (fitted secondary constants, reconstructed sums).
    pub extras: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl InequalityReport {
    /// Fits `C` over `instances` and records the zero-RHS violations.
    pub fn from_instances(name: impl Into<String>, instances: Vec<Instance>) -> Self {
        let scale = instances.iter().map(|i| i.lhs.abs().max(i.rhs.abs())).fold(0.0, f64::max);
        let zero = ZERO_TOL * scale;
        let mut fitted_c = 0.0f64;
        let mut violations = Vec::new();
        for i in &instances {
            if !(i.lhs.is_finite() && i.rhs.is_finite()) {
                violations.push(format!("{}: non-finite side (lhs {}, rhs {})", i.label, i.lhs, i.rhs));
            } else if i.rhs <= zero {
                if i.lhs > zero {
                    violations.push(format!("{}: rhs {:e} with lhs {:e}", i.label, i.rhs, i.lhs));
                }
            } else {
                fitted_c = fitted_c.max(i.lhs / i.rhs);
            }
        }
        InequalityReport {
            name: name.into(),
            instances,
            fitted_c,
            refined_c: None,
            stable: None,
            violations,
            c_term_share: None,
            extras: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records the constant fitted on the refined run and sets the stability flag.
    pub fn with_refinement(mut self, refined: &InequalityReport) -> Self {
        let (a, b) = (self.fitted_c, refined.fitted_c);
        let negligible = |r: &InequalityReport| r.c_term_share.is_some_and(|x| x <= NEGLIGIBLE_SHARE);
        let stable = if (a == 0.0 && b == 0.0) || (negligible(&self) && negligible(refined)) {
            true
        } else {
            (b - a).abs() <= STABILITY_TOL * a.max(b)
        };
        self.refined_c = Some(b);
        self.stable = Some(stable && refined.violations.is_empty());
        self.violations.extend(refined.violations.iter().map(|v| format!("refined: {v}")));
        self
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.fitted_c.is_finite() && self.stable != Some(false)
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// `max LHS/RHS` over the instances, for checks that want the raw ratios.
    pub fn ratios(&self) -> Vec<f64> {
        self.instances.iter().filter(|i| i.rhs > 0.0).map(|i| i.lhs / i.rhs).collect()
    }

    pub fn summary(&self) -> String {
        let refined = self.refined_c.map(|c| format!(", refined C = {c:.6e}")).unwrap_or_default();
        format!(
            "{}: {} instances, C = {:.6e}{}, stable = {:?}, violations = {}",
            self.name,
            self.instances.len(),
            self.fitted_c,
            refined,
            self.stable,
            self.violations.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(lhs: f64, rhs: f64) -> Instance {
        Instance { label: format!("{lhs}/{rhs}"), lhs, rhs }
    }

    #[test]
    fn fit_and_violations() {
        let r = InequalityReport::from_instances("t", vec![inst(1.0, 2.0), inst(3.0, 2.0), inst(0.0, 0.0)]);
        assert_eq!(r.fitted_c, 1.5);
        assert!(r.violations.is_empty());
        let bad = InequalityReport::from_instances("t", vec![inst(1.0, 0.0), inst(1.0, 1.0)]);
        assert_eq!(bad.violations.len(), 1);
        assert!(!bad.passed());
    }

    #[test]
    fn refinement_flag() {
        let a = InequalityReport::from_instances("t", vec![inst(1.0, 1.0)]);
        let b = InequalityReport::from_instances("t", vec![inst(1.2, 1.0)]);
        let c = InequalityReport::from_instances("t", vec![inst(2.0, 1.0)]);
        assert_eq!(a.clone().with_refinement(&b).stable, Some(true));
        assert_eq!(a.with_refinement(&c).stable, Some(false));
    }
}
