//! Product, commutator and composition estimates over a corpus.

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::{InequalityReport, Instance};
use crate::besov::{b21_total, weighted_total, BlockProfile, Exponent};
use crate::error::{Error, Result};
use crate::spectral::{dyadic_block, spectral_gradient, BlockIndex, Field, FilterBank, Flavor};

const NH: Flavor = Flavor::Nonhomogeneous;
/// Off-diagonal pairs drawn on top of the diagonal ones.
const EXTRA_PAIRS: usize = 100;

struct Norms {
    profile: BlockProfile,
    linf: f64,
}

fn norms_of(corpus: &Corpus) -> Result<Vec<Norms>> {
    let fields: Vec<&Field> = corpus.fields().collect();
    crate::par::map_slice(&fields, |f| Ok(Norms { profile: BlockProfile::of(f)?, linf: f.linf_norm() }))
        .into_iter()
        .collect()
}

fn b21(p: &BlockProfile, s: f64) -> f64 {
    b21_total(p, s, NH, 0..p.n_components())
}

fn label(corpus: &Corpus, i: usize, j: usize) -> String {
    format!("{} x {}", corpus.members[i].label, corpus.members[j].label)
}

/// `‖ab‖_{B^s} ≤ C‖a‖_{B^{d/2}}‖b‖_{B^s}` for `−d/2 < s ≤ d/2`, and for `s > 0`
/// also `‖ab‖_{B^s} ≤ C(‖a‖_∞‖b‖_{B^s} + ‖b‖_∞‖a‖_{B^s})`. All norms are
/// nonhomogeneous `B^·_{2,1}`.
pub fn verify_product_law(corpus: &Corpus, s: f64) -> Result<Vec<InequalityReport>> {
    let half_d = corpus.grid.d as f64 / 2.0;
    if !(s > -half_d && s <= half_d) {
        return Err(Error::InvalidArgument(format!("product law needs -d/2 < s <= d/2, got s = {s}")));
    }
    let norms = norms_of(corpus)?;
    let pairs = corpus.pairs(EXTRA_PAIRS);
    let rows: Vec<(f64, f64, f64)> = crate::par::map_slice(&pairs, |&(i, j)| {
        let ab = corpus.members[i].field.mul(&corpus.members[j].field);
        let lhs = b21(&BlockProfile::of(&ab)?, s);
        let (a, b) = (&norms[i], &norms[j]);
        let law = b21(&a.profile, half_d) * b21(&b.profile, s);
        let tame = a.linf * b21(&b.profile, s) + b.linf * b21(&a.profile, s);
        Ok((lhs, law, tame))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mk = |rhs: &dyn Fn(&(f64, f64, f64)) -> f64| -> Vec<Instance> {
        pairs.iter().zip(&rows).map(|(&(i, j), r)| Instance { label: label(corpus, i, j), lhs: r.0, rhs: rhs(r) }).collect()
    };
    let mut out = vec![InequalityReport::from_instances(format!("product-law s={s}"), mk(&|r| r.1))];
    if s > 0.0 {
        out.push(InequalityReport::from_instances(format!("product-tame s={s}"), mk(&|r| r.2)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommutatorForm {
    /// `σ > 0`: `C(‖∇a‖_∞‖b‖_{B^{σ−1}} + ‖b‖_∞‖∇a‖_{B^{σ−1}})`.
    Tame,
    /// `−d/2 < σ ≤ d/2 + 1`: `C‖∇a‖_{B^{d/2}_{2,∞} ∩ L^∞}‖b‖_{B^{σ−1}}`.
    Critical,
}

/// `[a, Δ_j]b = aΔ_jb − Δ_j(ab)` for every nonhomogeneous block; fits `C` in
/// `Σ_j 2^{jσ}‖[a, Δ_j]b‖_{L²} ≤ C·RHS`, which is what the per-block bound with
/// `Σ_j c_j = 1` amounts to. The reconstructed `c_j` sums are reported as extras.
pub fn verify_commutator(corpus: &Corpus, sigma: f64, form: CommutatorForm) -> Result<InequalityReport> {
    let d = corpus.grid.d as f64;
    match form {
        CommutatorForm::Tame if sigma <= 0.0 => {
            return Err(Error::InvalidArgument(format!("the tame commutator form needs sigma > 0, got {sigma}")))
        }
        CommutatorForm::Critical if !(sigma > -d / 2.0 && sigma <= d / 2.0 + 1.0) => {
            return Err(Error::InvalidArgument(format!(
                "the critical commutator form needs -d/2 < sigma <= d/2 + 1, got {sigma}"
            )))
        }
        _ => {}
    }
    let bank = FilterBank::for_grid(&corpus.grid)?;
    let js: Vec<i32> = bank.block_range(NH).collect();
    let norms = norms_of(corpus)?;
    let grads: Vec<(f64, BlockProfile)> = crate::par::map_slice(&corpus.members, |m| {
        let g = spectral_gradient(&m.field);
        Ok((g.linf_norm(), BlockProfile::of(&g)?))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let pairs = corpus.pairs(EXTRA_PAIRS);
    let rows: Vec<(Vec<f64>, f64)> = crate::par::map_slice(&pairs, |&(i, k)| {
        let (a, b) = (&corpus.members[i].field, &corpus.members[k].field);
        let ab = a.mul(b);
        let mut weighted = Vec::with_capacity(js.len());
        for &j in &js {
            let bj = BlockIndex { j, flavor: NH };
            let comm = a.mul(&dyadic_block(b, bj)?).sub(&dyadic_block(&ab, bj)?);
            weighted.push(2f64.powf(j as f64 * sigma) * comm.l2_norm());
        }
        let (ga_inf, ga) = &grads[i];
        let nb = &norms[k];
        let rhs = match form {
            CommutatorForm::Tame => ga_inf * b21(&nb.profile, sigma - 1.0) + nb.linf * b21(ga, sigma - 1.0),
            CommutatorForm::Critical => {
                let ga_norm = weighted_total(ga, d / 2.0, Exponent::Inf, NH, 0..ga.n_components()) + ga_inf;
                ga_norm * b21(&nb.profile, sigma - 1.0)
            }
        };
        Ok((weighted, rhs))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let instances = pairs
        .iter()
        .zip(&rows)
        .map(|(&(i, k), (w, rhs))| Instance { label: label(corpus, i, k), lhs: w.iter().sum(), rhs: *rhs })
        .collect();
    let name = match form {
        CommutatorForm::Tame => format!("commutator-tame sigma={sigma}"),
        CommutatorForm::Critical => format!("commutator-critical sigma={sigma}"),
    };
    let mut report = InequalityReport::from_instances(name, instances);
    let c = report.fitted_c;
    if c > 0.0 {
        // c_j = 2^{jσ}‖[a,Δ_j]b‖ / (C·RHS); their sum is at most 1 and reaches 1
        // on the extremal instance
        let sums: Vec<f64> =
            rows.iter().filter(|(_, rhs)| *rhs > 0.0).map(|(w, rhs)| w.iter().sum::<f64>() / (c * rhs)).collect();
        report.extras.push(("max_sum_cj".into(), sums.iter().cloned().fold(0.0, f64::max)));
        report.extras.push(("min_sum_cj".into(), sums.iter().cloned().fold(f64::INFINITY, f64::min)));
    }
    report.notes.push("c_j reconstructed from measured block values; one admissible choice".into());
    Ok(report)
}

/// A smooth scalar map with bounds on its derivatives.
pub struct ScalarMap {
    pub name: String,
    pub f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `sup_{y ∈ [lo, hi]} |f^{(k)}(y)|` for `k ≥ 1`.
    pub derivative_bound: Box<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>,
}

impl ScalarMap {
    pub fn identity() -> Self {
        ScalarMap {
            name: "identity".into(),
            f: Box::new(|y| y),
            derivative_bound: Box::new(|k, _, _| if k == 1 { 1.0 } else { 0.0 }),
        }
    }

    pub fn square() -> Self {
        ScalarMap {
            name: "square".into(),
            f: Box::new(|y| y * y),
            derivative_bound: Box::new(|k, lo: f64, hi: f64| match k {
                1 => 2.0 * lo.abs().max(hi.abs()),
                2 => 2.0,
                _ => 0.0,
            }),
        }
    }

    pub fn sin() -> Self {
        ScalarMap { name: "sin".into(), f: Box::new(f64::sin), derivative_bound: Box::new(|_, _, _| 1.0) }
    }

    /// `e^y − 1`; every derivative is `e^y`.
    pub fn exp_m1() -> Self {
        ScalarMap { name: "exp_m1".into(), f: Box::new(f64::exp_m1), derivative_bound: Box::new(|_, _, hi: f64| hi.exp()) }
    }

    /// `Σ_{k=1}^{⌈s⌉+1} sup_{[−M, M]}|f^{(k)}| M^{k−1}`, the structure of
    /// `C(f′, ‖u‖_∞)` used for the fit.
    pub fn structure_constant(&self, s: f64, m: f64) -> f64 {
        let top = s.max(0.0).ceil() as usize + 1;
        (1..=top).map(|k| (self.derivative_bound)(k, -m, m) * m.powi(k as i32 - 1)).sum()
    }
}

/// `‖f∘u‖_{B^s} ≤ C·K_f(‖u‖_∞)‖u‖_{B^s}` over the corpus, and the difference form
/// `‖f∘u − f∘v‖_{B^s} ≤ C·K_f(‖(u,v)‖_∞)(1 + ‖u‖_{B^{s'}} + ‖v‖_{B^{s'}})‖u − v‖_{B^s}`
/// with `s' = max(s, d/2)`, over corpus pairs. `K_f` is
/// [`ScalarMap::structure_constant`].
pub fn verify_composition(corpus: &Corpus, f: &ScalarMap, s: f64) -> Result<Vec<InequalityReport>> {
    if s <= 0.0 {
        return Err(Error::InvalidArgument(format!("composition estimate needs s > 0, got {s}")));
    }
    let f0 = (f.f)(0.0);
    if f0.abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("{} does not vanish at 0: f(0) = {f0:e}", f.name)));
    }
    let half_d = corpus.grid.d as f64 / 2.0;
    let s_hi = s.max(half_d);
    let norms = norms_of(corpus)?;
    let composed: Vec<Field> = corpus.fields().map(|u| u.map(|y| (f.f)(y))).collect();
    let comp_norms: Vec<f64> = crate::par::map_slice(&composed, |g| BlockProfile::of(g).map(|p| b21(&p, s)))
        .into_iter()
        .collect::<Result<_>>()?;
    let base: Vec<Instance> = (0..corpus.len())
        .map(|i| Instance {
            label: corpus.members[i].label.clone(),
            lhs: comp_norms[i],
            rhs: f.structure_constant(s, norms[i].linf) * b21(&norms[i].profile, s),
        })
        .collect();
    let raw: Vec<f64> = base
        .iter()
        .zip(&norms)
        .filter_map(|(inst, n)| {
            let bu = b21(&n.profile, s);
            (bu > 0.0).then(|| inst.lhs / bu)
        })
        .collect();
    let mut base_report = InequalityReport::from_instances(format!("composition-{} s={s}", f.name), base);
    base_report.extras.push(("max_raw_ratio".into(), raw.iter().cloned().fold(0.0, f64::max)));

    let pairs = corpus.pairs(EXTRA_PAIRS);
    let diff: Vec<Instance> = crate::par::map_slice(&pairs, |&(i, j)| {
        let lhs = b21(&BlockProfile::of(&composed[i].sub(&composed[j]))?, s);
        let delta = b21(&BlockProfile::of(&corpus.members[i].field.sub(&corpus.members[j].field))?, s);
        let m = norms[i].linf.max(norms[j].linf);
        let size = 1.0 + b21(&norms[i].profile, s_hi) + b21(&norms[j].profile, s_hi);
        Ok(Instance { label: label(corpus, i, j), lhs, rhs: f.structure_constant(s, m) * size * delta })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let diff_report = InequalityReport::from_instances(format!("composition-difference-{} s={s}", f.name), diff);
    Ok(vec![base_report, diff_report])
}
