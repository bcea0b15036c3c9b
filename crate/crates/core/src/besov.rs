//! Besov and Chemin–Lerner norms from per-block L² masses.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::io::format_float;
use crate::spectral::{profile_hash, BlockIndex, Field, FilterBank, Flavor, GridSpec};
use crate::trajectory::Trajectory;

/// Lebesgue or summation exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Exponent {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    /// ℓ^r norm of a nonnegative sequence.
    pub fn aggregate(self, seq: &[f64]) -> f64 {
        match self {
            Exponent::One => seq.iter().sum(),
            Exponent::Two => seq.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Exponent::Inf => seq.iter().fold(0.0, |m, &v| m.max(v)),
        }
    }

    /// Time norm on uniform samples: trapezoid rule for finite exponents.
    pub fn time_norm(self, values: &[f64], dt: f64) -> f64 {
        match self {
            Exponent::Inf => values.iter().fold(0.0, |m, &v| m.max(v)),
            Exponent::One => trapezoid(values, dt),
            Exponent::Two => {
                let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
                trapezoid(&sq, dt).sqrt()
            }
        }
    }
}

pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid integral, `out[k] = ∫_0^{t_k}`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * dt * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovIndex {
    pub s: f64,
    pub p: Exponent,
    pub r: Exponent,
    pub flavor: Flavor,
}

impl BesovIndex {
    pub fn new(s: f64, p: Exponent, r: Exponent, flavor: Flavor) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidArgument(format!("regularity s = {s} must be finite")));
        }
        if p == Exponent::One {
            return Err(Error::InvalidArgument("only p = 2 and p = ∞ are supported".into()));
        }
        Ok(BesovIndex { s, p, r, flavor })
    }

    /// `B^s_{2,1}`, the workhorse space.
    pub fn b21(s: f64, flavor: Flavor) -> Self {
        BesovIndex { s, p: Exponent::Two, r: Exponent::One, flavor }
    }

    pub fn with_r(self, r: Exponent) -> Self {
        BesovIndex { r, ..self }
    }
}

/// `s* = max(d/2, s)`
pub fn s_star(d: usize, s: f64) -> f64 {
    (d as f64 / 2.0).max(s)
}

/// `s** = max(d/2, s - 1)`
pub fn s_star_star(d: usize, s: f64) -> f64 {
    (d as f64 / 2.0).max(s - 1.0)
}

/// Per-component squared block masses of one field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockProfile {
    pub j_min: i32,
    pub j_max: i32,
    /// `[component][j - j_min]`, squared L² norms of `Δ̇_j u^c`.
    pub hom_sq: Vec<Vec<f64>>,
    /// Squared L² norm of `Δ_{-1} u^c`.
    pub low_sq: Vec<f64>,
    /// Squared L² norm of the mean (zero mode).
    pub zero_sq: Vec<f64>,
    /// Squared L² mass the truncated partition misses.
    pub unresolved_sq: Vec<f64>,
}

impl BlockProfile {
    pub fn of(u: &Field) -> Result<Self> {
        u.check_finite()?;
        let g = u.grid();
        let bank = FilterBank::for_grid(g)?;
        let m = g.points();
        let norm = g.volume() / (m as f64 * m as f64);
        let nblocks = (bank.j_max - bank.j_min + 1) as usize;
        let per_comp: Vec<(Vec<f64>, f64, f64, f64)> = crate::par::map_range(g.n, |c| {
            let spec = u.component_spectrum(c);
            let mut hom = vec![0.0; nblocks];
            let (mut low, mut unresolved) = (0.0, 0.0);
            for (i, z) in spec.iter().enumerate() {
                let e = z.norm_sqr();
                if e == 0.0 {
                    continue;
                }
                let chi = bank.chi_hat[i];
                low += chi * chi * e;
                let mut part = chi;
                for (b, h) in hom.iter_mut().enumerate() {
                    let w = bank.phi_hat[b][i];
                    if w != 0.0 {
                        *h += w * w * e;
                        if bank.j_min + b as i32 >= 0 {
                            part += w;
                        }
                    }
                }
                let miss = 1.0 - part;
                unresolved += miss * miss * e;
            }
            let zero = spec[0].norm_sqr() * norm;
            hom.iter_mut().for_each(|h| *h *= norm);
            (hom, low * norm, zero, unresolved * norm)
        });
        let mut p = BlockProfile {
            j_min: bank.j_min,
            j_max: bank.j_max,
            hom_sq: Vec::new(),
            low_sq: Vec::new(),
            zero_sq: Vec::new(),
            unresolved_sq: Vec::new(),
        };
        for (h, l, z, r) in per_comp {
            p.hom_sq.push(h);
            p.low_sq.push(l);
            p.zero_sq.push(z);
            p.unresolved_sq.push(r);
        }
        Ok(p)
    }

    pub fn n_components(&self) -> usize {
        self.low_sq.len()
    }

    pub fn block_range(&self, flavor: Flavor) -> std::ops::RangeInclusive<i32> {
        match flavor {
            Flavor::Homogeneous => self.j_min..=self.j_max,
            Flavor::Nonhomogeneous => -1..=self.j_max,
        }
    }

    /// L² block norms of the components in `comps`, over the flavor's range.
    pub fn blocks(&self, flavor: Flavor, comps: std::ops::Range<usize>) -> Vec<f64> {
        self.block_range(flavor)
            .map(|j| {
                let sq: f64 = comps.clone().map(|c| self.block_sq(c, j, flavor)).sum();
                sq.sqrt()
            })
            .collect()
    }

    fn block_sq(&self, c: usize, j: i32, flavor: Flavor) -> f64 {
        if flavor == Flavor::Nonhomogeneous && j == -1 {
            return self.low_sq[c];
        }
        if j < self.j_min || j > self.j_max || (flavor == Flavor::Nonhomogeneous && j < -1) {
            return 0.0;
        }
        self.hom_sq[c][(j - self.j_min) as usize]
    }

    pub fn tail(&self, flavor: Flavor, comps: std::ops::Range<usize>) -> f64 {
        match flavor {
            Flavor::Homogeneous => comps.map(|c| self.zero_sq[c]).sum::<f64>().sqrt(),
            Flavor::Nonhomogeneous => 0.0,
        }
    }

    pub fn unresolved(&self, comps: std::ops::Range<usize>) -> f64 {
        comps.map(|c| self.unresolved_sq[c]).sum::<f64>().sqrt()
    }
}

/// Weighted per-block values `2^{js}‖Δ_j u‖` and their ℓ^r total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormRecord {
    pub index: BesovIndex,
    pub j: Vec<i32>,
    pub per_block: Vec<f64>,
    pub total: f64,
    /// Mass below the lowest homogeneous block (the mean on a torus).
    pub tail_mass: f64,
    /// Mass above the partition's guard radius.
    pub unresolved_mass: f64,
    /// Time samples behind the record (1 for a static norm).
    pub samples: usize,
    pub grid: Option<GridSpec>,
    pub profile_hash: String,
}

impl NormRecord {
    pub fn from_blocks(index: BesovIndex, js: Vec<i32>, raw: &[f64]) -> Self {
        let per_block: Vec<f64> = js.iter().zip(raw).map(|(&j, &v)| 2f64.powf(j as f64 * index.s) * v).collect();
        let total = index.r.aggregate(&per_block);
        NormRecord {
            index,
            j: js,
            per_block,
            total,
            tail_mass: 0.0,
            unresolved_mass: 0.0,
            samples: 1,
            grid: None,
            profile_hash: profile_hash(),
        }
    }

    pub fn block(&self, j: i32) -> f64 {
        self.j.iter().position(|&x| x == j).map_or(0.0, |i| self.per_block[i])
    }

    /// CSV with columns `j, per_block, cumulative` (cumulative ℓ^r partial totals).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,per_block,cumulative")?;
        for k in 0..self.j.len() {
            let cum = self.index.r.aggregate(&self.per_block[..=k]);
            writeln!(w, "{},{},{}", self.j[k], format_float(self.per_block[k]), format_float(cum))?;
        }
        Ok(())
    }
}

/// `‖u‖_{B^s_{p,r}}` over all components of `u`.
pub fn besov_norm(u: &Field, idx: BesovIndex) -> Result<NormRecord> {
    let profile = BlockProfile::of(u)?;
    let comps = 0..u.n_components();
    let js: Vec<i32> = profile.block_range(idx.flavor).collect();
    let raw = match idx.p {
        Exponent::Two => profile.blocks(idx.flavor, comps.clone()),
        Exponent::Inf => js
            .iter()
            .map(|&j| {
                crate::spectral::dyadic_block(u, BlockIndex { j, flavor: idx.flavor }).map(|b| b.linf_norm())
            })
            .collect::<Result<Vec<f64>>>()?,
        Exponent::One => return Err(Error::InvalidArgument("p = 1 is not supported".into())),
    };
    let mut rec = NormRecord::from_blocks(idx, js, &raw);
    rec.tail_mass = profile.tail(idx.flavor, comps.clone());
    rec.unresolved_mass = profile.unresolved(comps);
    rec.grid = Some(*u.grid());
    Ok(rec)
}

/// Shorthand for the total of `B^s_{2,1}` over the components in `comps`.
pub fn b21_total(profile: &BlockProfile, s: f64, flavor: Flavor, comps: std::ops::Range<usize>) -> f64 {
    weighted_total(profile, s, Exponent::One, flavor, comps)
}

pub fn weighted_total(
    profile: &BlockProfile,
    s: f64,
    r: Exponent,
    flavor: Flavor,
    comps: std::ops::Range<usize>,
) -> f64 {
    let raw = profile.blocks(flavor, comps);
    let weighted: Vec<f64> =
        profile.block_range(flavor).zip(raw).map(|(j, v)| 2f64.powf(j as f64 * s) * v).collect();
    r.aggregate(&weighted)
}

/// Block L² norms sampled in time: `values[k][b]` for block `js[b]` at `t_k = k dt`.
#[derive(Debug, Clone)]
pub struct BlockSeries {
    pub js: Vec<i32>,
    pub dt: f64,
    pub values: Vec<Vec<f64>>,
}

impl BlockSeries {
    pub fn from_profiles(profiles: &[BlockProfile], dt: f64, flavor: Flavor, comps: std::ops::Range<usize>) -> Self {
        let js = profiles.first().map(|p| p.block_range(flavor).collect()).unwrap_or_default();
        let values = profiles.iter().map(|p| p.blocks(flavor, comps.clone())).collect();
        BlockSeries { js, dt, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn weight(&self, b: usize, s: f64) -> f64 {
        2f64.powf(self.js[b] as f64 * s)
    }

    /// Per-block weighted time norms over samples `0..=end` (before ℓ^r).
    pub fn chemin_lerner_blocks(&self, s: f64, rho: Exponent, end: usize) -> Vec<f64> {
        (0..self.js.len())
            .map(|b| {
                let col: Vec<f64> = self.values[..=end].iter().map(|row| row[b]).collect();
                self.weight(b, s) * rho.time_norm(&col, self.dt)
            })
            .collect()
    }

    pub fn chemin_lerner_total(&self, s: f64, r: Exponent, rho: Exponent, end: usize) -> f64 {
        r.aggregate(&self.chemin_lerner_blocks(s, rho, end))
    }

    /// `t ↦ ‖u(t)‖_{B^s_{2,r}}` at every sample.
    pub fn besov_series(&self, s: f64, r: Exponent) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| {
                let w: Vec<f64> = row.iter().enumerate().map(|(b, v)| self.weight(b, s) * v).collect();
                r.aggregate(&w)
            })
            .collect()
    }

    /// Plain `‖u‖_{L^ρ(0,t_end; B^s_{2,r})}`.
    pub fn lebesgue_besov(&self, s: f64, r: Exponent, rho: Exponent, end: usize) -> f64 {
        let series = self.besov_series(s, r);
        rho.time_norm(&series[..=end], self.dt)
    }

    /// Running `‖u‖_{L^ρ(0,t_k; B^s_{2,r})}` for every k.
    pub fn lebesgue_besov_running(&self, s: f64, r: Exponent, rho: Exponent) -> Vec<f64> {
        let series = self.besov_series(s, r);
        running_time_norm(&series, self.dt, rho)
    }

    /// Running Chemin–Lerner norm for every prefix.
    pub fn chemin_lerner_running(&self, s: f64, r: Exponent, rho: Exponent) -> Vec<f64> {
        let nb = self.js.len();
        let cols: Vec<Vec<f64>> = (0..nb)
            .map(|b| {
                let col: Vec<f64> = self.values.iter().map(|row| row[b]).collect();
                let w = self.weight(b, s);
                running_time_norm(&col, self.dt, rho).into_iter().map(|v| w * v).collect()
            })
            .collect();
        (0..self.values.len())
            .map(|k| {
                let pb: Vec<f64> = cols.iter().map(|c| c[k]).collect();
                r.aggregate(&pb)
            })
            .collect()
    }
}

fn running_time_norm(values: &[f64], dt: f64, rho: Exponent) -> Vec<f64> {
    match rho {
        Exponent::Inf => {
            let mut m = 0.0f64;
            values.iter().map(|&v| {
                m = m.max(v);
                m
            })
            .collect()
        }
        Exponent::One => cumulative_trapezoid(values, dt),
        Exponent::Two => {
            let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
            cumulative_trapezoid(&sq, dt).into_iter().map(f64::sqrt).collect()
        }
    }
}

/// LHS/RHS of the interpolation inequality between the endpoint spaces of the
/// parabolic estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogInterpolationReport {
    pub lhs: f64,
    /// `‖a‖_{L̃¹_T(Ḃ^{d/2}_{2,∞})}`
    pub mid: f64,
    pub lower: f64,
    pub upper: f64,
    pub log_factor: f64,
    /// `lhs / (mid · log_factor)`; 0 for the zero trajectory.
    pub ratio: f64,
}

/// Chemin–Lerner norm `‖2^{js}‖Δ_j u‖_{L^ρ_T(L²)}‖_{ℓ^r}` over the whole trajectory.
pub fn chemin_lerner_norm(traj: &Trajectory, idx: BesovIndex, rho: Exponent) -> Result<NormRecord> {
    if idx.p != Exponent::Two {
        return Err(Error::InvalidArgument("space-time norms are L²-based".into()));
    }
    let n = traj.grid().n;
    let series = traj.series(idx.flavor, 0..n)?;
    let raw: Vec<f64> = (0..series.js.len())
        .map(|b| {
            let col: Vec<f64> = series.values.iter().map(|row| row[b]).collect();
            rho.time_norm(&col, series.dt)
        })
        .collect();
    let mut rec = NormRecord::from_blocks(idx, series.js.clone(), &raw);
    rec.samples = traj.len();
    rec.grid = Some(*traj.grid());
    let profiles = traj.profiles()?;
    let tails: Vec<f64> = profiles.iter().map(|p| p.tail(idx.flavor, 0..n)).collect();
    let unresolved: Vec<f64> = profiles.iter().map(|p| p.unresolved(0..n)).collect();
    rec.tail_mass = rho.time_norm(&tails, series.dt);
    rec.unresolved_mass = rho.time_norm(&unresolved, series.dt);
    Ok(rec)
}

/// Plain `‖u‖_{L^ρ_T(B^s_{2,r})}`: Besov norm first, then the time norm.
pub fn lebesgue_besov_norm(traj: &Trajectory, idx: BesovIndex, rho: Exponent) -> Result<f64> {
    let n = traj.grid().n;
    let series = traj.series(idx.flavor, 0..n)?;
    Ok(series.lebesgue_besov(idx.s, idx.r, rho, series.len() - 1))
}

/// Samples up to time `t_end` (inclusive).
fn end_index(traj: &Trajectory, t_end: f64) -> usize {
    traj.index_at(t_end)
}

/// `‖V‖_{L²_T(B^{s+1}_{2,1})}` against `(‖V‖_{L^∞_T(B^s_{2,1})}‖V‖_{L¹_T(B^{s+2}_{2,1})})^{1/2}`.
pub fn interpolation_check(traj: &Trajectory, t_end: f64, s: f64, flavor: Flavor) -> Result<InterpolationReport> {
    let n = traj.grid().n;
    let series = traj.series(flavor, 0..n)?;
    let end = end_index(traj, t_end);
    let one = Exponent::One;
    let lhs = series.lebesgue_besov(s + 1.0, one, Exponent::Two, end);
    let rhs = (series.lebesgue_besov(s, one, Exponent::Inf, end) * series.lebesgue_besov(s + 2.0, one, one, end)).sqrt();
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(InterpolationReport { lhs, rhs, ratio, holds: ratio <= 1.0 + 1e-6 })
}

/// Ingredients of the logarithmic interpolation inequality in `Ḃ^{d/2}`.
pub fn log_interpolation_check(traj: &Trajectory, t_end: f64) -> Result<LogInterpolationReport> {
    let g = *traj.grid();
    let series = traj.series(Flavor::Homogeneous, 0..g.n)?;
    let end = end_index(traj, t_end);
    let h = g.d as f64 / 2.0;
    let one = Exponent::One;
    let lhs = series.lebesgue_besov(h, one, one, end);
    let mid = series.chemin_lerner_total(h, Exponent::Inf, one, end);
    let lower = series.chemin_lerner_total(h - 1.0, Exponent::Inf, one, end);
    let upper = series.chemin_lerner_total(h + 1.0, Exponent::Inf, one, end);
    if mid == 0.0 {
        return Ok(LogInterpolationReport { lhs, mid, lower, upper, log_factor: 1.0, ratio: 0.0 });
    }
    let log_factor = (std::f64::consts::E + (lower + upper) / mid).ln();
    Ok(LogInterpolationReport { lhs, mid, lower, upper, log_factor, ratio: lhs / (mid * log_factor) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates() {
        let v = [3.0, 4.0];
        assert_eq!(Exponent::One.aggregate(&v), 7.0);
        assert_eq!(Exponent::Two.aggregate(&v), 5.0);
        assert_eq!(Exponent::Inf.aggregate(&v), 4.0);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let v: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        assert!((trapezoid(&v, 0.1) - 0.5).abs() < 1e-15);
        let c = cumulative_trapezoid(&v, 0.1);
        assert!((c[10] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn index_rejects_p1() {
        assert!(BesovIndex::new(0.0, Exponent::One, Exponent::One, Flavor::Homogeneous).is_err());
        assert!(BesovIndex::new(f64::NAN, Exponent::Two, Exponent::One, Flavor::Homogeneous).is_err());
    }

    #[test]
    fn s_star_values() {
        assert_eq!(s_star(2, 0.5), 1.0);
        assert_eq!(s_star_star(1, 2.0), 1.0);
    }
}
