use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{energy_above, resample, Field, FilterBank, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Random phases, amplitude `|k|^{−(d+1)/2}` up to a member-specific band limit.
    Random,
    /// Periodized Gaussian bumps at three widths, spectrally truncated.
    Bump,
    /// One cosine mode per dyadic annulus.
    Mode,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub family: Family,
    pub label: String,
    pub field: Field,
}

/// Seeded collection of scalar test fields on one grid.
///
/// Members are band-limited to `|k| ≤ band` with `band` half the filter bank's
/// guard radius on the generating grid, so pointwise products of two members
/// are still fully covered by the dyadic partition there and on every refinement.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub grid: GridSpec,
    pub seed: u64,
    pub per_family: usize,
    pub band: i64,
    pub members: Vec<Member>,
}

const WIDTHS: [f64; 3] = [0.3, 0.6, 1.2];

impl Corpus {
    /// `grid` must carry one component; `per_family` members of each family.
    pub fn generate(grid: GridSpec, seed: u64, per_family: usize) -> Result<Self> {
        if grid.n != 1 {
            return Err(Error::InvalidArgument("corpus fields are scalar; use a grid with n = 1".into()));
        }
        if per_family == 0 {
            return Err(Error::InvalidArgument("per_family must be positive".into()));
        }
        let bank = FilterBank::for_grid(&grid)?;
        let band = ((bank.guard_radius / grid.k0()) / 2.0).floor() as i64;
        if band < 2 {
            return Err(Error::GridTooCoarse { j_max: bank.j_max });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut members = Vec::with_capacity(3 * per_family);
        for i in 0..per_family {
            members.push(random_member(&grid, band, i, &mut rng));
        }
        for i in 0..per_family {
            members.push(bump_member(&grid, band, i, &mut rng));
        }
        for i in 0..per_family {
            members.push(mode_member(&grid, band, i, per_family, &mut rng));
        }
        Ok(Corpus { grid, seed, per_family, band, members })
    }

    /// The same functions on a grid with twice the points per axis (exact,
    /// since every member is band-limited).
    pub fn refined(&self) -> Result<Self> {
        let n_points = 2 * self.grid.n_points;
        let members = self
            .members
            .iter()
            .map(|m| Ok(Member { field: resample(&m.field, n_points)?, ..m.clone() }))
            .collect::<Result<_>>()?;
        Ok(Corpus { grid: GridSpec { n_points, ..self.grid }, members, ..self.clone_recipe() })
    }

    fn clone_recipe(&self) -> Corpus {
        Corpus { grid: self.grid, seed: self.seed, per_family: self.per_family, band: self.band, members: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        self.members.iter().map(|m| &m.field)
    }

    pub fn scaled(&self, lambda: f64) -> Corpus {
        let mut c = self.clone();
        for m in &mut c.members {
            m.field = m.field.scale(lambda);
        }
        c
    }

    /// Largest energy fraction of any member above `band`.
    pub fn guard_leak(&self) -> f64 {
        let r = (self.band as f64 + 0.5) * self.grid.k0();
        self.fields().map(|f| energy_above(f, r)).fold(0.0, f64::max)
    }

    /// Deterministic pair list: every `(i, i)` and then either all ordered
    /// off-diagonal pairs (when there are at most `extra`) or `extra` seeded ones.
    pub fn pairs(&self, extra: usize) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        if n < 2 {
            return out;
        }
        if n * (n - 1) <= extra {
            out.extend((0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))));
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for _ in 0..extra {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            out.push((i, j));
        }
        out
    }

    /// `n`-component fields built from consecutive members (cyclically).
    pub fn vector_fields(&self, n: usize) -> Vec<Field> {
        let len = self.len();
        (0..len)
            .map(|i| {
                let parts: Vec<&Field> = (0..n).map(|c| &self.members[(i + c) % len].field).collect();
                Field::concat(&parts).expect("members share a grid")
            })
            .collect()
    }
}

fn int_norm(k: &[i64; 3], d: usize) -> f64 {
    k[..d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

fn normalize(f: Field, amplitude: f64) -> Field {
    let m = f.max_abs();
    if m > 0.0 {
        f.scale(amplitude / m)
    } else {
        f
    }
}

fn random_member(grid: &GridSpec, band: i64, i: usize, rng: &mut ChaCha8Rng) -> Member {
    let d = grid.d;
    let m = grid.points();
    // multi-scale: the band limit halves along the family, wrapping around
    let levels = (band as f64).log2().floor().max(1.0) as usize;
    let limit = (band >> (i % levels)).max(2) as f64;
    let slope = -((d + 1) as f64) / 2.0;
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for (p, z) in spec.iter_mut().enumerate() {
        let r = int_norm(&grid.integer_wavevector(p), d);
        if r >= 1.0 && r <= limit {
            let a = r.powf(slope);
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * a;
        }
    }
    if i % 2 == 1 {
        spec[0] = Complex64::new(rng.gen_range(-0.5..0.5) * m as f64, 0.0);
    }
    let amplitude = rng.gen_range(0.5..1.5);
    Member {
        family: Family::Random,
        label: format!("random-{i}-k{limit}"),
        field: normalize(Field::from_spectrum(*grid, spec), amplitude),
    }
}

fn truncate(f: &Field, band: i64) -> Field {
    let g = *f.grid();
    let spec: Vec<Complex64> = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(p, z)| if int_norm(&g.integer_wavevector(p), g.d) <= band as f64 { *z } else { Complex64::new(0.0, 0.0) })
        .collect();
    Field::from_spectrum(g, spec)
}

fn bump_member(grid: &GridSpec, band: i64, i: usize, rng: &mut ChaCha8Rng) -> Member {
    let d = grid.d;
    let l = grid.length;
    let w = WIDTHS[i % WIDTHS.len()] * l / (2.0 * std::f64::consts::PI);
    let center: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..l)).collect();
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let amplitude = sign * rng.gen_range(0.5..1.5);
    let raw = Field::from_fn(*grid, |x, _| {
        let r2: f64 = (0..d)
            .map(|a| {
                let mut dx = (x[a] - center[a]).rem_euclid(l);
                if dx > l / 2.0 {
                    dx -= l;
                }
                dx * dx
            })
            .sum();
        (-r2 / (2.0 * w * w)).exp()
    });
    Member {
        family: Family::Bump,
        label: format!("bump-{i}-w{}", WIDTHS[i % WIDTHS.len()]),
        field: truncate(&raw, band).scale(amplitude),
    }
}

fn mode_member(grid: &GridSpec, band: i64, i: usize, count: usize, rng: &mut ChaCha8Rng) -> Member {
    let d = grid.d;
    let annuli = (band as f64).log2().floor() as usize + 1;
    let j = i % annuli;
    // stratified position inside the dyadic period, so that every part of the
    // block profile is sampled at every resolution
    let strata = i / annuli;
    let per_annulus = count.div_ceil(annuli);
    let u = (strata as f64 + rng.gen_range(0.0..1.0)) / per_annulus as f64 - 0.5;
    let target = (2f64.powf(j as f64 + u)).clamp(1.0, band as f64);
    let mut k = [0i64; 3];
    loop {
        let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len < 1e-3 {
            continue;
        }
        for a in 0..d {
            k[a] = (target * dir[a] / len).round() as i64;
        }
        let r = int_norm(&k, d);
        if r >= 1.0 && r <= band as f64 {
            break;
        }
    }
    let phase = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let amplitude = rng.gen_range(0.5..1.5);
    let k0 = grid.k0();
    Member {
        family: Family::Mode,
        label: format!("mode-{i}-k{:?}", &k[..d]),
        field: Field::from_fn(*grid, |x, _| {
            let arg: f64 = (0..d).map(|a| k[a] as f64 * k0 * x[a]).sum();
            amplitude * (arg + phase).cos()
        }),
    }
}
