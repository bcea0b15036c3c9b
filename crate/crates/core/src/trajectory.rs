use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::besov::{BlockProfile, BlockSeries};
use crate::error::{Error, Result};
use crate::spectral::{io, Field, Flavor, GridSpec};

/// Fields sampled at `t_k = k dt`, with lazily cached per-block masses.
pub struct Trajectory {
    dt: f64,
    fields: Vec<Field>,
    profiles: OnceLock<Vec<BlockProfile>>,
}

impl Clone for Trajectory {
    fn clone(&self) -> Self {
        let t = Trajectory { dt: self.dt, fields: self.fields.clone(), profiles: OnceLock::new() };
        if let Some(p) = self.profiles.get() {
            let _ = t.profiles.set(p.clone());
        }
        t
    }
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory").field("dt", &self.dt).field("samples", &self.fields.len()).finish()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub times: Vec<f64>,
    pub grid: GridSpec,
    pub scheme: String,
    pub dt: f64,
    pub files: Vec<String>,
    pub profile_hash: String,
}

impl Trajectory {
    pub fn new(dt: f64, fields: Vec<Field>) -> Result<Self> {
        let first = fields.first().ok_or(Error::EmptyTrajectory)?;
        if fields.len() > 1 && !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("sample spacing dt = {dt} must be positive")));
        }
        let g = *first.grid();
        if fields.iter().any(|f| f.grid() != &g) {
            return Err(Error::Shape("trajectory samples live on different grids".into()));
        }
        Ok(Trajectory { dt, fields, profiles: OnceLock::new() })
    }

    /// Single sample repeated `samples` times on `[0, T]`.
    pub fn constant(u: Field, t_end: f64, samples: usize) -> Result<Self> {
        let samples = samples.max(2);
        Self::new(t_end / (samples - 1) as f64, vec![u; samples])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.fields.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn t_end(&self) -> f64 {
        (self.fields.len() - 1) as f64 * self.dt
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, k: usize) -> &Field {
        &self.fields[k]
    }

    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory is never empty")
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    /// Last sample index with `t_k ≤ t` (up to rounding).
    pub fn index_at(&self, t: f64) -> usize {
        if self.fields.len() == 1 {
            return 0;
        }
        (((t / self.dt) + 1e-9).floor() as usize).min(self.fields.len() - 1)
    }

    pub fn profiles(&self) -> Result<&[BlockProfile]> {
        if let Some(p) = self.profiles.get() {
            return Ok(p);
        }
        let computed: Vec<Result<BlockProfile>> = crate::par::map_slice(&self.fields, BlockProfile::of);
        let computed = computed.into_iter().collect::<Result<Vec<_>>>()?;
        let _ = self.profiles.set(computed);
        Ok(self.profiles.get().expect("just set"))
    }

    pub fn series(&self, flavor: Flavor, comps: std::ops::Range<usize>) -> Result<BlockSeries> {
        Ok(BlockSeries::from_profiles(self.profiles()?, self.dt, flavor, comps))
    }

    pub fn select(&self, comps: std::ops::Range<usize>) -> Trajectory {
        let fields = self.fields.iter().map(|f| f.select(comps.clone())).collect();
        Trajectory { dt: self.dt, fields, profiles: OnceLock::new() }
    }

    pub fn map<F: Fn(&Field) -> Field + Sync + Send>(&self, f: F) -> Trajectory {
        Trajectory { dt: self.dt, fields: crate::par::map_slice(&self.fields, f), profiles: OnceLock::new() }
    }

    pub fn zip_map<F: Fn(&Field, &Field) -> Field + Sync + Send>(&self, other: &Trajectory, f: F) -> Result<Trajectory> {
        if other.len() != self.len() {
            return Err(Error::Shape("trajectories have different sample counts".into()));
        }
        let pairs: Vec<(&Field, &Field)> = self.fields.iter().zip(&other.fields).collect();
        let fields = crate::par::map_slice(&pairs, |(a, b)| f(a, b));
        Trajectory::new(self.dt, fields)
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.zip_map(other, |a, b| a.sub(b))
    }

    /// Every `stride`-th sample (the last sample is kept when it falls on the stride).
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let fields = self.fields.iter().step_by(stride).cloned().collect();
        Trajectory { dt: self.dt * stride as f64, fields, profiles: OnceLock::new() }
    }

    /// Second-order finite-difference time derivative (one-sided at the ends).
    pub fn time_derivative(&self) -> Result<Trajectory> {
        let n = self.fields.len();
        if n < 3 {
            return Err(Error::InvalidArgument("time derivative needs at least 3 samples".into()));
        }
        let h = self.dt;
        let f = &self.fields;
        let out = crate::par::map_range(n, |k| {
            if k == 0 {
                f[0].scale(-1.5 / h).axpy(2.0 / h, &f[1]).axpy(-0.5 / h, &f[2])
            } else if k == n - 1 {
                f[n - 1].scale(1.5 / h).axpy(-2.0 / h, &f[n - 2]).axpy(0.5 / h, &f[n - 3])
            } else {
                f[k + 1].sub(&f[k - 1]).scale(0.5 / h)
            }
        });
        Trajectory::new(self.dt, out)
    }

    /// Cubic Lagrange interpolation through the four nearest samples.
    pub fn interpolate(&self, t: f64) -> Field {
        let n = self.fields.len();
        if n == 1 {
            return self.fields[0].clone();
        }
        let x = t / self.dt;
        let k = x.round();
        if (x - k).abs() < 1e-12 && k >= 0.0 && (k as usize) < n {
            return self.fields[k as usize].clone();
        }
        if n < 4 {
            let k0 = (x.floor() as usize).min(n - 2);
            let w = x - k0 as f64;
            return self.fields[k0].scale(1.0 - w).axpy(w, &self.fields[k0 + 1]);
        }
        let base = (x.floor() as i64 - 1).clamp(0, n as i64 - 4) as usize;
        let nodes: Vec<f64> = (0..4).map(|i| (base + i) as f64).collect();
        let mut out: Option<Field> = None;
        for i in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != i {
                    w *= (x - nodes[m]) / (nodes[i] - nodes[m]);
                }
            }
            let f = &self.fields[base + i];
            out = Some(match out {
                None => f.scale(w),
                Some(acc) => acc.axpy(w, f),
            });
        }
        out.expect("four nodes")
    }

    /// Writes `snapshot_NNNNN.bin` files plus `manifest.json`.
    pub fn save(&self, dir: &Path, scheme: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.len());
        for (k, f) in self.fields.iter().enumerate() {
            let name = format!("snapshot_{k:05}.bin");
            io::save_field(f, &dir.join(&name))?;
            files.push(name);
        }
        let manifest = TrajectoryManifest {
            times: self.times(),
            grid: *self.grid(),
            scheme: scheme.to_string(),
            dt: self.dt,
            files,
            profile_hash: crate::spectral::profile_hash(),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Trajectory, TrajectoryManifest)> {
        let manifest: TrajectoryManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let fields = manifest
            .files
            .iter()
            .map(|name| io::load_field(&dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        Ok((Trajectory::new(manifest.dt, fields)?, manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(samples: usize, dt: f64) -> Trajectory {
        let g = GridSpec::torus(1, 16, 1).unwrap();
        let fields = (0..samples)
            .map(|k| {
                let t = k as f64 * dt;
                Field::from_fn(g, move |x, _| (t * t * t - t) * x[0].sin())
            })
            .collect();
        Trajectory::new(dt, fields).unwrap()
    }

    #[test]
    fn cubic_interpolation_exact_for_cubics() {
        let tr = ramp(8, 0.1);
        let t = 0.33;
        let u = tr.interpolate(t);
        let g = *tr.grid();
        let expect = Field::from_fn(g, move |x, _| (t * t * t - t) * x[0].sin());
        assert!(u.sub(&expect).max_abs() < 1e-13);
    }

    #[test]
    fn fd_derivative_exact_for_quadratics() {
        let g = GridSpec::torus(1, 16, 1).unwrap();
        let dt = 0.1;
        let fields = (0..6)
            .map(|k| {
                let t = k as f64 * dt;
                Field::from_fn(g, move |_, _| t * t)
            })
            .collect();
        let tr = Trajectory::new(dt, fields).unwrap();
        let d = tr.time_derivative().unwrap();
        for k in 0..6 {
            assert!((d.field(k).values()[0] - 2.0 * k as f64 * dt).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(Trajectory::new(0.1, vec![]), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn save_load_roundtrip() {
        let tr = ramp(3, 0.5);
        let dir = std::env::temp_dir().join(format!("hpspec-traj-{}", std::process::id()));
        tr.save(&dir, "test").unwrap();
        let (back, manifest) = Trajectory::load(&dir).unwrap();
        assert_eq!(manifest.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(back.last().values(), tr.last().values());
        let _ = fs::remove_dir_all(&dir);
    }
}
