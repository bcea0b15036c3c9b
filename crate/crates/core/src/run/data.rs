//! Initial data from config terms.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::DataTerm;
use crate::error::{Error, Result};
use crate::spectral::{io::load_field, Field, GridSpec};

fn config_error(path: String, message: String) -> Error {
    Error::Config { path, message }
}

/// Sum of the terms on `grid` (all `grid.n` components); zero when `terms` is empty.
pub fn build_data(grid: GridSpec, terms: &[DataTerm], seed: u64, base_dir: Option<&Path>) -> Result<Field> {
    let mut acc = Field::zeros(grid);
    for (i, t) in terms.iter().enumerate() {
        let path = format!("data[{i}]");
        let check = |c: usize| {
            if c < grid.n {
                Ok(c)
            } else {
                Err(config_error(format!("{path}.component"), format!("must be below n = {}", grid.n)))
            }
        };
        let term = match t {
            DataTerm::Mode { component, k, amplitude, phase } => {
                let c = check(*component)?;
                let k0 = grid.k0();
                let (a, ph) = (*amplitude, *phase);
                Field::from_fn(grid, |x, comp| {
                    if comp != c {
                        return 0.0;
                    }
                    let arg: f64 = k.iter().zip(x).map(|(&ka, xa)| ka as f64 * k0 * xa).sum();
                    a * (arg + ph).cos()
                })
            }
            DataTerm::Bump { component, amplitude, width, center } => {
                let c = check(*component)?;
                let l = grid.length;
                let centre = center.clone().unwrap_or_else(|| vec![l / 2.0; grid.d]);
                let (a, w) = (*amplitude, *width);
                Field::from_fn(grid, |x, comp| {
                    if comp != c {
                        return 0.0;
                    }
                    let r2: f64 = (0..grid.d)
                        .map(|ax| {
                            let mut dx = (x[ax] - centre[ax]).rem_euclid(l);
                            if dx > l / 2.0 {
                                dx -= l;
                            }
                            dx * dx
                        })
                        .sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
            }
            DataTerm::Random { component, amplitude, band, slope } => {
                let c = check(*component)?;
                random_term(grid, c, *amplitude, *band, slope.unwrap_or(-((grid.d + 1) as f64) / 2.0), seed ^ i as u64)
            }
            DataTerm::File { path: p } => {
                let full = match base_dir {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let f = load_field(&full).map_err(|e| config_error(format!("{path}.path"), e.to_string()))?;
                if *f.grid() != grid {
                    return Err(config_error(
                        format!("{path}.path"),
                        format!("field grid {:?} differs from the run grid {:?}", f.grid(), grid),
                    ));
                }
                f
            }
        };
        acc = acc.add(&term);
    }
    Ok(acc)
}

fn random_term(grid: GridSpec, c: usize, amplitude: f64, band: i64, slope: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalar = grid.with_components(1);
    let spec: Vec<Complex64> = (0..scalar.points())
        .map(|p| {
            let k = scalar.integer_wavevector(p);
            let r = k[..grid.d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            // draw for every mode so the stream does not depend on the band
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if r >= 1.0 && r <= band as f64 {
                z * r.powf(slope)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let f = Field::from_spectrum(scalar, spec);
    let m = f.max_abs();
    let f = if m > 0.0 { f.scale(amplitude / m) } else { f };
    let parts: Vec<Field> =
        (0..grid.n).map(|k| if k == c { f.clone() } else { Field::zeros(scalar) }).collect();
    let refs: Vec<&Field> = parts.iter().collect();
    Field::concat(&refs).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_add_up() {
        let g = GridSpec::torus(1, 32, 2).unwrap();
        let terms = vec![
            DataTerm::Mode { component: 1, k: vec![2], amplitude: 0.5, phase: 0.0 },
            DataTerm::Random { component: 0, amplitude: 0.3, band: 4, slope: None },
        ];
        let f = build_data(g, &terms, 9, None).unwrap();
        assert!((f.component(1)[0] - 0.5).abs() < 1e-15);
        assert!((f.select(0..1).max_abs() - 0.3).abs() < 1e-14);
        assert_eq!(f.values(), build_data(g, &terms, 9, None).unwrap().values());
        assert!(build_data(g, &[], 0, None).unwrap().is_zero());
        let bad = [DataTerm::Mode { component: 2, k: vec![1], amplitude: 1.0, phase: 0.0 }];
        assert!(matches!(build_data(g, &bad, 0, None), Err(Error::Config { .. })));
    }
}
