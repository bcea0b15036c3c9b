//! d-dimensional complex FFTs built from rustfft line transforms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

const LINES_PER_TASK: usize = 64;

fn transform_axis(data: &mut [Complex64], n: usize, d: usize, axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let stride = n.pow((d - 1 - axis) as u32);
    if stride == 1 {
        par::for_each_chunk_mut(data, n * LINES_PER_TASK, |_, chunk| fft.process(chunk));
        return;
    }
    let lines = data.len() / n;
    let tasks = lines.div_ceil(LINES_PER_TASK);
    // line l = (outer, inner): start = outer * n * stride + inner, step = stride
    let line_start = |l: usize| (l / stride) * n * stride + (l % stride);
    let src: &[Complex64] = data;
    let buffers = par::map_range(tasks, |t| {
        let lo = t * LINES_PER_TASK;
        let hi = (lo + LINES_PER_TASK).min(lines);
        let mut buf = Vec::with_capacity((hi - lo) * n);
        for l in lo..hi {
            let s = line_start(l);
            buf.extend((0..n).map(|i| src[s + i * stride]));
        }
        fft.process(&mut buf);
        buf
    });
    for (t, buf) in buffers.into_iter().enumerate() {
        let lo = t * LINES_PER_TASK;
        for (li, line) in buf.chunks(n).enumerate() {
            let s = line_start(lo + li);
            for (i, v) in line.iter().enumerate() {
                data[s + i * stride] = *v;
            }
        }
    }
}

/// In-place unnormalized forward transform of one component.
pub fn forward(data: &mut [Complex64], n: usize, d: usize) {
    let (f, _) = plans(n);
    for axis in (0..d).rev() {
        transform_axis(data, n, d, axis, &f);
    }
}

/// In-place inverse transform, scaled by `1/N^d`.
pub fn inverse(data: &mut [Complex64], n: usize, d: usize) {
    let (_, b) = plans(n);
    for axis in (0..d).rev() {
        transform_axis(data, n, d, axis, &b);
    }
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

pub fn forward_real(values: &[f64], n: usize, d: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&mut buf, n, d);
    buf
}

pub fn inverse_real(spectrum: &[Complex64], n: usize, d: usize) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    inverse(&mut buf, n, d);
    buf.into_iter().map(|c| c.re).collect()
}
