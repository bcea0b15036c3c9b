//! Tidy CSV export, manifests and small file helpers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::io::format_float;

/// One tracked quantity of one run: `values[k]` at abscissa `t[k]`.
///
/// Time series use time as the abscissa; iteration series (`X_p`, residuals)
/// use the iteration index `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub metric: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(metric: impl Into<String>, t: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(t.len(), values.len(), "series abscissa and values differ in length");
        Series { metric: metric.into(), t, values }
    }
}

/// Everything a run contributes to the plot data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub run_id: String,
    pub series: Vec<Series>,
}

impl RunDiagnostics {
    pub fn new(run_id: impl Into<String>) -> Self {
        RunDiagnostics { run_id: run_id.into(), series: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.series.iter().map(|s| s.values.len()).sum()
    }
}

pub const PLOT_HEADER: &str = "run_id,t,metric,value";

/// Long-format CSV `run_id,t,metric,value`, one row per sample; a header
/// alone when there is nothing to emit.
pub fn emit_plot_data<W: Write>(runs: &[RunDiagnostics], mut w: W) -> Result<()> {
    writeln!(w, "{PLOT_HEADER}")?;
    for run in runs {
        for s in &run.series {
            for (t, v) in s.t.iter().zip(&s.values) {
                writeln!(w, "{},{},{},{}", run.run_id, format_float(*t), s.metric, format_float(*v))?;
            }
        }
    }
    Ok(())
}

/// Wide CSV with a `t` column and one column per series. All series must
/// share the abscissa of the first.
pub fn write_wide_csv<W: Write>(series: &[&Series], mut w: W) -> Result<()> {
    let mut header = String::from("t");
    for s in series {
        header.push(',');
        header.push_str(&s.metric);
    }
    writeln!(w, "{header}")?;
    let Some(first) = series.first() else { return Ok(()) };
    for (k, t) in first.t.iter().enumerate() {
        let mut line = format_float(*t);
        for s in series {
            line.push(',');
            line.push_str(&format_float(s.values[k]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub profile_hash: String,
    pub parallel: bool,
    pub threads: usize,
    pub exit_code: i32,
    pub files: Vec<String>,
    pub timings: Vec<Timing>,
    pub config: serde_json::Value,
}

/// Collects the files of one output directory.
pub struct OutDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn write_with<F: FnOnce(&mut dyn Write) -> Result<()>>(&mut self, name: &str, f: F) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_data_is_header_only() {
        let mut buf = Vec::new();
        emit_plot_data(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{PLOT_HEADER}\n"));
    }

    #[test]
    fn rows_and_precision() {
        let mut run = RunDiagnostics::new("a");
        run.series.push(Series::new("x", vec![0.0, 0.1], vec![1.0 / 3.0, 2.0]));
        run.series.push(Series::new("y", vec![0.0, 0.1], vec![0.0, -1e-300]));
        let mut buf = Vec::new();
        emit_plot_data(&[run.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + run.rows());
        let v: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
        let tiny: f64 = lines[4].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(tiny, -1e-300);
    }
}
