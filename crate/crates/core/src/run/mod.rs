//! Config-driven pipelines behind the command-line driver.
//!
//! [`run`] executes one [`RunConfig`] and writes everything into one output
//! directory: `manifest.json` always, plus per-command CSV and JSON files.

mod config;
mod data;
mod output;

pub use config::{
    AutoT0, Check, Command, DataTerm, Format, GridConfig, MapName, Monitors, NormConfig, OutputConfig, RunConfig,
    Scheme, SweepConfig, SweepParameter, SweepTarget, SystemConfig, VerifyConfig, SCHEMA,
};
pub use data::build_data;
pub use output::{emit_plot_data, write_wide_csv, Manifest, OutDir, RunDiagnostics, Series, Timing, PLOT_HEADER};

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm, BesovIndex, Exponent};
use crate::error::{Error, Result};
use crate::propagators::ConstantParabolicOp;
use crate::solver::{
    compute_t0, continuation_monitor, default_t0_constants, iterate_subcritical, solve_critical, with_reference,
    IterationConfig, IterationDiagnostics, RunStatus, SolveOutcome,
};
use crate::spectral::io::format_float;
use crate::spectral::{dyadic_block, io::save_field, profile_hash, resample, BlockIndex, Field, FilterBank, Flavor, GridSpec};
use crate::systems::{system_from_config, SystemSpec};
use crate::verifier::{
    verify_apriori_hyperbolic, verify_apriori_parabolic, verify_commutator, verify_composition, verify_garding,
    verify_garding_localized, verify_product_law, Corpus, InequalityReport, LinearRun, ScalarMap,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PHASE: i32 = 3;

/// Exit code for a failed run: phase-space aborts are 3, everything else
/// (bad config values, unreadable files) is 2.
pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_phase_abort() {
        EXIT_PHASE
    } else {
        EXIT_CONFIG
    }
}

/// Overrides that do not belong in the config document.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces `output.dir`.
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    /// One line per result worth printing.
    pub summary: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: OutDir,
    timings: Vec<Timing>,
    summary: Vec<String>,
}

impl Ctx<'_> {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let r = f(self);
        self.timings.push(Timing { stage: stage.into(), seconds: start.elapsed().as_secs_f64() });
        r
    }

    fn csv(&self) -> bool {
        self.cfg.output.formats.contains(&Format::Csv)
    }

    fn json(&self) -> bool {
        self.cfg.output.formats.contains(&Format::Json)
    }
}

/// Runs the pipeline named by `cfg.command`.
///
/// A phase-space abort writes `phase_abort.json` (time, grid point and state
/// of the exit) before the error is returned.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let root = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    crate::par::with_threads(opts.threads, || {
        let mut ctx = Ctx { cfg, out: OutDir::create(&root)?, timings: Vec::new(), summary: Vec::new() };
        let result = match cfg.command {
            Command::Decompose => decompose(&mut ctx),
            Command::Norm => norm(&mut ctx),
            Command::Simulate => simulate(&mut ctx, Scheme::Subcritical),
            Command::SolveCritical => simulate(&mut ctx, Scheme::Critical),
            Command::Verify => verify(&mut ctx),
            Command::Sweep => sweep(&mut ctx),
        };
        let exit_code = match &result {
            Ok(code) => *code,
            Err(e) => {
                if e.is_phase_abort() {
                    ctx.out.write_json("phase_abort.json", &abort_dump(e))?;
                }
                exit_code_for(e)
            }
        };
        write_manifest(&mut ctx, exit_code)?;
        result.map(|code| RunOutcome { exit_code: code, out_dir: root.clone(), summary: ctx.summary })
    })
}

#[derive(Serialize)]
struct AbortDump {
    message: String,
    t: f64,
    point: usize,
    state: Vec<f64>,
    deviation: Option<f64>,
    bound: Option<f64>,
}

fn abort_dump(e: &Error) -> AbortDump {
    let message = e.to_string();
    match e {
        Error::PhaseExit { t, point, state } => {
            AbortDump { message, t: *t, point: *point, state: state.clone(), deviation: None, bound: None }
        }
        Error::Deviation { t, point, deviation, bound } => {
            AbortDump { message, t: *t, point: *point, state: Vec::new(), deviation: Some(*deviation), bound: Some(*bound) }
        }
        _ => AbortDump { message, t: f64::NAN, point: 0, state: Vec::new(), deviation: None, bound: None },
    }
}

fn write_manifest(ctx: &mut Ctx, exit_code: i32) -> Result<()> {
    let mut files = ctx.out.files.clone();
    files.sort();
    files.dedup();
    let manifest = Manifest {
        command: ctx.cfg.command.as_str().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        profile_hash: profile_hash(),
        parallel: crate::par::is_parallel(),
        threads: crate::par::current_threads(),
        exit_code,
        files,
        timings: ctx.timings.clone(),
        config: serde_json::to_value(ctx.cfg)?,
    };
    ctx.out.write_json("manifest.json", &manifest)
}

fn system(cfg: &RunConfig) -> Result<Option<SystemSpec>> {
    let Some(sys) = &cfg.system else { return Ok(None) };
    let spec = system_from_config(&sys.name, &sys.params)
        .map_err(|e| Error::Config { path: "system".into(), message: e.to_string() })?;
    if spec.d != cfg.grid.d {
        return Err(Error::Config {
            path: "grid.d".into(),
            message: format!("system {} is {}-dimensional, grid has d = {}", sys.name, spec.d, cfg.grid.d),
        });
    }
    Ok(Some(spec))
}

fn run_grid(cfg: &RunConfig, spec: Option<&SystemSpec>) -> Result<GridSpec> {
    let n = spec.map_or(cfg.grid.n.unwrap_or(1), SystemSpec::n);
    cfg.grid.grid(n).map_err(|e| Error::Config { path: "grid".into(), message: e.to_string() })
}

fn initial_data(cfg: &RunConfig, grid: GridSpec) -> Result<Field> {
    build_data(grid, &cfg.data, cfg.seed, cfg.base_dir.as_deref())
}

#[derive(Serialize)]
struct DecomposeReport {
    grid: GridSpec,
    j_min: i32,
    j_max: i32,
    guard_radius: f64,
    /// `‖Δ₋₁u + Σ_{j≥0}Δ_ju − u‖ / ‖u‖` (0 for the zero field).
    reconstruction_error: f64,
    profile_hash: String,
}

fn decompose(ctx: &mut Ctx) -> Result<i32> {
    let spec = system(ctx.cfg)?;
    let grid = run_grid(ctx.cfg, spec.as_ref())?;
    let u = initial_data(ctx.cfg, grid)?;
    let bank = FilterBank::for_grid(&grid)?;
    let (rows, recon) = ctx.timed("decompose", |_| {
        let mut rows = Vec::new();
        let mut sum = Field::zeros(grid);
        for flavor in [Flavor::Nonhomogeneous, Flavor::Homogeneous] {
            for j in bank.block_range(flavor) {
                let b = dyadic_block(&u, BlockIndex { j, flavor })?;
                for c in 0..grid.n {
                    rows.push((flavor, j, c, b.select(c..c + 1).l2_norm()));
                }
                if flavor == Flavor::Nonhomogeneous {
                    sum = sum.add(&b);
                }
            }
        }
        let norm = u.l2_norm();
        let err = if norm > 0.0 { sum.sub(&u).l2_norm() / norm } else { 0.0 };
        Ok((rows, err))
    })?;
    if ctx.csv() {
        ctx.out.write_with("blocks.csv", |w| {
            writeln!(w, "flavor,j,component,l2")?;
            for (flavor, j, c, v) in &rows {
                let f = if *flavor == Flavor::Homogeneous { "homogeneous" } else { "nonhomogeneous" };
                writeln!(w, "{f},{j},{c},{}", format_float(*v))?;
            }
            Ok(())
        })?;
    }
    let report = DecomposeReport {
        grid,
        j_min: bank.j_min,
        j_max: bank.j_max,
        guard_radius: bank.guard_radius,
        reconstruction_error: recon,
        profile_hash: profile_hash(),
    };
    if ctx.json() {
        ctx.out.write_json("decompose.json", &report)?;
    }
    save_field(&u, &ctx.out.path("field.hpsf"))?;
    ctx.summary.push(format!("decompose: {} blocks, reconstruction error {:e}", rows.len(), recon));
    Ok(EXIT_OK)
}

fn norm(ctx: &mut Ctx) -> Result<i32> {
    let spec = system(ctx.cfg)?;
    let grid = run_grid(ctx.cfg, spec.as_ref())?;
    let u = initial_data(ctx.cfg, grid)?;
    let nc = ctx.cfg.norm.expect("validated");
    let idx = BesovIndex::new(nc.s, Exponent::Two, nc.r, nc.flavor)
        .map_err(|e| Error::Config { path: "norm.s".into(), message: e.to_string() })?;
    let rec = ctx.timed("norm", |_| besov_norm(&u, idx))?;
    if ctx.csv() {
        ctx.out.write_with("norm.csv", |w| rec.write_csv(w))?;
    }
    if ctx.json() {
        ctx.out.write_json("norm.json", &rec)?;
    }
    ctx.summary.push(format!("norm: s = {}, total = {}", nc.s, rec.total));
    Ok(EXIT_OK)
}

/// `compute_T0` for the config's data, and the iteration config actually run.
fn resolve_iteration(cfg: &RunConfig, spec: &SystemSpec, v0: &Field) -> Result<(f64, IterationConfig)> {
    let mut it = cfg.iteration.expect("validated");
    let op = ConstantParabolicOp::from_system(spec)?;
    let (c, big_c) = default_t0_constants(&op);
    let t0 = compute_t0(&v0.select(spec.n1..spec.n()), it.s, it.eta, c, big_c)
        .map_err(|e| Error::Config { path: "iteration".into(), message: e.to_string() })?;
    if let Some(a) = cfg.auto_t0 {
        it.t = t0;
        it.dt = t0 / a.steps as f64;
    }
    it.validate().map_err(|e| Error::Config { path: "iteration".into(), message: e.to_string() })?;
    Ok((t0, it))
}

fn solve(spec: &SystemSpec, v0: &Field, it: &IterationConfig, scheme: Scheme) -> Result<SolveOutcome> {
    match scheme {
        Scheme::Subcritical => iterate_subcritical(spec, v0, it),
        Scheme::Critical => solve_critical(spec, v0, it),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub run_id: String,
    #[serde(rename = "T0")]
    pub t0: f64,
    pub status: RunStatus,
    pub converged: bool,
    pub iterations: usize,
    pub final_x: f64,
    pub hypotheses_hold: bool,
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    summary: &'a SimulationSummary,
    diagnostics: &'a IterationDiagnostics,
    continuation: Option<&'a crate::solver::ContinuationSeries>,
}

/// Runs one solve and writes its files into `out`.
fn simulate_into(
    cfg: &RunConfig,
    spec: &SystemSpec,
    v0: &Field,
    scheme: Scheme,
    run_id: &str,
    out: &mut OutDir,
) -> Result<(SimulationSummary, RunDiagnostics)> {
    let (t0, it) = resolve_iteration(cfg, spec, v0)?;
    let outcome = match solve(spec, v0, &it, scheme) {
        Ok(o) => o,
        Err(e) => {
            if e.is_phase_abort() {
                out.write_json("phase_abort.json", &abort_dump(&e))?;
            }
            return Err(e);
        }
    };
    let diag = &outcome.diagnostics;
    let traj = &outcome.trajectory;
    let (n, n1) = (spec.n(), spec.n1);
    let s = diag.config.s;
    let times = traj.times();
    let mut plot = RunDiagnostics::new(run_id);
    let mut norms = Vec::new();
    if cfg.monitors.norms {
        let nh = Flavor::Nonhomogeneous;
        norms.push(Series::new(format!("v1_b{s}"), times.clone(), traj.series(nh, 0..n1)?.besov_series(s, Exponent::One)));
        norms.push(Series::new(
            format!("v2_b{}", s - 1.0),
            times.clone(),
            traj.series(nh, n1..n)?.besov_series(s - 1.0, Exponent::One),
        ));
        norms.push(Series::new("v_l2", times.clone(), traj.fields().iter().map(Field::l2_norm).collect()));
        norms.push(Series::new("v_linf", times.clone(), traj.fields().iter().map(Field::linf_norm).collect()));
    }
    let continuation = if cfg.monitors.continuation && traj.len() >= 3 { Some(continuation_monitor(spec, traj)?) } else { None };
    let mut monitors = Vec::new();
    if let Some(c) = &continuation {
        monitors.push(Series::new("continuation_integral", c.t.clone(), c.integral.clone()));
        monitors.push(Series::new("sup_grad_v1", c.t.clone(), c.sup_grad_v1.clone()));
        if let Some(r) = &c.reduced {
            monitors.push(Series::new("continuation_reduced", c.t.clone(), r.clone()));
        }
    }
    let ps: Vec<f64> = diag.records.iter().map(|r| r.p as f64).collect();
    let iters = vec![
        Series::new("x_p", ps.clone(), diag.records.iter().map(|r| r.x).collect()),
        Series::new("residual_p", ps, diag.records.iter().map(|r| r.residual).collect()),
    ];
    let summary = SimulationSummary {
        run_id: run_id.into(),
        t0,
        status: diag.status,
        converged: diag.converged,
        iterations: diag.records.len(),
        final_x: diag.last().map_or(f64::NAN, |r| r.x),
        hypotheses_hold: diag.final_hypotheses_hold(),
    };
    let formats = &cfg.output.formats;
    if formats.contains(&Format::Csv) {
        if !norms.is_empty() {
            out.write_with("norms.csv", |w| write_wide_csv(&norms.iter().collect::<Vec<_>>(), w))?;
        }
        if let Some(c) = &continuation {
            out.write_with("continuation.csv", |w| c.write_csv(w))?;
        }
        out.write_with("iterations.csv", |w| write_wide_csv(&iters.iter().collect::<Vec<_>>(), w))?;
    }
    plot.series.extend(norms);
    plot.series.extend(monitors);
    plot.series.extend(iters);
    if formats.contains(&Format::Csv) {
        out.write_with("plot.csv", |w| emit_plot_data(std::slice::from_ref(&plot), w))?;
    }
    if formats.contains(&Format::Json) {
        out.write_json(
            "diagnostics.json",
            &SimulationReport { summary: &summary, diagnostics: diag, continuation: continuation.as_ref() },
        )?;
    }
    if let Some(stride) = cfg.monitors.snapshot_stride {
        std::fs::create_dir_all(out.root.join("snapshots"))?;
        for k in (0..traj.len()).step_by(stride) {
            save_field(traj.field(k), &out.path(&format!("snapshots/v_{k:05}.hpsf")))?;
        }
    }
    Ok((summary, plot))
}

fn summary_line(s: &SimulationSummary) -> String {
    format!(
        "{}: status {:?}, {} iterations, final X = {:e}, T0 = {:e}, hypotheses {}",
        s.run_id,
        s.status,
        s.iterations,
        s.final_x,
        s.t0,
        if s.hypotheses_hold { "hold" } else { "fail" }
    )
}

fn simulate(ctx: &mut Ctx, scheme: Scheme) -> Result<i32> {
    let spec = system(ctx.cfg)?.expect("validated");
    let grid = run_grid(ctx.cfg, Some(&spec))?;
    let v0 = initial_data(ctx.cfg, grid)?;
    let cfg = ctx.cfg;
    let (summary, _) = ctx.timed("solve", |c| simulate_into(cfg, &spec, &v0, scheme, "run-000", &mut c.out))?;
    ctx.summary.push(summary_line(&summary));
    Ok(EXIT_OK)
}

fn apply_sweep(cfg: &RunConfig, param: SweepParameter, value: f64) -> RunConfig {
    let mut c = cfg.clone();
    let it = c.iteration.as_mut().expect("validated");
    match param {
        SweepParameter::Eta => it.eta = value,
        SweepParameter::T => it.t = value,
        SweepParameter::Dt => it.dt = value,
        SweepParameter::R => it.r = value,
        SweepParameter::S => it.s = value,
        SweepParameter::Amplitude => {}
    }
    c
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    value: f64,
    summary: Option<SimulationSummary>,
    error: Option<String>,
    phase_abort: bool,
}

fn sweep(ctx: &mut Ctx) -> Result<i32> {
    let spec = system(ctx.cfg)?.expect("validated");
    let grid = run_grid(ctx.cfg, Some(&spec))?;
    let v0 = initial_data(ctx.cfg, grid)?;
    let sw = ctx.cfg.sweep.clone().expect("validated");
    let scheme = match sw.target {
        SweepTarget::Simulate => Scheme::Subcritical,
        SweepTarget::SolveCritical => Scheme::Critical,
    };
    let members: Vec<(usize, f64)> = sw.values.iter().copied().enumerate().collect();
    // validate every member before running any of them
    for &(i, v) in &members {
        let c = apply_sweep(ctx.cfg, sw.parameter, v);
        c.validate().map_err(|e| match e {
            Error::Config { path, message } => Error::Config { path: format!("sweep.values[{i}] -> {path}"), message },
            other => other,
        })?;
    }
    let root = ctx.out.root.clone();
    let cfg = ctx.cfg;
    let results = ctx.timed("sweep", |_| {
        Ok(crate::par::map_slice(&members, |&(i, value)| {
            let member = apply_sweep(cfg, sw.parameter, value);
            let data = if sw.parameter == SweepParameter::Amplitude { v0.scale(value) } else { v0.clone() };
            let run_id = format!("run-{i:03}");
            let mut out = OutDir::create(&root.join(&run_id))?;
            let r = simulate_into(&member, &spec, &data, scheme, &run_id, &mut out);
            let files: Vec<String> = out.files.iter().map(|f| format!("{run_id}/{f}")).collect();
            Ok::<_, Error>((r, files))
        }))
    })?;
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (&(_, value), res) in members.iter().zip(results) {
        let (r, files): (Result<(SimulationSummary, RunDiagnostics)>, Vec<String>) = res?;
        ctx.out.files.extend(files);
        match r {
            Ok((summary, plot)) => {
                ctx.summary.push(summary_line(&summary));
                plots.push(plot);
                rows.push(SweepRow { value, summary: Some(summary), error: None, phase_abort: false });
            }
            Err(e) if e.is_phase_abort() => {
                ctx.summary.push(format!("sweep member {value}: {e}"));
                rows.push(SweepRow { value, summary: None, error: Some(e.to_string()), phase_abort: true });
            }
            Err(e) => return Err(e),
        }
    }
    let pname = serde_json::to_value(sw.parameter)?.as_str().unwrap_or("value").to_string();
    ctx.out.write_with("sweep.csv", |w| {
        writeln!(w, "run_id,{pname},T0,status,converged,iterations,final_x")?;
        for (i, r) in rows.iter().enumerate() {
            match &r.summary {
                Some(s) => writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    s.run_id,
                    format_float(r.value),
                    format_float(s.t0),
                    serde_json::to_value(s.status)?.as_str().unwrap_or(""),
                    s.converged,
                    s.iterations,
                    format_float(s.final_x)
                )?,
                None => writeln!(w, "run-{i:03},{},NaN,phase-abort,false,0,NaN", format_float(r.value))?,
            }
        }
        Ok(())
    })?;
    ctx.out.write_with("plot.csv", |w| emit_plot_data(&plots, w))?;
    if ctx.json() {
        ctx.out.write_json("sweep.json", &rows)?;
    }
    Ok(if rows.iter().any(|r| r.phase_abort) { EXIT_PHASE } else { EXIT_OK })
}

fn scalar_map(m: MapName) -> ScalarMap {
    match m {
        MapName::Identity => ScalarMap::identity(),
        MapName::Square => ScalarMap::square(),
        MapName::Sin => ScalarMap::sin(),
        MapName::ExpM1 => ScalarMap::exp_m1(),
    }
}

fn corpus_reports(corpus: &Corpus, check: &Check) -> Result<Vec<InequalityReport>> {
    match *check {
        Check::Product { s } => verify_product_law(corpus, s),
        Check::Commutator { sigma, form } => Ok(vec![verify_commutator(corpus, sigma, form)?]),
        Check::Composition { map, s } => verify_composition(corpus, &scalar_map(map), s),
        _ => unreachable!("not a corpus check"),
    }
}

fn pair_up(base: Vec<InequalityReport>, refined: Option<Vec<InequalityReport>>) -> Vec<InequalityReport> {
    match refined {
        Some(r) => base.into_iter().zip(&r).map(|(a, b)| a.with_refinement(b)).collect(),
        None => base,
    }
}

/// Runs a solve at `dt` (and `dt/2` when refining) for the a priori checks.
struct TrajectoryRuns {
    base: SolveOutcome,
    half: Option<SolveOutcome>,
}

fn trajectory_runs(cfg: &RunConfig, spec: &SystemSpec, v0: &Field, scheme: Scheme, refine: bool) -> Result<TrajectoryRuns> {
    let (_, it) = resolve_iteration(cfg, spec, v0)?;
    let base = solve(spec, v0, &it, scheme)?;
    let half = if refine { Some(solve(spec, v0, &IterationConfig { dt: it.dt / 2.0, ..it }, scheme)?) } else { None };
    Ok(TrajectoryRuns { base, half })
}

fn verify(ctx: &mut Ctx) -> Result<i32> {
    let cfg = ctx.cfg;
    let vc = cfg.verify.clone().expect("validated");
    let spec = system(cfg)?;
    let scalar = cfg.grid.grid(1).map_err(|e| Error::Config { path: "grid".into(), message: e.to_string() })?;
    let needs_corpus = vc.checks.iter().any(|c| {
        matches!(c, Check::Product { .. } | Check::Commutator { .. } | Check::Composition { .. } | Check::Garding { .. } | Check::GardingLocalized)
    });
    let (corpus, refined) = if needs_corpus {
        ctx.timed("corpus", |_| {
            let c = Corpus::generate(scalar, cfg.seed, vc.per_family)?;
            let r = if vc.refine { Some(c.refined()?) } else { None };
            Ok((Some(c), r))
        })?
    } else {
        (None, None)
    };
    let state = match &spec {
        Some(s) => {
            let grid = run_grid(cfg, Some(s))?;
            let v0 = initial_data(cfg, grid)?;
            Some((with_reference(s, &v0), v0))
        }
        None => None,
    };
    let mut runs: [Option<TrajectoryRuns>; 2] = [None, None];
    let mut reports = Vec::new();
    for (i, check) in vc.checks.iter().enumerate() {
        let stage = format!("check[{i}]");
        let batch = ctx.timed(&stage, |_| -> Result<Vec<InequalityReport>> {
            match *check {
                Check::Product { .. } | Check::Commutator { .. } | Check::Composition { .. } => {
                    let base = corpus_reports(corpus.as_ref().expect("built"), check)?;
                    let fine = refined.as_ref().map(|r| corpus_reports(r, check)).transpose()?;
                    Ok(pair_up(base, fine))
                }
                Check::Garding { .. } | Check::GardingLocalized => {
                    let spec = spec.as_ref().expect("validated");
                    let (u, _) = state.as_ref().expect("validated");
                    let eval = |u: &Field, c: &Corpus| -> Result<InequalityReport> {
                        let fs = c.vector_fields(spec.n2);
                        match *check {
                            Check::Garding { epsilon } => verify_garding(spec, u, &fs, epsilon),
                            _ => verify_garding_localized(spec, u, &fs),
                        }
                    };
                    let base = eval(u, corpus.as_ref().expect("built"))?;
                    let fine = match &refined {
                        Some(r) => Some(eval(&resample(u, r.grid.n_points)?, r)?),
                        None => None,
                    };
                    Ok(pair_up(vec![base], fine.map(|f| vec![f])))
                }
                Check::AprioriHyperbolic { scheme, .. } | Check::AprioriParabolic { scheme, .. } => {
                    let spec = spec.as_ref().expect("validated");
                    let (_, v0) = state.as_ref().expect("validated");
                    let slot = &mut runs[scheme as usize];
                    if slot.is_none() {
                        *slot = Some(trajectory_runs(cfg, spec, v0, scheme, vc.refine)?);
                    }
                    let tr = slot.as_ref().expect("just set");
                    let eval = |o: &SolveOutcome| -> Result<InequalityReport> {
                        let lr = LinearRun::from_outcome(spec, o);
                        match *check {
                            Check::AprioriHyperbolic { sigma, .. } => verify_apriori_hyperbolic(&lr, sigma).map(|r| r.0),
                            Check::AprioriParabolic { s, .. } => verify_apriori_parabolic(&lr, s).map(|r| r.0),
                            _ => unreachable!(),
                        }
                    };
                    let base = eval(&tr.base)?;
                    let fine = tr.half.as_ref().map(eval).transpose()?;
                    Ok(pair_up(vec![base], fine.map(|f| vec![f])))
                }
            }
        })?;
        reports.extend(batch);
    }
    for r in &reports {
        ctx.summary.push(format!("{} {}", if r.passed() { "PASS" } else { "FAIL" }, r.summary()));
    }
    if ctx.csv() {
        ctx.out.write_with("verify.csv", |w| {
            writeln!(w, "name,instances,fitted_c,refined_c,stable,violations,passed")?;
            for r in &reports {
                let refined = r.refined_c.map(format_float).unwrap_or_default();
                let stable = r.stable.map(|s| s.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r.name,
                    r.instances.len(),
                    format_float(r.fitted_c),
                    refined,
                    stable,
                    r.violations.len(),
                    r.passed()
                )?;
            }
            Ok(())
        })?;
    }
    if ctx.json() {
        ctx.out.write_json("reports.json", &reports)?;
    }
    Ok(exit_code_for_reports(&reports))
}

/// 1 when any report has a violation, a non-finite constant or an unstable
/// constant; 0 otherwise.
pub fn exit_code_for_reports(reports: &[InequalityReport]) -> i32 {
    if reports.iter().all(InequalityReport::passed) {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}
