//! Experiment drivers behind the command-line interface.
//!
//! Every command writes plot-ready CSV (and field snapshots) below
//! `<out_dir>/<command>/`. Independent (scheme, step) cells run in parallel;
//! each cell owns its state, so outputs do not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Experiment, IcKind, RunConfig};
use crate::diagnostics::{convergence_rates, error_norms, InvariantRecord};
use crate::error::{Error, Result};
use crate::fieldio::{write_field, SnapshotWriter};
use crate::grid::{Field, PeriodicGrid};
use crate::operators::RlwOperator;
use crate::problems::{maxwellian_ic, soliton_1d, trig_ic_2d, two_soliton_ic, undular_bore_ic, SolitonParams};
use crate::schemes::{run, InvariantRecorder, Observer, RunSummary, SchemeKind, SchemeState};

/// Files written by a command and the cells whose solvers failed.
#[derive(Debug, Default)]
pub struct ExperimentReport {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

pub fn build_grid(cfg: &RunConfig) -> Result<Arc<PeriodicGrid>> {
    PeriodicGrid::new(&cfg.bounds, &cfg.n)
}

pub fn initial_field(cfg: &RunConfig, grid: &Arc<PeriodicGrid>) -> Field {
    let ic = &cfg.ic;
    match ic.kind {
        IcKind::Soliton => soliton_1d(grid, &cfg.params, &SolitonParams::new(ic.c, ic.x0), 0.0),
        IcKind::TwoSoliton => two_soliton_ic(
            grid,
            &cfg.params,
            &SolitonParams::new(ic.c, ic.x0),
            &SolitonParams::new(ic.c2, ic.x2),
        ),
        IcKind::Trig => trig_ic_2d(grid),
        IcKind::Bore => undular_bore_ic(grid, ic.x0, ic.y0, ic.d),
        IcKind::Maxwellian => maxwellian_ic(grid, ic.x0, ic.y0),
    }
}

/// Exact solution at `t`, when one is known.
pub fn exact_solution(cfg: &RunConfig, grid: &Arc<PeriodicGrid>, t: f64) -> Option<Field> {
    (cfg.ic.kind == IcKind::Soliton)
        .then(|| soliton_1d(grid, &cfg.params, &SolitonParams::new(cfg.ic.c, cfg.ic.x0), t))
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn experiment_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.join(cfg.experiment.tag());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// One cell of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: SchemeKind,
    pub tau: f64,
    pub e2: Option<f64>,
    pub e_inf: Option<f64>,
    pub order2: Option<f64>,
    pub order_inf: Option<f64>,
    pub linear_iterations: usize,
    pub seconds: f64,
    /// Failure message of the cell, if it did not finish.
    pub failure: Option<String>,
    pub solver_failure: bool,
}

fn run_cell(
    kind: SchemeKind,
    tau: f64,
    cfg: &RunConfig,
    op: &Arc<RlwOperator>,
    u0: &Field,
    reference: &Field,
) -> ConvergenceRow {
    let start = Instant::now();
    let outcome = SchemeState::new(kind, Arc::clone(op), u0.clone(), tau, &cfg.scheme_options()).and_then(|mut s| {
        let summary = run(&mut s, cfg.t_end, &mut [])?;
        let (e2, e_inf) = error_norms(s.u(), reference)?;
        Ok((summary, e2, e_inf))
    });
    let mut row = ConvergenceRow {
        scheme: kind,
        tau,
        e2: None,
        e_inf: None,
        order2: None,
        order_inf: None,
        linear_iterations: 0,
        seconds: 0.0,
        failure: None,
        solver_failure: false,
    };
    match outcome {
        Ok((summary, e2, e_inf)) => {
            row.e2 = Some(e2);
            row.e_inf = Some(e_inf);
            row.linear_iterations = summary.linear_iterations;
        }
        Err(e) => {
            warn!("{kind} at tau = {tau}: {e}");
            row.solver_failure = e.is_solver_failure();
            row.failure = Some(e.to_string());
        }
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

fn fill_orders(rows: &mut [ConvergenceRow]) {
    for i in 1..rows.len() {
        if rows[i].scheme != rows[i - 1].scheme {
            continue;
        }
        let pair = |f: fn(&ConvergenceRow) -> Option<f64>| -> Option<f64> {
            let (a, b) = (f(&rows[i - 1])?, f(&rows[i])?);
            let ratio = rows[i - 1].tau / rows[i].tau;
            convergence_rates(&[a, b]).ok().map(|r| r[0] / ratio.log2())
        };
        let (o2, oinf) = (pair(|r| r.e2), pair(|r| r.e_inf));
        rows[i].order2 = o2;
        rows[i].order_inf = oinf;
    }
}

/// Errors against `reference` at `cfg.t_end` for every scheme and step of
/// its ladder, with observed orders between consecutive steps.
pub fn convergence_rows(
    cfg: &RunConfig,
    op: &Arc<RlwOperator>,
    u0: &Field,
    reference: &Field,
    parallel: bool,
) -> Vec<ConvergenceRow> {
    let cells: Vec<(SchemeKind, f64)> = cfg
        .schemes
        .iter()
        .flat_map(|&k| cfg.ladder(k).into_iter().map(move |t| (k, t)))
        .collect();
    let mut rows: Vec<ConvergenceRow> = if parallel {
        cells
            .par_iter()
            .map(|&(k, t)| run_cell(k, t, cfg, op, u0, reference))
            .collect()
    } else {
        cells.iter().map(|&(k, t)| run_cell(k, t, cfg, op, u0, reference)).collect()
    };
    fill_orders(&mut rows);
    rows
}

fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "tau", "e2", "order2", "einf", "orderinf", "status"])?;
    for r in rows {
        w.write_record([
            r.scheme.tag().to_string(),
            fmt(r.tau),
            fmt_opt(r.e2),
            fmt_opt(r.order2),
            fmt_opt(r.e_inf),
            fmt_opt(r.order_inf),
            r.failure.clone().unwrap_or_else(|| "ok".into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn failures_of(rows: &[ConvergenceRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| r.solver_failure)
        .map(|r| format!("{} tau={}: {}", r.scheme, r.tau, r.failure.as_deref().unwrap_or("")))
        .collect()
}

fn require_dim(cfg: &RunConfig, dim: usize) -> Result<()> {
    if cfg.dim() == dim {
        Ok(())
    } else {
        Err(Error::Config(format!("{} needs a {dim}D grid", cfg.experiment)))
    }
}

/// Temporal convergence on the travelling soliton against its exact solution.
pub fn cmd_converge1d(cfg: &RunConfig) -> Result<ExperimentReport> {
    require_dim(cfg, 1)?;
    let grid = build_grid(cfg)?;
    let op = Arc::new(RlwOperator::new(&grid, cfg.params)?);
    let u0 = initial_field(cfg, &grid);
    let exact = exact_solution(cfg, &grid, cfg.t_end)
        .ok_or_else(|| Error::Config("converge1d needs the soliton initial condition".into()))?;
    let rows = convergence_rows(cfg, &op, &u0, &exact, true);
    let path = experiment_dir(cfg)?.join("errors.csv");
    write_convergence_csv(&path, &rows)?;
    Ok(ExperimentReport {
        files: vec![path],
        failures: failures_of(&rows),
    })
}

/// Error against work for every scheme; cells run one at a time so the
/// timings are comparable.
pub fn cmd_efficiency(cfg: &RunConfig) -> Result<ExperimentReport> {
    require_dim(cfg, 1)?;
    let grid = build_grid(cfg)?;
    let op = Arc::new(RlwOperator::new(&grid, cfg.params)?);
    let u0 = initial_field(cfg, &grid);
    let exact = exact_solution(cfg, &grid, cfg.t_end)
        .ok_or_else(|| Error::Config("efficiency needs the soliton initial condition".into()))?;
    let rows = convergence_rows(cfg, &op, &u0, &exact, false);
    let dir = experiment_dir(cfg)?;

    let path = dir.join("errors.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["scheme", "tau", "e2", "einf", "linear_iterations", "status"])?;
    for r in &rows {
        w.write_record([
            r.scheme.tag().to_string(),
            fmt(r.tau),
            fmt_opt(r.e2),
            fmt_opt(r.e_inf),
            r.linear_iterations.to_string(),
            r.failure.clone().unwrap_or_else(|| "ok".into()),
        ])?;
    }
    w.flush()?;

    // Wall-clock figures vary between runs, so they live in their own file.
    let timing = dir.join("timing.csv");
    let mut w = csv::Writer::from_path(&timing)?;
    w.write_record(["scheme", "tau", "seconds"])?;
    for r in &rows {
        w.write_record([r.scheme.tag().to_string(), fmt(r.tau), format!("{:.6}", r.seconds)])?;
    }
    w.flush()?;
    Ok(ExperimentReport {
        files: vec![path, timing],
        failures: failures_of(&rows),
    })
}

/// Temporal convergence in 2D against a small-step self-reference.
pub fn cmd_converge2d(cfg: &RunConfig) -> Result<ExperimentReport> {
    require_dim(cfg, 2)?;
    let grid = build_grid(cfg)?;
    let op = Arc::new(RlwOperator::new(&grid, cfg.params)?);
    let u0 = initial_field(cfg, &grid);
    let dir = experiment_dir(cfg)?;
    let reference = reference_solution(cfg, &op, &u0)?;
    let ref_path = dir.join("reference_u.txt");
    write_field(&ref_path, &reference, cfg.t_end)?;
    let rows = convergence_rows(cfg, &op, &u0, &reference, true);
    let path = dir.join("errors.csv");
    write_convergence_csv(&path, &rows)?;
    Ok(ExperimentReport {
        files: vec![ref_path, path],
        failures: failures_of(&rows),
    })
}

/// Solution at `cfg.t_end` by the reference scheme and step.
pub fn reference_solution(cfg: &RunConfig, op: &Arc<RlwOperator>, u0: &Field) -> Result<Field> {
    info!(
        "reference run: {} at tau = {} to t = {}",
        cfg.reference_scheme, cfg.reference_tau, cfg.t_end
    );
    let mut state = SchemeState::new(
        cfg.reference_scheme,
        Arc::clone(op),
        u0.clone(),
        cfg.reference_tau,
        &cfg.scheme_options(),
    )?;
    run(&mut state, cfg.t_end, &mut [])?;
    Ok(state.u().clone())
}

/// Tracks the largest `max |u|` seen along a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct PeakTracker {
    pub peak: f64,
}

impl Observer for PeakTracker {
    fn observe(&mut self, state: &SchemeState) -> Result<()> {
        self.peak = self.peak.max(state.u().max_abs());
        Ok(())
    }
}

/// Outcome of one scheme's trajectory run.
#[derive(Debug)]
pub struct Trajectory {
    pub scheme: SchemeKind,
    pub records: Vec<InvariantRecord>,
    pub summary: Option<RunSummary>,
    pub failure: Option<String>,
    pub solver_failure: bool,
    pub t_reached: f64,
    pub peak: f64,
    pub bounded: bool,
    pub e2: Option<f64>,
    pub final_u: Field,
    pub snapshots: Vec<PathBuf>,
}

impl Trajectory {
    /// `max_n |f(record_n) - f(record_0)|`.
    pub fn max_drift(&self, f: impl Fn(&InvariantRecord) -> Option<f64>) -> Option<f64> {
        let first = f(self.records.first()?)?;
        self.records
            .iter()
            .map(|r| f(r).map(|v| (v - first).abs()))
            .try_fold(0.0f64, |m, d| Some(m.max(d?)))
    }
}

/// Runs every configured scheme from the configured initial condition to
/// `cfg.t_end`, recording invariants and, if `snapshot_dir` is given, field
/// snapshots.
pub fn trajectories(cfg: &RunConfig, snapshot_dir: Option<&Path>) -> Result<Vec<Trajectory>> {
    let grid = build_grid(cfg)?;
    let op = Arc::new(RlwOperator::new(&grid, cfg.params)?);
    let u0 = initial_field(cfg, &grid);
    let initial_peak = u0.max_abs();
    let exact = exact_solution(cfg, &grid, cfg.t_end);
    cfg.schemes
        .par_iter()
        .map(|&kind| {
            let mut state = SchemeState::new(kind, Arc::clone(&op), u0.clone(), cfg.tau, &cfg.scheme_options())?;
            let mut rec = InvariantRecorder::new(cfg.invariant_stride);
            let mut peak = PeakTracker::default();
            let mut snaps = snapshot_dir.map(|dir| match &cfg.snapshot_times {
                Some(times) => SnapshotWriter::at_times(dir, kind.tag(), times),
                None => SnapshotWriter::every(dir, kind.tag(), cfg.snapshot_stride),
            });
            let outcome = {
                let mut observers: Vec<&mut dyn Observer> = vec![&mut rec, &mut peak];
                if let Some(s) = snaps.as_mut() {
                    observers.push(s);
                }
                run(&mut state, cfg.t_end, &mut observers)
            };
            let (summary, failure, solver_failure) = match outcome {
                Ok(s) => (Some(s), None, false),
                // Configuration problems abort the whole command.
                Err(e) if !e.is_solver_failure() && !matches!(e, Error::RunAborted { .. }) => return Err(e),
                Err(e) => {
                    warn!("{kind}: {e}");
                    (None, Some(e.to_string()), e.is_solver_failure())
                }
            };
            let finite = state.u().is_finite();
            let e2 = match (&exact, summary.is_some()) {
                (Some(x), true) => Some(error_norms(state.u(), x)?.0),
                _ => None,
            };
            Ok(Trajectory {
                scheme: kind,
                records: rec.records,
                bounded: summary.is_some() && finite && peak.peak <= cfg.blowup_factor * initial_peak,
                summary,
                failure,
                solver_failure,
                t_reached: state.t(),
                peak: peak.peak,
                e2,
                final_u: state.u().clone(),
                snapshots: snaps.map(|s| s.written).unwrap_or_default(),
            })
        })
        .collect()
}

fn write_invariants_csv(path: &Path, records: &[InvariantRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "mass",
        "momentum",
        "hamiltonian",
        "quad_energy",
        "mass_drift",
        "momentum_drift",
        "hamiltonian_drift",
        "quad_energy_drift",
    ])?;
    let Some(first) = records.first() else {
        w.flush()?;
        return Ok(());
    };
    for r in records {
        w.write_record([
            fmt(r.t),
            fmt(r.mass),
            fmt(r.momentum),
            fmt(r.hamiltonian),
            fmt_opt(r.quad_energy),
            fmt((r.mass - first.mass).abs()),
            fmt((r.momentum - first.momentum).abs()),
            fmt((r.hamiltonian - first.hamiltonian).abs()),
            fmt_opt(r.quad_energy.zip(first.quad_energy).map(|(a, b)| (a - b).abs())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, cfg: &RunConfig, runs: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scheme",
        "tau",
        "t_reached",
        "completed",
        "bounded",
        "peak",
        "max_mass_drift",
        "max_momentum_drift",
        "max_hamiltonian_drift",
        "max_quad_energy_drift",
        "e2",
        "status",
    ])?;
    for r in runs {
        w.write_record([
            r.scheme.tag().to_string(),
            fmt(cfg.tau),
            fmt(r.t_reached),
            r.summary.is_some().to_string(),
            r.bounded.to_string(),
            fmt(r.peak),
            fmt_opt(r.max_drift(|x| Some(x.mass))),
            fmt_opt(r.max_drift(|x| Some(x.momentum))),
            fmt_opt(r.max_drift(|x| Some(x.hamiltonian))),
            fmt_opt(r.max_drift(|x| x.quad_energy)),
            fmt_opt(r.e2),
            r.failure.clone().unwrap_or_else(|| "ok".into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory commands: invariant series, snapshots and a summary table.
pub fn cmd_trajectories(cfg: &RunConfig) -> Result<ExperimentReport> {
    let dir = experiment_dir(cfg)?;
    let runs = trajectories(cfg, Some(&dir))?;
    let mut report = ExperimentReport::default();
    for r in &runs {
        let path = dir.join(format!("{}_invariants.csv", r.scheme.tag()));
        write_invariants_csv(&path, &r.records)?;
        report.files.push(path);
        report.files.extend(r.snapshots.iter().cloned());
        if r.solver_failure {
            report
                .failures
                .push(format!("{}: {}", r.scheme, r.failure.as_deref().unwrap_or("")));
        }
    }
    let path = dir.join("summary.csv");
    write_summary_csv(&path, cfg, &runs)?;
    report.files.push(path);
    Ok(report)
}

pub fn cmd_two_soliton(cfg: &RunConfig) -> Result<ExperimentReport> {
    require_dim(cfg, 1)?;
    cmd_trajectories(cfg)
}

/// Undular bore or Maxwellian pulse.
pub fn cmd_field_demo(cfg: &RunConfig) -> Result<ExperimentReport> {
    require_dim(cfg, 2)?;
    cmd_trajectories(cfg)
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        Experiment::Converge1d => cmd_converge1d(cfg),
        Experiment::Efficiency => cmd_efficiency(cfg),
        Experiment::TwoSoliton => cmd_two_soliton(cfg),
        Experiment::Converge2d => cmd_converge2d(cfg),
        Experiment::Bore2d | Experiment::Maxwellian2d => cmd_field_demo(cfg),
        Experiment::Custom => cmd_trajectories(cfg),
    }
}
