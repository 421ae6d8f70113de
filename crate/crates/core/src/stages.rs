//! Runge-Kutta stage equations of the linearized schemes.
//!
//! The correction (and extrapolation) steps freeze the nonlinear coefficient
//! at predicted stage values `ustar` and solve a linear system for all `s`
//! slopes at once. The system is stacked as `[k_1, ..., k_s]` and handed to
//! GMRES with the spectral operators applied matrix-free.
//!
//! The prediction steps are explicit fixed-point sweeps of the fully
//! nonlinear Gauss stage equations; run to convergence they give the
//! nonlinear Gauss step used to start the extrapolation schemes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmres::gmres;
use crate::grid::Field;
use crate::operators::RlwOperator;
use crate::tableau::ButcherTableau;

/// How the linear stage system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Krylov,
    FixedPoint,
}

/// Initial slopes of the prediction sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictInit {
    /// `k_i^0 = u^n`.
    State,
    /// `k_i^0 = 0`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub rel_tol: f64,
    pub max_krylov_iters: usize,
    pub restart: usize,
    pub method: SolveMethod,
    pub predict_init: PredictInit,
    /// Relative slope-update tolerance of the nonlinear startup step.
    pub startup_tol: f64,
    pub startup_max_sweeps: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            rel_tol: 1e-13,
            max_krylov_iters: 500,
            restart: 50,
            method: SolveMethod::Krylov,
            predict_init: PredictInit::State,
            startup_tol: 1e-14,
            startup_max_sweeps: 200,
        }
    }
}

impl SolveConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-6) {
            return Err(Error::Config(format!(
                "rel_tol {} must lie in (0, 1e-6]",
                self.rel_tol
            )));
        }
        if self.max_krylov_iters == 0 || self.restart == 0 || self.startup_max_sweeps == 0 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        if !(self.startup_tol > 0.0) {
            return Err(Error::Config("startup_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Slopes and stage values of one step.
#[derive(Debug, Clone)]
pub struct StageSet {
    pub k: Vec<Field>,
    pub u: Vec<Field>,
    /// Auxiliary-variable slopes (energy-quadratized schemes only).
    pub l: Option<Vec<Field>>,
    pub q: Option<Vec<Field>>,
    pub iterations: usize,
    pub residual: f64,
}

/// `base + tau * sum_j row_j * ks_j` for every tableau row.
fn stage_combination(base: &[f64], ks: &[Vec<f64>], tab: &ButcherTableau, tau: f64) -> Vec<Vec<f64>> {
    (0..tab.stages())
        .map(|i| {
            let mut out = base.to_vec();
            for (aij, kj) in tab.a_row(i).iter().zip(ks) {
                let w = tau * aij;
                for (o, v) in out.iter_mut().zip(kj) {
                    *o += w * v;
                }
            }
            out
        })
        .collect()
}

fn split(stacked: &[f64], s: usize) -> Vec<Vec<f64>> {
    let n = stacked.len() / s;
    stacked.chunks(n).map(|c| c.to_vec()).collect()
}

fn check_inputs(op: &RlwOperator, u_n: &Field, ustar: &[Field], tab: &ButcherTableau, tau: f64) -> Result<()> {
    if ustar.len() != tab.stages() {
        return Err(Error::Config(format!(
            "{} frozen stage values for a {}-stage tableau",
            ustar.len(),
            tab.stages()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("time step {tau} must be positive")));
    }
    if !op.grid().same_as(u_n.grid()) || ustar.iter().any(|f| !op.grid().same_as(f.grid())) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Solves the stacked linear system `A x = b` by the configured method.
fn solve_stacked(
    apply: impl Fn(&[f64]) -> Vec<f64> + Sync,
    b: &[f64],
    cfg: &SolveConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    match cfg.method {
        SolveMethod::Krylov => {
            let out = gmres(&apply, b, cfg.rel_tol, cfg.restart, cfg.max_krylov_iters);
            if !out.x.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged { sweep: out.iterations });
            }
            if out.converged {
                Ok((out.x, out.iterations, out.residual))
            } else {
                Err(Error::SolverNotConverged {
                    iterations: out.iterations,
                    residual: out.residual,
                })
            }
        }
        SolveMethod::FixedPoint => {
            // x <- b + (I - A) x
            let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut x = vec![0.0; b.len()];
            if b_norm == 0.0 {
                return Ok((x, 0, 0.0));
            }
            let mut residual = f64::INFINITY;
            for it in 1..=cfg.max_krylov_iters {
                let ax = apply(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
                if !residual.is_finite() {
                    return Err(Error::Diverged { sweep: it });
                }
                if residual <= cfg.rel_tol {
                    return Ok((x, it - 1, residual));
                }
                for (xi, ri) in x.iter_mut().zip(&r) {
                    *xi += ri;
                }
            }
            Err(Error::SolverNotConverged {
                iterations: cfg.max_krylov_iters,
                residual,
            })
        }
    }
}

/// Linear stage equations of the momentum-preserving schemes:
/// `k_i = D^{-1} G(ustar_i) (u^n + tau sum_j a_ij k_j)`.
pub fn solve_lmp_stages(
    op: &RlwOperator,
    u_n: &Field,
    ustar: &[Field],
    tab: &ButcherTableau,
    tau: f64,
    cfg: &SolveConfig,
) -> Result<StageSet> {
    check_inputs(op, u_n, ustar, tab, tau)?;
    let s = tab.stages();
    let grid = u_n.grid();

    let b: Vec<f64> = ustar
        .par_iter()
        .map(|w| op.d_inv_g_raw(w.values(), u_n.values()))
        .collect::<Vec<_>>()
        .concat();

    let apply = |x: &[f64]| -> Vec<f64> {
        let ks = split(x, s);
        let zero = vec![0.0; grid.len()];
        let combos = stage_combination(&zero, &ks, tab, tau);
        let images: Vec<Vec<f64>> = combos
            .par_iter()
            .zip(ustar.par_iter())
            .map(|(c, w)| op.d_inv_g_raw(w.values(), c))
            .collect();
        x.iter().zip(images.concat()).map(|(xi, gi)| xi - gi).collect()
    };

    let (x, iterations, residual) = solve_stacked(apply, &b, cfg)?;
    let ks = split(&x, s);
    let us = stage_combination(u_n.values(), &ks, tab, tau);
    Ok(StageSet {
        k: ks.into_iter().map(|v| Field::from_raw(grid, v)).collect(),
        u: us.into_iter().map(|v| Field::from_raw(grid, v)).collect(),
        l: None,
        q: None,
        iterations,
        residual,
    })
}

/// Linear stage equations of the energy-preserving schemes with `l_i` and
/// `q_i` eliminated:
/// `k_i = S((1 + ustar_i/3) u_i + q_i/6)`, `u_i = u^n + tau sum_j a_ij k_j`,
/// `q_i = q^n + 2 tau sum_j a_ij ustar_j k_j`.
pub fn solve_lep_stages(
    op: &RlwOperator,
    u_n: &Field,
    q_n: &Field,
    ustar: &[Field],
    tab: &ButcherTableau,
    tau: f64,
    cfg: &SolveConfig,
) -> Result<StageSet> {
    check_inputs(op, u_n, ustar, tab, tau)?;
    u_n.check_same_grid(q_n)?;
    let s = tab.stages();
    let grid = u_n.grid();

    let b: Vec<f64> = ustar
        .par_iter()
        .map(|w| {
            let f: Vec<f64> = w
                .values()
                .iter()
                .zip(u_n.values())
                .zip(q_n.values())
                .map(|((wi, ui), qi)| (1.0 + wi / 3.0) * ui + qi / 6.0)
                .collect();
            op.s_raw(&f)
        })
        .collect::<Vec<_>>()
        .concat();

    let apply = |x: &[f64]| -> Vec<f64> {
        let ks = split(x, s);
        let zero = vec![0.0; grid.len()];
        let du = stage_combination(&zero, &ks, tab, tau);
        let wk: Vec<Vec<f64>> = ks
            .iter()
            .zip(ustar)
            .map(|(k, w)| k.iter().zip(w.values()).map(|(a, b)| a * b).collect())
            .collect();
        let dq = stage_combination(&zero, &wk, tab, tau);
        let images: Vec<Vec<f64>> = (0..s)
            .into_par_iter()
            .map(|i| {
                let w = ustar[i].values();
                let f: Vec<f64> = (0..grid.len())
                    .map(|n| (1.0 + w[n] / 3.0) * du[i][n] + dq[i][n] / 3.0)
                    .collect();
                op.s_raw(&f)
            })
            .collect();
        x.iter().zip(images.concat()).map(|(xi, gi)| xi - gi).collect()
    };

    let (x, iterations, residual) = solve_stacked(apply, &b, cfg)?;
    let ks = split(&x, s);
    let us = stage_combination(u_n.values(), &ks, tab, tau);
    let ls: Vec<Vec<f64>> = ks
        .iter()
        .zip(ustar)
        .map(|(k, w)| k.iter().zip(w.values()).map(|(a, b)| 2.0 * a * b).collect())
        .collect();
    let qs = stage_combination(q_n.values(), &ls, tab, tau);
    let wrap = |vs: Vec<Vec<f64>>| -> Vec<Field> { vs.into_iter().map(|v| Field::from_raw(grid, v)).collect() };
    Ok(StageSet {
        k: wrap(ks),
        u: wrap(us),
        l: Some(wrap(ls)),
        q: Some(wrap(qs)),
        iterations,
        residual,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn all_finite(ks: &[Vec<f64>]) -> bool {
    ks.iter().all(|k| k.iter().all(|v| v.is_finite()))
}

fn initial_slopes(u_n: &Field, s: usize, init: PredictInit) -> Vec<Vec<f64>> {
    match init {
        PredictInit::State => vec![u_n.values().to_vec(); s],
        PredictInit::Zero => vec![vec![0.0; u_n.len()]; s],
    }
}

/// One explicit sweep of the nonlinear momentum-form stage equations.
fn lmp_sweep(op: &RlwOperator, u_n: &Field, ks: &[Vec<f64>], tab: &ButcherTableau, tau: f64) -> Vec<Vec<f64>> {
    stage_combination(u_n.values(), ks, tab, tau)
        .par_iter()
        .map(|ui| op.d_inv_g_raw(ui, ui))
        .collect()
}

/// One explicit sweep of the nonlinear energy-quadratized stage equations.
fn lep_sweep(
    op: &RlwOperator,
    u_n: &Field,
    q_n: &Field,
    ks: &[Vec<f64>],
    tab: &ButcherTableau,
    tau: f64,
) -> Vec<Vec<f64>> {
    let us = stage_combination(u_n.values(), ks, tab, tau);
    let ls: Vec<Vec<f64>> = us
        .iter()
        .zip(ks)
        .map(|(u, k)| u.iter().zip(k).map(|(a, b)| 2.0 * a * b).collect())
        .collect();
    let qs = stage_combination(q_n.values(), &ls, tab, tau);
    us.par_iter()
        .zip(qs.par_iter())
        .map(|(u, q)| {
            let f: Vec<f64> = u
                .iter()
                .zip(q)
                .map(|(ui, qi)| ui + qi / 6.0 + ui * ui / 3.0)
                .collect();
            op.s_raw(&f)
        })
        .collect()
}

/// Prediction of the momentum-preserving schemes: exactly `sweeps` explicit
/// fixed-point sweeps, returning `u_i = u^n + tau sum_j a_ij k_j^M`.
pub fn predict_sweeps_lmp(
    op: &RlwOperator,
    u_n: &Field,
    tab: &ButcherTableau,
    tau: f64,
    sweeps: usize,
    init: PredictInit,
) -> Result<Vec<Field>> {
    if sweeps == 0 {
        return Err(Error::Config("prediction needs at least one sweep".into()));
    }
    let mut ks = initial_slopes(u_n, tab.stages(), init);
    for sweep in 1..=sweeps {
        ks = lmp_sweep(op, u_n, &ks, tab, tau);
        if !all_finite(&ks) {
            return Err(Error::Diverged { sweep });
        }
    }
    let grid = u_n.grid();
    Ok(stage_combination(u_n.values(), &ks, tab, tau)
        .into_iter()
        .map(|v| Field::from_raw(grid, v))
        .collect())
}

/// Prediction of the energy-preserving schemes.
pub fn predict_sweeps_lep(
    op: &RlwOperator,
    u_n: &Field,
    q_n: &Field,
    tab: &ButcherTableau,
    tau: f64,
    sweeps: usize,
    init: PredictInit,
) -> Result<Vec<Field>> {
    if sweeps == 0 {
        return Err(Error::Config("prediction needs at least one sweep".into()));
    }
    u_n.check_same_grid(q_n)?;
    let mut ks = initial_slopes(u_n, tab.stages(), init);
    for sweep in 1..=sweeps {
        ks = lep_sweep(op, u_n, q_n, &ks, tab, tau);
        if !all_finite(&ks) {
            return Err(Error::Diverged { sweep });
        }
    }
    let grid = u_n.grid();
    Ok(stage_combination(u_n.values(), &ks, tab, tau)
        .into_iter()
        .map(|v| Field::from_raw(grid, v))
        .collect())
}

/// Iterates `sweep` until the relative slope update drops below `tol`.
fn iterate_to_convergence(
    mut ks: Vec<Vec<f64>>,
    tol: f64,
    max_sweeps: usize,
    sweep: impl Fn(&[Vec<f64>]) -> Vec<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let mut residual = f64::INFINITY;
    for it in 1..=max_sweeps {
        let next = sweep(&ks);
        if !all_finite(&next) {
            return Err(Error::Diverged { sweep: it });
        }
        let scale = next.iter().map(|k| max_abs(k)).fold(0.0, f64::max);
        let diff = next
            .iter()
            .zip(&ks)
            .map(|(a, b)| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
            .fold(0.0, f64::max);
        ks = next;
        residual = if diff == 0.0 { 0.0 } else { diff / scale };
        if residual <= tol {
            return Ok(ks);
        }
    }
    Err(Error::StartupFailed {
        sweeps: max_sweeps,
        residual,
    })
}

/// One step of the fully nonlinear Gauss method.
#[derive(Debug, Clone)]
pub struct NonlinearStep {
    pub u: Field,
    pub q: Option<Field>,
    pub stages: StageSet,
}

/// Nonlinear Gauss step for `D u_t = G(u) u`, by fixed-point iteration.
pub fn nonlinear_gauss_lmp(
    op: &RlwOperator,
    u_n: &Field,
    tab: &ButcherTableau,
    tau: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<NonlinearStep> {
    let start = vec![op.d_inv_g_raw(u_n.values(), u_n.values()); tab.stages()];
    let ks = iterate_to_convergence(start, tol, max_sweeps, |ks| lmp_sweep(op, u_n, ks, tab, tau))?;
    let grid = u_n.grid();
    let us = stage_combination(u_n.values(), &ks, tab, tau);
    let mut u = u_n.clone();
    for (bi, k) in tab.b().iter().zip(&ks) {
        for (o, v) in u.values_mut().iter_mut().zip(k) {
            *o += tau * bi * v;
        }
    }
    Ok(NonlinearStep {
        u,
        q: None,
        stages: StageSet {
            k: ks.into_iter().map(|v| Field::from_raw(grid, v)).collect(),
            u: us.into_iter().map(|v| Field::from_raw(grid, v)).collect(),
            l: None,
            q: None,
            iterations: 0,
            residual: 0.0,
        },
    })
}

/// Nonlinear Gauss step for the energy-quadratized system
/// `u_t = S(u + q/6 + u^2/3)`, `q_t = 2 u u_t`.
pub fn nonlinear_gauss_lep(
    op: &RlwOperator,
    u_n: &Field,
    q_n: &Field,
    tab: &ButcherTableau,
    tau: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<NonlinearStep> {
    u_n.check_same_grid(q_n)?;
    let f0: Vec<f64> = u_n
        .values()
        .iter()
        .zip(q_n.values())
        .map(|(u, q)| u + q / 6.0 + u * u / 3.0)
        .collect();
    let start = vec![op.s_raw(&f0); tab.stages()];
    let ks = iterate_to_convergence(start, tol, max_sweeps, |ks| lep_sweep(op, u_n, q_n, ks, tab, tau))?;
    let grid = u_n.grid();
    let us = stage_combination(u_n.values(), &ks, tab, tau);
    let ls: Vec<Vec<f64>> = us
        .iter()
        .zip(&ks)
        .map(|(u, k)| u.iter().zip(k).map(|(a, b)| 2.0 * a * b).collect())
        .collect();
    let qs = stage_combination(q_n.values(), &ls, tab, tau);
    let mut u = u_n.clone();
    let mut q = q_n.clone();
    for ((bi, k), l) in tab.b().iter().zip(&ks).zip(&ls) {
        for (o, v) in u.values_mut().iter_mut().zip(k) {
            *o += tau * bi * v;
        }
        for (o, v) in q.values_mut().iter_mut().zip(l) {
            *o += tau * bi * v;
        }
    }
    let wrap = |vs: Vec<Vec<f64>>| -> Vec<Field> { vs.into_iter().map(|v| Field::from_raw(grid, v)).collect() };
    Ok(NonlinearStep {
        u,
        q: Some(q),
        stages: StageSet {
            k: wrap(ks),
            u: wrap(us),
            l: Some(wrap(ls)),
            q: Some(wrap(qs)),
            iterations: 0,
            residual: 0.0,
        },
    })
}
