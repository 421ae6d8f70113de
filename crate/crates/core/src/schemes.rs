//! Linearly implicit momentum- and energy-preserving time steppers.
//!
//! | tag       | frozen stage values       | tableau | invariant          |
//! |-----------|---------------------------|---------|--------------------|
//! | `lmps4`   | Lagrange extrapolation    | Gauss 3 | momentum           |
//! | `lmp-pc4` | prediction sweeps (M = 3) | Gauss 2 | momentum           |
//! | `lmp-pc6` | prediction sweeps (M = 5) | Gauss 3 | momentum           |
//! | `leps4`   | Lagrange extrapolation    | Gauss 3 | mass, quad. energy |
//! | `lep-pc4` | prediction sweeps (M = 3) | Gauss 2 | mass, quad. energy |
//! | `lep-pc6` | prediction sweeps (M = 5) | Gauss 3 | mass, quad. energy |

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::diagnostics::InvariantRecord;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::operators::RlwOperator;
use crate::stages::{
    nonlinear_gauss_lep, nonlinear_gauss_lmp, predict_sweeps_lep, predict_sweeps_lmp, solve_lep_stages,
    solve_lmp_stages, SolveConfig, StageSet,
};
use crate::tableau::{gauss_tableau, ButcherTableau};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Lmps4,
    LmpPc4,
    LmpPc6,
    Leps4,
    LepPc4,
    LepPc6,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Lmps4,
        SchemeKind::Leps4,
        SchemeKind::LmpPc4,
        SchemeKind::LepPc4,
        SchemeKind::LmpPc6,
        SchemeKind::LepPc6,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SchemeKind::Lmps4 => "lmps4",
            SchemeKind::LmpPc4 => "lmp-pc4",
            SchemeKind::LmpPc6 => "lmp-pc6",
            SchemeKind::Leps4 => "leps4",
            SchemeKind::LepPc4 => "lep-pc4",
            SchemeKind::LepPc6 => "lep-pc6",
        }
    }

    pub fn stages(self) -> usize {
        match self {
            SchemeKind::LmpPc4 | SchemeKind::LepPc4 => 2,
            _ => 3,
        }
    }

    /// Default number of prediction sweeps; `None` for extrapolation schemes.
    pub fn default_sweeps(self) -> Option<usize> {
        match self {
            SchemeKind::LmpPc4 | SchemeKind::LepPc4 => Some(3),
            SchemeKind::LmpPc6 | SchemeKind::LepPc6 => Some(5),
            _ => None,
        }
    }

    /// Expected temporal order.
    pub fn order(self) -> usize {
        match self {
            SchemeKind::LmpPc6 | SchemeKind::LepPc6 => 6,
            _ => 4,
        }
    }

    /// True for the energy-quadratized schemes carrying the auxiliary `q`.
    pub fn is_energy(self) -> bool {
        matches!(self, SchemeKind::Leps4 | SchemeKind::LepPc4 | SchemeKind::LepPc6)
    }

    pub fn uses_extrapolation(self) -> bool {
        matches!(self, SchemeKind::Lmps4 | SchemeKind::Leps4)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.tag() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Lagrange weights mapping `(u^{n-1}, u_1^{n-1}, ..., u_s^{n-1})` to the
/// extrapolated stage value at `t_n + c_i tau`, one row per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapCoeffs {
    rows: Vec<Vec<f64>>,
}

impl ExtrapCoeffs {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Interpolation nodes `{0, c_1, ..., c_s}` (in steps from `t_{n-1}`),
/// evaluated at `1 + c_i`.
pub fn extrap_coeffs(tab: &ButcherTableau) -> Result<ExtrapCoeffs> {
    let nodes: Vec<f64> = std::iter::once(0.0).chain(tab.c().iter().copied()).collect();
    for (a, x) in nodes.iter().enumerate() {
        if nodes[..a].iter().any(|y| (x - y).abs() < 1e-12) {
            return Err(Error::Config("extrapolation nodes must be distinct".into()));
        }
    }
    let rows = tab
        .c()
        .iter()
        .map(|ci| {
            let target = 1.0 + ci;
            (0..nodes.len())
                .map(|j| {
                    nodes
                        .iter()
                        .enumerate()
                        .filter(|&(m, _)| m != j)
                        .map(|(_, xm)| (target - xm) / (nodes[j] - xm))
                        .product()
                })
                .collect()
        })
        .collect();
    Ok(ExtrapCoeffs { rows })
}

/// Tunables of a scheme beyond its kind and step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SchemeOptions {
    /// Overrides the default number of prediction sweeps.
    pub sweeps: Option<usize>,
    pub solve: SolveConfig,
}

/// Linear-solver statistics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

/// Solution state of a scheme together with everything needed to advance it.
#[derive(Debug, Clone)]
pub struct SchemeState {
    kind: SchemeKind,
    op: Arc<RlwOperator>,
    tableau: ButcherTableau,
    extrap: Option<ExtrapCoeffs>,
    sweeps: usize,
    solve: SolveConfig,
    tau: f64,
    t0: f64,
    steps: usize,
    u: Field,
    q: Option<Field>,
    /// `u^{n-1}` and the stage values of the step that produced `u^n`.
    prev: Option<(Field, Vec<Field>)>,
}

impl SchemeState {
    /// State at `t = 0`; energy schemes start from `q = u0^2`.
    pub fn new(kind: SchemeKind, op: Arc<RlwOperator>, u0: Field, tau: f64, opts: &SchemeOptions) -> Result<Self> {
        Self::starting_at(kind, op, u0, 0.0, tau, opts)
    }

    pub fn starting_at(
        kind: SchemeKind,
        op: Arc<RlwOperator>,
        u0: Field,
        t0: f64,
        tau: f64,
        opts: &SchemeOptions,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("time step {tau} must be positive")));
        }
        if !t0.is_finite() {
            return Err(Error::Config("start time must be finite".into()));
        }
        if !op.grid().same_as(u0.grid()) {
            return Err(Error::GridMismatch);
        }
        if let Some(index) = u0.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        opts.solve.validate()?;
        let tableau = gauss_tableau(kind.stages())?;
        let extrap = if kind.uses_extrapolation() {
            if tableau.stages() != 3 {
                return Err(Error::Config("extrapolation requires the 3-stage Gauss tableau".into()));
            }
            Some(extrap_coeffs(&tableau)?)
        } else {
            None
        };
        let sweeps = match (kind.default_sweeps(), opts.sweeps) {
            (Some(_), Some(0)) => return Err(Error::Config("sweep count must be at least 1".into())),
            (Some(_), Some(m)) => m,
            (Some(m), None) => m,
            (None, _) => 0,
        };
        let q = kind.is_energy().then(|| u0.map(|v| v * v));
        Ok(SchemeState {
            kind,
            op,
            tableau,
            extrap,
            sweeps,
            solve: opts.solve,
            tau,
            t0,
            steps: 0,
            u: u0,
            q,
            prev: None,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn operator(&self) -> &Arc<RlwOperator> {
        &self.op
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t(&self) -> f64 {
        self.t0 + self.steps as f64 * self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn u(&self) -> &Field {
        &self.u
    }

    pub fn q(&self) -> Option<&Field> {
        self.q.as_ref()
    }

    pub fn has_history(&self) -> bool {
        self.prev.is_some()
    }

    pub fn invariants(&self) -> Result<InvariantRecord> {
        InvariantRecord::measure(self.t(), &self.u, self.q.as_ref(), self.op.params())
    }

    fn q_ref(&self) -> Result<&Field> {
        self.q
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} carries no auxiliary variable", self.kind)))
    }

    /// Applies `u += tau sum b_i k_i` (and the same for `q`), then records history.
    fn commit(&mut self, stages: StageSet) {
        let tau = self.tau;
        let old = self.u.clone();
        for (bi, k) in self.tableau.b().iter().zip(&stages.k) {
            self.u.axpy(tau * bi, k);
        }
        if let (Some(q), Some(ls)) = (self.q.as_mut(), stages.l.as_ref()) {
            for (bi, l) in self.tableau.b().iter().zip(ls) {
                q.axpy(tau * bi, l);
            }
        }
        if self.extrap.is_some() {
            self.prev = Some((old, stages.u));
        }
        self.steps += 1;
    }

    fn extrapolate(&self) -> Result<Vec<Field>> {
        let (Some(coeffs), Some((u_prev, stages_prev))) = (&self.extrap, &self.prev) else {
            return Err(Error::Config("extrapolation needs a previous step".into()));
        };
        Ok(coeffs
            .rows()
            .iter()
            .map(|row| {
                let mut out = u_prev.map(|v| row[0] * v);
                for (w, ui) in row[1..].iter().zip(stages_prev) {
                    out.axpy(*w, ui);
                }
                out
            })
            .collect())
    }
}

/// One fully nonlinear 3-stage Gauss step from the current state, recording
/// its stage values for the following extrapolation.
pub fn startup_nonlinear_gauss(state: &mut SchemeState) -> Result<StepInfo> {
    let tab = gauss_tableau(3)?;
    let cfg = state.solve;
    let step = if state.kind.is_energy() {
        nonlinear_gauss_lep(
            &state.op,
            &state.u,
            state.q_ref()?,
            &tab,
            state.tau,
            cfg.startup_tol,
            cfg.startup_max_sweeps,
        )?
    } else {
        nonlinear_gauss_lmp(&state.op, &state.u, &tab, state.tau, cfg.startup_tol, cfg.startup_max_sweeps)?
    };
    let old = std::mem::replace(&mut state.u, step.u);
    if step.q.is_some() {
        state.q = step.q;
    }
    state.prev = Some((old, step.stages.u));
    state.steps += 1;
    Ok(StepInfo::default())
}

fn require(state: &SchemeState, kind_ok: bool, name: &str) -> Result<()> {
    if kind_ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{} cannot be advanced by {name}", state.kind)))
    }
}

/// Extrapolated momentum-preserving step.
pub fn step_lmps(state: &mut SchemeState) -> Result<StepInfo> {
    require(state, state.kind == SchemeKind::Lmps4, "step_lmps")?;
    let ustar = state.extrapolate()?;
    let st = solve_lmp_stages(&state.op, &state.u, &ustar, &state.tableau, state.tau, &state.solve)?;
    let info = StepInfo {
        iterations: st.iterations,
        residual: st.residual,
    };
    state.commit(st);
    Ok(info)
}

/// Prediction-correction momentum-preserving step.
pub fn step_lmp_pc(state: &mut SchemeState) -> Result<StepInfo> {
    require(
        state,
        matches!(state.kind, SchemeKind::LmpPc4 | SchemeKind::LmpPc6),
        "step_lmp_pc",
    )?;
    let ustar = predict_sweeps_lmp(
        &state.op,
        &state.u,
        &state.tableau,
        state.tau,
        state.sweeps,
        state.solve.predict_init,
    )?;
    let st = solve_lmp_stages(&state.op, &state.u, &ustar, &state.tableau, state.tau, &state.solve)?;
    let info = StepInfo {
        iterations: st.iterations,
        residual: st.residual,
    };
    state.commit(st);
    Ok(info)
}

/// Extrapolated energy-preserving step.
pub fn step_leps(state: &mut SchemeState) -> Result<StepInfo> {
    require(state, state.kind == SchemeKind::Leps4, "step_leps")?;
    let ustar = state.extrapolate()?;
    let st = solve_lep_stages(
        &state.op,
        &state.u,
        state.q_ref()?,
        &ustar,
        &state.tableau,
        state.tau,
        &state.solve,
    )?;
    let info = StepInfo {
        iterations: st.iterations,
        residual: st.residual,
    };
    state.commit(st);
    Ok(info)
}

/// Prediction-correction energy-preserving step.
pub fn step_lep_pc(state: &mut SchemeState) -> Result<StepInfo> {
    require(
        state,
        matches!(state.kind, SchemeKind::LepPc4 | SchemeKind::LepPc6),
        "step_lep_pc",
    )?;
    let q = state.q_ref()?;
    let ustar = predict_sweeps_lep(
        &state.op,
        &state.u,
        q,
        &state.tableau,
        state.tau,
        state.sweeps,
        state.solve.predict_init,
    )?;
    let st = solve_lep_stages(&state.op, &state.u, q, &ustar, &state.tableau, state.tau, &state.solve)?;
    let info = StepInfo {
        iterations: st.iterations,
        residual: st.residual,
    };
    state.commit(st);
    Ok(info)
}

/// Advances by one step with the scheme's own rule, starting the
/// extrapolation schemes with a nonlinear Gauss step.
pub fn advance(state: &mut SchemeState) -> Result<StepInfo> {
    match state.kind {
        SchemeKind::Lmps4 | SchemeKind::Leps4 if !state.has_history() => startup_nonlinear_gauss(state),
        SchemeKind::Lmps4 => step_lmps(state),
        SchemeKind::Leps4 => step_leps(state),
        SchemeKind::LmpPc4 | SchemeKind::LmpPc6 => step_lmp_pc(state),
        SchemeKind::LepPc4 | SchemeKind::LepPc6 => step_lep_pc(state),
    }
}

/// Callback invoked by [`run`] on the initial state, every `stride` steps
/// and on the final state.
pub trait Observer {
    fn stride(&self) -> usize {
        1
    }

    fn observe(&mut self, state: &SchemeState) -> Result<()>;
}

/// Collects an [`InvariantRecord`] per observation.
#[derive(Debug, Clone)]
pub struct InvariantRecorder {
    stride: usize,
    pub records: Vec<InvariantRecord>,
}

impl InvariantRecorder {
    pub fn new(stride: usize) -> Self {
        InvariantRecorder {
            stride: stride.max(1),
            records: Vec::new(),
        }
    }
}

impl Observer for InvariantRecorder {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, state: &SchemeState) -> Result<()> {
        if self.records.last().is_some_and(|r| r.t == state.t()) {
            return Ok(());
        }
        self.records.push(state.invariants()?);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub linear_iterations: usize,
    pub max_residual: f64,
}

/// Number of steps of size `tau` from `t` to `t_end`, which must tile exactly.
pub fn step_count(t: f64, t_end: f64, tau: f64) -> Result<usize> {
    let span = t_end - t;
    if span < 0.0 {
        return Err(Error::Config(format!("final time {t_end} precedes current time {t}")));
    }
    let n = (span / tau).round();
    if (n * tau - span).abs() > 1e-9 * t_end.abs().max(1.0) {
        return Err(Error::Config(format!(
            "time step {tau} does not divide the interval [{t}, {t_end}]"
        )));
    }
    Ok(n as usize)
}

/// Advances `state` to `t_end`, notifying the observers along the way.
pub fn run(state: &mut SchemeState, t_end: f64, observers: &mut [&mut dyn Observer]) -> Result<RunSummary> {
    let n = step_count(state.t(), t_end, state.tau)?;
    let mut summary = RunSummary {
        steps: 0,
        t_final: state.t(),
        linear_iterations: 0,
        max_residual: 0.0,
    };
    let notify = |state: &SchemeState, observers: &mut [&mut dyn Observer], k: usize| -> Result<()> {
        for obs in observers.iter_mut() {
            if k.is_multiple_of(obs.stride().max(1)) || k == n {
                obs.observe(state)?;
            }
        }
        Ok(())
    };
    let abort = |t: f64, e: Error| Error::RunAborted { t, source: Box::new(e) };

    notify(state, observers, 0).map_err(|e| abort(state.t(), e))?;
    for k in 1..=n {
        let info = advance(state).map_err(|e| abort(state.t(), e))?;
        if !state.u.is_finite() {
            return Err(abort(state.t(), Error::Diverged { sweep: 0 }));
        }
        summary.steps += 1;
        summary.linear_iterations += info.iterations;
        summary.max_residual = summary.max_residual.max(info.residual);
        notify(state, observers, k).map_err(|e| abort(state.t(), e))?;
    }
    summary.t_final = state.t();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{error_norms, mass, momentum, quad_energy};
    use crate::grid::PeriodicGrid;
    use crate::operators::RlwParams;
    use crate::problems::{soliton_1d, SolitonParams};

    fn soliton_state(kind: SchemeKind, n: usize, tau: f64) -> (SchemeState, Arc<PeriodicGrid>, RlwParams) {
        let grid = PeriodicGrid::new_1d(-40.0, 40.0, n).unwrap();
        let p = RlwParams::one_d(1.0, 1.0);
        let op = Arc::new(RlwOperator::new(&grid, p).unwrap());
        let u0 = soliton_1d(&grid, &p, &SolitonParams::new(1.0, 0.0), 0.0);
        (SchemeState::new(kind, op, u0, tau, &SchemeOptions::default()).unwrap(), grid, p)
    }

    #[test]
    fn tags_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.tag().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("lmps6".parse::<SchemeKind>().is_err());
        assert_eq!(SchemeKind::LepPc6.default_sweeps(), Some(5));
        assert_eq!(SchemeKind::LmpPc4.default_sweeps(), Some(3));
        assert_eq!(SchemeKind::Leps4.default_sweeps(), None);
    }

    #[test]
    fn extrapolation_weights_match_closed_form() {
        let c = extrap_coeffs(&gauss_tableau(3).unwrap()).unwrap();
        let r = 15f64.sqrt();
        let expected = [
            [6.0 * r - 26.0, -5.0 * r / 3.0 + 11.0, 16.0 * r / 3.0 - 24.0, -29.0 * r / 3.0 + 40.0],
            [-17.0, 2.5 * r + 17.5, -17.0, -2.5 * r + 17.5],
            [-6.0 * r - 26.0, 29.0 * r / 3.0 + 40.0, -16.0 * r / 3.0 - 24.0, 5.0 * r / 3.0 + 11.0],
        ];
        for (row, want) in c.rows().iter().zip(expected) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-13, "{a} vs {b}");
            }
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
        assert!((c.row(0)[0] + 2.762).abs() < 1e-3);
    }

    #[test]
    fn extrapolation_reproduces_cubics() {
        let tab = gauss_tableau(3).unwrap();
        let c = extrap_coeffs(&tab).unwrap();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 0.25 * t * t * t;
        let samples: Vec<f64> = std::iter::once(0.0).chain(tab.c().iter().copied()).map(f).collect();
        for (i, row) in c.rows().iter().enumerate() {
            let got: f64 = row.iter().zip(&samples).map(|(w, v)| w * v).sum();
            assert!((got - f(1.0 + tab.c()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn extrapolation_rejects_repeated_nodes() {
        let t = ButcherTableau::new(vec![0.0, 0.0, 0.0, 0.0], vec![0.5, 0.5], vec![0.0, 0.0], 1).unwrap();
        assert!(extrap_coeffs(&t).is_err());
    }

    #[test]
    fn zero_and_constant_states_are_fixed_points() {
        let grid = PeriodicGrid::new_1d(0.0, 10.0, 32).unwrap();
        let op = Arc::new(RlwOperator::new(&grid, RlwParams::one_d(1.0, 1.0)).unwrap());
        for kind in SchemeKind::ALL {
            let mut z = SchemeState::new(kind, op.clone(), Field::zeros(&grid), 0.1, &SchemeOptions::default()).unwrap();
            run(&mut z, 0.5, &mut []).unwrap();
            assert!(z.u().max_abs() == 0.0, "{kind}");

            let c = 1.7;
            let mut s =
                SchemeState::new(kind, op.clone(), Field::constant(&grid, c), 0.1, &SchemeOptions::default()).unwrap();
            run(&mut s, 0.5, &mut []).unwrap();
            assert!(s.u().values().iter().all(|v| (v - c).abs() < 1e-13), "{kind}");
            if let Some(q) = s.q() {
                assert!(q.values().iter().all(|v| (v - c * c).abs() < 1e-13));
            }
        }
    }

    #[test]
    fn startup_from_zero_and_momentum() {
        let grid = PeriodicGrid::new_1d(0.0, 10.0, 32).unwrap();
        let op = Arc::new(RlwOperator::new(&grid, RlwParams::one_d(1.0, 1.0)).unwrap());
        let mut z = SchemeState::new(SchemeKind::Lmps4, op, Field::zeros(&grid), 0.1, &SchemeOptions::default()).unwrap();
        startup_nonlinear_gauss(&mut z).unwrap();
        assert_eq!(z.u().max_abs(), 0.0);
        assert!(z.has_history());

        let (mut s, _, p) = soliton_state(SchemeKind::Lmps4, 256, 0.01);
        let i0 = momentum(s.u(), &p).unwrap();
        startup_nonlinear_gauss(&mut s).unwrap();
        assert!((momentum(s.u(), &p).unwrap() - i0).abs() <= 1e-12 * i0);
    }

    #[test]
    fn startup_local_order_is_seven() {
        let errs: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&tau| {
                let (mut s, grid, p) = soliton_state(SchemeKind::Lmps4, 512, tau);
                startup_nonlinear_gauss(&mut s).unwrap();
                let exact = soliton_1d(&grid, &p, &SolitonParams::new(1.0, 0.0), tau);
                error_norms(s.u(), &exact).unwrap().0
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 7.0).abs() < 0.5, "{errs:?}");
        }
    }

    #[test]
    fn wrong_stepper_is_rejected() {
        let (mut s, _, _) = soliton_state(SchemeKind::LmpPc4, 64, 0.1);
        assert!(step_leps(&mut s).is_err());
        assert!(step_lmps(&mut s).is_err());
        let (mut e, _, _) = soliton_state(SchemeKind::Leps4, 64, 0.1);
        // Extrapolation without history.
        assert!(step_leps(&mut e).is_err());
    }

    #[test]
    fn conservation_over_many_steps() {
        for kind in SchemeKind::ALL {
            let (mut s, _, p) = soliton_state(kind, 256, 0.1);
            let mut rec = InvariantRecorder::new(1);
            run(&mut s, 30.0, &mut [&mut rec]).unwrap();
            assert_eq!(rec.records.len(), 301);
            let r0 = rec.records[0];
            for r in &rec.records {
                if kind.is_energy() {
                    let e0 = r0.quad_energy.unwrap();
                    assert!((r.quad_energy.unwrap() - e0).abs() <= 1e-11 * e0.abs(), "{kind}");
                    assert!((r.mass - r0.mass).abs() <= 1e-12 * r0.mass.abs(), "{kind}");
                } else {
                    assert!((r.momentum - r0.momentum).abs() <= 1e-11 * r0.momentum, "{kind}");
                }
            }
            let last = rec.records.last().unwrap();
            assert_eq!(last.t, 30.0);
            if kind.is_energy() {
                let q = s.q().unwrap();
                assert_eq!(last.quad_energy, Some(quad_energy(s.u(), q).unwrap()));
            } else {
                assert_eq!(last.mass, mass(s.u()));
                let _ = p;
            }
        }
    }

    #[test]
    fn temporal_order_on_soliton() {
        for kind in SchemeKind::ALL {
            let taus: [f64; 3] = if kind.order() == 6 { [0.2, 0.1, 0.05] } else { [0.1, 0.05, 0.025] };
            let errs: Vec<f64> = taus
                .iter()
                .map(|&tau| {
                    let (mut s, grid, p) = soliton_state(kind, 256, tau);
                    run(&mut s, 1.0, &mut []).unwrap();
                    let exact = soliton_1d(&grid, &p, &SolitonParams::new(1.0, 0.0), 1.0);
                    error_norms(s.u(), &exact).unwrap().0
                })
                .collect();
            let slope = (errs[1] / errs[2]).log2();
            assert!((slope - kind.order() as f64).abs() < 0.5, "{kind}: {errs:?}");
        }
    }

    #[test]
    fn run_without_steps_and_tiling() {
        let (mut s, _, _) = soliton_state(SchemeKind::LepPc4, 64, 0.1);
        let before = s.u().clone();
        let mut rec = InvariantRecorder::new(1);
        let summary = run(&mut s, 0.0, &mut [&mut rec]).unwrap();
        assert_eq!(summary.steps, 0);
        assert_eq!(s.u().values(), before.values());
        assert_eq!(rec.records.len(), 1);
        assert!(run(&mut s, 0.25, &mut []).is_err());
        assert!(step_count(0.0, 1.0, 0.1).unwrap() == 10);
        assert!(step_count(1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn failures_carry_the_time_reached() {
        let grid = PeriodicGrid::new_1d(-1.0, 1.0, 64).unwrap();
        let op = Arc::new(RlwOperator::new(&grid, RlwParams::one_d(1.0, 1e-4)).unwrap());
        let u0 = Field::from_fn(&grid, |x, _| 50.0 * (std::f64::consts::PI * x).sin());
        let opts = SchemeOptions {
            sweeps: Some(200),
            ..SchemeOptions::default()
        };
        let mut s = SchemeState::new(SchemeKind::LmpPc6, op, u0, 50.0, &opts).unwrap();
        let err = run(&mut s, 100.0, &mut []).unwrap_err();
        assert!(matches!(err, Error::RunAborted { t, .. } if t == 0.0));
        assert!(err.is_solver_failure());
    }
}
