//! Run configuration: experiment defaults, a flat `key = value` file and
//! command-line overrides, applied in that order.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::RlwParams;
use crate::schemes::{SchemeKind, SchemeOptions};
use crate::stages::{PredictInit, SolveConfig, SolveMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Converge1d,
    Efficiency,
    TwoSoliton,
    Converge2d,
    Bore2d,
    Maxwellian2d,
    Custom,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Converge1d,
        Experiment::Efficiency,
        Experiment::TwoSoliton,
        Experiment::Converge2d,
        Experiment::Bore2d,
        Experiment::Maxwellian2d,
        Experiment::Custom,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Converge1d => "converge1d",
            Experiment::Efficiency => "efficiency",
            Experiment::TwoSoliton => "two-soliton",
            Experiment::Converge2d => "converge2d",
            Experiment::Bore2d => "bore2d",
            Experiment::Maxwellian2d => "maxwellian2d",
            Experiment::Custom => "custom",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    Soliton,
    TwoSoliton,
    Trig,
    Bore,
    Maxwellian,
}

impl IcKind {
    pub fn dim(self) -> usize {
        match self {
            IcKind::Soliton | IcKind::TwoSoliton => 1,
            _ => 2,
        }
    }
}

impl FromStr for IcKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soliton" => Ok(IcKind::Soliton),
            "two-soliton" => Ok(IcKind::TwoSoliton),
            "trig" => Ok(IcKind::Trig),
            "bore" => Ok(IcKind::Bore),
            "maxwellian" => Ok(IcKind::Maxwellian),
            _ => Err(Error::Config(format!("unknown initial condition '{s}'"))),
        }
    }
}

/// Initial-condition parameters; which ones matter depends on `kind`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcSpec {
    pub kind: IcKind,
    /// Soliton speed parameter (first soliton of a pair).
    pub c: f64,
    /// Centre along x (first soliton of a pair).
    pub x0: f64,
    pub c2: f64,
    pub x2: f64,
    pub y0: f64,
    /// Bore radius.
    pub d: f64,
}

impl IcSpec {
    fn soliton(c: f64, x0: f64) -> Self {
        IcSpec {
            kind: IcKind::Soliton,
            c,
            x0,
            c2: 0.0,
            x2: 0.0,
            y0: 0.0,
            d: 0.0,
        }
    }
}

/// Everything a command needs, after defaults and overrides are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub schemes: Vec<SchemeKind>,
    pub bounds: Vec<(f64, f64)>,
    pub n: Vec<usize>,
    pub params: RlwParams,
    /// Single-run time step.
    pub tau: f64,
    /// Convergence ladder shared by all schemes; `None` selects the
    /// order-dependent default ladder.
    pub taus: Option<Vec<f64>>,
    pub t_end: f64,
    pub sweeps: Option<usize>,
    pub solve: SolveConfig,
    pub out_dir: PathBuf,
    pub invariant_stride: usize,
    pub snapshot_stride: usize,
    /// Snapshot times; when set they replace `snapshot_stride`.
    pub snapshot_times: Option<Vec<f64>>,
    pub ic: IcSpec,
    pub reference_tau: f64,
    pub reference_scheme: SchemeKind,
    /// Growth factor of `max |u|` over its initial value beyond which a run
    /// is flagged as unbounded.
    pub blowup_factor: f64,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

impl RunConfig {
    /// Standard setup of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let one = RlwParams::one_d(1.0, 1.0);
        let two = RlwParams::two_d(1.0, 1.0, 1.0, 1.0);
        let mut cfg = RunConfig {
            experiment,
            schemes: SchemeKind::ALL.to_vec(),
            bounds: vec![(-100.0, 100.0)],
            n: vec![2048],
            params: one,
            tau: 0.01,
            taus: None,
            t_end: 1.0,
            sweeps: None,
            solve: SolveConfig::default(),
            out_dir: PathBuf::from("out"),
            invariant_stride: 1,
            snapshot_stride: 100,
            snapshot_times: None,
            ic: IcSpec::soliton(3.0, 0.0),
            reference_tau: 0.001,
            reference_scheme: SchemeKind::LepPc6,
            blowup_factor: 10.0,
        };
        match experiment {
            Experiment::Converge1d => {}
            Experiment::Efficiency => {
                cfg.n = vec![3072];
                cfg.t_end = 10.0;
            }
            Experiment::TwoSoliton => {
                cfg.bounds = vec![(-60.0, 300.0)];
                cfg.n = vec![1024];
                cfg.tau = 0.01;
                cfg.t_end = 150.0;
                cfg.ic = IcSpec {
                    kind: IcKind::TwoSoliton,
                    c: 1.0,
                    x0: -20.0,
                    c2: 0.5,
                    x2: 15.0,
                    y0: 0.0,
                    d: 0.0,
                };
            }
            Experiment::Converge2d => {
                cfg.bounds = vec![(0.0, TWO_PI), (0.0, TWO_PI)];
                cfg.n = vec![128, 128];
                cfg.params = two;
                cfg.t_end = 10.0;
                cfg.taus = Some(vec![0.1, 0.05, 0.025, 0.0125]);
                cfg.ic.kind = IcKind::Trig;
            }
            Experiment::Bore2d => {
                cfg.schemes = vec![SchemeKind::LepPc6];
                cfg.bounds = vec![(-60.0, 300.0), (-60.0, 300.0)];
                cfg.n = vec![512, 512];
                cfg.params = two;
                cfg.tau = 0.1;
                cfg.t_end = 250.0;
                cfg.snapshot_times = Some(vec![0.0, 30.0, 60.0, 120.0, 180.0, 250.0]);
                cfg.ic = IcSpec {
                    kind: IcKind::Bore,
                    d: 2.0,
                    ..IcSpec::soliton(0.0, 0.0)
                };
            }
            Experiment::Maxwellian2d => {
                cfg.schemes = vec![SchemeKind::LepPc6];
                cfg.bounds = vec![(-100.0, 100.0), (-100.0, 100.0)];
                cfg.n = vec![512, 512];
                cfg.params = two;
                cfg.tau = 0.1;
                cfg.t_end = 50.0;
                cfg.snapshot_times = Some(vec![0.0, 5.0, 10.0, 20.0, 25.0, 50.0]);
                cfg.ic = IcSpec {
                    kind: IcKind::Maxwellian,
                    x0: 40.0,
                    y0: 40.0,
                    ..IcSpec::soliton(0.0, 0.0)
                };
            }
            Experiment::Custom => {
                // Large-step robustness run.
                cfg.bounds = vec![(-250.0, 250.0)];
                cfg.tau = 0.35;
                cfg.t_end = 70.0;
                cfg.ic = IcSpec::soliton(1.0, 0.0);
            }
        }
        cfg
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn scheme_options(&self) -> SchemeOptions {
        SchemeOptions {
            sweeps: self.sweeps,
            solve: self.solve,
        }
    }

    /// Time-step ladder used for `kind` in convergence studies.
    pub fn ladder(&self, kind: SchemeKind) -> Vec<f64> {
        match &self.taus {
            Some(t) => t.clone(),
            None if kind.order() == 6 => vec![0.1, 0.05, 0.025, 0.0125],
            None => vec![0.01, 0.005, 0.0025, 0.00125],
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {key}: {what}"));
        let num = || -> Result<f64> {
            let v: f64 = parse_number(value).ok_or_else(|| bad("expected a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad("must be finite"))
            }
        };
        let count = || -> Result<usize> { value.parse().map_err(|_| bad("expected a non-negative integer")) };
        let list = || -> Result<Vec<f64>> {
            value
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_number(s.trim()).filter(|v| v.is_finite()).ok_or_else(|| bad("expected numbers")))
                .collect()
        };
        let dim = self.dim();
        let need_2d = |cfg: &RunConfig| -> Result<()> {
            if cfg.dim() == 2 {
                Ok(())
            } else {
                Err(Error::Config(format!("'{key}' is not defined for a 1D {} run", cfg.experiment)))
            }
        };
        match key {
            "scheme" | "schemes" => {
                self.schemes = if value == "all" {
                    SchemeKind::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse())
                        .collect::<Result<_>>()?
                };
            }
            "x_min" => self.bounds[0].0 = num()?,
            "x_max" => self.bounds[0].1 = num()?,
            "y_min" => {
                need_2d(self)?;
                self.bounds[1].0 = num()?;
            }
            "y_max" => {
                need_2d(self)?;
                self.bounds[1].1 = num()?;
            }
            "n" => self.n = vec![count()?; dim],
            "nx" => self.n[0] = count()?,
            "ny" => {
                need_2d(self)?;
                self.n[1] = count()?;
            }
            "alpha" => self.params.alpha = num()?,
            "beta" => self.params.beta = num()?,
            "mu" => self.params.mu = num()?,
            "theta" => self.params.theta = num()?,
            "tau" => self.tau = num()?,
            "taus" => self.taus = Some(list()?),
            "t_end" | "T" => self.t_end = num()?,
            "sweeps" | "M" => self.sweeps = Some(count()?),
            "rel_tol" => self.solve.rel_tol = num()?,
            "max_krylov_iters" => self.solve.max_krylov_iters = count()?,
            "restart" => self.solve.restart = count()?,
            "solver" => {
                self.solve.method = match value {
                    "krylov" => SolveMethod::Krylov,
                    "fixed-point" => SolveMethod::FixedPoint,
                    _ => return Err(bad("expected krylov or fixed-point")),
                }
            }
            "predict_init" => {
                self.solve.predict_init = match value {
                    "state" => PredictInit::State,
                    "zero" => PredictInit::Zero,
                    _ => return Err(bad("expected state or zero")),
                }
            }
            "startup_tol" => self.solve.startup_tol = num()?,
            "startup_max_sweeps" => self.solve.startup_max_sweeps = count()?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "invariant_stride" => self.invariant_stride = count()?,
            "snapshot_stride" => {
                self.snapshot_stride = count()?;
                self.snapshot_times = None;
            }
            "snapshot_times" => self.snapshot_times = Some(list()?),
            "ic" => {
                if self.experiment != Experiment::Custom {
                    return Err(Error::Config(format!(
                        "the initial condition is fixed for {}; use the custom command",
                        self.experiment
                    )));
                }
                let kind: IcKind = value.parse()?;
                if kind.dim() != dim {
                    let (bounds, n) = if kind.dim() == 2 {
                        (vec![(0.0, TWO_PI); 2], vec![self.n[0]; 2])
                    } else {
                        (vec![self.bounds[0]], vec![self.n[0]])
                    };
                    self.bounds = bounds;
                    self.n = n;
                    self.params = if kind.dim() == 2 {
                        RlwParams::two_d(self.params.alpha, 1.0, self.params.mu, 1.0)
                    } else {
                        RlwParams::one_d(self.params.alpha, self.params.mu)
                    };
                }
                self.ic.kind = kind;
            }
            "c" | "c1" => self.ic.c = num()?,
            "x0" | "x1" => self.ic.x0 = num()?,
            "c2" => self.ic.c2 = num()?,
            "x2" => self.ic.x2 = num()?,
            "y0" => self.ic.y0 = num()?,
            "d" => self.ic.d = num()?,
            "reference_tau" => self.reference_tau = num()?,
            "reference_scheme" => self.reference_scheme = value.parse()?,
            "blowup_factor" => self.blowup_factor = num()?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies the `key = value` lines of a config file. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, found '{line}'"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Applies `key=value` command-line arguments.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, args: &[S]) -> Result<()> {
        for arg in args {
            let arg = arg.as_ref();
            let (k, v) = arg
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, found '{arg}'")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then the overrides; validated.
    pub fn load<S: AsRef<str>>(experiment: Experiment, file: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut cfg = RunConfig::defaults(experiment);
        if let Some(path) = file {
            cfg.apply_text(&fs::read_to_string(path)?)?;
        }
        cfg.apply_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    // Negated comparisons reject NaN along with out-of-range values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schemes.is_empty() {
            return fail("scheme list is empty".into());
        }
        if self.ic.kind.dim() != self.dim() || self.bounds.len() != self.dim() {
            return fail(format!(
                "{} runs on a {}D grid but the initial condition is {}D",
                self.experiment,
                self.dim(),
                self.ic.kind.dim()
            ));
        }
        self.params.validate(self.dim())?;
        self.solve.validate()?;
        if let Some(0) = self.sweeps {
            return fail("sweeps must be at least 1".into());
        }
        for (axis, &(a, b)) in self.bounds.iter().enumerate() {
            if b <= a {
                return Err(Error::DegenerateInterval { axis, a, b });
            }
        }
        for (axis, &n) in self.n.iter().enumerate() {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidNodeCount { axis, n });
            }
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tau) || !positive(self.reference_tau) {
            return fail("time steps must be positive".into());
        }
        if let Some(t) = &self.taus {
            if t.is_empty() || !t.iter().all(|v| positive(*v)) {
                return fail("taus must be a non-empty list of positive steps".into());
            }
        }
        if !(self.t_end >= 0.0) {
            return fail("t_end must be non-negative".into());
        }
        if self.invariant_stride == 0 || self.snapshot_stride == 0 {
            return fail("strides must be at least 1".into());
        }
        if !(self.blowup_factor > 1.0) {
            return fail("blowup_factor must exceed 1".into());
        }
        if matches!(self.ic.kind, IcKind::Soliton | IcKind::TwoSoliton) && !(self.ic.c > 0.0) {
            return fail("soliton speed parameter c must be positive".into());
        }
        if self.ic.kind == IcKind::TwoSoliton && self.ic.c2 < 0.0 {
            return fail("c2 must be non-negative".into());
        }
        Ok(())
    }
}

/// Accepts decimals and simple fractions such as `1/80`.
fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for e in Experiment::ALL {
            RunConfig::defaults(e).validate().unwrap();
            assert_eq!(e.tag().parse::<Experiment>().unwrap(), e);
        }
        let c = RunConfig::defaults(Experiment::Converge1d);
        assert_eq!(c.ladder(SchemeKind::LepPc6), vec![0.1, 0.05, 0.025, 0.0125]);
        assert_eq!(c.ladder(SchemeKind::Lmps4)[3], 0.00125);
    }

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::defaults(Experiment::TwoSoliton);
        c.apply_text("# Table variant\ntau = 0.1\nt_end=30\nschemes = lmp-pc6, lep-pc6 # two\n\n")
            .unwrap();
        c.apply_overrides(&["tau=1/20", "n=512"]).unwrap();
        assert_eq!(c.tau, 0.05);
        assert_eq!(c.t_end, 30.0);
        assert_eq!(c.n, vec![512]);
        assert_eq!(c.schemes, vec![SchemeKind::LmpPc6, SchemeKind::LepPc6]);
        c.validate().unwrap();
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut c = RunConfig::defaults(Experiment::Converge1d);
        let e = c.apply_text("tau = 0.1\n\nbogus = 3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = c.apply_text("tau 0.1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn dimensionality_is_enforced() {
        let mut c = RunConfig::defaults(Experiment::Converge1d);
        assert!(c.set("ny", "64").is_err());
        assert!(c.set("ic", "trig").is_err());
        let mut c = RunConfig::defaults(Experiment::Custom);
        c.set("ic", "maxwellian").unwrap();
        assert_eq!(c.dim(), 2);
        c.validate().unwrap();
        let mut c = RunConfig::defaults(Experiment::Converge2d);
        c.set("n", "32").unwrap();
        assert_eq!(c.n, vec![32, 32]);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let mut c = RunConfig::defaults(Experiment::Converge2d);
        c.set("schemes", "").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::defaults(Experiment::Converge1d);
        assert!(c.set("schemes", "lmps6").is_err());
        assert!(c.set("tau", "abc").is_err());
        assert!(c.set("tau", "inf").is_err());
        c.set("n", "100").unwrap();
        c.validate().unwrap();
        c.set("n", "7").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::defaults(Experiment::Converge1d);
        c.set("rel_tol", "1e-3").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::defaults(Experiment::Converge1d);
        c.set("x_max", "-200").unwrap();
        assert!(c.validate().is_err());
    }
}
