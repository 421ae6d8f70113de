//! Initial conditions and exact solutions.

use std::sync::Arc;

use log::warn;

use crate::grid::{Field, PeriodicGrid};
use crate::operators::RlwParams;

/// A single solitary wave `3c sech^2(k (x - v t - x0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    pub c: f64,
    pub x0: f64,
}

impl SolitonParams {
    pub fn new(c: f64, x0: f64) -> Self {
        SolitonParams { c, x0 }
    }

    /// Inverse width `sqrt(c / (mu (1 + c))) / 2`.
    pub fn k(&self, p: &RlwParams) -> f64 {
        0.5 * (self.c / (p.mu * (1.0 + self.c))).sqrt()
    }

    /// Speed `alpha (1 + c)`.
    pub fn v(&self, p: &RlwParams) -> f64 {
        p.alpha * (1.0 + self.c)
    }

    pub fn amplitude(&self) -> f64 {
        3.0 * self.c
    }
}

fn sech2(z: f64) -> f64 {
    let s = 1.0 / z.cosh();
    s * s
}

/// Maps `xi` into `[-L/2, L/2)`.
fn wrap(xi: f64, length: f64) -> f64 {
    xi - length * (xi / length + 0.5).floor()
}

fn check_tail(sp: &SolitonParams, p: &RlwParams, length: f64) {
    let tail = sp.amplitude() * sech2(sp.k(p) * 0.5 * length);
    if tail > 1e-10 {
        warn!(
            "soliton (c = {}) is not negligible at the periodic boundary: {tail:.3e}",
            sp.c
        );
    }
}

/// Exact travelling soliton at time `t`, sampled with periodic wrapping.
pub fn soliton_1d(grid: &Arc<PeriodicGrid>, p: &RlwParams, sp: &SolitonParams, t: f64) -> Field {
    let length = grid.lengths()[0];
    check_tail(sp, p, length);
    let (k, shift) = (sp.k(p), sp.v(p) * t + sp.x0);
    Field::from_fn(grid, |x, _| sp.amplitude() * sech2(k * wrap(x - shift, length)))
}

/// Superposition of two solitons at `t = 0`.
pub fn two_soliton_ic(grid: &Arc<PeriodicGrid>, p: &RlwParams, first: &SolitonParams, second: &SolitonParams) -> Field {
    let length = grid.lengths()[0];
    for sp in [first, second] {
        if sp.c > 0.0 {
            check_tail(sp, p, length);
        }
    }
    let profile = |sp: &SolitonParams, x: f64| {
        if sp.c == 0.0 {
            0.0
        } else {
            sp.amplitude() * sech2(sp.k(p) * wrap(x - sp.x0, length))
        }
    };
    Field::from_fn(grid, |x, _| profile(first, x) + profile(second, x))
}

/// `(1 + sin x)(1 + sin y)`.
pub fn trig_ic_2d(grid: &Arc<PeriodicGrid>) -> Field {
    Field::from_fn(grid, |x, y| (1.0 + x.sin()) * (1.0 + y.sin()))
}

/// Smoothed circular step `0.05 (1 - tanh(r^2 - d^2))` about `(x0, y0)`.
pub fn undular_bore_ic(grid: &Arc<PeriodicGrid>, x0: f64, y0: f64, d: f64) -> Field {
    Field::from_fn(grid, |x, y| {
        let r2 = (x - x0).powi(2) + (y - y0).powi(2);
        0.05 * (1.0 - (r2 - d * d).tanh())
    })
}

/// Gaussian pulse `exp(-r^2)` about `(x0, y0)`.
pub fn maxwellian_ic(grid: &Arc<PeriodicGrid>, x0: f64, y0: f64) -> Field {
    Field::from_fn(grid, |x, y| (-((x - x0).powi(2) + (y - y0).powi(2))).exp())
}
