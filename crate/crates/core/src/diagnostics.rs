//! Discrete invariants, error norms and convergence rates.

use crate::error::{Error, Result};
use crate::grid::{deriv, inner_product, norm, Field};
use crate::operators::{apply_d, RlwParams};

/// Discrete mass `(u, 1)`.
pub fn mass(u: &Field) -> f64 {
    u.grid().cell_volume() * u.values().iter().sum::<f64>()
}

/// Momentum `(u, D u) / 2`.
pub fn momentum(u: &Field, p: &RlwParams) -> Result<f64> {
    let du = apply_d(u, p)?;
    Ok(0.5 * inner_product(u, &du)?)
}

/// Momentum from the gradient form `(|u|^2 + mu |u_x|^2 + theta |u_y|^2) / 2`.
///
/// Agrees with [`momentum`] up to the Nyquist content of `u`, which the
/// first derivative discards but `D` retains.
pub fn momentum_gradient(u: &Field, p: &RlwParams) -> Result<f64> {
    let mut total = norm(u).powi(2) + p.mu * norm(&deriv(u, 0)?).powi(2);
    if u.grid().dim() == 2 {
        total += p.theta * norm(&deriv(u, 1)?).powi(2);
    }
    Ok(0.5 * total)
}

/// Hamiltonian `(u^2/2 + u^3/6, 1)`.
pub fn hamiltonian(u: &Field) -> f64 {
    u.grid().cell_volume()
        * u.values()
            .iter()
            .map(|v| 0.5 * v * v + v * v * v / 6.0)
            .sum::<f64>()
}

/// Quadratized energy `(u^2/2 + u q/6, 1)`.
pub fn quad_energy(u: &Field, q: &Field) -> Result<f64> {
    u.check_same_grid(q)?;
    Ok(u.grid().cell_volume()
        * u.values()
            .iter()
            .zip(q.values())
            .map(|(v, w)| 0.5 * v * v + v * w / 6.0)
            .sum::<f64>())
}

/// Weighted discrete `l^2` and max norms of `u_num - u_ref`.
pub fn error_norms(u_num: &Field, u_ref: &Field) -> Result<(f64, f64)> {
    u_num.check_same_grid(u_ref)?;
    let (sq, max) = u_num
        .values()
        .iter()
        .zip(u_ref.values())
        .map(|(a, b)| a - b)
        .fold((0.0, 0.0f64), |(s, m), d| (s + d * d, m.max(d.abs())));
    Ok(((u_num.grid().cell_volume() * sq).sqrt(), max))
}

/// `log2(e_k / e_{k+1})` for errors at successively halved steps.
pub fn convergence_rates(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::Config("need at least two error samples".into()));
    }
    errors
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 && w[1] > 0.0 && w.iter().all(|e| e.is_finite()) {
                Ok((w[0] / w[1]).log2())
            } else {
                Err(Error::UndefinedRate(w[0], w[1]))
            }
        })
        .collect()
}

/// Invariants sampled at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub hamiltonian: f64,
    pub quad_energy: Option<f64>,
}

impl InvariantRecord {
    pub fn measure(t: f64, u: &Field, q: Option<&Field>, p: &RlwParams) -> Result<Self> {
        let record = InvariantRecord {
            t,
            mass: mass(u),
            momentum: momentum(u, p)?,
            hamiltonian: hamiltonian(u),
            quad_energy: q.map(|q| quad_energy(u, q)).transpose()?,
        };
        let finite = [record.mass, record.momentum, record.hamiltonian]
            .iter()
            .chain(record.quad_energy.as_ref())
            .all(|v| v.is_finite());
        if finite {
            Ok(record)
        } else {
            Err(Error::NonFinite { index: 0 })
        }
    }
}
