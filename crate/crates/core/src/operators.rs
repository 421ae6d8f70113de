//! Discrete RLW operators on a periodic grid.
//!
//! * `D = 1 - mu d_xx - theta d_yy` (self-adjoint, positive definite)
//! * `S = -D^{-1} (alpha d_x + beta d_y)` (skew-adjoint)
//! * `G(w) v = -[L v + (L(w v) + w L v) / 3]` with `L = alpha d_x + beta d_y`,
//!   skew-adjoint for every frozen `w`.
//!
//! Products are taken pointwise on the grid and derivatives are spectral,
//! so skew-symmetry of `G(w)` survives discretization exactly.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid, Symbol};

/// Coefficients of the RLW equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlwParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub theta: f64,
}

impl RlwParams {
    pub fn one_d(alpha: f64, mu: f64) -> Self {
        RlwParams {
            alpha,
            beta: 0.0,
            mu,
            theta: 0.0,
        }
    }

    pub fn two_d(alpha: f64, beta: f64, mu: f64, theta: f64) -> Self {
        RlwParams {
            alpha,
            beta,
            mu,
            theta,
        }
    }

    /// Checks positivity and that the y-coefficients vanish exactly in 1D.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let all = [self.alpha, self.beta, self.mu, self.theta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("RLW coefficients must be finite".into()));
        }
        if self.alpha <= 0.0 || self.mu <= 0.0 {
            return Err(Error::Config("alpha and mu must be positive".into()));
        }
        if self.beta < 0.0 || self.theta < 0.0 {
            return Err(Error::Config("beta and theta must be non-negative".into()));
        }
        match dim {
            1 if self.beta != 0.0 || self.theta != 0.0 => Err(Error::Config(
                "beta and theta must be zero on a 1D grid".into(),
            )),
            1 | 2 => Ok(()),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }
}

/// The RLW operators bound to one grid and parameter set, with cached symbols.
pub struct RlwOperator {
    grid: Arc<PeriodicGrid>,
    params: RlwParams,
    d: Symbol,
    d_inv: Symbol,
    s: Symbol,
    /// `i (alpha kx + beta ky)` with per-axis Nyquist zeroed.
    advect: Symbol,
}

impl std::fmt::Debug for RlwOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RlwOperator").field("params", self.params()).finish()
    }
}

impl RlwOperator {
    pub fn new(grid: &Arc<PeriodicGrid>, params: RlwParams) -> Result<Self> {
        params.validate(grid.dim())?;
        let RlwParams {
            alpha,
            beta,
            mu,
            theta,
        } = params;
        let d_of = |kx: f64, ky: f64| 1.0 + mu * kx * kx + theta * ky * ky;
        let d = grid.symbol(|m| Complex64::new(d_of(m.kx, m.ky), 0.0));
        let d_inv = grid.symbol(|m| Complex64::new(1.0 / d_of(m.kx, m.ky), 0.0));
        let advect =
            grid.symbol(|m| Complex64::new(0.0, alpha * m.deriv_k(0) + beta * m.deriv_k(1)));
        let s = Symbol(
            advect
                .0
                .iter()
                .zip(&d_inv.0)
                .map(|(l, di)| -l * di)
                .collect(),
        );
        Ok(RlwOperator {
            grid: Arc::clone(grid),
            params,
            d,
            d_inv,
            s,
            advect,
        })
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn params(&self) -> &RlwParams {
        &self.params
    }

    fn check(&self, u: &Field) -> Result<()> {
        if self.grid.same_as(u.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn apply_d(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(Field::from_raw(&self.grid, self.grid.multiply(u.values(), &self.d)))
    }

    pub fn apply_d_inv(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(Field::from_raw(&self.grid, self.d_inv_raw(u.values())))
    }

    pub fn apply_s(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(Field::from_raw(&self.grid, self.s_raw(u.values())))
    }

    /// `G(ustar) v`.
    pub fn apply_g(&self, ustar: &Field, v: &Field) -> Result<Field> {
        self.check(ustar)?;
        self.check(v)?;
        let spec = self.g_spectrum(ustar.values(), v.values());
        Ok(Field::from_raw(&self.grid, self.grid.inverse(spec)))
    }

    /// `D^{-1} G(ustar) v`, fused into a single inverse transform.
    pub fn apply_d_inv_g(&self, ustar: &Field, v: &Field) -> Result<Field> {
        self.check(ustar)?;
        self.check(v)?;
        Ok(Field::from_raw(&self.grid, self.d_inv_g_raw(ustar.values(), v.values())))
    }

    pub(crate) fn d_inv_raw(&self, v: &[f64]) -> Vec<f64> {
        self.grid.multiply(v, &self.d_inv)
    }

    pub(crate) fn s_raw(&self, v: &[f64]) -> Vec<f64> {
        self.grid.multiply(v, &self.s)
    }

    pub(crate) fn d_inv_g_raw(&self, ustar: &[f64], v: &[f64]) -> Vec<f64> {
        let mut spec = self.g_spectrum(ustar, v);
        for (c, di) in spec.iter_mut().zip(&self.d_inv.0) {
            *c *= di;
        }
        self.grid.inverse(spec)
    }

    /// Spectrum of `G(w) v = -[L((1 + w/3) v) + (w/3) L v]`.
    fn g_spectrum(&self, w: &[f64], v: &[f64]) -> Vec<Complex64> {
        let grid = &self.grid;
        let lv = grid.multiply(v, &self.advect);
        let p: Vec<f64> = w.iter().zip(v).map(|(wi, vi)| (1.0 + wi / 3.0) * vi).collect();
        let q: Vec<f64> = w.iter().zip(&lv).map(|(wi, li)| wi / 3.0 * li).collect();
        let p_hat = grid.forward(&p);
        let mut q_hat = grid.forward(&q);
        for ((qc, pc), l) in q_hat.iter_mut().zip(&p_hat).zip(&self.advect.0) {
            *qc = -(*qc + l * pc);
        }
        q_hat
    }
}

pub fn apply_d(u: &Field, p: &RlwParams) -> Result<Field> {
    RlwOperator::new(u.grid(), *p)?.apply_d(u)
}

pub fn apply_d_inv(u: &Field, p: &RlwParams) -> Result<Field> {
    RlwOperator::new(u.grid(), *p)?.apply_d_inv(u)
}

pub fn apply_s(u: &Field, p: &RlwParams) -> Result<Field> {
    RlwOperator::new(u.grid(), *p)?.apply_s(u)
}

pub fn apply_g(ustar: &Field, v: &Field, p: &RlwParams) -> Result<Field> {
    RlwOperator::new(v.grid(), *p)?.apply_g(ustar, v)
}

/// Largest grid accepted by [`materialize_dense`].
pub const DENSE_LIMIT: usize = 64;

/// Operator selector for [`materialize_dense`].
#[derive(Debug, Clone, Copy)]
pub enum DenseOp<'a> {
    D,
    DInv,
    S,
    G(&'a Field),
    DInvG(&'a Field),
}

/// Explicit matrix of an operator, built column by column from unit fields.
/// Only meant as a brute-force reference on tiny grids.
pub fn materialize_dense(
    op: DenseOp<'_>,
    params: &RlwParams,
    grid: &Arc<PeriodicGrid>,
) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if n > DENSE_LIMIT {
        return Err(Error::DenseTooLarge {
            nodes: n,
            limit: DENSE_LIMIT,
        });
    }
    let ops = RlwOperator::new(grid, *params)?;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = Field::zeros(grid);
        e.values_mut()[j] = 1.0;
        let col = match op {
            DenseOp::D => ops.apply_d(&e)?,
            DenseOp::DInv => ops.apply_d_inv(&e)?,
            DenseOp::S => ops.apply_s(&e)?,
            DenseOp::G(w) => ops.apply_g(w, &e)?,
            DenseOp::DInvG(w) => ops.apply_d_inv_g(w, &e)?,
        };
        for (i, v) in col.values().iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{deriv, inner_product, norm};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_field(grid: &Arc<PeriodicGrid>, rng: &mut rand::rngs::StdRng) -> Field {
        let v = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Field::from_values(grid, v).unwrap()
    }

    fn unit_circle(n: usize) -> Arc<PeriodicGrid> {
        PeriodicGrid::new_1d(0.0, 2.0 * PI, n).unwrap()
    }

    fn assert_close(a: &Field, b: &Field, tol: f64) {
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn params_validation() {
        assert!(RlwParams::one_d(1.0, 1.0).validate(1).is_ok());
        assert!(RlwParams::two_d(1.0, 1.0, 1.0, 1.0).validate(1).is_err());
        assert!(RlwParams::one_d(0.0, 1.0).validate(1).is_err());
        assert!(RlwParams::one_d(1.0, -1.0).validate(1).is_err());
        assert!(RlwParams::two_d(1.0, 1.0, 1.0, 1.0).validate(2).is_ok());
    }

    #[test]
    fn d_examples() {
        let g = unit_circle(32);
        let p = RlwParams::one_d(1.0, 1.0);
        let s = Field::from_fn(&g, |x, _| x.sin());
        assert_close(&apply_d(&s, &p).unwrap(), &s.map(|v| 2.0 * v), 1e-13);
        let c = Field::constant(&g, 3.5);
        assert_close(&apply_d(&c, &p).unwrap(), &c, 1e-13);
        assert_close(&apply_d_inv(&s, &p).unwrap(), &s.map(|v| v / 2.0), 1e-14);
        assert_close(&apply_d_inv(&c, &p).unwrap(), &c, 1e-14);
    }

    #[test]
    fn d_self_adjoint_and_inverse() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let g = PeriodicGrid::new_1d(-5.0, 5.0, 64).unwrap();
        let p = RlwParams::one_d(1.0, 0.7);
        let ops = RlwOperator::new(&g, p).unwrap();
        let u = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let lhs = inner_product(&ops.apply_d(&u).unwrap(), &v).unwrap();
        let rhs = inner_product(&u, &ops.apply_d(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
        let back = ops.apply_d_inv(&ops.apply_d(&u).unwrap()).unwrap();
        assert_close(&back, &u, 1e-13);
        let uu = inner_product(&ops.apply_d(&u).unwrap(), &u).unwrap();
        assert!(uu >= inner_product(&u, &u).unwrap());
    }

    #[test]
    fn s_examples() {
        let g = unit_circle(32);
        let p = RlwParams::one_d(1.0, 1.0);
        let s = Field::from_fn(&g, |x, _| x.sin());
        let expected = Field::from_fn(&g, |x, _| -x.cos() / 2.0);
        assert_close(&apply_s(&s, &p).unwrap(), &expected, 1e-14);
        assert!(apply_s(&Field::constant(&g, 2.0), &p).unwrap().max_abs() < 1e-15);

        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let u = random_field(&g, &mut rng);
        let su = apply_s(&u, &p).unwrap();
        assert!(inner_product(&su, &u).unwrap().abs() < 1e-11);
        let mean: f64 = su.values().iter().sum::<f64>() / su.len() as f64;
        assert!(mean.abs() < 1e-16);
    }

    #[test]
    fn g_examples() {
        let g = unit_circle(32);
        let p = RlwParams::one_d(1.0, 1.0);
        let s = Field::from_fn(&g, |x, _| x.sin());
        let cos = Field::from_fn(&g, |x, _| x.cos());
        let zero = Field::zeros(&g);
        assert_close(&apply_g(&zero, &s, &p).unwrap(), &cos.map(|v| -v), 1e-13);
        let one = Field::constant(&g, 1.0);
        assert_close(
            &apply_g(&one, &s, &p).unwrap(),
            &cos.map(|v| -(1.0 + 2.0 / 3.0) * v),
            1e-13,
        );
    }

    #[test]
    fn g_matches_direct_formula() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let g = PeriodicGrid::new_2d((0.0, 3.0), (-1.0, 1.0), 16, 8).unwrap();
        let p = RlwParams::two_d(1.3, 0.4, 1.0, 2.0);
        let w = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let wv = Field::from_raw(
            &g,
            w.values().iter().zip(v.values()).map(|(a, b)| a * b).collect(),
        );
        let (vx, vy) = (deriv(&v, 0).unwrap(), deriv(&v, 1).unwrap());
        let (wvx, wvy) = (deriv(&wv, 0).unwrap(), deriv(&wv, 1).unwrap());
        let direct: Vec<f64> = (0..g.len())
            .map(|i| {
                let wi = w.values()[i];
                -(p.alpha * vx.values()[i]
                    + p.beta * vy.values()[i]
                    + p.alpha / 3.0 * (wi * vx.values()[i] + wvx.values()[i])
                    + p.beta / 3.0 * (wi * vy.values()[i] + wvy.values()[i]))
            })
            .collect();
        let ops = RlwOperator::new(&g, p).unwrap();
        let gv = ops.apply_g(&w, &v).unwrap();
        for (a, b) in gv.values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        let dg = ops.apply_d_inv_g(&w, &v).unwrap();
        assert_close(&dg, &ops.apply_d_inv(&gv).unwrap(), 1e-13);
    }

    #[test]
    fn g_is_skew_for_random_fields() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for grid in [
            PeriodicGrid::new_1d(-10.0, 10.0, 128).unwrap(),
            PeriodicGrid::new_2d((0.0, 2.0), (0.0, 1.0), 16, 16).unwrap(),
        ] {
            let p = if grid.dim() == 1 {
                RlwParams::one_d(1.0, 1.0)
            } else {
                RlwParams::two_d(1.0, 0.5, 1.0, 0.3)
            };
            let ops = RlwOperator::new(&grid, p).unwrap();
            for _ in 0..5 {
                let w = random_field(&grid, &mut rng).map(|x| 5.0 * x);
                let v = random_field(&grid, &mut rng);
                let gv = ops.apply_g(&w, &v).unwrap();
                let ip = inner_product(&gv, &v).unwrap();
                assert!(ip.abs() <= 1e-10 * norm(&v).powi(2), "{ip}");
            }
        }
    }

    #[test]
    fn linearized_flow_does_not_conserve_mass() {
        let g = PeriodicGrid::new_1d(-10.0, 10.0, 64).unwrap();
        let p = RlwParams::one_d(1.0, 1.0);
        let ops = RlwOperator::new(&g, p).unwrap();
        let w = Field::from_fn(&g, |x, _| (0.1 * PI * x).sin() + 0.5);
        let u = Field::from_fn(&g, |x, _| (0.1 * PI * x).cos());
        let du = ops.apply_d_inv_g(&w, &u).unwrap();
        let mean = du.values().iter().sum::<f64>() / du.len() as f64;
        assert!(mean.abs() > 1e-6, "mean {mean}");
    }

    #[test]
    fn dense_limit_enforced() {
        let g = PeriodicGrid::new_1d(0.0, 1.0, 128).unwrap();
        let r = materialize_dense(DenseOp::D, &RlwParams::one_d(1.0, 1.0), &g);
        assert!(matches!(r, Err(Error::DenseTooLarge { nodes: 128, .. })));
    }

    #[test]
    fn dense_structure() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        for (grid, p) in [
            (
                PeriodicGrid::new_1d(0.0, 7.0, 8).unwrap(),
                RlwParams::one_d(1.0, 1.3),
            ),
            (
                PeriodicGrid::new_2d((0.0, 2.0), (0.0, 3.0), 8, 8).unwrap(),
                RlwParams::two_d(1.0, 0.7, 0.4, 1.1),
            ),
        ] {
            let d = materialize_dense(DenseOp::D, &p, &grid).unwrap();
            let di = materialize_dense(DenseOp::DInv, &p, &grid).unwrap();
            let n = grid.len();
            let prod = &d * &di;
            assert!((prod - DMatrix::identity(n, n)).amax() < 1e-12);
            assert!((&d - d.transpose()).amax() < 1e-12);
            let w = random_field(&grid, &mut rng);
            let gm = materialize_dense(DenseOp::G(&w), &p, &grid).unwrap();
            assert!((&gm + gm.transpose()).amax() < 1e-11);
            let sm = materialize_dense(DenseOp::S, &p, &grid).unwrap();
            assert!((&sm + sm.transpose()).amax() < 1e-11);
        }
    }
}
