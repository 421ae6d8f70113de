//! Gauss-Legendre collocation tableaus.

use crate::error::{Error, Result};

/// Coefficients of an `s`-stage Runge-Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    s: usize,
    /// Row-major `s x s`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    order: usize,
}

impl ButcherTableau {
    /// Builds a tableau from its coefficients. `a` is row-major.
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, order: usize) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s * s || c.len() != s {
            return Err(Error::Config(format!(
                "inconsistent tableau shapes: a={}, b={}, c={}",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        Ok(ButcherTableau { s, a, b, c, order })
    }

    pub fn stages(&self) -> usize {
        self.s
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.s + j]
    }

    pub fn a_row(&self, i: usize) -> &[f64] {
        &self.a[i * self.s..(i + 1) * self.s]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `max_i |c_i - sum_j a_ij|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.s)
            .map(|i| (self.c[i] - self.a_row(i).iter().sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// `|sum_i b_i - 1|`.
    pub fn weight_sum_residual(&self) -> f64 {
        (self.b.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Gauss collocation at the zeros of the shifted Legendre polynomial of degree `s`.
pub fn gauss_tableau(s: usize) -> Result<ButcherTableau> {
    match s {
        1 => ButcherTableau::new(vec![0.5], vec![1.0], vec![0.5], 2),
        2 => {
            let r = 3f64.sqrt() / 6.0;
            ButcherTableau::new(
                vec![0.25, 0.25 - r, 0.25 + r, 0.25],
                vec![0.5, 0.5],
                vec![0.5 - r, 0.5 + r],
                4,
            )
        }
        3 => {
            let r15 = 15f64.sqrt();
            ButcherTableau::new(
                vec![
                    5.0 / 36.0,
                    2.0 / 9.0 - r15 / 15.0,
                    5.0 / 36.0 - r15 / 30.0,
                    5.0 / 36.0 + r15 / 24.0,
                    2.0 / 9.0,
                    5.0 / 36.0 - r15 / 24.0,
                    5.0 / 36.0 + r15 / 30.0,
                    2.0 / 9.0 + r15 / 15.0,
                    5.0 / 36.0,
                ],
                vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
                vec![0.5 - r15 / 10.0, 0.5, 0.5 + r15 / 10.0],
                6,
            )
        }
        _ => Err(Error::Config(format!(
            "Gauss tableau with {s} stages is not available (use 1, 2 or 3)"
        ))),
    }
}

/// `max_ij |b_i a_ij + b_j a_ji - b_i b_j|`; zero for methods that conserve
/// quadratic invariants.
pub fn symplectic_residual(t: &ButcherTableau) -> f64 {
    let s = t.stages();
    let b = t.b();
    let mut worst = 0.0f64;
    for i in 0..s {
        for j in 0..s {
            worst = worst.max((b[i] * t.a(i, j) + b[j] * t.a(j, i) - b[i] * b[j]).abs());
        }
    }
    worst
}
