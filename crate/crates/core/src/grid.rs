//! Uniform periodic grids, Fourier transforms and spectral differentiation.
//!
//! Fields are stored row-major: in 2D the value at node `(ix, iy)` lives at
//! `ix * n_y + iy`. The spectral representation keeps only the non-negative
//! modes of the last (contiguous) axis, so a 1D grid of `n` nodes has
//! `n / 2 + 1` coefficients and a 2D grid has `n_x * (n_y / 2 + 1)`. In 2D
//! the spectral index is `jy * n_x + ix`.
//!
//! Transforms are unnormalized forward and `1/N`-scaled inverse. Every
//! first-derivative symbol has its Nyquist coefficient set to zero, which
//! makes the discrete derivative an exactly skew-symmetric real matrix.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform periodic tensor grid on `[a, b)` (1D) or `[a_x, b_x) x [a_y, b_y)` (2D).
pub struct PeriodicGrid {
    bounds: Vec<(f64, f64)>,
    n: Vec<usize>,
    h: Vec<f64>,
    kappa: Vec<Vec<f64>>,
    nyquist: Vec<Vec<bool>>,
    plans: Plans,
}

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    /// Complex transforms along the first axis (2D only).
    fwd_x: Option<Arc<dyn Fft<f64>>>,
    inv_x: Option<Arc<dyn Fft<f64>>>,
}

impl PeriodicGrid {
    /// Builds a grid from per-axis intervals and node counts.
    pub fn new(bounds: &[(f64, f64)], n: &[usize]) -> Result<Arc<Self>> {
        let dim = bounds.len();
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n.len() != dim {
            return Err(Error::Config(format!(
                "{} intervals but {} node counts",
                dim,
                n.len()
            )));
        }
        for (axis, (&(a, b), &na)) in bounds.iter().zip(n).enumerate() {
            if na < 8 || na % 2 != 0 {
                return Err(Error::InvalidNodeCount { axis, n: na });
            }
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::DegenerateInterval { axis, a, b });
            }
        }

        let h = bounds
            .iter()
            .zip(n)
            .map(|(&(a, b), &na)| (b - a) / na as f64)
            .collect();
        let kappa = bounds
            .iter()
            .zip(n)
            .map(|(&(a, b), &na)| {
                (0..na)
                    .map(|j| 2.0 * PI * mode_index(j, na) as f64 / (b - a))
                    .collect()
            })
            .collect();
        let nyquist = n
            .iter()
            .map(|&na| (0..na).map(|j| j == na / 2).collect())
            .collect();

        let last = n[dim - 1];
        let mut real_planner = RealFftPlanner::<f64>::new();
        let (fwd_x, inv_x) = if dim == 2 {
            let mut planner = FftPlanner::<f64>::new();
            (
                Some(planner.plan_fft_forward(n[0])),
                Some(planner.plan_fft_inverse(n[0])),
            )
        } else {
            (None, None)
        };
        let plans = Plans {
            r2c: real_planner.plan_fft_forward(last),
            c2r: real_planner.plan_fft_inverse(last),
            fwd_x,
            inv_x,
        };

        Ok(Arc::new(PeriodicGrid {
            bounds: bounds.to_vec(),
            n: n.to_vec(),
            h,
            kappa,
            nyquist,
            plans,
        }))
    }

    /// 1D convenience constructor.
    pub fn new_1d(a: f64, b: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(&[(a, b)], &[n])
    }

    /// 2D convenience constructor.
    pub fn new_2d(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Arc<Self>> {
        Self::new(&[x, y], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Per-axis wavenumber table in standard FFT order. The Nyquist entry
    /// carries the positive wavenumber `pi * n / L`.
    pub fn kappa(&self, axis: usize) -> &[f64] {
        &self.kappa[axis]
    }

    pub fn nyquist_mask(&self, axis: usize) -> &[bool] {
        &self.nyquist[axis]
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.bounds.iter().map(|(a, b)| b - a).collect()
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single node, the product of the spacings.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Coordinates of node `index` (length `dim`).
    pub fn node(&self, index: usize) -> [f64; 2] {
        match self.dim() {
            1 => [self.bounds[0].0 + index as f64 * self.h[0], 0.0],
            _ => {
                let ny = self.n[1];
                let (ix, iy) = (index / ny, index % ny);
                [
                    self.bounds[0].0 + ix as f64 * self.h[0],
                    self.bounds[1].0 + iy as f64 * self.h[1],
                ]
            }
        }
    }

    /// Number of stored spectral coefficients.
    pub fn spectral_len(&self) -> usize {
        let half = self.n[self.dim() - 1] / 2 + 1;
        match self.dim() {
            1 => half,
            _ => half * self.n[0],
        }
    }

    /// Wavenumber information for a spectral index.
    pub fn mode(&self, index: usize) -> Mode {
        match self.dim() {
            1 => {
                let n = self.n[0];
                Mode {
                    kx: self.kappa[0][index],
                    ky: 0.0,
                    nyquist_x: index == n / 2,
                    nyquist_y: false,
                }
            }
            _ => {
                let nx = self.n[0];
                let (jy, ix) = (index / nx, index % nx);
                Mode {
                    kx: self.kappa[0][ix],
                    ky: self.kappa[1][jy],
                    nyquist_x: self.nyquist[0][ix],
                    nyquist_y: self.nyquist[1][jy],
                }
            }
        }
    }

    /// Builds a spectral multiplier by evaluating `f` on every stored mode.
    pub fn symbol(&self, f: impl Fn(Mode) -> Complex64) -> Symbol {
        Symbol((0..self.spectral_len()).map(|i| f(self.mode(i))).collect())
    }

    /// Same geometry (bounds and node counts).
    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.bounds == other.bounds)
    }

    /// Unnormalized forward transform of real node values.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut spec = vec![ZERO; self.spectral_len()];
        match self.dim() {
            1 => {
                let mut input = values.to_vec();
                self.plans
                    .r2c
                    .process(&mut input, &mut spec)
                    .expect("real FFT buffer sizes");
            }
            _ => {
                let (nx, ny) = (self.n[0], self.n[1]);
                let nyh = ny / 2 + 1;
                let mut row = vec![0.0; ny];
                let mut out = vec![ZERO; nyh];
                for ix in 0..nx {
                    row.copy_from_slice(&values[ix * ny..(ix + 1) * ny]);
                    self.plans
                        .r2c
                        .process(&mut row, &mut out)
                        .expect("real FFT buffer sizes");
                    for (jy, c) in out.iter().enumerate() {
                        spec[jy * nx + ix] = *c;
                    }
                }
                self.plans.fwd_x.as_ref().expect("2D plan").process(&mut spec);
            }
        }
        spec
    }

    /// Inverse transform, scaled by `1/N`. Imaginary parts of the
    /// self-conjugate modes are discarded.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        debug_assert_eq!(spec.len(), self.spectral_len());
        let scale = 1.0 / self.len() as f64;
        let mut values = vec![0.0; self.len()];
        match self.dim() {
            1 => {
                let last = spec.len() - 1;
                spec[0].im = 0.0;
                spec[last].im = 0.0;
                self.plans
                    .c2r
                    .process(&mut spec, &mut values)
                    .expect("real FFT buffer sizes");
            }
            _ => {
                let (nx, ny) = (self.n[0], self.n[1]);
                let nyh = ny / 2 + 1;
                self.plans.inv_x.as_ref().expect("2D plan").process(&mut spec);
                let mut col = vec![ZERO; nyh];
                let mut row = vec![0.0; ny];
                for ix in 0..nx {
                    for (jy, c) in col.iter_mut().enumerate() {
                        *c = spec[jy * nx + ix];
                    }
                    col[0].im = 0.0;
                    col[nyh - 1].im = 0.0;
                    self.plans
                        .c2r
                        .process(&mut col, &mut row)
                        .expect("real FFT buffer sizes");
                    values[ix * ny..(ix + 1) * ny].copy_from_slice(&row);
                }
            }
        }
        for v in &mut values {
            *v *= scale;
        }
        values
    }

    /// Applies a multiplier without checking conjugate symmetry.
    pub(crate) fn multiply(&self, values: &[f64], symbol: &Symbol) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, s) in spec.iter_mut().zip(&symbol.0) {
            *c *= s;
        }
        self.inverse(spec)
    }

    /// Checks that a symbol maps real fields to real fields.
    pub fn check_hermitian(&self, symbol: &Symbol) -> Result<()> {
        if symbol.0.len() != self.spectral_len() {
            return Err(Error::LengthMismatch {
                expected: self.spectral_len(),
                got: symbol.0.len(),
            });
        }
        let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * a.norm().max(b.norm()).max(1.0);
        match self.dim() {
            1 => {
                let n = self.n[0];
                for index in [0, n / 2] {
                    if !close(symbol.0[index], symbol.0[index].conj()) {
                        return Err(Error::NonHermitianSymbol { index });
                    }
                }
            }
            _ => {
                let (nx, ny) = (self.n[0], self.n[1]);
                for jy in [0, ny / 2] {
                    for ix in 0..nx {
                        let index = jy * nx + ix;
                        let mirror = jy * nx + (nx - ix) % nx;
                        if !close(symbol.0[index], symbol.0[mirror].conj()) {
                            return Err(Error::NonHermitianSymbol { index });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("bounds", &self.bounds)
            .field("n", &self.n)
            .finish()
    }
}

/// Signed mode index of position `j` in an FFT of length `n`. The Nyquist
/// position maps to `+n/2`.
fn mode_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Wavenumbers of one stored spectral coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub kx: f64,
    pub ky: f64,
    pub nyquist_x: bool,
    pub nyquist_y: bool,
}

impl Mode {
    /// First-derivative wavenumber along `axis`, zero at that axis' Nyquist mode.
    pub fn deriv_k(&self, axis: usize) -> f64 {
        match axis {
            0 if !self.nyquist_x => self.kx,
            1 if !self.nyquist_y => self.ky,
            _ => 0.0,
        }
    }
}

/// Per-mode multiplier in the grid's spectral layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol(pub Vec<Complex64>);

/// Real-valued grid function.
#[derive(Clone)]
pub struct Field {
    grid: Arc<PeriodicGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<PeriodicGrid>, c: f64) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node. In 1D the second coordinate is zero.
    pub fn from_fn(grid: &Arc<PeriodicGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.node(i);
                f(x, y)
            })
            .collect();
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Wraps node values, rejecting wrong lengths and non-finite entries.
    pub fn from_values(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Wraps values known to have the right length.
    pub(crate) fn from_raw(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("len", &self.values.len())
            .finish()
    }
}

/// Periodic trapezoidal inner product `(prod h) * sum u v`.
pub fn inner_product(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    Ok(dot_weighted(&u.grid, &u.values, &v.values))
}

pub(crate) fn dot_weighted(grid: &PeriodicGrid, u: &[f64], v: &[f64]) -> f64 {
    grid.cell_volume() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// Discrete `L^2` norm under the quadrature weight.
pub fn norm(u: &Field) -> f64 {
    dot_weighted(&u.grid, &u.values, &u.values).sqrt()
}

/// Spectral first derivative along `axis`.
pub fn deriv(u: &Field, axis: usize) -> Result<Field> {
    let grid = &u.grid;
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    let symbol = grid.symbol(|m| Complex64::new(0.0, m.deriv_k(axis)));
    Ok(Field::from_raw(grid, grid.multiply(&u.values, &symbol)))
}

/// `inverse(symbol * forward(u))` for a conjugate-symmetric symbol.
pub fn apply_multiplier(u: &Field, symbol: &Symbol) -> Result<Field> {
    u.grid.check_hermitian(symbol)?;
    Ok(Field::from_raw(&u.grid, u.grid.multiply(&u.values, symbol)))
}
