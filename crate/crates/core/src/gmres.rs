//! Restarted GMRES for matrix-free real operators.

/// Result of a GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// Inner (Arnoldi) iterations performed across all restart cycles.
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` at exit.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves `A x = b` starting from `x = 0`, with modified Gram-Schmidt Arnoldi
/// and Givens rotations. Convergence is judged on the true residual
/// recomputed at the end of every cycle.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> GmresOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let m = restart.max(1).min(n);
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut r_norm = b_norm;
    // Cycles that fail to reduce the true residual are rounding-limited.
    let mut stalled = 0;

    loop {
        if r_norm <= tol * b_norm {
            return GmresOutcome {
                x,
                iterations,
                residual: r_norm / b_norm,
                converged: true,
            };
        }
        if iterations >= max_iters || stalled >= 2 {
            return GmresOutcome {
                x,
                iterations,
                residual: r_norm / b_norm,
                converged: false,
            };
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / r_norm).collect());
        // Column k of the Hessenberg matrix, already rotated.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = r_norm;

        let mut k = 0;
        while k < m && iterations < max_iters {
            iterations += 1;
            let mut w = apply(&basis[k]);
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[j] = hij;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hij * vi;
                }
            }
            let w_norm = norm(&w);
            col[k + 1] = w_norm;

            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            cs.push(c);
            sn.push(s);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            k += 1;

            if w_norm == 0.0 || g[k].abs() <= 0.1 * tol * b_norm {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut sum = g[i];
            for j in i + 1..k {
                sum -= h[j][i] * y[j];
            }
            y[i] = sum / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }

        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let new_norm = norm(&r);
        if new_norm >= 0.5 * r_norm {
            stalled += 1;
        } else {
            stalled = 0;
        }
        r_norm = new_norm;
    }
}
