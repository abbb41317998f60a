//! Quadrature, interpolation, root finding and small linear solvers.

use num_complex::Complex64;

/// Cumulative trapezoid integral of samples `f` at nodes `x`, starting at 0.
pub fn cumtrapz(x: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 1..x.len() {
        out[i] = out[i - 1] + 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
    }
    out
}

/// Cumulative integral using a local quadratic interpolant on each interval.
///
/// Interval `[x_i, x_{i+1}]` is integrated exactly for the parabola through
/// three consecutive nodes (the right-hand triple for the last interval).
pub fn cumsimpson(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return cumtrapz(x, f);
    }
    for i in 0..n - 1 {
        let (j0, a, b) = if i + 2 < n { (i, x[i], x[i + 1]) } else { (i - 1, x[i], x[i + 1]) };
        let piece = quad_parabola(&x[j0..j0 + 3], &f[j0..j0 + 3], a, b);
        out[i + 1] = out[i] + piece;
    }
    out
}

fn quad_parabola(xs: &[f64], fs: &[f64], a: f64, b: f64) -> f64 {
    // Lagrange basis integrated exactly over [a,b].
    let mut total = 0.0;
    for k in 0..3 {
        let (p, q) = match k {
            0 => (xs[1], xs[2]),
            1 => (xs[0], xs[2]),
            _ => (xs[0], xs[1]),
        };
        let denom = (xs[k] - p) * (xs[k] - q);
        // int (s-p)(s-q) ds = s^3/3 - (p+q)s^2/2 + pq s
        let prim = |s: f64| s * s * s / 3.0 - (p + q) * s * s / 2.0 + p * q * s;
        total += fs[k] * (prim(b) - prim(a)) / denom;
    }
    total
}

/// Composite Gauss-Legendre (5 points) of a closure over `[a,b]` with `n` panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for p in 0..n {
        let c = a + (p as f64 + 0.5) * h;
        for k in 0..5 {
            s += W[k] * f(c + 0.5 * h * X[k]);
        }
    }
    0.5 * h * s
}

/// Linear interpolation on increasing nodes; clamps outside the range.
pub fn interp(x: &[f64], f: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return f[0];
    }
    if t >= x[n - 1] {
        return f[n - 1];
    }
    let i = match x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => return f[i],
        Err(i) => i - 1,
    };
    let s = (t - x[i]) / (x[i + 1] - x[i]);
    f[i] * (1.0 - s) + f[i + 1] * s
}

/// Index `i` with `x[i] <= t < x[i+1]`, clamped to valid intervals.
pub fn locate(x: &[f64], t: f64) -> usize {
    match x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(x.len() - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(x.len() - 2),
    }
}

/// Brent's method on a bracketing interval.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa * fb > 0.0 {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() < tol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let cond1 = !((s > lo.min(b)) && (s < lo.max(b)));
        let cond2 = mflag && (s - b).abs() >= (b - c).abs() / 2.0;
        let cond3 = !mflag && (s - b).abs() >= (c - d).abs() / 2.0;
        let cond4 = mflag && (b - c).abs() < tol;
        let cond5 = !mflag && (c - d).abs() < tol;
        if cond1 || cond2 || cond3 || cond4 || cond5 {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(b)
}

/// Thomas algorithm: `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut m = diag[0];
    c[0] = upper[0] / m;
    d[0] = rhs[0] / m;
    for i in 1..n {
        m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Thomas algorithm with real coefficients and a complex right-hand side, in place.
pub fn solve_tridiagonal_complex(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [Complex64], scratch: &mut [f64]) {
    let n = diag.len();
    let mut m = diag[0];
    scratch[0] = upper[0] / m;
    rhs[0] /= m;
    for i in 1..n {
        m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - prev * lower[i]) / m;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= next * scratch[i];
    }
}

/// As `solve_tridiagonal_complex`, returning `false` when a pivot is not positive
/// (the real matrix is not positive definite); `rhs` is then unspecified.
pub fn solve_spd_tridiagonal_complex(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [Complex64], scratch: &mut [f64]) -> bool {
    let n = diag.len();
    let mut m = diag[0];
    if !(m > 0.0) {
        return false;
    }
    scratch[0] = upper[0] / m;
    rhs[0] /= m;
    for i in 1..n {
        m = diag[i] - lower[i] * scratch[i - 1];
        if !(m > 0.0) {
            return false;
        }
        scratch[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - prev * lower[i]) / m;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= next * scratch[i];
    }
    true
}

/// Sparse symmetric matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

/// Outcome of a preconditioned conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for an SPD matrix.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> CgOutcome {
    let n = a.n;
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return CgOutcome { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        a.mul(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if rel < tol {
            return CgOutcome { x, iterations: it, relative_residual: rel, converged: true };
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { x, iterations: max_iter, relative_residual: rel, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_quadratics() {
        let x: Vec<f64> = (0..11).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
        let f: Vec<f64> = x.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let c = cumsimpson(&x, &f);
        let exact = |t: f64| t * t * t - 0.5 * t * t + 2.0 * t;
        for (i, t) in x.iter().enumerate() {
            assert!((c[i] - exact(*t)).abs() < 1e-13);
        }
    }

    #[test]
    fn trapezoid_on_linear() {
        let x = [0.0, 0.5, 2.0];
        let c = cumtrapz(&x, &[1.0, 2.0, 5.0]);
        assert!((c[2] - (0.75 + 5.25)).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_polynomial() {
        let v = gauss_legendre(|x| x.powi(8), 0.0, 1.0, 3);
        assert!((v - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn brent_finds_cosine_root() {
        let r = brent(f64::cos, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.5, 2.0, 3.0, 2.0];
        let upper = [-1.0, -1.0, -0.5, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        for i in 0..4 {
            b[i] = diag[i] * x[i] + if i > 0 { lower[i] * x[i - 1] } else { 0.0 } + if i < 3 { upper[i] * x[i + 1] } else { 0.0 };
        }
        let s = solve_tridiagonal(&lower, &diag, &upper, &b);
        for i in 0..4 {
            assert!((s[i] - x[i]).abs() < 1e-13);
        }
        let mut bc: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, -2.0 * v)).collect();
        let mut scratch = [0.0; 4];
        solve_tridiagonal_complex(&lower, &diag, &upper, &mut bc, &mut scratch);
        for i in 0..4 {
            assert!((bc[i] - Complex64::new(x[i], -2.0 * x[i])).norm() < 1e-13);
        }
    }

    #[test]
    fn pcg_solves_laplacian() {
        let n = 50;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0 + 0.01 * i as f64)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = pcg(&a, &b, 1e-12, 500);
        assert!(out.converged);
        let mut ax = vec![0.0; n];
        a.mul(&out.x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-9);
        }
    }
}
