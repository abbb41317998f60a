//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Radial P1 discretization rebuilt from the nodes alone.
pub struct OracleGrid {
    pub r: Vec<f64>,
    pub mass: Vec<f64>,
    pub stiff: Vec<f64>,
}

impl OracleGrid {
    pub fn new(r: &[f64]) -> Self {
        let n = r.len();
        let mut mass = vec![0.0; n];
        let mut stiff = vec![0.0; n - 1];
        for i in 0..n - 1 {
            // exact integrals of hat functions against 2 pi r
            let h = r[i + 1] - r[i];
            mass[i] += 2.0 * PI * (h * r[i] / 3.0 + h * r[i + 1] / 6.0);
            mass[i + 1] += 2.0 * PI * (h * r[i] / 6.0 + h * r[i + 1] / 3.0);
            stiff[i] = PI * (r[i] + r[i + 1]) / h;
        }
        OracleGrid { r: r.to_vec(), mass, stiff }
    }
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

pub struct NewtonResult {
    pub g: Vec<f64>,
    pub mu: f64,
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped constrained Newton on `(g, mu)` for the radial giant-vortex equation.
pub fn newton_radial(nodes: &[f64], epsilon: f64, omega: f64, winding: i64, g0: &[f64]) -> NewtonResult {
    let grid = OracleGrid::new(nodes);
    let n = nodes.len();
    let k = winding as f64;
    let ie2 = 1.0 / (epsilon * epsilon);
    let v: Vec<f64> = nodes.iter().map(|r| if winding == 0 { 0.0 } else { k * k / (r * r) - 2.0 * omega * k }).collect();
    let kmul = |g: &[f64]| {
        let mut out = vec![0.0; n];
        for i in 0..n - 1 {
            let f = grid.stiff[i] * (g[i] - g[i + 1]);
            out[i] += f;
            out[i + 1] -= f;
        }
        out
    };
    let residual = |g: &[f64], mu: f64| -> (Vec<f64>, f64) {
        let kg = kmul(g);
        let f1: Vec<f64> = (0..n).map(|i| kg[i] + grid.mass[i] * (v[i] + 2.0 * ie2 * g[i] * g[i] - mu) * g[i]).collect();
        let f2 = 0.5 * (1.0 - (0..n).map(|i| grid.mass[i] * g[i] * g[i]).sum::<f64>());
        (f1, f2)
    };
    let norm = |f1: &[f64], f2: f64| (f1.iter().zip(&grid.mass).map(|(f, m)| f * f / m).sum::<f64>() + f2 * f2).sqrt();
    let mut g = g0.to_vec();
    let m0: f64 = (0..n).map(|i| grid.mass[i] * g[i] * g[i]).sum();
    g.iter_mut().for_each(|x| *x /= m0.sqrt());
    let kg = kmul(&g);
    let mut mu = (0..n).map(|i| g[i] * kg[i] + grid.mass[i] * (v[i] + 2.0 * ie2 * g[i] * g[i]) * g[i] * g[i]).sum::<f64>();
    let mut it = 0;
    let (mut f1, mut f2) = residual(&g, mu);
    let mut res = norm(&f1, f2);
    while it < 200 && res > 1e-11 * mu.abs().max(1.0) {
        it += 1;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            b[i] = grid.mass[i] * (v[i] + 6.0 * ie2 * g[i] * g[i] - mu);
        }
        for i in 0..n - 1 {
            b[i] += grid.stiff[i];
            b[i + 1] += grid.stiff[i];
            c[i] = -grid.stiff[i];
            a[i + 1] = -grid.stiff[i];
        }
        let wg: Vec<f64> = (0..n).map(|i| grid.mass[i] * g[i]).collect();
        let neg: Vec<f64> = f1.iter().map(|x| -x).collect();
        let y1 = thomas(&a, &b, &c, &neg);
        let y2 = thomas(&a, &b, &c, &wg);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let dmu = (f2 - dot(&wg, &y1)) / dot(&wg, &y2);
        let dx: Vec<f64> = (0..n).map(|i| y1[i] + dmu * y2[i]).collect();
        let mut step = 1.0;
        loop {
            let gt: Vec<f64> = (0..n).map(|i| g[i] + step * dx[i]).collect();
            let mt = mu + step * dmu;
            let (t1, t2) = residual(&gt, mt);
            let rt = norm(&t1, t2);
            if rt < res || step < 1e-6 {
                g = gt;
                mu = mt;
                f1 = t1;
                f2 = t2;
                res = rt;
                break;
            }
            step *= 0.5;
        }
    }
    let kg = kmul(&g);
    let energy = (0..n).map(|i| g[i] * kg[i] + grid.mass[i] * (v[i] * g[i] * g[i] + ie2 * g[i].powi(4))).sum::<f64>();
    NewtonResult { g, mu, energy, iterations: it, residual: res / mu.abs().max(1.0) }
}

/// Dense radial finite-difference solve of `-(r w^-1 h')' = 0` away from a ring at `ring`
/// with a unit line source, Dirichlet zero at both ends. Returns `h(ring)`.
pub fn fd_ring_value<W: Fn(f64) -> f64>(w: W, inner: f64, ring: f64, n: usize) -> f64 {
    // unknowns at nodes; conductance r/w at midpoints; source 1/(2 pi) at the ring node
    let h = (1.0 - inner) / n as f64;
    let j = ((ring - inner) / h).round() as usize;
    let nodes: Vec<f64> = (0..=n).map(|i| inner + i as f64 * h).collect();
    let m = n - 1;
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for row in 0..m {
        let i = row + 1;
        let rl = 0.5 * (nodes[i - 1] + nodes[i]);
        let rr = 0.5 * (nodes[i] + nodes[i + 1]);
        let cl = rl / w(rl) / h;
        let cr = rr / w(rr) / h;
        b[row] = cl + cr;
        if row > 0 {
            a[row] = -cl;
        }
        if row + 1 < m {
            c[row] = -cr;
        }
        if i == j {
            d[row] = 1.0 / (2.0 * PI);
        }
    }
    let x = thomas(&a, &b, &c, &d);
    x[j - 1]
}
