//! Radial giant-vortex profiles on the annulus `[R_<, 1]`.
//!
//! The functional is discretized with piecewise-linear elements in `r` and
//! lumped mass, so the Neumann conditions at both ends are natural.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{solver_err, Error, Result};
use crate::numerics::solve_tridiagonal;
use crate::params::Regime;
use crate::tf::TFProfile;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;
/// Energy increases below this relative size are treated as roundoff.
pub const ROUNDOFF: f64 = 1e-12;

/// Uniform radial nodes with lumped P1 weights for the measure `2 pi r dr`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    /// Lumped mass: `weights[i] = 2 pi int hat_i(r) r dr`.
    pub weights: Vec<f64>,
    /// Stiffness per interval: `2 pi r_mid / h`.
    pub faces: Vec<f64>,
}

impl RadialGrid {
    pub fn new(inner: f64, n: usize) -> Result<Self> {
        Self::with_outer(inner, 1.0, n)
    }

    pub fn with_outer(inner: f64, outer: f64, n: usize) -> Result<Self> {
        if n < 256 {
            return Err(Error::Domain(format!("radial grid needs at least 256 nodes, got {n}")));
        }
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::Domain(format!("radial grid needs 0 < inner < outer, got [{inner}, {outer}]")));
        }
        let h = (outer - inner) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| if i == n - 1 { outer } else { inner + i as f64 * h }).collect();
        Ok(Self::from_nodes(nodes))
    }

    /// Builds weights and face coefficients for arbitrary increasing nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        let mut faces = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let (a, b) = (nodes[i], nodes[i + 1]);
            let h = b - a;
            weights[i] += TWO_PI * h * (2.0 * a + b) / 6.0;
            weights[i + 1] += TWO_PI * h * (a + 2.0 * b) / 6.0;
            faces[i] = TWO_PI * 0.5 * (a + b) / h;
        }
        RadialGrid { nodes, weights, faces }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn inner(&self) -> f64 {
        self.nodes[0]
    }

    pub fn spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    /// Grid with every interval split in two.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.len() - 1);
        for i in 0..self.len() - 1 {
            nodes.push(self.nodes[i]);
            nodes.push(0.5 * (self.nodes[i] + self.nodes[i + 1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        Self::from_nodes(nodes)
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

/// Tunables of the projected gradient flow.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SolverOptions {
    /// Target for the relative Euler-Lagrange residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step in units of `1/|mu_TF|`.
    pub initial_step: f64,
    pub max_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 5000, initial_step: 1e-2, max_step: 1e8 }
    }
}

/// Converged radial profile for one winding offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GiantVortexState {
    pub regime: Regime,
    pub a: i64,
    /// `[Omega] - a`, the phase winding of the profile.
    pub winding: i64,
    pub grid: RadialGrid,
    pub g: Vec<f64>,
    pub mu_hat: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub omega_opt: bool,
    /// Energies after each accepted step (first and last few kept).
    pub energy_trace: Vec<f64>,
    pub monotone: bool,
}

impl GiantVortexState {
    pub fn g_squared(&self) -> Vec<f64> {
        self.g.iter().map(|v| v * v).collect()
    }

    /// `g(r)` by linear interpolation (clamped to the grid).
    pub fn g_at(&self, r: f64) -> f64 {
        crate::numerics::interp(&self.grid.nodes, &self.g, r)
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.g_squared())
    }
}

/// Discrete giant-vortex functional on a radial grid.
#[derive(Debug, Clone)]
pub struct RadialFunctional<'a> {
    pub grid: &'a RadialGrid,
    pub potential: Vec<f64>,
    pub inv_eps2: f64,
}

impl<'a> RadialFunctional<'a> {
    pub fn new(r: &Regime, winding: i64, grid: &'a RadialGrid) -> Self {
        let k = winding as f64;
        let potential = grid.nodes.iter().map(|x| k * k / (x * x) - 2.0 * r.omega * k).collect();
        RadialFunctional { grid, potential, inv_eps2: 1.0 / (r.epsilon * r.epsilon) }
    }

    pub fn energy(&self, g: &[f64]) -> f64 {
        let mut e = 0.0;
        for (i, c) in self.grid.faces.iter().enumerate() {
            let d = g[i + 1] - g[i];
            e += c * d * d;
        }
        for i in 0..g.len() {
            let g2 = g[i] * g[i];
            e += self.grid.weights[i] * (self.potential[i] * g2 + self.inv_eps2 * g2 * g2);
        }
        e
    }

    /// `K g` where `K` is the stiffness matrix.
    pub fn stiffness_apply(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        let mut out = vec![0.0; n];
        for (i, c) in self.grid.faces.iter().enumerate() {
            let d = c * (g[i] - g[i + 1]);
            out[i] += d;
            out[i + 1] -= d;
        }
        out
    }

    /// Euclidean gradient of the energy.
    pub fn gradient(&self, g: &[f64]) -> Vec<f64> {
        let mut kg = self.stiffness_apply(g);
        for i in 0..g.len() {
            kg[i] = 2.0 * kg[i] + 2.0 * self.grid.weights[i] * (self.potential[i] * g[i] + 2.0 * self.inv_eps2 * g[i].powi(3));
        }
        kg
    }

    /// Chemical potential from the Rayleigh quotient.
    pub fn chemical_potential(&self, g: &[f64]) -> f64 {
        let kg = self.stiffness_apply(g);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..g.len() {
            let w = self.grid.weights[i];
            num += g[i] * kg[i] + w * (self.potential[i] + 2.0 * self.inv_eps2 * g[i] * g[i]) * g[i] * g[i];
            den += w * g[i] * g[i];
        }
        num / den
    }

    /// Pointwise residual `-Lap g + V g + 2 eps^-2 g^3 - mu g` (strong form).
    pub fn residual_field(&self, g: &[f64], mu: f64) -> Vec<f64> {
        let kg = self.stiffness_apply(g);
        (0..g.len())
            .map(|i| kg[i] / self.grid.weights[i] + (self.potential[i] + 2.0 * self.inv_eps2 * g[i] * g[i] - mu) * g[i])
            .collect()
    }

    /// Weighted L2 norm of the residual relative to `max(|mu|, 1)`.
    pub fn residual(&self, g: &[f64], mu: f64) -> f64 {
        let res = self.residual_field(g, mu);
        let n2: f64 = res.iter().zip(&self.grid.weights).map(|(r, w)| w * r * r).sum();
        n2.sqrt() / mu.abs().max(1.0)
    }
}

fn normalize(grid: &RadialGrid, g: &mut [f64]) {
    let m: f64 = g.iter().zip(&grid.weights).map(|(v, w)| w * v * v).sum();
    let s = 1.0 / m.sqrt();
    g.iter_mut().for_each(|v| *v *= s);
}

/// Thomas-Fermi initial guess `sqrt(max(rho_TF, 1e-12))`, normalized.
pub fn initial_guess(tf: &TFProfile, grid: &RadialGrid) -> Vec<f64> {
    let mut g: Vec<f64> = grid.nodes.iter().map(|r| tf.density(*r).max(1e-12).sqrt()).collect();
    normalize(grid, &mut g);
    g
}

/// Minimizes the giant-vortex energy with winding `[Omega] - a`.
pub fn solve_profile(r: &Regime, a: i64, grid: &RadialGrid) -> Result<GiantVortexState> {
    solve_profile_with(r, a, grid, &SolverOptions::default(), None)
}

/// Projected semi-implicit gradient flow with adaptive step.
///
/// Each step solves the flow with the cubic term linearized about `g_n`,
/// `(W + tau (K + W (V + 6 eps^-2 g_n^2 - mu_n))) g = W (g_n + 4 tau eps^-2 g_n^3)`,
/// and renormalizes. Steps that raise the energy or lose positivity are
/// retried with half the step; accepted steps double it.
pub fn solve_profile_with(
    r: &Regime,
    a: i64,
    grid: &RadialGrid,
    opts: &SolverOptions,
    init: Option<&[f64]>,
) -> Result<GiantVortexState> {
    let floor = r.omega_floor();
    if (a - floor).abs() as f64 > 10.0 / r.epsilon + 10.0 {
        return Err(Error::Domain(format!("winding offset a = {a} is far outside the O(1/eps) window")));
    }
    let winding = floor - a;
    let fun = RadialFunctional::new(r, winding, grid);
    let n = grid.len();
    let mut g = match init {
        Some(g0) => g0.to_vec(),
        None => {
            let tf = crate::tf::tf_profile(r)?;
            initial_guess(&tf, grid)
        }
    };
    normalize(grid, &mut g);
    let mut energy = fun.energy(&g);
    let mut mu = fun.chemical_potential(&g);
    let scale = mu.abs().max(1.0);
    let mut tau = opts.initial_step / scale;
    let mut trace = vec![energy];
    let mut history = Vec::new();
    let mut monotone = true;
    let mut residual = fun.residual(&g, mu);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut iter = 0;
    while iter < opts.max_iter {
        if residual < opts.tol {
            break;
        }
        iter += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let rhs: Vec<f64> = (0..n)
                .map(|i| grid.weights[i] * (g[i] + tau * 4.0 * fun.inv_eps2 * g[i].powi(3)))
                .collect();
            for i in 0..n {
                let w = grid.weights[i];
                diag[i] = w + tau * w * (fun.potential[i] + 6.0 * fun.inv_eps2 * g[i] * g[i] - mu);
                lower[i] = 0.0;
                upper[i] = 0.0;
            }
            for (i, c) in grid.faces.iter().enumerate() {
                diag[i] += tau * c;
                diag[i + 1] += tau * c;
                upper[i] = -tau * c;
                lower[i + 1] = -tau * c;
            }
            let mut trial = solve_tridiagonal(&lower, &diag, &upper, &rhs);
            if trial.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                tau *= 0.5;
                continue;
            }
            normalize(grid, &mut trial);
            let e_new = fun.energy(&trial);
            if e_new <= energy + ROUNDOFF * energy.abs() {
                g = trial;
                energy = e_new;
                accepted = true;
                tau = (tau * 2.0).min(opts.max_step / scale);
                break;
            }
            tau *= 0.5;
        }
        mu = fun.chemical_potential(&g);
        residual = fun.residual(&g, mu);
        history.push(residual);
        if let Some(last) = trace.last() {
            monotone = monotone && energy <= last + ROUNDOFF * last.abs();
        }
        if trace.len() < 64 {
            trace.push(energy);
        }
        log::trace!("radial flow a={a} iter={iter} energy={energy:.15e} residual={residual:.3e} tau={tau:.3e}");
        if !accepted {
            return Err(solver_err(format!("step size underflow at iteration {iter}"), &history));
        }
    }
    if residual >= opts.tol {
        return Err(solver_err(format!("no convergence after {} iterations", opts.max_iter), &history));
    }
    if g.iter().any(|v| *v <= 0.0) {
        return Err(solver_err("profile lost positivity", &history));
    }
    trace.push(energy);
    Ok(GiantVortexState {
        regime: *r,
        a,
        winding,
        grid: grid.clone(),
        g,
        mu_hat: mu,
        energy,
        residual,
        iterations: iter,
        omega_opt: false,
        energy_trace: trace,
        monotone,
    })
}

/// `2/(3 sqrt(pi) eps)`, the leading-order optimal winding offset.
pub fn omega_tf(epsilon: f64) -> f64 {
    2.0 / (3.0 * SQRT_PI * epsilon)
}

/// Energies of every scanned winding offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindingScan {
    pub omega: i64,
    pub energies: Vec<(i64, f64)>,
    /// Offsets whose energy lies within `1e-12` relative of the minimum.
    pub ties: Vec<i64>,
    pub u_shaped: bool,
}

/// Scans integers around `omega_TF` until the minimum is interior.
pub fn optimal_winding(r: &Regime, grid: &RadialGrid) -> Result<(i64, GiantVortexState)> {
    let (scan, state) = optimal_winding_scan(r, grid, &SolverOptions::default())?;
    Ok((scan.omega, state))
}

pub fn optimal_winding_scan(r: &Regime, grid: &RadialGrid, opts: &SolverOptions) -> Result<(WindingScan, GiantVortexState)> {
    let center = omega_tf(r.epsilon).round() as i64;
    let mut lo = center - 2;
    let mut hi = center + 2;
    let mut states: Vec<GiantVortexState> = Vec::new();
    for _ in 0..8 {
        let have: Vec<i64> = states.iter().map(|s| s.a).collect();
        let todo: Vec<i64> = (lo..=hi).filter(|a| !have.contains(a)).collect();
        let new: Vec<Result<GiantVortexState>> = todo.par_iter().map(|a| solve_profile_with(r, *a, grid, opts, None)).collect();
        for s in new {
            states.push(s?);
        }
        states.sort_by_key(|s| s.a);
        let best = states
            .iter()
            .min_by(|x, y| x.energy.partial_cmp(&y.energy).unwrap())
            .unwrap()
            .a;
        if best > lo && best < hi {
            let emin = states.iter().map(|s| s.energy).fold(f64::INFINITY, f64::min);
            let otf = omega_tf(r.epsilon);
            let ties: Vec<i64> = states.iter().filter(|s| s.energy - emin <= 1e-12 * emin.abs()).map(|s| s.a).collect();
            let chosen = *ties
                .iter()
                .min_by(|x, y| ((**x as f64) - otf).abs().partial_cmp(&((**y as f64) - otf).abs()).unwrap())
                .unwrap();
            let energies: Vec<(i64, f64)> = states.iter().map(|s| (s.a, s.energy)).collect();
            let u_shaped = count_local_minima(&energies) == 1;
            let mut state = states.into_iter().find(|s| s.a == chosen).unwrap();
            state.omega_opt = true;
            return Ok((WindingScan { omega: chosen, energies, ties, u_shaped }, state));
        }
        if best == lo {
            lo -= 3;
        }
        if best == hi {
            hi += 3;
        }
    }
    Err(Error::Search(format!("energy minimum stayed on the window edge [{lo}, {hi}]")))
}

fn count_local_minima(e: &[(i64, f64)]) -> usize {
    (0..e.len())
        .filter(|&i| {
            let left = i == 0 || e[i - 1].1 > e[i].1;
            let right = i + 1 == e.len() || e[i + 1].1 > e[i].1;
            left && right
        })
        .count()
}

/// `int g^2 (Omega - ([Omega]-omega) r^-2)`.
pub fn compatibility_integral(state: &GiantVortexState, r: &Regime) -> f64 {
    let k = state.winding as f64;
    let f: Vec<f64> = state.grid.nodes.iter().zip(&state.g).map(|(x, g)| g * g * (r.omega - k / (x * x))).collect();
    state.grid.integrate(&f)
}

/// Decay and closeness diagnostics of a computed profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    /// Max over nodes `r < R_h` of `g^2 eps |log eps| / exp(-(1-r^2)/(1-R_h^2))`.
    pub hole_constant: f64,
    pub hole_nodes: usize,
    /// Sup of `|g^2 - rho_TF| / rho_TF` over `r >= R_h + eps^{3/2} |log eps|^2`.
    pub bulk_relative_error: f64,
    /// Max of `|g^2 - rho_TF| / (eps^2 |log eps|^2 (r^2-R_h^2)^{-3/2} rho_TF)` on the same set.
    pub pointwise_constant: f64,
    /// `g^2(1) / rho_TF(1)`.
    pub wall_ratio: f64,
}

pub fn decay_diagnostics(state: &GiantVortexState, tf: &TFProfile) -> DecayReport {
    let r = &state.regime;
    let l = r.log_eps;
    let rh2 = tf.r_h * tf.r_h;
    let cut = tf.r_h + r.epsilon.powf(1.5) * l * l;
    let mut hole_constant: f64 = 0.0;
    let mut hole_nodes = 0;
    let mut rel: f64 = 0.0;
    let mut pc: f64 = 0.0;
    for (x, g) in state.grid.nodes.iter().zip(&state.g) {
        let g2 = g * g;
        if *x < tf.r_h {
            hole_nodes += 1;
            let shape = (-(1.0 - x * x) / (1.0 - rh2)).exp() / (r.epsilon * l);
            hole_constant = hole_constant.max(g2 / shape);
        } else if *x >= cut {
            let rho = tf.density(*x);
            let e = (g2 - rho).abs() / rho;
            rel = rel.max(e);
            let shape = r.epsilon * r.epsilon * l * l * (x * x - rh2).powf(-1.5);
            pc = pc.max(e / shape);
        }
    }
    let wall = state.g.last().unwrap().powi(2) / tf.density(1.0);
    DecayReport { hole_constant, hole_nodes, bulk_relative_error: rel, pointwise_constant: pc, wall_ratio: wall }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::regime_from_omega1;
    use crate::tf::{annulus_geometry, tf_profile};

    fn setup(eps: f64, om1: f64, n: usize) -> (Regime, RadialGrid) {
        let r = regime_from_omega1(eps, om1).unwrap();
        let tf = tf_profile(&r).unwrap();
        let geo = annulus_geometry(&r, &tf).unwrap();
        (r, RadialGrid::new(geo.r_less, n).unwrap())
    }

    #[test]
    fn grid_weights_sum_to_area() {
        let g = RadialGrid::new(0.4, 300).unwrap();
        let area = std::f64::consts::PI * (1.0 - 0.16);
        assert!((g.weights.iter().sum::<f64>() - area).abs() < 1e-10 * area);
        assert!(g.weights.iter().all(|w| *w > 0.0));
        assert!(RadialGrid::new(0.4, 100).is_err());
    }

    #[test]
    fn profile_at_rounded_omega_tf() {
        let (r, grid) = setup(0.05, 0.0, 400);
        let a = omega_tf(0.05).round() as i64;
        assert_eq!(a, 8);
        let s = solve_profile(&r, a, &grid).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-8);
        assert!(s.g.iter().all(|v| *v > 0.0));
        assert!(s.residual < 1e-8);
        assert!(s.monotone);
        assert!(s.energy_trace.windows(2).all(|w| w[1] <= w[0] + ROUNDOFF * w[0].abs()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (r, grid) = setup(0.05, 0.0, 300);
        let s = solve_profile(&r, 7, &grid).unwrap();
        let fun = RadialFunctional::new(&r, s.winding, &grid);
        let grad = fun.gradient(&s.g);
        let mut seed = 12345u64;
        for _ in 0..5 {
            let dir: Vec<f64> = (0..grid.len())
                .map(|_| {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect();
            let h = 1e-5;
            let plus: Vec<f64> = s.g.iter().zip(&dir).map(|(g, d)| g + h * d).collect();
            let minus: Vec<f64> = s.g.iter().zip(&dir).map(|(g, d)| g - h * d).collect();
            let fd = (fun.energy(&plus) - fun.energy(&minus)) / (2.0 * h);
            let an: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd={fd} an={an}");
        }
    }

    #[test]
    fn rescaling_the_initial_guess_is_idempotent() {
        let (r, grid) = setup(0.05, 0.0, 300);
        let s = solve_profile(&r, 7, &grid).unwrap();
        let scaled: Vec<f64> = s.g.iter().map(|v| 3.7 * v).collect();
        let s2 = solve_profile_with(&r, 7, &grid, &SolverOptions::default(), Some(&scaled)).unwrap();
        for (a, b) in s.g.iter().zip(&s2.g) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn scan_at_eps_005_is_u_shaped() {
        let (r, grid) = setup(0.05, 0.0, 300);
        let (scan, state) = optimal_winding_scan(&r, &grid, &SolverOptions::default()).unwrap();
        assert!((6..=10).contains(&scan.omega));
        assert!(scan.u_shaped);
        assert!(state.omega_opt);
        let e = |a: i64| scan.energies.iter().find(|x| x.0 == a).unwrap().1;
        assert!(e(scan.omega) <= e(scan.omega - 1) && e(scan.omega) <= e(scan.omega + 1));
    }

    #[test]
    fn compatibility_without_winding_is_omega() {
        let (r, grid) = setup(0.05, 0.0, 300);
        let s = solve_profile(&r, r.omega_floor(), &grid).unwrap();
        assert_eq!(s.winding, 0);
        assert!((compatibility_integral(&s, &r) - r.omega).abs() < 1e-8 * r.omega);
        let (_, opt) = optimal_winding(&r, &grid).unwrap();
        assert!(compatibility_integral(&opt, &r).abs() <= 10.0);
    }

    #[test]
    fn decay_report_is_finite() {
        let (r, grid) = setup(0.05, 0.0, 300);
        let tf = tf_profile(&r).unwrap();
        let (_, s) = optimal_winding(&r, &grid).unwrap();
        let d = decay_diagnostics(&s, &tf);
        assert!(d.hole_nodes > 0 && d.hole_constant.is_finite());
        assert!(d.wall_ratio > 0.5 && d.wall_ratio < 1.5);
    }
}
