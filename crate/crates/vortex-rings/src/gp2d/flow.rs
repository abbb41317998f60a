use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::DiscGrid;
use crate::error::{solver_err, Error, Result};
use crate::giant_vortex::{GiantVortexState, ROUNDOFF};
use crate::numerics::solve_spd_tridiagonal_complex;
use crate::params::Regime;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Components of the discrete GP energy.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
pub struct GpEnergy {
    pub radial_kinetic: f64,
    pub angular_kinetic: f64,
    /// `-2 Omega int (i psi, d_theta psi)`.
    pub rotation: f64,
    pub interaction: f64,
    pub total: f64,
    pub mass: f64,
}

/// Discrete functional `int |grad psi|^2 - 2 Omega (i psi, d_theta psi) + eps^-2 |psi|^4`.
#[derive(Debug, Clone)]
pub struct GpFunctional<'a> {
    pub grid: &'a DiscGrid,
    pub omega: f64,
    pub inv_eps2: f64,
}

impl<'a> GpFunctional<'a> {
    pub fn new(r: &Regime, grid: &'a DiscGrid) -> Self {
        GpFunctional { grid, omega: r.omega, inv_eps2: 1.0 / (r.epsilon * r.epsilon) }
    }

    /// Same functional with an explicit rotation speed.
    pub fn with_omega(epsilon: f64, omega: f64, grid: &'a DiscGrid) -> Self {
        GpFunctional { grid, omega, inv_eps2: 1.0 / (epsilon * epsilon) }
    }

    fn centrifugal(&self, i: usize, m: i64) -> f64 {
        let r = self.grid.r(i);
        if r == 0.0 {
            return 0.0;
        }
        let m = m as f64;
        m * m / (r * r)
    }

    fn rotation_potential(&self, m: i64) -> f64 {
        -2.0 * self.omega * m as f64
    }

    pub fn energy(&self, psi: &[Complex64]) -> GpEnergy {
        let g = self.grid;
        let n = g.n_theta;
        let modes = g.to_modes(psi);
        let mut e = GpEnergy::default();
        let w = &g.radial.weights;
        let rows: Vec<(f64, f64, f64, f64, f64)> = (0..g.n_r())
            .into_par_iter()
            .map(|i| {
                let mut rad = 0.0;
                if i + 1 < g.n_r() {
                    let c = g.radial.faces[i];
                    rad = c * (0..n).map(|k| (modes[g.index(i + 1, k)] - modes[g.index(i, k)]).norm_sqr()).sum::<f64>();
                }
                let (mut ang, mut rot) = (0.0, 0.0);
                for k in 0..n {
                    let a = modes[g.index(i, k)].norm_sqr();
                    let m = g.mode(k);
                    ang += self.centrifugal(i, m) * a;
                    rot += self.rotation_potential(m) * a;
                }
                let row = &psi[g.index(i, 0)..g.index(i, 0) + n];
                let (q, m2) = row.iter().fold((0.0, 0.0), |(q, m2), v| {
                    let a = v.norm_sqr();
                    (q + a * a, m2 + a)
                });
                (rad, w[i] * ang, w[i] * rot, w[i] * q / n as f64, w[i] * m2 / n as f64)
            })
            .collect();
        for (rad, ang, rot, q, m) in rows {
            e.radial_kinetic += rad;
            e.angular_kinetic += ang;
            e.rotation += rot;
            e.interaction += self.inv_eps2 * q;
            e.mass += m;
        }
        e.total = e.radial_kinetic + e.angular_kinetic + e.rotation + e.interaction;
        e
    }

    pub fn mass(&self, psi: &[Complex64]) -> f64 {
        let g = self.grid;
        (0..g.n_r())
            .map(|i| g.node_area(i) * psi[g.index(i, 0)..g.index(i, 0) + g.n_theta].iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Strong-form linear part `W^-1 K psi + (m^2/r^2 - 2 Omega m) psi`.
    pub fn apply_linear(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid;
        let n = g.n_theta;
        let nr = g.n_r();
        let modes = g.to_modes(psi);
        let mut out = vec![ZERO; modes.len()];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let w = g.radial.weights[i];
            for (k, v) in row.iter_mut().enumerate() {
                let m = g.mode(k);
                let here = modes[g.index(i, k)];
                let mut acc = Complex64::new(0.0, 0.0);
                if i > 0 {
                    acc += (here - modes[g.index(i - 1, k)]) * g.radial.faces[i - 1];
                }
                if i + 1 < nr {
                    acc += (here - modes[g.index(i + 1, k)]) * g.radial.faces[i];
                }
                *v = acc / w + here * (self.centrifugal(i, m) + self.rotation_potential(m));
            }
        });
        if g.r(0) == 0.0 {
            out[1..n].iter_mut().for_each(|v| *v = ZERO);
        }
        g.from_modes(&out)
    }

    /// Strong-form gradient `L psi + 2 eps^-2 |psi|^2 psi`.
    pub fn gradient(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.apply_linear(psi);
        out.par_iter_mut().zip(psi).for_each(|(o, p)| *o += p * (2.0 * self.inv_eps2 * p.norm_sqr()));
        out
    }

    /// Weighted inner product `Re sum W/n conj(a) b`.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        let g = self.grid;
        (0..g.n_r())
            .map(|i| {
                let s = g.index(i, 0);
                g.node_area(i) * a[s..s + g.n_theta].iter().zip(&b[s..s + g.n_theta]).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
            })
            .sum()
    }

    /// `d/ds E(psi + s eta)` at `s = 0`.
    pub fn directional_derivative(&self, psi: &[Complex64], eta: &[Complex64]) -> f64 {
        2.0 * self.inner(&self.gradient(psi), eta)
    }

    pub fn chemical_potential(&self, psi: &[Complex64]) -> f64 {
        self.inner(psi, &self.gradient(psi)) / self.inner(psi, psi)
    }

    /// `||grad - mu psi||_W / max(|mu|, 1)`.
    pub fn residual(&self, psi: &[Complex64], mu: f64) -> f64 {
        let mut r = self.gradient(psi);
        r.iter_mut().zip(psi).for_each(|(a, p)| *a -= p * mu);
        self.inner(&r, &r).sqrt() / mu.abs().max(1.0)
    }
}

/// Tunables of the 2D projected flow.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GpOptions {
    pub max_iter: usize,
    /// Relative energy decrease per accepted step below which the flow may stop.
    pub tol_energy: f64,
    pub tol_residual: f64,
    /// Initial step in units of `1/max(|mu|, 1)`.
    pub initial_step: f64,
    pub max_step: f64,
    pub residual_every: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions { max_iter: 4000, tol_energy: 1e-11, tol_residual: 1e-4, initial_step: 1e-2, max_step: 1e4, residual_every: 25 }
    }
}

/// Converged (or final) wavefunction with flow metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveFunction {
    pub psi: Vec<Complex64>,
    pub mass: f64,
    pub energy: GpEnergy,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    /// No accepted step raised the energy by more than roundoff.
    pub monotone: bool,
}

/// Starting fields.
#[derive(Debug, Clone)]
pub enum Preset {
    /// `g e^{i k theta}` times `e^{i a eta}` with `eta` uniform in `[-1, 1]` per node.
    GiantVortex { noise: f64, seed: u64 },
    /// `g` times a uniformly random phase per node.
    RandomPhase { seed: u64 },
}

/// Builds a starting field from the giant-vortex profile; zero in the hole.
pub fn seed_field(preset: &Preset, state: &GiantVortexState, grid: &DiscGrid) -> Result<Vec<Complex64>> {
    check_alignment(state, grid)?;
    let mut psi = vec![ZERO; grid.len()];
    let a0 = grid.annulus_start;
    let k = state.winding as f64;
    let (amp, seed, random_phase) = match preset {
        Preset::GiantVortex { noise, seed } => (*noise, *seed, false),
        Preset::RandomPhase { seed } => (std::f64::consts::PI, *seed, true),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (ia, gv) in state.g.iter().enumerate() {
        let i = a0 + ia;
        for j in 0..grid.n_theta {
            let eta: f64 = rng.gen_range(-1.0..1.0);
            let base = if random_phase { 0.0 } else { k * grid.theta(j) };
            psi[grid.index(i, j)] = Complex64::from_polar(*gv, base + amp * eta);
        }
    }
    normalize(grid, &mut psi);
    Ok(psi)
}

/// The annulus rows of `grid` must carry the nodes of `state`.
pub fn check_alignment(state: &GiantVortexState, grid: &DiscGrid) -> Result<()> {
    let nodes = &grid.radial.nodes[grid.annulus_start..];
    if nodes.len() != state.grid.len() || nodes.iter().zip(&state.grid.nodes).any(|(a, b)| (a - b).abs() > 1e-13) {
        return Err(Error::Domain("disc grid annulus rows do not match the radial profile grid".into()));
    }
    Ok(())
}

pub fn normalize(grid: &DiscGrid, psi: &mut [Complex64]) -> f64 {
    let m: f64 = (0..grid.n_r()).map(|i| grid.node_area(i) * psi[grid.index(i, 0)..grid.index(i, 0) + grid.n_theta].iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
    let s = 1.0 / m.sqrt();
    psi.par_iter_mut().for_each(|v| *v *= s);
    m
}

/// Enforces a single value on the pole row.
fn close_pole(grid: &DiscGrid, psi: &mut [Complex64]) {
    if grid.r(0) == 0.0 {
        let n = grid.n_theta;
        let mean = psi[..n].iter().sum::<Complex64>() / n as f64;
        psi[..n].iter_mut().for_each(|v| *v = mean);
    }
}

impl<'a> GpFunctional<'a> {
    /// One stabilized semi-implicit step: implicit in the linear part and
    /// `beta(r) - mu`, explicit in the remaining nonlinearity. `None` if a
    /// per-mode system is not positive definite.
    fn step(&self, psi: &[Complex64], tau: f64, mu: f64) -> Option<Vec<Complex64>> {
        let g = self.grid;
        let n = g.n_theta;
        let nr = g.n_r();
        // the shift also covers `min_m (m^2/r^2 - 2 Omega m) = -Omega^2 r^2`, so every mode system is SPD
        let beta: Vec<f64> = (0..nr)
            .map(|i| {
                let peak = psi[g.index(i, 0)..g.index(i, 0) + n].iter().fold(0.0f64, |m, v| m.max(v.norm_sqr()));
                let r = g.r(i);
                (2.0 * self.inv_eps2 * peak).max(mu + self.omega * self.omega * r * r)
            })
            .collect();
        let explicit: Vec<Complex64> = psi
            .par_iter()
            .enumerate()
            .map(|(idx, p)| p + p * (tau * (beta[idx / n] - 2.0 * self.inv_eps2 * p.norm_sqr())))
            .collect();
        let modes = g.to_modes(&explicit);
        // mode-major copy for the radial solves
        let mut cols = vec![ZERO; modes.len()];
        cols.par_chunks_mut(nr).enumerate().for_each(|(k, col)| {
            for i in 0..nr {
                col[i] = modes[g.index(i, k)];
            }
        });
        let pole = g.r(0) == 0.0;
        let ok = cols
            .par_chunks_mut(nr)
            .enumerate()
            .map(|(k, col)| {
                let m = g.mode(k);
                let first = if pole && m != 0 { 1 } else { 0 };
                let len = nr - first;
                let mut lower = vec![0.0; len];
                let mut diag = vec![0.0; len];
                let mut upper = vec![0.0; len];
                let mut scratch = vec![0.0; len];
                for (row, i) in (first..nr).enumerate() {
                    let w = g.radial.weights[i];
                    let v = self.centrifugal(i, m) + self.rotation_potential(m);
                    let mut d = w * (1.0 + tau * (v + beta[i] - mu));
                    if i > 0 {
                        d += tau * g.radial.faces[i - 1];
                        lower[row] = -tau * g.radial.faces[i - 1];
                    }
                    if i + 1 < nr {
                        d += tau * g.radial.faces[i];
                        upper[row] = -tau * g.radial.faces[i];
                    }
                    diag[row] = d;
                    col[i] *= w;
                }
                if first == 1 {
                    lower[0] = 0.0;
                    col[0] = ZERO;
                }
                solve_spd_tridiagonal_complex(&lower, &diag, &upper, &mut col[first..], &mut scratch)
            })
            .reduce(|| true, |a, b| a && b);
        if !ok {
            return None;
        }
        let mut next = vec![ZERO; modes.len()];
        next.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                row[k] = cols[k * nr + i];
            }
        });
        let mut out = g.from_modes(&next);
        close_pole(g, &mut out);
        normalize(g, &mut out);
        Some(out)
    }
}

/// Projected gradient flow from `init` until the energy stalls and the EL residual is small.
pub fn minimize_gp(r: &Regime, grid: &DiscGrid, init: Vec<Complex64>, opts: &GpOptions) -> Result<WaveFunction> {
    let (w, converged, history) = run_flow(&GpFunctional::new(r, grid), init, opts)?;
    if !converged {
        return Err(solver_err(
            format!("2D flow did not converge in {} iterations (energy {:.12e}, residual {:.3e})", opts.max_iter, w.energy.total, w.residual),
            &history,
        ));
    }
    Ok(w)
}

/// As `minimize_gp`, but returns the last iterate with `false` when the iteration cap is hit.
pub fn minimize_gp_capped(r: &Regime, grid: &DiscGrid, init: Vec<Complex64>, opts: &GpOptions) -> Result<(WaveFunction, bool)> {
    let (w, converged, _) = run_flow(&GpFunctional::new(r, grid), init, opts)?;
    Ok((w, converged))
}

fn run_flow(f: &GpFunctional, init: Vec<Complex64>, opts: &GpOptions) -> Result<(WaveFunction, bool, Vec<f64>)> {
    let grid = f.grid;
    if init.len() != grid.len() {
        return Err(Error::Domain(format!("initial field has {} values, grid has {}", init.len(), grid.len())));
    }
    let mut psi = init;
    close_pole(grid, &mut psi);
    normalize(grid, &mut psi);
    let mut e = f.energy(&psi).total;
    let mut mu = f.chemical_potential(&psi);
    let scale = mu.abs().max(1.0);
    let mut tau = opts.initial_step / scale;
    let tau_max = opts.max_step / scale;
    let tau_min = 1e-14 / scale;
    let mut trace = vec![e];
    let mut residuals = vec![];
    let mut monotone = true;
    let mut since_check = 0;
    let mut res = f64::INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let cand = match f.step(&psi, tau, mu) {
            Some(c) if c.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => c,
            Some(_) => return Err(Error::Stability(format!("non-finite field at iteration {it}; try a smaller initial step"))),
            None => {
                tau *= 0.5;
                if tau < tau_min {
                    return Err(Error::Stability(format!("step collapsed below {tau_min:.3e} at iteration {it}")));
                }
                continue;
            }
        };
        let e_new = f.energy(&cand).total;
        if !e_new.is_finite() {
            return Err(Error::Stability(format!("non-finite energy at iteration {it}; try a smaller initial step")));
        }
        if e_new > e + ROUNDOFF * e.abs() {
            tau *= 0.5;
            if tau < tau_min {
                return Err(Error::Stability(format!("step collapsed below {tau_min:.3e} at iteration {it}")));
            }
            continue;
        }
        monotone = monotone && e_new <= e + ROUNDOFF * e.abs();
        let decrease = (e - e_new) / e_new.abs().max(1.0);
        psi = cand;
        e = e_new;
        trace.push(e);
        mu = f.chemical_potential(&psi);
        tau = (2.0 * tau).min(tau_max);
        since_check += 1;
        if decrease < opts.tol_energy || since_check >= opts.residual_every {
            since_check = 0;
            res = f.residual(&psi, mu);
            residuals.push(res);
            if decrease < opts.tol_energy && res < opts.tol_residual {
                return Ok((finish(f, psi, mu, res, it, trace, monotone), true, residuals));
            }
        }
    }
    if !res.is_finite() {
        res = f.residual(&psi, mu);
    }
    Ok((finish(f, psi, mu, res, it, trace, monotone), false, residuals))
}

fn finish(f: &GpFunctional, psi: Vec<Complex64>, mu: f64, res: f64, it: usize, trace: Vec<f64>, monotone: bool) -> WaveFunction {
    let energy = f.energy(&psi);
    WaveFunction { mass: energy.mass, energy, mu, residual: res, iterations: it, energy_trace: trace, monotone, psi }
}
