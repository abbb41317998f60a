//! Vortex-ring trial states: even placement on the circle `C_{R_*}`, regularized
//! vorticity, a quantized phase from a weighted Poisson problem, and assembly.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::electro::WeightField;
use crate::error::{Error, Result};
use crate::giant_vortex::GiantVortexState;
use crate::gp2d::{check_alignment, decoupling_check, reduced_energy, wrap, DecouplingReport, DiscGrid, GpEnergy, GpFunctional, ReducedField};
use crate::numerics::solve_tridiagonal_complex;
use crate::params::Regime;
use crate::tf::{AnnulusGeometry, TFProfile};

const TWO_PI: f64 = 2.0 * PI;
/// Subsamples per direction when measuring core coverage of a control volume.
const SUBSAMPLES: usize = 12;
/// Cells required across a core radius.
const MIN_CORE_CELLS: f64 = 3.0;

/// `t = eps^{3/2} |log eps|^{1/2}`.
pub fn core_radius(r: &Regime) -> f64 {
    r.epsilon.powf(1.5) * r.log_eps.sqrt()
}

/// `N` identical angular sectors starting at `theta = 0`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellDecomposition {
    pub n_cells: usize,
    pub angles: Vec<f64>,
}

impl CellDecomposition {
    pub fn new(n_cells: usize) -> Self {
        CellDecomposition { n_cells, angles: (0..n_cells).map(|i| i as f64 * TWO_PI / n_cells as f64).collect() }
    }

    /// `round(2 pi / (eps |log eps|))`.
    pub fn nominal(r: &Regime) -> usize {
        ((TWO_PI / (r.epsilon * r.log_eps)).round() as usize).max(1)
    }

    pub fn width(&self) -> f64 {
        TWO_PI / self.n_cells as f64
    }

    pub fn cell_of(&self, theta: f64) -> usize {
        ((theta.rem_euclid(TWO_PI) / self.width()).floor() as usize).min(self.n_cells - 1)
    }
}

/// `N M` points on the circle of radius `R_*`, `M` per cell, reflection symmetric in each cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VortexConfiguration {
    pub cells: CellDecomposition,
    pub per_cell: usize,
    pub r_star: f64,
    pub core: f64,
    /// Angles of the vortex centers, cell by cell.
    pub angles: Vec<f64>,
}

impl VortexConfiguration {
    pub fn count(&self) -> usize {
        self.angles.len()
    }

    pub fn xy(&self, k: usize) -> (f64, f64) {
        let t = self.angles[k];
        (self.r_star * t.cos(), self.r_star * t.sin())
    }

    /// Distance between neighbors, `2 R_* sin(pi / NM)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.r_star * (PI / self.count() as f64).sin()
    }

    /// `t N M / (2 pi R_*)`.
    pub fn core_fraction(&self) -> f64 {
        self.core * self.count() as f64 / (TWO_PI * self.r_star)
    }
}

/// Places `n_cells * per_cell` vortices at `theta_{ij} = i 2pi/N + (j + 1/2) 2pi/(NM)` on `C_{R_*}`.
pub fn build_configuration(r: &Regime, r_star: f64, n_cells: usize, per_cell: usize, inner: f64) -> Result<VortexConfiguration> {
    if n_cells == 0 || per_cell == 0 {
        return Err(Error::Configuration(format!("need at least one vortex, got {n_cells} cells x {per_cell}")));
    }
    let t = core_radius(r);
    let nm = n_cells * per_cell;
    let slot = TWO_PI * r_star / nm as f64;
    if t >= slot.min(1.0 - inner) / 4.0 {
        return Err(Error::Configuration(format!("core radius {t:.4e} does not fit: slot {slot:.4e}, annulus width {:.4e}", 1.0 - inner)));
    }
    if r_star - 2.0 * t <= inner || r_star + 2.0 * t >= 1.0 {
        return Err(Error::Configuration(format!("cores around R_* = {r_star:.4} leave the annulus [{inner:.4}, 1]")));
    }
    let cells = CellDecomposition::new(n_cells);
    let angles = (0..n_cells)
        .flat_map(|i| (0..per_cell).map(move |j| i as f64 * TWO_PI / n_cells as f64 + (j as f64 + 0.5) * TWO_PI / nm as f64))
        .collect();
    Ok(VortexConfiguration { cells, per_cell, r_star, core: t, angles })
}

/// Radial extent of the control volume of annulus row `a`.
fn row_extent(nodes: &[f64], a: usize) -> (f64, f64) {
    let lo = if a == 0 { nodes[0] } else { 0.5 * (nodes[a - 1] + nodes[a]) };
    let hi = if a + 1 == nodes.len() { nodes[a] } else { 0.5 * (nodes[a] + nodes[a + 1]) };
    (lo, hi)
}

/// Area of `{r_lo < r < r_hi, |theta - th| < dth/2} ∩ B(p, t)` by midpoint subsampling.
fn coverage(r_lo: f64, r_hi: f64, th: f64, dth: f64, p: (f64, f64), t: f64) -> f64 {
    let s = SUBSAMPLES as f64;
    let (dr, dt) = ((r_hi - r_lo) / s, dth / s);
    let mut area = 0.0;
    for a in 0..SUBSAMPLES {
        let r = r_lo + (a as f64 + 0.5) * dr;
        for b in 0..SUBSAMPLES {
            let q = th - 0.5 * dth + (b as f64 + 0.5) * dt;
            if (r * q.cos() - p.0).hypot(r * q.sin() - p.1) < t {
                area += r * dr * dt;
            }
        }
    }
    area
}

/// `f = sum (2/t^2) 1_{B(p, t)}` integrated over control volumes of the annulus rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularizedVorticity {
    /// Loads per annulus node, row-major (`n_rows x n_theta`), each core rescaled to mass `2 pi`.
    pub loads: Vec<f64>,
    pub n_rows: usize,
    pub n_theta: usize,
    /// Discrete mass of each core before rescaling.
    pub raw_masses: Vec<f64>,
    /// Loaded nodes of each core.
    pub core_nodes: Vec<Vec<(usize, usize)>>,
}

impl RegularizedVorticity {
    pub fn total(&self) -> f64 {
        self.loads.iter().sum()
    }

    pub fn raw_total(&self) -> f64 {
        self.raw_masses.iter().sum()
    }

    pub fn empty(grid: &DiscGrid) -> Self {
        let n_rows = grid.n_r() - grid.annulus_start;
        RegularizedVorticity { loads: vec![0.0; n_rows * grid.n_theta], n_rows, n_theta: grid.n_theta, raw_masses: vec![], core_nodes: vec![] }
    }

    /// Largest mismatch under the reflection `theta -> 2 theta_c - theta` of every cell.
    pub fn reflection_defect(&self, cells: &CellDecomposition) -> Option<f64> {
        let n = self.n_theta;
        if n % (2 * cells.n_cells) != 0 {
            return None;
        }
        let per = n / cells.n_cells;
        let scale = self.loads.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for c in 0..cells.n_cells {
            let center = c * per + per / 2;
            for a in 0..self.n_rows {
                for j in 0..n {
                    let mirror = (2 * center + n - j % n) % n;
                    let d = self.loads[a * n + j] - self.loads[a * n + mirror];
                    worst = worst.max(d.abs());
                }
            }
        }
        Some(worst / scale)
    }
}

pub fn regularized_vorticity(cfg: &VortexConfiguration, grid: &DiscGrid) -> Result<RegularizedVorticity> {
    let t = cfg.core;
    let cells = grid.cells_across(t, cfg.r_star);
    if cells < MIN_CORE_CELLS {
        return Err(Error::Resolution(format!("core radius {t:.4e} spans {cells:.2} cells, need {MIN_CORE_CELLS}")));
    }
    let nodes = &grid.radial.nodes[grid.annulus_start..];
    let n = grid.n_theta;
    let dth = grid.dtheta();
    let mut out = RegularizedVorticity::empty(grid);
    let reach = (t / (cfg.r_star - t)).asin() + dth;
    for k in 0..cfg.count() {
        let p = cfg.xy(k);
        let center = cfg.angles[k];
        let mut touched = vec![];
        let mut raw = 0.0;
        for a in 0..nodes.len() {
            let (lo, hi) = row_extent(nodes, a);
            if hi < cfg.r_star - t || lo > cfg.r_star + t {
                continue;
            }
            let j_lo = ((center - reach) / dth).floor() as i64;
            let j_hi = ((center + reach) / dth).ceil() as i64;
            for jj in j_lo..=j_hi {
                let j = jj.rem_euclid(n as i64) as usize;
                let area = coverage(lo, hi, jj as f64 * dth, dth, p, t);
                if area > 0.0 {
                    let load = 2.0 / (t * t) * area;
                    raw += load;
                    touched.push((a, j, load));
                }
            }
        }
        let scale = TWO_PI / raw;
        for &(a, j, load) in &touched {
            out.loads[a * n + j] += load * scale;
        }
        out.raw_masses.push(raw);
        out.core_nodes.push(touched.iter().map(|&(a, j, _)| (a, j)).collect());
    }
    Ok(out)
}

/// `rho = rho_TF` above `R_bar = R_h + eps^{5/6}`, `g^2` below.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModifiedDensity {
    pub r_bar: f64,
    /// Samples at the annulus nodes.
    pub weight: WeightField,
    /// `sup_A |g^2 - rho| / rho`.
    pub relative_deviation: f64,
    /// `relative_deviation / (eps^{3/4} |log eps|^2)`.
    pub fitted_constant: f64,
}

impl ModifiedDensity {
    pub fn eval(&self, r: f64) -> f64 {
        self.weight.eval(r)
    }
}

pub fn modified_density(r: &Regime, state: &GiantVortexState, tf: &TFProfile, geo: &AnnulusGeometry) -> Result<ModifiedDensity> {
    let r_bar = geo.r_bar(r);
    let nodes = state.grid.nodes.clone();
    let rho: Vec<f64> = nodes.iter().zip(&state.g).map(|(x, g)| if *x >= r_bar { tf.density(*x) } else { g * g }).collect();
    if let Some(k) = rho.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("modified density vanishes at r = {:.6}", nodes[k])));
    }
    let relative_deviation = rho.iter().zip(&state.g).map(|(p, g)| (g * g - p).abs() / p).fold(0.0, f64::max);
    let fitted_constant = relative_deviation / (r.epsilon.powf(0.75) * r.log_eps * r.log_eps);
    Ok(ModifiedDensity { r_bar, weight: WeightField::from_samples(nodes, rho)?, relative_deviation, fitted_constant })
}

/// Finite-volume couplings of `-div(rho^-1 grad h)` on the annulus rows.
#[derive(Debug, Clone)]
struct Couplings {
    /// Radial face between rows `a` and `a + 1`: `dtheta / int rho/s ds`.
    radial: Vec<f64>,
    /// Angular face at row `a`: `dr_a / (r_a dtheta rho(r_a))`; zero on the boundary rows.
    angular: Vec<f64>,
    /// Cumulative `int_{R_<}^{r_a} rho/s ds`.
    q: Vec<f64>,
}

fn couplings(rho: &ModifiedDensity, nodes: &[f64], dth: f64) -> Couplings {
    let na = nodes.len();
    let mut q = vec![0.0; na];
    let mut radial = vec![0.0; na - 1];
    for a in 0..na - 1 {
        let s = rho.weight.log_integral(nodes[a], nodes[a + 1]);
        q[a + 1] = q[a] + s;
        radial[a] = dth / s;
    }
    let angular = (0..na)
        .map(|a| {
            if a == 0 || a + 1 == na {
                0.0
            } else {
                0.5 * (nodes[a + 1] - nodes[a - 1]) / (nodes[a] * dth * rho.eval(nodes[a]))
            }
        })
        .collect();
    Couplings { radial, angular, q }
}

/// Solves one angular mode with zero Dirichlet data on the first and last rows.
fn solve_mode(c: &Couplings, lambda: f64, rhs: &mut [Complex64]) {
    let na = rhs.len();
    let m = na - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for k in 0..m {
        let a = k + 1;
        diag[k] = c.radial[a - 1] + c.radial[a] + c.angular[a] * lambda;
        if k > 0 {
            lower[k] = -c.radial[a - 1];
        }
        if k + 1 < m {
            upper[k] = -c.radial[a];
        }
    }
    let mut scratch = vec![0.0; m];
    solve_tridiagonal_complex(&lower, &diag, &upper, &mut rhs[1..na - 1], &mut scratch);
    rhs[0] = Complex64::new(0.0, 0.0);
    rhs[na - 1] = Complex64::new(0.0, 0.0);
}

/// Discrete potential, circulation bookkeeping, and the phase on the dual mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseField {
    pub n_rows: usize,
    pub n_theta: usize,
    /// Solution with zero data on both boundaries.
    pub h_bar: Vec<f64>,
    /// `h_bar - kappa Gamma / int rho^-1 |grad Gamma|^2`.
    pub h: Vec<f64>,
    /// `int_{r=1} rho^-1 dh_bar/dn`.
    pub boundary_flux: f64,
    pub kappa: f64,
    /// `int rho^-1 |grad Gamma|^2 = 2 pi / int rho/s ds`.
    pub gamma_energy: f64,
    /// Counterclockwise circulation of the phase next to `r = 1` and next to `R_<`.
    pub outer_circulation: f64,
    pub inner_circulation: f64,
    /// `int rho^-1 |grad h|^2` as the discrete Dirichlet form.
    pub dirichlet_energy: f64,
    /// Unit phase factor per annulus node.
    pub phase: Vec<Complex64>,
    /// Largest mismatch on closed dual loops away from the cores, in radians.
    pub max_loop_defect: f64,
}

impl PhaseField {
    pub fn outer_winding(&self) -> i64 {
        (self.outer_circulation / TWO_PI).round() as i64
    }

    pub fn inner_winding(&self) -> i64 {
        (self.inner_circulation / TWO_PI).round() as i64
    }
}

fn solve_potential(loads: &[f64], c: &Couplings, grid: &DiscGrid, na: usize) -> Vec<f64> {
    let n = grid.n_theta;
    let a0 = grid.annulus_start;
    let mut full = vec![Complex64::new(0.0, 0.0); grid.len()];
    for a in 0..na {
        for j in 0..n {
            full[grid.index(a0 + a, j)] = Complex64::new(loads[a * n + j], 0.0);
        }
    }
    let modes = grid.to_modes(&full);
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|k| (0..na).map(|a| modes[grid.index(a0 + a, k)]).collect()).collect();
    cols.par_iter_mut().enumerate().for_each(|(k, col)| {
        let lambda = 2.0 - 2.0 * (TWO_PI * k as f64 / n as f64).cos();
        solve_mode(c, lambda, col);
    });
    let mut back = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (k, col) in cols.iter().enumerate() {
        for a in 0..na {
            back[grid.index(a0 + a, k)] = col[a];
        }
    }
    let h = grid.from_modes(&back);
    (0..na).flat_map(|a| (0..n).map(move |j| (a, j))).map(|(a, j)| h[grid.index(a0 + a, j)].re).collect()
}

fn dirichlet_form(h: &[f64], c: &Couplings, na: usize, n: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..na {
        for j in 0..n {
            let v = h[a * n + j];
            if a + 1 < na {
                e += c.radial[a] * (v - h[(a + 1) * n + j]).powi(2);
            }
            e += c.angular[a] * (v - h[a * n + (j + 1) % n]).powi(2);
        }
    }
    e
}

/// Solves `-div(rho^-1 grad h_bar) = f` with zero boundary data, applies the circulation correction
/// `kappa`, and integrates the phase on the dual mesh.
pub fn phase_field(vort: &RegularizedVorticity, rho: &ModifiedDensity, grid: &DiscGrid) -> Result<PhaseField> {
    let nodes = &grid.radial.nodes[grid.annulus_start..];
    let na = nodes.len();
    let n = grid.n_theta;
    if vort.n_rows != na || vort.n_theta != n {
        return Err(Error::Domain("vorticity loads do not match the grid".into()));
    }
    let c = couplings(rho, nodes, grid.dtheta());
    let h_bar = solve_potential(&vort.loads, &c, grid, na);
    // outward normal derivative at r = 1, weighted by 1/rho
    let boundary_flux: f64 = (0..n).map(|j| c.radial[na - 2] * (h_bar[(na - 1) * n + j] - h_bar[(na - 2) * n + j])).sum();
    let kappa = boundary_flux - TWO_PI * (boundary_flux / TWO_PI).floor();
    let q_tot = c.q[na - 1];
    let gamma_energy = TWO_PI / q_tot;
    let shift = kappa / gamma_energy;
    let h: Vec<f64> = (0..na * n).map(|k| h_bar[k] - shift * c.q[k / n] / q_tot).collect();
    let dirichlet_energy = dirichlet_form(&h, &c, na, n);

    // dual node (a, j) sits between rows a, a+1 and columns j, j+1
    let loaded = |a: usize, j: usize| vort.loads[a * n + j] != 0.0;
    let nd = na - 1;
    let blocked: Vec<bool> = (0..nd * n)
        .map(|k| {
            let (a, j) = (k / n, k % n);
            let j1 = (j + 1) % n;
            loaded(a, j) || loaded(a + 1, j) || loaded(a, j1) || loaded(a + 1, j1)
        })
        .collect();
    // +theta step from (a, j-1) to (a, j) crosses the primal edge (a, j)-(a+1, j)
    let step_theta = |a: usize, j: usize| c.radial[a] * (h[a * n + j] - h[(a + 1) * n + j]);
    // +r step from (a-1, j) to (a, j) crosses the primal edge (a, j)-(a, j+1)
    let step_r = |a: usize, j: usize| -c.angular[a] * (h[a * n + j] - h[a * n + (j + 1) % n]);
    let outer_circulation: f64 = (0..n).map(|j| step_theta(nd - 1, j)).sum();
    let inner_circulation: f64 = (0..n).map(|j| step_theta(0, j)).sum();

    let neighbors = |k: usize| -> Vec<(usize, f64)> {
        let (a, j) = (k / n, k % n);
        let jm = (j + n - 1) % n;
        let jp = (j + 1) % n;
        let mut v = vec![(a * n + jp, step_theta(a, jp)), (a * n + jm, -step_theta(a, j))];
        if a + 1 < nd {
            v.push(((a + 1) * n + j, step_r(a + 1, j)));
        }
        if a > 0 {
            v.push(((a - 1) * n + j, -step_r(a, j)));
        }
        v
    };
    let mut phi: Vec<Option<f64>> = vec![None; nd * n];
    let mut max_loop_defect = 0.0f64;
    let start = (0..nd * n).find(|&k| !blocked[k]).ok_or_else(|| Error::Assembly("every dual node touches a core".into()))?;
    phi[start] = Some(0.0);
    let mut queue = VecDeque::from([start]);
    while let Some(k) = queue.pop_front() {
        let base = phi[k].unwrap();
        for (m, inc) in neighbors(k) {
            if blocked[m] {
                continue;
            }
            match phi[m] {
                None => {
                    phi[m] = Some(base + inc);
                    queue.push_back(m);
                }
                Some(v) => max_loop_defect = max_loop_defect.max(wrap(v - base - inc).abs()),
            }
        }
    }
    if phi.iter().zip(&blocked).any(|(p, b)| p.is_none() && !b) {
        return Err(Error::Assembly("dual mesh outside the cores is disconnected".into()));
    }
    if max_loop_defect > 0.01 * TWO_PI {
        return Err(Error::Assembly(format!("phase loops away from cores close only to {max_loop_defect:.3e} rad")));
    }
    // fill the core interiors from their neighbors; only their average is used
    let mut queue: VecDeque<usize> = (0..nd * n).filter(|&k| phi[k].is_some()).collect();
    while let Some(k) = queue.pop_front() {
        let base = phi[k].unwrap();
        for (m, inc) in neighbors(k) {
            if phi[m].is_none() {
                phi[m] = Some(base + inc);
                queue.push_back(m);
            }
        }
    }
    let phase: Vec<Complex64> = (0..na * n)
        .map(|k| {
            let (a, j) = (k / n, k % n);
            let jm = (j + n - 1) % n;
            let mut corners = vec![];
            for da in [a.wrapping_sub(1), a] {
                if da < nd {
                    corners.push(da * n + jm);
                    corners.push(da * n + j);
                }
            }
            let free: Vec<usize> = corners.iter().cloned().filter(|&m| !blocked[m]).collect();
            let use_set = if free.is_empty() { &corners } else { &free };
            let s: Complex64 = use_set.iter().map(|&m| Complex64::from_polar(1.0, phi[m].unwrap())).sum();
            if s.norm() > 0.0 {
                s / s.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    let outer_defect = (outer_circulation - TWO_PI * (outer_circulation / TWO_PI).round()).abs();
    if outer_defect > 0.01 * TWO_PI {
        return Err(Error::Phase(format!("outer circulation {outer_circulation:.6} is not quantized")));
    }
    Ok(PhaseField {
        n_rows: na,
        n_theta: n,
        h_bar,
        h,
        boundary_flux,
        kappa,
        gamma_energy,
        outer_circulation,
        inner_circulation,
        dirichlet_energy,
        phase,
        max_loop_defect,
    })
}

/// Sum of the dual phase steps on the boundary of the node box `rows x cols` (counterclockwise).
pub fn box_circulation(ph: &PhaseField, rho: &ModifiedDensity, grid: &DiscGrid, rows: (usize, usize), cols: (i64, i64)) -> f64 {
    let nodes = &grid.radial.nodes[grid.annulus_start..];
    let c = couplings(rho, nodes, grid.dtheta());
    let n = ph.n_theta as i64;
    let h = &ph.h;
    let idx = |a: usize, j: i64| a * ph.n_theta + j.rem_euclid(n) as usize;
    let step_theta = |a: usize, j: i64| c.radial[a] * (h[idx(a, j)] - h[idx(a + 1, j)]);
    let step_r = |a: usize, j: i64| -c.angular[a] * (h[idx(a, j)] - h[idx(a, j + 1)]);
    // dual loop through (a_lo - 1, j_lo - 1) .. (a_hi, j_hi) encloses nodes a_lo..=a_hi, j_lo..=j_hi
    let (a_lo, a_hi) = rows;
    let (j_lo, j_hi) = cols;
    let mut s = 0.0;
    for j in j_lo..=j_hi {
        s += step_theta(a_lo - 1, j);
    }
    for a in a_lo..=a_hi {
        s += step_r(a, j_hi);
    }
    for j in j_lo..=j_hi {
        s -= step_theta(a_hi, j);
    }
    for a in a_lo..=a_hi {
        s -= step_r(a, j_lo - 1);
    }
    s
}

/// Assembled trial state `c xi g e^{i k theta} e^{i phi}` on the disc grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialFunction {
    pub psi: Vec<Complex64>,
    /// Cutoff per annulus node.
    pub xi: Vec<f64>,
    pub c: f64,
    pub winding: i64,
    pub config: VortexConfiguration,
    /// Phase winding of `psi / (g e^{i k theta})` on the circle of radius `2t` around each core.
    pub core_windings: Vec<i32>,
    pub outer_winding: i64,
    pub inner_winding: i64,
}

impl TrialFunction {
    pub fn c_squared_defect(&self) -> f64 {
        (self.c * self.c - 1.0).abs()
    }

    /// `10 N M eps^2`.
    pub fn c_squared_bound(&self, r: &Regime) -> f64 {
        10.0 * self.config.count() as f64 * r.epsilon * r.epsilon
    }
}

/// `xi_BL` times the core cutoffs `clamp((|x - p| - t)/t, 0, 1)`.
pub fn cutoff(x: f64, y: f64, cfg: Option<&VortexConfiguration>, r_less: f64, bl_width: f64) -> f64 {
    let r = x.hypot(y);
    let mut v = ((r - r_less) / bl_width).clamp(0.0, 1.0);
    if let Some(cfg) = cfg {
        for k in 0..cfg.count() {
            let (px, py) = cfg.xy(k);
            let d = (x - px).hypot(y - py);
            if d < 2.0 * cfg.core {
                v *= ((d - cfg.core) / cfg.core).clamp(0.0, 1.0);
            }
        }
    }
    v
}

pub fn assemble_trial(
    r: &Regime,
    state: &GiantVortexState,
    cfg: &VortexConfiguration,
    phase: &PhaseField,
    geo: &AnnulusGeometry,
    grid: &DiscGrid,
) -> Result<TrialFunction> {
    check_alignment(state, grid)?;
    let a0 = grid.annulus_start;
    let n = grid.n_theta;
    let na = state.grid.len();
    let k = state.winding as f64;
    let bl = geo.r_tilde(r) - geo.r_less;
    let use_cfg = (cfg.count() > 0).then_some(cfg);
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut xi = vec![0.0; na * n];
    for a in 0..na {
        for j in 0..n {
            let (x, y) = grid.xy(a0 + a, j);
            let v = cutoff(x, y, use_cfg, geo.r_less, bl);
            xi[a * n + j] = v;
            psi[grid.index(a0 + a, j)] = Complex64::from_polar(v * state.g[a], k * grid.theta(j)) * phase.phase[a * n + j];
        }
    }
    let mass = GpFunctional::new(r, grid).mass(&psi);
    if !(mass > 0.0) {
        return Err(Error::Assembly("trial state has zero mass".into()));
    }
    let c = 1.0 / mass.sqrt();
    psi.par_iter_mut().for_each(|v| *v *= c);
    let reduced: Vec<Complex64> = (0..na * n).map(|m| Complex64::new(xi[m], 0.0) * phase.phase[m]).collect();
    let mut full = vec![Complex64::new(0.0, 0.0); grid.len()];
    full[grid.index(a0, 0)..].copy_from_slice(&reduced);
    let core_windings = (0..cfg.count())
        .map(|q| {
            let (px, py) = cfg.xy(q);
            let pts = 256;
            let vals: Vec<Complex64> = (0..pts)
                .map(|s| {
                    let t = TWO_PI * s as f64 / pts as f64;
                    let (rr, th) = crate::gp2d::polar(px + 2.0 * cfg.core * t.cos(), py + 2.0 * cfg.core * t.sin());
                    grid.sample(&full, rr, th)
                })
                .collect();
            let total: f64 = (0..pts).map(|s| wrap(vals[(s + 1) % pts].arg() - vals[s].arg())).sum();
            (total / TWO_PI).round() as i32
        })
        .collect();
    Ok(TrialFunction {
        psi,
        xi,
        c,
        winding: state.winding,
        config: cfg.clone(),
        core_windings,
        outer_winding: phase.outer_winding(),
        inner_winding: phase.inner_winding(),
    })
}

/// Discrete GP energy with a second quadrature of the angular terms for an error bar.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EnergyEstimate {
    pub components: GpEnergy,
    pub value: f64,
    /// Angular kinetic and rotation terms by nearest-neighbor differences.
    pub alternative: f64,
    pub error_bar: f64,
}

pub fn evaluate_gp_energy(psi: &[Complex64], r: &Regime, grid: &DiscGrid) -> EnergyEstimate {
    let f = GpFunctional::new(r, grid);
    let e = f.energy(psi);
    let n = grid.n_theta;
    let dth = grid.dtheta();
    let (ang, rot): (f64, f64) = (0..grid.n_r())
        .into_par_iter()
        .map(|i| {
            let rr = grid.r(i);
            if rr == 0.0 {
                return (0.0, 0.0);
            }
            let s = grid.index(i, 0);
            let row = &psi[s..s + n];
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..n {
                let (p, q, m) = (row[j], row[(j + 1) % n], row[(j + n - 1) % n]);
                a += ((q - p) / dth).norm_sqr() / (rr * rr);
                // (i psi, d_theta psi) = Im(conj(psi) d_theta psi)
                b += -2.0 * r.omega * (p.conj() * (q - m) / (2.0 * dth)).im;
            }
            (grid.node_area(i) * a, grid.node_area(i) * b)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let alternative = e.radial_kinetic + ang + rot + e.interaction;
    EnergyEstimate { components: e, value: e.total, alternative, error_bar: (alternative - e.total).abs() }
}

/// `E_gv + 4 pi^2 n^2 I + 2 pi n H(R_*)` at `n = -H/(4 pi I)` and at the integer count used.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct UpperBound {
    pub vortex_number: f64,
    pub quadratic: f64,
    /// `E_gv - H^2/(4 I)`.
    pub simplified: f64,
    pub count: usize,
    pub at_count: f64,
}

pub fn upper_bound_prediction(e_gv: f64, h_rstar: f64, i_star: f64, count: usize) -> Result<UpperBound> {
    if !(i_star > 0.0) {
        return Err(Error::Domain(format!("electrostatic energy must be positive, got {i_star}")));
    }
    if h_rstar > 0.0 {
        return Err(Error::NoVortices(h_rstar));
    }
    let n = -h_rstar / (4.0 * PI * i_star);
    let q = |m: f64| e_gv + 4.0 * PI * PI * m * m * i_star + TWO_PI * m * h_rstar;
    Ok(UpperBound { vortex_number: n, quadratic: q(n), simplified: e_gv - h_rstar * h_rstar / (4.0 * i_star), count, at_count: q(count as f64) })
}

/// Global solve against the sum of per-cell solves with Neumann cuts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CellSplitReport {
    pub global_energy: f64,
    pub cell_energy_sum: f64,
    pub relative_gap: f64,
    /// Largest pointwise gap between the cell potentials and the global one, relative to its sup.
    pub max_potential_gap: f64,
}

/// Solves `-div(rho^-1 grad h) = f` in every cell with zero Neumann data on the radial cuts
/// (cosine modes) and compares with the periodic solve `h_bar`.
pub fn cell_splitting_check(vort: &RegularizedVorticity, phase: &PhaseField, rho: &ModifiedDensity, cells: &CellDecomposition, grid: &DiscGrid) -> Result<CellSplitReport> {
    let n = grid.n_theta;
    if n % cells.n_cells != 0 {
        return Err(Error::Resolution(format!("angular count {n} is not a multiple of {} cells", cells.n_cells)));
    }
    let nodes = &grid.radial.nodes[grid.annulus_start..];
    let na = nodes.len();
    let c = couplings(rho, nodes, grid.dtheta());
    let m = n / cells.n_cells;
    let weight = |j: usize| if j == 0 || j == m { 0.5 } else { 1.0 };
    let basis: Vec<Vec<f64>> = (0..=m).map(|k| (0..=m).map(|j| (PI * (k * j) as f64 / m as f64).cos()).collect()).collect();
    let results: Vec<(f64, f64)> = (0..cells.n_cells)
        .into_par_iter()
        .map(|cell| {
            let col = |j: usize| (cell * m + j) % n;
            // half loads on the cut columns: the neighboring cell owns the other half
            let load = |a: usize, j: usize| vort.loads[a * n + col(j)] * weight(j);
            let mut coef = vec![vec![Complex64::new(0.0, 0.0); na]; m + 1];
            for (k, row) in coef.iter_mut().enumerate() {
                let norm = if k == 0 || k == m { m as f64 } else { 0.5 * m as f64 };
                for (a, v) in row.iter_mut().enumerate() {
                    // expand load/weight in the cosine basis orthogonal for the weights
                    let s: f64 = (0..=m).map(|j| load(a, j) * basis[k][j]).sum();
                    *v = Complex64::new(s / norm, 0.0);
                }
                let lambda = 2.0 - 2.0 * (PI * k as f64 / m as f64).cos();
                solve_mode(&c, lambda, row);
            }
            let h: Vec<f64> = (0..na * (m + 1)).map(|q| (0..=m).map(|k| coef[k][q / (m + 1)].re * basis[k][q % (m + 1)]).sum()).collect();
            let mut e = 0.0;
            let mut gap = 0.0f64;
            for a in 0..na {
                for j in 0..=m {
                    let v = h[a * (m + 1) + j];
                    gap = gap.max((v - phase.h_bar[a * n + col(j)]).abs());
                    if a + 1 < na {
                        e += weight(j) * c.radial[a] * (v - h[(a + 1) * (m + 1) + j]).powi(2);
                    }
                    if j < m {
                        e += c.angular[a] * (v - h[a * (m + 1) + j + 1]).powi(2);
                    }
                }
            }
            (e, gap)
        })
        .collect();
    let global_energy = dirichlet_form(&phase.h_bar, &c, na, n);
    let cell_energy_sum: f64 = results.iter().map(|x| x.0).sum();
    let sup = phase.h_bar.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    Ok(CellSplitReport {
        global_energy,
        cell_energy_sum,
        relative_gap: (cell_energy_sum - global_energy).abs() / global_energy.abs().max(f64::MIN_POSITIVE),
        max_potential_gap: results.iter().map(|x| x.1).fold(0.0, f64::max) / sup,
    })
}

/// Inputs of the trial pipeline taken from the radial, cost and electrostatic stages.
#[derive(Debug, Clone)]
pub struct TrialInputs<'a> {
    pub regime: Regime,
    pub state: &'a GiantVortexState,
    pub tf: &'a TFProfile,
    pub geo: AnnulusGeometry,
    pub r_star: f64,
    pub h_star: f64,
    pub f_star: f64,
    pub i_star: f64,
    pub n_cells: usize,
    pub per_cell: usize,
}

/// Trial energy and its comparison with the predicted vortex terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub n_cells: usize,
    pub per_cell: usize,
    pub core: f64,
    pub core_cells: f64,
    pub raw_core_masses: Vec<f64>,
    pub c_squared: f64,
    pub mass: f64,
    pub energy: EnergyEstimate,
    pub bound: UpperBound,
    pub kappa: f64,
    pub outer_circulation: f64,
    pub inner_circulation: f64,
    pub core_windings: Vec<i32>,
    /// `int rho xi^2 |grad phi|^2`.
    pub phase_kinetic: f64,
    /// `int g^2 xi^2 |grad phi|^2`.
    pub phase_kinetic_g2: f64,
    /// `int rho^-1 |grad h|^2`.
    pub dirichlet_energy: f64,
    /// `4 pi^2 n^2 I + pi n g^2(R_*) |log eps|` with `n = N M`.
    pub kinetic_prediction: f64,
    pub kinetic_ratio: f64,
    /// `-2 int g^2 B (iv, grad v)`.
    pub rotation: f64,
    /// `2 pi n F(R_*)`.
    pub rotation_prediction: f64,
    pub rotation_ratio: f64,
    pub decoupling: DecouplingReport,
    pub cell_split: Option<CellSplitReport>,
    pub reflection_defect: Option<f64>,
    pub density_deviation: f64,
}

/// `int rho xi^2 |grad phi|^2` from the potential: `rho |grad phi|^2 = rho^-1 |grad h|^2`, with
/// `xi^2` and `g^2/rho` averaged on each face.
fn phase_kinetic(phase: &PhaseField, xi: &[f64], rho: &ModifiedDensity, state: &GiantVortexState, grid: &DiscGrid) -> (f64, f64) {
    let nodes = &grid.radial.nodes[grid.annulus_start..];
    let c = couplings(rho, nodes, grid.dtheta());
    let (na, n) = (phase.n_rows, phase.n_theta);
    let ratio: Vec<f64> = (0..na).map(|a| state.g[a] * state.g[a] / rho.eval(nodes[a])).collect();
    let h = &phase.h;
    let (mut with_rho, mut with_g) = (0.0, 0.0);
    for a in 0..na {
        for j in 0..n {
            let k = a * n + j;
            if a + 1 < na {
                let q = (a + 1) * n + j;
                let e = c.radial[a] * (h[k] - h[q]).powi(2) * 0.5 * (xi[k].powi(2) + xi[q].powi(2));
                with_rho += e;
                with_g += e * 0.5 * (ratio[a] + ratio[a + 1]);
            }
            let q = a * n + (j + 1) % n;
            let e = c.angular[a] * (h[k] - h[q]).powi(2) * 0.5 * (xi[k].powi(2) + xi[q].powi(2));
            with_rho += e;
            with_g += e * ratio[a];
        }
    }
    (with_rho, with_g)
}

/// Runs placement, vorticity, phase, assembly and the energy comparisons on `grid`.
pub fn build_trial(inp: &TrialInputs, grid: &DiscGrid) -> Result<(TrialFunction, TrialReport)> {
    let r = &inp.regime;
    let cfg = build_configuration(r, inp.r_star, inp.n_cells, inp.per_cell, inp.geo.r_less)?;
    let vort = regularized_vorticity(&cfg, grid)?;
    let rho = modified_density(r, inp.state, inp.tf, &inp.geo)?;
    let phase = phase_field(&vort, &rho, grid)?;
    let trial = assemble_trial(r, inp.state, &cfg, &phase, &inp.geo, grid)?;
    let energy = evaluate_gp_energy(&trial.psi, r, grid);
    let nm = cfg.count();
    let bound = upper_bound_prediction(inp.state.energy, inp.h_star, inp.i_star, nm)?;
    let (kin, kin_g) = phase_kinetic(&phase, &trial.xi, &rho, inp.state, grid);
    let g2 = inp.state.g_at(inp.r_star).powi(2);
    let n = nm as f64;
    let kinetic_prediction = 4.0 * PI * PI * n * n * inp.i_star + PI * n * g2 * r.log_eps;
    let a0 = grid.annulus_start;
    let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (k, x) in trial.xi.iter().enumerate() {
        v[grid.index(a0, 0) + k] = phase.phase[k] * *x;
    }
    let red = reduced_energy(&ReducedField { u: v, rows: a0..grid.n_r() }, inp.state, r, grid)?;
    let rotation_prediction = TWO_PI * n * inp.f_star;
    let decoupling = decoupling_check(&trial.psi, inp.state, r, grid)?;
    let cell_split = cell_splitting_check(&vort, &phase, &rho, &cfg.cells, grid).ok();
    let report = TrialReport {
        n_cells: inp.n_cells,
        per_cell: inp.per_cell,
        core: cfg.core,
        core_cells: grid.cells_across(cfg.core, cfg.r_star),
        raw_core_masses: vort.raw_masses.clone(),
        c_squared: trial.c * trial.c,
        mass: GpFunctional::new(r, grid).mass(&trial.psi),
        energy,
        bound,
        kappa: phase.kappa,
        outer_circulation: phase.outer_circulation,
        inner_circulation: phase.inner_circulation,
        core_windings: trial.core_windings.clone(),
        phase_kinetic: kin,
        phase_kinetic_g2: kin_g,
        dirichlet_energy: phase.dirichlet_energy,
        kinetic_prediction,
        kinetic_ratio: kin / kinetic_prediction,
        rotation: red.rotation,
        rotation_prediction,
        rotation_ratio: red.rotation / rotation_prediction,
        decoupling,
        cell_split,
        reflection_defect: vort.reflection_defect(&cfg.cells),
        density_deviation: rho.relative_deviation,
    };
    Ok((trial, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::regime_from_omega1;

    #[test]
    fn four_cells_one_each() {
        let r = regime_from_omega1(0.03, 0.05).unwrap();
        let c = build_configuration(&r, 0.8, 4, 1, 0.5).unwrap();
        for (k, t) in c.angles.iter().enumerate() {
            assert!((t - (PI / 4.0 + k as f64 * PI / 2.0)).abs() < 1e-12);
        }
        assert!((c.spacing() - 2.0 * 0.8 * (PI / 4.0).sin()).abs() < 1e-12);
        assert!(c.core_fraction() < 0.1);
    }

    #[test]
    fn gaps_are_uniform() {
        let r = regime_from_omega1(0.03, 0.05).unwrap();
        let c = build_configuration(&r, 0.8, 5, 3, 0.5).unwrap();
        let gaps: Vec<f64> = c.angles.windows(2).map(|p| p[1] - p[0]).collect();
        for g in gaps {
            assert!((g - TWO_PI / 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_configurations() {
        let r = regime_from_omega1(0.03, 0.05).unwrap();
        assert!(matches!(build_configuration(&r, 0.8, 0, 1, 0.5), Err(Error::Configuration(_))));
        assert!(matches!(build_configuration(&r, 0.8, 400, 1, 0.5), Err(Error::Configuration(_))));
        assert!(matches!(build_configuration(&r, 0.995, 4, 1, 0.5), Err(Error::Configuration(_))));
    }

    #[test]
    fn no_vortices_bound_is_giant_vortex_energy() {
        let b = upper_bound_prediction(-10.0, 0.0, 0.5, 0).unwrap();
        assert_eq!(b.vortex_number, 0.0);
        assert_eq!(b.quadratic, -10.0);
        let b = upper_bound_prediction(-10.0, -0.3, 0.01, 2).unwrap();
        assert!((b.quadratic - b.simplified).abs() < 1e-12);
        assert!(matches!(upper_bound_prediction(-10.0, 0.1, 0.01, 1), Err(Error::NoVortices(_))));
    }

    #[test]
    fn coverage_tiles_to_disc_area() {
        let t = 0.01;
        let (dr, dth) = (t / 4.0, t / 4.0 / 0.725);
        let mut total = 0.0;
        for a in 0..20 {
            let lo = 0.7 + a as f64 * dr;
            for b in -10..=10 {
                total += coverage(lo, lo + dr, b as f64 * dth, dth, (0.725, 0.0), t);
            }
        }
        assert!((total - PI * t * t).abs() < 0.01 * PI * t * t, "{total}");
    }
}
