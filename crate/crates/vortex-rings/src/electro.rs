//! Weighted electrostatics: ring potentials, the polar Poisson solver, cell Green functions
//! and the optimal vortex number.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::giant_vortex::GiantVortexState;
use crate::numerics::{interp, locate, pcg, CsrMatrix};
use crate::params::Regime;

/// Relative residual target for 2D solves.
pub const CG_TOL: f64 = 1e-10;

/// Radial weight `w(r) > 0`, sampled and linearly interpolated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightField {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

impl WeightField {
    pub fn from_samples(r: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if r.len() != w.len() || r.len() < 2 {
            return Err(Error::Domain("weight needs at least two matching samples".into()));
        }
        if r.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Domain("weight radii must increase".into()));
        }
        if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("weight must be positive and finite, got {v}")));
        }
        Ok(WeightField { r, w })
    }

    pub fn constant(c: f64, inner: f64, outer: f64) -> Result<Self> {
        Self::from_samples(vec![inner, outer], vec![c, c])
    }

    pub fn from_fn(f: impl Fn(f64) -> f64, inner: f64, outer: f64, n: usize) -> Result<Self> {
        let r: Vec<f64> = (0..=n).map(|i| inner + (outer - inner) * i as f64 / n as f64).collect();
        let w = r.iter().map(|x| f(*x)).collect();
        Self::from_samples(r, w)
    }

    /// `w = g^2` for a giant-vortex profile.
    pub fn from_state(state: &GiantVortexState) -> Result<Self> {
        let floor = state.g.iter().fold(0.0f64, |m, g| m.max(g * g)) * 1e-300;
        let w = state.g.iter().map(|g| (g * g).max(floor)).collect();
        Self::from_samples(state.grid.nodes.clone(), w)
    }

    pub fn inner(&self) -> f64 {
        self.r[0]
    }

    pub fn outer(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.r, &self.w, x)
    }

    pub fn sup(&self) -> f64 {
        self.w.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// `int_a^b w(s)/s ds`, exact for the piecewise linear interpolant.
    pub fn log_integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.log_integral(b, a);
        }
        let piece = |lo: f64, hi: f64| {
            let (wl, wh) = (self.eval(lo), self.eval(hi));
            if hi <= lo {
                return 0.0;
            }
            let slope = (wh - wl) / (hi - lo);
            (wl - slope * lo) * (hi / lo).ln() + slope * (hi - lo)
        };
        let mut total = 0.0;
        let mut lo = a;
        let mut i = locate(&self.r, a);
        while lo < b {
            let hi = if i + 1 < self.r.len() && self.r[i + 1] < b { self.r[i + 1] } else { b };
            total += piece(lo, hi);
            lo = hi;
            i += 1;
        }
        total
    }
}

/// Radial vorticity measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RadialMeasure {
    Ring { radius: f64, mass: f64 },
    /// Density per unit area sampled at radii.
    Density { r: Vec<f64>, values: Vec<f64> },
}

impl RadialMeasure {
    pub fn mass(&self) -> f64 {
        match self {
            RadialMeasure::Ring { mass, .. } => *mass,
            RadialMeasure::Density { r, values } => {
                let f: Vec<f64> = r.iter().zip(values).map(|(x, v)| 2.0 * PI * x * v).collect();
                *crate::numerics::cumtrapz(r, &f).last().unwrap_or(&0.0)
            }
        }
    }
}

/// Explicit potential of a unit ring: `A Q(inner, r)` below, `B Q(r, 1)` above.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RingPotential {
    pub inner: f64,
    pub ring: f64,
    pub q_below: f64,
    pub q_above: f64,
    pub value_at_ring: f64,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
}

impl RingPotential {
    pub fn eval(&self, w: &WeightField, x: f64) -> f64 {
        let q = self.q_below + self.q_above;
        if x <= self.inner || x >= 1.0 {
            0.0
        } else if x <= self.ring {
            self.q_above / (2.0 * PI * q) * w.log_integral(self.inner, x)
        } else {
            self.q_below / (2.0 * PI * q) * w.log_integral(x, 1.0)
        }
    }

    /// `int w^{-1} |h'|^2` by midpoint differences of the samples.
    pub fn energy_by_quadrature(&self, w: &WeightField) -> f64 {
        self.r
            .windows(2)
            .zip(self.h.windows(2))
            .map(|(x, h)| {
                let m = 0.5 * (x[0] + x[1]);
                let d = (h[1] - h[0]) / (x[1] - x[0]);
                2.0 * PI * m * d * d / w.eval(m) * (x[1] - x[0])
            })
            .sum()
    }
}

/// Potential field returned by the solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PotentialField {
    Radial(RingPotential),
    Polar(PolarPotential),
}

fn check_ring(w: &WeightField, ring: f64, inner: f64) -> Result<()> {
    if !(inner < ring && ring < 1.0) {
        return Err(Error::Domain(format!("ring radius {ring} outside ({inner}, 1)")));
    }
    if inner < w.inner() - 1e-12 || w.outer() < 1.0 - 1e-12 {
        return Err(Error::Domain(format!("weight covers [{}, {}], need [{inner}, 1]", w.inner(), w.outer())));
    }
    Ok(())
}

pub fn radial_ring_potential(w: &WeightField, ring: f64, inner: f64) -> Result<RingPotential> {
    check_ring(w, ring, inner)?;
    let q1 = w.log_integral(inner, ring);
    let q2 = w.log_integral(ring, 1.0);
    let mut r: Vec<f64> = w.r.iter().copied().filter(|x| *x > inner && *x < 1.0 && *x != ring).collect();
    r.push(inner);
    r.push(ring);
    r.push(1.0);
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut pot = RingPotential { inner, ring, q_below: q1, q_above: q2, value_at_ring: q1 * q2 / (2.0 * PI * (q1 + q2)), r, h: vec![] };
    pot.h = pot.r.iter().map(|x| pot.eval(w, *x)).collect();
    Ok(pot)
}

/// Energy of the uniform unit ring measure, `Q1 Q2 / (2 pi Q)`.
pub fn ring_energy(w: &WeightField, ring: f64, inner: f64) -> Result<f64> {
    Ok(radial_ring_potential(w, ring, inner)?.value_at_ring)
}

/// Polar grid on an annulus or an annular sector. Radii are uniform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarGrid {
    pub radii: Vec<f64>,
    pub theta0: f64,
    pub span: f64,
    pub n_theta: usize,
    pub periodic: bool,
}

impl PolarGrid {
    pub fn annulus(inner: f64, outer: f64, nr: usize, n_theta: usize) -> Result<Self> {
        Self::build(inner, outer, nr, 0.0, 2.0 * PI, n_theta, true)
    }

    pub fn sector(inner: f64, outer: f64, nr: usize, theta0: f64, span: f64, n_theta: usize) -> Result<Self> {
        Self::build(inner, outer, nr, theta0, span, n_theta, false)
    }

    fn build(inner: f64, outer: f64, nr: usize, theta0: f64, span: f64, n_theta: usize, periodic: bool) -> Result<Self> {
        if !(0.0 < inner && inner < outer) || nr < 4 || n_theta < 4 {
            return Err(Error::Domain(format!("bad polar grid [{inner}, {outer}] {nr}x{n_theta}")));
        }
        let radii = (0..=nr).map(|i| inner + (outer - inner) * i as f64 / nr as f64).collect();
        Ok(PolarGrid { radii, theta0, span, n_theta, periodic })
    }

    pub fn refined(&self) -> Self {
        let nr = 2 * (self.radii.len() - 1);
        Self::build(self.radii[0], *self.radii.last().unwrap(), nr, self.theta0, self.span, 2 * self.n_theta, self.periodic).unwrap()
    }

    pub fn nr(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn dr(&self) -> f64 {
        self.radii[1] - self.radii[0]
    }

    pub fn dtheta(&self) -> f64 {
        self.span / self.n_theta as f64
    }

    /// Number of angular node columns.
    pub fn n_ang(&self) -> usize {
        if self.periodic {
            self.n_theta
        } else {
            self.n_theta + 1
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta0 + j as f64 * self.dtheta()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_ang()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_ang() + j
    }

    fn angular_width(&self, j: usize) -> f64 {
        if !self.periodic && (j == 0 || j == self.n_theta) {
            0.5 * self.dtheta()
        } else {
            self.dtheta()
        }
    }

    /// Control-volume area of node `(i, j)`; zero on the Dirichlet rows.
    pub fn volume(&self, i: usize, j: usize) -> f64 {
        if i == 0 || i == self.nr() {
            return 0.0;
        }
        self.radii[i] * self.dr() * self.angular_width(j)
    }

    /// Nearest node to a point given in polar coordinates.
    pub fn nearest(&self, r: f64, theta: f64) -> (usize, usize) {
        let i = ((r - self.radii[0]) / self.dr()).round().clamp(0.0, self.nr() as f64) as usize;
        let mut t = theta - self.theta0;
        if self.periodic {
            t = t.rem_euclid(2.0 * PI);
        }
        let j = (t / self.dtheta()).round().max(0.0) as usize;
        let j = if self.periodic { j % self.n_theta } else { j.min(self.n_theta) };
        (i, j)
    }

    /// Bilinear interpolation of a node field.
    pub fn sample(&self, field: &[f64], r: f64, theta: f64) -> f64 {
        let x = ((r - self.radii[0]) / self.dr()).clamp(0.0, self.nr() as f64);
        let i = (x.floor() as usize).min(self.nr() - 1);
        let fr = x - i as f64;
        let mut t = (theta - self.theta0) / self.dtheta();
        if self.periodic {
            t = t.rem_euclid(self.n_theta as f64);
        } else {
            t = t.clamp(0.0, self.n_theta as f64);
        }
        let j = (t.floor() as usize).min(self.n_theta - 1);
        let ft = t - j as f64;
        let j1 = if self.periodic { (j + 1) % self.n_theta } else { j + 1 };
        let v = |a: usize, b: usize| field[self.index(a, b)];
        (1.0 - fr) * ((1.0 - ft) * v(i, j) + ft * v(i, j1)) + fr * ((1.0 - ft) * v(i + 1, j) + ft * v(i + 1, j1))
    }

    /// Radial and angular face coefficients for conductivity `1/w`.
    fn couplings(&self, w: &WeightField) -> (Vec<f64>, Vec<f64>) {
        // radial face i between rows i and i+1: 1 / int w/s ds, exact for radial flux
        let radial = self.radii.windows(2).map(|p| 1.0 / w.log_integral(p[0], p[1])).collect();
        let angular = self.radii.iter().map(|r| self.dr() / (r * self.dtheta() * w.eval(*r))).collect();
        (radial, angular)
    }

    fn faces(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let na = self.n_ang();
        let nr = self.nr();
        let radial = (0..nr).flat_map(move |i| (0..na).map(move |j| (i, j, i + 1, j)));
        let angular = (1..nr).flat_map(move |i| (0..self.n_theta).map(move |j| (i, j, i, if self.periodic { (j + 1) % na } else { j + 1 })));
        radial.chain(angular)
    }

    fn face_weight(&self, rad: &[f64], ang: &[f64], f: (usize, usize, usize, usize)) -> f64 {
        let (i, j, i2, _) = f;
        if i2 != i {
            rad[i] * self.angular_width(j)
        } else {
            ang[i]
        }
    }
}

/// Potential on a polar grid, zero on both radial boundaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarPotential {
    pub grid: PolarGrid,
    pub h: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    /// `int h d nu`.
    pub source_pairing: f64,
}

impl PolarPotential {
    /// Angular average per radius.
    pub fn radial_mean(&self) -> Vec<f64> {
        let na = self.grid.n_ang();
        (0..self.grid.radii.len())
            .map(|i| {
                let tot: f64 = (0..na).map(|j| self.grid.angular_width(j)).sum();
                (0..na).map(|j| self.h[self.grid.index(i, j)] * self.grid.angular_width(j)).sum::<f64>() / tot
            })
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.h.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

/// Solve `-div(w^{-1} grad h) = source` with zero Dirichlet data on both radii.
/// `source` is a density per unit area at every node; boundary rows are ignored.
pub fn solve_poisson2d(w: &WeightField, source: &[f64], grid: &PolarGrid) -> Result<PolarPotential> {
    let rhs: Vec<f64> = (0..grid.len())
        .map(|k| {
            let (i, j) = (k / grid.n_ang(), k % grid.n_ang());
            source[k] * grid.volume(i, j)
        })
        .collect();
    solve_with_loads(w, &rhs, grid)
}

/// As `solve_poisson2d`, with integrated loads per node.
pub fn solve_with_loads(w: &WeightField, loads: &[f64], grid: &PolarGrid) -> Result<PolarPotential> {
    if loads.len() != grid.len() {
        return Err(Error::Domain(format!("source has {} entries, grid has {}", loads.len(), grid.len())));
    }
    if w.inner() > grid.radii[0] + 1e-12 || w.outer() < grid.radii[grid.nr()] - 1e-12 {
        return Err(Error::Domain("weight does not cover the grid".into()));
    }
    let na = grid.n_ang();
    let nr = grid.nr();
    let unknown = |i: usize, j: usize| (i - 1) * na + j;
    let n = (nr - 1) * na;
    let (rad, ang) = grid.couplings(w);
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|k| vec![(k, 0.0)]).collect();
    for f in grid.faces() {
        let c = grid.face_weight(&rad, &ang, f);
        let (i, j, i2, j2) = f;
        let a_in = i > 0 && i < nr;
        let b_in = i2 > 0 && i2 < nr;
        if a_in {
            rows[unknown(i, j)][0].1 += c;
        }
        if b_in {
            rows[unknown(i2, j2)][0].1 += c;
        }
        if a_in && b_in {
            rows[unknown(i, j)].push((unknown(i2, j2), -c));
            rows[unknown(i2, j2)].push((unknown(i, j), -c));
        }
    }
    let a = CsrMatrix::from_rows(rows);
    let b: Vec<f64> = (1..nr).flat_map(|i| (0..na).map(move |j| (i, j))).map(|(i, j)| loads[grid.index(i, j)]).collect();
    let out = pcg(&a, &b, CG_TOL, 20 * n + 1000);
    if !out.converged {
        return Err(Error::Solver { message: format!("conjugate gradients stalled after {} iterations", out.iterations), residuals: vec![out.relative_residual] });
    }
    let mut h = vec![0.0; grid.len()];
    for i in 1..nr {
        for j in 0..na {
            h[grid.index(i, j)] = out.x[unknown(i, j)];
        }
    }
    let pairing = h.iter().zip(loads).map(|(h, l)| h * l).sum();
    Ok(PolarPotential { grid: grid.clone(), h, iterations: out.iterations, relative_residual: out.relative_residual, source_pairing: pairing })
}

/// `int w^{-1} |grad h|^2` as the discrete Dirichlet form over grid faces.
pub fn electro_energy(h: &PolarPotential, w: &WeightField) -> f64 {
    let g = &h.grid;
    let (rad, ang) = g.couplings(w);
    g.faces()
        .map(|f| {
            let d = h.h[g.index(f.0, f.1)] - h.h[g.index(f.2, f.3)];
            g.face_weight(&rad, &ang, f) * d * d
        })
        .sum()
}

/// Energy of any potential field.
pub fn field_energy(h: &PotentialField, w: &WeightField) -> f64 {
    match h {
        PotentialField::Radial(p) => p.energy_by_quadrature(w),
        PotentialField::Polar(p) => electro_energy(p, w),
    }
}

/// Ring source of total `mass`: radial hat two cells wide times an angular profile.
pub fn ring_source(grid: &PolarGrid, ring: f64, mass: f64, angular: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let dr = grid.dr();
    if ring - dr <= grid.radii[0] || ring + dr >= grid.radii[grid.nr()] {
        return Err(Error::Domain(format!("ring {ring} too close to the grid boundary")));
    }
    let mut s = vec![0.0; grid.len()];
    let mut z = 0.0;
    for i in 1..grid.nr() {
        let hat = (1.0 - (grid.radii[i] - ring).abs() / dr).max(0.0);
        if hat == 0.0 {
            continue;
        }
        for j in 0..grid.n_ang() {
            let a = angular(grid.theta(j)).max(0.0);
            s[grid.index(i, j)] = hat * a;
            z += hat * a * grid.volume(i, j);
        }
    }
    if z <= 0.0 {
        return Err(Error::Domain("ring source has no mass".into()));
    }
    s.iter_mut().for_each(|v| *v *= mass / z);
    Ok(s)
}

/// Relative L2 difference between a polar solve and the radial ring potential.
pub fn compare_with_radial(p: &PolarPotential, w: &WeightField, radial: &RingPotential) -> f64 {
    let g = &p.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..g.nr() {
        let e = radial.eval(w, g.radii[i]);
        for j in 0..g.n_ang() {
            let v = g.volume(i, j);
            num += v * (p.h[g.index(i, j)] - e).powi(2);
            den += v * e * e;
        }
    }
    (num / den).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub uniform_energy: f64,
    pub trial_energies: Vec<f64>,
    /// `min_k I(nu_k) / I(uniform) - 1`.
    pub worst_excess: f64,
    pub violations: usize,
    pub tolerance: f64,
}

/// Randomly perturbed ring measures never beat the uniform one.
pub fn ring_minimality_check(w: &WeightField, ring: f64, grid: &PolarGrid, trials: usize, seed: u64, tolerance: f64) -> Result<MinimalityReport> {
    let energy_of = |ang: &dyn Fn(f64) -> f64| -> Result<f64> {
        let s = ring_source(grid, ring, 1.0, ang)?;
        let p = solve_poisson2d(w, &s, grid)?;
        Ok(electro_energy(&p, w))
    };
    let uniform = energy_of(&|_| 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<(f64, f64)>> = (0..trials)
        .map(|_| (1..=6).map(|_| (rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6))).collect())
        .collect();
    let energies: Vec<f64> = draws
        .par_iter()
        .map(|c| {
            let ang = |t: f64| 1.0 + c.iter().enumerate().map(|(n, (a, b))| a * ((n + 1) as f64 * t).cos() + b * ((n + 1) as f64 * t).sin()).sum::<f64>();
            energy_of(&ang)
        })
        .collect::<Result<_>>()?;
    let worst = energies.iter().fold(f64::INFINITY, |m, e| m.min(e / uniform - 1.0));
    let violations = energies.iter().filter(|e| **e < uniform * (1.0 - tolerance)).count();
    Ok(MinimalityReport { uniform_energy: uniform, trial_energies: energies, worst_excess: worst, violations, tolerance })
}

/// Energy of the half-circle measure relative to the uniform ring.
pub fn half_circle_excess(w: &WeightField, ring: f64, grid: &PolarGrid) -> Result<f64> {
    let e = |ang: &dyn Fn(f64) -> f64| -> Result<f64> {
        let s = ring_source(grid, ring, 1.0, ang)?;
        Ok(electro_energy(&solve_poisson2d(w, &s, grid)?, w))
    };
    let uniform = e(&|_| 1.0)?;
    let half = e(&|t: f64| if t.rem_euclid(2.0 * PI) < PI { 1.0 } else { 0.0 })?;
    Ok(half / uniform - 1.0)
}

/// Quadratic ring energy in the vorticity mass and its minimizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RenormalizedEnergy {
    pub value: f64,
    pub mass_opt: f64,
    pub min_value: f64,
}

/// `mass^2 I + mass H(R*)`.
pub fn renormalized_energy(mass: f64, h_rstar: f64, i_star: f64) -> Result<RenormalizedEnergy> {
    if !(i_star > 0.0) {
        return Err(Error::Domain(format!("electrostatic energy must be positive, got {i_star}")));
    }
    Ok(RenormalizedEnergy {
        value: mass * mass * i_star + mass * h_rstar,
        mass_opt: -h_rstar / (2.0 * i_star),
        min_value: -h_rstar * h_rstar / (4.0 * i_star),
    })
}

/// Cells around the ring and vortices per cell.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CellCount {
    pub cells: usize,
    pub per_cell: usize,
    /// `round(2 pi / (eps |log eps|))`.
    pub nominal_cells: usize,
    pub reduced: bool,
}

impl CellCount {
    pub fn total(&self) -> usize {
        self.cells * self.per_cell
    }

    pub fn for_target(r: &Regime, target: f64) -> Self {
        let nominal = ((2.0 * PI / (r.epsilon * r.log_eps)).round() as usize).max(1);
        if target <= 0.0 {
            return CellCount { cells: 0, per_cell: 0, nominal_cells: nominal, reduced: false };
        }
        if target < nominal as f64 {
            return CellCount { cells: (target.round() as usize).max(1), per_cell: 1, nominal_cells: nominal, reduced: true };
        }
        CellCount { cells: nominal, per_cell: ((target / nominal as f64).round() as usize).max(1), nominal_cells: nominal, reduced: false }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct VortexNumber {
    /// `-H(R*) / (4 pi I)`.
    pub target: f64,
    pub count: CellCount,
}

pub fn optimal_vortex_number(r: &Regime, h_rstar: f64, i_star: f64) -> Result<VortexNumber> {
    if !(i_star > 0.0) {
        return Err(Error::Domain(format!("electrostatic energy must be positive, got {i_star}")));
    }
    if h_rstar > 0.0 {
        return Err(Error::NoVortices(h_rstar));
    }
    let target = -h_rstar / (4.0 * PI * i_star);
    Ok(VortexNumber { target, count: CellCount::for_target(r, target) })
}

/// Green function of one angular cell for conductivity `1/w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellGreen {
    pub pole: (f64, f64),
    pub potential: PolarPotential,
}

impl CellGreen {
    pub fn at(&self, r: f64, theta: f64) -> f64 {
        self.potential.grid.sample(&self.potential.h, r, theta)
    }

    /// Slope of `G` against `-log |x - y|` over distances `k dr`, `k` in `window`,
    /// averaged over the four grid directions.
    pub fn log_slope(&self, window: std::ops::RangeInclusive<usize>) -> f64 {
        let g = &self.potential.grid;
        let (i, j) = g.nearest(self.pole.0, self.pole.1);
        let dr = g.dr();
        let mut xs = vec![];
        let mut ys = vec![];
        for k in window {
            let dth = k as f64 * dr / g.radii[i];
            let kt = (dth / g.dtheta()).round() as usize;
            let vals = [
                self.potential.h[g.index(i + k, j)],
                self.potential.h[g.index(i - k, j)],
                self.potential.h[g.index(i, j + kt)],
                self.potential.h[g.index(i, j - kt)],
            ];
            let dist_r = k as f64 * dr;
            let dist_t = 2.0 * g.radii[i] * (0.5 * kt as f64 * g.dtheta()).sin();
            xs.push(-dist_r.ln());
            ys.push(0.5 * (vals[0] + vals[1]));
            xs.push(-dist_t.ln());
            ys.push(0.5 * (vals[2] + vals[3]));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }
}

/// Discrete Green function on a sector grid with Dirichlet radii and Neumann cuts.
pub fn green_function_cell(grid: &PolarGrid, w: &WeightField, pole: (f64, f64)) -> Result<CellGreen> {
    if grid.periodic {
        return Err(Error::Domain("cell Green functions need a sector grid".into()));
    }
    let (i, j) = grid.nearest(pole.0, pole.1);
    let margin = 2;
    if i < margin || i + margin > grid.nr() || j < margin || j + margin > grid.n_theta {
        return Err(Error::Conditioning(format!("pole ({:.4}, {:.4}) within {margin} cells of the cell boundary", pole.0, pole.1)));
    }
    let mut loads = vec![0.0; grid.len()];
    loads[grid.index(i, j)] = 1.0;
    let potential = solve_with_loads(w, &loads, grid)?;
    Ok(CellGreen { pole: (grid.radii[i], grid.theta(j)), potential })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_integral_matches_closed_form() {
        let w = WeightField::from_fn(|r| 1.0 + 2.0 * r, 0.3, 1.0, 7).unwrap();
        let exact = (1.0f64 / 0.4).ln() + 2.0 * (1.0 - 0.4);
        assert!((w.log_integral(0.4, 1.0) - exact).abs() < 1e-13);
        assert!((w.log_integral(1.0, 0.4) + exact).abs() < 1e-13);
    }

    #[test]
    fn constant_weight_ring_value() {
        let (a, big_r, c) = (0.4, 0.7, 2.5);
        let w = WeightField::constant(c, a, 1.0).unwrap();
        let p = radial_ring_potential(&w, big_r, a).unwrap();
        let exact = c * (big_r / a).ln() * (1.0 / big_r).ln() / (2.0 * PI * (1.0 / a).ln());
        assert!((p.value_at_ring - exact).abs() < 1e-14);
        assert_eq!(p.eval(&w, a), 0.0);
        assert_eq!(p.eval(&w, 1.0), 0.0);
        assert!((p.eval(&w, big_r) - exact).abs() < 1e-14);
        assert!(p.h.windows(2).zip(p.r.windows(2)).all(|(h, r)| if r[1] <= big_r { h[1] >= h[0] } else { h[1] <= h[0] }));
        assert!(radial_ring_potential(&w, 1.1, a).is_err());
    }

    #[test]
    fn ring_energy_is_dirichlet_integral() {
        let w = WeightField::from_fn(|r| (r * r - 0.16).max(0.0) + 1e-3, 0.35, 1.0, 4000).unwrap();
        let p = radial_ring_potential(&w, 0.75, 0.35).unwrap();
        let q = p.energy_by_quadrature(&w);
        assert!((q - p.value_at_ring).abs() <= 1e-6 * p.value_at_ring, "{q} {}", p.value_at_ring);
    }

    #[test]
    fn zero_source_and_linearity() {
        let w = WeightField::from_fn(|r| 0.5 + r, 0.4, 1.0, 50).unwrap();
        let g = PolarGrid::annulus(0.4, 1.0, 24, 64).unwrap();
        let z = solve_poisson2d(&w, &vec![0.0; g.len()], &g).unwrap();
        assert!(z.h.iter().all(|v| *v == 0.0));
        assert_eq!(electro_energy(&z, &w), 0.0);
        let s1 = ring_source(&g, 0.6, 1.0, |_| 1.0).unwrap();
        let s2 = ring_source(&g, 0.85, 1.0, |t| 1.0 + 0.5 * t.cos()).unwrap();
        let both: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
        let (h1, h2, h12) = (solve_poisson2d(&w, &s1, &g).unwrap(), solve_poisson2d(&w, &s2, &g).unwrap(), solve_poisson2d(&w, &both, &g).unwrap());
        let scale = h12.h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..g.len() {
            assert!((h1.h[k] + h2.h[k] - h12.h[k]).abs() < 1e-8 * scale);
        }
        let s3: Vec<f64> = s1.iter().map(|v| 3.0 * v).collect();
        let h3 = solve_poisson2d(&w, &s3, &g).unwrap();
        assert!((electro_energy(&h3, &w) / electro_energy(&h1, &w) - 9.0).abs() < 1e-8);
        assert!(h1.min() >= -1e-12 && h2.min() >= -1e-12);
        assert!((electro_energy(&h1, &w) - h1.source_pairing).abs() < 1e-8 * h1.source_pairing);
    }

    #[test]
    fn renormalized_energy_minimum() {
        let e = renormalized_energy(0.0, -0.4, 0.007).unwrap();
        assert_eq!(e.value, 0.0);
        let f = |m: f64| m * m * 0.007 - 0.4 * m;
        let h = 1e-3;
        let k = (1..100_000).min_by(|a, b| f(*a as f64 * h).partial_cmp(&f(*b as f64 * h)).unwrap()).unwrap();
        let (m0, f0, f1, f2) = (k as f64 * h, f((k - 1) as f64 * h), f(k as f64 * h), f((k + 1) as f64 * h));
        let vertex = m0 - 0.5 * h * (f2 - f0) / (f2 - 2.0 * f1 + f0);
        assert!((vertex - e.mass_opt).abs() < 1e-8);
        assert!((renormalized_energy(e.mass_opt, -0.4, 0.007).unwrap().value - e.min_value).abs() < 1e-10);
        assert!(renormalized_energy(1.0, -0.4, 0.0).is_err());
    }

    #[test]
    fn vortex_number_edge_cases() {
        let r = crate::params::regime_from_omega1(0.03, 0.05).unwrap();
        assert_eq!(optimal_vortex_number(&r, 0.0, 0.01).unwrap().target, 0.0);
        assert!(matches!(optimal_vortex_number(&r, 0.1, 0.01), Err(Error::NoVortices(_))));
        let v = optimal_vortex_number(&r, -0.384, 0.00735).unwrap();
        assert!((v.target - 0.384 / (4.0 * PI * 0.00735)).abs() < 1e-12);
        assert_eq!(v.count.per_cell, 1);
        assert_eq!(v.count.cells, 4);
        let c = CellCount::for_target(&r, 200.0);
        assert_eq!(c.cells, c.nominal_cells);
        assert!(!c.reduced && c.per_cell >= 1);
    }
}
