use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{check_alignment, GpFunctional};
use super::grid::DiscGrid;
use super::vorticity::{ReducedField, VorticityData};
use crate::error::{Error, Result};
use crate::giant_vortex::GiantVortexState;
use crate::params::Regime;

const TWO_PI: f64 = 2.0 * PI;
/// Atoms used to represent the unit ring measure.
const RING_ATOMS: usize = 1024;
/// Simpson panels for the radial integrals of a test function.
const BUMP_PANELS: usize = 800;

/// Point mass of a discrete signed measure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(x: f64, y: f64, mass: f64) -> Self {
        Atom { x, y, mass }
    }

    pub fn polar(r: f64, theta: f64, mass: f64) -> Self {
        Atom { x: r * theta.cos(), y: r * theta.sin(), mass }
    }

    pub fn r(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn theta(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

/// Uniform measure of total mass `mass` on the circle of radius `radius`.
pub fn ring_measure(radius: f64, mass: f64) -> Vec<Atom> {
    (0..RING_ATOMS).map(|k| Atom::polar(radius, TWO_PI * k as f64 / RING_ATOMS as f64, mass / RING_ATOMS as f64)).collect()
}

/// Reduced energy `int g^2 |grad u|^2 - 2 g^2 B (iu, grad u) + g^4/eps^2 (1 - |u|^2)^2` on the annulus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ReducedEnergy {
    pub kinetic: f64,
    pub rotation: f64,
    pub interaction: f64,
    pub value: f64,
    /// Same functional with `(g_a^2 + g_b^2)/2` instead of `g_a g_b` on radial faces.
    pub alternative: f64,
    pub error_bar: f64,
}

fn annulus_rows(field: &ReducedField, state: &GiantVortexState, grid: &DiscGrid) -> Result<usize> {
    check_alignment(state, grid)?;
    let a0 = grid.annulus_start;
    if field.rows.start > a0 || field.rows.end < grid.n_r() {
        return Err(Error::Domain("reduced field must cover the annulus rows".into()));
    }
    Ok(a0)
}

pub fn reduced_energy(field: &ReducedField, state: &GiantVortexState, r: &Regime, grid: &DiscGrid) -> Result<ReducedEnergy> {
    let a0 = annulus_rows(field, state, grid)?;
    let ag = &state.grid;
    let n = grid.n_theta;
    let k = state.winding as f64;
    let inv_eps2 = 1.0 / (r.epsilon * r.epsilon);
    let modes = grid.to_modes(&field.u);
    let row = |ia: usize| &modes[grid.index(a0 + ia, 0)..grid.index(a0 + ia, 0) + n];
    let terms: Vec<[f64; 4]> = (0..ag.len())
        .into_par_iter()
        .map(|ia| {
            let g = state.g[ia];
            let rr = ag.nodes[ia];
            let w = ag.weights[ia];
            let b = r.omega * rr - k / rr;
            let here = row(ia);
            let (mut ang, mut rot) = (0.0, 0.0);
            for (kk, v) in here.iter().enumerate() {
                let m = grid.mode(kk) as f64;
                let a = v.norm_sqr();
                ang += m * m * a;
                rot += m * a;
            }
            let (mut face, mut face_alt) = (0.0, 0.0);
            if ia + 1 < ag.len() {
                let gb = state.g[ia + 1];
                let d: f64 = here.iter().zip(row(ia + 1)).map(|(a, c)| (c - a).norm_sqr()).sum();
                face = ag.faces[ia] * g * gb * d;
                face_alt = ag.faces[ia] * 0.5 * (g * g + gb * gb) * d;
            }
            let s = grid.index(a0 + ia, 0);
            let q: f64 = field.u[s..s + n].iter().map(|v| (1.0 - v.norm_sqr()).powi(2)).sum::<f64>() / n as f64;
            [
                face + w * g * g * ang / (rr * rr),
                face_alt + w * g * g * ang / (rr * rr),
                -2.0 * w * g * g * (b / rr) * rot,
                inv_eps2 * w * g.powi(4) * q,
            ]
        })
        .collect();
    let sum = |c: usize| terms.iter().map(|t| t[c]).sum::<f64>();
    let (kinetic, kinetic_alt, rotation, interaction) = (sum(0), sum(1), sum(2), sum(3));
    let value = kinetic + rotation + interaction;
    let alternative = kinetic_alt + rotation + interaction;
    Ok(ReducedEnergy { kinetic, rotation, interaction, value, alternative, error_bar: (alternative - value).abs() })
}

/// Discrete GP energy restricted to the annulus rows, with the annulus weights.
pub fn annulus_energy(psi: &[Complex64], state: &GiantVortexState, r: &Regime, grid: &DiscGrid) -> Result<f64> {
    check_alignment(state, grid)?;
    let a0 = grid.annulus_start;
    let ag = &state.grid;
    let n = grid.n_theta;
    let inv_eps2 = 1.0 / (r.epsilon * r.epsilon);
    let modes = grid.to_modes(psi);
    let row = |ia: usize| &modes[grid.index(a0 + ia, 0)..grid.index(a0 + ia, 0) + n];
    let e: f64 = (0..ag.len())
        .into_par_iter()
        .map(|ia| {
            let rr = ag.nodes[ia];
            let here = row(ia);
            let mut lin = 0.0;
            for (kk, v) in here.iter().enumerate() {
                let m = grid.mode(kk) as f64;
                lin += (m * m / (rr * rr) - 2.0 * r.omega * m) * v.norm_sqr();
            }
            let mut face = 0.0;
            if ia + 1 < ag.len() {
                face = ag.faces[ia] * here.iter().zip(row(ia + 1)).map(|(a, c)| (c - a).norm_sqr()).sum::<f64>();
            }
            let s = grid.index(a0 + ia, 0);
            let q: f64 = psi[s..s + n].iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n as f64;
            face + ag.weights[ia] * (lin + inv_eps2 * q)
        })
        .sum();
    Ok(e)
}

/// `E_GP[psi] = E_gv + E_red[u] + mu_gv (m_A - 1) + E_rest`; the last two vanish when `psi` is supported
/// in the annulus, vanishes on its inner row, and has unit mass there.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DecouplingReport {
    pub gp_energy: f64,
    pub giant_vortex_energy: f64,
    pub reduced: ReducedEnergy,
    /// `E_GP - E_gv - E_red`.
    pub residual: f64,
    pub error_bar: f64,
    /// Mass on the annulus rows, annulus weights.
    pub annulus_mass: f64,
    /// Energy of the hole rows and the hole side of the first annulus row.
    pub rest_energy: f64,
    /// `mu_gv (m_A - 1) + E_rest`.
    pub boundary_terms: f64,
    /// `residual - boundary_terms`; zero up to the radial EL residual.
    pub identity_defect: f64,
}

pub fn decoupling_check(psi: &[Complex64], state: &GiantVortexState, r: &Regime, grid: &DiscGrid) -> Result<DecouplingReport> {
    let u = super::vorticity::reduced_field(psi, state, grid)?;
    let reduced = reduced_energy(&u, state, r, grid)?;
    let gp_energy = GpFunctional::new(r, grid).energy(psi).total;
    let e_a = annulus_energy(psi, state, r, grid)?;
    let a0 = grid.annulus_start;
    let n = grid.n_theta;
    let annulus_mass: f64 = (0..state.grid.len())
        .map(|ia| {
            let s = grid.index(a0 + ia, 0);
            state.grid.weights[ia] * psi[s..s + n].iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64
        })
        .sum();
    let rest_energy = gp_energy - e_a;
    let residual = gp_energy - state.energy - reduced.value;
    let boundary_terms = state.mu_hat * (annulus_mass - 1.0) + rest_energy;
    Ok(DecouplingReport {
        gp_energy,
        giant_vortex_energy: state.energy,
        reduced,
        residual,
        error_bar: reduced.error_bar,
        annulus_mass,
        rest_energy,
        boundary_terms,
        identity_defect: residual - boundary_terms,
    })
}

/// Radial bump `cos^2(pi (r - c) / (2 s))` on `|r - c| < s`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RadialBump {
    pub center: f64,
    pub half_width: f64,
}

impl RadialBump {
    pub fn value(&self, r: f64) -> f64 {
        let x = (r - self.center) / self.half_width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            (0.5 * PI * x).cos().powi(2)
        }
    }

    pub fn slope(&self, r: f64) -> f64 {
        let x = (r - self.center) / self.half_width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            -0.5 * PI / self.half_width * (PI * x).sin()
        }
    }
}

/// Test functions `b(r) cos(n (theta - alpha))` with `n <= max_mode`; `alpha` is optimized in closed form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Dictionary {
    pub bumps: Vec<RadialBump>,
    pub max_mode: u32,
}

impl Dictionary {
    /// Bumps of support width `W/2, W/4, W/8` (W the width of `[r_bulk, 1]`) with centers
    /// `w/2` apart, plus a bump centered at `r_star` touching the nearer edge.
    pub fn standard(r_bulk: f64, r_star: Option<f64>) -> Self {
        let width = 1.0 - r_bulk;
        let mut bumps = vec![];
        for frac in [0.5, 0.25, 0.125] {
            let w = frac * width;
            let count = ((width - w) / (0.5 * w)).round() as usize;
            for k in 0..=count {
                bumps.push(RadialBump { center: r_bulk + 0.5 * w + 0.5 * w * k as f64, half_width: 0.5 * w });
            }
        }
        if let Some(rs) = r_star {
            let s = (rs - r_bulk).min(1.0 - rs);
            if s > 0.0 {
                bumps.push(RadialBump { center: rs, half_width: s });
            }
        }
        Dictionary { bumps, max_mode: 16 }
    }

    pub fn len(&self) -> usize {
        self.bumps.len() * (self.max_mode as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }
}

/// Best dictionary element for a measure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DualNorm {
    /// Lower bound of the weighted dual norm.
    pub value: f64,
    pub bump: RadialBump,
    pub mode: u32,
}

/// `(int g^-2 |grad phi|^2)^{1/2}` and `sup |grad phi|` for `b(r) cos(n theta)`.
fn denominators(bump: &RadialBump, n: u32, state: &GiantVortexState) -> (f64, f64) {
    let (a, b) = (bump.center - bump.half_width, bump.center + bump.half_width);
    let h = (b - a) / BUMP_PANELS as f64;
    let ang_sq = if n == 0 { TWO_PI } else { PI };
    let nn = n as f64;
    let mut integral = 0.0;
    let mut sup = 0.0f64;
    for k in 0..=BUMP_PANELS {
        let r = a + k as f64 * h;
        let (v, d) = (bump.value(r), bump.slope(r));
        let g2 = state.g_at(r).powi(2);
        let f = (d * d * ang_sq + v * v * nn * nn * PI / (r * r)) / g2 * r;
        let c = if k == 0 || k == BUMP_PANELS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += c * f;
        sup = sup.max(d.abs()).max(nn * v / r);
    }
    ((integral * h / 3.0).sqrt(), sup)
}

/// `max |int nu phi| / ((int g^-2 |grad phi|^2)^{1/2} + eps |log eps| sup |grad phi|)` over the dictionary.
pub fn weighted_dual_norm(nu: &[Atom], dict: &Dictionary, state: &GiantVortexState, r: &Regime) -> Result<DualNorm> {
    if dict.is_empty() {
        return Err(Error::Configuration("empty test-function dictionary".into()));
    }
    let scale = r.epsilon * r.log_eps;
    let polar: Vec<(f64, f64, f64)> = nu.iter().map(|a| (a.r(), a.theta(), a.mass)).collect();
    let best = dict
        .bumps
        .par_iter()
        .map(|bump| {
            let mut sums = vec![Complex64::new(0.0, 0.0); dict.max_mode as usize + 1];
            for &(rr, t, m) in &polar {
                let v = bump.value(rr);
                if v == 0.0 {
                    continue;
                }
                let step = Complex64::from_polar(1.0, t);
                let mut e = Complex64::new(m * v, 0.0);
                for s in sums.iter_mut() {
                    *s += e;
                    e *= step;
                }
            }
            let mut top = DualNorm { value: 0.0, bump: *bump, mode: 0 };
            for (n, s) in sums.iter().enumerate() {
                let (l2, sup) = denominators(bump, n as u32, state);
                let num = if n == 0 { s.re.abs() } else { s.norm() };
                let value = num / (l2 + scale * sup);
                if value > top.value {
                    top = DualNorm { value, bump: *bump, mode: n as u32 };
                }
            }
            top
        })
        .reduce(|| DualNorm { value: 0.0, bump: dict.bumps[0], mode: 0 }, |a, b| if b.value > a.value { b } else { a });
    Ok(best)
}

/// Radii and spacing of the detected vortices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RingStatistics {
    pub count: usize,
    pub total_degree: i32,
    pub negative: usize,
    pub mean_radius: f64,
    pub radius_spread: f64,
    /// Largest over smallest angular gap; `None` below two vortices.
    pub gap_ratio: Option<f64>,
}

pub fn ring_statistics(data: &VorticityData) -> RingStatistics {
    let v = &data.vortices;
    let count = v.len();
    let mean = if count > 0 { v.iter().map(|a| a.r).sum::<f64>() / count as f64 } else { f64::NAN };
    let spread = if count > 0 { (v.iter().map(|a| (a.r - mean).powi(2)).sum::<f64>() / count as f64).sqrt() } else { f64::NAN };
    let gap_ratio = (count >= 2).then(|| {
        let mut t: Vec<f64> = v.iter().map(|a| a.theta).collect();
        t.sort_by(|a, b| a.total_cmp(b));
        let mut gaps: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
        gaps.push(t[0] + TWO_PI - t[count - 1]);
        let max = gaps.iter().cloned().fold(0.0, f64::max);
        let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    });
    RingStatistics {
        count,
        total_degree: data.total_degree(),
        negative: v.iter().filter(|a| a.degree < 0).count(),
        mean_radius: mean,
        radius_spread: spread,
        gap_ratio,
    }
}

/// Dual-norm distances of the vorticity to the optimal ring measure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct VorticityComparison {
    /// `|| mu + H/(2I) delta_* ||`.
    pub intrinsic: f64,
    /// `|| mu_e + H/(2I) delta_* ||`.
    pub explicit: f64,
    /// `|| H/(2I) delta_* ||`.
    pub reference: f64,
    /// `Omega_1 / eps`.
    pub scale: f64,
    pub intrinsic_ratio: f64,
    pub explicit_ratio: f64,
    pub reference_ratio: f64,
    /// `-H/(4 pi I)`.
    pub predicted_count: f64,
    pub ring: RingStatistics,
}

pub fn vorticity_comparison(
    data: &VorticityData,
    h_rstar: f64,
    i_star: f64,
    r_star: f64,
    dict: &Dictionary,
    state: &GiantVortexState,
    r: &Regime,
) -> Result<VorticityComparison> {
    let ring = ring_measure(r_star, h_rstar / (2.0 * i_star));
    let r_bulk = dict.bumps.iter().map(|b| b.center - b.half_width).fold(f64::INFINITY, f64::min);
    let mut mu = data.vorticity.atoms(r_bulk..1.0);
    mu.extend_from_slice(&ring);
    let mut mu_e = data.explicit_measure();
    mu_e.extend_from_slice(&ring);
    let intrinsic = weighted_dual_norm(&mu, dict, state, r)?.value;
    let explicit = weighted_dual_norm(&mu_e, dict, state, r)?.value;
    let reference = weighted_dual_norm(&ring, dict, state, r)?.value;
    let scale = r.omega1 / r.epsilon;
    Ok(VorticityComparison {
        intrinsic,
        explicit,
        reference,
        scale,
        intrinsic_ratio: intrinsic / scale,
        explicit_ratio: explicit / scale,
        reference_ratio: reference / scale,
        predicted_count: -h_rstar / (4.0 * PI * i_star),
        ring: ring_statistics(data),
    })
}

/// Per-cell energies `int g^2 |grad u|^2 + g^4/eps^2 (1 - |u|^2)^2` against `eps^-1 |log eps| eps^-alpha`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellReport {
    pub n_cells: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub energies: Vec<f64>,
    pub bad: usize,
    pub bad_fraction: f64,
    pub total: f64,
    /// `total * eps^2`.
    pub total_scaled: f64,
}

/// `2 log|log eps| / |log eps|`.
pub fn default_alpha(log_eps: f64) -> f64 {
    2.0 * log_eps.ln() / log_eps
}

pub fn cell_diagnostics(
    field: &ReducedField,
    state: &GiantVortexState,
    r: &Regime,
    grid: &DiscGrid,
    n_cells: usize,
    alpha: f64,
) -> Result<CellReport> {
    if n_cells == 0 {
        return Err(Error::Domain("cell count must be positive".into()));
    }
    let a0 = annulus_rows(field, state, grid)?;
    let ag = &state.grid;
    let n = grid.n_theta;
    let inv_eps2 = 1.0 / (r.epsilon * r.epsilon);
    let du = grid.d_theta(&field.u);
    let cell_of = |j: usize| ((grid.theta(j) / (TWO_PI / n_cells as f64)).floor() as usize).min(n_cells - 1);
    let mut energies = vec![0.0; n_cells];
    for ia in 0..ag.len() {
        let (g, rr, w) = (state.g[ia], ag.nodes[ia], ag.weights[ia]);
        for j in 0..n {
            let idx = grid.index(a0 + ia, j);
            let u = field.u[idx];
            let mut e = w / n as f64 * (g * g * du[idx].norm_sqr() / (rr * rr) + inv_eps2 * g.powi(4) * (1.0 - u.norm_sqr()).powi(2));
            if ia + 1 < ag.len() {
                let ub = field.u[grid.index(a0 + ia + 1, j)];
                e += ag.faces[ia] * g * state.g[ia + 1] * (ub - u).norm_sqr() / n as f64;
            }
            energies[cell_of(j)] += e;
        }
    }
    let threshold = r.log_eps / r.epsilon * r.epsilon.powf(-alpha);
    let bad = energies.iter().filter(|&&e| e > threshold).count();
    let total: f64 = energies.iter().sum();
    Ok(CellReport {
        n_cells,
        alpha,
        threshold,
        bad,
        bad_fraction: bad as f64 / n_cells as f64,
        total,
        total_scaled: total * r.epsilon * r.epsilon,
        energies,
    })
}
