use std::collections::VecDeque;
use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::DiscGrid;
use super::measures::Atom;
use crate::error::Result;
use crate::giant_vortex::GiantVortexState;

const TWO_PI: f64 = 2.0 * PI;
/// Samples on a detection circle.
const CIRCLE_SAMPLES: usize = 64;

/// Phase difference mapped to `(-pi, pi]`.
pub fn wrap(d: f64) -> f64 {
    let w = d.rem_euclid(TWO_PI);
    if w > PI {
        w - TWO_PI
    } else {
        w
    }
}

/// A node field valid on the rows `rows` of a disc grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedField {
    pub u: Vec<Complex64>,
    pub rows: Range<usize>,
}

impl ReducedField {
    /// Field valid on every row.
    pub fn full(u: Vec<Complex64>, grid: &DiscGrid) -> Self {
        ReducedField { u, rows: 0..grid.n_r() }
    }

    pub fn from_fn(grid: &DiscGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut u = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r() {
            for j in 0..grid.n_theta {
                let (x, y) = grid.xy(i, j);
                u.push(f(x, y));
            }
        }
        Self::full(u, grid)
    }
}

/// `u = psi / (g e^{i k theta})` on the annulus rows.
pub fn reduced_field(psi: &[Complex64], state: &GiantVortexState, grid: &DiscGrid) -> Result<ReducedField> {
    super::flow::check_alignment(state, grid)?;
    let a0 = grid.annulus_start;
    let k = state.winding as f64;
    let mut u = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (ia, g) in state.g.iter().enumerate() {
        let i = a0 + ia;
        for j in 0..grid.n_theta {
            let idx = grid.index(i, j);
            u[idx] = psi[idx] * Complex64::from_polar(1.0 / g, -k * grid.theta(j));
        }
    }
    Ok(ReducedField { u, rows: a0..grid.n_r() })
}

/// One cell of the dual mesh. Row `i` spans nodes `i` and `i + 1`; on the pole row it is a triangle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Plaquette {
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub theta: f64,
    pub area: f64,
    /// Counterclockwise circulation of `(iu, grad u)`; the integral of the vorticity over the plaquette.
    pub circulation: f64,
    /// Counterclockwise phase winding.
    pub winding: i32,
}

impl Plaquette {
    pub fn xy(&self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }

    pub fn density(&self) -> f64 {
        self.circulation / self.area
    }
}

/// Vorticity `curl (iu, grad u)` as plaquette integrals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VorticityField {
    pub n_theta: usize,
    pub first_row: usize,
    pub plaquettes: Vec<Plaquette>,
}

impl VorticityField {
    pub fn total(&self) -> f64 {
        self.plaquettes.iter().map(|p| p.circulation).sum()
    }

    /// Integral over plaquettes whose centers satisfy `keep`.
    pub fn integral(&self, keep: impl Fn(&Plaquette) -> bool) -> f64 {
        self.plaquettes.iter().filter(|p| keep(p)).map(|p| p.circulation).sum()
    }

    pub fn atoms(&self, radial: Range<f64>) -> Vec<Atom> {
        self.plaquettes
            .iter()
            .filter(|p| radial.contains(&p.r))
            .map(|p| Atom::polar(p.r, p.theta, p.circulation))
            .collect()
    }
}

fn loop_sums(values: &[Complex64]) -> (f64, f64) {
    let mut circ = 0.0;
    let mut phase = 0.0;
    for k in 0..values.len() {
        let (a, b) = (values[k], values[(k + 1) % values.len()]);
        if a.norm_sqr() == 0.0 || b.norm_sqr() == 0.0 {
            continue;
        }
        let d = wrap(b.arg() - a.arg());
        phase += d;
        circ += a.norm() * b.norm() * d;
    }
    (circ, phase)
}

/// Plaquette circulations of the current `|u_a||u_b| wrap(arg u_b - arg u_a)` on every dual cell inside `field.rows`.
pub fn intrinsic_vorticity(field: &ReducedField, grid: &DiscGrid) -> VorticityField {
    let n = grid.n_theta;
    let dt = grid.dtheta();
    let rows = field.rows.clone();
    let u = &field.u;
    let mut out = Vec::with_capacity((rows.len().saturating_sub(1)) * n);
    for i in rows.start..rows.end.saturating_sub(1) {
        let (r0, r1) = (grid.r(i), grid.r(i + 1));
        let area = 0.5 * (r1 * r1 - r0 * r0) * dt;
        for j in 0..n {
            let j1 = (j + 1) % n;
            let corners: Vec<Complex64> = if r0 == 0.0 {
                vec![u[grid.index(i, 0)], u[grid.index(i + 1, j)], u[grid.index(i + 1, j1)]]
            } else {
                vec![u[grid.index(i, j)], u[grid.index(i + 1, j)], u[grid.index(i + 1, j1)], u[grid.index(i, j1)]]
            };
            let (circulation, phase) = loop_sums(&corners);
            let rc = if r0 == 0.0 { 2.0 * r1 / 3.0 } else { 0.5 * (r0 + r1) };
            out.push(Plaquette {
                i,
                j,
                r: rc,
                theta: (j as f64 + 0.5) * dt,
                area,
                circulation,
                winding: (phase / TWO_PI).round() as i32,
            });
        }
    }
    VorticityField { n_theta: n, first_row: rows.start, plaquettes: out }
}

/// A detected vortex.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub theta: f64,
    pub degree: i32,
    /// Radius of the detection circle.
    pub radius: f64,
    /// Smallest `|u|` on the detection circle.
    pub min_modulus: f64,
    /// True when `|u| > 1 - 1/|log eps|` on the detection circle.
    pub confident: bool,
    /// Degree read from the phase along the detection circle.
    pub circle_degree: i32,
    /// `|int mu - 2 pi d| / (2 pi |d|)` over the detection disc.
    pub audit_error: f64,
}

/// Detection output: vorticity field, vortices, and the explicit measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VorticityData {
    pub vorticity: VorticityField,
    pub vortices: Vec<Vortex>,
    /// Radial window scanned for winding plaquettes.
    pub region: Range<f64>,
    /// Clusters of opposite windings summing to zero, dropped.
    pub neutral_clusters: usize,
}

impl VorticityData {
    pub fn total_degree(&self) -> i32 {
        self.vortices.iter().map(|v| v.degree).sum()
    }

    pub fn low_confidence(&self) -> usize {
        self.vortices.iter().filter(|v| !v.confident).count()
    }

    /// `2 pi sum d_j delta_{a_j}`.
    pub fn explicit_measure(&self) -> Vec<Atom> {
        self.vortices.iter().map(|v| Atom::new(v.x, v.y, TWO_PI * v.degree as f64)).collect()
    }
}

/// Winding scan over `region`, cluster merging, and detection-circle search.
pub fn detect_vortices(field: &ReducedField, grid: &DiscGrid, region: Range<f64>, log_eps: f64) -> VorticityData {
    let vorticity = intrinsic_vorticity(field, grid);
    let n = grid.n_theta;
    let first = vorticity.first_row;
    let n_rows = vorticity.plaquettes.len() / n.max(1);
    let at = |i: usize, j: usize| &vorticity.plaquettes[(i - first) * n + j];
    let flagged = |i: usize, j: usize| {
        let p = at(i, j);
        p.winding != 0 && region.contains(&p.r)
    };
    let mut seen = vec![false; vorticity.plaquettes.len()];
    let mut clusters: Vec<Vec<(usize, usize)>> = vec![];
    for i in first..first + n_rows {
        for j in 0..n {
            let k = (i - first) * n + j;
            if seen[k] || !flagged(i, j) {
                continue;
            }
            seen[k] = true;
            let mut members = vec![];
            let mut queue = VecDeque::from([(i, j)]);
            while let Some((a, b)) = queue.pop_front() {
                members.push((a, b));
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let ai = a as i64 + di;
                        if ai < first as i64 || ai >= (first + n_rows) as i64 {
                            continue;
                        }
                        let (ai, bj) = (ai as usize, (b as i64 + dj).rem_euclid(n as i64) as usize);
                        let kk = (ai - first) * n + bj;
                        if !seen[kk] && flagged(ai, bj) {
                            seen[kk] = true;
                            queue.push_back((ai, bj));
                        }
                    }
                }
            }
            clusters.push(members);
        }
    }
    let mut neutral = 0;
    let mut centers = vec![];
    for c in &clusters {
        let degree: i32 = c.iter().map(|&(i, j)| at(i, j).winding).sum();
        if degree == 0 {
            neutral += 1;
            continue;
        }
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for &(i, j) in c {
            let p = at(i, j);
            let w = p.winding.unsigned_abs() as f64;
            let (x, y) = p.xy();
            sx += w * x;
            sy += w * y;
            sw += w;
        }
        centers.push((sx / sw, sy / sw, degree));
    }
    let rows = &field.rows;
    let r_lo = grid.r(rows.start);
    let r_hi = grid.r(rows.end - 1);
    let h = {
        let nodes = &grid.radial.nodes[rows.start..rows.end];
        nodes.windows(2).fold(0.0f64, |m, p| m.max(p[1] - p[0]))
    };
    let level = 1.0 - 1.0 / log_eps;
    let vortices = centers
        .iter()
        .enumerate()
        .map(|(k, &(x, y, degree))| {
            let nearest = centers
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != k)
                .map(|(_, c)| (c.0 - x).hypot(c.1 - y))
                .fold(f64::INFINITY, f64::min);
            let limit = (0.5 * nearest).min(20.0 * h);
            let mut best: Option<(f64, f64, i32)> = None;
            let mut found = None;
            let mut rho = h;
            while rho <= limit + 1e-15 {
                let pts: Vec<(f64, f64)> =
                    (0..CIRCLE_SAMPLES).map(|s| s as f64 * TWO_PI / CIRCLE_SAMPLES as f64).map(|a| (x + rho * a.cos(), y + rho * a.sin())).collect();
                if pts.iter().all(|&(px, py)| {
                    let pr = px.hypot(py);
                    pr >= r_lo && pr <= r_hi
                }) {
                    let vals: Vec<Complex64> = pts
                        .iter()
                        .map(|&(px, py)| {
                            let (pr, pt) = super::grid::polar(px, py);
                            grid.sample(&field.u, pr, pt)
                        })
                        .collect();
                    let m = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
                    let (_, phase) = loop_sums(&vals);
                    let deg = (phase / TWO_PI).round() as i32;
                    if best.map_or(true, |b| m > b.1) {
                        best = Some((rho, m, deg));
                    }
                    if m > level {
                        found = Some((rho, m, deg));
                        break;
                    }
                }
                rho += h;
            }
            let (radius, min_modulus, circle_degree) = found.or(best).unwrap_or((h, 0.0, 0));
            let enclosed = vorticity.integral(|p| {
                let (px, py) = p.xy();
                (px - x).hypot(py - y) < radius
            });
            let (r, theta) = super::grid::polar(x, y);
            Vortex {
                x,
                y,
                r,
                theta,
                degree,
                radius,
                min_modulus,
                confident: found.is_some(),
                circle_degree,
                audit_error: (enclosed - TWO_PI * degree as f64).abs() / (TWO_PI * degree.unsigned_abs() as f64),
            }
        })
        .collect();
    VorticityData { vorticity, vortices, region, neutral_clusters: neutral }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap(0.25), 0.25);
    }

    #[test]
    fn constant_field_has_no_vorticity() {
        let grid = DiscGrid::uniform(20, 256).unwrap();
        let f = ReducedField::from_fn(&grid, |_, _| Complex64::new(1.0, 0.0));
        let v = intrinsic_vorticity(&f, &grid);
        assert!(v.plaquettes.iter().all(|p| p.circulation == 0.0 && p.winding == 0));
    }

    #[test]
    fn windings_add_up_to_the_boundary_loop() {
        let grid = DiscGrid::uniform(24, 256).unwrap();
        let f = ReducedField::from_fn(&grid, |x, y| {
            let a = Complex64::new(x - 0.3, y + 0.1);
            let b = Complex64::new(x + 0.2, y - 0.4).conj();
            let c = Complex64::new(x - 0.1, y - 0.5);
            a * b * c * Complex64::new(0.2, 1.0)
        });
        let v = intrinsic_vorticity(&f, &grid);
        let outer = grid.n_r() - 1;
        let ring: Vec<Complex64> = (0..grid.n_theta).map(|j| f.u[grid.index(outer, j)]).collect();
        let (_, phase) = loop_sums(&ring);
        let total: i32 = v.plaquettes.iter().map(|p| p.winding).sum();
        assert_eq!(total, (phase / TWO_PI).round() as i32);
        assert_eq!(total, 1);
    }
}
