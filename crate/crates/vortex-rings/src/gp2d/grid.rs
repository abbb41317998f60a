use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::giant_vortex::RadialGrid;

/// Polar grid on the unit disc: P1 lumped elements in `r` (node 0 is the pole)
/// and a uniform Fourier grid in `theta`.
#[derive(Clone)]
pub struct DiscGrid {
    pub radial: RadialGrid,
    pub n_theta: usize,
    /// Index of the first node of the annulus `[R_<, 1]`; 0 for a plain disc.
    pub annulus_start: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for DiscGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscGrid")
            .field("n_r", &self.radial.len())
            .field("n_theta", &self.n_theta)
            .field("annulus_start", &self.annulus_start)
            .finish()
    }
}

pub const MIN_ANGULAR: usize = 256;

impl DiscGrid {
    fn build(nodes: Vec<f64>, n_theta: usize, annulus_start: usize) -> Result<Self> {
        if n_theta < MIN_ANGULAR {
            return Err(Error::Resolution(format!("angular count {n_theta} < {MIN_ANGULAR}")));
        }
        if nodes[0] != 0.0 || (nodes.last().unwrap() - 1.0).abs() > 1e-14 || nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Domain("disc nodes must increase from 0 to 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(DiscGrid {
            radial: RadialGrid::from_nodes(nodes),
            n_theta,
            annulus_start,
            forward: planner.plan_fft_forward(n_theta),
            inverse: planner.plan_fft_inverse(n_theta),
        })
    }

    /// Uniform radial nodes `i / (n_r - 1)`.
    pub fn uniform(n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r < 8 {
            return Err(Error::Resolution(format!("need at least 8 radial nodes, got {n_r}")));
        }
        Self::build((0..n_r).map(|i| i as f64 / (n_r - 1) as f64).collect(), n_theta, 0)
    }

    /// The annulus nodes of `annulus` preceded by `hole_nodes` coarse nodes on `[0, R_<)`.
    /// With `None` the hole spacing is about four annulus spacings.
    pub fn for_annulus(annulus: &RadialGrid, n_theta: usize, hole_nodes: Option<usize>) -> Result<Self> {
        let inner = annulus.inner();
        if (annulus.nodes.last().unwrap() - 1.0).abs() > 1e-14 {
            return Err(Error::Domain("annulus grid must end at r = 1".into()));
        }
        let n_hole = hole_nodes.unwrap_or_else(|| ((inner / (4.0 * annulus.spacing())).ceil() as usize).max(8));
        let mut nodes: Vec<f64> = (0..n_hole).map(|k| inner * k as f64 / n_hole as f64).collect();
        nodes.extend_from_slice(&annulus.nodes);
        Self::build(nodes, n_theta, n_hole)
    }

    pub fn n_r(&self) -> usize {
        self.radial.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    pub fn r(&self, i: usize) -> f64 {
        self.radial.nodes[i]
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_theta as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn xy(&self, i: usize, j: usize) -> (f64, f64) {
        let (r, t) = (self.r(i), self.theta(j));
        (r * t.cos(), r * t.sin())
    }

    /// Angular wavenumber of FFT bin `k`; the Nyquist bin counts as negative.
    pub fn mode(&self, k: usize) -> i64 {
        if k < self.n_theta / 2 {
            k as i64
        } else {
            k as i64 - self.n_theta as i64
        }
    }

    /// Area carried by one node of row `i`.
    pub fn node_area(&self, i: usize) -> f64 {
        self.radial.weights[i] / self.n_theta as f64
    }

    /// Largest cell size in the annulus, radially or along the outer circle.
    pub fn annulus_spacing(&self) -> f64 {
        let nodes = &self.radial.nodes[self.annulus_start..];
        let dr = nodes.windows(2).fold(0.0f64, |m, p| m.max(p[1] - p[0]));
        dr.max(self.dtheta())
    }

    /// Number of cells across a length `t` at radius `r`.
    pub fn cells_across(&self, t: f64, r: f64) -> f64 {
        let nodes = &self.radial.nodes[self.annulus_start..];
        let dr = nodes.windows(2).fold(0.0f64, |m, p| m.max(p[1] - p[0]));
        t / dr.max(r * self.dtheta())
    }

    /// Per-row Fourier coefficients `(1/n) sum_j f_j e^{-i m theta_j}`; the pole row keeps mode 0 only.
    pub fn to_modes(&self, field: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_theta;
        let scale = 1.0 / n as f64;
        let mut out = field.to_vec();
        out.par_chunks_mut(n).for_each(|row| {
            self.forward.process(row);
            row.iter_mut().for_each(|v| *v *= scale);
        });
        if self.r(0) == 0.0 {
            out[1..n].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        out
    }

    pub fn from_modes(&self, modes: &[Complex64]) -> Vec<Complex64> {
        let mut out = modes.to_vec();
        out.par_chunks_mut(self.n_theta).for_each(|row| self.inverse.process(row));
        out
    }

    /// Spectral `d/dtheta` of a field given on whole rows.
    pub fn d_theta(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut m = field.to_vec();
        let n = self.n_theta;
        let scale = 1.0 / n as f64;
        m.par_chunks_mut(n).for_each(|row| {
            self.forward.process(row);
            for (k, v) in row.iter_mut().enumerate() {
                let w = if 2 * k == n { 0 } else { self.mode(k) };
                *v *= Complex64::new(0.0, w as f64 * scale);
            }
            self.inverse.process(row);
        });
        m
    }

    /// Bilinear interpolation in `(r, theta)` of a node field.
    pub fn sample(&self, field: &[Complex64], r: f64, theta: f64) -> Complex64 {
        let nodes = &self.radial.nodes;
        let i = crate::numerics::locate(nodes, r).min(self.n_r() - 2);
        let fr = ((r - nodes[i]) / (nodes[i + 1] - nodes[i])).clamp(0.0, 1.0);
        let t = theta.rem_euclid(2.0 * std::f64::consts::PI) / self.dtheta();
        let j = (t.floor() as usize) % self.n_theta;
        let ft = t - t.floor();
        let j1 = (j + 1) % self.n_theta;
        let v = |a: usize, b: usize| field[self.index(a, b)];
        (v(i, j) * (1.0 - ft) + v(i, j1) * ft) * (1.0 - fr) + (v(i + 1, j) * (1.0 - ft) + v(i + 1, j1) * ft) * fr
    }
}

/// Cartesian point to polar `(r, theta)` with `theta` in `[0, 2 pi)`.
pub fn polar(x: f64, y: f64) -> (f64, f64) {
    (x.hypot(y), y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI))
}
