//! Vortex cost function, rotation potential and the optimal ring radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::giant_vortex::{omega_tf, GiantVortexState};
use crate::numerics::{cumsimpson, cumtrapz, interp, locate};
use crate::params::Regime;
use crate::tf::{annulus_geometry, tf_profile, TFProfile};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Azimuthal rotation field `B(r) = Omega r - k / r` for winding `k`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RotationField {
    pub omega: f64,
    pub winding: f64,
}

impl RotationField {
    pub fn new(r: &Regime, winding: i64) -> Self {
        RotationField { omega: r.omega, winding: winding as f64 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.omega * r - self.winding / r
    }

    /// Radius where `B` changes sign, when it lies in `(inner, outer)`.
    pub fn sign_change(&self, inner: f64, outer: f64) -> Option<f64> {
        if self.winding <= 0.0 {
            return None;
        }
        let r0 = (self.winding / self.omega).sqrt();
        (r0 > inner && r0 < outer).then_some(r0)
    }
}

/// Cumulative rotation potential on the state's grid, with both quadratures.
fn potential_samples(state: &GiantVortexState) -> (Vec<f64>, Vec<f64>) {
    let b = RotationField::new(&state.regime, state.winding);
    let integrand: Vec<f64> = state.grid.nodes.iter().zip(&state.g).map(|(x, g)| 2.0 * g * g * b.eval(*x)).collect();
    (cumsimpson(&state.grid.nodes, &integrand), cumtrapz(&state.grid.nodes, &integrand))
}

fn check_range(state: &GiantVortexState, r: f64) -> Result<()> {
    let lo = state.grid.inner();
    if !(r >= lo && r <= 1.0 + 1e-14) {
        return Err(Error::Domain(format!("radius {r} outside [{lo}, 1]")));
    }
    Ok(())
}

/// `F(r) = 2 int_{R_<}^r g^2 B ds`.
pub fn potential_f(state: &GiantVortexState, r: f64) -> Result<f64> {
    check_range(state, r)?;
    let (f, _) = potential_samples(state);
    Ok(partial_integral(state, &f, r))
}

/// Cumulative value at `r`: exact at nodes, trapezoid on the partial interval.
fn partial_integral(state: &GiantVortexState, cum: &[f64], r: f64) -> f64 {
    let x = &state.grid.nodes;
    let i = locate(x, r);
    let b = RotationField::new(&state.regime, state.winding);
    let f = |s: f64| {
        let g = state.g_at(s);
        2.0 * g * g * b.eval(s)
    };
    cum[i] + 0.5 * (r - x[i]) * (f(x[i]) + f(r))
}

/// `H(r) = g(r)^2 |log eps| / 2 + F(r)`.
pub fn cost_h(state: &GiantVortexState, r: f64) -> Result<f64> {
    let f = potential_f(state, r)?;
    let g = state.g_at(r);
    Ok(0.5 * g * g * state.regime.log_eps + f)
}

/// Closed-form Thomas-Fermi potential and cost.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TfCost {
    pub tf: TFProfile,
    /// `[Omega] - omega_TF`.
    pub k_tf: f64,
}

impl TfCost {
    fn primitive(&self, s: f64) -> f64 {
        let om = self.tf.regime.omega;
        let rh2 = self.tf.r_h * self.tf.r_h;
        om * (s.powi(4) / 4.0 - rh2 * s * s / 2.0) - self.k_tf * (s * s / 2.0 - rh2 * s.ln())
    }

    /// `eps^2 Omega^2 int_{R_h}^r (Omega s - K/s)(s^2 - R_h^2) ds`, zero below `R_h`.
    pub fn f(&self, r: f64) -> f64 {
        if r <= self.tf.r_h {
            return 0.0;
        }
        let eo = self.tf.regime.eps_omega();
        eo * eo * (self.primitive(r) - self.primitive(self.tf.r_h))
    }

    pub fn h(&self, r: f64) -> f64 {
        0.5 * self.tf.regime.log_eps * self.tf.density(r) + self.f(r)
    }

    /// Integrand of `f`, for quadrature cross-checks.
    pub fn f_integrand(&self, s: f64) -> f64 {
        let eo = self.tf.regime.eps_omega();
        let om = self.tf.regime.omega;
        let rh2 = self.tf.r_h * self.tf.r_h;
        eo * eo * (om * s - self.k_tf / s) * (s * s - rh2).max(0.0)
    }
}

pub fn tf_cost(r: &Regime) -> Result<TfCost> {
    let tf = tf_profile(r)?;
    Ok(TfCost { tf, k_tf: r.omega_floor() as f64 - omega_tf(r.epsilon) })
}

/// Rescaled cost `k(z) = z (2/pi - 3 omega1 - 2 z (2/sqrt(pi) - z))` on `[0, 2/sqrt(pi)]`.
pub fn rescaled_cost(r: &Regime, z: f64) -> Result<f64> {
    if !(0.0..=2.0 / SQRT_PI).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, 2/sqrt(pi)]")));
    }
    Ok(k_poly(r.omega1, z))
}

pub fn k_poly(omega1: f64, z: f64) -> f64 {
    z * (2.0 / std::f64::consts::PI - 3.0 * omega1 - 2.0 * z * (2.0 / SQRT_PI - z))
}

pub fn k_prime(omega1: f64, z: f64) -> f64 {
    (2.0 / std::f64::consts::PI - 3.0 * omega1) - 8.0 / SQRT_PI * z + 6.0 * z * z
}

pub fn k_second(z: f64) -> f64 {
    12.0 * z - 8.0 / SQRT_PI
}

/// Critical points of the rescaled cost and the ring radius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RingLocation {
    pub z1: f64,
    pub z2: f64,
    pub r_star: f64,
    pub k_at_z2: f64,
}

pub fn critical_points(omega1: f64) -> (f64, f64) {
    let c = 2.0 / (3.0 * SQRT_PI);
    let s = (1.0 / (9.0 * std::f64::consts::PI) + omega1 / 2.0).sqrt();
    (c - s, c + s)
}

pub fn ring_radius(r: &Regime) -> Result<RingLocation> {
    if r.omega1 <= 0.0 {
        return Err(Error::NoRing(format!("omega1 = {} <= 0: the rescaled cost has no negative interior minimum", r.omega1)));
    }
    let tf = tf_profile(r)?;
    let (z1, z2) = critical_points(r.omega1);
    let r_star = (tf.r_h * tf.r_h + z2 / r.eps_omega()).sqrt();
    if r_star >= 1.0 {
        return Err(Error::NoRing(format!("R* = {r_star} lies outside the trap")));
    }
    Ok(RingLocation { z1, z2, r_star, k_at_z2: k_poly(r.omega1, z2) })
}

/// Sampled cost functions together with the ring location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostProfile {
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    pub f_tf: Vec<f64>,
    pub h_tf: Vec<f64>,
    /// Max of `|F_simpson - F_trapezoid|` relative to `sup |F|`.
    pub quadrature_error: f64,
    pub ring: Option<RingLocation>,
    pub h_at_rstar: Option<f64>,
    pub h_tf_at_rstar: Option<f64>,
    pub f_at_rstar: Option<f64>,
    pub g2_at_rstar: Option<f64>,
}

impl CostProfile {
    pub fn h_at(&self, x: f64) -> f64 {
        interp(&self.r, &self.h, x)
    }

    pub fn f_at(&self, x: f64) -> f64 {
        interp(&self.r, &self.f, x)
    }

    pub fn r_star(&self) -> Result<f64> {
        self.ring.map(|l| l.r_star).ok_or_else(|| Error::NoRing("no ring radius in this regime".into()))
    }

    pub fn h_star(&self) -> Result<f64> {
        self.h_at_rstar.ok_or_else(|| Error::NoRing("no ring radius in this regime".into()))
    }

    /// Node of minimal `H`.
    pub fn argmin_h(&self) -> f64 {
        let i = (0..self.h.len()).min_by(|a, b| self.h[*a].partial_cmp(&self.h[*b]).unwrap()).unwrap();
        self.r[i]
    }
}

pub fn cost_profile(state: &GiantVortexState) -> Result<CostProfile> {
    let reg = state.regime;
    let (f, ftrap) = potential_samples(state);
    let l = reg.log_eps;
    let h: Vec<f64> = f.iter().zip(&state.g).map(|(f, g)| 0.5 * g * g * l + f).collect();
    let tfc = tf_cost(&reg)?;
    let f_tf: Vec<f64> = state.grid.nodes.iter().map(|x| tfc.f(*x)).collect();
    let h_tf: Vec<f64> = state.grid.nodes.iter().map(|x| tfc.h(*x)).collect();
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let qe = f.iter().zip(&ftrap).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / sup;
    let ring = ring_radius(&reg).ok();
    let (mut hs, mut hts, mut fs, mut g2s) = (None, None, None, None);
    if let Some(loc) = ring {
        let fr = partial_integral(state, &f, loc.r_star);
        let g = state.g_at(loc.r_star);
        fs = Some(fr);
        g2s = Some(g * g);
        hs = Some(0.5 * g * g * l + fr);
        hts = Some(tfc.h(loc.r_star));
    }
    Ok(CostProfile {
        r: state.grid.nodes.clone(),
        f,
        h,
        f_tf,
        h_tf,
        quadrature_error: qe,
        ring,
        h_at_rstar: hs,
        h_tf_at_rstar: hts,
        f_at_rstar: fs,
        g2_at_rstar: g2s,
    })
}

/// Brute-force argmin of the closed-form `H^TF` on `cells` equal intervals of `[R_h, 1]`.
pub fn tf_cost_argmin(r: &Regime, cells: usize) -> Result<(f64, f64)> {
    let tfc = tf_cost(r)?;
    let rh = tfc.tf.r_h;
    let h = (1.0 - rh) / cells as f64;
    let best = (0..=cells)
        .map(|i| rh + i as f64 * h)
        .min_by(|a, b| tfc.h(*a).partial_cmp(&tfc.h(*b)).unwrap())
        .unwrap();
    Ok((best, h))
}

/// Sup-norm comparison of computed and Thomas-Fermi costs on `[R_>, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostComparison {
    pub sup_density: f64,
    pub sup_f: f64,
    pub sup_h: f64,
    /// Sup quantities divided by `|log eps|^{5/2} eps^{-1/2}`, `1/(eps |log eps|)`, `1/(eps |log eps|)`.
    pub density_constant: f64,
    pub f_constant: f64,
    pub h_constant: f64,
}

pub fn compare_costs(state: &GiantVortexState, r: &Regime) -> Result<CostComparison> {
    let cp = cost_profile(state)?;
    let tf = tf_profile(r)?;
    let geo = annulus_geometry(r, &tf)?;
    let mut sd: f64 = 0.0;
    let mut sf: f64 = 0.0;
    let mut sh: f64 = 0.0;
    for (i, x) in cp.r.iter().enumerate() {
        if *x < geo.r_greater {
            continue;
        }
        sd = sd.max((state.g[i] * state.g[i] - tf.density(*x)).abs());
        sf = sf.max((cp.f[i] - cp.f_tf[i]).abs());
        sh = sh.max((cp.h[i] - cp.h_tf[i]).abs());
    }
    let l = r.log_eps;
    let e = r.epsilon;
    Ok(CostComparison {
        sup_density: sd,
        sup_f: sf,
        sup_h: sh,
        density_constant: sd / (l.powf(2.5) / e.sqrt()),
        f_constant: sf * e * l,
        h_constant: sh * e * l,
    })
}

/// One sampled vortex position and degree with its cost estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VortexCostSample {
    pub radius: f64,
    pub degree: i64,
    /// `|d| g^2 |log eps| / 2 + d F(r)`.
    pub cost: f64,
    /// Near-wall quantity with the inner ramp applied to `F`.
    pub outer_layer: Option<f64>,
    /// `cost - |d| H(R*)`.
    pub ring_margin: Option<f64>,
    /// `cost / (|d| omega1^{1/2} / eps)` away from the ring.
    pub fitted_constant: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VortexCostReport {
    pub samples: Vec<VortexCostSample>,
    pub worst_outer_layer: f64,
    pub worst_ring_margin: f64,
    pub min_fitted_constant: f64,
}

/// Inner ramp: 0 below `R_>`, 1 above `R_cut-`, C1 smoothstep in between.
pub fn inner_ramp(x: f64, start: f64, end: f64) -> f64 {
    let s = ((x - start) / (end - start)).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

pub fn vortex_cost_bounds(state: &GiantVortexState, r: &Regime, samples: &[(f64, i64)]) -> Result<VortexCostReport> {
    let tf = tf_profile(r)?;
    let geo = annulus_geometry(r, &tf)?;
    let cp = cost_profile(state)?;
    let l = r.log_eps;
    let near_wall = geo.r_less + r.epsilon * l * r.omega1.max(0.0).sqrt();
    let r_cut = geo.r_cut_minus(r);
    let mut out = Vec::with_capacity(samples.len());
    let (mut wo, mut wr, mut mc) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for &(x, d) in samples {
        check_range(state, x)?;
        let g2 = state.g_at(x).powi(2);
        let f = potential_f(state, x)?;
        let ad = d.unsigned_abs() as f64;
        let cost = 0.5 * ad * g2 * l + d as f64 * f;
        let outer_layer = (x <= near_wall || x < r_cut).then(|| {
            0.5 * ad * g2 * l * (1.0 - l.ln() / l) + d as f64 * inner_ramp(x, geo.r_greater, r_cut) * f
        });
        let ring_margin = cp.h_at_rstar.filter(|_| x >= geo.r_bulk).map(|hs| cost - ad * hs);
        let fitted = match cp.ring {
            Some(loc) if d != 0 && r.omega1 > 0.0 && (x - loc.r_star).abs() >= r.epsilon * l * r.omega1.powf(0.25) && x >= geo.r_bulk => {
                Some(cost / (ad * r.omega1.sqrt() / r.epsilon))
            }
            _ => None,
        };
        if let Some(v) = outer_layer {
            wo = wo.min(v);
        }
        if let Some(v) = ring_margin {
            wr = wr.min(v);
        }
        if let Some(v) = fitted {
            mc = mc.min(v);
        }
        out.push(VortexCostSample { radius: x, degree: d, cost, outer_layer, ring_margin, fitted_constant: fitted });
    }
    Ok(VortexCostReport { samples: out, worst_outer_layer: wo, worst_ring_margin: wr, min_fitted_constant: mc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::giant_vortex::{optimal_winding, RadialGrid};
    use crate::numerics::gauss_legendre;
    use crate::params::regime_from_omega1;

    fn state(eps: f64, om1: f64, n: usize) -> GiantVortexState {
        let r = regime_from_omega1(eps, om1).unwrap();
        let tf = tf_profile(&r).unwrap();
        let geo = annulus_geometry(&r, &tf).unwrap();
        optimal_winding(&r, &RadialGrid::new(geo.r_less, n).unwrap()).unwrap().1
    }

    #[test]
    fn k_values_at_omega1_01() {
        let (_, z2) = critical_points(0.1);
        assert!((z2 - 0.66831).abs() < 1e-5);
        // brute-force minimization of k on a 1e-6 grid
        let mut best = (0.0, f64::INFINITY);
        let n = (2.0 / SQRT_PI / 1e-6) as usize;
        for i in 0..=n {
            let z = i as f64 * 1e-6;
            let v = k_poly(0.1, z);
            if v < best.1 {
                best = (z, v);
            }
        }
        assert!((best.0 - z2).abs() < 2e-6);
        assert!((k_poly(0.1, z2) - best.1).abs() < 1e-10);
        assert!((k_poly(0.1, z2) + 0.18604).abs() < 1e-4);
        let lead = -3.0 * 0.1 / SQRT_PI;
        assert!((lead + 0.16926).abs() < 1e-5);
        assert!((k_poly(0.1, z2) - lead).abs() <= 2.0 * 0.01);
        let r = regime_from_omega1(0.05, 0.1).unwrap();
        assert_eq!(rescaled_cost(&r, 0.0).unwrap(), 0.0);
        assert!(rescaled_cost(&r, 1.2).is_err());
    }

    #[test]
    fn critical_points_are_stationary() {
        for om1 in [0.02, 0.05, 0.1] {
            let (z1, z2) = critical_points(om1);
            assert!(k_prime(om1, z1).abs() < 1e-12 && k_prime(om1, z2).abs() < 1e-12);
            assert!(k_second(z2) > 0.0 && k_second(z1) < 0.0);
            assert!(z1 > 0.0 && z2 < 2.0 / SQRT_PI);
        }
        let (_, z2) = critical_points(0.0);
        assert!((z2 - 1.0 / SQRT_PI).abs() < 1e-14);
    }

    #[test]
    fn ring_needs_positive_omega1() {
        let r = regime_from_omega1(0.03, -0.05).unwrap();
        assert!(matches!(ring_radius(&r), Err(Error::NoRing(_))));
        let r = regime_from_omega1(0.05, 0.1).unwrap();
        assert!(matches!(ring_radius(&r), Err(Error::NoHole { .. })));
    }

    #[test]
    fn tf_potential_matches_quadrature() {
        let r = regime_from_omega1(0.03, 0.05).unwrap();
        let t = tf_cost(&r).unwrap();
        assert_eq!(t.f(t.tf.r_h), 0.0);
        for x in [0.6, 0.75, 0.9, 1.0] {
            let q = gauss_legendre(|s| t.f_integrand(s), t.tf.r_h, x, 50);
            assert!((q - t.f(x)).abs() <= 1e-9 * t.f(x).abs().max(1.0));
        }
    }

    #[test]
    fn tf_potential_leading_order_shrinks() {
        let z = 0.5;
        let mut last = f64::INFINITY;
        for eps in [0.03, 0.01, 0.003, 0.001] {
            let r = regime_from_omega1(eps, 0.05).unwrap();
            let t = tf_cost(&r).unwrap();
            let x = (t.tf.r_h.powi(2) + z / r.eps_omega()).sqrt();
            let gap = (eps * t.f(x) - z * z * (z - 2.0 / SQRT_PI) / 6.0).abs();
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn potential_identities() {
        let s = state(0.05, 0.02, 600);
        let cp = cost_profile(&s).unwrap();
        assert_eq!(cp.f[0], 0.0);
        assert_eq!(potential_f(&s, s.grid.inner()).unwrap(), 0.0);
        assert!(cp.f.last().unwrap().abs() <= 10.0);
        assert!(cp.quadrature_error < 1e-4, "{}", cp.quadrature_error);
        let l = s.regime.log_eps;
        for (i, g) in s.g.iter().enumerate() {
            assert!((cp.h[i] - cp.f[i] - 0.5 * g * g * l).abs() <= 1e-12 * cp.h[i].abs().max(1.0));
        }
        // F' = 2 g^2 B away from the ends
        let b = RotationField::new(&s.regime, s.winding);
        let scale = s.grid.nodes.iter().zip(&s.g).fold(0.0f64, |m, (x, g)| m.max((2.0 * g * g * b.eval(*x)).abs()));
        for i in (50..550).step_by(50) {
            let x = &s.grid.nodes;
            let d = (cp.f[i + 1] - cp.f[i - 1]) / (x[i + 1] - x[i - 1]);
            let e = 2.0 * s.g[i] * s.g[i] * b.eval(x[i]);
            assert!((d - e).abs() <= 1e-4 * scale, "{d} vs {e}");
        }
        assert!(potential_f(&s, 1.2).is_err());
        let cmp = compare_costs(&s, &s.regime).unwrap();
        assert!(cmp.f_constant.is_finite() && cmp.density_constant.is_finite());
    }

    #[test]
    fn cost_sign_conventions() {
        let s = state(0.05, 0.02, 400);
        let cp = cost_profile(&s).unwrap();
        let loc = cp.ring.unwrap();
        let rep = vortex_cost_bounds(&s, &s.regime, &[(loc.r_star, 1), (loc.r_star, -1), (loc.r_star, 0)]).unwrap();
        assert!(rep.samples[0].cost < 0.0);
        assert!((rep.samples[0].cost - cp.h_at_rstar.unwrap()).abs() < 1e-9);
        assert!(rep.samples[1].cost > 0.0);
        assert_eq!(rep.samples[2].cost, 0.0);
    }

    #[test]
    fn rotation_field_sign_change() {
        let b = RotationField { omega: 25.0, winding: 4.0 };
        let r0 = b.sign_change(0.1, 1.0).unwrap();
        assert!(b.eval(r0).abs() < 1e-12);
    }
}
