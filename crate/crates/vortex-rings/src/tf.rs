//! Thomas-Fermi density, energies and the working radii of the annulus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Regime;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Thomas-Fermi minimizer: an annular density vanishing for `r <= r_h`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TFProfile {
    pub regime: Regime,
    pub r_h: f64,
    pub mu_tf: f64,
    pub e_tf: f64,
}

impl TFProfile {
    /// `(eps^2 Omega^2 / 2) (r^2 - R_h^2)_+`.
    pub fn density(&self, r: f64) -> f64 {
        let eo = self.regime.eps_omega();
        0.5 * eo * eo * (r * r - self.r_h * self.r_h).max(0.0)
    }

    /// Peak density, reached at the outer wall.
    pub fn max_density(&self) -> f64 {
        self.density(1.0)
    }

    /// `||rho||_2^2` in closed form.
    pub fn density_l2_squared(&self) -> f64 {
        let eo = self.regime.eps_omega();
        let w = 1.0 - self.r_h * self.r_h;
        // 2 pi int (eo^2/2)^2 (r^2-R^2)^2 r dr = pi (eo^4/4) w^3 / 3
        std::f64::consts::PI * eo.powi(4) * w.powi(3) / 12.0
    }
}

pub fn tf_profile(r: &Regime) -> Result<TFProfile> {
    let eo = r.eps_omega();
    if eo <= 2.0 / SQRT_PI {
        return Err(Error::NoHole { eps_omega: eo });
    }
    let r_h = (1.0 - 2.0 / (SQRT_PI * eo)).sqrt();
    let e_tf = -r.omega * r.omega * (1.0 - 4.0 / (3.0 * SQRT_PI * eo));
    let mut p = TFProfile { regime: *r, r_h, mu_tf: 0.0, e_tf };
    p.mu_tf = e_tf + p.density_l2_squared() / (r.epsilon * r.epsilon);
    Ok(p)
}

/// The Thomas-Fermi functional `int (-Omega^2 r^2 rho + eps^-2 rho^2)` of a radial density.
pub fn tf_functional<F: Fn(f64) -> f64>(r: &Regime, rho: F, from: f64, panels: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let e2 = r.epsilon * r.epsilon;
    crate::numerics::gauss_legendre(
        |s| {
            let d = rho(s);
            two_pi * s * (-r.omega * r.omega * s * s * d + d * d / e2)
        },
        from,
        1.0,
        panels,
    )
}

/// Working radii around the Thomas-Fermi hole.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AnnulusGeometry {
    pub r_h: f64,
    /// Inner edge of the computational annulus, `R_h - eps^{8/7}`.
    pub r_less: f64,
    /// Inner edge of the reduced annulus, `R_h + eps/|log eps|`.
    pub r_greater: f64,
    /// Inner edge of the bulk, `R_h + eps |log eps| omega1^{1/2}`.
    pub r_bulk: f64,
    pub width_a: f64,
    pub width_reduced: f64,
    pub width_bulk: f64,
    /// False when `R_bulk < R_>`, which happens for very small `omega1`.
    pub bulk_outside_reduced: bool,
}

impl AnnulusGeometry {
    /// `R_> + eps/|log eps|`, end of the inner ramp used in vortex-cost checks.
    pub fn r_cut_minus(&self, r: &Regime) -> f64 {
        self.r_greater + r.epsilon / r.log_eps
    }

    /// `R_h + eps^{5/6}`, where the modified density switches to Thomas-Fermi.
    pub fn r_bar(&self, r: &Regime) -> f64 {
        self.r_h + r.epsilon.powf(5.0 / 6.0)
    }

    /// `R_< + eps^2`, outer end of the boundary-layer cutoff.
    pub fn r_tilde(&self, r: &Regime) -> f64 {
        self.r_less + r.epsilon * r.epsilon
    }
}

pub fn annulus_geometry(r: &Regime, tf: &TFProfile) -> Result<AnnulusGeometry> {
    let r_h = tf.r_h;
    let r_less = r_h - r.epsilon.powf(8.0 / 7.0);
    let r_greater = r_h + r.epsilon / r.log_eps;
    let r_bulk = r_h + r.epsilon * r.log_eps * r.omega1.max(0.0).sqrt();
    if r_less <= 0.0 {
        return Err(Error::Geometry(format!("R_< = {r_less:.6} <= 0 (R_h too small for eps = {})", r.epsilon)));
    }
    if r_greater >= 1.0 {
        return Err(Error::Geometry(format!("R_> = {r_greater:.6} >= 1")));
    }
    if r_bulk >= 1.0 {
        return Err(Error::Geometry(format!("R_bulk = {r_bulk:.6} >= 1")));
    }
    Ok(AnnulusGeometry {
        r_h,
        r_less,
        r_greater,
        r_bulk,
        width_a: 1.0 - r_less,
        width_reduced: 1.0 - r_greater,
        width_bulk: 1.0 - r_bulk,
        bulk_outside_reduced: r_bulk >= r_greater,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{regime_from_omega, regime_from_omega1};

    #[test]
    fn hole_radius_at_eps_005() {
        let r = regime_from_omega(0.05, 28.335).unwrap();
        let tf = tf_profile(&r).unwrap();
        assert!((tf.r_h - 0.45117).abs() < 2e-4);
    }

    #[test]
    fn mass_and_energy_identities() {
        let r = regime_from_omega1(0.03, 0.05).unwrap();
        let tf = tf_profile(&r).unwrap();
        let mass = crate::numerics::gauss_legendre(|s| 2.0 * std::f64::consts::PI * s * tf.density(s), tf.r_h, 1.0, 40);
        assert!((mass - 1.0).abs() < 1e-10);
        let e = tf_functional(&r, |s| tf.density(s), tf.r_h, 40);
        assert!((e - tf.e_tf).abs() < 1e-8 * tf.e_tf.abs());
        let l2 = crate::numerics::gauss_legendre(|s| 2.0 * std::f64::consts::PI * s * tf.density(s).powi(2), tf.r_h, 1.0, 40);
        assert!((tf.mu_tf - (e + l2 / (r.epsilon * r.epsilon))).abs() < 1e-8 * tf.mu_tf.abs());
    }

    #[test]
    fn no_hole_is_reported() {
        let r = regime_from_omega1(0.05, 0.1).unwrap();
        assert!(matches!(tf_profile(&r), Err(Error::NoHole { .. })));
    }

    #[test]
    fn radii_at_eps_005() {
        let r = regime_from_omega1(0.05, 0.0).unwrap();
        let tf = tf_profile(&r).unwrap();
        let g = annulus_geometry(&r, &tf).unwrap();
        assert!((g.r_h - g.r_less - 0.05f64.powf(8.0 / 7.0)).abs() < 1e-14);
        assert!((g.r_less - 0.4187).abs() < 2e-4);
        assert!((g.r_greater - g.r_h - 0.01669).abs() < 1e-5);
        assert_eq!(g.r_bulk, g.r_h);
    }

    #[test]
    fn energy_tends_to_minus_omega_squared() {
        let mut last = f64::INFINITY;
        for eps in [0.05, 0.02, 0.01, 0.005] {
            let r = regime_from_omega1(eps, 0.02).unwrap();
            let tf = tf_profile(&r).unwrap();
            assert!(tf.e_tf < 0.0);
            let gap = (tf.e_tf / (-r.omega * r.omega) - 1.0).abs();
            assert!(gap < last);
            last = gap;
        }
    }

    proptest::proptest! {
        #[test]
        fn density_monotone_and_peaked_at_wall(eps in 0.01f64..0.05, om1 in 0.0f64..0.04, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let r = regime_from_omega1(eps, om1).unwrap();
            proptest::prop_assume!(tf_profile(&r).is_ok());
            let tf = tf_profile(&r).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            proptest::prop_assert!(tf.density(lo) <= tf.density(hi));
            proptest::prop_assert!(tf.density(hi) <= tf.max_density());
            proptest::prop_assert!(tf.density(lo) >= 0.0);
        }
    }
}
