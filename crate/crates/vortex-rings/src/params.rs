//! Rotation regimes near the third critical speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical knobs of an experiment. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub epsilon: f64,
    pub omega: f64,
    /// Distance below the critical speed, in units of `1/(eps^2 |log eps|)`.
    pub omega1: f64,
    pub omega0: Option<f64>,
    pub log_eps: f64,
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(Error::Domain(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    Ok(())
}

/// Leading-order third critical speed `2/(3 pi eps^2 |log eps|)`.
pub fn critical_speed(epsilon: f64) -> Result<f64> {
    check_eps(epsilon)?;
    let l = -epsilon.ln();
    Ok(2.0 / (3.0 * std::f64::consts::PI * epsilon * epsilon * l))
}

/// Builds a regime from the subcriticality parameter.
///
/// `omega = 2/(3 pi eps^2 L) - omega1/(eps^2 L)` with `L = -ln eps`, evaluated
/// as `(2/(3 pi) - omega1) / (eps^2 L)`.
pub fn regime_from_omega1(epsilon: f64, omega1: f64) -> Result<Regime> {
    check_eps(epsilon)?;
    if !omega1.is_finite() {
        return Err(Error::Domain(format!("omega1 must be finite, got {omega1}")));
    }
    let l = -epsilon.ln();
    let omega = (2.0 / (3.0 * std::f64::consts::PI) - omega1) / (epsilon * epsilon * l);
    if omega <= 0.0 || !omega.is_finite() {
        return Err(Error::Regime(format!(
            "omega1 = {omega1} gives non-positive rotation speed {omega}"
        )));
    }
    Ok(Regime { epsilon, omega, omega1, omega0: None, log_eps: l })
}

/// Builds a regime from the rotation speed directly; `omega1` is read back.
pub fn regime_from_omega(epsilon: f64, omega: f64) -> Result<Regime> {
    check_eps(epsilon)?;
    if !omega.is_finite() || omega <= 0.0 {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    let l = -epsilon.ln();
    let omega1 = (critical_speed(epsilon)? - omega) * epsilon * epsilon * l;
    Ok(Regime { epsilon, omega, omega1, omega0: None, log_eps: l })
}

impl Regime {
    /// `[Omega]`, the integer part of the rotation speed.
    pub fn omega_floor(&self) -> i64 {
        self.omega.floor() as i64
    }

    /// `eps * Omega`.
    pub fn eps_omega(&self) -> f64 {
        self.epsilon * self.omega
    }

    /// Subcriticality read back from `omega`.
    pub fn omega1_from_omega(&self) -> f64 {
        let c = 2.0 / (3.0 * std::f64::consts::PI * self.epsilon * self.epsilon * self.log_eps);
        (c - self.omega) * self.epsilon * self.epsilon * self.log_eps
    }
}

/// Regime-validity ratios. Reported, never enforced.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegimeReport {
    pub omega1: f64,
    /// `omega1 |log eps| / log|log eps|`; should be large.
    pub subcriticality_ratio: f64,
    /// `Omega eps^2 |log eps|`; should lie in `(0, 2/(3 pi))`.
    pub scaled_speed: f64,
    pub scaled_speed_upper: f64,
    pub notes: Vec<String>,
}

pub fn validate_regime(r: &Regime) -> RegimeReport {
    let l = r.log_eps;
    let ratio = r.omega1 * l / l.ln();
    let scaled = r.omega * r.epsilon * r.epsilon * l;
    let upper = 2.0 / (3.0 * std::f64::consts::PI);
    let mut notes = Vec::new();
    if r.omega1 == 0.0 {
        notes.push("at threshold: omega1 = 0".to_string());
    } else if r.omega1 < 0.0 {
        notes.push("supercritical: omega1 < 0".to_string());
    }
    if l.ln() <= 0.0 {
        notes.push("log|log eps| <= 0: subcriticality ratio is not meaningful".to_string());
    }
    if !(scaled > 0.0 && scaled < upper) {
        notes.push("scaled speed outside (0, 2/(3 pi))".to_string());
    }
    RegimeReport { omega1: r.omega1, subcriticality_ratio: ratio, scaled_speed: scaled, scaled_speed_upper: upper, notes }
}
