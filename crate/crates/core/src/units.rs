//! Transition constants and the dimensionless unit system.
//!
//! Every kernel in this crate works in natural units of the transition:
//! lengths in `lambda0`, times in `1/Gamma0`, rates and Rabi frequencies in
//! `Gamma0`. SI quantities only appear at the boundary, through
//! [`TransitionSpec`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// D2 line of rubidium-87.
pub const RB87_D2_WAVELENGTH_M: f64 = 780.2e-9;
/// Natural linewidth of the D2 line in rad/s.
pub const RB87_D2_GAMMA_RAD_S: f64 = 2.0 * PI * 6.0e6;
/// Saturation intensity of the stretched D2 transition in W/m^2 (1.67 mW/cm^2).
pub const RB87_D2_ISAT_W_M2: f64 = 16.7;

/// Physical constants of the two-level transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSpec {
    lambda0: f64,
    gamma0: f64,
    isat: f64,
}

impl Default for TransitionSpec {
    fn default() -> Self {
        Self {
            lambda0: RB87_D2_WAVELENGTH_M,
            gamma0: RB87_D2_GAMMA_RAD_S,
            isat: RB87_D2_ISAT_W_M2,
        }
    }
}

impl TransitionSpec {
    pub fn new(lambda0: f64, gamma0: f64, isat: f64) -> Result<Self> {
        for (name, v) in [("lambda0", lambda0), ("gamma0", gamma0), ("isat", isat)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { lambda0, gamma0, isat })
    }

    /// Wavelength in metres.
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Linewidth in rad/s.
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Saturation intensity in W/m^2.
    pub fn isat(&self) -> f64 {
        self.isat
    }

    /// Wavenumber `2 pi / lambda0` in 1/m.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.lambda0
    }

    pub fn si_time_to_gamma_units(&self, seconds: f64) -> f64 {
        seconds * self.gamma0
    }

    pub fn gamma_units_to_si_time(&self, t: f64) -> f64 {
        t / self.gamma0
    }

    pub fn ns_to_gamma_units(&self, ns: f64) -> f64 {
        self.si_time_to_gamma_units(ns * 1e-9)
    }

    pub fn gamma_units_to_ns(&self, t: f64) -> f64 {
        self.gamma_units_to_si_time(t) * 1e9
    }

    pub fn si_length_to_lambda_units(&self, metres: f64) -> f64 {
        metres / self.lambda0
    }

    pub fn lambda_units_to_si_length(&self, x: f64) -> f64 {
        x * self.lambda0
    }

    /// Saturation parameter `I / Isat` for an intensity in W/m^2.
    pub fn saturation_parameter(&self, intensity: f64) -> f64 {
        intensity / self.isat
    }
}

/// Free-function form of [`TransitionSpec::si_time_to_gamma_units`].
pub fn si_time_to_gamma_units(seconds: f64, spec: &TransitionSpec) -> f64 {
    spec.si_time_to_gamma_units(seconds)
}

/// Resonant Rabi frequency (in units of `Gamma0`) for saturation parameter `s`:
/// `Omega = sqrt(s / 2)`.
pub fn saturation_to_rabi(s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("saturation parameter must be >= 0, got {s}")));
    }
    Ok((s / 2.0).sqrt())
}

/// Inverse of [`saturation_to_rabi`].
pub fn rabi_to_saturation(rabi: f64) -> Result<f64> {
    if !(rabi >= 0.0) || !rabi.is_finite() {
        return Err(Error::Domain(format!("Rabi frequency must be >= 0, got {rabi}")));
    }
    Ok(2.0 * rabi * rabi)
}
