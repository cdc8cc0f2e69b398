//! Patient parameter sets.

use crate::{Error, Result};
use alloc::string::ToString;

/// Constants of the tumor/immune model plus the nominal delivery fractions
/// assumed by the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientParams {
    /// Tumor growth rate.
    pub mu_c: f64,
    /// Tumor-stimulated immune proliferation rate.
    pub mu_i: f64,
    /// Immune cell influx rate.
    pub alpha: f64,
    /// Inverse threshold.
    pub beta: f64,
    /// Tumor/immune interaction rate.
    pub gamma: f64,
    /// Immune cell death rate.
    pub delta: f64,
    /// Nominal fraction of chemotherapy delivered to the tumor, in `[0, 1]`.
    pub eta_x_nom: f64,
    /// Nominal fraction of immunotherapy delivered, in `[0, 1]`.
    pub eta_y_nom: f64,
    /// Carrying capacity.
    pub x_inf: f64,
}

pub const TABLE_VERBATIM: &str = "table-verbatim";
pub const EQUILIBRIA_CALIBRATED: &str = "equilibria-calibrated";

/// Names accepted by [`PatientParams::preset`].
pub const PRESET_NAMES: [&str; 2] = [TABLE_VERBATIM, EQUILIBRIA_CALIBRATED];

impl PatientParams {
    /// The published parameter table taken literally (unscaled cell counts,
    /// inverse threshold read as `0.0031`).
    ///
    /// These values are dimensionally inconsistent with the benign, saddle
    /// and malignant rest points the model is known for; they are kept for
    /// reference and are not used by any scenario.
    pub fn table_verbatim() -> Self {
        PatientParams {
            mu_c: 1.0078e7,
            mu_i: 0.0029,
            alpha: 0.0827,
            beta: 0.0031,
            gamma: 1e7,
            delta: 0.1873,
            eta_x_nom: 0.5,
            eta_y_nom: 0.5,
            x_inf: 780e6,
        }
    }

    /// Model-scaled parameters (`x` in units of 10^6 cells).
    ///
    /// `gamma`, `x_inf` and `delta` follow the usual Stepanova scaling and
    /// `mu_c / gamma` is set so that the tumor nullcline
    /// `y = (mu_c / gamma) ln(x_inf / x)` passes through (73, 1.32).
    /// `mu_i`, `beta` and `alpha` were reverse-engineered: they solve the
    /// linear system that makes the immune nullcline pass through the rest
    /// points at x = 73, 356.2 and 737.3. The resulting equilibria are
    /// (72.998, 1.320), (356.21, 0.437) and (737.30, 0.031).
    pub fn equilibria_calibrated() -> Self {
        PatientParams {
            mu_c: 0.5572,
            mu_i: 0.0024224,
            alpha: 0.05872,
            beta: 0.0026354,
            gamma: 1.0,
            delta: 0.1873,
            eta_x_nom: 0.5,
            eta_y_nom: 0.5,
            x_inf: 780.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            TABLE_VERBATIM => Ok(Self::table_verbatim()),
            EQUILIBRIA_CALIBRATED => Ok(Self::equilibria_calibrated()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.mu_c, "mu_c must be > 0"),
            (self.mu_i, "mu_i must be > 0"),
            (self.alpha, "alpha must be > 0"),
            (self.beta, "beta must be > 0"),
            (self.gamma, "gamma must be > 0"),
            (self.delta, "delta must be > 0"),
            (self.x_inf, "x_inf must be > 0"),
        ];
        for (value, msg) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParams(msg));
            }
        }
        for (eta, msg) in [
            (self.eta_x_nom, "eta_x_nom must lie in [0, 1]"),
            (self.eta_y_nom, "eta_y_nom must lie in [0, 1]"),
        ] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidParams(msg));
            }
        }
        Ok(())
    }
}

impl Default for PatientParams {
    fn default() -> Self {
        Self::equilibria_calibrated()
    }
}
