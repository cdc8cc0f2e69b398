//! Time profiles of the drug delivery fractions `eta_x(t)`, `eta_y(t)`.

use crate::{Error, Result};
use alloc::vec::Vec;
use libm::{floor, sin};

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceProfile {
    Constant(f64),
    /// `levels[0]` until `switch_times[0]`, then `levels[1]`, and so on.
    PiecewiseConstant {
        levels: Vec<f64>,
        switch_times: Vec<f64>,
    },
    /// `mean + amplitude sin(2 pi t / period + phase)`, clamped to
    /// `[lower, upper]`.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
        lower: f64,
        upper: f64,
    },
    /// Zero-order hold over `values[k]` on `[k dt, (k + 1) dt)`; the last
    /// value is held past the end.
    Sampled {
        dt: f64,
        values: Vec<f64>,
    },
}

/// Profile value at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSample {
    pub value: f64,
    /// The raw profile left `[0, 1]` and was clamped.
    pub clamped: bool,
}

impl DisturbanceProfile {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match self {
            DisturbanceProfile::Constant(v) if !finite(*v) => {
                Err(Error::InvalidArgument("constant eta must be finite"))
            }
            DisturbanceProfile::PiecewiseConstant {
                levels,
                switch_times,
            } => {
                if levels.len() != switch_times.len() + 1 {
                    return Err(Error::InvalidArgument(
                        "piecewise eta needs exactly one more level than switch times",
                    ));
                }
                if !switch_times.windows(2).all(|w| w[0] < w[1])
                    || !levels.iter().chain(switch_times).all(|&v| finite(v))
                {
                    return Err(Error::InvalidArgument(
                        "switch times must increase strictly",
                    ));
                }
                Ok(())
            }
            DisturbanceProfile::Sinusoidal {
                period,
                lower,
                upper,
                mean,
                amplitude,
                phase,
            } => {
                if !(*period > 0.0) || !(lower <= upper) {
                    return Err(Error::InvalidArgument(
                        "sinusoid needs period > 0, lower <= upper",
                    ));
                }
                if ![*mean, *amplitude, *phase].into_iter().all(finite) {
                    return Err(Error::InvalidArgument("sinusoid parameters must be finite"));
                }
                Ok(())
            }
            DisturbanceProfile::Sampled { dt, values } => {
                if !(*dt > 0.0) || values.is_empty() || !values.iter().all(|&v| finite(v)) {
                    return Err(Error::InvalidArgument(
                        "sampled eta needs dt > 0 and finite values",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn raw(&self, t: f64) -> f64 {
        match self {
            DisturbanceProfile::Constant(v) => *v,
            DisturbanceProfile::PiecewiseConstant {
                levels,
                switch_times,
            } => {
                let idx = switch_times.iter().take_while(|&&s| t >= s).count();
                levels[idx]
            }
            DisturbanceProfile::Sinusoidal {
                mean,
                amplitude,
                period,
                phase,
                lower,
                upper,
            } => {
                let v = mean + amplitude * sin(2.0 * core::f64::consts::PI * t / period + phase);
                v.clamp(*lower, *upper)
            }
            DisturbanceProfile::Sampled { dt, values } => {
                let k = floor(t / dt).max(0.0) as usize;
                values[k.min(values.len() - 1)]
            }
        }
    }

    /// Profile value at `t`, clamped to `[0, 1]`.
    pub fn eval(&self, t: f64) -> EtaSample {
        let raw = self.raw(t);
        let value = raw.clamp(0.0, 1.0);
        EtaSample {
            value,
            clamped: value != raw,
        }
    }
}

/// Stand-in for the fluctuating chemo delivery of the very-sick experiment:
/// 0.5, dropping to 0.2 at day 10 and rising to 0.6 at day 20.
pub fn very_sick_eta_x() -> DisturbanceProfile {
    DisturbanceProfile::PiecewiseConstant {
        levels: alloc::vec![0.5, 0.2, 0.6],
        switch_times: alloc::vec![10.0, 20.0],
    }
}

/// Stand-in for the violently fluctuating immuno delivery:
/// `0.5 + 0.35 sin(2 pi t / 3)` clamped to `[0.05, 1]`.
pub fn very_sick_eta_y() -> DisturbanceProfile {
    DisturbanceProfile::Sinusoidal {
        mean: 0.5,
        amplitude: 0.35,
        period: 3.0,
        phase: 0.0,
        lower: 0.05,
        upper: 1.0,
    }
}
