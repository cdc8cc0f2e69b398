//! Model-free control layer.
//!
//! Each tracking error `z = output - reference` is described by a first-order
//! ultra-local model `dz/dt = F + alpha u`, where `F` lumps everything the
//! nominal model gets wrong (here mostly the unknown delivery fractions) and
//! is re-estimated at every sample from a short window of past data:
//!
//! ```text
//! F_hat(t) = -(6 / tau^3) * integral_0^tau [ (tau - 2s) z(t - tau + s)
//!                                           + alpha s (tau - s) u(t - tau + s) ] ds
//! ```
//!
//! The published form writes the kernel as `(t - 2 sigma)` over
//! `[t - tau, t]`; it coincides with the above after the shift
//! `s = sigma - (t - tau)`. The estimate is exact when `F` is constant over
//! the window. The intelligent-proportional law
//! `u_mfc = -(F_hat + K_P z) / alpha` then imposes `dz/dt = -K_P z`, and the
//! correction is added to the open-loop dose with negative sums clipped to 0.

use crate::model::PatientState;
use crate::quadrature::{simpson, trapezoid};
use crate::{Error, Result};
use alloc::collections::VecDeque;
use alloc::vec::Vec;
use libm::{ceil, fabs, round};

/// Quadrature used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    Trapezoid,
    /// Composite Simpson (3/8 rule on the last three intervals when the
    /// window has an odd number of intervals).
    #[default]
    Simpson,
    /// Exact integration of the piecewise-linear interpolant of `z` against
    /// a zero-order-hold input (`u_k` held over `[t_k, t_{k+1})`). Exact for
    /// sampled-data ultra-local plants.
    ZeroOrderHold,
}

impl Quadrature {
    pub fn name(&self) -> &'static str {
        match self {
            Quadrature::Trapezoid => "trapezoid",
            Quadrature::Simpson => "simpson",
            Quadrature::ZeroOrderHold => "zoh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "trapezoid" => Some(Quadrature::Trapezoid),
            "simpson" => Some(Quadrature::Simpson),
            "zoh" => Some(Quadrature::ZeroOrderHold),
            _ => None,
        }
    }
}

/// Which signal feeds the estimator integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorSignal {
    /// The tracking error `z`.
    #[default]
    TrackingError,
    /// The raw measured output (`x` or `y`), as the integrand is literally
    /// printed in the original formula. Then `F_hat` estimates
    /// `d(output)/dt - alpha u` instead of `dz/dt - alpha u`.
    RawOutput,
}

impl EstimatorSignal {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSignal::TrackingError => "tracking-error",
            EstimatorSignal::RawOutput => "raw-output",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tracking-error" => Some(EstimatorSignal::TrackingError),
            "raw-output" => Some(EstimatorSignal::RawOutput),
            _ => None,
        }
    }
}

/// Gains and estimation windows of the two decoupled loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltraLocalConfig {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub k_x_p: f64,
    pub k_y_p: f64,
    /// Estimation window of the chemo loop, days.
    pub tau_x: f64,
    pub tau_y: f64,
    pub quadrature: Quadrature,
    pub signal: EstimatorSignal,
}

impl UltraLocalConfig {
    /// `alpha_x = -10000`, `alpha_y = 1`, `K_x = 100`, `K_y = 10`, windows of
    /// 20 samples.
    pub fn with_default_gains(dt: f64) -> Self {
        UltraLocalConfig {
            alpha_x: -10000.0,
            alpha_y: 1.0,
            k_x_p: 100.0,
            k_y_p: 10.0,
            tau_x: 20.0 * dt,
            tau_y: 20.0 * dt,
            quadrature: Quadrature::default(),
            signal: EstimatorSignal::default(),
        }
    }

    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(self.alpha_x != 0.0 && self.alpha_x.is_finite())
            || !(self.alpha_y != 0.0 && self.alpha_y.is_finite())
        {
            return Err(Error::InvalidArgument(
                "alpha_x and alpha_y must be nonzero",
            ));
        }
        if !(self.k_x_p > 0.0 && self.k_y_p > 0.0) {
            return Err(Error::InvalidArgument("proportional gains must be > 0"));
        }
        // Small slack so that tau = 2 dt written in decimal is accepted.
        let min_tau = 2.0 * dt * (1.0 - 1e-9);
        if !(self.tau_x >= min_tau && self.tau_y >= min_tau) {
            return Err(Error::InvalidArgument(
                "estimation windows must span >= 2 samples",
            ));
        }
        Ok(())
    }
}

/// One history entry: the estimator signal and the correction applied from
/// this instant on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub z: f64,
    pub u: f64,
}

/// Bounded, uniformly sampled history of one loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopHistory {
    dt: f64,
    capacity: usize,
    samples: VecDeque<Sample>,
}

impl LoopHistory {
    /// A history able to cover a window of `span` days.
    pub fn new(dt: f64, span: f64) -> Self {
        let capacity = ceil(span / dt - 1e-9).max(1.0) as usize + 1;
        LoopHistory {
            dt,
            capacity,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn latest(&self) -> Option<&Sample> {
        self.samples.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    /// Appends a sample whose input is not decided yet (`u = 0`); set it with
    /// [`LoopHistory::set_latest_input`].
    pub fn push(&mut self, t: f64, z: f64) -> Result<()> {
        if let Some(last) = self.samples.back() {
            let expected = last.t + self.dt;
            if fabs(t - expected) > 1e-9 * self.dt.max(fabs(t)) {
                return Err(Error::NonUniformSample { expected, got: t });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(Sample { t, z, u: 0.0 });
        Ok(())
    }

    pub fn set_latest_input(&mut self, u: f64) {
        if let Some(last) = self.samples.back_mut() {
            last.u = u;
        }
    }
}

/// Number of grid intervals covered by a window of `tau` days.
pub fn window_intervals(tau: f64, dt: f64) -> usize {
    round(tau / dt).max(1.0) as usize
}

/// Estimates `F` over the last `tau` days of `history`.
///
/// `tau` is rounded to a whole number of samples. Before the window is filled
/// the result is [`Error::InsufficientHistory`]; callers fall back to
/// `F_hat = 0`.
pub fn estimate_f(
    history: &LoopHistory,
    tau: f64,
    alpha: f64,
    quadrature: Quadrature,
) -> Result<f64> {
    let n = window_intervals(tau, history.dt);
    if history.len() < n + 1 {
        return Err(Error::InsufficientHistory {
            have: history.len(),
            need: n + 1,
        });
    }
    let h = history.dt;
    let tau = n as f64 * h;
    let window: Vec<Sample> = history
        .samples
        .iter()
        .skip(history.len() - n - 1)
        .copied()
        .collect();
    let integral = match quadrature {
        Quadrature::Trapezoid | Quadrature::Simpson => {
            let g: Vec<f64> = window
                .iter()
                .enumerate()
                .map(|(j, smp)| {
                    let s = j as f64 * h;
                    (tau - 2.0 * s) * smp.z + alpha * s * (tau - s) * smp.u
                })
                .collect();
            if quadrature == Quadrature::Simpson {
                simpson(&g, h)
            } else {
                trapezoid(&g, h)
            }
        }
        Quadrature::ZeroOrderHold => {
            let mut acc = 0.0;
            for (k, pair) in window.windows(2).enumerate() {
                let (a, b) = (pair[0], pair[1]);
                let s0 = k as f64 * h;
                let s1 = s0 + h;
                let c = tau - 2.0 * s0;
                // z linear on [s0, s1]; kernel (tau - 2s) integrated exactly.
                acc += h * (a.z * (0.5 * c - h / 3.0) + b.z * (0.5 * c - 2.0 * h / 3.0));
                let prim = |s: f64| tau * s * s / 2.0 - s * s * s / 3.0;
                acc += alpha * a.u * (prim(s1) - prim(s0));
            }
            acc
        }
    };
    Ok(-6.0 / (tau * tau * tau) * integral)
}

/// Intelligent-proportional correction `-(F_hat + K_P z) / alpha`.
pub fn ip_control(f_hat: f64, z: f64, k_p: f64, alpha: f64) -> f64 {
    -(f_hat + k_p * z) / alpha
}

/// `max(u_ol + u_mfc, 0)`.
pub fn compose_closed_loop(u_ol: f64, u_mfc: f64) -> f64 {
    let u = u_ol + u_mfc;
    if u >= 0.0 {
        u
    } else {
        0.0
    }
}

/// Everything one controller update produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfcOutput {
    pub u_cl: f64,
    pub v_cl: f64,
    pub z_x: f64,
    pub z_y: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub u_mfc: f64,
    pub v_mfc: f64,
    /// Both estimators had a full window.
    pub warmed_up: bool,
}

/// Result of one loop channel.
struct ChannelOutput {
    f_hat: f64,
    correction: f64,
    warmed_up: bool,
}

#[allow(clippy::too_many_arguments)]
fn channel_step(
    history: &mut LoopHistory,
    t: f64,
    z: f64,
    signal_value: f64,
    alpha: f64,
    k_p: f64,
    tau: f64,
    quadrature: Quadrature,
) -> Result<ChannelOutput> {
    history.push(t, signal_value)?;
    let out = match estimate_f(history, tau, alpha, quadrature) {
        Ok(f_hat) => ChannelOutput {
            f_hat,
            correction: ip_control(f_hat, z, k_p, alpha),
            warmed_up: true,
        },
        // Warm-up: pure nominal open loop.
        Err(Error::InsufficientHistory { .. }) => ChannelOutput {
            f_hat: 0.0,
            correction: 0.0,
            warmed_up: false,
        },
        Err(e) => return Err(e),
    };
    history.set_latest_input(out.correction);
    Ok(out)
}

/// One update of both loops at time `t`.
///
/// `reference` holds `(x*, y*)` at `t`; `u_ol`, `v_ol` are the nominal doses
/// that will be held over the next step. The histories receive the current
/// estimator signal and the applied MFC corrections.
#[allow(clippy::too_many_arguments)]
pub fn mfc_step(
    t: f64,
    measured: PatientState,
    reference: PatientState,
    u_ol: f64,
    v_ol: f64,
    cfg: &UltraLocalConfig,
    history_x: &mut LoopHistory,
    history_y: &mut LoopHistory,
) -> Result<MfcOutput> {
    let z_x = measured.x - reference.x;
    let z_y = measured.y - reference.y;
    let (sx, sy) = match cfg.signal {
        EstimatorSignal::TrackingError => (z_x, z_y),
        EstimatorSignal::RawOutput => (measured.x, measured.y),
    };
    let cx = channel_step(
        history_x,
        t,
        z_x,
        sx,
        cfg.alpha_x,
        cfg.k_x_p,
        cfg.tau_x,
        cfg.quadrature,
    )?;
    let cy = channel_step(
        history_y,
        t,
        z_y,
        sy,
        cfg.alpha_y,
        cfg.k_y_p,
        cfg.tau_y,
        cfg.quadrature,
    )?;
    Ok(MfcOutput {
        u_cl: compose_closed_loop(u_ol, cx.correction),
        v_cl: compose_closed_loop(v_ol, cy.correction),
        z_x,
        z_y,
        f_x: cx.f_hat,
        f_y: cy.f_hat,
        u_mfc: cx.correction,
        v_mfc: cy.correction,
        warmed_up: cx.warmed_up && cy.warmed_up,
    })
}

/// Both loop histories plus their configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MfcController {
    pub cfg: UltraLocalConfig,
    pub history_x: LoopHistory,
    pub history_y: LoopHistory,
}

impl MfcController {
    pub fn new(cfg: UltraLocalConfig, dt: f64) -> Result<Self> {
        cfg.validate(dt)?;
        Ok(MfcController {
            cfg,
            history_x: LoopHistory::new(dt, cfg.tau_x),
            history_y: LoopHistory::new(dt, cfg.tau_y),
        })
    }

    pub fn step(
        &mut self,
        t: f64,
        measured: PatientState,
        reference: PatientState,
        u_ol: f64,
        v_ol: f64,
    ) -> Result<MfcOutput> {
        mfc_step(
            t,
            measured,
            reference,
            u_ol,
            v_ol,
            &self.cfg,
            &mut self.history_x,
            &mut self.history_y,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(dt: f64, n: usize, z: impl Fn(f64) -> f64, u: impl Fn(f64) -> f64) -> LoopHistory {
        let mut h = LoopHistory::new(dt, n as f64 * dt);
        for k in 0..=n {
            let t = k as f64 * dt;
            h.push(t, z(t)).unwrap();
            h.set_latest_input(u(t));
        }
        h
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let dt = 0.01;
        let h = filled(dt, 20, |_| 0.0, |_| 0.0);
        for q in [
            Quadrature::Trapezoid,
            Quadrature::Simpson,
            Quadrature::ZeroOrderHold,
        ] {
            assert_eq!(estimate_f(&h, 20.0 * dt, 3.0, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn ramp_slope_is_recovered() {
        // z(s) = 2 s, u = 0: the exact integral of (tau - 2s) 2s over [0, tau]
        // is -tau^3 / 3, so F_hat = 2. Trapezoid carries a 2 h^2/tau^2 bias.
        let tau = 1.0;
        let dt = tau / 20.0;
        let h = filled(dt, 20, |t| 2.0 * t, |_| 0.0);
        let trap = estimate_f(&h, tau, 1.0, Quadrature::Trapezoid).unwrap();
        assert!((trap - 2.0).abs() < 0.02, "{trap}");
        assert!((trap - 2.0 * (1.0 + 2.0 / 400.0)).abs() < 1e-12);
        let simp = estimate_f(&h, tau, 1.0, Quadrature::Simpson).unwrap();
        assert!((simp - 2.0).abs() < 1e-12, "{simp}");
    }

    #[test]
    fn constant_input_is_cancelled() {
        // dz/dt = F + alpha u with constant u: F_hat = F.
        let (f, alpha, u) = (-1.5, 4.0, 0.3);
        let dt = 0.05;
        let h = filled(dt, 10, |t| 0.7 + (f + alpha * u) * t, |_| u);
        for q in [Quadrature::Simpson, Quadrature::ZeroOrderHold] {
            let est = estimate_f(&h, 10.0 * dt, alpha, q).unwrap();
            assert!((est - f).abs() < 1e-12, "{q:?}: {est}");
        }
    }

    #[test]
    fn insufficient_history() {
        let h = filled(0.1, 3, |_| 1.0, |_| 0.0);
        assert_eq!(
            estimate_f(&h, 1.0, 1.0, Quadrature::Simpson),
            Err(Error::InsufficientHistory { have: 4, need: 11 })
        );
    }

    #[test]
    fn history_is_bounded_and_uniform() {
        let mut h = LoopHistory::new(0.5, 2.0);
        for k in 0..10 {
            h.push(k as f64 * 0.5, k as f64).unwrap();
        }
        assert_eq!(h.len(), 5);
        assert_eq!(h.iter().next().unwrap().z, 5.0);
        assert!(matches!(
            h.push(6.0, 0.0),
            Err(Error::NonUniformSample { .. })
        ));
    }

    #[test]
    fn ip_law() {
        assert_eq!(ip_control(0.0, 0.0, 10.0, 1.0), 0.0);
        let u = ip_control(2.0, 0.5, 100.0, -10000.0);
        assert!((u - 0.0052).abs() < 1e-15);
        for z in [-3.0, 0.25, 17.0] {
            assert_eq!(ip_control(-10.0 * z, z, 10.0, 2.0), 0.0);
        }
    }

    #[test]
    fn composition() {
        assert!((compose_closed_loop(1.0, -0.4) - 0.6).abs() < 1e-15);
        assert_eq!(compose_closed_loop(0.2, -0.5), 0.0);
        assert_eq!(compose_closed_loop(0.7, 0.0), 0.7);
    }

    #[test]
    fn config_validation() {
        let dt = 1.0 / 48.0;
        let cfg = UltraLocalConfig::with_default_gains(dt);
        cfg.validate(dt).unwrap();
        assert!(UltraLocalConfig { k_x_p: 0.0, ..cfg }.validate(dt).is_err());
        assert!(UltraLocalConfig {
            alpha_y: 0.0,
            ..cfg
        }
        .validate(dt)
        .is_err());
        assert!(UltraLocalConfig { tau_x: dt, ..cfg }.validate(dt).is_err());
        UltraLocalConfig {
            tau_x: 2.0 * dt,
            ..cfg
        }
        .validate(dt)
        .unwrap();
    }

    #[test]
    fn quiescent_when_tracking_is_perfect() {
        let dt = 1.0 / 48.0;
        let mut c = MfcController::new(UltraLocalConfig::with_default_gains(dt), dt).unwrap();
        let r = PatientState::new(100.0, 1.0);
        for k in 0..100 {
            let out = c.step(k as f64 * dt, r, r, 0.3, 0.2).unwrap();
            assert_eq!(out.u_mfc, 0.0);
            assert_eq!(out.v_mfc, 0.0);
            assert_eq!(out.u_cl, 0.3);
            assert_eq!(out.v_cl, 0.2);
            assert_eq!(out.warmed_up, k >= 20);
        }
    }
}
