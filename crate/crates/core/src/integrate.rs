//! Fixed-step integration of the patient model.

use crate::model::{rhs, PatientState};
use crate::params::PatientParams;
use crate::{Error, Result};

/// One classical fourth-order Runge-Kutta step with `u`, `v`, `eta_x` and
/// `eta_y` held constant over `[t, t + dt]`.
///
/// Fails with [`Error::Domain`] if any stage or the result leaves the
/// positive quadrant.
pub fn rk4_step(
    state: PatientState,
    u: f64,
    v: f64,
    eta_x: f64,
    eta_y: f64,
    p: &PatientParams,
    dt: f64,
) -> Result<PatientState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("dt must be > 0"));
    }
    let f = |s: PatientState| rhs(s, u, v, eta_x, eta_y, p);
    let shift = |k: &crate::model::Derivative, h: f64| {
        PatientState::new(state.x + h * k.dx, state.y + h * k.dy)
    };
    let k1 = f(state)?;
    let k2 = f(shift(&k1, 0.5 * dt))?;
    let k3 = f(shift(&k2, 0.5 * dt))?;
    let k4 = f(shift(&k3, dt))?;
    let next = PatientState::new(
        state.x + dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
        state.y + dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy),
    );
    next.validate()?;
    Ok(next)
}

/// Integrates the uncontrolled system for `steps` steps of size `dt`.
pub fn integrate_uncontrolled(
    state: PatientState,
    p: &PatientParams,
    dt: f64,
    steps: usize,
) -> Result<PatientState> {
    (0..steps).try_fold(state, |s, _| rk4_step(s, 0.0, 0.0, 0.0, 0.0, p, dt))
}
