//! Flatness-based planning.
//!
//! `x` and `y` are flat outputs of the patient model: given a reference
//! `(x*, dx*, y*, dy*)` the dose rates that realize it follow algebraically,
//!
//! ```text
//! u* = -(dx* + mu_c x* ln(x*/x_inf) + gamma x* y*) / (x* eta_x)
//! v* =  (dy* - mu_i (x* - beta x*^2) y* + delta y* - alpha) / (y* eta_y)
//! ```
//!
//! Negative values are clipped to obtain the open-loop schedule. The shooting
//! sweep builds one plan per ramp duration, inverts and clips it, and ranks
//! the admissible candidates by total chemo then total immuno dose.

use crate::integrate::rk4_step;
use crate::model::{find_equilibria, PatientState};
use crate::params::PatientParams;
use crate::quadrature::trapezoid;
use crate::{Error, Result};
use alloc::vec::Vec;
use libm::{fabs, log, round};

/// Quintic smoothstep from `start` to `goal` over `[0, ramp_time]`, then a
/// constant hold at `goal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampPlan {
    pub start: PatientState,
    pub goal: PatientState,
    pub ramp_time: f64,
}

/// Reference value and first derivative of both flat outputs at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub x: f64,
    pub dx: f64,
    pub y: f64,
    pub dy: f64,
}

impl RampPlan {
    pub fn new(start: PatientState, goal: PatientState, ramp_time: f64) -> Result<Self> {
        if !(ramp_time > 0.0 && ramp_time.is_finite()) {
            return Err(Error::InvalidArgument("ramp_time must be > 0"));
        }
        start.validate()?;
        goal.validate()?;
        Ok(RampPlan {
            start,
            goal,
            ramp_time,
        })
    }

    pub fn eval(&self, t: f64) -> ReferencePoint {
        if t >= self.ramp_time {
            return ReferencePoint {
                x: self.goal.x,
                dx: 0.0,
                y: self.goal.y,
                dy: 0.0,
            };
        }
        let s = (t / self.ramp_time).max(0.0);
        let s2 = s * s;
        // 10 s^3 - 15 s^4 + 6 s^5 and its derivative in s.
        let h = s2 * s * (10.0 + s * (-15.0 + 6.0 * s));
        let dh = 30.0 * s2 * (1.0 - s) * (1.0 - s) / self.ramp_time;
        let dxg = self.goal.x - self.start.x;
        let dyg = self.goal.y - self.start.y;
        ReferencePoint {
            x: self.start.x + dxg * h,
            dx: dxg * dh,
            y: self.start.y + dyg * h,
            dy: dyg * dh,
        }
    }
}

/// Reference samples of the flat outputs on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub plan: RampPlan,
    pub dt: f64,
    pub t: Vec<f64>,
    pub x_ref: Vec<f64>,
    pub y_ref: Vec<f64>,
    pub dx_ref: Vec<f64>,
    pub dy_ref: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn point(&self, i: usize) -> ReferencePoint {
        ReferencePoint {
            x: self.x_ref[i],
            dx: self.dx_ref[i],
            y: self.y_ref[i],
            dy: self.dy_ref[i],
        }
    }
}

/// Number of grid steps in `duration`, which must be an integer multiple of
/// `dt`.
pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("dt must be > 0"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument("duration must be > 0"));
    }
    let n = round(duration / dt);
    if fabs(n - duration / dt) > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidArgument(
            "duration must be an integer multiple of dt",
        ));
    }
    Ok(n as usize)
}

/// Samples a [`RampPlan`] on `t_k = k dt`, `k = 0..=duration/dt`.
pub fn plan_reference(
    start: PatientState,
    goal: PatientState,
    duration: f64,
    ramp_time: f64,
    dt: f64,
) -> Result<ReferenceTrajectory> {
    let plan = RampPlan::new(start, goal, ramp_time)?;
    if ramp_time > duration {
        return Err(Error::InvalidArgument("ramp_time must not exceed duration"));
    }
    let n = step_count(duration, dt)?;
    let mut r = ReferenceTrajectory {
        plan,
        dt,
        t: Vec::with_capacity(n + 1),
        x_ref: Vec::with_capacity(n + 1),
        y_ref: Vec::with_capacity(n + 1),
        dx_ref: Vec::with_capacity(n + 1),
        dy_ref: Vec::with_capacity(n + 1),
    };
    for k in 0..=n {
        let t = k as f64 * dt;
        let pt = plan.eval(t);
        r.t.push(t);
        r.x_ref.push(pt.x);
        r.y_ref.push(pt.y);
        r.dx_ref.push(pt.dx);
        r.dy_ref.push(pt.dy);
    }
    Ok(r)
}

/// Nominal dose rates realizing a reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalControl {
    pub u: f64,
    pub v: f64,
}

/// Inverts the dynamics: the (unclipped) `u*`, `v*` that make the model
/// follow `(x, dx, y, dy)` when the delivery fractions equal `eta_x`, `eta_y`.
pub fn flat_inverse(
    x: f64,
    dx: f64,
    y: f64,
    dy: f64,
    p: &PatientParams,
    eta_x: f64,
    eta_y: f64,
) -> Result<NominalControl> {
    PatientState::new(x, y).validate()?;
    if !(eta_x > 0.0) {
        return Err(Error::Domain {
            what: "eta_x",
            value: eta_x,
        });
    }
    if !(eta_y > 0.0) {
        return Err(Error::Domain {
            what: "eta_y",
            value: eta_y,
        });
    }
    let u = -(dx + p.mu_c * x * log(x / p.x_inf) + p.gamma * x * y) / (x * eta_x);
    let v = (dy - p.mu_i * (x - p.beta * x * x) * y + p.delta * y - p.alpha) / (y * eta_y);
    Ok(NominalControl { u, v })
}

/// Nominal controls at an arbitrary instant of a plan, unclipped.
pub fn nominal_at(
    plan: &RampPlan,
    t: f64,
    p: &PatientParams,
    eta_x: f64,
    eta_y: f64,
) -> Result<NominalControl> {
    let r = plan.eval(t);
    flat_inverse(r.x, r.dx, r.y, r.dy, p, eta_x, eta_y)
}

/// Unclipped and clipped nominal controls on the reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopSchedule {
    pub u_star: Vec<f64>,
    pub v_star: Vec<f64>,
    pub u_ol: Vec<f64>,
    pub v_ol: Vec<f64>,
}

impl OpenLoopSchedule {
    /// Samples where clipping changed the chemo (`.0`) and immuno (`.1`) value.
    pub fn clipped_counts(&self) -> (usize, usize) {
        let count = |s: &[f64]| s.iter().filter(|&&v| v < 0.0).count();
        (count(&self.u_star), count(&self.v_star))
    }

    /// Every chemo sample was negative and the schedule is identically zero.
    pub fn fully_clipped_u(&self) -> bool {
        !self.u_star.is_empty() && self.u_star.iter().all(|&u| u < 0.0)
    }

    pub fn fully_clipped_v(&self) -> bool {
        !self.v_star.is_empty() && self.v_star.iter().all(|&v| v < 0.0)
    }
}

/// Replaces negative nominal doses by zero, keeping the raw values.
pub fn clip_schedule(u_star: &[f64], v_star: &[f64]) -> Result<OpenLoopSchedule> {
    if u_star.len() != v_star.len() {
        return Err(Error::InvalidArgument("u_star and v_star differ in length"));
    }
    let clip = |s: &[f64]| s.iter().map(|&v| if v >= 0.0 { v } else { 0.0 }).collect();
    Ok(OpenLoopSchedule {
        u_star: u_star.to_vec(),
        v_star: v_star.to_vec(),
        u_ol: clip(u_star),
        v_ol: clip(v_star),
    })
}

/// Inverts every sample of a reference and clips the result.
pub fn invert_reference(
    reference: &ReferenceTrajectory,
    p: &PatientParams,
    eta_x: f64,
    eta_y: f64,
) -> Result<OpenLoopSchedule> {
    let mut u = Vec::with_capacity(reference.len());
    let mut v = Vec::with_capacity(reference.len());
    for i in 0..reference.len() {
        let r = reference.point(i);
        let c = flat_inverse(r.x, r.dx, r.y, r.dy, p, eta_x, eta_y)?;
        u.push(c.u);
        v.push(c.v);
    }
    clip_schedule(&u, &v)
}

/// Admissibility constraints for shooting candidates. `None` means unset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShootingCriteria {
    pub max_total_u: Option<f64>,
    pub max_total_v: Option<f64>,
    pub max_peak_u: Option<f64>,
    pub max_peak_v: Option<f64>,
    /// Simulate the open-loop schedule on the nominal model and require the
    /// endpoint to lie in the benign arrival ball.
    pub require_benign_arrival: bool,
}

impl ShootingCriteria {
    pub fn validate(&self) -> Result<()> {
        for v in [
            self.max_total_u,
            self.max_total_v,
            self.max_peak_u,
            self.max_peak_v,
        ]
        .into_iter()
        .flatten()
        {
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument("shooting budgets must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    TotalU,
    TotalV,
    PeakU,
    PeakV,
    NoBenignArrival,
}

impl Rejection {
    pub fn label(&self) -> &'static str {
        match self {
            Rejection::TotalU => "total-u budget",
            Rejection::TotalV => "total-v budget",
            Rejection::PeakU => "peak-u cap",
            Rejection::PeakV => "peak-v cap",
            Rejection::NoBenignArrival => "no benign arrival",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingCandidate {
    pub ramp_time: f64,
    pub reference: ReferenceTrajectory,
    pub schedule: OpenLoopSchedule,
    /// Trapezoid integral of the clipped chemo schedule.
    pub total_u: f64,
    pub total_v: f64,
    /// Open-loop terminal state on the nominal model, when simulated.
    pub open_loop_endpoint: Option<PatientState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOutcome {
    /// Admissible candidates, cheapest first.
    pub ranked: Vec<ShootingCandidate>,
    pub rejected: Vec<(f64, Rejection)>,
}

/// Plans, inverts and scores one ramp duration.
pub fn evaluate_candidate(
    start: PatientState,
    goal: PatientState,
    ramp_time: f64,
    criteria: &ShootingCriteria,
    p: &PatientParams,
    dt: f64,
    duration: f64,
) -> Result<core::result::Result<ShootingCandidate, Rejection>> {
    let reference = plan_reference(start, goal, duration, ramp_time, dt)?;
    let schedule = invert_reference(&reference, p, p.eta_x_nom, p.eta_y_nom)?;
    let total_u = trapezoid(&schedule.u_ol, dt);
    let total_v = trapezoid(&schedule.v_ol, dt);
    let peak = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    let checks = [
        (criteria.max_total_u, total_u, Rejection::TotalU),
        (criteria.max_total_v, total_v, Rejection::TotalV),
        (criteria.max_peak_u, peak(&schedule.u_ol), Rejection::PeakU),
        (criteria.max_peak_v, peak(&schedule.v_ol), Rejection::PeakV),
    ];
    for (limit, value, why) in checks {
        if let Some(limit) = limit {
            if value > limit {
                return Ok(Err(why));
            }
        }
    }
    let mut open_loop_endpoint = None;
    if criteria.require_benign_arrival {
        let eq = find_equilibria(p)?;
        let n = reference.len() - 1;
        let mut s = start;
        for k in 0..n {
            let t = k as f64 * dt;
            let c = nominal_at(&reference.plan, t + 0.5 * dt, p, p.eta_x_nom, p.eta_y_nom)?;
            match rk4_step(
                s,
                c.u.max(0.0),
                c.v.max(0.0),
                p.eta_x_nom,
                p.eta_y_nom,
                p,
                dt,
            ) {
                Ok(next) => s = next,
                Err(_) => return Ok(Err(Rejection::NoBenignArrival)),
            }
        }
        open_loop_endpoint = Some(s);
        if crate::model::basin_of(&s, &eq) != crate::model::Basin::Benign {
            return Ok(Err(Rejection::NoBenignArrival));
        }
    }
    Ok(Ok(ShootingCandidate {
        ramp_time,
        reference,
        schedule,
        total_u,
        total_v,
        open_loop_endpoint,
    }))
}

/// Sorts admissible candidates by `(total_u, total_v, ramp_time)` ascending.
pub fn rank_candidates(candidates: &mut [ShootingCandidate]) {
    candidates.sort_by(|a, b| {
        a.total_u
            .total_cmp(&b.total_u)
            .then(a.total_v.total_cmp(&b.total_v))
            .then(a.ramp_time.total_cmp(&b.ramp_time))
    });
}

/// Shooting-style selection over candidate ramp durations.
///
/// An empty `ranked` list with every candidate in `rejected` signals that no
/// ramp satisfies the criteria.
pub fn shoot(
    start: PatientState,
    goal: PatientState,
    ramp_candidates: &[f64],
    criteria: &ShootingCriteria,
    p: &PatientParams,
    dt: f64,
    duration: f64,
) -> Result<ShootingOutcome> {
    if ramp_candidates.is_empty() {
        return Err(Error::InvalidArgument("no ramp candidates"));
    }
    criteria.validate()?;
    let mut ranked = Vec::new();
    let mut rejected = Vec::new();
    for &ramp in ramp_candidates {
        match evaluate_candidate(start, goal, ramp, criteria, p, dt, duration)? {
            Ok(c) => ranked.push(c),
            Err(why) => rejected.push((ramp, why)),
        }
    }
    rank_candidates(&mut ranked);
    Ok(ShootingOutcome { ranked, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rhs;

    const DT: f64 = 1.0 / 48.0;

    fn benign() -> PatientState {
        find_equilibria(&PatientParams::equilibria_calibrated())
            .unwrap()
            .benign
            .state
    }

    #[test]
    fn degenerate_ramp_is_constant() {
        let s = PatientState::new(73.0, 1.32);
        let r = plan_reference(s, s, 60.0, 5.0, DT).unwrap();
        assert_eq!(r.len(), 2881);
        assert!(r.x_ref.iter().all(|&x| x == 73.0));
        assert!(r.y_ref.iter().all(|&y| y == 1.32));
        assert!(r.dx_ref.iter().chain(&r.dy_ref).all(|&d| d == 0.0));
    }

    #[test]
    fn fast_ramp_endpoints_and_midpoint_slope() {
        let start = PatientState::new(500.0, 0.5);
        let goal = benign();
        let r = plan_reference(start, goal, 60.0, 5.0, DT).unwrap();
        assert!((r.x_ref[0] - 500.0).abs() < 1e-9);
        assert!((r.y_ref[0] - 0.5).abs() < 1e-9);
        assert!((r.x_ref[240] - goal.x).abs() < 1e-9);
        assert!((r.y_ref[240] - goal.y).abs() < 1e-9);
        // Midpoint of the quintic: slope = 30/16 * (goal - start) / ramp.
        let mid = r.dx_ref[120];
        assert!((mid - 1.875 * (goal.x - 500.0) / 5.0).abs() < 1e-9, "{mid}");
        assert!(mid < 0.0);
        assert_eq!(r.dx_ref[0], 0.0);
        assert!(r.dx_ref[240..].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn slow_ramp_has_smaller_peak_slope() {
        let start = PatientState::new(500.0, 0.5);
        let peak = |ramp| {
            let r = plan_reference(start, benign(), 60.0, ramp, DT).unwrap();
            r.dx_ref.iter().fold(0.0f64, |m, d| m.max(d.abs()))
        };
        let (fast, slow) = (peak(5.0), peak(20.0));
        assert!(slow < fast);
        assert!((fast / slow - 4.0).abs() < 1e-6);
    }

    #[test]
    fn plan_rejects_bad_arguments() {
        let s = PatientState::new(500.0, 0.5);
        assert!(plan_reference(s, s, 60.0, 0.0, DT).is_err());
        assert!(plan_reference(s, s, 60.0, -1.0, DT).is_err());
        assert!(plan_reference(s, s, 60.0, 5.0, 0.0).is_err());
        assert!(plan_reference(s, s, 60.0, 61.0, DT).is_err());
        assert!(plan_reference(s, s, 60.0, 5.0, 0.7).is_err());
    }

    #[test]
    fn inversion_round_trip() {
        let p = PatientParams::equilibria_calibrated();
        let s = PatientState::new(321.0, 0.77);
        let (u0, v0) = (0.8, 1.9);
        let d = rhs(s, u0, v0, 0.5, 0.5, &p).unwrap();
        let c = flat_inverse(s.x, d.dx, s.y, d.dy, &p, 0.5, 0.5).unwrap();
        assert!((c.u - u0).abs() <= 1e-12 * u0);
        assert!((c.v - v0).abs() <= 1e-12 * v0);
    }

    #[test]
    fn inversion_at_benign_equilibrium_is_zero() {
        let p = PatientParams::equilibria_calibrated();
        let b = benign();
        let c = flat_inverse(b.x, 0.0, b.y, 0.0, &p, 0.5, 0.5).unwrap();
        assert!(c.u.abs() < 1e-8 && c.v.abs() < 1e-8, "{c:?}");
    }

    #[test]
    fn steep_descent_demands_chemo() {
        let p = PatientParams::equilibria_calibrated();
        let c = flat_inverse(500.0, -200.0, 0.5, 0.0, &p, 0.5, 0.5).unwrap();
        assert!(c.u > 0.0);
    }

    #[test]
    fn inversion_domain_errors() {
        let p = PatientParams::equilibria_calibrated();
        assert!(flat_inverse(0.0, 0.0, 1.0, 0.0, &p, 0.5, 0.5).is_err());
        assert!(flat_inverse(10.0, 0.0, -1.0, 0.0, &p, 0.5, 0.5).is_err());
        assert!(flat_inverse(10.0, 0.0, 1.0, 0.0, &p, 0.0, 0.5).is_err());
        assert!(flat_inverse(10.0, 0.0, 1.0, 0.0, &p, 0.5, 0.0).is_err());
    }

    #[test]
    fn clipping_rules() {
        let s = clip_schedule(&[1.0, -1.0, 0.0], &[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.u_ol, [1.0, 0.0, 0.0]);
        assert_eq!(s.v_ol, [0.0, 2.0, 3.0]);
        assert_eq!(s.u_star, [1.0, -1.0, 0.0]);
        assert_eq!(s.clipped_counts(), (1, 0));
        assert!(!s.fully_clipped_u());

        let s = clip_schedule(&[-1.0, -2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(s.u_ol, [0.0, 0.0]);
        assert!(s.fully_clipped_u());
        assert!(!s.fully_clipped_v());

        assert!(clip_schedule(&[1.0], &[]).is_err());
    }

    #[test]
    fn shooting_ranks_by_dose() {
        let p = PatientParams::equilibria_calibrated();
        let start = PatientState::new(500.0, 0.5);
        let out = shoot(
            start,
            benign(),
            &[5.0, 20.0],
            &ShootingCriteria::default(),
            &p,
            DT,
            60.0,
        )
        .unwrap();
        assert_eq!(out.ranked.len(), 2);
        assert!(out.rejected.is_empty());
        let (a, b) = (&out.ranked[0], &out.ranked[1]);
        assert!(a.total_u < b.total_u || (a.total_u == b.total_u && a.total_v <= b.total_v));
        for c in &out.ranked {
            assert_eq!(c.total_u, trapezoid(&c.schedule.u_ol, DT));
        }
    }

    #[test]
    fn zero_budget_rejects_chemo_plans() {
        let p = PatientParams::equilibria_calibrated();
        let start = PatientState::new(500.0, 0.5);
        let criteria = ShootingCriteria {
            max_total_u: Some(0.0),
            ..Default::default()
        };
        let out = shoot(start, benign(), &[5.0], &criteria, &p, DT, 60.0).unwrap();
        assert!(out.ranked.is_empty());
        assert_eq!(out.rejected, [(5.0, Rejection::TotalU)]);
    }

    #[test]
    fn equilibrium_candidate_costs_nothing() {
        let p = PatientParams::equilibria_calibrated();
        let b = benign();
        let criteria = ShootingCriteria {
            require_benign_arrival: true,
            ..Default::default()
        };
        let out = shoot(b, b, &[5.0], &criteria, &p, DT, 60.0).unwrap();
        assert_eq!(out.ranked.len(), 1);
        assert!(out.ranked[0].total_u < 1e-6 && out.ranked[0].total_v < 1e-6);
        assert!(shoot(b, b, &[], &criteria, &p, DT, 60.0).is_err());
    }
}
