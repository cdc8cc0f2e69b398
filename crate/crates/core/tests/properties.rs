use std::f64::consts::PI;

use onco_core::disturbance::DisturbanceProfile;
use onco_core::mfc::{estimate_f, ip_control, LoopHistory, Quadrature};
use onco_core::model::rhs;
use onco_core::planner::{clip_schedule, flat_inverse, plan_reference, RampPlan};
use onco_core::scenario::{preset, run_scenario, ControllerMode};
use onco_core::{PatientParams, PatientState};
use proptest::prelude::*;

/// Frozen regression constants for `|F_hat - F| <= C (1 + |F|) dt^2`.
const C_TRAPEZOID: f64 = 25.0;
const C_SIMPSON: f64 = 1e-2;

fn state() -> impl Strategy<Value = PatientState> {
    (1.0..780.0f64, 0.01..3.0f64).prop_map(|(x, y)| PatientState::new(x, y))
}

proptest! {
    #[test]
    fn inversion_round_trips(
        s in state(),
        dx in -200.0..200.0f64,
        dy in -2.0..2.0f64,
        eta_x in 0.05..1.0f64,
        eta_y in 0.05..1.0f64,
    ) {
        let p = PatientParams::equilibria_calibrated();
        let c = flat_inverse(s.x, dx, s.y, dy, &p, eta_x, eta_y).unwrap();
        let d = rhs(s, c.u, c.v, eta_x, eta_y, &p).unwrap();
        prop_assert!((d.dx - dx).abs() <= 1e-9 * dx.abs().max(1.0));
        prop_assert!((d.dy - dy).abs() <= 1e-9 * dy.abs().max(1.0));
    }

    #[test]
    fn clipping_is_idempotent(u in prop::collection::vec(-5.0..5.0f64, 1..50)) {
        let once = clip_schedule(&u, &u).unwrap();
        let twice = clip_schedule(&once.u_ol, &once.v_ol).unwrap();
        prop_assert_eq!(&once.u_ol, &twice.u_ol);
        for (a, b) in u.iter().zip(&once.u_ol) {
            prop_assert!(*b >= 0.0);
            prop_assert_eq!(*b, a.max(0.0));
        }
    }

    #[test]
    fn slower_ramps_have_smaller_peak_slopes(
        start in state(),
        goal in state(),
        k in 1u32..200,
        extra in 1u32..200,
    ) {
        let fast = k as f64 / 24.0;
        let slow = (k + extra) as f64 / 24.0;
        let peak = |ramp: f64| {
            let r = plan_reference(start, goal, slow, ramp, 1.0 / 48.0).unwrap();
            let px = r.dx_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let py = r.dy_ref.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (px, py)
        };
        let (fx, fy) = peak(fast);
        let (sx, sy) = peak(slow);
        prop_assert!(sx <= fx * (1.0 + 1e-12));
        prop_assert!(sy <= fy * (1.0 + 1e-12));
    }

    #[test]
    fn ramp_endpoints_are_exact(start in state(), goal in state(), ramp in 0.1..40.0f64, after in 0.0..10.0f64) {
        let plan = RampPlan::new(start, goal, ramp).unwrap();
        let a = plan.eval(0.0);
        prop_assert_eq!((a.x, a.y, a.dx, a.dy), (start.x, start.y, 0.0, 0.0));
        let b = plan.eval(ramp + after);
        prop_assert_eq!((b.x, b.y, b.dx, b.dy), (goal.x, goal.y, 0.0, 0.0));
    }

    #[test]
    fn estimator_error_is_second_order(
        f in -10.0..10.0f64,
        alpha in prop_oneof![-2.0..-0.5f64, 0.5..2.0f64],
        t_end in 1.0..3.0f64,
        halvings in 0u32..3,
    ) {
        let dt = 1.0 / 48.0 / f64::from(1u32 << halvings);
        let tau = 20.0 / 48.0;
        let w = 2.0 * PI / 5.0;
        let u = |t: f64| 0.4 + 0.3 * (w * t + 0.3).sin();
        let z = |t: f64| 0.2 + f * t + alpha * (0.4 * t - 0.3 / w * ((w * t + 0.3).cos() - 0.3f64.cos()));
        let n = (tau / dt).round() as usize;
        let t0 = t_end - n as f64 * dt;
        let mut h = LoopHistory::new(dt, tau);
        for j in 0..=n {
            let t = t0 + j as f64 * dt;
            h.push(t, z(t)).unwrap();
            h.set_latest_input(u(t));
        }
        for (q, c) in [(Quadrature::Trapezoid, C_TRAPEZOID), (Quadrature::Simpson, C_SIMPSON)] {
            let err = (estimate_f(&h, tau, alpha, q).unwrap() - f).abs();
            prop_assert!(err <= c * (1.0 + f.abs()) * dt * dt, "{:?}: {:e}", q, err);
        }
    }

    #[test]
    fn error_contracts_after_warm_up(
        z0 in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64],
        f in -10.0..10.0f64,
        alpha in prop_oneof![-1e4..-1.0f64, 1.0..100.0f64],
        k in prop_oneof![Just(10.0f64), Just(100.0f64)],
    ) {
        let dt = 1.0 / 480.0;
        let tau = 20.0 * dt;
        let mut h = LoopHistory::new(dt, tau);
        let mut z = z0;
        let mut prev: Option<f64> = None;
        for i in 0..400 {
            h.push(i as f64 * dt, z).unwrap();
            let u = match estimate_f(&h, tau, alpha, Quadrature::ZeroOrderHold) {
                Ok(f_hat) => {
                    if let Some(p) = prev {
                        prop_assert!(z.abs() <= p + 1e-9 * (1.0 + p), "step {}: {} > {}", i, z.abs(), p);
                    }
                    prev = Some(z.abs());
                    ip_control(f_hat, z, k, alpha)
                }
                Err(_) => 0.0,
            };
            h.set_latest_input(u);
            z += dt * (f + alpha * u);
        }
        prop_assert!(prev.is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenarios_keep_states_positive_and_doses_nonnegative(
        x in 50.0..770.0f64,
        y in 0.02..2.0f64,
        ramp_quarters in 4u32..80,
        eta_x in 0.1..1.0f64,
        eta_y in 0.1..1.0f64,
        closed in any::<bool>(),
    ) {
        let mut cfg = preset("mismatch").unwrap();
        cfg.initial = PatientState::new(x, y);
        cfg.reference.ramp_time = f64::from(ramp_quarters) / 4.0;
        cfg.eta_x_true = DisturbanceProfile::Constant(eta_x);
        cfg.eta_y_true = DisturbanceProfile::Constant(eta_y);
        cfg.controller_mode = if closed { ControllerMode::ClosedLoop } else { ControllerMode::OpenLoop };
        let rec = run_scenario(&cfg).unwrap();
        for r in &rec.rows {
            prop_assert!(r.x > 0.0 && r.y > 0.0);
            prop_assert!(r.u_cl >= 0.0 && r.v_cl >= 0.0 && r.u_ol >= 0.0 && r.v_ol >= 0.0);
        }
    }
}
