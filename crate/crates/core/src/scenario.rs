//! Scenario configuration, simulation and records.
//!
//! A scenario steps the true plant (driven by the `eta_*_true` profiles)
//! with fixed-step RK4 on a uniform grid, while the planner and the
//! controller only know the assumed delivery fractions. Every grid instant is
//! recorded, including the last one, so a record has `duration / dt + 1`
//! rows.

use crate::disturbance::{very_sick_eta_x, very_sick_eta_y, DisturbanceProfile};
use crate::integrate::rk4_step;
use crate::mfc::{MfcController, UltraLocalConfig};
use crate::model::{basin_of, find_equilibria, Basin, EquilibriumSet, PatientState};
use crate::params::{PatientParams, EQUILIBRIA_CALIBRATED};
use crate::planner::{nominal_at, step_count, RampPlan};
use crate::{Error, Result};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use libm::fabs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// No drugs at all.
    None,
    /// Clipped nominal schedule only.
    OpenLoop,
    /// Nominal schedule plus model-free correction.
    ClosedLoop,
}

impl ControllerMode {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerMode::None => "none",
            ControllerMode::OpenLoop => "open-loop",
            ControllerMode::ClosedLoop => "closed-loop",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "none" => Some(ControllerMode::None),
            "open-loop" => Some(ControllerMode::OpenLoop),
            "closed-loop" => Some(ControllerMode::ClosedLoop),
            _ => None,
        }
    }
}

/// Target of the reference trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// The benign equilibrium of the scenario's parameters.
    Benign,
    State(PatientState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub goal: Goal,
    pub ramp_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Name of the preset `params` was derived from; informational.
    pub params_preset: String,
    pub params: PatientParams,
    pub initial: PatientState,
    pub duration: f64,
    pub dt: f64,
    pub controller_mode: ControllerMode,
    pub reference: ReferenceSpec,
    pub ulm: UltraLocalConfig,
    pub eta_x_true: DisturbanceProfile,
    pub eta_y_true: DisturbanceProfile,
    pub eta_x_assumed: f64,
    pub eta_y_assumed: f64,
    /// Immunotherapy only: the applied chemo dose is forced to zero.
    pub force_zero_u: bool,
    /// Carried for randomized disturbance profiles and hashed with the
    /// config; none of the built-in profiles draws random numbers.
    pub seed: u64,
}

pub const DEFAULT_DURATION: f64 = 60.0;
pub const DEFAULT_DT: f64 = 1.0 / 48.0;
pub const FAST_RAMP: f64 = 5.0;
pub const SLOW_RAMP: f64 = 20.0;

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "custom".to_string(),
            params_preset: EQUILIBRIA_CALIBRATED.to_string(),
            params: PatientParams::equilibria_calibrated(),
            initial: PatientState::new(500.0, 0.5),
            duration: DEFAULT_DURATION,
            dt: DEFAULT_DT,
            controller_mode: ControllerMode::ClosedLoop,
            reference: ReferenceSpec {
                goal: Goal::Benign,
                ramp_time: FAST_RAMP,
            },
            ulm: UltraLocalConfig::with_default_gains(DEFAULT_DT),
            eta_x_true: DisturbanceProfile::Constant(0.5),
            eta_y_true: DisturbanceProfile::Constant(0.5),
            eta_x_assumed: 0.5,
            eta_y_assumed: 0.5,
            force_zero_u: false,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial.validate()?;
        step_count(self.duration, self.dt)?;
        if self.controller_mode != ControllerMode::None {
            let ramp = self.reference.ramp_time;
            if !(ramp > 0.0 && ramp <= self.duration) {
                return Err(Error::InvalidArgument(
                    "ramp_time must lie in (0, duration]",
                ));
            }
            if let Goal::State(g) = self.reference.goal {
                g.validate()?;
            }
            for eta in [self.eta_x_assumed, self.eta_y_assumed] {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(Error::InvalidArgument("assumed eta must lie in (0, 1]"));
                }
            }
        }
        if self.controller_mode == ControllerMode::ClosedLoop {
            self.ulm.validate(self.dt)?;
        }
        self.eta_x_true.validate()?;
        self.eta_y_true.validate()
    }
}

/// Names of the built-in scenarios.
pub const PRESETS: [&str; 6] = [
    "fast",
    "slow",
    "mismatch",
    "very-sick",
    "very-sick-open-loop",
    "uncontrolled",
];

/// Built-in scenarios. All use the `equilibria-calibrated` parameters, a
/// 60-day horizon, 30-minute sampling and (for the closed-loop ones)
/// `alpha_x = -10000`, `alpha_y = 1`, `K_x = 100`, `K_y = 10`.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        name: name.to_string(),
        ..Default::default()
    };
    let very_sick = ScenarioConfig {
        initial: PatientState::new(770.0, 0.1),
        eta_x_true: very_sick_eta_x(),
        eta_y_true: very_sick_eta_y(),
        force_zero_u: true,
        ..base.clone()
    };
    let cfg = match name {
        "fast" => base,
        "slow" => ScenarioConfig {
            reference: ReferenceSpec {
                goal: Goal::Benign,
                ramp_time: SLOW_RAMP,
            },
            ..base
        },
        "mismatch" => ScenarioConfig {
            eta_x_true: DisturbanceProfile::Constant(0.31),
            eta_y_true: DisturbanceProfile::Constant(0.75),
            ..base
        },
        "very-sick" => very_sick,
        "very-sick-open-loop" => ScenarioConfig {
            controller_mode: ControllerMode::OpenLoop,
            ..very_sick
        },
        "uncontrolled" => ScenarioConfig {
            controller_mode: ControllerMode::None,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// One recorded grid instant. Controls are the values held over
/// `[t, t + dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// NaN when the scenario has no reference.
    pub x_ref: f64,
    pub y_ref: f64,
    pub u_ol: f64,
    pub v_ol: f64,
    pub u_mfc: f64,
    pub v_mfc: f64,
    pub u_cl: f64,
    pub v_cl: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub fx_est: f64,
    pub fy_est: f64,
    pub int_u: f64,
    pub int_v: f64,
}

impl Row {
    pub fn state(&self) -> PatientState {
        PatientState::new(self.x, self.y)
    }

    /// Max-norm tracking error, `None` without a reference.
    pub fn tracking_error(&self) -> Option<f64> {
        (!self.x_ref.is_nan()).then(|| fabs(self.x - self.x_ref).max(fabs(self.y - self.y_ref)))
    }
}

/// Length of the window used by the steady-state check, days.
pub const STEADY_WINDOW: f64 = 10.0;
pub const STEADY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateCheck {
    /// Largest coordinate range (max - min) over the final window.
    pub max_change: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub final_time: f64,
    pub final_state: PatientState,
    pub distance_benign: f64,
    pub distance_saddle: f64,
    pub distance_malignant: f64,
    pub basin: Basin,
    pub total_u: f64,
    pub total_v: f64,
    /// `None` when the run was aborted or is shorter than the window.
    pub steady_state: Option<SteadyStateCheck>,
    /// First instant from which the state stays in the benign ball.
    pub time_to_benign: Option<f64>,
    /// Grid instants where a true eta profile had to be clamped to `[0, 1]`.
    pub eta_clamped_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub dt: f64,
    pub rows: Vec<Row>,
    pub equilibria: EquilibriumSet,
    pub summary: Summary,
    /// Set when the integrator left the positive quadrant; `rows` then holds
    /// everything up to the last valid state.
    pub abort: Option<Error>,
}

impl SimulationRecord {
    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

/// Runs one scenario.
///
/// Invalid configurations are errors; integration failures are not: they
/// end the run and are reported in [`SimulationRecord::abort`] next to the
/// partial record.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationRecord> {
    cfg.validate()?;
    let p = &cfg.params;
    let dt = cfg.dt;
    let n = step_count(cfg.duration, dt)?;
    let equilibria = find_equilibria(p)?;
    let plan = match cfg.controller_mode {
        ControllerMode::None => None,
        _ => {
            let goal = match cfg.reference.goal {
                Goal::Benign => equilibria.benign.state,
                Goal::State(s) => s,
            };
            Some(RampPlan::new(cfg.initial, goal, cfg.reference.ramp_time)?)
        }
    };
    let mut controller = match cfg.controller_mode {
        ControllerMode::ClosedLoop => Some(MfcController::new(cfg.ulm, dt)?),
        _ => None,
    };

    let mut rows = Vec::with_capacity(n + 1);
    let mut state = cfg.initial;
    let mut abort = None;
    let mut clamped = 0usize;
    let (mut int_u, mut int_v) = (0.0, 0.0);
    for k in 0..=n {
        let t = k as f64 * dt;
        let ex = cfg.eta_x_true.eval(t);
        let ey = cfg.eta_y_true.eval(t);
        clamped += usize::from(ex.clamped || ey.clamped);

        let mut row = Row {
            t,
            x: state.x,
            y: state.y,
            x_ref: f64::NAN,
            y_ref: f64::NAN,
            u_ol: 0.0,
            v_ol: 0.0,
            u_mfc: 0.0,
            v_mfc: 0.0,
            u_cl: 0.0,
            v_cl: 0.0,
            eta_x: ex.value,
            eta_y: ey.value,
            fx_est: 0.0,
            fy_est: 0.0,
            int_u: 0.0,
            int_v: 0.0,
        };
        if let Some(plan) = &plan {
            let r = plan.eval(t);
            row.x_ref = r.x;
            row.y_ref = r.y;
            // Held over [t, t + dt): sample the nominal control mid-step.
            let c = nominal_at(plan, t + 0.5 * dt, p, cfg.eta_x_assumed, cfg.eta_y_assumed)?;
            row.u_ol = c.u.max(0.0);
            row.v_ol = c.v.max(0.0);
            row.u_cl = row.u_ol;
            row.v_cl = row.v_ol;
            if let Some(ctrl) = controller.as_mut() {
                let out = ctrl.step(t, state, PatientState::new(r.x, r.y), row.u_ol, row.v_ol)?;
                row.u_mfc = out.u_mfc;
                row.v_mfc = out.v_mfc;
                row.u_cl = out.u_cl;
                row.v_cl = out.v_cl;
                row.fx_est = out.f_x;
                row.fy_est = out.f_y;
            }
        }
        if cfg.force_zero_u {
            row.u_cl = 0.0;
        }
        if let Some(prev) = rows.last() {
            let prev: &Row = prev;
            int_u += 0.5 * dt * (prev.u_cl + row.u_cl);
            int_v += 0.5 * dt * (prev.v_cl + row.v_cl);
        }
        row.int_u = int_u;
        row.int_v = int_v;
        rows.push(row);

        if k < n {
            match rk4_step(state, row.u_cl, row.v_cl, ex.value, ey.value, p, dt) {
                Ok(next) => state = next,
                Err(_) => {
                    abort = Some(Error::IntegrationAbort {
                        step: k,
                        t,
                        x: state.x,
                        y: state.y,
                    });
                    break;
                }
            }
        }
    }

    let summary = summarize(&rows, &equilibria, dt, abort.is_none(), clamped);
    Ok(SimulationRecord {
        dt,
        rows,
        equilibria,
        summary,
        abort,
    })
}

fn summarize(
    rows: &[Row],
    eq: &EquilibriumSet,
    dt: f64,
    completed: bool,
    eta_clamped_samples: usize,
) -> Summary {
    let last = rows.last().copied().expect("a record has at least one row");
    let final_state = last.state();
    let window_rows = libm::round(STEADY_WINDOW / dt) as usize + 1;
    let steady_state = (completed && rows.len() >= window_rows).then(|| {
        let tail = &rows[rows.len() - window_rows..];
        let range = |f: fn(&Row) -> f64| {
            let (lo, hi) = tail
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        };
        let max_change = range(|r| r.x).max(range(|r| r.y));
        SteadyStateCheck {
            max_change,
            passed: max_change < STEADY_TOL,
        }
    });
    let benign = eq.benign.state;
    let in_ball = |r: &Row| basin_of(&r.state(), eq) == Basin::Benign;
    let time_to_benign = if in_ball(&last) {
        let first_outside = rows.iter().rposition(|r| !in_ball(r));
        Some(first_outside.map_or(rows[0].t, |i| rows[i + 1].t))
    } else {
        None
    };
    Summary {
        final_time: last.t,
        final_state,
        distance_benign: final_state.distance(&benign),
        distance_saddle: final_state.distance(&eq.saddle.state),
        distance_malignant: final_state.distance(&eq.malignant.state),
        basin: basin_of(&final_state, eq),
        total_u: last.int_u,
        total_v: last.int_v,
        steady_state,
        time_to_benign,
        eta_clamped_samples,
    }
}

/// Side-by-side comparison of two records on the same grid; deltas are
/// `b - a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub total_u: (f64, f64),
    pub total_v: (f64, f64),
    pub delta_total_u: f64,
    pub delta_total_v: f64,
    pub max_tracking_error: (Option<f64>, Option<f64>),
    pub terminal_tracking_error: (Option<f64>, Option<f64>),
    pub delta_max_tracking_error: Option<f64>,
    pub delta_terminal_tracking_error: Option<f64>,
    pub distance_benign: (f64, f64),
    pub delta_distance_benign: f64,
    pub basins: (Basin, Basin),
}

pub fn compare_records(a: &SimulationRecord, b: &SimulationRecord) -> Result<Comparison> {
    if a.rows.len() != b.rows.len() || a.dt.to_bits() != b.dt.to_bits() {
        return Err(Error::GridMismatch {
            left: a.rows.len(),
            right: b.rows.len(),
        });
    }
    let max_err = |r: &SimulationRecord| {
        r.rows
            .iter()
            .filter_map(Row::tracking_error)
            .reduce(f64::max)
    };
    let terminal_err = |r: &SimulationRecord| r.rows.last().and_then(Row::tracking_error);
    let delta = |x: Option<f64>, y: Option<f64>| Some(y? - x?);
    let (ma, mb) = (max_err(a), max_err(b));
    let (ta, tb) = (terminal_err(a), terminal_err(b));
    let (sa, sb) = (&a.summary, &b.summary);
    Ok(Comparison {
        total_u: (sa.total_u, sb.total_u),
        total_v: (sa.total_v, sb.total_v),
        delta_total_u: sb.total_u - sa.total_u,
        delta_total_v: sb.total_v - sa.total_v,
        max_tracking_error: (ma, mb),
        terminal_tracking_error: (ta, tb),
        delta_max_tracking_error: delta(ma, mb),
        delta_terminal_tracking_error: delta(ta, tb),
        distance_benign: (sa.distance_benign, sb.distance_benign),
        delta_distance_benign: sb.distance_benign - sa.distance_benign,
        basins: (sa.basin, sb.basin),
    })
}
