//! Virtual-patient dynamics.
//!
//! ```text
//! dx/dt = -mu_c x ln(x / x_inf) - gamma x y - x u eta_x
//! dy/dt =  mu_i (x - beta x^2) y - delta y + alpha + y v eta_y
//! ```
//!
//! `x` is the tumor burden, `y` the immune cell density, `u` and `v` the
//! chemo- and immunotherapy dose rates and `eta_x`, `eta_y` the fractions of
//! each drug that actually reach the tumor.

use crate::integrate::rk4_step;
use crate::params::PatientParams;
use crate::{Error, Result};
use alloc::vec::Vec;
use libm::{fabs, log, log10, pow, sqrt};

/// Tumor burden and immune density at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientState {
    pub x: f64,
    pub y: f64,
}

impl PatientState {
    pub const fn new(x: f64, y: f64) -> Self {
        PatientState { x, y }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > 0.0 && self.x.is_finite()) {
            return Err(Error::Domain {
                what: "x",
                value: self.x,
            });
        }
        if !(self.y > 0.0 && self.y.is_finite()) {
            return Err(Error::Domain {
                what: "y",
                value: self.y,
            });
        }
        Ok(())
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &PatientState) -> f64 {
        fabs(self.x - other.x).max(fabs(self.y - other.y))
    }

    /// Whether `self` lies within `(tol_x, tol_y)` of `center`, per coordinate.
    pub fn within(&self, center: &PatientState, tol_x: f64, tol_y: f64) -> bool {
        fabs(self.x - center.x) <= tol_x && fabs(self.y - center.y) <= tol_y
    }
}

/// Time derivative of a [`PatientState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub dx: f64,
    pub dy: f64,
}

impl Derivative {
    pub fn max_norm(&self) -> f64 {
        fabs(self.dx).max(fabs(self.dy))
    }
}

/// Right-hand side of the patient model.
///
/// Dose rates are expected to be nonnegative and the delivery fractions to
/// lie in `[0, 1]`; neither is checked here so that the flatness inversion
/// can be verified on unclipped controls. Non-positive `x` or `y` is an
/// error, never clamped.
pub fn rhs(
    state: PatientState,
    u: f64,
    v: f64,
    eta_x: f64,
    eta_y: f64,
    p: &PatientParams,
) -> Result<Derivative> {
    state.validate()?;
    let PatientState { x, y } = state;
    let dx = -p.mu_c * x * log(x / p.x_inf) - p.gamma * x * y - x * u * eta_x;
    let dy = p.mu_i * (x - p.beta * x * x) * y - p.delta * y + p.alpha + y * v * eta_y;
    Ok(Derivative { dx, dy })
}

/// Analytic Jacobian of the uncontrolled right-hand side, row-major.
fn jacobian_analytic(state: PatientState, p: &PatientParams) -> [[f64; 2]; 2] {
    let PatientState { x, y } = state;
    [
        [
            -p.mu_c * (log(x / p.x_inf) + 1.0) - p.gamma * y,
            -p.gamma * x,
        ],
        [
            p.mu_i * (1.0 - 2.0 * p.beta * x) * y,
            p.mu_i * (x - p.beta * x * x) - p.delta,
        ],
    ]
}

/// Central finite-difference Jacobian of the uncontrolled right-hand side
/// (relative step `1e-6`).
pub fn jacobian(state: PatientState, p: &PatientParams) -> Result<[[f64; 2]; 2]> {
    const REL_STEP: f64 = 1e-6;
    state.validate()?;
    let hx = REL_STEP * state.x;
    let hy = REL_STEP * state.y;
    let f = |s: PatientState| rhs(s, 0.0, 0.0, 0.0, 0.0, p);
    let xp = f(PatientState::new(state.x + hx, state.y))?;
    let xm = f(PatientState::new(state.x - hx, state.y))?;
    let yp = f(PatientState::new(state.x, state.y + hy))?;
    let ym = f(PatientState::new(state.x, state.y - hy))?;
    Ok([
        [(xp.dx - xm.dx) / (2.0 * hx), (yp.dx - ym.dx) / (2.0 * hy)],
        [(xp.dy - xm.dy) / (2.0 * hx), (yp.dy - ym.dy) / (2.0 * hy)],
    ])
}

/// Eigenvalues of a real 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalues {
    /// Real parts, ascending.
    pub re: [f64; 2],
    /// Magnitude of the imaginary part (zero for real eigenvalues).
    pub im: f64,
}

pub fn eigenvalues(m: [[f64; 2]; 2]) -> Eigenvalues {
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let r = sqrt(disc);
        Eigenvalues {
            re: [half_trace - r, half_trace + r],
            im: 0.0,
        }
    } else {
        Eigenvalues {
            re: [half_trace, half_trace],
            im: sqrt(-disc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// Both eigenvalues have negative real part.
    Stable,
    /// Real eigenvalues of opposite sign.
    Saddle,
    Unstable,
}

impl Stability {
    pub fn from_eigenvalues(ev: &Eigenvalues) -> Self {
        if ev.re[1] < 0.0 {
            Stability::Stable
        } else if ev.re[0] < 0.0 && ev.im == 0.0 {
            Stability::Saddle
        } else {
            Stability::Unstable
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Saddle => "saddle",
            Stability::Unstable => "unstable",
        }
    }
}

/// One rest point of the uncontrolled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub state: PatientState,
    /// Max-norm of the uncontrolled right-hand side at `state`.
    pub residual: f64,
    pub eigenvalues: Eigenvalues,
    pub stability: Stability,
}

/// The three rest points, sorted by tumor burden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSet {
    pub benign: Equilibrium,
    pub saddle: Equilibrium,
    pub malignant: Equilibrium,
}

impl EquilibriumSet {
    pub fn as_array(&self) -> [&Equilibrium; 3] {
        [&self.benign, &self.saddle, &self.malignant]
    }
}

const SEED_GRID: usize = 20;
const MERGE_DISTANCE: f64 = 1e-6;
const MAX_RESIDUAL: f64 = 1e-8;

/// Nontrivial part of the uncontrolled vector field: `dx/dt / x` and
/// `dy/dt`. Dividing out `x` removes the spurious root on `x = 0`.
fn reduced_field(s: PatientState, p: &PatientParams) -> Option<Derivative> {
    let d = rhs(s, 0.0, 0.0, 0.0, 0.0, p).ok()?;
    Some(Derivative {
        dx: d.dx / s.x,
        dy: d.dy,
    })
}

fn reduced_jacobian(s: PatientState, p: &PatientParams) -> [[f64; 2]; 2] {
    let j = jacobian_analytic(s, p);
    [[-p.mu_c / s.x, -p.gamma], j[1]]
}

/// Damped Newton iteration on [`reduced_field`]. Steps are halved until the
/// iterate stays positive and the residual does not grow.
fn newton(seed: PatientState, p: &PatientParams) -> Option<(PatientState, f64)> {
    let mut s = seed;
    let mut g = reduced_field(s, p)?;
    for _ in 0..100 {
        let j = reduced_jacobian(s, p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step_x = -(j[1][1] * g.dx - j[0][1] * g.dy) / det;
        let step_y = -(-j[1][0] * g.dx + j[0][0] * g.dy) / det;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = PatientState::new(s.x + lambda * step_x, s.y + lambda * step_y);
            if let Some(gt) = reduced_field(trial, p) {
                if gt.max_norm() <= g.max_norm() {
                    accepted = Some((trial, gt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let (next, gn) = accepted?;
        let moved = fabs(next.x - s.x).max(fabs(next.y - s.y));
        s = next;
        g = gn;
        if moved <= 1e-15 * s.x.max(1.0) || g.max_norm() == 0.0 {
            break;
        }
    }
    let r = rhs(s, 0.0, 0.0, 0.0, 0.0, p).ok()?.max_norm();
    (r < MAX_RESIDUAL).then_some((s, r))
}

fn log_space(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (log10(lo), log10(hi));
    (0..n).map(move |i| pow(10.0, a + (b - a) * i as f64 / (n - 1) as f64))
}

/// Locates the three rest points of the uncontrolled system.
///
/// Damped Newton is started from a 20x20 log-spaced grid over
/// `[1, x_inf] x [1e-3, 10]`; roots closer than `1e-6` are merged. Stability
/// comes from the eigenvalues of the finite-difference Jacobian.
pub fn find_equilibria(p: &PatientParams) -> Result<EquilibriumSet> {
    p.validate()?;
    let mut roots: Vec<(PatientState, f64)> = Vec::new();
    for x0 in log_space(1.0, p.x_inf, SEED_GRID) {
        for y0 in log_space(1e-3, 10.0, SEED_GRID) {
            let Some((root, r)) = newton(PatientState::new(x0, y0), p) else {
                continue;
            };
            match roots
                .iter_mut()
                .find(|(s, _)| s.distance(&root) < MERGE_DISTANCE)
            {
                Some(existing) if r < existing.1 => *existing = (root, r),
                Some(_) => {}
                None => roots.push((root, r)),
            }
        }
    }
    if roots.len() != 3 {
        return Err(Error::Convergence { found: roots.len() });
    }
    roots.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
    let mut out = [None; 3];
    for (slot, (state, residual)) in out.iter_mut().zip(roots) {
        let eigenvalues = eigenvalues(jacobian(state, p)?);
        *slot = Some(Equilibrium {
            state,
            residual,
            eigenvalues,
            stability: Stability::from_eigenvalues(&eigenvalues),
        });
    }
    let [Some(benign), Some(saddle), Some(malignant)] = out else {
        unreachable!("three roots were collected");
    };
    Ok(EquilibriumSet {
        benign,
        saddle,
        malignant,
    })
}

/// Outcome of [`classify_basin`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basin {
    Benign,
    Malignant,
    Undetermined,
}

impl Basin {
    pub fn label(&self) -> &'static str {
        match self {
            Basin::Benign => "benign",
            Basin::Malignant => "malignant",
            Basin::Undetermined => "undetermined",
        }
    }
}

/// Tolerance ball used to decide arrival at an equilibrium.
pub const ARRIVAL_TOL_X: f64 = 1.0;
pub const ARRIVAL_TOL_Y: f64 = 0.05;

/// Step used for basin classification.
pub const BASIN_DT: f64 = 1.0 / 48.0;

/// Labels a terminal state by the equilibrium ball it lies in.
pub fn basin_of(state: &PatientState, eq: &EquilibriumSet) -> Basin {
    if state.within(&eq.benign.state, ARRIVAL_TOL_X, ARRIVAL_TOL_Y) {
        Basin::Benign
    } else if state.within(&eq.malignant.state, ARRIVAL_TOL_X, ARRIVAL_TOL_Y) {
        Basin::Malignant
    } else {
        Basin::Undetermined
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinReport {
    pub basin: Basin,
    /// Last state reached (the aborting one's predecessor on blow-up).
    pub endpoint: PatientState,
    /// Set when integration could not reach the horizon.
    pub diagnostic: Option<Error>,
}

/// Integrates the uncontrolled system for `horizon` days and reports which
/// equilibrium ball (`|dx| <= 1`, `|dy| <= 0.05`) the endpoint falls in.
pub fn classify_basin(state: PatientState, p: &PatientParams, horizon: f64) -> Result<BasinReport> {
    state.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be > 0"));
    }
    let eq = find_equilibria(p)?;
    classify_basin_with(state, p, &eq, horizon)
}

/// [`classify_basin`] with precomputed equilibria.
pub fn classify_basin_with(
    state: PatientState,
    p: &PatientParams,
    eq: &EquilibriumSet,
    horizon: f64,
) -> Result<BasinReport> {
    state.validate()?;
    let steps = libm::ceil(horizon / BASIN_DT) as usize;
    let mut s = state;
    for step in 0..steps {
        match rk4_step(s, 0.0, 0.0, 0.0, 0.0, p, BASIN_DT) {
            Ok(next) => s = next,
            Err(_) => {
                let t = step as f64 * BASIN_DT;
                return Ok(BasinReport {
                    basin: Basin::Undetermined,
                    endpoint: s,
                    diagnostic: Some(Error::IntegrationAbort {
                        step,
                        t,
                        x: s.x,
                        y: s.y,
                    }),
                });
            }
        }
    }
    Ok(BasinReport {
        basin: basin_of(&s, eq),
        endpoint: s,
        diagnostic: None,
    })
}
