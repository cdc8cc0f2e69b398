//! Deterministic in-silico oncology control toolkit.
//!
//! The crate simulates a two-state tumor (`x`) / immune (`y`) virtual patient
//! under combined chemotherapy (`u`) and immunotherapy (`v`), plans nominal
//! dose schedules by inverting the dynamics along a reference trajectory of
//! the flat outputs `(x, y)`, and closes the loop with a model-free
//! intelligent-proportional controller built on first-order ultra-local
//! models of the tracking errors.
//!
//! The crate is `no_std` (it needs `alloc`) and uses `libm` for elementary
//! functions, so results are bit-identical across hosts. File formats, CSV
//! output and the command line live in the companion `onco-cli` crate.
//!
//! Module map:
//!
//! * [`params`], [`model`]: patient parameters, dynamics, equilibria, basins.
//! * [`integrate`]: fixed-step RK4 with zero-order-hold inputs.
//! * [`planner`]: quintic references, flatness inversion, clipping, shooting.
//! * [`mfc`]: ultra-local estimator, iP law, closed-loop composition.
//! * [`disturbance`]: delivery-fraction profiles `eta(t)`.
//! * [`scenario`]: scenario configuration, presets, simulation records.
#![no_std]
// `!(v > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

mod error;

pub mod disturbance;
pub mod integrate;
pub mod mfc;
pub mod model;
pub mod params;
pub mod planner;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{Basin, EquilibriumSet, PatientState};
pub use params::PatientParams;
