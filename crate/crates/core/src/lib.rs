//! Simulator and verification lab for continuous-time two-time-scale
//! gradient descent-ascent dynamics
//! `x' = -alpha grad_x f(x, y)`, `y' = beta grad_y f(x, y)`.
//!
//! - [`problems`]: benchmark objectives with certified smoothness and PL
//!   constants.
//! - [`dynamics`]: the vector field, condition number and per-regime step
//!   sizes.
//! - [`lyapunov`]: the coupled Lyapunov functions and their time derivatives.
//! - [`integrate`]: RK4 / Dormand-Prince integration with an error budget.
//! - [`verify`]: rate-bound checks, derivative-inequality audits, gradient
//!   checks and integrator calibration.
//! - [`experiment`] and [`report`]: runs, suites and their outputs.
//!
//! Data-parallel loops go through [`Exec`]; without the default `parallel`
//! feature they run sequentially with identical results.

// `!(v > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod integrate;
pub mod linalg;
pub mod lyapunov;
pub mod problems;
pub mod report;
pub mod verify;

pub use dynamics::{gdad_field, schedule_for, Orientation, StepSizes};
pub use error::{GdadError, Result};
pub use exec::Exec;
pub use integrate::{integrate, IntegratorConfig, Method, State, Trajectory};
pub use lyapunov::{lyapunov_eval, LyapunovValues};
pub use problems::{make_problem, ObjectiveProblem, ProblemParams, RegimeTag};
