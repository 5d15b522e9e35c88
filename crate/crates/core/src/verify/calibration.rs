//! Integrator calibration on the bilinear rotation, whose exact solution
//! from `(1, 0)` with unit step sizes is `(cos t, sin t)`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Orientation, StepSizes};
use crate::error::Result;
use crate::exec::Exec;
use crate::integrate::{integrate, IntegratorConfig};
use crate::problems::make_bilinear;

/// Bound on the radius drift for the calibration run.
pub const CONSERVATION_TOL: f64 = 1e-8;

/// Accepted range for the observed error ratio when halving the step.
pub const ORDER_RATIO_RANGE: (f64, f64) = (14.0, 18.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub horizon: f64,
    pub dt: f64,
    /// `max_t | |z(t)| - |z(0)| |`.
    pub max_drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// With `alpha = beta` the bilinear flow is a rotation, so `|(x, y)|` is
/// conserved; reports the largest drift over the recorded samples.
pub fn conservation_drift(horizon: f64, dt: f64, step: f64) -> Result<ConservationReport> {
    let problem = make_bilinear(1)?;
    let steps = StepSizes::new(step, step, 1.0, Orientation::FastY)?;
    let traj = integrate(
        &problem,
        &steps,
        &[1.0],
        &[0.0],
        &IntegratorConfig::rk4(horizon, dt),
    )?;
    let r0 = 1.0;
    let max_drift = traj
        .samples
        .iter()
        .map(|s| (s.state.x[0].hypot(s.state.y[0]) - r0).abs())
        .fold(0.0, f64::max);
    Ok(ConservationReport {
        horizon,
        dt,
        max_drift,
        tolerance: CONSERVATION_TOL,
        pass: max_drift <= CONSERVATION_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub horizon: f64,
    pub dt: f64,
    pub error_dt: f64,
    pub error_half_dt: f64,
    /// `error_dt / error_half_dt`; 16 for a fourth-order method.
    pub ratio: f64,
    pub order: f64,
    pub pass: bool,
}

/// Final-state error against `(cos T, sin T)` at `dt` and `dt/2`.
pub fn rk4_order_estimate(exec: Exec, horizon: f64, dt: f64) -> Result<OrderReport> {
    let problem = make_bilinear(1)?;
    let steps = StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY)?;
    let error = |h: f64| -> Result<f64> {
        let traj = integrate(
            &problem,
            &steps,
            &[1.0],
            &[0.0],
            &IntegratorConfig::rk4(horizon, h),
        )?;
        let end = traj.final_state();
        Ok((end.x[0] - horizon.cos()).hypot(end.y[0] - horizon.sin()))
    };
    let (a, b) = exec.join(|| error(dt), || error(dt / 2.0));
    let (error_dt, error_half_dt) = (a?, b?);
    let ratio = error_dt / error_half_dt;
    Ok(OrderReport {
        horizon,
        dt,
        error_dt,
        error_half_dt,
        ratio,
        order: ratio.log2(),
        pass: (ORDER_RATIO_RANGE.0..=ORDER_RATIO_RANGE.1).contains(&ratio),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_ratio_near_sixteen() {
        let r = rk4_order_estimate(Exec::default(), 10.0, 0.1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.order - 4.0).abs() < 0.2);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn short_rotation_conserves_radius() {
        let r = conservation_drift(6.2832, 1e-3, 1.0).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
