//! Regime-specific Lyapunov functions and finite-difference estimates of
//! their time derivatives along the flow.
//!
//! | regime | `v1` | `v2` |
//! |---|---|---|
//! | two-sided PL | `max_y f(x,.) - minmax` | `max_y f(x,.) - f(x,y)` |
//! | nonconvex-PL | `f(x,y) - f_lower` | `max_y f(x,.) - f(x,y)` |
//! | nonconvex-strongly concave | `f(x,y) - f_lower` | `1/2 |beta grad_y f|^2` |
//! | strongly convex-nonconcave | `1/2 |alpha grad_x f|^2` | `f_ref_upper - f(x,y)` |
//!
//! The coupled value is `v1 + w v2` when y is fast and `v2 + w v1` when x is
//! fast, with `w` the step sizes' coupling weight.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Orientation, StepSizes};
use crate::error::{GdadError, Result};
use crate::integrate::{step_rk4, State, Trajectory};
use crate::linalg;
use crate::problems::{inner_max_solve, ObjectiveProblem, RegimeTag};

/// Gradient tolerance for the inner solver when no max oracle exists.
pub const INNER_SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValues {
    pub v1: f64,
    pub v2: f64,
    pub v: f64,
    pub regime: RegimeTag,
}

/// `max_y f(x, y)`, from the oracle when present.
pub fn max_value(problem: &ObjectiveProblem, x: &[f64]) -> Result<f64> {
    match problem.max_oracle() {
        Some(o) => Ok(o.max_value(x)),
        None => inner_max_solve(problem, x, INNER_SOLVE_TOL).map(|(_, v)| v),
    }
}

/// `y*(x)`, from the oracle when present.
pub fn y_star(problem: &ObjectiveProblem, x: &[f64]) -> Result<Vec<f64>> {
    match problem.max_oracle() {
        Some(o) => Ok(o.y_star(x)),
        None => inner_max_solve(problem, x, INNER_SOLVE_TOL).map(|(y, _)| y),
    }
}

pub fn lyapunov_eval(
    problem: &ObjectiveProblem,
    state: &State,
    steps: &StepSizes,
) -> Result<LyapunovValues> {
    let regime = problem
        .regime()
        .ok_or(GdadError::UnsupportedLyapunov { missing: "regime" })?;
    let (x, y) = (&state.x[..], &state.y[..]);
    problem.check_dims(x, y)?;
    let f = problem.eval_f(x, y);
    let need =
        |v: Option<f64>, missing: &'static str| v.ok_or(GdadError::UnsupportedLyapunov { missing });
    let (v1, v2) = match regime {
        RegimeTag::TwoSidedPL => {
            let minmax = need(problem.minmax_value(), "minmax_value")?;
            let phi = max_value(problem, x)?;
            (phi - minmax, phi - f)
        }
        RegimeTag::NonconvexPL => {
            let lower = need(problem.f_lower(), "f_lower")?;
            (f - lower, max_value(problem, x)? - f)
        }
        RegimeTag::NonconvexStronglyConcave => {
            let lower = need(problem.f_lower(), "f_lower")?;
            let gy = problem.grad_y(x, y);
            (
                f - lower,
                0.5 * steps.beta * steps.beta * linalg::norm_sq(&gy),
            )
        }
        RegimeTag::StronglyConvexNonconcave => {
            let upper = need(problem.f_ref_upper(), "f_ref_upper")?;
            let gx = problem.grad_x(x, y);
            (
                0.5 * steps.alpha * steps.alpha * linalg::norm_sq(&gx),
                upper - f,
            )
        }
    };
    let w = steps.coupling_weight();
    let v = match steps.orientation {
        Orientation::FastY => v1 + w * v2,
        Orientation::FastX => v2 + w * v1,
    };
    Ok(LyapunovValues { v1, v2, v, regime })
}

/// Time derivatives of `(v1, v2, v)` at one trajectory sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRates {
    pub dv1: f64,
    pub dv2: f64,
    pub dv: f64,
    pub h: f64,
    /// Boundary sample: one-sided difference, first-order accurate only.
    pub one_sided: bool,
}

fn difference(a: &LyapunovValues, b: &LyapunovValues, span: f64) -> (f64, f64, f64) {
    (
        (b.v1 - a.v1) / span,
        (b.v2 - a.v2) / span,
        (b.v - a.v) / span,
    )
}

/// Finite-difference time derivative of the Lyapunov values at
/// `trajectory.samples[index]`.
///
/// With `h = None` the neighbouring recorded samples are re-evaluated
/// (central difference inside, one-sided at the ends). With `h = Some(h)`
/// the state is advanced by single RK4 steps of `+h` and `-h`, giving a
/// central difference at offset `h` independent of the recording interval.
pub fn dv_dt_fd(
    problem: &ObjectiveProblem,
    trajectory: &Trajectory,
    steps: &StepSizes,
    index: usize,
    h: Option<f64>,
) -> Result<LyapunovRates> {
    let samples = &trajectory.samples;
    if samples.len() < 2 {
        return Err(GdadError::InsufficientData(
            "finite differences need at least two samples".into(),
        ));
    }
    if index >= samples.len() {
        return Err(GdadError::invalid("index", format!("{index} out of range")));
    }
    let eval = |s: &State| lyapunov_eval(problem, s, steps);
    match h {
        Some(h) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(GdadError::invalid("h", "must be > 0"));
            }
            let here = &samples[index].state;
            let ahead = step_rk4(problem, steps, here, h)?;
            let behind = step_rk4(problem, steps, here, -h)?;
            let (dv1, dv2, dv) = difference(&eval(&behind)?, &eval(&ahead)?, 2.0 * h);
            Ok(LyapunovRates {
                dv1,
                dv2,
                dv,
                h,
                one_sided: false,
            })
        }
        None => {
            let (lo, hi) = if index == 0 {
                (0, 1)
            } else if index == samples.len() - 1 {
                (index - 1, index)
            } else {
                (index - 1, index + 1)
            };
            let (a, b) = (&samples[lo].state, &samples[hi].state);
            let span = b.t - a.t;
            let (dv1, dv2, dv) = difference(&eval(a)?, &eval(b)?, span);
            Ok(LyapunovRates {
                dv1,
                dv2,
                dv,
                h: if hi - lo == 2 { span / 2.0 } else { span },
                one_sided: hi - lo == 1,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{schedule_for, stepsizes_two_sided_pl};
    use crate::integrate::{integrate, IntegratorConfig};
    use crate::problems::{make_bilinear, make_nc_sc_problem, make_quadratic_saddle};

    fn st(x: f64, y: f64) -> State {
        State {
            t: 0.0,
            x: vec![x],
            y: vec![y],
        }
    }

    #[test]
    fn vanishes_at_saddle_and_on_maximizer_manifold() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        let at_saddle = lyapunov_eval(&q, &st(0.0, 0.0), &s).unwrap();
        assert_eq!((at_saddle.v1, at_saddle.v2, at_saddle.v), (0.0, 0.0, 0.0));
        let on_manifold = lyapunov_eval(&q, &st(1.0, 2.0), &s).unwrap();
        assert_eq!(on_manifold.v2, 0.0);
        assert_eq!(on_manifold.v1, 2.5);
    }

    #[test]
    fn velocity_lyapunov_example() {
        // 2-d nc-sc with beta = 2 at a point where grad_y f = (3, 4).
        let p = make_nc_sc_problem(1.0, 1.0).unwrap().with_dim(2).unwrap();
        let s = StepSizes::new(1.0, 2.0, 1.0, Orientation::FastY).unwrap();
        // grad_y = b x - mu_y y = x - y
        let state = State {
            t: 0.0,
            x: vec![3.0, 4.0],
            y: vec![0.0, 0.0],
        };
        assert_eq!(problem_grad_y(&p, &state), vec![3.0, 4.0]);
        assert_eq!(lyapunov_eval(&p, &state, &s).unwrap().v2, 50.0);
    }

    fn problem_grad_y(p: &ObjectiveProblem, s: &State) -> Vec<f64> {
        p.grad_y(&s.x, &s.y)
    }

    #[test]
    fn coupled_weight_under_one_sided_schedule_is_four() {
        let p = crate::problems::make_nc_pl_problem(1.0, 2.0).unwrap();
        let s = schedule_for(RegimeTag::NonconvexPL, p.constants()).unwrap();
        let l = lyapunov_eval(&p, &st(0.7, -0.4), &s).unwrap();
        assert_eq!(l.v, l.v1 + 4.0 * l.v2);
    }

    #[test]
    fn missing_references_are_reported() {
        let bl = make_bilinear(1).unwrap();
        let s = StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY).unwrap();
        assert!(matches!(
            lyapunov_eval(&bl, &st(1.0, 0.0), &s),
            Err(GdadError::UnsupportedLyapunov { missing: "regime" })
        ));
    }

    #[test]
    fn stationary_trajectory_has_zero_rates() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        let cfg = IntegratorConfig::rk4(1.0, 0.01);
        let tr = integrate(&q, &s, &[0.0], &[0.0], &cfg).unwrap();
        for i in [0, 5, tr.samples.len() - 1] {
            let r = dv_dt_fd(&q, &tr, &s, i, None).unwrap();
            assert_eq!((r.dv1, r.dv2, r.dv), (0.0, 0.0, 0.0));
        }
        assert!(dv_dt_fd(&q, &tr, &s, 0, None).unwrap().one_sided);
        assert!(!dv_dt_fd(&q, &tr, &s, 3, None).unwrap().one_sided);
    }

    #[test]
    fn theorem_one_coupled_value_decreases() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        let cfg = IntegratorConfig::rk4(20.0, 1e-3);
        let tr = integrate(&q, &s, &[1.0], &[1.0], &cfg).unwrap();
        for i in 1..tr.samples.len() - 1 {
            let r = dv_dt_fd(&q, &tr, &s, i, None).unwrap();
            assert!(
                r.dv <= 0.0,
                "dv = {} at t = {}",
                r.dv,
                tr.samples[i].state.t
            );
        }
    }

    #[test]
    fn rotation_conserves_radius() {
        // d/dt 1/2 (x^2 + y^2) along the bilinear rotation, via the same
        // local re-integration the h-mode difference uses.
        let bl = make_bilinear(1).unwrap();
        let s = StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY).unwrap();
        let energy = |s: &State| 0.5 * (s.x[0] * s.x[0] + s.y[0] * s.y[0]);
        let h = 1e-3;
        for k in 0..20 {
            let t = 0.3 * k as f64;
            let here = State {
                t,
                x: vec![t.cos()],
                y: vec![t.sin()],
            };
            let ahead = step_rk4(&bl, &s, &here, h).unwrap();
            let behind = step_rk4(&bl, &s, &here, -h).unwrap();
            let d = (energy(&ahead) - energy(&behind)) / (2.0 * h);
            assert!(d.abs() < 1e-12, "{d}");
        }
    }
}
