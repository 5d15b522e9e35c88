//! The descent-ascent vector field `(-alpha grad_x f, beta grad_y f)`, the
//! condition number, and the step-size schedule attached to each regime.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GdadError, Result};
use crate::integrate::State;
use crate::problems::{ObjectiveProblem, RegimeTag, SmoothnessConstants};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    FastY,
    FastX,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::FastY => "FastY",
            Orientation::FastX => "FastX",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub orientation: Orientation,
}

impl StepSizes {
    pub fn new(alpha: f64, beta: f64, gamma: f64, orientation: Orientation) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GdadError::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(StepSizes {
            alpha,
            beta,
            gamma,
            orientation,
        })
    }

    /// Weight on the slow component in the coupled Lyapunov function:
    /// `gamma*alpha/beta` for FastY, `gamma*beta/alpha` for FastX.
    pub fn coupling_weight(&self) -> f64 {
        match self.orientation {
            Orientation::FastY => self.gamma * self.alpha / self.beta,
            Orientation::FastX => self.gamma * self.beta / self.alpha,
        }
    }

    /// Same triple and orientation up to relative error `1e-12`.
    pub fn matches(&self, other: &StepSizes) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        self.orientation == other.orientation
            && close(self.alpha, other.alpha)
            && close(self.beta, other.beta)
            && close(self.gamma, other.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionNumber {
    pub mu: f64,
    pub kappa: f64,
}

/// `(x_dot, y_dot) = (-alpha grad_x f, beta grad_y f)` at `state`.
pub fn gdad_field(
    problem: &ObjectiveProblem,
    state: &State,
    steps: &StepSizes,
) -> Result<(Vec<f64>, Vec<f64>)> {
    problem.check_dims(&state.x, &state.y)?;
    let gx = problem.grad_x(&state.x, &state.y);
    let gy = problem.grad_y(&state.x, &state.y);
    if !(gx.iter().chain(&gy).all(|v| v.is_finite())) {
        return Err(GdadError::FieldEvaluation {
            t: state.t,
            x: state.x.clone(),
            y: state.y.clone(),
        });
    }
    Ok((
        gx.iter().map(|g| -steps.alpha * g).collect(),
        gy.iter().map(|g| steps.beta * g).collect(),
    ))
}

/// `mu = min(mu_x, mu_y)`, `kappa = L_xy / mu`.
pub fn condition_number(constants: &SmoothnessConstants) -> Result<ConditionNumber> {
    if !(constants.mu_x > 0.0 && constants.mu_y > 0.0) {
        return Err(GdadError::UndefinedConditionNumber {
            mu_x: constants.mu_x,
            mu_y: constants.mu_y,
        });
    }
    let mu = constants.mu_x.min(constants.mu_y);
    Ok(ConditionNumber {
        mu,
        kappa: constants.l_xy / mu,
    })
}

fn require_positive(c: &SmoothnessConstants, need_mu_x: bool, need_mu_y: bool) -> Result<()> {
    if !(c.l_xy > 0.0 && c.l_xy.is_finite()) {
        return Err(GdadError::Schedule(format!(
            "L_xy must be > 0, got {}",
            c.l_xy
        )));
    }
    if need_mu_x && !(c.mu_x > 0.0) {
        return Err(GdadError::Schedule(format!(
            "mu_x must be > 0, got {}",
            c.mu_x
        )));
    }
    if need_mu_y && !(c.mu_y > 0.0) {
        return Err(GdadError::Schedule(format!(
            "mu_y must be > 0, got {}",
            c.mu_y
        )));
    }
    Ok(())
}

/// Two-sided PL: `gamma = L_xy^2/mu_y^2`, `alpha = mu^2/(10 mu_x L_xy^2)`,
/// `beta = mu^2/(mu_x mu_y^2)`.
pub fn stepsizes_two_sided_pl(c: &SmoothnessConstants) -> Result<StepSizes> {
    require_positive(c, true, true)?;
    let mu = c.mu_x.min(c.mu_y);
    let l2 = c.l_xy * c.l_xy;
    Ok(StepSizes {
        gamma: l2 / (c.mu_y * c.mu_y),
        alpha: mu * mu / (10.0 * c.mu_x * l2),
        beta: mu * mu / (c.mu_x * c.mu_y * c.mu_y),
        orientation: Orientation::FastY,
    })
}

/// Nonconvex-PL: `gamma = 32 L_xy^2/mu_y^2`, `alpha = 1/(8 L_xy^2)`,
/// `beta = 1/mu_y^2`.
pub fn stepsizes_one_sided_pl(c: &SmoothnessConstants) -> Result<StepSizes> {
    require_positive(c, false, true)?;
    let l2 = c.l_xy * c.l_xy;
    Ok(StepSizes {
        gamma: 32.0 * l2 / (c.mu_y * c.mu_y),
        alpha: 1.0 / (8.0 * l2),
        beta: 1.0 / (c.mu_y * c.mu_y),
        orientation: Orientation::FastY,
    })
}

/// Nonconvex-strongly concave: `gamma = mu_y L_xy^2`, `alpha = 1/L_xy^2`,
/// `beta = 4/mu_y^2`.
pub fn stepsizes_nc_sc(c: &SmoothnessConstants) -> Result<StepSizes> {
    require_positive(c, false, true)?;
    let l2 = c.l_xy * c.l_xy;
    Ok(StepSizes {
        gamma: c.mu_y * l2,
        alpha: 1.0 / l2,
        beta: 4.0 / (c.mu_y * c.mu_y),
        orientation: Orientation::FastY,
    })
}

/// Strongly convex-nonconcave (x fast): `gamma = mu_x L_xy^2`,
/// `alpha = 4/mu_x^2`, `beta = 1/L_xy^2`.
pub fn stepsizes_sc_nc(c: &SmoothnessConstants) -> Result<StepSizes> {
    require_positive(c, true, false)?;
    let l2 = c.l_xy * c.l_xy;
    Ok(StepSizes {
        gamma: c.mu_x * l2,
        alpha: 4.0 / (c.mu_x * c.mu_x),
        beta: 1.0 / l2,
        orientation: Orientation::FastX,
    })
}

pub fn schedule_for(regime: RegimeTag, c: &SmoothnessConstants) -> Result<StepSizes> {
    match regime {
        RegimeTag::TwoSidedPL => stepsizes_two_sided_pl(c),
        RegimeTag::NonconvexPL => stepsizes_one_sided_pl(c),
        RegimeTag::NonconvexStronglyConcave => stepsizes_nc_sc(c),
        RegimeTag::StronglyConvexNonconcave => stepsizes_sc_nc(c),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Equality,
    /// `lhs <= rhs`
    Inequality,
}

/// One coefficient identity (or inequality) from a rate proof, re-evaluated
/// with concrete step sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofCheck {
    pub regime: RegimeTag,
    pub name: &'static str,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    /// Largest magnitude among the summed terms and the right-hand side.
    pub scale: f64,
    pub rel_error: f64,
    pub holds: bool,
}

const IDENTITY_REL_TOL: f64 = 1e-12;

fn equality(regime: RegimeTag, name: &'static str, terms: &[f64], rhs: f64) -> ProofCheck {
    let lhs: f64 = terms.iter().sum();
    let scale = terms.iter().fold(rhs.abs(), |m, t| m.max(t.abs()));
    let rel_error = if scale > 0.0 {
        (lhs - rhs).abs() / scale
    } else {
        0.0
    };
    ProofCheck {
        regime,
        name,
        kind: CheckKind::Equality,
        lhs,
        rhs,
        scale,
        rel_error,
        holds: rel_error <= IDENTITY_REL_TOL,
    }
}

fn inequality(regime: RegimeTag, name: &'static str, lhs: f64, rhs: f64) -> ProofCheck {
    let scale = lhs.abs().max(rhs.abs());
    let excess = (lhs - rhs).max(0.0);
    let rel_error = if scale > 0.0 { excess / scale } else { 0.0 };
    ProofCheck {
        regime,
        name,
        kind: CheckKind::Inequality,
        lhs,
        rhs,
        scale,
        rel_error,
        holds: rel_error <= IDENTITY_REL_TOL,
    }
}

/// Re-evaluates the coefficient cancellations each regime's rate proof relies
/// on, using the supplied step sizes and constants.
pub fn proof_identities(
    regime: RegimeTag,
    s: &StepSizes,
    c: &SmoothnessConstants,
) -> Vec<ProofCheck> {
    let (a, b, g) = (s.alpha, s.beta, s.gamma);
    let l2 = c.l_xy * c.l_xy;
    let r = regime;
    match regime {
        RegimeTag::TwoSidedPL => {
            let mu = c.mu_x.min(c.mu_y);
            let kappa = c.l_xy / mu;
            vec![
                equality(
                    r,
                    "1/2 - 3*gamma*alpha/beta = 1/5",
                    &[0.5, -3.0 * g * a / b],
                    0.2,
                ),
                equality(
                    r,
                    "3*mu_y*gamma/2 - L_xy^2/mu_y - 5*L_xy^2*gamma*alpha/(mu_y*beta) = 0",
                    &[
                        1.5 * c.mu_y * g,
                        -l2 / c.mu_y,
                        -5.0 * l2 * g * a / (c.mu_y * b),
                    ],
                    0.0,
                ),
                equality(
                    r,
                    "mu_x*alpha/2 = 1/(20*kappa^2)",
                    &[0.5 * c.mu_x * a],
                    1.0 / (20.0 * kappa * kappa),
                ),
                inequality(r, "mu_x*alpha <= mu_y*beta", c.mu_x * a, c.mu_y * b),
            ]
        }
        RegimeTag::NonconvexPL => vec![
            equality(r, "-gamma*alpha/4 + beta = 0", &[-g * a / 4.0, b], 0.0),
            equality(
                r,
                "1 - 4*L_xy^2*alpha/(mu_y^2*beta) = 1/2",
                &[1.0, -4.0 * l2 * a / (c.mu_y * c.mu_y * b)],
                0.5,
            ),
            equality(
                r,
                "1 - gamma*alpha/(4*beta) = 0",
                &[1.0, -g * a / (4.0 * b)],
                0.0,
            ),
            equality(r, "gamma*alpha/beta = 4", &[g * a / b], 4.0),
            equality(r, "2/alpha = 16*L_xy^2", &[2.0 / a], 16.0 * l2),
            inequality(r, "1 <= gamma", 1.0, g),
        ],
        RegimeTag::NonconvexStronglyConcave => vec![
            equality(
                r,
                "mu_y*gamma*alpha/4 - 1/beta = 0",
                &[c.mu_y * g * a / 4.0, -1.0 / b],
                0.0,
            ),
            equality(
                r,
                "(L_xy*gamma*alpha)^2 - 4*(1/(2*alpha))*(mu_y*gamma*alpha/2) = 0",
                &[
                    (c.l_xy * g * a).powi(2),
                    -4.0 * (0.5 / a) * (0.5 * c.mu_y * g * a),
                ],
                0.0,
            ),
            equality(r, "gamma*beta = 4*L_xy^2/mu_y", &[g * b], 4.0 * l2 / c.mu_y),
            equality(r, "1/alpha = L_xy^2", &[1.0 / a], l2),
        ],
        RegimeTag::StronglyConvexNonconcave => vec![
            equality(
                r,
                "mu_x*gamma*beta/4 - 1/alpha = 0",
                &[c.mu_x * g * b / 4.0, -1.0 / a],
                0.0,
            ),
            equality(
                r,
                "(L_xy*gamma*beta)^2 - 4*(1/(2*beta))*(mu_x*gamma*beta/2) = 0",
                &[
                    (c.l_xy * g * b).powi(2),
                    -4.0 * (0.5 / b) * (0.5 * c.mu_x * g * b),
                ],
                0.0,
            ),
            equality(
                r,
                "gamma*alpha = 4*L_xy^2/mu_x",
                &[g * a],
                4.0 * l2 / c.mu_x,
            ),
            equality(r, "1/beta = L_xy^2", &[1.0 / b], l2),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_bilinear, make_quadratic_saddle};
    use proptest::prelude::*;

    fn consts(mu_x: f64, mu_y: f64, l_xy: f64) -> SmoothnessConstants {
        SmoothnessConstants {
            l_x: l_xy,
            l_y: l_xy,
            l_xy,
            mu_x,
            mu_y,
        }
    }

    fn state(x: f64, y: f64) -> State {
        State {
            t: 0.0,
            x: vec![x],
            y: vec![y],
        }
    }

    #[test]
    fn field_examples() {
        let unit = StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY).unwrap();
        let bl = make_bilinear(1).unwrap();
        assert_eq!(
            gdad_field(&bl, &state(1.0, 0.0), &unit).unwrap(),
            (vec![-0.0], vec![1.0])
        );
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        assert_eq!(
            gdad_field(&q, &state(1.0, 1.0), &unit).unwrap(),
            (vec![-3.0], vec![1.0])
        );
        let frozen = StepSizes { alpha: 0.0, ..unit };
        let (vx, _) = gdad_field(&q, &state(1.0, 1.0), &frozen).unwrap();
        assert_eq!(vx, vec![0.0]);
        assert!(gdad_field(
            &q,
            &State {
                t: 0.0,
                x: vec![1.0, 2.0],
                y: vec![1.0]
            },
            &unit
        )
        .is_err());
    }

    #[test]
    fn condition_number_examples() {
        assert_eq!(condition_number(&consts(1.0, 1.0, 2.0)).unwrap().kappa, 2.0);
        let k = condition_number(&consts(0.5, 1.0, 1.0)).unwrap();
        assert_eq!((k.mu, k.kappa), (0.5, 2.0));
        assert_eq!(condition_number(&consts(1.0, 1.0, 1.0)).unwrap().kappa, 1.0);
        assert!(matches!(
            condition_number(&consts(0.0, 1.0, 1.0)),
            Err(GdadError::UndefinedConditionNumber { .. })
        ));
    }

    #[test]
    fn schedule_examples() {
        let s = stepsizes_two_sided_pl(&consts(1.0, 1.0, 2.0)).unwrap();
        assert_eq!((s.gamma, s.alpha, s.beta), (4.0, 1.0 / 40.0, 1.0));
        assert!((s.gamma * s.alpha / s.beta - 0.1).abs() < 1e-15);
        let s = stepsizes_two_sided_pl(&consts(1.0, 1.0, 1.0)).unwrap();
        assert_eq!((s.alpha, s.beta), (0.1, 1.0));

        let s = stepsizes_one_sided_pl(&consts(0.0, 1.0, 2.0)).unwrap();
        assert_eq!((s.gamma, s.alpha, s.beta), (128.0, 1.0 / 32.0, 1.0));
        assert_eq!(s.coupling_weight(), 4.0);
        let s = stepsizes_one_sided_pl(&consts(0.0, 1.0, 1.0)).unwrap();
        assert_eq!(-s.gamma * s.alpha / 4.0 + s.beta, 0.0);

        let s = stepsizes_nc_sc(&consts(0.0, 1.0, 2.0)).unwrap();
        assert_eq!((s.gamma, s.alpha, s.beta), (4.0, 0.25, 4.0));
        let s = stepsizes_nc_sc(&consts(0.0, 2.0, 1.0)).unwrap();
        assert_eq!((s.gamma, s.alpha, s.beta), (2.0, 1.0, 1.0));

        let s = stepsizes_sc_nc(&consts(1.0, 0.0, 2.0)).unwrap();
        assert_eq!((s.gamma, s.alpha, s.beta), (4.0, 4.0, 0.25));
        assert_eq!(s.orientation, Orientation::FastX);
        assert!(s.beta < s.alpha);
    }

    #[test]
    fn schedules_reject_zero_divisors() {
        assert!(matches!(
            stepsizes_two_sided_pl(&consts(0.0, 1.0, 1.0)),
            Err(GdadError::Schedule(_))
        ));
        assert!(stepsizes_one_sided_pl(&consts(1.0, 0.0, 1.0)).is_err());
        assert!(stepsizes_nc_sc(&consts(1.0, 1.0, 0.0)).is_err());
        assert!(stepsizes_sc_nc(&consts(0.0, 1.0, 1.0)).is_err());
    }

    fn constants_strategy() -> impl Strategy<Value = SmoothnessConstants> {
        (0.05f64..5.0, 0.05f64..5.0, 1.0f64..20.0).prop_map(|(mu_x, mu_y, k)| {
            let l_xy = k * mu_x.max(mu_y);
            consts(mu_x, mu_y, l_xy)
        })
    }

    proptest! {
        #[test]
        fn proof_identities_hold_for_every_schedule(c in constants_strategy()) {
            for r in RegimeTag::ALL {
                let s = schedule_for(r, &c).unwrap();
                for check in proof_identities(r, &s, &c) {
                    prop_assert!(check.holds, "{r}: {} rel err {:e}", check.name, check.rel_error);
                }
            }
        }

        #[test]
        fn timescale_ordering(c in constants_strategy()) {
            prop_assume!(condition_number(&c).unwrap().kappa > 1.0 + 1e-9);
            for r in RegimeTag::ALL {
                let s = schedule_for(r, &c).unwrap();
                match s.orientation {
                    Orientation::FastY => prop_assert!(s.alpha < s.beta, "{r}: {s:?}"),
                    Orientation::FastX => prop_assert!(s.beta < s.alpha, "{r}: {s:?}"),
                }
            }
        }

        #[test]
        fn field_is_linear_in_step_sizes(x in -3.0f64..3.0, y in -3.0f64..3.0, a in 0.01f64..10.0, b in 0.01f64..10.0) {
            let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
            let st = state(x, y);
            let s1 = StepSizes { alpha: a, beta: b, gamma: 1.0, orientation: Orientation::FastY };
            let s2 = StepSizes { alpha: 2.0 * a, ..s1 };
            let (vx1, vy1) = gdad_field(&q, &st, &s1).unwrap();
            let (vx2, vy2) = gdad_field(&q, &st, &s2).unwrap();
            prop_assert_eq!(vx2[0], 2.0 * vx1[0]);
            prop_assert_eq!(vy2, vy1);
        }
    }
}
