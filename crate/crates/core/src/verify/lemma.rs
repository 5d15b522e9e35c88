//! Audits of the Lyapunov derivative inequalities along a trajectory.
//!
//! At each interior sample the time derivative of `v1` / `v2` is estimated
//! by a central difference over a local RK4 re-integration of `+-h` and
//! compared with the inequality's right-hand side, evaluated from the
//! gradients and velocities at that sample.

use serde::{Deserialize, Serialize};

use super::{excerpt_indices, Lemma};
use crate::dynamics::StepSizes;
use crate::error::{GdadError, Result};
use crate::exec::Exec;
use crate::integrate::{ErrorBudget, Trajectory};
use crate::linalg;
use crate::lyapunov::{dv_dt_fd, lyapunov_eval, y_star, LyapunovRates};
use crate::problems::ObjectiveProblem;

/// Required satisfaction fraction for an audit to pass.
pub const AUDIT_PASS_FRACTION: f64 = 0.99;

const MIN_SAMPLES: usize = 5;
const TRUNCATION_FACTOR: f64 = 10.0;
const ROUNDOFF_FACTOR: f64 = 100.0;
const EXCERPT_LEN: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSample {
    pub t: f64,
    /// Finite-difference derivative.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl LemmaSample {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs - self.slack
    }

    pub fn holds(&self) -> bool {
        self.margin() <= 0.0
    }
}

/// One inequality of a lemma (`v1` or `v2`, or the looser stated variant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaPart {
    pub name: String,
    pub inequality: String,
    pub fraction: f64,
    /// Largest `lhs - rhs - slack`; nonpositive when every sample holds.
    pub worst_margin: f64,
    pub worst_t: f64,
    pub samples_total: usize,
    /// Evenly spaced per-sample excerpt (plus the worst sample).
    pub excerpt: Vec<LemmaSample>,
    /// Full per-sample data; not serialized (written as CSV by the runner).
    #[serde(skip)]
    pub samples: Vec<LemmaSample>,
}

impl LemmaPart {
    fn from_samples(name: &str, inequality: &str, samples: Vec<LemmaSample>) -> Self {
        let held = samples.iter().filter(|s| s.holds()).count();
        let (worst_margin, worst_t, worst_i) = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.margin(), s.t, i))
            .fold(
                (f64::NEG_INFINITY, 0.0, 0),
                |a, b| if b.0 > a.0 { b } else { a },
            );
        let mut idx = excerpt_indices(samples.len(), EXCERPT_LEN);
        if !samples.is_empty() && !idx.contains(&worst_i) {
            idx.push(worst_i);
            idx.sort_unstable();
        }
        LemmaPart {
            name: name.to_string(),
            inequality: inequality.to_string(),
            fraction: held as f64 / samples.len().max(1) as f64,
            worst_margin,
            worst_t,
            samples_total: samples.len(),
            excerpt: idx.into_iter().map(|i| samples[i]).collect(),
            samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaAuditReport {
    pub lemma: Lemma,
    /// Finite-difference offset.
    pub h: f64,
    pub slack_policy: String,
    pub budget: Option<ErrorBudget>,
    /// Audited inequalities (proof-version constants).
    pub parts: Vec<LemmaPart>,
    /// Looser stated variant, reported but not part of the pass decision.
    pub statement_version: Option<LemmaPart>,
    /// Minimum fraction over `parts`.
    pub fraction: f64,
    pub pass: bool,
}

/// `min(dt, 1e-3 tau)` with `tau = 1 / (beta (L_y + L_xy) + alpha (L_x + L_xy) + 1)`.
pub fn audit_step(problem: &ObjectiveProblem, steps: &StepSizes, dt: f64) -> f64 {
    let c = problem.constants();
    let tau = 1.0 / (steps.beta * (c.l_y + c.l_xy) + steps.alpha * (c.l_x + c.l_xy) + 1.0);
    dt.min(1e-3 * tau)
}

pub fn audit_lemma(
    problem: &ObjectiveProblem,
    traj: &Trajectory,
    lemma: Lemma,
    budget: Option<ErrorBudget>,
) -> Result<LemmaAuditReport> {
    audit_lemma_with(Exec::default(), problem, traj, lemma, budget)
}

/// Per-sample right-hand sides: `(v1 part, v2 part, v2 statement part)`.
fn rhs_at(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    lemma: Lemma,
    x: &[f64],
    y: &[f64],
    v2: f64,
) -> Result<(f64, f64, Option<f64>)> {
    let c = problem.constants();
    let (a, b, l) = (steps.alpha, steps.beta, c.l_xy);
    let gx2 = linalg::norm_sq(&problem.grad_x(x, y));
    let gy2 = linalg::norm_sq(&problem.grad_y(x, y));
    // |x_dot| = alpha |grad_x|, |y_dot| = beta |grad_y|
    let (xd, yd) = (a * gx2.sqrt(), b * gy2.sqrt());
    Ok(match lemma {
        Lemma::Lem2 => {
            let ys = y_star(problem, x)?;
            let gs2 = linalg::norm_sq(&problem.grad_x(x, &ys));
            let k = l * l * a / c.mu_y;
            (
                -0.5 * a * gs2 + k * v2,
                -b * gy2 + 1.5 * a * gs2 + 5.0 * k * v2,
                None,
            )
        }
        Lemma::Lem3 => {
            let k = l * l * a / c.mu_y;
            (
                -a * gx2 + b * gy2,
                -b * gy2 + a / 8.0 * gx2 + 4.0 * k * v2,
                Some(-b * gy2 + a / 2.0 * gx2 + k * v2),
            )
        }
        Lemma::Lem4 => (
            -xd * xd / a + yd * yd / b,
            l * b * yd * xd - c.mu_y * b * yd * yd,
            None,
        ),
        Lemma::Lem5 => (
            -c.mu_x * a * xd * xd + l * a * yd * xd,
            xd * xd / a - yd * yd / b,
            None,
        ),
    })
}

fn describe(lemma: Lemma) -> (&'static str, &'static str, Option<&'static str>) {
    match lemma {
        Lemma::Lem2 => (
            "dv1/dt <= -(alpha/2)|grad_x f(x,y*)|^2 + (L_xy^2 alpha/mu_y) v2",
            "dv2/dt <= -beta|grad_y f|^2 + (3 alpha/2)|grad_x f(x,y*)|^2 + (5 L_xy^2 alpha/mu_y) v2",
            None,
        ),
        Lemma::Lem3 => (
            "dv1/dt = -alpha|grad_x f|^2 + beta|grad_y f|^2",
            "dv2/dt <= -beta|grad_y f|^2 + (alpha/8)|grad_x f|^2 + (4 L_xy^2 alpha/mu_y) v2",
            Some("dv2/dt <= -beta|grad_y f|^2 + (alpha/2)|grad_x f|^2 + (L_xy^2 alpha/mu_y) v2"),
        ),
        Lemma::Lem4 => (
            "dv1/dt <= -(1/alpha)|x_dot|^2 + (1/beta)|y_dot|^2",
            "dv2/dt <= L_xy beta |y_dot||x_dot| - mu_y beta |y_dot|^2",
            None,
        ),
        Lemma::Lem5 => (
            "dv1/dt <= -mu_x alpha |x_dot|^2 + L_xy alpha |y_dot||x_dot|",
            "dv2/dt <= (1/alpha)|x_dot|^2 - (1/beta)|y_dot|^2",
            None,
        ),
    }
}

struct SampleAudit {
    t: f64,
    d1: f64,
    d2: f64,
    slack1: f64,
    slack2: f64,
    rhs: (f64, f64, Option<f64>),
}

pub fn audit_lemma_with(
    exec: Exec,
    problem: &ObjectiveProblem,
    traj: &Trajectory,
    lemma: Lemma,
    budget: Option<ErrorBudget>,
) -> Result<LemmaAuditReport> {
    if problem.regime() != Some(lemma.regime()) {
        return Err(GdadError::Configuration(format!(
            "{lemma} needs regime {}, problem `{}` has {}",
            lemma.regime(),
            problem.id(),
            problem
                .regime()
                .map_or("none".to_string(), |r| r.to_string())
        )));
    }
    let n = traj.samples.len();
    if n < MIN_SAMPLES {
        return Err(GdadError::InsufficientData(format!(
            "lemma audit needs at least {MIN_SAMPLES} samples, trajectory has {n}"
        )));
    }
    let steps = &traj.steps;
    let h = audit_step(problem, steps, traj.dt);
    let extra = budget.map_or(0.0, |b| b.lyapunov);
    let eps = f64::EPSILON;
    let audited: Vec<Result<SampleAudit>> = exec.map_range(n - 2, |k| {
        let i = k + 1;
        let s = &traj.samples[i].state;
        let here = lyapunov_eval(problem, s, steps)?;
        let fine: LyapunovRates = dv_dt_fd(problem, traj, steps, i, Some(h))?;
        let coarse = dv_dt_fd(problem, traj, steps, i, Some(2.0 * h))?;
        let slack = |d: f64, dd: f64, v: f64| {
            TRUNCATION_FACTOR * (d - dd).abs() + ROUNDOFF_FACTOR * eps * (v.abs() + 1.0) / h + extra
        };
        Ok(SampleAudit {
            t: s.t,
            d1: fine.dv1,
            d2: fine.dv2,
            slack1: slack(fine.dv1, coarse.dv1, here.v1),
            slack2: slack(fine.dv2, coarse.dv2, here.v2),
            rhs: rhs_at(problem, steps, lemma, &s.x, &s.y, here.v2)?,
        })
    });
    let audited: Vec<SampleAudit> = audited.into_iter().collect::<Result<_>>()?;
    let part = |pick: &dyn Fn(&SampleAudit) -> Option<LemmaSample>| -> Vec<LemmaSample> {
        audited.iter().filter_map(pick).collect()
    };
    let v1 = part(&|a| {
        Some(LemmaSample {
            t: a.t,
            lhs: a.d1,
            rhs: a.rhs.0,
            slack: a.slack1,
        })
    });
    let v2 = part(&|a| {
        Some(LemmaSample {
            t: a.t,
            lhs: a.d2,
            rhs: a.rhs.1,
            slack: a.slack2,
        })
    });
    let stated = part(&|a| {
        a.rhs.2.map(|rhs| LemmaSample {
            t: a.t,
            lhs: a.d2,
            rhs,
            slack: a.slack2,
        })
    });
    let (d1, d2, ds) = describe(lemma);
    let parts = vec![
        LemmaPart::from_samples("v1", d1, v1),
        LemmaPart::from_samples("v2", d2, v2),
    ];
    let statement_version = ds.map(|d| LemmaPart::from_samples("v2-statement", d, stated));
    let fraction = parts.iter().map(|p| p.fraction).fold(1.0, f64::min);
    Ok(LemmaAuditReport {
        lemma,
        h,
        slack_policy: format!(
            "{TRUNCATION_FACTOR} |D(h) - D(2h)| + {ROUNDOFF_FACTOR} eps (|v| + 1) / h + lyapunov budget ({extra:e})"
        ),
        budget,
        parts,
        statement_version,
        fraction,
        pass: fraction >= AUDIT_PASS_FRACTION,
    })
}
