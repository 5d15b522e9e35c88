//! Deterministic integration of the descent-ascent flow with per-sample
//! diagnostics, plus the dt-halving (Richardson) error budget.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{gdad_field, StepSizes};
use crate::error::{GdadError, Result};
use crate::exec::Exec;
use crate::linalg;
use crate::lyapunov::{lyapunov_eval, LyapunovValues};
use crate::problems::ObjectiveProblem;

/// Coordinates beyond this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Default upper bound on the time between recorded samples.
pub const MAX_RECORD_SPACING: f64 = 1e-2;

const ADAPTIVE_STEP_CAP: usize = 100_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl State {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        State { t: 0.0, x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && linalg::all_finite(&self.x) && linalg::all_finite(&self.y)
    }

    fn exceeds(&self, limit: f64) -> bool {
        self.x.iter().chain(&self.y).any(|v| !(v.abs() <= limit))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    RK4Fixed,
    RK45Adaptive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::RK4Fixed => "rk4",
            Method::RK45Adaptive => "rk45",
        })
    }
}

impl FromStr for Method {
    type Err = GdadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rk4" | "rk4fixed" | "rk4-fixed" => Ok(Method::RK4Fixed),
            "rk45" | "rk45adaptive" | "rk45-adaptive" | "dopri5" => Ok(Method::RK45Adaptive),
            other => Err(GdadError::invalid(
                "method",
                format!("unknown method `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeStep {
    Fixed(f64),
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub horizon: f64,
    pub dt: TimeStep,
    /// `None` picks the largest stride keeping sample spacing <= 1e-2.
    pub record_every: Option<usize>,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl IntegratorConfig {
    pub fn rk4(horizon: f64, dt: f64) -> Self {
        IntegratorConfig {
            horizon,
            dt: TimeStep::Fixed(dt),
            record_every: None,
            method: Method::RK4Fixed,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }

    pub fn auto(horizon: f64) -> Self {
        IntegratorConfig {
            dt: TimeStep::Auto,
            ..Self::rk4(horizon, 1.0)
        }
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = Some(every);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(GdadError::invalid(
                "T",
                format!("must be finite and >= 0, got {}", self.horizon),
            ));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(GdadError::invalid("dt", format!("must be > 0, got {dt}")));
            }
        }
        if self.record_every == Some(0) {
            return Err(GdadError::invalid("record_every", "must be >= 1"));
        }
        if self.method == Method::RK45Adaptive && !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(GdadError::invalid(
                "tolerances",
                "rel_tol and abs_tol must be > 0",
            ));
        }
        Ok(())
    }

    /// Requested step: the fixed value, or
    /// `min(1e-2, 0.1 / (beta (L_y + L_xy) + alpha (L_x + L_xy) + 1))`.
    pub fn nominal_dt(&self, problem: &ObjectiveProblem, steps: &StepSizes) -> f64 {
        match self.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto => auto_dt(problem, steps),
        }
    }

    /// Step count, uniform step and recording stride actually used.
    pub fn grid(&self, problem: &ObjectiveProblem, steps: &StepSizes) -> (usize, f64, usize) {
        let dt = self.nominal_dt(problem, steps);
        if self.horizon == 0.0 {
            return (0, dt, 1);
        }
        let n = ((self.horizon / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = self.horizon / n as f64;
        let every = self
            .record_every
            .unwrap_or_else(|| ((MAX_RECORD_SPACING / h) + 1e-9).floor().max(1.0) as usize);
        (n, h, every)
    }
}

pub fn auto_dt(problem: &ObjectiveProblem, steps: &StepSizes) -> f64 {
    let c = problem.constants();
    let rate = steps.beta * (c.l_y + c.l_xy) + steps.alpha * (c.l_x + c.l_xy) + 1.0;
    (0.1 / rate).min(1e-2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: State,
    pub gx_norm: f64,
    pub gy_norm: f64,
    pub lyapunov: Option<LyapunovValues>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub problem_id: String,
    pub samples: Vec<Sample>,
    pub steps: StepSizes,
    pub config: IntegratorConfig,
    /// Uniform step (RK4) or maximum step (RK45) actually used.
    pub dt: f64,
    pub record_every: usize,
    /// First recorded time outside the certification box, if any.
    pub left_box_at: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        &self.samples.last().expect("trajectory has samples").state
    }

    pub fn has_lyapunov(&self) -> bool {
        self.samples.iter().all(|s| s.lyapunov.is_some())
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.state.t)
    }
}

fn split(z: &[f64], m: usize, t: f64) -> State {
    State {
        t,
        x: z[..m].to_vec(),
        y: z[m..].to_vec(),
    }
}

fn flat(s: &State) -> Vec<f64> {
    let mut z = s.x.clone();
    z.extend_from_slice(&s.y);
    z
}

fn field_flat(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    t: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    let (mut vx, vy) = gdad_field(problem, &split(z, problem.dim_x(), t), steps)?;
    vx.extend(vy);
    Ok(vx)
}

/// One classical fourth-order Runge-Kutta step. `dt` may be negative
/// (backward step); finite differences use that.
pub fn step_rk4(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    state: &State,
    dt: f64,
) -> Result<State> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(GdadError::invalid(
            "dt",
            format!("must be finite and nonzero, got {dt}"),
        ));
    }
    problem.check_dims(&state.x, &state.y)?;
    let stall = || GdadError::FieldEvaluation {
        t: state.t,
        x: state.x.clone(),
        y: state.y.clone(),
    };
    let z = flat(state);
    let t = state.t;
    let k1 = field_flat(problem, steps, t, &z).map_err(|_| stall())?;
    let k2 = field_flat(
        problem,
        steps,
        t + 0.5 * dt,
        &linalg::axpy(&z, 0.5 * dt, &k1),
    )
    .map_err(|_| stall())?;
    let k3 = field_flat(
        problem,
        steps,
        t + 0.5 * dt,
        &linalg::axpy(&z, 0.5 * dt, &k2),
    )
    .map_err(|_| stall())?;
    let k4 = field_flat(problem, steps, t + dt, &linalg::axpy(&z, dt, &k3)).map_err(|_| stall())?;
    let next: Vec<f64> = (0..z.len())
        .map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if !linalg::all_finite(&next) {
        return Err(stall());
    }
    Ok(split(&next, problem.dim_x(), t + dt))
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince trial step; returns the 5th-order solution and the
/// scaled RMS error estimate.
fn dopri_trial(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    t: f64,
    z: &[f64],
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, f64)> {
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let mut zi = z.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = DP_A[stage][j];
            if a != 0.0 {
                for (v, d) in zi.iter_mut().zip(kj) {
                    *v += h * a * d;
                }
            }
        }
        k.push(field_flat(problem, steps, t + DP_C[stage] * h, &zi)?);
    }
    let mut next = z.to_vec();
    let mut err_sq = 0.0;
    for i in 0..z.len() {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for s in 0..7 {
            hi += DP_B5[s] * k[s][i];
            lo += DP_B4[s] * k[s][i];
        }
        next[i] += h * hi;
        let scale = cfg.abs_tol + cfg.rel_tol * z[i].abs().max(next[i].abs());
        err_sq += (h * (hi - lo) / scale).powi(2);
    }
    Ok((next, (err_sq / z.len() as f64).sqrt()))
}

fn make_sample(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    state: State,
    with_lyapunov: bool,
) -> Result<Sample> {
    let gx_norm = linalg::norm(&problem.grad_x(&state.x, &state.y));
    let gy_norm = linalg::norm(&problem.grad_y(&state.x, &state.y));
    let lyapunov = if with_lyapunov {
        Some(lyapunov_eval(problem, &state, steps)?)
    } else {
        None
    };
    Ok(Sample {
        state,
        gx_norm,
        gy_norm,
        lyapunov,
    })
}

/// Integrates the flow from `(x0, y0)` over `[0, T]`.
///
/// Samples are recorded every `record_every` steps and at `T`. Lyapunov
/// values are filled when the problem supports them for its regime.
pub fn integrate(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    x0: &[f64],
    y0: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    problem.check_dims(x0, y0)?;
    let start = State::new(x0.to_vec(), y0.to_vec());
    if !start.is_finite() {
        return Err(GdadError::invalid("initial state", "must be finite"));
    }
    let with_lyapunov = match lyapunov_eval(problem, &start, steps) {
        Ok(_) => true,
        Err(GdadError::UnsupportedLyapunov { .. }) => false,
        Err(e) => return Err(e),
    };
    let (n, h, every) = config.grid(problem, steps);
    let mut traj = Trajectory {
        problem_id: problem.id().to_string(),
        samples: Vec::with_capacity(n / every + 2),
        steps: *steps,
        config: *config,
        dt: h,
        record_every: every,
        left_box_at: None,
    };
    let record = |traj: &mut Trajectory, s: State| -> Result<()> {
        if traj.left_box_at.is_none() && !problem.in_box(&s.x, &s.y) {
            traj.left_box_at = Some(s.t);
        }
        traj.samples
            .push(make_sample(problem, steps, s, with_lyapunov)?);
        Ok(())
    };
    record(&mut traj, start.clone())?;
    if n == 0 {
        return Ok(traj);
    }
    let diverged = |mut traj: Trajectory, t: f64| GdadError::Divergence {
        t,
        partial: {
            traj.samples.shrink_to_fit();
            Box::new(traj)
        },
    };

    match config.method {
        Method::RK4Fixed => {
            let mut s = start;
            for k in 1..=n {
                let t_next = if k == n { config.horizon } else { h * k as f64 };
                s = match step_rk4(problem, steps, &s, h) {
                    Ok(next) => State { t: t_next, ..next },
                    Err(_) => return Err(diverged(traj, s.t)),
                };
                if s.exceeds(DIVERGENCE_LIMIT) {
                    return Err(diverged(traj, s.t));
                }
                if k % every == 0 || k == n {
                    record(&mut traj, s.clone())?;
                }
            }
        }
        Method::RK45Adaptive => {
            let spacing = h * every as f64;
            let outputs = (config.horizon / spacing - 1e-9).ceil().max(1.0) as usize;
            let m = problem.dim_x();
            let mut z = flat(&start);
            let mut t = 0.0;
            let mut step = h.min(spacing);
            let mut taken = 0usize;
            for j in 1..=outputs {
                let target = if j == outputs {
                    config.horizon
                } else {
                    spacing * j as f64
                };
                while t < target {
                    taken += 1;
                    if taken > ADAPTIVE_STEP_CAP {
                        return Err(diverged(traj, t));
                    }
                    let trial = step.min(target - t).min(h);
                    let (next, err) = match dopri_trial(problem, steps, t, &z, trial, config) {
                        Ok(r) => r,
                        Err(_) => return Err(diverged(traj, t)),
                    };
                    if !err.is_finite() {
                        step = trial * 0.2;
                        if step < 1e-14 * config.horizon.max(1.0) {
                            return Err(diverged(traj, t));
                        }
                        continue;
                    }
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if err <= 1.0 {
                        t = if trial == target - t {
                            target
                        } else {
                            t + trial
                        };
                        z = next;
                        if !linalg::all_finite(&z) || z.iter().any(|v| v.abs() > DIVERGENCE_LIMIT) {
                            return Err(diverged(traj, t));
                        }
                    }
                    step = trial * factor;
                }
                record(&mut traj, split(&z, m, target))?;
            }
        }
    }
    Ok(traj)
}

/// Discrepancy between two trajectories over their shared sample times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub dt: f64,
    /// Max Euclidean distance between stacked states.
    pub state: f64,
    /// Max difference over `v1`, `v2`, `v` (0 when absent).
    pub lyapunov: f64,
    /// Max difference of the stacked gradient norm.
    pub grad_norm: f64,
    pub samples_compared: usize,
}

/// Compares `fine` against `coarse` at every coarse sample time; the fine
/// run must record at the same times.
pub fn compare_trajectories(coarse: &Trajectory, fine: &Trajectory) -> Result<ErrorBudget> {
    if coarse.samples.len() != fine.samples.len() {
        return Err(GdadError::Configuration(format!(
            "sample grids differ ({} vs {} samples)",
            coarse.samples.len(),
            fine.samples.len()
        )));
    }
    let mut budget = ErrorBudget {
        dt: coarse.dt,
        state: 0.0,
        lyapunov: 0.0,
        grad_norm: 0.0,
        samples_compared: coarse.samples.len(),
    };
    for (a, b) in coarse.samples.iter().zip(&fine.samples) {
        let tol = 1e-9 * coarse.config.horizon.max(1.0);
        if (a.state.t - b.state.t).abs() > tol {
            return Err(GdadError::Configuration(format!(
                "sample times differ: {} vs {}",
                a.state.t, b.state.t
            )));
        }
        let d = (linalg::norm_sq(&linalg::axpy(&a.state.x, -1.0, &b.state.x))
            + linalg::norm_sq(&linalg::axpy(&a.state.y, -1.0, &b.state.y)))
        .sqrt();
        budget.state = budget.state.max(d);
        let ga = a.gx_norm.hypot(a.gy_norm);
        let gb = b.gx_norm.hypot(b.gy_norm);
        budget.grad_norm = budget.grad_norm.max((ga - gb).abs());
        if let (Some(la), Some(lb)) = (a.lyapunov, b.lyapunov) {
            let dl = (la.v1 - lb.v1)
                .abs()
                .max((la.v2 - lb.v2).abs())
                .max((la.v - lb.v).abs());
            budget.lyapunov = budget.lyapunov.max(dl);
        }
    }
    Ok(budget)
}

/// Runs the configured RK4 integration and a companion run at half the
/// step (recording at the same times) and returns both the coarse
/// trajectory and their discrepancy.
pub fn richardson_pair(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    x0: &[f64],
    y0: &[f64],
    config: &IntegratorConfig,
    exec: Exec,
) -> Result<(Trajectory, ErrorBudget)> {
    if config.method != Method::RK4Fixed {
        return Err(GdadError::Configuration(
            "Richardson check needs the fixed-step RK4 method".into(),
        ));
    }
    config.validate()?;
    let (_, h, every) = config.grid(problem, steps);
    let fine_cfg = IntegratorConfig {
        dt: TimeStep::Fixed(h / 2.0),
        record_every: Some(2 * every),
        ..*config
    };
    let coarse_cfg = IntegratorConfig {
        dt: TimeStep::Fixed(h),
        record_every: Some(every),
        ..*config
    };
    let (coarse, fine) = exec.join(
        || integrate(problem, steps, x0, y0, &coarse_cfg),
        || integrate(problem, steps, x0, y0, &fine_cfg),
    );
    let (mut coarse, fine) = (coarse?, fine?);
    coarse.config = *config;
    let budget = compare_trajectories(&coarse, &fine)?;
    Ok((coarse, budget))
}

pub fn richardson_check(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    x0: &[f64],
    y0: &[f64],
    config: &IntegratorConfig,
) -> Result<ErrorBudget> {
    richardson_pair(problem, steps, x0, y0, config, Exec::default()).map(|(_, b)| b)
}

/// Error budget for an adaptive run: the same run at tolerances divided by
/// 64, compared at the recorded times.
pub fn tolerance_pair(
    problem: &ObjectiveProblem,
    steps: &StepSizes,
    x0: &[f64],
    y0: &[f64],
    config: &IntegratorConfig,
    exec: Exec,
) -> Result<(Trajectory, ErrorBudget)> {
    let tight = IntegratorConfig {
        rel_tol: config.rel_tol / 64.0,
        abs_tol: config.abs_tol / 64.0,
        ..*config
    };
    let (a, b) = exec.join(
        || integrate(problem, steps, x0, y0, config),
        || integrate(problem, steps, x0, y0, &tight),
    );
    let a = a?;
    let budget = compare_trajectories(&a, &b?)?;
    Ok((a, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{stepsizes_two_sided_pl, Orientation};
    use crate::problems::{make_bilinear, make_quadratic_saddle};
    use std::f64::consts::PI;

    fn unit() -> StepSizes {
        StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY).unwrap()
    }

    #[test]
    fn fixed_point_only_advances_time() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = State::new(vec![0.0], vec![0.0]);
        let next = step_rk4(&q, &unit(), &s, 0.1).unwrap();
        assert_eq!(next.x, s.x);
        assert_eq!(next.y, s.y);
        assert_eq!(next.t, 0.1);
    }

    #[test]
    fn single_step_matches_rotation() {
        let bl = make_bilinear(1).unwrap();
        let dt = 1e-3;
        let next = step_rk4(&bl, &unit(), &State::new(vec![1.0], vec![0.0]), dt).unwrap();
        assert!((next.x[0] - dt.cos()).abs() < 1e-12);
        assert!((next.y[0] - dt.sin()).abs() < 1e-12);
    }

    #[test]
    fn step_is_linear_on_quadratic() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        let a = State::new(vec![0.3], vec![-1.2]);
        let b = State::new(vec![-2.0], vec![0.7]);
        let sum = State::new(vec![a.x[0] + b.x[0]], vec![a.y[0] + b.y[0]]);
        let (sa, sb, ss) = (
            step_rk4(&q, &s, &a, 0.01).unwrap(),
            step_rk4(&q, &s, &b, 0.01).unwrap(),
            step_rk4(&q, &s, &sum, 0.01).unwrap(),
        );
        assert!((ss.x[0] - sa.x[0] - sb.x[0]).abs() < 1e-12);
        assert!((ss.y[0] - sa.y[0] - sb.y[0]).abs() < 1e-12);
    }

    #[test]
    fn full_period_returns_home() {
        let bl = make_bilinear(1).unwrap();
        let tr = integrate(
            &bl,
            &unit(),
            &[1.0],
            &[0.0],
            &IntegratorConfig::rk4(2.0 * PI, 1e-3),
        )
        .unwrap();
        let end = tr.final_state();
        assert_eq!(end.t, 2.0 * PI);
        assert!((end.x[0] - 1.0).abs() < 1e-8 && end.y[0].abs() < 1e-8);
        assert!(!tr.has_lyapunov());
        assert!(tr.samples.windows(2).all(|w| w[0].state.t < w[1].state.t));
        assert!(tr
            .samples
            .windows(2)
            .all(|w| w[1].state.t - w[0].state.t <= MAX_RECORD_SPACING + 1e-12));
    }

    #[test]
    fn zero_horizon_is_single_sample() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        let tr = integrate(&q, &s, &[1.0], &[1.0], &IntegratorConfig::rk4(0.0, 1e-3)).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].state, State::new(vec![1.0], vec![1.0]));
    }

    #[test]
    fn adaptive_matches_rotation() {
        let bl = make_bilinear(1).unwrap();
        let cfg = IntegratorConfig {
            method: Method::RK45Adaptive,
            ..IntegratorConfig::rk4(2.0 * PI, 0.1)
        };
        let tr = integrate(&bl, &unit(), &[1.0], &[0.0], &cfg).unwrap();
        for s in &tr.samples {
            assert!((s.state.x[0] - s.state.t.cos()).abs() < 1e-7);
            assert!((s.state.y[0] - s.state.t.sin()).abs() < 1e-7);
        }
        assert_eq!(tr.final_state().t, 2.0 * PI);
    }

    #[test]
    fn divergence_carries_partial_trajectory() {
        // Gradient ascent in x on the bilinear game with a huge step explodes.
        let bl = make_bilinear(1).unwrap();
        let s = StepSizes::new(1.0, 1.0, 1.0, Orientation::FastY).unwrap();
        let cfg = IntegratorConfig::rk4(1e4, 3.0);
        match integrate(&bl, &s, &[1.0], &[0.0], &cfg) {
            Err(GdadError::Divergence { partial, .. }) => {
                assert!(!partial.samples.is_empty());
                assert!(partial.samples.iter().all(|s| s.state.is_finite()));
            }
            other => panic!(
                "expected divergence, got {:?}",
                other.map(|t| t.samples.len())
            ),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = unit();
        assert!(integrate(&q, &s, &[1.0], &[1.0], &IntegratorConfig::rk4(-1.0, 1e-3)).is_err());
        assert!(integrate(&q, &s, &[1.0], &[1.0], &IntegratorConfig::rk4(1.0, 0.0)).is_err());
        assert!(integrate(
            &q,
            &s,
            &[1.0, 2.0],
            &[1.0],
            &IntegratorConfig::rk4(1.0, 0.1)
        )
        .is_err());
    }

    #[test]
    fn richardson_zero_field_is_exact() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        let b =
            richardson_check(&q, &s, &[0.0], &[0.0], &IntegratorConfig::rk4(5.0, 1e-2)).unwrap();
        assert_eq!((b.state, b.lyapunov, b.grad_norm), (0.0, 0.0, 0.0));
    }

    #[test]
    fn richardson_rejects_adaptive() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let cfg = IntegratorConfig {
            method: Method::RK45Adaptive,
            ..IntegratorConfig::rk4(1.0, 0.1)
        };
        assert!(richardson_check(&q, &unit(), &[1.0], &[1.0], &cfg).is_err());
    }

    #[test]
    fn auto_dt_follows_field_scale() {
        let q = make_quadratic_saddle(1.0, 1.0, 2.0).unwrap();
        let s = stepsizes_two_sided_pl(q.constants()).unwrap();
        // beta (L_y + L_xy) + alpha (L_x + L_xy) + 1 = 3 + 3/40 + 1
        let expected = (0.1f64 / (3.0 + 3.0 / 40.0 + 1.0)).min(1e-2);
        assert_eq!(auto_dt(&q, &s), expected);
    }
}
