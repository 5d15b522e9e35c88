//! Central-difference check of the analytic partial gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdadError, Result};
use crate::exec::Exec;
use crate::problems::ObjectiveProblem;

/// Pass threshold on the maximum relative error.
pub const GRADCHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub problem: String,
    pub points: usize,
    pub h: f64,
    /// `max |fd - analytic| / max(1, |analytic|, |fd|)` over all coordinates.
    pub max_rel_error: f64,
    pub worst_point: Option<(Vec<f64>, Vec<f64>)>,
    pub pass: bool,
}

pub fn gradcheck(
    problem: &ObjectiveProblem,
    points: &[(Vec<f64>, Vec<f64>)],
    h: f64,
) -> Result<GradcheckReport> {
    gradcheck_with(Exec::default(), problem, points, h)
}

/// Worst relative error at one point. The difference step on each
/// coordinate is `h (1 + |coordinate|)`.
fn point_error(problem: &ObjectiveProblem, x: &[f64], y: &[f64], h: f64) -> f64 {
    let gx = problem.grad_x(x, y);
    let gy = problem.grad_y(x, y);
    let rel = |fd: f64, an: f64| (fd - an).abs() / 1f64.max(an.abs()).max(fd.abs());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let d = h * (1.0 + x[i].abs());
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[i] += d;
        xm[i] -= d;
        let fd = (problem.eval_f(&xp, y) - problem.eval_f(&xm, y)) / (xp[i] - xm[i]);
        worst = worst.max(rel(fd, gx[i]));
    }
    for j in 0..y.len() {
        let d = h * (1.0 + y[j].abs());
        let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
        yp[j] += d;
        ym[j] -= d;
        let fd = (problem.eval_f(x, &yp) - problem.eval_f(x, &ym)) / (yp[j] - ym[j]);
        worst = worst.max(rel(fd, gy[j]));
    }
    worst
}

pub fn gradcheck_with(
    exec: Exec,
    problem: &ObjectiveProblem,
    points: &[(Vec<f64>, Vec<f64>)],
    h: f64,
) -> Result<GradcheckReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GdadError::invalid("h", format!("must be > 0, got {h}")));
    }
    for (x, y) in points {
        problem.check_dims(x, y)?;
    }
    let errors = exec.map(points, |(x, y)| point_error(problem, x, y, h));
    let worst = errors
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &e)| match best {
            Some((_, b)) if b >= e => best,
            _ => Some((i, e)),
        });
    let max_rel_error = worst.map_or(0.0, |(_, e)| e);
    Ok(GradcheckReport {
        problem: problem.id().to_string(),
        points: points.len(),
        h,
        max_rel_error,
        worst_point: worst.map(|(i, _)| points[i].clone()),
        pass: max_rel_error <= GRADCHECK_TOL,
    })
}

/// Gradient check at `n` seeded uniform points of the certification box.
pub fn gradcheck_seeded(
    exec: Exec,
    problem: &ObjectiveProblem,
    n: usize,
    seed: u64,
    h: f64,
) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = problem.dim_x();
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|_| {
            let z = problem.cert_box().sample(&mut rng);
            (z[..m].to_vec(), z[m..].to_vec())
        })
        .collect();
    gradcheck_with(exec, problem, &points, h)
}
