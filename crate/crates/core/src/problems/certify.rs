//! Grid- and sample-based certification of the declared PL and Lipschitz
//! constants over a finite box, plus the gradient-ascent inner solver used
//! when no closed-form maximizer exists.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoxRegion, ObjectiveProblem, RegimeTag};
use crate::error::{GdadError, Result};
use crate::exec::Exec;
use crate::linalg;

/// `(gap, |grad|^2)` at `(x, y)` for one PL side.
type GapAndGrad<'a> = dyn Fn(&[f64], &[f64]) -> (f64, f64) + Sync + Send + 'a;

pub const INNER_MAX_ITERATION_CAP: usize = 1_000_000;

const PL_REL_TOL: f64 = 1e-9;
const LIPSCHITZ_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlSide {
    X,
    Y,
}

/// Worst violation of `2 mu gap <= |grad|^2` over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlCertificate {
    pub side: PlSide,
    pub mu: f64,
    #[serde(rename = "box")]
    pub region: BoxRegion,
    pub grid_points_per_axis: usize,
    pub points: usize,
    pub max_violation: f64,
    pub gap_scale: f64,
    pub threshold: f64,
    /// Zero PL constant: the inequality holds without evaluating anything.
    pub trivial: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    #[serde(rename = "box")]
    pub region: BoxRegion,
    pub samples: usize,
    pub seed: u64,
    pub ratio_x: f64,
    pub ratio_y: f64,
    pub skipped: usize,
    pub pass: bool,
}

/// Empirical Lipschitz constant of `x -> grad_x f(x, y*(x))`, alongside the
/// two candidate closed forms `L_x + L_xy/mu_y` and `L_x + L_xy^2/mu_y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeLipschitz {
    pub measured: f64,
    pub linear_formula: f64,
    pub squared_formula: f64,
    pub linear_formula_holds: bool,
    pub squared_formula_holds: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Certifies every PL inequality the problem declares: the y-side always
/// (trivially when `mu_y = 0`), the x-side when `mu_x > 0` or the regime is
/// two-sided.
pub fn certify_pl(
    problem: &ObjectiveProblem,
    region: &BoxRegion,
    grid_points_per_axis: usize,
) -> Result<Vec<PlCertificate>> {
    let mut out = vec![certify_pl_side(
        problem,
        PlSide::Y,
        region,
        grid_points_per_axis,
    )?];
    if problem.constants().mu_x > 0.0 || problem.regime() == Some(RegimeTag::TwoSidedPL) {
        out.push(certify_pl_side(
            problem,
            PlSide::X,
            region,
            grid_points_per_axis,
        )?);
    }
    Ok(out)
}

pub fn certify_pl_side(
    problem: &ObjectiveProblem,
    side: PlSide,
    region: &BoxRegion,
    grid_points_per_axis: usize,
) -> Result<PlCertificate> {
    certify_pl_side_with(Exec::default(), problem, side, region, grid_points_per_axis)
}

pub fn certify_pl_side_with(
    exec: Exec,
    problem: &ObjectiveProblem,
    side: PlSide,
    region: &BoxRegion,
    grid_points_per_axis: usize,
) -> Result<PlCertificate> {
    let m = problem.dim_x();
    if region.dims() != m + problem.dim_y() {
        return Err(GdadError::DimensionMismatch {
            what: "certification box",
            expected: m + problem.dim_y(),
            got: region.dims(),
        });
    }
    if grid_points_per_axis < 2 {
        return Err(GdadError::invalid(
            "grid_points_per_axis",
            "need at least 2",
        ));
    }
    let axes = region.dims();
    let points = grid_points_per_axis
        .checked_pow(axes as u32)
        .filter(|&p| p <= 50_000_000)
        .ok_or_else(|| GdadError::invalid("grid_points_per_axis", "grid too large"))?;
    let mu = match side {
        PlSide::X => problem.constants().mu_x,
        PlSide::Y => problem.constants().mu_y,
    };
    if mu == 0.0 {
        return Ok(PlCertificate {
            side,
            mu,
            region: region.clone(),
            grid_points_per_axis,
            points: 0,
            max_violation: 0.0,
            gap_scale: 0.0,
            threshold: PL_REL_TOL,
            trivial: true,
            pass: true,
        });
    }

    // (gap, violation) at one grid point.
    let evaluate: Box<GapAndGrad<'_>> = match side {
        PlSide::Y => {
            problem.max_oracle().ok_or_else(|| {
                GdadError::UnsupportedCertificate(format!(
                    "y-side PL on `{}` needs a max oracle",
                    problem.id()
                ))
            })?;
            Box::new(move |x: &[f64], y: &[f64]| {
                let oracle = problem.max_oracle().expect("checked above");
                let gap = oracle.max_value(x) - problem.eval_f(x, y);
                let g = linalg::norm_sq(&problem.grad_y(x, y));
                (gap, 2.0 * mu * gap - g)
            })
        }
        PlSide::X => {
            problem.min_oracle().ok_or_else(|| {
                GdadError::UnsupportedCertificate(format!(
                    "x-side PL on `{}` needs a min oracle",
                    problem.id()
                ))
            })?;
            Box::new(move |x: &[f64], y: &[f64]| {
                let oracle = problem.min_oracle().expect("checked above");
                let gap = problem.eval_f(x, y) - oracle.min_value(y);
                let g = linalg::norm_sq(&problem.grad_x(x, y));
                (gap, 2.0 * mu * gap - g)
            })
        }
    };

    let n = grid_points_per_axis;
    let results = exec.map_range(points, |idx| {
        let z = grid_point(region, n, idx);
        let (x, y) = z.split_at(m);
        evaluate(x, y)
    });
    let (gap_scale, max_violation) = results
        .iter()
        .fold((0.0f64, f64::NEG_INFINITY), |(s, v), &(gap, viol)| {
            (s.max(gap.abs()), v.max(viol))
        });
    let threshold = PL_REL_TOL * (1.0 + gap_scale);
    Ok(PlCertificate {
        side,
        mu,
        region: region.clone(),
        grid_points_per_axis,
        points,
        max_violation,
        gap_scale,
        threshold,
        trivial: false,
        pass: max_violation <= threshold,
    })
}

fn grid_point(region: &BoxRegion, n: usize, mut idx: usize) -> Vec<f64> {
    (0..region.dims())
        .map(|axis| {
            let k = idx % n;
            idx /= n;
            let (a, b) = region.axis(axis);
            a + (b - a) * k as f64 / (n - 1) as f64
        })
        .collect()
}

fn sample_pairs(region: &BoxRegion, samples: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| (region.sample(&mut rng), region.sample(&mut rng)))
        .collect()
}

pub fn certify_lipschitz(
    problem: &ObjectiveProblem,
    region: &BoxRegion,
    samples: usize,
    seed: u64,
) -> Result<LipschitzCertificate> {
    certify_lipschitz_with(Exec::default(), problem, region, samples, seed)
}

/// Largest observed ratio of gradient change to the declared Lipschitz
/// envelope `L_x |dx| + L_xy |dy|` (and the y analogue) over seeded random
/// pairs. Pairs with a zero envelope are skipped.
pub fn certify_lipschitz_with(
    exec: Exec,
    problem: &ObjectiveProblem,
    region: &BoxRegion,
    samples: usize,
    seed: u64,
) -> Result<LipschitzCertificate> {
    if samples < 2 {
        return Err(GdadError::invalid("samples", "need at least 2"));
    }
    let m = problem.dim_x();
    if region.dims() != m + problem.dim_y() {
        return Err(GdadError::DimensionMismatch {
            what: "certification box",
            expected: m + problem.dim_y(),
            got: region.dims(),
        });
    }
    let c = *problem.constants();
    let pairs = sample_pairs(region, samples, seed);
    let ratios = exec.map(&pairs, |(z1, z2)| {
        let (x1, y1) = z1.split_at(m);
        let (x2, y2) = z2.split_at(m);
        let (dx, dy) = (linalg::dist(x1, x2), linalg::dist(y1, y2));
        let gx = linalg::dist(&problem.grad_x(x1, y1), &problem.grad_x(x2, y2));
        let gy = linalg::dist(&problem.grad_y(x1, y1), &problem.grad_y(x2, y2));
        let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
        (
            ratio(gx, c.l_x * dx + c.l_xy * dy),
            ratio(gy, c.l_xy * dx + c.l_y * dy),
        )
    });
    let mut skipped = 0;
    let (mut ratio_x, mut ratio_y) = (0.0f64, 0.0f64);
    for (rx, ry) in ratios {
        match rx {
            Some(r) => ratio_x = ratio_x.max(r),
            None => skipped += 1,
        }
        match ry {
            Some(r) => ratio_y = ratio_y.max(r),
            None => skipped += 1,
        }
    }
    Ok(LipschitzCertificate {
        region: region.clone(),
        samples,
        seed,
        ratio_x,
        ratio_y,
        skipped,
        pass: ratio_x <= 1.0 + LIPSCHITZ_SLACK && ratio_y <= 1.0 + LIPSCHITZ_SLACK,
    })
}

pub fn measure_envelope_lipschitz(
    problem: &ObjectiveProblem,
    region: &BoxRegion,
    samples: usize,
    seed: u64,
) -> Result<EnvelopeLipschitz> {
    let oracle = problem.max_oracle().ok_or_else(|| {
        GdadError::UnsupportedCertificate(format!("`{}` has no max oracle", problem.id()))
    })?;
    if samples < 2 {
        return Err(GdadError::invalid("samples", "need at least 2"));
    }
    let c = problem.constants();
    if c.mu_y <= 0.0 {
        return Err(GdadError::UnsupportedCertificate("needs mu_y > 0".into()));
    }
    let m = problem.dim_x();
    let envelope_grad = |x: &[f64]| problem.grad_x(x, &oracle.y_star(x));
    let measured = sample_pairs(region, samples, seed)
        .iter()
        .filter_map(|(z1, z2)| {
            let (x1, x2) = (&z1[..m], &z2[..m]);
            let d = linalg::dist(x1, x2);
            (d > 0.0).then(|| linalg::dist(&envelope_grad(x1), &envelope_grad(x2)) / d)
        })
        .fold(0.0, f64::max);
    let linear_formula = c.l_x + c.l_xy / c.mu_y;
    let squared_formula = c.l_x + c.l_xy * c.l_xy / c.mu_y;
    Ok(EnvelopeLipschitz {
        measured,
        linear_formula,
        squared_formula,
        linear_formula_holds: measured <= linear_formula * (1.0 + LIPSCHITZ_SLACK),
        squared_formula_holds: measured <= squared_formula * (1.0 + LIPSCHITZ_SLACK),
        samples,
        seed,
    })
}

/// Gradient ascent on `f(x, .)` from `y = 0` with step `1/L_y`
/// (`1/(L_y + L_xy)` when `L_y = 0`) until `|grad_y f| <= tol`.
pub fn inner_max_solve(problem: &ObjectiveProblem, x: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    if problem.regime() == Some(RegimeTag::StronglyConvexNonconcave) {
        return Err(GdadError::Configuration(
            "inner maximization needs a PL or concave y-side".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(GdadError::invalid("tol", "must be > 0"));
    }
    if x.len() != problem.dim_x() {
        return Err(GdadError::DimensionMismatch {
            what: "x",
            expected: problem.dim_x(),
            got: x.len(),
        });
    }
    let c = problem.constants();
    let lip = if c.l_y > 0.0 { c.l_y } else { c.l_y + c.l_xy };
    if !(lip > 0.0) {
        return Err(GdadError::invalid(
            "constants",
            "inner solver needs L_y + L_xy > 0",
        ));
    }
    let step = 1.0 / lip;
    let mut y = vec![0.0; problem.dim_y()];
    let mut g = problem.grad_y(x, &y);
    for _ in 0..INNER_MAX_ITERATION_CAP {
        if linalg::norm(&g) <= tol {
            let v = problem.eval_f(x, &y);
            return Ok((y, v));
        }
        y = linalg::axpy(&y, step, &g);
        g = problem.grad_y(x, &y);
    }
    let grad_norm = linalg::norm(&g);
    if grad_norm <= tol {
        let v = problem.eval_f(x, &y);
        return Ok((y, v));
    }
    Err(GdadError::NonConvergence {
        iterations: INNER_MAX_ITERATION_CAP,
        grad_norm,
    })
}
