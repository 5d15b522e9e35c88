//! Min-max test problems with analytic gradients, declared smoothness and PL
//! constants, closed-form inner oracles, and grid/sample certification of
//! those declarations.

mod certify;
mod landscape;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use certify::{
    certify_lipschitz, certify_lipschitz_with, certify_pl, certify_pl_side, certify_pl_side_with,
    inner_max_solve, measure_envelope_lipschitz, EnvelopeLipschitz, LipschitzCertificate,
    PlCertificate, PlSide, INNER_MAX_ITERATION_CAP,
};

use crate::error::{GdadError, Result};
use crate::linalg;
use landscape::{ripple_curvature_bound, Landscape};

/// Half-width of the default certification box around the origin.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub l_x: f64,
    pub l_y: f64,
    pub l_xy: f64,
    pub mu_x: f64,
    pub mu_y: f64,
}

impl SmoothnessConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l_x", self.l_x),
            ("l_y", self.l_y),
            ("l_xy", self.l_xy),
            ("mu_x", self.mu_x),
            ("mu_y", self.mu_y),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GdadError::invalid(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Two-sided PL ordering: both PL constants positive and no larger than
    /// the cross constant or their own smoothness constant.
    pub fn validate_two_sided(&self) -> Result<()> {
        self.validate()?;
        if self.mu_x <= 0.0 || self.mu_y <= 0.0 {
            return Err(GdadError::ConstantOrdering(format!(
                "two-sided PL needs mu_x, mu_y > 0 (got {}, {})",
                self.mu_x, self.mu_y
            )));
        }
        if self.mu_x.max(self.mu_y) > self.l_xy {
            return Err(GdadError::ConstantOrdering(format!(
                "max(mu_x, mu_y) = {} exceeds L_xy = {}",
                self.mu_x.max(self.mu_y),
                self.l_xy
            )));
        }
        if self.mu_x > self.l_x || self.mu_y > self.l_y {
            return Err(GdadError::ConstantOrdering(format!(
                "PL constants ({}, {}) exceed smoothness constants ({}, {})",
                self.mu_x, self.mu_y, self.l_x, self.l_y
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeTag {
    #[serde(rename = "two-sided-pl")]
    TwoSidedPL,
    #[serde(rename = "nonconvex-pl")]
    NonconvexPL,
    #[serde(rename = "nonconvex-strongly-concave")]
    NonconvexStronglyConcave,
    #[serde(rename = "strongly-convex-nonconcave")]
    StronglyConvexNonconcave,
}

impl RegimeTag {
    pub const ALL: [RegimeTag; 4] = [
        RegimeTag::TwoSidedPL,
        RegimeTag::NonconvexPL,
        RegimeTag::NonconvexStronglyConcave,
        RegimeTag::StronglyConvexNonconcave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegimeTag::TwoSidedPL => "two-sided-pl",
            RegimeTag::NonconvexPL => "nonconvex-pl",
            RegimeTag::NonconvexStronglyConcave => "nonconvex-strongly-concave",
            RegimeTag::StronglyConvexNonconcave => "strongly-convex-nonconcave",
        }
    }

    /// Whether y is the fast variable (coupled Lyapunov weighted by
    /// gamma*alpha/beta) or x is.
    pub fn fast_y(self) -> bool {
        !matches!(self, RegimeTag::StronglyConvexNonconcave)
    }
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeTag {
    type Err = GdadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "two-sided-pl" | "pl-pl" | "thm1" => Ok(RegimeTag::TwoSidedPL),
            "nonconvex-pl" | "one-sided-pl" | "nc-pl" | "thm2" => Ok(RegimeTag::NonconvexPL),
            "nonconvex-strongly-concave" | "nc-sc" | "thm3" => {
                Ok(RegimeTag::NonconvexStronglyConcave)
            }
            "strongly-convex-nonconcave" | "sc-nc" | "thm4" => {
                Ok(RegimeTag::StronglyConvexNonconcave)
            }
            other => Err(GdadError::invalid(
                "regime",
                format!("unknown regime `{other}`"),
            )),
        }
    }
}

/// Axis-aligned region over the stacked coordinates `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(GdadError::invalid(
                "box",
                "bounds must be non-empty and of equal length",
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(GdadError::invalid("box", "each axis needs finite lo < hi"));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// `[-r, r]^dims`
    pub fn cube(dims: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; dims], vec![r; dims])
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn axis(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(p, (a, b))| *a <= *p && *p <= *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| rng.random_range(*a..=*b))
            .collect()
    }
}

/// Closed-form inner maximizer `y*(x)` and value `max_y f(x, y)`.
#[derive(Clone, Copy)]
pub struct MaxOracle<'a> {
    problem: &'a ObjectiveProblem,
}

impl MaxOracle<'_> {
    pub fn y_star(&self, x: &[f64]) -> Vec<f64> {
        let l = &self.problem.landscape;
        x.iter()
            .map(|&a| l.y_star(a).expect("max oracle"))
            .collect()
    }

    pub fn max_value(&self, x: &[f64]) -> f64 {
        let l = &self.problem.landscape;
        x.iter().map(|&a| l.max_value(a).expect("max oracle")).sum()
    }
}

/// Closed-form inner minimizer `x*(y)` and value `min_x f(x, y)`.
#[derive(Clone, Copy)]
pub struct MinOracle<'a> {
    problem: &'a ObjectiveProblem,
}

impl MinOracle<'_> {
    pub fn x_star(&self, y: &[f64]) -> Vec<f64> {
        let l = &self.problem.landscape;
        y.iter()
            .map(|&c| l.x_star(c).expect("min oracle"))
            .collect()
    }

    pub fn min_value(&self, y: &[f64]) -> f64 {
        let l = &self.problem.landscape;
        y.iter().map(|&c| l.min_value(c).expect("min oracle")).sum()
    }
}

/// A smooth objective `f(x, y)` to be minimized in x and maximized in y.
///
/// Built-in problems have `m = n = dim` and are sums of per-coordinate terms.
/// Constants are derived from the landscape and certification box at
/// construction; [`ObjectiveProblem::with_constants`] replaces them verbatim
/// (used to exercise certificate failures).
#[derive(Clone, Debug)]
pub struct ObjectiveProblem {
    id: String,
    params: Vec<(&'static str, f64)>,
    dim: usize,
    landscape: Landscape,
    constants: SmoothnessConstants,
    regime: Option<RegimeTag>,
    cert_box: BoxRegion,
    f_lower: Option<f64>,
    f_ref_upper: Option<f64>,
    minmax_value: Option<f64>,
}

/// `f(x,y) = mu_x/2 |x|^2 + b x.y - mu_y/2 |y|^2`, two-sided PL with saddle at
/// the origin.
pub fn make_quadratic_saddle(mu_x: f64, mu_y: f64, b: f64) -> Result<ObjectiveProblem> {
    positive("mu_x", mu_x)?;
    positive("mu_y", mu_y)?;
    finite("b", b)?;
    if b.abs() < mu_x.max(mu_y) {
        return Err(GdadError::ConstantOrdering(format!(
            "|b| = {} must be >= max(mu_x, mu_y) = {}",
            b.abs(),
            mu_x.max(mu_y)
        )));
    }
    ObjectiveProblem::build(
        "quadratic-saddle",
        vec![("mu_x", mu_x), ("mu_y", mu_y), ("b", b)],
        Landscape::QuadraticSaddle { mu_x, mu_y, b },
        Some(RegimeTag::TwoSidedPL),
        1,
        None,
    )
}

/// `f(x,y) = sum_i x_i^2 sin^2 x_i + b x.y - mu_y/2 |y|^2`: nonconvex in x,
/// strongly concave in y.
pub fn make_nc_sc_problem(mu_y: f64, b: f64) -> Result<ObjectiveProblem> {
    positive("mu_y", mu_y)?;
    nonzero("b", b)?;
    ObjectiveProblem::build(
        "nc-sc",
        vec![("mu_y", mu_y), ("b", b)],
        Landscape::RippleConcave { mu_y, b },
        Some(RegimeTag::NonconvexStronglyConcave),
        1,
        None,
    )
}

/// Same landscape as [`make_nc_sc_problem`], tagged for the one-sided PL
/// regime (strong concavity in y implies PL in y with the same constant).
pub fn make_nc_pl_problem(mu_y: f64, b: f64) -> Result<ObjectiveProblem> {
    positive("mu_y", mu_y)?;
    nonzero("b", b)?;
    ObjectiveProblem::build(
        "nc-pl",
        vec![("mu_y", mu_y), ("b", b)],
        Landscape::RippleConcave { mu_y, b },
        Some(RegimeTag::NonconvexPL),
        1,
        None,
    )
}

/// `f(x,y) = mu_x/2 |x|^2 + b x.y - sum_i y_i^2 sin^2 y_i`: strongly convex in
/// x, nonconcave in y.
pub fn make_sc_nc_problem(mu_x: f64, b: f64) -> Result<ObjectiveProblem> {
    positive("mu_x", mu_x)?;
    nonzero("b", b)?;
    ObjectiveProblem::build(
        "sc-nc",
        vec![("mu_x", mu_x), ("b", b)],
        Landscape::ConvexRipple { mu_x, b },
        Some(RegimeTag::StronglyConvexNonconcave),
        1,
        None,
    )
}

/// `f(x,y) = x.y`. No regime; used to calibrate the integrator.
pub fn make_bilinear(dim: usize) -> Result<ObjectiveProblem> {
    ObjectiveProblem::build("bilinear", vec![], Landscape::Bilinear, None, dim, None)
}

/// Problem ids accepted by [`make_problem`].
pub const PROBLEM_IDS: [&str; 5] = ["quadratic-saddle", "nc-pl", "nc-sc", "sc-nc", "bilinear"];

/// Optional parameters for [`make_problem`]; missing values default to
/// `mu_x = mu_y = 1`, `b = 2`, `dim = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProblemParams {
    pub mu_x: Option<f64>,
    pub mu_y: Option<f64>,
    pub b: Option<f64>,
    pub dim: Option<usize>,
}

pub fn make_problem(id: &str, params: &ProblemParams) -> Result<ObjectiveProblem> {
    let mu_x = params.mu_x.unwrap_or(1.0);
    let mu_y = params.mu_y.unwrap_or(1.0);
    let b = params.b.unwrap_or(2.0);
    let dim = params.dim.unwrap_or(1);
    let p = match id {
        "quadratic-saddle" => make_quadratic_saddle(mu_x, mu_y, b)?,
        "nc-pl" => make_nc_pl_problem(mu_y, b)?,
        "nc-sc" => make_nc_sc_problem(mu_y, b)?,
        "sc-nc" => make_sc_nc_problem(mu_x, b)?,
        "bilinear" => return make_bilinear(dim),
        other => {
            return Err(GdadError::invalid(
                "problem",
                format!(
                    "unknown problem `{other}` (known: {})",
                    PROBLEM_IDS.join(", ")
                ),
            ))
        }
    };
    if dim == 1 {
        Ok(p)
    } else {
        p.with_dim(dim)
    }
}

impl ObjectiveProblem {
    fn build(
        id: &str,
        params: Vec<(&'static str, f64)>,
        landscape: Landscape,
        regime: Option<RegimeTag>,
        dim: usize,
        cert_box: Option<BoxRegion>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(GdadError::invalid(
                "dim",
                "zero-dimensional problems are rejected",
            ));
        }
        let cert_box = match cert_box {
            Some(b) if b.dims() != 2 * dim => {
                return Err(GdadError::DimensionMismatch {
                    what: "certification box",
                    expected: 2 * dim,
                    got: b.dims(),
                })
            }
            Some(b) => b,
            None => BoxRegion::cube(2 * dim, DEFAULT_BOX_HALF_WIDTH)?,
        };
        let constants = derive_constants(&landscape, &cert_box, dim);
        let (f_lower, f_ref_upper) = (0..dim)
            .map(|i| landscape.range_over(cert_box.axis(i), cert_box.axis(dim + i)))
            .fold((0.0, 0.0), |(lo, hi), (a, b)| (lo + a, hi + b));
        let minmax_value = match landscape {
            Landscape::QuadraticSaddle { .. } => Some(0.0),
            _ => None,
        };
        let p = ObjectiveProblem {
            id: id.to_string(),
            params,
            dim,
            landscape,
            constants,
            regime: None,
            cert_box,
            f_lower: Some(f_lower),
            f_ref_upper: Some(f_ref_upper),
            minmax_value,
        };
        match regime {
            Some(r) => p.with_regime(r),
            None => Ok(p),
        }
    }

    /// Rebuilds the problem in `dim` dimensions (constants and box references
    /// recomputed over the default cube).
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::build(
            &self.id,
            self.params.clone(),
            self.landscape,
            self.regime,
            dim,
            None,
        )
    }

    /// Rebuilds the problem over a different certification box.
    pub fn with_box(&self, cert_box: BoxRegion) -> Result<Self> {
        Self::build(
            &self.id,
            self.params.clone(),
            self.landscape,
            self.regime,
            self.dim,
            Some(cert_box),
        )
    }

    /// Replaces the declared constants without re-deriving anything.
    pub fn with_constants(mut self, constants: SmoothnessConstants) -> Self {
        self.constants = constants;
        self
    }

    /// Re-tags the regime after checking that the references the regime's
    /// Lyapunov functions and schedule need are available.
    pub fn with_regime(mut self, regime: RegimeTag) -> Result<Self> {
        let c = &self.constants;
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(GdadError::Configuration(format!(
                    "problem `{}` cannot be run in regime {regime}: {what}",
                    self.id
                )))
            }
        };
        match regime {
            RegimeTag::TwoSidedPL => {
                need(c.mu_x > 0.0 && c.mu_y > 0.0, "needs mu_x, mu_y > 0")?;
                need(self.landscape.has_max_oracle(), "needs a max oracle")?;
                need(self.minmax_value.is_some(), "needs the min-max value")?;
            }
            RegimeTag::NonconvexPL => {
                need(c.mu_y > 0.0, "needs mu_y > 0")?;
                need(self.f_lower.is_some(), "needs f_lower")?;
            }
            RegimeTag::NonconvexStronglyConcave => {
                need(c.mu_y > 0.0, "needs mu_y > 0")?;
                need(self.f_lower.is_some(), "needs f_lower")?;
            }
            RegimeTag::StronglyConvexNonconcave => {
                need(c.mu_x > 0.0, "needs mu_x > 0")?;
                need(self.f_ref_upper.is_some(), "needs f_ref_upper")?;
            }
        }
        self.regime = Some(regime);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> &[(&'static str, f64)] {
        &self.params
    }

    pub fn dim_x(&self) -> usize {
        self.dim
    }

    pub fn dim_y(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> &SmoothnessConstants {
        &self.constants
    }

    pub fn regime(&self) -> Option<RegimeTag> {
        self.regime
    }

    pub fn cert_box(&self) -> &BoxRegion {
        &self.cert_box
    }

    pub fn f_lower(&self) -> Option<f64> {
        self.f_lower
    }

    pub fn f_ref_upper(&self) -> Option<f64> {
        self.f_ref_upper
    }

    pub fn minmax_value(&self) -> Option<f64> {
        self.minmax_value
    }

    pub fn max_oracle(&self) -> Option<MaxOracle<'_>> {
        self.landscape
            .has_max_oracle()
            .then_some(MaxOracle { problem: self })
    }

    pub fn min_oracle(&self) -> Option<MinOracle<'_>> {
        self.landscape
            .has_min_oracle()
            .then_some(MinOracle { problem: self })
    }

    pub fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(GdadError::DimensionMismatch {
                what: "x",
                expected: self.dim,
                got: x.len(),
            });
        }
        if y.len() != self.dim {
            return Err(GdadError::DimensionMismatch {
                what: "y",
                expected: self.dim,
                got: y.len(),
            });
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(&a, &c)| self.landscape.phi(a, c))
            .sum()
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(&a, &c)| self.landscape.dphi_dx(a, c))
            .collect()
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(&a, &c)| self.landscape.dphi_dy(a, c))
            .collect()
    }

    /// Norm of the stacked gradient `(grad_x f, grad_y f)`.
    pub fn stacked_grad_norm(&self, x: &[f64], y: &[f64]) -> f64 {
        (linalg::norm_sq(&self.grad_x(x, y)) + linalg::norm_sq(&self.grad_y(x, y))).sqrt()
    }

    /// Whether the stacked point `(x, y)` lies in the certification box.
    pub fn in_box(&self, x: &[f64], y: &[f64]) -> bool {
        let mut z = x.to_vec();
        z.extend_from_slice(y);
        self.cert_box.contains(&z)
    }
}

fn derive_constants(
    landscape: &Landscape,
    cert_box: &BoxRegion,
    dim: usize,
) -> SmoothnessConstants {
    let curvature = |offset: usize| {
        (0..dim)
            .map(|i| {
                let (a, b) = cert_box.axis(offset + i);
                ripple_curvature_bound(a, b)
            })
            .fold(0.0, f64::max)
    };
    match *landscape {
        Landscape::QuadraticSaddle { mu_x, mu_y, b } => SmoothnessConstants {
            l_x: mu_x,
            l_y: mu_y,
            l_xy: b.abs(),
            mu_x,
            mu_y,
        },
        Landscape::RippleConcave { mu_y, b } => SmoothnessConstants {
            l_x: curvature(0),
            l_y: mu_y,
            l_xy: b.abs(),
            mu_x: 0.0,
            mu_y,
        },
        Landscape::ConvexRipple { mu_x, b } => SmoothnessConstants {
            l_x: mu_x,
            l_y: curvature(dim),
            l_xy: b.abs(),
            mu_x,
            mu_y: 0.0,
        },
        Landscape::Bilinear => SmoothnessConstants {
            l_x: 0.0,
            l_y: 0.0,
            l_xy: 1.0,
            mu_x: 0.0,
            mu_y: 0.0,
        },
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(GdadError::invalid(name, format!("must be finite, got {v}")))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GdadError::invalid(name, format!("must be > 0, got {v}")))
    }
}

fn nonzero(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v != 0.0 {
        Ok(())
    } else {
        Err(GdadError::invalid(
            name,
            format!("must be finite and nonzero, got {v}"),
        ))
    }
}
