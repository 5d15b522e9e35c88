//! Concrete objective families. Every built-in objective is a sum of
//! identical two-variable terms `phi(x_i, y_i)`, which keeps the gradients,
//! oracles and box bounds coordinate-wise.

/// Smooth nonconvex ripple `t^2 sin^2 t`, used as the nonconvex part in x
/// (or the nonconcave part in y).
pub(crate) fn ripple(t: f64) -> f64 {
    let s = t.sin();
    t * t * s * s
}

pub(crate) fn ripple_d1(t: f64) -> f64 {
    let s = t.sin();
    2.0 * t * s * s + t * t * (2.0 * t).sin()
}

pub(crate) fn ripple_d2(t: f64) -> f64 {
    let s = t.sin();
    2.0 * s * s + 4.0 * t * (2.0 * t).sin() + 2.0 * t * t * (2.0 * t).cos()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Landscape {
    /// `mu_x/2 x^2 + b x y - mu_y/2 y^2`
    QuadraticSaddle { mu_x: f64, mu_y: f64, b: f64 },
    /// `ripple(x) + b x y - mu_y/2 y^2`
    RippleConcave { mu_y: f64, b: f64 },
    /// `mu_x/2 x^2 + b x y - ripple(y)`
    ConvexRipple { mu_x: f64, b: f64 },
    /// `x y`
    Bilinear,
}

impl Landscape {
    pub(crate) fn phi(&self, a: f64, c: f64) -> f64 {
        match *self {
            Landscape::QuadraticSaddle { mu_x, mu_y, b } => {
                0.5 * mu_x * a * a + b * a * c - 0.5 * mu_y * c * c
            }
            Landscape::RippleConcave { mu_y, b } => ripple(a) + b * a * c - 0.5 * mu_y * c * c,
            Landscape::ConvexRipple { mu_x, b } => 0.5 * mu_x * a * a + b * a * c - ripple(c),
            Landscape::Bilinear => a * c,
        }
    }

    pub(crate) fn dphi_dx(&self, a: f64, c: f64) -> f64 {
        match *self {
            Landscape::QuadraticSaddle { mu_x, b, .. } => mu_x * a + b * c,
            Landscape::RippleConcave { b, .. } => ripple_d1(a) + b * c,
            Landscape::ConvexRipple { mu_x, b } => mu_x * a + b * c,
            Landscape::Bilinear => c,
        }
    }

    pub(crate) fn dphi_dy(&self, a: f64, c: f64) -> f64 {
        match *self {
            Landscape::QuadraticSaddle { mu_y, b, .. } => b * a - mu_y * c,
            Landscape::RippleConcave { mu_y, b } => b * a - mu_y * c,
            Landscape::ConvexRipple { b, .. } => b * a - ripple_d1(c),
            Landscape::Bilinear => a,
        }
    }

    /// Unique maximizer of `phi(a, .)`, when it exists in closed form.
    pub(crate) fn y_star(&self, a: f64) -> Option<f64> {
        match *self {
            Landscape::QuadraticSaddle { mu_y, b, .. } | Landscape::RippleConcave { mu_y, b } => {
                Some(b * a / mu_y)
            }
            _ => None,
        }
    }

    pub(crate) fn max_value(&self, a: f64) -> Option<f64> {
        match *self {
            Landscape::QuadraticSaddle { mu_x, mu_y, b } => {
                Some(0.5 * mu_x * a * a + 0.5 * b * b * a * a / mu_y)
            }
            Landscape::RippleConcave { mu_y, b } => Some(ripple(a) + 0.5 * b * b * a * a / mu_y),
            _ => None,
        }
    }

    /// Unique minimizer of `phi(., c)`, when it exists in closed form.
    pub(crate) fn x_star(&self, c: f64) -> Option<f64> {
        match *self {
            Landscape::QuadraticSaddle { mu_x, b, .. } | Landscape::ConvexRipple { mu_x, b } => {
                Some(-b * c / mu_x)
            }
            _ => None,
        }
    }

    pub(crate) fn min_value(&self, c: f64) -> Option<f64> {
        match *self {
            Landscape::QuadraticSaddle { mu_x, mu_y, b } => {
                Some(-0.5 * b * b * c * c / mu_x - 0.5 * mu_y * c * c)
            }
            Landscape::ConvexRipple { mu_x, b } => Some(-0.5 * b * b * c * c / mu_x - ripple(c)),
            _ => None,
        }
    }

    pub(crate) fn has_max_oracle(&self) -> bool {
        self.y_star(0.0).is_some()
    }

    pub(crate) fn has_min_oracle(&self) -> bool {
        self.x_star(0.0).is_some()
    }

    /// Infimum and supremum of `phi` over `[xa, xb] x [ya, yb]`, estimated on
    /// a dense grid and widened by a first-order bound on the
    /// between-node variation, so the interval encloses the true range.
    pub(crate) fn range_over(&self, (xa, xb): (f64, f64), (ya, yb): (f64, f64)) -> (f64, f64) {
        const N: usize = 401;
        let dx = (xb - xa) / (N - 1) as f64;
        let dy = (yb - ya) / (N - 1) as f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut gx, mut gy) = (0.0f64, 0.0f64);
        for i in 0..N {
            let a = xa + dx * i as f64;
            for j in 0..N {
                let c = ya + dy * j as f64;
                let v = self.phi(a, c);
                lo = lo.min(v);
                hi = hi.max(v);
                gx = gx.max(self.dphi_dx(a, c).abs());
                gy = gy.max(self.dphi_dy(a, c).abs());
            }
        }
        // 1.25 covers gradient growth between nodes at this grid density.
        let margin = 1.25 * 0.5 * (gx * dx + gy * dy);
        (lo - margin, hi + margin)
    }
}

/// Upper bound on `sup |ripple''|` over `[a, b]`.
pub(crate) fn ripple_curvature_bound(a: f64, b: f64) -> f64 {
    const N: usize = 20_001;
    let h = (b - a) / (N - 1) as f64;
    let mut peak = 0.0f64;
    let mut jump = 0.0f64;
    let mut prev = ripple_d2(a);
    for i in 0..N {
        let v = ripple_d2(a + h * i as f64);
        peak = peak.max(v.abs());
        jump = jump.max((v - prev).abs());
        prev = v;
    }
    peak + jump
}
