//! Numerical verification of the rate bounds and Lyapunov derivative
//! inequalities against integrated trajectories, plus gradient checks and
//! integrator calibration.
//!
//! Tolerance policy: every comparison is `measured <= bound (1 + 1e-6) +
//! budget`, where the budget is the additive integration-error estimate
//! from halving the step.

mod calibration;
mod gradcheck;
mod lemma;
mod rate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GdadError, Result};
use crate::problems::RegimeTag;

pub use calibration::{
    conservation_drift, rk4_order_estimate, ConservationReport, OrderReport, CONSERVATION_TOL,
    ORDER_RATIO_RANGE,
};
pub use gradcheck::{gradcheck, gradcheck_seeded, gradcheck_with, GradcheckReport, GRADCHECK_TOL};
pub use lemma::{
    audit_lemma, audit_lemma_with, audit_step, LemmaAuditReport, LemmaPart, LemmaSample,
    AUDIT_PASS_FRACTION,
};
pub use rate::{
    check_exponential_bound, check_min_gradnorm_bound, horizon_grid, RatePoint, RateReport,
    RATE_REL_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    Thm1,
    Thm2,
    Thm3,
    Thm4,
}

impl Theorem {
    pub const ALL: [Theorem; 4] = [Theorem::Thm1, Theorem::Thm2, Theorem::Thm3, Theorem::Thm4];

    pub fn regime(self) -> RegimeTag {
        match self {
            Theorem::Thm1 => RegimeTag::TwoSidedPL,
            Theorem::Thm2 => RegimeTag::NonconvexPL,
            Theorem::Thm3 => RegimeTag::NonconvexStronglyConcave,
            Theorem::Thm4 => RegimeTag::StronglyConvexNonconcave,
        }
    }

    pub fn for_regime(regime: RegimeTag) -> Self {
        match regime {
            RegimeTag::TwoSidedPL => Theorem::Thm1,
            RegimeTag::NonconvexPL => Theorem::Thm2,
            RegimeTag::NonconvexStronglyConcave => Theorem::Thm3,
            RegimeTag::StronglyConvexNonconcave => Theorem::Thm4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm1 => "thm1",
            Theorem::Thm2 => "thm2",
            Theorem::Thm3 => "thm3",
            Theorem::Thm4 => "thm4",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = GdadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thm1" => Ok(Theorem::Thm1),
            "thm2" => Ok(Theorem::Thm2),
            "thm3" => Ok(Theorem::Thm3),
            "thm4" => Ok(Theorem::Thm4),
            other => Err(GdadError::invalid(
                "theorem",
                format!("unknown theorem `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lemma {
    Lem2,
    Lem3,
    Lem4,
    Lem5,
}

impl Lemma {
    pub const ALL: [Lemma; 4] = [Lemma::Lem2, Lemma::Lem3, Lemma::Lem4, Lemma::Lem5];

    pub fn regime(self) -> RegimeTag {
        match self {
            Lemma::Lem2 => RegimeTag::TwoSidedPL,
            Lemma::Lem3 => RegimeTag::NonconvexPL,
            Lemma::Lem4 => RegimeTag::NonconvexStronglyConcave,
            Lemma::Lem5 => RegimeTag::StronglyConvexNonconcave,
        }
    }

    pub fn for_regime(regime: RegimeTag) -> Self {
        match regime {
            RegimeTag::TwoSidedPL => Lemma::Lem2,
            RegimeTag::NonconvexPL => Lemma::Lem3,
            RegimeTag::NonconvexStronglyConcave => Lemma::Lem4,
            RegimeTag::StronglyConvexNonconcave => Lemma::Lem5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Lem2 => "lem2",
            Lemma::Lem3 => "lem3",
            Lemma::Lem4 => "lem4",
            Lemma::Lem5 => "lem5",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lemma {
    type Err = GdadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lem2" => Ok(Lemma::Lem2),
            "lem3" => Ok(Lemma::Lem3),
            "lem4" => Ok(Lemma::Lem4),
            "lem5" => Ok(Lemma::Lem5),
            other => Err(GdadError::invalid(
                "lemma",
                format!("unknown lemma `{other}`"),
            )),
        }
    }
}

/// Evenly spaced indices into `0..n` (at most `limit`, always including the
/// ends), used to keep serialized per-sample excerpts small.
pub(crate) fn excerpt_indices(n: usize, limit: usize) -> Vec<usize> {
    if n <= limit || limit < 2 {
        return (0..n).collect();
    }
    let mut out: Vec<usize> = (0..limit).map(|k| k * (n - 1) / (limit - 1)).collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(t.name().parse::<Theorem>().unwrap(), t);
            assert_eq!(Theorem::for_regime(t.regime()), t);
        }
        for l in Lemma::ALL {
            assert_eq!(l.name().parse::<Lemma>().unwrap(), l);
            assert_eq!(Lemma::for_regime(l.regime()), l);
        }
        assert!("thm5".parse::<Theorem>().is_err());
    }

    #[test]
    fn excerpt_keeps_ends() {
        assert_eq!(excerpt_indices(3, 10), vec![0, 1, 2]);
        let e = excerpt_indices(1001, 11);
        assert_eq!(e.first(), Some(&0));
        assert_eq!(e.last(), Some(&1000));
        assert_eq!(e.len(), 11);
    }
}
