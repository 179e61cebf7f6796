//! One-sided symmetric two-stage stopping boundaries under
//! O'Brien-Fleming or Pocock alpha-spending, solved on the canonical
//! bivariate-normal joint distribution of (Z1, Z2).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{norm_cdf, norm_upper_quantile};

pub use crate::stats::bvn_upper;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spending {
    Obf,
    Pocock,
}

impl fmt::Display for Spending {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spending::Obf => "obf",
            Spending::Pocock => "pocock",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    Both,
    FutilityOnly,
    EfficacyOnly,
}

impl fmt::Display for Stopping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stopping::Both => "both",
            Stopping::FutilityOnly => "futility_only",
            Stopping::EfficacyOnly => "efficacy_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySet {
    /// Stage-1 futility bound (may be -inf in efficacy-only mode).
    pub a1: f64,
    /// Stage-1 efficacy bound (may be +inf in futility-only mode).
    pub b1: f64,
    /// Final bound (= a2 in the symmetric design).
    pub b2: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub info_frac: f64,
    /// corr(Z1, Z2) = sqrt(info_frac).
    pub rho: f64,
    pub spending: Spending,
    pub stopping: Stopping,
    /// Implied symmetric alternative in standardized units (2 b2).
    pub delta1: f64,
}

/// Cumulative alpha spent at information fraction `t_frac`.
/// OBF: 2 Phi(-z_{alpha/2} / sqrt(t)); Pocock: alpha ln(1 + (e-1) t).
pub fn spending(alpha: f64, t_frac: f64, family: Spending) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    if !(0.0 < t_frac && t_frac <= 1.0) {
        return Err(Error::Domain(format!("t_frac must be in (0,1], got {t_frac}")));
    }
    Ok(match family {
        Spending::Obf => 2.0 * norm_cdf(-norm_upper_quantile(alpha / 2.0) / t_frac.sqrt()),
        Spending::Pocock => alpha * ((std::f64::consts::E - 1.0) * t_frac).ln_1p(),
    })
}

/// Null probability of rejecting at either analysis for boundaries
/// (a1, b1, b2) under the canonical joint distribution.
pub fn null_rejection_probability(a1: f64, b1: f64, b2: f64, rho: f64) -> Result<f64> {
    let stage1 = if b1 == f64::INFINITY { 0.0 } else { crate::stats::norm_sf(b1) };
    let stage2 = bvn_upper(a1, b2, rho)? - bvn_upper(b1, b2, rho)?;
    Ok(stage1 + stage2.max(0.0))
}

fn bisect<F: Fn(f64) -> Result<f64>>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    what: &'static str,
) -> Result<f64> {
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::NoRoot { what, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the symmetric two-stage boundaries: b1 spends alpha1 at stage 1,
/// b2 solves P(a1 < Z1 < b1, Z2 >= b2) = alpha2 with the symmetry
/// relation a1 = 2 b2 sqrt(lambda) - b1. In efficacy-only mode a1 is then
/// set to -inf. In futility-only mode b1 is set to +inf and b2 is
/// re-solved so the single remaining constraint P(Z1 > a1, Z2 >= b2) =
/// alpha holds exactly (the design still spends the full level).
pub fn solve_boundaries(
    alpha: f64,
    info_frac: f64,
    family: Spending,
    stopping: Stopping,
) -> Result<BoundarySet> {
    if !(0.0 < alpha && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha must be in (0,0.5), got {alpha}")));
    }
    if !(0.0 < info_frac && info_frac < 1.0) {
        return Err(Error::Domain(format!("info_frac must be in (0,1), got {info_frac}")));
    }
    let alpha1 = spending(alpha, info_frac, family)?;
    let alpha2 = alpha - alpha1;
    let rho = info_frac.sqrt();
    let b1 = norm_upper_quantile(alpha1);

    // stage-2 spend is decreasing in b2 (the bound rises and the window
    // floor a1 rises with it), so bisection applies directly
    let residual = |b2: f64| -> Result<f64> {
        let a1 = 2.0 * b2 * rho - b1;
        Ok(bvn_upper(a1, b2, rho)? - bvn_upper(b1, b2, rho)? - alpha2)
    };
    let b2 = bisect(residual, 0.0, 10.0, "stage-2 boundary")?;
    let a1 = 2.0 * b2 * rho - b1;
    if a1 >= b1 {
        return Err(Error::Domain(format!("degenerate boundaries: a1={a1} >= b1={b1}")));
    }

    let (a1, b1, b2) = match stopping {
        Stopping::Both => (a1, b1, b2),
        Stopping::EfficacyOnly => (f64::NEG_INFINITY, b1, b2),
        Stopping::FutilityOnly => {
            let residual = |b2: f64| -> Result<f64> { Ok(bvn_upper(a1, b2, rho)? - alpha) };
            (a1, f64::INFINITY, bisect(residual, 0.0, 10.0, "futility-only boundary")?)
        }
    };
    Ok(BoundarySet {
        a1,
        b1,
        b2,
        alpha,
        alpha1,
        alpha2,
        info_frac,
        rho,
        spending: family,
        stopping,
        delta1: 2.0 * b2,
    })
}

/// Futility-only sensitivity variant: keeps a1 and the stage-2 bound b2
/// from the symmetric both-stopping system and only removes the efficacy
/// bound (b1 = +inf). The mass rejected at stage 1 but not at stage 2 is
/// lost, so the realized type-I error is below alpha (conservative).
pub fn solve_futility_truncated(
    alpha: f64,
    info_frac: f64,
    family: Spending,
) -> Result<BoundarySet> {
    let base = solve_boundaries(alpha, info_frac, family, Stopping::Both)?;
    Ok(BoundarySet { b1: f64::INFINITY, stopping: Stopping::FutilityOnly, ..base })
}
