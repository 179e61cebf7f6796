//! Standard-normal helpers and the bivariate-normal orthant probability.

use std::sync::LazyLock;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

static STD_NORMAL: LazyLock<Normal> = LazyLock::new(|| Normal::new(0.0, 1.0).unwrap());

pub fn norm_pdf(x: f64) -> f64 {
    STD_NORMAL.pdf(x)
}

pub fn norm_cdf(x: f64) -> f64 {
    STD_NORMAL.cdf(x)
}

/// Survival function 1 - Phi(x), computed via the symmetric tail.
pub fn norm_sf(x: f64) -> f64 {
    STD_NORMAL.cdf(-x)
}

pub fn norm_quantile(p: f64) -> f64 {
    STD_NORMAL.inverse_cdf(p)
}

/// Upper quantile: the z with P(Z >= z) = p.
pub fn norm_upper_quantile(p: f64) -> f64 {
    -STD_NORMAL.inverse_cdf(p)
}

// Panels of this width with 24-node Gauss-Legendre keep the conditional
// integrand resolved to well below the 1e-7 requirement.
const PANEL_WIDTH: f64 = 1.0;
const TAIL_CUT: f64 = 9.0;

// 24-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirrored).
const GL24_X: [f64; 12] = [
    0.064056892862605626085,
    0.191118867473616309159,
    0.315042679696163374387,
    0.433793507626045138487,
    0.545421471388839535658,
    0.648093651936975569252,
    0.740124191578554364244,
    0.820001985973902921954,
    0.886415527004401034213,
    0.938274552002732758524,
    0.974728555971309498198,
    0.995187219997021360180,
];
const GL24_W: [f64; 12] = [
    0.127938195346752156974,
    0.125837456346828296121,
    0.121670472927803391204,
    0.115505668053725601353,
    0.107444270115965634783,
    0.097618652104113888270,
    0.086190161531953275917,
    0.073346481411080305734,
    0.059298584915436780746,
    0.044277438817419806169,
    0.028531388628933663181,
    0.012341229799987199547,
];

/// P(Z1 > h, Z2 > k) for standard bivariate normal with correlation `rho`.
///
/// Evaluated by Gauss-Legendre quadrature of the conditional form
/// integral_h^inf phi(x) * SF((k - rho x)/sqrt(1 - rho^2)) dx.
/// Infinite bounds are accepted.
pub fn bvn_upper(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) || rho.abs() >= 1.0 {
        return Err(Error::Domain(format!("|rho| must be < 1, got {rho}")));
    }
    if h == f64::INFINITY || k == f64::INFINITY {
        return Ok(0.0);
    }
    if h == f64::NEG_INFINITY && k == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    if h == f64::NEG_INFINITY {
        return Ok(norm_sf(k));
    }
    if k == f64::NEG_INFINITY {
        return Ok(norm_sf(h));
    }
    if rho == 0.0 {
        return Ok(norm_sf(h) * norm_sf(k));
    }

    let s = (1.0 - rho * rho).sqrt();
    let lo = h.max(-TAIL_CUT);
    let hi = TAIL_CUT;
    if lo >= hi {
        return Ok(if h > 0.0 { 0.0 } else { norm_sf(k) });
    }

    let n_panels = ((hi - lo) / PANEL_WIDTH).ceil() as usize;
    let width = (hi - lo) / n_panels as f64;
    let mut total = 0.0;
    for p in 0..n_panels {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        let half = 0.5 * width;
        for i in 0..GL24_X.len() {
            for sign in [-1.0, 1.0] {
                let x = mid + sign * half * GL24_X[i];
                total += GL24_W[i] * half * norm_pdf(x) * norm_sf((k - rho * x) / s);
            }
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Sheppard's orthant formula: P(Z1>h, Z2>k) for h=k=0 is
    // 1/4 + arcsin(rho)/(2 pi). Used as an independent oracle.
    fn sheppard(rho: f64) -> f64 {
        0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn independence_factorizes() {
        assert_abs_diff_eq!(bvn_upper(0.0, 0.0, 0.0).unwrap(), 0.25, epsilon = 1e-12);
        let v = bvn_upper(1.0, -0.5, 0.0).unwrap();
        assert_abs_diff_eq!(v, norm_sf(1.0) * norm_sf(-0.5), epsilon = 1e-12);
    }

    #[test]
    fn infinite_bounds() {
        assert_eq!(bvn_upper(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.5).unwrap(), 1.0);
        assert_eq!(bvn_upper(f64::INFINITY, 0.0, 0.5).unwrap(), 0.0);
        let v = bvn_upper(f64::NEG_INFINITY, 1.3, -0.4).unwrap();
        assert_abs_diff_eq!(v, norm_sf(1.3), epsilon = 1e-12);
    }

    #[test]
    fn matches_sheppard_orthant() {
        for &rho in &[-0.95, -0.5, -0.1, 0.1, 0.5, std::f64::consts::FRAC_1_SQRT_2, 0.95] {
            let v = bvn_upper(0.0, 0.0, rho).unwrap();
            assert_abs_diff_eq!(v, sheppard(rho), epsilon = 1e-9);
        }
        // spec anchor: rho = 0.5 at the origin
        assert_abs_diff_eq!(bvn_upper(0.0, 0.0, 0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn off_origin_against_plackett_identity() {
        // P(Z1>h, Z2>k) + P(Z1>h, Z2<=k) = SF(h) for any rho.
        // P(Z1>h, Z2<=k) = SF(h) - bvn_upper(h, k, rho); also equals
        // bvn_upper(h, -k, -rho) by reflecting Z2.
        for &(h, k, rho) in &[(0.7, -0.3, 0.6), (-1.2, 0.4, -0.8), (2.0, 1.5, 0.3)] {
            let a = bvn_upper(h, k, rho).unwrap();
            let b = bvn_upper(h, -k, -rho).unwrap();
            assert_abs_diff_eq!(a + b, norm_sf(h), epsilon = 1e-9);
        }
    }

    #[test]
    fn monte_carlo_cross_check() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (h, k, rho) = (0.5, -0.2, 0.65);
        let s = (1.0 - rho * rho as f64).sqrt();
        let n = 200_000;
        let mut hits = 0u32;
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            let z2 = rho * z1 + s * e;
            if z1 > h && z2 > k {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let v = bvn_upper(h, k, rho).unwrap();
        let se = (mc * (1.0 - mc) / n as f64).sqrt();
        assert!((v - mc).abs() < 4.0 * se, "quad {v} vs mc {mc}");
    }
}
