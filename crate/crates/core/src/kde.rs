//! Gaussian kernel density estimation with Silverman's bandwidth, plus
//! the kernel-smoothed survival and quantile functions used by the
//! variance gradients.

use crate::error::{Error, Result};
use crate::stats::{norm_cdf, norm_pdf};

/// Normal-reference bandwidth: 1.06 * min(sd, IQR/1.34) * m^(-1/5).
///
/// If one of sd and IQR is zero (heavy ties) the other is used; if both
/// are zero the sample is degenerate.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Precondition("bandwidth needs >= 2 samples".into()));
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let sd = var.sqrt();

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return Err(Error::DegenerateSample),
    };
    Ok(1.06 * spread * m.powf(-0.2))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Gaussian-kernel density at `x` with Silverman bandwidth.
pub fn kde_at(samples: &[f64], x: f64) -> Result<f64> {
    let bw = silverman_bandwidth(samples)?;
    Ok(kde_at_with_bandwidth(samples, x, bw))
}

pub fn kde_at_with_bandwidth(samples: &[f64], x: f64, bandwidth: f64) -> f64 {
    let m = samples.len() as f64;
    samples
        .iter()
        .map(|&s| norm_pdf((x - s) / bandwidth))
        .sum::<f64>()
        / (m * bandwidth)
}

/// Smoothed survival fraction: indicators I(s > u) replaced by
/// Gaussian CDF weights Phi((s - u)/bandwidth).
pub fn smoothed_survival(scores: &[f64], threshold: f64, bandwidth: f64) -> f64 {
    let m = scores.len() as f64;
    scores
        .iter()
        .map(|&s| norm_cdf((s - threshold) / bandwidth))
        .sum::<f64>()
        / m
}

/// Root u of smoothed_survival(scores, u, bandwidth) = t, by bisection.
pub fn smoothed_quantile(scores: &[f64], t: f64, bandwidth: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Precondition("empty sample".into()));
    }
    if !(0.0..1.0).contains(&t) || t == 0.0 {
        return Err(Error::Domain(format!("t must be in (0,1), got {t}")));
    }
    let (min, max) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    // survival is 1 below lo and 0 above hi; pad so the root is bracketed
    let mut lo = min - 10.0 * bandwidth;
    let mut hi = max + 10.0 * bandwidth;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if smoothed_survival(scores, mid, bandwidth) > t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
