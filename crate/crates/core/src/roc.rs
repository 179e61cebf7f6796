//! Combination scores and the empirical ROC at a fixed false-positive
//! fraction, via the descending order-statistic control quantile.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::logistic::ModelFit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocEstimate {
    pub value: f64,
    /// Control-score cutoff u at which the empirical control survival is <= t.
    pub threshold: f64,
    pub t: f64,
    pub n_cases_used: usize,
    pub n_controls_used: usize,
}

/// Linear combination scores X_i' beta-hat (no intercept; the ROC is
/// invariant to it).
pub fn combination_scores(fit: &ModelFit, panel: &DMatrix<f64>) -> Result<Vec<f64>> {
    if panel.ncols() != fit.slopes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} panel columns vs {} slopes",
            panel.ncols(),
            fit.slopes.len()
        )));
    }
    Ok((panel * &fit.slopes).iter().copied().collect())
}

/// Control-score survival quantile: with scores sorted descending
/// X_[1] >= X_[2] >= ..., returns X_[s] with s = ceil(t * n0) for t > 0
/// and X_[1] for t = 0.
pub fn control_quantile(control_scores: &[f64], t: f64) -> Result<f64> {
    if control_scores.is_empty() {
        return Err(Error::Precondition("empty control scores".into()));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("t must be in [0,1), got {t}")));
    }
    let mut sorted = control_scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if t == 0.0 {
        return Ok(sorted[0]);
    }
    let s = (t * sorted.len() as f64).ceil() as usize;
    Ok(sorted[s - 1])
}

/// Fraction of case scores strictly above the control quantile at t.
pub fn empirical_roc(case_scores: &[f64], control_scores: &[f64], t: f64) -> Result<RocEstimate> {
    if case_scores.is_empty() {
        return Err(Error::Precondition("empty case scores".into()));
    }
    let threshold = control_quantile(control_scores, t)?;
    let hits = case_scores.iter().filter(|&&s| s > threshold).count();
    Ok(RocEstimate {
        value: hits as f64 / case_scores.len() as f64,
        threshold,
        t,
        n_cases_used: case_scores.len(),
        n_controls_used: control_scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic;
    use crate::scenario::{closed_form_roc, generate_mvn_panel, ScenarioConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn control_quantile_hand_cases() {
        let controls = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(control_quantile(&controls, 0.2).unwrap(), 5.0);
        assert_eq!(control_quantile(&controls, 0.0).unwrap(), 5.0);
        assert_eq!(control_quantile(&controls, 0.41).unwrap(), 3.0);
        assert!(control_quantile(&[], 0.2).is_err());
        assert!(control_quantile(&controls, 1.0).is_err());
    }

    #[test]
    fn empirical_roc_hand_case() {
        let cases = [6.0, 5.5, 4.0];
        let controls = [1.0, 2.0, 3.0, 4.0, 5.0];
        let est = empirical_roc(&cases, &controls, 0.2).unwrap();
        assert_eq!(est.threshold, 5.0);
        assert_abs_diff_eq!(est.value, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn perfect_separation_gives_one() {
        let cases = [10.0, 11.0, 12.0];
        let controls = [1.0, 2.0, 3.0];
        for t in [0.0, 0.1, 0.5, 0.9] {
            assert_eq!(empirical_roc(&cases, &controls, t).unwrap().value, 1.0);
        }
    }

    #[test]
    fn null_scores_track_diagonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n = 20_000;
        let cases: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let controls: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for t in [0.1, 0.3, 0.5] {
            let est = empirical_roc(&cases, &controls, t).unwrap();
            let se = (t * (1.0 - t) / n as f64).sqrt();
            assert!((est.value - t).abs() < 3.5 * se, "t={t}: {}", est.value);
        }
    }

    #[test]
    fn scale_invariance_of_scores() {
        let cases = [0.4, 1.7, -0.2, 2.3];
        let controls = [0.1, -0.9, 0.6, 1.1, 0.0];
        for t in [0.0, 0.2, 0.6] {
            let a = empirical_roc(&cases, &controls, t).unwrap().value;
            let scaled_cases: Vec<f64> = cases.iter().map(|&x| 2.0 * x).collect();
            let scaled_controls: Vec<f64> = controls.iter().map(|&x| 2.0 * x).collect();
            let b = empirical_roc(&scaled_cases, &scaled_controls, t).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn combination_scores_basics() {
        let panel = DMatrix::from_row_slice(3, 1, &[1.5, -0.5, 2.0]);
        let labels = vec![1, 0, 1];
        let mut fit = logistic::fit(
            &DMatrix::from_row_slice(4, 1, &[0.3, 0.3, -0.3, -0.3]),
            &[1, 0, 1, 0],
        )
        .unwrap();
        fit.slopes = DVector::from_column_slice(&[1.0]);
        let scores = combination_scores(&fit, &panel).unwrap();
        assert_eq!(scores, vec![1.5, -0.5, 2.0]);

        fit.slopes = DVector::from_column_slice(&[0.0]);
        let zeros = combination_scores(&fit, &panel).unwrap();
        assert!(zeros.iter().all(|&s| s == 0.0));
        let _ = labels;
    }

    #[test]
    fn oracle_slopes_recover_closed_form() {
        let mu = DVector::from_column_slice(&[1.0, 1.1]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let config = ScenarioConfig {
            mu_case: mu.clone(),
            cov_case: cov.clone(),
            cov_control: cov.clone(),
            n_cases: 20_000,
            n_controls: 20_000,
            mixture: None,
            seed: 0,
        };
        let data = generate_mvn_panel(&config, 55).unwrap();
        let w = nalgebra::Cholesky::new(cov.clone()).unwrap().solve(&mu);
        let score = |r: usize| data.markers[(r, 0)] * w[0] + data.markers[(r, 1)] * w[1];
        let cases: Vec<f64> = data.case_rows().iter().map(|&r| score(r)).collect();
        let controls: Vec<f64> = data.control_rows().iter().map(|&r| score(r)).collect();
        let t = 0.1;
        let est = empirical_roc(&cases, &controls, t).unwrap();
        let target = closed_form_roc(&mu, &cov, t).unwrap();
        let se = (target * (1.0 - target) / cases.len() as f64).sqrt();
        assert!((est.value - target).abs() < 3.0 * se, "{} vs {target}", est.value);
    }

    proptest! {
        #[test]
        fn monotone_in_t(
            mut cases in proptest::collection::vec(-5.0f64..5.0, 3..40),
            controls in proptest::collection::vec(-5.0f64..5.0, 3..40),
            t1 in 0.0f64..0.9,
            dt in 0.0f64..0.09,
        ) {
            cases.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let t2 = t1 + dt;
            let r1 = empirical_roc(&cases, &controls, t1).unwrap().value;
            let r2 = empirical_roc(&cases, &controls, t2).unwrap().value;
            prop_assert!(r1 <= r2);
        }

        #[test]
        fn invariant_to_increasing_transform(
            cases in proptest::collection::vec(-3.0f64..3.0, 3..25),
            controls in proptest::collection::vec(-3.0f64..3.0, 3..25),
            t in 0.0f64..0.99,
        ) {
            let f = |x: f64| (x / 2.0).tanh() * 3.0 + x; // strictly increasing
            let tc: Vec<f64> = cases.iter().map(|&x| f(x)).collect();
            let tn: Vec<f64> = controls.iter().map(|&x| f(x)).collect();
            let a = empirical_roc(&cases, &controls, t).unwrap().value;
            let b = empirical_roc(&tc, &tn, t).unwrap().value;
            prop_assert_eq!(a, b);
        }
    }
}
