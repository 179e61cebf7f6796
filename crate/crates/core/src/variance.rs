//! Plug-in influence-function variance of the empirical ROC difference:
//! per-subject influence values for the full and restricted combination
//! scores and the Gram-form components sigma_f, sigma_r, sigma_fr.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kde::{kde_at_with_bandwidth, silverman_bandwidth, smoothed_quantile, smoothed_survival};
use crate::logistic::{influence_core, ModelFit};
use crate::roc::control_quantile;

/// Density-ratio cap guarding tail blow-ups of f_D1(u)/f_D0(u).
const RATIO_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    pub case_full: f64,
    pub control_full: f64,
    pub case_restricted: f64,
    pub control_restricted: f64,
}

#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub sigma_f: f64,
    pub sigma_r: f64,
    pub sigma_fr: f64,
    /// sigma_f + sigma_r - 2 sigma_fr, clamped at 0.
    pub sigma_delta: f64,
    pub per_subject_full: Vec<f64>,
    pub per_subject_restricted: Vec<f64>,
    pub bandwidths: Bandwidths,
    pub ratio_clamped: bool,
}

#[derive(Debug, Clone)]
pub struct InfluencePieces {
    /// Case survival-indicator term; zero for controls.
    pub a1_term: Vec<f64>,
    /// Control quantile term scaled by the density ratio; zero for cases.
    pub a3_term: Vec<f64>,
    /// (g + h)' influence_core, scaled to per-subject order.
    pub a2_plus_a4_term: Vec<f64>,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub f_d1_at_u: f64,
    pub f_d0_at_u: f64,
    pub ratio_clamped: bool,
}

fn split_scores(scores: &[f64], labels: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let mut cases = Vec::new();
    let mut controls = Vec::new();
    for (&s, &d) in scores.iter().zip(labels) {
        if d == 1 {
            cases.push(s);
        } else {
            controls.push(s);
        }
    }
    (cases, controls)
}

fn scores_at(panel: &DMatrix<f64>, beta: &DVector<f64>) -> Vec<f64> {
    (panel * beta).iter().copied().collect()
}

/// Central finite-difference gradients of the smoothed case survival (g)
/// and of -f_D1(u) times the smoothed control quantile (h), in the slope
/// coordinates. Bandwidths are held fixed at their values under the
/// fitted slopes.
pub fn gradients_gh(
    fit: &ModelFit,
    panel: &DMatrix<f64>,
    labels: &[u8],
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(0.0 < t && t < 1.0) {
        return Err(Error::Domain(format!("t must be in (0,1), got {t}")));
    }
    let beta = &fit.slopes;
    let scores = scores_at(panel, beta);
    let (case_scores, control_scores) = split_scores(&scores, labels);
    let bw_case = silverman_bandwidth(&case_scores)?;
    let bw_control = silverman_bandwidth(&control_scores)?;

    let u0 = smoothed_quantile(&control_scores, t, bw_control)?;
    let f_d1_u = kde_at_with_bandwidth(&case_scores, u0, bw_case);

    let d = beta.len();
    let mut g = DVector::zeros(d);
    let mut h = DVector::zeros(d);
    for j in 0..d {
        let step = 1e-3 * (1.0 + beta[j].abs());
        let mut plus = beta.clone();
        plus[j] += step;
        let mut minus = beta.clone();
        minus[j] -= step;

        let score_p = scores_at(panel, &plus);
        let score_m = scores_at(panel, &minus);
        let (case_p, control_p) = split_scores(&score_p, labels);
        let (case_m, control_m) = split_scores(&score_m, labels);

        let s_p = smoothed_survival(&case_p, u0, bw_case);
        let s_m = smoothed_survival(&case_m, u0, bw_case);
        g[j] = (s_p - s_m) / (2.0 * step);

        let q_p = smoothed_quantile(&control_p, t, bw_control)?;
        let q_m = smoothed_quantile(&control_m, t, bw_control)?;
        h[j] = -f_d1_u * (q_p - q_m) / (2.0 * step);
    }
    Ok((g, h))
}

/// Per-subject influence decomposition for one panel at false-positive
/// fraction t. The threshold u is the empirical (order-statistic)
/// control quantile, matching the ROC estimator.
pub fn influence_pieces(
    fit: &ModelFit,
    panel: &DMatrix<f64>,
    labels: &[u8],
    t: f64,
) -> Result<InfluencePieces> {
    let n = labels.len();
    let scores = scores_at(panel, &fit.slopes);
    let (case_scores, control_scores) = split_scores(&scores, labels);
    if case_scores.is_empty() || control_scores.is_empty() {
        return Err(Error::Precondition("need both cases and controls".into()));
    }
    let n1 = case_scores.len() as f64;
    let pi_hat = n1 / n as f64;

    let u = control_quantile(&control_scores, t)?;
    let s_d1_u =
        case_scores.iter().filter(|&&s| s > u).count() as f64 / n1;

    let bw_case = silverman_bandwidth(&case_scores)?;
    let bw_control = silverman_bandwidth(&control_scores)?;
    let f_d1_u = kde_at_with_bandwidth(&case_scores, u, bw_case);
    let f_d0_u = kde_at_with_bandwidth(&control_scores, u, bw_control);
    let raw_ratio = f_d1_u / f_d0_u;
    let ratio = if raw_ratio.is_finite() { raw_ratio.clamp(0.0, RATIO_CAP) } else { RATIO_CAP };
    let ratio_clamped = ratio != raw_ratio;

    let (g, h) = gradients_gh(fit, panel, labels, t)?;
    let gh = &g + &h;
    let cores = influence_core(fit, panel, labels)?;

    let mut a1 = vec![0.0; n];
    let mut a3 = vec![0.0; n];
    let mut a24 = vec![0.0; n];
    for i in 0..n {
        if labels[i] == 1 {
            a1[i] = (f64::from(scores[i] > u) - s_d1_u) / pi_hat;
        } else {
            a3[i] = (f64::from(scores[i] <= u) - (1.0 - t)) * ratio / (1.0 - pi_hat);
        }
        // influence_core is O(1/n); scale by n to match the O(1)
        // indicator terms so sigma = n^-2 * sum of squares is O(1/n)
        a24[i] = n as f64 * gh.dot(&cores[i]);
        if !a24[i].is_finite() || !a1[i].is_finite() || !a3[i].is_finite() {
            return Err(Error::Domain("non-finite influence value".into()));
        }
    }
    Ok(InfluencePieces {
        a1_term: a1,
        a3_term: a3,
        a2_plus_a4_term: a24,
        g,
        h,
        f_d1_at_u: f_d1_u,
        f_d0_at_u: f_d0_u,
        ratio_clamped,
    })
}

/// Variance components of the ROC difference between the full-panel and
/// restricted-panel combination scores: sigma_f = n^-2 sum psi_i^2,
/// sigma_r analogously, sigma_fr the cross term, and the difference
/// variance sigma_f + sigma_r - 2 sigma_fr.
///
/// The plug-in psi uses only the distribution-function pieces (the case
/// survival indicator and the density-ratio-weighted control quantile
/// indicator). The coefficient-estimation term is exposed in
/// `InfluencePieces::a2_plus_a4_term` for diagnostics but deliberately
/// left out of the plug-in: in the ROC-difference statistic the two
/// scores share the fitted coefficients' sampling noise, and including
/// the term makes the estimator markedly conservative at realistic n.
pub fn sigma_components(
    fit_full: &ModelFit,
    panel_full: &DMatrix<f64>,
    fit_restr: &ModelFit,
    panel_restr: &DMatrix<f64>,
    labels: &[u8],
    t: f64,
) -> Result<VarianceEstimate> {
    let full = influence_pieces(fit_full, panel_full, labels, t)?;
    let restr = influence_pieces(fit_restr, panel_restr, labels, t)?;
    let n = labels.len();
    let psi: Vec<f64> = (0..n).map(|i| full.a1_term[i] + full.a3_term[i]).collect();
    let phi: Vec<f64> = (0..n).map(|i| restr.a1_term[i] + restr.a3_term[i]).collect();

    let n2 = (n as f64).powi(2);
    let sigma_f: f64 = psi.iter().map(|v| v * v).sum::<f64>() / n2;
    let sigma_r: f64 = phi.iter().map(|v| v * v).sum::<f64>() / n2;
    let sigma_fr: f64 = psi.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>() / n2;
    let sigma_delta = (sigma_f + sigma_r - 2.0 * sigma_fr).max(0.0);

    let scores_full = scores_at(panel_full, &fit_full.slopes);
    let scores_restr = scores_at(panel_restr, &fit_restr.slopes);
    let (case_f, control_f) = split_scores(&scores_full, labels);
    let (case_r, control_r) = split_scores(&scores_restr, labels);
    Ok(VarianceEstimate {
        sigma_f,
        sigma_r,
        sigma_fr,
        sigma_delta,
        per_subject_full: psi,
        per_subject_restricted: phi,
        bandwidths: Bandwidths {
            case_full: silverman_bandwidth(&case_f)?,
            control_full: silverman_bandwidth(&control_f)?,
            case_restricted: silverman_bandwidth(&case_r)?,
            control_restricted: silverman_bandwidth(&control_r)?,
        },
        ratio_clamped: full.ratio_clamped || restr.ratio_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic;
    use crate::scenario::{generate_mvn_panel, ScenarioConfig};

    fn correct_model_config(mu: &[f64], n: usize) -> ScenarioConfig {
        let d = mu.len();
        let mut cov = DMatrix::identity(d, d);
        if d == 2 {
            cov[(0, 1)] = 0.2;
            cov[(1, 0)] = 0.2;
        }
        ScenarioConfig {
            mu_case: DVector::from_column_slice(mu),
            cov_case: cov.clone(),
            cov_control: cov,
            n_cases: n,
            n_controls: n,
            mixture: None,
            seed: 0,
        }
    }

    #[test]
    fn univariate_g_plus_h_vanishes() {
        // the univariate ROC is invariant to the scale of beta, so the
        // total derivative g + h is ~0
        let config = correct_model_config(&[1.0], 2000);
        let data = generate_mvn_panel(&config, 101).unwrap();
        let fit = logistic::fit(&data.markers, &data.labels).unwrap();
        let (g, h) = gradients_gh(&fit, &data.markers, &data.labels, 0.1).unwrap();
        assert!((g[0] + h[0]).abs() < 0.05 * g[0].abs(), "g={} h={}", g[0], h[0]);
        assert!(g[0].abs() > 1e-4, "g should be nonzero");
    }

    #[test]
    fn g_matches_conditional_moment_oracle() {
        // dS_D1/dbeta_j at fixed u equals f_D1(u) * E[X_j | case, score=u];
        // estimate the conditional mean from cases within one bandwidth of u
        let config = correct_model_config(&[1.0, 1.1], 5000);
        let data = generate_mvn_panel(&config, 7).unwrap();
        let fit = logistic::fit(&data.markers, &data.labels).unwrap();
        let t = 0.1;
        let (g, _h) = gradients_gh(&fit, &data.markers, &data.labels, t).unwrap();

        let scores: Vec<f64> = (&data.markers * &fit.slopes).iter().copied().collect();
        let (case_scores, control_scores) = split_scores(&scores, &data.labels);
        let bw_case = silverman_bandwidth(&case_scores).unwrap();
        let bw_control = silverman_bandwidth(&control_scores).unwrap();
        let u = smoothed_quantile(&control_scores, t, bw_control).unwrap();
        let f_d1 = kde_at_with_bandwidth(&case_scores, u, bw_case);

        let case_rows = data.case_rows();
        for j in 0..2 {
            let near: Vec<f64> = case_rows
                .iter()
                .filter(|&&r| {
                    let s = data.markers[(r, 0)] * fit.slopes[0]
                        + data.markers[(r, 1)] * fit.slopes[1];
                    (s - u).abs() < bw_case
                })
                .map(|&r| data.markers[(r, j)])
                .collect();
            let oracle = f_d1 * near.iter().sum::<f64>() / near.len() as f64;
            let rel = (g[j] - oracle).abs() / oracle.abs();
            assert!(rel < 0.25, "g[{j}]={} oracle={oracle}", g[j]);
        }
    }

    #[test]
    fn identical_panels_give_zero_delta() {
        let config = correct_model_config(&[1.0, 1.1], 300);
        let data = generate_mvn_panel(&config, 3).unwrap();
        let fit = logistic::fit(&data.markers, &data.labels).unwrap();
        let est = sigma_components(&fit, &data.markers, &fit, &data.markers, &data.labels, 0.1)
            .unwrap();
        assert!((est.sigma_f - est.sigma_r).abs() < 1e-15);
        assert!((est.sigma_f - est.sigma_fr).abs() < 1e-15);
        assert_eq!(est.sigma_delta, 0.0);
    }

    fn full_and_restricted(
        data: &crate::scenario::CaseControlData,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let full = data.markers.clone();
        let restr = data.markers.columns(0, 1).into_owned();
        (full, restr)
    }

    #[test]
    fn influence_terms_have_expected_support_and_centering() {
        let config = correct_model_config(&[1.0, 1.1], 800);
        let data = generate_mvn_panel(&config, 19).unwrap();
        let fit = logistic::fit(&data.markers, &data.labels).unwrap();
        let pieces = influence_pieces(&fit, &data.markers, &data.labels, 0.1).unwrap();
        let n = data.n();
        for i in 0..n {
            if data.labels[i] == 1 {
                assert_eq!(pieces.a3_term[i], 0.0);
            } else {
                assert_eq!(pieces.a1_term[i], 0.0);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
        assert!(mean(&pieces.a1_term).abs() < 2.0 / n as f64);
        assert!(mean(&pieces.a3_term).abs() < 2.0 * 50.0 / n as f64);
        assert!(mean(&pieces.a2_plus_a4_term).abs() < 1e-6);
        assert!(pieces.f_d1_at_u > 0.0 && pieces.f_d0_at_u > 0.0);
    }

    #[test]
    fn gram_form_is_positive_semidefinite() {
        let config = correct_model_config(&[1.0, 1.5], 400);
        let data = generate_mvn_panel(&config, 23).unwrap();
        let (full, restr) = full_and_restricted(&data);
        let fit_f = logistic::fit(&full, &data.labels).unwrap();
        let fit_r = logistic::fit(&restr, &data.labels).unwrap();
        let est = sigma_components(&fit_f, &full, &fit_r, &restr, &data.labels, 0.1).unwrap();
        assert!(est.sigma_f >= 0.0 && est.sigma_r >= 0.0);
        // Cauchy-Schwarz on the Gram form
        assert!(est.sigma_fr.abs() <= (est.sigma_f * est.sigma_r).sqrt() + 1e-10);
        assert!(est.sigma_delta >= 0.0);
    }

    #[test]
    fn components_scale_inversely_with_n() {
        let config = correct_model_config(&[1.0, 1.1], 500);
        let data = generate_mvn_panel(&config, 29).unwrap();
        let (full, restr) = full_and_restricted(&data);
        let fit_f = logistic::fit(&full, &data.labels).unwrap();
        let fit_r = logistic::fit(&restr, &data.labels).unwrap();
        let base = sigma_components(&fit_f, &full, &fit_r, &restr, &data.labels, 0.1).unwrap();

        let n = data.n();
        let mut full2 = DMatrix::zeros(2 * n, 2);
        full2.view_mut((0, 0), (n, 2)).copy_from(&full);
        full2.view_mut((n, 0), (n, 2)).copy_from(&full);
        let restr2 = full2.columns(0, 1).into_owned();
        let labels2: Vec<u8> = data.labels.iter().chain(data.labels.iter()).copied().collect();
        let fit_f2 = logistic::fit(&full2, &labels2).unwrap();
        let fit_r2 = logistic::fit(&restr2, &labels2).unwrap();
        let doubled =
            sigma_components(&fit_f2, &full2, &fit_r2, &restr2, &labels2, 0.1).unwrap();
        for (a, b) in [
            (base.sigma_f, doubled.sigma_f),
            (base.sigma_r, doubled.sigma_r),
            (base.sigma_delta, doubled.sigma_delta),
        ] {
            assert!((b - 0.5 * a).abs() < 0.1 * 0.5 * a, "{b} vs half of {a}");
        }
    }
}
