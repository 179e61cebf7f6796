//! Logistic working-model fits by Newton iteration with step-halving,
//! plus the per-subject influence terms of the slope estimators.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const SEPARATION_LP: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct ModelFit {
    pub intercept: f64,
    pub slopes: DVector<f64>,
    pub fitted_probs: DVector<f64>,
    /// Inverse of the observed information over (intercept, slopes).
    pub inv_information: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl ModelFit {
    pub fn n_markers(&self) -> usize {
        self.slopes.len()
    }
}

fn log_likelihood(lp: &DVector<f64>, labels: &[u8]) -> f64 {
    lp.iter()
        .zip(labels)
        .map(|(&eta, &d)| {
            // d*eta - log(1 + exp(eta)), written stably
            let log1pe = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            f64::from(d) * eta - log1pe
        })
        .sum()
}

fn design_with_intercept(panel: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = panel.shape();
    let mut x = DMatrix::zeros(n, d + 1);
    x.column_mut(0).fill(1.0);
    x.view_mut((0, 1), (n, d)).copy_from(panel);
    x
}

/// Maximum-likelihood logistic fit of `labels` on `panel` (intercept
/// added internally). Newton iteration from the zero vector, halving the
/// step until the log-likelihood does not decrease.
pub fn fit(panel: &DMatrix<f64>, labels: &[u8]) -> Result<ModelFit> {
    let n = panel.nrows();
    if n != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{n} panel rows vs {} labels",
            labels.len()
        )));
    }
    let n_cases = labels.iter().filter(|&&d| d == 1).count();
    if n_cases == 0 || n_cases == n {
        return Err(Error::Precondition("need at least one case and one control".into()));
    }

    let x = design_with_intercept(panel);
    let d1 = x.ncols();
    let dvec = DVector::from_iterator(n, labels.iter().map(|&d| f64::from(d)));

    let mut theta = DVector::zeros(d1);
    let mut lp = &x * &theta;
    let mut ll = log_likelihood(&lp, labels);

    for iter in 1..=MAX_ITER {
        let p = lp.map(|eta| 1.0 / (1.0 + (-eta).exp()));
        let resid = &dvec - &p;
        let score = x.transpose() * &resid;
        let score_norm = score.amax();

        let w = p.map(|pi| pi * (1.0 - pi));
        let mut xw = x.clone();
        for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
            row *= wi;
        }
        let info = x.transpose() * xw;
        let chol = Cholesky::new(info).ok_or(Error::SingularDesign)?;

        // the score is a sum of n O(1) terms, so its rounding floor grows
        // with n; scale the tolerance accordingly
        if score_norm <= SCORE_TOL * (1.0 + (n as f64).sqrt()) {
            return Ok(ModelFit {
                intercept: theta[0],
                slopes: theta.rows(1, d1 - 1).into_owned(),
                fitted_probs: p,
                inv_information: chol.inverse(),
                converged: true,
                iterations: iter - 1,
            });
        }
        if lp.amax() > SEPARATION_LP {
            return Err(Error::Separation(SEPARATION_LP));
        }

        let direction = chol.solve(&score);
        let mut step = 1.0;
        // near the optimum the gain per step drops below the float
        // resolution of the log-likelihood; accept such ties instead of
        // halving the step into a stall
        let ll_slack = 1e-12 * (1.0 + ll.abs());
        loop {
            let candidate = &theta + step * &direction;
            let lp_new = &x * &candidate;
            let ll_new = log_likelihood(&lp_new, labels);
            if ll_new >= ll - ll_slack || step < 1e-10 {
                theta = candidate;
                lp = lp_new;
                ll = ll_new;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}

/// Per-subject slope-influence vectors inv_information · x̃_i (D_i − p_i),
/// restricted to the slope coordinates. Sums to ~0 over subjects (score
/// equation at the MLE).
pub fn influence_core(
    fit: &ModelFit,
    panel: &DMatrix<f64>,
    labels: &[u8],
) -> Result<Vec<DVector<f64>>> {
    let n = panel.nrows();
    let d = fit.slopes.len();
    if panel.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} panel columns vs {} slopes",
            panel.ncols(),
            d
        )));
    }
    if n != labels.len() || n != fit.fitted_probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{n} panel rows vs {} labels vs {} fitted probs",
            labels.len(),
            fit.fitted_probs.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    let mut xt = DVector::zeros(d + 1);
    for i in 0..n {
        xt[0] = 1.0;
        for j in 0..d {
            xt[j + 1] = panel[(i, j)];
        }
        let resid = f64::from(labels[i]) - fit.fitted_probs[i];
        let full = &fit.inv_information * (&xt * resid);
        out.push(full.rows(1, d).into_owned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_mvn_panel, ScenarioConfig};
    use approx::assert_abs_diff_eq;

    fn mirrored_null_panel() -> (DMatrix<f64>, Vec<u8>) {
        // cases and controls with identical marker values: no association
        let values = [0.3, -1.2, 0.8, 2.1, -0.4, 1.7];
        let mut col = Vec::new();
        let mut labels = Vec::new();
        for &v in &values {
            col.push(v);
            labels.push(1u8);
            col.push(v);
            labels.push(0u8);
        }
        (DMatrix::from_column_slice(col.len(), 1, &col), labels)
    }

    #[test]
    fn no_association_gives_zero_slope() {
        let (panel, labels) = mirrored_null_panel();
        let fit = fit(&panel, &labels).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.slopes[0], 0.0, epsilon = 1e-6);
        // balanced labels: intercept = logit(1/2) = 0
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-6);
    }

    fn correct_model_panel(n: usize, seed: u64) -> (DMatrix<f64>, Vec<u8>) {
        let config = ScenarioConfig {
            mu_case: DVector::from_column_slice(&[1.0, 1.1]),
            cov_case: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            cov_control: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            n_cases: n,
            n_controls: n,
            mixture: None,
            seed: 0,
        };
        let data = generate_mvn_panel(&config, seed).unwrap();
        (data.markers.clone(), data.labels.clone())
    }

    #[test]
    fn slopes_proportional_to_discriminant_direction() {
        // correct model: population slope direction is Sigma^-1 mu =
        // (0.8125, 0.9375), ratio 0.8667
        let (panel, labels) = correct_model_panel(30_000, 21);
        let f = fit(&panel, &labels).unwrap();
        assert!(f.converged);
        let ratio = f.slopes[0] / f.slopes[1];
        assert!((ratio - 0.8125 / 0.9375).abs() < 0.05, "ratio {ratio}");
        assert!(f.slopes[0] > 0.0 && f.slopes[1] > 0.0);
    }

    #[test]
    fn grid_oracle_on_small_sample() {
        // brute-force maximization of the log-likelihood on a coarse grid
        // + local polish agrees with Newton
        let (panel, labels) = correct_model_panel(60, 3);
        let f = fit(&panel, &labels).unwrap();
        let x = design_with_intercept(&panel);
        let ll_at = |a: f64, b0: f64, b1: f64| {
            let theta = DVector::from_column_slice(&[a, b0, b1]);
            log_likelihood(&(&x * theta), &labels)
        };
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
        let grid = |c: f64, w: f64, k: i32| (-k..=k).map(move |i| c + w * i as f64);
        for a in grid(0.0, 0.25, 12) {
            for b0 in grid(0.0, 0.25, 12) {
                for b1 in grid(0.0, 0.25, 12) {
                    let ll = ll_at(a, b0, b1);
                    if ll > best.0 {
                        best = (ll, a, b0, b1);
                    }
                }
            }
        }
        // polish around the grid winner
        for a in grid(best.1, 0.02, 15) {
            for b0 in grid(best.2, 0.02, 15) {
                for b1 in grid(best.3, 0.02, 15) {
                    let ll = ll_at(a, b0, b1);
                    if ll > best.0 {
                        best = (ll, a, b0, b1);
                    }
                }
            }
        }
        assert!((f.intercept - best.1).abs() < 0.03, "intercept {} vs {}", f.intercept, best.1);
        assert!((f.slopes[0] - best.2).abs() < 0.03);
        assert!((f.slopes[1] - best.3).abs() < 0.03);
        assert!(ll_at(f.intercept, f.slopes[0], f.slopes[1]) >= best.0 - 1e-9);
    }

    #[test]
    fn perfect_separation_detected() {
        let col = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let labels = vec![0, 0, 0, 1, 1, 1];
        let panel = DMatrix::from_column_slice(6, 1, &col);
        assert!(matches!(fit(&panel, &labels), Err(Error::Separation(_))));
    }

    #[test]
    fn influence_core_sums_to_zero() {
        let (panel, labels) = correct_model_panel(200, 8);
        let f = fit(&panel, &labels).unwrap();
        let cores = influence_core(&f, &panel, &labels).unwrap();
        let mut total = DVector::zeros(2);
        for v in &cores {
            total += v;
        }
        assert!(total.amax() < 1e-6, "score residual {total}");
    }

    #[test]
    fn duplicating_rows_halves_influence() {
        let (panel, labels) = correct_model_panel(150, 5);
        let f = fit(&panel, &labels).unwrap();
        let cores = influence_core(&f, &panel, &labels).unwrap();

        let n = panel.nrows();
        let mut doubled = DMatrix::zeros(2 * n, 2);
        doubled.view_mut((0, 0), (n, 2)).copy_from(&panel);
        doubled.view_mut((n, 0), (n, 2)).copy_from(&panel);
        let labels2: Vec<u8> = labels.iter().chain(labels.iter()).copied().collect();
        let f2 = fit(&doubled, &labels2).unwrap();
        let cores2 = influence_core(&f2, &doubled, &labels2).unwrap();
        for i in 0..n {
            for j in 0..2 {
                assert_abs_diff_eq!(cores2[i][j], 0.5 * cores[i][j], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn null_influence_covariance_matches_information() {
        // under no association the sandwich collapses: the sample
        // covariance of the influence vectors approaches the slope block
        // of inv_information
        let config = ScenarioConfig {
            mu_case: DVector::from_column_slice(&[0.0, 0.0]),
            cov_case: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            cov_control: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            n_cases: 4000,
            n_controls: 4000,
            mixture: None,
            seed: 0,
        };
        let data = generate_mvn_panel(&config, 14).unwrap();
        let f = fit(&data.markers, &data.labels).unwrap();
        let cores = influence_core(&f, &data.markers, &data.labels).unwrap();
        let n = cores.len() as f64;
        for a in 0..2 {
            for b in 0..2 {
                let cov: f64 = cores.iter().map(|v| v[a] * v[b]).sum::<f64>();
                let target = f.inv_information[(a + 1, b + 1)];
                assert!(
                    (cov - target).abs() < 0.35 * target.abs().max(1.0 / n),
                    "block ({a},{b}): {cov} vs {target}"
                );
            }
        }
    }

    #[test]
    fn affine_equivariance() {
        let (panel, labels) = correct_model_panel(300, 17);
        let f = fit(&panel, &labels).unwrap();
        let mut scaled = panel.clone();
        let c = 4.0;
        scaled.column_mut(1).scale_mut(c);
        let f2 = fit(&scaled, &labels).unwrap();
        assert_abs_diff_eq!(f2.slopes[1], f.slopes[0 + 1] / c, epsilon = 1e-7);
        assert_abs_diff_eq!(f2.slopes[0], f.slopes[0], epsilon = 1e-7);
        for i in 0..labels.len() {
            assert_abs_diff_eq!(f2.fitted_probs[i], f.fitted_probs[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn rank_deficiency_detected() {
        let (panel, labels) = correct_model_panel(100, 2);
        let mut dup = DMatrix::zeros(100 + 100, 3);
        dup.view_mut((0, 0), (200, 2)).copy_from(&panel);
        dup.column_mut(2).copy_from(&panel.column(0));
        assert!(matches!(fit(&dup, &labels), Err(Error::SingularDesign)));
    }
}
