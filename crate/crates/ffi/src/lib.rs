//! C ABI for the seqroc library: boundary solving, closed-form ROC,
//! rotation formulas, and the two-stage incremental-value test over an
//! opaque panel handle. All functions return a status code; outputs are
//! written through pointers.

use std::slice;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqroc::boundary::{solve_boundaries, Spending, Stopping};
use seqroc::rotation::expected_evaluated;
use seqroc::scenario::{closed_form_roc, CaseControlData};
use seqroc::seqtest::{self, Decision, Hypothesis, TestConfig};
use seqroc::stats::bvn_upper;
use seqroc::Error;

/// Status codes returned by every API function.
pub const SEQROC_OK: i32 = 0;
pub const SEQROC_ERR_NULL_POINTER: i32 = 1;
pub const SEQROC_ERR_INVALID_ARGUMENT: i32 = 2;
pub const SEQROC_ERR_NUMERICAL: i32 = 3;
pub const SEQROC_ERR_DEGENERATE_DATA: i32 = 4;

/// Spending families for seqroc_solve_boundaries.
pub const SEQROC_SPENDING_OBF: i32 = 0;
pub const SEQROC_SPENDING_POCOCK: i32 = 1;

/// Stopping modes for seqroc_solve_boundaries.
pub const SEQROC_STOPPING_BOTH: i32 = 0;
pub const SEQROC_STOPPING_FUTILITY_ONLY: i32 = 1;
pub const SEQROC_STOPPING_EFFICACY_ONLY: i32 = 2;

/// Decisions reported by seqroc_two_stage_test.
pub const SEQROC_DECISION_CONTINUE: i32 = 0;
pub const SEQROC_DECISION_REJECT: i32 = 1;
pub const SEQROC_DECISION_ACCEPT: i32 = 2;
pub const SEQROC_DECISION_REJECT_FINAL: i32 = 3;
pub const SEQROC_DECISION_ACCEPT_FINAL: i32 = 4;

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Precondition(_)
        | Error::DimensionMismatch(_) => SEQROC_ERR_INVALID_ARGUMENT,
        Error::DegenerateSample | Error::DegenerateStatistic | Error::SingularDesign
        | Error::Separation(_) | Error::NotPositiveDefinite => SEQROC_ERR_DEGENERATE_DATA,
        _ => SEQROC_ERR_NUMERICAL,
    }
}

/// Solved two-stage boundaries. Infinite bounds are IEEE infinities.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeqrocBoundaries {
    pub a1: f64,
    pub b1: f64,
    pub b2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub rho: f64,
    pub delta1: f64,
}

fn spending_from(code: i32) -> Option<Spending> {
    match code {
        SEQROC_SPENDING_OBF => Some(Spending::Obf),
        SEQROC_SPENDING_POCOCK => Some(Spending::Pocock),
        _ => None,
    }
}

fn stopping_from(code: i32) -> Option<Stopping> {
    match code {
        SEQROC_STOPPING_BOTH => Some(Stopping::Both),
        SEQROC_STOPPING_FUTILITY_ONLY => Some(Stopping::FutilityOnly),
        SEQROC_STOPPING_EFFICACY_ONLY => Some(Stopping::EfficacyOnly),
        _ => None,
    }
}

/// Solves symmetric two-stage alpha-spending boundaries.
///
/// # Safety
/// `out` must be a valid pointer to a SeqrocBoundaries.
#[no_mangle]
pub unsafe extern "C" fn seqroc_solve_boundaries(
    alpha: f64,
    info_frac: f64,
    spending: i32,
    stopping: i32,
    out: *mut SeqrocBoundaries,
) -> i32 {
    if out.is_null() {
        return SEQROC_ERR_NULL_POINTER;
    }
    let (Some(family), Some(mode)) = (spending_from(spending), stopping_from(stopping)) else {
        return SEQROC_ERR_INVALID_ARGUMENT;
    };
    match solve_boundaries(alpha, info_frac, family, mode) {
        Ok(b) => {
            *out = SeqrocBoundaries {
                a1: b.a1,
                b1: b.b1,
                b2: b.b2,
                alpha1: b.alpha1,
                alpha2: b.alpha2,
                rho: b.rho,
                delta1: b.delta1,
            };
            SEQROC_OK
        }
        Err(e) => error_code(&e),
    }
}

/// Upper-orthant probability P(Z1 > h, Z2 > k) at correlation rho.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqroc_bvn_upper(h: f64, k: f64, rho: f64, out: *mut f64) -> i32 {
    if out.is_null() {
        return SEQROC_ERR_NULL_POINTER;
    }
    match bvn_upper(h, k, rho) {
        Ok(v) => {
            *out = v;
            SEQROC_OK
        }
        Err(e) => error_code(&e),
    }
}

/// Closed-form ROC(t) for the equal-covariance MVN model. `mu` has
/// length `dim`; `cov` is row-major dim x dim.
///
/// # Safety
/// `mu` and `cov` must point to dim and dim*dim readable doubles; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqroc_closed_form_roc(
    mu: *const f64,
    cov: *const f64,
    dim: usize,
    t: f64,
    out: *mut f64,
) -> i32 {
    if mu.is_null() || cov.is_null() || out.is_null() {
        return SEQROC_ERR_NULL_POINTER;
    }
    if dim == 0 {
        return SEQROC_ERR_INVALID_ARGUMENT;
    }
    let mu = DVector::from_column_slice(slice::from_raw_parts(mu, dim));
    let cov = DMatrix::from_row_slice(dim, dim, slice::from_raw_parts(cov, dim * dim));
    match closed_form_roc(&mu, &cov, t) {
        Ok(v) => {
            *out = v;
            SEQROC_OK
        }
        Err(e) => error_code(&e),
    }
}

/// Closed-form expected number of markers evaluated by the rotation
/// policy (stopping probability p, volume v, kappa groups).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqroc_expected_evaluated(
    p: f64,
    v: u32,
    kappa: usize,
    out: *mut f64,
) -> i32 {
    if out.is_null() {
        return SEQROC_ERR_NULL_POINTER;
    }
    match expected_evaluated(p, v, kappa) {
        Ok(e) => {
            *out = e;
            SEQROC_OK
        }
        Err(e) => error_code(&e),
    }
}

/// Opaque case-control panel handle.
pub struct SeqrocPanel {
    data: CaseControlData,
}

/// Builds a panel from a row-major values matrix (n_rows x n_markers)
/// and 0/1 labels. Returns NULL on invalid input.
///
/// # Safety
/// `values` must point to n_rows*n_markers doubles and `labels` to
/// n_rows bytes.
#[no_mangle]
pub unsafe extern "C" fn seqroc_panel_new(
    values: *const f64,
    n_rows: usize,
    n_markers: usize,
    labels: *const u8,
) -> *mut SeqrocPanel {
    if values.is_null() || labels.is_null() || n_rows == 0 || n_markers == 0 {
        return std::ptr::null_mut();
    }
    let values = slice::from_raw_parts(values, n_rows * n_markers);
    let labels = slice::from_raw_parts(labels, n_rows);
    if labels.iter().any(|&l| l > 1) {
        return std::ptr::null_mut();
    }
    let markers = DMatrix::from_row_slice(n_rows, n_markers, values);
    match CaseControlData::new(markers, labels.to_vec()) {
        Ok(data) => Box::into_raw(Box::new(SeqrocPanel { data })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Frees a panel created by seqroc_panel_new. NULL is a no-op.
///
/// # Safety
/// `panel` must be NULL or a pointer returned by seqroc_panel_new that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn seqroc_panel_free(panel: *mut SeqrocPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Empirical ROC(t) of one marker column of the panel.
///
/// # Safety
/// `panel` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqroc_empirical_roc(
    panel: *const SeqrocPanel,
    column: usize,
    t: f64,
    out: *mut f64,
) -> i32 {
    let Some(panel) = panel.as_ref() else {
        return SEQROC_ERR_NULL_POINTER;
    };
    if out.is_null() {
        return SEQROC_ERR_NULL_POINTER;
    }
    if column >= panel.data.n_markers() {
        return SEQROC_ERR_INVALID_ARGUMENT;
    }
    let cases: Vec<f64> =
        panel.data.case_rows().iter().map(|&r| panel.data.markers[(r, column)]).collect();
    let controls: Vec<f64> =
        panel.data.control_rows().iter().map(|&r| panel.data.markers[(r, column)]).collect();
    match seqroc::roc::empirical_roc(&cases, &controls, t) {
        Ok(est) => {
            *out = est.value;
            SEQROC_OK
        }
        Err(e) => error_code(&e),
    }
}

/// Result of a two-stage test through the C ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeqrocTestResult {
    /// 1 if the test stopped at stage 1, 2 otherwise.
    pub final_stage: i32,
    /// One of the SEQROC_DECISION_* codes (the terminal decision).
    pub decision: i32,
    pub z1: f64,
    /// NaN when the test stopped early.
    pub z2: f64,
    pub roc_full: f64,
    /// NaN for single-panel tests.
    pub roc_restricted: f64,
    pub sigma_delta: f64,
}

fn decision_code(d: Decision) -> i32 {
    match d {
        Decision::Continue => SEQROC_DECISION_CONTINUE,
        Decision::Reject => SEQROC_DECISION_REJECT,
        Decision::Accept => SEQROC_DECISION_ACCEPT,
        Decision::RejectFinal => SEQROC_DECISION_REJECT_FINAL,
        Decision::AcceptFinal => SEQROC_DECISION_ACCEPT_FINAL,
    }
}

/// Runs the two-stage incremental-value test: H0 is that the full panel
/// improves ROC(t) over the panel without `new_marker_columns` by at
/// most delta0. The stage-1 subsample is a stratified fraction lambda
/// drawn with the given seed.
///
/// # Safety
/// `panel` must be a live handle; `new_marker_columns` must point to
/// n_new_markers readable values; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn seqroc_two_stage_test(
    panel: *const SeqrocPanel,
    new_marker_columns: *const usize,
    n_new_markers: usize,
    t: f64,
    delta0: f64,
    lambda: f64,
    alpha: f64,
    spending: i32,
    stopping: i32,
    seed: u64,
    out: *mut SeqrocTestResult,
) -> i32 {
    let Some(panel) = panel.as_ref() else {
        return SEQROC_ERR_NULL_POINTER;
    };
    if out.is_null() || (new_marker_columns.is_null() && n_new_markers > 0) {
        return SEQROC_ERR_NULL_POINTER;
    }
    let (Some(family), Some(mode)) = (spending_from(spending), stopping_from(stopping)) else {
        return SEQROC_ERR_INVALID_ARGUMENT;
    };
    let new_cols = if n_new_markers == 0 {
        Vec::new()
    } else {
        slice::from_raw_parts(new_marker_columns, n_new_markers).to_vec()
    };
    let boundaries = match solve_boundaries(alpha, lambda, family, mode) {
        Ok(b) => b,
        Err(e) => return error_code(&e),
    };
    let config = TestConfig {
        t,
        lambda,
        boundaries,
        new_marker_columns: new_cols,
        hypothesis: Hypothesis::Incremental { delta0 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = match seqtest::stratified_stage1_ids(&panel.data, lambda, &mut rng) {
        Ok(ids) => ids,
        Err(e) => return error_code(&e),
    };
    match seqtest::run_two_stage(&panel.data, &ids, &config) {
        Ok((first, second)) => {
            let result = match second {
                Some(second) => SeqrocTestResult {
                    final_stage: 2,
                    decision: decision_code(second.decision),
                    z1: first.z,
                    z2: second.z,
                    roc_full: second.roc_full.value,
                    roc_restricted: second
                        .roc_restricted
                        .map(|r| r.value)
                        .unwrap_or(f64::NAN),
                    sigma_delta: second.variance.sigma_delta,
                },
                None => SeqrocTestResult {
                    final_stage: 1,
                    decision: decision_code(first.decision),
                    z1: first.z,
                    z2: f64::NAN,
                    roc_full: first.roc_full.value,
                    roc_restricted: first
                        .roc_restricted
                        .map(|r| r.value)
                        .unwrap_or(f64::NAN),
                    sigma_delta: first.variance.sigma_delta,
                },
            };
            *out = result;
            SEQROC_OK
        }
        Err(e) => error_code(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqroc::scenario::{generate_mvn_panel, ScenarioConfig};

    #[test]
    fn boundaries_round_trip() {
        let mut out = SeqrocBoundaries {
            a1: 0.0,
            b1: 0.0,
            b2: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            rho: 0.0,
            delta1: 0.0,
        };
        let code = unsafe {
            seqroc_solve_boundaries(0.05, 0.5, SEQROC_SPENDING_OBF, SEQROC_STOPPING_BOTH, &mut out)
        };
        assert_eq!(code, SEQROC_OK);
        let native = solve_boundaries(0.05, 0.5, Spending::Obf, Stopping::Both).unwrap();
        assert_eq!(out.b1, native.b1);
        assert_eq!(out.b2, native.b2);
        assert_eq!(out.a1, native.a1);

        let bad = unsafe { seqroc_solve_boundaries(0.05, 0.5, 99, 0, &mut out) };
        assert_eq!(bad, SEQROC_ERR_INVALID_ARGUMENT);
        let null =
            unsafe { seqroc_solve_boundaries(0.05, 0.5, 0, 0, std::ptr::null_mut()) };
        assert_eq!(null, SEQROC_ERR_NULL_POINTER);
    }

    #[test]
    fn closed_form_roc_through_abi() {
        let mu = [1.0];
        let cov = [1.0];
        let mut out = 0.0;
        let code =
            unsafe { seqroc_closed_form_roc(mu.as_ptr(), cov.as_ptr(), 1, 0.1, &mut out) };
        assert_eq!(code, SEQROC_OK);
        assert!((out - 0.389).abs() < 5e-4);
        let bad = unsafe { seqroc_closed_form_roc(mu.as_ptr(), cov.as_ptr(), 1, 1.5, &mut out) };
        assert_eq!(bad, SEQROC_ERR_INVALID_ARGUMENT);
    }

    #[test]
    fn bvn_and_formula_through_abi() {
        let mut out = 0.0;
        assert_eq!(unsafe { seqroc_bvn_upper(0.0, 0.0, 0.5, &mut out) }, SEQROC_OK);
        assert!((out - 1.0 / 3.0).abs() < 1e-8);
        assert_eq!(unsafe { seqroc_expected_evaluated(0.5, 1, 2, &mut out) }, SEQROC_OK);
        assert!((out - 1.25).abs() < 1e-12);
        assert_eq!(
            unsafe { seqroc_expected_evaluated(1.5, 1, 2, &mut out) },
            SEQROC_ERR_INVALID_ARGUMENT
        );
    }

    fn test_panel() -> *mut SeqrocPanel {
        let config = ScenarioConfig {
            mu_case: DVector::from_column_slice(&[1.0, 1.5]),
            cov_case: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            cov_control: DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]),
            n_cases: 200,
            n_controls: 200,
            mixture: None,
            seed: 0,
        };
        let data = generate_mvn_panel(&config, 99).unwrap();
        let n = data.n();
        let mut values = Vec::with_capacity(n * 2);
        for r in 0..n {
            values.push(data.markers[(r, 0)]);
            values.push(data.markers[(r, 1)]);
        }
        unsafe { seqroc_panel_new(values.as_ptr(), n, 2, data.labels.as_ptr()) }
    }

    #[test]
    fn two_stage_test_through_abi() {
        let panel = test_panel();
        assert!(!panel.is_null());
        let new_cols = [1usize];
        let mut out = SeqrocTestResult {
            final_stage: 0,
            decision: -1,
            z1: 0.0,
            z2: 0.0,
            roc_full: 0.0,
            roc_restricted: 0.0,
            sigma_delta: 0.0,
        };
        let code = unsafe {
            seqroc_two_stage_test(
                panel,
                new_cols.as_ptr(),
                1,
                0.1,
                0.0,
                0.5,
                0.05,
                SEQROC_SPENDING_OBF,
                SEQROC_STOPPING_BOTH,
                7,
                &mut out,
            )
        };
        assert_eq!(code, SEQROC_OK);
        assert!(out.final_stage == 1 || out.final_stage == 2);
        assert!(out.z1.is_finite());
        assert!(out.sigma_delta > 0.0);
        assert!(out.roc_full >= out.roc_restricted - 0.5);

        let mut roc = 0.0;
        assert_eq!(unsafe { seqroc_empirical_roc(panel, 0, 0.1, &mut roc) }, SEQROC_OK);
        assert!(roc > 0.0 && roc < 1.0);
        assert_eq!(
            unsafe { seqroc_empirical_roc(panel, 5, 0.1, &mut roc) },
            SEQROC_ERR_INVALID_ARGUMENT
        );

        unsafe { seqroc_panel_free(panel) };
        unsafe { seqroc_panel_free(std::ptr::null_mut()) };
    }
}
