//! The two-stage decision rule: Z1 on a stratified stage-1 subsample,
//! Z2 on the full sample, compared against a [`BoundarySet`].

use rand::Rng;

use crate::boundary::BoundarySet;
use crate::error::{Error, Result};
use crate::logistic;
use crate::roc::{combination_scores, empirical_roc, RocEstimate};
use crate::scenario::CaseControlData;
use crate::variance::{self, Bandwidths, VarianceEstimate};

/// Null hypothesis under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hypothesis {
    /// H0: ROC_f(t) - ROC_r(t) <= delta0 (full vs restricted panel).
    Incremental { delta0: f64 },
    /// H0: ROC_f(t) <= roc0 (single panel, no restricted model).
    SinglePanel { roc0: f64 },
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    pub t: f64,
    /// Stage-1 fraction, equal across strata.
    pub lambda: f64,
    pub boundaries: BoundarySet,
    /// Column indices of the candidate marker(s) excluded from the
    /// restricted panel.
    pub new_marker_columns: Vec<usize>,
    pub hypothesis: Hypothesis,
}

impl TestConfig {
    pub fn validate(&self, n_markers: usize) -> Result<()> {
        if !(0.0 < self.t && self.t < 1.0) {
            return Err(Error::Config(format!("t must be in (0,1), got {}", self.t)));
        }
        if !(0.0 < self.lambda && self.lambda < 1.0) {
            return Err(Error::Config(format!("lambda must be in (0,1), got {}", self.lambda)));
        }
        match self.hypothesis {
            Hypothesis::Incremental { delta0 } => {
                if delta0 < 0.0 {
                    return Err(Error::Config(format!("delta0 must be >= 0, got {delta0}")));
                }
                if self.restricted_columns(n_markers).is_empty() {
                    return Err(Error::Config("restricted panel has no columns".into()));
                }
            }
            Hypothesis::SinglePanel { roc0 } => {
                if !(0.0..=1.0).contains(&roc0) {
                    return Err(Error::Config(format!("roc0 must be in [0,1], got {roc0}")));
                }
            }
        }
        if self.new_marker_columns.iter().any(|&c| c >= n_markers) {
            return Err(Error::Config("new-marker column out of range".into()));
        }
        Ok(())
    }

    pub fn restricted_columns(&self, n_markers: usize) -> Vec<usize> {
        (0..n_markers).filter(|c| !self.new_marker_columns.contains(c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    Accept,
    Continue,
    RejectFinal,
    AcceptFinal,
}

impl Decision {
    pub fn is_rejection(self) -> bool {
        matches!(self, Decision::Reject | Decision::RejectFinal)
    }

    pub fn is_terminal(self) -> bool {
        self != Decision::Continue
    }
}

#[derive(Debug, Clone)]
pub struct StageResult {
    pub stage: u8,
    pub z: f64,
    pub roc_full: RocEstimate,
    pub roc_restricted: Option<RocEstimate>,
    pub variance: VarianceEstimate,
    pub decision: Decision,
    /// Specimen units consumed by this stage (stage 2 counts only the
    /// participants not already measured at stage 1).
    pub units_consumed: usize,
}

fn evaluate(
    data: &CaseControlData,
    rows: &[usize],
    config: &TestConfig,
) -> Result<(f64, RocEstimate, Option<RocEstimate>, VarianceEstimate)> {
    let all_cols: Vec<usize> = (0..data.n_markers()).collect();
    let (panel_full, labels) = data.subset(rows, &all_cols);
    let fit_full = logistic::fit(&panel_full, &labels)?;
    let scores_full = combination_scores(&fit_full, &panel_full)?;
    let (case_f, control_f) = partition_scores(&scores_full, &labels);
    let roc_full = empirical_roc(&case_f, &control_f, config.t)?;

    match config.hypothesis {
        Hypothesis::SinglePanel { roc0 } => {
            let pieces = variance::influence_pieces(&fit_full, &panel_full, &labels, config.t)?;
            let n = labels.len();
            let psi: Vec<f64> =
                (0..n).map(|i| pieces.a1_term[i] + pieces.a3_term[i]).collect();
            let sigma_f = psi.iter().map(|v| v * v).sum::<f64>() / (n as f64).powi(2);
            if sigma_f <= 0.0 {
                return Err(Error::DegenerateStatistic);
            }
            let bw = crate::kde::silverman_bandwidth(&case_f)?;
            let bw0 = crate::kde::silverman_bandwidth(&control_f)?;
            let var = VarianceEstimate {
                sigma_f,
                sigma_r: 0.0,
                sigma_fr: 0.0,
                sigma_delta: sigma_f,
                per_subject_full: psi,
                per_subject_restricted: Vec::new(),
                bandwidths: Bandwidths {
                    case_full: bw,
                    control_full: bw0,
                    case_restricted: bw,
                    control_restricted: bw0,
                },
                ratio_clamped: pieces.ratio_clamped,
            };
            let z = (roc_full.value - roc0) / var.sigma_delta.sqrt();
            Ok((z, roc_full, None, var))
        }
        Hypothesis::Incremental { delta0 } => {
            let restr_cols = config.restricted_columns(data.n_markers());
            let (panel_restr, _) = data.subset(rows, &restr_cols);
            let fit_restr = logistic::fit(&panel_restr, &labels)?;
            let scores_restr = combination_scores(&fit_restr, &panel_restr)?;
            let (case_r, control_r) = partition_scores(&scores_restr, &labels);
            let roc_restr = empirical_roc(&case_r, &control_r, config.t)?;
            let var = variance::sigma_components(
                &fit_full,
                &panel_full,
                &fit_restr,
                &panel_restr,
                &labels,
                config.t,
            )?;
            if var.sigma_delta <= 0.0 {
                return Err(Error::DegenerateStatistic);
            }
            let z = (roc_full.value - roc_restr.value - delta0) / var.sigma_delta.sqrt();
            Ok((z, roc_full, Some(roc_restr), var))
        }
    }
}

fn partition_scores(scores: &[f64], labels: &[u8]) -> (Vec<f64>, Vec<f64>) {
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

fn check_stage_sample(data: &CaseControlData, rows: &[usize]) -> Result<()> {
    let cases = rows.iter().filter(|&&r| data.labels[r] == 1).count();
    let controls = rows.len() - cases;
    if cases < 10 || controls < 10 {
        return Err(Error::Precondition(format!(
            "stage sample needs >= 10 cases and controls, got {cases}/{controls}"
        )));
    }
    Ok(())
}

pub fn stage1(
    data: &CaseControlData,
    stage1_ids: &[usize],
    config: &TestConfig,
) -> Result<StageResult> {
    config.validate(data.n_markers())?;
    check_stage_sample(data, stage1_ids)?;
    let (z, roc_full, roc_restr, var) = evaluate(data, stage1_ids, config)?;
    if !z.is_finite() {
        return Err(Error::DegenerateStatistic);
    }
    let b = &config.boundaries;
    let decision = if z >= b.b1 {
        Decision::Reject
    } else if z <= b.a1 {
        Decision::Accept
    } else {
        Decision::Continue
    };
    Ok(StageResult {
        stage: 1,
        z,
        roc_full,
        roc_restricted: roc_restr,
        variance: var,
        decision,
        units_consumed: stage1_ids.len(),
    })
}

pub fn stage2(
    data: &CaseControlData,
    config: &TestConfig,
    stage1_result: &StageResult,
) -> Result<StageResult> {
    if stage1_result.decision != Decision::Continue {
        return Err(Error::Precondition("stage 2 requires a stage-1 continue decision".into()));
    }
    let rows: Vec<usize> = (0..data.n()).collect();
    let (z, roc_full, roc_restr, var) = evaluate(data, &rows, config)?;
    if !z.is_finite() {
        return Err(Error::DegenerateStatistic);
    }
    let decision = if z >= config.boundaries.b2 {
        Decision::RejectFinal
    } else {
        Decision::AcceptFinal
    };
    Ok(StageResult {
        stage: 2,
        z,
        roc_full,
        roc_restricted: roc_restr,
        variance: var,
        decision,
        units_consumed: data.n() - stage1_result.units_consumed,
    })
}

/// Runs stage 1 and, on a continue decision, stage 2. Total specimen
/// units consumed sum to |stage1_ids| on an early stop and N otherwise.
pub fn run_two_stage(
    data: &CaseControlData,
    stage1_ids: &[usize],
    config: &TestConfig,
) -> Result<(StageResult, Option<StageResult>)> {
    let first = stage1(data, stage1_ids, config)?;
    if first.decision != Decision::Continue {
        return Ok((first, None));
    }
    let second = stage2(data, config, &first)?;
    Ok((first, Some(second)))
}

/// Single-stage test on the given rows at one-sided level `alpha`,
/// used for the rotation tail phase on partially measured cohorts.
/// Returns whether the null was rejected.
pub fn fixed_sample_test(
    data: &CaseControlData,
    rows: &[usize],
    config: &TestConfig,
    alpha: f64,
) -> Result<bool> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
    }
    config.validate(data.n_markers())?;
    check_stage_sample(data, rows)?;
    let (z, ..) = evaluate(data, rows, config)?;
    if !z.is_finite() {
        return Err(Error::DegenerateStatistic);
    }
    Ok(z >= crate::stats::norm_upper_quantile(alpha))
}

/// Random stratified stage-1 subsample: round(lambda * stratum size)
/// participants from each label stratum.
pub fn stratified_stage1_ids<R: Rng>(
    data: &CaseControlData,
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(Error::Config(format!("lambda must be in (0,1), got {lambda}")));
    }
    use rand::seq::SliceRandom;
    let mut out = Vec::new();
    for stratum in [1u8, 0u8] {
        let mut rows: Vec<usize> =
            (0..data.n()).filter(|&i| data.labels[i] == stratum).collect();
        let k = (lambda * rows.len() as f64).round() as usize;
        rows.shuffle(rng);
        out.extend_from_slice(&rows[..k]);
    }
    out.sort_unstable();
    Ok(out)
}
