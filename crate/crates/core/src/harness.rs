//! Replicated experiments: operating-characteristic tables, rotation
//! comparisons (analytic vs simulated vs a non-sequential default arm),
//! stratified bootstrap analysis of a real panel, and CSV emission.
//! Replicates use counter-based RNG substreams so results do not depend
//! on worker scheduling.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rotation::{
    estimate_operating_probs, expected_evaluated, expected_rejected, expected_true_validated,
    simulate_rotation, MarkerTester, PanelTester, RotationConfig, Stage1Outcome,
};
use crate::scenario::{generate_mvn_panel, CaseControlData, ScenarioConfig};
use crate::seqtest::{self, Decision, TestConfig};

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub test: TestConfig,
    pub replicates: usize,
    pub master_seed: u64,
    pub label: String,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.test.validate(self.scenario.n_markers())?;
        if self.replicates < 100 {
            return Err(Error::Config("need at least 100 replicates for SE reporting".into()));
        }
        Ok(())
    }
}

/// One row of an operating-characteristic table with binomial SEs.
#[derive(Debug, Clone)]
pub struct OcRow {
    pub label: String,
    pub spending: String,
    pub stopping: String,
    pub replicates: usize,
    pub p_reject_stage1: f64,
    pub p_accept_stage1: f64,
    pub p_continue: f64,
    pub p_reject_stage2: f64,
    pub p_reject_overall: f64,
    pub se_reject_stage1: f64,
    pub se_reject_overall: f64,
    pub excluded: u32,
}

fn binomial_se(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

/// Per-replicate fresh panel, stratified stage-1 subsample, two-stage
/// test; deterministic given (spec.master_seed) for any worker count.
pub fn run_oc_experiment(spec: &ExperimentSpec) -> Result<OcRow> {
    spec.validate()?;
    let results: Vec<Option<(Decision, Option<Decision>)>> = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
            rng.set_stream(rep as u64 + 1);
            let panel_seed: u64 = rng.random();
            let data = generate_mvn_panel(&spec.scenario, panel_seed).ok()?;
            let ids = seqtest::stratified_stage1_ids(&data, spec.test.lambda, &mut rng).ok()?;
            let (first, second) = seqtest::run_two_stage(&data, &ids, &spec.test).ok()?;
            Some((first.decision, second.map(|s| s.decision)))
        })
        .collect();

    let mut reject1 = 0u32;
    let mut accept1 = 0u32;
    let mut cont = 0u32;
    let mut reject2 = 0u32;
    let mut excluded = 0u32;
    for r in &results {
        match r {
            Some((d1, d2)) => {
                match d1 {
                    Decision::Reject => reject1 += 1,
                    Decision::Accept => accept1 += 1,
                    _ => {
                        cont += 1;
                        if *d2 == Some(Decision::RejectFinal) {
                            reject2 += 1;
                        }
                    }
                }
            }
            None => excluded += 1,
        }
    }
    let n = f64::from(reject1 + accept1 + cont);
    let p_r1 = f64::from(reject1) / n;
    let p_a1 = f64::from(accept1) / n;
    let p_c = f64::from(cont) / n;
    let p_r2 = f64::from(reject2) / n;
    let p_overall = p_r1 + p_r2;
    Ok(OcRow {
        label: spec.label.clone(),
        spending: spec.test.boundaries.spending.to_string(),
        stopping: spec.test.boundaries.stopping.to_string(),
        replicates: spec.replicates,
        p_reject_stage1: p_r1,
        p_accept_stage1: p_a1,
        p_continue: p_c,
        p_reject_stage2: p_r2,
        p_reject_overall: p_overall,
        se_reject_stage1: binomial_se(p_r1, n),
        se_reject_overall: binomial_se(p_overall, n),
        excluded,
    })
}

#[derive(Debug, Clone)]
pub struct RotationRow {
    pub arm: String,
    pub gamma: f64,
    pub n_star_analytic: f64,
    pub n_star_mean: f64,
    pub n_star_se: f64,
    pub n_u_analytic: f64,
    pub n_u_mean: f64,
    pub n_u_se: f64,
    pub n_u_t_analytic: f64,
    pub n_u_t_mean: f64,
    pub n_u_t_se: f64,
    pub fixed_tests_mean: f64,
    pub runs: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Participant layout for rotation runs; marker values are supplied per
/// candidate by the tester, so the template carries only labels.
fn participant_template(scenario: &ScenarioConfig) -> Result<CaseControlData> {
    let n = scenario.n_cases + scenario.n_controls;
    let markers = nalgebra::DMatrix::zeros(n, scenario.n_markers());
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < scenario.n_cases)).collect();
    CaseControlData::new(markers, labels)
}

#[derive(Debug, Clone)]
pub struct RotationExperimentSpec {
    pub scenario: ScenarioConfig,
    pub test: TestConfig,
    pub v: u32,
    pub kappa: usize,
    pub runs: usize,
    /// Replicates used to estimate (p, p_r, p_r*) for the closed forms.
    pub oc_replicates: usize,
    pub master_seed: u64,
    /// Level of tail fixed-sample tests and of the default arm.
    pub fixed_alpha: f64,
}

/// Simulated sequential-rotation arm, the analytic formulas evaluated at
/// Monte Carlo operating probabilities, and the non-sequential default
/// arm (V tests on everyone at the fixed level).
pub fn run_rotation_experiment(spec: &RotationExperimentSpec) -> Result<Vec<RotationRow>> {
    spec.scenario.validate()?;
    spec.test.validate(spec.scenario.n_markers())?;
    let gamma = spec.scenario.mixture.map(|m| m.gamma).unwrap_or(0.0);

    let probs = estimate_operating_probs(
        &spec.scenario,
        &spec.test,
        spec.oc_replicates,
        spec.master_seed,
    )?;
    let e_n = expected_evaluated(probs.p, spec.v, spec.kappa)?;
    let e_nu = expected_rejected(e_n, probs.p_r);
    let e_nut = expected_true_validated(e_n, probs.p_r_star, gamma);

    struct RunStats {
        n_star: f64,
        n_u: f64,
        n_u_t: f64,
        fixed: f64,
    }
    let runs: Vec<Option<RunStats>> = (0..spec.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
            rng.set_stream(1_000_000 + run as u64);
            let mut data = participant_template(&spec.scenario).ok()?;
            let rotation = RotationConfig { v: spec.v, kappa: spec.kappa, seed: 0 };
            let mut tester =
                PanelTester::new(spec.scenario.clone(), spec.test.clone(), spec.fixed_alpha);
            let out = simulate_rotation(&mut data, &rotation, &mut tester, &mut rng).ok()?;
            Some(RunStats {
                n_star: f64::from(out.n_star),
                n_u: f64::from(out.n_u_star),
                n_u_t: f64::from(out.n_u_t_star),
                fixed: f64::from(out.fixed_sample_tests),
            })
        })
        .collect();
    let ok: Vec<&RunStats> = runs.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Precondition("all rotation runs failed".into()));
    }
    let collect = |f: fn(&RunStats) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let (ns_mean, ns_se) = mean_se(&collect(|r| r.n_star));
    let (nu_mean, nu_se) = mean_se(&collect(|r| r.n_u));
    let (nut_mean, nut_se) = mean_se(&collect(|r| r.n_u_t));
    let (fixed_mean, _) = mean_se(&collect(|r| r.fixed));

    let sequential = RotationRow {
        arm: "sequential".into(),
        gamma,
        n_star_analytic: e_n,
        n_star_mean: ns_mean,
        n_star_se: ns_se,
        n_u_analytic: e_nu,
        n_u_mean: nu_mean,
        n_u_se: nu_se,
        n_u_t_analytic: e_nut,
        n_u_t_mean: nut_mean,
        n_u_t_se: nut_se,
        fixed_tests_mean: fixed_mean,
        runs: ok.len(),
    };
    let default = run_default_arm(spec)?;
    Ok(vec![sequential, default])
}

/// Non-sequential default arm: V markers tested once each on all
/// participants at the fixed level; n* = V by construction.
pub fn run_default_arm(spec: &RotationExperimentSpec) -> Result<RotationRow> {
    let gamma = spec.scenario.mixture.map(|m| m.gamma).unwrap_or(0.0);
    let stats: Vec<Option<(f64, f64)>> = (0..spec.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
            rng.set_stream(2_000_000 + run as u64);
            let mut tester =
                PanelTester::new(spec.scenario.clone(), spec.test.clone(), spec.fixed_alpha);
            let template = participant_template(&spec.scenario).ok()?;
            let all_rows: Vec<usize> = (0..template.n()).collect();
            let mut rejected = 0u32;
            let mut true_rejected = 0u32;
            for marker in 0..spec.v as usize {
                if let Some(true) = tester.fixed_for_default(marker, &all_rows, &mut rng) {
                    rejected += 1;
                    if tester.is_useful(marker) {
                        true_rejected += 1;
                    }
                }
            }
            Some((f64::from(rejected), f64::from(true_rejected)))
        })
        .collect();
    let ok: Vec<&(f64, f64)> = stats.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Precondition("all default-arm runs failed".into()));
    }
    let (nu_mean, nu_se) = mean_se(&ok.iter().map(|r| r.0).collect::<Vec<_>>());
    let (nut_mean, nut_se) = mean_se(&ok.iter().map(|r| r.1).collect::<Vec<_>>());

    let probs = estimate_operating_probs(
        &spec.scenario,
        &spec.test,
        spec.oc_replicates,
        spec.master_seed.wrapping_add(1),
    )?;
    let v = f64::from(spec.v);
    Ok(RotationRow {
        arm: "default".into(),
        gamma,
        n_star_analytic: v,
        n_star_mean: v,
        n_star_se: 0.0,
        n_u_analytic: expected_rejected(v, probs.p_r),
        n_u_mean: nu_mean,
        n_u_se: nu_se,
        n_u_t_analytic: expected_true_validated(v, probs.p_r_star, gamma),
        n_u_t_mean: nut_mean,
        n_u_t_se: nut_se,
        fixed_tests_mean: v,
        runs: ok.len(),
    })
}

#[derive(Debug, Clone)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub v: u32,
    pub kappa: usize,
    pub test: TestConfig,
    pub fixed_alpha: f64,
    pub established_columns: Vec<usize>,
    pub candidate_columns: Vec<usize>,
    /// Candidate columns known a priori to be useful (for n_u^t*).
    pub useful_columns: Vec<usize>,
    pub master_seed: u64,
}

impl BootstrapSpec {
    fn validate(&self, n_markers: usize) -> Result<()> {
        if self.candidate_columns.is_empty() {
            return Err(Error::Config("no candidate marker columns designated".into()));
        }
        if self.established_columns.is_empty() {
            return Err(Error::Config("no established marker columns designated".into()));
        }
        for &c in self.established_columns.iter().chain(&self.candidate_columns) {
            if c >= n_markers {
                return Err(Error::Config(format!("column {c} out of range")));
            }
        }
        if self.replicates < 2 {
            return Err(Error::Config("need at least 2 bootstrap replicates".into()));
        }
        Ok(())
    }
}

/// Tester over a resampled real panel: each candidate marker is a column
/// drawn with replacement from the designated candidate set, combined
/// with the established columns.
struct BootstrapTester<'a> {
    resample: &'a CaseControlData,
    spec: &'a BootstrapSpec,
    drawn: Vec<usize>,
    panels: std::collections::HashMap<usize, CaseControlData>,
    stage1_results: std::collections::HashMap<usize, seqtest::StageResult>,
}

impl<'a> BootstrapTester<'a> {
    fn panel_for(&mut self, marker: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let col = self.spec.candidate_columns
            [rng.random_range(0..self.spec.candidate_columns.len())];
        while self.drawn.len() <= marker {
            self.drawn.push(usize::MAX);
        }
        self.drawn[marker] = col;
        let mut cols = self.spec.established_columns.clone();
        cols.push(col);
        let all_rows: Vec<usize> = (0..self.resample.n()).collect();
        let (markers, labels) = self.resample.subset(&all_rows, &cols);
        let mut panel = CaseControlData::new(markers, labels)?;
        panel.group_id = self.resample.group_id.clone();
        panel.n_groups = self.resample.n_groups;
        self.panels.insert(marker, panel);
        Ok(())
    }
}

impl<'a> MarkerTester for BootstrapTester<'a> {
    fn stage_one(&mut self, marker: usize, rows: &[usize], rng: &mut ChaCha8Rng) -> Stage1Outcome {
        if self.panel_for(marker, rng).is_err() {
            return Stage1Outcome::NotEvaluable;
        }
        let panel = &self.panels[&marker];
        match seqtest::stage1(panel, rows, &self.spec.test) {
            Ok(result) => {
                let outcome = match result.decision {
                    Decision::Reject => Stage1Outcome::Stop { reject: true },
                    Decision::Accept => Stage1Outcome::Stop { reject: false },
                    _ => Stage1Outcome::Continue,
                };
                self.stage1_results.insert(marker, result);
                outcome
            }
            Err(_) => Stage1Outcome::NotEvaluable,
        }
    }

    fn stage_two(&mut self, marker: usize, _rows: &[usize]) -> Option<bool> {
        let panel = self.panels.get(&marker)?;
        let first = self.stage1_results.get(&marker)?;
        match seqtest::stage2(panel, &self.spec.test, first) {
            Ok(result) => Some(result.decision == Decision::RejectFinal),
            Err(_) => None,
        }
    }

    fn fixed_sample(&mut self, marker: usize, rows: &[usize], _rng: &mut ChaCha8Rng) -> Option<bool> {
        let panel = self.panels.get(&marker)?;
        seqtest::fixed_sample_test(panel, rows, &self.spec.test, self.spec.fixed_alpha).ok()
    }

    fn is_useful(&self, marker: usize) -> bool {
        self.drawn
            .get(marker)
            .map(|c| self.spec.useful_columns.contains(c))
            .unwrap_or(false)
    }
}

fn stratified_resample(panel: &CaseControlData, rng: &mut ChaCha8Rng) -> Result<CaseControlData> {
    let mut rows = Vec::with_capacity(panel.n());
    for stratum in [1u8, 0u8] {
        let pool: Vec<usize> =
            (0..panel.n()).filter(|&i| panel.labels[i] == stratum).collect();
        for _ in 0..pool.len() {
            rows.push(pool[rng.random_range(0..pool.len())]);
        }
    }
    let cols: Vec<usize> = (0..panel.n_markers()).collect();
    let (markers, labels) = panel.subset(&rows, &cols);
    CaseControlData::new(markers, labels)
}

#[derive(Debug, Clone)]
pub struct BootstrapRow {
    pub arm: String,
    pub lambda: f64,
    pub n_star_mean: f64,
    pub n_star_se: f64,
    pub n_u_mean: f64,
    pub n_u_se: f64,
    pub n_u_t_mean: f64,
    pub n_u_t_se: f64,
    pub skipped_replicates: u32,
    pub replicates: usize,
}

/// Stratified bootstrap rotation analysis of a real panel: each
/// replicate resamples cases and controls with replacement, fixes one
/// group partition, and runs the rotation and default arms over a
/// candidate-column stream drawn with replacement.
pub fn run_bootstrap(panel: &CaseControlData, spec: &BootstrapSpec) -> Result<Vec<BootstrapRow>> {
    spec.validate(panel.n_markers())?;
    spec.test.validate(spec.established_columns.len() + 1)?;

    struct RepStats {
        seq: Option<(f64, f64, f64)>,
        def: Option<(f64, f64)>,
    }
    let reps: Vec<RepStats> = (0..spec.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
            rng.set_stream(rep as u64 + 1);
            let mut resample = match stratified_resample(panel, &mut rng) {
                Ok(r) => r,
                Err(_) => return RepStats { seq: None, def: None },
            };
            if resample.assign_groups(spec.kappa, &mut rng).is_err() {
                return RepStats { seq: None, def: None };
            }
            let rotation = RotationConfig { v: spec.v, kappa: spec.kappa, seed: 0 };
            let seq = {
                let mut tester = BootstrapTester {
                    resample: &resample,
                    spec,
                    drawn: Vec::new(),
                    panels: std::collections::HashMap::new(),
                    stage1_results: std::collections::HashMap::new(),
                };
                let mut ledger = resample.clone();
                simulate_rotation(&mut ledger, &rotation, &mut tester, &mut rng)
                    .ok()
                    .filter(|out| out.n_star > 0)
                    .map(|out| {
                        (
                            f64::from(out.n_star),
                            f64::from(out.n_u_star),
                            f64::from(out.n_u_t_star),
                        )
                    })
            };
            let def = {
                let mut tester = BootstrapTester {
                    resample: &resample,
                    spec,
                    drawn: Vec::new(),
                    panels: std::collections::HashMap::new(),
                    stage1_results: std::collections::HashMap::new(),
                };
                let all_rows: Vec<usize> = (0..resample.n()).collect();
                let mut rejected = 0.0;
                let mut true_rejected = 0.0;
                let mut any = false;
                for marker in 0..spec.v as usize {
                    if tester.panel_for(marker, &mut rng).is_err() {
                        continue;
                    }
                    let panel_m = &tester.panels[&marker];
                    if let Ok(reject) = seqtest::fixed_sample_test(
                        panel_m,
                        &all_rows,
                        &spec.test,
                        spec.fixed_alpha,
                    ) {
                        any = true;
                        if reject {
                            rejected += 1.0;
                            if tester.is_useful(marker) {
                                true_rejected += 1.0;
                            }
                        }
                    }
                }
                any.then_some((rejected, true_rejected))
            };
            RepStats { seq, def }
        })
        .collect();

    let seq_ok: Vec<&(f64, f64, f64)> = reps.iter().filter_map(|r| r.seq.as_ref()).collect();
    let def_ok: Vec<&(f64, f64)> = reps.iter().filter_map(|r| r.def.as_ref()).collect();
    if seq_ok.is_empty() || def_ok.is_empty() {
        return Err(Error::Precondition("all bootstrap replicates failed".into()));
    }
    let (sn, sn_se) = mean_se(&seq_ok.iter().map(|r| r.0).collect::<Vec<_>>());
    let (su, su_se) = mean_se(&seq_ok.iter().map(|r| r.1).collect::<Vec<_>>());
    let (st, st_se) = mean_se(&seq_ok.iter().map(|r| r.2).collect::<Vec<_>>());
    let (du, du_se) = mean_se(&def_ok.iter().map(|r| r.0).collect::<Vec<_>>());
    let (dt, dt_se) = mean_se(&def_ok.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(vec![
        BootstrapRow {
            arm: "sequential".into(),
            lambda: 1.0 / spec.kappa as f64,
            n_star_mean: sn,
            n_star_se: sn_se,
            n_u_mean: su,
            n_u_se: su_se,
            n_u_t_mean: st,
            n_u_t_se: st_se,
            skipped_replicates: (spec.replicates - seq_ok.len()) as u32,
            replicates: seq_ok.len(),
        },
        BootstrapRow {
            arm: "default".into(),
            lambda: 1.0 / spec.kappa as f64,
            n_star_mean: f64::from(spec.v),
            n_star_se: 0.0,
            n_u_mean: du,
            n_u_se: du_se,
            n_u_t_mean: dt,
            n_u_t_se: dt_se,
            skipped_replicates: (spec.replicates - def_ok.len()) as u32,
            replicates: def_ok.len(),
        },
    ])
}

/// A row type that can be written as CSV.
pub trait CsvRow {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
}

pub fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.6}")
    }
}

impl CsvRow for OcRow {
    fn header() -> Vec<&'static str> {
        vec![
            "label",
            "spending",
            "stopping",
            "replicates",
            "p_reject_stage1",
            "p_accept_stage1",
            "p_continue",
            "p_reject_stage2",
            "p_reject_overall",
            "se_reject_stage1",
            "se_reject_overall",
            "excluded",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.label.clone(),
            self.spending.clone(),
            self.stopping.clone(),
            self.replicates.to_string(),
            fmt_num(self.p_reject_stage1),
            fmt_num(self.p_accept_stage1),
            fmt_num(self.p_continue),
            fmt_num(self.p_reject_stage2),
            fmt_num(self.p_reject_overall),
            fmt_num(self.se_reject_stage1),
            fmt_num(self.se_reject_overall),
            self.excluded.to_string(),
        ]
    }
}

impl CsvRow for RotationRow {
    fn header() -> Vec<&'static str> {
        vec![
            "arm",
            "gamma",
            "n_star_analytic",
            "n_star_mean",
            "n_star_se",
            "n_u_analytic",
            "n_u_mean",
            "n_u_se",
            "n_u_t_analytic",
            "n_u_t_mean",
            "n_u_t_se",
            "fixed_tests_mean",
            "runs",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.arm.clone(),
            fmt_num(self.gamma),
            fmt_num(self.n_star_analytic),
            fmt_num(self.n_star_mean),
            fmt_num(self.n_star_se),
            fmt_num(self.n_u_analytic),
            fmt_num(self.n_u_mean),
            fmt_num(self.n_u_se),
            fmt_num(self.n_u_t_analytic),
            fmt_num(self.n_u_t_mean),
            fmt_num(self.n_u_t_se),
            fmt_num(self.fixed_tests_mean),
            self.runs.to_string(),
        ]
    }
}

impl CsvRow for BootstrapRow {
    fn header() -> Vec<&'static str> {
        vec![
            "arm",
            "lambda",
            "n_star_mean",
            "n_star_se",
            "n_u_mean",
            "n_u_se",
            "n_u_t_mean",
            "n_u_t_se",
            "skipped_replicates",
            "replicates",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.arm.clone(),
            fmt_num(self.lambda),
            fmt_num(self.n_star_mean),
            fmt_num(self.n_star_se),
            fmt_num(self.n_u_mean),
            fmt_num(self.n_u_se),
            fmt_num(self.n_u_t_mean),
            fmt_num(self.n_u_t_se),
            self.skipped_replicates.to_string(),
            self.replicates.to_string(),
        ]
    }
}

/// Long-format plot row: (gamma, method, metric, value).
#[derive(Debug, Clone)]
pub struct PlotRow {
    pub gamma: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

impl CsvRow for PlotRow {
    fn header() -> Vec<&'static str> {
        vec!["gamma", "method", "metric", "value"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_num(self.gamma),
            self.method.clone(),
            self.metric.clone(),
            fmt_num(self.value),
        ]
    }
}

impl RotationRow {
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        let mut out = Vec::new();
        for (metric, analytic, simulated) in [
            ("n_star", self.n_star_analytic, self.n_star_mean),
            ("n_u_star", self.n_u_analytic, self.n_u_mean),
            ("n_u_t_star", self.n_u_t_analytic, self.n_u_t_mean),
        ] {
            out.push(PlotRow {
                gamma: self.gamma,
                method: format!("{}_analytic", self.arm),
                metric: metric.into(),
                value: analytic,
            });
            out.push(PlotRow {
                gamma: self.gamma,
                method: format!("{}_simulated", self.arm),
                metric: metric.into(),
                value: simulated,
            });
        }
        out
    }
}

/// Writes rows as UTF-8 CSV with a fixed header and 6-decimal numbers.
pub fn emit_csv<T: CsvRow>(rows: &[T], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(T::header())?;
    for row in rows {
        writer.write_record(row.fields())?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{solve_boundaries, Spending, Stopping};
    use crate::scenario::MarkerMixture;
    use crate::seqtest::Hypothesis;
    use nalgebra::{DMatrix, DVector};

    fn misspecified(mu: [f64; 2], n: usize, gamma: Option<f64>) -> ScenarioConfig {
        ScenarioConfig {
            mu_case: DVector::from_column_slice(&mu),
            cov_case: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]),
            cov_control: DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]),
            n_cases: n,
            n_controls: n,
            mixture: gamma.map(|g| MarkerMixture {
                gamma: g,
                null_case_mean: 1.1,
                useful_case_mean: 1.5,
            }),
            seed: 0,
        }
    }

    fn test_config(delta0: f64, spending: Spending, stopping: Stopping) -> TestConfig {
        TestConfig {
            t: 0.1,
            lambda: 0.5,
            boundaries: solve_boundaries(0.05, 0.5, spending, stopping).unwrap(),
            new_marker_columns: vec![1],
            hypothesis: Hypothesis::Incremental { delta0 },
        }
    }

    #[test]
    fn oc_tallies_sum_to_one_and_match_se_formula() {
        let spec = ExperimentSpec {
            scenario: misspecified([1.0, 1.5], 100, None),
            test: test_config(0.165, Spending::Obf, Stopping::Both),
            replicates: 150,
            master_seed: 5,
            label: "small".into(),
        };
        let row = run_oc_experiment(&spec).unwrap();
        let total = row.p_reject_stage1 + row.p_accept_stage1 + row.p_continue;
        assert!((total - 1.0).abs() < 1e-12);
        let n = (spec.replicates as u32 - row.excluded) as f64;
        assert!((row.se_reject_stage1 - binomial_se(row.p_reject_stage1, n)).abs() < 1e-15);
        assert!(row.p_reject_overall >= row.p_reject_stage1);
    }

    #[test]
    fn degenerate_efficacy_bound_rejects_everything() {
        let mut test = test_config(0.0, Spending::Obf, Stopping::Both);
        test.boundaries.b1 = f64::NEG_INFINITY;
        let spec = ExperimentSpec {
            scenario: misspecified([1.0, 1.5], 60, None),
            test,
            replicates: 120,
            master_seed: 6,
            label: "degenerate".into(),
        };
        let row = run_oc_experiment(&spec).unwrap();
        assert_eq!(row.p_reject_stage1, 1.0);
        assert_eq!(row.p_reject_overall, 1.0);
    }

    #[test]
    fn oc_rows_deterministic_across_worker_counts() {
        let spec = ExperimentSpec {
            scenario: misspecified([1.0, 1.5], 80, None),
            test: test_config(0.1, Spending::Pocock, Stopping::Both),
            replicates: 120,
            master_seed: 9,
            label: "det".into(),
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_oc_experiment(&spec)).unwrap();
        let b = pool4.install(|| run_oc_experiment(&spec)).unwrap();
        assert_eq!(a.p_reject_stage1, b.p_reject_stage1);
        assert_eq!(a.p_reject_overall, b.p_reject_overall);
        assert_eq!(a.p_continue, b.p_continue);
    }

    #[test]
    fn csv_emission_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![PlotRow {
            gamma: 0.5,
            method: "sequential_analytic".into(),
            metric: "n_star".into(),
            value: 12.171,
        }];
        emit_csv(&rows, &path).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(
            reader.headers().unwrap().iter().collect::<Vec<_>>(),
            PlotRow::header()
        );
        let record = reader.records().next().unwrap().unwrap();
        assert_eq!(&record[0], "0.500000");
        assert_eq!(&record[3], "12.171000");

        let empty: Vec<PlotRow> = Vec::new();
        let path2 = dir.path().join("empty.csv");
        emit_csv(&empty, &path2).unwrap();
        let content = std::fs::read_to_string(&path2).unwrap();
        assert_eq!(content.lines().count(), 1);
    }
}
