//! Group-rotation specimen allocation: a discrete-event simulator of the
//! rotating stage-1 group policy over a per-participant unit ledger, the
//! closed-form operating characteristics E(n*), E(n_u*), E(n_u^t*), and
//! Monte Carlo estimation of the stopping/rejection probabilities that
//! feed them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::scenario::{generate_mvn_panel, CaseControlData, ScenarioConfig};
use crate::seqtest::{self, Decision, StageResult, TestConfig};

#[derive(Debug, Clone)]
pub struct RotationConfig {
    /// Specimen units per participant available for candidate markers.
    pub v: u32,
    /// Number of rotation groups (1/lambda).
    pub kappa: usize,
    pub seed: u64,
}

impl RotationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v < 1 {
            return Err(Error::Config("V must be >= 1".into()));
        }
        if self.kappa < 2 {
            return Err(Error::Config("kappa must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage1Outcome {
    Stop { reject: bool },
    Continue,
    NotEvaluable,
}

/// A source of test decisions for the rotation engine. One instance
/// serves a whole run; `marker` indexes the candidate marker stream.
pub trait MarkerTester {
    /// Stage-1 decision on the given participant rows.
    fn stage_one(
        &mut self,
        marker: usize,
        stage1_rows: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Stage1Outcome;

    /// Final decision when every participant was measured (full stage 2).
    /// None when the test is not evaluable.
    fn stage_two(&mut self, marker: usize, all_rows: &[usize]) -> Option<bool>;

    /// Fixed-sample test on a partially measured cohort; None when this
    /// tester has no fixed-sample analog (or the cohort is too small).
    fn fixed_sample(
        &mut self,
        marker: usize,
        measured_rows: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<bool>;

    /// Whether the marker drawn at this index was truly useful.
    fn is_useful(&self, marker: usize) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerDecision {
    StopReject,
    StopAccept,
    FinalReject,
    FinalAccept,
    FixedReject,
    FixedAccept,
    NotEvaluable,
}

impl MarkerDecision {
    pub fn is_rejection(self) -> bool {
        matches!(self, Self::StopReject | Self::FinalReject | Self::FixedReject)
    }

    pub fn is_fixed(self) -> bool {
        matches!(self, Self::FixedReject | Self::FixedAccept)
    }

    pub fn is_decision(self) -> bool {
        self != Self::NotEvaluable
    }
}

#[derive(Debug, Clone)]
pub struct MarkerRecord {
    pub marker: usize,
    pub stage1_group: usize,
    pub decision: MarkerDecision,
    pub units_consumed_per_group: Vec<u32>,
    pub useful: bool,
}

#[derive(Debug, Clone)]
pub struct RotationOutcome {
    /// Markers that received a decision (sequential or fixed-sample).
    pub n_star: u32,
    /// Markers with the null rejected.
    pub n_u_star: u32,
    /// Truly useful markers with the null rejected.
    pub n_u_t_star: u32,
    /// Decisions reached by a fixed-sample tail test.
    pub fixed_sample_tests: u32,
    /// Markers skipped because no test was evaluable.
    pub not_evaluable: u32,
    pub ledger_history: Vec<MarkerRecord>,
}

impl RotationOutcome {
    /// Markers decided by the two-stage sequential rule only.
    pub fn n_star_sequential(&self) -> u32 {
        self.n_star - self.fixed_sample_tests
    }
}

/// Runs the rotation policy over the participant ledger: while any group
/// has units left, the stage-1 group is drawn uniformly among the groups
/// with the most units remaining; a continue decision consumes one unit
/// from every other participant that still has units, completing either
/// a full stage 2 (all others covered) or a fixed-sample test on the
/// partially measured cohort.
pub fn simulate_rotation<T: MarkerTester>(
    data: &mut CaseControlData,
    config: &RotationConfig,
    tester: &mut T,
    rng: &mut ChaCha8Rng,
) -> Result<RotationOutcome> {
    config.validate()?;
    if data.n_groups != config.kappa {
        data.assign_groups(config.kappa, rng)?;
    }
    data.set_units(config.v);
    let kappa = config.kappa;
    let group_rows: Vec<Vec<usize>> = (0..kappa).map(|g| data.group_rows(g)).collect();
    // all members of a group always hold the same number of units
    let mut group_units = vec![config.v; kappa];

    let mut outcome = RotationOutcome {
        n_star: 0,
        n_u_star: 0,
        n_u_t_star: 0,
        fixed_sample_tests: 0,
        not_evaluable: 0,
        ledger_history: Vec::new(),
    };

    let consume = |data: &mut CaseControlData, g: usize, units: &mut Vec<u32>| {
        units[g] -= 1;
        for &r in &group_rows[g] {
            data.units_remaining[r] -= 1;
        }
    };

    let mut marker = 0usize;
    loop {
        let max_u = *group_units.iter().max().unwrap();
        if max_u == 0 {
            break;
        }
        let candidates: Vec<usize> =
            (0..kappa).filter(|&g| group_units[g] == max_u).collect();
        let g = candidates[rng.random_range(0..candidates.len())];
        let mut consumed = vec![0u32; kappa];
        consume(data, g, &mut group_units);
        consumed[g] += 1;

        let stage1 = tester.stage_one(marker, &group_rows[g], rng);
        let decision = match stage1 {
            Stage1Outcome::Stop { reject } => {
                if reject {
                    MarkerDecision::StopReject
                } else {
                    MarkerDecision::StopAccept
                }
            }
            Stage1Outcome::NotEvaluable => MarkerDecision::NotEvaluable,
            Stage1Outcome::Continue => {
                let others: Vec<usize> =
                    (0..kappa).filter(|&o| o != g && group_units[o] > 0).collect();
                let full_coverage = others.len() == kappa - 1;
                let mut measured: Vec<usize> = group_rows[g].clone();
                for &o in &others {
                    consume(data, o, &mut group_units);
                    consumed[o] += 1;
                    measured.extend_from_slice(&group_rows[o]);
                }
                measured.sort_unstable();
                if full_coverage {
                    match tester.stage_two(marker, &measured) {
                        Some(true) => MarkerDecision::FinalReject,
                        Some(false) => MarkerDecision::FinalAccept,
                        None => MarkerDecision::NotEvaluable,
                    }
                } else {
                    match tester.fixed_sample(marker, &measured, rng) {
                        Some(true) => MarkerDecision::FixedReject,
                        Some(false) => MarkerDecision::FixedAccept,
                        None => MarkerDecision::NotEvaluable,
                    }
                }
            }
        };

        let useful = tester.is_useful(marker);
        if decision.is_decision() {
            outcome.n_star += 1;
            if decision.is_fixed() {
                outcome.fixed_sample_tests += 1;
            }
            if decision.is_rejection() {
                outcome.n_u_star += 1;
                if useful {
                    outcome.n_u_t_star += 1;
                }
            }
        } else {
            outcome.not_evaluable += 1;
        }
        outcome.ledger_history.push(MarkerRecord {
            marker,
            stage1_group: g,
            decision,
            units_consumed_per_group: consumed,
            useful,
        });
        marker += 1;
    }
    Ok(outcome)
}

/// Coin-flip tester for validating the engine against the closed-form
/// E(n*): stage-1 stopping with probability p_stop, no fixed-sample
/// analog, so every counted marker is a sequential decision.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliTester {
    pub p_stop: f64,
    pub p_reject_given_stop: f64,
    pub p_reject_final: f64,
}

impl MarkerTester for BernoulliTester {
    fn stage_one(&mut self, _marker: usize, _rows: &[usize], rng: &mut ChaCha8Rng) -> Stage1Outcome {
        if rng.random::<f64>() < self.p_stop {
            Stage1Outcome::Stop { reject: rng.random::<f64>() < self.p_reject_given_stop }
        } else {
            Stage1Outcome::Continue
        }
    }

    fn stage_two(&mut self, _marker: usize, _rows: &[usize]) -> Option<bool> {
        Some(self.p_reject_final >= 1.0)
    }

    fn fixed_sample(&mut self, _m: usize, _rows: &[usize], _rng: &mut ChaCha8Rng) -> Option<bool> {
        None
    }

    fn is_useful(&self, _marker: usize) -> bool {
        false
    }
}

/// Data-driven tester: draws each candidate marker from the gamma
/// mixture, generates a fresh panel, and runs the two-stage (or tail
/// fixed-sample) incremental-value test.
pub struct PanelTester {
    pub scenario: ScenarioConfig,
    pub test_config: TestConfig,
    /// One-sided level of the tail fixed-sample tests.
    pub fixed_alpha: f64,
    useful: Vec<bool>,
    panels: std::collections::HashMap<usize, CaseControlData>,
    stage1_results: std::collections::HashMap<usize, StageResult>,
}

impl PanelTester {
    pub fn new(scenario: ScenarioConfig, test_config: TestConfig, fixed_alpha: f64) -> Self {
        Self {
            scenario,
            test_config,
            fixed_alpha,
            useful: Vec::new(),
            panels: std::collections::HashMap::new(),
            stage1_results: std::collections::HashMap::new(),
        }
    }

    fn draw_panel(&mut self, marker: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut config = self.scenario.clone();
        let useful = match config.mixture.take() {
            Some(mix) => {
                let is_null = rng.random::<f64>() < mix.gamma;
                let last = config.mu_case.len() - 1;
                config.mu_case[last] =
                    if is_null { mix.null_case_mean } else { mix.useful_case_mean };
                !is_null
            }
            None => true,
        };
        while self.useful.len() <= marker {
            self.useful.push(false);
        }
        self.useful[marker] = useful;
        let panel_seed: u64 = rng.random();
        let panel = generate_mvn_panel(&config, panel_seed)?;
        self.panels.insert(marker, panel);
        Ok(())
    }

    /// Draws the next marker and runs one fixed-sample test on the given
    /// rows; used by the non-sequential default arm.
    pub fn fixed_for_default(
        &mut self,
        marker: usize,
        rows: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<bool> {
        self.draw_panel(marker, rng).ok()?;
        let panel = self.panels.get(&marker)?;
        seqtest::fixed_sample_test(panel, rows, &self.test_config, self.fixed_alpha).ok()
    }
}

impl MarkerTester for PanelTester {
    fn stage_one(&mut self, marker: usize, stage1_rows: &[usize], rng: &mut ChaCha8Rng) -> Stage1Outcome {
        if self.draw_panel(marker, rng).is_err() {
            return Stage1Outcome::NotEvaluable;
        }
        let panel = &self.panels[&marker];
        match seqtest::stage1(panel, stage1_rows, &self.test_config) {
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

    fn stage_two(&mut self, marker: usize, _all_rows: &[usize]) -> Option<bool> {
        let panel = self.panels.get(&marker)?;
        let first = self.stage1_results.get(&marker)?;
        match seqtest::stage2(panel, &self.test_config, first) {
            Ok(result) => Some(result.decision == Decision::RejectFinal),
            Err(_) => None,
        }
    }

    fn fixed_sample(&mut self, marker: usize, rows: &[usize], _rng: &mut ChaCha8Rng) -> Option<bool> {
        let panel = self.panels.get(&marker)?;
        seqtest::fixed_sample_test(panel, rows, &self.test_config, self.fixed_alpha).ok()
    }

    fn is_useful(&self, marker: usize) -> bool {
        self.useful.get(marker).copied().unwrap_or(false)
    }
}

fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

fn pow_or_unit(base: f64, exp: f64) -> f64 {
    // 0^0 = 1 by the combinatorial convention of the formula
    if exp == 0.0 {
        1.0
    } else {
        base.powf(exp)
    }
}

/// Closed-form expected number of markers evaluated by the rotation
/// policy with per-participant volume V, kappa groups, and stage-1
/// stopping probability p.
pub fn expected_evaluated(p: f64, v: u32, kappa: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p must be in [0,1], got {p}")));
    }
    if v < 1 || kappa < 2 {
        return Err(Error::Domain("need V >= 1 and kappa >= 2".into()));
    }
    let vf = f64::from(v);
    let kf = kappa as f64;

    let mut sum = 0.0;
    let mut comp = 0.0; // Kahan compensation
    let add = |term: f64, sum: &mut f64, comp: &mut f64| {
        let y = term - *comp;
        let t = *sum + y;
        *comp = (t - *sum) - y;
        *sum = t;
    };

    for i in 0..=v {
        let fi = f64::from(i);
        let coeff = (kf - 1.0) * fi;
        if coeff == 0.0 {
            continue;
        }
        let log_c = ln_choose(vf + (kf - 1.0) * fi, kf * fi);
        let term = coeff
            * log_c.exp()
            * pow_or_unit(p, kf * fi)
            * pow_or_unit(1.0 - p, vf - fi);
        add(term, &mut sum, &mut comp);
    }
    for i in 0..v {
        let fi = f64::from(i);
        for j in 0..=(kappa - 2) {
            let fj = j as f64;
            let coeff = (kf - 1.0) * fi + fj;
            if coeff == 0.0 {
                continue;
            }
            let log_c = ln_choose(vf + (kf - 1.0) * fi + fj, kf * fi + fj + 1.0);
            let term = coeff
                * log_c.exp()
                * pow_or_unit(p, kf * fi + fj + 1.0)
                * pow_or_unit(1.0 - p, vf - fi);
            add(term, &mut sum, &mut comp);
        }
    }
    Ok(vf + sum)
}

/// E(n_u*) = E(n*) p_r.
pub fn expected_rejected(e_n_star: f64, p_r: f64) -> f64 {
    e_n_star * p_r
}

/// E(n_u^t*) = E(n*) p_r* (1 - gamma).
pub fn expected_true_validated(e_n_star: f64, p_r_star: f64, gamma: f64) -> f64 {
    e_n_star * p_r_star * (1.0 - gamma)
}

#[derive(Debug, Clone, Copy)]
pub struct OperatingProbs {
    /// Stage-1 stopping probability under the gamma-mixture marker law.
    pub p: f64,
    /// Overall rejection probability under the mixture law.
    pub p_r: f64,
    /// Rejection probability under the pure useful-marker law.
    pub p_r_star: f64,
    pub gamma: f64,
    pub se_p: f64,
    pub se_p_r: f64,
    pub se_p_r_star: f64,
    /// Replicates dropped for fit failures.
    pub excluded: u32,
}

#[derive(Clone, Copy, Default)]
struct LawTally {
    n: u32,
    stopped: u32,
    rejected: u32,
    excluded: u32,
}

fn run_law(
    scenario: &ScenarioConfig,
    test_config: &TestConfig,
    candidate_mean: Option<f64>,
    replicates: usize,
    master_seed: u64,
    stream_offset: u64,
) -> LawTally {
    let results: Vec<Option<(bool, bool)>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut config = scenario.clone();
            config.mixture = None;
            if let Some(mean) = candidate_mean {
                let last = config.mu_case.len() - 1;
                config.mu_case[last] = mean;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(stream_offset + rep as u64);
            let panel_seed: u64 = rng.random();
            let data = match generate_mvn_panel(&config, panel_seed) {
                Ok(d) => d,
                Err(_) => return None,
            };
            let ids = match seqtest::stratified_stage1_ids(&data, test_config.lambda, &mut rng) {
                Ok(ids) => ids,
                Err(_) => return None,
            };
            match seqtest::run_two_stage(&data, &ids, test_config) {
                Ok((first, second)) => {
                    let stopped = first.decision.is_terminal();
                    let rejected = first.decision.is_rejection()
                        || second.map(|s| s.decision.is_rejection()).unwrap_or(false);
                    Some((stopped, rejected))
                }
                Err(_) => None,
            }
        })
        .collect();

    let mut tally = LawTally::default();
    for r in results {
        match r {
            Some((stopped, rejected)) => {
                tally.n += 1;
                tally.stopped += u32::from(stopped);
                tally.rejected += u32::from(rejected);
            }
            None => tally.excluded += 1,
        }
    }
    tally
}

/// Monte Carlo estimates of the stopping probability p, the mixture
/// rejection probability p_r, and the useful-marker rejection
/// probability p_r*, from independent replicates under the null and
/// useful candidate-marker laws.
pub fn estimate_operating_probs(
    scenario: &ScenarioConfig,
    test_config: &TestConfig,
    replicates: usize,
    master_seed: u64,
) -> Result<OperatingProbs> {
    if replicates < 100 {
        return Err(Error::Config("need at least 100 replicates".into()));
    }
    scenario.validate()?;
    test_config.validate(scenario.n_markers())?;

    let (gamma, null_mean, useful_mean) = match &scenario.mixture {
        Some(m) => (m.gamma, Some(m.null_case_mean), Some(m.useful_case_mean)),
        None => (0.0, None, None),
    };

    let alt = run_law(scenario, test_config, useful_mean, replicates, master_seed, 1);
    let (p_alt, pr_alt, n_alt) = (
        f64::from(alt.stopped) / f64::from(alt.n),
        f64::from(alt.rejected) / f64::from(alt.n),
        f64::from(alt.n),
    );

    let (p, p_r, se_p, se_p_r, excluded) = if gamma > 0.0 {
        let null = run_law(
            scenario,
            test_config,
            null_mean,
            replicates,
            master_seed,
            1 + replicates as u64,
        );
        let (p_null, pr_null, n_null) = (
            f64::from(null.stopped) / f64::from(null.n),
            f64::from(null.rejected) / f64::from(null.n),
            f64::from(null.n),
        );
        let p = gamma * p_null + (1.0 - gamma) * p_alt;
        let p_r = gamma * pr_null + (1.0 - gamma) * pr_alt;
        let var = |g: f64, a: f64, b: f64, na: f64, nb: f64| {
            (g * g * a * (1.0 - a) / na + (1.0 - g) * (1.0 - g) * b * (1.0 - b) / nb).sqrt()
        };
        (
            p,
            p_r,
            var(gamma, p_null, p_alt, n_null, n_alt),
            var(gamma, pr_null, pr_alt, n_null, n_alt),
            alt.excluded + null.excluded,
        )
    } else {
        (
            p_alt,
            pr_alt,
            (p_alt * (1.0 - p_alt) / n_alt).sqrt(),
            (pr_alt * (1.0 - pr_alt) / n_alt).sqrt(),
            alt.excluded,
        )
    };

    Ok(OperatingProbs {
        p,
        p_r,
        p_r_star: pr_alt,
        gamma,
        se_p,
        se_p_r,
        se_p_r_star: (pr_alt * (1.0 - pr_alt) / n_alt).sqrt(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn bare_data(n_per_arm: usize) -> CaseControlData {
        let n = 2 * n_per_arm;
        let markers = DMatrix::from_fn(n, 1, |r, _| r as f64 * 0.01);
        let labels: Vec<u8> =
            (0..n).map(|i| u8::from(i < n_per_arm)).collect();
        CaseControlData::new(markers, labels).unwrap()
    }

    #[test]
    fn formula_endpoints() {
        for &(v, kappa) in &[(5u32, 2usize), (10, 2), (10, 3)] {
            assert_abs_diff_eq!(expected_evaluated(0.0, v, kappa).unwrap(), f64::from(v), epsilon = 1e-10);
            assert_abs_diff_eq!(
                expected_evaluated(1.0, v, kappa).unwrap(),
                kappa as f64 * f64::from(v),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn formula_small_case_by_hand() {
        // V=1, kappa=2 reduces to 1 + p^2; V=1, kappa=3 to 1 + p^2 + p^3
        for p in [0.0, 0.3, 0.7, 1.0] {
            assert_abs_diff_eq!(expected_evaluated(p, 1, 2).unwrap(), 1.0 + p * p, epsilon = 1e-12);
            assert_abs_diff_eq!(
                expected_evaluated(p, 1, 3).unwrap(),
                1.0 + p * p + p * p * p,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn forced_stopping_consumes_every_unit_as_stage_one() {
        // p_stop = 1: every unit funds one stage-1-only test: n* = kappa V
        let config = RotationConfig { v: 4, kappa: 3, seed: 0 };
        let mut data = bare_data(60);
        let mut tester = BernoulliTester { p_stop: 1.0, p_reject_given_stop: 0.5, p_reject_final: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = simulate_rotation(&mut data, &config, &mut tester, &mut rng).unwrap();
        assert_eq!(out.n_star, 12);
        assert_eq!(out.fixed_sample_tests, 0);
        assert!(data.units_remaining.iter().all(|&u| u == 0));
    }

    #[test]
    fn never_stopping_runs_v_full_tests() {
        let config = RotationConfig { v: 7, kappa: 2, seed: 0 };
        let mut data = bare_data(40);
        let mut tester = BernoulliTester { p_stop: 0.0, p_reject_given_stop: 0.5, p_reject_final: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let out = simulate_rotation(&mut data, &config, &mut tester, &mut rng).unwrap();
        assert_eq!(out.n_star, 7);
        assert_eq!(out.n_u_star, 7);
        assert_eq!(out.fixed_sample_tests, 0);
    }

    #[test]
    fn ledger_conservation_and_stage1_integrity() {
        let config = RotationConfig { v: 6, kappa: 3, seed: 0 };
        let mut data = bare_data(90);
        let mut tester = BernoulliTester { p_stop: 0.4, p_reject_given_stop: 0.5, p_reject_final: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = simulate_rotation(&mut data, &config, &mut tester, &mut rng).unwrap();

        let group_size = data.group_rows(0).len() as u32;
        let consumed_units: u32 = out
            .ledger_history
            .iter()
            .map(|r| r.units_consumed_per_group.iter().sum::<u32>() * group_size)
            .sum();
        let remaining: u32 = data.units_remaining.iter().sum();
        assert_eq!(consumed_units + remaining, 6 * data.n() as u32);
        for record in &out.ledger_history {
            assert_eq!(record.units_consumed_per_group[record.stage1_group], 1);
        }
    }

    #[test]
    fn bernoulli_mean_matches_formula() {
        let (v, kappa, p) = (5u32, 2usize, 0.5);
        let runs = 4000;
        let mut total = 0u64;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..runs {
            let config = RotationConfig { v, kappa, seed: 0 };
            let mut data = bare_data(40);
            let mut tester =
                BernoulliTester { p_stop: p, p_reject_given_stop: 0.5, p_reject_final: 0.0 };
            let out = simulate_rotation(&mut data, &config, &mut tester, &mut rng).unwrap();
            assert_eq!(out.fixed_sample_tests, 0);
            total += u64::from(out.n_star_sequential());
        }
        let mean = total as f64 / runs as f64;
        let expected = expected_evaluated(p, v, kappa).unwrap();
        // n* is bounded by kappa V = 10; generous SE bound
        let se = 3.0 / (runs as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected}");
    }

    #[test]
    fn result_2_and_3_products() {
        assert_eq!(expected_rejected(14.99, 0.0), 0.0);
        assert_eq!(expected_rejected(14.99, 1.0), 14.99);
        assert_eq!(expected_true_validated(12.0, 0.5, 1.0), 0.0);
        assert_abs_diff_eq!(expected_true_validated(12.0, 0.5, 0.0), 6.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let run = || {
            let config = RotationConfig { v: 5, kappa: 2, seed: 0 };
            let mut data = bare_data(50);
            let mut tester =
                BernoulliTester { p_stop: 0.4, p_reject_given_stop: 0.6, p_reject_final: 0.5 };
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            simulate_rotation(&mut data, &config, &mut tester, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.n_star, b.n_star);
        assert_eq!(a.n_u_star, b.n_u_star);
        assert_eq!(a.ledger_history.len(), b.ledger_history.len());
        for (x, y) in a.ledger_history.iter().zip(&b.ledger_history) {
            assert_eq!(x.stage1_group, y.stage1_group);
            assert_eq!(x.decision, y.decision);
        }
    }
}
