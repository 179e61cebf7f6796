//! TOML configuration schema for the CLI, mapped onto the domain types.
//!
//! ```toml
//! [scenario]
//! mu_case = [1.0, 1.1]
//! cov_case = [[1.0, 0.2], [0.2, 1.0]]
//! cov_control = [[1.0, 0.1], [0.1, 1.0]]
//! n_cases = 200
//! n_controls = 200
//! seed = 1
//!
//! [scenario.mixture]        # optional
//! gamma = 0.5
//! null_case_mean = 1.1
//! useful_case_mean = 1.5
//!
//! [test]
//! t = 0.1
//! delta0 = 0.165            # or roc0 = 0.56 for a single-panel test
//! lambda = 0.5
//! alpha = 0.05
//! spending = "obf"          # obf | pocock
//! stopping = "both"         # both | futility_only | efficacy_only
//! new_marker_columns = [1]
//!
//! [experiment]
//! replicates = 2000
//! master_seed = 42
//!
//! [rotation]                # for rotate-sim / rotate-analytic
//! v = 10
//! kappa = 2
//! runs = 2000
//! oc_replicates = 5000
//! fixed_alpha = 0.05
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::boundary::{solve_boundaries, Spending, Stopping};
use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, RotationExperimentSpec};
use crate::scenario::{MarkerMixture, ScenarioConfig};
use crate::seqtest::{Hypothesis, TestConfig};

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioSection {
    pub mu_case: Vec<f64>,
    pub cov_case: Vec<Vec<f64>>,
    pub cov_control: Vec<Vec<f64>>,
    pub n_cases: usize,
    pub n_controls: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mixture: Option<MixtureSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct MixtureSection {
    pub gamma: f64,
    pub null_case_mean: f64,
    pub useful_case_mean: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TestSection {
    pub t: f64,
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub roc0: Option<f64>,
    pub lambda: f64,
    pub alpha: f64,
    pub spending: Spending,
    pub stopping: Stopping,
    #[serde(default)]
    pub new_marker_columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ExperimentSection {
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct RotationSection {
    pub v: u32,
    pub kappa: usize,
    pub runs: usize,
    pub oc_replicates: usize,
    #[serde(default = "default_fixed_alpha")]
    pub fixed_alpha: f64,
}

fn default_fixed_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConfigFile {
    pub scenario: Option<ScenarioSection>,
    pub test: Option<TestSection>,
    pub experiment: Option<ExperimentSection>,
    pub rotation: Option<RotationSection>,
}

fn matrix_from(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("{name} must be a square matrix")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl ScenarioSection {
    pub fn to_domain(&self) -> Result<ScenarioConfig> {
        let config = ScenarioConfig {
            mu_case: DVector::from_column_slice(&self.mu_case),
            cov_case: matrix_from(&self.cov_case, "cov_case")?,
            cov_control: matrix_from(&self.cov_control, "cov_control")?,
            n_cases: self.n_cases,
            n_controls: self.n_controls,
            mixture: self.mixture.map(|m| MarkerMixture {
                gamma: m.gamma,
                null_case_mean: m.null_case_mean,
                useful_case_mean: m.useful_case_mean,
            }),
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

impl TestSection {
    pub fn to_domain(&self) -> Result<TestConfig> {
        let hypothesis = match (self.delta0, self.roc0) {
            (Some(delta0), None) => Hypothesis::Incremental { delta0 },
            (None, Some(roc0)) => Hypothesis::SinglePanel { roc0 },
            _ => {
                return Err(Error::Config(
                    "exactly one of test.delta0 and test.roc0 must be set".into(),
                ))
            }
        };
        let boundaries = solve_boundaries(self.alpha, self.lambda, self.spending, self.stopping)?;
        Ok(TestConfig {
            t: self.t,
            lambda: self.lambda,
            boundaries,
            new_marker_columns: self.new_marker_columns.clone(),
            hypothesis,
        })
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn require_scenario(&self) -> Result<&ScenarioSection> {
        self.scenario.as_ref().ok_or_else(|| Error::Config("[scenario] section missing".into()))
    }

    fn require_test(&self) -> Result<&TestSection> {
        self.test.as_ref().ok_or_else(|| Error::Config("[test] section missing".into()))
    }

    fn require_experiment(&self) -> Result<&ExperimentSection> {
        self.experiment
            .as_ref()
            .ok_or_else(|| Error::Config("[experiment] section missing".into()))
    }

    fn require_rotation(&self) -> Result<&RotationSection> {
        self.rotation.as_ref().ok_or_else(|| Error::Config("[rotation] section missing".into()))
    }

    pub fn experiment_spec(&self, label: &str) -> Result<ExperimentSpec> {
        let experiment = self.require_experiment()?;
        let spec = ExperimentSpec {
            scenario: self.require_scenario()?.to_domain()?,
            test: self.require_test()?.to_domain()?,
            replicates: experiment.replicates,
            master_seed: experiment.master_seed,
            label: label.to_string(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rotation_spec(&self) -> Result<RotationExperimentSpec> {
        let rotation = self.require_rotation()?;
        let experiment = self.require_experiment()?;
        Ok(RotationExperimentSpec {
            scenario: self.require_scenario()?.to_domain()?,
            test: self.require_test()?.to_domain()?,
            v: rotation.v,
            kappa: rotation.kappa,
            runs: rotation.runs,
            oc_replicates: rotation.oc_replicates,
            master_seed: experiment.master_seed,
            fixed_alpha: rotation.fixed_alpha,
        })
    }
}
