//! Synthetic case-control panel generation under multivariate-normal
//! marker models, the closed-form ROC for the equal-covariance case, and
//! CSV ingestion of real panels.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::{norm_cdf, norm_quantile};

/// Two-point mixture for the candidate marker's case mean: with
/// probability `gamma` the marker is null (mean `null_case_mean`),
/// otherwise useful (mean `useful_case_mean`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerMixture {
    pub gamma: f64,
    pub null_case_mean: f64,
    pub useful_case_mean: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Case means per marker; the last entry is the candidate marker.
    pub mu_case: DVector<f64>,
    pub cov_case: DMatrix<f64>,
    pub cov_control: DMatrix<f64>,
    pub n_cases: usize,
    pub n_controls: usize,
    pub mixture: Option<MarkerMixture>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn n_markers(&self) -> usize {
        self.mu_case.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mu_case.len();
        if d == 0 {
            return Err(Error::Config("at least one marker required".into()));
        }
        for (name, cov) in [("cov_case", &self.cov_case), ("cov_control", &self.cov_control)] {
            if cov.nrows() != d || cov.ncols() != d {
                return Err(Error::Config(format!("{name} must be {d}x{d}")));
            }
            if (cov - cov.transpose()).abs().max() > 1e-10 {
                return Err(Error::Config(format!("{name} must be symmetric")));
            }
            if Cholesky::new(cov.clone()).is_none() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        if let Some(m) = &self.mixture {
            if !(0.0..=1.0).contains(&m.gamma) {
                return Err(Error::Config(format!("mixture gamma {} not in [0,1]", m.gamma)));
            }
        }
        if self.n_cases < 2 || self.n_controls < 2 {
            return Err(Error::Config("need at least 2 cases and 2 controls".into()));
        }
        Ok(())
    }
}

/// A labeled marker matrix with the per-participant specimen ledger used
/// by the rotation engine. Rows are participants, columns are markers.
#[derive(Debug, Clone)]
pub struct CaseControlData {
    pub markers: DMatrix<f64>,
    pub labels: Vec<u8>,
    pub units_remaining: Vec<u32>,
    pub group_id: Vec<usize>,
    pub n_groups: usize,
}

impl CaseControlData {
    pub fn new(markers: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if markers.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} marker rows vs {} labels",
                markers.nrows(),
                labels.len()
            )));
        }
        let n = labels.len();
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        if n1 == 0 || n1 == n {
            return Err(Error::Config("need at least one case and one control".into()));
        }
        Ok(Self {
            markers,
            labels,
            units_remaining: vec![0; n],
            group_id: vec![0; n],
            n_groups: 1,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cases(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_controls(&self) -> usize {
        self.n() - self.n_cases()
    }

    pub fn n_markers(&self) -> usize {
        self.markers.ncols()
    }

    pub fn case_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == 1).collect()
    }

    pub fn control_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == 0).collect()
    }

    /// Marker sub-matrix and labels for the given rows and columns.
    pub fn subset(&self, rows: &[usize], cols: &[usize]) -> (DMatrix<f64>, Vec<u8>) {
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                m[(ri, ci)] = self.markers[(r, c)];
            }
        }
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        (m, labels)
    }

    pub fn set_units(&mut self, v: u32) {
        self.units_remaining.iter_mut().for_each(|u| *u = v);
    }

    /// Partition participants into `kappa` groups stratified by label,
    /// shuffling within stratum first. Group sizes per stratum differ by
    /// at most one.
    pub fn assign_groups<R: Rng>(&mut self, kappa: usize, rng: &mut R) -> Result<()> {
        if kappa < 1 {
            return Err(Error::Config("kappa must be >= 1".into()));
        }
        use rand::seq::SliceRandom;
        self.n_groups = kappa;
        for stratum in [1u8, 0u8] {
            let mut rows: Vec<usize> =
                (0..self.n()).filter(|&i| self.labels[i] == stratum).collect();
            rows.shuffle(rng);
            for (pos, &row) in rows.iter().enumerate() {
                self.group_id[row] = pos % kappa;
            }
        }
        Ok(())
    }

    pub fn group_rows(&self, group: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.group_id[i] == group).collect()
    }
}

fn sample_mvn<R: Rng>(
    mu: &DVector<f64>,
    chol: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let d = mu.len();
    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    mu + chol * z
}

/// Generates a synthetic panel: controls MVN(0, cov_control), cases
/// MVN(mu_case, cov_case). When a mixture is configured, the candidate
/// (last) marker's case mean is drawn once from the two-point mixture.
/// Deterministic given (config, rng_seed). Group assignment and the
/// specimen ledger are left at their defaults; see [`CaseControlData`].
pub fn generate_mvn_panel(config: &ScenarioConfig, rng_seed: u64) -> Result<CaseControlData> {
    config.validate()?;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);

    let mut mu = config.mu_case.clone();
    if let Some(mix) = &config.mixture {
        let last = mu.len() - 1;
        mu[last] = if rng.random::<f64>() < mix.gamma {
            mix.null_case_mean
        } else {
            mix.useful_case_mean
        };
    }

    let chol_case = Cholesky::new(config.cov_case.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let chol_control = Cholesky::new(config.cov_control.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .l();

    let d = config.n_markers();
    let n = config.n_cases + config.n_controls;
    let zero = DVector::zeros(d);
    let mut markers = DMatrix::zeros(n, d);
    let mut labels = vec![0u8; n];
    for i in 0..config.n_cases {
        let x = sample_mvn(&mu, &chol_case, &mut rng);
        markers.row_mut(i).copy_from(&x.transpose());
        labels[i] = 1;
    }
    for i in 0..config.n_controls {
        let x = sample_mvn(&zero, &chol_control, &mut rng);
        markers.row_mut(config.n_cases + i).copy_from(&x.transpose());
    }
    CaseControlData::new(markers, labels)
}

/// Closed-form ROC(t) = Phi(sqrt(mu' Sigma^-1 mu) + Phi^-1(t)) for the
/// equal-covariance MVN model with the oracle linear score.
pub fn closed_form_roc(mu: &DVector<f64>, cov: &DMatrix<f64>, t: f64) -> Result<f64> {
    if !(0.0 < t && t < 1.0) {
        return Err(Error::Domain(format!("t must be in (0,1), got {t}")));
    }
    let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
    let solved = chol.solve(mu);
    let quad = mu.dot(&solved);
    Ok(norm_cdf(quad.sqrt() + norm_quantile(t)))
}

/// Loads a panel from CSV. The label column must be binary {0,1}; when
/// `log_transform` is set every marker column is replaced by its natural
/// log (rejecting non-positive values with the offending row index).
pub fn load_csv(
    path: &Path,
    label_column: &str,
    marker_columns: &[String],
    log_transform: bool,
) -> Result<CaseControlData> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found")))
    };
    let label_idx = col_index(label_column)?;
    let marker_idx: Vec<usize> =
        marker_columns.iter().map(|c| col_index(c)).collect::<Result<_>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after header
        let record = record?;
        let label_raw = record
            .get(label_idx)
            .ok_or_else(|| Error::CsvRow { row, msg: "missing label".into() })?;
        let label: f64 = label_raw
            .trim()
            .parse()
            .map_err(|_| Error::CsvRow { row, msg: format!("non-numeric label '{label_raw}'") })?;
        if label != 0.0 && label != 1.0 {
            return Err(Error::CsvRow { row, msg: format!("non-binary label {label}") });
        }
        let mut values = Vec::with_capacity(marker_idx.len());
        for (&ci, name) in marker_idx.iter().zip(marker_columns) {
            let raw = record
                .get(ci)
                .ok_or_else(|| Error::CsvRow { row, msg: format!("missing value in '{name}'") })?;
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(Error::CsvRow { row, msg: format!("missing value in '{name}'") });
            }
            let mut v: f64 = raw.parse().map_err(|_| Error::CsvRow {
                row,
                msg: format!("non-numeric marker '{raw}' in '{name}'"),
            })?;
            if log_transform {
                if v <= 0.0 {
                    return Err(Error::CsvRow {
                        row,
                        msg: format!("non-positive value {v} in '{name}' under log transform"),
                    });
                }
                v = v.ln();
            }
            values.push(v);
        }
        rows.push(values);
        labels.push(label as u8);
    }
    if rows.is_empty() {
        return Err(Error::Config("empty CSV panel".into()));
    }
    let markers = DMatrix::from_fn(rows.len(), marker_idx.len(), |r, c| rows[r][c]);
    CaseControlData::new(markers, labels)
}

/// Writes a panel back to CSV (label column first, then markers).
pub fn write_csv(
    data: &CaseControlData,
    path: &Path,
    label_column: &str,
    marker_columns: &[String],
) -> Result<()> {
    if marker_columns.len() != data.n_markers() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} markers",
            marker_columns.len(),
            data.n_markers()
        )));
    }
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![label_column.to_string()];
    header.extend_from_slice(marker_columns);
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut record = vec![data.labels[i].to_string()];
        for j in 0..data.n_markers() {
            record.push(format!("{}", data.markers[(i, j)]));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
