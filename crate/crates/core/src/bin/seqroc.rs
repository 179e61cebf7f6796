//! Command-line interface: boundary solving, one-off two-stage tests on
//! CSV panels, operating-characteristic simulation, rotation simulation
//! and closed forms, and bootstrap analysis of real panels.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqroc::boundary::{self, solve_boundaries, solve_futility_truncated, BoundarySet};
use seqroc::config::ConfigFile;
use seqroc::harness::{
    self, emit_csv, fmt_num, run_bootstrap, run_oc_experiment, run_rotation_experiment,
    BootstrapSpec, CsvRow,
};
use seqroc::rotation::{expected_evaluated, expected_rejected, expected_true_validated};
use seqroc::scenario::load_csv;
use seqroc::seqtest::{self, Hypothesis, StageResult, TestConfig};
use seqroc::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpendingArg {
    Obf,
    Pocock,
}

impl From<SpendingArg> for boundary::Spending {
    fn from(v: SpendingArg) -> Self {
        match v {
            SpendingArg::Obf => boundary::Spending::Obf,
            SpendingArg::Pocock => boundary::Spending::Pocock,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StoppingArg {
    Both,
    Futility,
    Efficacy,
}

impl From<StoppingArg> for boundary::Stopping {
    fn from(v: StoppingArg) -> Self {
        match v {
            StoppingArg::Both => boundary::Stopping::Both,
            StoppingArg::Futility => boundary::Stopping::FutilityOnly,
            StoppingArg::Efficacy => boundary::Stopping::EfficacyOnly,
        }
    }
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = SpendingArg::Obf)]
    spending: SpendingArg,
    #[arg(long, value_enum, default_value_t = StoppingArg::Both)]
    stopping: StoppingArg,
    /// In futility-only mode, keep the symmetric-system b2 instead of
    /// re-solving it, leaving the level under-spent (sensitivity check).
    #[arg(long)]
    truncate_futility: bool,
}

#[derive(Debug, Args)]
struct PanelArgs {
    /// CSV panel: one row per participant.
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Marker column names, established first, candidates last.
    #[arg(long, value_delimiter = ',', required = true)]
    marker_columns: Vec<String>,
    /// Apply a natural-log transform to all marker columns.
    #[arg(long)]
    log_transform: bool,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Indices (into marker-columns) of the candidate marker(s).
    #[arg(long, value_delimiter = ',')]
    new_marker_columns: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    /// Incremental-value threshold; mutually exclusive with --roc0.
    #[arg(long, conflicts_with = "roc0")]
    delta0: Option<f64>,
    /// Single-panel ROC threshold.
    #[arg(long)]
    roc0: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = SpendingArg::Obf)]
    spending: SpendingArg,
    #[arg(long, value_enum, default_value_t = StoppingArg::Both)]
    stopping: StoppingArg,
    /// Seed for the random stratified stage-1 subsample.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated 0-based row indices of the stage-1 subsample
    /// (overrides the random selection).
    #[arg(long, value_delimiter = ',')]
    stage1_ids: Vec<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Indices (into marker-columns) of the established panel.
    #[arg(long, value_delimiter = ',', required = true)]
    established_columns: Vec<usize>,
    /// Indices of the candidate marker pool.
    #[arg(long, value_delimiter = ',', required = true)]
    candidate_columns: Vec<usize>,
    /// Candidate columns treated as truly useful for n_u^t*.
    #[arg(long, value_delimiter = ',')]
    useful_columns: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 50)]
    v: u32,
    #[arg(long, default_value_t = 2)]
    kappa: usize,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 0.01)]
    delta0: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = SpendingArg::Pocock)]
    spending: SpendingArg,
    #[arg(long, value_enum, default_value_t = StoppingArg::Both)]
    stopping: StoppingArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve two-stage alpha-spending boundaries; prints a one-row CSV.
    Boundaries(BoundaryArgs),
    /// Run one two-stage test on a CSV panel; prints stage rows as CSV.
    Test(TestArgs),
    /// Replicated operating-characteristic experiment from a TOML config.
    SimulateOc(ConfigArgs),
    /// Simulated rotation arms (sequential + default) from a TOML config.
    RotateSim {
        #[command(flatten)]
        common: ConfigArgs,
        /// Emit long-format (gamma, method, metric, value) plot rows.
        #[arg(long)]
        plot_data: bool,
    },
    /// Closed-form rotation operating characteristics.
    RotateAnalytic {
        /// Stage-1 stopping probability; estimated by simulation from
        /// --config when omitted.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        p_r: Option<f64>,
        #[arg(long)]
        p_r_star: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 10)]
        v: u32,
        #[arg(long, default_value_t = 2)]
        kappa: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Stratified bootstrap rotation analysis of a real CSV panel.
    Bootstrap(BootstrapArgs),
}

#[derive(Debug, Parser)]
#[command(name = "seqroc", version, about = "Two-stage sequential testing of incremental ROC(t) value with group-rotation specimen allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

struct BoundaryRow(BoundarySet);

impl CsvRow for BoundaryRow {
    fn header() -> Vec<&'static str> {
        vec![
            "a1", "b1", "b2", "alpha", "alpha1", "alpha2", "info_frac", "rho", "spending",
            "stopping", "delta1",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let b = &self.0;
        vec![
            fmt_num(b.a1),
            fmt_num(b.b1),
            fmt_num(b.b2),
            fmt_num(b.alpha),
            fmt_num(b.alpha1),
            fmt_num(b.alpha2),
            fmt_num(b.info_frac),
            fmt_num(b.rho),
            b.spending.to_string(),
            b.stopping.to_string(),
            fmt_num(b.delta1),
        ]
    }
}

struct StageRow(StageResult);

impl CsvRow for StageRow {
    fn header() -> Vec<&'static str> {
        vec![
            "stage",
            "z",
            "roc_full",
            "roc_restricted",
            "threshold_full",
            "sigma_delta",
            "decision",
            "units_consumed",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let r = &self.0;
        vec![
            r.stage.to_string(),
            fmt_num(r.z),
            fmt_num(r.roc_full.value),
            r.roc_restricted.map(|e| fmt_num(e.value)).unwrap_or_default(),
            fmt_num(r.roc_full.threshold),
            fmt_num(r.variance.sigma_delta),
            format!("{:?}", r.decision).to_lowercase(),
            r.units_consumed.to_string(),
        ]
    }
}

struct AnalyticRow {
    gamma: f64,
    v: u32,
    kappa: usize,
    p: f64,
    p_r: f64,
    p_r_star: f64,
    e_n_star: f64,
    e_n_u: f64,
    e_n_u_t: f64,
}

impl CsvRow for AnalyticRow {
    fn header() -> Vec<&'static str> {
        vec![
            "gamma", "v", "kappa", "p", "p_r", "p_r_star", "e_n_star", "e_n_u_star",
            "e_n_u_t_star",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_num(self.gamma),
            self.v.to_string(),
            self.kappa.to_string(),
            fmt_num(self.p),
            fmt_num(self.p_r),
            fmt_num(self.p_r_star),
            fmt_num(self.e_n_star),
            fmt_num(self.e_n_u),
            fmt_num(self.e_n_u_t),
        ]
    }
}

fn write_rows<T: CsvRow>(rows: &[T], output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => emit_csv(rows, path),
        None => {
            let mut writer = csv::Writer::from_writer(std::io::stdout());
            writer.write_record(T::header())?;
            for row in rows {
                writer.write_record(row.fields())?;
            }
            writer.flush()?;
            Ok(())
        }
    }
}

fn run_test(args: &TestArgs) -> Result<()> {
    let data = load_csv(
        &args.panel.panel,
        &args.panel.label_column,
        &args.panel.marker_columns,
        args.panel.log_transform,
    )?;
    let hypothesis = match (args.delta0, args.roc0) {
        (Some(delta0), None) => Hypothesis::Incremental { delta0 },
        (None, Some(roc0)) => Hypothesis::SinglePanel { roc0 },
        _ => return Err(Error::Config("set exactly one of --delta0 and --roc0".into())),
    };
    let config = TestConfig {
        t: args.t,
        lambda: args.lambda,
        boundaries: solve_boundaries(
            args.alpha,
            args.lambda,
            args.spending.into(),
            args.stopping.into(),
        )?,
        new_marker_columns: args.new_marker_columns.clone(),
        hypothesis,
    };
    let stage1_ids = if args.stage1_ids.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        seqtest::stratified_stage1_ids(&data, args.lambda, &mut rng)?
    } else {
        args.stage1_ids.clone()
    };
    let (first, second) = seqtest::run_two_stage(&data, &stage1_ids, &config)?;
    let mut rows = vec![StageRow(first)];
    if let Some(second) = second {
        rows.push(StageRow(second));
    }
    write_rows(&rows, args.output.as_ref())
}

fn run_analytic(
    p: Option<f64>,
    p_r: Option<f64>,
    p_r_star: Option<f64>,
    gamma: f64,
    v: u32,
    kappa: usize,
    config: Option<&PathBuf>,
    output: Option<&PathBuf>,
) -> Result<()> {
    let (p, p_r, p_r_star, gamma, v, kappa) = match (p, config) {
        (Some(p), _) => (p, p_r.unwrap_or(0.0), p_r_star.or(p_r).unwrap_or(0.0), gamma, v, kappa),
        (None, Some(path)) => {
            let file = ConfigFile::load(path)?;
            let spec = file.rotation_spec()?;
            let probs = seqroc::rotation::estimate_operating_probs(
                &spec.scenario,
                &spec.test,
                spec.oc_replicates,
                spec.master_seed,
            )?;
            (probs.p, probs.p_r, probs.p_r_star, probs.gamma, spec.v, spec.kappa)
        }
        (None, None) => {
            return Err(Error::Config("provide --p or --config".into()));
        }
    };
    let e_n = expected_evaluated(p, v, kappa)?;
    let row = AnalyticRow {
        gamma,
        v,
        kappa,
        p,
        p_r,
        p_r_star,
        e_n_star: e_n,
        e_n_u: expected_rejected(e_n, p_r),
        e_n_u_t: expected_true_validated(e_n, p_r_star, gamma),
    };
    write_rows(&[row], output)
}

fn run_bootstrap_cmd(args: &BootstrapArgs) -> Result<()> {
    let data = load_csv(
        &args.panel.panel,
        &args.panel.label_column,
        &args.panel.marker_columns,
        args.panel.log_transform,
    )?;
    let test = TestConfig {
        t: args.t,
        lambda: 1.0 / args.kappa as f64,
        boundaries: solve_boundaries(
            args.alpha,
            1.0 / args.kappa as f64,
            args.spending.into(),
            args.stopping.into(),
        )?,
        // within each per-marker panel the candidate is the last column
        new_marker_columns: vec![args.established_columns.len()],
        hypothesis: Hypothesis::Incremental { delta0: args.delta0 },
    };
    let spec = BootstrapSpec {
        replicates: args.replicates,
        v: args.v,
        kappa: args.kappa,
        test,
        fixed_alpha: args.alpha,
        established_columns: args.established_columns.clone(),
        candidate_columns: args.candidate_columns.clone(),
        useful_columns: args.useful_columns.clone(),
        master_seed: args.seed,
    };
    let rows = run_bootstrap(&data, &spec)?;
    write_rows(&rows, args.output.as_ref())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Boundaries(args) => {
            let set = if args.truncate_futility {
                if !matches!(args.stopping, StoppingArg::Futility) {
                    return Err(Error::Config(
                        "--truncate-futility requires --stopping futility".into(),
                    ));
                }
                solve_futility_truncated(args.alpha, args.lambda, args.spending.into())?
            } else {
                solve_boundaries(
                    args.alpha,
                    args.lambda,
                    args.spending.into(),
                    args.stopping.into(),
                )?
            };
            write_rows(&[BoundaryRow(set)], None)
        }
        Command::Test(args) => run_test(args),
        Command::SimulateOc(args) => {
            let file = ConfigFile::load(&args.config)?;
            let label = args
                .config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "experiment".into());
            let spec = file.experiment_spec(&label)?;
            let row = run_oc_experiment(&spec)?;
            write_rows(&[row], args.output.as_ref())
        }
        Command::RotateSim { common, plot_data } => {
            let file = ConfigFile::load(&common.config)?;
            let spec = file.rotation_spec()?;
            let rows = run_rotation_experiment(&spec)?;
            if *plot_data {
                let plot: Vec<harness::PlotRow> =
                    rows.iter().flat_map(|r| r.plot_rows()).collect();
                write_rows(&plot, common.output.as_ref())
            } else {
                write_rows(&rows, common.output.as_ref())
            }
        }
        Command::RotateAnalytic { p, p_r, p_r_star, gamma, v, kappa, config, output } => {
            run_analytic(*p, *p_r, *p_r_star, *gamma, *v, *kappa, config.as_ref(), output.as_ref())
        }
        Command::Bootstrap(args) => run_bootstrap_cmd(args),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
