use std::path::PathBuf;

use causelab::discovery::{ScoreModel, SearchMode};
use causelab::estimation::Regressor;
use causelab::kernel_stats::{CiMethod, DEFAULT_PERMUTATIONS};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "causelab", version, about = "Causal models, discovery and effect estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether two node sets are d-separated given a third
    Dsep(DsepArgs),
    /// Enumerate valid adjustment sets for a treatment and outcome
    Adjust(AdjustArgs),
    /// Count labelled DAGs on n nodes
    CountDags(CountDagsArgs),
    /// Sample an SCM to CSV
    Simulate(SimulateArgs),
    /// Sample an SCM under hard interventions
    Intervene(IntervenArgs),
    /// Counterfactual distribution of a target given evidence
    Counterfactual(CounterfactualArgs),
    /// Generate a scenario dataset with its ground truth and generating model
    Generate(GenerateArgs),
    /// Learn causal structure from data
    Discover(DiscoverArgs),
    /// Estimate an average treatment effect
    Estimate(EstimateArgs),
    /// Conditional independence test between two columns
    TestCi(TestCiArgs),
    /// Kernel two-sample test between two datasets
    Mmd(MmdArgs),
    /// HSIC independence test between two column groups
    Hsic(HsicArgs),
    /// Evaluate the VC generalization bound
    VcBound(VcBoundArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file, written atomically; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DsepArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Comma-separated node names
    pub a: String,
    /// Comma-separated node names
    pub b: String,
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub treatment: String,
    #[arg(long)]
    pub outcome: String,
    /// Also report whether this set is valid
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub check: Option<Vec<String>>,
    #[arg(long, default_value_t = causelab::graph::DEFAULT_ADJUSTMENT_LIMIT)]
    pub limit: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CountDagsArgs {
    pub n: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct IntervenArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `VAR=VALUE`, repeatable
    #[arg(long = "set", required = true, value_parser = parse_assignment)]
    pub set: Vec<(String, f64)>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Report the Monte-Carlo mean of this variable instead of the samples
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Observed `VAR=VALUE`, repeatable
    #[arg(long, value_parser = parse_assignment)]
    pub evidence: Vec<(String, f64)>,
    /// Counterfactual `VAR=VALUE`, repeatable
    #[arg(long = "set", required = true, value_parser = parse_assignment)]
    pub set: Vec<(String, f64)>,
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub scenario: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// CSV path; `<stem>.truth.json` and `<stem>.model.json` are written beside it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiscoverMethod {
    Pc,
    Sgs,
    Score,
    Anm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiKind {
    PartialCorrelation,
    KernelResidual,
}

impl From<CiKind> for CiMethod {
    fn from(k: CiKind) -> Self {
        match k {
            CiKind::PartialCorrelation => CiMethod::PartialCorrelation,
            CiKind::KernelResidual => CiMethod::KernelResidual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreKind {
    Multinomial,
    LinearGaussian,
}

impl From<ScoreKind> for ScoreModel {
    fn from(k: ScoreKind) -> Self {
        match k {
            ScoreKind::Multinomial => ScoreModel::Multinomial,
            ScoreKind::LinearGaussian => ScoreModel::LinearGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchKind {
    Greedy,
    Exhaustive,
}

impl From<SearchKind> for SearchMode {
    fn from(k: SearchKind) -> Self {
        match k {
            SearchKind::Greedy => SearchMode::Greedy,
            SearchKind::Exhaustive => SearchMode::Exhaustive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegressorKind {
    Linear,
    KernelRidge,
}

impl From<RegressorKind> for Regressor {
    fn from(k: RegressorKind) -> Self {
        match k {
            RegressorKind::Linear => Regressor::Linear,
            RegressorKind::KernelRidge => Regressor::KernelRidge,
        }
    }
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: DiscoverMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perms: usize,
    /// Required for anm and kernel-residual tests
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "partial-correlation")]
    pub ci: CiKind,
    #[arg(long, default_value_t = 4)]
    pub max_cond: usize,
    /// Score family; inferred from column kinds when absent
    #[arg(long, value_enum)]
    pub score_model: Option<ScoreKind>,
    #[arg(long, value_enum, default_value = "greedy")]
    pub search: SearchKind,
    /// Candidate cause for anm; defaults to the first column
    #[arg(long)]
    pub cause: Option<String>,
    /// Candidate effect for anm; defaults to the second column
    #[arg(long)]
    pub effect: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateMethod {
    Rct,
    Regression,
    Matching,
    Stratified,
    Ipw,
    FrontDoor,
    #[value(name = "2sls")]
    Iv2sls,
    Rdd,
    HalfSibling,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: EstimateMethod,
    /// Outcome column
    #[arg(long)]
    pub y: String,
    /// Binary treatment column
    #[arg(long)]
    pub t: Option<String>,
    /// Comma-separated covariates
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,
    #[arg(long)]
    pub mediator: Option<String>,
    #[arg(long)]
    pub instrument: Option<String>,
    /// Running variable for rdd
    #[arg(long)]
    pub score: Option<String>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Half-width of the rdd window
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "linear")]
    pub regressor: RegressorKind,
    /// Stratify on this many propensity quantile bins instead of raw patterns
    #[arg(long)]
    pub bins: Option<usize>,
    /// Column holding known propensities for ipw
    #[arg(long)]
    pub propensity_column: Option<String>,
    #[arg(long, default_value_t = causelab::estimation::DEFAULT_CLIP)]
    pub clip: f64,
    /// Bootstrap replicates for the standard error; needs --seed
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sibling columns for half-sibling
    #[arg(long, value_delimiter = ',')]
    pub siblings: Vec<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TestCiArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,
    #[arg(long, value_enum, default_value = "partial-correlation")]
    pub method: CiKind,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perms: usize,
    /// Required for kernel-residual
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MmdArgs {
    #[arg(long)]
    pub first: PathBuf,
    #[arg(long)]
    pub second: PathBuf,
    /// Columns to compare; all columns of the first file when absent
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Gaussian bandwidth; median heuristic on the pooled sample when absent
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perms: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct HsicArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perms: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VcBoundArgs {
    #[arg(long)]
    pub r_emp: f64,
    #[arg(long)]
    pub h: u64,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub output: Output,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected VAR=VALUE, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("empty variable name in `{s}`"));
    }
    let v: f64 = value.trim().parse().map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.to_string(), v))
}
