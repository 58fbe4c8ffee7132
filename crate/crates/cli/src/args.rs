use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "rise",
    version,
    about = "Rank-based surrogate marker screening and evaluation"
)]
pub struct Cli {
    /// Settings file of `key = value` lines; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for full-precision output tables.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test one candidate against the response.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Candidate column; may be omitted when there is only one.
        #[arg(long)]
        candidate: Option<String>,
    },
    /// Screen every candidate on the whole dataset.
    Screen {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        #[arg(long, value_enum)]
        correction: Option<CorrectionArg>,
    },
    /// Evaluate a weighted combination of candidates on the whole dataset.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Table with `name` and `weight` columns.
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
    },
    /// Split, screen, combine and evaluate.
    Rise {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum)]
        correction: Option<CorrectionArg>,
        /// Screened candidates also evaluated on their own.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Run a simulation experiment and write long-format metric tables.
    Simulate(SimulateArgs),
    /// Response rank against combined-marker rank on the evaluation split.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        /// Use every subject instead of the evaluation split.
        #[arg(long)]
        whole: bool,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format table holding the response (and candidates unless
    /// --candidates is given).
    #[arg(long, value_name = "FILE")]
    pub response: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub candidates: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    #[arg(long, value_name = "NAME")]
    pub response_column: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub subject_column: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub group_column: Option<String>,
    #[arg(long)]
    pub treated_label: Option<String>,
    #[arg(long)]
    pub control_label: Option<String>,
    #[arg(long)]
    pub post_label: Option<String>,
    #[arg(long)]
    pub pre_label: Option<String>,
    /// Input delimiter; detected from the extension when omitted.
    #[arg(long, value_enum)]
    pub delimiter: Option<DelimiterArg>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target power for the adaptive margin.
    #[arg(long, conflicts_with = "epsilon")]
    pub power: Option<f64>,
    /// Fixed margin in place of the adaptive one.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Fraction of subjects used for screening.
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "screening")]
    pub experiment: ExperimentArg,
    #[arg(long, value_enum, default_value = "normal")]
    pub dgp: DgpArg,
    #[arg(long, value_enum, default_value = "none-valid")]
    pub scenario: ScenarioArg,
    /// Subjects per arm.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Number of candidates (screening experiment).
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    /// U_S of valid candidates.
    #[arg(long, default_value_t = 0.9)]
    pub u_s: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_corr: f64,
    #[arg(long, default_value_t = 1000)]
    pub n_sim: usize,
    #[arg(long, value_enum, default_value = "boundary")]
    pub margin: MarginArg,
    /// Corrections to score (screening experiment).
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "none,bonferroni,bh,by"
    )]
    pub corrections: Vec<CorrectionArg>,
    /// Size of the evaluated set (evaluation experiment).
    #[arg(long, default_value_t = 20)]
    pub set_size: usize,
    /// Invalid fractions of the evaluated set.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.6,1")]
    pub rho: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DesignArg {
    Unpaired,
    Paired,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Noninf,
    Tost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    None,
    Bonferroni,
    Bh,
    By,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DelimiterArg {
    Comma,
    Tab,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExperimentArg {
    Screening,
    Evaluation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DgpArg {
    Normal,
    Complex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    NoneValid,
    TenPctValid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MarginArg {
    /// ε = Û_Y − ½
    Boundary,
    /// The margin given by --epsilon or --power.
    Test,
}
