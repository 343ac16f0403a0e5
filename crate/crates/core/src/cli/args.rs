use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::Layer;

#[derive(Debug, Parser)]
#[command(name = "qk", version, about = "Train, evaluate and compare quantifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit methods on datasets and write one evaluation report per pair.
    Eval(RunArgs),
    /// Grid-search hyperparameters, then evaluate the selected model.
    Gridsearch(RunArgs),
    /// Summarize a directory of reports with significance marks.
    Table(TableArgs),
    /// Diagonal, error-by-shift and bias-box plots from reports.
    Plot(PlotArgs),
    /// Count APP samples, or find the grid resolution for a budget.
    Combinations(CombinationsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `synth:gaussian[:n=..:classes=..:separation=..:seed=..]` or a data file
    /// (.csv is dense, anything else sparse); repeatable.
    #[arg(long)]
    pub data: Vec<String>,
    /// Separate test file for a single --data file.
    #[arg(long)]
    pub test: Option<String>,
    /// Label column of dense files: index, header name or `last`.
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub header: bool,
    /// Sparse feature indices start at 0.
    #[arg(long)]
    pub zero_based: bool,
    /// Comma-separated method specs, e.g. `acc,ensemble(base=hdy,policy=ds)`.
    #[arg(long)]
    pub method: Vec<String>,
    #[arg(long)]
    pub learner_c: Option<String>,
    /// `none` or `balanced`.
    #[arg(long)]
    pub class_weight: Option<String>,
    /// `app` or `npp`.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub sample_size: Option<String>,
    #[arg(long, conflicts_with = "budget")]
    pub n_prevpoints: Option<String>,
    /// Largest number of APP samples; picks the densest grid that fits.
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long)]
    pub repeats: Option<String>,
    /// Comma-separated error measures.
    #[arg(long)]
    pub metrics: Option<String>,
    #[arg(long)]
    pub smoothing: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Worker threads (0 uses all cores).
    #[arg(long)]
    pub jobs: Option<String>,
    /// Cross-validation campaign with this many folds.
    #[arg(long)]
    pub folds: Option<String>,
    /// Validation split of the adjusted methods: a fraction or a fold count.
    #[arg(long)]
    pub val_split: Option<String>,
    /// Validation split used to score grid-search candidates.
    #[arg(long)]
    pub search_split: Option<String>,
    /// Error measure minimized by grid search.
    #[arg(long)]
    pub error: Option<String>,
    /// Keep the model fit during validation instead of refitting.
    #[arg(long)]
    pub no_refit: bool,
    /// `name=v1,v2,...`; several values trigger a grid search. Repeatable.
    #[arg(long)]
    pub param: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn layer(&self) -> Layer {
        let mut l = Layer::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                l.insert(k.to_string(), vec![v]);
            }
        };
        put("test", self.test.clone());
        put("label_column", self.label_column.clone());
        put("header", self.header.then(|| "true".into()));
        put("zero_based", self.zero_based.then(|| "true".into()));
        put("learner_c", self.learner_c.clone());
        put("class_weight", self.class_weight.clone());
        put("protocol", self.protocol.clone());
        put("sample_size", self.sample_size.clone());
        put("n_prevpoints", self.n_prevpoints.clone());
        put("budget", self.budget.clone());
        put("repeats", self.repeats.clone());
        put("metrics", self.metrics.clone());
        put("smoothing", self.smoothing.clone());
        put("seed", self.seed.clone());
        put("jobs", self.jobs.clone());
        put("folds", self.folds.clone());
        put("val_split", self.val_split.clone());
        put("search_split", self.search_split.clone());
        put("error", self.error.clone());
        put("refit", self.no_refit.then(|| "false".into()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        for (k, v) in [("data", &self.data), ("method", &self.method), ("param", &self.param)] {
            if !v.is_empty() {
                l.insert(k.into(), v.clone());
            }
        }
        l
    }
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Directory of `<dataset>__<method>.csv` reports.
    pub reports: PathBuf,
    #[arg(long, default_value = "mae")]
    pub metric: String,
    /// CSV output; defaults to `table.csv` inside the report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlotKind {
    Diagonal,
    Shift,
    Bias,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub kind: PlotKind,
    /// Comma-separated report files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Category whose prevalence is plotted.
    #[arg(long, default_value_t = 1)]
    pub target: usize,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Divergence between training and sample prevalence (shift plot).
    #[arg(long, default_value = "ae")]
    pub shift_measure: String,
    /// Error averaged per shift bin.
    #[arg(long, default_value = "ae")]
    pub error: String,
    /// Training prevalence override, `p0;p1;...`.
    #[arg(long)]
    pub training_prev: Option<String>,
}

#[derive(Debug, Args)]
pub struct CombinationsArgs {
    #[arg(long, conflicts_with = "budget", required_unless_present = "budget")]
    pub n_prevpoints: Option<usize>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}
