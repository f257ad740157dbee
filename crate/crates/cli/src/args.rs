use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pathlab", version, about = "Cross-contract EVM control-flow and data-path analysis")]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file whose keys mirror the long flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the instruction listing.
    Disasm {
        /// Hex file, or hex text.
        input: String,
    },
    /// Build the control-flow graph of one contract.
    Cfg {
        input: String,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        /// End blocks at every call instruction as well.
        #[arg(long)]
        split_calls: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List dispatcher selectors and their entry blocks.
    Selectors { input: String },
    /// Splice the callee into the caller at matching call sites.
    Connect {
        #[arg(long)]
        caller: String,
        #[arg(long)]
        callee: String,
        /// Exchange the caller and callee roles.
        #[arg(long)]
        swap: bool,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate feasible data paths.
    Paths(PathsArgs),
    /// Build a dataset bundle from an event manifest.
    Features(FeaturesArgs),
    /// Classify the paths of a bundle with the external classifier.
    Detect(DetectArgs),
    /// Convert a CSV event list into a manifest.
    Manifest {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Json,
    Dot,
}

#[derive(Debug, Default, Clone, Args)]
pub struct LimitArgs {
    /// Paths kept per entry point.
    #[arg(long)]
    pub max_paths: Option<usize>,
    /// Tokens per path.
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// Visits of one block within one path.
    #[arg(long)]
    pub max_revisits: Option<usize>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct FeatureArgs {
    /// Co-occurrence window in tokens.
    #[arg(long)]
    pub window: Option<usize>,
    /// raw or sublinear term frequency.
    #[arg(long)]
    pub tfidf: Option<String>,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    /// Graph document written by `cfg` or `connect`.
    #[arg(long, conflicts_with_all = ["code", "caller"])]
    pub graph: Option<PathBuf>,
    /// A single contract.
    #[arg(long, conflicts_with = "caller")]
    pub code: Option<String>,
    #[arg(long, requires = "callee")]
    pub caller: Option<String>,
    #[arg(long, requires = "caller")]
    pub callee: Option<String>,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Also write one verdict record per candidate walk.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training fraction.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// none, parity, or a fraction of the largest class.
    #[arg(long)]
    pub oversample: Option<String>,
    /// Unlabelled corpus: write no split.
    #[arg(long)]
    pub predict: bool,
    /// Cache for fetched code.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// JSON-RPC endpoint; defaults to PATHLAB_RPC_URL.
    #[arg(long)]
    pub rpc: Option<String>,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Classifier command; defaults to PATHLAB_CLASSIFIER, then `pathlab-classifier`.
    #[arg(long)]
    pub classifier: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Where the classifier writes its verdicts; defaults to `<bundle>/verdicts.jsonl`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
