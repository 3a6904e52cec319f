use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "chemkit", version, about = "Modular health-economic modelling toolkit")]
pub struct Cli {
    /// Worker threads for parallel steps
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Records plus dictionary, as read by most subcommands.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Records CSV
    #[arg(long)]
    pub data: PathBuf,
    /// Data dictionary CSV
    #[arg(long)]
    pub dict: PathBuf,
    /// Unique identifier column
    #[arg(long, default_value = "uid")]
    pub uid: String,
    /// Data collection round column
    #[arg(long)]
    pub round: Option<String>,
    /// Group column
    #[arg(long)]
    pub group: Option<String>,
    /// Cell text treated as missing
    #[arg(long, default_value = "NA")]
    pub missing: String,
}

#[derive(Debug, Args)]
pub struct RegistryArgs {
    /// Registry directory or http(s) URL; defaults to $READY_REGISTRY_URL
    #[arg(long)]
    pub registry: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// [verb: validate] Check records against a data dictionary
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// [verb: describe] Summary statistics and histogram data
    Describe {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        by_group: bool,
        #[arg(long)]
        by_round: bool,
    },
    /// [verb: transform] Generate a synthetic (toy) dataset
    Synth {
        #[command(flatten)]
        data: DataArgs,
        /// Rows to generate
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// [verb: score] Score instrument items into utilities
    Score {
        #[command(flatten)]
        data: DataArgs,
        /// Instrument definition JSON
        #[arg(long)]
        instrument: PathBuf,
        /// Skip weighted domain scores
        #[arg(long)]
        unweighted: bool,
    },
    /// [verb: evaluate] Fit and cross-validate mapping models, write a catalogue
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Instrument definition JSON; scores the data first
        #[arg(long)]
        instrument: Option<PathBuf>,
        /// Utility column (default total_utility)
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        predictors: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        /// Model families (default: all)
        #[arg(long, value_delimiter = ',')]
        families: Vec<String>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Keep only the best N models in the catalogue
        #[arg(long)]
        top: Option<usize>,
    },
    /// [verb: predict] Predict utilities from a catalogued model
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        catalogue: PathBuf,
        /// Model position in the catalogue (0 = best)
        #[arg(long, default_value_t = 0)]
        model: usize,
        /// Instrument JSON supplying the utility bounds
        #[arg(long)]
        instrument: Option<PathBuf>,
        /// Utility bounds as lo,hi
        #[arg(long, allow_hyphen_values = true)]
        bounds: Option<String>,
        /// Coefficient-to-column overrides, coef=column
        #[arg(long = "map", value_delimiter = ',')]
        map: Vec<String>,
    },
    /// [verb: transform] Convert paired utilities into QALYs
    Qalys {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        utility: String,
        /// Date or day-offset column
        #[arg(long, default_value = "date")]
        time: String,
        #[arg(long, default_value = "1")]
        start: String,
        #[arg(long, default_value = "2")]
        end: String,
    },
    /// [verb: report] Render a report template
    Report {
        /// Template file or shipped template name (catalogue, study_summary)
        #[arg(long, default_value = "catalogue")]
        template: String,
        #[arg(long)]
        catalogue: Option<PathBuf>,
        /// Descriptive summary JSON
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Extra context values, key=value
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// [verb: export] Run a replication manifest
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// [verb: search] Search a registry
    Search {
        query: String,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        include_deprecated: bool,
        #[command(flatten)]
        registry: RegistryArgs,
    },
    /// [verb: share] Publish an artifact to a local registry
    Publish {
        file: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        version: String,
        #[arg(long)]
        kind: String,
        #[arg(long, value_delimiter = ',')]
        keywords: Vec<String>,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long, default_value = "")]
        citation: String,
        /// Required for datasets: true or false
        #[arg(long)]
        confidential: Option<bool>,
        #[command(flatten)]
        registry: RegistryArgs,
    },
    /// [verb: ingest] Fetch an artifact from a registry
    Fetch {
        id: String,
        #[arg(long, default_value = "latest")]
        version: String,
        #[command(flatten)]
        registry: RegistryArgs,
    },
}
