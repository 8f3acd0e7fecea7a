//! Pipeline stages behind the `sceneqa` command.
//!
//! Every stage reads and writes plain files: canonical scenes as one JSON
//! document per line, graphs as one export per scene, and the QA corpus as
//! JSON lines. Stages can be rerun independently.

pub mod stages;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_SHORTFALL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sceneqa",
    version,
    about = "Build scene graphs and spatial QA corpora from canonical driving scenes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic fixture pool as raw scene documents plus stub classifier tables.
    Synth(SynthArgs),
    /// Validate scene documents and collect them into one canonical file.
    Ingest(IngestArgs),
    /// Rotate scenes into the common ego frame.
    Calibrate(CalibrateArgs),
    /// Fill missing weather, time of day and scene type.
    CompleteMetadata(CompleteArgs),
    /// Build one scene graph export per scene.
    BuildGraph(GraphArgs),
    /// Render BEV maps, or every asset referenced by a corpus.
    Render(RenderArgs),
    /// Generate the QA corpus.
    GenerateQa(GenerateArgs),
    /// Score prediction files against a corpus.
    Score(ScoreArgs),
    /// Agreement between two responders.
    Kappa(KappaArgs),
    /// Run the review service.
    Serve(ServeArgs),
    /// Write the reviewed corpus and QC statistics without starting the service.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Worker threads for per-scene stages; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Scene document, JSON-lines file, or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rotation in radians, or `auto` to pick it from each scene's source.
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Stub classifier tables as written by `synth`.
    #[arg(long, conflicts_with_all = ["similarity_endpoint", "map_endpoint"])]
    pub stub_tables: Option<PathBuf>,
    #[arg(long, requires = "map_endpoint")]
    pub similarity_endpoint: Option<String>,
    #[arg(long, requires = "similarity_endpoint")]
    pub map_endpoint: Option<String>,
    /// Where BEV maps for the map-label client are written.
    #[arg(long, default_value = "bev")]
    pub bev_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; one `<scene_id>.json` per scene.
    #[arg(long)]
    pub out: PathBuf,
    /// Threshold file (JSON or TOML); missing fields keep their defaults.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Render the assets this corpus references instead of plain BEV maps.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// `uniform:N`, `mix:TOTAL`, a bare N, or a JSON/TOML file mapping task ids to counts.
    #[arg(long, default_value = "uniform:50")]
    pub quotas: String,
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Generator settings file (JSON or TOML); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generation report; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// One prediction file per responder.
    #[arg(long, required = true, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// Scenes for the per-condition breakdown.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub min_count: usize,
    /// Write the reports as JSON lines.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service configuration (TOML); `SCENEQA_REVIEW_*` variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub ability: Option<String>,
    #[arg(long)]
    pub scene_id: Option<String>,
}

/// How a stage failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: malformed documents, invalid settings, mismatched files.
    Validation(anyhow::Error),
    /// The corpus was written but some task quota was not met.
    Shortfall(String),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Shortfall(_) => EXIT_SHORTFALL,
            Failure::Other(_) => EXIT_ERROR,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "validation failed: {e:#}"),
            Failure::Shortfall(m) => write!(f, "shortfall: {m}"),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    use stages::*;
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Ingest(a) => ingest(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::CompleteMetadata(a) => complete(&a),
        Command::BuildGraph(a) => build_graphs(&a),
        Command::Render(a) => render(&a),
        Command::GenerateQa(a) => generate(&a),
        Command::Score(a) => score(&a),
        Command::Kappa(a) => kappa(&a),
        Command::Serve(a) => serve(&a),
        Command::Export(a) => export(&a),
    }
}

/// Parses `args` (program name first), runs the stage and returns the exit code.
pub fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("sceneqa: {f}");
            f.exit_code()
        }
    }
}
