use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bevkit", version, about = "BEV traffic-scene annotation, VQA synthesis and trajectory evaluation")]
pub struct Cli {
    /// JSON file of default settings; flags override it.
    #[arg(long, global = true, env = "BEVKIT_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-scene stages.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,

    /// Raise log verbosity (repeatable). Logs go to standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes and their ground truth.
    Synth(SynthArgs),
    /// Annotate scenes into JSONL records.
    Annotate(AnnotateArgs),
    /// Render BEV images with JSON sidecars.
    Render(RenderArgs),
    /// Apply a noise regime to scenes.
    Perturb(PerturbArgs),
    /// Synthesize questions for rendered images.
    Genqa(GenqaArgs),
    /// Undersample answer classes.
    Balance(BalanceArgs),
    /// Split a dataset by image.
    Split(SplitArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
    /// Plan and integrate trajectories.
    Rollout(RolloutArgs),
    /// Score VQA predictions.
    EvalQa(EvalQaArgs),
    /// Score trajectory rollouts.
    EvalTraj(EvalTrajArgs),
    /// Export condition tensors for external training code.
    ExportCond(ExportCondArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Layout name, or `mixed` to cycle through all layouts.
    #[arg(long, default_value = "mixed")]
    pub layout: String,
    /// Vehicles per scene (capped at the layout's capacity).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Simulated steps per scene.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Write one scene to this file.
    #[arg(short, long, conflicts_with_all = ["out_dir", "count"])]
    pub output: Option<PathBuf>,
    /// Number of scenes written into `--out-dir`.
    #[arg(long, requires = "out_dir")]
    pub count: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Ground-truth JSONL output, one object per scene.
    #[arg(long)]
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenesArg {
    /// Scene file, or directory of `*.json` scene files.
    #[arg(long)]
    pub scenes: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub scenes: ScenesArg,
    /// Annotator thresholds JSON.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EgoSelection {
    /// Every vehicle takes a turn as ego.
    All,
    /// Only the scene's designated ego.
    Scene,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scenes: ScenesArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated timesteps to render.
    #[arg(long, value_delimiter = ',')]
    pub timesteps: Option<Vec<i64>>,
    #[arg(long, value_enum)]
    pub egos: Option<EgoSelection>,
    /// Render config JSON.
    #[arg(long)]
    pub render_config: Option<PathBuf>,
    /// Annotator thresholds JSON; images are only made where a record exists.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseMode {
    Vehicle,
    Lane,
    Combined,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub scenes: ScenesArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub mode: NoiseMode,
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub seed: u64,
    /// Largest vehicle shift in metres (vehicle mode).
    #[arg(long)]
    pub max_shift: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenqaArgs {
    /// Clean scenes the answers are derived from.
    #[command(flatten)]
    pub scenes: ScenesArg,
    /// Annotation records JSONL.
    #[arg(long)]
    pub records: PathBuf,
    /// Directory of rendered images and sidecars.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Expected questions per image.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Template bank JSON.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Write here instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerKind {
    /// Lane following over ground-truth navigation.
    Nav,
    /// The same planner with empty navigation.
    NoNav,
    /// Replays the recorded trajectory.
    Oracle,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub scenes: ScenesArg,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "nav")]
    pub planner: PlannerKind,
    /// Samples per agent.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub t0: i64,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub agents: EgoSelection,
}

#[derive(Debug, Args)]
pub struct EvalQaArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Predictions JSONL of `{qa_id, answer}`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalTrajArgs {
    #[command(flatten)]
    pub scenes: ScenesArg,
    #[arg(long)]
    pub rollouts: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DescriptionSource {
    /// Describe each vehicle's recorded future.
    Auto,
    None,
}

#[derive(Debug, Args)]
pub struct ExportCondArgs {
    #[command(flatten)]
    pub scenes: ScenesArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub t0: i64,
    #[arg(long, value_enum, default_value = "auto")]
    pub descriptions: DescriptionSource,
}
