//! `rsg`: build, train, query and compose robot skill graphs from the shell.
//!
//! Exit status is 0 on success, 1 for usage errors, 2 for invalid input and
//! 3 for numerical failures. Every random draw derives from `--seed`.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use args::{CatalogArg, DispatchArgs, EnvArgs, GpArgs, RegisterArgs, TaskArgs, UsageError};

#[derive(Debug, Parser)]
#[command(name = "rsg", version, about = "Robot skill graph toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample environment and task instances for every skill of a catalog.
    Build(BuildArgs),
    /// Train the graph embedding.
    Train(TrainArgs),
    /// Rank skills for an environment and a task, printed as JSON.
    Infer(InferArgs),
    /// Route a ranking to execution, composition or fine-tuning.
    Dispatch(DispatchCmd),
    /// Roll out one catalog skill in the simulator and write its trajectory.
    Rollout(RolloutArgs),
    /// Bayesian-optimize a composition of the selected skills.
    Compose(ComposeArgs),
    /// Policy-gradient fine-tuning of the selected skills.
    Finetune(FinetuneArgs),
    /// Score distributions and link-prediction metrics on held-out facts.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Convert a sketch polyline into a task vector.
    Sketch2task(SketchArgs),
}

#[derive(Debug, clap::Args)]
struct BuildArgs {
    #[command(flatten)]
    catalog: CatalogArg,
    /// Instances sampled per skill and relation.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the resolved catalog.
    #[arg(long)]
    catalog_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct TrainArgs {
    #[command(flatten)]
    catalog: CatalogArg,
    /// Facts from `rsg build`; sampled on the fly when absent.
    #[arg(long)]
    facts: Option<PathBuf>,
    #[arg(long, default_value_t = 20, conflicts_with = "facts")]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch mean loss.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    #[arg(long, value_enum, default_value = "transh")]
    mode: ModeArg,
    #[arg(long, default_value_t = 48)]
    dim: usize,
    /// Hidden layer widths of both encoders.
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.05)]
    lr_decay: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 4)]
    k_neg: usize,
    #[arg(long, default_value_t = 2)]
    k_soft: usize,
    #[arg(long, default_value_t = 0.0)]
    ortho_weight: f64,
    #[arg(long, default_value_t = 7.0)]
    c_delta_env: f64,
    #[arg(long, default_value_t = 1.0)]
    c_delta_task: f64,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Transh,
    Transe,
}

#[derive(Debug, clap::Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    catalog: CatalogArg,
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    task: TaskArgs,
    /// Ranked skills to report.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[command(flatten)]
    dispatch: DispatchArgs,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also score the task against the midpoint of every catalog environment class.
    #[arg(long)]
    matrix_csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct DispatchCmd {
    /// Output of `rsg infer`, or a bare JSON array of skill scores.
    #[arg(long)]
    ranking: PathBuf,
    #[command(flatten)]
    dispatch: DispatchArgs,
}

#[derive(Debug, clap::Args)]
struct RolloutArgs {
    #[command(flatten)]
    catalog: CatalogArg,
    #[arg(long)]
    skill: String,
    #[command(flatten)]
    env: EnvArgs,
    /// Score the rollout against this task.
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 150)]
    horizon: usize,
    /// Simulator steps between task waypoints.
    #[arg(long, default_value_t = 50)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ComposeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    catalog: CatalogArg,
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    dispatch: DispatchArgs,
    /// Objective evaluations.
    #[arg(long, default_value_t = 60)]
    budget: usize,
    /// Random candidates scored per iteration.
    #[arg(long, default_value_t = 256)]
    candidates: usize,
    #[arg(long, default_value_t = 150)]
    horizon: usize,
    #[arg(long, default_value_t = 0.01)]
    xi: f64,
    #[arg(long, default_value_t = 0.5)]
    bias_bound: f64,
    /// Fit the GP to raw returns rather than returns minus their running mean.
    #[arg(long)]
    no_center: bool,
    #[command(flatten)]
    gp: GpArgs,
    #[arg(long, default_value_t = 50)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compose even when the top score would deploy a skill directly.
    #[arg(long)]
    force: bool,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Result JSON; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    register: RegisterArgs,
}

#[derive(Debug, clap::Args)]
struct FinetuneArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    catalog: CatalogArg,
    #[command(flatten)]
    env: EnvArgs,
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    dispatch: DispatchArgs,
    /// Exploration environment steps.
    #[arg(long, default_value_t = 60_000)]
    budget: usize,
    #[arg(long, default_value_t = 150)]
    horizon: usize,
    #[arg(long, default_value_t = 8)]
    episodes: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long, default_value_t = 0.2)]
    clip: f64,
    /// Keep generator parameters fixed.
    #[arg(long)]
    freeze_generators: bool,
    #[arg(long, default_value_t = 50)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fine-tune even when the top score would deploy a skill directly.
    #[arg(long)]
    force: bool,
    /// Learning curve CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    register: RegisterArgs,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    catalog: CatalogArg,
    /// Training facts; resampled from --instances and --seed when absent.
    #[arg(long)]
    facts: Option<PathBuf>,
    #[arg(long, default_value_t = 20, conflicts_with = "facts")]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out instances per skill and relation.
    #[arg(long, default_value_t = 10)]
    eval_instances: usize,
    #[arg(long, default_value_t = 999)]
    eval_seed: u64,
    /// Baseline to compare against; `sbm` also trains a TransE-mode graph.
    #[arg(long, value_parser = ["sbm"])]
    compare: Option<String>,
    /// TransE-mode model; trained with default settings when absent.
    #[arg(long, requires = "compare")]
    transe_model: Option<PathBuf>,
    /// Epochs for the TransE-mode graph trained on the fly.
    #[arg(long, default_value_t = 100)]
    transe_epochs: usize,
    /// Temperature of the centroid-distance baseline.
    #[arg(long, default_value_t = 3.0)]
    tau: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    catalog: CatalogArg,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[command(flatten)]
    dispatch: DispatchArgs,
    /// Default composition budget for jobs that do not name one.
    #[arg(long, default_value_t = 60)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, clap::Args)]
struct SketchArgs {
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long, default_value_t = rsg_core::sketch::DEFAULT_WINDOW)]
    window: usize,
    /// Velocity normalizer; taken from --catalog when absent.
    #[arg(long)]
    v_max: Option<f64>,
    #[command(flatten)]
    catalog: CatalogArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.chain().find_map(|e| e.downcast_ref::<rsg_core::Error>()) {
        Some(rsg_core::Error::Numerical(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("RSG_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Build(a) => commands::build(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Dispatch(a) => commands::dispatch(a),
        Command::Rollout(a) => commands::rollout(a),
        Command::Compose(a) => commands::compose(a),
        Command::Finetune(a) => commands::finetune(a),
        Command::Eval(a) => commands::eval(a),
        Command::Serve(a) => commands::serve(a),
        Command::Sketch2task(a) => commands::sketch2task(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
