use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use biman_cli::{cmd_eval, cmd_plan, RunConfig};
use biman_core::scene::{DEFAULT_ADJACENCY_THRESHOLD, DEFAULT_REACH_THRESHOLD};
use biman_core::world::grid::DEFAULT_RESOLUTION;
use biman_core::world::Ablation;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biman", version, about = "Plan two-handed tasks over interaction-point scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan and execute one task; writes plan.json and report.json to --out
    Plan(Opts),
    /// Run every task file in a directory and print a summary table
    Eval(Opts),
}

#[derive(Args)]
struct Opts {
    /// Scene file; defaults to the scene named in each task file
    #[arg(long)]
    scene: Option<PathBuf>,

    /// Task file (plan) or directory of task files (eval)
    #[arg(long)]
    task: PathBuf,

    /// Skill knowledge base
    #[arg(long, env = "BIMAN_KB")]
    kb: PathBuf,

    #[arg(long, default_value_t = DEFAULT_ADJACENCY_THRESHOLD)]
    adjacency_threshold: f64,

    #[arg(long, default_value_t = DEFAULT_REACH_THRESHOLD)]
    reach_threshold: f64,

    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    grid_resolution: f64,

    /// no-merge, no-skill-rag or no-descriptors; repeatable
    #[arg(long = "ablate", value_name = "MODE")]
    ablations: Vec<Ablation>,

    #[arg(long, default_value_t = 1)]
    trials: usize,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Reserved for randomized backends
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<Opts> for RunConfig {
    fn from(o: Opts) -> Self {
        RunConfig {
            scene_path: o.scene,
            task_path: o.task,
            kb_path: o.kb,
            adjacency_threshold: o.adjacency_threshold,
            reach_threshold: o.reach_threshold,
            grid_resolution: o.grid_resolution,
            ablations: o.ablations.into_iter().collect::<BTreeSet<_>>(),
            trials: o.trials,
            output_path: o.out,
            seed: o.seed,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Plan(opts) => {
            let out = cmd_plan(&opts.into());
            if let Some(report) = &out.report {
                println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
            }
            if let Some(e) = &out.error {
                eprintln!("{}", e.to_json());
            }
            out.code
        }
        Command::Eval(opts) => {
            let out = cmd_eval(&opts.into());
            if let Some(summary) = &out.summary {
                print!("{}", summary.table());
            }
            if let Some(e) = &out.error {
                eprintln!("{}", e.to_json());
            }
            out.code
        }
    };
    ExitCode::from(code as u8)
}
