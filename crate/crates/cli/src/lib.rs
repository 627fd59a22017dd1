//! Plan and batch-evaluate tasks from the command line.
//!
//! `cmd_plan` runs one task and writes `plan.json` and `report.json`;
//! `cmd_eval` runs every task file in a directory and summarizes success
//! rate and mean operation count per task.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use biman_core::scene::{load_scene, DEFAULT_ADJACENCY_THRESHOLD, DEFAULT_REACH_THRESHOLD};
use biman_core::skills::{load_kb, KnowledgeBase};
use biman_core::subgoal::{load_task, TaskSpec};
use biman_core::world::grid::DEFAULT_RESOLUTION;
use biman_core::world::{run_trial, Ablation, PlanDocument, TrialConfig, TrialReport};
use biman_core::{Error, SceneDocument};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PLANNING: i32 = 2;

pub const EVAL_SCHEMA: &str = "eval.v1";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Overrides the scene named inside the task file.
    pub scene_path: Option<PathBuf>,
    /// A task file for `plan`, a directory of task files for `eval`.
    pub task_path: PathBuf,
    pub kb_path: PathBuf,
    pub adjacency_threshold: f64,
    pub reach_threshold: f64,
    pub grid_resolution: f64,
    pub ablations: BTreeSet<Ablation>,
    pub trials: usize,
    pub output_path: Option<PathBuf>,
    /// Unused by the deterministic backends.
    pub seed: u64,
}

impl RunConfig {
    pub fn new(task_path: impl Into<PathBuf>, kb_path: impl Into<PathBuf>) -> Self {
        Self {
            scene_path: None,
            task_path: task_path.into(),
            kb_path: kb_path.into(),
            adjacency_threshold: DEFAULT_ADJACENCY_THRESHOLD,
            reach_threshold: DEFAULT_REACH_THRESHOLD,
            grid_resolution: DEFAULT_RESOLUTION,
            ablations: BTreeSet::new(),
            trials: 1,
            output_path: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("adjacency threshold", self.adjacency_threshold),
            ("reach threshold", self.reach_threshold),
            ("grid resolution", self.grid_resolution),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        Ok(())
    }

    pub fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            adjacency_threshold: self.adjacency_threshold,
            reach_threshold: self.reach_threshold,
            grid_resolution: self.grid_resolution,
            ablations: self.ablations.clone(),
            ..TrialConfig::default()
        }
    }
}

/// Machine-readable failure written to stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
}

impl ErrorObject {
    fn input(message: impl Into<String>) -> Self {
        Self {
            kind: "input".into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<Error> for ErrorObject {
    fn from(e: Error) -> Self {
        Self {
            kind: if e.is_input() { "input" } else { "planning" }.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub code: i32,
    pub plan: Option<PlanDocument>,
    pub report: Option<TrialReport>,
    pub error: Option<ErrorObject>,
}

impl PlanOutcome {
    fn input_failure(error: ErrorObject) -> Self {
        Self {
            code: EXIT_INPUT,
            plan: None,
            report: None,
            error: Some(error),
        }
    }
}

fn load_pair(task_path: &Path, scene_override: Option<&Path>) -> Result<(TaskSpec, SceneDocument), Error> {
    let task = load_task(task_path)?;
    let scene_path = match (scene_override, &task.scene) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(rel)) => task_path.parent().unwrap_or(Path::new(".")).join(rel),
        (None, None) => {
            return Err(Error::InvalidField {
                field: "scene".into(),
                detail: format!("{} names no scene and none was given", task_path.display()),
            })
        }
    };
    let scene = load_scene(scene_path)?;
    Ok((task, scene))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ErrorObject> {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| ErrorObject::input(format!("cannot write {}: {e}", path.display())))
}

fn prepare_out(out: &Path) -> Result<(), ErrorObject> {
    fs::create_dir_all(out).map_err(|e| ErrorObject::input(format!("cannot create {}: {e}", out.display())))
}

pub fn cmd_plan(config: &RunConfig) -> PlanOutcome {
    if let Err(msg) = config.validate() {
        return PlanOutcome::input_failure(ErrorObject::input(msg));
    }
    let kb = match load_kb(&config.kb_path) {
        Ok(kb) => kb,
        Err(e) => return PlanOutcome::input_failure(e.into()),
    };
    let (task, scene) = match load_pair(&config.task_path, config.scene_path.as_deref()) {
        Ok(pair) => pair,
        Err(e) => return PlanOutcome::input_failure(e.into()),
    };
    let outcome = run_trial(&scene, &task, &kb, &config.trial_config());
    let report = outcome.report;
    let code = if report.success {
        EXIT_OK
    } else if report.input_error {
        EXIT_INPUT
    } else {
        EXIT_PLANNING
    };
    let error = report.error.as_ref().map(|message| ErrorObject {
        kind: if report.input_error { "input" } else { "planning" }.into(),
        message: message.clone(),
    });
    if let Some(out) = &config.output_path {
        let written = prepare_out(out)
            .and_then(|_| write_json(&out.join("plan.json"), &outcome.plan))
            .and_then(|_| write_json(&out.join("report.json"), &report));
        if let Err(e) = written {
            return PlanOutcome::input_failure(e);
        }
    }
    PlanOutcome {
        code,
        plan: Some(outcome.plan),
        report: Some(report),
        error,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub file: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean tuples executed per trial.
    pub mean_operations: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema: String,
    pub ablations: Vec<Ablation>,
    pub tasks: Vec<TaskSummary>,
    pub average_success_rate: f64,
    pub average_operations: f64,
}

impl EvalSummary {
    pub fn table(&self) -> String {
        let width = self
            .tasks
            .iter()
            .map(|t| t.task.len())
            .chain(["average".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>6}", "task", "Succ.", "Op.");
        for t in &self.tasks {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>6.2}",
                t.task,
                format!("{}/{}", t.successes, t.trials),
                t.mean_operations
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.2}%  {:>6.2}",
            "average",
            self.average_success_rate * 100.0,
            self.average_operations
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub code: i32,
    pub summary: Option<EvalSummary>,
    pub error: Option<ErrorObject>,
}

fn task_files(dir: &Path) -> Result<Vec<PathBuf>, ErrorObject> {
    let entries =
        fs::read_dir(dir).map_err(|e| ErrorObject::input(format!("cannot read task directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ErrorObject::input(format!("no task files in {}", dir.display())));
    }
    Ok(files)
}

fn evaluate_file(file: &Path, config: &RunConfig, kb: &KnowledgeBase) -> TaskSummary {
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (task, scene) = match load_pair(file, config.scene_path.as_deref()) {
        Ok(pair) => pair,
        Err(e) => {
            return TaskSummary {
                task: name.trim_end_matches(".json").to_string(),
                file: name,
                trials: config.trials,
                successes: 0,
                success_rate: 0.0,
                mean_operations: 0.0,
                error: Some(e.to_string()),
            }
        }
    };
    let trial = config.trial_config();
    let mut successes = 0;
    let mut ops = 0;
    let mut error = None;
    for _ in 0..config.trials {
        let r = run_trial(&scene, &task, kb, &trial).report;
        successes += usize::from(r.success);
        ops += r.operation_count;
        if error.is_none() {
            error = r.error.or_else(|| r.violations.first().map(|v| v.to_string()));
        }
    }
    TaskSummary {
        task: task.name,
        file: name,
        trials: config.trials,
        successes,
        success_rate: successes as f64 / config.trials as f64,
        mean_operations: ops as f64 / config.trials as f64,
        error,
    }
}

pub fn cmd_eval(config: &RunConfig) -> EvalOutcome {
    let fail = |error: ErrorObject| EvalOutcome {
        code: EXIT_INPUT,
        summary: None,
        error: Some(error),
    };
    if let Err(msg) = config.validate() {
        return fail(ErrorObject::input(msg));
    }
    let kb = match load_kb(&config.kb_path) {
        Ok(kb) => kb,
        Err(e) => return fail(e.into()),
    };
    let files = match task_files(&config.task_path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let mut tasks: Vec<TaskSummary> = files.iter().map(|f| evaluate_file(f, config, &kb)).collect();
    tasks.sort_by(|a, b| a.task.cmp(&b.task).then_with(|| a.file.cmp(&b.file)));
    let n = tasks.len() as f64;
    let summary = EvalSummary {
        schema: EVAL_SCHEMA.into(),
        ablations: config.ablations.iter().copied().collect(),
        average_success_rate: tasks.iter().map(|t| t.success_rate).sum::<f64>() / n,
        average_operations: tasks.iter().map(|t| t.mean_operations).sum::<f64>() / n,
        tasks,
    };
    if let Some(out) = &config.output_path {
        let written = prepare_out(out)
            .and_then(|_| write_json(&out.join("eval.json"), &summary))
            .and_then(|_| {
                fs::write(out.join("eval.txt"), summary.table())
                    .map_err(|e| ErrorObject::input(format!("cannot write table: {e}")))
            });
        if let Err(e) = written {
            return fail(e);
        }
    }
    let all_ok = summary.tasks.iter().all(|t| t.successes == t.trials);
    EvalOutcome {
        code: if all_ok { EXIT_OK } else { EXIT_PLANNING },
        summary: Some(summary),
        error: None,
    }
}
