//! End-to-end trial: plan a task in a scene, walk to each subgoal, generate
//! and execute tuples, then check the goal predicates.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::{Cell, OccupancyGrid, DEFAULT_AGENT_RADIUS, DEFAULT_RESOLUTION};
use super::state::WorldState;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::hands::HandState;
use crate::prompting::{generate_from_name, generate_tuples, ActionSequence, Violation};
use crate::scene::{
    build_adjacency, concat_descriptors, SceneDocument, DEFAULT_ADJACENCY_THRESHOLD, DEFAULT_REACH_THRESHOLD,
};
use crate::skills::KnowledgeBase;
use crate::subgoal::{
    check_continuity, generate_subgoals, merge_subgoals, refine_best_skill, resolve_continuity, PlanningContext,
    RefinedPlanSkeleton, SubgoalTriplet, TaskSpec,
};

pub const PLAN_SCHEMA: &str = "plan.v1";
pub const REPORT_SCHEMA: &str = "report.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Keep every intent as its own subgoal.
    NoMerge,
    /// Generate tuples from the skill name alone, without prototypes.
    NoSkillRag,
    /// Drop visual attributes and state tags before planning.
    NoDescriptors,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::NoMerge, Ablation::NoSkillRag, Ablation::NoDescriptors];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoMerge => "no-merge",
            Ablation::NoSkillRag => "no-skill-rag",
            Ablation::NoDescriptors => "no-descriptors",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown ablation `{s}` (expected no-merge, no-skill-rag or no-descriptors)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub adjacency_threshold: f64,
    pub reach_threshold: f64,
    pub grid_resolution: f64,
    pub agent_radius: f64,
    pub ablations: BTreeSet<Ablation>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            adjacency_threshold: DEFAULT_ADJACENCY_THRESHOLD,
            reach_threshold: DEFAULT_REACH_THRESHOLD,
            grid_resolution: DEFAULT_RESOLUTION,
            agent_radius: DEFAULT_AGENT_RADIUS,
            ablations: BTreeSet::new(),
        }
    }
}

impl TrialConfig {
    pub fn with_ablation(mut self, a: Ablation) -> Self {
        self.ablations.insert(a);
        self
    }

    pub fn ablated(&self, a: Ablation) -> bool {
        self.ablations.contains(&a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlanStep {
    Navigate {
        subgoal_index: usize,
        object_point: u32,
        stance: Pose,
        path_length: f64,
        cells: Vec<Cell>,
    },
    Act {
        subgoal_index: usize,
        hands_before: HandState,
        reachable: Vec<u32>,
        descriptors: String,
        sequence: ActionSequence,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub schema: String,
    pub task: String,
    pub scene: String,
    pub ablations: Vec<Ablation>,
    pub triplets: Vec<SubgoalTriplet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<RefinedPlanSkeleton>,
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Subgoals,
    Continuity,
    Refinement,
    Navigation,
    Generation,
    Execution,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalReport {
    pub goal_text: String,
    pub best_skill: String,
    pub operations: usize,
    pub path_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema: String,
    pub task: String,
    pub success: bool,
    /// Tuples executed.
    pub operation_count: usize,
    /// Meters walked.
    pub path_length: f64,
    pub violations: Vec<Violation>,
    pub goals_met: Vec<bool>,
    pub per_subgoal: Vec<SubgoalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Set when the failure came from bad input rather than planning.
    #[serde(default)]
    pub input_error: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub report: TrialReport,
    pub plan: PlanDocument,
    pub world: WorldState,
}

struct Failure {
    stage: Stage,
    error: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, Failure>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

pub fn run_trial(scene: &SceneDocument, task: &TaskSpec, kb: &KnowledgeBase, config: &TrialConfig) -> TrialOutcome {
    let mut scene = scene.clone();
    if config.ablated(Ablation::NoDescriptors) {
        scene.strip_descriptors();
    }
    let mut world = WorldState::new(&scene);
    let mut plan = PlanDocument {
        schema: PLAN_SCHEMA.into(),
        task: task.name.clone(),
        scene: scene.scene_label.clone(),
        ablations: config.ablations.iter().copied().collect(),
        triplets: Vec::new(),
        skeleton: None,
        steps: Vec::new(),
    };
    let mut report = TrialReport {
        schema: REPORT_SCHEMA.into(),
        task: task.name.clone(),
        success: false,
        operation_count: 0,
        path_length: 0.0,
        violations: Vec::new(),
        goals_met: Vec::new(),
        per_subgoal: Vec::new(),
        stage: None,
        error: None,
        input_error: false,
    };
    if let Err(f) = drive(&scene, task, kb, config, &mut world, &mut plan, &mut report) {
        report.input_error = f.error.is_input();
        report.stage = Some(f.stage);
        report.error = Some(f.error.to_string());
    }
    report.success = report.error.is_none()
        && report.violations.is_empty()
        && report.goals_met.iter().all(|m| *m)
        && report.goals_met.len() == task.goal_predicates.len();
    TrialOutcome { report, plan, world }
}

fn drive(
    scene: &SceneDocument,
    task: &TaskSpec,
    kb: &KnowledgeBase,
    config: &TrialConfig,
    world: &mut WorldState,
    plan: &mut PlanDocument,
    report: &mut TrialReport,
) -> std::result::Result<(), Failure> {
    let adjacency = build_adjacency(scene, config.adjacency_threshold);
    let ctx = PlanningContext {
        scene,
        adjacency: &adjacency,
        kb,
    };
    let mut triplets = generate_subgoals(task, scene).at(Stage::Subgoals)?;
    let merging = !config.ablated(Ablation::NoMerge);
    if merging {
        triplets = merge_subgoals(triplets, &ctx);
    }
    triplets = resolve_continuity(triplets, &ctx, merging).at(Stage::Continuity)?;
    check_continuity(&triplets)
        .map_err(Error::UnsatisfiableContinuity)
        .at(Stage::Continuity)?;
    plan.triplets = triplets.clone();
    let skeleton = refine_best_skill(&triplets, &ctx).at(Stage::Refinement)?;
    plan.skeleton = Some(skeleton.clone());

    let grid = OccupancyGrid::from_scene(scene, config.grid_resolution, config.agent_radius);
    for (i, step) in skeleton.sequence.iter().enumerate() {
        let object = scene
            .object(step.object_point)
            .ok_or(Error::DanglingReference {
                id: step.object_point,
                field: "object_point".into(),
            })
            .at(Stage::Navigation)?;
        let stance = grid.select_stance(object.id, object.position).at(Stage::Navigation)?;
        let here = world.agent.position;
        let start = grid
            .cell_of(here[0], here[1])
            .ok_or(Error::BadCell((usize::MAX, usize::MAX)))
            .at(Stage::Navigation)?;
        let goal = grid
            .cell_of(stance.position[0], stance.position[1])
            .expect("stance lies on the grid");
        let path = grid.plan_path(start, goal).at(Stage::Navigation)?;
        let walked = path.cost * grid.resolution;
        report.path_length += walked;
        world.agent = stance;
        plan.steps.push(PlanStep::Navigate {
            subgoal_index: i,
            object_point: object.id,
            stance,
            path_length: walked,
            cells: path.cells,
        });

        let reachable = world.sample(scene, config.reach_threshold);
        let hands_before = world.hands.clone();
        let sequence = if config.ablated(Ablation::NoSkillRag) {
            generate_from_name(i, &step.best_skill, &world.hands, &reachable)
        } else {
            generate_tuples(i, &step.best_skill, &world.hands, &reachable, kb)
        }
        .at(Stage::Generation)?;
        let mut ids: Vec<u32> = reachable.iter().map(|p| p.id()).collect();
        ids.sort_unstable();
        plan.steps.push(PlanStep::Act {
            subgoal_index: i,
            hands_before,
            reachable: ids,
            descriptors: concat_descriptors(&reachable),
            sequence: sequence.clone(),
        });

        let mut executed = 0;
        for (j, tuple) in sequence.tuples.iter().enumerate() {
            report.operation_count += 1;
            executed += 1;
            if let Err(v) = world.execute_tuple(scene, tuple, &reachable, j) {
                report.violations.push(v);
                break;
            }
        }
        report.per_subgoal.push(SubgoalReport {
            goal_text: step.goal_text.clone(),
            best_skill: step.best_skill.clone(),
            operations: executed,
            path_length: walked,
        });
        if !report.violations.is_empty() {
            report.stage = Some(Stage::Execution);
            return Ok(());
        }
        world.update_world(&step.goal_text);
    }

    for goal in &task.goal_predicates {
        let met = world.evaluate_goal(scene, goal).at(Stage::Evaluation)?;
        report.goals_met.push(met);
    }
    if report.goals_met.iter().any(|m| !m) {
        report.stage = Some(Stage::Evaluation);
    }
    Ok(())
}
