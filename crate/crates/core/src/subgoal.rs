//! Subgoal planning: index-aligned (object point, goal, abstract skill)
//! triplets from a structured task, the bimanual merge rule over the
//! object-point adjacency graph, "while holding" continuity, and
//! refinement of each abstract skill to a canonical skill.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::hands::{Hand, HandPrimitive};
use crate::scene::{AdjacencyGraph, InteractionPoint, SceneDocument};
use crate::skills::{Coordination, HandFit, KnowledgeBase, SkillEntry, REFINE_CANDIDATES};

pub const TASK_SCHEMA: &str = "task.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Acquire,
    PlaceInto,
    Open,
    Close,
    Press,
    PourInto,
    DiscardInto,
    OperateWithHeld,
}

impl Verb {
    pub fn needs_target(self) -> bool {
        matches!(
            self,
            Verb::PlaceInto | Verb::PourInto | Verb::DiscardInto | Verb::OperateWithHeld
        )
    }

    /// Hand primitives any one of which realizes this verb.
    pub fn realizing_primitives(self) -> &'static [HandPrimitive] {
        use HandPrimitive::*;
        match self {
            Verb::Acquire => &[Grasp],
            Verb::PlaceInto | Verb::DiscardInto | Verb::OperateWithHeld => &[Release, Put],
            Verb::Open => &[Pull, Push],
            Verb::Close => &[Push],
            Verb::Press => &[Press],
            Verb::PourInto => &[Pour],
        }
    }

    pub fn abstract_skill(self) -> &'static str {
        match self {
            Verb::Acquire => "grab a single item",
            Verb::PlaceInto => "place an item into a container",
            Verb::Open => "open a door",
            Verb::Close => "close a door",
            Verb::Press => "press a button",
            Verb::PourInto => "pour from container A to container B",
            Verb::DiscardInto => "discard an item into a receptacle",
            Verb::OperateWithHeld => "operate an appliance with a held item",
        }
    }

    fn goal_text(self, subject: &str, target: &str) -> String {
        match self {
            Verb::Acquire => format!("grab the {subject}"),
            Verb::PlaceInto => format!("place the {subject} at the {target}"),
            Verb::Open => format!("open the {subject}"),
            Verb::Close => format!("close the {subject}"),
            Verb::Press => format!("press the {subject} button"),
            Verb::PourInto => format!("pour from the {subject} into the {target}"),
            Verb::DiscardInto => format!("throw the {subject} into the {target}"),
            Verb::OperateWithHeld => {
                format!("open the {subject} door and place the {target} inside")
            }
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub verb: Verb,
    pub subject_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_label: Option<String>,
}

impl Intent {
    pub fn new(verb: Verb, subject: &str, target: Option<&str>) -> Self {
        Self {
            verb,
            subject_label: subject.to_string(),
            target_label: target.map(str::to_string),
        }
    }

    /// Label of the object the agent must stand at.
    pub fn anchor_label(&self) -> &str {
        match self.verb {
            Verb::PlaceInto | Verb::PourInto | Verb::DiscardInto => {
                self.target_label.as_deref().unwrap_or(&self.subject_label)
            }
            _ => &self.subject_label,
        }
    }

    /// Label of the object that must already be in hand, if any.
    pub fn held_label(&self) -> Option<&str> {
        match self.verb {
            Verb::PlaceInto | Verb::PourInto | Verb::DiscardInto => Some(&self.subject_label),
            Verb::OperateWithHeld => self.target_label.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GoalPredicate {
    /// Tag present on an interaction point, or on any point of a labelled
    /// object.
    State {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<String>,
        tag: String,
    },
    /// Every object with this label rests at or inside a point within
    /// `radius` meters of the given interaction point.
    Located { object: String, at_point: u32, radius: f64 },
    Held { object: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(default = "task_schema")]
    pub schema: String,
    pub name: String,
    /// Scene file, relative to the task file, used when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    #[serde(default)]
    pub intents: Vec<Intent>,
    #[serde(default)]
    pub goal_predicates: Vec<GoalPredicate>,
}

fn task_schema() -> String {
    TASK_SCHEMA.to_string()
}

pub fn parse_task(text: &str) -> Result<TaskSpec> {
    let task: TaskSpec = serde_json::from_str(text).map_err(|source| Error::Malformed {
        what: "task",
        source,
    })?;
    if task.schema != TASK_SCHEMA {
        return Err(Error::Schema {
            expected: TASK_SCHEMA,
            found: task.schema,
        });
    }
    for (i, intent) in task.intents.iter().enumerate() {
        if intent.verb.needs_target() && intent.target_label.is_none() {
            return Err(Error::InvalidField {
                field: format!("intents[{i}].target_label"),
                detail: format!("verb `{}` needs a target", intent.verb),
            });
        }
    }
    Ok(task)
}

pub fn load_task(path: impl AsRef<Path>) -> Result<TaskSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_task(&text)
}

/// One intent folded into a (possibly merged) triplet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub verb: Verb,
    pub subject_label: String,
    pub object_point: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalTriplet {
    pub object_point: u32,
    pub goal_text: String,
    pub abstract_skill: String,
    pub holds_required: BTreeSet<String>,
    pub holds_established: BTreeSet<String>,
    pub holds_released: BTreeSet<String>,
    /// Holds carried in from a non-adjacent earlier subgoal.
    #[serde(default)]
    pub holds_carried: BTreeSet<String>,
    pub constituents: Vec<Constituent>,
}

impl SubgoalTriplet {
    pub fn is_merged(&self) -> bool {
        self.constituents.len() > 1
    }

    fn constituent_points(&self) -> impl Iterator<Item = u32> + '_ {
        self.constituents.iter().map(|c| c.object_point)
    }
}

/// Resolve a label to an object point: case-insensitive exact match on the
/// lowest id, then the longest substring overlap.
pub fn resolve_label(scene: &SceneDocument, label: &str) -> Result<u32> {
    let query = label.trim().to_lowercase();
    if let Some(o) = scene
        .object_points
        .iter()
        .find(|o| o.label.trim().to_lowercase() == query)
    {
        return Ok(o.id);
    }
    let mut best: Option<(usize, u32)> = None;
    for o in &scene.object_points {
        let l = o.label.trim().to_lowercase();
        let overlap = if l.contains(&query) {
            query.len()
        } else if query.contains(&l) {
            l.len()
        } else {
            continue;
        };
        if overlap > 0 && best.is_none_or(|(len, _)| overlap > len) {
            best = Some((overlap, o.id));
        }
    }
    best.map(|(_, id)| id).ok_or_else(|| Error::UnresolvedLabel {
        label: label.to_string(),
        available: scene
            .object_points
            .iter()
            .map(|o| o.label.as_str())
            .collect::<Vec<_>>()
            .join(", "),
    })
}

pub fn generate_subgoals(task: &TaskSpec, scene: &SceneDocument) -> Result<Vec<SubgoalTriplet>> {
    let mut out = Vec::with_capacity(task.intents.len());
    for intent in &task.intents {
        resolve_label(scene, &intent.subject_label)?;
        let target = match &intent.target_label {
            Some(t) => {
                resolve_label(scene, t)?;
                t.as_str()
            }
            None => "",
        };
        let anchor = resolve_label(scene, intent.anchor_label())?;
        let mut triplet = SubgoalTriplet {
            object_point: anchor,
            goal_text: intent.verb.goal_text(&intent.subject_label, target),
            abstract_skill: intent.verb.abstract_skill().to_string(),
            holds_required: BTreeSet::new(),
            holds_established: BTreeSet::new(),
            holds_released: BTreeSet::new(),
            holds_carried: BTreeSet::new(),
            constituents: vec![Constituent {
                verb: intent.verb,
                subject_label: intent.subject_label.clone(),
                object_point: anchor,
            }],
        };
        if intent.verb == Verb::Acquire {
            triplet.holds_established.insert(intent.subject_label.clone());
        }
        if let Some(held) = intent.held_label() {
            triplet.holds_required.insert(held.to_string());
            if matches!(
                intent.verb,
                Verb::PlaceInto | Verb::DiscardInto | Verb::OperateWithHeld
            ) {
                triplet.holds_released.insert(held.to_string());
            }
        }
        out.push(triplet);
    }
    Ok(out)
}

/// Shared read-only inputs of the merge and refinement stages.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub scene: &'a SceneDocument,
    pub adjacency: &'a AdjacencyGraph,
    pub kb: &'a KnowledgeBase,
}

impl PlanningContext<'_> {
    /// Hands a triplet occupies: two for a skill whose best match works one
    /// object with both hands, otherwise one.
    pub fn hand_demand(&self, t: &SubgoalTriplet) -> usize {
        match self.kb.top_coordination(&t.abstract_skill) {
            Some(Coordination::TwoHandsOneObject) => 2,
            _ => 1,
        }
    }

    /// Object point equal or adjacent to every listed point that minimizes
    /// the largest distance to them; ties to the lowest id.
    pub fn joint_anchor(&self, points: &[u32]) -> Option<u32> {
        let mut best: Option<(f64, u32)> = None;
        for o in &self.scene.object_points {
            if !points.iter().all(|p| self.adjacency.near(o.id, *p)) {
                continue;
            }
            let worst = points
                .iter()
                .filter_map(|p| self.scene.object(*p))
                .map(|p| distance(p.position, o.position))
                .fold(0.0, f64::max);
            if best.is_none_or(|(d, _)| worst < d) {
                best = Some((worst, o.id));
            }
        }
        best.map(|(_, id)| id)
    }

    fn shared_anchor(&self, a: &SubgoalTriplet, b: &SubgoalTriplet) -> Option<u32> {
        let pts: Vec<u32> = a.constituent_points().chain(b.constituent_points()).collect();
        self.joint_anchor(&pts)
    }

    /// Conditions (a) joint reachability and (b) hand demand.
    fn reachable_and_parallel(&self, a: &SubgoalTriplet, b: &SubgoalTriplet) -> Option<u32> {
        if self.hand_demand(a) + self.hand_demand(b) > 2 {
            return None;
        }
        self.shared_anchor(a, b)
    }

    /// Full merge rule including (c): no order dependence through holds.
    pub fn can_merge(&self, a: &SubgoalTriplet, b: &SubgoalTriplet) -> Option<u32> {
        if !a.holds_required.is_disjoint(&b.holds_established)
            || !b.holds_required.is_disjoint(&a.holds_established)
        {
            return None;
        }
        self.reachable_and_parallel(a, b)
    }
}

fn combine(a: &SubgoalTriplet, b: &SubgoalTriplet, anchor: u32) -> SubgoalTriplet {
    let required: BTreeSet<String> = a
        .holds_required
        .iter()
        .chain(b.holds_required.difference(&a.holds_established))
        .cloned()
        .collect();
    let mut established: BTreeSet<String> = a
        .holds_established
        .difference(&b.holds_released)
        .chain(b.holds_established.iter())
        .cloned()
        .collect();
    established.retain(|l| !required.contains(l));
    let released: BTreeSet<String> = a
        .holds_released
        .iter()
        .chain(b.holds_released.difference(&a.holds_established))
        .cloned()
        .collect();
    let carried = a
        .holds_carried
        .union(&b.holds_carried)
        .filter(|l| required.contains(*l))
        .cloned()
        .collect();
    SubgoalTriplet {
        object_point: anchor,
        goal_text: format!("{}; {}", a.goal_text, b.goal_text),
        abstract_skill: format!("{} while {}", a.abstract_skill, b.abstract_skill),
        holds_required: required,
        holds_established: established,
        holds_released: released,
        holds_carried: carried,
        constituents: a.constituents.iter().chain(&b.constituents).cloned().collect(),
    }
}

/// Merge consecutive triplets left to right until nothing changes.
pub fn merge_subgoals(triplets: Vec<SubgoalTriplet>, ctx: &PlanningContext<'_>) -> Vec<SubgoalTriplet> {
    let mut list = triplets;
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < list.len() {
            if let Some(anchor) = ctx.can_merge(&list[i], &list[i + 1]) {
                let merged = combine(&list[i], &list[i + 1], anchor);
                list[i] = merged;
                list.remove(i + 1);
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            return list;
        }
    }
}

/// Index of the triplet before `i` that holds `label` going into `i`.
fn find_holder(list: &[SubgoalTriplet], i: usize, label: &str) -> Option<usize> {
    for j in (0..i).rev() {
        if list[j].holds_established.contains(label) {
            return Some(j);
        }
        if list[j].holds_released.contains(label) {
            return None;
        }
    }
    None
}

/// Bind every "while holding" requirement to the grasp that establishes it.
/// A dependent triplet directly after its holder is folded into it when the
/// two are jointly reachable and parallel (when `merge_back` is set);
/// otherwise the hold is carried across navigation.
pub fn resolve_continuity(
    triplets: Vec<SubgoalTriplet>,
    ctx: &PlanningContext<'_>,
    merge_back: bool,
) -> Result<Vec<SubgoalTriplet>> {
    let mut list = triplets;
    let mut i = 0;
    while i < list.len() {
        let required: Vec<String> = list[i].holds_required.iter().cloned().collect();
        let mut merged = false;
        for label in required {
            let holder = find_holder(&list, i, &label)
                .ok_or_else(|| Error::UnsatisfiableContinuity(label.clone()))?;
            if merge_back && holder + 1 == i {
                if let Some(anchor) = ctx.reachable_and_parallel(&list[holder], &list[i]) {
                    let m = combine(&list[holder], &list[i], anchor);
                    list[holder] = m;
                    list.remove(i);
                    i = holder;
                    merged = true;
                    break;
                }
            }
            list[i].holds_carried.insert(label);
        }
        if !merged {
            i += 1;
        }
    }
    Ok(list)
}

/// Linear scan: every required hold is preceded by an establishing triplet
/// with no release in between.
pub fn check_continuity(triplets: &[SubgoalTriplet]) -> std::result::Result<(), String> {
    for (i, t) in triplets.iter().enumerate() {
        for label in &t.holds_required {
            if find_holder(triplets, i, label).is_none() {
                return Err(format!("subgoal {i} requires `{label}` with no preceding grasp"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedStep {
    pub object_point: u32,
    pub goal_text: String,
    pub best_skill: String,
    pub abstract_skill: String,
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedPlanSkeleton {
    pub sequence: Vec<RefinedStep>,
}

/// Predicted occupancy: the label held by each hand, if any.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictedHands {
    pub right: Option<String>,
    pub left: Option<String>,
}

impl PredictedHands {
    fn get(&self, hand: Hand) -> &Option<String> {
        match hand {
            Hand::Right => &self.right,
            Hand::Left => &self.left,
        }
    }

    fn get_mut(&mut self, hand: Hand) -> &mut Option<String> {
        match hand {
            Hand::Right => &mut self.right,
            Hand::Left => &mut self.left,
        }
    }
}

/// Why a refinement candidate was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    PointUnmatched(String),
    NotRealizing(Verb),
    HandState,
    HeldHandIdle(Hand, String),
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::PointUnmatched(slot) => write!(f, "no interaction point for slot `{slot}`"),
            Rejection::NotRealizing(v) => write!(f, "does not realize `{v}`"),
            Rejection::HandState => f.write_str("hand preconditions unmet"),
            Rejection::HeldHandIdle(h, l) => write!(f, "{h} hand holding `{l}` stays idle"),
        }
    }
}

/// Tags a point can carry: its own plus any its object's effect rules add.
fn achievable_state(scene: &SceneDocument, p: &InteractionPoint) -> BTreeSet<String> {
    let mut tags = p.descriptor.state_tags.clone();
    for q in scene.points_of(p.parent_object) {
        for rule in &q.descriptor.effects {
            tags.extend(rule.adds.iter().cloned());
        }
        if q.id != p.id {
            tags.extend(q.descriptor.state_tags.iter().cloned());
        }
    }
    tags
}

fn point_feasible(ctx: &PlanningContext<'_>, entry: &SkillEntry, at: u32) -> std::result::Result<(), Rejection> {
    for tpl in &entry.point_preconditions {
        let ok = ctx.scene.interaction_points.iter().any(|p| {
            ctx.adjacency.near(p.parent_object, at)
                && tpl.category_matches(ctx.scene.object_label(p.parent_object))
                && tpl.required_affordances.is_subset(&p.descriptor.affordances)
                && tpl.required_attributes.is_subset(&p.descriptor.visual_attributes)
                && tpl.required_state.is_subset(&achievable_state(ctx.scene, p))
        });
        if !ok {
            return Err(Rejection::PointUnmatched(tpl.slot.clone()));
        }
    }
    Ok(())
}

/// Every constituent verb is realized by a distinct template action.
fn realizes(entry: &SkillEntry, constituents: &[Constituent]) -> std::result::Result<(), Rejection> {
    let actions: Vec<HandPrimitive> = Hand::BOTH
        .iter()
        .flat_map(|h| entry.actions_of(*h).map(|a| a.primitive))
        .collect();
    let verbs: Vec<Verb> = constituents.iter().map(|c| c.verb).collect();
    let mut used = vec![false; actions.len()];
    fn assign(verbs: &[Verb], actions: &[HandPrimitive], used: &mut [bool]) -> bool {
        let Some((v, rest)) = verbs.split_first() else {
            return true;
        };
        for k in 0..actions.len() {
            if !used[k] && v.realizing_primitives().contains(&actions[k]) {
                used[k] = true;
                if assign(rest, actions, used) {
                    return true;
                }
                used[k] = false;
            }
        }
        false
    }
    if assign(&verbs, &actions, &mut used) {
        Ok(())
    } else {
        // name the first verb that cannot be placed on its own
        let missing = verbs
            .iter()
            .find(|v| !actions.iter().any(|a| v.realizing_primitives().contains(a)))
            .or(verbs.last())
            .copied()
            .unwrap_or(Verb::Acquire);
        Err(Rejection::NotRealizing(missing))
    }
}

fn actual_hand(template_hand: Hand, fit: HandFit) -> Hand {
    match fit {
        HandFit::AsWritten => template_hand,
        HandFit::Reversed => template_hand.other(),
    }
}

fn hands_fit(
    entry: &SkillEntry,
    hands: &PredictedHands,
    triplet: &SubgoalTriplet,
) -> std::result::Result<HandFit, Rejection> {
    let fit = entry
        .hand_preconditions
        .fit_occupancy(hands.right.is_none(), hands.left.is_none())
        .ok_or(Rejection::HandState)?;
    for hand in Hand::BOTH {
        if let Some(label) = hands.get(hand) {
            if triplet.holds_required.contains(label) {
                let template_hand = actual_hand(hand, fit);
                if entry.actions_of(template_hand).next().is_none() {
                    return Err(Rejection::HeldHandIdle(hand, label.clone()));
                }
            }
        }
    }
    Ok(fit)
}

/// Replay a template's grasps and releases on predicted occupancy.
fn advance_hands(entry: &SkillEntry, fit: HandFit, triplet: &SubgoalTriplet, hands: &mut PredictedHands) {
    let mut grasp_labels = triplet
        .constituents
        .iter()
        .filter(|c| c.verb == Verb::Acquire)
        .map(|c| c.subject_label.clone());
    for step in &entry.tuple_template {
        for th in Hand::BOTH {
            let hand = actual_hand(th, fit);
            match step.action(th).primitive {
                HandPrimitive::Grasp => {
                    let label = grasp_labels.next().unwrap_or_else(|| "item".to_string());
                    *hands.get_mut(hand) = Some(label);
                }
                HandPrimitive::Put | HandPrimitive::Release => *hands.get_mut(hand) = None,
                _ => {}
            }
        }
    }
}

/// Check one candidate for one triplet; returns the hand fit on success.
pub fn check_candidate(
    ctx: &PlanningContext<'_>,
    entry: &SkillEntry,
    triplet: &SubgoalTriplet,
    hands: &PredictedHands,
) -> std::result::Result<HandFit, Rejection> {
    point_feasible(ctx, entry, triplet.object_point)?;
    realizes(entry, &triplet.constituents)?;
    hands_fit(entry, hands, triplet)
}

pub fn refine_best_skill(triplets: &[SubgoalTriplet], ctx: &PlanningContext<'_>) -> Result<RefinedPlanSkeleton> {
    let mut hands = PredictedHands::default();
    let mut sequence = Vec::with_capacity(triplets.len());
    for t in triplets {
        let candidates = ctx.kb.retrieve_top_k(&t.abstract_skill, REFINE_CANDIDATES);
        let mut rejected = Vec::new();
        let mut chosen = None;
        for (entry, _) in candidates {
            match check_candidate(ctx, entry, t, &hands) {
                Ok(fit) => {
                    chosen = Some((entry, fit));
                    break;
                }
                Err(why) => rejected.push(format!("`{}` ({why})", entry.name)),
            }
        }
        let Some((entry, fit)) = chosen else {
            return Err(Error::Refinement {
                object_point: t.object_point,
                abstract_skill: t.abstract_skill.clone(),
                rejected: rejected.join("; "),
            });
        };
        advance_hands(entry, fit, t, &mut hands);
        sequence.push(RefinedStep {
            object_point: t.object_point,
            goal_text: t.goal_text.clone(),
            best_skill: entry.name.clone(),
            abstract_skill: t.abstract_skill.clone(),
            reversed: fit == HandFit::Reversed,
        });
    }
    Ok(RefinedPlanSkeleton { sequence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_adjacency, parse_scene};
    use crate::skills::parse_kb;

    const STORE: &str = include_str!("../../../fixtures/scenes/store.json");
    const YARD: &str = include_str!("../../../fixtures/scenes/yard.json");
    const CAFE: &str = include_str!("../../../fixtures/scenes/cafe.json");
    const KB: &str = include_str!("../../../fixtures/skills.json");

    fn task(intents: Vec<Intent>) -> TaskSpec {
        TaskSpec {
            schema: TASK_SCHEMA.into(),
            name: "t".into(),
            scene: None,
            intents,
            goal_predicates: vec![],
        }
    }

    fn plan(scene: &str, intents: Vec<Intent>, threshold: f64) -> (SceneDocument, AdjacencyGraph, Vec<SubgoalTriplet>) {
        let scene = parse_scene(scene).unwrap();
        let adj = build_adjacency(&scene, threshold);
        let t = generate_subgoals(&task(intents), &scene).unwrap();
        (scene, adj, t)
    }

    fn lunch_box_intents() -> Vec<Intent> {
        vec![
            Intent::new(Verb::Acquire, "lunch box", None),
            Intent::new(Verb::OperateWithHeld, "microwave", Some("lunch box")),
        ]
    }

    #[test]
    fn lunch_box_goal_texts() {
        let (_, _, t) = plan(STORE, lunch_box_intents(), 1.2);
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].object_point, t[1].object_point), (1, 4));
        assert_eq!(t[0].goal_text, "grab the lunch box");
        assert_eq!(t[1].goal_text, "open the microwave door and place the lunch box inside");
        assert!(t[0].holds_established.contains("lunch box"));
        assert!(t[1].holds_required.contains("lunch box"));
    }

    #[test]
    fn empty_intents() {
        let (_, _, t) = plan(STORE, vec![], 1.2);
        assert!(t.is_empty());
    }

    #[test]
    fn lowest_id_match_wins() {
        let scene = parse_scene(
            r#"{"object_points":[{"id":7,"label":"cola","position":[0,0,0]},
                {"id":5,"label":"Cola","position":[3,0,0]},
                {"id":2,"label":"cola can","position":[6,0,0]}]}"#,
        )
        .unwrap();
        let t = generate_subgoals(&task(vec![Intent::new(Verb::Acquire, "cola", None)]), &scene).unwrap();
        assert_eq!(t[0].object_point, 5);
    }

    #[test]
    fn unknown_label_lists_scene_labels() {
        let scene = parse_scene(YARD).unwrap();
        let err = generate_subgoals(&task(vec![Intent::new(Verb::Acquire, "kettle", None)]), &scene).unwrap_err();
        match err {
            Error::UnresolvedLabel { label, available } => {
                assert_eq!(label, "kettle");
                assert!(available.contains("watering can"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn cup_and_button_merge() {
        let (scene, adj, t) = plan(
            CAFE,
            vec![
                Intent::new(Verb::Acquire, "coffee cup", None),
                Intent::new(Verb::Press, "coffee machine", None),
            ],
            1.2,
        );
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        let m = merge_subgoals(t, &ctx);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].goal_text, "grab the coffee cup; press the coffee machine button");
        assert_eq!(m[0].abstract_skill, "grab a single item while press a button");
        // Both objects are 0.7 m apart, so either anchor has the same worst
        // distance and the lower id wins.
        assert_eq!(m[0].object_point, 3);
    }

    #[test]
    fn distant_triplets_stay_apart() {
        let intents = vec![
            Intent::new(Verb::Acquire, "watering can", None),
            Intent::new(Verb::Acquire, "flower", None),
        ];
        let (scene, adj, t) = plan(YARD, intents, 1.2);
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        assert_eq!(merge_subgoals(t.clone(), &ctx), t);
    }

    #[test]
    fn hold_dependence_blocks_merge() {
        // A huge threshold makes every pair adjacent; only the hold matters.
        let (scene, adj, t) = plan(STORE, lunch_box_intents(), 50.0);
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        assert!(ctx.can_merge(&t[0], &t[1]).is_none());
        assert_eq!(merge_subgoals(t.clone(), &ctx).len(), 2);
    }

    #[test]
    fn hold_carried_across_navigation() {
        let intents = vec![
            Intent::new(Verb::Acquire, "watering can", None),
            Intent::new(Verb::PourInto, "watering can", Some("flower")),
        ];
        let (scene, adj, t) = plan(YARD, intents, 1.2);
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        let r = resolve_continuity(t, &ctx, true).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[1].holds_carried.contains("watering can"));
        assert!(check_continuity(&r).is_ok());
    }

    #[test]
    fn missing_grasp_is_unsatisfiable() {
        let (scene, adj, t) = plan(YARD, vec![Intent::new(Verb::PourInto, "watering can", Some("flower"))], 1.2);
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        match resolve_continuity(t.clone(), &ctx, true) {
            Err(Error::UnsatisfiableContinuity(label)) => assert_eq!(label, "watering can"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(check_continuity(&t).is_err());
    }

    #[test]
    fn local_hold_is_left_alone() {
        let intents = vec![
            Intent::new(Verb::Acquire, "trash", None),
            Intent::new(Verb::DiscardInto, "trash", Some("bin")),
        ];
        let (scene, adj, t) = plan(YARD, intents, 1.2);
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        let once = resolve_continuity(t, &ctx, true).unwrap();
        assert_eq!(once.len(), 1);
        assert!(once[0].holds_required.is_empty());
        assert_eq!(resolve_continuity(once.clone(), &ctx, true).unwrap(), once);
    }

    fn refine_one(scene: &str, t: SubgoalTriplet) -> Result<RefinedPlanSkeleton> {
        let scene = parse_scene(scene).unwrap();
        let adj = build_adjacency(&scene, 1.2);
        let kb = parse_kb(KB).unwrap();
        let ctx = PlanningContext {
            scene: &scene,
            adjacency: &adj,
            kb: &kb,
        };
        refine_best_skill(&[t], &ctx)
    }

    fn triplet(object_point: u32, abstract_skill: &str, verbs: &[Verb]) -> SubgoalTriplet {
        SubgoalTriplet {
            object_point,
            goal_text: String::new(),
            abstract_skill: abstract_skill.into(),
            holds_required: BTreeSet::new(),
            holds_established: BTreeSet::new(),
            holds_released: BTreeSet::new(),
            holds_carried: BTreeSet::new(),
            constituents: verbs
                .iter()
                .map(|v| Constituent {
                    verb: *v,
                    subject_label: String::new(),
                    object_point,
                })
                .collect(),
        }
    }

    #[test]
    fn both_colas_pick_two_handed_grab() {
        let t = triplet(2, "grab both cola bottles", &[Verb::Acquire, Verb::Acquire]);
        let r = refine_one(STORE, t).unwrap();
        assert_eq!(r.sequence[0].best_skill, "grab two items with two hands");
    }

    #[test]
    fn exact_name_is_selected() {
        let t = triplet(4, "press a button", &[Verb::Press]);
        assert_eq!(refine_one(STORE, t).unwrap().sequence[0].best_skill, "press a button");
    }

    #[test]
    fn pull_door_beats_lift_door() {
        let t = triplet(4, "open the microwave", &[Verb::Open]);
        let r = refine_one(STORE, t).unwrap();
        assert_eq!(r.sequence[0].best_skill, "open a door by pulling");
    }

    #[test]
    fn refinement_failure_lists_rejections() {
        let t = triplet(5, "press a button", &[Verb::Press]);
        // The counter has no button; the cash register next to it does.
        assert!(refine_one(STORE, t).is_ok());
        let t = triplet(1, "pour from container A to container B", &[Verb::PourInto]);
        match refine_one(STORE, t) {
            Err(Error::Refinement { rejected, .. }) => assert!(rejected.contains("`pour from container A to container B`")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
