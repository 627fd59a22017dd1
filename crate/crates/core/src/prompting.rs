//! Tuple generation: bind a skill prototype's point templates to the
//! interaction points reachable from the current stance, instantiate the
//! synchronized two-hand sequence, and check it against the hand-state,
//! zone and affordance rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hands::{Grip, Hand, HandPrimitive, HandState};
use crate::scene::{SampledPoint, Zone};
use crate::skills::{tokenize, HandFit, KnowledgeBase, SkillEntry, PROTOTYPES};

/// Nominal lateral offset of each shoulder in the stance frame, meters.
const SHOULDER_OFFSET: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandAction {
    pub primitive: HandPrimitive,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<u32>,
    pub reason: String,
}

impl HandAction {
    pub fn idle() -> Self {
        Self {
            primitive: HandPrimitive::Idle,
            point: None,
            reason: "idle".into(),
        }
    }

    pub fn new(primitive: HandPrimitive, point: u32, reason: impl Into<String>) -> Self {
        Self {
            primitive,
            point: Some(point),
            reason: reason.into(),
        }
    }
}

/// One synchronized step: an action for each hand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BimanualTuple {
    pub right: HandAction,
    pub left: HandAction,
}

impl BimanualTuple {
    pub fn action(&self, hand: Hand) -> &HandAction {
        match hand {
            Hand::Right => &self.right,
            Hand::Left => &self.left,
        }
    }

    fn action_mut(&mut self, hand: Hand) -> &mut HandAction {
        match hand {
            Hand::Right => &mut self.right,
            Hand::Left => &mut self.left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub tuples: Vec<BimanualTuple>,
    pub subgoal_index: usize,
    pub skill_used: String,
    pub reversed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    HandState,
    Zone,
    Affordance,
    Binding,
    DuplicateTarget,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::HandState => "hand-state",
            ViolationKind::Zone => "zone",
            ViolationKind::Affordance => "affordance",
            ViolationKind::Binding => "binding",
            ViolationKind::DuplicateTarget => "duplicate-target",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub tuple_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<Hand>,
    pub detail: String,
}

impl Violation {
    pub fn new(kind: ViolationKind, tuple_index: usize, hand: Option<Hand>, detail: impl Into<String>) -> Self {
        Self {
            kind,
            tuple_index,
            hand,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at tuple {}", self.kind, self.tuple_index)?;
        if let Some(h) = self.hand {
            write!(f, " ({h} hand)")?;
        }
        write!(f, ": {}", self.detail)
    }
}

fn zone_allows(hand: Hand, zone: Zone) -> bool {
    match hand {
        Hand::Left => zone != Zone::Right,
        Hand::Right => zone != Zone::Left,
    }
}

fn shoulder(hand: Hand) -> f64 {
    match hand {
        Hand::Left => SHOULDER_OFFSET,
        Hand::Right => -SHOULDER_OFFSET,
    }
}

/// Slot → interaction point assignment for one prototype.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub slots: BTreeMap<String, u32>,
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindFailure {
    pub skill: String,
    pub reasons: Vec<String>,
}

impl fmt::Display for BindFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.skill, self.reasons.join("; "))
    }
}

fn actual_hand(template_hand: Hand, reversed: bool) -> Hand {
    if reversed {
        template_hand.other()
    } else {
        template_hand
    }
}

/// First predicate a point fails for a slot, or None when it qualifies.
fn slot_rejection(
    entry: &SkillEntry,
    slot: &str,
    users: &BTreeSet<Hand>,
    sp: &SampledPoint,
    hands: &HandState,
) -> Option<String> {
    let tpl = entry.slot(slot)?;
    let d = &sp.point.descriptor;
    if hands.holder_of(sp.point.parent_object).is_some() {
        return Some("object already in hand".into());
    }
    if !tpl.category_matches(&sp.object_label) {
        return Some(format!("object `{}` is not a {}", sp.object_label, tpl.object_category));
    }
    if let Some(a) = tpl.required_affordances.difference(&d.affordances).next() {
        return Some(format!("lacks affordance {a}"));
    }
    if let Some(a) = tpl.required_attributes.difference(&d.visual_attributes).next() {
        return Some(format!("lacks attribute {a}"));
    }
    if let Some(a) = tpl.required_state.difference(&d.state_tags).next() {
        return Some(format!("not in state {a}"));
    }
    if let Some(h) = users.iter().find(|h| !zone_allows(**h, sp.zone)) {
        return Some(format!("{} zone unreachable for {h} hand", sp.zone));
    }
    None
}

/// Bind every point template slot of `entry` to a distinct reachable point.
pub fn bind_prototype(
    entry: &SkillEntry,
    points: &[SampledPoint],
    hands: &HandState,
) -> std::result::Result<Binding, BindFailure> {
    let fail = |reasons: Vec<String>| BindFailure {
        skill: entry.name.clone(),
        reasons,
    };
    let fit = entry.hand_preconditions.fit(hands).ok_or_else(|| {
        fail(vec![format!(
            "hand preconditions unmet (right {}, left {})",
            hands.right, hands.left
        )])
    })?;
    let reversed = fit == HandFit::Reversed;

    let mut users: BTreeMap<&str, BTreeSet<Hand>> = BTreeMap::new();
    for step in &entry.tuple_template {
        for th in Hand::BOTH {
            if let Some(slot) = &step.action(th).slot {
                users
                    .entry(slot.as_str())
                    .or_default()
                    .insert(actual_hand(th, reversed));
            }
        }
    }

    let mut sorted: Vec<&SampledPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.id());

    let mut candidates: Vec<(&str, Vec<u32>)> = Vec::new();
    let mut reasons = Vec::new();
    for tpl in &entry.point_preconditions {
        let slot_users = users.get(tpl.slot.as_str()).cloned().unwrap_or_default();
        let mut ok: Vec<(f64, u32)> = Vec::new();
        let mut rejected = Vec::new();
        for sp in &sorted {
            match slot_rejection(entry, &tpl.slot, &slot_users, sp, hands) {
                None => {
                    let score: f64 = slot_users.iter().map(|h| (sp.lateral - shoulder(*h)).abs()).sum();
                    ok.push((score, sp.id()));
                }
                Some(why) => rejected.push(format!("point {} {why}", sp.id())),
            }
        }
        if ok.is_empty() {
            let detail = if rejected.is_empty() {
                "no reachable points".to_string()
            } else {
                rejected.join(", ")
            };
            reasons.push(format!("slot `{}` unsatisfiable: {detail}", tpl.slot));
        }
        ok.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.push((tpl.slot.as_str(), ok.into_iter().map(|(_, id)| id).collect()));
    }
    if !reasons.is_empty() {
        return Err(fail(reasons));
    }

    fn search(cands: &[(&str, Vec<u32>)], chosen: &mut Vec<u32>) -> bool {
        let Some(((_, ids), rest)) = cands.split_first() else {
            return true;
        };
        for id in ids {
            if chosen.contains(id) {
                continue;
            }
            chosen.push(*id);
            if search(rest, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    let mut chosen = Vec::new();
    if !search(&candidates, &mut chosen) {
        return Err(fail(vec!["slots cannot be bound to distinct points".into()]));
    }
    Ok(Binding {
        slots: candidates
            .iter()
            .map(|(s, _)| s.to_string())
            .zip(chosen)
            .collect(),
        reversed,
    })
}

fn reason(hand: Hand, grip: &Grip, point: u32, primitive: HandPrimitive) -> String {
    format!("{hand} is {grip}; point {point} affords {primitive}")
}

/// Apply one tuple's grasps and releases to a hand state.
fn advance(hands: &mut HandState, tuple: &BimanualTuple, by_id: &BTreeMap<u32, &SampledPoint>) {
    for hand in Hand::BOTH {
        let a = tuple.action(hand);
        let Some(p) = a.point.and_then(|id| by_id.get(&id)) else {
            continue;
        };
        match a.primitive {
            HandPrimitive::Grasp => {
                *hands.get_mut(hand) = Grip::Holding {
                    object: p.point.parent_object,
                    label: p.object_label.clone(),
                }
            }
            HandPrimitive::Put | HandPrimitive::Release => *hands.get_mut(hand) = Grip::Free,
            _ => {}
        }
    }
}

fn instantiate(
    entry: &SkillEntry,
    binding: &Binding,
    hands: &HandState,
    points: &[SampledPoint],
    subgoal_index: usize,
) -> ActionSequence {
    let by_id: BTreeMap<u32, &SampledPoint> = points.iter().map(|p| (p.id(), p)).collect();
    let mut sim = hands.clone();
    let mut tuples = Vec::with_capacity(entry.tuple_template.len());
    for step in &entry.tuple_template {
        let mut tuple = BimanualTuple {
            right: HandAction::idle(),
            left: HandAction::idle(),
        };
        for th in Hand::BOTH {
            let action = step.action(th);
            if let Some(slot) = &action.slot {
                let hand = actual_hand(th, binding.reversed);
                let point = binding.slots[slot];
                *tuple.action_mut(hand) =
                    HandAction::new(action.primitive, point, reason(hand, sim.get(hand), point, action.primitive));
            }
        }
        advance(&mut sim, &tuple, &by_id);
        tuples.push(tuple);
    }
    ActionSequence {
        tuples,
        subgoal_index,
        skill_used: entry.name.clone(),
        reversed: binding.reversed,
    }
}

/// Retrieve prototypes for `best_skill`, bind the first that fits, and
/// return its instantiated sequence. The result always validates cleanly.
pub fn generate_tuples(
    subgoal_index: usize,
    best_skill: &str,
    hands: &HandState,
    points: &[SampledPoint],
    kb: &KnowledgeBase,
) -> Result<ActionSequence> {
    if kb.get(best_skill).is_none() {
        return Err(Error::UnknownSkill(best_skill.to_string()));
    }
    let mut failures = Vec::new();
    for (entry, _) in kb.retrieve_top_k(best_skill, PROTOTYPES) {
        match bind_prototype(entry, points, hands) {
            Ok(binding) => {
                let seq = instantiate(entry, &binding, hands, points, subgoal_index);
                let violations = validate_sequence(&seq, hands, points);
                if violations.is_empty() {
                    return Ok(seq);
                }
                failures.push(format!(
                    "`{}`: {}",
                    entry.name,
                    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
                ));
            }
            Err(f) => failures.push(f.to_string()),
        }
    }
    Err(Error::Generation {
        skill: best_skill.to_string(),
        detail: failures.join(" | "),
    })
}

/// Tuple generation without prototype retrieval: primitives are read off
/// the verbs in the skill name and each is sent to the right hand on the
/// lowest-id reachable point with a compatible affordance.
pub fn generate_from_name(
    subgoal_index: usize,
    best_skill: &str,
    hands: &HandState,
    points: &[SampledPoint],
) -> Result<ActionSequence> {
    let mut sorted: Vec<&SampledPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.id());
    let by_id: BTreeMap<u32, &SampledPoint> = points.iter().map(|p| (p.id(), p)).collect();
    let mut sim = hands.clone();
    let mut tuples = Vec::new();
    for token in tokenize(best_skill) {
        let primitive = match token.as_str() {
            "grab" | "grasp" | "pick" => HandPrimitive::Grasp,
            "press" => HandPrimitive::Press,
            "open" | "pull" | "pulling" => HandPrimitive::Pull,
            "close" | "push" | "lift" | "lifting" => HandPrimitive::Push,
            "pour" | "water" => HandPrimitive::Pour,
            "place" | "put" | "pay" => HandPrimitive::Put,
            "release" | "discard" => HandPrimitive::Release,
            _ => continue,
        };
        let target = sorted.iter().find(|p| {
            primitive
                .compatible_affordances()
                .iter()
                .any(|a| p.point.descriptor.affords(a))
        });
        let Some(target) = target else {
            return Err(Error::Generation {
                skill: best_skill.to_string(),
                detail: format!("no reachable point affords {primitive}"),
            });
        };
        let tuple = BimanualTuple {
            right: HandAction::new(
                primitive,
                target.id(),
                reason(Hand::Right, sim.get(Hand::Right), target.id(), primitive),
            ),
            left: HandAction::idle(),
        };
        advance(&mut sim, &tuple, &by_id);
        tuples.push(tuple);
    }
    if tuples.is_empty() {
        return Err(Error::Generation {
            skill: best_skill.to_string(),
            detail: "skill name names no action".into(),
        });
    }
    let seq = ActionSequence {
        tuples,
        subgoal_index,
        skill_used: best_skill.to_string(),
        reversed: false,
    };
    let violations = validate_sequence(&seq, hands, points);
    if violations.is_empty() {
        Ok(seq)
    } else {
        Err(Error::Generation {
            skill: best_skill.to_string(),
            detail: violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        })
    }
}

/// Replay `seq` from `hands` and report every rule it breaks.
pub fn validate_sequence(seq: &ActionSequence, hands: &HandState, points: &[SampledPoint]) -> Vec<Violation> {
    let by_id: BTreeMap<u32, &SampledPoint> = points.iter().map(|p| (p.id(), p)).collect();
    let mut sim = hands.clone();
    let mut out = Vec::new();
    for (j, tuple) in seq.tuples.iter().enumerate() {
        if tuple.right.primitive.is_idle() && tuple.left.primitive.is_idle() {
            out.push(Violation::new(ViolationKind::Binding, j, None, "both hands idle"));
        }
        if let (Some(a), Some(b)) = (tuple.right.point, tuple.left.point) {
            if a == b {
                out.push(Violation::new(
                    ViolationKind::DuplicateTarget,
                    j,
                    None,
                    format!("both hands target point {a}"),
                ));
            }
        }
        for hand in Hand::BOTH {
            let a = tuple.action(hand);
            let v = |kind, detail: String| Violation::new(kind, j, Some(hand), detail);
            let point = match (a.primitive.is_idle(), a.point) {
                (true, None) => continue,
                (false, Some(p)) => p,
                (true, Some(p)) => {
                    out.push(v(ViolationKind::Binding, format!("idle hand names point {p}")));
                    continue;
                }
                (false, None) => {
                    out.push(v(ViolationKind::Binding, format!("{} without a target point", a.primitive)));
                    continue;
                }
            };
            let Some(sp) = by_id.get(&point) else {
                out.push(v(
                    ViolationKind::Binding,
                    format!("point {point} is not among the reachable points"),
                ));
                continue;
            };
            let d = &sp.point.descriptor;
            if !zone_allows(hand, sp.zone) {
                out.push(v(
                    ViolationKind::Zone,
                    format!("point {point} lies in the {} zone", sp.zone),
                ));
            }
            if !a.primitive.compatible_affordances().iter().any(|t| d.affords(t)) {
                out.push(v(
                    ViolationKind::Affordance,
                    format!("point {point} does not afford {}", a.primitive),
                ));
            }
            if a.primitive == HandPrimitive::Pull && !d.visual_attributes.contains("hinged") {
                out.push(v(
                    ViolationKind::Affordance,
                    format!("pull on point {point} which is not hinged"),
                ));
            }
            if a.primitive == HandPrimitive::Grasp && d.visual_attributes.contains("wall-mounted") {
                out.push(v(
                    ViolationKind::Affordance,
                    format!("grasp on wall-mounted point {point}"),
                ));
            }
            let grip = sim.get(hand);
            match a.primitive {
                HandPrimitive::Grasp => {
                    if !grip.is_free() {
                        out.push(v(
                            ViolationKind::HandState,
                            format!("grasp of point {point} while {grip}"),
                        ));
                    }
                    if sim.get(hand.other()).held_object() == Some(sp.point.parent_object) {
                        out.push(v(
                            ViolationKind::HandState,
                            format!("point {point} belongs to an object held by the {} hand", hand.other()),
                        ));
                    }
                }
                p if p.needs_held_object() => {
                    if grip.is_free() {
                        out.push(v(
                            ViolationKind::HandState,
                            format!("{p} on point {point} with a free hand"),
                        ));
                    } else if grip.held_object() == Some(sp.point.parent_object) {
                        out.push(v(
                            ViolationKind::Affordance,
                            format!("{p} targets point {point} of the held object itself"),
                        ));
                    }
                }
                _ => {}
            }
        }
        advance(&mut sim, tuple, &by_id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Descriptor, InteractionPoint};

    fn sp(id: u32, parent: u32, label: &str, zone: Zone, afford: &[&str]) -> SampledPoint {
        SampledPoint {
            point: InteractionPoint {
                id,
                parent_object: parent,
                position: [0.0; 3],
                descriptor: Descriptor {
                    part_label: "body".into(),
                    affordances: afford.iter().map(|s| s.to_string()).collect(),
                    ..Descriptor::default()
                },
            },
            zone,
            object_label: label.into(),
            lateral: match zone {
                Zone::Left => 0.3,
                Zone::Mid => 0.0,
                Zone::Right => -0.3,
            },
        }
    }

    fn seq(tuples: Vec<BimanualTuple>) -> ActionSequence {
        ActionSequence {
            tuples,
            subgoal_index: 0,
            skill_used: "test".into(),
            reversed: false,
        }
    }

    const CAFE: &str = include_str!("../../../fixtures/scenes/cafe.json");
    const KB: &str = include_str!("../../../fixtures/skills.json");

    fn kb() -> KnowledgeBase {
        crate::skills::parse_kb(KB).unwrap()
    }

    fn cafe_points(stance: [f64; 3]) -> Vec<SampledPoint> {
        let scene = crate::scene::parse_scene(CAFE).unwrap();
        let pose = crate::geometry::Pose::new(stance, std::f64::consts::FRAC_PI_2);
        crate::scene::sample_reachable(&scene, &pose, 1.0)
    }

    fn holding(hand: Hand, object: u32, label: &str) -> HandState {
        let mut h = HandState::free();
        *h.get_mut(hand) = Grip::Holding {
            object,
            label: label.into(),
        };
        h
    }

    #[test]
    fn two_handed_grab_matches_zones() {
        let k = kb();
        let entry = k.get("grab two items with two hands").unwrap();
        let pts = [sp(3, 1, "cola", Zone::Left, &["grab"]), sp(8, 2, "cola", Zone::Right, &["grab"])];
        let b = bind_prototype(entry, &pts, &HandState::free()).unwrap();
        assert_eq!(b.slots["item_left"], 3);
        assert_eq!(b.slots["item_right"], 8);
        assert!(!b.reversed);
    }

    #[test]
    fn left_holder_mirrors_binding() {
        let k = kb();
        let entry = k.get("place an item into a container").unwrap();
        let pts = [sp(5, 3, "shelf", Zone::Mid, &["put-on"])];
        let hands = holding(Hand::Left, 9, "cup");
        let b = bind_prototype(entry, &pts, &hands).unwrap();
        assert!(b.reversed);
        let seq = generate_tuples(0, &entry.name, &hands, &pts, &k).unwrap();
        assert_eq!(seq.tuples[0].left.primitive, HandPrimitive::Put);
        assert!(seq.tuples[0].right.primitive.is_idle());
        assert!(seq.reversed);
    }

    #[test]
    fn missing_press_point_names_slot() {
        let k = kb();
        let entry = k.get("press a button").unwrap();
        let pts = [sp(1, 1, "box", Zone::Mid, &["grab"])];
        let err = bind_prototype(entry, &pts, &HandState::free()).unwrap_err();
        assert!(err.reasons[0].contains("slot `button`"), "{err}");
        assert!(err.reasons[0].contains("point 1 lacks affordance press"), "{err}");
    }

    #[test]
    fn make_coffee_is_two_tuples() {
        let pts = cafe_points([3.45, 4.65, 1.0]);
        let zone = |id: u32| pts.iter().find(|p| p.id() == id).unwrap().zone;
        assert_eq!(zone(15), Zone::Left);
        assert_eq!(zone(17), Zone::Right);
        let seq = generate_tuples(
            0,
            "place an item under a spout and press a button",
            &HandState::free(),
            &pts,
            &kb(),
        )
        .unwrap();
        assert_eq!(seq.tuples.len(), 2);
        assert_eq!(seq.tuples[0].left, HandAction::new(HandPrimitive::Grasp, 15, "left is free; point 15 affords grasp"));
        assert!(seq.tuples[0].right.primitive.is_idle());
        assert_eq!(
            (seq.tuples[1].left.primitive, seq.tuples[1].left.point),
            (HandPrimitive::Put, Some(16))
        );
        assert_eq!(
            (seq.tuples[1].right.primitive, seq.tuples[1].right.point),
            (HandPrimitive::Press, Some(17))
        );
    }

    #[test]
    fn unimanual_uses_one_hand_per_tuple() {
        let pts = cafe_points([3.45, 4.65, 1.0]);
        let seq = generate_tuples(0, "press a button", &HandState::free(), &pts, &kb()).unwrap();
        for t in &seq.tuples {
            assert_eq!([&t.right, &t.left].iter().filter(|a| !a.primitive.is_idle()).count(), 1);
        }
    }

    #[test]
    fn tea_pours_into_the_cup_not_the_jug() {
        let pts = cafe_points([2.25, 1.65, 0.8]);
        let hands = holding(Hand::Right, 1, "teapot");
        let seq = generate_tuples(0, "pour from container A to container B", &hands, &pts, &kb()).unwrap();
        assert_eq!(seq.tuples.len(), 1);
        assert_eq!(seq.tuples[0].right.primitive, HandPrimitive::Pour);
        assert_eq!(seq.tuples[0].right.point, Some(14));
    }

    #[test]
    fn naive_generator_picks_lowest_id() {
        let pts = cafe_points([2.25, 1.65, 0.8]);
        let hands = holding(Hand::Right, 1, "teapot");
        let seq = generate_from_name(0, "pour from container A to container B", &hands, &pts).unwrap();
        assert_eq!(seq.tuples[0].right.point, Some(13));
    }

    #[test]
    fn empty_sequence_is_clean() {
        assert!(validate_sequence(&seq(vec![]), &HandState::free(), &[]).is_empty());
    }

    #[test]
    fn grasp_with_full_hand() {
        let pts = [sp(4, 2, "cola", Zone::Mid, &["grab"])];
        let hands = HandState {
            right: Grip::Holding {
                object: 9,
                label: "cola".into(),
            },
            left: Grip::Free,
        };
        let s = seq(vec![BimanualTuple {
            right: HandAction::new(HandPrimitive::Grasp, 4, ""),
            left: HandAction::idle(),
        }]);
        let v = validate_sequence(&s, &hands, &pts);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::HandState);
        assert_eq!(v[0].tuple_index, 0);
        assert_eq!(v[0].hand, Some(Hand::Right));
    }

    #[test]
    fn zone_and_duplicate_rules() {
        let pts = [sp(1, 1, "box", Zone::Right, &["grab"])];
        let s = seq(vec![BimanualTuple {
            right: HandAction::new(HandPrimitive::Grasp, 1, ""),
            left: HandAction::new(HandPrimitive::Grasp, 1, ""),
        }]);
        let kinds: BTreeSet<ViolationKind> = validate_sequence(&s, &HandState::free(), &pts)
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert!(kinds.contains(&ViolationKind::DuplicateTarget));
        assert!(kinds.contains(&ViolationKind::Zone));
    }

    #[test]
    fn pull_needs_hinge_and_grasp_rejects_wall_mount() {
        let mut handle = sp(1, 1, "door", Zone::Mid, &["pull", "grab"]);
        handle.point.descriptor.visual_attributes.insert("wall-mounted".into());
        let s = seq(vec![
            BimanualTuple {
                right: HandAction::new(HandPrimitive::Pull, 1, ""),
                left: HandAction::idle(),
            },
            BimanualTuple {
                right: HandAction::new(HandPrimitive::Grasp, 1, ""),
                left: HandAction::idle(),
            },
        ]);
        let v = validate_sequence(&s, &HandState::free(), &[handle]);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.kind == ViolationKind::Affordance));
    }

    #[test]
    fn release_with_free_hand_and_unknown_point() {
        let s = seq(vec![BimanualTuple {
            right: HandAction::new(HandPrimitive::Release, 3, ""),
            left: HandAction::idle(),
        }]);
        let v = validate_sequence(&s, &HandState::free(), &[]);
        assert_eq!(v[0].kind, ViolationKind::Binding);
        let pts = [sp(3, 1, "bin", Zone::Mid, &["release-into"])];
        let v = validate_sequence(&s, &HandState::free(), &pts);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::HandState);
    }
}
