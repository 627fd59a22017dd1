//! Symbolic world state: agent pose, hand grips, per-point state tags and
//! where each object currently is.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Pose};
use crate::hands::{Grip, Hand, HandPrimitive, HandState};
use crate::prompting::{BimanualTuple, HandAction, Violation, ViolationKind};
use crate::scene::{sample_reachable, SampledPoint, SceneDocument, Zone};
use crate::subgoal::{resolve_label, GoalPredicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "point", rename_all = "kebab-case")]
pub enum Location {
    Origin,
    InHand(Hand),
    At(u32),
    Inside(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub agent: Pose,
    pub hands: HandState,
    pub point_states: BTreeMap<u32, BTreeSet<String>>,
    pub object_locations: BTreeMap<u32, Location>,
    pub completed_goals: Vec<String>,
}

fn same_label(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

impl WorldState {
    pub fn new(scene: &SceneDocument) -> Self {
        Self {
            agent: scene
                .metadata
                .agent_start
                .unwrap_or_else(|| Pose::new([0.0; 3], 0.0)),
            hands: HandState::free(),
            point_states: scene
                .interaction_points
                .iter()
                .map(|p| (p.id, p.descriptor.state_tags.clone()))
                .collect(),
            object_locations: scene
                .object_points
                .iter()
                .map(|o| (o.id, Location::Origin))
                .collect(),
            completed_goals: Vec::new(),
        }
    }

    /// Points reachable from the current pose on objects still where the
    /// scene put them, with descriptors showing the current state tags.
    pub fn sample(&self, scene: &SceneDocument, reach_threshold: f64) -> Vec<SampledPoint> {
        let mut points = sample_reachable(scene, &self.agent, reach_threshold);
        points.retain(|sp| self.object_locations.get(&sp.point.parent_object) == Some(&Location::Origin));
        for sp in &mut points {
            if let Some(tags) = self.point_states.get(&sp.id()) {
                sp.point.descriptor.state_tags = tags.clone();
            }
        }
        points
    }

    /// Union of the state tags over every point of an object.
    pub fn object_tags(&self, scene: &SceneDocument, object: u32) -> BTreeSet<String> {
        scene
            .points_of(object)
            .filter_map(|p| self.point_states.get(&p.id))
            .flatten()
            .cloned()
            .collect()
    }

    /// Execute one tuple atomically. Both hand orders are tried; the tuple
    /// is committed only when they agree.
    pub fn execute_tuple(
        &mut self,
        scene: &SceneDocument,
        tuple: &BimanualTuple,
        reachable: &[SampledPoint],
        index: usize,
    ) -> std::result::Result<(), Violation> {
        if let (Some(a), Some(b)) = (tuple.right.point, tuple.left.point) {
            if a == b {
                return Err(Violation::new(
                    ViolationKind::DuplicateTarget,
                    index,
                    None,
                    format!("both hands target point {a}"),
                ));
            }
        }
        let run = |first: Hand| {
            let mut s = self.clone();
            s.apply(scene, first, tuple.action(first), reachable, index)?;
            s.apply(scene, first.other(), tuple.action(first.other()), reachable, index)?;
            Ok::<_, Violation>(s)
        };
        match (run(Hand::Right), run(Hand::Left)) {
            (Ok(a), Ok(b)) if a == b => {
                *self = a;
                Ok(())
            }
            (Err(e), Err(_)) => Err(e),
            _ => Err(Violation::new(
                ViolationKind::DuplicateTarget,
                index,
                None,
                "hand effects do not commute",
            )),
        }
    }

    fn apply(
        &mut self,
        scene: &SceneDocument,
        hand: Hand,
        action: &HandAction,
        reachable: &[SampledPoint],
        index: usize,
    ) -> std::result::Result<(), Violation> {
        let v = |kind, detail: String| Violation::new(kind, index, Some(hand), detail);
        if action.primitive.is_idle() {
            return Ok(());
        }
        let Some(pid) = action.point else {
            return Err(v(ViolationKind::Binding, format!("{} without a point", action.primitive)));
        };
        let Some(sp) = reachable.iter().find(|p| p.id() == pid) else {
            return Err(v(ViolationKind::Zone, format!("point {pid} out of reach")));
        };
        let allowed = match hand {
            Hand::Left => sp.zone != Zone::Right,
            Hand::Right => sp.zone != Zone::Left,
        };
        if !allowed {
            return Err(v(ViolationKind::Zone, format!("point {pid} lies in the {} zone", sp.zone)));
        }
        let target_object = sp.point.parent_object;
        match action.primitive {
            HandPrimitive::Grasp => {
                if !self.hands.get(hand).is_free() {
                    return Err(v(ViolationKind::HandState, format!("grasp while {}", self.hands.get(hand))));
                }
                if self.object_locations.get(&target_object) != Some(&Location::Origin) {
                    return Err(v(ViolationKind::HandState, format!("object {target_object} is not available")));
                }
                *self.hands.get_mut(hand) = Grip::Holding {
                    object: target_object,
                    label: scene.object_label(target_object).to_string(),
                };
                self.object_locations.insert(target_object, Location::InHand(hand));
            }
            HandPrimitive::Put | HandPrimitive::Release | HandPrimitive::Pour => {
                let Some(held) = self.hands.get(hand).held_object() else {
                    return Err(v(ViolationKind::HandState, format!("{} with a free hand", action.primitive)));
                };
                match action.primitive {
                    HandPrimitive::Put => {
                        self.object_locations.insert(held, Location::At(pid));
                        *self.hands.get_mut(hand) = Grip::Free;
                    }
                    HandPrimitive::Release => {
                        self.object_locations.insert(held, Location::Inside(pid));
                        *self.hands.get_mut(hand) = Grip::Free;
                    }
                    _ => {
                        if !self.object_tags(scene, held).contains("filled") {
                            return Err(v(ViolationKind::Affordance, format!("object {held} is empty")));
                        }
                        for p in scene.points_of(held) {
                            if let Some(tags) = self.point_states.get_mut(&p.id) {
                                tags.remove("filled");
                            }
                        }
                        self.point_states.entry(pid).or_default().insert("filled".into());
                    }
                }
            }
            _ => {}
        }
        self.apply_effects(scene, action.primitive, pid, target_object)
            .map_err(|detail| v(ViolationKind::Affordance, detail))
    }

    /// First effect rule for `primitive` on the point whose requirement
    /// holds on the point's object. No rule for the primitive is a no-op.
    fn apply_effects(
        &mut self,
        scene: &SceneDocument,
        primitive: HandPrimitive,
        pid: u32,
        object: u32,
    ) -> std::result::Result<(), String> {
        let Some(point) = scene.interaction(pid) else {
            return Ok(());
        };
        let rules: Vec<_> = point
            .descriptor
            .effects
            .iter()
            .filter(|r| r.primitive == primitive)
            .collect();
        if rules.is_empty() {
            return Ok(());
        }
        let tags = self.object_tags(scene, object);
        let Some(rule) = rules.iter().find(|r| r.required_state.is_subset(&tags)) else {
            let need: Vec<_> = rules[0].required_state.iter().map(String::as_str).collect();
            return Err(format!("{primitive} on point {pid} requires state {}", need.join(",")));
        };
        for p in scene.points_of(object) {
            if let Some(t) = self.point_states.get_mut(&p.id) {
                t.retain(|s| !rule.removes.contains(s));
            }
        }
        self.point_states
            .entry(pid)
            .or_default()
            .extend(rule.adds.iter().cloned());
        Ok(())
    }

    pub fn update_world(&mut self, goal_text: &str) {
        self.completed_goals.push(goal_text.to_string());
    }

    /// Conjunction over all goal predicates; an empty list holds.
    pub fn evaluate_task(&self, scene: &SceneDocument, goals: &[GoalPredicate]) -> Result<bool> {
        for g in goals {
            if !self.evaluate_goal(scene, g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn evaluate_goal(&self, scene: &SceneDocument, goal: &GoalPredicate) -> Result<bool> {
        match goal {
            GoalPredicate::State { point: Some(p), tag, .. } => {
                let tags = self
                    .point_states
                    .get(p)
                    .ok_or_else(|| Error::GoalReference(format!("unknown interaction point {p}")))?;
                Ok(tags.contains(tag))
            }
            GoalPredicate::State {
                point: None,
                object: Some(label),
                tag,
            } => {
                let id = resolve_label(scene, label).map_err(|e| Error::GoalReference(e.to_string()))?;
                Ok(self.object_tags(scene, id).contains(tag))
            }
            GoalPredicate::State { .. } => Err(Error::GoalReference("state goal names no point or object".into())),
            GoalPredicate::Located {
                object,
                at_point,
                radius,
            } => {
                let anchor = scene
                    .interaction(*at_point)
                    .ok_or_else(|| Error::GoalReference(format!("unknown interaction point {at_point}")))?;
                let ids: Vec<u32> = scene
                    .object_points
                    .iter()
                    .filter(|o| same_label(&o.label, object))
                    .map(|o| o.id)
                    .collect();
                if ids.is_empty() {
                    return Err(Error::GoalReference(format!("no object labelled `{object}`")));
                }
                Ok(ids.iter().all(|id| match self.object_locations.get(id) {
                    Some(Location::At(q)) | Some(Location::Inside(q)) => scene
                        .interaction(*q)
                        .is_some_and(|q| distance(q.position, anchor.position) <= *radius),
                    _ => false,
                }))
            }
            GoalPredicate::Held { object } => Ok(Hand::BOTH
                .iter()
                .any(|h| self.hands.get(*h).held_label().is_some_and(|l| same_label(l, object)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scene;

    const STORE: &str = include_str!("../../../../fixtures/scenes/store.json");

    fn store() -> SceneDocument {
        parse_scene(STORE).unwrap()
    }

    fn at(world: &mut WorldState, x: f64, y: f64) {
        world.agent = Pose::new([x, y, 1.0], std::f64::consts::FRAC_PI_2);
    }

    fn one(hand: Hand, primitive: HandPrimitive, point: u32) -> BimanualTuple {
        let act = HandAction::new(primitive, point, "");
        match hand {
            Hand::Right => BimanualTuple {
                right: act,
                left: HandAction::idle(),
            },
            Hand::Left => BimanualTuple {
                right: HandAction::idle(),
                left: act,
            },
        }
    }

    fn step(world: &mut WorldState, scene: &SceneDocument, t: BimanualTuple) -> std::result::Result<(), Violation> {
        let pts = world.sample(scene, 1.0);
        world.execute_tuple(scene, &t, &pts, 0)
    }

    #[test]
    fn grasp_cola_with_right_hand() {
        let s = store();
        let mut w = WorldState::new(&s);
        at(&mut w, 2.05, 4.15);
        step(&mut w, &s, one(Hand::Right, HandPrimitive::Grasp, 12)).unwrap();
        assert_eq!(w.hands.right.held_label(), Some("cola"));
        assert_eq!(w.object_locations[&2], Location::InHand(Hand::Right));
    }

    #[test]
    fn pull_opens_and_press_needs_closed_door() {
        let s = store();
        let mut w = WorldState::new(&s);
        at(&mut w, 6.95, 4.15);
        step(&mut w, &s, one(Hand::Left, HandPrimitive::Pull, 14)).unwrap();
        assert_eq!(w.point_states[&14], BTreeSet::from(["open".to_string()]));
        let v = step(&mut w, &s, one(Hand::Right, HandPrimitive::Press, 16)).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Affordance);
        assert!(v.detail.contains("16"));
        // Pulling an open door again is refused too.
        let v = step(&mut w, &s, one(Hand::Left, HandPrimitive::Pull, 14)).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Affordance);
    }

    #[test]
    fn out_of_reach_is_a_zone_violation() {
        let s = store();
        let mut w = WorldState::new(&s);
        at(&mut w, 6.95, 4.15);
        let v = step(&mut w, &s, one(Hand::Right, HandPrimitive::Grasp, 12)).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Zone);
        assert!(v.detail.contains("out of reach"));
    }

    #[test]
    fn heating_leaves_microwave_closed_and_started() {
        let s = store();
        let mut w = WorldState::new(&s);
        at(&mut w, 1.05, 4.15);
        step(&mut w, &s, one(Hand::Right, HandPrimitive::Grasp, 11)).unwrap();
        w.update_world("grab the lunch box");
        at(&mut w, 6.95, 4.15);
        let pts = w.sample(&s, 1.0);
        let tuples = [
            BimanualTuple {
                right: HandAction::new(HandPrimitive::Release, 15, ""),
                left: HandAction::new(HandPrimitive::Pull, 14, ""),
            },
            one(Hand::Left, HandPrimitive::Push, 14),
            one(Hand::Right, HandPrimitive::Press, 16),
        ];
        for t in &tuples {
            w.execute_tuple(&s, t, &pts, 0).unwrap();
        }
        w.update_world("open the microwave door and place the lunch box inside");
        assert_eq!(w.completed_goals.len(), 2);
        assert_eq!(w.object_locations[&1], Location::Inside(15));
        let tags = w.object_tags(&s, 4);
        assert!(tags.contains("closed") && tags.contains("started") && !tags.contains("open"));
        assert_eq!(w.hands, HandState::free());
    }

    #[test]
    fn shared_target_does_not_commute() {
        let s = store();
        let mut w = WorldState::new(&s);
        at(&mut w, 6.95, 4.15);
        // Both hands on the handle: one pull opens it and the other fails.
        let t = BimanualTuple {
            right: HandAction::new(HandPrimitive::Pull, 14, ""),
            left: HandAction::new(HandPrimitive::Pull, 14, ""),
        };
        let pts: Vec<SampledPoint> = w
            .sample(&s, 1.0)
            .into_iter()
            .map(|mut p| {
                p.zone = Zone::Mid;
                p
            })
            .collect();
        let before = w.clone();
        let v = w.execute_tuple(&s, &t, &pts, 3).unwrap_err();
        assert_eq!(v.kind, ViolationKind::DuplicateTarget);
        assert_eq!(v.tuple_index, 3);
        assert_eq!(w, before);
    }

    #[test]
    fn goal_evaluation() {
        let s = store();
        let mut w = WorldState::new(&s);
        assert!(w.evaluate_task(&s, &[]).unwrap());
        let inside = GoalPredicate::Located {
            object: "lunch box".into(),
            at_point: 15,
            radius: 0.1,
        };
        at(&mut w, 1.05, 4.15);
        step(&mut w, &s, one(Hand::Right, HandPrimitive::Grasp, 11)).unwrap();
        assert!(!w.evaluate_goal(&s, &inside).unwrap());
        assert!(w
            .evaluate_goal(&s, &GoalPredicate::Held { object: "Lunch Box".into() })
            .unwrap());
        let bad = GoalPredicate::State {
            point: Some(99),
            object: None,
            tag: "open".into(),
        };
        assert!(matches!(w.evaluate_goal(&s, &bad), Err(Error::GoalReference(_))));
        let bad = GoalPredicate::Located {
            object: "kettle".into(),
            at_point: 15,
            radius: 1.0,
        };
        assert!(matches!(w.evaluate_goal(&s, &bad), Err(Error::GoalReference(_))));
    }
}
