//! Random scenes and tasks drawn from the intent grammar.

#![allow(dead_code)]

use std::path::PathBuf;

use biman_core::scene::{parse_scene, AFFORDANCES};
use biman_core::subgoal::{Intent, TaskSpec, Verb, TASK_SCHEMA};
use biman_core::SceneDocument;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

const LABELS: [&str; 8] = ["cup", "box", "bottle", "cabinet", "bin", "flower", "jar", "kettle"];
const ATTRIBUTES: [&str; 4] = ["hinged", "vertical-opening", "wall-mounted", "metal"];
const STATES: [&[&str]; 5] = [&[], &["closed"], &["open"], &["filled"], &["empty"]];

fn rule(primitive: &str, required: &[&str], removes: &[&str], adds: &[&str]) -> Value {
    json!({"primitive": primitive, "required_state": required, "removes": removes, "adds": adds})
}

pub fn random_scene(rng: &mut impl Rng) -> SceneDocument {
    let n: u32 = rng.gen_range(2..=6);
    let mut objects = Vec::new();
    let mut points = Vec::new();
    let mut obstacles = Vec::new();
    let mut next_ip = 100;
    let mut names = LABELS;
    names.shuffle(rng);
    for id in 1..=n {
        let (x, y, z) = (rng.gen_range(1.0..7.0), rng.gen_range(1.0..7.0), rng.gen_range(0.5..1.2));
        objects.push(json!({"id": id, "label": names[id as usize - 1], "position": [x, y, z]}));
        if rng.gen_bool(0.5) {
            obstacles.push(json!({"min": [x - 0.2, y - 0.2, 0.0], "max": [x + 0.2, y + 0.2, z]}));
        }
        let first = next_ip;
        let count = rng.gen_range(1..=3);
        for _ in 0..count {
            let mut affordances: Vec<&str> = AFFORDANCES.iter().copied().filter(|_| rng.gen_bool(0.35)).collect();
            if affordances.is_empty() {
                affordances.push(AFFORDANCES.choose(rng).unwrap());
            }
            let attrs: Vec<&str> = ATTRIBUTES.iter().copied().filter(|_| rng.gen_bool(0.25)).collect();
            let state = *STATES.choose(rng).unwrap();
            let mut effects = Vec::new();
            if affordances.contains(&"pull") {
                effects.push(rule("pull", &["closed"], &["closed"], &["open"]));
            }
            if affordances.contains(&"push") {
                effects.push(rule("push", &["open"], &["open"], &["closed"]));
            }
            if affordances.contains(&"press") && rng.gen_bool(0.5) {
                let req: &[&str] = if rng.gen_bool(0.3) { &["closed"] } else { &[] };
                effects.push(rule("press", req, &[], &["started"]));
            }
            points.push(json!({
                "id": next_ip,
                "parent_object": id,
                "position": [x + rng.gen_range(-0.25..0.25), y + rng.gen_range(-0.25..0.25), z + rng.gen_range(-0.1..0.1)],
                "descriptor": {
                    "part_label": format!("part {next_ip}"),
                    "affordances": affordances,
                    "visual_attributes": attrs,
                    "state_tags": state,
                    "sibling_ids": (first..first + count).filter(|s| *s != next_ip).collect::<Vec<_>>(),
                    "effects": effects,
                },
            }));
            next_ip += 1;
        }
    }
    let doc = json!({
        "schema": "scene.v1",
        "scene_label": "random",
        "metadata": {"agent_start": {"position": [0.5, 0.5, 0.0], "yaw": 0.0}, "bounds": {"min": [0.0, 0.0], "max": [8.0, 8.0]}},
        "object_points": objects,
        "interaction_points": points,
        "obstacles": obstacles,
    });
    parse_scene(&doc.to_string()).expect("generated scene is valid")
}

/// Whether some point of an object labelled `label` could serve `verb`.
fn supports(scene: &SceneDocument, label: &str, verb: Verb) -> bool {
    let has = |d: &biman_core::scene::Descriptor, aff: &str, attr: &str, state: &str| {
        d.affords(aff)
            && (attr.is_empty() || d.visual_attributes.contains(attr))
            && (state.is_empty() || d.state_tags.contains(state))
    };
    scene
        .object_points
        .iter()
        .filter(|o| o.label == label)
        .flat_map(|o| scene.points_of(o.id))
        .any(|p| {
            let d = &p.descriptor;
            match verb {
                Verb::Acquire => has(d, "grab", "", ""),
                Verb::Open => has(d, "pull", "hinged", "closed") || has(d, "push", "vertical-opening", "closed"),
                Verb::Close => has(d, "push", "hinged", "open"),
                Verb::Press => has(d, "press", "", ""),
                Verb::PlaceInto => has(d, "put-on", "", ""),
                Verb::PourInto => has(d, "pour-into", "", ""),
                Verb::DiscardInto | Verb::OperateWithHeld => has(d, "release-into", "", ""),
            }
        })
}

/// A task whose holds are always established before use. Most labels are
/// chosen so the scene can support the verb; the rest are arbitrary.
pub fn random_task(rng: &mut impl Rng, scene: &SceneDocument) -> TaskSpec {
    let labels: Vec<String> = scene.object_points.iter().map(|o| o.label.clone()).collect();
    let pick = |rng: &mut _, verb: Verb, pool: &[&String]| -> Option<String> {
        let fitting: Vec<&&String> = pool.iter().filter(|l| supports(scene, l, verb)).collect();
        if !fitting.is_empty() && Rng::gen_bool(rng, 0.8) {
            Some((**fitting.choose(rng).unwrap()).clone())
        } else {
            pool.choose(rng).map(|l| (*l).clone())
        }
    };
    let all: Vec<&String> = labels.iter().collect();
    let mut held: Vec<String> = Vec::new();
    let mut intents = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let free: Vec<&String> = labels.iter().filter(|l| !held.contains(l)).collect();
        match rng.gen_range(0..4) {
            0 if held.len() < 2 && !free.is_empty() => {
                let l = pick(rng, Verb::Acquire, &free).unwrap();
                intents.push(Intent::new(Verb::Acquire, &l, None));
                held.push(l);
            }
            1 if !held.is_empty() => {
                let h = held.remove(rng.gen_range(0..held.len()));
                let verb = *[Verb::PlaceInto, Verb::DiscardInto, Verb::OperateWithHeld, Verb::PourInto]
                    .choose(rng)
                    .unwrap();
                let any = pick(rng, verb, &all).unwrap();
                match verb {
                    Verb::OperateWithHeld => intents.push(Intent::new(verb, &any, Some(&h))),
                    Verb::PourInto => {
                        intents.push(Intent::new(verb, &h, Some(&any)));
                        held.push(h);
                    }
                    _ => intents.push(Intent::new(verb, &h, Some(&any))),
                }
            }
            _ => {
                let verb = *[Verb::Open, Verb::Close, Verb::Press].choose(rng).unwrap();
                let any = pick(rng, verb, &all).unwrap();
                intents.push(Intent::new(verb, &any, None));
            }
        }
    }
    TaskSpec {
        schema: TASK_SCHEMA.into(),
        name: "random".into(),
        scene: None,
        intents,
        goal_predicates: vec![],
    }
}
