//! Grounded scene representation: object points (navigation anchors),
//! interaction points (contact sites with descriptors), the object-point
//! adjacency graph, spatial zoning relative to a stance, and the
//! descriptor summary fed to tuple generation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Aabb, Pose, Vec3};
use crate::hands::HandPrimitive;

pub const SCENE_SCHEMA: &str = "scene.v1";

/// Default object-point adjacency threshold, meters.
pub const DEFAULT_ADJACENCY_THRESHOLD: f64 = 1.2;
/// Default reach radius around a stance, meters.
pub const DEFAULT_REACH_THRESHOLD: f64 = 1.0;
/// Lateral offset separating the mid zone from the side zones, meters.
pub const ZONE_HALF_WIDTH: f64 = 0.15;

pub const AFFORDANCES: [&str; 8] = [
    "grab",
    "put-on",
    "press",
    "push",
    "pull",
    "pour-from",
    "pour-into",
    "release-into",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPoint {
    pub id: u32,
    pub label: String,
    pub position: Vec3,
}

/// Deterministic state transition attached to an interaction point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectRule {
    pub primitive: HandPrimitive,
    #[serde(default)]
    pub required_state: BTreeSet<String>,
    #[serde(default)]
    pub removes: BTreeSet<String>,
    #[serde(default)]
    pub adds: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Descriptor {
    pub part_label: String,
    #[serde(default)]
    pub visual_attributes: BTreeSet<String>,
    #[serde(default)]
    pub affordances: BTreeSet<String>,
    #[serde(default)]
    pub sibling_ids: BTreeSet<u32>,
    #[serde(default)]
    pub state_tags: BTreeSet<String>,
    #[serde(default)]
    pub effects: Vec<EffectRule>,
}

impl Descriptor {
    pub fn affords(&self, tag: &str) -> bool {
        self.affordances.contains(tag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPoint {
    pub id: u32,
    pub parent_object: u32,
    pub position: Vec3,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Left,
    Mid,
    Right,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::Left => "left",
            Zone::Mid => "mid",
            Zone::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SceneMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_start: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// A loaded, cross-checked scene. Object and interaction points are kept
/// sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default)]
    pub scene_label: String,
    #[serde(default)]
    pub command_list: Vec<String>,
    #[serde(default)]
    pub metadata: SceneMetadata,
    #[serde(default)]
    pub object_points: Vec<ObjectPoint>,
    #[serde(default)]
    pub interaction_points: Vec<InteractionPoint>,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn default_schema() -> String {
    SCENE_SCHEMA.to_string()
}

impl SceneDocument {
    pub fn object(&self, id: u32) -> Option<&ObjectPoint> {
        self.object_points
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.object_points[i])
    }

    pub fn interaction(&self, id: u32) -> Option<&InteractionPoint> {
        self.interaction_points
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.interaction_points[i])
    }

    pub fn points_of(&self, object: u32) -> impl Iterator<Item = &InteractionPoint> {
        self.interaction_points
            .iter()
            .filter(move |p| p.parent_object == object)
    }

    pub fn object_label(&self, id: u32) -> &str {
        self.object(id).map(|o| o.label.as_str()).unwrap_or("?")
    }

    /// Remove visual attributes and state tags from every descriptor,
    /// leaving part labels and affordances.
    pub fn strip_descriptors(&mut self) {
        for p in &mut self.interaction_points {
            p.descriptor.visual_attributes.clear();
            p.descriptor.state_tags.clear();
        }
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.schema != SCENE_SCHEMA {
            return Err(Error::Schema {
                expected: SCENE_SCHEMA,
                found: self.schema.clone(),
            });
        }
        self.object_points.sort_by_key(|o| o.id);
        self.interaction_points.sort_by_key(|p| p.id);

        for (i, w) in self.object_points.windows(2).enumerate() {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateId {
                    id: w[1].id,
                    field: format!("object_points[{}].id", i + 1),
                });
            }
        }
        for (i, o) in self.object_points.iter().enumerate() {
            if o.label.trim().is_empty() {
                return Err(Error::InvalidField {
                    field: format!("object_points[{i}].label"),
                    detail: format!("object point {} has an empty label", o.id),
                });
            }
            if o.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidField {
                    field: format!("object_points[{i}].position"),
                    detail: format!("object point {} has a non-finite coordinate", o.id),
                });
            }
        }
        for (i, w) in self.interaction_points.windows(2).enumerate() {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateId {
                    id: w[1].id,
                    field: format!("interaction_points[{}].id", i + 1),
                });
            }
        }
        for (i, p) in self.interaction_points.iter().enumerate() {
            if self.object(p.parent_object).is_none() {
                return Err(Error::DanglingReference {
                    id: p.parent_object,
                    field: format!("interaction_points[{i}].parent_object"),
                });
            }
            if p.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidField {
                    field: format!("interaction_points[{i}].position"),
                    detail: format!("interaction point {} has a non-finite coordinate", p.id),
                });
            }
            for tag in &p.descriptor.affordances {
                if !AFFORDANCES.contains(&tag.as_str()) {
                    return Err(Error::InvalidField {
                        field: format!("interaction_points[{i}].descriptor.affordances"),
                        detail: format!("unknown affordance `{tag}` on point {}", p.id),
                    });
                }
            }
            for sib in &p.descriptor.sibling_ids {
                let field = format!("interaction_points[{i}].descriptor.sibling_ids");
                match self.interaction(*sib) {
                    None => return Err(Error::DanglingReference { id: *sib, field }),
                    Some(s) if s.parent_object != p.parent_object => {
                        return Err(Error::InvalidField {
                            field,
                            detail: format!(
                                "sibling {sib} of point {} belongs to object {} not {}",
                                p.id, s.parent_object, p.parent_object
                            ),
                        })
                    }
                    _ => {}
                }
            }
            for (j, rule) in p.descriptor.effects.iter().enumerate() {
                if let Some(tag) = rule.adds.intersection(&rule.removes).next() {
                    return Err(Error::InvalidField {
                        field: format!("interaction_points[{i}].descriptor.effects[{j}]"),
                        detail: format!("tag `{tag}` is both added and removed"),
                    });
                }
            }
        }

        self.warnings.clear();
        for o in &self.object_points {
            let buried = self.obstacles.iter().any(|b| {
                b.footprint_contains(o.position[0] - STANCE_RADIUS, o.position[1] - STANCE_RADIUS, 0.0)
                    && b.footprint_contains(o.position[0] + STANCE_RADIUS, o.position[1] + STANCE_RADIUS, 0.0)
            });
            if buried {
                self.warnings.push(format!(
                    "object point {} ({}) has every stance candidate inside one obstacle",
                    o.id, o.label
                ));
            }
        }
        Ok(())
    }
}

/// Radius around an object point searched for a stance, meters.
pub const STANCE_RADIUS: f64 = 0.8;

pub fn parse_scene(text: &str) -> Result<SceneDocument> {
    let mut doc: SceneDocument = serde_json::from_str(text).map_err(|source| Error::Malformed {
        what: "scene",
        source,
    })?;
    doc.validate()?;
    Ok(doc)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scene(&text)
}

/// Undirected graph over object points joined when within `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    /// Unordered pairs stored as (smaller id, larger id).
    pub edges: BTreeSet<(u32, u32)>,
    pub threshold: f64,
}

impl AdjacencyGraph {
    pub fn empty(threshold: f64) -> Self {
        Self {
            edges: BTreeSet::new(),
            threshold,
        }
    }

    pub fn adjacent(&self, a: u32, b: u32) -> bool {
        a != b && self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Equal or joined by an edge.
    pub fn near(&self, a: u32, b: u32) -> bool {
        a == b || self.adjacent(a, b)
    }
}

pub fn build_adjacency(scene: &SceneDocument, threshold: f64) -> AdjacencyGraph {
    assert!(threshold > 0.0, "adjacency threshold must be positive");
    let mut pts: Vec<&ObjectPoint> = scene.object_points.iter().collect();
    pts.sort_by(|a, b| a.position[0].total_cmp(&b.position[0]));

    // sweep along x; only pairs within the threshold band need a full check
    let mut edges = BTreeSet::new();
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if b.position[0] - a.position[0] > threshold {
                break;
            }
            if a.id != b.id && distance(a.position, b.position) <= threshold {
                edges.insert((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    AdjacencyGraph { edges, threshold }
}

pub fn assign_zone(point: Vec3, stance: &Pose) -> Zone {
    let (_, lateral) = stance.to_local(point);
    if lateral > ZONE_HALF_WIDTH {
        Zone::Left
    } else if lateral < -ZONE_HALF_WIDTH {
        Zone::Right
    } else {
        Zone::Mid
    }
}

/// An interaction point visible from a stance, with its zone and the label
/// of its parent object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPoint {
    pub point: InteractionPoint,
    pub zone: Zone,
    pub object_label: String,
    /// Lateral offset in the stance frame, meters (left positive).
    pub lateral: f64,
}

impl SampledPoint {
    pub fn id(&self) -> u32 {
        self.point.id
    }
}

pub fn sample_reachable(scene: &SceneDocument, stance: &Pose, reach_threshold: f64) -> Vec<SampledPoint> {
    assert!(reach_threshold > 0.0, "reach threshold must be positive");
    scene
        .interaction_points
        .iter()
        .filter(|p| distance(p.position, stance.position) <= reach_threshold)
        .map(|p| SampledPoint {
            point: p.clone(),
            zone: assign_zone(p.position, stance),
            object_label: scene.object_label(p.parent_object).to_string(),
            lateral: stance.to_local(p.position).1,
        })
        .collect()
}

fn join_sorted<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = items.into_iter().map(|t| t.to_string()).collect();
    v.join(",")
}

/// One descriptor line per point, sorted by id.
pub fn concat_descriptors(points: &[SampledPoint]) -> String {
    let mut sorted: Vec<&SampledPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.id()
            .cmp(&b.id())
            .then_with(|| a.zone.cmp(&b.zone))
            .then_with(|| a.object_label.cmp(&b.object_label))
    });
    let mut out = String::new();
    for sp in sorted {
        let d = &sp.point.descriptor;
        out.push_str(&format!(
            "[{}] object={} part={} attrs={} afford={} state={} siblings={} zone={}\n",
            sp.id(),
            sp.object_label,
            d.part_label,
            join_sorted(&d.visual_attributes),
            join_sorted(&d.affordances),
            join_sorted(&d.state_tags),
            join_sorted(&d.sibling_ids),
            sp.zone
        ));
    }
    out
}
