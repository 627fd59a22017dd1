//! Skill knowledge base: canonical skill prototypes, a deterministic text
//! embedding, and top-k similarity retrieval.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hands::{Hand, HandPrimitive, HandState};

pub const SKILLS_SCHEMA: &str = "skills.v1";

/// Candidates considered when refining an abstract skill.
pub const REFINE_CANDIDATES: usize = 10;
/// Prototypes retrieved when generating tuples.
pub const PROTOTYPES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordination {
    TwoHandsOneObject,
    TwoHandsTwoObjects,
    Unimanual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAction {
    pub primitive: HandPrimitive,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

impl SlotAction {
    pub fn idle() -> Self {
        Self {
            primitive: HandPrimitive::Idle,
            slot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateStep {
    pub right: SlotAction,
    pub left: SlotAction,
}

impl TemplateStep {
    pub fn action(&self, hand: Hand) -> &SlotAction {
        match hand {
            Hand::Right => &self.right,
            Hand::Left => &self.left,
        }
    }

    pub fn active_hands(&self) -> usize {
        [&self.right, &self.left]
            .iter()
            .filter(|a| !a.primitive.is_idle())
            .count()
    }
}

pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointTemplate {
    pub slot: String,
    #[serde(default = "wildcard")]
    pub object_category: String,
    #[serde(default)]
    pub required_affordances: BTreeSet<String>,
    #[serde(default)]
    pub required_attributes: BTreeSet<String>,
    #[serde(default)]
    pub required_state: BTreeSet<String>,
}

fn wildcard() -> String {
    WILDCARD.to_string()
}

impl PointTemplate {
    /// Wildcard, or case-insensitive substring of the object label.
    pub fn category_matches(&self, object_label: &str) -> bool {
        self.object_category == WILDCARD
            || object_label
                .to_lowercase()
                .contains(&self.object_category.to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandRequirement {
    Free,
    Holding,
    Any,
}

impl HandRequirement {
    pub fn admits(self, free: bool) -> bool {
        match self {
            HandRequirement::Free => free,
            HandRequirement::Holding => !free,
            HandRequirement::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandPrecondition {
    pub right: HandRequirement,
    pub left: HandRequirement,
    #[serde(default)]
    pub reversible: bool,
}

/// Outcome of checking a hand precondition against occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandFit {
    AsWritten,
    Reversed,
}

impl HandPrecondition {
    pub fn fit_occupancy(&self, right_free: bool, left_free: bool) -> Option<HandFit> {
        if self.right.admits(right_free) && self.left.admits(left_free) {
            Some(HandFit::AsWritten)
        } else if self.reversible && self.right.admits(left_free) && self.left.admits(right_free) {
            Some(HandFit::Reversed)
        } else {
            None
        }
    }

    pub fn fit(&self, hands: &HandState) -> Option<HandFit> {
        self.fit_occupancy(hands.right.is_free(), hands.left.is_free())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillEntry {
    pub name: String,
    pub coordination: Coordination,
    pub tuple_template: Vec<TemplateStep>,
    pub point_preconditions: Vec<PointTemplate>,
    pub hand_preconditions: HandPrecondition,
}

impl SkillEntry {
    pub fn slot(&self, name: &str) -> Option<&PointTemplate> {
        self.point_preconditions.iter().find(|p| p.slot == name)
    }

    /// Check the structural invariants of an entry.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for p in &self.point_preconditions {
            if !seen.insert(p.slot.as_str()) {
                return Err(Error::InvalidField {
                    field: format!("skills[{}].point_preconditions", self.name),
                    detail: format!("slot `{}` declared twice", p.slot),
                });
            }
        }
        if self.tuple_template.is_empty() {
            return Err(Error::InvalidField {
                field: format!("skills[{}].tuple_template", self.name),
                detail: "template is empty".into(),
            });
        }
        for (i, step) in self.tuple_template.iter().enumerate() {
            let field = format!("skills[{}].tuple_template[{i}]", self.name);
            if step.active_hands() == 0 {
                return Err(Error::InvalidField {
                    field,
                    detail: "both hands idle".into(),
                });
            }
            if self.coordination == Coordination::Unimanual && step.active_hands() > 1 {
                return Err(Error::InvalidField {
                    field,
                    detail: "unimanual skill uses both hands in one step".into(),
                });
            }
            for action in [&step.right, &step.left] {
                match (&action.slot, action.primitive.is_idle()) {
                    (Some(slot), false) => {
                        if self.slot(slot).is_none() {
                            return Err(Error::UndeclaredSlot {
                                skill: self.name.clone(),
                                slot: slot.clone(),
                            });
                        }
                    }
                    (None, true) => {}
                    _ => {
                        return Err(Error::InvalidField {
                            field: field.clone(),
                            detail: "an action needs a slot exactly when it is not idle".into(),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    /// Primitives used by `hand` across the template.
    pub fn actions_of(&self, hand: Hand) -> impl Iterator<Item = &SlotAction> {
        self.tuple_template
            .iter()
            .map(move |s| s.action(hand))
            .filter(|a| !a.primitive.is_idle())
    }
}

/// Sparse L2-normalized token weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub weights: BTreeMap<String, f64>,
}

impl EmbeddingVector {
    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        let (small, large) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .weights
            .iter()
            .filter_map(|(t, w)| large.weights.get(t).map(|v| w * v))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Pluggable text embedding used for retrieval.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, text: &str) -> EmbeddingVector;
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// TF-IDF over a fixed document collection (the skill names).
#[derive(Debug, Clone)]
pub struct TfIdfEmbedder {
    doc_count: usize,
    doc_freq: BTreeMap<String, usize>,
}

impl TfIdfEmbedder {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut doc_count = 0;
        let mut doc_freq = BTreeMap::new();
        for d in docs {
            doc_count += 1;
            let uniq: BTreeSet<String> = tokenize(d).into_iter().collect();
            for t in uniq {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
        Self { doc_count, doc_freq }
    }

    /// Smoothed inverse document frequency; unseen tokens get the maximum.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.doc_freq.get(token).copied().unwrap_or(0) as f64;
        ((self.doc_count as f64 + 1.0) / (df + 1.0)).ln() + 1.0
    }
}

impl TextEmbedder for TfIdfEmbedder {
    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokenize(text) {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
        let mut weights: BTreeMap<String, f64> = tf
            .into_iter()
            .map(|(t, f)| {
                let w = f * self.idf(&t);
                (t, w)
            })
            .collect();
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in weights.values_mut() {
                *w /= norm;
            }
        }
        EmbeddingVector { weights }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct SkillFile {
    schema: String,
    skills: Vec<SkillEntry>,
}

#[derive(Clone)]
pub struct KnowledgeBase {
    entries: Vec<SkillEntry>,
    embeddings: Vec<EmbeddingVector>,
    embedder: Arc<dyn TextEmbedder>,
}

impl fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl KnowledgeBase {
    /// Build with the default TF-IDF embedder fitted on the skill names.
    pub fn new(entries: Vec<SkillEntry>) -> Result<Self> {
        let embedder = TfIdfEmbedder::fit(entries.iter().map(|e| e.name.as_str()));
        Self::with_embedder(entries, Arc::new(embedder))
    }

    pub fn with_embedder(entries: Vec<SkillEntry>, embedder: Arc<dyn TextEmbedder>) -> Result<Self> {
        let mut names = HashSet::new();
        for e in &entries {
            if !names.insert(e.name.as_str()) {
                return Err(Error::DuplicateSkill(e.name.clone()));
            }
            e.validate()?;
        }
        let embeddings = entries.iter().map(|e| embedder.embed(&e.name)).collect();
        Ok(Self {
            entries,
            embeddings,
            embedder,
        })
    }

    pub fn entries(&self) -> &[SkillEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&SkillEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        self.embedder.embed(text)
    }

    pub fn entry_embedding(&self, name: &str) -> Option<&EmbeddingVector> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(|i| &self.embeddings[i])
    }

    /// The `k` most similar entries, by descending cosine similarity with
    /// ties broken by ascending name.
    pub fn retrieve_top_k(&self, query: &str, k: usize) -> Vec<(&SkillEntry, f64)> {
        assert!(k >= 1, "k must be at least 1");
        let q = self.embed_text(query);
        // bounded insertion keeps the k best seen so far in rank order
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        for (i, emb) in self.embeddings.iter().enumerate() {
            let sim = q.dot(emb);
            let pos = best
                .iter()
                .position(|&(j, s)| ranks_before(sim, &self.entries[i].name, s, &self.entries[j].name))
                .unwrap_or(best.len());
            if pos < k {
                best.insert(pos, (i, sim));
                best.truncate(k);
            }
        }
        best.into_iter().map(|(i, s)| (&self.entries[i], s)).collect()
    }

    /// Coordination of the single best match for `query`.
    pub fn top_coordination(&self, query: &str) -> Option<Coordination> {
        self.retrieve_top_k(query, 1).first().map(|(e, _)| e.coordination)
    }
}

fn ranks_before(sim_a: f64, name_a: &str, sim_b: f64, name_b: &str) -> bool {
    sim_a > sim_b || (sim_a == sim_b && name_a < name_b)
}

pub fn parse_kb(text: &str) -> Result<KnowledgeBase> {
    let file: SkillFile = serde_json::from_str(text).map_err(|source| Error::Malformed {
        what: "skill",
        source,
    })?;
    if file.schema != SKILLS_SCHEMA {
        return Err(Error::Schema {
            expected: SKILLS_SCHEMA,
            found: file.schema,
        });
    }
    KnowledgeBase::new(file.skills)
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_kb(&text)
}
