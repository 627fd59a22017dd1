//! Two-armed task planning over interaction-point scenes.
//!
//! A scene of object points and interaction points is split into subgoals,
//! each refined against a skill knowledge base, turned into synchronized
//! right/left hand tuples and executed in a simple grid world.

pub mod error;
pub mod geometry;
pub mod hands;
pub mod prompting;
pub mod scene;
pub mod skills;
pub mod subgoal;
pub mod world;

pub use error::{Error, Result};
pub use hands::{Grip, Hand, HandPrimitive, HandState};
pub use prompting::{ActionSequence, BimanualTuple, HandAction, Violation, ViolationKind};
pub use scene::{AdjacencyGraph, SampledPoint, SceneDocument, Zone};
pub use skills::{KnowledgeBase, SkillEntry};
