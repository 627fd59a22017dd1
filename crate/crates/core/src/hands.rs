//! Hand identities, hand primitives and the per-hand occupancy state.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Right,
    Left,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Right, Hand::Left];

    pub fn other(self) -> Hand {
        match self {
            Hand::Right => Hand::Left,
            Hand::Left => Hand::Right,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hand::Right => "right",
            Hand::Left => "left",
        })
    }
}

/// Low-level action a single hand performs in one synchronized step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandPrimitive {
    Grasp,
    Put,
    Press,
    Push,
    Pull,
    Pour,
    Release,
    Idle,
}

impl HandPrimitive {
    pub fn is_idle(self) -> bool {
        self == HandPrimitive::Idle
    }

    /// Primitives that require an object already in the acting hand.
    pub fn needs_held_object(self) -> bool {
        matches!(
            self,
            HandPrimitive::Put | HandPrimitive::Release | HandPrimitive::Pour
        )
    }

    /// Affordance tags on the target point that admit this primitive.
    pub fn compatible_affordances(self) -> &'static [&'static str] {
        match self {
            HandPrimitive::Grasp => &["grab"],
            HandPrimitive::Put => &["put-on", "release-into"],
            HandPrimitive::Release => &["release-into"],
            HandPrimitive::Press => &["press"],
            HandPrimitive::Pull => &["pull"],
            HandPrimitive::Push => &["push"],
            HandPrimitive::Pour => &["pour-into"],
            HandPrimitive::Idle => &[],
        }
    }
}

impl fmt::Display for HandPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HandPrimitive::Grasp => "grasp",
            HandPrimitive::Put => "put",
            HandPrimitive::Press => "press",
            HandPrimitive::Push => "push",
            HandPrimitive::Pull => "pull",
            HandPrimitive::Pour => "pour",
            HandPrimitive::Release => "release",
            HandPrimitive::Idle => "idle",
        };
        f.write_str(s)
    }
}

/// What one hand currently holds. `object` is the object-point id of the
/// held item, `label` its text label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Grip {
    #[default]
    Free,
    Holding { object: u32, label: String },
}

impl Grip {
    pub fn is_free(&self) -> bool {
        matches!(self, Grip::Free)
    }

    pub fn held_object(&self) -> Option<u32> {
        match self {
            Grip::Free => None,
            Grip::Holding { object, .. } => Some(*object),
        }
    }

    pub fn held_label(&self) -> Option<&str> {
        match self {
            Grip::Free => None,
            Grip::Holding { label, .. } => Some(label),
        }
    }
}

impl fmt::Display for Grip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grip::Free => f.write_str("free"),
            Grip::Holding { label, .. } => write!(f, "holding {label}"),
        }
    }
}

/// Occupancy of both hands. Both hands never hold the same object instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct HandState {
    pub right: Grip,
    pub left: Grip,
}

impl HandState {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn get(&self, hand: Hand) -> &Grip {
        match hand {
            Hand::Right => &self.right,
            Hand::Left => &self.left,
        }
    }

    pub fn get_mut(&mut self, hand: Hand) -> &mut Grip {
        match hand {
            Hand::Right => &mut self.right,
            Hand::Left => &mut self.left,
        }
    }

    pub fn holder_of(&self, object: u32) -> Option<Hand> {
        Hand::BOTH
            .into_iter()
            .find(|h| self.get(*h).held_object() == Some(object))
    }

    pub fn mirrored(&self) -> HandState {
        HandState {
            right: self.left.clone(),
            left: self.right.clone(),
        }
    }
}
