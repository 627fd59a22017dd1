//! Grid world used to execute plans and score them.

pub mod grid;
pub mod state;
pub mod trial;

pub use grid::{GridPath, OccupancyGrid};
pub use state::{Location, WorldState};
pub use trial::{run_trial, Ablation, PlanDocument, TrialConfig, TrialOutcome, TrialReport};
