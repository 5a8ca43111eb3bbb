//! Core library for the tree-of-strategies construction simulator.

pub mod adversary;
pub mod engine;
pub mod error;
pub mod sampler;
pub mod scenario;
pub mod scheduler;
pub mod trace;
pub mod tree;
pub mod verifier;

pub use adversary::{PartialFn, Roster, RtSet, SetSpec, TrackingRule};
pub use engine::Construction;
pub use error::ModelError;
pub use scheduler::{run_construction, true_path_estimate, visit_counts};
pub use trace::{ConstructionConfig, Event, Trace, TraceHeader};
pub use tree::{Outcome, Path, Regime, Requirement, Side, TreeBuilder};
