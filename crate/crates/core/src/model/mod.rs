//! Layer-level network representation.

mod layer;
mod observation;
mod topology;

pub use layer::{LayerDescriptor, LayerKind, LayerStats};
pub use observation::{build_observations, normalize_features, Observation, StepTarget, OBS_DIM, PREV_ACTION_SLOT};
pub use topology::{builtin_topology, load_topology, parse_topology, NetworkModel, BUILTIN_NAMES};
