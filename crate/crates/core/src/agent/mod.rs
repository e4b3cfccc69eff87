//! DDPG agent: actor/critic networks, replay and training.

mod checkpoint;
mod ddpg;
mod nn;
mod replay;

pub use checkpoint::{CheckpointManifest, TensorEntry, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use ddpg::{sample_truncated_normal, AgentConfig, DdpgAgent, TrainLosses, Transition};
pub use nn::{Adam, Forward, Linear, MlpNet};
pub use replay::ReplayBuffer;
