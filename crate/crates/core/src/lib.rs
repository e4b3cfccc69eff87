//! Hardware-aware mixed-precision quantization search.
//!
//! The crate is organised around the pieces of the search loop:
//!
//! - [`model`]: layer-level network descriptions, built-in topologies and
//!   the per-step observation vectors fed to the agent.
//! - [`quant`]: linear quantization with KL-calibrated clipping and k-means
//!   codebook quantization, plus the `QTNS` tensor file format.
//! - [`hw`]: parametric latency / energy / size models for bit-serial and
//!   bit-fusion style accelerators, with roofline diagnostics.
//! - [`policy`]: action-to-bitwidth mapping and budget enforcement.
//! - [`agent`]: a from-scratch DDPG actor/critic with replay and checkpoints.
//! - [`evaluator`]: pluggable accuracy feedback (a synthetic sensitivity oracle ships).
//! - [`search`]: episode orchestration and run outputs.

pub mod agent;
pub mod error;
pub mod evaluator;
pub mod hw;
pub mod model;
pub mod policy;
pub mod quant;
pub mod search;

pub use error::{Error, Result};
