//! Hierarchical inference: subtask decoding, flow integration, high-level
//! strategy selection, and the chunked control loop.

pub mod act;
pub mod decode;
pub mod integrate;
pub mod strategy;
