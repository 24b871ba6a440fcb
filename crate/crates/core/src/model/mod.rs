//! Two-expert transformer: tape autodiff, mixed sequences, role masking,
//! parameter storage, forward construction, and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod mask;
pub mod params;
pub mod sequence;
pub mod tape;
