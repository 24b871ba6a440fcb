//! Desk-scale vision-language-action stack.
//!
//! The crate trains and runs a small two-expert transformer policy on a
//! procedurally generated gridworld. Continuous robot action chunks are
//! represented two ways: as discrete tokens (frequency-space quantization
//! plus learned pair merges) for autoregressive pretraining, and as a
//! conditional flow field for iterative denoising at control time. A
//! hierarchical runtime first decodes a subtask string from the scene and
//! task prompt, then denoises an action chunk conditioned on that subtask.
//!
//! Module map:
//! - [`codec`]: action normalization, padding, and the discrete action vocab
//! - [`world`]: scene generation, scripted experts, rendering, rubric scoring
//! - [`text`]: the fixed word-level text vocabulary and token id layout
//! - [`model`]: mixed-sequence construction, attention masking, the
//!   two-expert transformer, and reverse-mode differentiation
//! - [`trainer`]: flow-matching samples, the combined loss, data mixtures,
//!   augmentation, and the two-stage training loop
//! - [`policy`]: subtask decoding, flow integration, and the control loop
//! - [`bench`]: experiment plans, sweep runners, and statistical reports

pub mod bench;
pub mod codec;
pub mod error;
pub mod mat;
pub mod model;
pub mod policy;
pub mod seeding;
pub mod text;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
