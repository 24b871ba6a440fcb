//! Training machinery: flow-matching targets, image augmentation, the
//! heterogeneous data mixture, the combined token/flow objective, AdamW,
//! and the stage runner.

pub mod augment;
pub mod flow;
pub mod loss;
pub mod mixture;
pub mod optim;
pub mod stage;
