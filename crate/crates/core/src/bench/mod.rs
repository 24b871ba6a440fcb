//! Experiment orchestration: declarative plans, seeded training/evaluation
//! pipelines for each study design, and CSV/JSON report artifacts.

pub mod eval;
pub mod plan;
pub mod report;
pub mod run;
pub mod stats;
