//! Procedurally generated multi-environment task world: deterministic scene
//! generation, a kinematic simulator with grasp/containment/articulation
//! events, a two-camera raster renderer, a scripted hierarchical expert,
//! graded task rubrics, and dataset assembly for the training pipeline.

pub mod dataset;
pub mod examples;
pub mod expert;
pub mod palette;
pub mod render;
pub mod rubric;
pub mod scene;
pub mod sim;
