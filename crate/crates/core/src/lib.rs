//! Core engine for budgeted instance selection in oriented object detection:
//! rotated-box geometry, instance uncertainty and diversity scoring,
//! model-state observation, the greedy round loop, and a deterministic
//! synthetic simulator for end-to-end runs.
//!
//! The numeric modules are generic over the [`scalar::Real`] scalar (`f32` or
//! `f64`); the pipeline types default to `f64`, which is the precision of all
//! file formats.

pub mod config;
pub mod diversity;
pub mod error;
pub mod geometry;
pub mod io;
pub mod observation;
pub mod scalar;
pub mod selector;
pub mod simulator;
pub mod uncertainty;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use scalar::Real;

pub use diversity::{FeatureVector, PrototypeStore};
pub use geometry::{ConvexQuad, RotatedBox};
pub use observation::{AbilityVector, GroundTruthInstance, InstancePrediction, ScoreBreakdown};
pub use selector::{LabelPool, ModelAdapter, SelectionRecord};
pub use uncertainty::CategoryDistribution;

/// Single-precision aliases for embedding the math core in `f32` pipelines.
pub type RotatedBox32 = geometry::RotatedBox<f32>;
pub type ConvexQuad32 = geometry::ConvexQuad<f32>;
pub type FeatureVector32 = diversity::FeatureVector<f32>;
pub type CategoryDistribution32 = uncertainty::CategoryDistribution<f32>;
