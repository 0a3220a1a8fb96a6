//! Composable motion-primitive data generation for humanoid motion-language
//! datasets.
//!
//! A 25-mode [`registry`] of motion primitives is driven by a fixed-rate
//! command stream from the [`bridge`], integrated by the reference kinematic
//! [`planner`], recorded as time-aligned trajectory streams, paired with
//! template [`annotation`]s and written as a [`dataset`] package.

pub mod annotation;
pub mod bridge;
pub mod dataset;
pub mod geom;
pub mod planner;
pub mod protocol;
pub mod quality;
pub mod recipe;
pub mod registry;
