//! Pose-guided human parsing on synthetic scenes.
//!
//! Stages: pose-seeded segment proposals, per-part SVR ranking of the
//! pool, and And-Or graph assembling of the selected candidates into a
//! parse tree. [`pipeline`] wires them together with on-disk artifacts.

pub mod aog;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod geom;
pub mod io;
pub mod parts;
pub mod pipeline;
pub mod proposal;
pub mod ranking;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
