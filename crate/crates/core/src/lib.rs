//! Assistive autonomy for direct teleoperation.
//!
//! Movement primitives are learned from demonstrations in an object frame,
//! recognized from the first part of an operator motion, conditioned on what
//! the operator did and where the object is, and handed over to an
//! affordance template through a sigmoid blend. [`session`] wraps the whole
//! pipeline in the four-phase interaction loop the operator drives.

pub mod affordance;
pub mod basis;
pub mod blend;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod follower;
pub mod linalg;
pub mod pose;
pub mod promp;
pub mod recognition;
pub mod scene;
pub mod session;
pub mod synthetic;
pub mod trajectory;

pub use error::{CoreError, Result};
