//! Box-supervised 3D instance segmentation toolkit.
//!
//! Weak per-point labels are derived from axis-aligned box annotations,
//! box votes are grouped by greedy IoU clustering and projected back to
//! point masks, and the result is scored with mask AP. A synthetic scene
//! generator and vote simulator stand in for a trained network.

pub mod cli;
pub mod clustering;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod instancer;
pub mod losses;
pub mod oracle;
pub mod pipeline;
pub mod scene;
pub mod weaklabel;

pub use error::{Error, Result};
pub use geometry::{Aabb, ClassId, Vec3};
