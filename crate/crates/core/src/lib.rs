//! Discrete elastic rod simulation: centerline geometry with Bishop reference
//! frames, isotropic bending and twisting energies with a quasi-static
//! material frame, and constrained time stepping with contact.

pub mod contact;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod trace;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use contact::{AxisBox, ContactParams, SceneConfig};
pub use dynamics::{step, BoundaryCondition, GripperPose, Pin, RodState, StepConfig};
pub use energy::{MaterialFrame, RodParams};
pub use error::{Result, RodError};
pub use geometry::{Centerline, FrameSet};
