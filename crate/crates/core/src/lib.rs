//! Simulation and optimization of a movable holographic-surface transmitter
//! serving receivers that harvest energy and decode data at the same time.
//!
//! The pipeline has three stages: uplink holographic sensing
//! ([`sensing`]), surface orientation and hologram design ([`orientation`]),
//! and downlink digital beamforming with power splitting ([`idet`]).
//! [`harness`] wires them into Monte-Carlo experiments.

pub mod channel;
pub mod convex;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod idet;
pub mod math;
pub mod orientation;
pub mod rhs;
pub mod sensing;

pub use channel::{ChannelRealization, MaskRule, PathComponent};
pub use error::{Error, Result};
pub use geometry::{FeasibilityReport, SlotTable, SurfaceLayout, SurfacePose};
pub use math::{RotationMatrix, Vec3, C64};
pub use rhs::{EmResponse, GainProfile, HoloBeamformer};
