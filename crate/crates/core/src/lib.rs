//! Radar-only planar ego-motion estimation.
//!
//! Linear velocity comes from single-chip Doppler point clouds (RANSAC sine
//! fit), yaw comes from registering feature points extracted from cascade
//! heatmaps with a two-way intensity-weighted ICP. The crate also carries the
//! trajectory metrics and a synthetic scene generator used to verify every
//! stage without external data.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod odometry;
pub mod preprocess;
pub mod registration;
pub mod sim;
pub mod velocity;

pub use error::{Error, Result};
pub use geometry::{PolarPoint, Pose2, Vec2};
