//! Single-shot range imaging with a three-phase color sinusoidal pattern.
//!
//! The crate covers the whole chain: pattern synthesis, a projector/camera
//! forward simulator, color-phase recovery (crosstalk compensation, local
//! color balance, arctangent phase, phase-distribution adjustment),
//! priority-driven unwrapping with a directional correction filter, and
//! phase-to-depth reconstruction with PLY export.
//!
//! Phase is measured in cycles throughout: a wrapped phase lies in `[0, 1)`
//! and one period equals `2π` radians.

pub mod error;
pub mod figures;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pattern;
pub mod pipeline;
pub mod reconstruct;
pub mod recovery;
pub mod simulator;
pub mod unwrap;

pub use error::{Error, Result};
pub use grid::{DepthMap, Grid, Mask, Orientation, PhaseMap, RgbImage, Scalar, UnwrappedPhaseMap};
pub use pattern::PatternSpec;
pub use pipeline::{PipelineConfig, Report};
pub use recovery::PhaseAdjustment;
pub use simulator::{CameraModel, Response, SceneModel};
pub use unwrap::{UnwrapConfig, UnwrapOutcome};
