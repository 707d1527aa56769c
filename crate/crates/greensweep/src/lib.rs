//! Coverage-path planning and navigation simulation for a small
//! trash-collecting field robot.
//!
//! The crate models the full loop of one mowing-style cleaning pass:
//!
//! * [`geo`] converts geodetic field boundaries into a local metric frame.
//! * [`grid`] rasterizes the field into drivable cells and 2x2 megacells.
//! * [`planner`] builds a spanning tree over megacells and walks it into a
//!   closed coverage path visiting every free cell exactly once.
//! * [`localization`] fuses gyro dead reckoning with periodic GPS fixes and
//!   corrects accumulated yaw drift from straight-line GPS evidence.
//! * [`sim`] owns ground truth kinematics, sensor noise, and trash items.
//! * [`detector`] turns noisy per-frame classifier scores into pickup
//!   decisions via a moving-average window.
//! * [`controller`] steers the simulated robot along the planned path.
//! * [`scenario`], [`runner`], and [`sweep`] tie everything into complete
//!   simulated runs, Monte Carlo sweeps, and detector calibration.
//!
//! Start with the `examples/` directory: each example exercises one of these
//! capabilities end to end. The `greensweep` binary wraps the same entry
//! points for batch use.

pub mod controller;
pub mod detector;
pub mod geo;
pub mod grid;
pub mod localization;
pub mod planner;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod sweep;

// pub use controller::{ControlParams, PathFollower};
// pub use detector::{ClassifierStub, DecisionWindow, DetectorParams, FrameClassifier};
// pub use geo::{GeoPoint, LocalFrame, LocalPoint, Polygon};
// pub use grid::GridMap;
// pub use planner::CoveragePath;
// pub use localization::PoseTracker;
// pub use runner::{RunMetrics, RunOutcome};
// pub use scenario::Scenario;
// pub use sim::{RobotTruth, SensorModelParams, TrashItem};
// pub use sweep::{SweepSummary, calibrate_detector, sweep};
