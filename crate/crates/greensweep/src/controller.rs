//! Waypoint follower: proportional heading control along the coverage path.
//!
//! The follower sees only the pose estimate, never ground truth. Large
//! heading errors stop forward motion and turn in place, which suits the
//! sharp 90-degree corners of a grid coverage path.

use crate::geo::{bearing, wrap_angle};
use crate::localization::PoseEstimate;
use crate::planner::CoveragePath;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Follower tuning. Field names carry units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    /// Cruise speed.
    pub v_nom_m_s: f64,
    /// Proportional heading gain, 1/s.
    pub k_heading: f64,
    /// Waypoint capture radius.
    pub waypoint_tol_m: f64,
    /// Yaw rate limit.
    pub omega_max_rad_s: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            v_nom_m_s: 0.148,
            k_heading: 2.0,
            waypoint_tol_m: 0.1,
            omega_max_rad_s: 1.0,
        }
    }
}

/// Progress along the coverage cycle. The robot spawns on waypoint 0, so
/// the first target is waypoint 1; after the last waypoint the target wraps
/// to waypoint 0 to close the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathFollower {
    /// Index of the active target; `path.len()` means the closing leg.
    index: usize,
    finished: bool,
    paused: bool,
}

impl PathFollower {
    pub fn new() -> Self {
        Self {
            index: 1,
            finished: false,
            paused: false,
        }
    }

    /// Index of the waypoint currently steered toward. Reported in traces.
    pub fn active_index(&self) -> usize {
        self.index
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    /// Halt or resume for a pickup cycle.
    pub fn set_paused(&mut self, paused: bool) {
        self.paused = paused;
    }

    fn target<'p>(&self, path: &'p CoveragePath) -> &'p crate::geo::LocalPoint {
        let w = path.waypoints();
        if self.index < w.len() {
            &w[self.index]
        } else {
            &w[0]
        }
    }

    /// Velocity command for this tick: proportional heading control, full
    /// speed only when roughly facing the target, zero while paused or done.
    pub fn command(&self, est: &PoseEstimate, path: &CoveragePath, params: &ControlParams) -> (f64, f64) {
        if self.finished || self.paused {
            return (0.0, 0.0);
        }
        let e = wrap_angle(bearing(est.position(), *self.target(path)) - est.theta);
        let omega = (params.k_heading * e).clamp(-params.omega_max_rad_s, params.omega_max_rad_s);
        let v = if e.abs() < FRAC_PI_2 {
            params.v_nom_m_s
        } else {
            0.0
        };
        (v, omega)
    }

    /// Advance the target when the estimate is inside the capture radius.
    /// At most one advance per call; returns whether an advance happened.
    pub fn advance(&mut self, est: &PoseEstimate, path: &CoveragePath, params: &ControlParams) -> bool {
        if self.finished {
            return false;
        }
        let d = est.position().distance(self.target(path));
        if d >= params.waypoint_tol_m {
            return false;
        }
        if self.index >= path.len() {
            // Closing waypoint reached: the cycle is complete.
            self.finished = true;
        } else {
            self.index += 1;
        }
        true
    }
}

impl Default for PathFollower {
    fn default() -> Self {
        Self::new()
    }
}
