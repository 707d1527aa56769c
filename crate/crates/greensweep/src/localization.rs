//! Pose estimation: gyro dead reckoning between GPS fixes, hard position
//! snap on every fix, and yaw-drift correction from fix pairs taken while
//! driving straight.
//!
//! Heading is a compass bearing: 0 = north, positive clockwise, normalized
//! to (-pi, pi]. Velocity direction is (sin theta, cos theta).

use crate::geo::{bearing, wrap_angle, LocalPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LocalizationError {
    #[error("fix baseline {baseline_m:.3} m is below the {required_m:.3} m minimum")]
    BaselineTooShort { baseline_m: f64, required_m: f64 },
}

/// Robot pose estimate in the local frame at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub x: f64,
    pub y: f64,
    /// Compass heading, (-pi, pi].
    pub theta: f64,
    pub t: f64,
}

impl PoseEstimate {
    pub fn new(x: f64, y: f64, theta: f64, t: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            t,
        }
    }

    pub fn position(&self) -> LocalPoint {
        LocalPoint::new(self.x, self.y)
    }
}

/// One GPS position fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub point: LocalPoint,
    pub t: f64,
    pub sigma: f64,
}

/// Heading increment produced by the straight-line fix-pair method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawCorrection {
    /// Radians to add to the heading estimate, in (-pi, pi].
    pub delta: f64,
}

/// Dead-reckoning step with midpoint integration.
///
/// `theta_mid = theta + omega * dt / 2` drives the translation, so the step
/// is second-order accurate on arcs and exact on straight lines and pure
/// rotations.
pub fn predict(est: PoseEstimate, v_meas: f64, yaw_rate_meas: f64, dt: f64) -> PoseEstimate {
    debug_assert!(dt > 0.0);
    let theta_mid = est.theta + yaw_rate_meas * dt / 2.0;
    PoseEstimate {
        x: est.x + v_meas * dt * theta_mid.sin(),
        y: est.y + v_meas * dt * theta_mid.cos(),
        theta: wrap_angle(est.theta + yaw_rate_meas * dt),
        t: est.t + dt,
    }
}

/// Snap the position estimate to a fix. Heading is untouched. Returns the
/// updated estimate and the snap distance (size of the position jump).
pub fn apply_gps_fix(est: PoseEstimate, fix: &GpsFix) -> (PoseEstimate, f64) {
    let snap = est.position().distance(&fix.point);
    (
        PoseEstimate {
            x: fix.point.x,
            y: fix.point.y,
            theta: est.theta,
            t: fix.t.max(est.t),
        },
        snap,
    )
}

/// Heading error from two fixes taken on one straight run: the bearing of
/// the displacement (east over north, four-quadrant) minus the current
/// heading estimate. Add `delta` to the heading to correct it.
pub fn yaw_correction(
    fix_a: &GpsFix,
    fix_b: &GpsFix,
    yaw_estimate: f64,
    d_min: f64,
) -> Result<YawCorrection, LocalizationError> {
    let baseline = fix_a.point.distance(&fix_b.point);
    if baseline < d_min {
        return Err(LocalizationError::BaselineTooShort {
            baseline_m: baseline,
            required_m: d_min,
        });
    }
    let delta = wrap_angle(bearing(fix_a.point, fix_b.point) - yaw_estimate);
    Ok(YawCorrection { delta })
}

/// Straightness gate tuning.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StraightGateParams {
    /// A single commanded yaw rate at or above this resets the segment
    /// outright (the robot is cornering).
    #[serde(rename = "omega_reset_rad_s")]
    pub omega_reset: f64,
    /// Total commanded turn allowed over the whole segment. Steering jitter
    /// integrates to near zero on a held course; a real course change does
    /// not.
    #[serde(rename = "max_net_turn_rad")]
    pub max_net_turn: f64,
    /// Minimum fix-pair baseline before a correction is worth emitting.
    #[serde(rename = "d_min_m")]
    pub d_min: f64,
}

impl Default for StraightGateParams {
    fn default() -> Self {
        Self {
            omega_reset: 0.5,
            max_net_turn: 0.15,
            d_min: 1.0,
        }
    }
}

/// Tracks whether the robot has been holding a straight course since an
/// anchor fix, and emits a [`YawCorrection`] once a second fix gives a long
/// enough baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct StraightSegment {
    params: StraightGateParams,
    anchor_fix: Option<GpsFix>,
    net_turn: f64,
    straight_since: f64,
}

impl StraightSegment {
    pub fn new(params: StraightGateParams) -> Self {
        Self {
            params,
            anchor_fix: None,
            net_turn: 0.0,
            straight_since: 0.0,
        }
    }

    pub fn active(&self) -> bool {
        self.anchor_fix.is_some()
    }

    pub fn anchor(&self) -> Option<&GpsFix> {
        self.anchor_fix.as_ref()
    }

    /// Per-tick bookkeeping of the commanded yaw rate.
    pub fn note_command(&mut self, commanded_yaw_rate: f64, dt: f64, t: f64) {
        if commanded_yaw_rate.abs() >= self.params.omega_reset {
            self.reset(t + dt);
            return;
        }
        self.net_turn += commanded_yaw_rate * dt;
        if self.net_turn.abs() > self.params.max_net_turn {
            // Course has genuinely changed; drop the anchor, stay eligible.
            self.reset(t + dt);
        }
    }

    /// Feed a fix. The first fix after a reset anchors the segment; a later
    /// fix with baseline >= d_min yields a correction and re-anchors.
    pub fn on_fix(&mut self, fix: &GpsFix, yaw_estimate: f64) -> Option<YawCorrection> {
        match &self.anchor_fix {
            None => {
                self.anchor_fix = Some(*fix);
                self.net_turn = 0.0;
                None
            }
            Some(anchor) => {
                match yaw_correction(anchor, fix, yaw_estimate, self.params.d_min) {
                    Ok(corr) => {
                        self.anchor_fix = Some(*fix);
                        self.net_turn = 0.0;
                        Some(corr)
                    }
                    // Baseline still short: keep waiting on the same anchor.
                    Err(LocalizationError::BaselineTooShort { .. }) => None,
                }
            }
        }
    }

    fn reset(&mut self, t: f64) {
        self.anchor_fix = None;
        self.net_turn = 0.0;
        self.straight_since = t;
    }
}

/// What a fix did to the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixOutcome {
    /// Position jump caused by the snap, meters.
    pub snap_m: f64,
    /// Emitted yaw correction, if the straight-segment pair completed.
    pub yaw_delta: Option<f64>,
}

/// Complete estimator: dead reckoning, snap-on-fix, and optional yaw-drift
/// correction. One instance per robot; updates must be sequential.
#[derive(Debug, Clone)]
pub struct PoseTracker {
    pub est: PoseEstimate,
    segment: StraightSegment,
    corrections_enabled: bool,
}

impl PoseTracker {
    pub fn new(initial: PoseEstimate, gate: StraightGateParams, corrections_enabled: bool) -> Self {
        Self {
            est: initial,
            segment: StraightSegment::new(gate),
            corrections_enabled,
        }
    }

    pub fn corrections_enabled(&self) -> bool {
        self.corrections_enabled
    }

    /// Record the commanded yaw rate for the straightness gate. Call once
    /// per control tick, before `predict`.
    pub fn note_command(&mut self, commanded_yaw_rate: f64, dt: f64) {
        self.segment.note_command(commanded_yaw_rate, dt, self.est.t);
    }

    /// Dead-reckon one tick from measured speed and yaw rate.
    pub fn predict(&mut self, v_meas: f64, yaw_rate_meas: f64, dt: f64) {
        self.est = predict(self.est, v_meas, yaw_rate_meas, dt);
    }

    /// Ingest a fix: snap the position, then run the straight-segment logic.
    /// The yaw correction is applied to the heading only when enabled, but
    /// the segment state advances identically either way so enabled and
    /// disabled runs stay step-for-step comparable.
    pub fn on_gps_fix(&mut self, fix: &GpsFix) -> FixOutcome {
        let (snapped, snap_m) = apply_gps_fix(self.est, fix);
        self.est = snapped;
        let corr = self.segment.on_fix(fix, self.est.theta);
        if let Some(c) = corr {
            if self.corrections_enabled {
                self.est.theta = wrap_angle(self.est.theta + c.delta);
            }
        }
        FixOutcome {
            snap_m,
            yaw_delta: corr.map(|c| c.delta),
        }
    }
}
