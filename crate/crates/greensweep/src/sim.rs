//! Ground-truth world: exact unicycle kinematics, sensor noise models,
//! trash items, the detection zone, and pickup outcomes.
//!
//! Everything the estimator is *not* allowed to see lives here. Truth uses
//! closed-form arc integration so simulation error never pollutes the
//! comparison between estimate and reality.

use crate::geo::{wrap_angle, LocalPoint};
use crate::localization::GpsFix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Simulation tick, seconds. Doubles as the camera frame interval.
pub const DT: f64 = 0.1;

/// Detection zone half-side, meters (0.3 m square).
pub const ZONE_HALF_SIZE: f64 = 0.15;

/// Zone center distance ahead of the robot, meters.
pub const ZONE_OFFSET: f64 = 0.3;

/// Robot halt duration during a pickup cycle, seconds.
pub const PICKUP_DURATION: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("pickup already attempted on this item")]
    AlreadyAttempted,
}

/// True robot state. `v` and `omega` are the rates actually applied during
/// the last step, after actuator clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotTruth {
    pub x: f64,
    pub y: f64,
    /// Compass heading, (-pi, pi].
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl RobotTruth {
    pub fn new(x: f64, y: f64, theta: f64, v_max: f64, omega_max: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v: 0.0,
            omega: 0.0,
            v_max,
            omega_max,
        }
    }

    pub fn position(&self) -> LocalPoint {
        LocalPoint::new(self.x, self.y)
    }
}

/// Advance ground truth by `dt` under command (v, omega), clamped to the
/// actuator limits. Exact arc for turning motion, straight line otherwise.
pub fn step_truth(truth: &RobotTruth, cmd_v: f64, cmd_omega: f64, dt: f64) -> RobotTruth {
    debug_assert!(dt > 0.0);
    let v = cmd_v.clamp(-truth.v_max, truth.v_max);
    let omega = cmd_omega.clamp(-truth.omega_max, truth.omega_max);
    let theta_new = truth.theta + omega * dt;
    let (x, y) = if omega.abs() > 1e-9 {
        let r = v / omega;
        (
            truth.x + r * (truth.theta.cos() - theta_new.cos()),
            truth.y + r * (theta_new.sin() - truth.theta.sin()),
        )
    } else {
        (
            truth.x + v * dt * truth.theta.sin(),
            truth.y + v * dt * truth.theta.cos(),
        )
    };
    RobotTruth {
        x,
        y,
        theta: wrap_angle(theta_new),
        v,
        omega,
        ..*truth
    }
}

/// Sensor noise configuration. Field names carry units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModelParams {
    /// Per-axis GPS noise with RTK corrections.
    pub gps_sigma_m: f64,
    /// Fix cadence.
    pub gps_period_s: f64,
    /// Per-axis GPS noise without corrections (95% of radial errors inside
    /// 2.4477 * sigma).
    pub plain_gps_sigma_m: f64,
    /// Constant gyro rate offset.
    pub gyro_bias_rad_s: f64,
    /// Gyro white noise density, rad/s per sqrt(Hz).
    pub gyro_noise_sd: f64,
    /// Multiplicative speed measurement noise fraction.
    pub odom_noise_frac: f64,
}

impl Default for SensorModelParams {
    fn default() -> Self {
        Self {
            gps_sigma_m: 0.01,
            gps_period_s: 1.0,
            plain_gps_sigma_m: 2.0,
            gyro_bias_rad_s: 0.01,
            gyro_noise_sd: 0.002,
            odom_noise_frac: 0.0,
        }
    }
}

impl SensorModelParams {
    /// Effective per-axis GPS sigma for the given correction mode.
    pub fn gps_sigma_for(&self, rtk: bool) -> f64 {
        if rtk {
            self.gps_sigma_m
        } else {
            self.plain_gps_sigma_m
        }
    }
}

/// One GPS fix: true position plus independent per-axis Gaussian noise.
pub fn sample_gps<R: Rng>(truth: &RobotTruth, t: f64, sigma: f64, rng: &mut R) -> GpsFix {
    let (nx, ny) = if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).unwrap();
        (n.sample(rng), n.sample(rng))
    } else {
        (0.0, 0.0)
    };
    GpsFix {
        point: LocalPoint::new(truth.x + nx, truth.y + ny),
        t,
        sigma,
    }
}

/// One gyro reading: true rate plus bias plus white noise scaled for the
/// sampling interval.
pub fn sample_gyro<R: Rng>(
    truth: &RobotTruth,
    params: &SensorModelParams,
    dt: f64,
    rng: &mut R,
) -> f64 {
    debug_assert!(dt > 0.0);
    let noise = if params.gyro_noise_sd > 0.0 {
        Normal::new(0.0, params.gyro_noise_sd / dt.sqrt())
            .unwrap()
            .sample(rng)
    } else {
        0.0
    };
    truth.omega + params.gyro_bias_rad_s + noise
}

/// One odometry speed reading with multiplicative noise.
pub fn sample_odom<R: Rng>(
    truth: &RobotTruth,
    params: &SensorModelParams,
    rng: &mut R,
) -> f64 {
    let noise = if params.odom_noise_frac > 0.0 {
        Normal::new(0.0, params.odom_noise_frac)
            .unwrap()
            .sample(rng)
    } else {
        0.0
    };
    truth.v * (1.0 + noise)
}

/// One trash item and its pipeline flags. Flags only ever move forward:
/// picked implies detected implies driven_over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrashItem {
    pub position: LocalPoint,
    driven_over: bool,
    detected: bool,
    picked: bool,
    attempted: bool,
}

impl TrashItem {
    pub fn new(position: LocalPoint) -> Self {
        Self {
            position,
            driven_over: false,
            detected: false,
            picked: false,
            attempted: false,
        }
    }

    pub fn driven_over(&self) -> bool {
        self.driven_over
    }

    pub fn detected(&self) -> bool {
        self.detected
    }

    pub fn picked(&self) -> bool {
        self.picked
    }

    pub fn attempted(&self) -> bool {
        self.attempted
    }

    pub fn mark_driven_over(&mut self) {
        self.driven_over = true;
    }

    pub fn mark_detected(&mut self) {
        self.driven_over = true;
        self.detected = true;
    }
}

/// The square the downward camera sees, rotated to the robot's heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionZone {
    pub center: LocalPoint,
    pub half_size: f64,
    pub heading: f64,
}

impl DetectionZone {
    /// Boundary-inclusive containment in the rotated square.
    pub fn contains(&self, p: LocalPoint) -> bool {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let (s, c) = (self.heading.sin(), self.heading.cos());
        // Coordinates along the robot's forward and right axes.
        let forward = dx * s + dy * c;
        let right = dx * c - dy * s;
        forward.abs() <= self.half_size && right.abs() <= self.half_size
    }
}

/// Zone center sits `ZONE_OFFSET` ahead of the robot along its heading.
pub fn detection_zone(truth: &RobotTruth) -> DetectionZone {
    DetectionZone {
        center: LocalPoint::new(
            truth.x + ZONE_OFFSET * truth.theta.sin(),
            truth.y + ZONE_OFFSET * truth.theta.cos(),
        ),
        half_size: ZONE_HALF_SIZE,
        heading: truth.theta,
    }
}

/// Indices of items inside the zone; marks each as driven over.
pub fn trash_in_zone(items: &mut [TrashItem], zone: &DetectionZone) -> Vec<usize> {
    let mut hit = Vec::new();
    for (i, item) in items.iter_mut().enumerate() {
        if zone.contains(item.position) {
            item.mark_driven_over();
            hit.push(i);
        }
    }
    hit
}

/// Bernoulli pickup attempt. Exactly one attempt per item per pass; the
/// success flag and the attempted flag both stick.
pub fn attempt_pickup<R: Rng>(
    item: &mut TrashItem,
    q: f64,
    rng: &mut R,
) -> Result<bool, SimError> {
    if item.attempted {
        return Err(SimError::AlreadyAttempted);
    }
    debug_assert!(item.detected, "pickup requires a detection first");
    item.attempted = true;
    let success = rng.gen_bool(q.clamp(0.0, 1.0));
    if success {
        item.picked = true;
    }
    Ok(success)
}
