//! Scenario files: geodetic field description plus all tunables, validated
//! and projected into the local frame.
//!
//! Scenarios are JSON with unit-suffixed keys. Geodetic coordinates appear
//! only here; everything downstream works in meters. The local frame is
//! anchored at the centroid of the boundary vertices.

use crate::controller::ControlParams;
use crate::detector::DetectorParams;
use crate::geo::{GeoPoint, LocalFrame, LocalPoint, Polygon};
use crate::localization::StraightGateParams;
use crate::sim::{SensorModelParams, DT, PICKUP_DURATION};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// GPS correction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpsMode {
    Rtk,
    Plain,
}

/// On/off switch used for the yaw-correction setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    pub fn enabled(self) -> bool {
        self == Toggle::On
    }
}

/// On-disk scenario schema. All tunables optional with crate defaults;
/// geometry is mandatory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub boundary: Vec<GeoPoint>,
    #[serde(default)]
    pub obstacles: Vec<Vec<GeoPoint>>,
    pub start: GeoPoint,
    #[serde(default)]
    pub trash: Vec<GeoPoint>,
    /// Extra trash items placed on distinct path cells, uniformly at random
    /// per run (excludes the start cell).
    #[serde(default)]
    pub random_trash: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: GpsMode,
    #[serde(default = "default_toggle_on")]
    pub yaw_correction: Toggle,
    #[serde(default = "default_pickup_q")]
    pub pickup_q: f64,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_pickup_duration")]
    pub pickup_duration_s: f64,
    /// Run abort threshold as a multiple of the noiseless completion
    /// estimate.
    #[serde(default = "default_timeout_factor")]
    pub timeout_factor: f64,
    #[serde(default)]
    pub sensors: SensorModelParams,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub straight_gate: StraightGateParams,
}

fn default_mode() -> GpsMode {
    GpsMode::Rtk
}
fn default_toggle_on() -> Toggle {
    Toggle::On
}
fn default_pickup_q() -> f64 {
    0.89
}
fn default_cell_size() -> f64 {
    0.3
}
fn default_dt() -> f64 {
    DT
}
fn default_pickup_duration() -> f64 {
    PICKUP_DURATION
}
fn default_timeout_factor() -> f64 {
    3.0
}

/// Validated scenario in the local frame, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub frame: LocalFrame,
    pub boundary: Polygon,
    pub obstacles: Vec<Polygon>,
    pub start: LocalPoint,
    pub trash: Vec<LocalPoint>,
    pub random_trash: usize,
    pub seed: u64,
    pub mode: GpsMode,
    pub yaw_correction: bool,
    pub pickup_q: f64,
    pub cell_size_m: f64,
    pub dt_s: f64,
    pub pickup_duration_s: f64,
    pub timeout_factor: f64,
    pub sensors: SensorModelParams,
    pub detector: DetectorParams,
    pub control: ControlParams,
    pub straight_gate: StraightGateParams,
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Parse and validate scenario JSON.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.into_scenario()
}

impl ScenarioFile {
    /// Validate and project into the local frame.
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        if self.boundary.len() < 3 {
            return Err(invalid(
                "boundary",
                format!("needs at least 3 vertices, got {}", self.boundary.len()),
            ));
        }
        for (i, g) in self.boundary.iter().enumerate() {
            check_geo(g, &format!("boundary[{i}]"))?;
        }
        check_geo(&self.start, "start")?;

        // Anchor the frame at the centroid of the boundary vertices.
        let n = self.boundary.len() as f64;
        let centroid = GeoPoint::new(
            self.boundary.iter().map(|g| g.lat).sum::<f64>() / n,
            self.boundary.iter().map(|g| g.lon).sum::<f64>() / n,
        );
        let frame = LocalFrame::new(centroid);

        let to_local = |pts: &[GeoPoint]| -> Vec<LocalPoint> {
            pts.iter().map(|g| frame.geo_to_local(*g)).collect()
        };

        let boundary = Polygon::new(to_local(&self.boundary))
            .map_err(|e| invalid("boundary", e.to_string()))?;

        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, verts) in self.obstacles.iter().enumerate() {
            let field = format!("obstacles[{i}]");
            let poly = Polygon::new(to_local(verts)).map_err(|e| invalid(&field, e.to_string()))?;
            for v in poly.vertices() {
                if !boundary.contains(*v) {
                    return Err(invalid(&field, "obstacle extends outside the boundary"));
                }
            }
            obstacles.push(poly);
        }

        let start = frame.geo_to_local(self.start);
        if !boundary.contains(start) {
            return Err(invalid("start", "start position is outside the boundary"));
        }

        let mut trash = Vec::with_capacity(self.trash.len());
        for (i, g) in self.trash.iter().enumerate() {
            let field = format!("trash[{i}]");
            check_geo(g, &field)?;
            let p = frame.geo_to_local(*g);
            if !boundary.contains(p) {
                return Err(invalid(&field, "trash position is outside the boundary"));
            }
            trash.push(p);
        }

        if !(0.0..=1.0).contains(&self.pickup_q) {
            return Err(invalid("pickup_q", "must be a probability in [0, 1]"));
        }
        if !(self.cell_size_m > 0.0) || !self.cell_size_m.is_finite() {
            return Err(invalid("cell_size_m", "must be positive"));
        }
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return Err(invalid("dt_s", "must be positive"));
        }
        if self.pickup_duration_s < 0.0 {
            return Err(invalid("pickup_duration_s", "must be non-negative"));
        }
        if !(self.timeout_factor > 0.0) {
            return Err(invalid("timeout_factor", "must be positive"));
        }

        let s = &self.sensors;
        if s.gps_sigma_m < 0.0
            || s.plain_gps_sigma_m < 0.0
            || s.gyro_noise_sd < 0.0
            || s.odom_noise_frac < 0.0
        {
            return Err(invalid("sensors", "noise parameters must be non-negative"));
        }
        if !(s.gps_period_s > 0.0) {
            return Err(invalid("sensors", "gps_period_s must be positive"));
        }

        let d = &self.detector;
        if !(0.0..=1.0).contains(&d.p_hit) || !(0.0..=1.0).contains(&d.p_false) {
            return Err(invalid("detector", "p_hit and p_false must be in [0, 1]"));
        }
        if d.p_false > d.p_hit {
            return Err(invalid("detector", "p_false must not exceed p_hit"));
        }
        if d.window_len == 0 {
            return Err(invalid("detector", "window_len must be positive"));
        }
        if !(0.0..=1.0).contains(&d.trigger_threshold)
            || !(0.0..=1.0).contains(&d.infer_threshold)
        {
            return Err(invalid("detector", "thresholds must be in [0, 1]"));
        }

        let c = &self.control;
        if !(c.v_nom_m_s > 0.0)
            || !(c.k_heading > 0.0)
            || !(c.waypoint_tol_m > 0.0)
            || !(c.omega_max_rad_s > 0.0)
        {
            return Err(invalid("control", "all control parameters must be positive"));
        }
        if c.waypoint_tol_m >= self.cell_size_m / 2.0 {
            return Err(invalid(
                "control",
                "waypoint_tol_m must be below half the cell size",
            ));
        }

        let g = &self.straight_gate;
        if !(g.omega_reset > 0.0) || !(g.max_net_turn > 0.0) || !(g.d_min > 0.0) {
            return Err(invalid(
                "straight_gate",
                "gate parameters must be positive",
            ));
        }

        Ok(Scenario {
            name: self.name,
            frame,
            boundary,
            obstacles,
            start,
            trash,
            random_trash: self.random_trash,
            seed: self.seed,
            mode: self.mode,
            yaw_correction: self.yaw_correction.enabled(),
            pickup_q: self.pickup_q,
            cell_size_m: self.cell_size_m,
            dt_s: self.dt_s,
            pickup_duration_s: self.pickup_duration_s,
            timeout_factor: self.timeout_factor,
            sensors: self.sensors,
            detector: self.detector,
            control: self.control,
            straight_gate: self.straight_gate,
        })
    }
}

fn check_geo(g: &GeoPoint, field: &str) -> Result<(), ScenarioError> {
    if !g.lat.is_finite() || g.lat.abs() > 90.0 {
        return Err(invalid(field, format!("latitude {} out of range", g.lat)));
    }
    if !g.lon.is_finite() || g.lon.abs() > 180.0 {
        return Err(invalid(field, format!("longitude {} out of range", g.lon)));
    }
    Ok(())
}
