//! Geodetic/local coordinate conversion and the polygon predicates used by
//! planning and simulation.
//!
//! All internal geometry is metric, in a local east/north tangent plane
//! ([`LocalFrame`]). Geodetic coordinates appear only at I/O boundaries.
//! The projection is equirectangular on a spherical earth, which is accurate
//! to well under a millimeter at the ~100 m field scales this crate targets.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A geodetic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// Latitude in degrees, in [-90, 90].
    #[serde(rename = "lat_deg")]
    pub lat: f64,
    /// Longitude in degrees, in [-180, 180].
    #[serde(rename = "lon_deg")]
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// A point in the local frame: meters east (`x`) and north (`y`) of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &LocalPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Local tangent plane anchored at a geodetic origin.
///
/// `x` is meters east, `y` meters north. Valid for points within ~10 km of
/// the origin, far beyond any field this crate will see.
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    pub origin: GeoPoint,
    pub earth_radius: f64,
    cos_lat0: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            earth_radius: EARTH_RADIUS_M,
            cos_lat0: origin.lat.to_radians().cos(),
        }
    }

    /// Project a geodetic point into the local frame.
    pub fn geo_to_local(&self, p: GeoPoint) -> LocalPoint {
        let x = (p.lon - self.origin.lon).to_radians() * self.earth_radius * self.cos_lat0;
        let y = (p.lat - self.origin.lat).to_radians() * self.earth_radius;
        LocalPoint::new(x, y)
    }

    /// Exact algebraic inverse of [`LocalFrame::geo_to_local`].
    pub fn local_to_geo(&self, p: LocalPoint) -> GeoPoint {
        let lon = self.origin.lon + (p.x / (self.earth_radius * self.cos_lat0)).to_degrees();
        let lat = self.origin.lat + (p.y / self.earth_radius).to_degrees();
        GeoPoint::new(lat, lon)
    }
}

/// Normalize an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Compass bearing from `a` to `b`: 0 = north, increasing clockwise.
pub fn bearing(a: LocalPoint, b: LocalPoint) -> f64 {
    (b.x - a.x).atan2(b.y - a.y)
}

/// Distance from point `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&LocalPoint::new(a.x + t * dx, a.y + t * dy))
}

/// A simple polygon in the local frame, vertices in any consistent winding.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<LocalPoint>,
}

/// Why a vertex list does not form a usable polygon.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
}

impl Polygon {
    /// Build a polygon, rejecting degenerate or self-intersecting input.
    pub fn new(vertices: Vec<LocalPoint>) -> Result<Self, PolygonError> {
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        let poly = Self { vertices };
        if !poly.is_simple() {
            return Err(PolygonError::SelfIntersecting);
        }
        if poly.area().abs() < 1e-12 {
            return Err(PolygonError::ZeroArea);
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[LocalPoint] {
        &self.vertices
    }

    /// Edges as (start, end) pairs, closing back to the first vertex.
    pub fn edges(&self) -> impl Iterator<Item = (LocalPoint, LocalPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Unsigned area by the shoelace formula.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        (acc / 2.0).abs()
    }

    /// Arithmetic mean of the vertices.
    pub fn vertex_centroid(&self) -> LocalPoint {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), v| (sx + v.x, sy + v.y));
        LocalPoint::new(sx / n, sy / n)
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> (LocalPoint, LocalPoint) {
        let mut min = LocalPoint::new(f64::INFINITY, f64::INFINITY);
        let mut max = LocalPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        (min, max)
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                // Adjacent edges share an endpoint; only proper crossings count.
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_properly_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return false;
                }
            }
        }
        true
    }

    /// Point containment, with points on the boundary counting as inside.
    pub fn contains(&self, p: LocalPoint) -> bool {
        if self.point_on_boundary(p) {
            return true;
        }
        // Even-odd ray cast with the half-open edge rule.
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn point_on_boundary(&self, p: LocalPoint) -> bool {
        self.edges().any(|(a, b)| {
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            cross == 0.0
                && p.x >= a.x.min(b.x)
                && p.x <= a.x.max(b.x)
                && p.y >= a.y.min(b.y)
                && p.y <= a.y.max(b.y)
        })
    }

    /// Minimum distance from `p` to the polygon boundary.
    pub fn distance_to_boundary(&self, p: LocalPoint) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff the axis-aligned `size` x `size` square with min corner
    /// `cell_min` lies entirely inside the polygon. Squares flush with the
    /// boundary count as inside.
    pub fn contains_cell(&self, cell_min: LocalPoint, size: f64) -> bool {
        let corners = [
            cell_min,
            LocalPoint::new(cell_min.x + size, cell_min.y),
            LocalPoint::new(cell_min.x + size, cell_min.y + size),
            LocalPoint::new(cell_min.x, cell_min.y + size),
        ];
        if !corners.iter().all(|c| self.contains(*c)) {
            return false;
        }
        // With all corners inside, the square can only escape if an edge cuts
        // through its interior.
        !self.any_edge_hits_open_box(cell_min, size)
    }

    /// True iff the polygon overlaps the open interior of the square. Contact
    /// along the square's boundary alone does not count.
    pub fn overlaps_cell_interior(&self, cell_min: LocalPoint, size: f64) -> bool {
        if self.any_edge_hits_open_box(cell_min, size) {
            return true;
        }
        // No edge enters the square: it is entirely inside or outside.
        let center = LocalPoint::new(cell_min.x + size / 2.0, cell_min.y + size / 2.0);
        self.contains(center)
    }

    fn any_edge_hits_open_box(&self, cell_min: LocalPoint, size: f64) -> bool {
        let max = LocalPoint::new(cell_min.x + size, cell_min.y + size);
        self.edges()
            .any(|(a, b)| segment_hits_open_box(a, b, cell_min, max))
    }
}

/// Proper (interior) crossing of segments `a1`-`a2` and `b1`-`b2`.
/// Shared endpoints and collinear touching do not count.
fn segments_properly_intersect(a1: LocalPoint, a2: LocalPoint, b1: LocalPoint, b2: LocalPoint) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn orient(a: LocalPoint, b: LocalPoint, c: LocalPoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Does the segment `p`-`q` pass through the open box (min, max)?
///
/// Liang-Barsky clip against the closed box, then a midpoint probe to reject
/// segments that only run along the box boundary or touch a corner.
fn segment_hits_open_box(p: LocalPoint, q: LocalPoint, min: LocalPoint, max: LocalPoint) -> bool {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let checks = [
        (-dx, p.x - min.x),
        (dx, max.x - p.x),
        (-dy, p.y - min.y),
        (dy, max.y - p.y),
    ];
    for (den, num) in checks {
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
            continue;
        }
        let t = num / den;
        if den < 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
    }
    if t0 >= t1 {
        return false;
    }
    let tm = (t0 + t1) / 2.0;
    let (mx, my) = (p.x + tm * dx, p.y + tm * dy);
    mx > min.x && mx < max.x && my > min.y && my < max.y
}
