//! Planar points and azimuth helpers. Angles are in degrees, counter-clockwise
//! from the global +x axis.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Global azimuth of the direction from `self` towards `other`, in [0, 360).
    pub fn bearing_to(self, other: Point2) -> f64 {
        azimuth(other.x - self.x, other.y - self.y)
    }
}

/// Azimuth of the vector `(dx, dy)` in [0, 360).
pub fn azimuth(dx: f64, dy: f64) -> f64 {
    wrap_360(dy.atan2(dx).to_degrees())
}

/// Wrap to [0, 360).
pub fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Wrap to (-180, 180].
pub fn wrap_180(deg: f64) -> f64 {
    let w = wrap_360(deg);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Absolute circular difference between two angles, in [0, 180].
pub fn circular_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}
