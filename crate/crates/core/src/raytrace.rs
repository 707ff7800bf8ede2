//! 2D image-method ray tracing in an axis-aligned rectangular room.
//!
//! Paths are the line of sight plus every specular reflection path with up to
//! two bounces. Each bounce costs a flat 3 dB; propagation follows the Friis
//! free-space amplitude `lambda / (4*pi*d)`. Path phases are drawn uniformly
//! from a seeded RNG.
//!
//! Path length and both angles come from the unfolded displacement between the
//! receiver and the final image of the transmitter, computed per axis in a
//! form that is bit-for-bit symmetric under swapping the two ends. Reflection
//! points are solved separately and used to discard geometrically invalid
//! second-order paths.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{azimuth, Point2};
use crate::seeds;
use crate::{CARRIER_HZ, SPEED_OF_LIGHT};

/// Amplitude factor of one reflection (3 dB power loss).
pub fn reflection_amp() -> f64 {
    10f64.powf(-3.0 / 20.0)
}

const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// `x = x_min`
    Left,
    /// `x = x_max`
    Right,
    /// `y = y_min`
    Bottom,
    /// `y = y_max`
    Top,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::Left, Wall::Right, Wall::Bottom, Wall::Top];

    fn is_vertical(self) -> bool {
        matches!(self, Wall::Left | Wall::Right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Room {
    /// 8 m x 5 m with the receiver centre at the origin.
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 6.0,
            y_min: -2.5,
            y_max: 2.5,
        }
    }
}

impl Room {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let room = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(Error::validation(
                "room",
                "extents must be finite with x_min < x_max and y_min < y_max",
            ));
        }
        Ok(())
    }

    /// Strictly inside the walls.
    pub fn contains(&self, p: Point2) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }

    pub fn wall_coordinate(&self, wall: Wall) -> f64 {
        match wall {
            Wall::Left => self.x_min,
            Wall::Right => self.x_max,
            Wall::Bottom => self.y_min,
            Wall::Top => self.y_max,
        }
    }

    pub fn mirror(&self, p: Point2, wall: Wall) -> Point2 {
        let c = self.wall_coordinate(wall);
        if wall.is_vertical() {
            Point2::new(2.0 * c - p.x, p.y)
        } else {
            Point2::new(p.x, 2.0 * c - p.y)
        }
    }

    /// Whether `p` lies on the closed segment of `wall`.
    pub fn on_wall(&self, p: Point2, wall: Wall, tol: f64) -> bool {
        let c = self.wall_coordinate(wall);
        if wall.is_vertical() {
            (p.x - c).abs() <= tol && p.y >= self.y_min - tol && p.y <= self.y_max + tol
        } else {
            (p.y - c).abs() <= tol && p.x >= self.x_min - tol && p.x <= self.x_max + tol
        }
    }
}

/// One propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathComponent {
    /// Number of reflections, 0 for line of sight.
    pub order: u8,
    /// Walls hit, in propagation order from the transmitter.
    pub walls: Vec<Wall>,
    /// Reflection points, in propagation order.
    pub reflection_points: Vec<Point2>,
    /// Path-loss magnitude `alpha` of the complex path gain.
    pub magnitude: f64,
    /// Path phase `psi`, uniform in [0, 2*pi).
    pub phase_rad: f64,
    pub delay_s: f64,
    /// Global departure direction at the transmitter, [0, 360).
    pub aod_deg: f64,
    /// Global direction the path arrives from at the receiver, [0, 360).
    pub aoa_deg: f64,
    pub path_length_m: f64,
}

impl MultipathComponent {
    pub fn is_los(&self) -> bool {
        self.order == 0
    }

    /// Complex path gain `alpha * exp(j*psi)`.
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase_rad)
    }
}

/// Friis amplitude `lambda / (4*pi*d)` for unit-gain antennas.
pub fn fspl_amp(distance_m: f64, frequency_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::invalid("distance", "must be positive and finite"));
    }
    if !(frequency_hz > 0.0) {
        return Err(Error::invalid("frequency", "must be positive"));
    }
    let lambda = SPEED_OF_LIGHT / frequency_hz;
    Ok(lambda / (4.0 * PI * distance_m))
}

/// Trace all paths of order `<= max_order` at the default carrier.
pub fn trace(
    room: &Room,
    tx: Point2,
    rx: Point2,
    max_order: u8,
    seed: u64,
) -> Result<Vec<MultipathComponent>> {
    trace_at(room, tx, rx, max_order, seed, CARRIER_HZ)
}

/// Trace all paths of order `<= max_order`, sorted by delay.
pub fn trace_at(
    room: &Room,
    tx: Point2,
    rx: Point2,
    max_order: u8,
    seed: u64,
    carrier_hz: f64,
) -> Result<Vec<MultipathComponent>> {
    room.validate()?;
    if max_order > 2 {
        return Err(Error::invalid(
            "max_order",
            "at most second-order reflections are modelled",
        ));
    }
    if !room.contains(tx) {
        return Err(Error::invalid(
            "tx",
            format!("({}, {}) is not inside the room", tx.x, tx.y),
        ));
    }
    if !room.contains(rx) {
        return Err(Error::invalid(
            "rx",
            format!("({}, {}) is not inside the room", rx.x, rx.y),
        ));
    }
    if tx == rx {
        return Err(Error::invalid("tx", "transmitter and receiver coincide"));
    }

    let mut sequences: Vec<Vec<Wall>> = vec![vec![]];
    if max_order >= 1 {
        sequences.extend(Wall::ALL.iter().map(|&w| vec![w]));
    }
    if max_order >= 2 {
        for &w1 in &Wall::ALL {
            for &w2 in &Wall::ALL {
                if w1 != w2 {
                    sequences.push(vec![w1, w2]);
                }
            }
        }
    }

    let mut rng = seeds::rng(seeds::derive(seed, &[seeds::STAGE_PHASE]), 0);
    let mut paths = Vec::new();
    for walls in sequences {
        let Some(points) = reflection_points(room, tx, rx, &walls) else {
            continue;
        };
        let (dx, dy) = unfolded_displacement(room, tx, rx, &walls);
        let length = dx.hypot(dy);
        let (nx, ny) = axis_counts(&walls);
        let aoa = azimuth(dx, dy);
        let aod = azimuth(departure_sign(nx) * dx, departure_sign(ny) * dy);
        let order = walls.len() as u8;
        let magnitude = fspl_amp(length, carrier_hz)? * reflection_amp().powi(order as i32);
        let phase = rng.random::<f64>() * 2.0 * PI;
        paths.push(MultipathComponent {
            order,
            walls,
            reflection_points: points,
            magnitude,
            phase_rad: phase,
            delay_s: length / SPEED_OF_LIGHT,
            aod_deg: aod,
            aoa_deg: aoa,
            path_length_m: length,
        });
    }
    paths.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
    Ok(paths)
}

fn axis_counts(walls: &[Wall]) -> (usize, usize) {
    let nx = walls.iter().filter(|w| w.is_vertical()).count();
    (nx, walls.len() - nx)
}

/// The departure direction is the reversed arrival direction with one axis
/// flip per reflection on that axis.
fn departure_sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        -1.0
    } else {
        1.0
    }
}

/// `image(tx) - rx` along one axis, for the walls of that axis in order.
fn axis_displacement(tx: f64, rx: f64, walls: &[f64]) -> f64 {
    match *walls {
        [] => tx - rx,
        [a] => (a - tx) + (a - rx),
        [a, b] => 2.0 * (b - a) + (tx - rx),
        _ => unreachable!("at most two reflections per axis"),
    }
}

fn unfolded_displacement(room: &Room, tx: Point2, rx: Point2, walls: &[Wall]) -> (f64, f64) {
    let coords = |vertical: bool| -> Vec<f64> {
        walls
            .iter()
            .filter(|w| w.is_vertical() == vertical)
            .map(|&w| room.wall_coordinate(w))
            .collect()
    };
    (
        axis_displacement(tx.x, rx.x, &coords(true)),
        axis_displacement(tx.y, rx.y, &coords(false)),
    )
}

/// Solve the reflection points of a wall sequence by back-tracing from the
/// receiver through the successive images. Returns `None` when any point
/// falls off its wall segment.
pub fn reflection_points(
    room: &Room,
    tx: Point2,
    rx: Point2,
    walls: &[Wall],
) -> Option<Vec<Point2>> {
    let mut images = Vec::with_capacity(walls.len());
    let mut img = tx;
    for &w in walls {
        img = room.mirror(img, w);
        images.push(img);
    }
    let mut points = vec![Point2::new(0.0, 0.0); walls.len()];
    let mut from = rx;
    for i in (0..walls.len()).rev() {
        let p = intersect_wall(room, from, images[i], walls[i])?;
        points[i] = p;
        from = p;
    }
    Some(points)
}

fn intersect_wall(room: &Room, from: Point2, to: Point2, wall: Wall) -> Option<Point2> {
    let c = room.wall_coordinate(wall);
    let (a, b) = if wall.is_vertical() {
        (from.x, to.x)
    } else {
        (from.y, to.y)
    };
    if a == b {
        return None;
    }
    let t = (c - a) / (b - a);
    if !(t > EDGE_EPS && t < 1.0 - EDGE_EPS) {
        return None;
    }
    let mut p = Point2::new(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y));
    if wall.is_vertical() {
        p.x = c;
    } else {
        p.y = c;
    }
    room.on_wall(p, wall, EDGE_EPS).then_some(p)
}

/// Flat record used for the JSON path dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcRecord {
    pub order: u8,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub magnitude: f64,
    pub phase_rad: f64,
    pub delay_s: f64,
    pub aod_deg: f64,
    pub aoa_deg: f64,
    pub path_length_m: f64,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub reflection_points: Vec<Point2>,
}

impl From<&MultipathComponent> for MpcRecord {
    fn from(m: &MultipathComponent) -> Self {
        Self {
            order: m.order,
            amplitude_re: m.amplitude().re,
            amplitude_im: m.amplitude().im,
            magnitude: m.magnitude,
            phase_rad: m.phase_rad,
            delay_s: m.delay_s,
            aod_deg: m.aod_deg,
            aoa_deg: m.aoa_deg,
            path_length_m: m.path_length_m,
            walls: m.walls.clone(),
            reflection_points: m.reflection_points.clone(),
        }
    }
}

impl From<MpcRecord> for MultipathComponent {
    fn from(r: MpcRecord) -> Self {
        Self {
            order: r.order,
            walls: r.walls,
            reflection_points: r.reflection_points,
            magnitude: r.magnitude,
            phase_rad: r.phase_rad,
            delay_s: r.delay_s,
            aod_deg: r.aod_deg,
            aoa_deg: r.aoa_deg,
            path_length_m: r.path_length_m,
        }
    }
}

pub fn mpcs_to_json(paths: &[MultipathComponent]) -> String {
    let records: Vec<MpcRecord> = paths.iter().map(MpcRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("path records always serialize")
}

pub fn mpcs_from_json(text: &str) -> Result<Vec<MultipathComponent>> {
    let records: Vec<MpcRecord> = serde_json::from_str(text)?;
    Ok(records.into_iter().map(Into::into).collect())
}
