//! Beampattern codebooks and array poses.
//!
//! A [`BeamCodebook`] stores the complex field gain of every beam sampled on a
//! uniform local angle grid. The channel synthesizer multiplies field gains;
//! the estimators work with the power pattern `|g|^2`.
//!
//! Synthetic codebooks are uniform linear arrays with half-wavelength spacing
//! whose per-element phases are rounded to the phase-shifter resolution.
//! Measured patterns can be loaded from the CSV format described on
//! [`BeamCodebook::to_csv`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_180, wrap_360, Point2};

/// Tolerance used when checking that an angle list is uniform, and when
/// deciding whether an angle lies on the grid edge.
const GRID_EPS: f64 = 1e-9;

/// Position and boresight of an antenna array. Local angle 0 points along
/// the boresight; local angles grow counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayPose {
    pub position: Point2,
    pub boresight_deg: f64,
}

impl ArrayPose {
    pub const fn new(x: f64, y: f64, boresight_deg: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            boresight_deg,
        }
    }

    /// The four receive arrays mounted around the origin, each facing outward.
    pub fn default_receivers() -> [ArrayPose; 4] {
        [
            ArrayPose::new(0.25, 0.0, 0.0),
            ArrayPose::new(0.0, 0.25, 90.0),
            ArrayPose::new(-0.25, 0.0, 180.0),
            ArrayPose::new(0.0, -0.25, 270.0),
        ]
    }

    pub fn local_to_global(&self, local_deg: f64) -> f64 {
        local_to_global(self, local_deg)
    }

    pub fn global_to_local(&self, global_deg: f64) -> f64 {
        global_to_local(self, global_deg)
    }
}

/// Map an array-local angle to the global frame, wrapped to [0, 360).
pub fn local_to_global(pose: &ArrayPose, local_deg: f64) -> f64 {
    wrap_360(pose.boresight_deg + local_deg)
}

/// Map a global angle to the array-local frame, wrapped to (-180, 180].
pub fn global_to_local(pose: &ArrayPose, global_deg: f64) -> f64 {
    wrap_180(global_deg - pose.boresight_deg)
}

/// Uniform, strictly increasing grid of local angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Default for AngleGrid {
    /// -79.5 to 80 degrees in 0.5 degree steps (320 samples).
    fn default() -> Self {
        Self {
            start: -79.5,
            step: 0.5,
            len: 320,
        }
    }
}

impl AngleGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("angle_grid", "grid is empty"));
        }
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::invalid(
                "angle_grid",
                "angles must be strictly increasing",
            ));
        }
        Ok(Self { start, step, len })
    }

    /// Build a grid from an explicit angle list, which must be strictly
    /// increasing with a uniform step.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        match angles {
            [] => Err(Error::invalid("angle_grid", "grid is empty")),
            [a] => Self::new(*a, 1.0, 1),
            [a, b, ..] => {
                let step = b - a;
                for (i, w) in angles.windows(2).enumerate() {
                    if !(w[1] > w[0]) {
                        return Err(Error::invalid(
                            "angle_grid",
                            format!("angles must be strictly increasing (index {})", i + 1),
                        ));
                    }
                    if ((w[1] - w[0]) - step).abs() > GRID_EPS * step.abs().max(1.0) {
                        return Err(Error::invalid(
                            "angle_grid",
                            format!("angle step is not uniform at index {}", i + 1),
                        ));
                    }
                }
                Self::new(*a, step, angles.len())
            }
        }
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.angle(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.angle(self.len - 1)
    }

    /// Nearest grid index, or `None` when the angle lies outside
    /// `[start, end]`.
    pub fn nearest(&self, angle_deg: f64) -> Option<usize> {
        if !angle_deg.is_finite()
            || angle_deg < self.start - GRID_EPS
            || angle_deg > self.end() + GRID_EPS
        {
            return None;
        }
        let i = ((angle_deg - self.start) / self.step).round();
        Some((i.max(0.0) as usize).min(self.len - 1))
    }

    pub fn contains(&self, angle_deg: f64) -> bool {
        self.nearest(angle_deg).is_some()
    }
}

/// Parameters for a synthetic ULA codebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_elements: usize,
    pub n_beams: usize,
    pub steer_min_deg: f64,
    pub steer_max_deg: f64,
    /// Phase-shifter resolution; `None` keeps continuous phases.
    pub phase_bits: Option<u32>,
    pub grid: AngleGrid,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_elements: 16,
            n_beams: 64,
            steer_min_deg: -45.0,
            steer_max_deg: 45.0,
            phase_bits: Some(6),
            grid: AngleGrid::default(),
        }
    }
}

impl SynthConfig {
    pub fn steering_angle(&self, beam: usize) -> f64 {
        if self.n_beams <= 1 {
            self.steer_min_deg
        } else {
            self.steer_min_deg
                + beam as f64 * (self.steer_max_deg - self.steer_min_deg)
                    / (self.n_beams - 1) as f64
        }
    }

    pub fn build(&self) -> Result<BeamCodebook> {
        synth_codebook(self)
    }
}

/// Complex field gains of every beam over a local angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamCodebook {
    field_gains: Array2<Complex64>,
    grid: AngleGrid,
    n_elements: Option<usize>,
    phase_bits: Option<u32>,
}

impl BeamCodebook {
    /// Wrap measured or hand-built gains. Rows are beams, columns follow `grid`.
    pub fn new(field_gains: Array2<Complex64>, grid: AngleGrid) -> Result<Self> {
        let (n_beams, n_ang) = field_gains.dim();
        if n_beams == 0 {
            return Err(Error::invalid("field_gains", "codebook has no beams"));
        }
        if n_ang != grid.len {
            return Err(Error::invalid(
                "field_gains",
                format!("{n_ang} angle columns but the grid has {} angles", grid.len),
            ));
        }
        if let Some(((b, a), _)) = field_gains
            .indexed_iter()
            .find(|(_, g)| !g.re.is_finite() || !g.im.is_finite())
        {
            return Err(Error::invalid(
                "field_gains",
                format!("non-finite gain at beam {b}, angle index {a}"),
            ));
        }
        Ok(Self {
            field_gains,
            grid,
            n_elements: None,
            phase_bits: None,
        })
    }

    /// Codebook whose field gains are the square roots of the given
    /// non-negative power patterns.
    pub fn from_power(power: &Array2<f64>, grid: AngleGrid) -> Result<Self> {
        if power.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid("power", "power gains must be non-negative"));
        }
        Self::new(power.mapv(|p| Complex64::new(p.sqrt(), 0.0)), grid)
    }

    pub fn n_beams(&self) -> usize {
        self.field_gains.nrows()
    }

    pub fn n_angles(&self) -> usize {
        self.grid.len
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn n_elements(&self) -> Option<usize> {
        self.n_elements
    }

    pub fn phase_bits(&self) -> Option<u32> {
        self.phase_bits
    }

    pub fn field_gains(&self) -> &Array2<Complex64> {
        &self.field_gains
    }

    /// Field gain of `beam` at the nearest grid angle; zero outside the grid.
    pub fn field_gain(&self, beam: usize, angle_deg: f64) -> Complex64 {
        match self.grid.nearest(angle_deg) {
            Some(i) => self.field_gains[[beam, i]],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `|g|^2` of `beam` at the nearest grid angle; zero outside the grid.
    pub fn power_gain(&self, beam: usize, angle_deg: f64) -> f64 {
        self.field_gain(beam, angle_deg).norm_sqr()
    }

    /// Field gains of every beam at one angle (zeros outside the grid).
    pub fn gains_at(&self, angle_deg: f64) -> Vec<Complex64> {
        match self.grid.nearest(angle_deg) {
            Some(i) => self.field_gains.column(i).to_vec(),
            None => vec![Complex64::new(0.0, 0.0); self.n_beams()],
        }
    }

    /// Largest `|g|` any beam achieves at `angle_deg`.
    pub fn best_field_magnitude(&self, angle_deg: f64) -> f64 {
        self.gains_at(angle_deg)
            .iter()
            .map(|g| g.norm())
            .fold(0.0, f64::max)
    }

    /// Power patterns, beams × angles.
    pub fn power_matrix(&self) -> Array2<f64> {
        self.field_gains.mapv(|g| g.norm_sqr())
    }

    /// Grid angle where `beam` has its largest power gain (lowest angle on ties).
    pub fn main_lobe_angle(&self, beam: usize) -> f64 {
        let row = self.field_gains.row(beam);
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (i, g) in row.iter().enumerate() {
            let p = g.norm_sqr();
            if p > best_p {
                best_p = p;
                best = i;
            }
        }
        self.grid.angle(best)
    }

    /// Serialize as CSV: a header line
    /// `beams=<N>,angles=<M>,angle_min=<a0>,angle_step=<da>` followed by one
    /// row per beam of `2*M` interleaved real and imaginary parts.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "beams={},angles={},angle_min={},angle_step={}",
            self.n_beams(),
            self.n_angles(),
            self.grid.start,
            self.grid.step
        );
        for row in self.field_gains.rows() {
            let mut first = true;
            for g in row {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{},{}", g.re, g.im);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing header".into(),
        })?;
        let header = parse_header(header)?;
        let grid =
            AngleGrid::new(header.angle_min, header.angle_step, header.angles).map_err(|e| {
                Error::Parse {
                    line: 1,
                    reason: e.to_string(),
                }
            })?;

        let mut gains = Array2::<Complex64>::zeros((header.beams, header.angles));
        let mut rows = 0;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if rows == header.beams {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("more than the {} declared beam rows", header.beams),
                });
            }
            let values = line
                .split(',')
                .map(|f| {
                    let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                        line: line_no,
                        reason: format!("not a number: {:?}", f.trim()),
                    })?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Parse {
                            line: line_no,
                            reason: format!("non-finite value {:?}", f.trim()),
                        })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != 2 * header.angles {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!(
                        "expected {} values (re,im per angle), found {}",
                        2 * header.angles,
                        values.len()
                    ),
                });
            }
            for (a, pair) in values.chunks_exact(2).enumerate() {
                gains[[rows, a]] = Complex64::new(pair[0], pair[1]);
            }
            rows += 1;
        }
        if rows != header.beams {
            return Err(Error::Parse {
                line: text.lines().count(),
                reason: format!("header declares {} beams, body has {rows}", header.beams),
            });
        }
        Self::new(gains, grid)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

struct CsvHeader {
    beams: usize,
    angles: usize,
    angle_min: f64,
    angle_step: f64,
}

fn parse_header(line: &str) -> Result<CsvHeader> {
    let err = |reason: String| Error::Parse { line: 1, reason };
    let mut beams = None;
    let mut angles = None;
    let mut angle_min = None;
    let mut angle_step = None;
    for field in line.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("header field {:?} is not key=value", field.trim())))?;
        let value = value.trim();
        match key.trim() {
            "beams" => beams = value.parse().ok(),
            "angles" => angles = value.parse().ok(),
            "angle_min" => angle_min = value.parse().ok(),
            "angle_step" => angle_step = value.parse().ok(),
            other => return Err(err(format!("unknown header field {other:?}"))),
        }
    }
    Ok(CsvHeader {
        beams: beams.ok_or_else(|| err("missing or malformed `beams`".into()))?,
        angles: angles.ok_or_else(|| err("missing or malformed `angles`".into()))?,
        angle_min: angle_min.ok_or_else(|| err("missing or malformed `angle_min`".into()))?,
        angle_step: angle_step.ok_or_else(|| err("missing or malformed `angle_step`".into()))?,
    })
}

/// Synthesize a ULA codebook.
///
/// Beam `b` is steered to `steer_min + b*(steer_max - steer_min)/(n_beams - 1)`.
/// Element `n` applies the phase `pi*n*sin(steer)` rounded to the nearest
/// multiple of `2*pi/2^phase_bits`; each beam is scaled so its largest
/// magnitude on the grid is 1.
pub fn synth_codebook(cfg: &SynthConfig) -> Result<BeamCodebook> {
    if cfg.n_elements == 0 {
        return Err(Error::invalid("n_elements", "need at least one element"));
    }
    if cfg.n_beams == 0 {
        return Err(Error::invalid("n_beams", "need at least one beam"));
    }
    if cfg.n_beams > 1 && !(cfg.steer_min_deg < cfg.steer_max_deg) {
        return Err(Error::invalid(
            "steer_min",
            "steer_min must be below steer_max",
        ));
    }
    if cfg.phase_bits == Some(0) {
        return Err(Error::invalid(
            "phase_bits",
            "resolution must be at least one bit",
        ));
    }
    let grid = AngleGrid::new(cfg.grid.start, cfg.grid.step, cfg.grid.len)?;

    let sin_grid: Vec<f64> = grid.angles().iter().map(|a| a.to_radians().sin()).collect();
    let mut gains = Array2::<Complex64>::zeros((cfg.n_beams, grid.len));
    for beam in 0..cfg.n_beams {
        let steer = cfg.steering_angle(beam).to_radians();
        let weights: Vec<f64> = (0..cfg.n_elements)
            .map(|n| quantize_phase(PI * n as f64 * steer.sin(), cfg.phase_bits))
            .collect();
        let mut row = gains.row_mut(beam);
        for (a, s) in sin_grid.iter().enumerate() {
            let sum: Complex64 = weights
                .iter()
                .enumerate()
                .map(|(n, w)| Complex64::from_polar(1.0, PI * n as f64 * s - w))
                .sum();
            row[a] = sum;
        }
        let peak = row.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if peak > 0.0 {
            row.mapv_inplace(|g| g / peak);
        }
    }
    Ok(BeamCodebook {
        field_gains: gains,
        grid,
        n_elements: Some(cfg.n_elements),
        phase_bits: cfg.phase_bits,
    })
}

/// Round a phase to the phase-shifter lattice, result in [0, 2*pi).
fn quantize_phase(phase: f64, bits: Option<u32>) -> f64 {
    let wrapped = phase.rem_euclid(2.0 * PI);
    match bits {
        None => wrapped,
        Some(b) => {
            let levels = (1u64 << b) as f64;
            let quantum = 2.0 * PI / levels;
            ((wrapped / quantum).round() % levels) * quantum
        }
    }
}
