//! Experiment configuration.
//!
//! A scenario is a single JSON document that fixes everything an experiment
//! depends on, seeds included. Every field is optional; omitted fields take
//! the defaults below, which describe the measurement room: an 8 m x 5 m room,
//! four receive arrays 0.25 m from the origin facing outward, and ten
//! transmitter positions facing the receiver along -x.
//!
//! ```json
//! {
//!   "room": { "x_min": -2.0, "x_max": 6.0, "y_min": -2.5, "y_max": 2.5 },
//!   "tx_positions": [ { "x": 2.4, "y": 0.0 }, ... ],
//!   "tx_boresight_deg": 180.0,
//!   "rx_poses": [ { "position": { "x": 0.25, "y": 0.0 }, "boresight_deg": 0.0 }, ... ],
//!   "codebook": { "synth": { "n_elements": 16, "n_beams": 64, ... } },
//!   "payload": { "length": 384, "root": 1, "offset": 0 },
//!   "noise": { "snr_db": 20.0 },
//!   "seeds": [0, 1, 2, 3, 4, 5, 6, 7],
//!   "dropout": 0.0,
//!   "activation_threshold_db": 35.0,
//!   "max_order": 2,
//!   "carrier_hz": 60000000000.0
//! }
//! ```
//!
//! Measured codebooks replace `"synth"` with
//! `{ "files": { "tx": "tx.csv", "rx": "rx.csv" } }`; relative paths resolve
//! against the directory of the config file. `"noise"` is `"off"`,
//! `{ "snr_db": x }` or `{ "n0": x }`. `"activation_threshold_db": null`
//! disables the weak-pair cut.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{NoiseSpec, SweepOptions};
use crate::codebook::{ArrayPose, BeamCodebook, SynthConfig};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::raytrace::Room;
use crate::sequences::PayloadConfig;
use crate::CARRIER_HZ;

/// Where the beampatterns come from. TX and all RX arrays share the codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookSource {
    Synth(SynthConfig),
    Files { tx: PathBuf, rx: PathBuf },
}

impl Default for CodebookSource {
    fn default() -> Self {
        CodebookSource::Synth(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub room: Room,
    pub tx_positions: Vec<Point2>,
    pub tx_boresight_deg: f64,
    pub rx_poses: Vec<ArrayPose>,
    pub codebook: CodebookSource,
    pub payload: PayloadConfig,
    pub noise: NoiseSpec,
    pub seeds: Vec<u64>,
    pub dropout: f64,
    pub activation_threshold_db: Option<f64>,
    pub max_order: u8,
    pub carrier_hz: f64,
}

/// The ten transmitter positions p1..p10.
pub fn default_tx_positions() -> Vec<Point2> {
    [
        (2.4, 0.0),
        (2.4, 0.6),
        (2.4, 1.2),
        (2.4, -0.3),
        (2.4, -0.6),
        (3.0, 0.0),
        (3.0, 0.6),
        (3.0, 1.2),
        (3.0, -0.3),
        (3.0, -0.6),
    ]
    .into_iter()
    .map(|(x, y)| Point2::new(x, y))
    .collect()
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            room: Room::default(),
            tx_positions: default_tx_positions(),
            tx_boresight_deg: 180.0,
            rx_poses: ArrayPose::default_receivers().to_vec(),
            codebook: CodebookSource::default(),
            payload: PayloadConfig::default(),
            noise: NoiseSpec::SnrDb(20.0),
            seeds: (0..8).collect(),
            dropout: 0.0,
            activation_threshold_db: Some(35.0),
            max_order: 2,
            carrier_hz: CARRIER_HZ,
        }
    }
}

impl Scenario {
    /// Check every field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        if self.tx_positions.is_empty() {
            return Err(Error::validation(
                "tx_positions",
                "at least one position is required",
            ));
        }
        for (i, p) in self.tx_positions.iter().enumerate() {
            if !self.room.contains(*p) {
                return Err(Error::validation(
                    format!("tx_positions[{i}]"),
                    "outside room",
                ));
            }
        }
        if self.rx_poses.is_empty() {
            return Err(Error::validation(
                "rx_poses",
                "at least one receiver is required",
            ));
        }
        for (i, pose) in self.rx_poses.iter().enumerate() {
            if !self.room.contains(pose.position) {
                return Err(Error::validation(format!("rx_poses[{i}]"), "outside room"));
            }
            if !pose.boresight_deg.is_finite() {
                return Err(Error::validation(
                    format!("rx_poses[{i}].boresight_deg"),
                    "not finite",
                ));
            }
            if let Some(j) = self.tx_positions.iter().position(|p| *p == pose.position) {
                return Err(Error::validation(
                    format!("tx_positions[{j}]"),
                    format!("coincides with rx_poses[{i}]"),
                ));
            }
        }
        if !self.tx_boresight_deg.is_finite() {
            return Err(Error::validation("tx_boresight_deg", "not finite"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "at least one seed is required"));
        }
        if self.max_order > 2 {
            return Err(Error::validation("max_order", "must be 0, 1 or 2"));
        }
        if !(self.carrier_hz > 0.0) || !self.carrier_hz.is_finite() {
            return Err(Error::validation("carrier_hz", "must be positive"));
        }
        self.noise.validate()?;
        self.sweep_options().validate()?;
        self.payload
            .generate()
            .map_err(|e| Error::validation("payload", e.to_string()))?;
        match &self.codebook {
            CodebookSource::Synth(cfg) => {
                cfg.build()
                    .map_err(|e| Error::validation("codebook.synth", e.to_string()))?;
            }
            CodebookSource::Files { tx, rx } => {
                for (name, path) in [("codebook.files.tx", tx), ("codebook.files.rx", rx)] {
                    if !path.is_file() {
                        return Err(Error::validation(
                            name,
                            format!("file not found: {}", path.display()),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tx_pose(&self, position: usize) -> ArrayPose {
        ArrayPose {
            position: self.tx_positions[position],
            boresight_deg: self.tx_boresight_deg,
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            dropout: self.dropout,
            activation_threshold_db: self.activation_threshold_db,
        }
    }

    /// `(TX codebook, RX codebook)`.
    pub fn codebooks(&self) -> Result<(BeamCodebook, BeamCodebook)> {
        match &self.codebook {
            CodebookSource::Synth(cfg) => {
                let cb = cfg.build()?;
                Ok((cb.clone(), cb))
            }
            CodebookSource::Files { tx, rx } => {
                Ok((BeamCodebook::load(tx)?, BeamCodebook::load(rx)?))
            }
        }
    }

    /// Parse and validate a config document. Relative codebook paths resolve
    /// against `base_dir`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let field = if field == "." {
                "config".to_string()
            } else {
                field
            };
            Error::validation(field, e.into_inner().to_string())
        })?;
        if let (Some(base), CodebookSource::Files { tx, rx }) = (base_dir, &mut scenario.codebook) {
            for p in [tx, rx] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario always serializes")
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json(&text, path.parent())
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario.to_json()).map_err(|e| Error::io(path, e))
}
