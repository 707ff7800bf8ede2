//! Received I/Q synthesis and RSS grids.
//!
//! For a transmit beam `t` and receive beam `r` the received samples are
//!
//! ```text
//! y[k] = sum_l a_l * g_r(theta_l) * g_t(phi_l) * x[(k - d_l) mod K] + eta[k]
//! ```
//!
//! with path angles converted to each array's local frame, delays rounded to
//! whole samples at [`SAMPLE_RATE_HZ`](crate::SAMPLE_RATE_HZ) and applied
//! cyclically, and `eta` circular complex Gaussian noise. A sweep evaluates
//! every beam pair and reduces each to `RSS = sum_k |y[k]|^2`.
//!
//! Noise for pair `(t, r)` comes from its own ChaCha stream keyed by the sweep
//! seed, so a sweep is reproducible regardless of thread count.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{ArrayPose, BeamCodebook};
use crate::error::{Error, Result};
use crate::raytrace::MultipathComponent;
use crate::seeds;
use crate::sequences::ComplexSequence;
use crate::SAMPLE_RATE_HZ;

/// Receiver noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Noiseless.
    #[default]
    Off,
    /// SNR in dB of the strongest path at its best-aligned beam pair.
    SnrDb(f64),
    /// Noise power per complex sample.
    N0(f64),
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Off => Ok(()),
            NoiseSpec::SnrDb(s) if s.is_finite() => Ok(()),
            NoiseSpec::N0(n) if n.is_finite() && n >= 0.0 => Ok(()),
            _ => Err(Error::validation(
                "noise",
                "SNR must be finite and N0 non-negative",
            )),
        }
    }
}

/// Peak field-gain product `alpha * max_r |g_r| * max_t |g_t|` of a path, i.e.
/// its amplitude at the best-aligned beam pair.
pub fn path_peak_amplitude(
    mpc: &MultipathComponent,
    cb_tx: &BeamCodebook,
    tx_pose: &ArrayPose,
    cb_rx: &BeamCodebook,
    rx_pose: &ArrayPose,
) -> f64 {
    let aod = tx_pose.global_to_local(mpc.aod_deg);
    let aoa = rx_pose.global_to_local(mpc.aoa_deg);
    mpc.magnitude * cb_tx.best_field_magnitude(aod) * cb_rx.best_field_magnitude(aoa)
}

/// Per-path SNR `10*log10(|alpha * b_r * b_t|^2 / N0)` at the best-aligned
/// beam pair.
pub fn path_snr_db(
    mpc: &MultipathComponent,
    cb_tx: &BeamCodebook,
    tx_pose: &ArrayPose,
    cb_rx: &BeamCodebook,
    rx_pose: &ArrayPose,
    n0: f64,
) -> f64 {
    let a = path_peak_amplitude(mpc, cb_tx, tx_pose, cb_rx, rx_pose);
    10.0 * (a * a / n0).log10()
}

/// Noise power per sample implied by `noise`. In SNR mode the reference is the
/// strongest path at its best-aligned beam pair; without any visible path the
/// noise power is 0.
pub fn resolve_n0(
    noise: &NoiseSpec,
    mpcs: &[MultipathComponent],
    cb_tx: &BeamCodebook,
    tx_pose: &ArrayPose,
    cb_rx: &BeamCodebook,
    rx_pose: &ArrayPose,
) -> f64 {
    match *noise {
        NoiseSpec::Off => 0.0,
        NoiseSpec::N0(n0) => n0,
        NoiseSpec::SnrDb(snr) => {
            let peak = mpcs
                .iter()
                .map(|m| path_peak_amplitude(m, cb_tx, tx_pose, cb_rx, rx_pose))
                .fold(0.0, f64::max);
            peak * peak / 10f64.powf(snr / 10.0)
        }
    }
}

/// `sum_k |y[k]|^2`.
pub fn compute_rss(y: &ComplexSequence) -> f64 {
    y.samples().iter().map(|s| s.norm_sqr()).sum()
}

/// Delay in whole samples.
pub fn delay_samples(delay_s: f64) -> usize {
    (delay_s * SAMPLE_RATE_HZ).round().max(0.0) as usize
}

/// A path reduced to what the synthesizer needs: the delayed payload and
/// the per-beam gains of both arrays.
struct PathTerm {
    amplitude: Complex64,
    delayed: Vec<Complex64>,
    tx_gains: Vec<Complex64>,
    rx_gains: Vec<Complex64>,
}

/// Precomputed state for synthesizing every beam pair of one link.
pub struct Synthesizer {
    len: usize,
    n_tx: usize,
    n_rx: usize,
    terms: Vec<PathTerm>,
    noise_std: f64,
    noise_seed: u64,
}

impl Synthesizer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x: &ComplexSequence,
        mpcs: &[MultipathComponent],
        cb_tx: &BeamCodebook,
        tx_pose: &ArrayPose,
        cb_rx: &BeamCodebook,
        rx_pose: &ArrayPose,
        noise: &NoiseSpec,
        seed: u64,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("x", "payload is empty"));
        }
        noise.validate()?;
        let n0 = resolve_n0(noise, mpcs, cb_tx, tx_pose, cb_rx, rx_pose);
        let terms = mpcs
            .iter()
            .filter_map(|m| {
                let tx_gains = cb_tx.gains_at(tx_pose.global_to_local(m.aod_deg));
                let rx_gains = cb_rx.gains_at(rx_pose.global_to_local(m.aoa_deg));
                let silent = |g: &[Complex64]| g.iter().all(|v| v.norm_sqr() == 0.0);
                if silent(&tx_gains) || silent(&rx_gains) {
                    return None;
                }
                Some(PathTerm {
                    amplitude: m.amplitude(),
                    delayed: x.cyclic_delay(delay_samples(m.delay_s)).into_samples(),
                    tx_gains,
                    rx_gains,
                })
            })
            .collect();
        Ok(Self {
            len: x.len(),
            n_tx: cb_tx.n_beams(),
            n_rx: cb_rx.n_beams(),
            terms,
            noise_std: (n0 / 2.0).sqrt(),
            noise_seed: seeds::derive(seed, &[seeds::STAGE_NOISE]),
        })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    /// Noiseless received samples for one beam pair.
    pub fn signal(&self, t: usize, r: usize) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.len];
        for term in &self.terms {
            let c = term.amplitude * term.rx_gains[r] * term.tx_gains[t];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for (out, s) in y.iter_mut().zip(&term.delayed) {
                *out += c * s;
            }
        }
        y
    }

    fn add_noise(&self, y: &mut [Complex64], t: usize, r: usize) {
        if self.noise_std == 0.0 {
            return;
        }
        let mut rng = seeds::rng(self.noise_seed, (t * self.n_rx + r) as u64);
        for s in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s += Complex64::new(re, im) * self.noise_std;
        }
    }

    /// Received samples for one beam pair, noise included.
    pub fn receive(&self, t: usize, r: usize) -> ComplexSequence {
        let mut y = self.signal(t, r);
        self.add_noise(&mut y, t, r);
        ComplexSequence::new(y)
    }

    /// `(noisy RSS, noiseless RSS)` of one beam pair.
    pub fn rss_pair(&self, t: usize, r: usize) -> (f64, f64) {
        let mut y = self.signal(t, r);
        let clean = y.iter().map(|s| s.norm_sqr()).sum();
        self.add_noise(&mut y, t, r);
        (y.iter().map(|s| s.norm_sqr()).sum(), clean)
    }
}

/// Synthesize the received samples of one beam pair.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_rx(
    x: &ComplexSequence,
    mpcs: &[MultipathComponent],
    cb_tx: &BeamCodebook,
    tx_pose: &ArrayPose,
    cb_rx: &BeamCodebook,
    rx_pose: &ArrayPose,
    t: usize,
    r: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<ComplexSequence> {
    if t >= cb_tx.n_beams() || r >= cb_rx.n_beams() {
        return Err(Error::invalid(
            "beam",
            format!("pair ({t}, {r}) is out of range"),
        ));
    }
    let synth = Synthesizer::new(x, mpcs, cb_tx, tx_pose, cb_rx, rx_pose, noise, seed)?;
    Ok(synth.receive(t, r))
}

/// Measurement imperfections applied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Probability that a beam pair is independently dropped.
    pub dropout: f64,
    /// Beam pairs whose noiseless RSS is more than this many dB below the
    /// strongest pair are marked missing. `None` disables the cut.
    pub activation_threshold_db: Option<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            dropout: 0.0,
            activation_threshold_db: Some(35.0),
        }
    }
}

impl SweepOptions {
    /// Keep every pair.
    pub fn complete() -> Self {
        Self {
            dropout: 0.0,
            activation_threshold_db: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation("dropout", "must lie in [0, 1)"));
        }
        if let Some(db) = self.activation_threshold_db {
            if !db.is_finite() || db < 0.0 {
                return Err(Error::validation(
                    "activation_threshold_db",
                    "must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }
}

/// Sweep all `N_tx x N_rx` beam pairs of one receiver.
#[allow(clippy::too_many_arguments)]
pub fn sweep_rss(
    x: &ComplexSequence,
    mpcs: &[MultipathComponent],
    cb_tx: &BeamCodebook,
    tx_pose: &ArrayPose,
    cb_rx: &BeamCodebook,
    rx_pose: &ArrayPose,
    noise: &NoiseSpec,
    seed: u64,
    options: &SweepOptions,
    receiver_id: usize,
) -> Result<RssGrid> {
    options.validate()?;
    let synth = Synthesizer::new(x, mpcs, cb_tx, tx_pose, cb_rx, rx_pose, noise, seed)?;
    let (n_tx, n_rx) = (synth.n_tx(), synth.n_rx());

    let pairs: Vec<(f64, f64)> = (0..n_tx * n_rx)
        .into_par_iter()
        .map(|i| synth.rss_pair(i / n_rx, i % n_rx))
        .collect();

    let values = Array2::from_shape_fn((n_tx, n_rx), |(t, r)| pairs[t * n_rx + r].0);
    let clean_max = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let floor = options
        .activation_threshold_db
        .map(|db| clean_max * 10f64.powf(-db / 10.0))
        .unwrap_or(0.0);
    let dropout_seed = seeds::derive(seed, &[seeds::STAGE_DROPOUT]);
    let valid = Array2::from_shape_fn((n_tx, n_rx), |(t, r)| {
        let idx = t * n_rx + r;
        let dropped = options.dropout > 0.0
            && seeds::rng(dropout_seed, idx as u64).random::<f64>() < options.dropout;
        !dropped && pairs[idx].1 >= floor
    });
    RssGrid::new(values, valid, receiver_id)
}

/// Per-receiver RSS over all beam pairs, TX beams along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RssGrid {
    values: Array2<f64>,
    valid: Array2<bool>,
    receiver_id: usize,
}

#[derive(Serialize, Deserialize)]
struct RssGridJson {
    receiver_id: usize,
    n_tx: usize,
    n_rx: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valid: Option<Vec<bool>>,
}

impl RssGrid {
    pub fn new(values: Array2<f64>, valid: Array2<bool>, receiver_id: usize) -> Result<Self> {
        if values.dim() != valid.dim() {
            return Err(Error::invalid(
                "valid",
                "mask shape differs from the value matrix",
            ));
        }
        if values.is_empty() {
            return Err(Error::invalid("values", "grid is empty"));
        }
        if let Some(((t, r), v)) = values
            .indexed_iter()
            .find(|&(i, &v)| valid[i] && (!v.is_finite() || v < 0.0))
        {
            return Err(Error::invalid(
                "values",
                format!("entry ({t}, {r}) = {v} is not a finite non-negative power"),
            ));
        }
        Ok(Self {
            values,
            valid,
            receiver_id,
        })
    }

    /// A grid with every entry valid.
    pub fn complete(values: Array2<f64>, receiver_id: usize) -> Result<Self> {
        let valid = Array2::from_elem(values.dim(), true);
        Self::new(values, valid, receiver_id)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn valid(&self) -> &Array2<bool> {
        &self.valid
    }

    pub fn receiver_id(&self) -> usize {
        self.receiver_id
    }

    pub fn n_tx(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_rx(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Values with invalid entries replaced by zero.
    pub fn masked_values(&self) -> Array2<f64> {
        Array2::from_shape_fn(self.values.dim(), |i| {
            if self.valid[i] {
                self.values[i]
            } else {
                0.0
            }
        })
    }

    /// Validity mask as 0/1 weights.
    pub fn mask_weights(&self) -> Array2<f64> {
        self.valid.mapv(|v| if v { 1.0 } else { 0.0 })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.values.mapv(|v| v * c),
            self.valid.clone(),
            self.receiver_id,
        )
    }

    pub fn with_valid(&self, valid: Array2<bool>) -> Result<Self> {
        Self::new(self.values.clone(), valid, self.receiver_id)
    }

    pub fn to_json(&self) -> String {
        let doc = RssGridJson {
            receiver_id: self.receiver_id,
            n_tx: self.n_tx(),
            n_rx: self.n_rx(),
            values: self.values.iter().copied().collect(),
            valid: Some(self.valid.iter().copied().collect()),
        };
        serde_json::to_string(&doc).expect("grid always serializes")
    }

    /// Parse the JSON grid format. A missing `valid` array means every entry
    /// was measured.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RssGridJson = serde_json::from_str(text)?;
        let n = doc.n_tx * doc.n_rx;
        if doc.values.len() != n {
            return Err(Error::validation(
                "values",
                format!(
                    "expected {n} entries for {}x{}, found {}",
                    doc.n_tx,
                    doc.n_rx,
                    doc.values.len()
                ),
            ));
        }
        let valid = doc.valid.unwrap_or_else(|| vec![true; n]);
        if valid.len() != n {
            return Err(Error::validation(
                "valid",
                format!("expected {n} entries, found {}", valid.len()),
            ));
        }
        let values = Array2::from_shape_vec((doc.n_tx, doc.n_rx), doc.values)
            .map_err(|e| Error::validation("values", e.to_string()))?;
        let valid = Array2::from_shape_vec((doc.n_tx, doc.n_rx), valid)
            .map_err(|e| Error::validation("valid", e.to_string()))?;
        Self::new(values, valid, doc.receiver_id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
