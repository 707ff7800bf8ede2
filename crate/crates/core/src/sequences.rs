//! Zadoff-Chu payload generation.
//!
//! The transmit waveform is a length-`K` Zadoff-Chu sequence
//! `z_k = exp(-j*pi*u*k*(k + c + 2q)/K)` with `c = K mod 2`. For a root `u`
//! coprime to `K` the sequence has constant amplitude and an ideal (zero)
//! cyclic autocorrelation at every nonzero lag.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-modulus complex samples used as the transmit signal `x[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSequence {
    samples: Vec<Complex64>,
}

impl ComplexSequence {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Copy of the sequence delayed cyclically by `shift` samples:
    /// `out[k] = x[(k - shift) mod K]`.
    pub fn cyclic_delay(&self, shift: usize) -> ComplexSequence {
        let n = self.samples.len();
        if n == 0 {
            return self.clone();
        }
        let shift = shift % n;
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(&self.samples[n - shift..]);
        out.extend_from_slice(&self.samples[..n - shift]);
        ComplexSequence { samples: out }
    }
}

/// Payload parameters. `K = 384` is the testbed payload length; the root and
/// offset are free choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadConfig {
    pub length: u64,
    pub root: u64,
    pub offset: i64,
}

impl Default for PayloadConfig {
    fn default() -> Self {
        Self {
            length: 384,
            root: 1,
            offset: 0,
        }
    }
}

impl PayloadConfig {
    pub fn generate(&self) -> Result<ComplexSequence> {
        zadoff_chu(self.length, self.root, self.offset)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Generate a Zadoff-Chu sequence of length `len` with root `root` and
/// integer offset `offset`.
///
/// The phase index `u*k*(k + c + 2q)` is reduced modulo `2K` in exact integer
/// arithmetic before conversion to an angle, so long sequences keep their
/// ideal autocorrelation to within rounding of a single `sin`/`cos`.
pub fn zadoff_chu(len: u64, root: u64, offset: i64) -> Result<ComplexSequence> {
    if len == 0 {
        return Err(Error::invalid("K", "sequence length must be positive"));
    }
    if root == 0 || root >= len || gcd(root, len) != 1 {
        return Err(Error::InvalidRoot { root, len });
    }
    let k_len = len as i128;
    let modulus = 2 * k_len;
    let c = k_len % 2;
    let u = root as i128;
    let q = offset as i128;
    let samples = (0..k_len)
        .map(|k| {
            let m = (u * k % modulus) * ((k + c + 2 * q).rem_euclid(modulus)) % modulus;
            Complex64::from_polar(1.0, -PI * m as f64 / k_len as f64)
        })
        .collect();
    Ok(ComplexSequence { samples })
}

/// Cyclic autocorrelation `sum_k x[k] * conj(x[(k + lag) mod K])`.
pub fn cyclic_autocorrelation(x: &ComplexSequence, lag: usize) -> Complex64 {
    let s = x.samples();
    let n = s.len();
    (0..n).map(|k| s[k] * s[(k + lag) % n].conj()).sum()
}
