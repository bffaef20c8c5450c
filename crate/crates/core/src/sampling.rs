//! Counter-based seeded random streams.
//!
//! A stream is addressed by `(seed, namespace, index)`; the triple is hashed
//! with SHA-256 into a ChaCha20 key, and draws are read off the keystream at
//! an explicit counter. Any draw can therefore be reproduced in isolation,
//! which is what lets Monte Carlo loops run in parallel and still aggregate
//! deterministically.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Namespace for training samples.
pub const TRAIN: &str = "train";
/// Namespace for held-out test samples.
pub const TEST: &str = "test";

fn key(seed: u64, namespace: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((namespace.len() as u64).to_le_bytes());
    h.update(namespace.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// Derives a child seed from a parent seed, a label and integer coordinates.
pub fn derive_seed(seed: u64, label: &str, coords: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"derive");
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// One random stream; `counter` counts 64-bit words consumed so far.
#[derive(Debug, Clone)]
pub struct SeededStream {
    seed: u64,
    namespace: String,
    index: u64,
    rng: ChaCha20Rng,
}

impl PartialEq for SeededStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.namespace == other.namespace
            && self.index == other.index
            && self.counter() == other.counter()
    }
}

impl SeededStream {
    pub fn new(seed: u64, namespace: &str, index: u64) -> Self {
        Self {
            seed,
            namespace: namespace.to_owned(),
            index,
            rng: ChaCha20Rng::from_seed(key(seed, namespace, index)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn counter(&self) -> u64 {
        (self.rng.get_word_pos() / 2) as u64
    }

    /// Jumps to an absolute counter position.
    pub fn seek(&mut self, counter: u64) {
        self.rng.set_word_pos(counter as u128 * 2);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn standard_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`; returns `lo` when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, SamplingError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SamplingError::Domain(format!("invalid uniform range [{lo}, {hi})")));
        }
        let u = self.standard_uniform();
        if lo == hi {
            return Ok(lo);
        }
        let v = lo + (hi - lo) * u;
        // rounding can land exactly on hi
        Ok(if v < hi { v } else { hi.next_down_compat() })
    }

    /// Box–Muller normal draw; consumes two words.
    pub fn gaussian(&mut self, mu: f64, sigma: f64) -> Result<f64, SamplingError> {
        if !(sigma >= 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(SamplingError::Domain(format!("invalid gaussian sigma {sigma}")));
        }
        let u1 = 1.0 - self.standard_uniform();
        let u2 = self.standard_uniform();
        if sigma == 0.0 {
            return Ok(mu);
        }
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        Ok(mu + sigma * z)
    }

    /// Normal draw conditioned on `|value − mu| ≤ cut·sigma`, by rejection.
    ///
    /// `cut = ∞` gives a plain normal draw.
    pub fn truncated_gaussian(&mut self, mu: f64, sigma: f64, cut: f64) -> Result<f64, SamplingError> {
        if !(cut > 0.0) {
            return Err(SamplingError::Domain(format!("truncation must be positive, got {cut}")));
        }
        loop {
            let v = self.gaussian(mu, sigma)?;
            if (v - mu).abs() <= cut * sigma {
                return Ok(v);
            }
        }
    }
}

trait NextDown {
    fn next_down_compat(self) -> Self;
}

impl NextDown for f64 {
    fn next_down_compat(self) -> f64 {
        if self > 0.0 {
            f64::from_bits(self.to_bits() - 1)
        } else if self < 0.0 {
            f64::from_bits(self.to_bits() + 1)
        } else {
            -f64::from_bits(1)
        }
    }
}
