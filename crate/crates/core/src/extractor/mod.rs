//! Toeplitz randomness extraction and the composable-security arithmetic
//! around it.

mod bits;
mod toeplitz;

pub use bits::BitString;
pub use toeplitz::{toeplitz_hash_naive, Accumulator, ToeplitzHasher};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub l: usize,
    pub h: usize,
    pub m: usize,
    pub b: u32,
    pub seed: BitString,
    pub eps_hash: f64,
    pub t: u64,
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.l > self.h {
            return Err(invalid("l", format!("need 0 < l <= h, got l = {}, h = {}", self.l, self.h)));
        }
        if self.b == 0 || self.b > 32 {
            return Err(invalid("b", "must lie in [1, 32]"));
        }
        if self.h != self.m * self.b as usize {
            return Err(invalid("h", format!("h = {} but m * b = {}", self.h, self.m * self.b as usize)));
        }
        if self.seed.len() != self.l + self.h - 1 {
            return Err(Error::LengthMismatch { expected: self.l + self.h - 1, got: self.seed.len() });
        }
        if !(self.eps_hash > 0.0 && self.eps_hash <= 1.0) {
            return Err(invalid("eps_hash", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn compression_ratio(&self) -> f64 {
        self.l as f64 / self.h as f64
    }
}

/// Block-matrix product of the configured seed with `input`.
pub fn toeplitz_hash(cfg: &ExtractorConfig, input: &BitString) -> Result<BitString> {
    ToeplitzHasher::new(cfg)?.hash(input)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLength {
    pub l: u64,
    /// Set when the length formula was non-positive and the result clamped to 0.
    pub nonpositive: bool,
}

/// Leftover-hash output length `floor(kappa + 2 + 2 log2 eps_hash)`.
pub fn derive_output_length(kappa: f64, eps_hash: f64) -> Result<OutputLength> {
    if !(eps_hash > 0.0 && eps_hash <= 1.0) {
        return Err(invalid("eps_hash", "must lie in (0, 1]"));
    }
    if !(kappa > 0.0) {
        return Err(invalid("kappa", "must be > 0"));
    }
    let raw = (kappa + 2.0 + 2.0 * eps_hash.log2()).floor();
    if raw <= 0.0 {
        Ok(OutputLength { l: 0, nonpositive: true })
    } else {
        Ok(OutputLength { l: raw as u64, nonpositive: false })
    }
}

/// Hashing parameter implied by an externally chosen output length.
pub fn implied_eps_hash(l: u64, kappa: f64) -> f64 {
    ((l as f64 - 2.0 - kappa) / 2.0).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecuritySummary {
    pub eps_l: f64,
    pub eps_total: f64,
    pub compression_r: f64,
    pub big_l: u64,
}

pub fn composable_epsilon(t: u64, eps_hash: f64, m: u32, eps_fail: f64, l: usize, h: usize) -> SecuritySummary {
    let eps_l = eps_hash + m as f64 * eps_fail;
    SecuritySummary {
        eps_l,
        eps_total: t as f64 * eps_l,
        compression_r: l as f64 / h as f64,
        big_l: t * l as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Certified generation rate, bits/s.
    pub r_g: f64,
    /// Secure output rate after hashing, bits/s.
    pub r_s: f64,
    /// Expected output rate including aborted rounds, bits/s.
    pub r_avg: f64,
}

/// Rate accounting. Sample and hash rates are in words per second; every
/// hash clock consumes one `b`-bit word.
pub fn rates(r_sample_hz: f64, r_hash_hz: f64, kappa_per_sample: f64, b: u32, compression_r: f64, eps_c: f64) -> Rates {
    let raw_bit_rate = r_sample_hz * b as f64;
    let r_g = raw_bit_rate * kappa_per_sample / b as f64;
    let r_s = r_sample_hz.min(r_hash_hz) * b as f64 * compression_r;
    Rates { r_g, r_s, r_avg: (1.0 - eps_c) * r_s }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_length_examples() {
        assert_eq!(derive_output_length(102.0, 2f64.powi(-50)).unwrap().l, 4);
        assert_eq!(derive_output_length(13.7, 1.0).unwrap().l, 15);
        assert_eq!(derive_output_length(183.0 * 3.354, 2.33e-16).unwrap().l, 511);
        let o = derive_output_length(10.0, 1e-10).unwrap();
        assert!(o.nonpositive && o.l == 0);
    }

    #[test]
    fn epsilon_examples() {
        let s = composable_epsilon(2500, 2.33e-16, 183, 5e-19, 512, 2562);
        assert_eq!(s.big_l, 1_280_000);
        let z = composable_epsilon(0, 2.33e-16, 183, 5e-19, 512, 2562);
        assert_eq!((z.eps_total, z.big_l), (0.0, 0));
        let d = composable_epsilon(5000, 2.33e-16, 183, 5e-19, 512, 2562);
        assert_eq!(d.eps_total, 2.0 * s.eps_total);
        assert_eq!(d.big_l, 2 * s.big_l);
    }

    #[test]
    fn rate_examples() {
        let r = rates(125e6, 125e6, 3.354, 14, 512.0 / 2562.0, 1.0);
        assert_eq!(r.r_avg, 0.0);
        let slow = rates(125e6, 50e6, 3.354, 14, 0.5, 0.0);
        assert!((slow.r_s - 50e6 * 14.0 * 0.5).abs() < 1e-6);
    }

    #[test]
    fn tiny_hash_example() {
        let seed = BitString::from_bits(&[true, false]);
        let cfg = ExtractorConfig { l: 1, h: 2, m: 2, b: 1, seed, eps_hash: 1.0, t: 1 };
        let out = toeplitz_hash(&cfg, &BitString::from_bits(&[true, true])).unwrap();
        assert!(out.get(0));
        let zero = ExtractorConfig { seed: BitString::zeros(2), ..cfg };
        assert!(!toeplitz_hash(&zero, &BitString::from_bits(&[true, true])).unwrap().get(0));
    }
}
