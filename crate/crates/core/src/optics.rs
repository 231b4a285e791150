//! Classical sampling of the measurement chain: photon sources, beam
//! splitters, photodetectors and the ADC.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const PLANCK_J_S: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Means at or above this use a Gaussian approximation with continuity rounding.
pub const GAUSSIAN_THRESHOLD: f64 = 1e5;

/// Deterministic simulation stream. Not a source of cryptographic entropy.
pub type SimRng = ChaCha12Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    Fock { photons: u64 },
    Coherent { mean_photons: f64 },
    ThermalAse { mean_photons: f64, modes: f64, polarization: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub kind: SourceKind,
    /// Total relative intensity fluctuation `sqrt(Var n)/mean`, shot noise included.
    pub rin_f: f64,
}

impl SourceModel {
    pub fn fock(photons: u64) -> Self {
        Self { kind: SourceKind::Fock { photons }, rin_f: 0.0 }
    }

    pub fn coherent(mean_photons: f64) -> Self {
        Self { kind: SourceKind::Coherent { mean_photons }, rin_f: 0.0 }
    }

    pub fn thermal_ase(mean_photons: f64, modes: f64, polarization: u8) -> Self {
        Self { kind: SourceKind::ThermalAse { mean_photons, modes, polarization }, rin_f: 0.0 }
    }

    pub fn with_rin(mut self, rin_f: f64) -> Self {
        self.rin_f = rin_f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rin_f >= 0.0) {
            return Err(invalid("rin_f", "must be >= 0"));
        }
        match self.kind {
            SourceKind::Fock { .. } => Ok(()),
            SourceKind::Coherent { mean_photons } if !(mean_photons >= 0.0) => {
                Err(invalid("mean_photons", "must be >= 0"))
            }
            SourceKind::Coherent { .. } => Ok(()),
            SourceKind::ThermalAse { mean_photons, modes, polarization } => {
                if !(mean_photons >= 0.0) {
                    Err(invalid("mean_photons", "must be >= 0"))
                } else if !(modes >= 1.0) {
                    Err(invalid("modes", "must be >= 1"))
                } else if !(polarization == 1 || polarization == 2) {
                    Err(invalid("polarization", "must be 1 or 2"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            SourceKind::Fock { photons } => photons as f64,
            SourceKind::Coherent { mean_photons } => mean_photons,
            SourceKind::ThermalAse { mean_photons, .. } => mean_photons,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            SourceKind::Fock { .. } => 0.0,
            SourceKind::Coherent { mean_photons } => {
                mean_photons.max(self.rin_f * self.rin_f * mean_photons * mean_photons)
            }
            SourceKind::ThermalAse { mean_photons, modes, .. } => {
                mean_photons + mean_photons * mean_photons / modes
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitter {
    pub r: f64,
}

impl BeamSplitter {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(invalid("r", format!("reflectivity {r} outside [0, 1]")));
        }
        Ok(Self { r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub bandwidth_hz: f64,
    pub responsivity_a_per_w: f64,
    pub gain_ohm: f64,
    pub wavelength_m: f64,
    pub sigma_gamma_v: f64,
    pub sat_photons: u64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("responsivity_a_per_w", self.responsivity_a_per_w),
            ("gain_ohm", self.gain_ohm),
            ("wavelength_m", self.wavelength_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(invalid(name, "must be > 0"));
            }
        }
        if !(self.sigma_gamma_v >= 0.0) {
            return Err(invalid("sigma_gamma_v", "must be >= 0"));
        }
        if self.sat_photons == 0 {
            return Err(invalid("sat_photons", "must be > 0"));
        }
        Ok(())
    }

    /// Saturation count corresponding to an optical saturation power.
    pub fn with_saturation_power(mut self, power_w: f64) -> Self {
        self.sat_photons = mean_photons_per_window(power_w, &self).floor() as u64;
        self
    }

    pub fn alpha(&self) -> f64 {
        conversion_factor(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcModel {
    pub bits_b: u32,
    pub enob: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub sample_rate_hz: f64,
}

impl AdcModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > self.v_min) {
            return Err(invalid("v_max", "must exceed v_min"));
        }
        if !(self.enob > 0.0 && self.enob <= self.bits_b as f64) {
            return Err(invalid("enob", "must lie in (0, bits_b]"));
        }
        if self.bits_b == 0 || self.bits_b > 32 {
            return Err(invalid("bits_b", "must lie in [1, 32]"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(invalid("sample_rate_hz", "must be > 0"));
        }
        Ok(())
    }

    /// Effective bin width δV.
    pub fn bin_width(&self) -> f64 {
        (self.v_max - self.v_min) / self.enob.exp2()
    }

    /// Inclusive range of bin indices whose intervals touch `[v_min, v_max]`.
    pub fn bin_range(&self) -> (i64, i64) {
        let d = self.bin_width();
        ((self.v_min / d + 0.5).floor() as i64, (self.v_max / d - 0.5).ceil() as i64)
    }

    pub fn bin_center(&self, j: i64) -> f64 {
        j as f64 * self.bin_width()
    }

    /// Bin index as a two's-complement word of `bits_b` bits.
    pub fn to_word(&self, j: i64) -> u32 {
        let mask = if self.bits_b >= 32 { u32::MAX } else { (1u32 << self.bits_b) - 1 };
        (j as u32) & mask
    }
}

pub fn mean_photons_per_window(power_w: f64, detector: &DetectorModel) -> f64 {
    power_w * detector.wavelength_m / (PLANCK_J_S * SPEED_OF_LIGHT_M_S * detector.bandwidth_hz)
}

pub fn conversion_factor(detector: &DetectorModel) -> f64 {
    PLANCK_J_S * SPEED_OF_LIGHT_M_S * detector.bandwidth_hz * detector.responsivity_a_per_w
        * detector.gain_ohm
        / detector.wavelength_m
}

fn gaussian_count<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> u64 {
    let z: f64 = rng.sample(StandardNormal);
    (mean + var.sqrt() * z + 0.5).floor().max(0.0) as u64
}

fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        0
    } else if lambda < GAUSSIAN_THRESHOLD {
        Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
    } else {
        gaussian_count(lambda, lambda, rng)
    }
}

pub fn sample_source<R: Rng + ?Sized>(model: &SourceModel, rng: &mut R) -> u64 {
    match model.kind {
        SourceKind::Fock { photons } => photons,
        SourceKind::Coherent { mean_photons } => {
            let excess = model.rin_f * model.rin_f * mean_photons * mean_photons - mean_photons;
            if excess > 0.0 {
                if mean_photons >= GAUSSIAN_THRESHOLD {
                    return gaussian_count(mean_photons, model.variance(), rng);
                }
                let z: f64 = rng.sample(StandardNormal);
                poisson_count((mean_photons + excess.sqrt() * z).max(0.0), rng)
            } else {
                poisson_count(mean_photons, rng)
            }
        }
        SourceKind::ThermalAse { mean_photons, modes, .. } => {
            if mean_photons <= 0.0 {
                0
            } else if mean_photons < GAUSSIAN_THRESHOLD {
                let lambda = Gamma::new(modes, mean_photons / modes)
                    .expect("positive shape and scale")
                    .sample(rng);
                poisson_count(lambda, rng)
            } else {
                gaussian_count(mean_photons, model.variance(), rng)
            }
        }
    }
}

/// Splits `n` photons into (reflected, transmitted).
pub fn split<R: Rng + ?Sized>(n: u64, bs: &BeamSplitter, rng: &mut R) -> (u64, u64) {
    let r = bs.r;
    if n == 0 || r <= 0.0 {
        return (0, n);
    }
    if r >= 1.0 {
        return (n, 0);
    }
    let nf = n as f64;
    let refl = if nf * r.min(1.0 - r) < GAUSSIAN_THRESHOLD {
        Binomial::new(n, r).expect("valid binomial").sample(rng)
    } else {
        gaussian_count(nf * r, nf * r * (1.0 - r), rng).min(n)
    };
    (refl, n - refl)
}

/// Noiseless detector response, clipped at saturation.
pub fn detect_mean(n: u64, detector: &DetectorModel) -> f64 {
    conversion_factor(detector) * n.min(detector.sat_photons) as f64
}

pub fn detect<R: Rng + ?Sized>(n: u64, detector: &DetectorModel, rng: &mut R) -> f64 {
    let v = detect_mean(n, detector);
    if detector.sigma_gamma_v > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        v + detector.sigma_gamma_v * z
    } else {
        v
    }
}

pub fn quantize(v: f64, adc: &AdcModel) -> i64 {
    let (lo, hi) = adc.bin_range();
    let j = (v / adc.bin_width() + 0.5).floor();
    if j.is_nan() {
        return 0;
    }
    (j.max(lo as f64).min(hi as f64)) as i64
}
