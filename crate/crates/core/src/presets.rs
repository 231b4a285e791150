//! Parameters of the reference implementation: detectors, ADC, splitters
//! and the block geometry of its hashing run.

use crate::certification::{solve_cert_window, IntWindow, SecurityBudget};
use crate::error::Result;
use crate::extractor::{BitString, ExtractorConfig};
use crate::optics::{conversion_factor, mean_photons_per_window, AdcModel, BeamSplitter, DetectorModel, SourceModel};
use crate::pipeline::{random_seed_bits, Coupling, ProtocolConfig};

pub const WAVELENGTH_M: f64 = 1550e-9;
pub const R1: f64 = 0.109;
pub const R0: f64 = 0.513;
pub const R_EVE: f64 = 0.0105;

pub const KAPPA_PER_SAMPLE: f64 = 3.354;
pub const HASH_CYCLES: u64 = 2500;
pub const SAMPLES_PER_HASH: usize = 183;
pub const OUTPUT_BITS: usize = 512;
pub const EPS_FAIL: f64 = 5e-19;
pub const EPS_HASH: f64 = 2.33e-16;
pub const EPS_C: f64 = 0.008;
pub const HASH_RATE_HZ: f64 = 125e6;

/// Operating power at the source; keeps the certification voltage inside the ADC rails.
pub const RUN_POWER_W: f64 = 2.0e-3;

pub const CERT_NOISE_V: f64 = 1.0e-3;
pub const BALANCED_NOISE_V: f64 = 0.7e-3;

pub fn certification_pd() -> DetectorModel {
    DetectorModel {
        bandwidth_hz: 110e6,
        responsivity_a_per_w: 1.03,
        gain_ohm: 3.9e3,
        wavelength_m: WAVELENGTH_M,
        sigma_gamma_v: CERT_NOISE_V,
        sat_photons: 1,
    }
    .with_saturation_power(0.6e-3)
}

pub fn balanced_pd() -> DetectorModel {
    DetectorModel {
        bandwidth_hz: 100e6,
        responsivity_a_per_w: 0.9,
        gain_ohm: 39e3,
        wavelength_m: WAVELENGTH_M,
        sigma_gamma_v: BALANCED_NOISE_V,
        sat_photons: 1,
    }
    .with_saturation_power(1.5e-3)
}

pub fn adc() -> AdcModel {
    AdcModel { bits_b: 14, enob: 11.83, v_min: -1.0, v_max: 1.0, sample_rate_hz: 125e6 }
}

pub fn extractor(seed: BitString) -> ExtractorConfig {
    let b = adc().bits_b;
    ExtractorConfig {
        l: OUTPUT_BITS,
        h: SAMPLES_PER_HASH * b as usize,
        m: SAMPLES_PER_HASH,
        b,
        seed,
        eps_hash: EPS_HASH,
        t: HASH_CYCLES,
    }
}

/// Mean photons per acquisition window delivered by `power_w` at the source.
pub fn photons_at(power_w: f64) -> f64 {
    mean_photons_per_window(power_w, &balanced_pd())
}

/// Certification window reaching completeness `1 - eps_c` for a coherent
/// source of mean `mean_photons`.
pub fn cert_window_for(mean_photons: f64, eps_c: f64) -> Result<IntWindow> {
    let pd = certification_pd();
    let adc = adc();
    let alpha = conversion_factor(&pd);
    let n_c = R1 * mean_photons;
    let sigma = (pd.sigma_gamma_v.powi(2) + alpha * alpha * n_c).sqrt();
    let (lo, hi) = adc.bin_range();
    solve_cert_window(eps_c, alpha * n_c, sigma, adc.bin_width(), IntWindow::new(lo, hi))
}

/// Full run configuration with a coherent source at `power_w` and a Toeplitz
/// seed drawn from `seed`.
pub fn protocol(power_w: f64, seed: u64) -> Result<ProtocolConfig> {
    let n = photons_at(power_w);
    let ex = extractor(random_seed_bits(OUTPUT_BITS + SAMPLES_PER_HASH * 14 - 1, seed));
    Ok(ProtocolConfig {
        source: SourceModel::coherent(n),
        bs_cert: BeamSplitter::new(R1)?,
        bs_gen: BeamSplitter::new(R0)?,
        pd_cert: certification_pd(),
        pd_a: balanced_pd(),
        pd_b: balanced_pd(),
        adc: adc(),
        budget: SecurityBudget::from_eps_fail(EPS_FAIL, SAMPLES_PER_HASH as u32, EPS_C)?,
        extractor: ex,
        cert_window: cert_window_for(n, EPS_C)?,
        coupling: Coupling::Ac,
        kappa_per_sample: KAPPA_PER_SAMPLE,
        hash_rate_hz: HASH_RATE_HZ,
    })
}
