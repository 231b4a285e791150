//! Comparison models: device-dependent unbalanced homodyne entropy, the
//! DD-to-SDI randomness gap, and ASE photon statistics.

use serde::{Deserialize, Serialize};

use crate::certification::{min_entropy_sdi, EntropyMode};
use crate::error::{invalid, Result};
use crate::special::{erf, normal_interval};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhdParams {
    pub n_bar_r: f64,
    pub r0: f64,
    pub f: f64,
    /// Electronic noise variance expressed in photons squared.
    pub sigma_nd_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhdVariance {
    pub lo_term: f64,
    pub vacuum_term: f64,
    pub electronic_term: f64,
    pub total: f64,
}

pub fn uhd_variance(p: &UhdParams) -> UhdVariance {
    let lo_term = ((2.0 * p.r0 - 1.0) * p.n_bar_r * p.f).powi(2);
    let vacuum_term = 4.0 * p.r0 * (1.0 - p.r0) * p.n_bar_r;
    let electronic_term = p.sigma_nd_sq;
    UhdVariance { lo_term, vacuum_term, electronic_term, total: lo_term + vacuum_term + electronic_term }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdEntropy {
    pub bits: f64,
    pub capped: bool,
    pub sigma_q_sq: f64,
}

/// Device-dependent min-entropy per sample, capped at `cap_bits`.
pub fn min_entropy_dd(n_bar_r: f64, r0: f64, delta_v: f64, alpha_d: f64, cap_bits: f64) -> Result<DdEntropy> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(invalid("r0", "must lie strictly inside (0, 1)"));
    }
    if !(n_bar_r > 0.0) {
        return Err(invalid("n_bar_r", "must be > 0"));
    }
    if !(delta_v > 0.0 && alpha_d > 0.0) {
        return Err(invalid("delta_v", "bin width and conversion factor must be > 0"));
    }
    let sigma_q_sq = 4.0 * r0 * (1.0 - r0) * n_bar_r;
    let sigma = sigma_q_sq.sqrt();
    let w = delta_v / (2.0 * alpha_d);
    let p = normal_interval((-w - 1.0) / sigma, w / sigma);
    let bits = -p.log2();
    if bits > cap_bits || !bits.is_finite() {
        Ok(DdEntropy { bits: cap_bits, capped: true, sigma_q_sq })
    } else {
        Ok(DdEntropy { bits: bits.max(0.0), capped: false, sigma_q_sq })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RailDiagnostic {
    pub c1: f64,
    pub c2: f64,
    pub rail_dominates: bool,
}

/// Compares the probability of the rail bin (`c1`) with the central bin (`c2`).
pub fn dd_rail_diagnostic(
    n_bar_r: f64,
    r0: f64,
    delta_v: f64,
    alpha_d: f64,
    gamma_d_max: f64,
    v_max: f64,
) -> RailDiagnostic {
    let s = (2.0 * alpha_d * alpha_d * 4.0 * r0 * (1.0 - r0) * n_bar_r).sqrt();
    let c1 = 0.5 * (erf((gamma_d_max - v_max + 1.5 * delta_v) / s) + 1.0);
    let c2 = erf(0.5 * delta_v / s);
    RailDiagnostic { c1, c2, rail_dominates: c1 > c2 }
}

pub fn lambda_ideal(n_bar_r: f64, n_r_minus: f64) -> Result<f64> {
    if !(n_r_minus > 0.0) {
        return Err(invalid("n_r_minus", "must be > 0"));
    }
    if !(n_bar_r >= n_r_minus) {
        return Err(invalid("n_bar_r", "must be >= n_r_minus"));
    }
    Ok(1.0 + 0.5 * (n_bar_r / n_r_minus).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEnob {
    pub total: f64,
    pub ideal: f64,
    pub enob_term: f64,
    pub h_dd: f64,
    pub h_sdi: f64,
}

/// Gap between device-dependent and SDI min-entropy per sample.
pub fn lambda_enob(n_bar_r: f64, n_r_minus: u64, r0: f64, delta_v: f64, alpha_d: f64) -> Result<LambdaEnob> {
    let ideal = lambda_ideal(n_bar_r, n_r_minus as f64)?;
    let h_dd = min_entropy_dd(n_bar_r, r0, delta_v, alpha_d, f64::INFINITY)?.bits;
    let h_sdi = min_entropy_sdi(1, n_r_minus, r0, delta_v, alpha_d, EntropyMode::Gaussian)?.h_min_per_sample;
    let total = h_dd - h_sdi;
    Ok(LambdaEnob { total, ideal, enob_term: total - ideal, h_dd, h_sdi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AseParams {
    pub b_opt_hz: f64,
    pub b_pd_hz: f64,
    pub s: u8,
    pub n_bar_total: f64,
}

const ASE_SERIES_MAX: f64 = 1e-3;

/// Number of independent modes seen by the detector.
pub fn ase_modes(p: &AseParams) -> f64 {
    let s = p.s as f64;
    let bt = p.b_opt_hz / p.b_pd_hz;
    let u = std::f64::consts::PI * bt * bt;
    if bt < ASE_SERIES_MAX {
        s / (1.0 - u / 6.0 + u * u / 30.0)
    } else {
        let pi = std::f64::consts::PI;
        let denom = pi * bt * erf(pi.sqrt() * bt) + (-u).exp_m1();
        s * u / denom
    }
}

pub fn ase_variance(n_bar_total: f64, m_modes: f64) -> f64 {
    n_bar_total + n_bar_total * n_bar_total / m_modes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uhd_examples() {
        let v = uhd_variance(&UhdParams { n_bar_r: 1e6, r0: 0.5, f: 0.3, sigma_nd_sq: 7.0 });
        assert_eq!(v.lo_term, 0.0);
        assert_eq!(v.total, 1e6 + 7.0);
        let v = uhd_variance(&UhdParams { n_bar_r: 1e6, r0: 0.7, f: 0.0, sigma_nd_sq: 0.0 });
        assert!((v.total - 0.84e6).abs() < 1e-6);
        let v = uhd_variance(&UhdParams { n_bar_r: 1e6, r0: 0.6, f: 1e-3, sigma_nd_sq: 0.0 });
        assert!((v.lo_term - 4e4).abs() < 1e-6);
        assert!((v.vacuum_term - 9.6e5).abs() < 1e-6);
    }

    #[test]
    fn dd_limits() {
        let d = min_entropy_dd(1e300, 0.5, 1.0, 1.0, 14.0).unwrap();
        assert!(d.capped);
        assert_eq!(d.bits, 14.0);
        let d = min_entropy_dd(1e6, 0.5, 1e12, 1.0, 14.0).unwrap();
        assert!(d.bits.abs() < 1e-12);
        assert!(min_entropy_dd(1e6, 1.0, 1.0, 1.0, 14.0).is_err());
    }

    #[test]
    fn lambda_ideal_examples() {
        assert_eq!(lambda_ideal(5.0, 5.0).unwrap(), 1.0);
        assert!((lambda_ideal(4e6, 1e6).unwrap() - 2.0).abs() < 1e-15);
        assert!((lambda_ideal(1.0154, 1.0).unwrap() - 1.011).abs() < 1e-3);
        assert!(lambda_ideal(1.0, 2.0).is_err());
    }

    #[test]
    fn ase_examples() {
        let p = |b: f64, s: u8| AseParams { b_opt_hz: b, b_pd_hz: 1.0, s, n_bar_total: 1.0 };
        assert!((ase_modes(&p(1e-6, 1)) - 1.0).abs() < 1e-9);
        assert!((ase_modes(&p(1000.0, 1)) - 1000.318).abs() < 1e-3);
        assert!((ase_modes(&p(3.7, 2)) - 2.0 * ase_modes(&p(3.7, 1))).abs() < 1e-12);
        let below = ase_modes(&p(ASE_SERIES_MAX * (1.0 - 1e-12), 1));
        let above = ase_modes(&p(ASE_SERIES_MAX, 1));
        assert!(((below - above) / above).abs() < 1e-9);
        assert_eq!(ase_variance(1e6, 100.0), 1e6 + 1e10);
        assert_eq!(ase_variance(3.0, 1.0), 12.0);
    }
}
