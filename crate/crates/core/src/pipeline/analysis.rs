use serde::{Deserialize, Serialize};

use super::{detector_for_counting, ProtocolConfig};
use crate::certification::{
    evaluate_budget, min_entropy_sdi, solve_cert_window, solve_nr_minus, BoundStatus, EntropyMode, IntWindow,
    NrSolution, PhotonBounds,
};
use crate::error::Result;
use crate::optics::{conversion_factor, mean_photons_per_window};
use crate::special::erfc_inv;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Completeness target used to place the certification window.
    pub eps_c: f64,
    pub eps_fail: f64,
    /// Share of `eps_fail` assigned to the photon lower bound; the rest bounds the noise.
    pub eps_minus_share: f64,
    /// Randomness-arm saturation bound; defaults to the summed saturation of PD-A and PD-B.
    pub n_r_plus: Option<u64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { eps_c: 1e-6, eps_fail: 1e-20, eps_minus_share: 0.5, n_r_plus: None }
    }
}

/// Photon-number bounds certified at one optical power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    pub power_w: f64,
    pub mean_photons: f64,
    pub mean_photons_r: f64,
    pub status: BoundStatus,
    pub cert_window: Option<IntWindow>,
    pub gamma_tilde_c: f64,
    pub n_c_minus: i64,
    pub n_c_plus: i64,
    pub n_r_minus: u64,
    pub n_r_plus: u64,
    pub eps_minus: f64,
    pub eps_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HminPoint {
    pub power_w: f64,
    pub r0: f64,
    pub kappa_per_sample: f64,
    pub status: BoundStatus,
    pub n_c_minus: i64,
    pub n_r_minus: u64,
    pub eps_plus: f64,
}

/// Certification window, noise bound and photon bounds at `power_w`.
pub fn bounds_at_power(cfg: &ProtocolConfig, power_w: f64, opts: &AnalysisOptions) -> Result<PowerBounds> {
    let n_bar = mean_photons_per_window(power_w, detector_for_counting(cfg));
    let r1 = cfg.bs_cert.r;
    let n_bar_c = r1 * n_bar;
    let n_bar_r = (1.0 - r1) * n_bar;
    let alpha_c = conversion_factor(&cfg.pd_cert);
    let sigma_g = cfg.pd_cert.sigma_gamma_v;
    let delta = cfg.adc.bin_width();
    let (rail_lo, rail_hi) = cfg.adc.bin_range();
    let n_r_plus = opts.n_r_plus.unwrap_or(cfg.pd_a.sat_photons + cfg.pd_b.sat_photons);
    let eps_gamma = (1.0 - opts.eps_minus_share) * opts.eps_fail;
    let eps_minus_target = opts.eps_minus_share * opts.eps_fail;
    let gamma_tilde = std::f64::consts::SQRT_2 * sigma_g * erfc_inv(eps_gamma);

    let mut out = PowerBounds {
        power_w,
        mean_photons: n_bar,
        mean_photons_r: n_bar_r,
        status: BoundStatus::Ok,
        cert_window: None,
        gamma_tilde_c: gamma_tilde,
        n_c_minus: 0,
        n_c_plus: 0,
        n_r_minus: 0,
        n_r_plus,
        eps_minus: 1.0,
        eps_plus: 1.0,
    };
    if n_bar_c > cfg.pd_cert.sat_photons as f64 || n_bar_r > n_r_plus as f64 {
        out.status = BoundStatus::Saturated;
        return Ok(out);
    }
    let mu = alpha_c * n_bar_c;
    let sigma = (sigma_g * sigma_g + alpha_c * alpha_c * n_bar_c).sqrt();
    let window = match solve_cert_window(opts.eps_c, mu, sigma, delta, IntWindow::new(rail_lo, rail_hi)) {
        Ok(w) => w,
        Err(_) => {
            out.status = if mu > 0.0 && mu + sigma >= cfg.adc.v_max { BoundStatus::Saturated } else { BoundStatus::BelowNoiseFloor };
            return Ok(out);
        }
    };
    out.cert_window = Some(window);
    let n_c_minus = ((delta * (window.lo as f64 - 0.5) - gamma_tilde) / alpha_c).floor();
    let n_c_plus = ((delta * (window.hi as f64 + 0.5) + gamma_tilde) / alpha_c).ceil();
    out.n_c_minus = n_c_minus as i64;
    out.n_c_plus = n_c_plus as i64;
    if n_c_minus < 1.0 {
        out.status = BoundStatus::BelowNoiseFloor;
        return Ok(out);
    }
    let n_c_minus = n_c_minus as u64;
    let n_r_minus = match solve_nr_minus(n_c_minus, r1, eps_minus_target)? {
        NrSolution::Finite(n) => n,
        NrSolution::Infeasible => {
            out.status = BoundStatus::BelowNoiseFloor;
            return Ok(out);
        }
        NrSolution::Unbounded => u64::MAX,
    };
    out.n_r_minus = n_r_minus;
    if n_r_minus > n_r_plus {
        out.status = BoundStatus::Saturated;
        return Ok(out);
    }
    let bounds = PhotonBounds::new(n_c_minus, n_c_plus as u64, n_r_minus, n_r_plus)?;
    let budget = evaluate_budget(bounds, r1, gamma_tilde, sigma_g, 1, opts.eps_c)?;
    out.eps_minus = budget.eps_minus;
    out.eps_plus = budget.eps_plus;
    out.status = budget.status;
    Ok(out)
}

/// Per-sample certified min-entropy over a grid of powers and splitter reflectivities.
pub fn analyze_hmin_surface(
    cfg: &ProtocolConfig,
    powers_w: &[f64],
    r0s: &[f64],
    opts: &AnalysisOptions,
) -> Result<Vec<HminPoint>> {
    let alpha_d = conversion_factor(&cfg.pd_a);
    let delta = cfg.adc.bin_width();
    let mut rows = Vec::with_capacity(powers_w.len() * r0s.len());
    for &p in powers_w {
        let b = bounds_at_power(cfg, p, opts)?;
        for &r0 in r0s {
            let kappa = if b.status == BoundStatus::Ok {
                let mode = if (b.n_r_minus as f64) > 1e5 && r0 * b.n_r_minus as f64 > 5.0 && (1.0 - r0) * b.n_r_minus as f64 > 5.0 {
                    EntropyMode::Gaussian
                } else {
                    EntropyMode::Exact
                };
                min_entropy_sdi(1, b.n_r_minus, r0, delta, alpha_d, mode)?.kappa
            } else {
                0.0
            };
            rows.push(HminPoint {
                power_w: p,
                r0,
                kappa_per_sample: kappa,
                status: b.status,
                n_c_minus: b.n_c_minus,
                n_r_minus: b.n_r_minus,
                eps_plus: b.eps_plus,
            });
        }
    }
    Ok(rows)
}
