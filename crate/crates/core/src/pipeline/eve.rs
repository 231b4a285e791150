use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detector_for_counting, round_from_count, ProtocolConfig};
use crate::certification::completeness;
use crate::error::{invalid, Result};
use crate::optics::{
    conversion_factor, mean_photons_per_window, sample_source, split, stream_rng, BeamSplitter, SourceModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveScenario {
    pub honest: SourceModel,
    pub eve_power_w: Vec<f64>,
    pub bs_eve: BeamSplitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvePoint {
    pub eve_power_w: f64,
    pub pass_fraction: f64,
    pub std_error: f64,
    pub analytic: f64,
}

/// Pass probability of the certification test for a source with the given
/// photon-number mean and variance, in the Gaussian approximation.
pub fn analytic_pass_fraction(cfg: &ProtocolConfig, mean: f64, var: f64) -> f64 {
    let r1 = cfg.bs_cert.r;
    let alpha_c = conversion_factor(&cfg.pd_cert);
    let mean_c = r1 * mean;
    let var_c = r1 * r1 * var + r1 * (1.0 - r1) * mean;
    let sigma_g = cfg.pd_cert.sigma_gamma_v;
    let sigma = (sigma_g * sigma_g + alpha_c * alpha_c * var_c).sqrt();
    if !(sigma > 0.0) {
        let j = crate::optics::quantize(alpha_c * mean_c, &cfg.adc);
        return if cfg.cert_window.contains(j) { 1.0 } else { 0.0 };
    }
    completeness(cfg.cert_window, alpha_c * mean_c, sigma, cfg.adc.bin_width()).unwrap_or(0.0)
}

fn eve_photons(cfg: &ProtocolConfig, power_w: f64) -> f64 {
    mean_photons_per_window(power_w, detector_for_counting(cfg))
}

fn mixed_moments(scenario: &EveScenario, eve_mean: f64) -> (f64, f64) {
    let t_h = 1.0 - scenario.bs_eve.r;
    let t_e = scenario.bs_eve.r;
    let h_mean = scenario.honest.mean();
    let mean = t_h * h_mean + t_e * eve_mean;
    let var = t_h * t_h * scenario.honest.variance() + t_h * (1.0 - t_h) * h_mean + t_e * eve_mean;
    (mean, var)
}

/// Analytic pass probability with Eve injecting `eve_power_w` of coherent light.
pub fn eve_analytic_pass(scenario: &EveScenario, cfg: &ProtocolConfig, eve_power_w: f64) -> f64 {
    let (mean, var) = mixed_moments(scenario, eve_photons(cfg, eve_power_w));
    analytic_pass_fraction(cfg, mean, var)
}

/// Injected power that maximizes the analytic pass probability.
pub fn optimal_eve_power(scenario: &EveScenario, cfg: &ProtocolConfig) -> f64 {
    let alpha_c = conversion_factor(&cfg.pd_cert);
    let delta = cfg.adc.bin_width();
    let w = cfg.cert_window;
    let center_mean = delta * (w.lo + w.hi) as f64 / 2.0 / (alpha_c * cfg.bs_cert.r);
    let per_watt = eve_photons(cfg, 1.0);
    let honest = (1.0 - scenario.bs_eve.r) * scenario.honest.mean();
    let guess = ((center_mean - honest) / (scenario.bs_eve.r * per_watt)).max(0.0);
    let f = |p: f64| -eve_analytic_pass(scenario, cfg, p);
    golden_section(f, 0.0, 2.0 * guess.max(1e-12), 200)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-12 * b.abs().max(1e-300) {
            break;
        }
    }
    (a + b) / 2.0
}

/// Honest coherent mean (before the Eve splitter) giving `target_pass` with
/// no injected light, taken on the low-intensity side of the window.
pub fn solve_honest_mean(cfg: &ProtocolConfig, r_e: f64, target_pass: f64) -> Result<f64> {
    if !(target_pass > 0.0 && target_pass < 1.0) {
        return Err(invalid("target_pass", "must lie in (0, 1)"));
    }
    let alpha_c = conversion_factor(&cfg.pd_cert);
    let delta = cfg.adc.bin_width();
    let w = cfg.cert_window;
    let t = 1.0 - r_e;
    let pass = |n_h: f64| analytic_pass_fraction(cfg, t * n_h, t * n_h);
    let mut hi = delta * (w.lo + w.hi) as f64 / 2.0 / (alpha_c * cfg.bs_cert.r) / t;
    let mut lo = 0.0;
    if pass(lo) > target_pass || pass(hi) < target_pass {
        return Err(crate::error::Error::NoSolution(format!(
            "pass fraction {target_pass} not bracketed below the window center"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pass(mid) < target_pass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn sample_mixed<R: Rng + ?Sized>(scenario: &EveScenario, eve: &SourceModel, rng: &mut R) -> u64 {
    let (_, honest) = split(sample_source(&scenario.honest, rng), &scenario.bs_eve, rng);
    let (injected, _) = split(sample_source(eve, rng), &scenario.bs_eve, rng);
    honest + injected
}

/// Empirical pass fraction at each injected power; point `k` uses stream `k`.
pub fn eve_sweep(scenario: &EveScenario, cfg: &ProtocolConfig, rounds_per_point: u64, seed: u64) -> Result<Vec<EvePoint>> {
    if scenario.eve_power_w.is_empty() {
        return Err(invalid("eve_power_w", "sweep must not be empty"));
    }
    cfg.validate()?;
    scenario.honest.validate()?;
    Ok(scenario
        .eve_power_w
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let eve = SourceModel::coherent(eve_photons(cfg, p));
            let (mean, _) = mixed_moments(scenario, eve.mean());
            let offset = cfg.difference_offset(mean);
            let mut rng = stream_rng(seed, k as u64);
            let mut passed = 0u64;
            for _ in 0..rounds_per_point {
                let n = sample_mixed(scenario, &eve, &mut rng);
                if round_from_count(cfg, offset, n, &mut rng).passed {
                    passed += 1;
                }
            }
            let frac = if rounds_per_point == 0 { 0.0 } else { passed as f64 / rounds_per_point as f64 };
            EvePoint {
                eve_power_w: p,
                pass_fraction: frac,
                std_error: (frac * (1.0 - frac) / rounds_per_point.max(1) as f64).sqrt(),
                analytic: eve_analytic_pass(scenario, cfg, p),
            }
        })
        .collect())
}
