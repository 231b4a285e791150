use serde::{Deserialize, Serialize};

use super::{BoundStatus, IntWindow, SecurityBudget};
use crate::error::{invalid, Error, Result};
use crate::special::{ln_binom_pmf, log_add_exp, normal_interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    Exact,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub p_guess: f64,
    /// Certified min-entropy of an m-round block, in bits.
    pub kappa: f64,
    pub h_min_per_sample: f64,
    pub mu_x: i64,
    pub window: IntWindow,
    pub sigma_a_sq: f64,
}

/// Most likely value of `n_A - n_B` when `n` photons meet a splitter of
/// reflectivity `r0`: twice the binomial mode minus `n`.
pub fn peak_diff_outcome(n: u64, r0: f64) -> i64 {
    let mode = ((n as f64 + 1.0) * r0 - 1.0).ceil().clamp(0.0, n as f64) as i64;
    2 * mode - n as i64
}

/// Outcomes of the difference measurement that fall in the ADC bin around `mu_x`.
pub fn sdi_window(mu_x: i64, delta_v: f64, alpha_d: f64) -> IntWindow {
    let half = delta_v / (2.0 * alpha_d);
    IntWindow::new(mu_x - half.ceil() as i64, mu_x + half.floor() as i64)
}

fn ln_guessing_prob_exact(n: u64, r0: f64, window: IntWindow) -> f64 {
    let n_i = n as i64;
    let mut lo = window.lo.max(-n_i);
    let hi = window.hi.min(n_i);
    if (lo - n_i).rem_euclid(2) != 0 {
        lo += 1;
    }
    let mut acc = f64::NEG_INFINITY;
    let mut x = lo;
    while x <= hi {
        let k = ((n_i + x) / 2) as u64;
        acc = log_add_exp(acc, ln_binom_pmf(k, n, r0));
        x += 2;
    }
    acc
}

/// Probability that the difference outcome lands in `window`; outcomes of the
/// wrong parity have zero probability.
pub fn guessing_prob_exact(n_r_minus: u64, r0: f64, window: IntWindow) -> Result<f64> {
    check_r0(r0)?;
    Ok(ln_guessing_prob_exact(n_r_minus, r0, window).exp().min(1.0))
}

/// Gaussian closed form of the guessing probability, valid for large photon numbers.
pub fn guessing_prob_gaussian(n_r_minus: u64, r0: f64, delta_v: f64, alpha_d: f64) -> Result<f64> {
    check_r0(r0)?;
    check_bin(delta_v, alpha_d)?;
    let n = n_r_minus as f64;
    if !(n > 1e5 && r0 * n > 5.0 && (1.0 - r0) * n > 5.0) {
        return Err(Error::GaussianInvalid(format!(
            "need n > 1e5, r0 n > 5, (1 - r0) n > 5; got n = {n_r_minus}, r0 = {r0}"
        )));
    }
    let sigma = (r0 * (1.0 - r0) * n).sqrt();
    let w = delta_v / (2.0 * alpha_d);
    Ok(normal_interval((-w - 1.0) / sigma, w / sigma))
}

pub fn min_entropy_sdi(
    m: u32,
    n_r_minus: u64,
    r0: f64,
    delta_v: f64,
    alpha_d: f64,
    mode: EntropyMode,
) -> Result<EntropyReport> {
    if m == 0 {
        return Err(invalid("m", "must be >= 1"));
    }
    check_r0(r0)?;
    check_bin(delta_v, alpha_d)?;
    let mu_x = peak_diff_outcome(n_r_minus, r0);
    let window = sdi_window(mu_x, delta_v, alpha_d);
    let ln_p = match mode {
        EntropyMode::Exact => ln_guessing_prob_exact(n_r_minus, r0, window),
        EntropyMode::Gaussian => guessing_prob_gaussian(n_r_minus, r0, delta_v, alpha_d)?.ln(),
    };
    let h = (-ln_p / std::f64::consts::LN_2).max(0.0);
    Ok(EntropyReport {
        p_guess: ln_p.exp().min(1.0),
        kappa: m as f64 * h,
        h_min_per_sample: h,
        mu_x,
        window,
        sigma_a_sq: r0 * (1.0 - r0) * n_r_minus as f64,
    })
}

/// Min-entropy with the budget's block size, forced to zero when the budget
/// is in the regime where the photon-number bounds no longer hold.
pub fn certified_min_entropy(
    budget: &SecurityBudget,
    n_r_minus: u64,
    r0: f64,
    delta_v: f64,
    alpha_d: f64,
    mode: EntropyMode,
) -> Result<EntropyReport> {
    let mut report = min_entropy_sdi(budget.m, n_r_minus, r0, delta_v, alpha_d, mode)?;
    if budget.status == BoundStatus::EpsOrderViolated {
        report.p_guess = 1.0;
        report.kappa = 0.0;
        report.h_min_per_sample = 0.0;
    }
    Ok(report)
}

fn check_r0(r0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r0) {
        return Err(invalid("r0", format!("{r0} outside [0, 1]")));
    }
    Ok(())
}

fn check_bin(delta_v: f64, alpha_d: f64) -> Result<()> {
    if !(delta_v > 0.0) {
        return Err(invalid("delta_v", "must be > 0"));
    }
    if !(alpha_d > 0.0) {
        return Err(invalid("alpha_d", "must be > 0"));
    }
    Ok(())
}
