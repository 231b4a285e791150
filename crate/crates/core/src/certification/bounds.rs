use serde::{Deserialize, Serialize};

use super::BoundStatus;
use crate::error::{invalid, Error, Result};
use crate::special::{binom_upper_tail, erfc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonBounds {
    pub n_c_minus: u64,
    pub n_c_plus: u64,
    pub n_r_minus: u64,
    pub n_r_plus: u64,
    pub n_e_minus: u64,
    pub n_e_plus: u64,
}

impl PhotonBounds {
    pub fn new(n_c_minus: u64, n_c_plus: u64, n_r_minus: u64, n_r_plus: u64) -> Result<Self> {
        if n_c_minus > n_c_plus {
            return Err(Error::InvertedRange { lower: n_c_minus as i128, upper: n_c_plus as i128 });
        }
        if n_r_minus > n_r_plus {
            return Err(Error::InvertedRange { lower: n_r_minus as i128, upper: n_r_plus as i128 });
        }
        let n_e_minus = (n_c_minus + n_r_minus)
            .checked_sub(1)
            .ok_or_else(|| invalid("n_c_minus", "n_c_minus + n_r_minus must be >= 1"))?;
        Ok(Self {
            n_c_minus,
            n_c_plus,
            n_r_minus,
            n_r_plus,
            n_e_minus,
            n_e_plus: n_c_plus + n_r_plus + 1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub eps_gamma_c: f64,
    pub eps_fail: f64,
    pub eps_fail_m: f64,
    pub eps_c: f64,
    pub m: u32,
    pub gamma_tilde_c: f64,
    pub sigma_gamma_c: f64,
    pub bounds: Option<PhotonBounds>,
    pub status: BoundStatus,
}

impl SecurityBudget {
    /// Budget with a prescribed per-round failure probability, split evenly
    /// between the photon-bound term and the noise term.
    pub fn from_eps_fail(eps_fail: f64, m: u32, eps_c: f64) -> Result<Self> {
        epsilon_fail(&BudgetInputs {
            eps_minus: eps_fail / 2.0,
            eps_plus: 0.0,
            eps_gamma_c: eps_fail / 2.0,
            m,
            eps_c,
            gamma_tilde_c: 0.0,
            sigma_gamma_c: 0.0,
            bounds: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetInputs {
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub eps_gamma_c: f64,
    pub m: u32,
    pub eps_c: f64,
    pub gamma_tilde_c: f64,
    pub sigma_gamma_c: f64,
    pub bounds: Option<PhotonBounds>,
}

/// P(more than `n_c_minus - 1` of `n_e_minus` photons reach the certification arm).
pub fn epsilon_minus(n_c_minus: u64, n_e_minus: u64, r1: f64) -> Result<f64> {
    check_prob("r1", r1)?;
    if n_c_minus > n_e_minus {
        return Err(Error::InvertedRange { lower: n_c_minus as i128, upper: n_e_minus as i128 });
    }
    Ok(binom_upper_tail(n_c_minus, n_e_minus, r1))
}

/// P(at least `n_r_plus` of `n_e_plus` photons reach the randomness arm).
pub fn epsilon_plus(n_r_plus: u64, n_e_plus: u64, r1: f64) -> Result<f64> {
    check_prob("r1", r1)?;
    if n_r_plus > n_e_plus {
        return Err(Error::InvertedRange { lower: n_r_plus as i128, upper: n_e_plus as i128 });
    }
    Ok(binom_upper_tail(n_r_plus, n_e_plus, 1.0 - r1))
}

/// Probability that certification electronic noise exceeds `gamma_tilde` in magnitude.
pub fn epsilon_gamma(gamma_tilde: f64, sigma_gamma_c: f64) -> f64 {
    erfc(gamma_tilde / (std::f64::consts::SQRT_2 * sigma_gamma_c))
}

pub fn epsilon_fail(inputs: &BudgetInputs) -> Result<SecurityBudget> {
    check_prob("eps_minus", inputs.eps_minus)?;
    check_prob("eps_plus", inputs.eps_plus)?;
    check_prob("eps_gamma_c", inputs.eps_gamma_c)?;
    check_prob("eps_c", inputs.eps_c)?;
    let eps_fail = (inputs.eps_minus.max(inputs.eps_plus) + inputs.eps_gamma_c).min(1.0);
    let status = if inputs.eps_plus > inputs.eps_minus {
        BoundStatus::EpsOrderViolated
    } else {
        BoundStatus::Ok
    };
    Ok(SecurityBudget {
        eps_minus: inputs.eps_minus,
        eps_plus: inputs.eps_plus,
        eps_gamma_c: inputs.eps_gamma_c,
        eps_fail,
        eps_fail_m: (inputs.m as f64 * eps_fail).min(1.0),
        eps_c: inputs.eps_c,
        m: inputs.m,
        gamma_tilde_c: inputs.gamma_tilde_c,
        sigma_gamma_c: inputs.sigma_gamma_c,
        bounds: inputs.bounds,
        status,
    })
}

/// Evaluates every failure term implied by a set of photon bounds.
pub fn evaluate_budget(
    bounds: PhotonBounds,
    r1: f64,
    gamma_tilde_c: f64,
    sigma_gamma_c: f64,
    m: u32,
    eps_c: f64,
) -> Result<SecurityBudget> {
    epsilon_fail(&BudgetInputs {
        eps_minus: epsilon_minus(bounds.n_c_minus, bounds.n_e_minus, r1)?,
        eps_plus: epsilon_plus(bounds.n_r_plus, bounds.n_e_plus, r1)?,
        eps_gamma_c: epsilon_gamma(gamma_tilde_c, sigma_gamma_c),
        m,
        eps_c,
        gamma_tilde_c,
        sigma_gamma_c,
        bounds: Some(bounds),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrSolution {
    Finite(u64),
    /// Every photon number satisfies the target.
    Unbounded,
    /// Not even a single photon in the randomness arm can be certified.
    Infeasible,
}

/// Largest `n_R^-` whose lower-bound failure probability stays within `target`.
pub fn solve_nr_minus(n_c_minus: u64, r1: f64, target: f64) -> Result<NrSolution> {
    check_prob("r1", r1)?;
    if n_c_minus == 0 {
        return Err(invalid("n_c_minus", "must be >= 1"));
    }
    if !(target > 0.0) {
        return Err(invalid("target", "must be > 0"));
    }
    if target >= 1.0 {
        return Ok(NrSolution::Unbounded);
    }
    let fails = |n_r: u64| binom_upper_tail(n_c_minus, n_c_minus + n_r - 1, r1) > target;
    if fails(1) {
        return Ok(NrSolution::Infeasible);
    }
    let mut good = 1u64;
    let mut bad = 2u64;
    while !fails(bad) {
        good = bad;
        if bad > u64::MAX / 4 - n_c_minus {
            return Ok(NrSolution::Unbounded);
        }
        bad *= 2;
    }
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if fails(mid) {
            bad = mid;
        } else {
            good = mid;
        }
    }
    Ok(NrSolution::Finite(good))
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(name, format!("{p} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_minus_examples() {
        assert_eq!(epsilon_minus(0, 17, 0.3).unwrap(), 1.0);
        let top = epsilon_minus(9, 9, 0.3).unwrap();
        assert!(((top - 0.3f64.powi(9)) / top).abs() < 1e-13);
        assert!((epsilon_minus(3, 4, 0.5).unwrap() - 0.3125).abs() < 1e-15);
        assert!(epsilon_minus(5, 4, 0.5).is_err());
    }

    #[test]
    fn epsilon_gamma_examples() {
        assert_eq!(epsilon_gamma(0.0, 1e-3), 1.0);
        assert!(epsilon_gamma(1.0, 1e-3) < 1e-300);
        assert!((epsilon_gamma(1e-3, 1e-3) - 0.317_310_507_862_914_1).abs() < 1e-14);
    }

    #[test]
    fn eps_fail_arithmetic() {
        let mk = |a, b, c| BudgetInputs {
            eps_minus: a,
            eps_plus: b,
            eps_gamma_c: c,
            m: 183,
            eps_c: 0.0,
            gamma_tilde_c: 0.0,
            sigma_gamma_c: 0.0,
            bounds: None,
        };
        assert_eq!(epsilon_fail(&mk(0.0, 0.0, 0.0)).unwrap().eps_fail, 0.0);
        let b = epsilon_fail(&mk(1e-20, 1e-25, 2.5e-19)).unwrap();
        assert!((b.eps_fail - 2.6e-19).abs() < 1e-33);
        assert_eq!(b.status, BoundStatus::Ok);
        let b = epsilon_fail(&mk(2.5e-19, 0.0, 2.5e-19)).unwrap();
        assert!((b.eps_fail_m - 9.15e-17).abs() < 1e-30);
        let b = epsilon_fail(&mk(1e-20, 1e-10, 0.0)).unwrap();
        assert_eq!(b.status, BoundStatus::EpsOrderViolated);
    }

    #[test]
    fn bounds_derive_totals() {
        let b = PhotonBounds::new(10, 20, 100, 300).unwrap();
        assert_eq!(b.n_e_minus, 109);
        assert_eq!(b.n_e_plus, 321);
        assert!(PhotonBounds::new(21, 20, 100, 300).is_err());
    }

    #[test]
    fn solve_small_case_and_sentinels() {
        assert_eq!(solve_nr_minus(3, 0.5, 0.4).unwrap(), NrSolution::Finite(2));
        assert_eq!(solve_nr_minus(3, 0.5, 1.0).unwrap(), NrSolution::Unbounded);
        assert_eq!(solve_nr_minus(3, 0.5, 0.1).unwrap(), NrSolution::Infeasible);
    }
}
