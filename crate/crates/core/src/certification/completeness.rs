use super::IntWindow;
use crate::error::{invalid, Error, Result};
use crate::special::{erfc_inv, normal_cdf, normal_interval};

/// Probability that a Gaussian certification voltage is quantized into
/// `window`, for bins of width `delta_vc` centered on multiples of it.
pub fn completeness(window: IntWindow, mu_vc: f64, sigma_vc: f64, delta_vc: f64) -> Result<f64> {
    if window.lo > window.hi {
        return Err(Error::InvertedRange { lower: window.lo as i128, upper: window.hi as i128 });
    }
    if !(sigma_vc > 0.0) {
        return Err(invalid("sigma_vc", "must be > 0"));
    }
    let (a, b) = edges(window, mu_vc, sigma_vc, delta_vc);
    Ok(normal_interval(a, b))
}

fn edges(w: IntWindow, mu: f64, sigma: f64, delta: f64) -> (f64, f64) {
    ((delta * (w.lo as f64 - 0.5) - mu) / sigma, (delta * (w.hi as f64 + 0.5) - mu) / sigma)
}

fn outside_mass(w: IntWindow, mu: f64, sigma: f64, delta: f64) -> f64 {
    let (a, b) = edges(w, mu, sigma, delta);
    normal_cdf(a) + normal_cdf(-b)
}

fn bin_mass(j: i64, mu: f64, sigma: f64, delta: f64) -> f64 {
    let (a, b) = edges(IntWindow::new(j, j), mu, sigma, delta);
    normal_interval(a, b)
}

/// Narrowest window, grown greedily toward the heavier side, whose
/// completeness reaches `1 - target_eps_c` without leaving `rails`.
pub fn solve_cert_window(
    target_eps_c: f64,
    mu_vc: f64,
    sigma_vc: f64,
    delta_vc: f64,
    rails: IntWindow,
) -> Result<IntWindow> {
    if !(target_eps_c > 0.0 && target_eps_c < 1.0) {
        return Err(invalid("target_eps_c", "must lie in (0, 1)"));
    }
    if !(sigma_vc > 0.0) {
        return Err(invalid("sigma_vc", "must be > 0"));
    }
    if !(delta_vc > 0.0) {
        return Err(invalid("delta_vc", "must be > 0"));
    }
    if rails.is_empty() {
        return Err(invalid("rails", "empty bin range"));
    }
    let (mu, sigma, delta) = (mu_vc, sigma_vc, delta_vc);
    let bin_of = |v: f64| ((v / delta + 0.5).floor() as i64).clamp(rails.lo, rails.hi);
    let center = bin_of(mu);
    let z = std::f64::consts::SQRT_2 * erfc_inv(target_eps_c);
    let mut w = IntWindow::new(bin_of(mu - z * sigma) + 1, bin_of(mu + z * sigma) - 1);
    w.lo = w.lo.min(center);
    w.hi = w.hi.max(center);

    while outside_mass(w, mu, sigma, delta) > target_eps_c {
        let below = (w.lo > rails.lo).then(|| bin_mass(w.lo - 1, mu, sigma, delta));
        let above = (w.hi < rails.hi).then(|| bin_mass(w.hi + 1, mu, sigma, delta));
        match (below, above) {
            (None, None) => {
                return Err(Error::NoSolution(format!(
                    "completeness over the full rail range is {} < {}",
                    1.0 - outside_mass(w, mu, sigma, delta),
                    1.0 - target_eps_c
                )))
            }
            (Some(lo), Some(hi)) if lo > hi => w.lo -= 1,
            (Some(_), None) => w.lo -= 1,
            _ => w.hi += 1,
        }
    }
    while w.lo < w.hi {
        let trimmed = if bin_mass(w.lo, mu, sigma, delta) <= bin_mass(w.hi, mu, sigma, delta) {
            IntWindow::new(w.lo + 1, w.hi)
        } else {
            IntWindow::new(w.lo, w.hi - 1)
        };
        if outside_mass(trimmed, mu, sigma, delta) > target_eps_c {
            break;
        }
        w = trimmed;
    }
    Ok(w)
}
