//! Numerical kernels shared by the bound calculators: error functions,
//! log-space binomial probabilities and binomial tail sums that stay
//! accurate for photon numbers around 1e8.

use std::f64::consts::{LN_2, PI};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Largest trial count for which tails are summed term by term.
pub const TAIL_SUMMATION_MAX_N: u64 = 10_000;

/// Inverse of `erfc` on (0, 2), refined with Newton steps.
pub fn erfc_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 2.0 {
        return f64::NEG_INFINITY;
    }
    let mut x = statrs::function::erf::erfc_inv(p);
    for _ in 0..3 {
        let deriv = -2.0 / PI.sqrt() * (-x * x).exp();
        if deriv == 0.0 || !deriv.is_finite() {
            break;
        }
        let step = (erfc(x) - p) / deriv;
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Probability that a standard normal lands in `[a, b]`, evaluated on the
/// tail side so that far-tail masses keep their relative precision.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        1.0 - 0.5 * (erfc(-a * s) + erfc(b * s))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

// ln(n!) - ln(sqrt(2 pi n) (n/e)^n) for n = 0..=15.
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Error of Stirling's approximation to ln(n!).
pub fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n < 16 {
        return STIRLERR_TABLE[n as usize];
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance term `x ln(x/np) + np - x`, accurate when x is close to np.
pub fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// Natural log of the Binomial(n, p) probability mass at k.
pub fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        return nf * (-p).ln_1p();
    }
    if k == n {
        return nf * p.ln();
    }
    let kf = k as f64;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    lc - 0.5 * ((2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p())
}

pub fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    ln_binom_pmf(k, n, p).exp()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// P(X >= k) for X ~ Binomial(n, p), choosing the evaluation route by size.
pub fn binom_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if n <= TAIL_SUMMATION_MAX_N {
        binom_upper_tail_sum(k, n, p)
    } else {
        binom_upper_tail_beta(k, n, p)
    }
}

/// Upper tail by log-space summation of pmf terms, working on whichever side
/// of the mode is the true tail and stopping once terms become negligible.
pub fn binom_upper_tail_sum(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let mode = ((n as f64 + 1.0) * p).floor().min(n as f64) as u64;
    if k > mode {
        (ln_tail_sum(k..=n, n, p)).exp().min(1.0)
    } else {
        let lower = ln_tail_sum((0..k).rev(), n, p).exp();
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

fn ln_tail_sum(range: impl Iterator<Item = u64>, n: u64, p: f64) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for j in range {
        let t = ln_binom_pmf(j, n, p);
        if t < acc - 50.0 {
            break;
        }
        acc = log_add_exp(acc, t);
    }
    acc
}

/// Upper tail through the regularized incomplete beta function
/// P(X >= k) = I_p(k, n - k + 1), with the prefactor built from the
/// log-space pmf instead of log-gamma differences.
pub fn binom_upper_tail_beta(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let a = k as f64;
    let b = (n - k) as f64 + 1.0;
    if p < (a + 1.0) / (a + b + 2.0) {
        let front = ln_binom_pmf(k, n, p) + (1.0 - p).ln();
        (front + betacf(a, b, p).ln()).exp().min(1.0)
    } else {
        let front = ln_binom_pmf(k - 1, n, p) + p.ln();
        (1.0 - (front + betacf(b, a, 1.0 - p).ln()).exp()).clamp(0.0, 1.0)
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 4e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..50_000_000u64 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

pub fn log2(x: f64) -> f64 {
    x.ln() / LN_2
}
