use proptest::prelude::*;
use sdi_qrng::certification::{
    guessing_prob_exact, guessing_prob_gaussian, min_entropy_sdi, peak_diff_outcome, sdi_window, EntropyMode,
    IntWindow,
};
use sdi_qrng::special::binom_pmf;

const R0S: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Probability that `n_A - n_B` lands in `window`, summed over every
/// assignment of the `n` photons to the two outputs.
fn enumerate_paths(n: u32, r0: f64, window: IntWindow) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for path in 0u32..(1 << n) {
        let a = path.count_ones() as i64;
        let x = 2 * a - n as i64;
        if !window.contains(x) {
            continue;
        }
        let p = r0.powi(a as i32) * (1.0 - r0).powi((n as i64 - a) as i32);
        let t = sum + p;
        comp += if sum.abs() >= p { (sum - t) + p } else { (p - t) + sum };
        sum = t;
    }
    sum + comp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_guessing_matches_path_enumeration(n in 0u32..=20, r0 in 0.01f64..0.99, lo in -24i64..24, len in 1i64..12) {
        let window = IntWindow::new(lo, lo + len - 1);
        let want = enumerate_paths(n, r0, window);
        let got = guessing_prob_exact(n as u64, r0, window).unwrap();
        if want == 0.0 {
            prop_assert_eq!(got, 0.0);
        } else {
            prop_assert!(((got - want) / want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn gaussian_kappa_is_symmetric(n in 100_001u64..1_000_000_000, r0 in 0.01f64..0.99, w in 0.5f64..5_000.0) {
        let a = min_entropy_sdi(1, n, r0, 2.0 * w, 1.0, EntropyMode::Gaussian);
        let b = min_entropy_sdi(1, n, 1.0 - r0, 2.0 * w, 1.0, EntropyMode::Gaussian);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!((a.kappa - b.kappa).abs() <= 1e-12 * a.kappa.max(1.0));
        }
    }

    #[test]
    fn kappa_nonnegative_and_window_width(n in 0u64..5_000, r0 in 0.0f64..=1.0, dv in 0.01f64..40.0, m in 1u32..400) {
        let r = min_entropy_sdi(m, n, r0, dv, 1.0, EntropyMode::Exact).unwrap();
        prop_assert!(r.kappa >= 0.0);
        let half = dv / 2.0;
        prop_assert_eq!(r.window.len() as f64, half.ceil() + half.floor() + 1.0);
        prop_assert!((r.kappa - m as f64 * r.h_min_per_sample).abs() <= 1e-12 * r.kappa.max(1.0));
    }
}

#[test]
fn peak_outcome_is_pmf_argmax() {
    for n in 0..=200u64 {
        for &r0 in &R0S {
            let mu = peak_diff_outcome(n, r0);
            let best = (0..=n).map(|k| binom_pmf(k, n, r0)).fold(0.0, f64::max);
            let k = ((n as i64 + mu) / 2) as u64;
            assert_eq!((n as i64 + mu) % 2, 0);
            assert!(binom_pmf(k, n, r0) >= best * (1.0 - 1e-12), "n={n} r0={r0} mu={mu}");
        }
    }
}

fn single_outcome(n: u64, r0: f64) -> f64 {
    let mu = peak_diff_outcome(n, r0);
    guessing_prob_exact(n, r0, IntWindow::new(mu, mu)).unwrap()
}

#[test]
fn peak_window_is_the_most_likely_single_outcome() {
    for n in 0..=30u64 {
        for &r0 in &R0S {
            let p = single_outcome(n, r0);
            let n_i = n as i64;
            let best = (-n_i - 2..=n_i + 2)
                .map(|x| guessing_prob_exact(n, r0, IntWindow::new(x, x)).unwrap())
                .fold(0.0, f64::max);
            assert!(((p - best) / best).abs() < 1e-12, "n={n} r0={r0}: {p} vs {best}");
        }
    }
}

#[test]
fn peak_probability_decreases_with_photon_number() {
    for &r0 in &R0S {
        for n in 0..100u64 {
            let (a, b) = (single_outcome(n, r0), single_outcome(n + 1, r0));
            assert!(b <= a * (1.0 + 1e-12), "r0={r0} n={n}: {b} > {a}");
        }
    }
}

#[test]
fn exact_guessing_is_reflection_symmetric() {
    for n in 0..=30u64 {
        for &r0 in &R0S {
            let a = min_entropy_sdi(1, n, r0, 1.0, 1.0, EntropyMode::Exact).unwrap().p_guess;
            let b = min_entropy_sdi(1, n, 1.0 - r0, 1.0, 1.0, EntropyMode::Exact).unwrap().p_guess;
            assert!(((a - b) / a).abs() < 1e-12, "n={n} r0={r0}: {a} vs {b}");
        }
    }
}

#[test]
fn gaussian_kappa_decays_from_balanced_splitting() {
    let (dv, ad) = (5.49345e-4, 4.49834e-7);
    for &n in &[200_000u64, 3_000_000, 136_644_717, 1_000_000_000] {
        let mut prev = f64::INFINITY;
        for i in 0..=490 {
            let r0 = 0.5 + i as f64 * 0.001;
            let k = min_entropy_sdi(1, n, r0, dv, ad, EntropyMode::Gaussian).unwrap().kappa;
            assert!(k <= prev, "n={n} r0={r0}");
            prev = k;
        }
    }
}

#[test]
fn gaussian_guessing_reference_value() {
    let p = guessing_prob_gaussian(200_000_000, 0.513, 1220.0, 1.0).unwrap();
    assert!(((p - 0.068_825_269_046_720_69) / p).abs() < 1e-12, "{p}");
}

#[test]
fn gaussian_mode_precondition() {
    assert!(guessing_prob_gaussian(100_000, 0.5, 2.0, 1.0).is_err());
    assert!(guessing_prob_gaussian(1_000_000, 1e-6, 2.0, 1.0).is_err());
    assert!(guessing_prob_gaussian(1_000_000, 0.5, 2.0, 1.0).is_ok());
}

#[test]
fn exact_and_gaussian_agree_for_narrow_bins() {
    for &n in &[200_000u64, 2_000_000, 20_000_000] {
        for &r0 in &[0.5, 0.513, 0.7] {
            let e = min_entropy_sdi(1, n, r0, 2e-6, 1.0, EntropyMode::Exact).unwrap();
            let g = min_entropy_sdi(1, n, r0, 2e-6, 1.0, EntropyMode::Gaussian).unwrap();
            assert!((e.h_min_per_sample - g.h_min_per_sample).abs() < 1e-3, "n={n} r0={r0} {} {}", e.h_min_per_sample, g.h_min_per_sample);
        }
    }
}

#[test]
fn fully_reflecting_splitter_gives_no_entropy() {
    for n in [0u64, 1, 17, 1000, 10_000_000] {
        let r = min_entropy_sdi(183, n, 1.0, 3.0, 1.0, EntropyMode::Exact).unwrap();
        assert_eq!(r.kappa, 0.0);
        assert_eq!(r.mu_x, n as i64);
        let w = sdi_window(r.mu_x, 3.0, 1.0);
        assert_eq!((w.lo, w.hi), (n as i64 - 2, n as i64 + 1));
    }
}
