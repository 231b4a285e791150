use proptest::prelude::*;
use sdi_qrng::optics::{
    conversion_factor, detect, mean_photons_per_window, quantize, sample_source, split, stream_rng, AdcModel,
    BeamSplitter, DetectorModel, SourceModel,
};
use sdi_qrng::presets;
use sdi_qrng::special::binom_pmf;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn noiseless_pd() -> DetectorModel {
    DetectorModel { sigma_gamma_v: 0.0, sat_photons: u64::MAX, ..presets::balanced_pd() }
}

/// Chi-square p-value of observed counts against expected probabilities,
/// pooling sparse cells so every cell expects at least five events.
fn chi_square_p(observed: &[u64], probs: &[f64], trials: u64) -> f64 {
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(probs) {
        o_acc += *o as f64;
        e_acc += p * trials as f64;
        if e_acc >= 5.0 {
            stat += (o_acc - e_acc).powi(2) / e_acc;
            cells += 1;
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 {
        stat += (o_acc - e_acc).powi(2) / e_acc.max(1e-300);
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn split_follows_the_binomial_law() {
    let mut rng = stream_rng(1, 0);
    let trials = 100_000u64;
    let mut worst = 1.0f64;
    for &n in &[1u64, 2, 5, 13, 30, 50] {
        for &r in &[0.05, 0.109, 0.5, 0.513, 0.9] {
            let bs = BeamSplitter::new(r).unwrap();
            let mut counts = vec![0u64; n as usize + 1];
            for _ in 0..trials {
                let (a, b) = split(n, &bs, &mut rng);
                assert_eq!(a + b, n);
                counts[a as usize] += 1;
            }
            let probs: Vec<f64> = (0..=n).map(|k| binom_pmf(k, n, r)).collect();
            worst = worst.min(chi_square_p(&counts, &probs, trials));
        }
    }
    // 30 tests at significance 1e-3 each; a Bonferroni-style floor keeps the suite stable.
    assert!(worst > 1e-3 / 30.0, "smallest p-value {worst}");
}

proptest! {
    #[test]
    fn split_conserves_photons(n in 0u64..u64::MAX / 4, r in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let (a, b) = split(n, &BeamSplitter::new(r).unwrap(), &mut rng);
        prop_assert_eq!(a + b, n);
    }

    #[test]
    fn quantize_is_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let adc = presets::adc();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo, &adc) <= quantize(hi, &adc));
    }

    #[test]
    fn noiseless_detection_is_linear(n in 0u64..10_000_000_000, k in 1u64..1000) {
        let pd = noiseless_pd();
        let mut rng = stream_rng(0, 0);
        let alpha = conversion_factor(&pd);
        let v = detect(n, &pd, &mut rng);
        prop_assert!((v - alpha * n as f64).abs() <= 1e-15 * v.abs().max(1e-30));
        let vk = detect(n / k * k, &pd, &mut rng);
        prop_assert!((vk - k as f64 * detect(n / k, &pd, &mut rng)).abs() <= 1e-14 * vk.abs().max(1e-30));
    }
}

#[test]
fn quantize_bins_and_rails() {
    let adc = presets::adc();
    let (lo, hi) = adc.bin_range();
    assert_eq!((lo, hi), (-1820, 1820));
    assert_eq!(quantize(0.0, &adc), 0);
    assert_eq!(quantize(adc.v_max + 1.0, &adc), hi);
    assert_eq!(quantize(adc.v_min - 1.0, &adc), lo);
    assert_eq!(quantize(f64::NAN, &adc), 0);
    let d = adc.bin_width();
    for j in [-1000i64, -1, 0, 1, 7, 1819] {
        assert_eq!(quantize(adc.bin_center(j), &adc), j);
        assert_eq!(quantize(adc.bin_center(j) + 0.49 * d, &adc), j);
        assert_eq!(quantize(adc.bin_center(j) - 0.49 * d, &adc), j);
    }
    assert_eq!(adc.to_word(-1), 0x3fff);
    assert_eq!(adc.to_word(1820), 1820);
}

#[test]
fn photon_rate_times_conversion_is_detected_voltage() {
    for pd in [presets::balanced_pd(), presets::certification_pd()] {
        for &p in &[1e-6, 1e-3, 3.43e-3] {
            let v = mean_photons_per_window(p, &pd) * conversion_factor(&pd);
            let want = p * pd.responsivity_a_per_w * pd.gain_ohm;
            assert!(((v - want) / want).abs() < 4.0 * f64::EPSILON, "{v} vs {want}");
        }
    }
}

#[test]
fn quantized_response_is_monotone_in_expectation() {
    let mut rng = stream_rng(2, 0);
    let pd = presets::balanced_pd();
    let adc = presets::adc();
    let mut prev = f64::NEG_INFINITY;
    for step in 0..40u64 {
        let n = step * 2_000_000;
        let mean: f64 = (0..2000).map(|_| quantize(detect(n, &pd, &mut rng), &adc) as f64).sum::<f64>() / 2000.0;
        assert!(mean >= prev - 0.1, "n={n}: {mean} < {prev}");
        prev = mean;
    }
}

fn moments(model: &SourceModel, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let xs: Vec<f64> = (0..samples).map(|_| sample_source(model, &mut rng) as f64).collect();
    let mean = xs.iter().sum::<f64>() / samples as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    (mean, var)
}

#[test]
fn source_moments_match_their_models() {
    let models = [
        SourceModel::coherent(3.5),
        SourceModel::coherent(2_000.0),
        SourceModel::coherent(1.56e8),
        SourceModel::coherent(5e4).with_rin(0.01),
        SourceModel::coherent(1.56e8).with_rin(1e-3),
        SourceModel::thermal_ase(40.0, 1.0, 1),
        SourceModel::thermal_ase(5e3, 25.0, 2),
        SourceModel::thermal_ase(1e7, 1e4, 2),
    ];
    let samples = 200_000;
    for (i, m) in models.iter().enumerate() {
        let (mean, var) = moments(m, samples, 10 + i as u64);
        let se_mean = (m.variance() / samples as f64).sqrt();
        assert!((mean - m.mean()).abs() < 5.0 * se_mean, "model {i}: mean {mean} vs {}", m.mean());
        assert!(((var - m.variance()) / m.variance()).abs() < 0.05, "model {i}: var {var} vs {}", m.variance());
    }
    let (mean, var) = moments(&SourceModel::fock(12_345), 1000, 3);
    assert_eq!((mean, var), (12_345.0, 0.0));
}

#[test]
fn small_coherent_source_is_poissonian() {
    let mut rng = stream_rng(4, 0);
    let lambda: f64 = 4.2;
    let trials = 100_000u64;
    let mut counts = vec![0u64; 40];
    for _ in 0..trials {
        counts[(sample_source(&SourceModel::coherent(lambda), &mut rng) as usize).min(39)] += 1;
    }
    let probs: Vec<f64> = (0..40u64)
        .map(|k| (k as f64 * lambda.ln() - lambda - sdi_qrng::special::ln_gamma(k as f64 + 1.0)).exp())
        .collect();
    assert!(chi_square_p(&counts, &probs, trials) > 1e-3);
}

#[test]
fn detector_noise_has_configured_spread() {
    let mut rng = stream_rng(5, 0);
    let pd = presets::certification_pd();
    let vs: Vec<f64> = (0..100_000).map(|_| detect(0, &pd, &mut rng)).collect();
    let sd = (vs.iter().map(|v| v * v).sum::<f64>() / vs.len() as f64).sqrt();
    assert!((sd / pd.sigma_gamma_v - 1.0).abs() < 0.01);
    let sat = detect(u64::MAX, &DetectorModel { sigma_gamma_v: 0.0, ..pd }, &mut rng);
    assert_eq!(sat, conversion_factor(&pd) * pd.sat_photons as f64);
}

#[test]
fn invalid_models_are_rejected() {
    assert!(BeamSplitter::new(1.5).is_err());
    assert!(BeamSplitter::new(-0.1).is_err());
    assert!(SourceModel::coherent(-1.0).validate().is_err());
    assert!(SourceModel::thermal_ase(10.0, 0.5, 1).validate().is_err());
    assert!(SourceModel::thermal_ase(10.0, 2.0, 3).validate().is_err());
    assert!(SourceModel::coherent(1.0).with_rin(-0.1).validate().is_err());
    assert!(AdcModel { enob: 15.0, ..presets::adc() }.validate().is_err());
    assert!(AdcModel { v_max: -2.0, ..presets::adc() }.validate().is_err());
    assert!(DetectorModel { bandwidth_hz: 0.0, ..presets::balanced_pd() }.validate().is_err());
}
