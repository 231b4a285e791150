use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdi_qrng::extractor::{toeplitz_hash, toeplitz_hash_naive, BitString, ExtractorConfig, ToeplitzHasher};

fn random_bits<R: Rng>(rng: &mut R, len: usize) -> BitString {
    BitString::from_words((0..len.div_ceil(64)).map(|_| rng.random()).collect(), len)
}

fn config<R: Rng>(rng: &mut R, l: usize, m: usize, b: u32) -> ExtractorConfig {
    let h = m * b as usize;
    ExtractorConfig { l, h, m, b, seed: random_bits(rng, l + h - 1), eps_hash: 1e-10, t: 1 }
}

fn pack(samples: &[u64], b: u32) -> BitString {
    let mut s = BitString::zeros(0);
    for &v in samples {
        s.push_bits(v, b);
    }
    s
}

#[test]
fn naive_block_and_streaming_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let b = rng.random_range(1..=16u32);
        let m = rng.random_range(1..=(128 / b as usize).max(1));
        let h = m * b as usize;
        let l = rng.random_range(1..=h.min(64));
        let cfg = config(&mut rng, l, m, b);
        let samples: Vec<u64> = (0..m).map(|_| rng.random::<u64>() & ((1 << b) - 1)).collect();
        let input = pack(&samples, b);
        let naive = toeplitz_hash_naive(l, h, &cfg.seed, &input).unwrap();
        let hasher = ToeplitzHasher::new(&cfg).unwrap();
        assert_eq!(hasher.hash(&input).unwrap(), naive, "block, case {case}");
        assert_eq!(hasher.hash_samples(&samples).unwrap(), naive, "streaming, case {case}");
        let portable = ToeplitzHasher::new_portable(&cfg).unwrap();
        assert_eq!(portable.hash_samples(&samples).unwrap(), naive, "portable, case {case}");
    }
}

#[test]
fn large_blocks_agree_with_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &(l, m, b) in &[(512usize, 183usize, 14u32), (100, 37, 13), (1000, 100, 11), (64, 64, 1), (65, 65, 2), (777, 300, 7)] {
        let cfg = config(&mut rng, l, m, b);
        let samples: Vec<u64> = (0..m).map(|_| rng.random::<u64>() & ((1 << b) - 1)).collect();
        let input = pack(&samples, b);
        let naive = toeplitz_hash_naive(l, m * b as usize, &cfg.seed, &input).unwrap();
        let hasher = ToeplitzHasher::new(&cfg).unwrap();
        assert_eq!(hasher.hash(&input).unwrap(), naive);
        assert_eq!(hasher.hash_samples(&samples).unwrap(), naive);
    }
}

#[test]
fn streaming_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = config(&mut rng, 512, 183, 14);
    let hasher = ToeplitzHasher::new(&cfg).unwrap();
    let samples: Vec<u64> = (0..183).map(|_| rng.random::<u64>() & 0x3fff).collect();
    let in_order = hasher.hash_samples(&samples).unwrap();
    let mut order: Vec<usize> = (0..183).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut acc = hasher.new_accumulator();
    for &i in &order {
        hasher.streaming_accumulate(&mut acc, samples[i], i).unwrap();
    }
    assert_eq!(hasher.finish(acc), in_order);
    assert!(hasher.streaming_accumulate(&mut hasher.new_accumulator(), 1, 183).is_err());
}

#[test]
fn hash_is_linear_over_gf2() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cfg = config(&mut rng, 512, 183, 14);
    let hasher = ToeplitzHasher::new(&cfg).unwrap();
    let zero = BitString::zeros(cfg.h);
    assert_eq!(hasher.hash(&zero).unwrap(), BitString::zeros(cfg.l));
    for _ in 0..1000 {
        let a = random_bits(&mut rng, cfg.h);
        let b = random_bits(&mut rng, cfg.h);
        let lhs = hasher.hash(&(&a ^ &b)).unwrap();
        let rhs = &hasher.hash(&a).unwrap() ^ &hasher.hash(&b).unwrap();
        assert_eq!(lhs, rhs);
    }
}

#[test]
fn unit_vectors_select_seed_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (l, m, b) = (40usize, 10usize, 9u32);
    let cfg = config(&mut rng, l, m, b);
    let h = cfg.h;
    for j in 0..h {
        let mut e = BitString::zeros(h);
        e.set(j, true);
        let col = toeplitz_hash(&cfg, &e).unwrap();
        assert_eq!(col, cfg.seed.slice(h - 1 - j, l), "column {j}");
    }
}

#[test]
fn deterministic_across_threads() {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = config(&mut rng, 512, 183, 14);
    let hasher = ToeplitzHasher::new(&cfg).unwrap();
    let blocks: Vec<Vec<u64>> = (0..64).map(|_| (0..183).map(|_| rng.random::<u64>() & 0x3fff).collect()).collect();
    let serial: Vec<BitString> = blocks.iter().map(|s| hasher.hash_samples(s).unwrap()).collect();
    let parallel: Vec<BitString> = blocks.par_iter().map(|s| hasher.hash_samples(s).unwrap()).collect();
    assert_eq!(serial, parallel);
}

#[test]
fn output_of_uniform_input_is_balanced() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = config(&mut rng, 512, 183, 14);
    let hasher = ToeplitzHasher::new(&cfg).unwrap();
    let blocks = 10_000_000usize.div_ceil(512);
    let mut ones = 0u64;
    let mut samples = vec![0u64; 183];
    for _ in 0..blocks {
        samples.iter_mut().for_each(|s| *s = rng.random::<u64>() & 0x3fff);
        ones += hasher.hash_samples(&samples).unwrap().count_ones();
    }
    let n = (blocks * 512) as f64;
    let z = (ones as f64 - n / 2.0) / (n / 4.0).sqrt();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn rejects_malformed_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut cfg = config(&mut rng, 16, 8, 4);
    assert!(ToeplitzHasher::new(&cfg).is_ok());
    cfg.seed = random_bits(&mut rng, 16 + 32);
    assert!(ToeplitzHasher::new(&cfg).is_err());
    let mut cfg = config(&mut rng, 16, 8, 4);
    cfg.h = 33;
    assert!(ToeplitzHasher::new(&cfg).is_err());
    let cfg = config(&mut rng, 16, 8, 4);
    let hasher = ToeplitzHasher::new(&cfg).unwrap();
    assert!(hasher.hash(&BitString::zeros(31)).is_err());
    assert!(hasher.hash_samples(&[0; 7]).is_err());
}
