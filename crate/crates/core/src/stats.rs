//! A small subset of the SP 800-22 statistical tests, for smoke-testing
//! extracted bitstreams.

use serde::{Deserialize, Serialize};

use crate::extractor::BitString;
use crate::special::{erfc, gamma_q, normal_cdf};

pub const PASS_THRESHOLD: f64 = 0.01;
pub const BLOCK_FREQUENCY_M: usize = 128;
pub const MIN_BITS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReportEntry {
    pub test: String,
    pub p_value: f64,
    pub passed: bool,
}

impl StatReportEntry {
    fn new(test: &str, p_value: f64) -> Self {
        Self { test: test.to_string(), p_value, passed: p_value >= PASS_THRESHOLD }
    }
}

pub fn frequency(bits: &BitString) -> f64 {
    let n = bits.len() as f64;
    let s = 2.0 * bits.count_ones() as f64 - n;
    erfc(s.abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

pub fn block_frequency(bits: &BitString, m: usize) -> f64 {
    let blocks = bits.len() / m;
    let mut chi = 0.0;
    for k in 0..blocks {
        let ones = bits.slice(k * m, m).count_ones() as f64;
        let pi = ones / m as f64 - 0.5;
        chi += pi * pi;
    }
    chi *= 4.0 * m as f64;
    gamma_q(blocks as f64 / 2.0, chi / 2.0)
}

pub fn runs(bits: &BitString) -> f64 {
    let n = bits.len();
    let nf = n as f64;
    let pi = bits.count_ones() as f64 / nf;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return 0.0;
    }
    let words = bits.words();
    let mut transitions = 0u64;
    for (i, &w) in words.iter().enumerate() {
        let next_msb = words.get(i + 1).map_or(0, |x| x >> 63);
        let diff = w ^ (w << 1 | next_msb);
        let valid = (n - 64 * i).min(64);
        let pairs = valid.saturating_sub(if 64 * i + valid == n { 1 } else { 0 });
        let mask = if pairs == 0 { 0 } else { !0u64 << (64 - pairs) };
        transitions += (diff & mask).count_ones() as u64;
    }
    let v_obs = transitions as f64 + 1.0;
    let q = pi * (1.0 - pi);
    erfc((v_obs - 2.0 * nf * q).abs() / (2.0 * (2.0 * nf).sqrt() * q))
}

pub fn cumulative_sums(bits: &BitString, forward: bool) -> f64 {
    let n = bits.len() as i64;
    let mut s = 0i64;
    let mut z = 0i64;
    let mut step = |b: bool| {
        s += if b { 1 } else { -1 };
        z = z.max(s.abs());
    };
    if forward {
        bits.iter().for_each(&mut step);
    } else {
        (0..bits.len()).rev().for_each(|i| step(bits.get(i)));
    }
    if z == 0 {
        return 0.0;
    }
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let mut sum1 = 0.0;
    let mut k = (-n / z + 1) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n) - normal_cdf((4.0 * kf - 1.0) * zf / sqrt_n);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = (-n / z - 3) / 4;
    while k <= (n / z - 1) / 4 {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * zf / sqrt_n) - normal_cdf((4.0 * kf + 1.0) * zf / sqrt_n);
        k += 1;
    }
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}

/// All four tests on one sequence.
pub fn battery(bits: &BitString) -> Vec<StatReportEntry> {
    vec![
        StatReportEntry::new("frequency", frequency(bits)),
        StatReportEntry::new("block_frequency", block_frequency(bits, BLOCK_FREQUENCY_M)),
        StatReportEntry::new("runs", runs(bits)),
        StatReportEntry::new("cumulative_sums_forward", cumulative_sums(bits, true)),
        StatReportEntry::new("cumulative_sums_backward", cumulative_sums(bits, false)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestProportion {
    pub test: String,
    pub sequences: usize,
    pub passed: usize,
    pub proportion: f64,
    /// Lower edge of the usual three-sigma acceptance interval for the proportion.
    pub min_proportion: f64,
}

/// Splits `bits` into sequences of `seq_len` bits and reports, per test,
/// how many sequences passed.
pub fn battery_proportions(bits: &BitString, seq_len: usize) -> (Vec<Vec<StatReportEntry>>, Vec<TestProportion>) {
    use rayon::prelude::*;
    let k = bits.len() / seq_len;
    let per_seq: Vec<Vec<StatReportEntry>> =
        (0..k).into_par_iter().map(|i| battery(&bits.slice(i * seq_len, seq_len))).collect();
    let mut summary = Vec::new();
    if let Some(first) = per_seq.first() {
        for (t, entry) in first.iter().enumerate() {
            let passed = per_seq.iter().filter(|s| s[t].passed).count();
            let p = 1.0 - PASS_THRESHOLD;
            summary.push(TestProportion {
                test: entry.test.clone(),
                sequences: k,
                passed,
                proportion: passed as f64 / k as f64,
                min_proportion: p - 3.0 * (p * (1.0 - p) / k as f64).sqrt(),
            });
        }
    }
    (per_seq, summary)
}
