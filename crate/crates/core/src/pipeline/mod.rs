//! Protocol runs: per-round simulation of the optical chain, the
//! certification test, raw-sample accumulation and hashing.

mod analysis;
mod eve;

pub use analysis::{analyze_hmin_surface, bounds_at_power, AnalysisOptions, HminPoint, PowerBounds};
pub use eve::{
    analytic_pass_fraction, eve_analytic_pass, eve_sweep, optimal_eve_power, solve_honest_mean, EvePoint,
    EveScenario,
};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certification::{IntWindow, SecurityBudget};
use crate::error::{invalid, Result};
use crate::extractor::{composable_epsilon, rates, BitString, ExtractorConfig, Rates, SecuritySummary, ToeplitzHasher};
use crate::optics::{
    conversion_factor, detect, quantize, sample_source, split, stream_rng, AdcModel, BeamSplitter, DetectorModel,
    SourceModel,
};

/// How the balanced detector output is coupled to the ADC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// The expected mean of the difference signal is removed.
    Ac,
    Dc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub source: SourceModel,
    pub bs_cert: BeamSplitter,
    pub bs_gen: BeamSplitter,
    pub pd_cert: DetectorModel,
    pub pd_a: DetectorModel,
    pub pd_b: DetectorModel,
    pub adc: AdcModel,
    pub budget: SecurityBudget,
    pub extractor: ExtractorConfig,
    pub cert_window: IntWindow,
    pub coupling: Coupling,
    pub kappa_per_sample: f64,
    pub hash_rate_hz: f64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        BeamSplitter::new(self.bs_cert.r)?;
        BeamSplitter::new(self.bs_gen.r)?;
        self.pd_cert.validate()?;
        self.pd_a.validate()?;
        self.pd_b.validate()?;
        self.adc.validate()?;
        self.extractor.validate()?;
        if self.extractor.b != self.adc.bits_b {
            return Err(invalid("extractor.b", "must equal the ADC resolution"));
        }
        let (lo, hi) = self.adc.bin_range();
        let w = self.cert_window;
        if w.lo > w.hi || w.lo < lo || w.hi > hi {
            return Err(invalid("cert_window", format!("[{}, {}] not inside ADC bins [{lo}, {hi}]", w.lo, w.hi)));
        }
        if !(self.hash_rate_hz > 0.0) {
            return Err(invalid("hash_rate_hz", "must be > 0"));
        }
        if !(self.kappa_per_sample >= 0.0) {
            return Err(invalid("kappa_per_sample", "must be >= 0"));
        }
        Ok(())
    }

    /// Difference-signal offset removed by AC coupling for a source of the given mean.
    pub fn difference_offset(&self, source_mean: f64) -> f64 {
        match self.coupling {
            Coupling::Dc => 0.0,
            Coupling::Ac => {
                let n_r = (1.0 - self.bs_cert.r) * source_mean;
                let a = (self.bs_gen.r * n_r).min(self.pd_a.sat_photons as f64);
                let b = ((1.0 - self.bs_gen.r) * n_r).min(self.pd_b.sat_photons as f64);
                conversion_factor(&self.pd_a) * a - conversion_factor(&self.pd_b) * b
            }
        }
    }
}

/// Everything that happened to the photons of one acquisition window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub n_source: u64,
    pub n_cert: u64,
    pub n_transmitted: u64,
    pub cert_bin: i64,
    pub passed: bool,
    pub n_a: Option<u64>,
    pub n_b: Option<u64>,
    pub diff_bin: Option<i64>,
}

pub(crate) fn round_from_count<R: Rng + ?Sized>(cfg: &ProtocolConfig, offset: f64, n: u64, rng: &mut R) -> RoundTrace {
    let (n_cert, n_transmitted) = split(n, &cfg.bs_cert, rng);
    let cert_bin = quantize(detect(n_cert, &cfg.pd_cert, rng), &cfg.adc);
    let passed = cfg.cert_window.contains(cert_bin);
    let mut trace = RoundTrace {
        n_source: n,
        n_cert,
        n_transmitted,
        cert_bin,
        passed,
        n_a: None,
        n_b: None,
        diff_bin: None,
    };
    if passed {
        let (n_a, n_b) = split(n_transmitted, &cfg.bs_gen, rng);
        let v = detect(n_a, &cfg.pd_a, rng) - detect(n_b, &cfg.pd_b, rng) - offset;
        trace.n_a = Some(n_a);
        trace.n_b = Some(n_b);
        trace.diff_bin = Some(quantize(v, &cfg.adc));
    }
    trace
}

pub fn simulate_round_traced<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> RoundTrace {
    let n = sample_source(&cfg.source, rng);
    round_from_count(cfg, cfg.difference_offset(cfg.source.mean()), n, rng)
}

/// One protocol round: whether the certification test passed and, if so,
/// the quantized difference measurement.
pub fn simulate_round<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> (bool, Option<i64>) {
    let t = simulate_round_traced(cfg, rng);
    (t.passed, t.diff_bin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub blocks_requested: u64,
    pub blocks_produced: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rounds_attempted: u64,
    pub rounds_passed: u64,
    pub pass_fraction: f64,
    #[serde(skip)]
    pub raw_samples: Vec<u32>,
    #[serde(skip)]
    pub extracted_bits: BitString,
    pub extracted_len: u64,
    pub blocks_hashed: u64,
    pub shortfall: Option<Shortfall>,
    pub security: SecuritySummary,
    pub rates: Rates,
    /// Output rate scaled by the observed pass fraction, bits/s.
    pub empirical_avg_rate: f64,
}

/// Rounds simulated per independent random stream.
pub const ROUNDS_PER_STREAM: u64 = 1 << 14;

struct Chunk {
    rounds: u64,
    passes: Vec<(u64, u32)>,
}

fn simulate_chunk(cfg: &ProtocolConfig, offset: f64, seed: u64, index: u64, rounds: u64) -> Chunk {
    let mut rng = stream_rng(seed, index);
    let mut passes = Vec::new();
    for i in 0..rounds {
        let n = sample_source(&cfg.source, &mut rng);
        if let Some(j) = round_from_count(cfg, offset, n, &mut rng).diff_bin {
            passes.push((i, cfg.adc.to_word(j)));
        }
    }
    Chunk { rounds, passes }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Runs up to `total_rounds` rounds, stopping once `t` hash blocks of
/// passed samples are available. Output depends only on `seed`, never on
/// `workers`.
pub fn run_protocol(cfg: &ProtocolConfig, total_rounds: u64, seed: u64, workers: Option<usize>) -> Result<RunReport> {
    cfg.validate()?;
    let ex = &cfg.extractor;
    let needed = ex.t * ex.m as u64;
    let offset = cfg.difference_offset(cfg.source.mean());
    let hasher = ToeplitzHasher::new(ex)?;

    with_workers(workers, || {
        let n_chunks = total_rounds.div_ceil(ROUNDS_PER_STREAM);
        let batch = (rayon::current_num_threads() as u64 * 4).max(1);
        let mut samples: Vec<u32> = Vec::new();
        let mut attempted = 0u64;
        let mut next = 0u64;
        'outer: while next < n_chunks && (samples.len() as u64) < needed {
            let end = (next + batch).min(n_chunks);
            let chunks: Vec<Chunk> = (next..end)
                .into_par_iter()
                .map(|c| {
                    let rounds = ROUNDS_PER_STREAM.min(total_rounds - c * ROUNDS_PER_STREAM);
                    simulate_chunk(cfg, offset, seed, c, rounds)
                })
                .collect();
            for chunk in chunks {
                for &(i, w) in &chunk.passes {
                    samples.push(w);
                    if samples.len() as u64 == needed {
                        attempted += i + 1;
                        break 'outer;
                    }
                }
                attempted += chunk.rounds;
            }
            next = end;
        }

        let blocks = (samples.len() / ex.m) as u64;
        let blocks = blocks.min(ex.t);
        let outputs: Vec<BitString> = samples[..(blocks as usize * ex.m)]
            .par_chunks(ex.m)
            .map(|block| {
                let words: Vec<u64> = block.iter().map(|&w| w as u64).collect();
                hasher.hash_samples(&words).expect("block of m samples")
            })
            .collect();
        let mut extracted = BitString::zeros(0);
        for o in &outputs {
            extracted.extend(o);
        }

        let passed = samples.len() as u64;
        let pass_fraction = if attempted == 0 { 0.0 } else { passed as f64 / attempted as f64 };
        let security = composable_epsilon(ex.t, ex.eps_hash, cfg.budget.m, cfg.budget.eps_fail, ex.l, ex.h);
        let rates = rates(
            cfg.adc.sample_rate_hz,
            cfg.hash_rate_hz,
            cfg.kappa_per_sample,
            cfg.adc.bits_b,
            ex.compression_ratio(),
            cfg.budget.eps_c,
        );
        Ok(RunReport {
            rounds_attempted: attempted,
            rounds_passed: passed,
            pass_fraction,
            raw_samples: samples,
            extracted_len: extracted.len() as u64,
            extracted_bits: extracted,
            blocks_hashed: blocks,
            shortfall: (blocks < ex.t).then_some(Shortfall { blocks_requested: ex.t, blocks_produced: blocks }),
            security,
            empirical_avg_rate: pass_fraction * rates.r_s,
            rates,
        })
    })
}

/// Uniform seed bits for the Toeplitz matrix from the simulation stream.
pub fn random_seed_bits(len: usize, seed: u64) -> BitString {
    let mut rng = stream_rng(seed, u64::MAX);
    let words = (0..len.div_ceil(64)).map(|_| rng.random::<u64>()).collect();
    BitString::from_words(words, len)
}

pub(crate) fn detector_for_counting(cfg: &ProtocolConfig) -> &DetectorModel {
    &cfg.pd_a
}
