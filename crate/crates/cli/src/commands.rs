use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use sdi_qrng::certification::{min_entropy_sdi, BoundStatus, EntropyMode, IntWindow};
use sdi_qrng::extractor::BitString;
use sdi_qrng::models::{lambda_ideal, min_entropy_dd};
use sdi_qrng::optics::{conversion_factor, detect, quantize, sample_source, split, stream_rng, BeamSplitter, SourceModel};
use sdi_qrng::pipeline::{
    analyze_hmin_surface, bounds_at_power, eve_analytic_pass, eve_sweep, optimal_eve_power, run_protocol,
    solve_honest_mean, EveScenario, Shortfall,
};
use sdi_qrng::special::normal_interval;
use sdi_qrng::stats::{TestProportion, MIN_BITS, PASS_THRESHOLD};

use crate::config::{Config, SCHEMA_VERSION};
use crate::output::{opt, Report, Table};

/// Sequence length used for the statistical battery and for STS export.
pub const SEQUENCE_BITS: usize = 1_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeRow {
    pub power_mw: f64,
    pub r0: f64,
    pub kappa_bits: f64,
    pub status: BoundStatus,
    pub n_c_minus: i64,
    pub n_r_minus: u64,
    pub eps_plus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub rows: Vec<AnalyzeRow>,
}

impl Report for AnalyzeReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["power_mw", "r0", "kappa_bits", "status", "n_c_minus", "n_r_minus", "eps_plus"]);
        for r in &self.rows {
            t.rows.push(vec![
                r.power_mw.to_string(),
                r.r0.to_string(),
                r.kappa_bits.to_string(),
                r.status.to_string(),
                r.n_c_minus.to_string(),
                r.n_r_minus.to_string(),
                r.eps_plus.to_string(),
            ]);
        }
        t
    }
}

/// Certified min-entropy per sample over the configured power and `r0` grid.
pub fn analyze(cfg: &Config) -> Result<AnalyzeReport> {
    let p = cfg.optics_protocol()?;
    let powers_w: Vec<f64> = cfg.analyze.powers_mw.values().iter().map(|mw| mw * 1e-3).collect();
    let r0s = cfg.analyze.r0.values();
    let points = analyze_hmin_surface(&p, &powers_w, &r0s, &cfg.analysis_options())?;
    let rows = points
        .into_iter()
        .map(|h| AnalyzeRow {
            power_mw: h.power_w * 1e3,
            r0: h.r0,
            kappa_bits: h.kappa_per_sample,
            status: h.status,
            n_c_minus: h.n_c_minus,
            n_r_minus: h.n_r_minus,
            eps_plus: h.eps_plus,
        })
        .collect();
    Ok(AnalyzeReport { schema_version: SCHEMA_VERSION, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramRow {
    pub bin: i64,
    pub voltage_v: f64,
    pub simulated: f64,
    pub dd_model: f64,
    pub sdi_model: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub r0: f64,
    pub power_mw: f64,
    pub mean_photons_r: f64,
    pub n_r_minus: u64,
    pub n_ratio: f64,
    pub entropy_mode: EntropyMode,
    pub h_dd_bits: f64,
    pub h_sdi_bits: f64,
    pub lambda_bits: f64,
    pub lambda_ideal_bits: f64,
    pub samples: u64,
    pub histogram: Vec<HistogramRow>,
}

impl Report for CompareReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["bin", "voltage_v", "simulated", "dd_model", "sdi_model"]);
        t.meta("r0", self.r0);
        t.meta("power_mw", self.power_mw);
        t.meta("mean_photons_r", self.mean_photons_r);
        t.meta("n_r_minus", self.n_r_minus);
        t.meta("n_ratio", self.n_ratio);
        t.meta("h_dd_bits", self.h_dd_bits);
        t.meta("h_sdi_bits", self.h_sdi_bits);
        t.meta("lambda_bits", self.lambda_bits);
        t.meta("lambda_ideal_bits", self.lambda_ideal_bits);
        t.meta("samples", self.samples);
        for r in &self.histogram {
            t.rows.push(vec![
                r.bin.to_string(),
                r.voltage_v.to_string(),
                r.simulated.to_string(),
                r.dd_model.to_string(),
                r.sdi_model.to_string(),
            ]);
        }
        t
    }
}

/// Device-dependent versus SDI entropy at one splitter setting, with a
/// simulated difference histogram and both model curves on the ADC bins.
pub fn compare(cfg: &Config, seed: u64) -> Result<CompareReport> {
    let p = cfg.optics_protocol()?;
    let c = &cfg.compare;
    if !(c.r0 > 0.0 && c.r0 < 1.0) {
        bail!("config field `compare.r0`: must lie strictly inside (0, 1)");
    }
    let power_mw = c.power_mw.unwrap_or(cfg.source.power_mw);
    let (n_bar_r, n_r_minus) = match (c.mean_photons_r, c.n_ratio) {
        (Some(n), Some(ratio)) => (n, (n / ratio).floor() as u64),
        (Some(_), None) => bail!("config field `compare.n_ratio`: required when compare.mean_photons_r is set"),
        (None, ratio) => {
            let b = bounds_at_power(&p, power_mw * 1e-3, &cfg.analysis_options())?;
            match ratio {
                Some(ratio) => (b.mean_photons_r, (b.mean_photons_r / ratio).floor() as u64),
                None if b.status == BoundStatus::Ok => (b.mean_photons_r, b.n_r_minus),
                None => bail!(
                    "no certified n_R^- at {power_mw} mW (status {}); set compare.n_ratio or change the power",
                    b.status
                ),
            }
        }
    };
    if n_r_minus == 0 {
        bail!("n_R^- is zero; nothing to compare");
    }
    let n_r_minus = n_r_minus.min(n_bar_r.floor() as u64);

    let adc = &p.adc;
    let dv = adc.bin_width();
    let alpha = conversion_factor(&p.pd_a);
    let h_dd = min_entropy_dd(n_bar_r, c.r0, dv, alpha, f64::INFINITY)?.bits;
    let mode = if n_r_minus as f64 > 1e5 { EntropyMode::Gaussian } else { EntropyMode::Exact };
    let h_sdi = min_entropy_sdi(1, n_r_minus, c.r0, dv, alpha, mode)?.h_min_per_sample;

    let source = SourceModel::coherent(n_bar_r).with_rin(cfg.source.rin_fraction);
    let bs = BeamSplitter::new(c.r0)?;
    let offset = conversion_factor(&p.pd_a) * (c.r0 * n_bar_r).min(p.pd_a.sat_photons as f64)
        - conversion_factor(&p.pd_b) * ((1.0 - c.r0) * n_bar_r).min(p.pd_b.sat_photons as f64);
    let mut rng = stream_rng(seed, 0);
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for _ in 0..c.samples {
        let (a, b) = split(sample_source(&source, &mut rng), &bs, &mut rng);
        let v = detect(a, &p.pd_a, &mut rng) - detect(b, &p.pd_b, &mut rng) - offset;
        *counts.entry(quantize(v, adc)).or_insert(0) += 1;
    }

    let (rail_lo, rail_hi) = adc.bin_range();
    let var_photons = 4.0 * c.r0 * (1.0 - c.r0);
    let sigma_dd = (alpha * alpha * var_photons * n_bar_r + p.pd_a.sigma_gamma_v.powi(2) + p.pd_b.sigma_gamma_v.powi(2)).sqrt();
    let sigma_sdi = alpha * (var_photons * n_r_minus as f64).sqrt();
    let bin_prob = |j: i64, sigma: f64| {
        let lo = if j == rail_lo { f64::NEG_INFINITY } else { dv * (j as f64 - 0.5) / sigma };
        let hi = if j == rail_hi { f64::INFINITY } else { dv * (j as f64 + 0.5) / sigma };
        normal_interval(lo, hi)
    };
    let histogram = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|j| HistogramRow {
                bin: j,
                voltage_v: adc.bin_center(j),
                simulated: counts.get(&j).copied().unwrap_or(0) as f64 / c.samples as f64,
                dd_model: bin_prob(j, sigma_dd),
                sdi_model: bin_prob(j, sigma_sdi),
            })
            .collect(),
        _ => Vec::new(),
    };

    Ok(CompareReport {
        schema_version: SCHEMA_VERSION,
        r0: c.r0,
        power_mw,
        mean_photons_r: n_bar_r,
        n_r_minus,
        n_ratio: n_bar_r / n_r_minus as f64,
        entropy_mode: mode,
        h_dd_bits: h_dd,
        h_sdi_bits: h_sdi,
        lambda_bits: h_dd - h_sdi,
        lambda_ideal_bits: lambda_ideal(n_bar_r, n_r_minus as f64)?,
        samples: c.samples,
        histogram,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub mean_photons: f64,
    pub cert_window_bins: IntWindow,
    pub rounds_attempted: u64,
    pub rounds_passed: u64,
    pub pass_fraction: f64,
    pub blocks_requested: u64,
    pub blocks_hashed: u64,
    pub extracted_bits: u64,
    pub shortfall: Option<Shortfall>,
    pub compression_ratio: f64,
    pub eps_hash: f64,
    pub eps_fail: f64,
    pub eps_l: f64,
    pub eps_total: f64,
    pub r_g_bps: f64,
    pub r_s_bps: f64,
    pub r_avg_bps: f64,
    pub empirical_avg_rate_bps: f64,
}

impl Report for RunSummary {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["field", "value"]);
        let shortfall = self.shortfall.map(|s| format!("{}/{}", s.blocks_produced, s.blocks_requested));
        let fields: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("mean_photons", self.mean_photons.to_string()),
            ("cert_window_lo", self.cert_window_bins.lo.to_string()),
            ("cert_window_hi", self.cert_window_bins.hi.to_string()),
            ("rounds_attempted", self.rounds_attempted.to_string()),
            ("rounds_passed", self.rounds_passed.to_string()),
            ("pass_fraction", self.pass_fraction.to_string()),
            ("blocks_requested", self.blocks_requested.to_string()),
            ("blocks_hashed", self.blocks_hashed.to_string()),
            ("extracted_bits", self.extracted_bits.to_string()),
            ("shortfall", opt(shortfall)),
            ("compression_ratio", self.compression_ratio.to_string()),
            ("eps_hash", self.eps_hash.to_string()),
            ("eps_fail", self.eps_fail.to_string()),
            ("eps_l", self.eps_l.to_string()),
            ("eps_total", self.eps_total.to_string()),
            ("r_g_bps", self.r_g_bps.to_string()),
            ("r_s_bps", self.r_s_bps.to_string()),
            ("r_avg_bps", self.r_avg_bps.to_string()),
            ("empirical_avg_rate_bps", self.empirical_avg_rate_bps.to_string()),
        ];
        t.rows = fields.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
        t
    }
}

/// Runs the protocol and returns the report together with the extracted bits.
pub fn run(cfg: &Config, seed: u64) -> Result<(RunSummary, BitString)> {
    let p = cfg.protocol(seed)?;
    let r = run_protocol(&p, cfg.run.max_rounds, seed, cfg.run.workers)?;
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        seed,
        mean_photons: p.source.mean(),
        cert_window_bins: p.cert_window,
        rounds_attempted: r.rounds_attempted,
        rounds_passed: r.rounds_passed,
        pass_fraction: r.pass_fraction,
        blocks_requested: p.extractor.t,
        blocks_hashed: r.blocks_hashed,
        extracted_bits: r.extracted_len,
        shortfall: r.shortfall,
        compression_ratio: r.security.compression_r,
        eps_hash: p.extractor.eps_hash,
        eps_fail: p.budget.eps_fail,
        eps_l: r.security.eps_l,
        eps_total: r.security.eps_total,
        r_g_bps: r.rates.r_g,
        r_s_bps: r.rates.r_s,
        r_avg_bps: r.rates.r_avg,
        empirical_avg_rate_bps: r.empirical_avg_rate,
    };
    Ok((summary, r.extracted_bits))
}

/// Writes the bits as ASCII `0`/`1`, one sequence of [`SEQUENCE_BITS`] per
/// line, the layout the NIST STS reads with its ASCII input option.
pub fn write_sts_ascii(bits: &BitString, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    let mut line = Vec::with_capacity(SEQUENCE_BITS + 1);
    for (i, b) in bits.iter().enumerate() {
        line.push(if b { b'1' } else { b'0' });
        if (i + 1) % SEQUENCE_BITS == 0 || i + 1 == bits.len() {
            line.push(b'\n');
            w.write_all(&line)?;
            line.clear();
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackPoint {
    pub eve_power_mw: f64,
    pub pass_fraction: f64,
    pub std_error: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackFit {
    /// Coefficient of determination of the analytic curve against the sweep.
    pub r_squared: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub schema_version: u32,
    pub r_eve: f64,
    pub honest_mean_photons: f64,
    pub optimal_eve_power_mw: f64,
    pub analytic_peak: f64,
    pub rounds_per_point: u64,
    pub points: Vec<AttackPoint>,
    pub fit: Option<AttackFit>,
}

impl Report for AttackReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["eve_power_mw", "pass_fraction", "std_error", "analytic"]);
        t.meta("r_eve", self.r_eve);
        t.meta("honest_mean_photons", self.honest_mean_photons);
        t.meta("optimal_eve_power_mw", self.optimal_eve_power_mw);
        t.meta("analytic_peak", self.analytic_peak);
        t.meta("rounds_per_point", self.rounds_per_point);
        t.meta("r_squared", opt(self.fit.as_ref().map(|f| f.r_squared)));
        t.meta("rmse", opt(self.fit.as_ref().map(|f| f.rmse)));
        for p in &self.points {
            t.rows.push(vec![
                p.eve_power_mw.to_string(),
                p.pass_fraction.to_string(),
                p.std_error.to_string(),
                p.analytic.to_string(),
            ]);
        }
        t
    }
}

fn default_sweep(scenario: &EveScenario, cfg: &sdi_qrng::pipeline::ProtocolConfig, best: f64) -> Vec<f64> {
    let edge = |from: f64, to: f64| {
        let (mut a, mut b) = (from, to);
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if eve_analytic_pass(scenario, cfg, mid) < 0.01 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let lo = edge(0.0, best);
    let hi = edge(2.0 * best, best);
    let span = hi - lo;
    let mut powers: Vec<f64> =
        (0..17).map(|i| (lo - 0.15 * span + 1.3 * span * i as f64 / 16.0).max(0.0)).collect();
    powers.push(best);
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    powers
}

/// Light-injection sweep: empirical pass fraction against injected power,
/// compared with the analytic completeness curve.
pub fn attack(cfg: &Config, seed: u64) -> Result<AttackReport> {
    let p = cfg.protocol(seed)?;
    let a = &cfg.attack;
    let honest = match a.honest_power_mw {
        Some(mw) => cfg.photons_at(mw),
        None => solve_honest_mean(&p, a.r_eve, a.honest_pass)?,
    };
    let mut scenario = EveScenario {
        honest: SourceModel::coherent(honest),
        eve_power_w: Vec::new(),
        bs_eve: BeamSplitter::new(a.r_eve)?,
    };
    let best = optimal_eve_power(&scenario, &p);
    scenario.eve_power_w = if a.eve_powers_mw.is_empty() {
        default_sweep(&scenario, &p, best)
    } else {
        a.eve_powers_mw.iter().map(|mw| mw * 1e-3).collect()
    };
    let sweep = eve_sweep(&scenario, &p, a.rounds_per_point, seed)?;
    let points: Vec<AttackPoint> = sweep
        .iter()
        .map(|e| AttackPoint {
            eve_power_mw: e.eve_power_w * 1e3,
            pass_fraction: e.pass_fraction,
            std_error: e.std_error,
            analytic: e.analytic,
        })
        .collect();
    let fit = (points.len() >= 2).then(|| {
        let n = points.len() as f64;
        let mean = points.iter().map(|q| q.pass_fraction).sum::<f64>() / n;
        let ss_tot: f64 = points.iter().map(|q| (q.pass_fraction - mean).powi(2)).sum();
        let ss_res: f64 = points.iter().map(|q| (q.pass_fraction - q.analytic).powi(2)).sum();
        AttackFit {
            r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN },
            rmse: (ss_res / n).sqrt(),
        }
    });
    Ok(AttackReport {
        schema_version: SCHEMA_VERSION,
        r_eve: a.r_eve,
        honest_mean_photons: honest,
        optimal_eve_power_mw: best * 1e3,
        analytic_peak: eve_analytic_pass(&scenario, &p, best),
        rounds_per_point: a.rounds_per_point,
        points,
        fit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsRow {
    pub sequence: usize,
    pub test: String,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub bits: u64,
    pub sequence_bits: usize,
    pub sequences: usize,
    pub unused_bits: u64,
    pub pass_threshold: f64,
    pub results: Vec<StatsRow>,
    pub proportions: Vec<TestProportion>,
}

impl Report for StatsReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["sequence", "test", "p_value", "passed"]);
        t.meta("bits", self.bits);
        t.meta("sequences", self.sequences);
        t.meta("pass_threshold", self.pass_threshold);
        for p in &self.proportions {
            t.meta(format!("proportion.{}", p.test), format!("{}/{}", p.passed, p.sequences));
        }
        for r in &self.results {
            t.rows.push(vec![r.sequence.to_string(), r.test.clone(), r.p_value.to_string(), r.passed.to_string()]);
        }
        t
    }
}

/// Runs the battery on consecutive 1 Mb sequences of `bits`.
pub fn stats(bits: &BitString) -> Result<StatsReport> {
    if bits.len() < MIN_BITS {
        bail!("input holds {} bits; the battery needs at least {MIN_BITS}", bits.len());
    }
    let k = bits.len() / SEQUENCE_BITS;
    let (per_seq, proportions) = sdi_qrng::stats::battery_proportions(bits, SEQUENCE_BITS);
    debug_assert_eq!(per_seq.len(), k);
    let results = per_seq
        .into_iter()
        .enumerate()
        .flat_map(|(i, entries)| {
            entries.into_iter().map(move |e| StatsRow { sequence: i, test: e.test, p_value: e.p_value, passed: e.passed })
        })
        .collect();
    Ok(StatsReport {
        schema_version: SCHEMA_VERSION,
        bits: bits.len() as u64,
        sequence_bits: SEQUENCE_BITS,
        sequences: k,
        unused_bits: (bits.len() - k * SEQUENCE_BITS) as u64,
        pass_threshold: PASS_THRESHOLD,
        results,
        proportions,
    })
}

/// Reads a packed bitstream; `bits` trims the final byte's padding.
pub fn read_bitstream(path: &Path, bits: Option<usize>) -> Result<BitString> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let len = bits.unwrap_or(bytes.len() * 8);
    Ok(BitString::from_bytes(&bytes, len)?)
}
