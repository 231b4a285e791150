//! TOML run configuration. Every physical quantity carries its unit in the
//! key name. Any key may be omitted; the document is laid over the reference
//! setup, so a file holding only `schema_version = 1` is complete.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use sdi_qrng::certification::{solve_cert_window, IntWindow, SecurityBudget};
use sdi_qrng::extractor::{BitString, ExtractorConfig};
use sdi_qrng::optics::{conversion_factor, mean_photons_per_window, AdcModel, BeamSplitter, DetectorModel, SourceModel};
use sdi_qrng::pipeline::{random_seed_bits, AnalysisOptions, Coupling, ProtocolConfig};
use sdi_qrng::presets;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub source: SourceSection,
    pub splitters: SplitterSection,
    pub pd_cert: DetectorSection,
    pub pd_a: DetectorSection,
    pub pd_b: DetectorSection,
    pub adc: AdcSection,
    pub security: SecuritySection,
    pub extractor: ExtractorSection,
    pub run: RunSection,
    pub analyze: AnalyzeSection,
    pub compare: CompareSection,
    pub attack: AttackSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            source: SourceSection::default(),
            splitters: SplitterSection::default(),
            pd_cert: DetectorSection::certification(),
            pd_a: DetectorSection::balanced(),
            pd_b: DetectorSection::balanced(),
            adc: AdcSection::default(),
            security: SecuritySection::default(),
            extractor: ExtractorSection::default(),
            run: RunSection::default(),
            analyze: AnalyzeSection::default(),
            compare: CompareSection::default(),
            attack: AttackSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKindName {
    Coherent,
    Fock,
    ThermalAse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKindName,
    /// Optical power at the source, converted to photons per PD-A window.
    pub power_mw: f64,
    /// Fock sources only.
    pub photons: Option<u64>,
    pub modes: Option<f64>,
    pub polarization: Option<u8>,
    pub rin_fraction: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            kind: SourceKindName::Coherent,
            power_mw: presets::RUN_POWER_W * 1e3,
            photons: None,
            modes: None,
            polarization: None,
            rin_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitterSection {
    /// Reflectivity toward the certification detector.
    pub r1: f64,
    /// Reflectivity of the generation splitter toward PD-A.
    pub r0: f64,
}

impl Default for SplitterSection {
    fn default() -> Self {
        Self { r1: presets::R1, r0: presets::R0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub bandwidth_mhz: f64,
    pub responsivity_a_per_w: f64,
    pub gain_v_per_a: f64,
    pub wavelength_nm: f64,
    pub noise_mv: f64,
    pub saturation_mw: f64,
}

impl DetectorSection {
    fn from_model(d: &DetectorModel, saturation_w: f64) -> Self {
        Self {
            bandwidth_mhz: d.bandwidth_hz / 1e6,
            responsivity_a_per_w: d.responsivity_a_per_w,
            gain_v_per_a: d.gain_ohm,
            wavelength_nm: d.wavelength_m * 1e9,
            noise_mv: d.sigma_gamma_v * 1e3,
            saturation_mw: saturation_w * 1e3,
        }
    }

    pub fn certification() -> Self {
        Self::from_model(&presets::certification_pd(), 0.6e-3)
    }

    pub fn balanced() -> Self {
        Self::from_model(&presets::balanced_pd(), 1.5e-3)
    }

    fn model(&self) -> DetectorModel {
        DetectorModel {
            bandwidth_hz: self.bandwidth_mhz * 1e6,
            responsivity_a_per_w: self.responsivity_a_per_w,
            gain_ohm: self.gain_v_per_a,
            wavelength_m: self.wavelength_nm * 1e-9,
            sigma_gamma_v: self.noise_mv * 1e-3,
            sat_photons: 1,
        }
        .with_saturation_power(self.saturation_mw * 1e-3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcSection {
    pub bits: u32,
    pub enob: f64,
    pub v_min_v: f64,
    pub v_max_v: f64,
    pub sample_rate_msps: f64,
}

impl Default for AdcSection {
    fn default() -> Self {
        let a = presets::adc();
        Self { bits: a.bits_b, enob: a.enob, v_min_v: a.v_min, v_max_v: a.v_max, sample_rate_msps: a.sample_rate_hz / 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    pub eps_fail: f64,
    pub eps_c: f64,
    pub kappa_per_sample_bits: f64,
}

impl Default for SecuritySection {
    fn default() -> Self {
        Self { eps_fail: presets::EPS_FAIL, eps_c: presets::EPS_C, kappa_per_sample_bits: presets::KAPPA_PER_SAMPLE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorSection {
    pub output_bits: usize,
    pub samples_per_block: usize,
    pub blocks: u64,
    pub eps_hash: f64,
    pub hash_rate_mhz: f64,
    /// Packed Toeplitz seed, MSB first; drawn from `--seed` when absent.
    pub seed_file: Option<PathBuf>,
}

impl Default for ExtractorSection {
    fn default() -> Self {
        Self {
            output_bits: presets::OUTPUT_BITS,
            samples_per_block: presets::SAMPLES_PER_HASH,
            blocks: presets::HASH_CYCLES,
            eps_hash: presets::EPS_HASH,
            hash_rate_mhz: presets::HASH_RATE_HZ / 1e6,
            seed_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Upper limit on simulated acquisition windows.
    pub max_rounds: u64,
    pub coupling: Coupling,
    /// Overrides the certification window solved from `security.eps_c`.
    pub cert_window_bins: Option<[i64; 2]>,
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { max_rounds: 1_000_000_000, coupling: Coupling::Ac, cert_window_bins: None, workers: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub spacing: Spacing,
}

fn linear() -> Spacing {
    Spacing::Linear
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.from];
        }
        (0..self.points)
            .map(|i| {
                let f = i as f64 / (self.points - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.from + f * (self.to - self.from),
                    Spacing::Log => (self.from.ln() + f * (self.to.ln() - self.from.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Either an explicit list or a generated sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Sweep(Sweep),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Sweep(s) => s.values(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub powers_mw: Grid,
    pub r0: Grid,
    pub eps_c: f64,
    pub eps_fail: f64,
    pub eps_minus_share: f64,
    pub n_r_plus: Option<u64>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        Self {
            powers_mw: Grid::Sweep(Sweep { from: 1e-2, to: 10.0, points: 37, spacing: Spacing::Log }),
            r0: Grid::Sweep(Sweep { from: 0.0, to: 1.0, points: 41, spacing: Spacing::Linear }),
            eps_c: o.eps_c,
            eps_fail: o.eps_fail,
            eps_minus_share: o.eps_minus_share,
            n_r_plus: o.n_r_plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub r0: f64,
    /// Defaults to `source.power_mw`.
    pub power_mw: Option<f64>,
    /// Overrides the mean photon number in the randomness arm.
    pub mean_photons_r: Option<f64>,
    /// Sets `n_R^-` to `n̄_R / n_ratio` instead of certifying it.
    pub n_ratio: Option<f64>,
    pub samples: u64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { r0: 0.7, power_mw: None, mean_photons_r: None, n_ratio: None, samples: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub r_eve: f64,
    /// Honest power is tuned so the certification passes this fraction without Eve.
    pub honest_pass: f64,
    pub honest_power_mw: Option<f64>,
    /// Empty: 17 points across the analytic pass curve plus its peak.
    pub eve_powers_mw: Vec<f64>,
    pub rounds_per_point: u64,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            r_eve: presets::R_EVE,
            honest_pass: 0.005,
            honest_power_mw: None,
            eve_powers_mw: Vec::new(),
            rounds_per_point: 100_000,
        }
    }
}

/// Sections merge key by key; values, including inline sweep tables, replace whole.
fn overlay(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(section)), toml::Value::Table(u)) => section.extend(u),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses a TOML document; errors name the offending key path.
pub fn parse(text: &str) -> Result<Config> {
    let user: toml::Table = toml::from_str(text).context("malformed TOML")?;
    if !user.contains_key("schema_version") {
        bail!("config field `schema_version`: missing (expected {SCHEMA_VERSION})");
    }
    let mut merged = toml::Table::try_from(Config::default()).context("serializing defaults")?;
    overlay(&mut merged, user);
    let cfg: Config = serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config field `{path}`: {}", e.into_inner())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// The reference setup as a TOML document.
pub fn default_toml() -> String {
    toml::to_string_pretty(&Config::default()).expect("defaults serialize")
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

fn positive(path: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("config field `{path}`: must be a positive number, got {v}");
    }
    Ok(())
}

fn probability(path: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        bail!("config field `{path}`: must lie in [0, 1], got {v}");
    }
    Ok(())
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("config field `schema_version`: expected {SCHEMA_VERSION}, got {}", self.schema_version);
        }
        if !(self.source.power_mw >= 0.0) {
            bail!("config field `source.power_mw`: must be >= 0");
        }
        if self.source.kind == SourceKindName::Fock && self.source.photons.is_none() {
            bail!("config field `source.photons`: required for a fock source");
        }
        if self.source.kind == SourceKindName::ThermalAse && self.source.modes.is_none() {
            bail!("config field `source.modes`: required for a thermal_ase source");
        }
        probability("splitters.r1", self.splitters.r1)?;
        probability("splitters.r0", self.splitters.r0)?;
        for (name, d) in [("pd_cert", &self.pd_cert), ("pd_a", &self.pd_a), ("pd_b", &self.pd_b)] {
            positive(&format!("{name}.bandwidth_mhz"), d.bandwidth_mhz)?;
            positive(&format!("{name}.responsivity_a_per_w"), d.responsivity_a_per_w)?;
            positive(&format!("{name}.gain_v_per_a"), d.gain_v_per_a)?;
            positive(&format!("{name}.wavelength_nm"), d.wavelength_nm)?;
            positive(&format!("{name}.saturation_mw"), d.saturation_mw)?;
            if !(d.noise_mv >= 0.0) {
                bail!("config field `{name}.noise_mv`: must be >= 0");
            }
        }
        positive("adc.sample_rate_msps", self.adc.sample_rate_msps)?;
        if !(self.adc.enob > 0.0 && self.adc.enob <= self.adc.bits as f64) {
            bail!("config field `adc.enob`: must lie in (0, adc.bits]");
        }
        if !(self.adc.v_max_v > self.adc.v_min_v) {
            bail!("config field `adc.v_max_v`: must exceed adc.v_min_v");
        }
        probability("security.eps_fail", self.security.eps_fail)?;
        probability("security.eps_c", self.security.eps_c)?;
        probability("extractor.eps_hash", self.extractor.eps_hash)?;
        positive("extractor.hash_rate_mhz", self.extractor.hash_rate_mhz)?;
        probability("analyze.eps_c", self.analyze.eps_c)?;
        probability("analyze.eps_fail", self.analyze.eps_fail)?;
        probability("analyze.eps_minus_share", self.analyze.eps_minus_share)?;
        probability("compare.r0", self.compare.r0)?;
        probability("attack.r_eve", self.attack.r_eve)?;
        probability("attack.honest_pass", self.attack.honest_pass)?;
        Ok(())
    }

    pub fn adc_model(&self) -> AdcModel {
        AdcModel {
            bits_b: self.adc.bits,
            enob: self.adc.enob,
            v_min: self.adc.v_min_v,
            v_max: self.adc.v_max_v,
            sample_rate_hz: self.adc.sample_rate_msps * 1e6,
        }
    }

    pub fn pd_cert_model(&self) -> DetectorModel {
        self.pd_cert.model()
    }

    pub fn pd_a_model(&self) -> DetectorModel {
        self.pd_a.model()
    }

    pub fn pd_b_model(&self) -> DetectorModel {
        self.pd_b.model()
    }

    /// Mean photons per acquisition window at `power_mw`, counted over PD-A's bandwidth.
    pub fn photons_at(&self, power_mw: f64) -> f64 {
        mean_photons_per_window(power_mw * 1e-3, &self.pd_a_model())
    }

    pub fn source_model(&self) -> SourceModel {
        let n = self.photons_at(self.source.power_mw);
        let s = &self.source;
        let model = match s.kind {
            SourceKindName::Coherent => SourceModel::coherent(n),
            SourceKindName::Fock => SourceModel::fock(s.photons.unwrap_or(0)),
            SourceKindName::ThermalAse => SourceModel::thermal_ase(n, s.modes.unwrap_or(1.0), s.polarization.unwrap_or(1)),
        };
        model.with_rin(s.rin_fraction)
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            eps_c: self.analyze.eps_c,
            eps_fail: self.analyze.eps_fail,
            eps_minus_share: self.analyze.eps_minus_share,
            n_r_plus: self.analyze.n_r_plus,
        }
    }

    pub fn extractor_config(&self, seed: u64) -> Result<ExtractorConfig> {
        let ex = &self.extractor;
        let b = self.adc.bits;
        let l = ex.output_bits;
        let h = ex.samples_per_block * b as usize;
        let seed_len = (l + h).saturating_sub(1);
        let seed_bits = match &ex.seed_file {
            Some(path) => {
                let bytes = std::fs::read(path).with_context(|| format!("reading seed file {}", path.display()))?;
                BitString::from_bytes(&bytes, seed_len)
                    .with_context(|| format!("config field `extractor.seed_file`: expected {} bytes", seed_len.div_ceil(8)))?
            }
            None => random_seed_bits(seed_len, seed),
        };
        Ok(ExtractorConfig { l, h, m: ex.samples_per_block, b, seed: seed_bits, eps_hash: ex.eps_hash, t: ex.blocks })
    }

    fn cert_window(&self, source: &SourceModel) -> Result<IntWindow> {
        if let Some([lo, hi]) = self.run.cert_window_bins {
            return Ok(IntWindow::new(lo, hi));
        }
        let pd = self.pd_cert_model();
        let adc = self.adc_model();
        let alpha = conversion_factor(&pd);
        let r1 = self.splitters.r1;
        let n_c = r1 * source.mean();
        let var_c = r1 * r1 * source.variance() + r1 * (1.0 - r1) * source.mean();
        let sigma = (pd.sigma_gamma_v.powi(2) + alpha * alpha * var_c).sqrt();
        let (lo, hi) = adc.bin_range();
        solve_cert_window(self.security.eps_c, alpha * n_c, sigma, adc.bin_width(), IntWindow::new(lo, hi))
            .context("no certification window reaches the completeness target; lower source.power_mw or set run.cert_window_bins")
    }

    /// The protocol configuration for `run` and `attack`.
    pub fn protocol(&self, seed: u64) -> Result<ProtocolConfig> {
        let source = self.source_model();
        let window = self.cert_window(&source)?;
        self.assemble(source, window, self.extractor_config(seed)?)
    }

    /// Optics, detectors and ADC only: the certification window spans the
    /// rails and the Toeplitz seed is a placeholder.
    pub fn optics_protocol(&self) -> Result<ProtocolConfig> {
        let (lo, hi) = self.adc_model().bin_range();
        let ex = &self.extractor;
        let h = ex.samples_per_block * self.adc.bits as usize;
        let placeholder = ExtractorConfig {
            l: ex.output_bits,
            h,
            m: ex.samples_per_block,
            b: self.adc.bits,
            seed: BitString::zeros((ex.output_bits + h).saturating_sub(1)),
            eps_hash: ex.eps_hash,
            t: ex.blocks,
        };
        self.assemble(self.source_model(), IntWindow::new(lo, hi), placeholder)
    }

    fn assemble(&self, source: SourceModel, cert_window: IntWindow, extractor: ExtractorConfig) -> Result<ProtocolConfig> {
        let cfg = ProtocolConfig {
            source,
            bs_cert: BeamSplitter::new(self.splitters.r1)?,
            bs_gen: BeamSplitter::new(self.splitters.r0)?,
            pd_cert: self.pd_cert_model(),
            pd_a: self.pd_a_model(),
            pd_b: self.pd_b_model(),
            adc: self.adc_model(),
            budget: SecurityBudget::from_eps_fail(
                self.security.eps_fail,
                self.extractor.samples_per_block as u32,
                self.security.eps_c,
            )?,
            extractor,
            cert_window,
            coupling: self.run.coupling,
            kappa_per_sample: self.security.kappa_per_sample_bits,
            hash_rate_hz: self.extractor.hash_rate_mhz * 1e6,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
