//! Scenario files: sectioned TOML with unit-suffixed keys.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::PowerModel;
use crate::bench::{DetectorParams, HomConfig, HomPolarization};
use crate::emitter::{EmissionPlan, EmitterParams, ExcitationConfig, ExcitationMode};
use crate::error::{Error, Result};
use crate::qfc::{ConversionParams, SeedLaser};
use crate::units::{Duration, Frequency, Wavelength};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub run: RunSection,
    pub emitter: EmitterSection,
    pub excitation: ExcitationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversion: Option<ConversionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_laser: Option<SeedLaserSection>,
    pub bench: BenchSection,
    pub detectors: DetectorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_a: Option<DetectorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_b: Option<DetectorSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    pub n_pulses: u64,
    #[serde(default = "default_block_pulses")]
    pub block_pulses: u64,
}

fn default_block_pulses() -> u64 {
    EmissionPlan::default().block_pulses
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub t1_ns: f64,
    #[serde(default)]
    pub pure_dephasing_per_ns: f64,
    #[serde(default)]
    pub spectral_diffusion_rms_mhz: f64,
    #[serde(default = "default_diffusion_time")]
    pub spectral_diffusion_time_ns: f64,
    #[serde(default)]
    pub fss_ghz: f64,
    #[serde(default)]
    pub beat_visibility: f64,
    #[serde(default)]
    pub beat_phase_rad: f64,
    #[serde(default)]
    pub multiphoton_prob: f64,
    #[serde(default = "default_blink_on")]
    pub blink_on_ns: f64,
    #[serde(default)]
    pub blink_off_ns: f64,
    pub collection_efficiency: f64,
}

fn default_diffusion_time() -> f64 {
    1000.0
}

fn default_blink_on() -> f64 {
    900.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSection {
    pub mode: ExcitationMode,
    pub power_uw: f64,
    pub reference_power_uw: f64,
    pub rep_rate_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionSection {
    pub eta_nor_per_w_cm2: f64,
    pub length_cm: f64,
    pub eta_max_internal: f64,
    #[serde(default = "one")]
    pub input_optics: f64,
    pub in_coupling: f64,
    pub fibre_coupling: f64,
    pub filter_transmission: f64,
    pub noise_coeff_hz_per_mw: f64,
    pub seed_power_mw: f64,
    pub input_wavelength_nm: f64,
    pub bandpass_nm: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedLaserSection {
    pub wavelength_nm: f64,
    pub fsr_mhz: f64,
    pub envelope_fwhm_ghz: f64,
    pub n_modes: u32,
    #[serde(default = "default_fluctuation_time")]
    pub mode_fluctuation_time_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<f64>,
}

fn default_fluctuation_time() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Lifetime,
    Hbt,
    Hom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub measurements: Vec<Measurement>,
    /// Extra filter between the collection fibre and the bench.
    #[serde(default = "one")]
    pub input_transmission: f64,
    #[serde(default = "half")]
    pub splitter_ratio: f64,
    /// Defaults to one repetition period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hom_delay_ns: Option<f64>,
    #[serde(default = "half")]
    pub hom_splitter_ratio: f64,
    /// Defaults to ten lifetimes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing_window_ns: Option<f64>,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: f64,
    #[serde(default = "default_dark")]
    pub dark_rate_hz: f64,
    #[serde(default = "default_jitter")]
    pub jitter_ps: f64,
    #[serde(default = "default_dead")]
    pub dead_time_ns: f64,
}

fn default_dark() -> f64 {
    100.0
}

fn default_jitter() -> f64 {
    20.0
}

fn default_dead() -> f64 {
    30.0
}

impl DetectorSection {
    pub fn params(&self) -> DetectorParams {
        DetectorParams {
            efficiency: self.efficiency,
            dark_rate_hz: self.dark_rate_hz,
            jitter: Duration::from_ps(self.jitter_ps),
            dead_time: Duration::from_ns(self.dead_time_ns),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_bin")]
    pub bin_width_ps: f64,
    /// Correlation range, in periods each side.
    #[serde(default = "default_range")]
    pub range_periods: f64,
    #[serde(default = "default_side_peaks")]
    pub side_peaks: usize,
    /// Peak integration window as a fraction of the period.
    #[serde(default = "half")]
    pub peak_window: f64,
    #[serde(default = "default_decay_bin")]
    pub decay_bin_ps: f64,
    #[serde(default = "default_fit_start")]
    pub fit_start_ps: f64,
    #[serde(default = "default_fit_stop")]
    pub fit_stop_ps: f64,
}

fn default_bin() -> f64 {
    16.0
}

fn default_range() -> f64 {
    6.5
}

fn default_side_peaks() -> usize {
    3
}

fn default_decay_bin() -> f64 {
    4.0
}

fn default_fit_start() -> f64 {
    100.0
}

fn default_fit_stop() -> f64 {
    2600.0
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            bin_width_ps: default_bin(),
            range_periods: default_range(),
            side_peaks: default_side_peaks(),
            peak_window: half(),
            decay_bin_ps: default_decay_bin(),
            fit_start_ps: default_fit_start(),
            fit_stop_ps: default_fit_stop(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Values are seed powers in mW.
    SeedPower,
    /// Values are excitation powers in µW.
    ExcitationPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub pulses_per_point: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PowerModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EventOutput {
    #[default]
    None,
    Clicks,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub events: EventOutput,
    #[serde(default = "yes")]
    pub histograms: bool,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { events: EventOutput::None, histograms: true, plots: true }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let message = e.into_inner().message().trim().to_string();
            Error::config(if key == "." { String::from("<root>") } else { key }, message)
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// SHA-256 over the canonical JSON form, so comments, key order and
    /// number formatting do not matter.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serialises");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn emitter_params(&self) -> EmitterParams {
        let e = &self.emitter;
        EmitterParams {
            t1: Duration::from_ns(e.t1_ns),
            pure_dephasing_per_ns: e.pure_dephasing_per_ns,
            spectral_diffusion_rms: Frequency::from_mhz(e.spectral_diffusion_rms_mhz),
            spectral_diffusion_time: Duration::from_ns(e.spectral_diffusion_time_ns),
            fss: Frequency::from_ghz(e.fss_ghz),
            beat_visibility: e.beat_visibility,
            beat_phase: e.beat_phase_rad,
            multiphoton_prob: e.multiphoton_prob,
            blink_on: Duration::from_ns(e.blink_on_ns),
            blink_off: Duration::from_ns(e.blink_off_ns),
            collection_efficiency: e.collection_efficiency,
        }
    }

    pub fn excitation_config(&self) -> ExcitationConfig {
        let x = &self.excitation;
        ExcitationConfig {
            mode: x.mode,
            power: x.power_uw,
            reference_power: x.reference_power_uw,
            rep_rate: Frequency::from_mhz(x.rep_rate_mhz),
            n_pulses: self.run.n_pulses,
        }
    }

    pub fn period(&self) -> Duration {
        Frequency::from_mhz(self.excitation.rep_rate_mhz).period()
    }

    pub fn plan(&self) -> EmissionPlan {
        EmissionPlan { block_pulses: self.run.block_pulses }
    }

    pub fn conversion_params(&self) -> Result<Option<(ConversionParams, SeedLaser)>> {
        let Some(c) = &self.conversion else { return Ok(None) };
        let Some(s) = &self.seed_laser else {
            return Err(Error::config("seed_laser", "required when [conversion] is present"));
        };
        let nm = |key: &str, v: f64| Wavelength::from_nm(v).map_err(|e| Error::config(key, e.to_string()));
        let params = ConversionParams {
            eta_nor_per_w_cm2: c.eta_nor_per_w_cm2,
            length_cm: c.length_cm,
            eta_max_internal: c.eta_max_internal,
            input_optics: c.input_optics,
            in_coupling: c.in_coupling,
            fibre_coupling: c.fibre_coupling,
            filter_transmission: c.filter_transmission,
            noise_coeff_hz_per_mw: c.noise_coeff_hz_per_mw,
            seed_power_mw: c.seed_power_mw,
            input_wavelength: nm("conversion.input_wavelength_nm", c.input_wavelength_nm)?,
            bandpass: nm("conversion.bandpass_nm", c.bandpass_nm)?,
        };
        let laser = SeedLaser {
            wavelength: nm("seed_laser.wavelength_nm", s.wavelength_nm)?,
            fsr: Frequency::from_mhz(s.fsr_mhz),
            envelope_fwhm: Frequency::from_ghz(s.envelope_fwhm_ghz),
            n_modes: s.n_modes,
            mode_fluctuation_time: Duration::from_us(s.mode_fluctuation_time_us),
            concentration: s.concentration,
        };
        Ok(Some((params, laser)))
    }

    pub fn detector_params(&self) -> (DetectorParams, DetectorParams) {
        let a = self.detector_a.as_ref().unwrap_or(&self.detectors).params();
        let b = self.detector_b.as_ref().unwrap_or(&self.detectors).params();
        (a, b)
    }

    pub fn hom_config(&self, polarization: HomPolarization) -> HomConfig {
        let t1 = Duration::from_ns(self.emitter.t1_ns);
        let mut c = HomConfig::new(self.bench.hom_delay_ns.map_or(self.period(), Duration::from_ns), polarization, t1);
        c.splitter_ratio = self.bench.hom_splitter_ratio;
        if let Some(w) = self.bench.pairing_window_ns {
            c.pairing_window = Duration::from_ns(w);
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.name.is_empty() {
            return Err(Error::config("run.name", "must not be empty"));
        }
        if self.run.n_pulses == 0 {
            return Err(Error::config("run.n_pulses", "must be at least 1"));
        }
        let emitter = self.emitter_params();
        emitter.validate()?;
        let excitation = self.excitation_config();
        excitation.validate()?;
        self.plan().validate(&emitter, &excitation)?;
        if let Some((c, s)) = self.conversion_params()? {
            c.validate()?;
            s.validate()?;
            c.output_wavelength(&s).map_err(|e| Error::config("seed_laser.wavelength_nm", e.to_string()))?;
        } else if self.seed_laser.is_some() {
            return Err(Error::config("seed_laser", "only valid together with [conversion]"));
        }
        if !(0.0..=1.0).contains(&self.bench.input_transmission) {
            return Err(Error::config("bench.input_transmission", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.bench.splitter_ratio) {
            return Err(Error::config("bench.splitter_ratio", "must lie in [0, 1]"));
        }
        if self.bench.measurements.contains(&Measurement::Hom) {
            self.hom_config(HomPolarization::Parallel).validate()?;
        }
        let (a, b) = self.detector_params();
        a.validate("detector_a")?;
        b.validate("detector_b")?;
        let an = &self.analysis;
        if !(an.bin_width_ps >= 1.0) {
            return Err(Error::config("analysis.bin_width_ps", "must be at least 1 ps"));
        }
        if !(an.range_periods >= 1.0) {
            return Err(Error::config("analysis.range_periods", "must be at least one period"));
        }
        if !(an.peak_window > 0.0 && an.peak_window <= 1.0) {
            return Err(Error::config("analysis.peak_window", "must lie in (0, 1]"));
        }
        if an.side_peaks == 0 || an.side_peaks as f64 > an.range_periods - 0.5 * an.peak_window {
            return Err(Error::config("analysis.side_peaks", "must be positive and fit inside the correlation range"));
        }
        if !(an.decay_bin_ps > 0.0 && an.decay_bin_ps <= 25.0) {
            return Err(Error::config("analysis.decay_bin_ps", "must lie in (0, 25] ps"));
        }
        if !(an.fit_start_ps >= 0.0 && an.fit_stop_ps > an.fit_start_ps) {
            return Err(Error::config("analysis.fit_stop_ps", "fit window is empty"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.values.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::config("sweep.values", "must be a non-empty list of non-negative numbers"));
            }
            if s.pulses_per_point == 0 {
                return Err(Error::config("sweep.pulses_per_point", "must be at least 1"));
            }
            if s.kind == SweepKind::SeedPower && self.conversion.is_none() {
                return Err(Error::config("sweep.kind", "seed-power sweeps need [conversion]"));
            }
            if s.kind == SweepKind::ExcitationPower && s.model.is_none() {
                return Err(Error::config("sweep.model", "excitation-power sweeps need a model"));
            }
        }
        Ok(())
    }
}
