//! Quantum-dot emitter: parameters, pulsed excitation and photon emission.

mod broadening;
mod simulate;

pub use broadening::{
    calibrate_broadening, gaussian_expectation, homogeneous_fwhm, mean_pair_overlap,
    ou_difference_rms, voigt_fwhm, Broadening,
};
pub use simulate::{emit_block, simulate_emission, EmissionPlan, OuProcess};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Duration, Frequency};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Radiative lifetime.
    pub t1: Duration,
    /// Fast pure-dephasing rate in 1/ns. Adds `rate/π` GHz to the homogeneous FWHM.
    pub pure_dephasing_per_ns: f64,
    /// RMS amplitude of the slow (Ornstein–Uhlenbeck) spectral wandering.
    pub spectral_diffusion_rms: Frequency,
    /// Correlation time of the spectral wandering.
    pub spectral_diffusion_time: Duration,
    /// Fine-structure splitting, seen as an intensity beat.
    pub fss: Frequency,
    pub beat_visibility: f64,
    pub beat_phase: f64,
    /// Probability that an excited pulse emits a second photon.
    pub multiphoton_prob: f64,
    /// Mean dwell time in the bright state.
    pub blink_on: Duration,
    /// Mean dwell time in the dark state; zero disables blinking.
    pub blink_off: Duration,
    /// Probability that an emitted photon reaches the collection fibre.
    pub collection_efficiency: f64,
}

impl EmitterParams {
    /// Ideal transform-limited emitter with unit collection, no blinking and
    /// no multiphoton emission.
    pub fn ideal(t1: Duration) -> Self {
        EmitterParams {
            t1,
            pure_dephasing_per_ns: 0.0,
            spectral_diffusion_rms: Frequency::ZERO,
            spectral_diffusion_time: Duration::from_ns(1000.0),
            fss: Frequency::ZERO,
            beat_visibility: 0.0,
            beat_phase: 0.0,
            multiphoton_prob: 0.0,
            blink_on: Duration::from_ns(1000.0),
            blink_off: Duration::ZERO,
            collection_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("emitter.{name}"), format!("must lie in [0, 1], got {v}")))
            }
        };
        if !(self.t1.ps() > 0.0) || !self.t1.ps().is_finite() {
            return Err(Error::config("emitter.t1_ns", "must be positive"));
        }
        if !(self.pure_dephasing_per_ns >= 0.0) {
            return Err(Error::config("emitter.pure_dephasing_per_ns", "must be non-negative"));
        }
        if !(self.spectral_diffusion_rms.ghz() >= 0.0) {
            return Err(Error::config("emitter.spectral_diffusion_rms_mhz", "must be non-negative"));
        }
        if !(self.spectral_diffusion_time.ps() >= 0.0) {
            return Err(Error::config("emitter.spectral_diffusion_time_ns", "must be non-negative"));
        }
        if !(self.fss.ghz() >= 0.0) {
            return Err(Error::config("emitter.fss_ghz", "must be non-negative"));
        }
        prob("beat_visibility", self.beat_visibility)?;
        prob("collection_efficiency", self.collection_efficiency)?;
        prob("multiphoton_prob", self.multiphoton_prob)?;
        if self.multiphoton_prob >= 0.5 {
            return Err(Error::config("emitter.multiphoton_prob", "must be below 0.5"));
        }
        if !(self.blink_off.ps() >= 0.0) {
            return Err(Error::config("emitter.blink_off_ns", "must be non-negative"));
        }
        if self.blink_off.ps() > 0.0 && !(self.blink_on.ps() > 0.0) {
            return Err(Error::config("emitter.blink_on_ns", "must be positive when blinking"));
        }
        if !self.total_fwhm().ghz().is_finite() {
            return Err(Error::config("emitter", "linewidth is not finite"));
        }
        Ok(())
    }

    /// Stationary probability of the bright state.
    pub fn on_fraction(&self) -> f64 {
        if self.blink_off.ps() <= 0.0 {
            1.0
        } else {
            self.blink_on.ps() / (self.blink_on.ps() + self.blink_off.ps())
        }
    }

    /// Correlation time of the blinking telegraph signal.
    pub fn blink_correlation_time(&self) -> Duration {
        if self.blink_off.ps() <= 0.0 {
            return Duration::ZERO;
        }
        let (on, off) = (self.blink_on.ps(), self.blink_off.ps());
        Duration::from_ps(on * off / (on + off))
    }

    /// Long-time linewidth: Voigt of the homogeneous Lorentzian and the
    /// spectral-diffusion Gaussian.
    pub fn total_fwhm(&self) -> Frequency {
        voigt_fwhm(
            homogeneous_fwhm(self.t1, self.pure_dephasing_per_ns),
            self.spectral_diffusion_rms,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationMode {
    /// Resonant pulses; population follows a Rabi oscillation in pulse area.
    Resonant,
    /// Above-band pulses; population saturates with power.
    OffResonant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationConfig {
    pub mode: ExcitationMode,
    /// Excitation power, same unit as `reference_power`.
    pub power: f64,
    /// π-pulse power (resonant) or saturation power (off-resonant).
    pub reference_power: f64,
    pub rep_rate: Frequency,
    pub n_pulses: u64,
}

impl ExcitationConfig {
    pub fn resonant_pi(rep_rate: Frequency, n_pulses: u64) -> Self {
        ExcitationConfig {
            mode: ExcitationMode::Resonant,
            power: 1.0,
            reference_power: 1.0,
            rep_rate,
            n_pulses,
        }
    }

    pub fn period(&self) -> Duration {
        self.rep_rate.period()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate.ghz() > 0.0) {
            return Err(Error::config("excitation.rep_rate_mhz", "must be positive"));
        }
        if !(self.power >= 0.0) {
            return Err(Error::config("excitation.power_uw", "must be non-negative"));
        }
        if !(self.reference_power > 0.0) {
            return Err(Error::config("excitation.reference_power_uw", "must be positive"));
        }
        if self.n_pulses == 0 {
            return Err(Error::config("run.n_pulses", "must be at least 1"));
        }
        Ok(())
    }
}

/// Probability that one pulse leaves the dot excited.
pub fn excitation_probability(config: &ExcitationConfig) -> Result<f64> {
    if !(config.power >= 0.0) {
        return Err(Error::domain(format!("excitation power must be non-negative, got {}", config.power)));
    }
    if !(config.reference_power > 0.0) {
        return Err(Error::domain("reference power must be positive"));
    }
    let x = config.power / config.reference_power;
    Ok(match config.mode {
        ExcitationMode::Resonant => (0.5 * PI * x.sqrt()).sin().powi(2),
        ExcitationMode::OffResonant => x / (1.0 + x),
    })
}

/// Emission-time intensity with the fine-structure beat,
/// normalised so that it integrates to T1 for any beat visibility.
pub fn beat_envelope(t: Duration, params: &EmitterParams) -> Result<f64> {
    let v = params.beat_visibility;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("beat visibility must lie in [0, 1], got {v}")));
    }
    if t.ps() < 0.0 {
        return Err(Error::domain("time must be non-negative"));
    }
    let t1 = params.t1.ns();
    let w = params.fss.angular_per_ns();
    let phi = params.beat_phase;
    // ∫ e^{-t/T1} cos(ωt+φ) dt = T1 (cos φ − ωT1 sin φ) / (1 + ω²T1²)
    let norm = 1.0 + v * (phi.cos() - w * t1 * phi.sin()) / (1.0 + (w * t1).powi(2));
    let x = t.ns();
    Ok((-x / t1).exp() * (1.0 + v * (w * x + phi).cos()) / norm)
}
