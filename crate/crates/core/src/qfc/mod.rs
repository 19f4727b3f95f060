//! Difference-frequency conversion of a photon stream to the telecom band.

mod seed;

pub use seed::{sample_seed_frequency_offset, SeedLaser, SeedModeSampler};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_ordered, Error, Result};
use crate::photon::{sort_by_time, Origin, PhotonRecord, Polarization};
use crate::rng::{stream, Stage};
use crate::units::{dfg_output_wavelength, Frequency, Wavelength};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionParams {
    /// Normalised efficiency in 1/(W·cm²).
    pub eta_nor_per_w_cm2: f64,
    pub length_cm: f64,
    pub eta_max_internal: f64,
    /// Transmission of the free-space optics between the collection fibre and
    /// the waveguide facet.
    pub input_optics: f64,
    pub in_coupling: f64,
    pub fibre_coupling: f64,
    pub filter_transmission: f64,
    /// In-band noise photons per second per mW of seed power.
    pub noise_coeff_hz_per_mw: f64,
    pub seed_power_mw: f64,
    pub input_wavelength: Wavelength,
    /// FWHM of the output bandpass filter.
    pub bandpass: Wavelength,
}

impl Default for ConversionParams {
    /// 4.8 cm waveguide at 243 mW seed power. The filter transmission closes
    /// the budget to a 38% peak external efficiency.
    fn default() -> Self {
        ConversionParams {
            eta_nor_per_w_cm2: 0.44,
            length_cm: 4.8,
            eta_max_internal: 0.567,
            input_optics: 1.0,
            in_coupling: 0.83,
            fibre_coupling: 0.86,
            filter_transmission: 0.939,
            noise_coeff_hz_per_mw: 12.0,
            seed_power_mw: 243.0,
            input_wavelength: Wavelength::from_nm(942.0).expect("positive"),
            bandpass: Wavelength::from_nm(2.8).expect("positive"),
        }
    }
}

impl ConversionParams {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("eta_max_internal", self.eta_max_internal),
            ("input_optics", self.input_optics),
            ("in_coupling", self.in_coupling),
            ("fibre_coupling", self.fibre_coupling),
            ("filter_transmission", self.filter_transmission),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("conversion.{name}"), format!("must lie in [0, 1], got {v}")));
            }
        }
        let non_negative = [
            ("eta_nor_per_w_cm2", self.eta_nor_per_w_cm2),
            ("length_cm", self.length_cm),
            ("noise_coeff_hz_per_mw", self.noise_coeff_hz_per_mw),
            ("seed_power_mw", self.seed_power_mw),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("conversion.{name}"), format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Fraction of photons at the waveguide facet that end up in the output
    /// fibre, excluding conversion itself.
    pub fn passive_transmission(&self) -> f64 {
        self.in_coupling * self.fibre_coupling * self.filter_transmission
    }

    /// Probability that a photon in the input fibre reaches the output fibre
    /// converted.
    pub fn survival(&self, power_w: f64) -> Result<f64> {
        Ok(self.input_optics * external_efficiency(power_w, self)?)
    }

    pub fn output_wavelength(&self, seed: &SeedLaser) -> Result<Wavelength> {
        dfg_output_wavelength(self.input_wavelength, seed.wavelength)
    }

    /// Optical bandwidth of the output bandpass.
    pub fn bandpass_width(&self, seed: &SeedLaser) -> Result<Frequency> {
        Ok(self.output_wavelength(seed)?.bandwidth(self.bandpass))
    }
}

fn check_power(power_w: f64) -> Result<()> {
    if power_w < 0.0 || power_w.is_nan() {
        return Err(Error::domain(format!("seed power {power_w} W is negative")));
    }
    Ok(())
}

/// `η_max · sin²(√(η_nor P) L)` with `P` in W.
pub fn internal_efficiency(power_w: f64, params: &ConversionParams) -> Result<f64> {
    check_power(power_w)?;
    let arg = (params.eta_nor_per_w_cm2 * power_w).sqrt() * params.length_cm;
    Ok(params.eta_max_internal * arg.sin().powi(2))
}

/// Seed power (W) of the first efficiency maximum.
pub fn optimal_seed_power(params: &ConversionParams) -> Result<f64> {
    if !(params.eta_nor_per_w_cm2 > 0.0) || !(params.length_cm > 0.0) {
        return Err(Error::domain("optimal power needs positive η_nor and length"));
    }
    Ok((PI / (2.0 * params.length_cm)).powi(2) / params.eta_nor_per_w_cm2)
}

/// Photons in the output fibre per photon at the waveguide facet.
pub fn external_efficiency(power_w: f64, params: &ConversionParams) -> Result<f64> {
    Ok(internal_efficiency(power_w, params)? * params.passive_transmission())
}

/// In-band noise rate in Hz for a seed power in mW.
pub fn noise_rate(power_mw: f64, params: &ConversionParams) -> f64 {
    params.noise_coeff_hz_per_mw * power_mw.max(0.0)
}

/// Converts the time-ordered photons of one block covering `span` (ps).
///
/// Survivors keep their time and pulse index; their frequency offset moves by
/// the seed mode active at emission. Noise photons are added uniformly over
/// the span.
pub fn convert_block(
    photons: &[PhotonRecord],
    params: &ConversionParams,
    laser: &SeedLaser,
    span: (f64, f64),
    period_ps: f64,
    seed: u64,
    block: u64,
) -> Result<Vec<PhotonRecord>> {
    check_ordered(photons.iter().map(|p| p.t_abs))?;
    let survival = params.survival(params.seed_power_mw * 1e-3)?;
    let mut keep_rng = stream(seed, Stage::Conversion, 0, block);
    let mut seed_rng = stream(seed, Stage::SeedLaser, 0, block);
    let mut sampler = SeedModeSampler::new(laser);

    let mut out: Vec<PhotonRecord> = Vec::with_capacity((photons.len() as f64 * survival) as usize + 16);
    for p in photons {
        if keep_rng.gen::<f64>() >= survival {
            continue;
        }
        let shift = sampler.sample(p.t_abs, &mut seed_rng);
        // ν_out = ν_in − ν_seed
        out.push(PhotonRecord { nu_offset: Frequency::from_ghz(p.nu_offset.ghz() - shift.ghz()), ..*p });
    }

    let mean_noise = noise_rate(params.seed_power_mw, params) * (span.1 - span.0).max(0.0) * 1e-12;
    if mean_noise > 0.0 {
        let mut rng = stream(seed, Stage::ConversionNoise, 0, block);
        let n = Poisson::new(mean_noise).map_err(|e| Error::domain(e.to_string()))?.sample(&mut rng) as usize;
        let band = params.bandpass_width(laser)?.ghz();
        let first = out.len();
        for _ in 0..n {
            let t_abs = span.0 + rng.gen::<f64>() * (span.1 - span.0);
            let pol = if rng.gen::<bool>() { Polarization::H } else { Polarization::V };
            out.push(PhotonRecord {
                t_abs,
                nu_offset: Frequency::from_ghz((rng.gen::<f64>() - 0.5) * band),
                pol,
                pulse_index: (t_abs / period_ps).floor() as u64,
                origin: Origin::Noise,
            });
        }
        if out.len() > first {
            sort_by_time(&mut out);
        }
    }
    Ok(out)
}

/// Converts a whole time-ordered stream acquired over `span` (ps).
pub fn convert_stream(
    photons: &[PhotonRecord],
    params: &ConversionParams,
    laser: &SeedLaser,
    span: (f64, f64),
    period_ps: f64,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    params.validate()?;
    laser.validate()?;
    convert_block(photons, params, laser, span, period_ps, seed, 0)
}
