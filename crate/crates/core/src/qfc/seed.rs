use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::units::{Duration, Frequency, Wavelength};

const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Multimode seed laser whose power hops between longitudinal modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLaser {
    pub wavelength: Wavelength,
    pub fsr: Frequency,
    /// FWHM of the Gaussian gain envelope over the modes.
    pub envelope_fwhm: Frequency,
    pub n_modes: u32,
    /// Mode powers are redrawn once per interval of this length.
    pub mode_fluctuation_time: Duration,
    /// Dirichlet concentration of the redrawn mode powers around the
    /// envelope. Small values put almost all power in one mode per interval;
    /// `None` keeps the envelope fixed.
    pub concentration: Option<f64>,
}

impl SeedLaser {
    pub fn single_mode(wavelength: Wavelength) -> Self {
        SeedLaser {
            wavelength,
            fsr: Frequency::from_mhz(177.0),
            envelope_fwhm: Frequency::ZERO,
            n_modes: 1,
            mode_fluctuation_time: Duration::from_us(1.0),
            concentration: None,
        }
    }

    /// 2401 nm seed, 22 modes spaced by 177 MHz under a 4 GHz envelope.
    pub fn reference() -> Self {
        SeedLaser {
            wavelength: Wavelength::from_nm(2401.0).expect("positive"),
            fsr: Frequency::from_mhz(177.0),
            envelope_fwhm: Frequency::from_ghz(4.0),
            n_modes: 22,
            mode_fluctuation_time: Duration::from_us(1.0),
            concentration: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::config("seed_laser.n_modes", "must be at least 1"));
        }
        if !(self.fsr.ghz() > 0.0) {
            return Err(Error::config("seed_laser.fsr_mhz", "must be positive"));
        }
        if !(self.envelope_fwhm.ghz() >= 0.0) {
            return Err(Error::config("seed_laser.envelope_fwhm_ghz", "must be non-negative"));
        }
        if !(self.mode_fluctuation_time.ps() > 0.0) {
            return Err(Error::config("seed_laser.mode_fluctuation_time_us", "must be positive"));
        }
        if let Some(a) = self.concentration {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::config("seed_laser.concentration", "must be non-negative and finite"));
            }
        }
        Ok(())
    }

    /// Detuning of each mode from the envelope centre: integer multiples of
    /// the free spectral range.
    pub fn mode_offsets(&self) -> Vec<Frequency> {
        let centre = (self.n_modes.max(1) as i64 - 1) / 2;
        (0..self.n_modes as i64)
            .map(|i| Frequency::from_ghz((i - centre) as f64 * self.fsr.ghz()))
            .collect()
    }

    /// Normalised long-run mode powers.
    pub fn envelope_weights(&self) -> Vec<f64> {
        let offsets = self.mode_offsets();
        let sigma = self.envelope_fwhm.ghz() / GAUSS_FWHM_PER_SIGMA;
        let raw: Vec<f64> = offsets
            .iter()
            .map(|f| {
                if sigma > 0.0 {
                    (-0.5 * (f.ghz() / sigma).powi(2)).exp()
                } else if f.ghz() == 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / sum).collect()
    }

    /// RMS of the long-run offset distribution.
    pub fn offset_rms(&self) -> Frequency {
        let w = self.envelope_weights();
        let off = self.mode_offsets();
        let mean: f64 = w.iter().zip(&off).map(|(w, f)| w * f.ghz()).sum();
        let var: f64 = w.iter().zip(&off).map(|(w, f)| w * (f.ghz() - mean).powi(2)).sum();
        Frequency::from_ghz(var.sqrt())
    }
}

/// Draws the active seed mode for a sequence of photons in time order.
///
/// Within one fluctuation interval the mode powers follow a Dirichlet law
/// centred on the envelope. The powers are integrated out: photon draws then
/// follow a Pólya urn, which is exact and stays well defined for tiny
/// concentrations.
#[derive(Debug, Clone)]
pub struct SeedModeSampler {
    offsets: Vec<Frequency>,
    weights: Vec<f64>,
    concentration: Option<f64>,
    interval_ps: f64,
    epoch: Option<i64>,
    counts: Vec<u32>,
    drawn: u32,
}

impl SeedModeSampler {
    pub fn new(laser: &SeedLaser) -> Self {
        SeedModeSampler {
            offsets: laser.mode_offsets(),
            weights: laser.envelope_weights(),
            concentration: laser.concentration,
            interval_ps: laser.mode_fluctuation_time.ps(),
            epoch: None,
            counts: vec![0; laser.n_modes as usize],
            drawn: 0,
        }
    }

    /// Offset of the mode that converts a photon emitted at `t` (ps).
    /// Calls must come in non-decreasing `t`.
    pub fn sample(&mut self, t: f64, rng: &mut StreamRng) -> Frequency {
        if self.offsets.len() == 1 {
            return self.offsets[0];
        }
        let Some(alpha) = self.concentration else {
            return self.offsets[pick(&self.weights, rng.gen::<f64>())];
        };
        let epoch = (t / self.interval_ps).floor() as i64;
        if self.epoch != Some(epoch) {
            self.epoch = Some(epoch);
            self.counts.iter_mut().for_each(|c| *c = 0);
            self.drawn = 0;
        }
        let mut u = rng.gen::<f64>() * (alpha + self.drawn as f64);
        let mut chosen = self.offsets.len() - 1;
        for (i, (&g, &c)) in self.weights.iter().zip(&self.counts).enumerate() {
            let w = alpha * g + c as f64;
            if u < w {
                chosen = i;
                break;
            }
            u -= w;
        }
        self.counts[chosen] += 1;
        self.drawn += 1;
        self.offsets[chosen]
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// One draw from `sampler` at time `t`.
pub fn sample_seed_frequency_offset(sampler: &mut SeedModeSampler, t: f64, rng: &mut StreamRng) -> Frequency {
    sampler.sample(t, rng)
}
