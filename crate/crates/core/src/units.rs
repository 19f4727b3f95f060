//! Physical quantities and the closed-form relations shared by every stage.
//!
//! Times are stored in picoseconds, frequencies in gigahertz and wavelengths
//! in nanometres. The speed of light only appears in the wavelength/frequency
//! conversions below.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// c expressed in nm·GHz.
const C_NM_GHZ: f64 = SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavelength(f64);

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Frequency(f64);

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Duration(f64);

impl Wavelength {
    pub fn from_nm(nm: f64) -> Result<Self> {
        if nm > 0.0 && nm.is_finite() {
            Ok(Wavelength(nm))
        } else {
            Err(Error::domain(format!("wavelength must be positive, got {nm} nm")))
        }
    }

    pub fn nm(self) -> f64 {
        self.0
    }

    /// Optical frequency of this vacuum wavelength.
    pub fn to_frequency(self) -> Frequency {
        Frequency(C_NM_GHZ / self.0)
    }

    /// Width in frequency of a band of width `band` centred on this wavelength.
    pub fn bandwidth(self, band: Wavelength) -> Frequency {
        Frequency(C_NM_GHZ * band.0 / (self.0 * self.0))
    }
}

impl Frequency {
    pub const ZERO: Frequency = Frequency(0.0);

    pub const fn from_ghz(ghz: f64) -> Self {
        Frequency(ghz)
    }

    pub fn from_mhz(mhz: f64) -> Self {
        Frequency(mhz * 1e-3)
    }

    pub fn from_hz(hz: f64) -> Self {
        Frequency(hz * 1e-9)
    }

    pub fn ghz(self) -> f64 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        self.0 * 1e3
    }

    pub fn hz(self) -> f64 {
        self.0 * 1e9
    }

    /// Angular frequency in rad/ns.
    pub fn angular_per_ns(self) -> f64 {
        2.0 * PI * self.0
    }

    pub fn to_wavelength(self) -> Result<Wavelength> {
        Wavelength::from_nm(C_NM_GHZ / self.0)
    }

    /// Period of an oscillation at this frequency.
    pub fn period(self) -> Duration {
        Duration(1e3 / self.0)
    }
}

impl Duration {
    pub const ZERO: Duration = Duration(0.0);

    pub const fn from_ps(ps: f64) -> Self {
        Duration(ps)
    }

    pub fn from_ns(ns: f64) -> Self {
        Duration(ns * 1e3)
    }

    pub fn from_us(us: f64) -> Self {
        Duration(us * 1e6)
    }

    pub fn ps(self) -> f64 {
        self.0
    }

    pub fn ns(self) -> f64 {
        self.0 * 1e-3
    }

    pub fn seconds(self) -> f64 {
        self.0 * 1e-12
    }
}

impl fmt::Display for Wavelength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} nm", self.0)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} GHz", self.0)
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ns", self.ns())
    }
}

/// Output wavelength of difference-frequency generation,
/// `1/λ_out = 1/λ_in − 1/λ_seed`.
pub fn dfg_output_wavelength(input: Wavelength, seed: Wavelength) -> Result<Wavelength> {
    if seed.0 <= input.0 {
        return Err(Error::domain(format!(
            "no positive difference frequency: seed {} must be longer than input {}",
            seed, input
        )));
    }
    let inv = 1.0 / input.0 - 1.0 / seed.0;
    Wavelength::from_nm(1.0 / inv)
}

/// Lorentzian FWHM of a line with coherence time `t2`: `1/(π·T2)`.
pub fn linewidth_fwhm(t2: Duration) -> Result<Frequency> {
    if !(t2.0 > 0.0) {
        return Err(Error::domain(format!("T2 must be positive, got {t2}")));
    }
    if t2.0.is_infinite() {
        return Ok(Frequency::ZERO);
    }
    Ok(Frequency(1.0 / (PI * t2.ns())))
}

/// Radiatively limited linewidth, i.e. `linewidth_fwhm(2·T1)`.
pub fn transform_limited_linewidth(t1: Duration) -> Result<Frequency> {
    linewidth_fwhm(Duration(2.0 * t1.0))
}
