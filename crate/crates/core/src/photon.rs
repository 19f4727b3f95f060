use serde::{Deserialize, Serialize};

use crate::units::Frequency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Polarization {
    H = 0,
    V = 1,
}

impl Polarization {
    pub fn rotated(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// Where a photon came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Origin {
    Signal = 0,
    Multiphoton = 1,
    Noise = 2,
}

/// One photon in a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonRecord {
    /// Absolute arrival time in ps.
    pub t_abs: f64,
    /// Centre-frequency offset from the nominal line.
    pub nu_offset: Frequency,
    pub pol: Polarization,
    pub pulse_index: u64,
    pub origin: Origin,
}

impl TryFrom<u8> for Polarization {
    type Error = u8;

    fn try_from(v: u8) -> Result<Self, u8> {
        match v {
            0 => Ok(Polarization::H),
            1 => Ok(Polarization::V),
            other => Err(other),
        }
    }
}

impl TryFrom<u8> for Origin {
    type Error = u8;

    fn try_from(v: u8) -> Result<Self, u8> {
        match v {
            0 => Ok(Origin::Signal),
            1 => Ok(Origin::Multiphoton),
            2 => Ok(Origin::Noise),
            other => Err(other),
        }
    }
}

pub(crate) fn sort_by_time(photons: &mut [PhotonRecord]) {
    photons.sort_by(|a, b| a.t_abs.total_cmp(&b.t_abs));
}
