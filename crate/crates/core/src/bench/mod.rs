//! Virtual measurement apparatus: beam splitters, interferometers and detectors.

mod detector;
mod hbt;
mod hom;
mod overlap;

pub use detector::{detect, Arrival, DetectorChannel, DetectorParams, RawClicks};
pub use hbt::{hbt_measure, hbt_route};
pub use hom::{hom_measure, hom_route, HomConfig, HomPolarization};
pub use overlap::{overlap_for_detuning, two_photon_overlap};

use serde::{Deserialize, Serialize};

/// One detector click. `t` is in ps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClickRecord {
    pub t: u64,
    pub channel: u8,
}

/// Merges two per-channel click lists into one time-ordered record stream.
pub fn merge_channels(a: &[u64], b: &[u64]) -> Vec<ClickRecord> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            out.push(ClickRecord { t: a[i], channel: 0 });
            i += 1;
        } else {
            out.push(ClickRecord { t: b[j], channel: 1 });
            j += 1;
        }
    }
    out
}
