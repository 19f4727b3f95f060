use rand::Rng;

use super::detector::{detect, Arrival, DetectorParams};
use crate::error::{check_ordered, Error, Result};
use crate::photon::PhotonRecord;
use crate::rng::{stream, Stage, StreamRng};

/// Sends each photon to output 0 with probability `ratio`, otherwise to
/// output 1. Outputs keep the input order.
pub fn hbt_route(photons: &[PhotonRecord], ratio: f64, rng: &mut StreamRng) -> [Vec<Arrival>; 2] {
    let mut out = [Vec::with_capacity(photons.len() / 2 + 1), Vec::with_capacity(photons.len() / 2 + 1)];
    for p in photons {
        let port = usize::from(rng.gen::<f64>() >= ratio);
        out[port].push(Arrival { t: p.t_abs, origin: p.origin });
    }
    out
}

/// Hanbury Brown–Twiss measurement of a whole time-ordered stream.
pub fn hbt_measure(
    photons: &[PhotonRecord],
    ratio: f64,
    det_a: &DetectorParams,
    det_b: &DetectorParams,
    seed: u64,
) -> Result<(Vec<u64>, Vec<u64>)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::domain(format!("splitter ratio {ratio} outside [0, 1]")));
    }
    check_ordered(photons.iter().map(|p| p.t_abs))?;
    let [a, b] = hbt_route(photons, ratio, &mut stream(seed, Stage::HbtRouting, 0, 0));
    let span = (0.0, photons.last().map_or(0.0, |p| p.t_abs + 1.0));
    let clicks_a = detect(&a, det_a, span, &mut stream(seed, Stage::DetectorA, 0, 0))?;
    let clicks_b = detect(&b, det_b, span, &mut stream(seed, Stage::DetectorB, 0, 0))?;
    Ok((clicks_a, clicks_b))
}
