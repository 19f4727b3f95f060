use rand::Rng;
use serde::{Deserialize, Serialize};

use super::detector::{detect, Arrival, DetectorParams};
use super::overlap::two_photon_overlap;
use crate::emitter::EmitterParams;
use crate::error::{check_ordered, Error, Result};
use crate::photon::PhotonRecord;
use crate::rng::{stream, Stage, StreamRng};
use crate::units::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomPolarization {
    Parallel,
    Cross,
}

/// Unbalanced Mach–Zehnder interferometer used for two-photon interference
/// between consecutive pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomConfig {
    pub delay: Duration,
    pub polarization: HomPolarization,
    pub splitter_ratio: f64,
    /// Photons meeting at the output splitter closer than this interfere.
    pub pairing_window: Duration,
}

impl HomConfig {
    pub fn new(delay: Duration, polarization: HomPolarization, t1: Duration) -> Self {
        HomConfig {
            delay,
            polarization,
            splitter_ratio: 0.5,
            pairing_window: Duration::from_ps(10.0 * t1.ps()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay.ps() > 0.0) {
            return Err(Error::config("bench.hom_delay_ns", "must be positive"));
        }
        if !(self.splitter_ratio > 0.0 && self.splitter_ratio < 1.0) {
            return Err(Error::config("bench.splitter_ratio", "must lie in (0, 1)"));
        }
        if !(self.pairing_window.ps() >= 0.0) {
            return Err(Error::config("bench.pairing_window_ns", "must be non-negative"));
        }
        Ok(())
    }
}

struct InFlight {
    t: f64,
    long_arm: bool,
    photon: PhotonRecord,
}

/// Routes photons through the interferometer. Each photon takes the long arm
/// with probability 1/2. At the output splitter, a photon is paired with the
/// next one from the other arm if they meet within the pairing window; a
/// pair leaves through a common port with probability equal to its overlap
/// and through independent ports otherwise.
pub fn hom_route(
    photons: &[PhotonRecord],
    config: &HomConfig,
    emitter: &EmitterParams,
    rng: &mut StreamRng,
) -> [Vec<Arrival>; 2] {
    let mut flying: Vec<InFlight> = photons
        .iter()
        .map(|p| {
            let long_arm = rng.gen::<bool>();
            let mut photon = *p;
            let mut t = p.t_abs;
            if long_arm {
                t += config.delay.ps();
                if config.polarization == HomPolarization::Cross {
                    photon.pol = photon.pol.rotated();
                }
            }
            InFlight { t, long_arm, photon }
        })
        .collect();
    flying.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut out = [Vec::with_capacity(photons.len() / 2 + 1), Vec::with_capacity(photons.len() / 2 + 1)];
    let window = config.pairing_window.ps();
    let ratio = config.splitter_ratio;
    let exit = |t: f64, p: &PhotonRecord, port: usize, out: &mut [Vec<Arrival>; 2]| {
        out[port].push(Arrival { t, origin: p.origin });
    };
    let mut i = 0;
    while i < flying.len() {
        let a = &flying[i];
        let partner = flying.get(i + 1).filter(|b| b.long_arm != a.long_arm && b.t - a.t < window);
        match partner {
            Some(b) => {
                let m = two_photon_overlap(&a.photon, &b.photon, emitter);
                if rng.gen::<f64>() < m {
                    let port = usize::from(rng.gen::<f64>() >= 0.5);
                    exit(a.t, &a.photon, port, &mut out);
                    exit(b.t, &b.photon, port, &mut out);
                } else {
                    let pa = usize::from(rng.gen::<f64>() >= ratio);
                    let pb = usize::from(rng.gen::<f64>() >= ratio);
                    exit(a.t, &a.photon, pa, &mut out);
                    exit(b.t, &b.photon, pb, &mut out);
                }
                i += 2;
            }
            None => {
                let port = usize::from(rng.gen::<f64>() >= ratio);
                exit(a.t, &a.photon, port, &mut out);
                i += 1;
            }
        }
    }
    out
}

/// Hong–Ou–Mandel measurement of a whole time-ordered stream.
pub fn hom_measure(
    photons: &[PhotonRecord],
    config: &HomConfig,
    emitter: &EmitterParams,
    det_a: &DetectorParams,
    det_b: &DetectorParams,
    seed: u64,
) -> Result<(Vec<u64>, Vec<u64>)> {
    config.validate()?;
    check_ordered(photons.iter().map(|p| p.t_abs))?;
    let [a, b] = hom_route(photons, config, emitter, &mut stream(seed, Stage::HomRouting, 0, 0));
    let span = (0.0, photons.last().map_or(0.0, |p| p.t_abs + config.delay.ps() + 1.0));
    let clicks_a = detect(&a, det_a, span, &mut stream(seed, Stage::DetectorA, 0, 0))?;
    let clicks_b = detect(&b, det_b, span, &mut stream(seed, Stage::DetectorB, 0, 0))?;
    Ok((clicks_a, clicks_b))
}
