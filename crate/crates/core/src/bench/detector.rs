//! Single-photon detector: efficiency, timing jitter, dark counts, dead time.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_ordered, Error, Result};
use crate::photon::Origin;
use crate::rng::StreamRng;
use crate::units::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub jitter: Duration,
    pub dead_time: Duration,
}

impl DetectorParams {
    pub fn ideal() -> Self {
        DetectorParams {
            efficiency: 1.0,
            dark_rate_hz: 0.0,
            jitter: Duration::ZERO,
            dead_time: Duration::ZERO,
        }
    }

    /// NIR SNSPD defaults.
    pub fn nir() -> Self {
        DetectorParams {
            efficiency: 0.90,
            dark_rate_hz: 100.0,
            jitter: Duration::from_ps(20.0),
            dead_time: Duration::from_ns(30.0),
        }
    }

    /// Telecom SNSPD defaults.
    pub fn telecom() -> Self {
        DetectorParams { efficiency: 0.80, ..Self::nir() }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config(format!("{key}.efficiency"), "must lie in [0, 1]"));
        }
        if !(self.dark_rate_hz >= 0.0) {
            return Err(Error::config(format!("{key}.dark_rate_hz"), "must be non-negative"));
        }
        if !(self.jitter.ps() >= 0.0) {
            return Err(Error::config(format!("{key}.jitter_ps"), "must be non-negative"));
        }
        if !(self.dead_time.ps() >= 0.0) {
            return Err(Error::config(format!("{key}.dead_time_ns"), "must be non-negative"));
        }
        Ok(())
    }

    /// Clicks of a later block can precede the end of the current block by at
    /// most this much (negative jitter).
    pub fn lookback_ps(&self) -> f64 {
        10.0 * self.jitter.ps() + 1.0
    }
}

/// A photon impinging on a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub t: f64,
    pub origin: Origin,
}

/// Clicks of one block before dead-time enforcement.
#[derive(Debug, Clone, Default)]
pub struct RawClicks {
    times: Vec<u64>,
    span_end: f64,
    pub photon_clicks: [u64; 3],
    pub dark_clicks: u64,
}

impl RawClicks {
    /// Thins, jitters and quantises the arrivals of one block and adds dark
    /// counts over `span` (ps). Pure in its inputs, so blocks can be prepared
    /// on any thread.
    pub fn prepare(det: &DetectorParams, arrivals: &[Arrival], span: (f64, f64), rng: &mut StreamRng) -> Self {
        let mut raw = RawClicks { span_end: span.1, ..Default::default() };
        raw.times.reserve((arrivals.len() as f64 * det.efficiency) as usize + 8);
        let sigma = det.jitter.ps();
        for a in arrivals {
            if rng.gen::<f64>() >= det.efficiency {
                continue;
            }
            let mut t = a.t;
            if sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                t += sigma * z;
            }
            raw.times.push(t.round().max(0.0) as u64);
            raw.photon_clicks[a.origin as usize] += 1;
        }
        if det.dark_rate_hz > 0.0 {
            let mean_gap = 1e12 / det.dark_rate_hz;
            let mut t = span.0;
            loop {
                let e: f64 = Exp1.sample(rng);
                t += mean_gap * e;
                if t >= span.1 {
                    break;
                }
                raw.times.push(t.round().max(0.0) as u64);
                raw.dark_clicks += 1;
            }
        }
        raw.times.sort_unstable();
        raw
    }
}

/// Sequential part of a detector: merges blocks in time order and enforces
/// the (non-paralysable) dead time across block boundaries.
#[derive(Debug, Clone)]
pub struct DetectorChannel {
    params: DetectorParams,
    dead_ps: u64,
    last: Option<u64>,
    pending: Vec<u64>,
    pub photon_clicks: [u64; 3],
    pub dark_clicks: u64,
    pub dead_time_losses: u64,
    pub emitted: u64,
}

impl DetectorChannel {
    pub fn new(params: DetectorParams) -> Self {
        DetectorChannel {
            params,
            dead_ps: params.dead_time.ps().round() as u64,
            last: None,
            pending: Vec::new(),
            photon_clicks: [0; 3],
            dark_clicks: 0,
            dead_time_losses: 0,
            emitted: 0,
        }
    }

    /// Adds one block of raw clicks and returns every click that can no
    /// longer be affected by later blocks.
    pub fn push(&mut self, raw: RawClicks) -> Vec<u64> {
        for (acc, n) in self.photon_clicks.iter_mut().zip(raw.photon_clicks) {
            *acc += n;
        }
        self.dark_clicks += raw.dark_clicks;
        self.pending = merge_sorted(&self.pending, &raw.times);
        let horizon = raw.span_end - self.params.lookback_ps();
        let cut = self.pending.partition_point(|&t| (t as f64) < horizon);
        let ready: Vec<u64> = self.pending.drain(..cut).collect();
        self.accept(ready)
    }

    /// Releases everything still pending.
    pub fn finish(&mut self) -> Vec<u64> {
        let rest = std::mem::take(&mut self.pending);
        self.accept(rest)
    }

    fn accept(&mut self, candidates: Vec<u64>) -> Vec<u64> {
        let mut out = Vec::with_capacity(candidates.len());
        for t in candidates {
            match self.last {
                Some(l) if t - l < self.dead_ps => self.dead_time_losses += 1,
                _ => {
                    out.push(t);
                    self.last = Some(t);
                }
            }
        }
        self.emitted += out.len() as u64;
        out
    }
}

fn merge_sorted(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Click times (ps) produced by one detector from a time-ordered arrival
/// stream, with dark counts over `span` (ps).
pub fn detect(arrivals: &[Arrival], det: &DetectorParams, span: (f64, f64), rng: &mut StreamRng) -> Result<Vec<u64>> {
    check_ordered(arrivals.iter().map(|a| a.t))?;
    let raw = RawClicks::prepare(det, arrivals, span, rng);
    let mut channel = DetectorChannel::new(*det);
    let mut clicks = channel.push(raw);
    clicks.extend(channel.finish());
    Ok(clicks)
}
