use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_ordered, Error, Result};
use crate::units::Duration;

/// Binned click-click correlation `t_b − t_a`. All times in integer ps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    pub tau_min_ps: i64,
    pub tau_max_ps: i64,
    pub counts: Vec<u64>,
    pub singles: (u64, u64),
    pub acquisition_ps: u64,
}

impl CorrelationHistogram {
    pub fn empty(bin_width: Duration, range: (Duration, Duration)) -> Result<Self> {
        let bin = bin_width.ps().round();
        if !(bin >= 1.0) {
            return Err(Error::domain(format!("bin width {} ps must be at least 1 ps", bin_width.ps())));
        }
        let bin = bin as u64;
        let lo = range.0.ps().round() as i64;
        let hi = range.1.ps().round() as i64;
        if hi <= lo {
            return Err(Error::domain("correlation range is empty"));
        }
        let n = ((hi - lo) as u64).div_ceil(bin);
        Ok(CorrelationHistogram {
            bin_width_ps: bin,
            tau_min_ps: lo,
            tau_max_ps: lo + (n * bin) as i64,
            counts: vec![0; n as usize],
            singles: (0, 0),
            acquisition_ps: 0,
        })
    }

    /// Symmetric range of `periods` repetition periods each side.
    pub fn symmetric(bin_width: Duration, period: Duration, periods: f64) -> Result<Self> {
        let half = Duration::from_ps(period.ps() * periods);
        Self::empty(bin_width, (Duration::from_ps(-half.ps()), half))
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Left edge of bin `k` in ps.
    pub fn bin_left(&self, k: usize) -> i64 {
        self.tau_min_ps + (k as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_centre(&self, k: usize) -> f64 {
        self.bin_left(k) as f64 + 0.5 * self.bin_width_ps as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn same_binning(&self, other: &Self) -> bool {
        self.bin_width_ps == other.bin_width_ps
            && self.tau_min_ps == other.tau_min_ps
            && self.tau_max_ps == other.tau_max_ps
    }

    /// Counts all pairs with `a_i` taken from `a` against the whole of `b`.
    fn accumulate(&mut self, a: &[u64], b: &[u64]) {
        let (lo, hi, bin) = (self.tau_min_ps, self.tau_max_ps, self.bin_width_ps as i64);
        let mut start = 0usize;
        for &ta in a {
            let ta = ta as i64;
            while start < b.len() && (b[start] as i64) - ta < lo {
                start += 1;
            }
            let mut j = start;
            while j < b.len() {
                let d = b[j] as i64 - ta;
                if d >= hi {
                    break;
                }
                self.counts[((d - lo) / bin) as usize] += 1;
                j += 1;
            }
        }
    }
}

/// Element-wise sum of two histograms with identical binning.
pub fn merge(h1: &CorrelationHistogram, h2: &CorrelationHistogram) -> Result<CorrelationHistogram> {
    if !h1.same_binning(h2) {
        return Err(Error::BinningMismatch(format!(
            "[{}, {}) / {} ps vs [{}, {}) / {} ps",
            h1.tau_min_ps, h1.tau_max_ps, h1.bin_width_ps, h2.tau_min_ps, h2.tau_max_ps, h2.bin_width_ps
        )));
    }
    let mut out = h1.clone();
    for (c, d) in out.counts.iter_mut().zip(&h2.counts) {
        *c += d;
    }
    out.singles.0 += h2.singles.0;
    out.singles.1 += h2.singles.1;
    out.acquisition_ps += h2.acquisition_ps;
    Ok(out)
}

fn acquisition(a: &[u64], b: &[u64]) -> u64 {
    let first = a.first().into_iter().chain(b.first()).min();
    let last = a.last().into_iter().chain(b.last()).max();
    match (first, last) {
        (Some(f), Some(l)) => l - f,
        _ => 0,
    }
}

/// Two-pointer correlation of two time-ordered click lists.
pub fn correlate(a: &[u64], b: &[u64], bin_width: Duration, range: (Duration, Duration)) -> Result<CorrelationHistogram> {
    check_ordered(a.iter())?;
    check_ordered(b.iter())?;
    let mut h = CorrelationHistogram::empty(bin_width, range)?;
    h.accumulate(a, b);
    h.singles = (a.len() as u64, b.len() as u64);
    h.acquisition_ps = acquisition(a, b);
    Ok(h)
}

/// Same result as [`correlate`], with channel `a` split into `shards` parts
/// that are correlated in parallel and merged.
pub fn correlate_sharded(
    a: &[u64],
    b: &[u64],
    bin_width: Duration,
    range: (Duration, Duration),
    shards: usize,
) -> Result<CorrelationHistogram> {
    check_ordered(a.iter())?;
    check_ordered(b.iter())?;
    let template = CorrelationHistogram::empty(bin_width, range)?;
    let chunk = a.len().div_ceil(shards.max(1)).max(1);
    let parts: Vec<CorrelationHistogram> = a
        .par_chunks(chunk)
        .map(|part| {
            let mut h = template.clone();
            let first = part[0] as i64 + template.tau_min_ps;
            let from = b.partition_point(|&t| (t as i64) < first);
            h.accumulate(part, &b[from..]);
            h
        })
        .collect();
    let mut h = parts.iter().try_fold(template, |acc, p| merge(&acc, p))?;
    h.singles = (a.len() as u64, b.len() as u64);
    h.acquisition_ps = acquisition(a, b);
    Ok(h)
}

/// Incremental correlator for click lists delivered in time order, block by
/// block. Memory is bounded by the clicks inside one correlation range.
#[derive(Debug, Clone)]
pub struct StreamingCorrelator {
    hist: CorrelationHistogram,
    pending_a: VecDeque<u64>,
    window_b: VecDeque<u64>,
    first: Option<u64>,
    last: u64,
}

impl StreamingCorrelator {
    pub fn new(hist: CorrelationHistogram) -> Self {
        StreamingCorrelator { hist, pending_a: VecDeque::new(), window_b: VecDeque::new(), first: None, last: 0 }
    }

    fn note_times(&mut self, clicks: &[u64]) {
        if let (Some(&f), Some(&l)) = (clicks.first(), clicks.last()) {
            self.first = Some(self.first.map_or(f, |x| x.min(f)));
            self.last = self.last.max(l);
        }
    }

    /// Adds clicks from both channels. Every click of a later call must be at
    /// or after `horizon` (ps).
    pub fn push(&mut self, a: &[u64], b: &[u64], horizon: f64) {
        self.note_times(a);
        self.note_times(b);
        self.hist.singles.0 += a.len() as u64;
        self.hist.singles.1 += b.len() as u64;
        self.pending_a.extend(a);
        self.window_b.extend(b);
        self.drain(Some(horizon));
    }

    fn drain(&mut self, horizon: Option<f64>) {
        let (lo, hi, bin) = (self.hist.tau_min_ps, self.hist.tau_max_ps, self.hist.bin_width_ps as i64);
        while let Some(&ta) = self.pending_a.front() {
            let ta = ta as i64;
            if let Some(h) = horizon {
                if (ta + hi) as f64 > h {
                    break;
                }
            }
            while let Some(&tb) = self.window_b.front() {
                if (tb as i64) - ta < lo {
                    self.window_b.pop_front();
                } else {
                    break;
                }
            }
            for &tb in &self.window_b {
                let d = tb as i64 - ta;
                if d >= hi {
                    break;
                }
                self.hist.counts[((d - lo) / bin) as usize] += 1;
            }
            self.pending_a.pop_front();
        }
        // later a-clicks come no earlier than the oldest pending one, or the horizon
        let floor = match (self.pending_a.front(), horizon) {
            (Some(&t), _) => t as f64,
            (None, Some(h)) => h,
            (None, None) => return,
        };
        while let Some(&tb) = self.window_b.front() {
            if (tb as f64) - floor < lo as f64 {
                self.window_b.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn finish(mut self) -> CorrelationHistogram {
        self.drain(None);
        self.hist.acquisition_ps = self.first.map_or(0, |f| self.last - f);
        self.hist
    }
}

/// Start-stop histogram of click delays after the preceding excitation pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayHistogram {
    pub bin_width_ps: f64,
    pub period_ps: f64,
    pub counts: Vec<u64>,
}

impl DecayHistogram {
    pub fn new(bin_width: Duration, period: Duration) -> Result<Self> {
        if !(bin_width.ps() > 0.0) || !(period.ps() > bin_width.ps()) {
            return Err(Error::domain("decay histogram needs 0 < bin width < period"));
        }
        let n = (period.ps() / bin_width.ps()).ceil() as usize;
        Ok(DecayHistogram { bin_width_ps: bin_width.ps(), period_ps: period.ps(), counts: vec![0; n] })
    }

    pub fn add(&mut self, clicks: &[u64]) {
        for &t in clicks {
            let delay = (t as f64).rem_euclid(self.period_ps);
            let k = ((delay / self.bin_width_ps) as usize).min(self.counts.len() - 1);
            self.counts[k] += 1;
        }
    }

    pub fn bin_centre(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width_ps
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(x: f64) -> Duration {
        Duration::from_ps(x)
    }

    #[test]
    fn identical_streams_give_a_spike_at_zero() {
        let a: Vec<u64> = (0..1000).map(|i| i * 1000 + 7).collect();
        let h = correlate(&a, &a, ps(10.0), (ps(-500.0), ps(500.0))).unwrap();
        assert_eq!(h.n_bins(), 100);
        assert_eq!(h.counts[50], 1000);
        assert_eq!(h.total(), 1000);
    }

    #[test]
    fn brute_force_agreement() {
        let a: Vec<u64> = (0..300u64).map(|i| i * 37 + (i * i) % 11).collect();
        let b: Vec<u64> = (0..250u64).map(|i| i * 45 + (i * 7) % 13).collect();
        let h = correlate(&a, &b, ps(7.0), (ps(-200.0), ps(300.0))).unwrap();
        let mut expect = vec![0u64; h.n_bins()];
        for &x in &a {
            for &y in &b {
                let d = y as i64 - x as i64;
                if d >= h.tau_min_ps && d < h.tau_max_ps {
                    expect[((d - h.tau_min_ps) / 7) as usize] += 1;
                }
            }
        }
        assert_eq!(h.counts, expect);
        let s = correlate_sharded(&a, &b, ps(7.0), (ps(-200.0), ps(300.0)), 7).unwrap();
        assert_eq!(s, h);
    }

    #[test]
    fn streaming_matches_batch() {
        let a: Vec<u64> = (0..5000u64).map(|i| i * 997 % 3_000_000).collect::<Vec<_>>();
        let mut a = a;
        a.sort_unstable();
        let b: Vec<u64> = a.iter().map(|t| t + 13).collect();
        let batch = correlate(&a, &b, ps(50.0), (ps(-5000.0), ps(5000.0))).unwrap();
        let mut s = StreamingCorrelator::new(CorrelationHistogram::empty(ps(50.0), (ps(-5000.0), ps(5000.0))).unwrap());
        for k in 0..3u64 {
            let lo = k * 1_000_000;
            let hi = lo + 1_000_000;
            let pa: Vec<u64> = a.iter().copied().filter(|&t| t >= lo && t < hi).collect();
            let pb: Vec<u64> = b.iter().copied().filter(|&t| t >= lo && t < hi).collect();
            s.push(&pa, &pb, hi as f64);
        }
        assert_eq!(s.finish(), batch);
    }

    #[test]
    fn bad_inputs() {
        assert!(correlate(&[2, 1], &[], ps(1.0), (ps(-1.0), ps(1.0))).is_err());
        assert!(correlate(&[], &[], ps(0.0), (ps(-1.0), ps(1.0))).is_err());
        let h1 = CorrelationHistogram::empty(ps(2.0), (ps(-10.0), ps(10.0))).unwrap();
        let h2 = CorrelationHistogram::empty(ps(4.0), (ps(-10.0), ps(10.0))).unwrap();
        assert!(matches!(merge(&h1, &h2), Err(Error::BinningMismatch(_))));
    }

    #[test]
    fn decay_histogram_wraps_at_period() {
        let mut d = DecayHistogram::new(ps(4.0), ps(12_453.3)).unwrap();
        d.add(&[0, 5, 12_454, 24_907 + 100]);
        assert_eq!(d.counts[0], 2);
        assert_eq!(d.counts[1], 1);
        assert_eq!(d.total(), 4);
    }
}
