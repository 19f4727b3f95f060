use serde::{Deserialize, Serialize};

use super::histogram::CorrelationHistogram;
use crate::error::{Error, Result};
use crate::units::Duration;

/// Integrated coincidences around the nominal peak positions `k·period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAreas {
    pub center_area: u64,
    /// `(k, area)` for every side peak `k ≠ 0` whose window lies inside the
    /// histogram range.
    pub side_areas: Vec<(i64, u64)>,
    pub window_ps: f64,
}

impl PeakAreas {
    /// Side peaks with the `n` largest `|k|` on each side.
    pub fn outer(&self, n: usize) -> Vec<(i64, u64)> {
        let k_max = self.side_areas.iter().map(|(k, _)| k.abs()).max().unwrap_or(0);
        let k_min = k_max - n as i64 + 1;
        self.side_areas.iter().copied().filter(|(k, _)| k.abs() >= k_min.max(1)).collect()
    }
}

/// Sums bins whose centre lies within `±window/2` of each nominal peak.
pub fn peak_areas(hist: &CorrelationHistogram, period: Duration, window: Duration) -> Result<PeakAreas> {
    let (p, w) = (period.ps(), window.ps());
    if !(p > 0.0) || !(w > 0.0) || w > p {
        return Err(Error::domain("peak window must satisfy 0 < window ≤ period"));
    }
    let lo = hist.tau_min_ps as f64;
    let hi = hist.tau_max_ps as f64;
    let k_lo = ((lo + w / 2.0) / p).ceil() as i64;
    let k_hi = ((hi - w / 2.0) / p).floor() as i64;
    if k_lo > 0 || k_hi < 0 {
        return Err(Error::domain("histogram range does not contain the zero-delay peak"));
    }
    let mut areas = vec![0u64; (k_hi - k_lo + 1) as usize];
    for (i, &c) in hist.counts.iter().enumerate() {
        let tau = hist.bin_centre(i);
        let k = (tau / p).round() as i64;
        if k < k_lo || k > k_hi || (tau - k as f64 * p).abs() >= w / 2.0 {
            continue;
        }
        areas[(k - k_lo) as usize] += c;
    }
    let mut out = PeakAreas { center_area: 0, side_areas: Vec::new(), window_ps: w };
    for (i, a) in areas.into_iter().enumerate() {
        let k = k_lo + i as i64;
        if k == 0 {
            out.center_area = a;
        } else {
            out.side_areas.push((k, a));
        }
    }
    Ok(out)
}

/// Zero-delay peak over the mean of the outer side peaks, with its Poisson
/// standard error.
fn normalised_center(areas: &PeakAreas, n_side_peaks: usize) -> Result<(f64, f64)> {
    if n_side_peaks == 0 {
        return Err(Error::domain("need at least one side peak per side"));
    }
    let outer = areas.outer(n_side_peaks);
    let count_each_side = |neg: bool| outer.iter().filter(|(k, _)| (*k < 0) == neg).count();
    if count_each_side(true) < n_side_peaks || count_each_side(false) < n_side_peaks {
        return Err(Error::domain(format!("histogram holds fewer than {n_side_peaks} side peaks per side")));
    }
    let side_total: u64 = outer.iter().map(|(_, a)| a).sum();
    if side_total == 0 {
        return Err(Error::Analysis("side peaks are empty; normalisation undefined".into()));
    }
    let mean = side_total as f64 / outer.len() as f64;
    let c = areas.center_area as f64;
    let g = c / mean;
    let rel2 = 1.0 / c.max(1.0) + 1.0 / side_total as f64;
    let sigma = if c > 0.0 { g * rel2.sqrt() } else { 1.0 / mean };
    Ok((g, sigma))
}

/// `g²(0)` and its standard error.
pub fn g2_zero(hist: &CorrelationHistogram, period: Duration, window: Duration, n_side_peaks: usize) -> Result<(f64, f64)> {
    normalised_center(&peak_areas(hist, period, window)?, n_side_peaks)
}

/// `V = 1 − A∥(0)/A⊥(0)` with each zero-delay area normalised by its own
/// outer side peaks.
pub fn hom_visibility(
    hist_parallel: &CorrelationHistogram,
    hist_perp: &CorrelationHistogram,
    period: Duration,
    window: Duration,
    n_side_peaks: usize,
) -> Result<(f64, f64)> {
    let (a_par, s_par) = g2_zero(hist_parallel, period, window, n_side_peaks)?;
    let (a_perp, s_perp) = g2_zero(hist_perp, period, window, n_side_peaks)?;
    if a_perp <= 0.0 {
        return Err(Error::Analysis("perpendicular zero-delay peak is empty; visibility undefined".into()));
    }
    let ratio = a_par / a_perp;
    let sigma = if a_par > 0.0 {
        ratio * ((s_par / a_par).powi(2) + (s_perp / a_perp).powi(2)).sqrt()
    } else {
        s_par / a_perp
    };
    Ok((1.0 - ratio, sigma))
}

/// Single-photon indistinguishability corrected for multiphoton events.
pub fn indistinguishability(visibility: f64, g2: f64) -> Result<f64> {
    if !(g2 < 1.0) {
        return Err(Error::domain(format!("g2 = {g2} must be below 1")));
    }
    Ok((visibility + g2) / (1.0 - g2))
}
