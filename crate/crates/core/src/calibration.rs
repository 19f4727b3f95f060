//! Closed-form predictions of what the simulated chain measures, and their
//! inverses. Used to derive scenario parameters from target figures of merit.
//!
//! Conventions: rates in Hz, a 50:50 splitter in front of two identical
//! detectors, peak windows of width `window` around multiples of the period.

use serde::{Deserialize, Serialize};

use crate::bench::{overlap_for_detuning, DetectorParams};
use crate::emitter::{calibrate_broadening, gaussian_expectation, ou_difference_rms, Broadening, EmitterParams};
use crate::error::{Error, Result};
use crate::qfc::{external_efficiency, noise_rate, ConversionParams, SeedLaser};
use crate::units::{Duration, Frequency};

/// Side-peak enhancement `1 + ((1 − p_on)/p_on)·exp(−|τ|/τ_b)` from blinking.
pub fn telegraph_bunching(emitter: &EmitterParams, tau: Duration) -> f64 {
    let p_on = emitter.on_fraction();
    let tb = emitter.blink_correlation_time().ps();
    if p_on >= 1.0 || tb <= 0.0 {
        return 1.0;
    }
    1.0 + (1.0 - p_on) / p_on * (-tau.ps().abs() / tb).exp()
}

/// Mean bunching over side peaks `k_lo..=k_hi` periods out.
pub fn mean_side_bunching(emitter: &EmitterParams, period: Duration, k_lo: u32, k_hi: u32) -> f64 {
    let n = (k_hi - k_lo + 1) as f64;
    (k_lo..=k_hi)
        .map(|k| telegraph_bunching(emitter, Duration::from_ps(k as f64 * period.ps())))
        .sum::<f64>()
        / n
}

/// Pulses blanked after a click.
fn dead_pulses(det: &DetectorParams, period: Duration) -> f64 {
    (det.dead_time.ps() / period.ps()).floor()
}

/// Click rate of one detector for an arrival rate, with the dead time
/// blanking whole pulses.
pub fn detected_rate(arrival_hz: f64, det: &DetectorParams, period: Duration) -> f64 {
    let rep = 1e12 / period.ps();
    arrival_hz / (1.0 + dead_pulses(det, period) * arrival_hz / rep)
}

/// Inverse of [`detected_rate`].
pub fn arrival_rate(detected_hz: f64, det: &DetectorParams, period: Duration) -> Result<f64> {
    let rep = 1e12 / period.ps();
    let blank = dead_pulses(det, period) * detected_hz / rep;
    if blank >= 1.0 {
        return Err(Error::Calibration(format!("{detected_hz} Hz saturates the detector")));
    }
    Ok(detected_hz / (1.0 - blank))
}

/// Extra coincidences per unit signal² from uncorrelated clicks:
/// `2n/s + (n/s)²` for `s` signal clicks per pulse and `n` background
/// clicks per peak window, both per detector.
pub fn accidental_term(signal_per_pulse: f64, background_per_window: f64) -> f64 {
    let x = background_per_window / signal_per_pulse;
    2.0 * x + x * x
}

/// Zero-delay peak of an ideal-detector HBT measurement normalised by
/// uncorrelated pulses.
pub fn intrinsic_g2(multiphoton_prob: f64, p_on: f64, p_exc: f64) -> f64 {
    let e = multiphoton_prob;
    2.0 * e / (p_on * p_exc * (1.0 + e).powi(2))
}

/// Measured `g²(0)` with side peaks enhanced by `side_bunching` and
/// accidentals `acc`.
pub fn predicted_g2(multiphoton_prob: f64, p_on: f64, p_exc: f64, side_bunching: f64, acc: f64) -> f64 {
    (intrinsic_g2(multiphoton_prob, p_on, p_exc) + acc) / (side_bunching + acc)
}

/// Inverse of [`predicted_g2`] in the multiphoton probability.
pub fn multiphoton_for_g2(target: f64, p_on: f64, p_exc: f64, side_bunching: f64, acc: f64) -> Result<f64> {
    let g0 = target * (side_bunching + acc) - acc;
    if g0 < 0.0 {
        return Err(Error::Calibration(format!("g2 {target} is below the accidental floor")));
    }
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let c = g0 * p_on * p_exc / 2.0;
    if c >= 0.25 {
        return Err(Error::Calibration(format!("g2 {target} needs more than one extra photon per pulse")));
    }
    Ok(((1.0 - 2.0 * c) - (1.0 - 4.0 * c).sqrt()) / (2.0 * c))
}

/// HOM visibility of consecutive-pulse interference with pair overlap `m`.
/// Multiphoton and background photons do not interfere; `bunching_at_delay`
/// is the blinking enhancement of photon pairs one delay apart.
pub fn predicted_hom_visibility(m: f64, multiphoton_prob: f64, g0: f64, acc: f64, bunching_at_delay: f64) -> f64 {
    let f = 1.0 / (1.0 + multiphoton_prob);
    f * f * m / (1.0 + (g0 + 2.0 * acc) / bunching_at_delay)
}

/// Pair overlap needed for a target visibility; inverse of
/// [`predicted_hom_visibility`].
pub fn overlap_for_visibility(v: f64, multiphoton_prob: f64, g0: f64, acc: f64, bunching_at_delay: f64) -> f64 {
    v / predicted_hom_visibility(1.0, multiphoton_prob, g0, acc, bunching_at_delay)
}

/// Mean overlap of converted photons emitted `separation` apart. The seed
/// mode powers are Dirichlet(`concentration`·envelope) within a fluctuation
/// interval and independent across intervals.
pub fn converted_pair_overlap(emitter: &EmitterParams, laser: &SeedLaser, concentration: Option<f64>, separation: Duration) -> f64 {
    let t1 = emitter.t1;
    let gamma = emitter.pure_dephasing_per_ns;
    let sd = ou_difference_rms(emitter.spectral_diffusion_rms, emitter.spectral_diffusion_time, separation);
    let dl = |d: f64| gaussian_expectation(sd, |x| overlap_for_detuning(t1, gamma, Frequency::from_ghz(x + d)));
    let g = laser.envelope_weights();
    // S = Σ g_i g_j ⟨DL(δ + (i−j)·fsr)⟩, grouped by mode gap
    let mut by_gap = std::collections::BTreeMap::<i64, f64>::new();
    for i in 0..g.len() {
        for j in 0..g.len() {
            *by_gap.entry(i as i64 - j as i64).or_default() += g[i] * g[j];
        }
    }
    let fsr = laser.fsr.ghz();
    let spread: f64 = by_gap.iter().map(|(&k, &w)| w * dl(k as f64 * fsr)).sum();
    let same = dl(0.0);
    match concentration {
        None => spread,
        Some(alpha) => {
            let p_same = (1.0 - separation.ps() / laser.mode_fluctuation_time.ps()).max(0.0);
            p_same * (alpha * spread + same) / (alpha + 1.0) + (1.0 - p_same) * spread
        }
    }
}

/// Dirichlet concentration giving a target converted pair overlap.
pub fn seed_concentration_for_overlap(emitter: &EmitterParams, laser: &SeedLaser, target: f64, separation: Duration) -> Result<f64> {
    let at = |a: f64| converted_pair_overlap(emitter, laser, Some(a), separation);
    let (hi_m, lo_m) = (at(1e-9), at(1e9));
    if target > hi_m || target < lo_m {
        return Err(Error::Calibration(format!(
            "converted overlap {target:.4} outside the reachable range [{lo_m:.4}, {hi_m:.4}]"
        )));
    }
    let (mut lo, mut hi) = ((1e-9f64).ln(), (1e9f64).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Fixed inputs of the reference-scenario calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSetup {
    pub emitter: EmitterParams,
    pub period: Duration,
    pub p_exc_resonant: f64,
    pub p_exc_offres: f64,
    pub detector_nir: DetectorParams,
    pub detector_telecom: DetectorParams,
    /// Conversion parameters; `input_optics` is solved for.
    pub conversion: ConversionParams,
    /// Seed laser; `concentration` is solved for.
    pub laser: SeedLaser,
    pub side_peaks: (u32, u32),
}

/// Published figures the calibration reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTargets {
    pub linewidth: Frequency,
    pub pair_overlap: f64,
    pub nir_rate_resonant_hz: f64,
    pub telecom_rate_resonant_hz: f64,
    pub nir_rate_offres_hz: f64,
    pub telecom_rate_offres_hz: f64,
    pub g2_resonant: f64,
    pub g2_offres: f64,
    pub telecom_visibility: f64,
}

impl Default for ReferenceTargets {
    fn default() -> Self {
        ReferenceTargets {
            linewidth: Frequency::from_mhz(915.0),
            pair_overlap: 0.95,
            nir_rate_resonant_hz: 1.46e6,
            telecom_rate_resonant_hz: 456e3,
            nir_rate_offres_hz: 1.85e6,
            telecom_rate_offres_hz: 856e3,
            g2_resonant: 0.040,
            g2_offres: 0.045,
            telecom_visibility: 0.60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCalibration {
    pub broadening: Broadening,
    pub multiphoton_resonant: f64,
    pub collection_resonant: f64,
    pub multiphoton_offres: f64,
    pub collection_offres: f64,
    /// NIR spectral filter used only for off-resonant detection.
    pub grating_transmission: f64,
    pub input_optics: f64,
    pub seed_concentration: f64,
}

/// Photons per second in the collection fibre needed for a total two-detector
/// click rate, given extra background arrivals (Hz, total) at the detectors.
fn fibre_flux(total_clicks_hz: f64, det: &DetectorParams, period: Duration, background_hz: f64) -> Result<f64> {
    let per_channel = arrival_rate(total_clicks_hz / 2.0, det, period)? - det.dark_rate_hz;
    Ok((2.0 * per_channel / det.efficiency - background_hz).max(0.0))
}

pub fn calibrate_reference(setup: &ReferenceSetup, targets: &ReferenceTargets) -> Result<ReferenceCalibration> {
    let period = setup.period;
    let rep = 1e12 / period.ps();
    let window_s = 0.5 * period.ps() * 1e-12;
    let e = &setup.emitter;
    let p_on = e.on_fraction();
    let b_side = mean_side_bunching(e, period, setup.side_peaks.0, setup.side_peaks.1);

    let broadening = calibrate_broadening(e.t1, targets.linewidth, targets.pair_overlap, e.spectral_diffusion_time, period)?;

    let seed_mw = setup.conversion.seed_power_mw;
    let noise = noise_rate(seed_mw, &setup.conversion);
    let eta_ext = external_efficiency(seed_mw * 1e-3, &setup.conversion)?;

    let (nir, tel) = (&setup.detector_nir, &setup.detector_telecom);
    let nir_dark_window = nir.dark_rate_hz * window_s;

    // resonant NIR
    let flux_res = fibre_flux(targets.nir_rate_resonant_hz, nir, period, 0.0)?;
    let s_res = flux_res * nir.efficiency / 2.0 / rep;
    let acc_res = accidental_term(s_res, nir_dark_window);
    let eps_res = multiphoton_for_g2(targets.g2_resonant, p_on, setup.p_exc_resonant, b_side, acc_res)?;
    let beta_res = flux_res / (rep * p_on * setup.p_exc_resonant * (1.0 + eps_res));

    // resonant telecom fixes the optics in front of the waveguide
    let flux_tel = fibre_flux(targets.telecom_rate_resonant_hz, tel, period, noise)?;
    let survival = flux_tel / flux_res;
    let input_optics = survival / eta_ext;
    if !(input_optics > 0.0 && input_optics <= 1.0) {
        return Err(Error::Calibration(format!(
            "rates imply input transmission {input_optics:.3} outside (0, 1]"
        )));
    }

    // off-resonant: telecom rate fixes the fibre flux, NIR rate the grating
    let flux_off = fibre_flux(targets.telecom_rate_offres_hz, tel, period, noise)? / survival;
    let flux_off_nir = fibre_flux(targets.nir_rate_offres_hz, nir, period, 0.0)?;
    let grating = flux_off_nir / flux_off;
    let s_off = flux_off_nir * nir.efficiency / 2.0 / rep;
    let acc_off = accidental_term(s_off, nir_dark_window);
    let eps_off = multiphoton_for_g2(targets.g2_offres, p_on, setup.p_exc_offres, b_side, acc_off)?;
    let beta_off = flux_off / (rep * p_on * setup.p_exc_offres * (1.0 + eps_off));

    // telecom visibility fixes the seed-mode concentration
    let mut calibrated = e.clone();
    calibrated.pure_dephasing_per_ns = broadening.pure_dephasing_per_ns;
    calibrated.spectral_diffusion_rms = broadening.spectral_diffusion_rms;
    let s_tel = flux_tel * tel.efficiency / 2.0 / rep;
    let bg_tel = (noise * tel.efficiency / 2.0 + tel.dark_rate_hz) * window_s;
    let acc_tel = accidental_term(s_tel, bg_tel);
    let g0 = intrinsic_g2(eps_res, p_on, setup.p_exc_resonant);
    let m_tel = overlap_for_visibility(targets.telecom_visibility, eps_res, g0, acc_tel, telegraph_bunching(e, period));
    let concentration = seed_concentration_for_overlap(&calibrated, &setup.laser, m_tel, period)?;

    for (name, v) in [("collection_resonant", beta_res), ("collection_offres", beta_off), ("grating_transmission", grating)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Calibration(format!("{name} = {v:.4} is not a probability")));
        }
    }
    Ok(ReferenceCalibration {
        broadening,
        multiphoton_resonant: eps_res,
        collection_resonant: beta_res,
        multiphoton_offres: eps_off,
        collection_offres: beta_off,
        grating_transmission: grating,
        input_optics,
        seed_concentration: concentration,
    })
}


impl Default for ReferenceSetup {
    fn default() -> Self {
        let t1 = Duration::from_ps(262.2);
        let mut emitter = EmitterParams::ideal(t1);
        emitter.fss = Frequency::from_ghz(4.807);
        emitter.beat_visibility = 0.3;
        emitter.spectral_diffusion_time = Duration::from_us(1.0);
        emitter.blink_on = Duration::from_ns(900.0);
        emitter.blink_off = Duration::from_ns(100.0);
        ReferenceSetup {
            emitter,
            period: Frequency::from_mhz(80.3).period(),
            p_exc_resonant: 1.0,
            p_exc_offres: 0.8,
            detector_nir: DetectorParams::nir(),
            detector_telecom: DetectorParams::telecom(),
            conversion: ConversionParams::default(),
            laser: SeedLaser::reference(),
            side_peaks: (4, 6),
        }
    }
}
