//! Decomposition of the measured linewidth into fast dephasing and slow
//! spectral diffusion.

use serde::{Deserialize, Serialize};

use crate::bench::overlap_for_detuning;
use crate::error::{Error, Result};
use crate::units::{transform_limited_linewidth, Duration, Frequency};

/// FWHM of a Gaussian in units of its standard deviation.
const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Broadening {
    pub pure_dephasing_per_ns: f64,
    pub spectral_diffusion_rms: Frequency,
}

/// Lorentzian FWHM from radiative decay plus pure dephasing.
pub fn homogeneous_fwhm(t1: Duration, pure_dephasing_per_ns: f64) -> Frequency {
    Frequency::from_ghz((0.5 / t1.ns() + pure_dephasing_per_ns) / std::f64::consts::PI)
}

/// Olivero–Longbothum approximation of the Voigt FWHM (0.02 % accuracy).
pub fn voigt_fwhm(lorentz: Frequency, gauss_rms: Frequency) -> Frequency {
    let fl = lorentz.ghz();
    let fg = GAUSS_FWHM_PER_SIGMA * gauss_rms.ghz();
    Frequency::from_ghz(0.5346 * fl + (0.2166 * fl * fl + fg * fg).sqrt())
}

/// Gaussian RMS that brings a Lorentzian of width `lorentz` to a Voigt
/// FWHM of `total`. Zero if the Lorentzian alone is already as wide.
fn gauss_rms_for_total(lorentz: Frequency, total: Frequency) -> Frequency {
    let fl = lorentz.ghz();
    let rest = (total.ghz() - 0.5346 * fl).powi(2) - 0.2166 * fl * fl;
    Frequency::from_ghz(rest.max(0.0).sqrt() / GAUSS_FWHM_PER_SIGMA)
}

/// E[f(X)] for X ~ N(0, rms²), composite Simpson over ±8 rms.
pub fn gaussian_expectation(rms: f64, f: impl Fn(f64) -> f64) -> f64 {
    if rms <= 0.0 {
        return f(0.0);
    }
    const N: usize = 2000;
    let a = -8.0 * rms;
    let h = 16.0 * rms / N as f64;
    let norm = 1.0 / (rms * (2.0 * std::f64::consts::PI).sqrt());
    let mut s = 0.0;
    for i in 0..=N {
        let x = a + i as f64 * h;
        let w = if i == 0 || i == N {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(x) * (-0.5 * (x / rms).powi(2)).exp();
    }
    s * h / 3.0 * norm
}

/// RMS of the spectral-diffusion frequency difference between two photons
/// emitted `separation` apart.
pub fn ou_difference_rms(rms: Frequency, correlation_time: Duration, separation: Duration) -> f64 {
    let decorrelated = if correlation_time.ps() <= 0.0 {
        1.0
    } else {
        1.0 - (-separation.ps() / correlation_time.ps()).exp()
    };
    (2.0 * decorrelated).sqrt() * rms.ghz()
}

/// Mean two-photon overlap of photons emitted `separation` apart, averaged
/// over the spectral-diffusion difference.
pub fn mean_pair_overlap(
    t1: Duration,
    pure_dephasing_per_ns: f64,
    spectral_diffusion_rms: Frequency,
    correlation_time: Duration,
    separation: Duration,
) -> f64 {
    let s = ou_difference_rms(spectral_diffusion_rms, correlation_time, separation);
    gaussian_expectation(s, |d| overlap_for_detuning(t1, pure_dephasing_per_ns, Frequency::from_ghz(d)))
}

/// Finds the fast-dephasing rate and spectral-diffusion RMS that reproduce a
/// measured linewidth and a mean two-photon overlap at `separation`.
///
/// The overlap falls monotonically along the iso-linewidth curve as weight is
/// moved from the slow Gaussian into the fast Lorentzian, so the 2-D problem
/// is solved by bisection on the dephasing rate with the diffusion RMS
/// eliminated in closed form.
pub fn calibrate_broadening(
    t1: Duration,
    target_fwhm: Frequency,
    target_overlap: f64,
    correlation_time: Duration,
    separation: Duration,
) -> Result<Broadening> {
    const FWHM_TOL_GHZ: f64 = 1e-3;
    const OVERLAP_TOL: f64 = 0.005;

    if !(t1.ps() > 0.0) {
        return Err(Error::Calibration("T1 must be positive".into()));
    }
    if !(target_overlap > 0.0 && target_overlap <= 1.0) {
        return Err(Error::Calibration(format!(
            "target overlap {target_overlap} outside (0, 1]"
        )));
    }
    let limit = transform_limited_linewidth(t1)?;
    if target_fwhm.ghz() < limit.ghz() - FWHM_TOL_GHZ {
        return Err(Error::Calibration(format!(
            "target linewidth {:.1} MHz is narrower than the transform limit {:.1} MHz",
            target_fwhm.mhz(),
            limit.mhz()
        )));
    }
    let target_fwhm = Frequency::from_ghz(target_fwhm.ghz().max(limit.ghz()));

    let gamma_max = (std::f64::consts::PI * target_fwhm.ghz() - 0.5 / t1.ns()).max(0.0);
    let at = |gamma: f64| {
        let sigma = gauss_rms_for_total(homogeneous_fwhm(t1, gamma), target_fwhm);
        let m = mean_pair_overlap(t1, gamma, sigma, correlation_time, separation);
        (sigma, m)
    };

    let (sigma0, m0) = at(0.0);
    let (_, m_hi) = at(gamma_max);
    let solution = if target_overlap >= m0 {
        if target_overlap - m0 > OVERLAP_TOL {
            return Err(Error::Calibration(format!(
                "overlap {target_overlap:.4} unreachable: even with no fast dephasing the \
                 spectral diffusion needed for {:.1} MHz limits it to {m0:.4}",
                target_fwhm.mhz()
            )));
        }
        Broadening { pure_dephasing_per_ns: 0.0, spectral_diffusion_rms: sigma0 }
    } else if target_overlap <= m_hi {
        if m_hi - target_overlap > OVERLAP_TOL {
            return Err(Error::Calibration(format!(
                "overlap {target_overlap:.4} unreachable: putting the whole {:.1} MHz \
                 excess into fast dephasing only lowers it to {m_hi:.4}",
                target_fwhm.mhz()
            )));
        }
        Broadening { pure_dephasing_per_ns: gamma_max, spectral_diffusion_rms: Frequency::ZERO }
    } else {
        let (mut lo, mut hi) = (0.0, gamma_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if at(mid).1 > target_overlap {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        let gamma = 0.5 * (lo + hi);
        Broadening { pure_dephasing_per_ns: gamma, spectral_diffusion_rms: at(gamma).0 }
    };

    let fwhm = voigt_fwhm(homogeneous_fwhm(t1, solution.pure_dephasing_per_ns), solution.spectral_diffusion_rms);
    let overlap = mean_pair_overlap(
        t1,
        solution.pure_dephasing_per_ns,
        solution.spectral_diffusion_rms,
        correlation_time,
        separation,
    );
    if (fwhm.ghz() - target_fwhm.ghz()).abs() > FWHM_TOL_GHZ || (overlap - target_overlap).abs() > OVERLAP_TOL {
        return Err(Error::Calibration(format!(
            "residuals too large: linewidth {:.3} MHz vs {:.3} MHz, overlap {overlap:.5} vs {target_overlap:.5}",
            fwhm.mhz(),
            target_fwhm.mhz()
        )));
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T1: f64 = 0.2622;

    fn t1() -> Duration {
        Duration::from_ns(T1)
    }

    #[test]
    fn voigt_limits() {
        let l = Frequency::from_ghz(0.6);
        assert!((voigt_fwhm(l, Frequency::ZERO).ghz() - 0.6).abs() < 1e-5);
        let g = Frequency::from_ghz(0.3);
        assert!((voigt_fwhm(Frequency::ZERO, g).ghz() - 0.3 * GAUSS_FWHM_PER_SIGMA).abs() < 1e-12);
        let s = gauss_rms_for_total(l, Frequency::from_ghz(0.9));
        assert!((voigt_fwhm(l, s).ghz() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn gaussian_expectation_moments() {
        assert!((gaussian_expectation(0.7, |_| 1.0) - 1.0).abs() < 1e-9);
        assert!((gaussian_expectation(0.7, |x| x * x) - 0.49).abs() < 1e-9);
        assert_eq!(gaussian_expectation(0.0, |x| x + 3.0), 3.0);
    }

    #[test]
    fn transform_limit_needs_no_broadening() {
        let b = calibrate_broadening(t1(), Frequency::from_mhz(607.0), 1.0, Duration::from_us(1.0), Duration::from_ns(12.5)).unwrap();
        assert_eq!(b.pure_dephasing_per_ns, 0.0);
        assert_eq!(b.spectral_diffusion_rms.ghz(), 0.0);
    }

    #[test]
    fn calibration_hits_both_targets() {
        let tc = Duration::from_us(1.0);
        let sep = Duration::from_ns(12.5);
        let b = calibrate_broadening(t1(), Frequency::from_mhz(915.0), 0.95, tc, sep).unwrap();
        assert!(b.pure_dephasing_per_ns > 0.0);
        assert!(b.spectral_diffusion_rms.ghz() > 0.0);
        let fwhm = voigt_fwhm(homogeneous_fwhm(t1(), b.pure_dephasing_per_ns), b.spectral_diffusion_rms);
        assert!((fwhm.mhz() - 915.0).abs() < 1.0);
        let m = mean_pair_overlap(t1(), b.pure_dephasing_per_ns, b.spectral_diffusion_rms, tc, sep);
        assert!((m - 0.95).abs() < 0.005);
    }

    #[test]
    fn infeasible_targets_are_rejected() {
        let tc = Duration::from_us(1.0);
        let sep = Duration::from_ns(12.5);
        let e = calibrate_broadening(t1(), Frequency::from_mhz(500.0), 0.9, tc, sep).unwrap_err();
        assert!(e.to_string().contains("transform limit"), "{e}");
        // fast spectral diffusion: wide line cannot keep a high overlap
        let e = calibrate_broadening(t1(), Frequency::from_mhz(3000.0), 0.99, Duration::from_ns(1.0), sep).unwrap_err();
        assert!(matches!(e, Error::Calibration(_)));
        assert!(calibrate_broadening(t1(), Frequency::from_mhz(915.0), 0.0, tc, sep).is_err());
        assert!(calibrate_broadening(t1(), Frequency::from_mhz(915.0), 1.5, tc, sep).is_err());
    }
}
