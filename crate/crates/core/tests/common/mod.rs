//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use qfcsim::photon::{Origin, Polarization, PhotonRecord};
use qfcsim::units::Frequency;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub struct Quadrature {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Quadrature {
    pub fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        Quadrature { x, w }
    }

    /// Composite rule with `panels` equal panels on [a, b].
    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.x.iter().zip(&self.w) {
                s += w * f(mid + 0.5 * h * x);
            }
        }
        0.5 * h * s
    }
}

/// Two-photon overlap by direct double integration of the coincidence
/// amplitude of two exponential wavepackets, `t1` in ns, dephasing `gamma`
/// (1/ns), centre detuning and a Gaussian detuning spread in GHz:
/// `∫∫ Γ² e^{−Γ(t+t')} e^{−2γ|t−t'|} cos(Δω(t−t')) e^{−(2πσ)²(t−t')²/2} dt dt'`.
pub fn overlap_oracle(t1: f64, gamma: f64, detuning_ghz: f64, spread_ghz: f64) -> f64 {
    let g = 1.0 / t1;
    let dw = 2.0 * PI * detuning_ghz;
    let ds = 2.0 * PI * spread_ghz;
    let q = Quadrature::new(10);
    let t_max = 40.0 / g;
    let tau_max = 40.0 / (g + 2.0 * gamma);
    // panels resolve both the decay and the detuning oscillation
    let inner_panels = 40 + (dw * tau_max / PI * 2.0) as usize;
    let outer = q.integrate(0.0, t_max, 80, |t0| {
        q.integrate(t0, t0 + tau_max, inner_panels, |t| {
            let tau = t - t0;
            g * g
                * (-g * (t + t0)).exp()
                * (-2.0 * gamma * tau).exp()
                * (dw * tau).cos()
                * (-0.5 * ds * ds * tau * tau).exp()
        })
    });
    // the integrand is symmetric under t ↔ t'
    2.0 * outer
}

/// FWHM (GHz) of the numerically convolved Lorentzian ⊗ Gaussian profile.
pub fn voigt_fwhm_oracle(lorentz_fwhm: f64, gauss_rms: f64) -> f64 {
    let hw = 0.5 * lorentz_fwhm;
    let q = Quadrature::new(12);
    let profile = |x: f64| {
        if gauss_rms == 0.0 {
            return hw / PI / ((x * x) + hw * hw);
        }
        q.integrate(-10.0 * gauss_rms, 10.0 * gauss_rms, 400, |y| {
            let lor = hw / PI / ((x - y).powi(2) + hw * hw);
            let gau = (-0.5 * (y / gauss_rms).powi(2)).exp() / (gauss_rms * (2.0 * PI).sqrt());
            lor * gau
        })
    };
    let half = 0.5 * profile(0.0);
    let (mut lo, mut hi) = (0.0, 10.0 * (lorentz_fwhm + 3.0 * gauss_rms));
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + hi
}

/// Side-peak bunching of a two-state telegraph emitter.
pub fn telegraph_side_peak(p_on: f64, tau_blink: f64, tau: f64) -> f64 {
    1.0 + (1.0 - p_on) / p_on * (-tau.abs() / tau_blink).exp()
}

/// Pulsed coherent light: Poisson photon number per pulse, exponential
/// emission delays.
pub fn coherent_stream(n_pulses: u64, mean: f64, period_ps: f64, t1_ps: f64, seed: u64) -> Vec<PhotonRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(mean).unwrap();
    let mut out = Vec::new();
    for k in 0..n_pulses {
        let n = poisson.sample(&mut rng) as usize;
        let start = out.len();
        for _ in 0..n {
            let e: f64 = Exp1.sample(&mut rng);
            out.push(PhotonRecord {
                t_abs: k as f64 * period_ps + t1_ps * e,
                nu_offset: Frequency::ZERO,
                pol: Polarization::H,
                pulse_index: k,
                origin: Origin::Signal,
            });
        }
        out[start..].sort_by(|a, b| a.t_abs.total_cmp(&b.t_abs));
    }
    out.sort_by(|a, b| a.t_abs.total_cmp(&b.t_abs));
    out
}

/// Homogeneous Poisson click train on [0, span) ps.
pub fn poisson_clicks(rate_hz: f64, span_ps: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = 1e12 / rate_hz;
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += gap * rng.gen::<f64>().max(f64::MIN_POSITIVE).ln().abs();
        if t >= span_ps as f64 {
            return out;
        }
        out.push(t as u64);
    }
}
