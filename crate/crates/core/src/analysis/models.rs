//! Fit models and the fitting procedures built on them.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::fit::{least_squares, FitReport, LmOptions, Model, ModelKind, Weights};
use super::histogram::DecayHistogram;
use crate::error::{Error, Result};
use crate::units::Duration;

/// `A·exp(−t/T1) + C`, `t` in ns.
#[derive(Debug, Clone, Copy)]
pub struct Exponential;

impl Model for Exponential {
    fn kind(&self) -> ModelKind {
        ModelKind::Exponential
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["amplitude", "t1_ns", "background"]
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (-x / p[1]).exp() + p[2]
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let e = (-x / p[1]).exp();
        out[0] = e;
        out[1] = p[0] * e * x / (p[1] * p[1]);
        out[2] = 1.0;
    }
}

/// `A·exp(−t/T1)·(1 + v·cos(2πΔt + φ)) + C`, `t` in ns, `Δ` in GHz.
#[derive(Debug, Clone, Copy)]
pub struct Lifetime;

impl Model for Lifetime {
    fn kind(&self) -> ModelKind {
        ModelKind::Lifetime
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["amplitude", "t1_ns", "beat_visibility", "fss_ghz", "phase_rad", "background"]
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (-x / p[1]).exp() * (1.0 + p[2] * (TAU * p[3] * x + p[4]).cos()) + p[5]
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let e = (-x / p[1]).exp();
        let (s, c) = (TAU * p[3] * x + p[4]).sin_cos();
        let m = 1.0 + p[2] * c;
        out[0] = e * m;
        out[1] = p[0] * e * m * x / (p[1] * p[1]);
        out[2] = p[0] * e * c;
        out[3] = -p[0] * e * p[2] * s * TAU * x;
        out[4] = -p[0] * e * p[2] * s;
        out[5] = 1.0;
    }
}

/// `η_max·sin²(√(η_nor·P)·L)` with `P` in W and fixed `L` in cm.
#[derive(Debug, Clone, Copy)]
pub struct ConversionCurve {
    pub length_cm: f64,
}

impl Model for ConversionCurve {
    fn kind(&self) -> ModelKind {
        ModelKind::ConversionCurve
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["eta_max", "eta_nor"]
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * ((p[1].max(0.0) * x).sqrt() * self.length_cm).sin().powi(2)
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let nor = p[1].max(1e-300);
        let u = (nor * x).sqrt() * self.length_cm;
        out[0] = u.sin().powi(2);
        out[1] = p[0] * (2.0 * u).sin() * self.length_cm * x.sqrt() / (2.0 * nor.sqrt());
    }
}

/// `R·sin²((π/2)·√(P/P_π))`.
#[derive(Debug, Clone, Copy)]
pub struct Rabi;

impl Model for Rabi {
    fn kind(&self) -> ModelKind {
        ModelKind::Rabi
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["rate_max", "p_pi"]
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (0.5 * PI * (x / p[1]).max(0.0).sqrt()).sin().powi(2)
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let u = 0.5 * PI * (x / p[1]).max(0.0).sqrt();
        out[0] = u.sin().powi(2);
        out[1] = -p[0] * (2.0 * u).sin() * u / (2.0 * p[1]);
    }
}

/// `R·P/(P + P_sat)`.
#[derive(Debug, Clone, Copy)]
pub struct Saturation;

impl Model for Saturation {
    fn kind(&self) -> ModelKind {
        ModelKind::Saturation
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["rate_max", "p_sat"]
    }
    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * x / (x + p[1])
    }
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let d = x + p[1];
        out[0] = x / d;
        out[1] = -p[0] * x / (d * d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModel {
    Rabi,
    Saturation,
}

/// Fits the beat-modulated decay to a start-stop histogram over `window`.
///
/// A plain exponential is fitted first; the beat frequency and phase are then
/// seeded from a periodogram of its residuals before the full fit.
pub fn fit_lifetime(hist: &DecayHistogram, window: (Duration, Duration)) -> Result<FitReport> {
    if hist.bin_width_ps > 25.0 {
        return Err(Error::Analysis(format!(
            "{} ps bins cannot resolve the fine-structure beat; use ≤ 25 ps",
            hist.bin_width_ps
        )));
    }
    let (lo, hi) = (window.0.ps(), window.1.ps());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &c) in hist.counts.iter().enumerate() {
        let t = hist.bin_centre(k);
        if t >= lo && t < hi {
            xs.push(t * 1e-3);
            ys.push(c as f64);
        }
    }
    if xs.len() < 20 {
        return Err(Error::Analysis("fit window holds fewer than 20 bins".into()));
    }
    if ys.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Analysis("decay histogram is empty".into()));
    }

    // background from the late part of the period
    let tail: Vec<f64> = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = hist.bin_centre(*k);
            t > 0.5 * hist.period_ps && t < 0.95 * hist.period_ps
        })
        .map(|(_, &c)| c as f64)
        .collect();
    let c0 = if tail.is_empty() { 0.0 } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    let (mut s0, mut s1) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(&ys) {
        let excess = (y - c0).max(0.0);
        s0 += excess;
        s1 += excess * (x - xs[0]);
    }
    let t1_0 = if s0 > 0.0 { (s1 / s0).max(0.01) } else { 0.25 };
    let head = ys.iter().take(5).sum::<f64>() / 5.0;
    let a0 = ((head - c0).max(1.0)) * (xs[0] / t1_0).exp();

    let options = LmOptions::default();
    let exp_fit = least_squares(&Exponential, &xs, &ys, Weights::Poisson, &[a0, t1_0, c0], &options)?;
    let pe = [exp_fit.value("amplitude"), exp_fit.value("t1_ns"), exp_fit.value("background")];

    let decay: Vec<f64> = xs.iter().map(|&x| pe[0] * (-x / pe[1]).exp()).collect();
    let resid: Vec<f64> = xs.iter().zip(&ys).map(|(&x, &y)| y - Exponential.eval(x, &pe)).collect();
    let norm: f64 = decay.iter().map(|d| d * d).sum();
    let (mut best_f, mut best_re, mut best_im, mut best_pow) = (0.0, 0.0, 0.0, -1.0);
    let mut f = 0.5;
    while f <= 20.0 {
        let (mut re, mut im) = (0.0, 0.0);
        for ((&x, &r), &d) in xs.iter().zip(&resid).zip(&decay) {
            let (s, c) = (TAU * f * x).sin_cos();
            re += r * d * c;
            im -= r * d * s;
        }
        let pow = re * re + im * im;
        if pow > best_pow {
            (best_f, best_re, best_im, best_pow) = (f, re, im, pow);
        }
        f += 0.002;
    }
    let v0 = (2.0 * best_pow.sqrt() / norm).clamp(0.01, 0.95);
    let phi0 = best_im.atan2(best_re);

    let p0 = [pe[0], pe[1], v0, best_f, phi0, pe[2]];
    let mut report = least_squares(&Lifetime, &xs, &ys, Weights::Poisson, &p0, &options)?;
    report.iterations += exp_fit.iterations;
    let v = report.value("beat_visibility");
    let mut phase = report.value("phase_rad");
    if v < 0.0 {
        report.params.insert("beat_visibility".into(), -v);
        phase += PI;
    }
    report.params.insert("phase_rad".into(), (phase + PI).rem_euclid(TAU) - PI);
    Ok(report)
}

fn check_points(points: &[(f64, f64)], min: usize) -> Result<()> {
    if points.len() < min {
        return Err(Error::Analysis(format!("need at least {min} points, got {}", points.len())));
    }
    let first = points[0].0;
    if points.iter().all(|p| p.0 == first) {
        return Err(Error::Analysis("all points share one abscissa; curve is degenerate".into()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Analysis("points must be finite".into()));
    }
    Ok(())
}

fn weights_for<'a>(sigmas: Option<&'a [f64]>) -> Weights<'a> {
    sigmas.map_or(Weights::Unweighted, Weights::Sigmas)
}

/// Fits `η(P)` (P in W) for a waveguide of known length. Without `sigmas`
/// the uncertainties come from the residual scatter.
pub fn fit_conversion_curve(points: &[(f64, f64)], length_cm: f64, sigmas: Option<&[f64]>) -> Result<FitReport> {
    check_points(points, 4)?;
    if !(length_cm > 0.0) {
        return Err(Error::domain("waveguide length must be positive"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (p_peak, eta_peak) = points.iter().copied().fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
    let nor0 = (PI / (2.0 * length_cm)).powi(2) / p_peak.max(f64::MIN_POSITIVE);
    let model = ConversionCurve { length_cm };
    least_squares(&model, &xs, &ys, weights_for(sigmas), &[eta_peak, nor0], &LmOptions::default())
}

/// Fits a count-rate versus excitation-power curve.
pub fn fit_power_curve(points: &[(f64, f64)], model: PowerModel, sigmas: Option<&[f64]>) -> Result<FitReport> {
    check_points(points, 5)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (p_peak, r_peak) = points.iter().copied().fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
    let options = LmOptions::default();
    match model {
        PowerModel::Rabi => least_squares(&Rabi, &xs, &ys, weights_for(sigmas), &[r_peak, p_peak], &options),
        PowerModel::Saturation => {
            // P_sat where the data first pass 2/3 of the plateau guess
            let plateau = 1.2 * r_peak;
            let mut sorted = points.to_vec();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let half = sorted.iter().find(|p| p.1 >= 0.5 * plateau).map_or(p_peak, |p| p.0);
            least_squares(&Saturation, &xs, &ys, weights_for(sigmas), &[plateau, half.max(f64::MIN_POSITIVE)], &options)
        }
    }
}
