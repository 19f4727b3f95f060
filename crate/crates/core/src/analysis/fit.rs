//! Levenberg–Marquardt least squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Exponential,
    Lifetime,
    ConversionCurve,
    Rabi,
    Saturation,
}

/// A scalar model `y = f(x; p)` with an analytic gradient in `p`.
pub trait Model {
    fn kind(&self) -> ModelKind;
    fn param_names(&self) -> &'static [&'static str];
    fn eval(&self, x: f64, p: &[f64]) -> f64;
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub enum Weights<'a> {
    /// Variance `max(y, 1)` per point.
    Poisson,
    /// Absolute standard deviations.
    Sigmas(&'a [f64]),
    /// Unit weights; uncertainties are rescaled by the reduced χ².
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iterations: usize,
    pub rel_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { lambda0: 1e-3, lambda_up: 10.0, lambda_down: 10.0, max_iterations: 200, rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelKind,
    pub params: BTreeMap<String, f64>,
    pub sigmas: BTreeMap<String, f64>,
    /// `sqrt(χ²)` at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
    /// When false the parameters are the last iterate and not reliable.
    pub converged: bool,
}

impl FitReport {
    pub fn value(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.sigmas.get(name).copied().unwrap_or(f64::NAN)
    }
}

fn inverse_variances(ys: &[f64], weights: Weights) -> Result<Vec<f64>> {
    match weights {
        Weights::Poisson => Ok(ys.iter().map(|y| 1.0 / y.max(1.0)).collect()),
        Weights::Unweighted => Ok(vec![1.0; ys.len()]),
        Weights::Sigmas(s) => {
            if s.len() != ys.len() {
                return Err(Error::Analysis("sigma count does not match data".into()));
            }
            s.iter()
                .map(|&s| {
                    if s > 0.0 && s.is_finite() {
                        Ok(1.0 / (s * s))
                    } else {
                        Err(Error::Analysis(format!("invalid sigma {s}")))
                    }
                })
                .collect()
        }
    }
}

fn chi2(model: &dyn Model, xs: &[f64], ys: &[f64], w: &[f64], p: &[f64]) -> f64 {
    xs.iter().zip(ys).zip(w).map(|((&x, &y), &w)| w * (y - model.eval(x, p)).powi(2)).sum()
}

/// `(JᵀWJ, JᵀWr)` at `p`.
pub fn normal_equations(model: &dyn Model, xs: &[f64], ys: &[f64], w: &[f64], p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let m = p.len();
    let mut a = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    let mut grad = vec![0.0; m];
    for ((&x, &y), &wi) in xs.iter().zip(ys).zip(w) {
        model.gradient(x, p, &mut grad);
        let r = y - model.eval(x, p);
        for i in 0..m {
            g[i] += wi * grad[i] * r;
            for j in 0..=i {
                a[(i, j)] += wi * grad[i] * grad[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    (a, g)
}

/// Minimises `Σ w (y − f(x; p))²` from `p0`.
pub fn least_squares(
    model: &dyn Model,
    xs: &[f64],
    ys: &[f64],
    weights: Weights,
    p0: &[f64],
    options: &LmOptions,
) -> Result<FitReport> {
    let names = model.param_names();
    if p0.len() != names.len() {
        return Err(Error::Analysis(format!("{:?} takes {} parameters", model.kind(), names.len())));
    }
    if xs.len() != ys.len() || xs.len() < names.len() {
        return Err(Error::Analysis(format!("{} points cannot constrain {} parameters", xs.len(), names.len())));
    }
    let w = inverse_variances(ys, weights)?;
    let scale: f64 = ys.iter().zip(&w).map(|(y, w)| w * y * y).sum::<f64>().max(f64::MIN_POSITIVE);

    let mut p = p0.to_vec();
    let mut cost = chi2(model, xs, ys, &w, &p);
    if !cost.is_finite() {
        return Err(Error::Analysis("model is not finite at the starting point".into()));
    }
    let mut lambda = options.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations && !converged {
        iterations += 1;
        let (a, g) = normal_equations(model, xs, ys, &w, &p);
        loop {
            let mut damped = a.clone();
            for i in 0..p.len() {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
            }
            let step = damped.clone().cholesky().map(|c| c.solve(&g)).or_else(|| damped.lu().solve(&g));
            let trial: Option<Vec<f64>> = step.map(|d| p.iter().zip(d.iter()).map(|(p, d)| p + d).collect());
            let trial_cost = trial.as_ref().map_or(f64::INFINITY, |t| chi2(model, xs, ys, &w, t));
            if trial_cost.is_finite() && trial_cost <= cost {
                let drop = cost - trial_cost;
                let t = trial.expect("finite cost implies a step");
                let moved = p.iter().zip(&t).all(|(a, b)| (a - b).abs() <= options.rel_tol * (a.abs() + options.rel_tol));
                p = t;
                cost = trial_cost;
                lambda = (lambda / options.lambda_down).max(1e-12);
                if drop <= options.rel_tol * cost || cost <= 1e-28 * scale || moved {
                    converged = true;
                }
                break;
            }
            lambda *= options.lambda_up;
            if lambda > 1e16 {
                // no downhill step left: already at the minimum
                converged = true;
                break;
            }
        }
    }

    let (a, _) = normal_equations(model, xs, ys, &w, &p);
    let eps = 1e-14 * a.amax().max(f64::MIN_POSITIVE);
    let cov = a.pseudo_inverse(eps).map_err(|e| Error::Analysis(e.to_string()))?;
    let dof = (xs.len() - p.len()).max(1) as f64;
    let inflate = match weights {
        Weights::Unweighted => (cost / dof).sqrt(),
        _ => 1.0,
    };
    let params = names.iter().zip(&p).map(|(n, v)| (n.to_string(), *v)).collect();
    let sigmas = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.to_string(), cov[(i, i)].max(0.0).sqrt() * inflate))
        .collect();
    Ok(FitReport { model: model.kind(), params, sigmas, residual_norm: cost.sqrt(), iterations, converged })
}
