//! Click-stream analysis: correlation histograms, peak areas and model fits.

mod fit;
mod histogram;
pub mod models;
mod peaks;

pub use fit::{least_squares, normal_equations, FitReport, LmOptions, Model, ModelKind, Weights};
pub use histogram::{correlate, correlate_sharded, merge, CorrelationHistogram, DecayHistogram, StreamingCorrelator};
pub use models::{fit_conversion_curve, fit_lifetime, fit_power_curve, PowerModel};
pub use peaks::{g2_zero, hom_visibility, indistinguishability, peak_areas, PeakAreas};
