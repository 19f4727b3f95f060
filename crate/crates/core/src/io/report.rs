//! Summary report of a run, serialized as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::FitReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSigma {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomSummary {
    pub visibility: f64,
    pub sigma: f64,
    /// `None` when no g² measurement accompanies the HOM one.
    pub indistinguishability: Option<f64>,
    pub coincidences_parallel: u64,
    pub coincidences_cross: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Summed detected rate of both HBT detectors.
    pub count_rate_hz: f64,
    /// Count rate with dead-time losses added back.
    pub corrected_rate_hz: f64,
    pub dark_clicks: u64,
    pub dead_time_losses: u64,
    /// Converted photons per photon entering the conversion stage.
    pub conversion_efficiency: Option<f64>,
    /// Signal clicks over conversion-noise and dark clicks.
    pub snr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    /// Present for seed-power sweeps.
    pub snr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub kind: String,
    pub points: Vec<SweepPoint>,
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub digest: String,
    pub seed: u64,
    pub version: String,
    pub n_pulses: u64,
    pub emitted_photons: u64,
    pub lifetime: Option<FitReport>,
    pub g2: Option<ValueSigma>,
    pub hom: Option<HomSummary>,
    pub rates: Rates,
    pub sweep: Option<SweepSummary>,
    pub warnings: Vec<String>,
    /// Set when a stage failed and only part of the results is present.
    pub partial: bool,
}

impl Report {
    pub fn new(name: &str, digest: &str, seed: u64, n_pulses: u64) -> Self {
        Report {
            name: name.to_string(),
            digest: digest.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            n_pulses,
            emitted_photons: 0,
            lifetime: None,
            g2: None,
            hom: None,
            rates: Rates::default(),
            sweep: None,
            warnings: Vec::new(),
            partial: false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { offset: 0, message: format!("{}: {e}", path.display()) })
    }

    /// Human-readable multi-line summary.
    pub fn summary(&self) -> String {
        let mut lines = vec![format!("{} (seed {}, {} pulses)", self.name, self.seed, self.n_pulses)];
        if let Some(l) = &self.lifetime {
            lines.push(format!(
                "  T1 = {:.1} ± {:.1} ps, fss = {:.3} GHz",
                l.value("t1_ns") * 1e3,
                l.sigma("t1_ns") * 1e3,
                l.value("fss_ghz")
            ));
        }
        if let Some(g) = &self.g2 {
            lines.push(format!("  g2(0) = {:.4} ± {:.4}", g.value, g.sigma));
        }
        if let Some(h) = &self.hom {
            let m = h.indistinguishability.map_or(String::new(), |m| format!(", M_s = {m:.3}"));
            lines.push(format!("  V_HOM = {:.3} ± {:.3}{m}", h.visibility, h.sigma));
        }
        if self.rates.count_rate_hz > 0.0 {
            lines.push(format!("  count rate = {:.0} Hz", self.rates.count_rate_hz));
        }
        if let Some(s) = &self.sweep {
            lines.push(format!("  sweep {}: {} points", s.kind, s.points.len()));
            if let Some(f) = &s.fit {
                for (k, v) in &f.params {
                    lines.push(format!("    {k} = {v:.5} ± {:.5}", f.sigma(k)));
                }
            }
        }
        for w in &self.warnings {
            lines.push(format!("  warning: {w}"));
        }
        lines.join("\n")
    }
}
