use crate::emitter::EmitterParams;
use crate::photon::{Origin, PhotonRecord};
use crate::units::{Duration, Frequency};

/// Overlap of two exponential wavepackets with lifetime `t1`, pure dephasing
/// `gamma` (1/ns each) and centre detuning `detuning`:
/// `Γ(Γ+2γ) / ((Γ+2γ)² + Δω²)`, i.e. the dephasing factor `Γ/(Γ+2γ)` times a
/// Lorentzian in the detuning with width `Γ+2γ`.
pub fn overlap_for_detuning(t1: Duration, gamma: f64, detuning: Frequency) -> f64 {
    let g = 1.0 / t1.ns();
    let total = g + 2.0 * gamma;
    let dw = detuning.angular_per_ns();
    let dephasing = g / total;
    dephasing * total * total / (total * total + dw * dw)
}

/// `|⟨ψ1|ψ2⟩|²` for two photons of the same emitter.
///
/// Photons of different polarisation never interfere, and only signal photons
/// carry the emitter's coherence: multiphoton and noise photons are treated as
/// distinguishable from everything.
pub fn two_photon_overlap(p1: &PhotonRecord, p2: &PhotonRecord, params: &EmitterParams) -> f64 {
    if p1.pol != p2.pol || p1.origin != Origin::Signal || p2.origin != Origin::Signal {
        return 0.0;
    }
    let detuning = Frequency::from_ghz(p1.nu_offset.ghz() - p2.nu_offset.ghz());
    overlap_for_detuning(params.t1, params.pure_dephasing_per_ns, detuning)
}
