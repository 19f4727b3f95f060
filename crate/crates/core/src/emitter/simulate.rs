use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use super::{excitation_probability, EmitterParams, ExcitationConfig};
use crate::error::{Error, Result};
use crate::photon::{sort_by_time, Origin, PhotonRecord, Polarization};
use crate::rng::{stream, Stage, StreamRng};
use crate::units::{Duration, Frequency};

/// How a run is cut into independently seeded pulse blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmissionPlan {
    pub block_pulses: u64,
}

impl Default for EmissionPlan {
    fn default() -> Self {
        EmissionPlan { block_pulses: 1 << 16 }
    }
}

impl EmissionPlan {
    pub fn n_blocks(&self, n_pulses: u64) -> u64 {
        n_pulses.div_ceil(self.block_pulses)
    }

    pub fn block_range(&self, block: u64, n_pulses: u64) -> (u64, u64) {
        let start = block * self.block_pulses;
        (start, (start + self.block_pulses).min(n_pulses))
    }

    /// The spectral-diffusion process restarts from its stationary law at
    /// every block boundary, so blocks must be long against its memory.
    pub fn validate(&self, params: &EmitterParams, excitation: &ExcitationConfig) -> Result<()> {
        if self.block_pulses == 0 {
            return Err(Error::config("run.block_pulses", "must be at least 1"));
        }
        let block_ps = self.block_pulses as f64 * excitation.period().ps();
        if params.spectral_diffusion_rms.ghz() > 0.0 && block_ps < 100.0 * params.spectral_diffusion_time.ps() {
            return Err(Error::config(
                "run.block_pulses",
                format!(
                    "block of {:.1} µs is not long against the {:.1} µs spectral-diffusion time",
                    block_ps * 1e-6,
                    params.spectral_diffusion_time.ps() * 1e-6
                ),
            ));
        }
        Ok(())
    }
}

/// Stationary Ornstein–Uhlenbeck process sampled at increasing times.
#[derive(Debug, Clone)]
pub struct OuProcess {
    rms: f64,
    tau_ps: f64,
    value: f64,
    time: f64,
}

impl OuProcess {
    pub fn stationary(rms: Frequency, correlation_time: Duration, start: f64, rng: &mut impl Rng) -> Self {
        let rms = rms.ghz();
        let z: f64 = StandardNormal.sample(rng);
        OuProcess { rms, tau_ps: correlation_time.ps(), value: rms * z, time: start }
    }

    /// Value at `t` (ps); `t` must not precede the previous sample.
    pub fn sample_at(&mut self, t: f64, rng: &mut impl Rng) -> f64 {
        if self.rms == 0.0 {
            return 0.0;
        }
        let dt = (t - self.time).max(0.0);
        self.time = self.time.max(t);
        let z: f64 = StandardNormal.sample(rng);
        if self.tau_ps <= 0.0 {
            self.value = self.rms * z;
        } else {
            let decay = (-dt / self.tau_ps).exp();
            self.value = self.value * decay + self.rms * (1.0 - decay * decay).sqrt() * z;
        }
        self.value
    }
}

/// Bright/dark telegraph signal with exponential dwell times.
struct Telegraph {
    on: bool,
    next_switch: f64,
    mean_on: f64,
    mean_off: f64,
}

impl Telegraph {
    fn stationary(params: &EmitterParams, start: f64, rng: &mut StreamRng) -> Self {
        let mean_on = params.blink_on.ps();
        let mean_off = params.blink_off.ps();
        if mean_off <= 0.0 {
            return Telegraph { on: true, next_switch: f64::INFINITY, mean_on, mean_off };
        }
        let on = rng.gen::<f64>() < params.on_fraction();
        let dwell = if on { mean_on } else { mean_off };
        let e: f64 = Exp1.sample(rng);
        Telegraph { on, next_switch: start + dwell * e, mean_on, mean_off }
    }

    fn toggle(&mut self, rng: &mut StreamRng) {
        self.on = !self.on;
        let dwell = if self.on { self.mean_on } else { self.mean_off };
        let e: f64 = Exp1.sample(rng);
        self.next_switch += dwell * e;
    }
}

/// Emission delay after the pulse, drawn from the beat-modulated exponential.
fn emission_delay(params: &EmitterParams, rng: &mut StreamRng) -> f64 {
    let t1 = params.t1.ps();
    let v = params.beat_visibility;
    let w = params.fss.angular_per_ns() * 1e-3;
    loop {
        let e: f64 = Exp1.sample(rng);
        let t = t1 * e;
        if v == 0.0 || rng.gen::<f64>() * (1.0 + v) <= 1.0 + v * (w * t + params.beat_phase).cos() {
            return t;
        }
    }
}

/// Failures before the first success of a Bernoulli(p) sequence.
fn geometric(p: f64, rng: &mut StreamRng) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    let k = (u.ln() / (-p).ln_1p()).floor();
    if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

/// Photons reaching the collection fibre from pulses of one block, time-ordered.
///
/// Only pulses that deliver at least one photon are visited: the gap to the
/// next such pulse inside a bright interval is drawn geometrically.
pub fn emit_block(
    params: &EmitterParams,
    excitation: &ExcitationConfig,
    plan: &EmissionPlan,
    seed: u64,
    block: u64,
) -> Result<Vec<PhotonRecord>> {
    let (first, end) = plan.block_range(block, excitation.n_pulses);
    let period = excitation.period().ps();
    let mut rng = stream(seed, Stage::Emission, 0, block);

    let p_exc = excitation_probability(excitation)?;
    let beta = params.collection_efficiency;
    let eps = params.multiphoton_prob;
    // outcomes of an excited pulse that leave something in the fibre
    let p_signal_only = beta * (1.0 - eps * beta);
    let p_multi_only = (1.0 - beta) * eps * beta;
    let p_both = eps * beta * beta;
    let p_delivered = p_signal_only + p_multi_only + p_both;
    let p_pulse = p_exc * p_delivered;

    let block_start = first as f64 * period;
    let mut telegraph = Telegraph::stationary(params, block_start, &mut rng);
    let mut ou = OuProcess::stationary(
        params.spectral_diffusion_rms,
        params.spectral_diffusion_time,
        block_start,
        &mut rng,
    );

    let mut out = Vec::with_capacity(((end - first) as f64 * p_pulse * 1.1) as usize + 16);
    if p_pulse <= 0.0 {
        return Ok(out);
    }
    let mut pulse = first;
    while pulse < end {
        // advance to a bright interval covering `pulse`
        let t = pulse as f64 * period;
        while telegraph.next_switch <= t {
            telegraph.toggle(&mut rng);
        }
        if !telegraph.on {
            let next = (telegraph.next_switch / period).ceil() as u64;
            telegraph.toggle(&mut rng);
            pulse = next.max(pulse + 1);
            continue;
        }
        // pulses whose start lies before the switch stay bright; `pulse` always
        // does, even when rounding puts the switch on its start
        let bright_end = ((telegraph.next_switch / period).ceil() as u64).max(pulse + 1).min(end);
        let skip = geometric(p_pulse, &mut rng);
        if skip >= bright_end - pulse {
            pulse = bright_end;
            continue;
        }
        pulse += skip;
        let start = pulse as f64 * period;
        let u = rng.gen::<f64>() * p_delivered;
        let (signal, multi) = if u < p_signal_only {
            (true, false)
        } else if u < p_signal_only + p_multi_only {
            (false, true)
        } else {
            (true, true)
        };
        let mut pending = [(0.0, Origin::Signal); 2];
        let mut n = 0;
        if signal {
            pending[n] = (start + emission_delay(params, &mut rng), Origin::Signal);
            n += 1;
        }
        if multi {
            pending[n] = (start + emission_delay(params, &mut rng), Origin::Multiphoton);
            n += 1;
        }
        if n == 2 && pending[1].0 < pending[0].0 {
            pending.swap(0, 1);
        }
        for &(t_abs, origin) in &pending[..n] {
            let nu = ou.sample_at(t_abs, &mut rng);
            out.push(PhotonRecord {
                t_abs,
                nu_offset: Frequency::from_ghz(nu),
                pol: Polarization::H,
                pulse_index: pulse,
                origin,
            });
        }
        pulse += 1;
    }
    sort_by_time(&mut out);
    Ok(out)
}

/// Whole emitted stream for `excitation.n_pulses` pulses. Blocks are generated
/// in parallel; the result does not depend on the number of worker threads.
pub fn simulate_emission(
    params: &EmitterParams,
    excitation: &ExcitationConfig,
    plan: &EmissionPlan,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    params.validate()?;
    excitation.validate()?;
    plan.validate(params, excitation)?;
    let blocks: Vec<Vec<PhotonRecord>> = (0..plan.n_blocks(excitation.n_pulses))
        .into_par_iter()
        .map(|b| emit_block(params, excitation, plan, seed, b))
        .collect::<Result<_>>()?;
    let mut out: Vec<PhotonRecord> = blocks.into_iter().flatten().collect();
    // blocks are disjoint in time except for photons emitted after the next
    // block's first pulse, which needs a delay of a full period
    sort_by_time(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Frequency;

    fn excitation(n: u64) -> ExcitationConfig {
        ExcitationConfig::resonant_pi(Frequency::from_mhz(80.3), n)
    }

    #[test]
    fn deterministic_per_seed() {
        let mut p = EmitterParams::ideal(Duration::from_ns(0.2622));
        p.collection_efficiency = 0.1;
        p.multiphoton_prob = 0.05;
        p.spectral_diffusion_rms = Frequency::from_mhz(200.0);
        p.blink_off = Duration::from_ns(100.0);
        let plan = EmissionPlan { block_pulses: 10_000 };
        let a = simulate_emission(&p, &excitation(50_000), &plan, 3).unwrap();
        let b = simulate_emission(&p, &excitation(50_000), &plan, 3).unwrap();
        let c = simulate_emission(&p, &excitation(50_000), &plan, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ideal_source_emits_one_photon_per_pulse() {
        let p = EmitterParams::ideal(Duration::from_ns(0.2622));
        let photons = simulate_emission(&p, &excitation(1000), &EmissionPlan::default(), 1).unwrap();
        assert_eq!(photons.len(), 1000);
        for (i, ph) in photons.iter().enumerate() {
            assert_eq!(ph.pulse_index, i as u64);
            let start = i as f64 * excitation(1).period().ps();
            assert!(ph.t_abs >= start);
            assert_eq!(ph.origin, Origin::Signal);
        }
    }

    #[test]
    fn block_too_short_for_diffusion_memory() {
        let mut p = EmitterParams::ideal(Duration::from_ns(0.2622));
        p.spectral_diffusion_rms = Frequency::from_mhz(100.0);
        p.spectral_diffusion_time = Duration::from_us(10.0);
        let plan = EmissionPlan { block_pulses: 1000 };
        assert!(matches!(plan.validate(&p, &excitation(10)), Err(Error::Config { .. })));
    }

    #[test]
    fn geometric_mean() {
        let mut rng = stream(1, Stage::Synthetic, 0, 0);
        let n = 200_000;
        let p = 0.05;
        let mean = (0..n).map(|_| geometric(p, &mut rng) as f64).sum::<f64>() / n as f64;
        let expected = (1.0 - p) / p;
        assert!((mean - expected).abs() < 4.0 * ((1.0 - p) / (p * p) / n as f64).sqrt());
    }
}
