//! Scenario orchestration: emitter → conversion → bench → detectors → analysis.
//!
//! Pulse blocks are generated, converted, routed and thinned by the detectors
//! in parallel. Dead time, correlation and event writing then consume the
//! blocks in order, so every output is independent of the thread count.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{
    fit_conversion_curve, fit_lifetime, fit_power_curve, g2_zero, hom_visibility, indistinguishability, peak_areas,
    CorrelationHistogram, DecayHistogram, FitReport, StreamingCorrelator,
};
use crate::bench::{
    hbt_route, hom_route, merge_channels, Arrival, DetectorChannel, DetectorParams, HomConfig, HomPolarization,
    RawClicks,
};
use crate::emitter::{emit_block, EmissionPlan, EmitterParams, ExcitationConfig};
use crate::error::{Error, Result};
use crate::io::config::{EventOutput, Measurement, SweepKind, SweepSection};
use crate::io::events::{EventWriter, PhotonEvent, RecordKind};
use crate::io::plot::{self, Series};
use crate::io::{HomSummary, Rates, Report, Scenario, SweepPoint, SweepSummary, ValueSigma};
use crate::photon::{Origin, PhotonRecord};
use crate::qfc::{convert_block, ConversionParams, SeedLaser};
use crate::rng::{stream, Stage};
use crate::units::Duration;

/// Seed offset between consecutive sweep points.
pub const SWEEP_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// One detection arrangement fed from the bench input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Single detector, start-stop histogram against the pulse clock.
    Lifetime,
    Hbt,
    HomParallel,
    HomCross,
}

impl Channel {
    /// Stream slot; keeps the random streams of the arrangements apart.
    fn slot(self) -> u16 {
        match self {
            Channel::Lifetime => 0,
            Channel::Hbt => 1,
            Channel::HomParallel => 2,
            Channel::HomCross => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Lifetime => "lifetime",
            Channel::Hbt => "hbt",
            Channel::HomParallel => "hom_parallel",
            Channel::HomCross => "hom_cross",
        }
    }

    fn detectors(self) -> usize {
        if self == Channel::Lifetime {
            1
        } else {
            2
        }
    }
}

fn channels_for(measurements: &[Measurement]) -> Vec<Channel> {
    let mut out = Vec::new();
    for m in measurements {
        let add: &[Channel] = match m {
            Measurement::Lifetime => &[Channel::Lifetime],
            Measurement::Hbt => &[Channel::Hbt],
            Measurement::Hom => &[Channel::HomParallel, Channel::HomCross],
        };
        for c in add {
            if !out.contains(c) {
                out.push(*c);
            }
        }
    }
    out
}

/// Click bookkeeping of one arrangement, summed over its detectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelStats {
    /// Clicks before dead time, indexed by photon origin.
    pub photon_clicks: [u64; 3],
    pub dark_clicks: u64,
    pub dead_time_losses: u64,
    /// Clicks after dead time.
    pub clicks: u64,
}

/// Photon counts along the chain, before any detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    /// Photons in the collection fibre.
    pub emitted: u64,
    /// Converted photons leaving the conversion stage (noise excluded).
    pub converted: u64,
    pub conversion_noise: u64,
    /// Photons reaching the bench.
    pub bench_input: u64,
}

impl std::ops::AddAssign for StageCounts {
    fn add_assign(&mut self, o: Self) {
        self.emitted += o.emitted;
        self.converted += o.converted;
        self.conversion_noise += o.conversion_noise;
        self.bench_input += o.bench_input;
    }
}

/// Raw measurement results of one run.
#[derive(Debug, Clone)]
pub struct Measured {
    pub counts: StageCounts,
    /// `n_pulses · period`, ps.
    pub acquisition_ps: f64,
    pub decay: Option<DecayHistogram>,
    pub correlations: Vec<(Channel, CorrelationHistogram)>,
    pub stats: Vec<(Channel, ChannelStats)>,
}

impl Measured {
    pub fn histogram(&self, channel: Channel) -> Option<&CorrelationHistogram> {
        self.correlations.iter().find(|(c, _)| *c == channel).map(|(_, h)| h)
    }

    pub fn stats(&self, channel: Channel) -> Option<&ChannelStats> {
        self.stats.iter().find(|(c, _)| *c == channel).map(|(_, s)| s)
    }

    /// Detected rate (Hz) of one arrangement, all detectors summed.
    pub fn count_rate_hz(&self, channel: Channel) -> Option<f64> {
        self.stats(channel).map(|s| s.clicks as f64 / (self.acquisition_ps * 1e-12))
    }
}

struct Setup {
    emitter: EmitterParams,
    excitation: ExcitationConfig,
    plan: EmissionPlan,
    conversion: Option<(ConversionParams, SeedLaser)>,
    input_transmission: f64,
    splitter_ratio: f64,
    hom: [HomConfig; 2],
    detectors: [DetectorParams; 2],
    seed: u64,
    period_ps: f64,
    channels: Vec<Channel>,
}

impl Setup {
    fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let (a, b) = scenario.detector_params();
        Ok(Setup {
            emitter: scenario.emitter_params(),
            excitation: scenario.excitation_config(),
            plan: scenario.plan(),
            conversion: scenario.conversion_params()?,
            input_transmission: scenario.bench.input_transmission,
            splitter_ratio: scenario.bench.splitter_ratio,
            hom: [scenario.hom_config(HomPolarization::Parallel), scenario.hom_config(HomPolarization::Cross)],
            detectors: [a, b],
            seed: scenario.run.seed,
            period_ps: scenario.period().ps(),
            channels: channels_for(&scenario.bench.measurements),
        })
    }
}

struct BlockOut {
    span_end: f64,
    photons: Option<Vec<PhotonRecord>>,
    raw: Vec<Vec<RawClicks>>,
    counts: StageCounts,
}

fn process_block(setup: &Setup, block: u64, keep_photons: bool) -> Result<BlockOut> {
    let (first, end) = setup.plan.block_range(block, setup.excitation.n_pulses);
    let span = (first as f64 * setup.period_ps, end as f64 * setup.period_ps);
    let mut counts = StageCounts::default();

    let mut photons = emit_block(&setup.emitter, &setup.excitation, &setup.plan, setup.seed, block)?;
    counts.emitted = photons.len() as u64;
    if let Some((params, laser)) = &setup.conversion {
        photons = convert_block(&photons, params, laser, span, setup.period_ps, setup.seed, block)?;
        counts.conversion_noise = photons.iter().filter(|p| p.origin == Origin::Noise).count() as u64;
        counts.converted = photons.len() as u64 - counts.conversion_noise;
    }
    if setup.input_transmission < 1.0 {
        let mut rng = stream(setup.seed, Stage::Filter, 0, block);
        let t = setup.input_transmission;
        photons.retain(|_| rng.gen::<f64>() < t);
    }
    counts.bench_input = photons.len() as u64;

    let mut raw = Vec::with_capacity(setup.channels.len());
    for &ch in &setup.channels {
        let slot = ch.slot();
        let routed: Vec<Vec<Arrival>> = match ch {
            Channel::Lifetime => vec![photons.iter().map(|p| Arrival { t: p.t_abs, origin: p.origin }).collect()],
            Channel::Hbt => {
                hbt_route(&photons, setup.splitter_ratio, &mut stream(setup.seed, Stage::HbtRouting, slot, block)).into()
            }
            Channel::HomParallel | Channel::HomCross => {
                let config = &setup.hom[usize::from(ch == Channel::HomCross)];
                let mut rng = stream(setup.seed, Stage::HomRouting, slot, block);
                hom_route(&photons, config, &setup.emitter, &mut rng).into()
            }
        };
        let per_detector = routed
            .iter()
            .enumerate()
            .map(|(d, arrivals)| {
                let stage = if d == 0 { Stage::DetectorA } else { Stage::DetectorB };
                RawClicks::prepare(&setup.detectors[d], arrivals, span, &mut stream(setup.seed, stage, slot, block))
            })
            .collect();
        raw.push(per_detector);
    }
    Ok(BlockOut { span_end: span.1, photons: keep_photons.then_some(photons), raw, counts })
}

/// Writes merged clicks once no later block can precede them.
struct ClickSink {
    writer: EventWriter<BufWriter<File>>,
    pending: [Vec<u64>; 2],
    n: usize,
}

impl ClickSink {
    fn push(&mut self, released: &[Vec<u64>], horizon: Option<f64>) -> Result<()> {
        for (p, r) in self.pending.iter_mut().zip(released) {
            p.extend_from_slice(r);
        }
        let cut = |v: &Vec<u64>| horizon.map_or(v.len(), |h| v.partition_point(|&t| (t as f64) < h));
        let (ca, cb) = (cut(&self.pending[0]), cut(&self.pending[1]));
        let records = if self.n == 1 {
            merge_channels(&self.pending[0][..ca], &[])
        } else {
            merge_channels(&self.pending[0][..ca], &self.pending[1][..cb])
        };
        for r in &records {
            self.writer.write_click(r)?;
        }
        self.pending[0].drain(..ca);
        self.pending[1].drain(..cb);
        Ok(())
    }
}

struct Sink {
    channel: Channel,
    detectors: Vec<DetectorChannel>,
    lookback: f64,
    correlator: Option<StreamingCorrelator>,
    decay: Option<DecayHistogram>,
    writer: Option<ClickSink>,
}

impl Sink {
    fn push(&mut self, raws: Vec<RawClicks>, span_end: f64) -> Result<()> {
        let released: Vec<Vec<u64>> = self.detectors.iter_mut().zip(raws).map(|(d, r)| d.push(r)).collect();
        self.consume(&released, Some(span_end - self.lookback))
    }

    fn finish(&mut self) -> Result<()> {
        let released: Vec<Vec<u64>> = self.detectors.iter_mut().map(|d| d.finish()).collect();
        self.consume(&released, None)
    }

    fn consume(&mut self, released: &[Vec<u64>], horizon: Option<f64>) -> Result<()> {
        if let Some(d) = &mut self.decay {
            d.add(&released[0]);
        }
        if let Some(c) = &mut self.correlator {
            c.push(&released[0], &released[1], horizon.unwrap_or(f64::INFINITY));
        }
        if let Some(w) = &mut self.writer {
            w.push(released, horizon)?;
        }
        Ok(())
    }

    fn stats(&self) -> ChannelStats {
        let mut s = ChannelStats::default();
        for d in &self.detectors {
            for (acc, n) in s.photon_clicks.iter_mut().zip(d.photon_clicks) {
                *acc += n;
            }
            s.dark_clicks += d.dark_clicks;
            s.dead_time_losses += d.dead_time_losses;
            s.clicks += d.emitted;
        }
        s
    }
}

/// Event file names inside the output directory.
pub fn event_path(dir: &Path, channel: Option<Channel>) -> PathBuf {
    dir.join(format!("{}.phtx", channel.map_or("photons", Channel::name)))
}

/// Runs the measurement chain of a scenario without analysis. Event files
/// are written to `events_dir` when the scenario asks for them.
pub fn measure(scenario: &Scenario, events_dir: Option<&Path>) -> Result<Measured> {
    let setup = Setup::new(scenario)?;
    let an = &scenario.analysis;
    let period = scenario.period();
    let events = events_dir.map_or(EventOutput::None, |_| scenario.output.events);

    let mut sinks = Vec::with_capacity(setup.channels.len());
    for &ch in &setup.channels {
        let n = ch.detectors();
        let detectors: Vec<DetectorChannel> = setup.detectors[..n].iter().map(|d| DetectorChannel::new(*d)).collect();
        let lookback = setup.detectors[..n].iter().map(DetectorParams::lookback_ps).fold(0.0, f64::max);
        let correlator = if n == 2 {
            Some(StreamingCorrelator::new(CorrelationHistogram::symmetric(
                Duration::from_ps(an.bin_width_ps),
                period,
                an.range_periods,
            )?))
        } else {
            None
        };
        let decay = if ch == Channel::Lifetime {
            Some(DecayHistogram::new(Duration::from_ps(an.decay_bin_ps), period)?)
        } else {
            None
        };
        let writer = match (events, events_dir) {
            (EventOutput::Clicks | EventOutput::All, Some(dir)) => Some(ClickSink {
                writer: EventWriter::create(&event_path(dir, Some(ch)), RecordKind::Click, n as u8)?,
                pending: [Vec::new(), Vec::new()],
                n,
            }),
            _ => None,
        };
        sinks.push(Sink { channel: ch, detectors, lookback, correlator, decay, writer });
    }
    let mut photon_writer = match (events, events_dir) {
        (EventOutput::All, Some(dir)) => Some(EventWriter::create(&event_path(dir, None), RecordKind::Photon, 1)?),
        _ => None,
    };

    let n_blocks = setup.plan.n_blocks(setup.excitation.n_pulses);
    let chunk = (2 * rayon::current_num_threads()).max(1) as u64;
    let mut counts = StageCounts::default();
    let mut next = 0;
    while next < n_blocks {
        let hi = (next + chunk).min(n_blocks);
        let keep = photon_writer.is_some();
        let outs: Vec<BlockOut> =
            (next..hi).into_par_iter().map(|b| process_block(&setup, b, keep)).collect::<Result<_>>()?;
        for out in outs {
            counts += out.counts;
            if let (Some(w), Some(photons)) = (&mut photon_writer, &out.photons) {
                for p in photons {
                    w.write_photon(&PhotonEvent::from(p))?;
                }
            }
            for (sink, raws) in sinks.iter_mut().zip(out.raw) {
                sink.push(raws, out.span_end)?;
            }
        }
        next = hi;
    }

    let mut decay = None;
    let mut correlations = Vec::new();
    let mut stats = Vec::new();
    for mut sink in sinks {
        sink.finish()?;
        stats.push((sink.channel, sink.stats()));
        if let Some(c) = sink.correlator.take() {
            correlations.push((sink.channel, c.finish()));
        }
        if let Some(d) = sink.decay.take() {
            decay = Some(d);
        }
        if let Some(w) = sink.writer.take() {
            w.writer.finish()?;
        }
    }
    if let Some(w) = photon_writer {
        w.finish()?;
    }
    Ok(Measured {
        counts,
        acquisition_ps: setup.excitation.n_pulses as f64 * setup.period_ps,
        decay,
        correlations,
        stats,
    })
}

/// Report plus the raw measurement it was derived from.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub measured: Option<Measured>,
    /// First analysis failure, if any. Outputs are then partial.
    pub analysis_error: Option<String>,
}

impl RunOutput {
    /// 0 on success, 3 when an analysis step failed or did not converge.
    pub fn exit_code(&self) -> i32 {
        if self.analysis_error.is_some() {
            3
        } else {
            0
        }
    }
}

struct Analysis<'a> {
    report: &'a mut Report,
    error: Option<String>,
}

impl Analysis<'_> {
    fn fail(&mut self, what: &str, message: String) {
        let text = format!("{what}: {message}");
        self.report.warnings.push(text.clone());
        self.report.partial = true;
        self.error.get_or_insert(text);
    }

    fn check_fit(&mut self, what: &str, fit: Result<FitReport>) -> Option<FitReport> {
        match fit {
            Ok(f) => {
                if !f.converged {
                    self.fail(what, format!("fit did not converge after {} iterations", f.iterations));
                }
                Some(f)
            }
            Err(e) => {
                self.fail(what, e.to_string());
                None
            }
        }
    }
}

/// Runs a scenario end to end. Config and I/O problems are errors; analysis
/// failures yield a partial report and a nonzero exit code.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>) -> Result<RunOutput> {
    scenario.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut report = Report::new(&scenario.run.name, &scenario.digest(), scenario.run.seed, scenario.run.n_pulses);
    let measured = if scenario.bench.measurements.is_empty() { None } else { Some(measure(scenario, out_dir)?) };
    let mut analysis = Analysis { report: &mut report, error: None };
    if let Some(m) = &measured {
        analyse(scenario, m, &mut analysis);
    }
    if let Some(sweep) = &scenario.sweep {
        let summary = run_sweep(scenario, sweep, &mut analysis)?;
        analysis.report.sweep = Some(summary);
    }
    let error = analysis.error;
    if let Some(dir) = out_dir {
        write_outputs(scenario, measured.as_ref(), &report, dir)?;
    }
    Ok(RunOutput { report, measured, analysis_error: error })
}

fn analyse(scenario: &Scenario, m: &Measured, a: &mut Analysis) {
    let an = &scenario.analysis;
    let period = scenario.period();
    let window = Duration::from_ps(an.peak_window * period.ps());
    a.report.emitted_photons = m.counts.emitted;

    if let Some(decay) = &m.decay {
        let fit = fit_lifetime(decay, (Duration::from_ps(an.fit_start_ps), Duration::from_ps(an.fit_stop_ps)));
        a.report.lifetime = a.check_fit("lifetime", fit);
    }
    if let Some(h) = m.histogram(Channel::Hbt) {
        match g2_zero(h, period, window, an.side_peaks) {
            Ok((value, sigma)) => a.report.g2 = Some(ValueSigma { value, sigma }),
            Err(e) => a.fail("g2", e.to_string()),
        }
    }
    if let (Some(par), Some(cross)) = (m.histogram(Channel::HomParallel), m.histogram(Channel::HomCross)) {
        match hom_visibility(par, cross, period, window, an.side_peaks) {
            Ok((visibility, sigma)) => {
                let indist = match a.report.g2 {
                    Some(g) => match indistinguishability(visibility, g.value) {
                        Ok(x) => Some(x),
                        Err(e) => {
                            a.fail("indistinguishability", e.to_string());
                            None
                        }
                    },
                    None => None,
                };
                let centre = |h: &CorrelationHistogram| peak_areas(h, period, window).map_or(0, |p| p.center_area);
                a.report.hom = Some(HomSummary {
                    visibility,
                    sigma,
                    indistinguishability: indist,
                    coincidences_parallel: centre(par),
                    coincidences_cross: centre(cross),
                });
            }
            Err(e) => a.fail("hom", e.to_string()),
        }
    }

    let rate_channel = [Channel::Hbt, Channel::Lifetime, Channel::HomParallel]
        .into_iter()
        .find(|c| m.stats(*c).is_some());
    if let Some(c) = rate_channel {
        let s = m.stats(c).copied().unwrap_or_default();
        let seconds = m.acquisition_ps * 1e-12;
        let converting = scenario.conversion.is_some();
        a.report.rates = Rates {
            count_rate_hz: s.clicks as f64 / seconds,
            corrected_rate_hz: (s.clicks + s.dead_time_losses) as f64 / seconds,
            dark_clicks: s.dark_clicks,
            dead_time_losses: s.dead_time_losses,
            conversion_efficiency: (converting && m.counts.emitted > 0)
                .then(|| m.counts.converted as f64 / m.counts.emitted as f64),
            snr: converting.then(|| snr(&s)),
        };
    }
}

/// Signal clicks over noise-photon and dark clicks.
fn snr(s: &ChannelStats) -> f64 {
    let signal = (s.photon_clicks[Origin::Signal as usize] + s.photon_clicks[Origin::Multiphoton as usize]) as f64;
    let noise = (s.photon_clicks[Origin::Noise as usize] + s.dark_clicks) as f64;
    if noise > 0.0 {
        signal / noise
    } else {
        f64::INFINITY
    }
}

/// Scenario of sweep point `index` with value `value`.
pub fn sweep_point_scenario(scenario: &Scenario, sweep: &SweepSection, index: usize, value: f64) -> Scenario {
    let mut s = scenario.clone();
    s.sweep = None;
    s.output.events = EventOutput::None;
    s.run.n_pulses = sweep.pulses_per_point;
    s.run.seed = scenario.run.seed.wrapping_add((index as u64 + 1).wrapping_mul(SWEEP_SEED_STRIDE));
    s.bench.measurements = vec![Measurement::Hbt];
    match sweep.kind {
        SweepKind::SeedPower => {
            if let Some(c) = s.conversion.as_mut() {
                c.seed_power_mw = value;
            }
        }
        SweepKind::ExcitationPower => s.excitation.power_uw = value,
    }
    s
}

fn run_sweep(scenario: &Scenario, sweep: &SweepSection, a: &mut Analysis) -> Result<SweepSummary> {
    let mut points = Vec::with_capacity(sweep.values.len());
    for (i, &value) in sweep.values.iter().enumerate() {
        let s = sweep_point_scenario(scenario, sweep, i, value);
        let m = measure(&s, None)?;
        let stats = m.stats(Channel::Hbt).copied().unwrap_or_default();
        let seconds = m.acquisition_ps * 1e-12;
        points.push(match sweep.kind {
            SweepKind::SeedPower => {
                let (params, _) = s.conversion_params()?.ok_or_else(|| Error::config("conversion", "missing"))?;
                let scale = params.input_optics * params.passive_transmission();
                let n = m.counts.emitted.max(1) as f64;
                let k = m.counts.converted as f64;
                let surv = k / n;
                SweepPoint {
                    x: value * 1e-3,
                    y: surv / scale,
                    sigma: (k.max(1.0) * (1.0 - surv)).sqrt() / (n * scale),
                    snr: Some(snr(&stats)),
                }
            }
            SweepKind::ExcitationPower => SweepPoint {
                x: value,
                y: stats.clicks as f64 / seconds,
                sigma: (stats.clicks.max(1) as f64).sqrt() / seconds,
                snr: None,
            },
        });
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let sigmas: Vec<f64> = points.iter().map(|p| p.sigma).collect();
    let fit = match sweep.kind {
        SweepKind::SeedPower => {
            let length = scenario.conversion.as_ref().map_or(1.0, |c| c.length_cm);
            fit_conversion_curve(&xy, length, Some(&sigmas))
        }
        SweepKind::ExcitationPower => match sweep.model {
            Some(model) => fit_power_curve(&xy, model, Some(&sigmas)),
            None => Err(Error::config("sweep.model", "missing")),
        },
    };
    let kind = match sweep.kind {
        SweepKind::SeedPower => "seed_power",
        SweepKind::ExcitationPower => "excitation_power",
    };
    let fit = a.check_fit("sweep fit", fit);
    Ok(SweepSummary { kind: kind.into(), points, fit })
}

fn write_outputs(scenario: &Scenario, m: Option<&Measured>, report: &Report, dir: &Path) -> Result<()> {
    report.write(&dir.join("report.json"))?;
    let an = &scenario.analysis;
    let period = scenario.period();
    let window = Duration::from_ps(an.peak_window * period.ps());
    let meta = |extra: Vec<(&'static str, String)>| {
        let mut v = vec![("scenario", scenario.run.name.clone()), ("digest", report.digest.clone()), ("seed", report.seed.to_string())];
        v.extend(extra);
        v
    };

    if let Some(m) = m {
        if scenario.output.histograms {
            for (ch, h) in &m.correlations {
                let areas = peak_areas(h, period, window).ok();
                let g2 = g2_zero(h, period, window, an.side_peaks).ok();
                let fit = match (&areas, g2) {
                    (Some(areas), Some((g, _))) => Some(plot::peak_template(h, period.ps(), areas, an.side_peaks, g)),
                    _ => None,
                };
                let extra = g2.map_or(vec![], |(g, s)| vec![("g2_zero", format!("{g:.6}")), ("g2_sigma", format!("{s:.6}"))]);
                plot::write_histogram_csv(&dir.join(format!("{}.csv", ch.name())), h, fit.as_deref(), &meta(extra))?;
                if scenario.output.plots {
                    let pts: Vec<(f64, f64)> = h.counts.iter().enumerate().map(|(i, &c)| (h.bin_centre(i), c as f64)).collect();
                    plot::write_svg(
                        &dir.join(format!("{}.svg", ch.name())),
                        ch.name(),
                        "tau (ps)",
                        "coincidences",
                        &[Series { label: "counts", points: &pts, line: true }],
                    )?;
                }
            }
            if let Some(d) = &m.decay {
                let fit = report.lifetime.as_ref().map(|f| plot::decay_fit_curve(d, f, (an.fit_start_ps, an.fit_stop_ps)));
                plot::write_decay_csv(&dir.join("decay.csv"), d, fit.as_deref(), &meta(vec![]))?;
                if scenario.output.plots {
                    let pts: Vec<(f64, f64)> = d.counts.iter().enumerate().map(|(k, &c)| (d.bin_centre(k), c as f64)).collect();
                    let fitted: Vec<(f64, f64)> = fit
                        .as_deref()
                        .map(|f| f.iter().enumerate().map(|(k, &y)| (d.bin_centre(k), y)).collect())
                        .unwrap_or_default();
                    plot::write_svg(
                        &dir.join("decay.svg"),
                        "time-resolved emission",
                        "t (ps)",
                        "counts",
                        &[Series { label: "counts", points: &pts, line: false }, Series { label: "fit", points: &fitted, line: true }],
                    )?;
                }
            }
        }
    }

    if let (Some(sweep), Some(cfg)) = (&report.sweep, &scenario.sweep) {
        let fitted = |x: f64| -> f64 {
            let Some(f) = &sweep.fit else { return f64::NAN };
            match cfg.kind {
                SweepKind::SeedPower => {
                    let l = scenario.conversion.as_ref().map_or(1.0, |c| c.length_cm);
                    f.value("eta_max") * ((f.value("eta_nor") * x).sqrt() * l).sin().powi(2)
                }
                SweepKind::ExcitationPower => match cfg.model {
                    Some(crate::analysis::PowerModel::Rabi) => {
                        f.value("rate_max") * (0.5 * std::f64::consts::PI * (x / f.value("p_pi")).sqrt()).sin().powi(2)
                    }
                    Some(crate::analysis::PowerModel::Saturation) => {
                        f.value("rate_max") * x / (x + f.value("p_sat"))
                    }
                    None => f64::NAN,
                },
            }
        };
        let (columns, rows): (&[&str], Vec<Vec<f64>>) = match cfg.kind {
            SweepKind::SeedPower => (
                &["P_W", "eta_measured", "eta_sigma", "eta_fit", "snr"],
                sweep.points.iter().map(|p| vec![p.x, p.y, p.sigma, fitted(p.x), p.snr.unwrap_or(f64::NAN)]).collect(),
            ),
            SweepKind::ExcitationPower => (
                &["power_uw", "rate_hz", "rate_sigma", "rate_fit"],
                sweep.points.iter().map(|p| vec![p.x, p.y, p.sigma, fitted(p.x)]).collect(),
            ),
        };
        plot::write_curve_csv(&dir.join("sweep.csv"), columns, &rows, &meta(vec![("kind", sweep.kind.clone())]))?;
        if scenario.output.plots {
            let pts: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.x, p.y)).collect();
            let hi = pts.iter().map(|p| p.0).fold(0.0, f64::max);
            let curve: Vec<(f64, f64)> = (0..=200).map(|i| hi * i as f64 / 200.0).map(|x| (x, fitted(x))).collect();
            let (xl, yl) = match cfg.kind {
                SweepKind::SeedPower => ("seed power (W)", "internal efficiency"),
                SweepKind::ExcitationPower => ("excitation power (uW)", "count rate (Hz)"),
            };
            plot::write_svg(
                &dir.join("sweep.svg"),
                &scenario.run.name,
                xl,
                yl,
                &[Series { label: "simulated", points: &pts, line: false }, Series { label: "fit", points: &curve, line: true }],
            )?;
        }
    }
    Ok(())
}
