//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The four source scenarios run at more pulses than their bundled default so that
//! the statistical error of each figure of merit sits well inside its
//! tolerance; the pulse count and wall time are printed with the result.

mod common;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use common::*;
use qfcsim::analysis::models::{ConversionCurve, Exponential, Lifetime, Rabi, Saturation};
use qfcsim::analysis::{correlate, fit_conversion_curve, g2_zero, merge, peak_areas, CorrelationHistogram, Model};
use qfcsim::bench::{detect, hbt_measure, overlap_for_detuning, Arrival, DetectorParams};
use qfcsim::emitter::{
    calibrate_broadening, homogeneous_fwhm, ou_difference_rms, simulate_emission, EmissionPlan, EmitterParams,
    ExcitationConfig,
};
use qfcsim::io::config::EventOutput;
use qfcsim::io::{bundled, Report, Scenario};
use qfcsim::photon::Origin;
use qfcsim::pipeline::run_scenario;
use qfcsim::rng::{stream, Stage};
use qfcsim::units::{dfg_output_wavelength, Duration, Frequency, Wavelength};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

struct Criterion {
    ok: bool,
    lines: String,
}

impl Criterion {
    fn new() -> Self {
        Criterion { ok: true, lines: String::new() }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        self.ok &= pass;
        let _ = write!(self.lines, "\n    {} {label}: {detail}", if pass { "ok  " } else { "MISS" });
    }

    fn within(&mut self, label: &str, value: f64, sigma: f64, target: f64, tol: f64) {
        let detail = if sigma > 0.0 {
            format!("{value:.4} ± {sigma:.4} (target {target} ± {tol:.4})")
        } else {
            format!("{value:.4} (target {target} ± {tol:.4})")
        };
        self.check(label, (value - target).abs() <= tol, detail);
    }

    fn note(&mut self, label: &str, detail: String) {
        let _ = write!(self.lines, "\n    info {label}: {detail}");
    }
}

struct Run {
    report: Report,
    scenario: Scenario,
    seconds: f64,
}

fn run(name: &str, pulses: u64) -> Run {
    let mut scenario = bundled(name).unwrap();
    scenario.run.n_pulses = pulses;
    let start = Instant::now();
    let out = run_scenario(&scenario, None).unwrap();
    Run { report: out.report, scenario, seconds: start.elapsed().as_secs_f64() }
}

fn g2(r: &Run) -> (f64, f64) {
    r.report.g2.map_or((f64::NAN, f64::NAN), |g| (g.value, g.sigma))
}

fn t1_ns(r: &Run) -> f64 {
    r.report.lifetime.as_ref().map_or(f64::NAN, |f| f.value("t1_ns"))
}

fn criterion_1(runs: &[&Run; 4]) -> Criterion {
    let [nir, tel, nir_off, tel_off] = runs;
    let mut c = Criterion::new();
    // the bundled pulse count, for comparison; statistical errors are ~10x larger
    for r in runs {
        let short = run(&r.report.name, bundled(&r.report.name).unwrap().run.n_pulses);
        let (g, s) = g2(&short);
        let vis = short.report.hom.as_ref().map_or(String::new(), |h| format!(", V_HOM {:.3} ± {:.3}", h.visibility, h.sigma));
        c.note(
            &format!("{} at {:.0e} pulses", r.report.name, short.report.n_pulses as f64),
            format!("T1 {:.4} ns, g2 {g:.3} ± {s:.3}{vis}, {:.1} s", t1_ns(&short), short.seconds),
        );
    }
    for r in runs {
        c.check(
            &r.report.name,
            r.seconds < 300.0 && !r.report.partial,
            format!("{:.1e} pulses in {:.1} s", r.report.n_pulses as f64, r.seconds),
        );
    }
    c.within("T1 NIR (ns)", t1_ns(nir), 0.0, 0.2622, 0.02 * 0.2622);
    c.within("T1 telecom (ns)", t1_ns(tel), 0.0, 0.2621, 0.02 * 0.2621);
    let (g, s) = g2(nir);
    c.within("g2 NIR resonant", g, s, 0.040, 0.006);
    let (g, s) = g2(tel);
    c.within("g2 telecom resonant", g, s, 0.043, 0.006);
    let (g, s) = g2(nir_off);
    c.within("g2 NIR off-resonant", g, s, 0.045, 0.006);
    let (g, s) = g2(tel_off);
    c.within("g2 telecom off-resonant", g, s, 0.051, 0.006);
    for (label, r, v, m) in [("NIR", nir, 0.88, 0.95), ("telecom", tel, 0.60, 0.67)] {
        let hom = r.report.hom.as_ref();
        let vis = hom.map_or((f64::NAN, 0.0), |h| (h.visibility, h.sigma));
        c.within(&format!("V_HOM {label}"), vis.0, vis.1, v, 0.03);
        let ms = hom.and_then(|h| h.indistinguishability).unwrap_or(f64::NAN);
        c.within(&format!("M_s {label}"), ms, 0.0, m, 0.03);
    }
    c
}

fn criterion_2() -> Criterion {
    let (eta_max, eta_nor, length) = (0.567, 0.44, 4.8);
    let model = ConversionCurve { length_cm: length };
    let mut rng = stream(2, Stage::Synthetic, 0, 0);
    let mut points = Vec::new();
    let mut sigmas = Vec::new();
    for i in 1..=20 {
        let p = 12.5e-3 * i as f64;
        let clean = model.eval(p, &[eta_max, eta_nor]);
        let noise: f64 = StandardNormal.sample(&mut rng);
        points.push((p, clean * (1.0 + 0.01 * noise)));
        sigmas.push(0.01 * clean);
    }
    let mut c = Criterion::new();
    match fit_conversion_curve(&points, length, Some(&sigmas)) {
        Ok(fit) => {
            c.check("converged", fit.converged, format!("{} iterations", fit.iterations));
            for (name, truth) in [("eta_max", eta_max), ("eta_nor", eta_nor)] {
                let (v, s) = (fit.value(name), fit.sigma(name));
                c.check(name, (v - truth).abs() <= 2.0 * s, format!("{v:.5} ± {s:.5} (true {truth})"));
            }
            let peak_mw = (PI / (2.0 * length)).powi(2) / fit.value("eta_nor") * 1e3;
            c.within("peak power (mW)", peak_mw, 0.0, 243.0, 5.0);
        }
        Err(e) => c.check("fit", false, e.to_string()),
    }
    c
}

fn criterion_3(runs: &[&Run; 4]) -> Criterion {
    let [nir, tel, nir_off, tel_off] = runs;
    let mut c = Criterion::new();
    for (label, r, target) in [
        ("NIR resonant (Hz)", nir, 1.46e6),
        ("telecom resonant (Hz)", tel, 456e3),
        ("NIR off-resonant (Hz)", nir_off, 1.85e6),
        ("telecom off-resonant (Hz)", tel_off, 856e3),
    ] {
        let rate = r.report.rates.count_rate_hz;
        c.check(label, (rate / target - 1.0).abs() <= 0.05, format!("{rate:.4e} (target {target:.3e} ± 5%)"));
    }
    let efficiency = |r: &Run| r.scenario.detector_params().0.efficiency;
    let ratio = (tel.report.rates.count_rate_hz / efficiency(tel)) / (nir.report.rates.count_rate_hz / efficiency(nir));
    c.within("detector-corrected ratio, resonant", ratio, 0.0, 0.35, 0.02);
    c
}

fn criterion_4(report: &Report) -> Criterion {
    let mut c = Criterion::new();
    let points = report.sweep.as_ref().map_or(&[][..], |s| &s.points[..]);
    c.check("grid points", points.len() == 20, format!("{}", points.len()));
    let worst = points.iter().filter_map(|p| p.snr.map(|s| (p.x * 1e3, s))).fold((f64::NAN, f64::INFINITY), |w, p| {
        if p.1 < w.1 {
            p
        } else {
            w
        }
    });
    c.check(
        "min SNR over the grid",
        points.iter().all(|p| p.snr.is_some_and(|s| s > 250.0)),
        format!("{:.1} at {:.1} mW (target > 250)", worst.1, worst.0),
    );
    c
}

fn criterion_5(nir: &Run, tel: &Run) -> Criterion {
    let mut c = Criterion::new();
    for (label, r, target) in [("NIR", nir, 4.807), ("telecom", tel, 4.803)] {
        let fit = r.report.lifetime.as_ref();
        let (v, s) = fit.map_or((f64::NAN, 0.0), |f| (f.value("fss_ghz"), f.sigma("fss_ghz")));
        c.within(&format!("Δ_fss {label} (GHz)"), v, s, target, 0.02);
    }
    c
}

const PERIOD_PS: f64 = 12_453.3;

fn criterion_6() -> Criterion {
    let mut c = Criterion::new();
    let t1 = 0.2622;
    let mut worst = 0.0f64;
    for i in 0..=5 {
        for j in 0..=5 {
            let (gamma, dnu) = (i as f64 / t1, j as f64 / t1);
            let closed = overlap_for_detuning(Duration::from_ns(t1), gamma, Frequency::from_ghz(dnu));
            worst = worst.max((closed / overlap_oracle(t1, gamma, dnu, 0.0) - 1.0).abs());
        }
    }
    c.check("overlap vs double integral", worst < 0.01, format!("worst relative deviation {worst:.2e} (< 1%)"));

    let light = coherent_stream(20_000_000, 0.1, PERIOD_PS, 262.2, 5);
    let (a, b) = hbt_measure(&light, 0.5, &DetectorParams::ideal(), &DetectorParams::ideal(), 9).unwrap();
    let range = (Duration::from_ps(-6.5 * PERIOD_PS), Duration::from_ps(6.5 * PERIOD_PS));
    let h = correlate(&a, &b, Duration::from_ps(16.0), range).unwrap();
    let (g, s) = g2_zero(&h, Duration::from_ps(PERIOD_PS), Duration::from_ps(0.5 * PERIOD_PS), 3).unwrap();
    c.within("coherent g2", g, s, 1.0, 0.02);

    let mut e = EmitterParams::ideal(Duration::from_ps(262.2));
    e.collection_efficiency = 0.3;
    e.blink_on = Duration::from_ps(100.0 * PERIOD_PS);
    e.blink_off = Duration::from_ps(100.0 * PERIOD_PS);
    let n = 20_000_000;
    let x = ExcitationConfig::resonant_pi(Frequency::from_mhz(80.3), n);
    let photons = simulate_emission(&e, &x, &EmissionPlan::default(), 3).unwrap();
    let (a, b) = hbt_measure(&photons, 0.5, &DetectorParams::ideal(), &DetectorParams::ideal(), 4).unwrap();
    let reach = 300.5 * PERIOD_PS;
    let h = correlate(&a, &b, Duration::from_ps(64.0), (Duration::from_ps(-reach), Duration::from_ps(reach))).unwrap();
    let areas = peak_areas(&h, Duration::from_ps(PERIOD_PS), Duration::from_ps(0.5 * PERIOD_PS)).unwrap();
    let uncorrelated = a.len() as f64 * b.len() as f64 / n as f64;
    let worst = areas
        .side_areas
        .iter()
        .map(|&(k, area)| {
            let oracle = telegraph_side_peak(e.on_fraction(), e.blink_correlation_time().ps(), k as f64 * PERIOD_PS);
            (area as f64 / uncorrelated / oracle - 1.0).abs()
        })
        .fold(0.0, f64::max);
    c.check(
        "blinking side peaks vs telegraph profile",
        worst < 0.10,
        format!("{} peaks, worst deviation {:.1}% (< 10%)", areas.side_areas.len(), worst * 100.0),
    );
    c
}

fn event_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "phtx"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::new();

    let mut s = bundled("telecom_resonant").unwrap();
    s.run.n_pulses = 2_000_000;
    s.output.events = EventOutput::All;
    let dirs: Vec<_> = [1, 3].iter().map(|_| tempfile::tempdir().unwrap()).collect();
    for (threads, dir) in [1, 3].into_iter().zip(&dirs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_scenario(&s, Some(dir.path())).unwrap());
    }
    let (one, three) = (event_bytes(dirs[0].path()), event_bytes(dirs[1].path()));
    let bytes: usize = one.iter().map(|f| f.1.len()).sum();
    c.check(
        "event files, 1 vs 3 threads",
        !one.is_empty() && one == three,
        format!("{} files, {bytes} bytes, identical: {}", one.len(), one == three),
    );

    let mut rng = stream(7, Stage::Synthetic, 0, 0);
    let mut random_hist = || {
        let mut h =
            CorrelationHistogram::empty(Duration::from_ps(10.0), (Duration::from_ps(-40.0), Duration::from_ps(40.0))).unwrap();
        h.counts.iter_mut().for_each(|v| *v = rng.gen_range(0..1u64 << 40));
        h.singles = (rng.gen_range(0..1 << 40), rng.gen_range(0..1 << 40));
        h.acquisition_ps = rng.gen_range(0..1 << 50);
        h
    };
    let mut associative = true;
    for _ in 0..200 {
        let (a, b, d) = (random_hist(), random_hist(), random_hist());
        associative &= merge(&merge(&a, &b).unwrap(), &d).unwrap() == merge(&a, &merge(&b, &d).unwrap()).unwrap();
    }
    c.check("merge associativity", associative, "200 random triples, bit-exact".into());

    let scenario = bundled("nir_resonant").unwrap();
    let mut e = scenario.emitter_params();
    e.collection_efficiency = 0.3;
    let mut x = scenario.excitation_config();
    x.n_pulses = 20_000_000;
    let photons = simulate_emission(&e, &x, &scenario.plan(), 17).unwrap();
    let ideal = DetectorParams::ideal();
    let (a, b) = hbt_measure(&photons, 0.5, &ideal, &ideal, 18).unwrap();
    let period = scenario.period();
    let g = |a: &[u64], b: &[u64]| {
        let range = (Duration::from_ps(-6.5 * period.ps()), Duration::from_ps(6.5 * period.ps()));
        let h = correlate(a, b, Duration::from_ps(16.0), range).unwrap();
        g2_zero(&h, period, Duration::from_ps(0.5 * period.ps()), 3).unwrap()
    };
    let (g_full, s_full) = g(&a, &b);
    let mut thin_rng = stream(19, Stage::Synthetic, 0, 0);
    let mut thin = |v: &[u64]| v.iter().copied().filter(|_| thin_rng.gen::<f64>() < 0.5).collect::<Vec<u64>>();
    let (ta, tb) = (thin(&a), thin(&b));
    let (g_thin, s_thin) = g(&ta, &tb);
    let joint = (s_full * s_full + s_thin * s_thin).sqrt();
    c.check(
        "thinning invariance of g2",
        (g_full - g_thin).abs() < 3.0 * joint,
        format!("{g_full:.4} ± {s_full:.4} vs {g_thin:.4} ± {s_thin:.4} after 50% thinning"),
    );

    let mut violations = 0usize;
    let mut clicks_seen = 0usize;
    for seed in 0..200u64 {
        let mut r = stream(seed, Stage::Synthetic, 1, 0);
        let mut times: Vec<f64> = (0..400).map(|_| r.gen_range(0.0..2e6)).collect();
        times.sort_by(f64::total_cmp);
        let arrivals: Vec<Arrival> = times.iter().map(|&t| Arrival { t, origin: Origin::Signal }).collect();
        let det = DetectorParams {
            efficiency: 0.9,
            dark_rate_hz: 1e6,
            jitter: Duration::from_ps(20.0),
            dead_time: Duration::from_ns(r.gen_range(0.0..50.0)),
        };
        let clicks = detect(&arrivals, &det, (0.0, 2e6), &mut stream(seed, Stage::DetectorA, 0, 0)).unwrap();
        let dead = det.dead_time.ps().round() as u64;
        clicks_seen += clicks.len();
        violations += clicks.windows(2).filter(|w| w[1] < w[0] + dead).count();
    }
    c.check("dead-time violations", violations == 0, format!("{violations} in {clicks_seen} clicks"));

    let mut worst = 0.0f64;
    let mut jr = stream(8, Stage::Synthetic, 2, 0);
    for _ in 0..200 {
        let x = jr.gen_range(0.05..3.0);
        let cases: [(&dyn Model, f64, Vec<f64>); 5] = [
            (&Exponential, x, vec![jr.gen_range(10.0..1e5), jr.gen_range(0.1..2.0), jr.gen_range(0.0..100.0)]),
            (
                &Lifetime,
                x,
                vec![
                    jr.gen_range(10.0..1e5),
                    jr.gen_range(0.1..2.0),
                    jr.gen_range(0.0..0.9),
                    jr.gen_range(0.5..10.0),
                    jr.gen_range(-3.0..3.0),
                    jr.gen_range(0.0..100.0),
                ],
            ),
            (&ConversionCurve { length_cm: 4.8 }, 0.1 * x, vec![jr.gen_range(0.05..1.0), jr.gen_range(0.05..2.0)]),
            (&Rabi, x, vec![jr.gen_range(10.0..1e5), jr.gen_range(0.1..5.0)]),
            (&Saturation, x, vec![jr.gen_range(10.0..1e5), jr.gen_range(0.1..5.0)]),
        ];
        for (model, x, p) in cases {
            let mut grad = vec![0.0; p.len()];
            model.gradient(x, &p, &mut grad);
            for i in 0..p.len() {
                let h = 1e-6 * p[i].abs().max(1e-3);
                let (mut hi, mut lo) = (p.clone(), p.clone());
                hi[i] += h;
                lo[i] -= h;
                let fd = (model.eval(x, &hi) - model.eval(x, &lo)) / (2.0 * h);
                // entries that vanish relative to the function are compared absolutely
                if (grad[i] - fd).abs() > model.eval(x, &p).abs().max(1.0) * 1e-9 {
                    worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()));
                }
            }
        }
    }
    c.check("Jacobian vs finite differences", worst < 1e-5, format!("worst relative deviation {worst:.2e} (< 1e-5)"));

    let mut worst = 0.0f64;
    for i in 0..=80 {
        for j in 0..=40 {
            let input = 400.0 + 10.0 * i as f64;
            let seed_nm = input + 100.0 + 120.0 * j as f64;
            let out = dfg_output_wavelength(Wavelength::from_nm(input).unwrap(), Wavelength::from_nm(seed_nm).unwrap()).unwrap();
            worst = worst.max((1.0 / out.nm() - (1.0 / input - 1.0 / seed_nm)).abs());
        }
    }
    c.check("energy conservation (1/nm)", worst < 1e-12, format!("worst residual {worst:.2e} (< 1e-12)"));
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::new();
    let t1 = Duration::from_ps(262.2);
    let tc = Duration::from_us(1.0);
    let sep = Duration::from_ps(PERIOD_PS);
    match calibrate_broadening(t1, Frequency::from_mhz(915.0), 0.95, tc, sep) {
        Ok(b) => {
            let lorentz = homogeneous_fwhm(t1, b.pure_dephasing_per_ns).ghz();
            let width_mhz = voigt_fwhm_oracle(lorentz, b.spectral_diffusion_rms.ghz()) * 1e3;
            let spread = ou_difference_rms(b.spectral_diffusion_rms, tc, sep);
            let m = overlap_oracle(t1.ns(), b.pure_dephasing_per_ns, 0.0, spread);
            c.check(
                "solution",
                true,
                format!("γ_fast = {:.4} /ns, σ_sd = {:.1} MHz", b.pure_dephasing_per_ns, b.spectral_diffusion_rms.mhz()),
            );
            c.check("linewidth residual (MHz)", (width_mhz - 915.0).abs() < 1.0, format!("{:.3}", width_mhz - 915.0));
            c.check("overlap residual", (m - 0.95).abs() < 0.005, format!("{:.5}", m - 0.95));
        }
        Err(e) => c.check("solution", false, e.to_string()),
    }
    for (label, fwhm, overlap, corr) in [
        ("below transform limit", 500.0, 0.9, tc),
        ("overlap out of reach", 3000.0, 0.99, Duration::from_ns(1.0)),
        ("overlap above one", 915.0, 1.5, tc),
    ] {
        match calibrate_broadening(t1, Frequency::from_mhz(fwhm), overlap, corr, sep) {
            Ok(_) => c.check(label, false, "accepted".into()),
            Err(e) => c.check(label, !e.to_string().is_empty(), format!("rejected: {e}")),
        }
    }
    c
}

#[test]
fn acceptance() {
    let nir = run("nir_resonant", 1_000_000_000);
    let tel = run("telecom_resonant", 2_000_000_000);
    let nir_off = run("nir_offres", 500_000_000);
    let tel_off = run("telecom_offres", 1_500_000_000);
    let table = [&nir, &tel, &nir_off, &tel_off];
    let sweep = run_scenario(&bundled("seed_power_sweep").unwrap(), None).unwrap().report;

    let results = [
        ("1 source figures of merit", criterion_1(&table)),
        ("2 conversion curve round trip", criterion_2()),
        ("3 rate and efficiency bookkeeping", criterion_3(&table)),
        ("4 SNR over the seed-power grid", criterion_4(&sweep)),
        ("5 beat recovery", criterion_5(&nir, &tel)),
        ("6 oracle equivalence", criterion_6()),
        ("7 property suite", criterion_7()),
        ("8 calibration feasibility", criterion_8()),
    ];
    let mut failed = Vec::new();
    std::io::stdout().lock().write_all(b"\n").unwrap();
    for (name, c) in &results {
        // straight to the handle so the lines survive libtest's output capture
        let line = format!("{} criterion {name}{}\n", if c.ok { "PASS" } else { "FAIL" }, c.lines);
        std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
        if !c.ok {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
