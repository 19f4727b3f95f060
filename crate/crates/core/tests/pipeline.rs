use std::path::Path;

use qfcsim::analysis::{correlate, g2_zero};
use qfcsim::bench::{hbt_measure, DetectorParams};
use qfcsim::emitter::{emit_block, simulate_emission};
use qfcsim::io::config::EventOutput;
use qfcsim::io::events::read_click_channels;
use qfcsim::io::plot::read_histogram_csv;
use qfcsim::io::{bundled, Report};
use qfcsim::pipeline::{event_path, run_scenario, Channel};
use qfcsim::rng::{stream, Stage};
use qfcsim::units::Duration;
use rand::Rng;

fn small(name: &str, pulses: u64) -> qfcsim::io::Scenario {
    let mut s = bundled(name).unwrap();
    s.run.n_pulses = pulses;
    s
}

fn run_in_pool(threads: usize, scenario: &qfcsim::io::Scenario, dir: &Path) {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| run_scenario(scenario, Some(dir)).unwrap());
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "phtx"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn event_files_are_bit_identical_across_runs_and_thread_counts() {
    let mut s = small("telecom_resonant", 2_000_000);
    s.output.events = EventOutput::All;
    let (d1, d2, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_in_pool(1, &s, d1.path());
    run_in_pool(1, &s, d2.path());
    run_in_pool(4, &s, d3.path());
    let (f1, f2, f3) = (files(d1.path()), files(d2.path()), files(d3.path()));
    assert_eq!(f1.len(), 5, "{:?}", f1.iter().map(|f| &f.0).collect::<Vec<_>>());
    assert!(f1.iter().all(|(_, b)| b.len() > 1000));
    assert_eq!(f1, f2);
    assert_eq!(f1, f3);
    let r1 = std::fs::read(d1.path().join("report.json")).unwrap();
    let r3 = std::fs::read(d3.path().join("report.json")).unwrap();
    assert_eq!(r1, r3);
}

#[test]
fn written_outputs_agree_with_in_memory_results() {
    let mut s = small("nir_resonant", 20_000_000);
    s.output.events = EventOutput::Clicks;
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, Some(dir.path())).unwrap();
    assert_eq!(out.exit_code(), 0, "{:?}", out.analysis_error);
    let m = out.measured.as_ref().unwrap();

    let report = Report::read(&dir.path().join("report.json")).unwrap();
    assert_eq!(report, out.report);
    assert_eq!(report.digest, s.digest());

    let hbt = read_histogram_csv(&dir.path().join("hbt.csv")).unwrap();
    assert_eq!(&hbt, m.histogram(Channel::Hbt).unwrap());
    let text = std::fs::read_to_string(dir.path().join("hbt.csv")).unwrap();
    assert!(text.lines().any(|l| l == "tau_ps,counts,fit"));

    // the click file reproduces the histogram offline
    let ch = read_click_channels(&event_path(dir.path(), Some(Channel::Hbt))).unwrap();
    let offline = correlate(&ch[0], &ch[1], Duration::from_ps(hbt.bin_width_ps as f64), (
        Duration::from_ps(hbt.tau_min_ps as f64),
        Duration::from_ps(hbt.tau_max_ps as f64),
    ))
    .unwrap();
    assert_eq!(offline.counts, hbt.counts);

    for f in ["decay.csv", "decay.svg", "hbt.svg", "hom_parallel.csv", "hom_cross.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // beat period of the lifetime trace
    let fss = report.lifetime.as_ref().unwrap().value("fss_ghz");
    assert!((1e3 / fss - 208.0).abs() < 2.0, "{fss}");
}

#[test]
fn analysis_failure_yields_partial_report_and_exit_code_3() {
    let s = small("telecom_offres", 2_000);
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&s, Some(dir.path())).unwrap();
    assert_eq!(out.exit_code(), 3);
    assert!(out.report.partial);
    assert!(!out.report.warnings.is_empty());
    assert!(Report::read(&dir.path().join("report.json")).unwrap().partial);
}

#[test]
fn emission_terminates_where_rounding_hides_a_blink_switch() {
    // this block once looped forever on a switch that fell onto a pulse start
    let s = bundled("telecom_resonant").unwrap();
    let mut x = s.excitation_config();
    x.n_pulses = 2_000_000_000;
    let photons = emit_block(&s.emitter_params(), &x, &s.plan(), s.run.seed, 19_357).unwrap();
    assert!(!photons.is_empty());
}

#[test]
fn normalised_g2_is_invariant_under_bernoulli_thinning() {
    let s = bundled("nir_resonant").unwrap();
    let mut e = s.emitter_params();
    e.collection_efficiency = 0.3;
    let mut x = s.excitation_config();
    x.n_pulses = 20_000_000;
    let photons = simulate_emission(&e, &x, &s.plan(), 17).unwrap();
    let ideal = DetectorParams::ideal();
    let (a, b) = hbt_measure(&photons, 0.5, &ideal, &ideal, 18).unwrap();
    let period = s.period();
    let range = (Duration::from_ps(-6.5 * period.ps()), Duration::from_ps(6.5 * period.ps()));
    let g = |a: &[u64], b: &[u64]| {
        let h = correlate(a, b, Duration::from_ps(16.0), range).unwrap();
        g2_zero(&h, period, Duration::from_ps(0.5 * period.ps()), 3).unwrap()
    };
    let (g_full, s_full) = g(&a, &b);
    let mut rng = stream(19, Stage::Synthetic, 0, 0);
    let mut thin = |v: &[u64]| v.iter().copied().filter(|_| rng.gen::<f64>() < 0.5).collect::<Vec<u64>>();
    let (ta, tb) = (thin(&a), thin(&b));
    let (g_thin, s_thin) = g(&ta, &tb);
    let sigma = (s_full * s_full + s_thin * s_thin).sqrt();
    assert!((g_full - g_thin).abs() < 3.0 * sigma, "{g_full} ± {s_full} vs {g_thin} ± {s_thin}");
}
