use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn qfcsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfcsim")).args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn simulate_then_reanalyse_offline() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = qfcsim(
        &["simulate", "nir_resonant", "--pulses", "20000000", "--events", "clicks", "--out-dir", "run"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let g2 = report["g2"]["value"].as_f64().unwrap();
    assert!(run.join("report.json").exists() && run.join("scenario.toml").exists());

    // the written scenario reproduces the run
    let again = qfcsim(&["simulate", "run/scenario.toml", "--out-dir", "again"], dir.path());
    assert_eq!(code(&again), 0);
    assert_eq!(stdout_json(&again)["digest"], report["digest"]);

    let out = qfcsim(&["fit-g2", "run/hbt.csv"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let offline = stdout_json(&out)["g2_zero"].as_f64().unwrap();
    assert!((offline - g2).abs() < 1e-12, "{offline} vs {g2}");

    let out = qfcsim(&["correlate", "run/hbt.phtx", "--out-dir", "corr", "--format", "csv"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = qfcsim(&["fit-g2", "corr/correlation.csv"], dir.path());
    assert!((stdout_json(&out)["g2_zero"].as_f64().unwrap() - g2).abs() < 1e-12);

    let out = qfcsim(&["fit-lifetime", "run/lifetime.phtx"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit = stdout_json(&out);
    assert!((fit["params"]["t1_ns"].as_f64().unwrap() - 0.2622).abs() < 0.02, "{fit}");

    let out = qfcsim(&["fit-hom", "run/hom_parallel.csv", "run/hom_cross.csv", "--g2", &g2.to_string()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out)["visibility"].as_f64().unwrap();
    assert!((v - report["hom"]["visibility"].as_f64().unwrap()).abs() < 1e-12);

    let out = qfcsim(&["report", "run/report.json"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn fit_eta_recovers_curve_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("P_W,eta\n");
    for i in 1..=20 {
        let p = 0.0125 * i as f64;
        csv.push_str(&format!("{p},{}\n", 0.567 * ((0.44 * p).sqrt() * 4.8).sin().powi(2)));
    }
    std::fs::write(dir.path().join("eta.csv"), csv).unwrap();
    let out = qfcsim(&["fit-eta", "eta.csv"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit = stdout_json(&out);
    assert!((fit["params"]["eta_max"].as_f64().unwrap() - 0.567).abs() < 1e-6, "{fit}");
    assert!((fit["params"]["eta_nor"].as_f64().unwrap() - 0.44).abs() < 1e-6, "{fit}");
}

#[test]
fn fit_power_recovers_pi_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("power_uw,rate_hz\n");
    for i in 1..=20 {
        let p = 0.1 * i as f64;
        csv.push_str(&format!("{p},{}\n", 1.46e6 * (0.5 * PI * (p / 1.1).sqrt()).sin().powi(2)));
    }
    std::fs::write(dir.path().join("power.csv"), csv).unwrap();
    let out = qfcsim(&["fit-power", "power.csv", "--model", "rabi"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit = stdout_json(&out);
    assert!((fit["params"]["p_pi"].as_f64().unwrap() - 1.1).abs() < 1e-6, "{fit}");
    assert!((fit["params"]["rate_max"].as_f64().unwrap() / 1.46e6 - 1.0).abs() < 1e-6, "{fit}");
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfcsim(&["simulate", "no_such_scenario"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nir_resonant"));

    std::fs::write(dir.path().join("bad.toml"), "[emitter]\nt1_nss = 0.26\n").unwrap();
    assert_eq!(code(&qfcsim(&["simulate", "bad.toml"], dir.path())), 2);

    assert_eq!(code(&qfcsim(&["fit-eta", "missing.csv"], dir.path())), 4);
    assert_eq!(code(&qfcsim(&["correlate", "missing.phtx"], dir.path())), 4);

    std::fs::write(dir.path().join("garbled.csv"), "P_W,eta\n0.1,abc\n").unwrap();
    assert_eq!(code(&qfcsim(&["fit-eta", "garbled.csv"], dir.path())), 4);

    // too few points to fit
    std::fs::write(dir.path().join("short.csv"), "P_W,eta\n0.1,0.2\n0.2,0.3\n").unwrap();
    let c = code(&qfcsim(&["fit-eta", "short.csv"], dir.path()));
    assert!(c == 2 || c == 3, "{c}");

    // a run whose analysis cannot complete reports partially
    let out = qfcsim(&["simulate", "telecom_offres", "--pulses", "2000", "--out-dir", "tiny"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&qfcsim(&["report", "tiny/report.json"], dir.path())), 3);
}
