use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qfcsim::analysis::{
    correlate_sharded, fit_conversion_curve, fit_lifetime, fit_power_curve, g2_zero, hom_visibility,
    indistinguishability, DecayHistogram, FitReport, PowerModel,
};
use qfcsim::io::config::EventOutput;
use qfcsim::io::events::read_click_channels;
use qfcsim::io::plot::{read_csv, read_histogram_csv, write_histogram_csv};
use qfcsim::io::{bundled, bundled_names, Report, Scenario};
use qfcsim::pipeline::run_scenario;
use qfcsim::units::{Duration, Frequency};
use qfcsim::Error;

#[derive(Parser)]
#[command(name = "qfcsim", version, about = "Quantum-dot single-photon source and frequency-conversion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of excitation pulses.
    #[arg(long, global = true)]
    pulses: Option<u64>,
    /// Output directory. Analysis commands print to stdout without it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Events {
    None,
    Clicks,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Rabi,
    Saturation,
}

#[derive(Args)]
struct Timing {
    /// Laser repetition rate.
    #[arg(long, default_value_t = 80.3)]
    rep_rate_mhz: f64,
}

#[derive(Args)]
struct Peaks {
    #[arg(long, default_value_t = 3)]
    side_peaks: usize,
    /// Integration window as a fraction of the period.
    #[arg(long, default_value_t = 0.5)]
    peak_window: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a scenario file or a bundled scenario by name.
    Simulate {
        config: String,
        /// Overrides which event files are written.
        #[arg(long, value_enum)]
        events: Option<Events>,
    },
    /// Correlates the two channels of a click file.
    Correlate {
        events: PathBuf,
        #[command(flatten)]
        timing: Timing,
        #[arg(long, default_value_t = 16.0)]
        bin_ps: f64,
        /// Range in periods on each side of zero delay.
        #[arg(long, default_value_t = 6.5)]
        range_periods: f64,
    },
    /// g²(0) from a correlation histogram CSV.
    FitG2 {
        histogram: PathBuf,
        #[command(flatten)]
        timing: Timing,
        #[command(flatten)]
        peaks: Peaks,
    },
    /// Lifetime and fine-structure beat from channel 0 of a click file.
    FitLifetime {
        events: PathBuf,
        #[command(flatten)]
        timing: Timing,
        #[arg(long, default_value_t = 4.0)]
        bin_ps: f64,
        #[arg(long, default_value_t = 100.0)]
        fit_start_ps: f64,
        #[arg(long, default_value_t = 2600.0)]
        fit_stop_ps: f64,
    },
    /// HOM visibility from parallel and cross correlation histograms.
    FitHom {
        parallel: PathBuf,
        cross: PathBuf,
        #[command(flatten)]
        timing: Timing,
        #[command(flatten)]
        peaks: Peaks,
        /// g²(0) used for the multiphoton-corrected indistinguishability.
        #[arg(long)]
        g2: Option<f64>,
    },
    /// Conversion efficiency curve; CSV columns P_W, eta.
    FitEta {
        curve: PathBuf,
        #[arg(long, default_value_t = 4.8)]
        length_cm: f64,
    },
    /// Count rate versus excitation power; CSV columns power, rate.
    FitPower {
        curve: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::Rabi)]
        model: Model,
    },
    /// Prints a report written by `simulate`.
    Report { report: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain(_) | Error::Calibration(_) => 2,
        Error::Analysis(_) | Error::BinningMismatch(_) => 3,
        Error::Io { .. } | Error::Parse { .. } | Error::Unordered { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_scenario(config: &str) -> qfcsim::Result<Scenario> {
    let path = Path::new(config);
    if path.exists() {
        return Scenario::from_path(path);
    }
    bundled(config).map_err(|_| Error::Config {
        key: "<scenario>".into(),
        message: format!(
            "{config:?} is neither a file nor a bundled scenario ({})",
            bundled_names().collect::<Vec<_>>().join(", ")
        ),
    })
}

fn emit(common: &Common, name: &str, json: &serde_json::Value, csv: &str) -> qfcsim::Result<()> {
    let (text, ext) = match common.format {
        Format::Json => (serde_json::to_string_pretty(json).expect("serializable") + "\n", "json"),
        Format::Csv => (csv.to_string(), "csv"),
    };
    match &common.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            let path = dir.join(format!("{name}.{ext}"));
            std::fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn fit_csv(fit: &FitReport) -> String {
    let mut out = String::from("param,value,sigma\n");
    for (k, v) in &fit.params {
        out.push_str(&format!("{k},{v},{}\n", fit.sigma(k)));
    }
    out.push_str(&format!("residual_norm,{},\niterations,{},\nconverged,{},\n", fit.residual_norm, fit.iterations, fit.converged));
    out
}

fn emit_fit(common: &Common, name: &str, fit: &FitReport) -> qfcsim::Result<u8> {
    emit(common, name, &serde_json::to_value(fit).expect("serializable"), &fit_csv(fit))?;
    Ok(if fit.converged { 0 } else { 3 })
}

fn curve_points(path: &Path) -> qfcsim::Result<Vec<(f64, f64)>> {
    let (_, header, rows) = read_csv(path)?;
    if header.len() < 2 {
        return Err(Error::Parse { offset: 0, message: format!("{}: need at least two columns", path.display()) });
    }
    Ok(rows.iter().filter(|r| r[0].is_finite() && r[1].is_finite()).map(|r| (r[0], r[1])).collect())
}

fn period(t: &Timing) -> Duration {
    Frequency::from_mhz(t.rep_rate_mhz).period()
}

fn run(cli: &Cli) -> qfcsim::Result<u8> {
    let common = &cli.common;
    match &cli.command {
        Command::Simulate { config, events } => {
            let mut scenario = load_scenario(config)?;
            if let Some(seed) = common.seed {
                scenario.run.seed = seed;
            }
            if let Some(n) = common.pulses {
                scenario.run.n_pulses = n;
            }
            if let Some(e) = events {
                scenario.output.events = match e {
                    Events::None => EventOutput::None,
                    Events::Clicks => EventOutput::Clicks,
                    Events::All => EventOutput::All,
                };
            }
            scenario.validate()?;
            let dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("qfcsim-out").join(&scenario.run.name));
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            let effective = dir.join("scenario.toml");
            std::fs::write(&effective, scenario.to_toml()).map_err(|e| Error::Io { path: effective.clone(), source: e })?;
            let out = run_scenario(&scenario, Some(&dir))?;
            match common.format {
                Format::Json => println!("{}", out.report.to_json()),
                Format::Csv => println!("{}", out.report.summary()),
            }
            eprintln!("outputs in {}", dir.display());
            if let Some(e) = &out.analysis_error {
                eprintln!("analysis failed: {e}");
            }
            Ok(out.exit_code() as u8)
        }
        Command::Correlate { events, timing, bin_ps, range_periods } => {
            let channels = read_click_channels(events)?;
            if channels.len() < 2 {
                return Err(Error::Analysis(format!("{} holds {} channel(s); need two", events.display(), channels.len())));
            }
            let half = Duration::from_ps(range_periods * period(timing).ps());
            let shards = rayon::current_num_threads().max(1);
            let h = correlate_sharded(
                &channels[0],
                &channels[1],
                Duration::from_ps(*bin_ps),
                (Duration::from_ps(-half.ps()), half),
                shards,
            )?;
            match (&common.out_dir, common.format) {
                (Some(dir), Format::Csv) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                    write_histogram_csv(&dir.join("correlation.csv"), &h, None, &[])?;
                }
                _ => {
                    let mut csv = String::from("tau_ps,counts\n");
                    for (k, c) in h.counts.iter().enumerate() {
                        csv.push_str(&format!("{},{c}\n", h.bin_left(k)));
                    }
                    emit(common, "correlation", &serde_json::to_value(&h).expect("serializable"), &csv)?;
                }
            }
            Ok(0)
        }
        Command::FitG2 { histogram, timing, peaks } => {
            let h = read_histogram_csv(histogram)?;
            let window = Duration::from_ps(peaks.peak_window * period(timing).ps());
            let (g, s) = g2_zero(&h, period(timing), window, peaks.side_peaks)?;
            let json = serde_json::json!({ "g2_zero": g, "sigma": s });
            emit(common, "g2", &json, &format!("quantity,value,sigma\ng2_zero,{g},{s}\n"))?;
            Ok(0)
        }
        Command::FitLifetime { events, timing, bin_ps, fit_start_ps, fit_stop_ps } => {
            let channels = read_click_channels(events)?;
            let mut d = DecayHistogram::new(Duration::from_ps(*bin_ps), period(timing))?;
            d.add(channels.first().map_or(&[][..], |c| c.as_slice()));
            let fit = fit_lifetime(&d, (Duration::from_ps(*fit_start_ps), Duration::from_ps(*fit_stop_ps)))?;
            emit_fit(common, "lifetime", &fit)
        }
        Command::FitHom { parallel, cross, timing, peaks, g2 } => {
            let par = read_histogram_csv(parallel)?;
            let perp = read_histogram_csv(cross)?;
            let window = Duration::from_ps(peaks.peak_window * period(timing).ps());
            let (v, s) = hom_visibility(&par, &perp, period(timing), window, peaks.side_peaks)?;
            let m = g2.map(|g| indistinguishability(v, g)).transpose()?;
            let json = serde_json::json!({ "visibility": v, "sigma": s, "indistinguishability": m });
            let mut csv = format!("quantity,value,sigma\nvisibility,{v},{s}\n");
            if let Some(m) = m {
                csv.push_str(&format!("indistinguishability,{m},\n"));
            }
            emit(common, "hom", &json, &csv)?;
            Ok(0)
        }
        Command::FitEta { curve, length_cm } => {
            let pts = curve_points(curve)?;
            let fit = fit_conversion_curve(&pts, *length_cm, None)?;
            emit_fit(common, "eta", &fit)
        }
        Command::FitPower { curve, model } => {
            let pts = curve_points(curve)?;
            let model = match model {
                Model::Rabi => PowerModel::Rabi,
                Model::Saturation => PowerModel::Saturation,
            };
            let fit = fit_power_curve(&pts, model, None)?;
            emit_fit(common, "power", &fit)
        }
        Command::Report { report } => {
            let r = Report::read(report)?;
            match common.format {
                Format::Json => println!("{}", r.to_json()),
                Format::Csv => println!("{}", r.summary()),
            }
            Ok(if r.partial { 3 } else { 0 })
        }
    }
}
