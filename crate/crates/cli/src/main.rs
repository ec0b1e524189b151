use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use yagitrack::io::config::to_toml;
use yagitrack::io::detections::simulate_scenario;
use yagitrack::io::validation::{median, run_ensemble};
use yagitrack::io::{
    emit_detections, emit_pattern_csv, emit_signal_trace, emit_track, emit_trajectory, load_calibration,
    load_detections, load_receiver, load_scenario, load_towers, load_tracker_config, write_receiver,
};
use yagitrack::observation::calibrate;
use yagitrack::{track, Result, TrackerConfig, YagiPattern};

#[derive(Parser)]
#[command(name = "yagitrack", version, about = "Track radio-tagged animals from Yagi tower signal-strength logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory from a scenario file and write its detection log.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Replace the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the receiver constants from calibration readings.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        /// Tower file, needed when the readings give tag positions rather than ξ.
        #[arg(long)]
        towers: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        z_min: f64,
        #[arg(long, default_value_t = 255.0)]
        z_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a track from a detection log.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        towers: PathBuf,
        /// Tracker settings; missing keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Receiver file written by `calibrate`; overrides the tracker settings.
        #[arg(long)]
        receiver: Option<PathBuf>,
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Tabulate the antenna pattern.
    Pattern {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        step_deg: f64,
        /// Effective array length [m].
        #[arg(long)]
        effective_length: Option<f64>,
        /// Wavelength [m].
        #[arg(long)]
        wavelength: Option<f64>,
    },
    /// Run the simulated validation experiment over several seeds.
    Validate {
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
}

const MAX_FINAL_ERROR: f64 = 3000.0;
const MAX_RMS_DISPLAY: f64 = 30.0;

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            scenario,
            detections,
            trajectory,
            seed,
        } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let truth = simulate_scenario(&sc)?;
            let n = emit_detections(&truth, &sc, &detections)?;
            if let Some(path) = trajectory {
                emit_trajectory(&truth, &path, &to_toml(&sc)?)?;
            }
            println!("{n} detections written to {}", detections.display());
        }
        Command::Calibrate {
            input,
            towers,
            z_min,
            z_max,
            out,
        } => {
            let sites = match towers {
                Some(p) => load_towers(&p)?,
                None => Vec::new(),
            };
            let samples = load_calibration(&input, &sites, &YagiPattern::study_antenna())?;
            let fit = calibrate(&samples, z_min, z_max)?;
            let note = format!("fitted from {} readings, rms residual {:.4}", samples.len(), fit.residual_rms);
            write_receiver(&fit.model, &out, &note)?;
            println!("b = {:.6}, P0 = {:.6e} ({note})", fit.model.b, fit.model.p0);
        }
        Command::Track {
            detections,
            towers,
            config,
            receiver,
            track: track_path,
            trace,
        } => {
            let mut cfg = match config {
                Some(p) => load_tracker_config(&p)?,
                None => TrackerConfig::default(),
            };
            if let Some(p) = receiver {
                cfg.receiver = load_receiver(&p)?;
            }
            cfg.validate()?;
            let sites = load_towers(&towers)?;
            let log = load_detections(&detections, &sites)?;
            let result = track(&log, &sites, &cfg)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let echo = to_toml(&cfg)?;
            emit_track(&result, &track_path, &echo)?;
            if let Some(p) = trace {
                emit_signal_trace(&result, &log, &p, &echo)?;
            }
            println!(
                "{} points in {} segment(s) written to {}",
                result.points.len(),
                result.segments(),
                track_path.display()
            );
        }
        Command::Pattern {
            out,
            step_deg,
            effective_length,
            wavelength,
        } => {
            let study = YagiPattern::study_antenna();
            let pattern = YagiPattern::new(
                effective_length.unwrap_or(study.effective_length()),
                wavelength.unwrap_or(study.wavelength()),
            )?;
            let echo = format!(
                "effective_length = {}\nwavelength = {}",
                pattern.effective_length(),
                pattern.wavelength()
            );
            emit_pattern_csv(&pattern, step_deg, &out, &echo)?;
        }
        Command::Validate { seeds } => {
            let seeds: Vec<u64> = (1..=seeds).collect();
            let outcomes = run_ensemble(&seeds).into_iter().collect::<Result<Vec<_>>>()?;
            for o in &outcomes {
                println!(
                    "seed {:3}: final error {:8.1} m, rms(Z_hat - Z) {:6.2}",
                    o.seed, o.final_error, o.rms_display
                );
            }
            let mut errors: Vec<f64> = outcomes.iter().map(|o| o.final_error).collect();
            let mut rms: Vec<f64> = outcomes.iter().map(|o| o.rms_display).collect();
            let (e, r) = (median(&mut errors), median(&mut rms));
            let e_ok = e < MAX_FINAL_ERROR;
            let r_ok = r < MAX_RMS_DISPLAY;
            println!("{} median final error {e:.1} m (limit {MAX_FINAL_ERROR} m)", verdict(e_ok));
            println!("{} median rms(Z_hat - Z) {r:.2} (limit {MAX_RMS_DISPLAY})", verdict(r_ok));
            return Ok(e_ok && r_ok);
        }
    }
    Ok(true)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
