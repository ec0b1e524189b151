//! Detection logs: CSV reading and writing, and synthetic logs from a
//! simulated trajectory.
//!
//! The CSV header is `tag_id,timestamp,tower_id,beam_index,Z`. Timestamps are
//! ISO-8601 UTC with millisecond precision; plain numbers are read as Unix
//! seconds. Lines starting with `#` are comments.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::Rng;
use serde::Serialize;

use super::config::{ScenarioConfig, Schedule};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::movement::{seeded_rng, simulate, StateVector};
use crate::observation::{sample_power, xi, TowerSite};

/// One logged reading: a tag pulse heard on one beam of one tower.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub tag_id: String,
    /// UTC seconds since the Unix epoch, millisecond precision.
    pub t: f64,
    pub tower_id: String,
    pub beam_index: usize,
    pub z: u8,
}

/// Rounds a time to whole milliseconds.
pub fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

pub fn format_timestamp(t: f64) -> String {
    let ms = (t * 1000.0).round() as i64;
    DateTime::<Utc>::from_timestamp_millis(ms)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| format!("{t:.3}"))
}

pub fn parse_timestamp(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return if v.is_finite() {
            Ok(round_ms(v))
        } else {
            Err(format!("timestamp `{s}` is not finite"))
        };
    }
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc).timestamp_millis() as f64 / 1000.0)
        .map_err(|e| format!("bad timestamp `{s}`: {e}"))
}

#[derive(Serialize)]
struct Row<'a> {
    tag_id: &'a str,
    timestamp: String,
    tower_id: &'a str,
    beam_index: usize,
    #[serde(rename = "Z")]
    z: u8,
}

/// Reads, validates and time-sorts a detection log.
pub fn load_detections(path: &Path, towers: &[TowerSite]) -> Result<Vec<Detection>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let beams: HashMap<&str, usize> = towers.iter().map(|t| (t.id.as_str(), t.beams.len())).collect();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let (c_tag, c_time, c_tower, c_beam, c_z) = (
        column("tag_id")?,
        column("timestamp")?,
        column("tower_id")?,
        column("beam_index")?,
        column("Z")?,
    );

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let t = parse_timestamp(field(c_time)).map_err(|m| parse_err(line, m))?;
        let tower_id = field(c_tower).to_string();
        let n_beams = *beams
            .get(tower_id.as_str())
            .ok_or_else(|| parse_err(line, format!("unknown tower `{tower_id}`")))?;
        let beam_index: usize = field(c_beam)
            .parse()
            .map_err(|_| parse_err(line, format!("bad beam index `{}`", field(c_beam))))?;
        if beam_index >= n_beams {
            return Err(parse_err(line, format!("tower `{tower_id}` has no beam {beam_index}")));
        }
        let z: i64 = field(c_z)
            .parse()
            .map_err(|_| parse_err(line, format!("bad display value `{}`", field(c_z))))?;
        let z = u8::try_from(z).map_err(|_| parse_err(line, format!("display value {z} outside 0..=255")))?;
        out.push(Detection {
            tag_id: field(c_tag).to_string(),
            t,
            tower_id,
            beam_index,
            z,
        });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Writes a detection log atomically; `comments` become `#` lines above the
/// header.
pub fn write_detections(path: &Path, detections: &[Detection], comments: &str) -> Result<()> {
    write_atomic(path, comments, |w| {
        let mut writer = csv::Writer::from_writer(w);
        if detections.is_empty() {
            writer.write_record(["tag_id", "timestamp", "tower_id", "beam_index", "Z"])?;
        }
        for d in detections {
            writer.serialize(Row {
                tag_id: &d.tag_id,
                timestamp: format_timestamp(d.t),
                tower_id: &d.tower_id,
                beam_index: d.beam_index,
                z: d.z,
            })?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// Noise stream used for emission; kept apart from the movement stream so the
/// trajectory does not depend on how many readings are logged.
const EMISSION_STREAM: u64 = 1;

/// Simulated states at the scenario's pulse instants.
pub fn simulate_scenario(scenario: &ScenarioConfig) -> Result<Vec<(f64, StateVector)>> {
    let times = scenario.schedule.pulse_times(scenario.start, scenario.duration);
    let states = simulate(&scenario.movement, &scenario.initial.state(), &times, scenario.seed)?;
    Ok(times.into_iter().zip(states).collect())
}

/// Turns a trajectory into logged readings: the noiseless observable is
/// corrupted by receiver noise, passed through the display map and rounded.
pub fn synthesize_detections<R: Rng + ?Sized>(
    trajectory: &[(f64, StateVector)],
    scenario: &ScenarioConfig,
    towers: &[TowerSite],
    rng: &mut R,
) -> Result<Vec<Detection>> {
    let rx = &scenario.receiver;
    let mut last_window: Vec<Option<i64>> = vec![None; towers.len()];
    let mut out = Vec::new();
    for (t, state) in trajectory {
        for (k, tower) in towers.iter().enumerate() {
            let beam = match scenario.schedule {
                Schedule::Cadence { .. } => tower.best_beam(state.x, state.y),
                Schedule::RoundRobin { dwell, .. } => {
                    let window = ((t - scenario.start) / dwell).floor() as i64;
                    if last_window[k] == Some(window) {
                        continue;
                    }
                    last_window[k] = Some(window);
                    window.rem_euclid(tower.beams.len() as i64) as usize
                }
            };
            let signal = xi(state, tower, beam, &scenario.pattern)?;
            let power = sample_power(signal, rx.p0, rng);
            let z = rx.display_from_xi2(power - rx.p0).round().clamp(0.0, 255.0);
            out.push(Detection {
                tag_id: scenario.tag_id.clone(),
                t: round_ms(*t),
                tower_id: tower.id.clone(),
                beam_index: beam,
                z: z as u8,
            });
        }
    }
    Ok(out)
}

/// Synthesises the log for `trajectory` with the scenario seed and writes it,
/// returning the number of readings.
pub fn emit_detections(trajectory: &[(f64, StateVector)], scenario: &ScenarioConfig, path: &Path) -> Result<usize> {
    let towers = scenario.sites()?;
    let detections = synthesize_detections(trajectory, scenario, &towers, &mut emission_rng(scenario.seed))?;
    write_detections(path, &detections, &format!("seed = {}\n", scenario.seed))?;
    Ok(detections.len())
}

pub fn emission_rng(seed: u64) -> rand_chacha::ChaCha20Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(EMISSION_STREAM);
    rng
}
