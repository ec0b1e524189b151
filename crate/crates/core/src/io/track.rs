//! Track and signal-trace CSV files.
//!
//! A track row holds the posterior state and the upper triangle of its
//! covariance (`c<i><j>`, `i <= j`, state order `x, vx, y, vy, xz`), together
//! with the reading that produced it. `z` is the altitude `xz²`, written for
//! convenience and ignored on reading.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Matrix5;

use super::detections::{format_timestamp, parse_timestamp};
use super::{write_atomic, Detection};
use crate::error::{Error, Result};
use crate::movement::StateVector;
use crate::tracker::{Track, TrackPoint};

const STATE_COLUMNS: [&str; 5] = ["x", "vx", "y", "vy", "xz"];

fn track_header() -> Vec<String> {
    let mut h: Vec<String> = ["segment", "timestamp", "tower_id", "beam_index"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(STATE_COLUMNS.iter().map(|s| s.to_string()));
    h.push("z".into());
    h.push("Z_obs".into());
    h.push("Z_hat".into());
    for i in 0..5 {
        for j in i..5 {
            h.push(format!("c{i}{j}"));
        }
    }
    h
}

/// Writes a track; an empty track gives a header-only file.
pub fn emit_track(track: &Track, path: &Path, comments: &str) -> Result<()> {
    write_atomic(path, comments, |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(track_header())?;
        for p in &track.points {
            let s = p.state.to_vector();
            let mut row = vec![
                p.segment.to_string(),
                format_timestamp(p.t),
                p.tower_id.clone(),
                p.beam.to_string(),
            ];
            row.extend(s.iter().map(|v| v.to_string()));
            row.push(p.state.altitude().to_string());
            row.push(p.z_obs.to_string());
            row.push(p.z_hat.to_string());
            for i in 0..5 {
                for j in i..5 {
                    row.push(p.cov[(i, j)].to_string());
                }
            }
            writer.write_record(&row)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// Reads a track written by [`emit_track`]. Warnings are not stored in the
/// file and come back empty.
pub fn load_track(path: &Path) -> Result<Track> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let headers = reader.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for name in track_header() {
        if !index.contains_key(name.as_str()) {
            return Err(parse_err(1, format!("missing column `{name}`")));
        }
    }

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |name: &str| record.get(index[name]).unwrap_or("");
        let number = |name: &str| -> Result<f64> {
            field(name)
                .parse()
                .map_err(|_| parse_err(line, format!("bad `{name}` value `{}`", field(name))))
        };
        let integer = |name: &str| -> Result<usize> {
            field(name)
                .parse()
                .map_err(|_| parse_err(line, format!("bad `{name}` value `{}`", field(name))))
        };
        let mut s = [0.0; 5];
        for (k, name) in STATE_COLUMNS.iter().enumerate() {
            s[k] = number(name)?;
        }
        let mut cov = Matrix5::zeros();
        for i in 0..5 {
            for j in i..5 {
                let v = number(&format!("c{i}{j}"))?;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        points.push(TrackPoint {
            t: parse_timestamp(field("timestamp")).map_err(|m| parse_err(line, m))?,
            state: StateVector::new(s[0], s[1], s[2], s[3], s[4]),
            cov,
            tower_id: field("tower_id").to_string(),
            beam: integer("beam_index")?,
            z_obs: number("Z_obs")?,
            z_hat: number("Z_hat")?,
            segment: integer("segment")?,
        });
    }
    Ok(Track {
        points,
        warnings: Vec::new(),
    })
}

/// Writes logged and predicted display values side by side. Every detection
/// gets a row; `Z_hat` is empty for readings the tracker did not use.
pub fn emit_signal_trace(track: &Track, detections: &[Detection], path: &Path, comments: &str) -> Result<()> {
    let key = |t: f64, tower: &str, beam: usize| ((t * 1000.0).round() as i64, tower.to_string(), beam);
    let predicted: HashMap<_, f64> = track
        .points
        .iter()
        .map(|p| (key(p.t, &p.tower_id, p.beam), p.z_hat))
        .collect();
    write_atomic(path, comments, |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["timestamp", "tower_id", "beam_index", "Z", "Z_hat"])?;
        for d in detections {
            let z_hat = predicted
                .get(&key(d.t, &d.tower_id, d.beam_index))
                .map_or(String::new(), |z| format!("{z:.3}"));
            writer.write_record([
                format_timestamp(d.t),
                d.tower_id.clone(),
                d.beam_index.to_string(),
                d.z.to_string(),
                z_hat,
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// Writes simulated states as `timestamp, x, vx, y, vy, xz, z`.
pub fn emit_trajectory(trajectory: &[(f64, StateVector)], path: &Path, comments: &str) -> Result<()> {
    write_atomic(path, comments, |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["timestamp", "x", "vx", "y", "vy", "xz", "z"])?;
        for (t, s) in trajectory {
            let mut row = vec![format_timestamp(*t)];
            row.extend(s.to_vector().iter().map(|v| v.to_string()));
            row.push(s.altitude().to_string());
            writer.write_record(&row)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}
