//! Antenna pattern tables and calibration data.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{check_version, FORMAT_VERSION};
use super::write_atomic;
use crate::antenna::YagiPattern;
use crate::error::{Error, Result};
use crate::movement::StateVector;
use crate::observation::receiver::ReceiverModel;
use crate::observation::{xi, CalibrationSample, TowerSite};

/// Writes `psi_deg, g, g2, dB` from -180° to 180° in steps of `step_deg`.
pub fn emit_pattern_csv(pattern: &YagiPattern, step_deg: f64, path: &Path, comments: &str) -> Result<()> {
    if !(step_deg > 0.0 && step_deg <= 180.0) {
        return Err(Error::precondition("pattern step must be in (0, 180] degrees"));
    }
    let n = (360.0 / step_deg).round() as i64;
    write_atomic(path, comments, |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["psi_deg", "g", "g2", "dB"])?;
        for k in -n / 2..=n - n / 2 {
            let deg = (k as f64 * step_deg).clamp(-180.0, 180.0);
            let psi = deg.to_radians();
            let g = pattern.field_pattern(psi);
            writer.write_record([
                format!("{deg}"),
                format!("{g:.6}"),
                format!("{:.6e}", g * g),
                format!("{:.3}", pattern.relative_db(psi)),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// Reads calibration readings. Either an `xi` column is given directly, or
/// the tag position is given as `x, y, altitude, tower_id, beam_index` and
/// `ξ` is computed from the geometry. `Z` is required in both cases.
pub fn load_calibration(path: &Path, towers: &[TowerSite], pattern: &YagiPattern) -> Result<Vec<CalibrationSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let direct = index.contains_key("xi");
    let required: &[&str] = if direct {
        &["xi", "Z"]
    } else {
        &["x", "y", "altitude", "tower_id", "beam_index", "Z"]
    };
    for name in required {
        if !index.contains_key(name) {
            return Err(parse_err(1, format!("missing column `{name}`")));
        }
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |name: &str| record.get(index[name]).unwrap_or("");
        let number = |name: &str| -> Result<f64> {
            field(name)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad `{name}` value `{}`", field(name))))
        };
        let xi_value = if direct {
            number("xi")?
        } else {
            let tower = towers
                .iter()
                .find(|t| t.id == field("tower_id"))
                .ok_or_else(|| parse_err(line, format!("unknown tower `{}`", field("tower_id"))))?;
            let beam: usize = field("beam_index")
                .parse()
                .map_err(|_| parse_err(line, format!("bad beam index `{}`", field("beam_index"))))?;
            let state = StateVector::with_altitude(number("x")?, 0.0, number("y")?, 0.0, number("altitude")?);
            xi(&state, tower, beam, pattern).map_err(|e| parse_err(line, e.to_string()))?
        };
        out.push(CalibrationSample {
            xi: xi_value,
            z: number("Z")?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverFile {
    format_version: u32,
    receiver: ReceiverModel,
}

pub fn write_receiver(model: &ReceiverModel, path: &Path, comments: &str) -> Result<()> {
    let text = super::config::to_toml(&ReceiverFile {
        format_version: FORMAT_VERSION,
        receiver: *model,
    })?;
    write_atomic(path, comments, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

pub fn load_receiver(path: &Path) -> Result<ReceiverModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ReceiverFile = toml::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    check_version(file.format_version)?;
    file.receiver.validate()?;
    Ok(file.receiver)
}
