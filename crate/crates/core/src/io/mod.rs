//! File formats, configuration, synthetic detection logs and plot data.

pub mod config;
pub mod detections;
pub mod tables;
pub mod track;
pub mod validation;

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub use config::{load_scenario, load_towers, load_tracker_config, ScenarioConfig, Schedule};
pub use detections::{emit_detections, load_detections, write_detections, Detection};
pub use tables::{emit_pattern_csv, load_calibration, load_receiver, write_receiver};
pub use track::{emit_signal_trace, emit_track, emit_trajectory, load_track};

/// Writes to a temporary file next to `path` and renames it into place, so a
/// failed run never leaves a truncated output. Each line of `comments` is
/// written first with a `# ` prefix.
pub(crate) fn write_atomic<F>(path: &Path, comments: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        for line in comments.lines() {
            writeln!(w, "# {line}").map_err(|e| Error::io(path, e))?;
        }
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
