//! TOML configuration files.
//!
//! Tower positions are projected planar metres. Beam directions are given as
//! compass bearings in degrees (clockwise from north) and converted to the
//! mathematical angles used internally.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::antenna::{wrap_angle, YagiPattern};
use crate::error::{Error, Result};
use crate::movement::{MovementParams, StateVector};
use crate::observation::receiver::ReceiverModel;
use crate::observation::TowerSite;
use crate::tracker::TrackerConfig;

/// Schema version written to and required from every configuration file.
pub const FORMAT_VERSION: u32 = 1;

/// Compass bearing in degrees to a mathematical angle in radians.
pub fn compass_to_math(bearing_deg: f64) -> f64 {
    wrap_angle((90.0 - bearing_deg).to_radians())
}

/// Mathematical angle in radians to a compass bearing in `[0, 360)` degrees.
pub fn math_to_compass(angle: f64) -> f64 {
    (90.0 - angle.to_degrees()).rem_euclid(360.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub height: f64,
    /// Compass bearings of the beam boresights [deg].
    pub beams: Vec<f64>,
}

impl TowerSpec {
    pub fn site(&self) -> Result<TowerSite> {
        let site = TowerSite {
            id: self.id.clone(),
            x: self.x,
            y: self.y,
            height: self.height,
            beams: self.beams.iter().map(|b| compass_to_math(*b)).collect(),
        };
        site.validate()?;
        Ok(site)
    }

    pub fn from_site(site: &TowerSite) -> Self {
        TowerSpec {
            id: site.id.clone(),
            x: site.x,
            y: site.y,
            height: site.height,
            beams: site.beams.iter().map(|a| math_to_compass(*a)).collect(),
        }
    }
}

/// A tower configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerFile {
    pub format_version: u32,
    #[serde(rename = "tower")]
    pub towers: Vec<TowerSpec>,
}

impl TowerFile {
    pub fn sites(&self) -> Result<Vec<TowerSite>> {
        let sites = self.towers.iter().map(TowerSpec::site).collect::<Result<Vec<_>>>()?;
        for (i, a) in sites.iter().enumerate() {
            if sites[i + 1..].iter().any(|b| b.id == a.id) {
                return Err(Error::precondition(format!("duplicate tower id `{}`", a.id)));
            }
        }
        Ok(sites)
    }
}

/// How pulses are turned into logged readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// One reading per pulse, on the beam of each tower pointing closest to
    /// the tag.
    Cadence { interval: f64 },
    /// Each tower listens to its beams in turn for `dwell` seconds; the first
    /// pulse heard in a dwell window is logged.
    RoundRobin {
        dwell: f64,
        pulse_period: f64,
        #[serde(default)]
        pulse_offset: f64,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::RoundRobin {
            dwell: 6.5,
            pulse_period: 5.3,
            pulse_offset: 0.0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Cadence { interval } => interval > 0.0,
            Schedule::RoundRobin {
                dwell, pulse_period, ..
            } => dwell > 0.0 && pulse_period > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::precondition("schedule periods must be positive"))
        }
    }

    /// Transmission instants in `[start, start + duration]`.
    pub fn pulse_times(&self, start: f64, duration: f64) -> Vec<f64> {
        let (period, offset) = match *self {
            Schedule::Cadence { interval } => (interval, 0.0),
            Schedule::RoundRobin {
                pulse_period,
                pulse_offset,
                ..
            } => (pulse_period, pulse_offset),
        };
        let n = ((duration - offset) / period + 1e-9).floor();
        if n < 0.0 {
            return Vec::new();
        }
        (0..=n as usize).map(|k| start + offset + k as f64 * period).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Altitude [m].
    pub z: f64,
}

impl InitialState {
    pub fn state(&self) -> StateVector {
        StateVector::with_altitude(self.x, self.vx, self.y, self.vy, self.z)
    }
}

/// Everything needed to synthesise a detection log and track it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format_version: u32,
    #[serde(default = "default_tag")]
    pub tag_id: String,
    pub seed: u64,
    /// Start of the run, UTC seconds since the Unix epoch.
    #[serde(default)]
    pub start: f64,
    /// Length of the run [s].
    pub duration: f64,
    pub initial: InitialState,
    #[serde(default)]
    pub schedule: Schedule,
    pub movement: MovementParams,
    #[serde(default = "ReceiverModel::study_receiver")]
    pub receiver: ReceiverModel,
    #[serde(default = "YagiPattern::study_antenna")]
    pub pattern: YagiPattern,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(rename = "tower")]
    pub towers: Vec<TowerSpec>,
}

fn default_tag() -> String {
    "tag".into()
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.format_version)?;
        if !(self.duration > 0.0) {
            return Err(Error::precondition("duration must be positive"));
        }
        if !(self.initial.z >= 0.0) {
            return Err(Error::precondition("initial altitude must be non-negative"));
        }
        self.schedule.validate()?;
        self.movement.validate()?;
        self.receiver.validate()?;
        self.tracker.validate()?;
        TowerFile {
            format_version: self.format_version,
            towers: self.towers.clone(),
        }
        .sites()?;
        Ok(())
    }

    pub fn sites(&self) -> Result<Vec<TowerSite>> {
        self.towers.iter().map(TowerSpec::site).collect()
    }

    /// Tracker settings for this scenario. The filter is given the same
    /// movement, receiver and antenna models the log was synthesised with.
    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            movement: self.movement,
            receiver: self.receiver,
            pattern: self.pattern,
            ..self.tracker.clone()
        }
    }
}

pub(crate) fn check_version(v: u32) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::precondition(format!(
            "unsupported format_version {v}; expected {FORMAT_VERSION}"
        )))
    }
}

/// Parses a tracker settings file: a `format_version` key followed by any
/// subset of the [`TrackerConfig`] fields.
pub fn parse_tracker_config(text: &str) -> std::result::Result<TrackerConfig, String> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    let version = table
        .remove("format_version")
        .ok_or("missing format_version")?
        .as_integer()
        .ok_or("format_version must be an integer")?;
    check_version(u32::try_from(version).unwrap_or(u32::MAX)).map_err(|e| e.to_string())?;
    table.try_into().map_err(|e: toml::de::Error| e.to_string())
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let s: ScenarioConfig = read_toml(path)?;
    s.validate()?;
    Ok(s)
}

pub fn load_towers(path: &Path) -> Result<Vec<TowerSite>> {
    let f: TowerFile = read_toml(path)?;
    check_version(f.format_version)?;
    f.sites()
}

pub fn load_tracker_config(path: &Path) -> Result<TrackerConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = parse_tracker_config(&text).map_err(|message| Error::Config {
        path: path.to_path_buf(),
        message,
    })?;
    config.validate()?;
    Ok(config)
}

/// TOML rendering of any configuration value.
pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Numerical(format!("cannot render configuration: {e}")))
}
