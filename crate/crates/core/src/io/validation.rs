//! The simulated-trajectory validation run: one six-beam tower, a bird
//! leaving it towards the north-east, one reading every 6 s for 20 minutes.

use rayon::prelude::*;

use super::config::{InitialState, ScenarioConfig, Schedule, TowerSpec, FORMAT_VERSION};
use super::detections::{emission_rng, simulate_scenario, synthesize_detections, Detection};
use crate::antenna::YagiPattern;
use crate::error::{Error, Result};
use crate::movement::{MovementParams, StateVector};
use crate::observation::receiver::ReceiverModel;
use crate::tracker::{track, Track, TrackerConfig};

pub const TOWER_X: f64 = 417_768.0;
pub const TOWER_Y: f64 = 4_606_808.0;
pub const TOWER_HEIGHT: f64 = 14.72;
pub const DURATION: f64 = 1200.0;
pub const CADENCE: f64 = 6.0;

pub fn validation_scenario(seed: u64) -> ScenarioConfig {
    let speed = 2.0 * 2f64.sqrt();
    ScenarioConfig {
        format_version: FORMAT_VERSION,
        tag_id: "sim".into(),
        seed,
        start: 0.0,
        duration: DURATION,
        initial: InitialState {
            x: TOWER_X + 200.0,
            y: TOWER_Y + 200.0,
            vx: speed,
            vy: speed,
            z: TOWER_HEIGHT,
        },
        schedule: Schedule::Cadence { interval: CADENCE },
        movement: MovementParams::validation_run(),
        receiver: ReceiverModel::study_receiver(),
        pattern: YagiPattern::study_antenna(),
        tracker: TrackerConfig {
            z0: TOWER_HEIGHT,
            ..TrackerConfig::default()
        },
        towers: vec![TowerSpec {
            id: "SIM".into(),
            x: TOWER_X,
            y: TOWER_Y,
            height: TOWER_HEIGHT,
            beams: (0..6).map(|k| 45.0 + 60.0 * k as f64).collect(),
        }],
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub seed: u64,
    pub truth: Vec<(f64, StateVector)>,
    pub detections: Vec<Detection>,
    pub track: Track,
    /// Horizontal distance between the last estimate and the truth at that
    /// instant [m].
    pub final_error: f64,
    /// RMS of `Ẑ - Z` over the tracked readings.
    pub rms_display: f64,
}

pub fn run_scenario(scenario: &ScenarioConfig) -> Result<ValidationOutcome> {
    scenario.validate()?;
    let towers = scenario.sites()?;
    let truth = simulate_scenario(scenario)?;
    let detections = synthesize_detections(&truth, scenario, &towers, &mut emission_rng(scenario.seed))?;
    let track = track(&detections, &towers, &scenario.tracker_config())?;
    let last = track
        .points
        .last()
        .ok_or_else(|| Error::Numerical("empty track".into()))?;
    let (_, actual) = truth
        .iter()
        .min_by(|a, b| (a.0 - last.t).abs().total_cmp(&(b.0 - last.t).abs()))
        .ok_or_else(|| Error::Numerical("empty trajectory".into()))?;
    let final_error = (last.state.x - actual.x).hypot(last.state.y - actual.y);
    let rms_display = (track.points.iter().map(|p| (p.z_hat - p.z_obs).powi(2)).sum::<f64>()
        / track.points.len() as f64)
        .sqrt();
    Ok(ValidationOutcome {
        seed: scenario.seed,
        truth,
        detections,
        track,
        final_error,
        rms_display,
    })
}

/// Runs the validation scenario for each seed, in parallel.
pub fn run_ensemble(seeds: &[u64]) -> Vec<Result<ValidationOutcome>> {
    seeds
        .par_iter()
        .map(|&seed| run_scenario(&validation_scenario(seed)))
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}
