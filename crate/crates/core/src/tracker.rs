//! End-to-end tracking.
//!
//! A track starts from candidate initial states found by inverting the first
//! two usable readings at an assumed altitude. Every candidate is run through
//! the filter and the one whose predicted display trace fits the logged one
//! best is kept. Long silences split the log into segments; each new segment
//! is restarted from a candidate reachable from the last estimate.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use nalgebra::Matrix5;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::YagiPattern;
use crate::ekf::{self, CovarianceUpdate, FilterState, Measurement};
use crate::error::{Error, Result};
use crate::io::Detection;
use crate::movement::{process_noise_cov, transition_matrix, MovementParams, StateVector};
use crate::observation::receiver::ReceiverModel;
use crate::observation::{measurement_row, power_variance, xi_signed, TowerSite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Maximum horizontal speed of the animal [m/s].
    pub v_max: f64,
    /// Altitude assumed when initialising [m].
    pub z0: f64,
    /// Readings below this display value are discarded.
    pub z_threshold: f64,
    /// Silences longer than this start a new segment [s].
    pub t_gap_max: f64,
    pub p0_diag: [f64; 5],
    /// Bearing resolution of the static inversion [deg].
    pub psi_step_deg: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Range tolerance of the bisection [m].
    pub r_tol: f64,
    /// Points of the logarithmic range scan that brackets roots.
    pub range_grid_points: usize,
    /// Upper bound on the candidate pairs built from two readings.
    pub max_pairs: usize,
    /// Candidates kept after the short pre-screen.
    pub candidate_cap: usize,
    /// Length of the pre-screen, in detection instants.
    pub prescreen_len: usize,
    /// Multiplier on the measurement variance `4ξ²P0 + 2P0²`.
    pub r_var_scale: f64,
    /// Further multiplier for readings clamped at the top of the display.
    pub censored_var_scale: f64,
    pub covariance_update: CovarianceUpdate,
    pub movement: MovementParams,
    pub receiver: ReceiverModel,
    pub pattern: YagiPattern,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            v_max: 20.0,
            z0: 15.0,
            z_threshold: 22.0,
            t_gap_max: 300.0,
            p0_diag: [10.0, 10.0, 10.0, 10.0, 100.0],
            psi_step_deg: 1.0,
            r_min: 10.0,
            r_max: 100_000.0,
            r_tol: 0.1,
            range_grid_points: 2000,
            max_pairs: 4096,
            candidate_cap: 64,
            prescreen_len: 10,
            r_var_scale: 1.0,
            censored_var_scale: 10.0,
            covariance_update: CovarianceUpdate::Joseph,
            movement: MovementParams::validation_run(),
            receiver: ReceiverModel::study_receiver(),
            pattern: YagiPattern::study_antenna(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0) {
            return Err(Error::precondition("v_max must be positive"));
        }
        if !(self.z0 > 0.0) {
            return Err(Error::precondition("z0 must be positive"));
        }
        if self.z_threshold < self.receiver.z_min {
            return Err(Error::precondition("z_threshold must not be below the display floor"));
        }
        if !(self.t_gap_max > 0.0) {
            return Err(Error::precondition("t_gap_max must be positive"));
        }
        if self.p0_diag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::precondition("initial covariance entries must be positive"));
        }
        if !(self.psi_step_deg > 0.0 && self.psi_step_deg <= 90.0) {
            return Err(Error::precondition("psi_step_deg must be in (0, 90]"));
        }
        if !(0.0 < self.r_min && self.r_min < self.r_max && self.r_tol > 0.0) {
            return Err(Error::precondition("range search needs 0 < r_min < r_max and r_tol > 0"));
        }
        if self.range_grid_points < 2 || self.max_pairs == 0 || self.candidate_cap == 0 {
            return Err(Error::precondition("grid and candidate limits must be positive"));
        }
        if !(self.r_var_scale > 0.0 && self.censored_var_scale >= 1.0) {
            return Err(Error::precondition("variance multipliers must be positive"));
        }
        self.movement.validate()?;
        self.receiver.validate()
    }
}

/// A horizontal position consistent with one reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarCandidate {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub state: StateVector,
    pub cov: Matrix5<f64>,
    pub tower_id: String,
    pub beam: usize,
    /// Logged display value.
    pub z_obs: f64,
    /// Display value predicted from the posterior state.
    pub z_hat: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Track {
    pub points: Vec<TrackPoint>,
    pub warnings: Vec<String>,
}

impl Track {
    pub fn segments(&self) -> usize {
        self.points.last().map_or(0, |p| p.segment + 1)
    }

    pub fn last_state(&self) -> Option<FilterState> {
        self.points.last().map(|p| FilterState::new(p.state, p.cov, p.t))
    }
}

/// Every `(x, y)` at which a bird at `altitude` would produce the display
/// value `z` on `beam`, scanning bearing on a uniform grid over `(-π, π]`.
pub fn static_inversion(
    z: f64,
    tower: &TowerSite,
    beam: usize,
    altitude: f64,
    config: &TrackerConfig,
) -> Result<Vec<PlanarCandidate>> {
    let rx = &config.receiver;
    if !(rx.z_min <= z && z <= rx.z_max) {
        return Err(Error::precondition(format!(
            "display value {z} outside [{}, {}]",
            rx.z_min, rx.z_max
        )));
    }
    if !(altitude > 0.0) {
        return Err(Error::precondition("altitude must be positive"));
    }
    let xi2 = rx.invert_reading(z)?.xi2;
    if xi2 <= 0.0 {
        return Ok(Vec::new());
    }
    let xi = xi2.sqrt();
    let boresight = tower.bearing(beam)?;
    let pattern = &config.pattern;
    let k0 = pattern.k0();
    let phase = k0 * tower.height * altitude;
    let dz = altitude - tower.height;

    let n_r = config.range_grid_points;
    let ratio = (config.r_max / config.r_min).ln() / (n_r - 1) as f64;
    let radii: Vec<f64> = (0..n_r).map(|k| config.r_min * (ratio * k as f64).exp()).collect();
    let excess = |g: f64, r: f64| {
        let slant = r.hypot(dz);
        g * (phase / slant).sin().abs() / (k0 * slant) - xi
    };

    let n_psi = (360.0 / config.psi_step_deg).round().max(1.0) as usize;
    let step = 2.0 * std::f64::consts::PI / n_psi as f64;
    let mut out = Vec::new();
    for k in 0..n_psi {
        let psi = -std::f64::consts::PI + (k + 1) as f64 * step;
        let g = pattern.field_pattern(psi).abs();
        if g == 0.0 {
            continue;
        }
        let (sin_phi, cos_phi) = (boresight + psi).sin_cos();
        let mut prev = excess(g, radii[0]);
        for w in radii.windows(2) {
            let next = excess(g, w[1]);
            if prev == 0.0 || prev.signum() != next.signum() {
                let (mut a, mut b, fa) = (w[0], w[1], prev);
                while b - a > config.r_tol {
                    let mid = 0.5 * (a + b);
                    let fm = excess(g, mid);
                    if fm == 0.0 || fm.signum() != fa.signum() {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                let r = 0.5 * (a + b);
                out.push(PlanarCandidate {
                    x: tower.x + r * cos_phi,
                    y: tower.y + r * sin_phi,
                    r,
                    psi,
                });
            }
            prev = next;
        }
    }
    Ok(out)
}

/// Range of the static model `r²/z = H|g(0)|/|ξ|`, assuming main-beam arrival
/// and a small grazing angle.
pub fn main_beam_range(z: f64, tower: &TowerSite, altitude: f64, config: &TrackerConfig) -> Result<f64> {
    if !(altitude > 0.0) {
        return Err(Error::precondition("altitude must be positive"));
    }
    let xi2 = config.receiver.invert_reading(z)?.xi2;
    if xi2 <= 0.0 {
        return Err(Error::precondition("reading at the display floor has no range"));
    }
    Ok((tower.height * altitude * config.pattern.boresight_gain() / xi2.sqrt()).sqrt())
}

/// A detection bound to its tower and converted to the power domain.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Reading {
    t: f64,
    tower: usize,
    beam: usize,
    z: f64,
    y: f64,
    censored: bool,
}

fn tower_index(towers: &[TowerSite]) -> HashMap<&str, usize> {
    towers.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect()
}

/// Resolves, thresholds and inverts the log. Readings below the threshold
/// are dropped here and never reach the filter.
fn prepare(detections: &[Detection], towers: &[TowerSite], config: &TrackerConfig) -> Result<Vec<Reading>> {
    let index = tower_index(towers);
    let mut out = Vec::with_capacity(detections.len());
    let mut last = f64::NEG_INFINITY;
    for d in detections {
        if d.t < last {
            return Err(Error::Validation("detections must be sorted by time".into()));
        }
        last = d.t;
        let tower = *index
            .get(d.tower_id.as_str())
            .ok_or_else(|| Error::Validation(format!("unknown tower `{}`", d.tower_id)))?;
        if d.beam_index >= towers[tower].beams.len() {
            return Err(Error::Validation(format!(
                "tower `{}` has no beam {}",
                d.tower_id, d.beam_index
            )));
        }
        let z = f64::from(d.z);
        if z < config.z_threshold {
            continue;
        }
        let inv = config.receiver.invert_reading(z)?;
        out.push(Reading {
            t: d.t,
            tower,
            beam: d.beam_index,
            z,
            y: inv.xi2 + config.receiver.p0,
            censored: inv.censored,
        });
    }
    Ok(out)
}

/// Groups of simultaneous readings and the transition into each group.
struct Steps {
    groups: Vec<Range<usize>>,
    transitions: Vec<(Matrix5<f64>, Matrix5<f64>)>,
}

impl Steps {
    fn new(readings: &[Reading], params: &MovementParams) -> Result<Self> {
        let mut groups: Vec<Range<usize>> = Vec::new();
        for (i, r) in readings.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if readings[g.start].t == r.t => g.end = i + 1,
                _ => groups.push(i..i + 1),
            }
        }
        let mut cache: HashMap<u64, (Matrix5<f64>, Matrix5<f64>)> = HashMap::new();
        let mut transitions = Vec::with_capacity(groups.len());
        let mut t_prev = readings.first().map_or(0.0, |r| r.t);
        for g in &groups {
            let dt = readings[g.start].t - t_prev;
            t_prev = readings[g.start].t;
            let entry = match cache.get(&dt.to_bits()) {
                Some(e) => *e,
                None => {
                    let e = (transition_matrix(params, dt)?, *process_noise_cov(params, dt)?.matrix());
                    cache.insert(dt.to_bits(), e);
                    e
                }
            };
            transitions.push(entry);
        }
        Ok(Steps { groups, transitions })
    }
}

fn predicted_display(state: &StateVector, tower: &TowerSite, beam: usize, config: &TrackerConfig) -> Result<f64> {
    let xi = xi_signed(state, tower, beam, &config.pattern)?;
    Ok(config.receiver.display_from_xi(xi))
}

fn correct(fs: &FilterState, r: &Reading, towers: &[TowerSite], config: &TrackerConfig) -> Result<FilterState> {
    let tower = &towers[r.tower];
    let p0 = config.receiver.p0;
    let nominal = measurement_row(&fs.mean, tower, r.beam, &config.pattern, p0)?;
    let mut r_var = config.r_var_scale * power_variance(nominal.xi, p0);
    if r.censored {
        r_var *= config.censored_var_scale;
    }
    let m = Measurement {
        y: r.y,
        r_var,
        t: r.t,
        tower: r.tower,
        beam: r.beam,
    };
    let obs = |s: &StateVector| {
        let row = measurement_row(s, tower, r.beam, &config.pattern, p0)?;
        Ok((row.h_row, row.h))
    };
    Ok(ekf::update(fs, &m, &obs, config.covariance_update)?.state)
}

/// Runs the filter from `initial` at the first reading through at most
/// `limit` detection instants.
fn run_filter(
    initial: StateVector,
    readings: &[Reading],
    steps: &Steps,
    limit: usize,
    towers: &[TowerSite],
    config: &TrackerConfig,
    segment: usize,
) -> Result<Vec<TrackPoint>> {
    let mut fs = FilterState::from_diagonal(initial, config.p0_diag, readings[0].t);
    let mut points = Vec::with_capacity(readings.len());
    for (g, range) in steps.groups.iter().enumerate().take(limit) {
        let group = &readings[range.clone()];
        let t = group[0].t;
        if g > 0 {
            let (phi, q) = &steps.transitions[g];
            fs = ekf::predict_with(&fs, phi, q, t);
        }
        fs = if group.len() == 1 {
            correct(&fs, &group[0], towers, config)?
        } else {
            let branches = group
                .iter()
                .map(|r| correct(&fs, r, towers, config))
                .collect::<Result<Vec<_>>>()?;
            fuse_simultaneous(&branches)?
        };
        for r in group {
            let tower = &towers[r.tower];
            points.push(TrackPoint {
                t,
                state: fs.mean,
                cov: fs.cov,
                tower_id: tower.id.clone(),
                beam: r.beam,
                z_obs: r.z,
                z_hat: predicted_display(&fs.mean, tower, r.beam, config)?,
                segment,
            });
        }
    }
    Ok(points)
}

/// Averages posteriors computed separately for readings taken at the same
/// instant. Covariances are averaged element-wise.
pub fn fuse_simultaneous(states: &[FilterState]) -> Result<FilterState> {
    let first = states
        .first()
        .ok_or_else(|| Error::precondition("nothing to fuse"))?;
    if states.iter().any(|s| s.t != first.t) {
        return Err(Error::precondition("fused states must share a timestamp"));
    }
    let n = states.len() as f64;
    let mean = states.iter().map(|s| s.mean.to_vector()).sum::<nalgebra::Vector5<f64>>() / n;
    let cov = states.iter().map(|s| s.cov).sum::<Matrix5<f64>>() / n;
    Ok(FilterState::new(StateVector::from_vector(&mean), cov, first.t))
}

/// RMS of `Ẑ - Z` with trapezoidal weights over the detection instants.
pub fn score_track(points: &[TrackPoint]) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(Error::precondition("cannot score an empty track"));
    }
    let span = points[n - 1].t - points[0].t;
    if n == 1 || span <= 0.0 {
        let ms = points.iter().map(|p| (p.z_hat - p.z_obs).powi(2)).sum::<f64>() / n as f64;
        return Ok(ms.sqrt());
    }
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        let left = if i > 0 { p.t - points[i - 1].t } else { 0.0 };
        let right = if i + 1 < n { points[i + 1].t - p.t } else { 0.0 };
        acc += 0.5 * (left + right) * (p.z_hat - p.z_obs).powi(2);
    }
    Ok((acc / span).sqrt())
}

fn candidates_at(r: &Reading, altitude: f64, towers: &[TowerSite], config: &TrackerConfig) -> Result<Vec<PlanarCandidate>> {
    static_inversion(r.z, &towers[r.tower], r.beam, altitude, config)
}

fn one_per_cell(candidates: Vec<PlanarCandidate>, cell: f64) -> Vec<PlanarCandidate> {
    if !(cell > 0.0) {
        return candidates;
    }
    let mut seen = HashSet::new();
    candidates
        .into_iter()
        .filter(|c| seen.insert(((c.x / cell).floor() as i64, (c.y / cell).floor() as i64)))
        .collect()
}

/// Pairs of candidates no further apart than `v_max·dt`. At most `max_pairs`
/// are returned: candidates are merged on a grid of a quarter of the reach,
/// the first reading's are then thinned by a fixed stride, and each keeps an
/// evenly strided subset of its partners.
fn pair_states(
    r0: &Reading,
    r1: &Reading,
    altitude: f64,
    towers: &[TowerSite],
    config: &TrackerConfig,
) -> Result<Vec<StateVector>> {
    let dt = r1.t - r0.t;
    if !(dt > 0.0) {
        return Err(Error::precondition("initialising readings must be at distinct times"));
    }
    let reach = config.v_max * dt;
    // Candidates closer together than the reach cannot be told apart by the
    // speed constraint; one per cell is kept.
    let cell = reach / 4.0;
    let c0 = one_per_cell(candidates_at(r0, altitude, towers, config)?, cell);
    let mut c1 = one_per_cell(candidates_at(r1, altitude, towers, config)?, cell);
    c1.sort_by(|a, b| a.x.total_cmp(&b.x));

    let anchors = c0.len().min(config.max_pairs.isqrt().max(1) * 4).min(config.max_pairs);
    let per_anchor = (config.max_pairs / anchors.max(1)).max(1);
    let stride = c0.len().div_ceil(anchors.max(1)).max(1);
    let mut out = Vec::new();
    let mut partners: Vec<&PlanarCandidate> = Vec::new();
    for p0 in c0.iter().step_by(stride) {
        partners.clear();
        let start = c1.partition_point(|p| p.x < p0.x - reach);
        partners.extend(
            c1[start..]
                .iter()
                .take_while(|p| p.x <= p0.x + reach)
                .filter(|p| (p.x - p0.x).hypot(p.y - p0.y) <= reach),
        );
        let step = partners.len().div_ceil(per_anchor).max(1);
        out.extend(partners.iter().step_by(step).map(|p1| {
            StateVector::with_altitude(p0.x, (p1.x - p0.x) / dt, p0.y, (p1.y - p0.y) / dt, altitude)
        }));
    }
    Ok(out)
}

/// Initial states from two detections at the configured altitude `z0`.
pub fn enumerate_initial_states(
    d0: &Detection,
    d1: &Detection,
    towers: &[TowerSite],
    config: &TrackerConfig,
) -> Result<Vec<StateVector>> {
    if !(d0.t < d1.t) {
        return Err(Error::precondition("initialising detections must be in time order"));
    }
    let pair = prepare(&[d0.clone(), d1.clone()], towers, config)?;
    if pair.len() < 2 {
        return Err(Error::precondition("initialising detections must pass the display threshold"));
    }
    let states = pair_states(&pair[0], &pair[1], config.z0, towers, config)?;
    if states.is_empty() {
        return Err(Error::Initialization(
            "no candidate pair satisfies the speed constraint".into(),
        ));
    }
    Ok(states)
}

/// Candidate initial states for a segment; a lone reading yields stationary
/// candidates.
fn segment_candidates(
    readings: &[Reading],
    altitude: f64,
    towers: &[TowerSite],
    config: &TrackerConfig,
) -> Result<Vec<StateVector>> {
    let r0 = &readings[0];
    let states = match readings.iter().find(|r| r.t > r0.t) {
        Some(r1) => pair_states(r0, r1, altitude, towers, config)?,
        None => candidates_at(r0, altitude, towers, config)?
            .iter()
            .map(|p| StateVector::with_altitude(p.x, 0.0, p.y, 0.0, altitude))
            .collect(),
    };
    if states.is_empty() {
        return Err(Error::Initialization(format!(
            "no initial candidate for the readings starting at t = {}",
            r0.t
        )));
    }
    Ok(states)
}

struct Run {
    index: usize,
    score: f64,
    trace: f64,
    points: Vec<TrackPoint>,
}

fn rank(a: &Run, b: &Run) -> std::cmp::Ordering {
    a.score
        .total_cmp(&b.score)
        .then(a.trace.total_cmp(&b.trace))
        .then(a.index.cmp(&b.index))
}

fn run_all(
    candidates: &[StateVector],
    readings: &[Reading],
    steps: &Steps,
    limit: usize,
    towers: &[TowerSite],
    config: &TrackerConfig,
    segment: usize,
) -> Vec<Run> {
    candidates
        .par_iter()
        .enumerate()
        .filter_map(|(index, c)| {
            let points = run_filter(*c, readings, steps, limit, towers, config, segment).ok()?;
            let score = score_track(&points).ok()?;
            let trace = points.last()?.cov.trace();
            score.is_finite().then_some(Run {
                index,
                score,
                trace,
                points,
            })
        })
        .collect()
}

fn select(
    candidates: &[StateVector],
    readings: &[Reading],
    towers: &[TowerSite],
    config: &TrackerConfig,
    segment: usize,
) -> Result<(StateVector, Vec<TrackPoint>)> {
    let steps = Steps::new(readings, &config.movement)?;
    let mut pool: Vec<StateVector> = candidates.to_vec();
    if pool.len() > config.candidate_cap {
        let mut screened = run_all(&pool, readings, &steps, config.prescreen_len.max(1), towers, config, segment);
        screened.sort_by(rank);
        let mut keep: Vec<usize> = screened.iter().take(config.candidate_cap).map(|r| r.index).collect();
        keep.sort_unstable();
        pool = keep.into_iter().map(|i| candidates[i]).collect();
    }
    let best = run_all(&pool, readings, &steps, usize::MAX, towers, config, segment)
        .into_iter()
        .min_by(rank)
        .ok_or_else(|| Error::Numerical("the filter failed for every candidate initial state".into()))?;
    Ok((pool[best.index], best.points))
}

/// Runs the filter from every candidate over `detections` and keeps the one
/// with the smallest display residual; ties go to the smaller final
/// covariance trace, then to the earlier candidate.
pub fn select_initial_state(
    candidates: &[StateVector],
    detections: &[Detection],
    towers: &[TowerSite],
    config: &TrackerConfig,
) -> Result<(StateVector, Track)> {
    if candidates.is_empty() {
        return Err(Error::precondition("no candidate initial states"));
    }
    let readings = prepare(detections, towers, config)?;
    if readings.is_empty() {
        return Err(Error::Initialization("no detection passes the display threshold".into()));
    }
    let (state, points) = select(candidates, &readings, towers, config, 0)?;
    Ok((
        state,
        Track {
            points,
            warnings: Vec::new(),
        },
    ))
}

/// Restart after a silence of `gap` seconds: the candidate farthest from the
/// last estimate that is still reachable at `v_max`, at the last altitude.
fn gap_restart(
    prev: &FilterState,
    gap: f64,
    readings: &[Reading],
    towers: &[TowerSite],
    config: &TrackerConfig,
) -> Result<Option<StateVector>> {
    let altitude = match prev.mean.altitude() {
        z if z > 0.0 => z,
        _ => config.z0,
    };
    let reach = config.v_max * gap;
    let (xp, yp) = (prev.mean.x, prev.mean.y);
    let distance = |p: &PlanarCandidate| (p.x - xp).hypot(p.y - yp);
    let r0 = &readings[0];
    let mut reachable: Vec<PlanarCandidate> = candidates_at(r0, altitude, towers, config)?
        .into_iter()
        .filter(|p| distance(p) <= reach)
        .collect();
    reachable.sort_by(|a, b| distance(b).total_cmp(&distance(a)));

    let Some(r1) = readings.iter().find(|r| r.t > r0.t) else {
        return Ok(reachable
            .first()
            .map(|p| StateVector::with_altitude(p.x, 0.0, p.y, 0.0, altitude)));
    };
    let dt = r1.t - r0.t;
    let hop = config.v_max * dt;
    let c1 = candidates_at(r1, altitude, towers, config)?;
    for p0 in &reachable {
        let nearest = c1
            .iter()
            .map(|p1| (p1, (p1.x - p0.x).hypot(p1.y - p0.y)))
            .filter(|(_, d)| *d <= hop)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((p1, _)) = nearest {
            return Ok(Some(StateVector::with_altitude(
                p0.x,
                (p1.x - p0.x) / dt,
                p0.y,
                (p1.y - p0.y) / dt,
                altitude,
            )));
        }
    }
    Ok(None)
}

/// Initial state after a gap of `gap` seconds ending at `next[0]`, or `None`
/// if no candidate is reachable from `prev`.
pub fn handle_gap(
    prev: &FilterState,
    gap: f64,
    next: &[Detection],
    towers: &[TowerSite],
    config: &TrackerConfig,
) -> Result<Option<StateVector>> {
    let readings = prepare(next, towers, config)?;
    if readings.is_empty() {
        return Err(Error::precondition("gap handling needs a usable detection after the gap"));
    }
    gap_restart(prev, gap, &readings, towers, config)
}

/// Tracks one tag through a time-sorted detection log.
pub fn track(detections: &[Detection], towers: &[TowerSite], config: &TrackerConfig) -> Result<Track> {
    config.validate()?;
    for t in towers {
        t.validate()?;
    }
    let readings = prepare(detections, towers, config)?;
    if readings.len() < 2 {
        return Err(Error::Initialization(format!(
            "{} usable detections; at least two are needed",
            readings.len()
        )));
    }

    let mut bounds = vec![0];
    for i in 1..readings.len() {
        if readings[i].t - readings[i - 1].t > config.t_gap_max {
            bounds.push(i);
        }
    }
    bounds.push(readings.len());

    let mut out = Track::default();
    let mut segment = 0;
    for w in bounds.windows(2) {
        let seg = &readings[w[0]..w[1]];
        let prev = out.last_state();
        let restart = match &prev {
            Some(fs) => gap_restart(fs, seg[0].t - fs.t, seg, towers, config)?,
            None => None,
        };
        let points = match (restart, &prev) {
            (Some(initial), _) => {
                let steps = Steps::new(seg, &config.movement)?;
                run_filter(initial, seg, &steps, usize::MAX, towers, config, segment)?
            }
            (None, None) => {
                let candidates = segment_candidates(seg, config.z0, towers, config)?;
                select(&candidates, seg, towers, config, segment)?.1
            }
            (None, Some(fs)) => {
                out.warnings.push(format!(
                    "no candidate after the gap ending at t = {} is reachable; restarted without the reachability constraint",
                    seg[0].t
                ));
                let altitude = if fs.mean.altitude() > 0.0 { fs.mean.altitude() } else { config.z0 };
                match segment_candidates(seg, altitude, towers, config) {
                    Ok(candidates) => select(&candidates, seg, towers, config, segment)?.1,
                    Err(e @ Error::Initialization(_)) => {
                        out.warnings.push(format!("segment skipped: {e}"));
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        out.points.extend(points);
        segment += 1;
    }
    Ok(out)
}
