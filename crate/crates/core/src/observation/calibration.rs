//! Fitting the receiver constants `(b, P0)` from reference readings taken at
//! known tag positions.
//!
//! For fixed `P0` the model `𝒵 = b ln(ξ²/P0 + 1)` is linear in `b`, so `b` has
//! a closed-form least-squares solution. `P0` is then found by a log-grid scan
//! followed by golden-section refinement of the mean squared `𝒵` residual.

use serde::{Deserialize, Serialize};

use super::receiver::ReceiverModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub xi: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFit {
    pub model: ReceiverModel,
    /// Root-mean-square residual of the soft-limited display.
    pub residual_rms: f64,
}

/// Search settings for [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P0Search {
    pub log10_min: f64,
    pub log10_max: f64,
    pub grid_points: usize,
}

impl Default for P0Search {
    fn default() -> Self {
        P0Search {
            log10_min: -14.0,
            log10_max: -6.0,
            grid_points: 200,
        }
    }
}

fn limited(samples: &[CalibrationSample], z_min: f64, z_max: f64) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            if s.z >= z_max {
                return Err(Error::Saturated { z: s.z, z_max });
            }
            let v = ((s.z - z_min) / (z_max - z_min)).atanh();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numerical(format!("soft limiter diverges at Z = {}", s.z)))
            }
        })
        .collect()
}

fn slope(samples: &[CalibrationSample], targets: &[f64], p0: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, t) in samples.iter().zip(targets) {
        let l = (s.xi * s.xi / p0).ln_1p();
        num += t * l;
        den += l * l;
    }
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Numerical("degenerate calibration data: all ξ are zero".into()));
    }
    Ok(num / den)
}

/// Least-squares `b` for a fixed `P0`.
pub fn fit_b_given_p0(samples: &[CalibrationSample], z_min: f64, z_max: f64, p0: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::precondition("no calibration samples"));
    }
    if !(p0 > 0.0) {
        return Err(Error::precondition("p0 must be positive"));
    }
    let targets = limited(samples, z_min, z_max)?;
    slope(samples, &targets, p0)
}

fn mean_sq_residual(samples: &[CalibrationSample], targets: &[f64], p0: f64) -> Result<(f64, f64)> {
    let b = slope(samples, targets, p0)?;
    let mse = samples
        .iter()
        .zip(targets)
        .map(|(s, t)| (t - b * (s.xi * s.xi / p0).ln_1p()).powi(2))
        .sum::<f64>()
        / samples.len() as f64;
    if !mse.is_finite() {
        return Err(Error::Numerical(format!("non-finite residual at P0 = {p0:e}")));
    }
    Ok((b, mse))
}

/// Fits `(b, P0)` with the default search range.
pub fn calibrate(samples: &[CalibrationSample], z_min: f64, z_max: f64) -> Result<CalibrationFit> {
    calibrate_with(samples, z_min, z_max, P0Search::default())
}

pub fn calibrate_with(
    samples: &[CalibrationSample],
    z_min: f64,
    z_max: f64,
    search: P0Search,
) -> Result<CalibrationFit> {
    if samples.len() < 3 {
        return Err(Error::precondition("calibration needs at least three samples"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.z), hi.max(s.z)));
    if hi - lo < 20.0 {
        return Err(Error::precondition(
            "calibration samples must span at least 20 display units",
        ));
    }
    if samples.iter().any(|s| !(s.xi >= 0.0) || s.z < z_min) {
        return Err(Error::precondition("calibration samples need ξ >= 0 and Z >= z_min"));
    }
    let targets = limited(samples, z_min, z_max)?;
    let objective = |log_p0: f64| mean_sq_residual(samples, &targets, 10f64.powf(log_p0));

    let n = search.grid_points.max(3);
    let step = (search.log10_max - search.log10_min) / (n - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..n {
        let (_, mse) = objective(search.log10_min + i as f64 * step)?;
        if mse < best.1 {
            best = (i, mse);
        }
    }

    // Golden-section search on the bracket around the best grid point.
    let centre = search.log10_min + best.0 as f64 * step;
    let mut a = (centre - step).max(search.log10_min);
    let mut d = (centre + step).min(search.log10_max);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut b = d - ratio * (d - a);
    let mut c = a + ratio * (d - a);
    let mut fb = objective(b)?.1;
    let mut fc = objective(c)?.1;
    while d - a > 1e-10 {
        if fb < fc {
            d = c;
            c = b;
            fc = fb;
            b = d - ratio * (d - a);
            fb = objective(b)?.1;
        } else {
            a = b;
            b = c;
            fb = fc;
            c = a + ratio * (d - a);
            fc = objective(c)?.1;
        }
    }
    let mut log_p0 = 0.5 * (a + d);
    let (mut slope_b, mut mse) = objective(log_p0)?;
    // The grid point itself wins if the bracket was flat.
    if best.1 < mse {
        log_p0 = centre;
        let refit = objective(centre)?;
        slope_b = refit.0;
        mse = refit.1;
    }
    let model = ReceiverModel {
        z_min,
        z_max,
        b: slope_b,
        p0: 10f64.powf(log_p0),
    };
    Ok(CalibrationFit {
        model,
        residual_rms: mse.sqrt(),
    })
}
