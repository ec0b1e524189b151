//! Observation model: bird state and tower beam to received power.
//!
//! With ground reflection coefficient -1 and horizontal polarisation the
//! noiseless received power is `Ka ξ²` with
//!
//! ```text
//! ξ = g(ψ) sin(k₀ H_T z / R) / (k₀ R)
//! ```
//!
//! The unknown constant `Ka` never appears below: everything works on the
//! normalised power `ξ²` and the receiver floor `P0` in the same units.

pub mod calibration;
pub mod receiver;

use nalgebra::RowVector5;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::antenna::{wrap_angle, YagiPattern};
use crate::error::{Error, Result};
use crate::movement::StateVector;

pub use calibration::{calibrate, fit_b_given_p0, CalibrationFit, CalibrationSample};
pub use receiver::{InvertedReading, ReceiverModel};

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// A receiving tower and the boresight bearings of its beams.
///
/// Positions are projected planar metres. Bearings are mathematical angles in
/// radians, counter-clockwise from the +x (east) axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerSite {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub beams: Vec<f64>,
}

impl TowerSite {
    /// Tower with `n` beams evenly spaced in bearing, the first at `first`.
    pub fn evenly_spaced(id: impl Into<String>, x: f64, y: f64, height: f64, n: usize, first: f64) -> Self {
        let step = 2.0 * std::f64::consts::PI / n as f64;
        TowerSite {
            id: id.into(),
            x,
            y,
            height,
            beams: (0..n).map(|k| wrap_angle(first + k as f64 * step)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::precondition(format!(
                "tower `{}` must have a positive antenna height",
                self.id
            )));
        }
        if self.beams.is_empty() {
            return Err(Error::precondition(format!("tower `{}` has no beams", self.id)));
        }
        for (i, a) in self.beams.iter().enumerate() {
            for b in &self.beams[i + 1..] {
                if wrap_angle(a - b).abs() < 1e-9 {
                    return Err(Error::precondition(format!(
                        "tower `{}` has duplicate beam bearings",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bearing(&self, beam: usize) -> Result<f64> {
        self.beams.get(beam).copied().ok_or_else(|| {
            Error::precondition(format!("tower `{}` has no beam {beam}", self.id))
        })
    }

    /// Beam whose boresight is closest in bearing to the point `(x, y)`.
    pub fn best_beam(&self, x: f64, y: f64) -> usize {
        let phi = (y - self.y).atan2(x - self.x);
        let mut best = 0;
        let mut best_off = f64::INFINITY;
        for (k, &b) in self.beams.iter().enumerate() {
            let off = wrap_angle(phi - b).abs();
            if off < best_off {
                best_off = off;
                best = k;
            }
        }
        best
    }
}

/// Horizontal range, slant range and off-boresight angle of a bird.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub r: f64,
    pub slant_range: f64,
    pub psi: f64,
}

pub fn geometry(state: &StateVector, tower: &TowerSite, beam: usize) -> Result<BeamGeometry> {
    let bearing = tower.bearing(beam)?;
    let dx = state.x - tower.x;
    let dy = state.y - tower.y;
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::DegenerateGeometry {
            tower: tower.id.clone(),
        });
    }
    let dz = state.altitude() - tower.height;
    Ok(BeamGeometry {
        r,
        slant_range: r.hypot(dz),
        psi: wrap_angle(dy.atan2(dx) - bearing),
    })
}

/// Argument `k₀ H_T z / R` of the height-gain factor.
pub fn height_gain_argument(wavelength: f64, slant_range: f64, altitude: f64, tower_height: f64) -> f64 {
    2.0 * std::f64::consts::PI / wavelength * tower_height * altitude / slant_range
}

/// Altitude `λ₀R / 4H_T` at which the height gain peaks for a given range.
pub fn height_gain_ceiling(wavelength: f64, slant_range: f64, tower_height: f64) -> f64 {
    wavelength * slant_range / (4.0 * tower_height)
}

/// Signed observable; the sign is that of `g(ψ)`.
pub fn xi_signed(state: &StateVector, tower: &TowerSite, beam: usize, pattern: &YagiPattern) -> Result<f64> {
    let geo = geometry(state, tower, beam)?;
    let k0 = pattern.k0();
    let arg = k0 * tower.height * state.altitude() / geo.slant_range;
    Ok(pattern.field_pattern(geo.psi) * arg.sin() / (k0 * geo.slant_range))
}

/// Noiseless observable `|ξ|`; received power is `Ka ξ²`.
pub fn xi(state: &StateVector, tower: &TowerSite, beam: usize, pattern: &YagiPattern) -> Result<f64> {
    Ok(xi_signed(state, tower, beam, pattern)?.abs())
}

/// Signed `ξ` and its gradient with respect to the state.
///
/// The velocity slots are zero: received power does not depend on speed.
pub fn xi_gradient(
    state: &StateVector,
    tower: &TowerSite,
    beam: usize,
    pattern: &YagiPattern,
) -> Result<(f64, RowVector5<f64>)> {
    let geo = geometry(state, tower, beam)?;
    let k0 = pattern.k0();
    let h = tower.height;
    let z = state.altitude();
    let big_r = geo.slant_range;
    let (dx, dy) = (state.x - tower.x, state.y - tower.y);

    let g = pattern.field_pattern(geo.psi);
    let dg = pattern.field_pattern_derivative(geo.psi);
    let arg = k0 * h * z / big_r;
    let (s, c) = arg.sin_cos();
    let value = g * s / (k0 * big_r);

    // ξ(R, ψ, z) with R = R(x, y, z) and ψ = ψ(x, y).
    let d_slant = -g * (arg * c + s) / (k0 * big_r * big_r);
    let d_psi = dg * s / (k0 * big_r);
    let d_alt_explicit = g * c * h / (big_r * big_r);

    let r2 = geo.r * geo.r;
    let d_x = d_slant * dx / big_r - d_psi * dy / r2;
    let d_y = d_slant * dy / big_r + d_psi * dx / r2;
    let d_z = d_slant * (z - h) / big_r + d_alt_explicit;
    let d_xz = 2.0 * state.xz * d_z;
    Ok((value, RowVector5::new(d_x, 0.0, d_y, 0.0, d_xz)))
}

/// Linearised measurement about a nominal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRow {
    /// `H = 2ξ̃ ∂ξ/∂p`.
    pub h_row: RowVector5<f64>,
    /// `h = ξ̃² + P0`.
    pub h: f64,
    /// `ξ̃`, signed.
    pub xi: f64,
}

pub fn measurement_row(
    state: &StateVector,
    tower: &TowerSite,
    beam: usize,
    pattern: &YagiPattern,
    p0: f64,
) -> Result<MeasurementRow> {
    let (xi, grad) = xi_gradient(state, tower, beam, pattern)?;
    Ok(MeasurementRow {
        h_row: grad * (2.0 * xi),
        h: xi * xi + p0,
        xi,
    })
}

/// Mean received power `ξ² + P0`.
pub fn mean_power(xi: f64, p0: f64) -> f64 {
    xi * xi + p0
}

/// Variance of the received power `4ξ²P0 + 2P0²`.
pub fn power_variance(xi: f64, p0: f64) -> f64 {
    4.0 * xi * xi * p0 + 2.0 * p0 * p0
}

/// Instantaneous power `(ξ + √P0 μ)²` with `μ ~ N(0, 1)`.
pub fn sample_power<R: Rng + ?Sized>(xi: f64, p0: f64, rng: &mut R) -> f64 {
    let mu: f64 = rng.sample(StandardNormal);
    power_with_draw(xi, p0, mu)
}

/// Instantaneous power for a given standard-normal draw.
pub fn power_with_draw(xi: f64, p0: f64, mu: f64) -> f64 {
    (xi + p0.sqrt() * mu).powi(2)
}

/// Receiver noise floor `k T₀ B F / Ka` in normalised power units.
pub fn thermal_noise_estimate(t0: f64, bandwidth: f64, noise_figure: f64, ka: f64) -> Result<f64> {
    if !(t0 > 0.0 && bandwidth >= 0.0 && noise_figure > 0.0 && ka > 0.0) {
        return Err(Error::precondition("thermal noise inputs must be positive"));
    }
    Ok(BOLTZMANN * t0 * bandwidth * noise_figure / ka)
}
