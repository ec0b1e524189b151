//! Analytical horizontal-plane pattern of a Yagi array.
//!
//! The array factor is that of a continuous line source with uniform amplitude
//! and Hansen-Woodyard end-fire phasing, multiplied by a half-wave dipole
//! element factor:
//!
//! ```text
//! g(ψ) = cos(π/2 · sin ψ) / cos ψ · sin(p + q cos ψ) / (p + q cos ψ)
//! ```
//!
//! with `q = k₀Lₑ/2`, `p = β₀Lₑ/2` and `β₀ = -(k₀ + 2.94/Lₑ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Carrier frequency of the tags [Hz].
pub const TAG_FREQUENCY_HZ: f64 = 166.38e6;
/// Effective line-source length that reproduces the catalogue pattern [m].
pub const STUDY_EFFECTIVE_LENGTH: f64 = 4.6;

const HANSEN_WOODYARD: f64 = 2.94;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

fn sinc_derivative(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        -u / 3.0
    } else {
        (u * u.cos() - u.sin()) / (u * u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternSpec", into = "PatternSpec")]
pub struct YagiPattern {
    effective_length: f64,
    wavelength: f64,
    k0: f64,
    beta0: f64,
    p: f64,
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct PatternSpec {
    effective_length: f64,
    wavelength: f64,
}

impl TryFrom<PatternSpec> for YagiPattern {
    type Error = Error;

    fn try_from(spec: PatternSpec) -> Result<Self> {
        YagiPattern::new(spec.effective_length, spec.wavelength)
    }
}

impl From<YagiPattern> for PatternSpec {
    fn from(p: YagiPattern) -> Self {
        PatternSpec {
            effective_length: p.effective_length,
            wavelength: p.wavelength,
        }
    }
}

impl Default for YagiPattern {
    fn default() -> Self {
        YagiPattern::study_antenna()
    }
}

impl YagiPattern {
    pub fn new(effective_length: f64, wavelength: f64) -> Result<Self> {
        if !(effective_length > 0.0 && effective_length.is_finite()) {
            return Err(Error::precondition("effective length must be positive"));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::precondition("wavelength must be positive"));
        }
        let k0 = 2.0 * PI / wavelength;
        let beta0 = -(k0 + HANSEN_WOODYARD / effective_length);
        Ok(YagiPattern {
            effective_length,
            wavelength,
            k0,
            beta0,
            p: beta0 * effective_length / 2.0,
            q: k0 * effective_length / 2.0,
        })
    }

    /// The nine-element array of the study towers at the tag carrier.
    pub fn study_antenna() -> Self {
        YagiPattern::new(STUDY_EFFECTIVE_LENGTH, SPEED_OF_LIGHT / TAG_FREQUENCY_HZ)
            .expect("constants are valid")
    }

    pub fn effective_length(&self) -> f64 {
        self.effective_length
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Free-space wavenumber [rad/m].
    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Dipole element factor `cos(π/2 sin ψ)/cos ψ` and its derivative.
    ///
    /// Written as `(π/2) c · sinc(κ)/(1+|s|)` with `κ = (π/2)(1-|s|)`, which
    /// has no removable singularity at `ψ = ±π/2`.
    fn element(psi: f64) -> (f64, f64) {
        let (s, c) = psi.sin_cos();
        let abs_s = s.abs();
        let kappa = FRAC_PI_2 * c * c / (1.0 + abs_s);
        let sk = sinc(kappa);
        let value = FRAC_PI_2 * c * sk / (1.0 + abs_s);
        let slope = -FRAC_PI_2 * s.signum() * kappa.cos() + s * sk * FRAC_PI_2 / (1.0 + abs_s);
        (value, slope)
    }

    fn array(&self, psi: f64) -> (f64, f64) {
        let (s, c) = psi.sin_cos();
        let u = self.p + self.q * c;
        (sinc(u), -self.q * s * sinc_derivative(u))
    }

    /// Field pattern `g(ψ)`; signed, with `ψ` taken modulo 2π.
    pub fn field_pattern(&self, psi: f64) -> f64 {
        let psi = wrap_angle(psi);
        Self::element(psi).0 * self.array(psi).0
    }

    /// `dg/dψ`.
    pub fn field_pattern_derivative(&self, psi: f64) -> f64 {
        let psi = wrap_angle(psi);
        let (e, de) = Self::element(psi);
        let (a, da) = self.array(psi);
        de * a + e * da
    }

    /// Power gain `g²(ψ)`, up to the constant absorbed downstream.
    pub fn power_gain(&self, psi: f64) -> f64 {
        self.field_pattern(psi).powi(2)
    }

    /// `|g(0)| = sin(p+q)/(p+q)`.
    pub fn boresight_gain(&self) -> f64 {
        self.field_pattern(0.0).abs()
    }

    /// Full angle between the half-power points of the main lobe [deg].
    pub fn half_power_beamwidth(&self) -> Result<f64> {
        let half = self.power_gain(0.0) / 2.0;
        let below = |psi: f64| self.power_gain(psi) < half;
        let step = 1e-3;
        let mut hi = step;
        while !below(hi) {
            hi += step;
            if hi >= PI {
                return Err(Error::Numerical("no half-power crossing in the pattern".into()));
            }
        }
        let mut lo = hi - step;
        while hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(2.0 * (0.5 * (lo + hi)).to_degrees())
    }

    /// `10 log₁₀(g²(0)/g²(π))`; infinite when the back direction is a null.
    pub fn front_to_back_db(&self) -> f64 {
        let back = self.power_gain(PI);
        if back == 0.0 {
            return f64::INFINITY;
        }
        10.0 * (self.power_gain(0.0) / back).log10()
    }

    /// Pattern relative to boresight in dB, `20 log₁₀(|g(ψ)|/|g(0)|)`.
    pub fn relative_db(&self, psi: f64) -> f64 {
        20.0 * (self.field_pattern(psi).abs() / self.boresight_gain()).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn wavelength_from_carrier() {
        let pat = YagiPattern::study_antenna();
        assert!((pat.wavelength() - 1.8019).abs() < 1e-4);
    }

    #[test]
    fn phasing_keeps_sinc_argument_negative() {
        let pat = YagiPattern::study_antenna();
        assert!(pat.p() < 0.0 && pat.q() > 0.0 && pat.p().abs() > pat.q());
    }

    #[test]
    fn boresight_value() {
        let pat = YagiPattern::new(4.6, 1.8019).unwrap();
        let pq = pat.p() + pat.q();
        assert_relative_eq!(pat.field_pattern(0.0), pq.sin() / pq, max_relative = 1e-14);
        assert!((pat.boresight_gain() - 0.6768).abs() < 5e-4);
    }

    #[test]
    fn element_factor_limits() {
        let pat = YagiPattern::study_antenna();
        assert!(pat.field_pattern(FRAC_PI_2).abs() < 1e-15);
        assert!(pat.field_pattern(-FRAC_PI_2).abs() < 1e-15);
        assert!(pat.field_pattern(FRAC_PI_2 + 1e-6).abs() < 1e-5);
        assert!(pat.field_pattern(FRAC_PI_2 - 1e-6).abs() < 1e-5);
        // Direct formula away from the singular points.
        for &psi in &[0.1, 0.7, 1.2, 2.0, 3.0] {
            let (s, c) = f64::sin_cos(psi);
            let direct = (FRAC_PI_2 * s).cos() / c;
            assert_relative_eq!(YagiPattern::element(psi).0, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn anchors() {
        let pat = YagiPattern::new(4.6, 1.8019).unwrap();
        let bw = pat.half_power_beamwidth().unwrap();
        assert!((bw - 35.8).abs() < 0.3, "beamwidth {bw}");
        let fb = pat.front_to_back_db();
        assert!((fb - 22.0).abs() < 0.5, "front-to-back {fb}");
        assert!((fb - 20.0).abs() < 3.0);
    }

    #[test]
    fn longer_line_source_narrows_beam() {
        let widths: Vec<f64> = [3.5, 4.0, 4.6, 5.5]
            .iter()
            .map(|&le| YagiPattern::new(le, 1.8019).unwrap().half_power_beamwidth().unwrap())
            .collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
    }

    #[test]
    fn main_lobe_peaks_at_boresight() {
        let pat = YagiPattern::study_antenna();
        let g0 = pat.boresight_gain();
        for i in 1..=300 {
            let psi = i as f64 * 1e-3;
            assert!(pat.field_pattern(psi).abs() <= g0);
        }
    }

    #[test]
    fn invalid_dimensions() {
        assert!(YagiPattern::new(0.0, 1.8).is_err());
        assert!(YagiPattern::new(4.6, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn pattern_is_even(psi in -PI..PI) {
            let pat = YagiPattern::study_antenna();
            prop_assert!((pat.field_pattern(psi) - pat.field_pattern(-psi)).abs() < 1e-14);
        }

        #[test]
        fn derivative_matches_finite_difference(psi in -3.1f64..3.1) {
            let pat = YagiPattern::study_antenna();
            let h = 1e-6;
            let fd = (pat.field_pattern(psi + h) - pat.field_pattern(psi - h)) / (2.0 * h);
            let an = pat.field_pattern_derivative(psi);
            prop_assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{} vs {}", fd, an);
        }

        #[test]
        fn sinc_denominator_bounded_away_from_zero(psi in -PI..PI) {
            let pat = YagiPattern::study_antenna();
            prop_assert!(pat.p() + pat.q() * psi.cos() < -1.0);
        }
    }
}
