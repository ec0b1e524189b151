//! Receiver display map: a soft limiter on log power.
//!
//! `atanh((Z - Zm)/(ZM - Zm)) = b ln(ξ²/P0 + 1)`, so the display depends on
//! the received power only through `ξ²/P0` and the tag EIRP cancels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Display constants of the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverModel {
    pub z_min: f64,
    pub z_max: f64,
    pub b: f64,
    pub p0: f64,
}

/// A display reading converted back to the power domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedReading {
    pub xi2: f64,
    /// The reading sat at the top of the display and was clamped.
    pub censored: bool,
}

impl ReceiverModel {
    /// Fitted constants of the study receiver with a full 0–255 display.
    pub fn study_receiver() -> Self {
        ReceiverModel {
            z_min: 0.0,
            z_max: 255.0,
            b: 0.3013,
            p0: 4.8916e-11,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.z_min && self.z_min < self.z_max && self.z_max <= 255.0) {
            return Err(Error::precondition(format!(
                "display bounds must satisfy 0 <= z_min < z_max <= 255, got [{}, {}]",
                self.z_min, self.z_max
            )));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::precondition("b must be positive"));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(Error::precondition("p0 must be positive"));
        }
        Ok(())
    }

    fn span(&self) -> f64 {
        self.z_max - self.z_min
    }

    /// Real-valued display for the noiseless observable `ξ`.
    pub fn display_from_xi(&self, xi: f64) -> f64 {
        self.display_from_xi2(xi * xi)
    }

    /// Same map written as `Zm + (ZM - Zm) tanh(b ln(ξ²/P0 + 1))`, which is the
    /// ratio form `[(ξ²+P0)^{2b} - P0^{2b}] / [(ξ²+P0)^{2b} + P0^{2b}]` without
    /// the overflow of the large powers.
    pub fn display_from_xi2(&self, xi2: f64) -> f64 {
        let x = self.b * (xi2.max(0.0) / self.p0).ln_1p();
        self.z_min + self.span() * x.tanh()
    }

    /// Inverse map `ξ² = P0 [((ZM - 2Zm + Z)/(ZM - Z))^{1/2b} - 1]`.
    pub fn xi2_from_display(&self, z: f64) -> Result<f64> {
        if z >= self.z_max {
            return Err(Error::Saturated {
                z,
                z_max: self.z_max,
            });
        }
        if z < self.z_min {
            return Err(Error::BelowFloor {
                z,
                z_min: self.z_min,
            });
        }
        // ratio - 1 = 2(Z - Zm)/(ZM - Z), kept separate to avoid cancellation.
        let excess = 2.0 * (z - self.z_min) / (self.z_max - z);
        Ok(self.p0 * (excess.ln_1p() / (2.0 * self.b)).exp_m1())
    }

    /// Soft-limited display `atanh((Z - Zm)/(ZM - Zm))`.
    pub fn limiter(&self, z: f64) -> f64 {
        ((z - self.z_min) / self.span()).atanh()
    }

    /// Converts a logged display value for the filter. Readings at or above
    /// `ZM - 0.5` cannot be inverted reliably and are clamped there.
    pub fn invert_reading(&self, z: f64) -> Result<InvertedReading> {
        let ceiling = self.z_max - 0.5;
        if z >= ceiling {
            return Ok(InvertedReading {
                xi2: self.xi2_from_display(ceiling)?,
                censored: true,
            });
        }
        Ok(InvertedReading {
            xi2: self.xi2_from_display(z)?,
            censored: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn noise_power_anchor() {
        let m = ReceiverModel::study_receiver();
        let z = m.display_from_xi2(m.p0);
        assert!((z - 52.5).abs() < 0.1, "{z}");
        // Ratio form written out literally.
        let hi = (2.0 * m.p0).powf(2.0 * m.b);
        let lo = m.p0.powf(2.0 * m.b);
        assert_relative_eq!(z, 255.0 * (hi - lo) / (hi + lo), max_relative = 1e-12);
        let xi2 = m.xi2_from_display(52.5).unwrap();
        assert!((xi2 / m.p0 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn floor_and_ceiling() {
        let m = ReceiverModel {
            z_min: 12.0,
            ..ReceiverModel::study_receiver()
        };
        assert_eq!(m.display_from_xi(0.0), 12.0);
        assert_eq!(m.xi2_from_display(12.0).unwrap(), 0.0);
        assert!(m.display_from_xi(1.0) < 255.0);
        assert!(m.display_from_xi(1.0) > 254.9);
        assert!(matches!(m.xi2_from_display(255.0), Err(Error::Saturated { .. })));
        assert!(matches!(m.xi2_from_display(11.0), Err(Error::BelowFloor { .. })));
    }

    #[test]
    fn censoring_clamps_top_readings() {
        let m = ReceiverModel::study_receiver();
        let top = m.invert_reading(255.0).unwrap();
        assert!(top.censored);
        assert_relative_eq!(top.xi2, m.xi2_from_display(254.5).unwrap());
        assert!(!m.invert_reading(200.0).unwrap().censored);
    }

    #[test]
    fn validation() {
        assert!(ReceiverModel::study_receiver().validate().is_ok());
        let mut m = ReceiverModel::study_receiver();
        m.z_max = 300.0;
        assert!(m.validate().is_err());
        m = ReceiverModel::study_receiver();
        m.p0 = 0.0;
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trip(log_ratio in -6.0f64..5.0) {
            let m = ReceiverModel::study_receiver();
            let xi2 = m.p0 * 10f64.powf(log_ratio);
            let z = m.display_from_xi2(xi2);
            let back = m.xi2_from_display(z).unwrap();
            prop_assert!((back - xi2).abs() <= 1e-9 * xi2);
        }

        #[test]
        fn monotone(a in 0.0f64..1e-6, b in 0.0f64..1e-6) {
            let m = ReceiverModel::study_receiver();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.display_from_xi2(lo) <= m.display_from_xi2(hi));
        }
    }
}
