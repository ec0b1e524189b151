//! Fixtures shared by the criterion benchmarks.

use yagitrack::io::validation::{TOWER_HEIGHT, TOWER_X, TOWER_Y};
use yagitrack::{FilterState, StateVector, TowerSite};

pub fn study_tower() -> TowerSite {
    TowerSite::evenly_spaced("SIM", TOWER_X, TOWER_Y, TOWER_HEIGHT, 6, std::f64::consts::FRAC_PI_4)
}

/// A bird 2 km north-east of the tower, in the first beam.
pub fn study_estimate() -> FilterState {
    let mean = StateVector::with_altitude(TOWER_X + 1400.0, 2.0, TOWER_Y + 1400.0, 2.0, 15.0);
    FilterState::from_diagonal(mean, [100.0, 1.0, 100.0, 1.0, 4.0], 0.0)
}
