//! Discrete-time extended Kalman filter over the five-state movement model,
//! with scalar power measurements at irregular instants.

use nalgebra::{Matrix5, RowVector5, SymmetricEigen, Vector5};
use serde::{Deserialize, Serialize};

use crate::antenna::YagiPattern;
use crate::error::{Error, Result};
use crate::movement::{process_noise_cov, transition_matrix, MovementParams, StateVector};
use crate::observation::{xi_gradient, TowerSite};

/// Relative singular-value threshold used for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub mean: StateVector,
    pub cov: Matrix5<f64>,
    pub t: f64,
}

impl FilterState {
    pub fn new(mean: StateVector, cov: Matrix5<f64>, t: f64) -> Self {
        FilterState { mean, cov, t }
    }

    pub fn from_diagonal(mean: StateVector, diag: [f64; 5], t: f64) -> Self {
        FilterState::new(mean, Matrix5::from_diagonal(&Vector5::from(diag)), t)
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.cov.amax();
        (0..5).all(|i| (0..5).all(|j| (self.cov[(i, j)] - self.cov[(j, i)]).abs() <= 1e-12 * scale))
    }

    pub fn is_psd(&self) -> bool {
        let eig = SymmetricEigen::new(self.cov).eigenvalues;
        eig.min() >= -1e-8 * eig.max().max(0.0)
    }
}

/// A scalar measurement in the normalised power domain `ξ² + P0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub y: f64,
    pub r_var: f64,
    pub t: f64,
    pub tower: usize,
    pub beam: usize,
}

/// Measurement function linearised at a nominal state: `(H, h)`.
pub trait Linearize {
    fn linearize(&self, state: &StateVector) -> Result<(RowVector5<f64>, f64)>;
}

impl<F> Linearize for F
where
    F: Fn(&StateVector) -> Result<(RowVector5<f64>, f64)>,
{
    fn linearize(&self, state: &StateVector) -> Result<(RowVector5<f64>, f64)> {
        self(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceUpdate {
    /// `(I - kH) P (I - kH)ᵀ + k R kᵀ`.
    #[default]
    Joseph,
    /// `(I - kH) P`.
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub state: FilterState,
    pub innovation: f64,
    pub innovation_var: f64,
}

fn symmetrize(m: &Matrix5<f64>) -> Matrix5<f64> {
    (m + m.transpose()) * 0.5
}

/// Propagates the estimate to `t_next` through the exact transition.
pub fn predict(fs: &FilterState, params: &MovementParams, t_next: f64) -> Result<FilterState> {
    let dt = t_next - fs.t;
    if dt < 0.0 {
        return Err(Error::precondition(format!(
            "cannot predict backwards from t = {} to t = {t_next}",
            fs.t
        )));
    }
    let phi = transition_matrix(params, dt)?;
    let q = process_noise_cov(params, dt)?;
    Ok(predict_with(fs, &phi, q.matrix(), t_next))
}

/// Prediction with a transition and process noise already computed for the
/// step `t_next - fs.t`.
pub fn predict_with(fs: &FilterState, phi: &Matrix5<f64>, q: &Matrix5<f64>, t_next: f64) -> FilterState {
    let out = FilterState {
        mean: StateVector::from_vector(&(phi * fs.mean.to_vector())),
        cov: symmetrize(&(phi * fs.cov * phi.transpose() + q)),
        t: t_next,
    };
    debug_assert!(out.is_psd(), "prior covariance lost positive semidefiniteness");
    out
}

/// Corrects the a-priori estimate with one scalar measurement, linearising at
/// the a-priori mean.
pub fn update<L: Linearize + ?Sized>(
    fs: &FilterState,
    m: &Measurement,
    obs: &L,
    form: CovarianceUpdate,
) -> Result<UpdateOutcome> {
    if !(m.r_var > 0.0) {
        return Err(Error::precondition("measurement variance must be positive"));
    }
    let (h_row, h) = obs.linearize(&fs.mean)?;
    let innovation = m.y - h;
    let ph = fs.cov * h_row.transpose();
    let f = (h_row * ph)[0] + m.r_var;
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::Numerical(format!("innovation variance {f:e} is not positive")));
    }
    let gain = ph / f;
    let mean = fs.mean.to_vector() + gain * innovation;
    let ikh = Matrix5::identity() - gain * h_row;
    let cov = match form {
        CovarianceUpdate::Joseph => {
            ikh * fs.cov * ikh.transpose() + gain * gain.transpose() * m.r_var
        }
        CovarianceUpdate::Short => ikh * fs.cov,
    };
    let state = FilterState {
        mean: StateVector::from_vector(&mean),
        cov: symmetrize(&cov),
        t: fs.t,
    };
    debug_assert!(
        form == CovarianceUpdate::Short || state.is_psd(),
        "posterior covariance lost positive semidefiniteness"
    );
    Ok(UpdateOutcome {
        state,
        innovation,
        innovation_var: f,
    })
}

/// Stacks `[H; HΦ; HΦ²; HΦ³; HΦ⁴]`.
pub fn observability_matrix(transition: &Matrix5<f64>, h_row: &RowVector5<f64>) -> Matrix5<f64> {
    let mut s = Matrix5::zeros();
    let mut row = *h_row;
    for k in 0..5 {
        s.row_mut(k).copy_from(&row);
        row *= transition;
    }
    s
}

/// Number of singular values above `tol` times the largest.
pub fn numerical_rank(m: &Matrix5<f64>, tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Rank of the observability matrix for one beam at one state.
pub fn degree_of_observability(
    params: &MovementParams,
    state: &StateVector,
    tower: &TowerSite,
    beam: usize,
    pattern: &YagiPattern,
    dt: f64,
) -> Result<usize> {
    let phi = transition_matrix(params, dt)?;
    let (xi, grad) = xi_gradient(state, tower, beam, pattern)?;
    let h_row = grad * (2.0 * xi);
    Ok(numerical_rank(&observability_matrix(&phi, &h_row), RANK_TOLERANCE))
}
