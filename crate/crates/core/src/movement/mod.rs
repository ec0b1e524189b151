//! Correlated stochastic movement model.
//!
//! The horizontal velocities are Ornstein-Uhlenbeck processes without drift,
//! and the altitude root `xz` follows an OU-type SDE so that `z = xz²` is a
//! Cox-Ingersoll-Ross process. The system is linear and time invariant, so the
//! transition over any step `dt` is the exact matrix exponential and the step
//! noise is Gaussian with covariance `Q(dt)`; nothing here is discretised.

mod integrals;
pub mod oracle;

use nalgebra::{Matrix5, SymmetricEigen, Vector3, Vector5};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use oracle::process_noise_cov_oracle;

/// Below this value of `β·dt` the transition entries use a truncated series.
const SMALL_DECAY: f64 = 1e-8;

/// Decay constants and noise coefficients of the movement model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementParams {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    pub sigma_xx: f64,
    pub sigma_yy: f64,
    pub sigma_zz: f64,
    pub sigma_xy: f64,
    pub sigma_yx: f64,
    pub sigma_zx: f64,
    pub sigma_zy: f64,
}

impl MovementParams {
    /// Parameters of the simulated-trajectory validation run: isotropic
    /// horizontal noise with `σxy = 0.25 σxx = -σyx` and
    /// `σzx = 0.5 σzy = 0.2 σzz`.
    pub fn validation_run() -> Self {
        let sigma = 0.25;
        let sigma_zz = 0.02;
        let sigma_zx = 0.2 * sigma_zz;
        MovementParams {
            beta_x: 2.5e-4,
            beta_y: 2.25e-4,
            beta_z: 1e-5,
            sigma_xx: sigma,
            sigma_yy: sigma,
            sigma_zz,
            sigma_xy: 0.25 * sigma,
            sigma_yx: -0.25 * sigma,
            sigma_zx,
            sigma_zy: sigma_zx / 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let betas = [self.beta_x, self.beta_y, self.beta_z];
        if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::precondition("decay rates must be positive and finite"));
        }
        let diag = [self.sigma_xx, self.sigma_yy, self.sigma_zz];
        if diag.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::precondition(
                "sigma_xx, sigma_yy and sigma_zz must be positive and finite",
            ));
        }
        let cross = [self.sigma_xy, self.sigma_yx, self.sigma_zx, self.sigma_zy];
        if cross.iter().any(|s| !s.is_finite()) {
            return Err(Error::precondition("cross-coupling noise must be finite"));
        }
        Ok(())
    }

    /// Radial-velocity fluctuations are independent of heading.
    pub fn is_isotropic(&self) -> bool {
        let tol = 1e-12;
        let diag_scale = self.sigma_xx.abs().max(self.sigma_yy.abs());
        let cross_scale = self.sigma_xy.abs().max(self.sigma_yx.abs());
        (self.sigma_xx - self.sigma_yy).abs() <= tol * diag_scale
            && (self.sigma_yx + self.sigma_xy).abs() <= tol * cross_scale
    }

    /// Pairwise-distinct decay rates, necessary for a degree of observability
    /// of four.
    pub fn is_almost_observable_compatible(&self) -> bool {
        let distinct = |a: f64, b: f64| (a - b).abs() > 1e-9 * a.abs().max(b.abs());
        distinct(self.beta_x, self.beta_y)
            && distinct(self.beta_x, self.beta_z)
            && distinct(self.beta_y, self.beta_z)
    }

    fn noise_rows(&self) -> [Vector3<f64>; 3] {
        [
            Vector3::new(self.sigma_xx, self.sigma_xy, 0.0),
            Vector3::new(self.sigma_yx, self.sigma_yy, 0.0),
            Vector3::new(self.sigma_zx, self.sigma_zy, self.sigma_zz),
        ]
    }

    /// Noise coefficient matrix `B` mapping `[Wx, Wy, Wz]` onto the state.
    pub fn noise_matrix(&self) -> nalgebra::Matrix5x3<f64> {
        let [bx, by, bz] = self.noise_rows();
        let mut b = nalgebra::Matrix5x3::zeros();
        b.row_mut(1).copy_from(&bx.transpose());
        b.row_mut(3).copy_from(&by.transpose());
        b.row_mut(4).copy_from(&bz.transpose());
        b
    }

    /// Continuous-time system matrix.
    pub fn system_matrix(&self) -> Matrix5<f64> {
        let mut t = Matrix5::zeros();
        t[(0, 1)] = 1.0;
        t[(1, 1)] = -self.beta_x;
        t[(2, 3)] = 1.0;
        t[(3, 3)] = -self.beta_y;
        t[(4, 4)] = -self.beta_z;
        t
    }
}

/// Planar position and velocity plus the altitude root.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
    pub xz: f64,
}

impl StateVector {
    pub fn new(x: f64, vx: f64, y: f64, vy: f64, xz: f64) -> Self {
        StateVector { x, vx, y, vy, xz }
    }

    /// Builds a state from an altitude in metres, taking the non-negative root.
    pub fn with_altitude(x: f64, vx: f64, y: f64, vy: f64, z: f64) -> Self {
        StateVector::new(x, vx, y, vy, z.max(0.0).sqrt())
    }

    pub fn altitude(&self) -> f64 {
        self.xz * self.xz
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.x, self.vx, self.y, self.vy, self.xz)
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        StateVector::new(v[0], v[1], v[2], v[3], v[4])
    }
}

impl From<Vector5<f64>> for StateVector {
    fn from(v: Vector5<f64>) -> Self {
        StateVector::from_vector(&v)
    }
}

impl From<StateVector> for Vector5<f64> {
    fn from(s: StateVector) -> Self {
        s.to_vector()
    }
}

/// Covariance of the process noise accumulated over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoiseCov(pub Matrix5<f64>);

impl ProcessNoiseCov {
    pub fn matrix(&self) -> &Matrix5<f64> {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        let tol = 1e-12 * self.max_abs();
        (0..5).all(|m| (0..5).all(|n| (self.0[(m, n)] - self.0[(n, m)]).abs() <= tol))
    }

    pub fn is_psd(&self) -> bool {
        let eig = SymmetricEigen::new(self.0).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        min >= -1e-10 * max.max(0.0)
    }

    /// Square-root factor `L` with `L Lᵀ = Q`, from a symmetric eigen
    /// decomposition. Eigenvalues down to `-1e-10 λmax` are treated as zero.
    pub fn factor(&self) -> Result<Matrix5<f64>> {
        let eig = SymmetricEigen::new(self.0);
        let max = eig.eigenvalues.max().max(0.0);
        let mut l = eig.eigenvectors;
        for (k, &value) in eig.eigenvalues.iter().enumerate() {
            if value < -1e-10 * max {
                return Err(Error::Numerical(format!(
                    "process noise covariance has eigenvalue {value:e} (max {max:e})"
                )));
            }
            let scale = value.max(0.0).sqrt();
            l.column_mut(k).scale_mut(scale);
        }
        Ok(l)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::precondition(format!(
            "time step must be finite and non-negative, got {dt}"
        )));
    }
    Ok(())
}

/// `(λ, μ)` with `λ = e^{-β dt}` and `μ = (1 - λ)/β`.
fn decay_pair(beta: f64, dt: f64) -> (f64, f64) {
    let u = beta * dt;
    let lambda = (-u).exp();
    let mu = if u.abs() < SMALL_DECAY {
        dt * (1.0 - u / 2.0 + u * u / 6.0)
    } else {
        -(-u).exp_m1() / beta
    };
    (lambda, mu)
}

/// Exact state transition `e^{T dt}`.
pub fn transition_matrix(params: &MovementParams, dt: f64) -> Result<Matrix5<f64>> {
    check_dt(dt)?;
    let (lx, mx) = decay_pair(params.beta_x, dt);
    let (ly, my) = decay_pair(params.beta_y, dt);
    let (lz, _) = decay_pair(params.beta_z, dt);
    let mut m = Matrix5::zeros();
    m[(0, 0)] = 1.0;
    m[(0, 1)] = mx;
    m[(1, 1)] = lx;
    m[(2, 2)] = 1.0;
    m[(2, 3)] = my;
    m[(3, 3)] = ly;
    m[(4, 4)] = lz;
    Ok(m)
}

#[derive(Clone, Copy)]
enum Response {
    Lambda,
    Mu,
}

/// Closed-form process-noise covariance over a step of length `dt`.
///
/// Each state component responds to a noise impulse through either `λ_β` or
/// `μ_β`, and each carries a row of `B`; entry `(i, j)` is the dot product of
/// the two rows times the integral of the product of the two responses.
pub fn process_noise_cov(params: &MovementParams, dt: f64) -> Result<ProcessNoiseCov> {
    check_dt(dt)?;
    let [bx, by, bz] = params.noise_rows();
    let basis = [
        (Response::Mu, params.beta_x, bx),
        (Response::Lambda, params.beta_x, bx),
        (Response::Mu, params.beta_y, by),
        (Response::Lambda, params.beta_y, by),
        (Response::Lambda, params.beta_z, bz),
    ];
    let mut q = Matrix5::zeros();
    if dt == 0.0 {
        return Ok(ProcessNoiseCov(q));
    }
    for i in 0..5 {
        for j in i..5 {
            let (ri, bi, ci) = basis[i];
            let (rj, bj, cj) = basis[j];
            let weight = ci.dot(&cj);
            if weight == 0.0 {
                continue;
            }
            let integral = match (ri, rj) {
                (Response::Lambda, Response::Lambda) => integrals::lambda_lambda(bi, bj, dt),
                (Response::Mu, Response::Lambda) => integrals::mu_lambda(bi, bj, dt),
                (Response::Lambda, Response::Mu) => integrals::mu_lambda(bj, bi, dt),
                (Response::Mu, Response::Mu) => integrals::mu_mu(bi, bj, dt),
            };
            q[(i, j)] = weight * integral;
            q[(j, i)] = q[(i, j)];
        }
    }
    Ok(ProcessNoiseCov(q))
}

/// Advances a state by `dt`. Without `noise` this is the mean propagation.
pub fn propagate(
    state: &StateVector,
    params: &MovementParams,
    dt: f64,
    noise: Option<&Vector5<f64>>,
) -> Result<StateVector> {
    let phi = transition_matrix(params, dt)?;
    let mut next = phi * state.to_vector();
    if let Some(w) = noise {
        next += w;
    }
    Ok(StateVector::from_vector(&next))
}

/// Draws one step of process noise for step length `dt`.
pub fn sample_noise<R: Rng + ?Sized>(
    params: &MovementParams,
    dt: f64,
    rng: &mut R,
) -> Result<Vector5<f64>> {
    let factor = process_noise_cov(params, dt)?.factor()?;
    Ok(factor * standard_normal5(rng))
}

pub(crate) fn standard_normal5<R: Rng + ?Sized>(rng: &mut R) -> Vector5<f64> {
    Vector5::from_fn(|_, _| rng.sample(StandardNormal))
}

/// The generator behind every seeded stream in the crate (ChaCha20, as
/// shipped by `rand_chacha` 0.9).
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Simulates the movement model at the given instants. The first entry of the
/// result is `init` at `times[0]`.
pub fn simulate(
    params: &MovementParams,
    init: &StateVector,
    times: &[f64],
    seed: u64,
) -> Result<Vec<StateVector>> {
    let mut rng = seeded_rng(seed);
    simulate_with_rng(params, init, times, &mut rng)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    params: &MovementParams,
    init: &StateVector,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<StateVector>> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::precondition("simulation times must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return Ok(out);
    }
    out.push(*init);
    let mut current = *init;
    // Regular sampling is the common case; reuse the factor when dt repeats.
    let mut cached: Option<(f64, Matrix5<f64>, Matrix5<f64>)> = None;
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let (phi, factor) = match cached {
            Some((cdt, phi, factor)) if cdt == dt => (phi, factor),
            _ => {
                let phi = transition_matrix(params, dt)?;
                let factor = process_noise_cov(params, dt)?.factor()?;
                cached = Some((dt, phi, factor));
                (phi, factor)
            }
        };
        let next = phi * current.to_vector() + factor * standard_normal5(rng);
        current = StateVector::from_vector(&next);
        out.push(current);
    }
    Ok(out)
}

/// Long-run mean altitude `(σzx² + σzy² + σzz²) / 2βz`.
pub fn stationary_altitude(params: &MovementParams) -> Result<f64> {
    if !(params.beta_z > 0.0) {
        return Err(Error::precondition("beta_z must be positive"));
    }
    let s = params.sigma_zx.powi(2) + params.sigma_zy.powi(2) + params.sigma_zz.powi(2);
    Ok(s / (2.0 * params.beta_z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> MovementParams {
        MovementParams::validation_run()
    }

    #[test]
    fn zero_step_is_identity() {
        let p = params();
        assert_eq!(transition_matrix(&p, 0.0).unwrap(), Matrix5::identity());
        assert_eq!(process_noise_cov(&p, 0.0).unwrap().0, Matrix5::zeros());
        let s = StateVector::new(1.0, 2.0, 3.0, 4.0, 5.0);
        assert_eq!(propagate(&s, &p, 0.0, None).unwrap(), s);
    }

    #[test]
    fn negative_step_rejected() {
        let p = params();
        assert!(matches!(transition_matrix(&p, -1.0), Err(Error::Precondition(_))));
        assert!(matches!(process_noise_cov(&p, -1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn transition_entries() {
        let p = params();
        let t = transition_matrix(&p, 6.0).unwrap();
        // exp(-1.5e-3) and its companion, to 17 significant digits.
        let lambda = 0.998_501_124_437_710_9;
        assert_relative_eq!(t[(1, 1)], lambda, max_relative = 1e-15);
        assert_relative_eq!(t[(0, 1)], (1.0 - lambda) / 2.5e-4, max_relative = 1e-12);
        for (r, c) in [(0, 2), (1, 3), (4, 0), (2, 4), (3, 1)] {
            assert_eq!(t[(r, c)], 0.0);
        }
    }

    #[test]
    fn vanishing_decay_limit() {
        let mut p = params();
        p.beta_x = 1e-14;
        let t = transition_matrix(&p, 10.0).unwrap();
        assert_relative_eq!(t[(0, 1)], 10.0, max_relative = 1e-12);
        assert_relative_eq!(t[(1, 1)], 1.0, max_relative = 1e-12);
        let s = propagate(&StateVector::new(0.0, 1.0, 0.0, 0.0, 0.0), &p, 10.0, None).unwrap();
        assert_relative_eq!(s.x, 10.0, max_relative = 1e-12);
        assert_relative_eq!(s.vx, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn published_diagonal_entries() {
        let p = params();
        let dt = 37.0;
        let q = process_noise_cov(&p, dt).unwrap().0;
        let a = p.sigma_xx.powi(2) + p.sigma_xy.powi(2);
        let lambda = (-p.beta_x * dt).exp();
        let mu = (1.0 - lambda) / p.beta_x;
        let q22 = a * (1.0 - lambda * lambda) / (2.0 * p.beta_x);
        let q11 = a * (dt - 2.0 * mu) / p.beta_x.powi(2) + q22 / p.beta_x.powi(2);
        assert_relative_eq!(q[(1, 1)], q22, max_relative = 1e-12);
        // The closed form above loses ~7 digits to cancellation at this βΔ.
        assert_relative_eq!(q[(0, 0)], q11, max_relative = 1e-6);
        let z_inf = stationary_altitude(&p).unwrap();
        let lz = (-p.beta_z * dt).exp();
        assert_relative_eq!(q[(4, 4)], (1.0 - lz * lz) * z_inf, max_relative = 1e-9);
    }

    #[test]
    fn small_step_random_walk_regime() {
        let p = params();
        let dt = 6.0;
        let q = process_noise_cov(&p, dt).unwrap().0;
        let a = p.sigma_xx.powi(2) + p.sigma_xy.powi(2);
        assert!((q[(1, 1)] - a * dt).abs() / (a * dt) < p.beta_x * dt);
    }

    #[test]
    fn isotropic_params_decouple_axes() {
        let p = params();
        assert!(p.is_isotropic());
        let q = process_noise_cov(&p, 60.0).unwrap().0;
        for (r, c) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert_eq!(q[(r, c)], 0.0);
        }
        let mut aniso = p;
        aniso.sigma_yx = -aniso.sigma_yx;
        assert!(!aniso.is_isotropic());
        assert!(process_noise_cov(&aniso, 60.0).unwrap().0[(1, 3)] > 0.0);
    }

    #[test]
    fn observability_compatibility() {
        let mut p = params();
        assert!(p.is_almost_observable_compatible());
        p.beta_y = p.beta_x;
        assert!(!p.is_almost_observable_compatible());
    }

    #[test]
    fn stationary_altitude_values() {
        let mut p = params();
        p.sigma_zx = 0.0;
        p.sigma_zy = 0.0;
        p.sigma_zz = 0.02;
        p.beta_z = 1e-5;
        assert_relative_eq!(stationary_altitude(&p).unwrap(), 20.0, max_relative = 1e-12);
        p.beta_z *= 2.0;
        assert_relative_eq!(stationary_altitude(&p).unwrap(), 10.0, max_relative = 1e-12);
        p.sigma_zz = 0.0;
        assert_eq!(stationary_altitude(&p).unwrap(), 0.0);
        p.beta_z = 0.0;
        assert!(stationary_altitude(&p).is_err());
    }

    #[test]
    fn zero_noise_simulation_follows_mean() {
        let mut p = params();
        for s in [
            &mut p.sigma_xx,
            &mut p.sigma_yy,
            &mut p.sigma_zz,
            &mut p.sigma_xy,
            &mut p.sigma_yx,
            &mut p.sigma_zx,
            &mut p.sigma_zy,
        ] {
            *s = 0.0;
        }
        let init = StateVector::with_altitude(0.0, 3.0, 0.0, -1.0, 25.0);
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 6.0 + (i % 3) as f64).collect();
        let path = simulate(&p, &init, &times, 7).unwrap();
        let mut expect = init;
        for (w, got) in times.windows(2).zip(path.iter().skip(1)) {
            expect = propagate(&expect, &p, w[1] - w[0], None).unwrap();
            assert_relative_eq!(got.x, expect.x, max_relative = 1e-12);
            assert_relative_eq!(got.vy, expect.vy, max_relative = 1e-12);
            assert_relative_eq!(got.xz, expect.xz, max_relative = 1e-12);
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let p = params();
        let init = StateVector::with_altitude(0.0, 1.0, 0.0, 1.0, 14.72);
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 6.0).collect();
        let a = simulate(&p, &init, &times, 42).unwrap();
        let b = simulate(&p, &init, &times, 42).unwrap();
        let c = simulate(&p, &init, &times, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(simulate(&p, &init, &[0.0, 1.0, 1.0], 1).is_err());
    }
}
