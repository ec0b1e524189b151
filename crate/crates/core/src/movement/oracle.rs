//! Quadrature reference for the process-noise covariance.
//!
//! Integrates `e^{T(dt-τ)} B Bᵀ e^{Tᵀ(dt-τ)}` entry by entry with adaptive
//! Gauss-Kronrod (7/15) quadrature. It shares no code with the closed form in
//! the parent module and exists to check it.

use nalgebra::{Matrix5, Matrix5x3};

use super::{MovementParams, ProcessNoiseCov};
use crate::error::{Error, Result};

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const REL_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 40;

fn gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * KRONROD_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Option<f64> {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= tol.max(REL_TOL * value.abs()) {
        return Some(value);
    }
    if depth == 0 {
        return None;
    }
    let m = 0.5 * (a + b);
    Some(adaptive(f, a, m, 0.5 * tol, depth - 1)? + adaptive(f, m, b, 0.5 * tol, depth - 1)?)
}

/// Impulse response `e^{T s} B` written out from the scalar solutions.
fn response(params: &MovementParams, s: f64) -> Matrix5x3<f64> {
    let lam = |beta: f64| (-beta * s).exp();
    let mu = |beta: f64| {
        if beta * s == 0.0 {
            s
        } else {
            -(-beta * s).exp_m1() / beta
        }
    };
    let p = params;
    Matrix5x3::new(
        mu(p.beta_x) * p.sigma_xx,
        mu(p.beta_x) * p.sigma_xy,
        0.0,
        lam(p.beta_x) * p.sigma_xx,
        lam(p.beta_x) * p.sigma_xy,
        0.0,
        mu(p.beta_y) * p.sigma_yx,
        mu(p.beta_y) * p.sigma_yy,
        0.0,
        lam(p.beta_y) * p.sigma_yx,
        lam(p.beta_y) * p.sigma_yy,
        0.0,
        lam(p.beta_z) * p.sigma_zx,
        lam(p.beta_z) * p.sigma_zy,
        lam(p.beta_z) * p.sigma_zz,
    )
}

/// Process-noise covariance by adaptive quadrature. Slow; meant for tests.
pub fn process_noise_cov_oracle(params: &MovementParams, dt: f64) -> Result<ProcessNoiseCov> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::precondition("time step must be finite and non-negative"));
    }
    let mut q = Matrix5::zeros();
    if dt == 0.0 {
        return Ok(ProcessNoiseCov(q));
    }
    for i in 0..5 {
        for j in i..5 {
            // Substituting s = dt - τ leaves the integrand as G(s) G(s)ᵀ.
            let entry = move |s: f64| {
                let g = response(params, s);
                g.row(i).dot(&g.row(j))
            };
            let value = adaptive(&entry, 0.0, dt, 0.0, MAX_DEPTH)
                .ok_or(Error::Quadrature { row: i, col: j })?;
            q[(i, j)] = value;
            q[(j, i)] = value;
        }
    }
    Ok(ProcessNoiseCov(q))
}
