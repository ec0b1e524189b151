//! Stable kernels for the elementary integrals that make up the discrete
//! process-noise covariance.
//!
//! Every entry of Q is a constant times `∫₀ᵗ f(s) g(s) ds` where `f` and `g`
//! are drawn from `λ_β(s) = e^{-βs}` and `μ_β(s) = (1 - e^{-βs}) / β`. The
//! textbook closed forms cancel catastrophically when `βt` is small, so each
//! kernel switches to a power series in the offending rate below `βt = 1`.

/// Switch-over point between the series and the closed form, in units of `βt`.
const SERIES_LIMIT: f64 = 1.0;
const MAX_TERMS: usize = 60;

/// `∫₀¹ wᵏ e^{-uw} dw` for `u ≥ 0`.
pub(crate) fn moment(k: usize, u: f64) -> f64 {
    let kf = k as f64;
    if u == 0.0 {
        return 1.0 / (kf + 1.0);
    }
    if u <= 50.0 {
        // Positive-term series from the lower incomplete gamma function.
        let mut term = 1.0 / (kf + 1.0);
        let mut sum = term;
        let mut j = 1.0;
        loop {
            term *= u / (kf + j + 1.0);
            sum += term;
            if term < 1e-17 * sum && j > u {
                break;
            }
            j += 1.0;
        }
        (-u).exp() * sum
    } else {
        // Forward recurrence; stable while k < u.
        let decay = (-u).exp();
        let mut h = -(-u).exp_m1() / u;
        for i in 1..=k {
            h = (i as f64 * h - decay) / u;
        }
        h
    }
}

/// `∫₀ᵗ e^{-cs} ds`.
pub(crate) fn exp_integral(c: f64, t: f64) -> f64 {
    t * moment(0, c * t)
}

/// `∫₀ᵗ λ_a(s) λ_b(s) ds`.
pub(crate) fn lambda_lambda(a: f64, b: f64, t: f64) -> f64 {
    exp_integral(a + b, t)
}

/// `∫₀ᵗ μ_a(s) λ_b(s) ds`.
pub(crate) fn mu_lambda(a: f64, b: f64, t: f64) -> f64 {
    let at = a * t;
    if at <= SERIES_LIMIT {
        // μ_a(s) = Σ (-a)ⁿ sⁿ⁺¹ / (n+1)!
        let bt = b * t;
        let mut coeff = 1.0;
        let mut sum = 0.0;
        for n in 0..MAX_TERMS {
            if n > 0 {
                coeff *= -at / (n as f64 + 1.0);
            }
            let term = coeff * moment(n + 1, bt);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        t * t * sum
    } else {
        (exp_integral(b, t) - exp_integral(a + b, t)) / a
    }
}

/// `∫₀ᵗ μ_a(s) μ_b(s) ds`.
pub(crate) fn mu_mu(a: f64, b: f64, t: f64) -> f64 {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let at = a * t;
    if at <= SERIES_LIMIT {
        // Expand μ_a; ∫₀ᵗ sᵏ μ_b(s) ds = tᵏ⁺² [h₀(bt) - h_{k+1}(bt)] / (k+1).
        let bt = b * t;
        let h0 = moment(0, bt);
        let mut coeff = 1.0;
        let mut sum = 0.0;
        for n in 0..MAX_TERMS {
            if n > 0 {
                coeff *= -at / (n as f64 + 1.0);
            }
            let term = coeff * (h0 - moment(n + 2, bt)) / (n as f64 + 2.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        t * t * t * sum
    } else {
        (t - exp_integral(a, t) - exp_integral(b, t) + exp_integral(a + b, t)) / (a * b)
    }
}
