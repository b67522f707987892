//! Fixed-point logarithm bases, golden-ratio roots and the derived
//! SGD hyperparameters.
//!
//! For any `x > 0, x ≠ 1` there is a base `λ` with `log_λ(x) = x`; its closed
//! form is `λ = x^(1/x)`. A [`LogBase`] stores `ln λ` rather than `λ` so that
//! bases very close to one keep full precision.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBase {
    ln_lambda: f64,
}

impl LogBase {
    /// A base `λ > 0, λ ≠ 1`.
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || lambda == 1.0 || !lambda.is_finite() {
            return Err(Error::domain(format!(
                "logarithm base must be positive, finite and different from 1, got {lambda}"
            )));
        }
        Ok(Self {
            ln_lambda: lambda.ln(),
        })
    }

    /// A base given by its natural logarithm, which must be finite and non-zero.
    pub fn from_ln(ln_lambda: f64) -> Result<Self> {
        if ln_lambda == 0.0 || !ln_lambda.is_finite() {
            return Err(Error::domain(format!(
                "ln of a base must be finite and non-zero, got {ln_lambda}"
            )));
        }
        Ok(Self { ln_lambda })
    }

    pub fn e() -> Self {
        Self { ln_lambda: 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.ln_lambda.exp()
    }

    pub fn ln_lambda(&self) -> f64 {
        self.ln_lambda
    }

    pub fn log(&self, x: f64) -> Result<f64> {
        log_base(x, *self)
    }
}

/// `log_b(x)`.
pub fn log_base(x: f64, base: LogBase) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!(
            "logarithm argument must be positive, got {x}"
        )));
    }
    Ok(x.ln() / base.ln_lambda)
}

/// Re-express a logarithm taken in base `from` as one in base `to`.
pub fn convert_base(value: f64, from: LogBase, to: LogBase) -> f64 {
    if from == to {
        return value;
    }
    // log_from(to) = ln(to)/ln(from)
    value / (to.ln_lambda / from.ln_lambda)
}

/// The base `λ = x^(1/x)` for which `log_λ(x) = x`.
///
/// Recomputed for every argument: a single base cannot be a fixed point for
/// two different inputs.
pub fn fixed_base(x: f64) -> Result<LogBase> {
    if !(x > 0.0) || x == 1.0 || !x.is_finite() {
        return Err(Error::domain(format!(
            "a fixed-point base exists only for positive x other than 1, got {x}"
        )));
    }
    LogBase::from_ln(x.ln() / x)
}

/// Move a base towards the fixed point of `x` by geometric interpolation in
/// log space: `ln λ ← (1−rate)·ln λ + rate·(ln x)/x`.
///
/// Returns the first base whose residual `|log_λ(x) − x|` is within `tol`,
/// along with the number of updates applied. With `rate = 1` a single
/// update lands exactly on [`fixed_base`].
pub fn adapt_base(
    x: f64,
    start: LogBase,
    rate: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(LogBase, usize)> {
    let target = fixed_base(x)?.ln_lambda;
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::domain(format!(
            "adaptation rate must lie in (0, 1], got {rate}"
        )));
    }
    let residual = |ln: f64| (x.ln() / ln - x).abs();

    let mut ln = start.ln_lambda;
    let mut iterations = 0;
    loop {
        let r = residual(ln);
        if r <= tol {
            return Ok((LogBase::from_ln(ln)?, iterations));
        }
        if iterations == max_iter {
            return Err(Error::Convergence {
                iterations,
                residual: r,
            });
        }
        ln = (1.0 - rate) * ln + rate * target;
        iterations += 1;
    }
}

/// The four "golden ratio" values: roots of `p² + p − 1` and of `p² − p − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenRoots {
    /// Positive root of `p² + p − 1`, ≈ 0.618.
    pub p1: f64,
    /// Negative root of `p² + p − 1`, ≈ −1.618.
    pub p2: f64,
    /// `−p1`, a root of `p² − p − 1`.
    pub neg_p1: f64,
    /// `−p2`, a root of `p² − p − 1`, ≈ 1.618.
    pub neg_p2: f64,
}

pub fn golden_roots() -> GoldenRoots {
    let s5 = 5f64.sqrt();
    let p1 = (s5 - 1.0) / 2.0;
    let p2 = (-s5 - 1.0) / 2.0;
    GoldenRoots {
        p1,
        p2,
        neg_p1: -p1,
        neg_p2: -p2,
    }
}

/// `(1 − p) − p²`; vanishes at both roots of `p² + p − 1`.
pub fn complement_square_residual(p: f64) -> f64 {
    (1.0 - p) - p * p
}

/// `(1 − p) + 1/p`; vanishes at both roots of `p² − p − 1`.
pub fn complement_reciprocal_residual(p: f64) -> f64 {
    (1.0 - p) + 1.0 / p
}

/// Momentum weight `α = √2 · p₁ ≈ 0.874`.
pub fn derive_alpha() -> f64 {
    SQRT_2 * golden_roots().p1
}

/// Learning rate `η = (1 − α)²`.
pub fn derive_eta(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "momentum weight must lie in (0, 1), got {alpha}"
        )));
    }
    let c = 1.0 - alpha;
    Ok(c * c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub eta: f64,
}

impl Hyperparams {
    pub fn derived() -> Self {
        let alpha = derive_alpha();
        let eta = derive_eta(alpha).expect("derived alpha lies in (0, 1)");
        Self { alpha, eta }
    }
}
