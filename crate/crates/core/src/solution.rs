//! The two transformation chains and their unit-circle form.
//!
//! The forward chain rewrites `P(A|B)` until it reads `2·sin φ·L(cos φ)`;
//! the reverse chain rewrites `P(B)` into `2·L(sin φ)·cos φ`. `L` is a
//! logarithm evaluated in a [`LogMode`]: either the fixed-point convention
//! `L(x) = x`, or an ordinary logarithm in an explicit base.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::io::Write;

use crate::bayes::BayesState;
use crate::error::{Error, Result};
use crate::goldfix::LogBase;
use crate::numfmt;

/// An angle in `[0, π/2]`, stored together with its complement `π/2 − φ`.
///
/// Keeping both lets [`Angle::complement`] swap sine and cosine exactly, so
/// mirror identities hold bit-for-bit even next to the singular endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    phi: f64,
    co: f64,
}

impl Angle {
    pub fn new(phi: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&phi) {
            return Err(Error::domain(format!(
                "angle must lie in [0, pi/2], got {phi}"
            )));
        }
        Ok(Self {
            phi,
            co: FRAC_PI_2 - phi,
        })
    }

    /// The angle `t·π/2` for `t ∈ [0, 1]`, with complement `(1−t)·π/2`
    /// computed from `num` and `den` directly.
    fn quarter_fraction(num: f64, den: f64) -> Self {
        Self {
            phi: FRAC_PI_2 * (num / den),
            co: FRAC_PI_2 * ((den - num) / den),
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `π/2 − φ`.
    pub fn complement(&self) -> Self {
        Self {
            phi: self.co,
            co: self.phi,
        }
    }

    pub fn sin(&self) -> f64 {
        if self.phi <= self.co {
            self.phi.sin()
        } else {
            self.co.cos()
        }
    }

    pub fn cos(&self) -> f64 {
        if self.phi <= self.co {
            self.phi.cos()
        } else {
            self.co.sin()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogMode {
    /// `L(x) = x`: every logarithm is read at its own fixed-point base.
    FixedPoint,
    /// An ordinary logarithm in one fixed base.
    Explicit(LogBase),
}

impl LogMode {
    pub fn apply(&self, x: f64) -> Result<f64> {
        match self {
            LogMode::FixedPoint => Ok(x),
            LogMode::Explicit(base) => {
                if x == 0.0 {
                    return Err(Error::Singularity("logarithm of zero".into()));
                }
                base.log(x)
            }
        }
    }
}

/// `2·sin φ·L(cos φ)`.
pub fn eval_forward(angle: Angle, mode: LogMode) -> Result<f64> {
    Ok(2.0 * angle.sin() * mode.apply(angle.cos())?)
}

/// `2·L(sin φ)·cos φ`.
pub fn eval_reverse(angle: Angle, mode: LogMode) -> Result<f64> {
    Ok(2.0 * mode.apply(angle.sin())? * angle.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionPoint {
    pub phi: Angle,
    pub forward: f64,
    pub reverse: f64,
}

/// `n + 1` evenly spaced points over `[0, π/2]`, ordered by angle.
///
/// In explicit mode the two endpoints are singular for one of the two
/// evaluators, so they are pulled inward by half a step.
pub fn sweep(n: usize, mode: LogMode) -> Result<Vec<SolutionPoint>> {
    if n < 2 {
        return Err(Error::Precondition(format!("sweep needs n >= 2, got {n}")));
    }
    let den = n as f64;
    let explicit = matches!(mode, LogMode::Explicit(_));
    (0..=n)
        .map(|i| {
            let num = match i {
                0 if explicit => 0.5,
                i if i == n && explicit => den - 0.5,
                i => i as f64,
            };
            let phi = Angle::quarter_fraction(num, den);
            Ok(SolutionPoint {
                phi,
                forward: eval_forward(phi, mode)?,
                reverse: eval_reverse(phi, mode)?,
            })
        })
        .collect()
}

/// Write a sweep as `phi,forward,reverse` with six significant digits.
pub fn write_sweep_csv<W: Write>(points: &[SolutionPoint], mut out: W) -> Result<usize> {
    let mut s = String::from("phi,forward,reverse\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{}",
            numfmt::sig(p.phi.phi(), 6),
            numfmt::sig(p.forward, 6),
            numfmt::sig(p.reverse, 6)
        );
    }
    out.write_all(s.as_bytes())?;
    Ok(s.len())
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    debug_assert!(f_lo * f(hi) <= 0.0, "root not bracketed");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The angle where `sin φ = cos φ`, found by bisection on `[0, π/2]`.
pub fn inner_solution() -> Angle {
    let phi = bisect(|x| x.sin() - x.cos(), 0.0, FRAC_PI_2, 1e-13);
    Angle::new(phi.clamp(0.0, FRAC_PI_2)).expect("bisection stays in the bracket")
}

/// Residuals of the substitutions a chain relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionResiduals {
    /// The complement substitution (`P(A) = 1 − P(B)` forward,
    /// `P(B|A) = 1 − P(A|B)` reverse).
    pub complement_prior: f64,
    /// `|P(B) − P(B|A)|` forward, `|P(A) − P(A|B)|` reverse.
    pub prior_equals_posterior: f64,
    /// `|(1 − p) − p²|` for the chain's free probability.
    pub golden_condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub stage_values: [f64; 6],
    /// `stage[i+1] − stage[i]`.
    pub stage_residuals: [f64; 5],
    pub assumptions: AssumptionResiduals,
}

impl ChainTrace {
    fn from_stages(stage_values: [f64; 6], assumptions: AssumptionResiduals) -> Self {
        let mut stage_residuals = [0.0; 5];
        for (i, r) in stage_residuals.iter_mut().enumerate() {
            *r = stage_values[i + 1] - stage_values[i];
        }
        Self {
            stage_values,
            stage_residuals,
            assumptions,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("stage  value           residual\n");
        for (i, v) in self.stage_values.iter().enumerate() {
            let r = if i == 0 {
                String::from("-")
            } else {
                numfmt::sig(self.stage_residuals[i - 1], 9)
            };
            let _ = writeln!(s, "{:<6} {:<15} {}", i + 1, numfmt::sig(*v, 9), r);
        }
        let a = &self.assumptions;
        let _ = writeln!(
            s,
            "complement_prior        {}",
            numfmt::sig(a.complement_prior, 9)
        );
        let _ = writeln!(
            s,
            "prior_equals_posterior  {}",
            numfmt::sig(a.prior_equals_posterior, 9)
        );
        let _ = writeln!(
            s,
            "golden_condition        {}",
            numfmt::sig(a.golden_condition, 9)
        );
        s
    }
}

fn golden_gap(p: f64) -> f64 {
    ((1.0 - p) - p * p).abs()
}

/// Forward chain with `P(B) = p_b` and `P(B|A) = P(B)`.
pub fn chain_eval_forward(p_b: f64, mode: LogMode) -> Result<ChainTrace> {
    let state = BayesState::new(p_b, 1.0 - p_b)?;
    chain_forward_state(&state, mode)
}

/// Forward chain evaluated for an arbitrary state; the first stage uses the
/// state's own `P(A)` and `P(B|A)`, later stages depend on `P(B)` only.
pub fn chain_forward_state(state: &BayesState, mode: LogMode) -> Result<ChainTrace> {
    let p = state.p_b();
    let l = |x: f64| mode.apply(x);
    let angle = Angle::new(p.asin())?;
    let stages = [
        state.p_a() / p * l(state.p_b_given_a() / 1.0)?,
        (1.0 - p) / p * l(state.p_b_given_a())?,
        (1.0 - p) * l(p * p)?,
        p * l(1.0 - p * p)?,
        2.0 * p * l((1.0 - p * p).sqrt())?,
        eval_forward(angle, mode)?,
    ];
    Ok(ChainTrace::from_stages(
        stages,
        AssumptionResiduals {
            complement_prior: (state.p_a() - (1.0 - p)).abs(),
            prior_equals_posterior: (p - state.p_b_given_a()).abs(),
            golden_condition: golden_gap(p),
        },
    ))
}

/// Reverse chain with `P(A|B) = p_a_given_b` and `P(A) = P(A|B)`.
pub fn chain_eval_reverse(p_a_given_b: f64, mode: LogMode) -> Result<ChainTrace> {
    let state = BayesState::new(1.0 - p_a_given_b, p_a_given_b)?;
    chain_reverse_state(&state, mode)
}

pub fn chain_reverse_state(state: &BayesState, mode: LogMode) -> Result<ChainTrace> {
    let q = state.p_a_given_b();
    let l = |x: f64| mode.apply(x);
    let angle = Angle::new(q.acos())?;
    let stages = [
        l(state.p_a() / 1.0)? * (state.p_b_given_a() / q),
        l(state.p_a())? * ((1.0 - q) / q),
        l(q * q)? * (1.0 - q),
        l(1.0 - q * q)? * q,
        2.0 * l((1.0 - q * q).sqrt())? * q,
        eval_reverse(angle, mode)?,
    ];
    Ok(ChainTrace::from_stages(
        stages,
        AssumptionResiduals {
            complement_prior: (state.p_b_given_a() - (1.0 - q)).abs(),
            prior_equals_posterior: (state.p_a() - q).abs(),
            golden_condition: golden_gap(q),
        },
    ))
}
