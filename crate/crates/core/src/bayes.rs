//! The four probabilities of Bayes' theorem and the dual-decision exchange.
//!
//! A [`BayesState`] carries two free parameters, `P(B)` and `P(A|B)`; the
//! complements `P(A) = 1 − P(B)` and `P(B|A) = 1 − P(A|B)` are derived, so the
//! complement constraints hold structurally. Residuals follow the convention
//! "left side minus right side" of each equation.

use crate::error::{Error, Result};

/// A probability strictly inside `(0, 1)`.
///
/// Both ends are rejected: every equation here divides by probabilities or
/// takes their logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain(format!(
                "probability must lie in the open interval (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesState {
    p_b: Probability,
    p_a_given_b: Probability,
}

impl BayesState {
    /// Build a state from `P(B)` and `P(A|B)`.
    pub fn new(p_b: f64, p_a_given_b: f64) -> Result<Self> {
        Ok(Self {
            p_b: Probability::new(p_b)?,
            p_a_given_b: Probability::new(p_a_given_b)?,
        })
    }

    pub fn p_a(&self) -> f64 {
        self.p_b.complement().value()
    }

    pub fn p_b(&self) -> f64 {
        self.p_b.value()
    }

    pub fn p_a_given_b(&self) -> f64 {
        self.p_a_given_b.value()
    }

    pub fn p_b_given_a(&self) -> f64 {
        self.p_a_given_b.complement().value()
    }

    /// `P(A|B)/P(B|A) − P(A)/P(B)`; zero when the outer equation holds.
    pub fn outer_residual(&self) -> f64 {
        self.p_a_given_b() / self.p_b_given_a() - self.p_a() / self.p_b()
    }

    /// `(P(A)/P(B))·(P(B|A)/P(A|B))`, which is one exactly when the outer
    /// equation holds.
    pub fn product_identity(&self) -> f64 {
        (self.p_a() / self.p_b()) * (self.p_b_given_a() / self.p_a_given_b())
    }

    /// Residual of the inner equation in the requested orientation.
    ///
    /// Under the complement constraints the forward residual vanishes iff
    /// `P(A|B) = P(B)`.
    pub fn inner_residual(&self, orientation: Orientation) -> f64 {
        match orientation {
            Orientation::Forward => {
                self.p_a() / self.p_b() - self.p_b_given_a() / self.p_a_given_b()
            }
            Orientation::Reverse => {
                self.p_b() / self.p_a() - self.p_a_given_b() / self.p_b_given_a()
            }
        }
    }

    /// `P(B|A) − P(B)`. The independence assumption `P(B) = P(B|A)` is
    /// exposed as a testable condition, never enforced.
    pub fn independence_residual(&self) -> f64 {
        self.p_b_given_a() - self.p_b()
    }
}

/// Free-function alias for [`BayesState::new`].
pub fn make_state(p_b: f64, p_a_given_b: f64) -> Result<BayesState> {
    BayesState::new(p_b, p_a_given_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `P(A)/P(B) = P(B|A)/P(A|B)`
    Forward,
    /// The reciprocal form `P(B)/P(A) = P(A|B)/P(B|A)`
    Reverse,
}

/// `|p − (1−p)/p|`, zero exactly at the positive golden root.
pub fn multiplicand_gap(p: f64) -> Result<f64> {
    let p = Probability::new(p)?.value();
    Ok((p - (1.0 - p) / p).abs())
}

/// Image colouring exchanged in the dual-decision protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coloring {
    Original = 0,
    Inverted = 1,
}

impl Coloring {
    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Coloring::Original),
            1 => Ok(Coloring::Inverted),
            other => Err(Error::domain(format!(
                "image bit must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn inverted(self) -> Self {
        match self {
            Coloring::Original => Coloring::Inverted,
            Coloring::Inverted => Coloring::Original,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualExchangeTrace {
    pub sender_image: Coloring,
    pub receiver_expected: Coloring,
    pub feedback_sent: bool,
    pub final_sender_image: Coloring,
    pub final_receiver_image: Coloring,
    pub rounds_used: u8,
}

/// One exchange between a sender and a receiver who may disagree on which
/// colouring is foreground. On disagreement the receiver asks the sender to
/// invert once; both then hold the same image.
pub fn simulate_dual_exchange(sender: Coloring, receiver_expected: Coloring) -> DualExchangeTrace {
    let feedback_sent = sender != receiver_expected;
    let final_sender_image = if feedback_sent {
        sender.inverted()
    } else {
        sender
    };
    DualExchangeTrace {
        sender_image: sender,
        receiver_expected,
        feedback_sent,
        final_sender_image,
        // The receiver accepts whatever arrives after feedback.
        final_receiver_image: final_sender_image,
        rounds_used: u8::from(feedback_sent),
    }
}
