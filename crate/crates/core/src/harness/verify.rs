//! The numeric identity checks behind `dbayes verify`.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use crate::bayes::{simulate_dual_exchange, Coloring};
use crate::goldfix::{
    adapt_base, complement_reciprocal_residual, complement_square_residual, fixed_base,
    golden_roots, log_base, Hyperparams, LogBase,
};
use crate::rng::SplitMix64;
use crate::solution::{
    chain_eval_forward, chain_eval_reverse, eval_forward, eval_reverse, inner_solution, sweep,
    LogMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Largest residual seen.
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn check(name: &'static str, tolerance: f64, residuals: impl IntoIterator<Item = f64>) -> Check {
    // NaN counts as a failure
    let worst = residuals
        .into_iter()
        .map(|r| if r.is_nan() { f64::INFINITY } else { r.abs() })
        .fold(0.0, f64::max);
    Check {
        name,
        worst,
        tolerance,
    }
}

/// Run every identity check with a fixed seed.
pub fn identity_suite() -> Vec<Check> {
    let g = golden_roots();
    let quad_plus = |p: f64| p * p + p - 1.0;
    let quad_minus = |p: f64| p * p - p - 1.0;
    let h = Hyperparams::derived();
    let closed_alpha = SQRT_2 * (5f64.sqrt() - 1.0) / 2.0;

    let mut rng = SplitMix64::new(0x5EED);
    let xs: Vec<f64> = (0..1000)
        .map(|_| loop {
            let x = rng.uniform(0.01, 10.0);
            if x != 1.0 {
                break x;
            }
        })
        .collect();

    let fixed_point: Vec<f64> = xs
        .iter()
        .map(|&x| {
            fixed_base(x)
                .and_then(|b| log_base(x, b))
                .map_or(f64::NAN, |v| v - x)
        })
        .collect();

    let adapted: Vec<f64> = [0.3, 2.0, 5.5]
        .iter()
        .map(|&x| {
            let start = LogBase::new(3.0).expect("valid base");
            match (adapt_base(x, start, 0.5, 1e-12, 64), fixed_base(x)) {
                (Ok((b, _)), Ok(f)) => b.lambda() - f.lambda(),
                _ => f64::NAN,
            }
        })
        .collect();

    let mut mirror = Vec::new();
    for mode in [LogMode::FixedPoint, LogMode::Explicit(LogBase::e())] {
        match sweep(10_000, mode) {
            Ok(points) => {
                for p in points {
                    let f = eval_forward(p.phi, mode).unwrap_or(f64::NAN);
                    let r = eval_reverse(p.phi.complement(), mode).unwrap_or(f64::NAN);
                    mirror.push(f - r);
                }
            }
            Err(_) => mirror.push(f64::NAN),
        }
    }

    let mut chains = Vec::new();
    for _ in 0..100 {
        let p = rng.uniform(0.01, 0.99);
        let mode = LogMode::Explicit(LogBase::new(rng.uniform(1.5, 10.0)).expect("valid base"));
        for trace in [chain_eval_forward(p, mode), chain_eval_reverse(p, mode)] {
            match trace {
                Ok(t) => chains.extend([t.stage_residuals[3], t.stage_residuals[4]]),
                Err(_) => chains.push(f64::NAN),
            }
        }
    }

    let exchanges = [Coloring::Original, Coloring::Inverted]
        .into_iter()
        .flat_map(|s| {
            [Coloring::Original, Coloring::Inverted]
                .into_iter()
                .map(move |r| {
                    let t = simulate_dual_exchange(s, r);
                    f64::from(
                        u8::from(t.final_sender_image != t.final_receiver_image)
                            + t.rounds_used.saturating_sub(1),
                    )
                })
        });

    vec![
        check("alpha closed form", 1e-15, [h.alpha - closed_alpha]),
        check(
            "eta closed form",
            1e-15,
            [h.eta - (1.0 - closed_alpha).powi(2)],
        ),
        check(
            "p^2+p-1 at p1, p2",
            1e-12,
            [quad_plus(g.p1), quad_plus(g.p2)],
        ),
        check(
            "p^2-p-1 at -p1, -p2",
            1e-12,
            [quad_minus(g.neg_p1), quad_minus(g.neg_p2)],
        ),
        check(
            "1-p = p^2 at p1, p2",
            1e-12,
            [
                complement_square_residual(g.p1),
                complement_square_residual(g.p2),
            ],
        ),
        check(
            "1-p = -1/p at -p1, -p2",
            1e-12,
            [
                complement_reciprocal_residual(g.neg_p1),
                complement_reciprocal_residual(g.neg_p2),
            ],
        ),
        check("fixed-point base", 1e-10, fixed_point),
        check("adapted base", 1e-10, adapted),
        check(
            "inner solution",
            1e-10,
            [inner_solution().phi() - FRAC_PI_4],
        ),
        check("mirror symmetry", 1e-12, mirror),
        check("chain stages 4-6", 1e-12, chains),
        check("dual exchange", 0.0, exchanges),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_identities_hold() {
        for c in identity_suite() {
            assert!(
                c.passed(),
                "{} failed: {:e} > {:e}",
                c.name,
                c.worst,
                c.tolerance
            );
        }
    }

    #[test]
    fn nan_fails() {
        assert!(!check("x", 1.0, [f64::NAN]).passed());
        assert!(check("x", 0.0, []).passed());
    }
}
