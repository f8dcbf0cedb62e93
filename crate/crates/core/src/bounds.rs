//! Exponential decay bounds for repeated games.
//!
//! The headline bound is exp(-c eps^5 lambda^2 n / log2|A|) with an
//! unspecified universal constant c, valid once n clears a threshold that
//! depends only on eps and lambda. Specializations substitute the certified
//! expansion of free, anchored, and connected games. All logarithms are
//! base 2; c defaults to 1 and is always a run parameter.

use num::{One, Signed};
use thiserror::Error;

use crate::rat::{exact_log2, log2_rat, rat_int, Rat};

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("epsilon must lie in (0,1], got {0}")]
    BadEpsilon(f64),
    #[error("lambda must lie in (0,1], got {0}")]
    BadLambda(f64),
    #[error("total answer alphabet must have at least 2 elements")]
    DegenerateAnswers,
    #[error("missing parameter for this game kind: {0}")]
    MissingParam(&'static str),
}

#[derive(Debug, Clone)]
pub struct BoundParams {
    /// 1 - val(G).
    pub epsilon: f64,
    /// Spectral gap of the connection graph.
    pub lambda: f64,
    /// Repetition count the bound is evaluated at.
    pub n: u64,
    /// log2 of the product answer alphabet size.
    pub log2_answers: f64,
    /// The universal constant; never pinned by theory, default 1.
    pub c: f64,
    pub k: usize,
    pub alpha: Option<f64>,
    pub rho_min: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundValue {
    pub value: f64,
    /// False when n is below the repetition threshold: the value is still
    /// computed but the theorem does not guarantee it.
    pub guaranteed: bool,
    /// True when the exponent degenerates to zero (eps, lambda, n or c zero).
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameKind {
    Free,
    Anchored,
    Connected,
}

fn check_ranges(p: &BoundParams) -> Result<(), BoundError> {
    if !(p.epsilon >= 0.0 && p.epsilon <= 1.0) {
        return Err(BoundError::BadEpsilon(p.epsilon));
    }
    if !(p.lambda >= 0.0 && p.lambda <= 1.0) {
        return Err(BoundError::BadLambda(p.lambda));
    }
    if p.log2_answers <= 0.0 {
        return Err(BoundError::DegenerateAnswers);
    }
    Ok(())
}

/// exp(-c eps^5 lambda^2 n / log2|A|), with the guarantee flag from the
/// repetition threshold.
pub fn theorem_bound(p: &BoundParams) -> Result<BoundValue, BoundError> {
    check_ranges(p)?;
    let exponent = p.c * p.epsilon.powi(5) * p.lambda.powi(2) * p.n as f64 / p.log2_answers;
    let vacuous = exponent == 0.0;
    let guaranteed = if p.epsilon > 0.0 && p.lambda > 0.0 {
        p.n as f64 >= (4.0 / p.epsilon).log2() / (p.epsilon.powi(5) * p.lambda.powi(2))
    } else {
        false
    };
    Ok(BoundValue {
        value: (-exponent).exp(),
        guaranteed,
        vacuous,
    })
}

/// Smallest n the theorem covers: ceil(log2(4/eps) / (eps^5 lambda^2)).
///
/// Exact rational inputs keep the threshold exact whenever 4/eps is a power
/// of two; otherwise the logarithm goes through f64 with a snap to the
/// nearest integer when within 1e-9 relative, so exact-rational cases do not
/// round up spuriously.
pub fn min_reps(epsilon: &Rat, lambda: &Rat) -> Result<u64, BoundError> {
    if !epsilon.is_positive() || *epsilon > Rat::one() {
        return Err(BoundError::BadEpsilon(crate::rat::rat_to_f64(epsilon)));
    }
    if !lambda.is_positive() || *lambda > Rat::one() {
        return Err(BoundError::BadLambda(crate::rat::rat_to_f64(lambda)));
    }
    let four_over_eps = rat_int(4) / epsilon.clone();
    let inv_scale = Rat::one()
        / (epsilon.clone()
            * epsilon.clone()
            * epsilon.clone()
            * epsilon.clone()
            * epsilon.clone()
            * lambda.clone()
            * lambda.clone());
    if let Some(j) = exact_log2(&four_over_eps) {
        // threshold = j / (eps^5 lambda^2), exactly
        let t = rat_int(j as i64) * inv_scale;
        let ceil = t.ceil();
        return Ok(num::ToPrimitive::to_u64(ceil.numer()).unwrap_or(u64::MAX));
    }
    let x = log2_rat(&four_over_eps) * crate::rat::rat_to_f64(&inv_scale);
    let snapped = if (x - x.round()).abs() < 1e-9 * x.abs().max(1.0) {
        x.round()
    } else {
        x.ceil()
    };
    Ok(snapped as u64)
}

/// The specialized decay bound for a game kind:
/// free substitutes lambda = 1/k, anchored lambda = alpha^k/(8k), and
/// connected lambda = rho_min.
pub fn corollary_bound(kind: GameKind, p: &BoundParams) -> Result<BoundValue, BoundError> {
    check_ranges(p)?;
    let exponent = match kind {
        GameKind::Free => {
            p.c * p.epsilon.powi(5) * p.n as f64 / ((p.k * p.k) as f64 * p.log2_answers)
        }
        GameKind::Anchored => {
            let alpha = p.alpha.ok_or(BoundError::MissingParam("alpha"))?;
            p.c * alpha.powi(2 * p.k as i32) * p.epsilon.powi(5) * p.n as f64
                / (64.0 * (p.k * p.k) as f64 * p.log2_answers)
        }
        GameKind::Connected => {
            let rho_min = p.rho_min.ok_or(BoundError::MissingParam("rho_min"))?;
            p.c * rho_min.powi(2) * p.epsilon.powi(5) * p.n as f64 / p.log2_answers
        }
    };
    Ok(BoundValue {
        value: (-exponent).exp(),
        guaranteed: false,
        vacuous: exponent == 0.0,
    })
}

/// Measured decay rate: -log2(val)/n.
pub fn measured_gamma(n: u64, value: f64) -> f64 {
    if value <= 0.0 {
        f64::INFINITY
    } else {
        -value.log2() / n as f64
    }
}

/// Largest c for which every measured value respects the theorem's form:
/// min over the sequence of -ln(val) log2|A| / (eps^5 lambda^2 n). None when
/// the exponent prefactor vanishes (bound vacuous for every c).
pub fn empirical_c(
    measured: &[(u64, f64)],
    epsilon: f64,
    lambda: f64,
    log2_answers: f64,
) -> Option<f64> {
    let pre = epsilon.powi(5) * lambda.powi(2);
    if pre <= 0.0 || measured.is_empty() {
        return None;
    }
    measured
        .iter()
        .map(|&(n, v)| {
            if v <= 0.0 {
                f64::INFINITY
            } else {
                -v.ln() * log2_answers / (pre * n as f64)
            }
        })
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.min(x)))
        })
}
