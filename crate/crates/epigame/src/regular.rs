//! Closed-form solutions on degree-regular networks.
//!
//! When every node has degree d and curing rate delta, the stationary
//! infection probability collapses to x = max(0, 1 - delta/d), and the
//! single-player cost J(delta) = w(x(delta)) + c delta can be minimized
//! in closed form:
//!
//! * a true-expectation player (identity weighting) either cures to
//!   extinction (delta = d when c d < 1) or not at all;
//! * a player with an inverse-S weighting picks the interior point where
//!   w'(x) = c d on the rising branch of w', i.e. delta = d (1 - X) with
//!   X the upper solution of w'(X) = c d, capped by the budget 1/c.
//!
//! The weighted optimum is only meaningful when curing to extinction is
//! unaffordable (c >= 1/d); lower costs are rejected.

use crate::weighting::WeightingSpec;
use crate::{real, Error, Real, Result};

fn check_degree<T: Real>(d: u32) -> Result<T> {
    if d == 0 {
        return Err(Error::InvalidInput("degree must be positive".into()));
    }
    Ok(real(f64::from(d)))
}

fn check_cost<T: Real>(c: T) -> Result<()> {
    if !c.is_finite() || c <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "cost per unit of curing must be positive, got {c}"
        )));
    }
    Ok(())
}

/// Stationary infection probability on a d-regular network:
/// x = max(0, 1 - delta/d).
pub fn infection_probability<T: Real>(d: u32, delta: T) -> Result<T> {
    let df = check_degree(d)?;
    if !delta.is_finite() || delta < T::zero() {
        return Err(Error::InvalidInput(format!(
            "curing rate must be a finite nonnegative real, got {delta}"
        )));
    }
    Ok((T::one() - delta / df).max(T::zero()))
}

/// Cost minimizer for a true-expectation player on a d-regular network.
/// J(delta) = 1 - delta/d + c delta is linear in delta up to extinction,
/// so the optimum is all (delta = d) or nothing (delta = 0) depending on
/// whether a unit of infection probability is worth its price.
pub fn optimal_neutral<T: Real>(d: u32, c: T) -> Result<T> {
    let df = check_degree::<T>(d)?;
    check_cost(c)?;
    if c * df >= T::one() {
        Ok(T::zero())
    } else {
        Ok(df)
    }
}

/// Cost minimizer for a probability-weighting player on a d-regular
/// network: delta = min(1/c, d (1 - X)) with X the upper solution of
/// w'(X) = c d. Identity weighting reduces to [`optimal_neutral`].
///
/// Requires c >= 1/d; the boundary c = 1/d is accepted and evaluates the
/// same expression (its limit from above).
pub fn optimal_weighted<T: Real>(d: u32, c: T, w: &WeightingSpec<T>) -> Result<T> {
    let df = check_degree::<T>(d)?;
    check_cost(c)?;
    if c * df < T::one() {
        return Err(Error::Domain(format!(
            "cost {c} is below 1/{d}: curing to extinction is affordable and \
             the interior analysis does not apply"
        )));
    }
    if matches!(w, WeightingSpec::Identity) {
        return optimal_neutral(d, c);
    }
    let cap = c.recip();
    let (_, upper) = w.solve_deriv_level(c * df)?;
    Ok(match upper {
        Some(x) => cap.min(df * (T::one() - x)),
        // The level lies below the minimum of w'; the cost gradient is
        // negative everywhere and the budget cap binds. Unreachable for
        // the inverse-S family under c d >= 1 but kept for totality.
        None => cap,
    })
}

/// One point of a cost sweep on a d-regular network.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub c: T,
    pub delta_neutral: T,
    pub x_neutral: T,
    /// True-expectation cost x + c delta at the neutral optimum.
    pub cost_neutral: T,
    pub delta_weighted: T,
    pub x_weighted: T,
    /// Perceived cost w(x) + c delta at the weighted optimum.
    pub cost_weighted: T,
}

/// Evaluates both player types across a grid of unit costs. Every cost
/// must exceed 1/d strictly so the two solutions are comparable on the
/// regime where extinction is unaffordable.
pub fn sweep_cost<T: Real>(d: u32, w: &WeightingSpec<T>, c_grid: &[T]) -> Result<Vec<SweepRow<T>>> {
    let df = check_degree::<T>(d)?;
    if c_grid.is_empty() {
        return Err(Error::InvalidInput("cost grid is empty".into()));
    }
    c_grid
        .iter()
        .map(|&c| {
            check_cost(c)?;
            if c * df <= T::one() {
                return Err(Error::InvalidInput(format!(
                    "cost grid entries must exceed 1/{d}, got {c}"
                )));
            }
            let delta_neutral = optimal_neutral(d, c)?;
            let x_neutral = infection_probability(d, delta_neutral)?;
            let delta_weighted = optimal_weighted(d, c, w)?;
            let x_weighted = infection_probability(d, delta_weighted)?;
            Ok(SweepRow {
                c,
                delta_neutral,
                x_neutral,
                cost_neutral: x_neutral + c * delta_neutral,
                delta_weighted,
                x_weighted,
                cost_weighted: w.eval(x_weighted)? + c * delta_weighted,
            })
        })
        .collect()
}
