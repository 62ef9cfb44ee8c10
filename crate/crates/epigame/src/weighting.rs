//! Probability weighting functions.
//!
//! Risk perception enters the curing game through a weighting function
//! w applied to the stationary infection probability. Two kinds are
//! supported:
//!
//! * `Identity`: w(x) = x, the true-expectation baseline;
//! * `Prelec { alpha }`: w(x) = exp(-(-ln x)^alpha) with alpha in (0,1),
//!   the one-parameter inverse-S family. It overweights probabilities
//!   below 1/e, underweights those above, fixes w(1/e) = 1/e, and its
//!   derivative w'(x) = w(x) * alpha * (-ln x)^(alpha-1) / x attains its
//!   unique minimum alpha at x = 1/e, diverging at both endpoints.

use crate::{inv_e, real, Error, Real, Result};

/// Absolute tolerance (in the argument) for derivative-level root finding.
const ROOT_X_TOL: f64 = 1e-12;

/// Slack within which a level is treated as tangent to the derivative
/// minimum, collapsing both roots to 1/e.
const TANGENCY_TOL: f64 = 1e-10;

/// Default bisection brackets stay this far away from the endpoints,
/// where w' diverges.
const BRACKET_MARGIN: f64 = 1e-12;

/// Iteration cap for a single bisection run.
const BISECT_MAX_ITER: usize = 200;

/// A probability weighting function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightingSpec<T> {
    /// Perceived probability equals true probability.
    Identity,
    /// Inverse-S weighting with curvature parameter alpha in (0,1).
    Prelec { alpha: T },
}

impl<T: Real> WeightingSpec<T> {
    /// Builds the inverse-S weighting. Requires 0 < alpha < 1 strictly;
    /// alpha = 1 coincides with the identity and must be constructed as
    /// [`WeightingSpec::Identity`].
    pub fn prelec(alpha: T) -> Result<Self> {
        if !alpha.is_finite() || alpha <= T::zero() || alpha >= T::one() {
            return Err(Error::InvalidInput(format!(
                "prelec alpha must lie strictly in (0, 1); alpha = 1 is the identity \
                 and is constructed as WeightingSpec::Identity (got {alpha})"
            )));
        }
        Ok(Self::Prelec { alpha })
    }

    /// Evaluates w(x) for x in [0, 1]. The endpoints are exact:
    /// w(0) = 0 and w(1) = 1 for both kinds.
    pub fn eval(&self, x: T) -> Result<T> {
        if !(x >= T::zero() && x <= T::one()) {
            return Err(Error::Domain(format!(
                "weighting argument must lie in [0, 1], got {x}"
            )));
        }
        match *self {
            Self::Identity => Ok(x),
            Self::Prelec { alpha } => {
                if x == T::zero() || x == T::one() {
                    Ok(x)
                } else {
                    Ok((-(-x.ln()).powf(alpha)).exp())
                }
            }
        }
    }

    /// Evaluates w'(x) for x strictly inside (0, 1). For the inverse-S
    /// family the derivative diverges at both endpoints, so x in {0, 1}
    /// is a domain error for every kind.
    pub fn deriv(&self, x: T) -> Result<T> {
        if !(x > T::zero() && x < T::one()) {
            return Err(Error::Domain(format!(
                "weighting derivative is defined on (0, 1) only, got {x}"
            )));
        }
        match *self {
            Self::Identity => Ok(T::one()),
            Self::Prelec { alpha } => {
                let neg_ln = -x.ln();
                Ok(self.eval(x)? * alpha * neg_ln.powf(alpha - T::one()) / x)
            }
        }
    }

    /// The argument minimizing w', which is 1/e for the whole inverse-S
    /// family. The identity has a constant derivative and no minimizer.
    pub fn x_min(&self) -> Result<T> {
        match self {
            Self::Identity => Err(Error::UnsupportedKind("identity")),
            Self::Prelec { .. } => Ok(inv_e()),
        }
    }

    /// Solves w'(x) = level for the inverse-S family.
    ///
    /// Because w' falls from +infinity to its minimum at 1/e and rises
    /// back to +infinity, a level above the minimum has exactly two
    /// roots V < 1/e < X, one on each monotone branch. Returns
    /// `(Some(V), Some(X))` in that case, `(None, None)` when the level
    /// lies below the minimum, and `(Some(1/e), Some(1/e))` when the
    /// level matches the minimum within 1e-10 (tangency).
    ///
    /// Each branch is bisected to an absolute argument tolerance of
    /// 1e-12, starting from the brackets [1e-12, 1/e] and
    /// [1/e, 1 - 1e-12]. If a level is so extreme that w' has not yet
    /// exceeded it at a default bracket endpoint, the bracket is widened
    /// geometrically toward that endpoint; once the float grid is
    /// exhausted the closest representable probe is returned, which
    /// keeps downstream curing rates correct to absolute rounding error.
    pub fn solve_deriv_level(&self, level: T) -> Result<(Option<T>, Option<T>)> {
        let alpha = match *self {
            Self::Identity => return Err(Error::UnsupportedKind("identity")),
            Self::Prelec { alpha } => alpha,
        };
        if !level.is_finite() || level <= T::zero() {
            return Err(Error::Domain(format!(
                "derivative level must be a positive finite real, got {level}"
            )));
        }
        let x_min = self.x_min()?;
        let deriv_min = self.deriv(x_min)?;
        if (level - deriv_min).abs() < real(TANGENCY_TOL) {
            return Ok((Some(x_min), Some(x_min)));
        }
        if level < deriv_min {
            return Ok((None, None));
        }
        let _ = alpha;
        let lower = self.bisect_branch(level, x_min, true)?;
        let upper = self.bisect_branch(level, x_min, false)?;
        Ok((Some(lower), Some(upper)))
    }

    /// Bisects w'(x) = level on one monotone branch; `falling` selects
    /// the branch left of 1/e where w' decreases.
    fn bisect_branch(&self, level: T, x_min: T, falling: bool) -> Result<T> {
        let margin: T = real(BRACKET_MARGIN);
        let sixteenth: T = real(1.0 / 16.0);

        // Endpoint probe where w' must exceed the level; widen toward the
        // singular end while it does not.
        let mut probe = if falling { margin } else { T::one() - margin };
        for _ in 0..BISECT_MAX_ITER {
            if self.deriv(probe)? > level {
                break;
            }
            let next = if falling {
                probe * sixteenth
            } else {
                T::one() - (T::one() - probe) * sixteenth
            };
            if next <= T::zero() || next >= T::one() || next == probe {
                // Float grid exhausted: the root is pinned between the
                // probe and the endpoint to within rounding.
                return Ok(probe);
            }
            probe = next;
        }

        let (mut lo, mut hi) = if falling {
            (probe, x_min)
        } else {
            (x_min, probe)
        };
        let tol = real(ROOT_X_TOL);
        for _ in 0..BISECT_MAX_ITER {
            if hi - lo <= tol {
                break;
            }
            let mid = lo + (hi - lo) * real(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            let above = self.deriv(mid)? > level;
            // On the falling branch w' > level means we are left of the
            // root; on the rising branch it means we are right of it.
            if above == falling {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + (hi - lo) * real(0.5))
    }

    /// Numerically verifies the inverse-S shape on a uniform grid with
    /// `grid_size` cells (at least 100): w strictly increasing, the
    /// second finite difference changing sign exactly once from negative
    /// to positive, and min w' < 1. Failures are carried in the report,
    /// not raised as errors.
    pub fn shape_check(&self, grid_size: usize) -> Result<ShapeReport<T>> {
        if grid_size < 100 {
            return Err(Error::InvalidInput(format!(
                "shape check needs a grid of at least 100 cells, got {grid_size}"
            )));
        }
        let n = grid_size;
        let step = T::one() / real(n as f64);
        let mut values = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = if i == n {
                T::one()
            } else {
                real::<T>(i as f64) * step
            };
            values.push(self.eval(x)?);
        }

        let mut min_rise = T::infinity();
        for pair in values.windows(2) {
            min_rise = min_rise.min(pair[1] - pair[0]);
        }
        let strictly_increasing = PropertyCheck {
            passed: min_rise > T::zero(),
            margin: min_rise,
        };

        let second_diffs: Vec<T> = values
            .windows(3)
            .map(|w| w[2] - w[1] - w[1] + w[0])
            .collect();
        let unique_deriv_minimum = classify_inflection(&second_diffs);

        let mut min_deriv = T::infinity();
        for i in 1..n {
            min_deriv = min_deriv.min(self.deriv(real::<T>(i as f64) * step)?);
        }
        let deriv_margin = T::one() - min_deriv;
        let deriv_min_below_one = PropertyCheck {
            passed: deriv_margin > T::zero(),
            margin: deriv_margin,
        };

        Ok(ShapeReport {
            strictly_increasing,
            unique_deriv_minimum,
            deriv_min_below_one,
        })
    }
}

/// Outcome of a single numerically verified property: a pass flag and
/// the worst-case margin by which the property held (or failed).
#[derive(Debug, Clone, Copy)]
pub struct PropertyCheck<T> {
    pub passed: bool,
    pub margin: T,
}

/// Grid verification of the inverse-S shape. `unique_deriv_minimum`
/// tracks the concave-to-convex transition of w (equivalently the unique
/// minimum of w'); its margin is the weaker of the strongest concave and
/// strongest convex second differences.
#[derive(Debug, Clone, Copy)]
pub struct ShapeReport<T> {
    pub strictly_increasing: PropertyCheck<T>,
    pub unique_deriv_minimum: PropertyCheck<T>,
    pub deriv_min_below_one: PropertyCheck<T>,
}

impl<T: Real> ShapeReport<T> {
    pub fn all_passed(&self) -> bool {
        self.strictly_increasing.passed
            && self.unique_deriv_minimum.passed
            && self.deriv_min_below_one.passed
    }
}

/// Classifies the sign pattern of second differences: pass requires
/// exactly one transition, from negative to positive. Magnitudes below
/// a small multiple of machine epsilon count as zero so that rounding
/// noise (e.g. from an exactly linear function) does not fabricate
/// transitions.
fn classify_inflection<T: Real>(second_diffs: &[T]) -> PropertyCheck<T> {
    let tau = T::epsilon() * real(64.0);
    let mut transitions = 0usize;
    let mut last_sign = 0i8;
    let mut first_was_negative = false;
    let mut max_concave = T::zero();
    let mut max_convex = T::zero();
    let mut wrong_order = false;
    for &d in second_diffs {
        let sign = if d > tau {
            1
        } else if d < -tau {
            -1
        } else {
            0
        };
        if sign == 0 {
            continue;
        }
        if last_sign == 0 {
            first_was_negative = sign < 0;
        } else if sign != last_sign {
            transitions += 1;
            if sign < 0 {
                wrong_order = true;
            }
        }
        if sign < 0 {
            max_concave = max_concave.max(-d);
        } else {
            max_convex = max_convex.max(d);
        }
        last_sign = sign;
    }
    let passed = transitions == 1 && first_was_negative && !wrong_order;
    let margin = if passed {
        max_concave.min(max_convex)
    } else {
        T::zero()
    };
    PropertyCheck { passed, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALPHA_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

    fn prelec(alpha: f64) -> WeightingSpec<f64> {
        WeightingSpec::prelec(alpha).unwrap()
    }

    #[test]
    fn prelec_rejects_alpha_outside_open_unit_interval() {
        for bad in [0.0, 1.0, -0.3, 1.2, f64::NAN, f64::INFINITY] {
            assert!(WeightingSpec::prelec(bad).is_err(), "alpha = {bad}");
        }
    }

    #[test]
    fn identity_is_a_passthrough() {
        let w = WeightingSpec::<f64>::Identity;
        for x in [0.0, 0.25, 0.5, 1.0] {
            assert_eq!(w.eval(x).unwrap(), x);
        }
        assert_eq!(w.deriv(0.5).unwrap(), 1.0);
    }

    #[test]
    fn eval_rejects_arguments_outside_unit_interval() {
        let w = prelec(0.5);
        for bad in [-0.1, 1.1, f64::NAN] {
            assert!(w.eval(bad).is_err(), "x = {bad}");
        }
    }

    #[test]
    fn deriv_rejects_endpoints() {
        for w in [WeightingSpec::Identity, prelec(0.5)] {
            assert!(w.deriv(0.0).is_err());
            assert!(w.deriv(1.0).is_err());
        }
    }

    #[test]
    fn prelec_endpoints_are_exact() {
        for &alpha in &ALPHA_GRID {
            let w = prelec(alpha);
            assert_eq!(w.eval(0.0).unwrap(), 0.0);
            assert_eq!(w.eval(1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn prelec_fixed_point_at_inv_e() {
        let e_inv = (-1.0f64).exp();
        for &alpha in &ALPHA_GRID {
            let w = prelec(alpha);
            assert!(
                (w.eval(e_inv).unwrap() - e_inv).abs() < 1e-12,
                "alpha = {alpha}"
            );
        }
    }

    #[test]
    fn prelec_small_probability_overweighting_value() {
        // w(0.01) with alpha = 0.4, solved independently to 17 digits.
        let w = prelec(0.4);
        let got = w.eval(0.01).unwrap();
        assert!((got - 0.158_494_295_131_802_71).abs() < 1e-14);
        assert!(got > 0.01);
    }

    #[test]
    fn prelec_over_and_under_weighting_split_at_inv_e() {
        let e_inv = (-1.0f64).exp();
        for &alpha in &ALPHA_GRID {
            let w = prelec(alpha);
            let mut x = 1e-4;
            while x < 1.0 - 1e-4 {
                let wx = w.eval(x).unwrap();
                if x < e_inv - 1e-6 {
                    assert!(wx > x, "alpha = {alpha}, x = {x}");
                } else if x > e_inv + 1e-6 {
                    assert!(wx < x, "alpha = {alpha}, x = {x}");
                }
                x += 1e-3;
            }
        }
    }

    #[test]
    fn deriv_at_inv_e_equals_alpha() {
        let e_inv = (-1.0f64).exp();
        for &alpha in &ALPHA_GRID {
            let w = prelec(alpha);
            assert!(
                (w.deriv(e_inv).unwrap() - alpha).abs() < 1e-12,
                "alpha = {alpha}"
            );
        }
    }

    #[test]
    fn deriv_steepens_near_certainty() {
        // w'(0.999) with alpha = 0.4, solved independently to 17 digits.
        let w = prelec(0.4);
        let got = w.deriv(0.999).unwrap();
        assert!((got - 23.711_364_563_451_907).abs() / 23.711_364_563_451_907 < 1e-12);
        assert!(got > 1.0);
    }

    #[test]
    fn deriv_matches_central_differences() {
        let h = 1e-7;
        for &alpha in &[0.3, 0.5, 0.8] {
            let w = prelec(alpha);
            let mut x = 0.01;
            while x < 0.99 {
                let numeric = (w.eval(x + h).unwrap() - w.eval(x - h).unwrap()) / (2.0 * h);
                let analytic = w.deriv(x).unwrap();
                assert!(
                    (numeric - analytic).abs() < 1e-5,
                    "alpha = {alpha}, x = {x}: {numeric} vs {analytic}"
                );
                x += 0.0137;
            }
        }
    }

    #[test]
    fn x_min_is_inv_e_for_prelec_and_unsupported_for_identity() {
        assert_eq!(prelec(0.7).x_min().unwrap(), (-1.0f64).exp());
        assert!(matches!(
            WeightingSpec::<f64>::Identity.x_min(),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn solve_deriv_level_handles_tangency_and_no_root() {
        let w = prelec(0.6);
        let e_inv = (-1.0f64).exp();
        let (v, x) = w.solve_deriv_level(0.6).unwrap();
        assert_eq!((v.unwrap(), x.unwrap()), (e_inv, e_inv));
        // Within the 1e-10 tangency slack both roots still collapse.
        let (v, x) = w.solve_deriv_level(0.6 + 5e-11).unwrap();
        assert_eq!((v.unwrap(), x.unwrap()), (e_inv, e_inv));
        assert_eq!(w.solve_deriv_level(0.3).unwrap(), (None, None));
    }

    #[test]
    fn solve_deriv_level_rejects_bad_inputs() {
        assert!(matches!(
            WeightingSpec::<f64>::Identity.solve_deriv_level(0.5),
            Err(Error::UnsupportedKind(_))
        ));
        let w = prelec(0.5);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(w.solve_deriv_level(bad).is_err(), "level = {bad}");
        }
    }

    #[test]
    fn solve_deriv_level_matches_independent_roots() {
        // Roots of w'(x) = 0.8 for alpha = 0.4, solved independently.
        let w = prelec(0.4);
        let (v, x) = w.solve_deriv_level(0.8).unwrap();
        assert!((v.unwrap() - 0.058_667_752_421_986_03).abs() < 1e-10);
        assert!((x.unwrap() - 0.832_313_482_333_751_5).abs() < 1e-10);
        // Roots of w'(x) = 1.2 for alpha = 0.5.
        let w = prelec(0.5);
        let (v, x) = w.solve_deriv_level(1.2).unwrap();
        assert!((v.unwrap() - 0.037_597_491_179_263_764).abs() < 1e-10);
        assert!((x.unwrap() - 0.894_674_300_074_525_63).abs() < 1e-10);
    }

    #[test]
    fn solve_deriv_level_roots_satisfy_the_equation() {
        let e_inv = (-1.0f64).exp();
        for &alpha in &ALPHA_GRID {
            let w = prelec(alpha);
            for &level in &[alpha + 0.05, alpha + 0.3, 1.0, 2.5, 10.0] {
                let (v, x) = w.solve_deriv_level(level).unwrap();
                let (v, x) = (v.unwrap(), x.unwrap());
                assert!(
                    v < e_inv && e_inv < x,
                    "ordering for alpha={alpha} level={level}"
                );
                // The bisection contract: the level is crossed within
                // twice the x tolerance of the returned point. At large
                // levels the branches are too steep for a useful bound
                // on the residual itself.
                let tol = 2e-12;
                assert!(
                    w.deriv((v - tol).max(1e-15)).unwrap() > level,
                    "lower bracket alpha={alpha} level={level}"
                );
                assert!(
                    w.deriv(v + tol).unwrap() < level,
                    "lower bracket alpha={alpha} level={level}"
                );
                assert!(
                    w.deriv(x - tol).unwrap() < level,
                    "upper bracket alpha={alpha} level={level}"
                );
                assert!(
                    w.deriv((x + tol).min(1.0 - 1e-16)).unwrap() > level,
                    "upper bracket alpha={alpha} level={level}"
                );
                if level <= 2.5 {
                    assert!(
                        (w.deriv(v).unwrap() - level).abs() < 1e-9,
                        "lower residual alpha={alpha} level={level}"
                    );
                    assert!(
                        (w.deriv(x).unwrap() - level).abs() < 1e-9,
                        "upper residual alpha={alpha} level={level}"
                    );
                }
            }
        }
    }

    #[test]
    fn solve_deriv_level_survives_extreme_parameters() {
        // Near-identity curvature plus a large level pushes both roots
        // against the float grid; the solver must still return ordered
        // probes instead of failing.
        let w = prelec(0.99);
        let (v, x) = w.solve_deriv_level(50.0).unwrap();
        let (v, x) = (v.unwrap(), x.unwrap());
        assert!(v > 0.0 && v < (-1.0f64).exp());
        assert!(x > (-1.0f64).exp() && x < 1.0);
    }

    #[test]
    fn shape_check_passes_for_prelec_and_flags_identity() {
        for &alpha in &[0.4, 0.9] {
            let report = prelec(alpha).shape_check(1000).unwrap();
            assert!(report.all_passed(), "alpha = {alpha}: {report:?}");
        }
        let identity = WeightingSpec::<f64>::Identity.shape_check(1000).unwrap();
        assert!(identity.strictly_increasing.passed);
        assert!(!identity.unique_deriv_minimum.passed);
        assert!(!identity.deriv_min_below_one.passed);
        assert!(!identity.all_passed());
    }

    #[test]
    fn shape_check_concavity_margin_shrinks_as_alpha_grows() {
        let strong = prelec(0.4).shape_check(10_000).unwrap();
        let weak = prelec(0.9).shape_check(10_000).unwrap();
        assert!(strong.all_passed() && weak.all_passed());
        assert!(weak.unique_deriv_minimum.margin < strong.unique_deriv_minimum.margin);
    }

    #[test]
    fn shape_check_rejects_tiny_grids() {
        assert!(prelec(0.5).shape_check(99).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let w = WeightingSpec::<f32>::prelec(0.4).unwrap();
        let e_inv = (-1.0f32).exp();
        assert!((w.eval(e_inv).unwrap() - e_inv).abs() < 1e-5);
        assert!((w.deriv(e_inv).unwrap() - 0.4).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn prelec_stays_inside_unit_interval(alpha in 0.01f64..0.99, x in 1e-3f64..0.999) {
            let w = WeightingSpec::prelec(alpha).unwrap();
            let wx = w.eval(x).unwrap();
            prop_assert!(wx > 0.0 && wx < 1.0);
            prop_assert!(w.deriv(x).unwrap() > 0.0);
        }

        #[test]
        fn prelec_is_monotone(alpha in 0.01f64..0.99, x in 1e-3f64..0.99, gap in 1e-4f64..1e-2) {
            let w = WeightingSpec::prelec(alpha).unwrap();
            let y = (x + gap).min(0.9999);
            prop_assert!(w.eval(y).unwrap() > w.eval(x).unwrap());
        }
    }
}
