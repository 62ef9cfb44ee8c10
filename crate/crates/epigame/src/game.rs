//! The curing-rate game between degree classes.
//!
//! Each degree class k is one player choosing its curing rate delta_k
//! from the budget box [0, 1/c_k], where c_k > 0 is that class's cost of
//! one unit of curing. A profile delta induces the stationary state of
//! the mean-field dynamics, and the class pays
//!
//! ```text
//! J_k(delta) = w_k(x_k(delta)) + c_k delta_k,
//! ```
//!
//! with x_k the stationary infection probability of class k and w_k the
//! class's probability weighting (identity for a true-expectation
//! player). A deviation by one class moves the whole stationary state,
//! and the cost accounts for it.
//!
//! Equilibria are found by round-robin best responses and certified by
//! grid search over unilateral deviations.

use rand::Rng;

use crate::dbmf::{self, CuringProfile, DegreeDistribution, EndemicState, NeighborDistribution};
use crate::weighting::WeightingSpec;
use crate::{real, Error, Real, Result};

/// Grid resolution used to seed best-response basins.
const BR_GRID: usize = 128;

/// Iteration cap for golden-section refinement of one basin.
const GOLDEN_CAP: usize = 300;

/// A best response within this cost distance of doing nothing snaps to
/// zero curing (doing nothing costs exactly w(1) = 1).
const ZERO_TIE_TOL: f64 = 1e-9;

/// Tolerances and caps for the equilibrium solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams<T> {
    /// Residual tolerance passed through to the stationary-state solver.
    pub tol_v: T,
    /// The round-robin stops when no rate moves more than this in a round.
    pub tol_fp: T,
    /// Maximum number of best-response rounds.
    pub max_rounds: usize,
}

impl<T: Real> SolveParams<T> {
    /// The fixed-point tolerance stays above the reproducibility floor
    /// of the one-dimensional minimizer (roughly sqrt(eps) scaled by the
    /// objective curvature); demanding much less makes the round-robin
    /// chase numerical jitter instead of converging.
    pub fn defaults() -> Self {
        Self {
            tol_v: real(1e-12),
            tol_fp: real(1e-6),
            max_rounds: 500,
        }
    }
}

impl<T: Real> Default for SolveParams<T> {
    fn default() -> Self {
        Self::defaults()
    }
}

/// Outcome of the round-robin equilibrium search.
#[derive(Debug, Clone)]
pub struct EquilibriumResult<T> {
    pub profile: CuringProfile<T>,
    /// Stationary state induced by the returned profile.
    pub state: EndemicState<T>,
    /// Per-class costs at the returned profile.
    pub costs: Vec<T>,
    /// Rounds actually used.
    pub rounds: usize,
    /// Whether the last round moved every rate by at most `tol_fp`.
    pub converged: bool,
    /// Largest rate change in the last round.
    pub max_change: T,
}

/// Result of certifying a profile against unilateral grid deviations.
#[derive(Debug, Clone)]
pub struct VerifyReport<T> {
    /// Improvement threshold the certificate was requested for.
    pub eps: T,
    /// Best cost improvement each class could realize on the deviation
    /// grid (zero when no deviation beats the profile point).
    pub margins: Vec<T>,
    pub max_margin: T,
    pub passed: bool,
}

/// Which classes sit at zero curing, and whether that set is closed
/// upward in degree (every class above a zero class is also zero).
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub zero_degrees: Vec<u32>,
    pub upward_closed: bool,
}

/// Result of probing the infection floor over the budget box.
#[derive(Debug, Clone)]
pub struct LowerBoundReport {
    pub threshold: f64,
    /// Smallest per-class stationary infection probability seen across
    /// the sampled profiles and the all-cap corner.
    pub min_x: f64,
    pub samples: usize,
    pub passed: bool,
}

/// The game instance: a degree distribution, per-class unit costs, and
/// per-class probability weightings.
#[derive(Debug, Clone)]
pub struct GameSpec<T> {
    dd: DegreeDistribution<T>,
    q: NeighborDistribution<T>,
    costs: Vec<T>,
    weightings: Vec<WeightingSpec<T>>,
}

impl<T: Real> GameSpec<T> {
    pub fn new(
        dd: DegreeDistribution<T>,
        costs: Vec<T>,
        weightings: Vec<WeightingSpec<T>>,
    ) -> Result<Self> {
        if costs.len() != dd.len() || weightings.len() != dd.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} costs and weightings, got {} and {}",
                dd.len(),
                costs.len(),
                weightings.len()
            )));
        }
        for &c in &costs {
            if !c.is_finite() || c <= T::zero() {
                return Err(Error::InvalidInput(format!(
                    "unit costs must be positive, got {c}"
                )));
            }
        }
        let q = dd.neighbor_dist();
        Ok(Self {
            dd,
            q,
            costs,
            weightings,
        })
    }

    /// Every class uses the same weighting.
    pub fn uniform(dd: DegreeDistribution<T>, costs: Vec<T>, w: WeightingSpec<T>) -> Result<Self> {
        let weightings = vec![w; dd.len()];
        Self::new(dd, costs, weightings)
    }

    pub fn degree_distribution(&self) -> &DegreeDistribution<T> {
        &self.dd
    }

    pub fn costs(&self) -> &[T] {
        &self.costs
    }

    pub fn weightings(&self) -> &[WeightingSpec<T>] {
        &self.weightings
    }

    pub fn classes(&self) -> usize {
        self.dd.len()
    }

    /// Budget caps 1/c_k, aligned with the degree classes.
    pub fn caps(&self) -> Vec<T> {
        self.costs.iter().map(|&c| c.recip()).collect()
    }

    fn check_profile(&self, cp: &CuringProfile<T>) -> Result<()> {
        if cp.len() != self.classes() {
            return Err(Error::InvalidInput(format!(
                "profile has {} rates but the game has {} classes",
                cp.len(),
                self.classes()
            )));
        }
        for (idx, (&d, &c)) in cp.rates().iter().zip(&self.costs).enumerate() {
            let cap = c.recip();
            if d > cap * (T::one() + real(1e-12)) {
                return Err(Error::InvalidInput(format!(
                    "rate {d} of class {idx} exceeds its budget cap {cap}"
                )));
            }
        }
        Ok(())
    }

    /// Cost J_k of one class at a full profile, solving the stationary
    /// state the profile induces.
    pub fn class_cost(&self, cp: &CuringProfile<T>, idx: usize, tol_v: T) -> Result<T> {
        self.check_profile(cp)?;
        self.class_cost_unchecked(cp, idx, tol_v)
    }

    fn class_cost_unchecked(&self, cp: &CuringProfile<T>, idx: usize, tol_v: T) -> Result<T> {
        let v = dbmf::endemic_v(&self.q, cp, tol_v)?;
        let x = if v == T::zero() {
            T::zero()
        } else {
            let kv = real::<T>(f64::from(self.dd.degrees()[idx])) * v;
            kv / (cp.get(idx) + kv)
        };
        Ok(self.weightings[idx].eval(x)? + self.costs[idx] * cp.get(idx))
    }

    /// Best response of one class to the others' rates: the cheapest
    /// rate in [0, 1/c_k], located by a coarse grid plus golden-section
    /// refinement of every candidate basin. Within `ZERO_TIE_TOL` of the
    /// do-nothing cost the response snaps to exactly zero.
    pub fn best_response(&self, cp: &CuringProfile<T>, idx: usize, tol_v: T, xtol: T) -> Result<T> {
        self.check_profile(cp)?;
        if idx >= self.classes() {
            return Err(Error::InvalidInput(format!(
                "class index {idx} out of range for {} classes",
                self.classes()
            )));
        }
        let cap = self.costs[idx].recip();
        let xtol = xtol.max(cap * real(1e-15));
        let mut eval =
            |d: T| -> Result<T> { self.class_cost_unchecked(&cp.with_rate(idx, d), idx, tol_v) };

        let n = BR_GRID;
        let mut xs = Vec::with_capacity(n + 1);
        let mut js = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let d = cap * real::<T>(i as f64) / real::<T>(n as f64);
            xs.push(d);
            js.push(eval(d)?);
        }

        let mut best_x = xs[0];
        let mut best_j = js[0];
        let consider = |x: T, j: T, best_x: &mut T, best_j: &mut T| {
            if j < *best_j {
                *best_j = j;
                *best_x = x;
            }
        };
        for i in 1..=n {
            consider(xs[i], js[i], &mut best_x, &mut best_j);
        }

        // Refine every basin the grid suggests, including the two
        // boundary cells: a minimum much narrower than a grid cell (they
        // occur near zero for flat weightings) only shows up there.
        for i in 0..=n {
            let is_basin = if i == 0 {
                js[0] <= js[1]
            } else if i == n {
                js[n] <= js[n - 1]
            } else {
                js[i] <= js[i - 1] && js[i] <= js[i + 1]
            };
            if !is_basin {
                continue;
            }
            let lo = xs[i.saturating_sub(1)];
            let hi = xs[(i + 1).min(n)];
            let (x, j) = golden_min(&mut eval, lo, hi, xtol)?;
            consider(x, j, &mut best_x, &mut best_j);
        }

        if best_j >= js[0] - real(ZERO_TIE_TOL) {
            return Ok(T::zero());
        }
        Ok(best_x.max(T::zero()).min(cap))
    }

    /// Round-robin best responses in ascending degree order, starting
    /// from `init` (or the box midpoint), until no rate moves more than
    /// `tol_fp` in a full round or the round budget runs out.
    pub fn solve_equilibrium(
        &self,
        init: Option<CuringProfile<T>>,
        params: &SolveParams<T>,
    ) -> Result<EquilibriumResult<T>> {
        if params.max_rounds == 0 {
            return Err(Error::InvalidInput("round budget must be positive".into()));
        }
        let half = real::<T>(0.5);
        let mut cp = match init {
            Some(cp) => {
                self.check_profile(&cp)?;
                cp
            }
            None => CuringProfile::new(self.costs.iter().map(|&c| half / c).collect())?,
        };
        let xtol = (params.tol_fp * real(1e-2)).max(real(1e-13));
        let mut converged = false;
        let mut rounds = 0;
        let mut max_change = T::infinity();
        for round in 1..=params.max_rounds {
            let mut change = T::zero();
            for idx in 0..self.classes() {
                let next = self.best_response(&cp, idx, params.tol_v, xtol)?;
                change = change.max((next - cp.get(idx)).abs());
                cp.set(idx, next)?;
            }
            rounds = round;
            max_change = change;
            if change <= params.tol_fp {
                converged = true;
                break;
            }
        }
        let state = dbmf::endemic_state(&self.q, &cp, params.tol_v)?;
        let costs = (0..self.classes())
            .map(|idx| Ok(self.weightings[idx].eval(state.x[idx])? + self.costs[idx] * cp.get(idx)))
            .collect::<Result<Vec<T>>>()?;
        Ok(EquilibriumResult {
            profile: cp,
            state,
            costs,
            rounds,
            converged,
            max_change,
        })
    }

    /// Certifies a profile as an approximate equilibrium: for each class
    /// the deviation grid over [0, 1/c_k] (grid points, plus the
    /// profile's own rate) must not undercut the class's cost by more
    /// than `eps`.
    pub fn verify_equilibrium(
        &self,
        cp: &CuringProfile<T>,
        eps: T,
        grid: usize,
        tol_v: T,
    ) -> Result<VerifyReport<T>> {
        self.check_profile(cp)?;
        if grid < 3 {
            return Err(Error::InvalidInput(format!(
                "deviation grid needs at least 3 points, got {grid}"
            )));
        }
        if !eps.is_finite() || eps <= T::zero() {
            return Err(Error::InvalidInput(format!(
                "improvement threshold must be positive, got {eps}"
            )));
        }
        let mut margins = Vec::with_capacity(self.classes());
        for idx in 0..self.classes() {
            let own = self.class_cost_unchecked(cp, idx, tol_v)?;
            let cap = self.costs[idx].recip();
            let mut best = own;
            for i in 0..grid {
                let d = cap * real::<T>(i as f64) / real::<T>((grid - 1) as f64);
                let j = self.class_cost_unchecked(&cp.with_rate(idx, d), idx, tol_v)?;
                if j < best {
                    best = j;
                }
            }
            margins.push(own - best);
        }
        let max_margin = margins.iter().fold(T::zero(), |acc, &m| acc.max(m));
        Ok(VerifyReport {
            eps,
            max_margin,
            passed: max_margin <= eps,
            margins,
        })
    }

    /// Reports which classes cure at (numerically) zero rate and whether
    /// that set is upward closed in degree.
    pub fn zero_structure(&self, cp: &CuringProfile<T>, zero_tol: T) -> Result<StructureReport> {
        self.check_profile(cp)?;
        let zero: Vec<bool> = cp.rates().iter().map(|&d| d <= zero_tol).collect();
        let zero_degrees = self
            .dd
            .degrees()
            .iter()
            .zip(&zero)
            .filter(|&(_, &z)| z)
            .map(|(&k, _)| k)
            .collect();
        // Degrees are sorted, so upward closed means the flags form a
        // (possibly empty) suffix.
        let first_zero = zero.iter().position(|&z| z);
        let upward_closed = match first_zero {
            None => true,
            Some(i) => zero[i..].iter().all(|&z| z),
        };
        Ok(StructureReport {
            zero_degrees,
            upward_closed,
        })
    }
}

impl GameSpec<f64> {
    /// Samples profiles from the budget box (plus the all-cap corner,
    /// which minimizes infection box-wide) and reports the smallest
    /// per-class stationary infection probability found. `passed` means
    /// the floor stayed strictly above `threshold`.
    pub fn infection_lower_bound<R: Rng>(
        &self,
        rng: &mut R,
        samples: usize,
        threshold: f64,
        tol_v: f64,
    ) -> Result<LowerBoundReport> {
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::InvalidInput(format!(
                "threshold must lie in [0, 1), got {threshold}"
            )));
        }
        let caps = self.caps();
        let corner = CuringProfile::new(caps.clone())?;
        let mut min_x = f64::INFINITY;
        let mut probe = |cp: &CuringProfile<f64>| -> Result<()> {
            let st = dbmf::endemic_state(&self.q, cp, tol_v)?;
            for &x in &st.x {
                if x < min_x {
                    min_x = x;
                }
            }
            Ok(())
        };
        probe(&corner)?;
        for _ in 0..samples {
            let cp = crate::sampling::random_profile_in_box(rng, &caps);
            probe(&cp)?;
        }
        Ok(LowerBoundReport {
            threshold,
            min_x,
            samples,
            passed: min_x > threshold,
        })
    }
}

/// Golden-section minimization on [a, b] down to an interval of width
/// `xtol`, returning the best sampled point and its value.
fn golden_min<T: Real>(
    f: &mut impl FnMut(T) -> Result<T>,
    mut a: T,
    mut b: T,
    xtol: T,
) -> Result<(T, T)> {
    let inv_phi = real::<T>(0.618_033_988_749_894_9);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..GOLDEN_CAP {
        if b - a <= xtol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}
