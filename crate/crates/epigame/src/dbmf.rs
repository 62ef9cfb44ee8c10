//! Degree-based mean-field layer for SIS epidemics.
//!
//! Nodes are grouped by degree. With q_k the probability that a random
//! neighbor has degree k and delta_k the curing rate of class k, the
//! mean-field dynamics for the infection probability x_k of a degree-k
//! node are
//!
//! ```text
//! dx_k/dt = -delta_k x_k + (1 - x_k) k v,      v = sum_i q_i x_i.
//! ```
//!
//! Stationary states are x = 0 (disease-free) and, when the reproduction
//! number R = sum_k k q_k / delta_k exceeds one, the endemic state
//! x_k = k v / (delta_k + k v) with v > 0 the unique root of the
//! consistency function g(v) = 1 - sum_k k q_k / (delta_k + k v), which
//! is strictly increasing in v.

use crate::{real, Error, Real, Result};

/// Default residual tolerance for the endemic consistency equation.
pub const DEFAULT_V_TOL: f64 = 1e-12;

/// Iteration cap for the endemic bisection.
const BISECT_CAP: usize = 200;

/// Cap for halving the lower bracket endpoint from 1 toward 0.
const BRACKET_HALVINGS: usize = 1200;

/// Tolerance on |sum(probs) - 1| accepted by the distribution constructors.
const PROB_SUM_TOL: f64 = 1e-12;

/// Recorded trajectory points are thinned to at most this many.
const MAX_RECORDED_STATES: usize = 1024;

/// A degree distribution P(k) over finitely many positive degree classes.
///
/// Zero-probability classes are dropped at construction, degrees are kept
/// sorted, and the average degree must exceed one (a connected giant
/// component needs more than a matching).
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution<T> {
    degrees: Vec<u32>,
    probs: Vec<T>,
}

impl<T: Real> DegreeDistribution<T> {
    pub fn new(degrees: Vec<u32>, probs: Vec<T>) -> Result<Self> {
        if degrees.is_empty() || degrees.len() != probs.len() {
            return Err(Error::InvalidInput(format!(
                "need matching nonempty degree and probability lists, got {} and {}",
                degrees.len(),
                probs.len()
            )));
        }
        let mut sum = T::zero();
        for (&k, &p) in degrees.iter().zip(&probs) {
            if k == 0 {
                return Err(Error::InvalidInput("degrees must be positive".into()));
            }
            if !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidInput(format!(
                    "probability for degree {k} must be a finite nonnegative real, got {p}"
                )));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > real(PROB_SUM_TOL) {
            return Err(Error::InvalidInput(format!(
                "probabilities must sum to 1 within {PROB_SUM_TOL}, got {sum}"
            )));
        }
        let mut pairs: Vec<(u32, T)> = degrees
            .into_iter()
            .zip(probs)
            .filter(|&(_, p)| p > T::zero())
            .collect();
        pairs.sort_by_key(|&(k, _)| k);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("degrees must be distinct".into()));
        }
        let dd = Self {
            degrees: pairs.iter().map(|&(k, _)| k).collect(),
            probs: pairs.iter().map(|&(_, p)| p).collect(),
        };
        if dd.mean_degree() <= T::one() {
            return Err(Error::InvalidInput(format!(
                "average degree must exceed 1, got {}",
                dd.mean_degree()
            )));
        }
        Ok(dd)
    }

    /// Degree-regular distribution concentrated on a single degree d >= 2.
    pub fn regular(d: u32) -> Result<Self> {
        Self::new(vec![d], vec![T::one()])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn index_of(&self, degree: u32) -> Option<usize> {
        self.degrees.binary_search(&degree).ok()
    }

    pub fn mean_degree(&self) -> T {
        self.degrees
            .iter()
            .zip(&self.probs)
            .fold(T::zero(), |acc, (&k, &p)| acc + real::<T>(f64::from(k)) * p)
    }

    pub fn max_degree(&self) -> u32 {
        *self.degrees.last().expect("distribution is nonempty")
    }

    /// The size-biased neighbor distribution q_k = k P(k) / <d>.
    pub fn neighbor_dist(&self) -> NeighborDistribution<T> {
        let mean = self.mean_degree();
        let q = self
            .degrees
            .iter()
            .zip(&self.probs)
            .map(|(&k, &p)| real::<T>(f64::from(k)) * p / mean)
            .collect();
        NeighborDistribution {
            degrees: self.degrees.clone(),
            q,
        }
    }
}

/// Probability q_k that a uniformly random edge endpoint attaches to a
/// degree-k node, aligned with a sorted list of degree classes.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborDistribution<T> {
    degrees: Vec<u32>,
    q: Vec<T>,
}

impl<T: Real> NeighborDistribution<T> {
    /// Direct constructor for an already size-biased distribution.
    /// Unlike [`DegreeDistribution`], a single degree-1 class is valid
    /// here (q is a distribution over neighbor degrees, not nodes).
    pub fn new(degrees: Vec<u32>, q: Vec<T>) -> Result<Self> {
        if degrees.is_empty() || degrees.len() != q.len() {
            return Err(Error::InvalidInput(format!(
                "need matching nonempty degree and weight lists, got {} and {}",
                degrees.len(),
                q.len()
            )));
        }
        let mut sum = T::zero();
        for (&k, &p) in degrees.iter().zip(&q) {
            if k == 0 {
                return Err(Error::InvalidInput("degrees must be positive".into()));
            }
            if !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidInput(format!(
                    "neighbor weight for degree {k} must be a finite nonnegative real, got {p}"
                )));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > real(PROB_SUM_TOL) {
            return Err(Error::InvalidInput(format!(
                "neighbor weights must sum to 1 within {PROB_SUM_TOL}, got {sum}"
            )));
        }
        let mut pairs: Vec<(u32, T)> = degrees.into_iter().zip(q).collect();
        pairs.sort_by_key(|&(k, _)| k);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("degrees must be distinct".into()));
        }
        Ok(Self {
            degrees: pairs.iter().map(|&(k, _)| k).collect(),
            q: pairs.iter().map(|&(_, p)| p).collect(),
        })
    }

    /// All neighbors have degree d (the degree-regular case).
    pub fn regular(d: u32) -> Result<Self> {
        Self::new(vec![d], vec![T::one()])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn index_of(&self, degree: u32) -> Option<usize> {
        self.degrees.binary_search(&degree).ok()
    }
}

/// Curing rates delta_k >= 0, aligned with a degree-class list.
#[derive(Debug, Clone, PartialEq)]
pub struct CuringProfile<T> {
    delta: Vec<T>,
}

impl<T: Real> CuringProfile<T> {
    pub fn new(delta: Vec<T>) -> Result<Self> {
        if delta.is_empty() {
            return Err(Error::InvalidInput("curing profile is empty".into()));
        }
        for &d in &delta {
            if !d.is_finite() || d < T::zero() {
                return Err(Error::InvalidInput(format!(
                    "curing rates must be finite nonnegative reals, got {d}"
                )));
            }
        }
        Ok(Self { delta })
    }

    /// The same rate for every class.
    pub fn uniform(delta: T, classes: usize) -> Result<Self> {
        Self::new(vec![delta; classes])
    }

    pub fn rates(&self) -> &[T] {
        &self.delta
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn get(&self, idx: usize) -> T {
        self.delta[idx]
    }

    pub fn set(&mut self, idx: usize, value: T) -> Result<()> {
        if !value.is_finite() || value < T::zero() {
            return Err(Error::InvalidInput(format!(
                "curing rates must be finite nonnegative reals, got {value}"
            )));
        }
        self.delta[idx] = value;
        Ok(())
    }

    /// Clone with a single entry replaced; used for unilateral deviations.
    pub fn with_rate(&self, idx: usize, value: T) -> Self {
        let mut delta = self.delta.clone();
        delta[idx] = value;
        Self { delta }
    }
}

/// Whether the stationary state carries infection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    DiseaseFree,
    Endemic,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::DiseaseFree => write!(f, "disease-free"),
            Regime::Endemic => write!(f, "endemic"),
        }
    }
}

/// Stationary solution of the mean-field dynamics.
#[derive(Debug, Clone)]
pub struct EndemicState<T> {
    /// Probability that a random neighbor is infected.
    pub v: T,
    /// Per-class infection probabilities, aligned with the degree list.
    pub x: Vec<T>,
    pub regime: Regime,
    /// |g(v)| at the returned v; exactly zero for the disease-free state.
    pub residual: T,
}

fn check_alignment<T: Real>(q: &NeighborDistribution<T>, cp: &CuringProfile<T>) -> Result<()> {
    if q.len() != cp.len() {
        return Err(Error::InvalidInput(format!(
            "curing profile has {} classes but the distribution has {}",
            cp.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Reproduction number R = sum_k k q_k / delta_k. A class with zero
/// curing and positive neighbor weight makes R infinite; zero-weight
/// classes contribute nothing.
pub fn reproduction_number<T: Real>(q: &NeighborDistribution<T>, cp: &CuringProfile<T>) -> T {
    debug_assert_eq!(q.len(), cp.len());
    let mut r = T::zero();
    for ((&k, &qk), &dk) in q.degrees().iter().zip(q.q()).zip(cp.rates()) {
        if qk == T::zero() {
            continue;
        }
        if dk == T::zero() {
            return T::infinity();
        }
        r = r + real::<T>(f64::from(k)) * qk / dk;
    }
    r
}

/// The consistency function g(v) = 1 - sum_k k q_k / (delta_k + k v),
/// strictly increasing in v on (0, 1].
fn consistency<T: Real>(degrees: &[u32], q: &[T], delta: &[T], v: T) -> T {
    let mut s = T::zero();
    for ((&k, &qk), &dk) in degrees.iter().zip(q).zip(delta) {
        if qk == T::zero() {
            continue;
        }
        let kf = real::<T>(f64::from(k));
        s = s + kf * qk / (dk + kf * v);
    }
    T::one() - s
}

/// |g(v)| for a candidate neighbor-infection probability.
pub fn consistency_residual<T: Real>(
    q: &NeighborDistribution<T>,
    cp: &CuringProfile<T>,
    v: T,
) -> Result<T> {
    check_alignment(q, cp)?;
    Ok(consistency(q.degrees(), q.q(), cp.rates(), v).abs())
}

/// Solves for the stationary neighbor-infection probability v.
///
/// Returns 0 when R <= 1 (the disease-free state is the only stationary
/// state), exactly 1 when every class has zero curing, and otherwise the
/// unique positive root of g, bisected until |g(v)| <= tol and then
/// polished with a few Newton steps. The polish matters beyond accuracy:
/// it makes the returned root a smooth function of the curing rates, so
/// objectives evaluated through this solver do not inherit the residual
/// tolerance as noise. The lower bracket endpoint is found by halving
/// from 1 until g turns negative.
pub fn endemic_v<T: Real>(q: &NeighborDistribution<T>, cp: &CuringProfile<T>, tol: T) -> Result<T> {
    check_alignment(q, cp)?;
    if !tol.is_finite() || tol <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "residual tolerance must be positive, got {tol}"
        )));
    }
    if reproduction_number(q, cp) <= T::one() {
        return Ok(T::zero());
    }
    if cp.rates().iter().all(|&d| d == T::zero()) {
        return Ok(T::one());
    }
    let g = |v: T| consistency(q.degrees(), q.q(), cp.rates(), v);

    if g(T::one()) < T::zero() {
        // Possible only through rounding when curing is negligible; the
        // root is then indistinguishable from full infection.
        return Ok(T::one());
    }
    let mut hi = T::one();
    let mut lo = T::one();
    let mut bracketed = false;
    for _ in 0..BRACKET_HALVINGS {
        let next = lo * real(0.5);
        if next == T::zero() {
            break;
        }
        if g(next) < T::zero() {
            hi = lo;
            lo = next;
            bracketed = true;
            break;
        }
        lo = next;
    }
    if !bracketed {
        // g stayed nonnegative arbitrarily close to zero: the instance
        // grazes the threshold and the root is numerically zero.
        return Ok(T::zero());
    }

    // g'(v) = sum_k k^2 q_k / (delta_k + k v)^2, which is >= 1 at the
    // root by Cauchy-Schwarz against sum_k q_k = 1, so Newton steps near
    // the root are well conditioned.
    let gp = |v: T| {
        let mut s = T::zero();
        for ((&k, &qk), &dk) in q.degrees().iter().zip(q.q()).zip(cp.rates()) {
            if qk == T::zero() {
                continue;
            }
            let kf = real::<T>(f64::from(k));
            let den = dk + kf * v;
            s = s + kf * kf * qk / (den * den);
        }
        s
    };
    let polish = |mut v: T, mut gv: T, lo: T, hi: T| {
        for _ in 0..4 {
            let slope = gp(v);
            if !slope.is_finite() || slope <= T::zero() {
                break;
            }
            let next = (v - gv / slope).max(lo).min(hi);
            if next == v {
                break;
            }
            let gn = g(next);
            if gn.abs() >= gv.abs() {
                break;
            }
            v = next;
            gv = gn;
        }
        v
    };

    let half = real::<T>(0.5);
    for _ in 0..BISECT_CAP {
        let mid = (lo + hi) * half;
        let gm = g(mid);
        if gm.abs() <= tol {
            return Ok(polish(mid, gm, lo, hi));
        }
        if gm < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(format!(
        "endemic bisection did not reach |g| <= {tol} within {BISECT_CAP} iterations"
    )))
}

/// Stationary infection probability per class: x_k = k v / (delta_k + k v).
/// A disease-free v gives zero everywhere; zero curing with v > 0 gives one.
pub fn infection_probs<T: Real>(v: T, cp: &CuringProfile<T>, degrees: &[u32]) -> Result<Vec<T>> {
    if degrees.len() != cp.len() {
        return Err(Error::InvalidInput(format!(
            "curing profile has {} classes but {} degrees were given",
            cp.len(),
            degrees.len()
        )));
    }
    if !(v >= T::zero() && v <= T::one()) {
        return Err(Error::Domain(format!(
            "neighbor infection probability must lie in [0, 1], got {v}"
        )));
    }
    Ok(degrees
        .iter()
        .zip(cp.rates())
        .map(|(&k, &dk)| {
            if v == T::zero() {
                T::zero()
            } else {
                let kv = real::<T>(f64::from(k)) * v;
                kv / (dk + kv)
            }
        })
        .collect())
}

/// Solves the full stationary state: v, per-class probabilities, regime,
/// and the consistency residual at the returned v.
pub fn endemic_state<T: Real>(
    q: &NeighborDistribution<T>,
    cp: &CuringProfile<T>,
    tol: T,
) -> Result<EndemicState<T>> {
    let v = endemic_v(q, cp, tol)?;
    let x = infection_probs(v, cp, q.degrees())?;
    let (regime, residual) = if v == T::zero() {
        (Regime::DiseaseFree, T::zero())
    } else {
        (
            Regime::Endemic,
            consistency(q.degrees(), q.q(), cp.rates(), v).abs(),
        )
    };
    Ok(EndemicState {
        v,
        x,
        regime,
        residual,
    })
}

/// Critical curing rate of class k holding the other classes fixed:
/// the epidemic is endemic if and only if delta_k stays below it. It is
/// infinite when the other classes already sustain the epidemic on
/// their own (sum_{i != k} i q_i / delta_i >= 1).
pub fn critical_curing_rate<T: Real>(
    q: &NeighborDistribution<T>,
    cp: &CuringProfile<T>,
    k: u32,
) -> Result<T> {
    check_alignment(q, cp)?;
    let idx = q.index_of(k).ok_or_else(|| {
        Error::InvalidInput(format!("degree {k} is not a class of the distribution"))
    })?;
    let mut s = T::zero();
    for (i, ((&ki, &qi), &di)) in q.degrees().iter().zip(q.q()).zip(cp.rates()).enumerate() {
        if i == idx || qi == T::zero() {
            continue;
        }
        if di == T::zero() {
            return Ok(T::infinity());
        }
        s = s + real::<T>(f64::from(ki)) * qi / di;
    }
    if s >= T::one() {
        return Ok(T::infinity());
    }
    Ok(real::<T>(f64::from(k)) * q.q()[idx] / (T::one() - s))
}

/// A thinned trajectory of the mean-field dynamics.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// Recorded states aligned with `times`; each entry is aligned with
    /// the degree-class list of the distribution.
    pub states: Vec<Vec<T>>,
    /// Total mass removed by projecting states back into [0, 1].
    pub clamped_mass: T,
    /// Max-norm distance of the final state from the analytic
    /// stationary state.
    pub stationary_gap: T,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> &[T] {
        self.states
            .last()
            .expect("trajectory has at least one state")
    }

    pub fn final_time(&self) -> T {
        *self
            .times
            .last()
            .expect("trajectory has at least one state")
    }
}

/// Integrates the mean-field dynamics with fixed-step RK4.
///
/// The step must satisfy dt <= 0.01 * min(1, 1 / max_k(delta_k + k)),
/// a conservative bound under which RK4 is stable for this system.
/// States are projected back into [0, 1] after every step and the total
/// projected mass is reported as a diagnostic. At most 1024 interior
/// states are recorded; the initial and final states always are.
pub fn integrate<T: Real>(
    dd: &DegreeDistribution<T>,
    cp: &CuringProfile<T>,
    x0: &[T],
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let q = dd.neighbor_dist();
    check_alignment(&q, cp)?;
    if x0.len() != dd.len() {
        return Err(Error::InvalidInput(format!(
            "initial state has {} entries but the distribution has {} classes",
            x0.len(),
            dd.len()
        )));
    }
    if x0.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::InvalidInput(
            "initial state entries must lie in [0, 1]".into(),
        ));
    }
    if !t_end.is_finite() || t_end <= T::zero() {
        return Err(Error::InvalidInput(format!(
            "integration horizon must be positive, got {t_end}"
        )));
    }
    let mut stiffness = T::zero();
    for (&k, &dk) in dd.degrees().iter().zip(cp.rates()) {
        stiffness = stiffness.max(dk + real(f64::from(k)));
    }
    let dt_max = real::<T>(0.01) * T::one().min(stiffness.recip());
    if !dt.is_finite() || dt <= T::zero() || dt > dt_max {
        return Err(Error::InvalidInput(format!(
            "step size must lie in (0, {dt_max}] for this instance, got {dt}"
        )));
    }

    let degrees = dd.degrees();
    let qs = q.q();
    let delta = cp.rates();
    let m = degrees.len();
    let rhs = |state: &[T], out: &mut [T]| {
        let mut v = T::zero();
        for (&qi, &xi) in qs.iter().zip(state) {
            v = v + qi * xi;
        }
        for i in 0..m {
            let kf = real::<T>(f64::from(degrees[i]));
            out[i] = (T::one() - state[i]) * kf * v - delta[i] * state[i];
        }
    };

    let total_steps = (t_end / dt).ceil().to_usize().unwrap_or(usize::MAX);
    if total_steps == usize::MAX {
        return Err(Error::InvalidInput(
            "integration horizon over step size exceeds the step budget".into(),
        ));
    }
    let stride = total_steps.div_ceil(MAX_RECORDED_STATES).max(1);

    let mut x: Vec<T> = x0.to_vec();
    let mut k1 = vec![T::zero(); m];
    let mut k2 = vec![T::zero(); m];
    let mut k3 = vec![T::zero(); m];
    let mut k4 = vec![T::zero(); m];
    let mut tmp = vec![T::zero(); m];

    let mut times = vec![T::zero()];
    let mut states = vec![x.clone()];
    let mut clamped_mass = T::zero();
    let half = real::<T>(0.5);
    let sixth = T::one() / real::<T>(6.0);
    let two = real::<T>(2.0);

    let mut t = T::zero();
    for step in 0..total_steps {
        let h = if t + dt > t_end { t_end - t } else { dt };
        if h <= T::zero() {
            break;
        }
        rhs(&x, &mut k1);
        for i in 0..m {
            tmp[i] = x[i] + half * h * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..m {
            tmp[i] = x[i] + half * h * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..m {
            tmp[i] = x[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..m {
            let next = x[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            let clamped = next.max(T::zero()).min(T::one());
            clamped_mass = clamped_mass + (next - clamped).abs();
            x[i] = clamped;
        }
        t = t + h;
        if (step + 1) % stride == 0 || step + 1 == total_steps {
            times.push(t);
            states.push(x.clone());
        }
    }

    let stationary = endemic_state(&q, cp, real(DEFAULT_V_TOL))?;
    let mut gap = T::zero();
    for (&xf, &xs) in x.iter().zip(&stationary.x) {
        gap = gap.max((xf - xs).abs());
    }

    Ok(Trajectory {
        times,
        states,
        clamped_mass,
        stationary_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_class() -> (NeighborDistribution<f64>, DegreeDistribution<f64>) {
        let dd = DegreeDistribution::new(vec![1, 3], vec![0.5, 0.5]).unwrap();
        (dd.neighbor_dist(), dd)
    }

    #[test]
    fn neighbor_distribution_is_size_biased() {
        let (q, dd) = two_class();
        assert_eq!(dd.mean_degree(), 2.0);
        assert!((q.q()[0] - 0.25).abs() < 1e-15);
        assert!((q.q()[1] - 0.75).abs() < 1e-15);

        let dd = DegreeDistribution::<f64>::new(vec![2, 4], vec![0.5, 0.5]).unwrap();
        let q = dd.neighbor_dist();
        assert!((q.q()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.q()[1] - 2.0 / 3.0).abs() < 1e-15);
        let total: f64 = q.q().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_distribution_rejects_invalid_inputs() {
        assert!(DegreeDistribution::<f64>::new(vec![], vec![]).is_err());
        assert!(DegreeDistribution::new(vec![0, 2], vec![0.5, 0.5]).is_err());
        assert!(DegreeDistribution::new(vec![2, 2], vec![0.5, 0.5]).is_err());
        assert!(DegreeDistribution::new(vec![1, 3], vec![0.6, 0.6]).is_err());
        assert!(DegreeDistribution::new(vec![1, 3], vec![-0.1, 1.1]).is_err());
        // Average degree exactly 1 is rejected.
        assert!(DegreeDistribution::new(vec![1], vec![1.0]).is_err());
        assert!(DegreeDistribution::new(vec![1, 2], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn zero_probability_classes_are_dropped() {
        let dd = DegreeDistribution::new(vec![5, 1, 3], vec![0.0, 0.5, 0.5]).unwrap();
        assert_eq!(dd.degrees(), &[1, 3]);
        let dd = DegreeDistribution::new(vec![3, 1], vec![0.5, 0.5]).unwrap();
        assert_eq!(dd.degrees(), &[1, 3]);
    }

    #[test]
    fn neighbor_distribution_allows_single_degree_one_class() {
        let q = NeighborDistribution::<f64>::regular(1).unwrap();
        let cp = CuringProfile::uniform(0.25, 1).unwrap();
        let v = endemic_v(&q, &cp, 1e-12).unwrap();
        assert!((v - 0.75).abs() < 1e-10);
    }

    #[test]
    fn reproduction_number_oracles() {
        let (q, _) = two_class();
        let cp = CuringProfile::uniform(0.5, 2).unwrap();
        assert!((reproduction_number(&q, &cp) - 5.0).abs() < 1e-12);

        let cp = CuringProfile::new(vec![0.5, 0.0]).unwrap();
        assert!(reproduction_number(&q, &cp).is_infinite());

        let q4 = NeighborDistribution::<f64>::regular(4).unwrap();
        let cp = CuringProfile::uniform(2.0, 1).unwrap();
        assert!((reproduction_number(&q4, &cp) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endemic_v_two_class_oracle() {
        // Root of 3v^2 - v - 1 = 0: v = (1 + sqrt(13)) / 6.
        let (q, _) = two_class();
        let cp = CuringProfile::uniform(0.5, 2).unwrap();
        let v = endemic_v(&q, &cp, 1e-13).unwrap();
        assert!((v - 0.767_591_879_243_998_2).abs() < 1e-12);
    }

    #[test]
    fn endemic_v_degree_regular_closed_form() {
        for d in 1..=10u32 {
            let q = NeighborDistribution::<f64>::regular(d).unwrap();
            for i in 0..=60 {
                let delta = 1.5 * f64::from(d) * f64::from(i) / 60.0;
                let cp = CuringProfile::uniform(delta, 1).unwrap();
                let v = endemic_v(&q, &cp, 1e-12).unwrap();
                let expect = (1.0 - delta / f64::from(d)).max(0.0);
                assert!(
                    (v - expect).abs() < 1e-10,
                    "d = {d}, delta = {delta}: {v} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn endemic_v_special_cases() {
        let (q, _) = two_class();
        // All-zero curing: full infection exactly.
        let cp = CuringProfile::uniform(0.0, 2).unwrap();
        assert_eq!(endemic_v(&q, &cp, 1e-12).unwrap(), 1.0);
        // Subcritical: disease-free.
        let cp = CuringProfile::uniform(4.0, 2).unwrap();
        assert_eq!(endemic_v(&q, &cp, 1e-12).unwrap(), 0.0);
        // Bad tolerance.
        assert!(endemic_v(&q, &cp, 0.0).is_err());
        assert!(endemic_v(&q, &cp, -1.0).is_err());
        // Misaligned profile.
        let cp = CuringProfile::uniform(1.0, 3).unwrap();
        assert!(endemic_v(&q, &cp, 1e-12).is_err());
    }

    #[test]
    fn infection_probs_oracles() {
        let cp = CuringProfile::<f64>::uniform(1.0, 1).unwrap();
        let x = infection_probs(0.75, &cp, &[4]).unwrap();
        assert!((x[0] - 0.75).abs() < 1e-15);

        // Zero curing with endemic v: certain infection.
        let cp = CuringProfile::<f64>::uniform(0.0, 1).unwrap();
        assert_eq!(infection_probs(0.3, &cp, &[4]).unwrap()[0], 1.0);
        // Disease-free v: zero everywhere.
        assert_eq!(infection_probs(0.0, &cp, &[4]).unwrap()[0], 0.0);
        // Out-of-range v.
        assert!(infection_probs(1.5, &cp, &[4]).is_err());
    }

    #[test]
    fn endemic_state_reports_regime_and_residual() {
        let (q, _) = two_class();
        let cp = CuringProfile::uniform(0.5, 2).unwrap();
        let st = endemic_state(&q, &cp, 1e-12).unwrap();
        assert_eq!(st.regime, Regime::Endemic);
        assert!(st.residual <= 1e-12);
        // v equals the q-average of x by construction of g.
        let avg: f64 = q.q().iter().zip(&st.x).map(|(&qk, &xk)| qk * xk).sum();
        assert!((st.v - avg).abs() < 1e-10);

        let cp = CuringProfile::uniform(4.0, 2).unwrap();
        let st = endemic_state(&q, &cp, 1e-12).unwrap();
        assert_eq!(st.regime, Regime::DiseaseFree);
        assert_eq!(st.v, 0.0);
        assert_eq!(st.residual, 0.0);
        assert!(st.x.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn critical_curing_rate_oracles() {
        // Degree-regular: the critical rate is the degree itself.
        for d in [2u32, 4, 7] {
            let q = NeighborDistribution::<f64>::regular(d).unwrap();
            let cp = CuringProfile::uniform(1.0, 1).unwrap();
            let hat = critical_curing_rate(&q, &cp, d).unwrap();
            assert!((hat - f64::from(d)).abs() < 1e-12, "d = {d}");
        }

        let (q, _) = two_class();
        // delta_1 = 0.5: the degree-1 class contributes 0.5, leaving
        // delta_hat_3 = 3 * 0.75 / (1 - 0.5) = 4.5.
        let cp = CuringProfile::new(vec![0.5, 1.0]).unwrap();
        let hat = critical_curing_rate(&q, &cp, 3).unwrap();
        assert!((hat - 4.5).abs() < 1e-12);
        // delta_1 = 0.2: the degree-1 class alone sustains the epidemic.
        let cp = CuringProfile::new(vec![0.2, 1.0]).unwrap();
        assert!(critical_curing_rate(&q, &cp, 3).unwrap().is_infinite());
        // Unknown degree.
        assert!(critical_curing_rate(&q, &cp, 2).is_err());
    }

    #[test]
    fn critical_curing_rate_separates_regimes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..25 {
            let (dd, cp) = sampling::random_instance(&mut rng, 8, 5, 3.0);
            let q = dd.neighbor_dist();
            let idx = (0..dd.len()).max_by_key(|&i| dd.degrees()[i]).unwrap();
            let k = dd.degrees()[idx];
            let hat = critical_curing_rate(&q, &cp, k).unwrap();
            if !hat.is_finite() {
                let cp_huge = cp.with_rate(idx, 1e6);
                assert!(endemic_v(&q, &cp_huge, 1e-12).unwrap() > 0.0);
                continue;
            }
            let below = cp.with_rate(idx, (hat - 1e-6).max(0.0));
            let above = cp.with_rate(idx, hat + 1e-6);
            assert!(endemic_v(&q, &below, 1e-12).unwrap() > 0.0);
            assert_eq!(endemic_v(&q, &above, 1e-12).unwrap(), 0.0);
        }
    }

    #[test]
    fn threshold_equivalence_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..150 {
            let (dd, cp) = sampling::random_instance(&mut rng, 10, 10, 3.0);
            let q = dd.neighbor_dist();
            let r = reproduction_number(&q, &cp);
            let v = endemic_v(&q, &cp, 1e-12).unwrap();
            assert!((0.0..=1.0).contains(&v), "trial {trial}: v = {v}");
            if r > 1.0 {
                assert!(v > 0.0, "trial {trial}: R = {r} but v = 0");
            } else {
                assert_eq!(v, 0.0, "trial {trial}: R = {r} but v = {v}");
            }
        }
    }

    #[test]
    fn endemic_v_is_monotone_and_convex_in_a_single_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (dd, cp) = sampling::endemic_instance(&mut rng, 8, 5);
            let q = dd.neighbor_dist();
            let idx = 0;
            let hat = critical_curing_rate(&q, &cp, dd.degrees()[idx]).unwrap();
            let top = if hat.is_finite() { hat * 0.98 } else { 6.0 };
            let n = 24;
            let vs: Vec<f64> = (0..=n)
                .map(|i| {
                    let d = top * f64::from(i) / f64::from(n);
                    endemic_v(&q, &cp.with_rate(idx, d), 1e-13).unwrap()
                })
                .collect();
            for w in vs.windows(2) {
                assert!(w[1] - w[0] <= 1e-10, "v not decreasing: {vs:?}");
            }
            for w in vs.windows(3) {
                assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-8, "v not convex: {vs:?}");
            }
        }
    }

    #[test]
    fn endemic_v_vanishes_continuously_at_the_critical_rate() {
        let (q, _) = two_class();
        let cp = CuringProfile::new(vec![0.5, 1.0]).unwrap();
        let hat = critical_curing_rate(&q, &cp, 3).unwrap();
        assert!(hat.is_finite());
        // v(hat - eps) should shrink linearly with eps.
        let eps0 = 1e-2;
        let v0 = endemic_v(&q, &cp.with_rate(1, hat - eps0), 1e-13).unwrap();
        let slope = v0 / eps0;
        for &eps in &[1e-3, 1e-4, 1e-5, 1e-6] {
            let v = endemic_v(&q, &cp.with_rate(1, hat - eps), 1e-13).unwrap();
            assert!(v > 0.0);
            assert!(v <= 3.0 * slope * eps, "eps = {eps}: v = {v}");
        }
        assert_eq!(endemic_v(&q, &cp.with_rate(1, hat), 1e-13).unwrap(), 0.0);
    }

    #[test]
    fn integrate_reaches_the_endemic_state() {
        let dd = DegreeDistribution::<f64>::regular(4).unwrap();
        let cp = CuringProfile::uniform(1.0, 1).unwrap();
        let traj = integrate(&dd, &cp, &[0.5], 60.0, 0.002).unwrap();
        assert!(traj.stationary_gap < 1e-8, "gap = {}", traj.stationary_gap);
        assert!((traj.final_state()[0] - 0.75).abs() < 1e-8);
        assert_eq!(traj.clamped_mass, 0.0);
        assert_eq!(traj.times[0], 0.0);
        assert!((traj.final_time() - 60.0).abs() < 1e-12);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn integrate_decays_below_threshold() {
        let dd = DegreeDistribution::new(vec![1, 3], vec![0.5, 0.5]).unwrap();
        let cp = CuringProfile::uniform(4.0, 2).unwrap();
        let dt = 0.01 * (1.0f64 / 7.0).min(1.0);
        let traj = integrate(&dd, &cp, &[0.5, 0.5], 40.0, dt).unwrap();
        assert!(traj.final_state().iter().all(|&x| x < 1e-8));
        assert!(traj.stationary_gap < 1e-8);
    }

    #[test]
    fn integrate_matches_heterogeneous_stationary_state() {
        let dd = DegreeDistribution::new(vec![1, 3], vec![0.5, 0.5]).unwrap();
        let cp = CuringProfile::uniform(0.5, 2).unwrap();
        let dt = 0.01 / 3.5;
        let traj = integrate(&dd, &cp, &[0.5, 0.5], 120.0, dt).unwrap();
        assert!(traj.stationary_gap < 1e-9, "gap = {}", traj.stationary_gap);
    }

    #[test]
    fn integrate_enforces_the_step_bound() {
        let dd = DegreeDistribution::regular(4).unwrap();
        let cp = CuringProfile::uniform(1.0, 1).unwrap();
        // Bound is 0.01 * 1/5 = 0.002 for this instance.
        assert!(integrate(&dd, &cp, &[0.5], 10.0, 0.003).is_err());
        assert!(integrate(&dd, &cp, &[0.5], 10.0, 0.0).is_err());
        assert!(integrate(&dd, &cp, &[0.5], 10.0, -0.5).is_err());
        assert!(integrate(&dd, &cp, &[0.5, 0.5], 10.0, 0.001).is_err());
        assert!(integrate(&dd, &cp, &[1.5], 10.0, 0.001).is_err());
    }

    #[test]
    fn trajectory_recording_is_thinned() {
        let dd = DegreeDistribution::regular(3).unwrap();
        let cp = CuringProfile::uniform(1.0, 1).unwrap();
        let traj = integrate(&dd, &cp, &[0.2], 30.0, 0.002).unwrap();
        assert!(traj.states.len() <= 1026);
        assert_eq!(traj.states.len(), traj.times.len());
    }

    #[test]
    fn single_precision_endemic_state_is_close() {
        let dd = DegreeDistribution::<f32>::new(vec![1, 3], vec![0.5, 0.5]).unwrap();
        let cp = CuringProfile::<f32>::uniform(0.5, 2).unwrap();
        let v = endemic_v(&dd.neighbor_dist(), &cp, 1e-6).unwrap();
        assert!((v - 0.767_591_9_f32).abs() < 1e-5);
    }
}
