//! Seeded random instance generators for randomized checks.
//!
//! Everything here is driven by a caller-supplied RNG so that checks are
//! reproducible from a single seed. Generation is f64-only; these are
//! test and diagnostic utilities, not part of the numeric core.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dbmf::{CuringProfile, DegreeDistribution};

/// Random degree distribution with at most `max_classes` classes drawn
/// from degrees 1..=`max_degree` and average degree above one.
///
/// Panics if `max_degree < 2`, which cannot yield a valid distribution.
pub fn random_degree_distribution<R: Rng>(
    rng: &mut R,
    max_classes: usize,
    max_degree: u32,
) -> DegreeDistribution<f64> {
    assert!(
        max_degree >= 2,
        "need degrees above 1 to get mean degree > 1"
    );
    assert!(max_classes >= 1);
    loop {
        let mut degrees: Vec<u32> = (1..=max_degree).collect();
        degrees.shuffle(rng);
        let n = rng.gen_range(1..=max_classes).min(degrees.len());
        degrees.truncate(n);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let partial: f64 = probs[..n - 1].iter().sum();
        probs[n - 1] = 1.0 - partial;
        if probs[n - 1] <= 0.0 {
            continue;
        }
        if let Ok(dd) = DegreeDistribution::new(degrees, probs) {
            return dd;
        }
    }
}

/// Random curing profile with rates uniform in [0.05, max_rate].
pub fn random_curing_profile<R: Rng>(
    rng: &mut R,
    classes: usize,
    max_rate: f64,
) -> CuringProfile<f64> {
    assert!(max_rate > 0.05);
    let delta = (0..classes)
        .map(|_| rng.gen_range(0.05..max_rate))
        .collect();
    CuringProfile::new(delta).expect("sampled rates are finite and nonnegative")
}

/// Random instance: a degree distribution and an aligned curing profile.
/// Rates are kept away from zero so the reproduction number is finite.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_classes: usize,
    max_degree: u32,
    max_rate: f64,
) -> (DegreeDistribution<f64>, CuringProfile<f64>) {
    let dd = random_degree_distribution(rng, max_classes, max_degree);
    let cp = random_curing_profile(rng, dd.len(), max_rate);
    (dd, cp)
}

/// Random instance rescaled to be endemic with margin (R = 2 when the
/// raw draw lands at or below R = 1.2).
pub fn endemic_instance<R: Rng>(
    rng: &mut R,
    max_classes: usize,
    max_degree: u32,
) -> (DegreeDistribution<f64>, CuringProfile<f64>) {
    let (dd, cp) = random_instance(rng, max_classes, max_degree, 2.0);
    let q = dd.neighbor_dist();
    let r = crate::dbmf::reproduction_number(&q, &cp);
    if r > 1.2 {
        return (dd, cp);
    }
    // Scaling every rate by s divides R by s; pick s so the result is 2.
    let s = r / 2.0;
    let delta = cp.rates().iter().map(|&d| d * s).collect();
    (
        dd,
        CuringProfile::new(delta).expect("scaled rates stay valid"),
    )
}

/// Per-class costs c_k = u_k / k with u_k uniform in [lo, hi), so that
/// the admissible box [0, 1/c_k] scales with degree.
pub fn random_costs<R: Rng>(rng: &mut R, degrees: &[u32], lo: f64, hi: f64) -> Vec<f64> {
    degrees
        .iter()
        .map(|&k| rng.gen_range(lo..hi) / f64::from(k))
        .collect()
}

/// Uniform random point in the box [0, cap_1] x ... x [0, cap_m].
pub fn random_profile_in_box<R: Rng>(rng: &mut R, caps: &[f64]) -> CuringProfile<f64> {
    let delta = caps.iter().map(|&c| rng.gen_range(0.0..=c)).collect();
    CuringProfile::new(delta).expect("sampled rates are finite and nonnegative")
}
