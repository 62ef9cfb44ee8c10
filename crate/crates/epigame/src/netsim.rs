//! Stochastic SIS on explicit networks, for validating the mean-field
//! layer against something that does not share its assumptions.
//!
//! Pipeline: sample a degree sequence from a [`DegreeDistribution`],
//! wire it into a simple graph with the configuration model, then run
//! an exact event-driven SIS process (exponential clocks: curing at the
//! node's class rate, infection of a susceptible node at `nu` times its
//! number of infected neighbors). Prevalence is time-averaged over
//! `[burn_in, t_max]` as a quasi-stationary estimate and compared to the
//! mean-field stationary state.
//!
//! Everything is deterministic given the master seed; per-replica and
//! per-retry generators are derived by a splitmix64 mix so streams never
//! overlap. This module is f64-only: its accuracy is limited by Monte
//! Carlo noise, not by scalar precision.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dbmf::{self, CuringProfile, DegreeDistribution};
use crate::{Error, Result};

/// Name of the RNG family used for simulations, recorded in outputs so
/// runs can be reproduced byte for byte.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Full-reshuffle attempts before falling back to erasing bad edges.
const MATCHING_RETRIES: usize = 100;

/// The erased fallback may drop at most this fraction of edges.
const MAX_ERASED_FRACTION: f64 = 0.01;

/// Interval (in events) between exhaustive state audits in debug builds.
const AUDIT_EVERY: u64 = 1000;

/// Audits only run on graphs up to this size; they are quadratic-ish.
const AUDIT_MAX_NODES: usize = 200;

/// Derives an independent stream seed from a master seed. This is the
/// splitmix64 finalizer applied to the master xored with a
/// golden-ratio multiple of the stream index.
pub fn mix_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An undirected simple graph in compressed adjacency form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Graph {
    /// Builds from an edge list over nodes `0..n`. Self-loops and
    /// duplicate edges are rejected.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut degree = vec![0usize; n];
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at node {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidInput(format!("duplicate edge ({a}, {b})")));
            }
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut neighbors = vec![0u32; 2 * edges.len()];
        let mut cursor = offsets[..n].to_vec();
        for &(a, b) in edges {
            neighbors[cursor[a as usize]] = b;
            cursor[a as usize] += 1;
            neighbors[cursor[b as usize]] = a;
            cursor[b as usize] += 1;
        }
        Ok(Self { offsets, neighbors })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count())
            .map(|i| self.degree(i))
            .max()
            .unwrap_or(0)
    }
}

/// Draws `n` node degrees i.i.d. from the distribution, then repairs an
/// odd total so the sequence can be wired into a graph.
///
/// The repair bumps one random node's degree upward by the smallest odd
/// amount available: to the next larger degree class when that jump is
/// odd, otherwise by one (which may fall between classes; class
/// bookkeeping later maps such strays to the nearest class).
pub fn sample_degree_sequence<R: Rng>(
    rng: &mut R,
    dd: &DegreeDistribution<f64>,
    n: usize,
) -> Result<Vec<u32>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two nodes, got {n}"
        )));
    }
    let classes = dd.degrees();
    let probs = dd.probs();
    let mut degrees = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = classes[classes.len() - 1];
        for (&k, &p) in classes.iter().zip(probs) {
            acc += p;
            if u < acc {
                chosen = k;
                break;
            }
        }
        degrees.push(chosen);
    }
    if degrees.iter().map(|&k| u64::from(k)).sum::<u64>() % 2 == 1 {
        let idx = rng.gen_range(0..n);
        let k = degrees[idx];
        let next = classes.iter().copied().find(|&c| c > k);
        degrees[idx] = match next {
            Some(c) if (c - k) % 2 == 1 => c,
            _ => k + 1,
        };
    }
    if degrees.iter().any(|&k| k as usize >= n) {
        return Err(Error::InvalidInput(format!(
            "a degree reached {n} or more; a simple graph on {n} nodes cannot realize it"
        )));
    }
    Ok(degrees)
}

/// Wires a degree sequence into a simple graph by stub matching.
///
/// The stub list is reshuffled from scratch until the matching has no
/// self-loops or duplicate edges, up to [`MATCHING_RETRIES`] times;
/// after that the offending edges of the last matching are erased,
/// provided they amount to at most 1% of all edges.
pub fn configuration_model<R: Rng>(rng: &mut R, degrees: &[u32]) -> Result<Graph> {
    let n = degrees.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two nodes".into()));
    }
    let stub_count: u64 = degrees.iter().map(|&k| u64::from(k)).sum();
    if stub_count % 2 == 1 {
        return Err(Error::InvalidInput("degree sum must be even".into()));
    }
    if degrees.iter().any(|&k| k as usize >= n) {
        return Err(Error::InvalidInput(
            "a degree of n-1 or more cannot be realized as a simple graph".into(),
        ));
    }
    let mut stubs: Vec<u32> = Vec::with_capacity(stub_count as usize);
    for (node, &k) in degrees.iter().enumerate() {
        for _ in 0..k {
            stubs.push(node as u32);
        }
    }

    let try_match = |stubs: &[u32]| -> std::result::Result<Vec<(u32, u32)>, Vec<(u32, u32)>> {
        let mut edges = Vec::with_capacity(stubs.len() / 2);
        let mut seen = HashSet::with_capacity(stubs.len() / 2);
        let mut clean = true;
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                clean = false;
                continue;
            }
            edges.push((a, b));
        }
        if clean {
            Ok(edges)
        } else {
            Err(edges)
        }
    };

    let mut last_partial = None;
    for _ in 0..MATCHING_RETRIES {
        stubs.shuffle(rng);
        match try_match(&stubs) {
            Ok(edges) => return Graph::from_edges(n, &edges),
            Err(partial) => last_partial = Some(partial),
        }
    }
    let kept = last_partial.expect("at least one attempt ran");
    let total = (stub_count / 2) as usize;
    let erased = total - kept.len();
    if (erased as f64) > MAX_ERASED_FRACTION * (total as f64) {
        return Err(Error::Generation(format!(
            "stub matching kept failing and erasing would drop {erased} of {total} edges"
        )));
    }
    Graph::from_edges(n, &kept)
}

/// Index of the degree class nearest to `k` (ties toward the smaller
/// class). Degree classes must be sorted ascending and nonempty.
pub fn class_for_degree(class_degrees: &[u32], k: u32) -> usize {
    debug_assert!(!class_degrees.is_empty());
    match class_degrees.binary_search(&k) {
        Ok(i) => i,
        Err(0) => 0,
        Err(ins) if ins == class_degrees.len() => class_degrees.len() - 1,
        Err(ins) => {
            let below = class_degrees[ins - 1];
            let above = class_degrees[ins];
            if k - below <= above - k {
                ins - 1
            } else {
                ins
            }
        }
    }
}

/// Parameters of one stochastic SIS run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Per-edge infection rate.
    pub nu: f64,
    /// End of the simulated window.
    pub t_max: f64,
    /// Prevalence is averaged over [burn_in, t_max].
    pub burn_in: f64,
    /// Each node starts infected independently with this probability
    /// (at least one node is always infected).
    pub initial_infected_fraction: f64,
    /// Extra attempts (with doubled seeding fraction and a fresh derived
    /// seed) when the epidemic dies before the burn-in ends.
    pub max_retries: u32,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.nu.is_finite() || self.nu <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "infection rate must be positive, got {}",
                self.nu
            )));
        }
        if !self.t_max.is_finite() || self.t_max <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "time horizon must be positive, got {}",
                self.t_max
            )));
        }
        if !self.burn_in.is_finite() || self.burn_in < 0.0 || self.burn_in >= self.t_max {
            return Err(Error::InvalidInput(format!(
                "burn-in must lie in [0, t_max), got {}",
                self.burn_in
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_infected_fraction)
            || self.initial_infected_fraction == 0.0
        {
            return Err(Error::InvalidInput(format!(
                "initial infected fraction must lie in (0, 1], got {}",
                self.initial_infected_fraction
            )));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            t_max: 200.0,
            burn_in: 100.0,
            // Start well inside the endemic basin so the burn-in spends
            // its budget settling rather than escaping extinction.
            initial_infected_fraction: 0.5,
            max_retries: 3,
        }
    }
}

/// What one replica measured.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutcome {
    /// Time-averaged infected fraction per degree class (NaN for a
    /// class no sampled node fell into).
    pub prevalence_per_class: Vec<f64>,
    /// Time-averaged infected fraction of the whole network.
    pub prevalence: f64,
    /// Nodes assigned to each class in the realized graph.
    pub nodes_per_class: Vec<usize>,
    /// Set when the epidemic died, at the time it died.
    pub extinction_time: Option<f64>,
    /// Whether the measured attempt was still alive at the end of the
    /// burn-in (if not, every retry died early too).
    pub survived_burn_in: bool,
    pub events: u64,
    /// Attempts used (1 = no retries needed).
    pub attempts: u32,
}

struct RunStats {
    class_integral: Vec<f64>,
    extinction_time: Option<f64>,
    events: u64,
}

struct SisState<'a> {
    graph: &'a Graph,
    class_of: &'a [usize],
    delta_class: &'a [f64],
    nu: f64,
    infected: Vec<bool>,
    /// Infected-neighbor count, maintained for every node.
    inf_nb: Vec<u32>,
    /// Susceptible nodes, bucketed by infected-neighbor count.
    sus_buckets: Vec<Vec<u32>>,
    /// Infected nodes, bucketed by class.
    inf_buckets: Vec<Vec<u32>>,
    /// Position of each node inside its current bucket.
    slot: Vec<u32>,
    inf_count_class: Vec<u64>,
}

impl<'a> SisState<'a> {
    fn new(
        graph: &'a Graph,
        class_of: &'a [usize],
        delta_class: &'a [f64],
        nu: f64,
        initially_infected: &[bool],
    ) -> Self {
        let n = graph.node_count();
        let classes = delta_class.len();
        let mut st = Self {
            graph,
            class_of,
            delta_class,
            nu,
            infected: initially_infected.to_vec(),
            inf_nb: vec![0; n],
            sus_buckets: vec![Vec::new(); graph.max_degree() + 1],
            inf_buckets: vec![Vec::new(); classes],
            slot: vec![0; n],
            inf_count_class: vec![0; classes],
        };
        for node in 0..n {
            st.inf_nb[node] = st
                .graph
                .neighbors(node)
                .iter()
                .filter(|&&nb| st.infected[nb as usize])
                .count() as u32;
        }
        for node in 0..n {
            if st.infected[node] {
                st.push_inf(node as u32);
                st.inf_count_class[class_of[node]] += 1;
            } else {
                st.push_sus(node as u32, st.inf_nb[node] as usize);
            }
        }
        st
    }

    fn push_sus(&mut self, node: u32, m: usize) {
        self.slot[node as usize] = self.sus_buckets[m].len() as u32;
        self.sus_buckets[m].push(node);
    }

    fn remove_sus(&mut self, node: u32, m: usize) {
        let pos = self.slot[node as usize] as usize;
        let bucket = &mut self.sus_buckets[m];
        bucket.swap_remove(pos);
        if let Some(&moved) = bucket.get(pos) {
            self.slot[moved as usize] = pos as u32;
        }
    }

    fn push_inf(&mut self, node: u32) {
        let c = self.class_of[node as usize];
        self.slot[node as usize] = self.inf_buckets[c].len() as u32;
        self.inf_buckets[c].push(node);
    }

    fn remove_inf(&mut self, node: u32) {
        let c = self.class_of[node as usize];
        let pos = self.slot[node as usize] as usize;
        let bucket = &mut self.inf_buckets[c];
        bucket.swap_remove(pos);
        if let Some(&moved) = bucket.get(pos) {
            self.slot[moved as usize] = pos as u32;
        }
    }

    fn recovery_rate(&self) -> f64 {
        self.delta_class
            .iter()
            .zip(&self.inf_buckets)
            .map(|(&d, b)| d * b.len() as f64)
            .sum()
    }

    fn infection_rate(&self) -> f64 {
        self.nu
            * self
                .sus_buckets
                .iter()
                .enumerate()
                .map(|(m, b)| (m * b.len()) as f64)
                .sum::<f64>()
    }

    fn total_infected(&self) -> u64 {
        self.inf_count_class.iter().sum()
    }

    fn recover(&mut self, node: u32) {
        self.remove_inf(node);
        self.infected[node as usize] = false;
        self.inf_count_class[self.class_of[node as usize]] -= 1;
        for i in self.graph.offsets[node as usize]..self.graph.offsets[node as usize + 1] {
            let nb = self.graph.neighbors[i];
            let old = self.inf_nb[nb as usize] as usize;
            self.inf_nb[nb as usize] -= 1;
            if !self.infected[nb as usize] {
                self.remove_sus(nb, old);
                self.push_sus(nb, old - 1);
            }
        }
        self.push_sus(node, self.inf_nb[node as usize] as usize);
    }

    fn infect(&mut self, node: u32) {
        self.remove_sus(node, self.inf_nb[node as usize] as usize);
        self.infected[node as usize] = true;
        self.inf_count_class[self.class_of[node as usize]] += 1;
        self.push_inf(node);
        for i in self.graph.offsets[node as usize]..self.graph.offsets[node as usize + 1] {
            let nb = self.graph.neighbors[i];
            let old = self.inf_nb[nb as usize] as usize;
            self.inf_nb[nb as usize] += 1;
            if !self.infected[nb as usize] {
                self.remove_sus(nb, old);
                self.push_sus(nb, old + 1);
            }
        }
    }

    /// Picks an infected node with probability proportional to its
    /// class curing rate. `target` is uniform in [0, recovery_rate).
    fn pick_recovery<R: Rng>(&self, rng: &mut R, mut target: f64) -> u32 {
        let mut fallback = None;
        for (c, bucket) in self.inf_buckets.iter().enumerate() {
            let rate = self.delta_class[c] * bucket.len() as f64;
            if rate <= 0.0 {
                continue;
            }
            fallback = Some(c);
            if target < rate {
                return bucket[rng.gen_range(0..bucket.len())];
            }
            target -= rate;
        }
        // Rounding pushed the target past the last positive-rate class.
        let c = fallback.expect("recovery event with zero recovery rate");
        self.inf_buckets[c][rng.gen_range(0..self.inf_buckets[c].len())]
    }

    /// Picks a susceptible node with probability proportional to its
    /// infected-neighbor count. `target` is uniform in [0, infection_rate).
    fn pick_infection<R: Rng>(&self, rng: &mut R, mut target: f64) -> u32 {
        let mut fallback = None;
        for (m, bucket) in self.sus_buckets.iter().enumerate() {
            let rate = self.nu * (m * bucket.len()) as f64;
            if rate <= 0.0 {
                continue;
            }
            fallback = Some(m);
            if target < rate {
                return bucket[rng.gen_range(0..bucket.len())];
            }
            target -= rate;
        }
        let m = fallback.expect("infection event with zero infection rate");
        self.sus_buckets[m][rng.gen_range(0..self.sus_buckets[m].len())]
    }

    /// Exhaustive consistency audit used in debug builds on small graphs.
    fn audit(&self) {
        let n = self.graph.node_count();
        for node in 0..n {
            let recount = self
                .graph
                .neighbors(node)
                .iter()
                .filter(|&&nb| self.infected[nb as usize])
                .count() as u32;
            assert_eq!(recount, self.inf_nb[node], "stale neighbor count at {node}");
            let (bucket, pos) = if self.infected[node] {
                (
                    &self.inf_buckets[self.class_of[node]],
                    self.slot[node] as usize,
                )
            } else {
                (
                    &self.sus_buckets[self.inf_nb[node] as usize],
                    self.slot[node] as usize,
                )
            };
            assert_eq!(bucket[pos], node as u32, "bucket slot mismatch at {node}");
        }
        let by_class: Vec<u64> = self.inf_buckets.iter().map(|b| b.len() as u64).collect();
        assert_eq!(by_class, self.inf_count_class);
    }
}

fn gillespie<R: Rng>(
    graph: &Graph,
    class_of: &[usize],
    delta_class: &[f64],
    cfg: &SimConfig,
    initially_infected: &[bool],
    rng: &mut R,
) -> RunStats {
    let classes = delta_class.len();
    let mut st = SisState::new(graph, class_of, delta_class, cfg.nu, initially_infected);
    let mut integral = vec![0.0; classes];
    let mut t = 0.0f64;
    let mut events = 0u64;
    let audit_enabled = cfg!(debug_assertions) && graph.node_count() <= AUDIT_MAX_NODES;

    let extinction_time = loop {
        let rec = st.recovery_rate();
        let inf = st.infection_rate();
        let total = rec + inf;
        if total <= 0.0 {
            break if st.total_infected() == 0 {
                Some(t)
            } else {
                // No curing anywhere and no susceptible reachable:
                // the state is absorbing with infection persisting.
                let lo = t.max(cfg.burn_in);
                if cfg.t_max > lo {
                    for (c, acc) in integral.iter_mut().enumerate() {
                        *acc += st.inf_count_class[c] as f64 * (cfg.t_max - lo);
                    }
                }
                None
            };
        }
        let u: f64 = rng.gen();
        let t_next = t + (-(1.0 - u).ln()) / total;
        let window_lo = t.max(cfg.burn_in);
        let window_hi = t_next.min(cfg.t_max);
        if window_hi > window_lo {
            for (c, acc) in integral.iter_mut().enumerate() {
                *acc += st.inf_count_class[c] as f64 * (window_hi - window_lo);
            }
        }
        if t_next >= cfg.t_max {
            break None;
        }
        t = t_next;
        if rng.gen::<f64>() * total < rec {
            let target = rng.gen::<f64>() * rec;
            let node = st.pick_recovery(rng, target);
            st.recover(node);
        } else {
            let target = rng.gen::<f64>() * inf;
            let node = st.pick_infection(rng, target);
            st.infect(node);
        }
        events += 1;
        if audit_enabled && events % AUDIT_EVERY == 0 {
            st.audit();
        }
    };

    RunStats {
        class_integral: integral,
        extinction_time,
        events,
    }
}

/// Runs one replica end to end: sample a graph, seed an initial
/// infection, simulate, and retry with a denser seeding (and a fresh
/// derived seed) if the epidemic dies before the burn-in ends.
pub fn simulate_replica(
    dd: &DegreeDistribution<f64>,
    cp: &CuringProfile<f64>,
    cfg: &SimConfig,
    n: usize,
    seed: u64,
) -> Result<ReplicaOutcome> {
    cfg.validate()?;
    if cp.len() != dd.len() {
        return Err(Error::InvalidInput(format!(
            "curing profile has {} classes but the distribution has {}",
            cp.len(),
            dd.len()
        )));
    }
    let classes = dd.degrees();
    let delta_class: Vec<f64> = cp.rates().to_vec();
    let mut last = None;
    let attempts_total = cfg.max_retries + 1;
    for attempt in 0..attempts_total {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::from(attempt)));
        let degrees = sample_degree_sequence(&mut rng, dd, n)?;
        let graph = configuration_model(&mut rng, &degrees)?;
        let class_of: Vec<usize> = (0..n)
            .map(|i| class_for_degree(classes, graph.degree(i) as u32))
            .collect();
        let mut nodes_per_class = vec![0usize; classes.len()];
        for &c in &class_of {
            nodes_per_class[c] += 1;
        }

        let fraction = (cfg.initial_infected_fraction * f64::powi(2.0, attempt as i32)).min(1.0);
        let mut infected: Vec<bool> = (0..n).map(|_| rng.gen_bool(fraction)).collect();
        if infected.iter().all(|&i| !i) {
            let lucky = rng.gen_range(0..n);
            infected[lucky] = true;
        }

        let stats = gillespie(&graph, &class_of, &delta_class, cfg, &infected, &mut rng);
        let window = cfg.t_max - cfg.burn_in;
        let prevalence_per_class: Vec<f64> = stats
            .class_integral
            .iter()
            .zip(&nodes_per_class)
            .map(|(&acc, &cnt)| {
                if cnt == 0 {
                    f64::NAN
                } else {
                    acc / (window * cnt as f64)
                }
            })
            .collect();
        let total_integral: f64 = stats.class_integral.iter().sum();
        let survived_burn_in = stats.extinction_time.map_or(true, |te| te >= cfg.burn_in);
        let outcome = ReplicaOutcome {
            prevalence: total_integral / (window * n as f64),
            prevalence_per_class,
            nodes_per_class,
            extinction_time: stats.extinction_time,
            survived_burn_in,
            events: stats.events,
            attempts: attempt + 1,
        };
        if outcome.survived_burn_in {
            return Ok(outcome);
        }
        last = Some(outcome);
    }
    Ok(last.expect("at least one attempt ran"))
}

/// Runs independent replicas with seeds derived from the master seed.
pub fn run_ensemble(
    dd: &DegreeDistribution<f64>,
    cp: &CuringProfile<f64>,
    cfg: &SimConfig,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<ReplicaOutcome>> {
    if replicas == 0 {
        return Err(Error::InvalidInput("need at least one replica".into()));
    }
    (0..replicas)
        .map(|r| simulate_replica(dd, cp, cfg, n, mix_seed(seed, 0x5EED_0000 + r as u64)))
        .collect()
}

/// Simulation ensemble versus the mean-field stationary state.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// Mean-field stationary infection probability per class.
    pub dbmf_x: Vec<f64>,
    /// Node-weighted simulated prevalence per class across surviving
    /// replicas (NaN when no surviving replica had the class).
    pub sim_x: Vec<f64>,
    /// Mean-field overall prevalence (degree-distribution average).
    pub dbmf_prevalence: f64,
    /// Node-weighted overall simulated prevalence.
    pub sim_prevalence: f64,
    /// Largest per-class |sim - dbmf| over classes that were observed.
    pub max_abs_error: f64,
    /// Replicas that reached t_max without dying.
    pub surviving: usize,
}

/// Aggregates surviving replicas and compares them to the mean-field
/// prediction. Fails if every replica died.
pub fn compare_to_dbmf(
    dd: &DegreeDistribution<f64>,
    cp: &CuringProfile<f64>,
    outcomes: &[ReplicaOutcome],
) -> Result<ComparisonReport> {
    let state = dbmf::endemic_state(&dd.neighbor_dist(), cp, dbmf::DEFAULT_V_TOL)?;
    let survivors: Vec<&ReplicaOutcome> = outcomes
        .iter()
        .filter(|o| o.extinction_time.is_none())
        .collect();
    if survivors.is_empty() {
        return Err(Error::Domain(
            "every replica went extinct; there is no quasi-stationary prevalence to compare".into(),
        ));
    }
    let classes = dd.len();
    let mut weighted = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    let mut total_weighted = 0.0;
    let mut total_nodes = 0usize;
    for o in &survivors {
        for c in 0..classes {
            if o.nodes_per_class[c] > 0 {
                weighted[c] += o.prevalence_per_class[c] * o.nodes_per_class[c] as f64;
                counts[c] += o.nodes_per_class[c];
            }
        }
        let n: usize = o.nodes_per_class.iter().sum();
        total_weighted += o.prevalence * n as f64;
        total_nodes += n;
    }
    let sim_x: Vec<f64> = weighted
        .iter()
        .zip(&counts)
        .map(|(&w, &c)| if c == 0 { f64::NAN } else { w / c as f64 })
        .collect();
    let mut max_abs_error: f64 = 0.0;
    for c in 0..classes {
        if counts[c] > 0 {
            max_abs_error = max_abs_error.max((sim_x[c] - state.x[c]).abs());
        }
    }
    let dbmf_prevalence = dd.probs().iter().zip(&state.x).map(|(&p, &x)| p * x).sum();
    Ok(ComparisonReport {
        dbmf_x: state.x.clone(),
        sim_x,
        dbmf_prevalence,
        sim_prevalence: total_weighted / total_nodes as f64,
        max_abs_error,
        surviving: survivors.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_mixing_is_stable_and_spreads() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        let c = mix_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix_seed(42, 0));
    }

    #[test]
    fn graph_construction_validates_edges() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.neighbors(0), &[1]);
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn degree_sequences_have_even_sums() {
        let dd = DegreeDistribution::new(vec![1, 3], vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut repaired = 0;
        for _ in 0..300 {
            let seq = sample_degree_sequence(&mut rng, &dd, 11).unwrap();
            let sum: u64 = seq.iter().map(|&k| u64::from(k)).sum();
            assert_eq!(sum % 2, 0);
            // The repair may only introduce degrees 2 (1+1) or 4 (3+1)
            // beyond the two classes.
            for &k in &seq {
                assert!(matches!(k, 1..=4));
            }
            if seq.iter().any(|&k| k == 2 || k == 4) {
                repaired += 1;
            }
        }
        assert!(repaired > 0, "parity repair never exercised");
    }

    #[test]
    fn configuration_model_realizes_regular_sequences() {
        // Degree 3 keeps the per-shuffle success rate high enough that
        // the erased fallback is effectively unreachable.
        let degrees = vec![3u32; 100];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = configuration_model(&mut rng, &degrees).unwrap();
        assert_eq!(g.node_count(), 100);
        for node in 0..100 {
            assert_eq!(g.degree(node), 3);
        }
    }

    #[test]
    fn configuration_model_erases_when_matching_keeps_failing() {
        // Dense heterogeneous sequences almost never match cleanly; the
        // fallback must deliver a simple graph missing at most 1% of
        // edges rather than erroring out.
        let dd = DegreeDistribution::new(vec![2, 6], vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = sample_degree_sequence(&mut rng, &dd, 800).unwrap();
        let total: u64 = seq.iter().map(|&k| u64::from(k)).sum();
        let g = configuration_model(&mut rng, &seq).unwrap();
        let missing = (total / 2) as usize - g.edge_count();
        assert!(missing <= (total / 2) as usize / 100, "missing = {missing}");
    }

    #[test]
    fn configuration_model_is_deterministic() {
        let dd = DegreeDistribution::new(vec![2, 5], vec![0.6, 0.4]).unwrap();
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let seq = sample_degree_sequence(&mut rng, &dd, 60).unwrap();
            configuration_model(&mut rng, &seq).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn configuration_model_rejects_odd_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(configuration_model(&mut rng, &[3, 2, 2]).is_err());
        assert!(configuration_model(&mut rng, &[3, 3]).is_err());
    }

    #[test]
    fn degree_classes_map_to_nearest() {
        let classes = [1u32, 3, 8];
        assert_eq!(class_for_degree(&classes, 1), 0);
        assert_eq!(
            class_for_degree(&classes, 2),
            0,
            "tie goes to the smaller class"
        );
        assert_eq!(class_for_degree(&classes, 3), 1);
        assert_eq!(class_for_degree(&classes, 5), 1);
        assert_eq!(class_for_degree(&classes, 6), 2);
        assert_eq!(class_for_degree(&classes, 40), 2);
    }

    #[test]
    fn sim_config_validation() {
        let ok = SimConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SimConfig {
            nu: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            t_max: -1.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            burn_in: 300.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            initial_infected_fraction: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            initial_infected_fraction: 1.5,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn replicas_are_deterministic_given_the_seed() {
        let dd = DegreeDistribution::regular(3).unwrap();
        let cp = CuringProfile::uniform(0.75, 1).unwrap();
        let cfg = SimConfig {
            t_max: 30.0,
            burn_in: 10.0,
            ..SimConfig::default()
        };
        let a = simulate_replica(&dd, &cp, &cfg, 150, 77).unwrap();
        let b = simulate_replica(&dd, &cp, &cfg, 150, 77).unwrap();
        assert_eq!(a, b);
        let c = simulate_replica(&dd, &cp, &cfg, 150, 78).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn supercritical_prevalence_sits_near_the_mean_field_level() {
        // 3-regular with delta = 0.75, nu = 1: mean-field stationary
        // level is 0.75; the exact process on a finite quenched graph
        // sits somewhat below. The graph is small enough (n <= 200) that
        // debug builds run the exhaustive state audits during the run.
        let dd = DegreeDistribution::regular(3).unwrap();
        let cp = CuringProfile::uniform(0.75, 1).unwrap();
        let cfg = SimConfig {
            t_max: 60.0,
            burn_in: 30.0,
            ..SimConfig::default()
        };
        let outcomes = run_ensemble(&dd, &cp, &cfg, 200, 3, 2024).unwrap();
        let report = compare_to_dbmf(&dd, &cp, &outcomes).unwrap();
        assert_eq!(report.surviving, 3);
        assert!((report.dbmf_prevalence - 0.75).abs() < 1e-12);
        assert!(
            (report.sim_prevalence - 0.75).abs() < 0.15,
            "sim = {}",
            report.sim_prevalence
        );
        for o in &outcomes {
            assert!(o.survived_burn_in);
            assert!(o.events > 1000);
        }
    }

    #[test]
    fn subcritical_epidemics_die_out() {
        // 3-regular with delta = 4: reproduction number 0.75.
        let dd = DegreeDistribution::regular(3).unwrap();
        let cp = CuringProfile::uniform(4.0, 1).unwrap();
        let cfg = SimConfig {
            t_max: 100.0,
            burn_in: 50.0,
            ..SimConfig::default()
        };
        let o = simulate_replica(&dd, &cp, &cfg, 150, 5).unwrap();
        assert!(!o.survived_burn_in);
        assert_eq!(o.attempts, cfg.max_retries + 1, "every retry should die");
        let te = o.extinction_time.expect("extinct");
        assert!(te < 50.0, "extinction at {te}");
        assert!(compare_to_dbmf(&dd, &cp, &[o]).is_err());
    }

    #[test]
    fn two_class_simulation_tracks_per_class_levels() {
        let dd = DegreeDistribution::new(vec![2, 6], vec![0.5, 0.5]).unwrap();
        let cp = CuringProfile::new(vec![0.8, 0.8]).unwrap();
        let cfg = SimConfig {
            t_max: 80.0,
            burn_in: 40.0,
            ..SimConfig::default()
        };
        let outcomes = run_ensemble(&dd, &cp, &cfg, 600, 2, 31).unwrap();
        let report = compare_to_dbmf(&dd, &cp, &outcomes).unwrap();
        // High-degree nodes are infected more often, in both worlds.
        assert!(report.dbmf_x[1] > report.dbmf_x[0]);
        assert!(report.sim_x[1] > report.sim_x[0]);
        assert!(
            report.max_abs_error < 0.15,
            "error = {}",
            report.max_abs_error
        );
    }

    #[test]
    fn zero_curing_absorbs_at_full_infection() {
        let dd = DegreeDistribution::regular(3).unwrap();
        let cp = CuringProfile::uniform(0.0, 1).unwrap();
        let cfg = SimConfig {
            t_max: 50.0,
            burn_in: 25.0,
            ..SimConfig::default()
        };
        let o = simulate_replica(&dd, &cp, &cfg, 100, 12).unwrap();
        assert!(o.survived_burn_in);
        assert!(o.extinction_time.is_none());
        // Everyone ends up infected and stays there.
        assert!(
            (o.prevalence - 1.0).abs() < 0.05,
            "prevalence = {}",
            o.prevalence
        );
    }
}
