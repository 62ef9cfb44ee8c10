//! The five subcommands. Each returns the full output text plus an
//! outcome, so diagnostics reach the sink even when the run ends with a
//! nonzero exit code.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use epigame::dbmf;
use epigame::game::GameSpec;
use epigame::netsim::{self, ReplicaOutcome, RNG_ALGORITHM};
use epigame::regular;
use epigame::sampling;
use epigame::weighting::{PropertyCheck, WeightingSpec};

use crate::config::RunConfig;
use crate::output::{csv_row, fmt12, meta};
use crate::{map_lib, CliError, Outcome};

/// Rates at or below this count as "not curing" in structure reports.
const ZERO_TOL: f64 = 1e-9;

fn header(cfg: &RunConfig) -> String {
    let mut buf = String::new();
    meta(&mut buf, "version", env!("CARGO_PKG_VERSION"));
    meta(&mut buf, "config", format!("{:016x}", cfg.hash()));
    buf
}

pub fn endemic(cfg: &RunConfig, verbose: bool) -> Result<(String, Outcome), CliError> {
    let dd = cfg.network()?;
    let cp = cfg.curing(dd.len())?;
    let solver = cfg.solver()?;
    let q = dd.neighbor_dist();
    let r = dbmf::reproduction_number(&q, &cp);
    let st = dbmf::endemic_state(&q, &cp, solver.params.tol_v).map_err(map_lib)?;
    if verbose {
        eprintln!("endemic: v = {} with residual {:e}", st.v, st.residual);
    }
    let mut buf = header(cfg);
    meta(&mut buf, "R", fmt12(r));
    meta(&mut buf, "v", fmt12(st.v));
    meta(&mut buf, "regime", st.regime);
    buf.push_str("degree,delta,x\n");
    for ((&k, &d), &x) in dd.degrees().iter().zip(cp.rates()).zip(&st.x) {
        csv_row(&mut buf, &[k.to_string(), fmt12(d), fmt12(x)]);
    }
    Ok((buf, Outcome::Success))
}

pub fn equilibrium(cfg: &RunConfig, verbose: bool) -> Result<(String, Outcome), CliError> {
    let dd = cfg.network()?;
    let costs = cfg.costs(dd.len())?;
    let weightings = cfg.weightings(dd.len())?;
    let solver = cfg.solver()?;
    let game = GameSpec::new(dd.clone(), costs.clone(), weightings).map_err(map_lib)?;

    let eq = game
        .solve_equilibrium(None, &solver.params)
        .map_err(map_lib)?;
    if verbose {
        eprintln!(
            "equilibrium: {} rounds, last change {:e}",
            eq.rounds, eq.max_change
        );
    }
    let verify = game
        .verify_equilibrium(
            &eq.profile,
            solver.verify_eps,
            solver.verify_grid,
            solver.params.tol_v,
        )
        .map_err(map_lib)?;

    // Structure findings. The first three hold for players weighing
    // true probabilities, so they only apply to identity classes; the
    // last one is the weighted counterpart (curing stays positive no
    // matter the cost).
    let rates = eq.profile.rates();
    let identity_everywhere = game
        .weightings()
        .iter()
        .all(|w| matches!(w, WeightingSpec::Identity));
    let weighted_classes: Vec<usize> = game
        .weightings()
        .iter()
        .enumerate()
        .filter(|(_, w)| !matches!(w, WeightingSpec::Identity))
        .map(|(i, _)| i)
        .collect();
    let expensive_everywhere = dd
        .degrees()
        .iter()
        .zip(&costs)
        .all(|(&k, &c)| c * f64::from(k) >= 1.0);
    let cheap_classes: Vec<usize> = dd
        .degrees()
        .iter()
        .zip(&costs)
        .enumerate()
        .filter(|(_, (&k, &c))| c * f64::from(k) < 1.0)
        .map(|(i, _)| i)
        .collect();
    let homogeneous = costs.windows(2).all(|w| w[0] == w[1]);
    let v_positive = eq.state.v > 0.0;

    let all_zero_status = if identity_everywhere && expensive_everywhere {
        status(rates.iter().all(|&d| d <= ZERO_TOL))
    } else {
        "not-applicable"
    };
    let cheap_cure_status = if identity_everywhere && !cheap_classes.is_empty() && v_positive {
        status(cheap_classes.iter().all(|&i| rates[i] > ZERO_TOL))
    } else {
        "not-applicable"
    };
    let upward_status = if identity_everywhere && homogeneous && v_positive {
        let report = game
            .zero_structure(&eq.profile, ZERO_TOL)
            .map_err(map_lib)?;
        status(report.upward_closed)
    } else {
        "not-applicable"
    };
    let weighted_cure_status = if !weighted_classes.is_empty() && v_positive {
        status(weighted_classes.iter().all(|&i| rates[i] > ZERO_TOL))
    } else {
        "not-applicable"
    };

    let mut buf = header(cfg);
    meta(&mut buf, "converged", eq.converged);
    meta(&mut buf, "rounds", eq.rounds);
    meta(&mut buf, "max_change", fmt12(eq.max_change));
    meta(&mut buf, "v", fmt12(eq.state.v));
    meta(&mut buf, "regime", eq.state.regime);
    meta(&mut buf, "verified", verify.passed);
    meta(&mut buf, "margin", fmt12(verify.max_margin));
    meta(&mut buf, "structure_all_zero", all_zero_status);
    meta(&mut buf, "structure_cheap_classes_cure", cheap_cure_status);
    meta(&mut buf, "structure_zero_set_upward_closed", upward_status);
    meta(
        &mut buf,
        "structure_weighted_classes_cure",
        weighted_cure_status,
    );
    buf.push_str("degree,c,delta,x,cost\n");
    for i in 0..dd.len() {
        csv_row(
            &mut buf,
            &[
                dd.degrees()[i].to_string(),
                fmt12(costs[i]),
                fmt12(rates[i]),
                fmt12(eq.state.x[i]),
                fmt12(eq.costs[i]),
            ],
        );
    }

    let outcome = if !eq.converged {
        Outcome::SolverFailure
    } else if !verify.passed
        || [
            all_zero_status,
            cheap_cure_status,
            upward_status,
            weighted_cure_status,
        ]
        .contains(&"fail")
    {
        Outcome::PropertyFailure
    } else {
        Outcome::Success
    };
    Ok((buf, outcome))
}

pub fn regular_sweep(cfg: &RunConfig, verbose: bool) -> Result<(String, Outcome), CliError> {
    let (d, c_grid) = cfg.regular_block()?;
    let w = cfg.weightings(1)?.remove(0);
    let rows = regular::sweep_cost(d, &w, &c_grid).map_err(map_lib)?;
    if verbose {
        eprintln!("regular: {} grid points on degree {d}", rows.len());
    }
    let mut buf = header(cfg);
    meta(&mut buf, "d", d);
    match w {
        WeightingSpec::Identity => meta(&mut buf, "weighting", "identity"),
        WeightingSpec::Prelec { alpha } => {
            meta(&mut buf, "weighting", "prelec");
            meta(&mut buf, "alpha", fmt12(alpha));
        }
    }
    buf.push_str(
        "c,delta_neutral,x_neutral,cost_neutral,delta_weighted,x_weighted,cost_weighted\n",
    );
    for row in rows {
        csv_row(
            &mut buf,
            &[
                fmt12(row.c),
                fmt12(row.delta_neutral),
                fmt12(row.x_neutral),
                fmt12(row.cost_neutral),
                fmt12(row.delta_weighted),
                fmt12(row.x_weighted),
                fmt12(row.cost_weighted),
            ],
        );
    }
    Ok((buf, Outcome::Success))
}

pub fn simulate(cfg: &RunConfig, verbose: bool) -> Result<(String, Outcome), CliError> {
    let dd = cfg.network()?;
    let cp = cfg.curing(dd.len())?;
    let sim = cfg.sim()?;
    let solver = cfg.solver()?;
    let st = dbmf::endemic_state(&dd.neighbor_dist(), &cp, solver.params.tol_v).map_err(map_lib)?;
    let outcomes =
        netsim::run_ensemble(&dd, &cp, &sim.cfg, sim.n, sim.replicas, sim.seed).map_err(map_lib)?;
    if verbose {
        for (i, o) in outcomes.iter().enumerate() {
            match o.extinction_time {
                Some(t) => eprintln!("replica {i}: extinct at t = {t:.2} ({} events)", o.events),
                None => eprintln!("replica {i}: survived ({} events)", o.events),
            }
        }
    }

    let survivors: Vec<&ReplicaOutcome> = outcomes
        .iter()
        .filter(|o| o.extinction_time.is_none())
        .collect();
    let comparison = if survivors.is_empty() {
        None
    } else {
        Some(netsim::compare_to_dbmf(&dd, &cp, &outcomes).map_err(map_lib)?)
    };
    let extinction_times: Vec<f64> = outcomes.iter().filter_map(|o| o.extinction_time).collect();

    let dbmf_prevalence: f64 = dd.probs().iter().zip(&st.x).map(|(&p, &x)| p * x).sum();

    let mut buf = header(cfg);
    meta(&mut buf, "rng", RNG_ALGORITHM);
    meta(&mut buf, "seed", sim.seed);
    meta(&mut buf, "n", sim.n);
    meta(&mut buf, "replicas", sim.replicas);
    meta(&mut buf, "surviving", survivors.len());
    meta(&mut buf, "dbmf_prevalence", fmt12(dbmf_prevalence));
    match &comparison {
        Some(cmp) => {
            meta(&mut buf, "sim_prevalence", fmt12(cmp.sim_prevalence));
            meta(&mut buf, "max_abs_error", fmt12(cmp.max_abs_error));
        }
        None => {
            meta(&mut buf, "sim_prevalence", fmt12(f64::NAN));
            meta(&mut buf, "max_abs_error", fmt12(f64::NAN));
        }
    }
    if extinction_times.is_empty() {
        meta(&mut buf, "mean_extinction_time", fmt12(f64::NAN));
    } else {
        let mean = extinction_times.iter().sum::<f64>() / extinction_times.len() as f64;
        meta(&mut buf, "mean_extinction_time", fmt12(mean));
    }

    buf.push_str("degree,dbmf_x,sim_x_mean,sim_x_stderr,observations\n");
    for c in 0..dd.len() {
        let values: Vec<f64> = survivors
            .iter()
            .filter(|o| o.nodes_per_class[c] > 0)
            .map(|o| o.prevalence_per_class[c])
            .collect();
        let (mean, stderr) = mean_stderr(&values);
        csv_row(
            &mut buf,
            &[
                dd.degrees()[c].to_string(),
                fmt12(st.x[c]),
                fmt12(mean),
                fmt12(stderr),
                values.len().to_string(),
            ],
        );
    }
    Ok((buf, Outcome::Success))
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, (var / values.len() as f64).sqrt())
}

pub fn check(cfg: &RunConfig, verbose: bool) -> Result<(String, Outcome), CliError> {
    let settings = cfg.check_block()?;
    let w = cfg.weightings(1)?.remove(0);

    let mut rows: Vec<(&str, &str, f64)> = Vec::new();
    let shape = w.shape_check(settings.grid).map_err(map_lib)?;
    let push_shape =
        |rows: &mut Vec<(&str, &str, f64)>, name: &'static str, c: PropertyCheck<f64>| {
            rows.push((name, status(c.passed), c.margin));
        };
    push_shape(
        &mut rows,
        "weighting_strictly_increasing",
        shape.strictly_increasing,
    );
    match w {
        WeightingSpec::Identity => {
            // A linear weighting has no inverse-S curvature to verify.
            rows.push((
                "weighting_unique_derivative_minimum",
                "not-applicable",
                f64::NAN,
            ));
            rows.push((
                "weighting_derivative_dips_below_one",
                "not-applicable",
                f64::NAN,
            ));
        }
        WeightingSpec::Prelec { .. } => {
            push_shape(
                &mut rows,
                "weighting_unique_derivative_minimum",
                shape.unique_deriv_minimum,
            );
            push_shape(
                &mut rows,
                "weighting_derivative_dips_below_one",
                shape.deriv_min_below_one,
            );
        }
    }

    // Monotonicity and convexity of the stationary state in a single
    // curing rate, scanned over random endemic instances.
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut v_first = f64::NEG_INFINITY;
    let mut v_second = f64::INFINITY;
    let mut x_first = f64::NEG_INFINITY;
    let mut x_second = f64::INFINITY;
    for _ in 0..settings.instances {
        let (dd, cp) = sampling::endemic_instance(&mut rng, 8, 8);
        let q = dd.neighbor_dist();
        let idx = rng.gen_range(0..dd.len());
        let k = f64::from(dd.degrees()[idx]);
        let hat = dbmf::critical_curing_rate(&q, &cp, dd.degrees()[idx]).map_err(map_lib)?;
        let top = if hat.is_finite() {
            (1.2 * hat).min(50.0)
        } else {
            6.0
        };
        let points = 33;
        let mut vs = Vec::with_capacity(points);
        let mut xs = Vec::with_capacity(points);
        for i in 0..points {
            let d = top * i as f64 / (points - 1) as f64;
            let v = dbmf::endemic_v(&q, &cp.with_rate(idx, d), 1e-13).map_err(map_lib)?;
            vs.push(v);
            xs.push(if v == 0.0 { 0.0 } else { k * v / (d + k * v) });
        }
        for w in vs.windows(2) {
            v_first = v_first.max(w[1] - w[0]);
        }
        for w in vs.windows(3) {
            v_second = v_second.min(w[2] - 2.0 * w[1] + w[0]);
        }
        for w in xs.windows(2) {
            x_first = x_first.max(w[1] - w[0]);
        }
        for w in xs.windows(3) {
            x_second = x_second.min(w[2] - 2.0 * w[1] + w[0]);
        }
    }
    rows.push(("neighbor_level_monotone", status(v_first <= 1e-10), v_first));
    rows.push(("neighbor_level_convex", status(v_second >= -1e-8), v_second));
    rows.push(("infection_monotone", status(x_first <= 1e-10), x_first));
    rows.push(("infection_convex", status(x_second >= -1e-8), x_second));

    // Infection floor over the budget box, when a threshold is given.
    match settings.z {
        None => rows.push(("budget_box_infection_floor", "not-applicable", f64::NAN)),
        Some(z) => {
            if !(0.0..1.0).contains(&z) {
                return Err(CliError::Config(format!(
                    "[check] z must lie in [0, 1), got {z}"
                )));
            }
            let dd = cfg.network()?;
            let costs = cfg.costs(dd.len())?;
            if costs.windows(2).any(|w| w[0] != w[1]) {
                return Err(CliError::Config(
                    "the infection-floor check needs a homogeneous cost".into(),
                ));
            }
            if costs[0] <= 1.0 / (1.0 - z) {
                return Err(CliError::Config(format!(
                    "the floor only holds for c > 1/(1-z) = {}; got c = {}",
                    1.0 / (1.0 - z),
                    costs[0]
                )));
            }
            let game = GameSpec::uniform(dd, costs, WeightingSpec::Identity).map_err(map_lib)?;
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5EED_F100F);
            let report = game
                .infection_lower_bound(&mut rng, settings.samples, z, 1e-12)
                .map_err(map_lib)?;
            rows.push((
                "budget_box_infection_floor",
                status(report.passed),
                report.min_x - z,
            ));
        }
    }

    if verbose {
        for (name, st, margin) in &rows {
            eprintln!("check {name}: {st} (margin {margin:e})");
        }
    }

    let mut buf = header(cfg);
    meta(&mut buf, "rng", RNG_ALGORITHM);
    meta(&mut buf, "seed", settings.seed);
    meta(&mut buf, "instances", settings.instances);
    meta(&mut buf, "samples", settings.samples);
    buf.push_str("check,status,margin\n");
    let mut failed = false;
    for (name, st, margin) in rows {
        failed |= st == "fail";
        csv_row(&mut buf, &[name.to_string(), st.to_string(), fmt12(margin)]);
    }
    let outcome = if failed {
        Outcome::PropertyFailure
    } else {
        Outcome::Success
    };
    Ok((buf, outcome))
}

fn status(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}
