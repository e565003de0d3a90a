//! One function per experiment kind. Each returns scalar results, named
//! tables and pass/fail checks; writing them out is left to `output`.

use anyhow::{anyhow, Context};
use gibbsbd_core::coupling::{contraction_rate, fitted_contraction_rate, DisagreementSampler};
use gibbsbd_core::dynamics::Sampler;
use gibbsbd_core::gibbs::{gnz_residual, partition_function, GnzStatistic, PartitionMode};
use gibbsbd_core::oracle::{compare_to_simulation, discretization_term, DiscretizedInstance};
use gibbsbd_core::percolation::{
    non_increasing_within, ordered_hitting_check, spatial_mixing_experiment, SpatialMixingRow, WindowPolicy,
};
use gibbsbd_core::potential::{threshold_report, weak_temperedness_constant};
use gibbsbd_core::stats::{wilson_interval, Estimate, Welford};
use gibbsbd_core::{
    exact_stationary, run_percolation, simulate_coupled, BirthDeathSpec, BoxGrid, BoxRegion, GibbsSpec, PointConfiguration, ReplicaRng,
    ReplicaRunner,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::stats::chi_square_p_value;

/// A named table of rows; rendered as CSV, JSON or JSON lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| (*c).into()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.into(), passed, detail }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub kind: ExperimentKind,
    pub results: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Per-replica dumps, written as JSON lines when requested.
    pub samples: Vec<Value>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn estimate_json(e: &Estimate) -> Value {
    json!({ "mean": e.mean, "se": e.se, "samples": e.samples })
}

fn points_json(eta: &PointConfiguration) -> Value {
    Value::Array(eta.points().map(|p| json!(p)).collect())
}

fn configuration(dim: usize, points: &Option<Vec<Vec<f64>>>) -> anyhow::Result<PointConfiguration> {
    Ok(PointConfiguration::from_points(dim, points.clone().unwrap_or_default())?)
}

/// Runs a validated, resolved config.
pub fn execute<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Outcome> {
    let kind = config.kind();
    let (results, checks, tables, samples) = match kind {
        ExperimentKind::Threshold => threshold(config)?,
        ExperimentKind::Simulate => simulate(config, runner)?,
        ExperimentKind::Couple => couple(config, runner)?,
        ExperimentKind::Percolate => percolate(config, runner)?,
        ExperimentKind::SpatialMixing => spatial_mixing(config, runner)?,
        ExperimentKind::GnzCheck => gnz_check(config, runner)?,
        ExperimentKind::Oracle => oracle(config, runner)?,
        ExperimentKind::Partition => partition(config)?,
    };
    Ok(Outcome { kind, results, checks, tables, samples })
}

type Parts = (Value, Vec<Check>, Vec<Table>, Vec<Value>);

fn gibbs_spec(config: &ExperimentConfig, second: bool) -> anyhow::Result<GibbsSpec> {
    let potential = config.potential_spec();
    let region = config.region_box();
    let block = if second { config.boundary2.as_ref() } else { config.boundary.as_ref() };
    let boundary = match block {
        Some(b) => b.build(&region, &potential, config.seed(), u64::from(second)).context("building the boundary")?,
        None => PointConfiguration::empty(region.dim()),
    };
    Ok(GibbsSpec::new(config.lambda(), potential, region, boundary)?)
}

fn threshold(config: &ExperimentConfig) -> anyhow::Result<Parts> {
    let phi = config.potential_spec();
    let est = weak_temperedness_constant(&phi, config.tolerance().quadrature, None)?;
    let r = threshold_report(&phi, &est);
    let mut results = json!({
        "potential": phi.kind_name(),
        "local_stability": phi.local_stability(),
        "range": phi.range(),
        "c_hat": r.c_hat,
        "c_full": r.c_full,
        "abs_error": r.abs_error,
        "lambda_star": r.lambda_star,
        "lambda_penrose_ruelle": r.lambda_penrose_ruelle,
        "improvement": r.lambda_star / r.lambda_penrose_ruelle,
    });
    if let Some(lambda) = config.lambda {
        let delta = 1.0 - lambda * phi.local_stability().exp() * est.c_hat_upper();
        results["lambda"] = json!(lambda);
        results["delta"] = json!(delta);
        results["below_threshold"] = json!(lambda < r.lambda_star);
    }
    Ok((results, Vec::new(), Vec::new(), Vec::new()))
}

fn simulate<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Parts> {
    let spec = gibbs_spec(config, false)?;
    let bd = BirthDeathSpec::new(spec);
    let start = configuration(bd.gibbs().dim(), &config.start)?;
    bd.check_start(&start)?;
    let times = config.times();
    let seed = config.seed();
    let t_end = config.t_end();
    let runs = runner.run(config.replicas(), |i| {
        let mut rng = ReplicaRng::new(seed, i);
        let mut sampler = Sampler::new(times.clone(), |s: &PointConfiguration| s.count());
        let summary = bd.simulate(&start, t_end, &mut rng, &mut sampler)?;
        Ok::<_, gibbsbd_core::Error>((sampler.into_values(), summary))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new("counts", &["t", "mean_count", "se", "replicas"]);
    for (j, &t) in times.iter().enumerate() {
        let w: Welford = runs.iter().map(|(v, _)| v[j] as f64).collect();
        let e = w.estimate();
        table.push(vec![json!(t), json!(e.mean), json!(e.se), json!(e.samples)]);
    }
    let mean = |f: &dyn Fn(&gibbsbd_core::dynamics::RunSummary) -> u64| runs.iter().map(|(_, s)| f(s) as f64).sum::<f64>() / runs.len() as f64;
    let results = json!({
        "proposal_rate": bd.proposal_rate(),
        "mean_births": mean(&|s| s.births),
        "mean_deaths": mean(&|s| s.deaths),
        "mean_rejected": mean(&|s| s.rejected),
    });
    let samples = if config.output.as_ref().is_some_and(|o| o.samples) {
        runs.iter().enumerate().map(|(i, (_, s))| json!({ "replica": i, "points": points_json(&s.final_state) })).collect()
    } else {
        Vec::new()
    };
    Ok((results, Vec::new(), vec![table], samples))
}

fn couple<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Parts> {
    let first = BirthDeathSpec::new(gibbs_spec(config, false)?);
    let second = BirthDeathSpec::new(gibbs_spec(config, true)?);
    let dim = first.gibbs().dim();
    let eta1 = configuration(dim, &config.start)?;
    let eta2 = configuration(dim, &config.start2)?;
    first.check_start(&eta1)?;
    second.check_start(&eta2)?;
    let times = config.times();
    let seed = config.seed();
    let t_end = config.t_end();
    let runs = runner.run(config.replicas(), |i| {
        let mut rng = ReplicaRng::new(seed, i);
        let mut sampler = DisagreementSampler::new(times.clone());
        let summary = simulate_coupled(&first, &second, &eta1, &eta2, t_end, &mut rng, &mut sampler)?;
        Ok::<_, gibbsbd_core::Error>((sampler, summary))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let tol = config.tolerance();
    let est = weak_temperedness_constant(first.gibbs().potential(), tol.quadrature, None)?;
    let delta = contraction_rate(&first, &est);
    let f0 = gibbsbd_core::CoupledState::new(&eta1, &eta2).disagreement() as f64;
    let mut table = Table::new("disagreement", &["t", "mean_f", "se", "coalesced_fraction", "contraction_bound"]);
    let mut means = Vec::with_capacity(times.len());
    let mut checks = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let w: Welford = runs.iter().map(|(s, _)| s.values()[j] as f64).collect();
        let e = w.estimate();
        let joined = runs.iter().filter(|(s, _)| s.coalesced()[j]).count() as f64 / runs.len() as f64;
        let bound = f0 * (-delta * t).exp();
        table.push(vec![json!(t), json!(e.mean), json!(e.se), json!(joined), json!(bound)]);
        means.push(e.mean);
        if delta > 0.0 && f0 > 0.0 {
            let limit = bound * (1.0 + tol.z * e.se);
            checks.push(Check::new(
                &format!("contraction at t = {t}"),
                e.mean <= limit,
                format!("E[f] = {:.6} (se {:.6}), limit {:.6}", e.mean, e.se, limit),
            ));
        }
    }
    let coalescence: Vec<f64> = runs.iter().filter_map(|(_, s)| s.coalescence_time).collect();
    let results = json!({
        "f0": f0,
        "delta": delta,
        "delta_fitted": fitted_contraction_rate(&times, &means),
        "coalesced_by_end": coalescence.len() as f64 / runs.len() as f64,
        "mean_coalescence_time": if coalescence.is_empty() { Value::Null } else { json!(coalescence.iter().sum::<f64>() / coalescence.len() as f64) },
    });
    Ok((results, checks, vec![table], Vec::new()))
}

fn percolate<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Parts> {
    let block = config.percolation.as_ref().expect("validated");
    let phi = config.potential_spec();
    let lambda = config.lambda();
    let grid = BoxGrid::new(phi.dim(), phi.range(), block.n)?;
    let region = grid.region();
    let seed = config.seed();
    let xi = config.boundary.as_ref().expect("resolved").build(&region, &phi, seed, 0)?;
    let zeta = config.boundary2.as_ref().expect("resolved").build(&region, &phi, seed, 1)?;
    let window = gibbsbd_core::percolation::percolation_window(&phi, lambda, block.n, block.m);
    let t = match block.t {
        Some(t) => t,
        None if window.is_finite() => 0.5 * window,
        None => config.t_end.ok_or_else(|| anyhow!("the window is unbounded; set percolation.t"))?,
    };
    let report = run_percolation(block.n, block.m, &phi, lambda, xi, zeta, t, config.replicas(), seed, runner)?;
    let z = config.tolerance().z;
    let mut table = Table::new("profile", &["distance", "estimate", "se", "ci_low", "ci_high"]);
    for (r, e) in report.profile.iter().enumerate() {
        let (lo, hi) = wilson_interval((e.mean * e.samples as f64).round() as u64, e.samples, z);
        table.push(vec![json!(r), json!(e.mean), json!(e.se), json!(lo), json!(hi)]);
    }
    let mut checks = vec![Check::new(
        "locality",
        report.locality_violations == 0,
        format!("{} first disagreements without a disagreeing neighbor", report.locality_violations),
    )];
    if report.in_window {
        checks.push(Check::new(
            "percolation ceiling",
            report.reach.mean <= report.ceiling + z * report.reach.se,
            format!("reach {:.6} (se {:.6}), ceiling {:.6}", report.reach.mean, report.reach.se, report.ceiling),
        ));
    }
    let mut results = json!({
        "n": report.n,
        "m": report.m,
        "t": report.t,
        "rho": report.rho,
        "window_upper": report.window_upper,
        "in_window": report.in_window,
        "reach": estimate_json(&report.reach),
        "ceiling": report.ceiling,
        "locality_violations": report.locality_violations,
    });
    if let Some(chain) = &block.chain {
        let h = ordered_hitting_check(&grid, &report.records, chain, t, report.rho)?;
        results["ordered_hitting"] = json!({ "chain": chain, "empirical": estimate_json(&h.empirical), "bound": h.bound });
        checks.push(Check::new(
            "ordered hitting bound",
            h.empirical.mean <= h.bound + z * h.empirical.se,
            format!("empirical {:.6} (se {:.6}), bound {:.6}", h.empirical.mean, h.empirical.se, h.bound),
        ));
    }
    let samples = if config.output.as_ref().is_some_and(|o| o.samples) {
        report.records.iter().map(|r| json!({ "replica": r.replica, "horizon": r.horizon, "times": r.times })).collect()
    } else {
        Vec::new()
    };
    Ok((results, checks, vec![table], samples))
}

pub fn spatial_mixing_rows<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Vec<SpatialMixingRow>> {
    let block = config.spatial_mixing.as_ref().expect("validated");
    let phi = config.potential_spec();
    let est = weak_temperedness_constant(&phi, config.tolerance().quadrature, None)?;
    let policy = if block.policy == "mixing_fallback" { WindowPolicy::MixingFallback } else { WindowPolicy::Strict };
    let seed = config.seed();
    let (b1, b2) = (config.boundary.clone().expect("resolved"), config.boundary2.clone().expect("resolved"));
    let pair = |region: &BoxRegion| {
        let build = |b: &crate::config::BoundaryBlock, stream| b.build(region, &phi, seed, stream).map_err(|e| gibbsbd_core::Error::InvalidArgument(e.to_string()));
        Ok((build(&b1, 0)?, build(&b2, 1)?))
    };
    Ok(spatial_mixing_experiment(block.k, &block.n_values, &phi, config.lambda(), &est, pair, policy, config.replicas(), seed, runner)?)
}

fn spatial_mixing<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Parts> {
    let rows = spatial_mixing_rows(config, runner)?;
    let z = config.tolerance().z;
    let mut table = Table::new(
        "spatial_mixing",
        &["n", "t", "window_lower", "window_upper", "fallback", "distance", "se", "ci_low", "ci_high", "disagreement", "upper_certificate", "ceiling"],
    );
    let mut checks = vec![Check::new("non-increasing in n", non_increasing_within(&rows, z), format!("z = {z}"))];
    for r in &rows {
        let d = &r.distance;
        table.push(vec![
            json!(r.n),
            json!(r.t),
            json!(r.window.lower),
            json!(r.window.upper),
            json!(r.fallback),
            json!(d.distance),
            json!(d.se),
            json!((d.distance - z * d.se).max(0.0)),
            json!(d.distance + z * d.se),
            json!(r.disagreement.mean),
            json!(r.upper_certificate),
            json!(r.ceiling),
        ]);
        checks.push(Check::new(
            &format!("ceiling at n = {}", r.n),
            d.distance <= r.ceiling + z * d.se,
            format!("distance {:.6} (se {:.6}), ceiling {:.6}", d.distance, d.se, r.ceiling),
        ));
        checks.push(Check::new(
            &format!("sandwich at n = {}", r.n),
            d.distance <= r.upper_certificate + z * d.se,
            format!("lower {:.6}, upper certificate {:.6}", d.distance, r.upper_certificate),
        ));
    }
    let results = json!({ "k": config.spatial_mixing.as_ref().map(|s| s.k), "any_fallback": rows.iter().any(|r| r.fallback) });
    Ok((results, checks, vec![table], Vec::new()))
}

fn gnz_check<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Parts> {
    let block = config.gnz.as_ref().expect("validated");
    let spec = gibbs_spec(config, false)?;
    let statistic = match block.statistic.as_str() {
        "one" => GnzStatistic::One,
        "reduced_boltzmann" => GnzStatistic::ReducedBoltzmann,
        _ => GnzStatistic::CountIn {
            query: block.query.as_ref().expect("validated").build().map_err(|e| anyhow!(e))?,
            m: block.m.expect("validated"),
        },
    };
    let seed = config.seed();
    let reports = runner.run(block.runs, |r| gnz_residual(&spec, &statistic, block.samples, &mut ReplicaRng::new(seed, r)));
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let z = config.tolerance().z;
    let mut table = Table::new("gnz", &["run", "lhs", "lhs_se", "rhs", "rhs_se", "z_score"]);
    for (i, r) in reports.iter().enumerate() {
        table.push(vec![json!(i), json!(r.lhs.mean), json!(r.lhs.se), json!(r.rhs.mean), json!(r.rhs.se), json!(r.z_score)]);
    }
    let inside = reports.iter().filter(|r| r.z_score.abs() < z).count() as u64;
    let needed = (0.95 * block.runs as f64).ceil() as u64;
    let checks = vec![Check::new("gnz z-scores", inside >= needed, format!("{inside} of {} runs with |z| < {z}, need {needed}", block.runs))];
    Ok((json!({ "statistic": block.statistic, "runs": block.runs, "within": inside }), checks, vec![table], Vec::new()))
}

fn oracle<R: ReplicaRunner>(config: &ExperimentConfig, runner: &R) -> anyhow::Result<Parts> {
    let block = config.oracle.as_ref().expect("validated");
    let spec = gibbs_spec(config, false)?;
    let inst = DiscretizedInstance::new(&spec, block.cells, block.max_occupancy)?;
    let chain = exact_stationary(&inst)?;
    let mut table = Table::new("stationary", &["state", "occupancy", "probability"]);
    for (&s, &p) in chain.states.iter().zip(&chain.pi) {
        table.push(vec![json!(s), json!(inst.states()[s]), json!(p)]);
    }
    let mut results = json!({
        "cells": inst.cells().len(),
        "feasible_states": inst.states().len(),
        "reachable_states": chain.states.len(),
        "unreachable": chain.unreachable,
        "residual": chain.residual,
        "gibbs_discrepancy": chain.gibbs_discrepancy,
        "relative_discrepancy": chain.relative_discrepancy,
        "balance_defect": chain.balance_defect,
        "occupation": chain.occupation(&inst),
    });
    let mut checks = Vec::new();
    if block.compare {
        let bd = BirthDeathSpec::new(spec.clone());
        let empty = PointConfiguration::empty(spec.dim());
        let seed = config.seed();
        let t_end = config.t_end();
        let samples = runner.run(config.replicas(), |i| bd.run_to(&empty, t_end, &mut ReplicaRng::new(seed, i)));
        let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
        let term = discretization_term(&inst, &chain)?;
        let cmp = compare_to_simulation(&inst, &chain, &samples, term)?;
        let tol = config.tolerance();
        results["comparison"] = json!({
            "samples": cmp.samples,
            "off_support": cmp.off_support,
            "tv": cmp.tv,
            "discretization_term": cmp.discretization_term,
            "chi_square": cmp.chi_square.statistic,
            "dof": cmp.chi_square.dof,
            "p_value": chi_square_p_value(&cmp.chi_square),
        });
        checks.push(Check::new(
            "oracle total variation",
            cmp.passes(tol.tv_budget),
            format!("TV {:.6} against budget {} + discretization {:.6}", cmp.tv, tol.tv_budget, cmp.discretization_term),
        ));
    }
    Ok((results, checks, vec![table], Vec::new()))
}

fn partition(config: &ExperimentConfig) -> anyhow::Result<Parts> {
    let block = config.partition.as_ref().expect("validated");
    let spec = gibbs_spec(config, false)?;
    let mode = if block.mode == "series" {
        PartitionMode::Series {
            n_max: block.n_max.expect("validated"),
            samples_per_term: block.samples_per_term.expect("validated"),
            tail_tolerance: block.tail_tolerance.unwrap_or(1e-6),
        }
    } else {
        PartitionMode::MonteCarlo { samples: block.samples.expect("validated") }
    };
    let est = partition_function(&spec, mode, &mut ReplicaRng::new(config.seed(), 0))?;
    let z = config.tolerance().z;
    let mut table = Table::new("terms", &["n", "value", "se"]);
    for t in &est.terms {
        table.push(vec![json!(t.n), json!(t.value), json!(t.se)]);
    }
    let results = json!({ "value": est.value, "se": est.se, "truncation": est.truncation, "error_bound": est.error_bound(z) });
    Ok((results, Vec::new(), vec![table], Vec::new()))
}
