//! Disagreement percolation on the box grid `V_n`: first-disagreement times
//! per box, the Poisson tail bound for ordered hitting times, and the
//! spatial-mixing experiment on nested cubes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::E;

use crate::config::PointConfiguration;
use crate::coupling::{projected_count_distance, simulate_coupled, CoupledJump, CoupledObserver, CoupledState, ProjectedDistance, Side};
use crate::dynamics::BirthDeathSpec;
use crate::error::{Error, Result};
use crate::gibbs::GibbsSpec;
use crate::potential::{PotentialSpec, TemperednessEstimate};
use crate::replicas::ReplicaRunner;
use crate::rng::ReplicaRng;
use crate::space::{BoxGrid, BoxRegion, GridIndex, VertexClass};
use crate::stats::{binomial, Estimate};

/// First-disagreement times `T_k` of one coupled run, indexed by the linear
/// grid index; `f64::INFINITY` when box `k` never disagreed before the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingRecord {
    pub replica: u64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// First disagreements in inner boxes with no disagreeing neighbor.
    pub locality_violations: u64,
}

/// Tracks per-box exclusive-point counts and first-disagreement times.
#[derive(Clone, Debug)]
pub struct HittingObserver<'g> {
    grid: &'g BoxGrid,
    adjacency: Vec<Vec<usize>>,
    inner: Vec<bool>,
    counts: Vec<u64>,
    times: Vec<f64>,
    violations: u64,
}

impl<'g> HittingObserver<'g> {
    pub fn new(grid: &'g BoxGrid, start: &CoupledState) -> Self {
        let total = grid.vertex_count();
        let inner = grid.vertices().map(|k| grid.classify_vertex(&k) == Ok(VertexClass::Inner)).collect();
        let mut obs = HittingObserver {
            grid,
            adjacency: grid.adjacency(),
            inner,
            counts: vec![0; total],
            times: vec![f64::INFINITY; total],
            violations: 0,
        };
        for (p, m) in start.excl1.atoms().chain(start.excl2.atoms()) {
            let b = obs.locate(p);
            obs.counts[b] += u64::from(m);
            obs.times[b] = 0.0;
        }
        obs
    }

    fn locate(&self, p: &[f64]) -> usize {
        self.grid.locate(p).expect("coupled states live inside the grid region")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }

    pub fn into_record(self, replica: u64, horizon: f64) -> HittingRecord {
        HittingRecord { replica, horizon, times: self.times, locality_violations: self.violations }
    }
}

impl CoupledObserver for HittingObserver<'_> {
    fn jump(&mut self, time: f64, jump: CoupledJump<'_>, _state: &CoupledState) {
        if jump.side == Side::Both {
            return;
        }
        let b = self.locate(jump.point);
        if jump.birth {
            if self.counts[b] == 0 && self.times[b].is_infinite() {
                if self.inner[b] && self.adjacency[b].iter().all(|&j| self.counts[j] == 0) {
                    self.violations += 1;
                }
                self.times[b] = time;
            }
            self.counts[b] += 1;
        } else {
            self.counts[b] -= 1;
        }
    }
}

/// `Pr[Poisson(rho t) >= k] = 1 - F_{rho t}(k - 1)`, summed in log space on
/// whichever side of the mean avoids cancellation.
pub fn poisson_tail(rho: f64, t: f64, k: u64) -> f64 {
    let mu = rho * t;
    if k == 0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    let log_mu = libm::log(mu);
    let log_term = |j: u64| -mu + j as f64 * log_mu - libm::lgamma(j as f64 + 1.0);
    if ((k - 1) as f64) < mu {
        let cdf: f64 = (0..k).map(|j| libm::exp(log_term(j))).sum();
        (1.0 - cdf).max(0.0)
    } else {
        let mut sum = 0.0;
        let mut j = k;
        loop {
            let term = libm::exp(log_term(j));
            sum += term;
            if term <= 1e-18 * sum || term == 0.0 {
                break;
            }
            j += 1;
        }
        sum.min(1.0)
    }
}

/// `rho = λ e^L R^d`, the rate bound for spawning a disagreement in one box.
pub fn disagreement_rate(potential: &PotentialSpec, lambda: f64) -> f64 {
    lambda * libm::exp(potential.local_stability()) * libm::pow(potential.range(), potential.dim() as f64)
}

/// Upper end of the admissible horizon, `(n - m) / (e^2 (6m+3)^d R^d λ e^L)`.
pub fn percolation_window(potential: &PotentialSpec, lambda: f64, n: u32, m: u32) -> f64 {
    let d = potential.dim() as f64;
    let rate = disagreement_rate(potential, lambda);
    let denom = E * E * libm::pow(6.0 * f64::from(m) + 3.0, d) * rate;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        f64::from(n - m) / denom
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PercolationReport {
    pub n: u32,
    pub m: u32,
    pub t: f64,
    /// Empirical `Pr[some box of V_m disagreed by t]`.
    pub reach: Estimate,
    /// `e^{-(n - m)}`.
    pub ceiling: f64,
    /// Empirical `Pr[some box at sup-distance r disagreed by t]` for `r = 0..=n`.
    pub profile: Vec<Estimate>,
    pub rho: f64,
    pub window_upper: f64,
    pub in_window: bool,
    pub locality_violations: u64,
    pub records: Vec<HittingRecord>,
}

/// Setup shared by the percolation experiments.
#[derive(Clone, Debug)]
pub struct PercolationSetup {
    pub grid: BoxGrid,
    pub first: BirthDeathSpec,
    pub second: BirthDeathSpec,
}

impl PercolationSetup {
    /// Both chains live on `Λ^(n)`; `xi` and `zeta` are boundary conditions
    /// outside it.
    pub fn new(potential: &PotentialSpec, lambda: f64, n: u32, xi: PointConfiguration, zeta: PointConfiguration) -> Result<Self> {
        if potential.range() <= 0.0 {
            return Err(Error::InvalidArgument("percolation needs a potential with positive range".into()));
        }
        let grid = BoxGrid::new(potential.dim(), potential.range(), n)?;
        let region = grid.region();
        let first = BirthDeathSpec::new(GibbsSpec::new(lambda, potential.clone(), region.clone(), xi)?);
        let second = BirthDeathSpec::new(GibbsSpec::new(lambda, potential.clone(), region, zeta)?);
        Ok(PercolationSetup { grid, first, second })
    }

    /// One coupled run from `(0, 0)` to `t`.
    pub fn hitting_record(&self, t: f64, seed: u64, replica: u64) -> Result<HittingRecord> {
        let empty = PointConfiguration::empty(self.grid.dim());
        let start = CoupledState::new(&empty, &empty);
        let mut obs = HittingObserver::new(&self.grid, &start);
        let mut rng = ReplicaRng::new(seed, replica);
        simulate_coupled(&self.first, &self.second, &empty, &empty, t, &mut rng, &mut obs)?;
        Ok(obs.into_record(replica, t))
    }

    pub fn records<R: ReplicaRunner>(&self, t: f64, replicas: u64, seed: u64, runner: &R) -> Result<Vec<HittingRecord>> {
        runner.run(replicas, |i| self.hitting_record(t, seed, i)).into_iter().collect()
    }
}

/// Coupled runs on `Λ^(n)` from empty starts; reports how often a
/// disagreement reaches `Λ^(m)` by time `t`.
#[allow(clippy::too_many_arguments)]
pub fn run_percolation<R: ReplicaRunner>(
    n: u32,
    m: u32,
    potential: &PotentialSpec,
    lambda: f64,
    xi: PointConfiguration,
    zeta: PointConfiguration,
    t: f64,
    replicas: u64,
    seed: u64,
    runner: &R,
) -> Result<PercolationReport> {
    if m >= n {
        return Err(Error::InvalidArgument(format!("need m < n, got m = {m}, n = {n}")));
    }
    let setup = PercolationSetup::new(potential, lambda, n, xi, zeta)?;
    let records = setup.records(t, replicas, seed, runner)?;
    let grid = &setup.grid;
    let norms: Vec<u32> = (0..grid.vertex_count()).map(|i| grid.sup_norm(i)).collect();
    let mut reach_hits = vec![0u64; n as usize + 1];
    let mut target_hits = 0u64;
    let mut violations = 0u64;
    for r in &records {
        violations += r.locality_violations;
        let mut hit = vec![false; n as usize + 1];
        for (i, &tk) in r.times.iter().enumerate() {
            if tk <= t {
                hit[norms[i] as usize] = true;
            }
        }
        if hit[..=m as usize].iter().any(|&h| h) {
            target_hits += 1;
        }
        for (c, h) in reach_hits.iter_mut().zip(hit) {
            *c += u64::from(h);
        }
    }
    let window_upper = percolation_window(potential, lambda, n, m);
    Ok(PercolationReport {
        n,
        m,
        t,
        reach: binomial(target_hits, replicas),
        ceiling: libm::exp(-f64::from(n - m)),
        profile: reach_hits.iter().map(|&c| binomial(c, replicas)).collect(),
        rho: disagreement_rate(potential, lambda),
        window_upper,
        in_window: t < window_upper,
        locality_violations: violations,
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderedHitting {
    pub empirical: Estimate,
    pub bound: f64,
}

/// Frequency of `T_{k_1} < T_{k_2} < ... < T_{k_l} <= t` against
/// `1 - F_{rho t}(l - 1)`. The chain must be a simple path in the grid graph.
pub fn ordered_hitting_check(grid: &BoxGrid, records: &[HittingRecord], chain: &[GridIndex], t: f64, rho: f64) -> Result<OrderedHitting> {
    if chain.is_empty() {
        return Err(Error::InvalidArgument("empty box chain".into()));
    }
    let mut linear = Vec::with_capacity(chain.len());
    for k in chain {
        linear.push(grid.linear_index(k)?);
    }
    for w in chain.windows(2) {
        let dist = w[0].iter().zip(&w[1]).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
        if dist != 1 {
            return Err(Error::InvalidArgument(format!("{:?} and {:?} are not grid neighbors", w[0], w[1])));
        }
    }
    let mut sorted = linear.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != linear.len() {
        return Err(Error::InvalidArgument("box chain revisits a box".into()));
    }
    let hits = records
        .iter()
        .filter(|r| {
            let ts: Vec<f64> = linear.iter().map(|&i| r.times[i]).collect();
            ts.windows(2).all(|w| w[0] < w[1]) && ts[ts.len() - 1] <= t
        })
        .count() as u64;
    Ok(OrderedHitting { empirical: binomial(hits, records.len() as u64), bound: poisson_tail(rho, t, chain.len() as u64) })
}

/// Number of simple paths `(k_1, ..., k_l)` in the grid graph with `k_1 = start`
/// and `k_l` an outer vertex. Exhaustive; meant for small grids.
pub fn count_paths_to_outer(grid: &BoxGrid, start: &[i64], length: usize) -> Result<u64> {
    let s = grid.linear_index(start)?;
    if length == 0 {
        return Ok(0);
    }
    let adjacency = grid.adjacency();
    let n = grid.radius();
    let outer: Vec<bool> = (0..grid.vertex_count()).map(|i| grid.sup_norm(i) == n).collect();
    let mut visited = vec![false; grid.vertex_count()];
    fn walk(v: usize, left: usize, adj: &[Vec<usize>], outer: &[bool], visited: &mut [bool]) -> u64 {
        if left == 1 {
            return u64::from(outer[v]);
        }
        visited[v] = true;
        let mut total = 0;
        for &w in &adj[v] {
            if !visited[w] {
                total += walk(w, left - 1, adj, outer, visited);
            }
        }
        visited[v] = false;
        total
    }
    Ok(walk(s, length, &adjacency, &outer, &mut visited))
}

/// What to do when the admissible horizon for a given `n` is empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowPolicy {
    /// Fail with [`Error::EmptyTimeWindow`].
    Strict,
    /// Run at the mixing lower bound and flag the row.
    MixingFallback,
}

/// The horizon window `[lower, upper)` for the spatial-mixing experiment
/// with target cube `Λ_k`, domain `Λ_{k+n}` and `eps = e^{-n}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeWindow {
    pub lower: f64,
    pub upper: f64,
}

impl TimeWindow {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    /// Midpoint when non-empty and bounded, else the lower end.
    pub fn choose(&self) -> f64 {
        if !self.is_empty() && self.upper.is_finite() {
            0.5 * (self.lower + self.upper)
        } else {
            self.lower
        }
    }
}

/// `δ^{-1} ln(λ (2n+2k+1)^d R^d e^L / ε) <= t < n / (e^2 (6k+3)^d R^d λ e^L)`.
pub fn mixing_window(potential: &PotentialSpec, lambda: f64, delta: f64, k: u32, n: u32) -> TimeWindow {
    let d = potential.dim() as f64;
    let rate = disagreement_rate(potential, lambda);
    let eps = libm::exp(-f64::from(n));
    let mass = rate * libm::pow(f64::from(2 * n + 2 * k + 1), d);
    let lower = if mass <= 0.0 {
        0.0
    } else if delta <= 0.0 {
        f64::INFINITY
    } else {
        (libm::log(mass / eps) / delta).max(0.0)
    };
    let denom = E * E * libm::pow(6.0 * f64::from(k) + 3.0, d) * rate;
    let upper = if denom == 0.0 { f64::INFINITY } else { f64::from(n) / denom };
    TimeWindow { lower, upper }
}

/// Smallest `n' >= n` with a non-empty window, or `None` if the window is
/// empty for every `n` (the upper end grows like `n / C` while the lower end
/// grows like `n / δ`, so this happens exactly when `δ <= C`).
pub fn minimal_feasible_n(potential: &PotentialSpec, lambda: f64, delta: f64, k: u32, n: u32) -> Option<u32> {
    let d = potential.dim() as f64;
    let c = E * E * libm::pow(6.0 * f64::from(k) + 3.0, d) * disagreement_rate(potential, lambda);
    if delta <= 0.0 || (c > 0.0 && delta <= c) {
        return if mixing_window(potential, lambda, delta, k, n).is_empty() { None } else { Some(n) };
    }
    (n..=n.saturating_add(1_000_000)).find(|&m| !mixing_window(potential, lambda, delta, k, m).is_empty())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialMixingRow {
    pub n: u32,
    pub t: f64,
    pub window: TimeWindow,
    /// The run used the mixing lower bound because the window was empty.
    pub fallback: bool,
    /// Largest count-distribution gap on `Λ_k` (a total variation lower bound).
    pub distance: ProjectedDistance,
    /// Empirical `Pr[eta1 ≠ eta2 on Λ_k at t]`.
    pub disagreement: Estimate,
    /// `disagreement + 2 e^{-δt} λ e^L ν(Λ_{k+n})`.
    pub upper_certificate: f64,
    /// `3 e^{-n}`.
    pub ceiling: f64,
}

/// Coupled runs on `Λ_{k+n}` from empty starts under the boundary pair
/// produced for that cube, compared on `Λ_k`.
#[allow(clippy::too_many_arguments)]
pub fn spatial_mixing_experiment<R, B>(
    k: u32,
    n_values: &[u32],
    potential: &PotentialSpec,
    lambda: f64,
    est: &TemperednessEstimate,
    boundary_pair: B,
    policy: WindowPolicy,
    replicas: u64,
    seed: u64,
    runner: &R,
) -> Result<Vec<SpatialMixingRow>>
where
    R: ReplicaRunner,
    B: Fn(&BoxRegion) -> Result<(PointConfiguration, PointConfiguration)>,
{
    if potential.range() <= 0.0 {
        return Err(Error::InvalidArgument("spatial mixing needs a potential with positive range".into()));
    }
    let d = potential.dim();
    let target = BoxGrid::new(d, potential.range(), k)?.region();
    let mut rows = Vec::with_capacity(n_values.len());
    for (row_index, &n) in n_values.iter().enumerate() {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let region = BoxGrid::new(d, potential.range(), k + n)?.region();
        let (xi, zeta) = boundary_pair(&region)?;
        let first = BirthDeathSpec::new(GibbsSpec::new(lambda, potential.clone(), region.clone(), xi)?);
        let second = BirthDeathSpec::new(GibbsSpec::new(lambda, potential.clone(), region.clone(), zeta)?);
        let delta = crate::coupling::contraction_rate(&first, est);
        let window = mixing_window(potential, lambda, delta, k, n);
        let fallback = window.is_empty();
        if fallback && policy == WindowPolicy::Strict {
            return Err(Error::EmptyTimeWindow {
                n,
                lower: window.lower,
                upper: window.upper,
                minimal_n: minimal_feasible_n(potential, lambda, delta, k, n),
            });
        }
        let t = window.choose();
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("no finite horizon for n = {n} (delta = {delta})")));
        }
        let empty = PointConfiguration::empty(d);
        let stream = seed.wrapping_add(row_index as u64);
        let finals: Vec<Result<(u64, u64, bool)>> = runner.run(replicas, |i| {
            let mut rng = ReplicaRng::new(stream, i);
            let s = simulate_coupled(&first, &second, &empty, &empty, t, &mut rng, &mut ())?.final_state;
            let common = s.shared.count_in(&target);
            let (a, b) = (s.excl1.count_in(&target), s.excl2.count_in(&target));
            Ok((common + a, common + b, a + b > 0))
        });
        let finals: Vec<(u64, u64, bool)> = finals.into_iter().collect::<Result<_>>()?;
        let pairs: Vec<(u64, u64)> = finals.iter().map(|f| (f.0, f.1)).collect();
        let apart = finals.iter().filter(|f| f.2).count() as u64;
        let disagreement = binomial(apart, replicas);
        let mix = libm::exp(-delta * t) * lambda * libm::exp(potential.local_stability()) * region.volume();
        rows.push(SpatialMixingRow {
            n,
            t,
            window,
            fallback,
            distance: projected_count_distance(&pairs),
            disagreement,
            upper_certificate: disagreement.mean + 2.0 * mix,
            ceiling: 3.0 * libm::exp(-f64::from(n)),
        });
    }
    Ok(rows)
}

/// Consecutive rows never increase by more than `z` combined standard errors.
pub fn non_increasing_within(rows: &[SpatialMixingRow], z: f64) -> bool {
    rows.windows(2).all(|w| {
        let (a, b) = (&w[0].distance, &w[1].distance);
        b.distance <= a.distance + z * libm::sqrt(a.se * a.se + b.se * b.se)
    })
}
