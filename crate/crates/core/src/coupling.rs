//! The identity coupling of two birth-death chains that share activity,
//! potential and region but may see different boundary conditions.
//!
//! Deaths run on one clock over all points: a shared point dies in both
//! chains, an exclusive point only in its own. A birth proposal at `x` is
//! resolved with a single uniform `u` against the two acceptance
//! probabilities, so shared births land at bitwise identical coordinates.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::PointConfiguration;
use crate::dynamics::{acceptance_of, BirthDeathSpec};
use crate::error::{Error, Result};
use crate::potential::TemperednessEstimate;
use crate::rng::ReplicaRng;
use crate::space::BoxRegion;
use crate::stats::{binomial, fit_exponential_rate, Estimate, Welford};

/// `(eta1, eta2)` split into `eta1 ∩ eta2`, `eta1 \ eta2` and `eta2 \ eta1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub shared: PointConfiguration,
    pub excl1: PointConfiguration,
    pub excl2: PointConfiguration,
}

impl CoupledState {
    pub fn new(eta1: &PointConfiguration, eta2: &PointConfiguration) -> Self {
        CoupledState { shared: eta1.intersect(eta2), excl1: eta1.subtract(eta2), excl2: eta2.subtract(eta1) }
    }

    pub fn eta1(&self) -> PointConfiguration {
        self.shared.sum(&self.excl1)
    }

    pub fn eta2(&self) -> PointConfiguration {
        self.shared.sum(&self.excl2)
    }

    /// `f(eta1, eta2) = (eta1 ⊕ eta2)(Λ)`.
    pub fn disagreement(&self) -> u64 {
        self.excl1.count() + self.excl2.count()
    }

    pub fn coalesced(&self) -> bool {
        self.excl1.is_empty() && self.excl2.is_empty()
    }
}

/// `(eta1 ⊕ eta2)(Λ)` for a coupled state.
pub fn disagreement_count(state: &CoupledState) -> u64 {
    state.disagreement()
}

/// Which chains a coupled jump affects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Both,
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledJump<'a> {
    pub side: Side,
    pub birth: bool,
    pub point: &'a [f64],
}

/// Callbacks for coupled runs; see [`crate::dynamics::Observer`].
pub trait CoupledObserver {
    fn hold(&mut self, _until: f64, _closed: bool, _state: &CoupledState) {}
    fn jump(&mut self, _time: f64, _jump: CoupledJump<'_>, _state: &CoupledState) {}
}

impl CoupledObserver for () {}

impl<A: CoupledObserver, B: CoupledObserver> CoupledObserver for (A, B) {
    fn hold(&mut self, until: f64, closed: bool, state: &CoupledState) {
        self.0.hold(until, closed, state);
        self.1.hold(until, closed, state);
    }
    fn jump(&mut self, time: f64, jump: CoupledJump<'_>, state: &CoupledState) {
        self.0.jump(time, jump, state);
        self.1.jump(time, jump, state);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSummary {
    pub final_state: CoupledState,
    pub end_time: f64,
    /// First time the chains agreed, if ever (zero for equal starts).
    pub coalescence_time: Option<f64>,
    pub jumps: u64,
    pub rejected: u64,
}

fn check_pair(spec1: &BirthDeathSpec, spec2: &BirthDeathSpec) -> Result<()> {
    let (g1, g2) = (spec1.gibbs(), spec2.gibbs());
    if g1.lambda() != g2.lambda() || g1.region() != g2.region() || !g1.potential().same_as(g2.potential()) {
        return Err(Error::Contract("coupled chains must share activity, potential and region".into()));
    }
    Ok(())
}

/// Simulates the identity coupling on `[0, t_end]`.
pub fn simulate_coupled<O: CoupledObserver>(
    spec1: &BirthDeathSpec,
    spec2: &BirthDeathSpec,
    eta1: &PointConfiguration,
    eta2: &PointConfiguration,
    t_end: f64,
    rng: &mut ReplicaRng,
    observer: &mut O,
) -> Result<CoupledSummary> {
    check_pair(spec1, spec2)?;
    spec1.check_start(eta1)?;
    spec2.check_start(eta2)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("horizon must be finite and non-negative, got {t_end}")));
    }
    let g = spec1.gibbs();
    let phi = g.potential();
    let l = phi.local_stability();
    let (b1, b2) = (spec1.gibbs().boundary(), spec2.gibbs().boundary());
    let proposal_rate = spec1.proposal_rate();
    let mut s = CoupledState::new(eta1, eta2);
    let mut coalescence_time = if s.coalesced() { Some(0.0) } else { None };
    let mut t = 0.0;
    let mut x = vec![0.0; g.dim()];
    let (mut jumps, mut rejected) = (0u64, 0u64);
    loop {
        let (ns, n1, n2) = (s.shared.count(), s.excl1.count(), s.excl2.count());
        let deaths = (ns + n1 + n2) as f64;
        let rate = deaths + proposal_rate;
        if rate == 0.0 {
            break;
        }
        let next = t + rng.exponential(rate);
        if next > t_end {
            break;
        }
        t = next;
        let v = rng.uniform() * rate;
        if v < deaths {
            let k = rng.below((ns + n1 + n2) as usize) as u64;
            let (side, target) = if k < ns {
                (Side::Both, &mut s.shared)
            } else if k < ns + n1 {
                (Side::First, &mut s.excl1)
            } else {
                (Side::Second, &mut s.excl2)
            };
            let offset = match side {
                Side::Both => 0,
                Side::First => ns,
                Side::Second => ns + n1,
            };
            let p: Vec<f64> = target.nth_point(k - offset).expect("index below count").to_vec();
            observer.hold(t, false, &s);
            match side {
                Side::Both => s.shared.remove_point(&p),
                Side::First => s.excl1.remove_point(&p),
                Side::Second => s.excl2.remove_point(&p),
            };
            jumps += 1;
            observer.jump(t, CoupledJump { side, birth: false, point: &p }, &s);
        } else {
            rng.point_in(g.region(), &mut x);
            let ws = s.shared.influence(&x, phi);
            let (p1, p2) = if ws.is_finite() {
                (
                    acceptance_of(ws + s.excl1.influence(&x, phi) + b1.influence(&x, phi), l)?,
                    acceptance_of(ws + s.excl2.influence(&x, phi) + b2.influence(&x, phi), l)?,
                )
            } else {
                (0.0, 0.0)
            };
            let u = rng.uniform();
            let side = if u < p1.min(p2) {
                Side::Both
            } else if u < p1 {
                Side::First
            } else if u < p2 {
                Side::Second
            } else {
                rejected += 1;
                continue;
            };
            observer.hold(t, false, &s);
            match side {
                Side::Both => s.shared.add_point(&x)?,
                Side::First => s.excl1.add_point(&x)?,
                Side::Second => s.excl2.add_point(&x)?,
            }
            jumps += 1;
            observer.jump(t, CoupledJump { side, birth: true, point: &x }, &s);
        }
        if coalescence_time.is_none() && s.coalesced() {
            coalescence_time = Some(t);
        }
    }
    observer.hold(t_end, true, &s);
    Ok(CoupledSummary { final_state: s, end_time: t_end, coalescence_time, jumps, rejected })
}

/// Recorded coupled jump chain.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledTrajectory {
    times: Vec<f64>,
    states: Vec<CoupledState>,
    end_time: f64,
    coalescence_time: Option<f64>,
}

impl CoupledTrajectory {
    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CoupledState] {
        &self.states
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn coalescence_time(&self) -> Option<f64> {
        self.coalescence_time
    }

    pub fn state_at(&self, t: f64) -> Result<&CoupledState> {
        if !(0.0..=self.end_time).contains(&t) {
            return Err(Error::TimeOutOfRange { t, end: self.end_time });
        }
        let n = self.times.partition_point(|&tau| tau <= t);
        Ok(&self.states[n - 1])
    }
}

struct Recorder {
    times: Vec<f64>,
    states: Vec<CoupledState>,
}

impl CoupledObserver for Recorder {
    fn jump(&mut self, time: f64, _jump: CoupledJump<'_>, state: &CoupledState) {
        self.times.push(time);
        self.states.push(state.clone());
    }
}

/// [`simulate_coupled`] keeping every state.
pub fn coupled_trajectory(
    spec1: &BirthDeathSpec,
    spec2: &BirthDeathSpec,
    eta1: &PointConfiguration,
    eta2: &PointConfiguration,
    t_end: f64,
    rng: &mut ReplicaRng,
) -> Result<CoupledTrajectory> {
    let mut rec = Recorder { times: vec![0.0], states: vec![CoupledState::new(eta1, eta2)] };
    let summary = simulate_coupled(spec1, spec2, eta1, eta2, t_end, rng, &mut rec)?;
    Ok(CoupledTrajectory {
        times: rec.times,
        states: rec.states,
        end_time: summary.end_time,
        coalescence_time: summary.coalescence_time,
    })
}

/// Records the disagreement `f` at fixed sample times.
#[derive(Clone, Debug)]
pub struct DisagreementSampler {
    times: Vec<f64>,
    next: usize,
    values: Vec<u64>,
    coalesced: Vec<bool>,
}

impl DisagreementSampler {
    pub fn new(times: Vec<f64>) -> Self {
        DisagreementSampler { values: Vec::with_capacity(times.len()), coalesced: Vec::new(), times, next: 0 }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// Whether the two chains were identical at each sample time.
    pub fn coalesced(&self) -> &[bool] {
        &self.coalesced
    }
}

impl CoupledObserver for DisagreementSampler {
    fn hold(&mut self, until: f64, closed: bool, state: &CoupledState) {
        while self.next < self.times.len() {
            let s = self.times[self.next];
            if s < until || (closed && s <= until) {
                self.values.push(state.disagreement());
                self.coalesced.push(state.coalesced());
                self.next += 1;
            } else {
                break;
            }
        }
    }
}

/// Conservative contraction rate `delta = 1 - λ e^L (c_hat + err)`, or `0.0`
/// at or above the uniqueness threshold.
pub fn contraction_rate(spec: &BirthDeathSpec, est: &TemperednessEstimate) -> f64 {
    let g = spec.gibbs();
    let x = g.lambda() * libm::exp(g.potential().local_stability()) * est.c_hat_upper();
    let delta = 1.0 - x;
    if delta <= 4.0 * f64::EPSILON {
        0.0
    } else {
        delta
    }
}

/// Empirical decay rate of `E[f(t)]`, fitted on a log scale.
pub fn fitted_contraction_rate(times: &[f64], mean_disagreement: &[f64]) -> Option<f64> {
    fit_exponential_rate(times, mean_disagreement)
}

/// Largest gap `|Pr[N_B = m] - Pr'[N_B = m]|` over `m` for one query box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedDistance {
    pub distance: f64,
    /// Standard error of the paired indicator difference at the maximizing `m`.
    pub se: f64,
    pub m: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TvEstimates {
    /// Empirical `Pr[eta1(t) != eta2(t)]`.
    pub non_coalescence: Estimate,
    pub projected: Vec<ProjectedDistance>,
}

/// Count-distribution distance on `query` from paired samples.
pub fn projected_count_distance(pairs: &[(u64, u64)]) -> ProjectedDistance {
    let top = pairs.iter().map(|p| p.0.max(p.1)).max().unwrap_or(0);
    let mut best = ProjectedDistance { distance: 0.0, se: 0.0, m: 0 };
    for m in 0..=top {
        let w: Welford = pairs.iter().map(|&(a, b)| f64::from(u8::from(a == m)) - f64::from(u8::from(b == m))).collect();
        let e = w.estimate();
        if libm::fabs(e.mean) > best.distance {
            best = ProjectedDistance { distance: libm::fabs(e.mean), se: e.se, m };
        }
    }
    best
}

/// Coalescence certificate and projected lower bounds from final states of
/// coupled runs that all reached the same time.
pub fn tv_estimates(states: &[CoupledState], queries: &[BoxRegion]) -> Result<TvEstimates> {
    if states.is_empty() {
        return Err(Error::InsufficientSamples("no coupled runs".into()));
    }
    let apart = states.iter().filter(|s| !s.coalesced()).count() as u64;
    let projected = queries
        .iter()
        .map(|q| {
            let pairs: Vec<(u64, u64)> = states
                .iter()
                .map(|s| {
                    let common = s.shared.count_in(q);
                    (common + s.excl1.count_in(q), common + s.excl2.count_in(q))
                })
                .collect();
            projected_count_distance(&pairs)
        })
        .collect();
    Ok(TvEstimates { non_coalescence: binomial(apart, states.len() as u64), projected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{collar_point, GibbsSpec};
    use crate::potential::{weak_temperedness_constant, PotentialSpec};

    fn region(len: f64) -> BoxRegion {
        BoxRegion::new(vec![0.0], vec![len]).unwrap()
    }

    fn bd(lambda: f64, phi: PotentialSpec, len: f64) -> BirthDeathSpec {
        BirthDeathSpec::new(GibbsSpec::free(lambda, phi, region(len)).unwrap())
    }

    fn conf(xs: &[f64]) -> PointConfiguration {
        PointConfiguration::from_points(1, xs.iter().map(|x| [*x])).unwrap()
    }

    #[test]
    fn disagreement_examples() {
        let a = conf(&[0.3]);
        assert_eq!(disagreement_count(&CoupledState::new(&a, &a)), 0);
        assert_eq!(disagreement_count(&CoupledState::new(&a, &conf(&[]))), 1);
        let eta = PointConfiguration::from_atoms(1, [([0.1], 2), ([0.2], 1)]).unwrap();
        let xi = PointConfiguration::from_atoms(1, [([0.1], 1), ([0.3], 1)]).unwrap();
        let s = CoupledState::new(&eta, &xi);
        assert_eq!(disagreement_count(&s), 3);
        assert_eq!(s.eta1(), eta);
        assert_eq!(s.eta2(), xi);
    }

    #[test]
    fn equal_starts_stay_equal() {
        let s = bd(1.5, PotentialSpec::hard_sphere(1, 0.3).unwrap(), 2.0);
        let start = conf(&[0.2, 1.0]);
        for seed in 0..20 {
            let tr = coupled_trajectory(&s, &s, &start, &start, 10.0, &mut ReplicaRng::new(seed, 0)).unwrap();
            assert_eq!(tr.coalescence_time(), Some(0.0));
            assert!(tr.states().iter().all(|st| st.coalesced()));
        }
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let a = bd(1.0, PotentialSpec::hard_sphere(1, 0.3).unwrap(), 1.0);
        let b = bd(1.1, PotentialSpec::hard_sphere(1, 0.3).unwrap(), 1.0);
        let c = bd(1.0, PotentialSpec::hard_sphere(1, 0.4).unwrap(), 1.0);
        let e = conf(&[]);
        for other in [&b, &c] {
            let r = simulate_coupled(&a, other, &e, &e, 1.0, &mut ReplicaRng::new(1, 0), &mut ());
            assert!(matches!(r, Err(Error::Contract(_))));
        }
    }

    // Oracle: with no interaction every birth is shared, so each exclusive
    // point survives an Exp(1) time: E[f(t)] = f(0) e^{-t}.
    #[test]
    fn zero_potential_disagreement_decays_like_deaths() {
        let s = bd(2.0, PotentialSpec::zero(1), 1.0);
        let (a, b) = (conf(&[0.1, 0.4]), conf(&[0.7]));
        let times = vec![0.5, 1.0, 2.0];
        let mut acc = vec![Welford::default(); 3];
        for seed in 0..20_000 {
            let mut obs = DisagreementSampler::new(times.clone());
            simulate_coupled(&s, &s, &a, &b, 2.0, &mut ReplicaRng::new(seed, 1), &mut obs).unwrap();
            for (w, v) in acc.iter_mut().zip(obs.values()) {
                w.push(*v as f64);
            }
        }
        for (t, w) in times.iter().zip(&acc) {
            let e = w.estimate();
            assert!((e.mean - 3.0 * (-t).exp()).abs() < 4.0 * e.se, "t={t}: {e:?}");
        }
        let means: Vec<f64> = acc.iter().map(|w| w.mean()).collect();
        let fit = fitted_contraction_rate(&times, &means).unwrap();
        assert!((fit - 1.0).abs() < 0.05, "{fit}");
    }

    #[test]
    fn zero_potential_non_coalescence_is_exponential() {
        let s = bd(1.0, PotentialSpec::zero(1), 1.0);
        let t = 1.2;
        let states: Vec<CoupledState> = (0..20_000)
            .map(|i| simulate_coupled(&s, &s, &conf(&[0.5]), &conf(&[]), t, &mut ReplicaRng::new(4, i), &mut ()).unwrap().final_state)
            .collect();
        let tv = tv_estimates(&states, &[region(1.0)]).unwrap();
        let p = tv.non_coalescence;
        assert!((p.mean - (-t).exp()).abs() < 4.0 * p.se, "{p:?}");
        assert!(tv.projected[0].distance <= p.mean + 4.0 * p.se);
    }

    #[test]
    fn contraction_rate_examples() {
        let phi = PotentialSpec::hard_sphere(1, 0.5).unwrap();
        let est = weak_temperedness_constant(&phi, 1e-12, None).unwrap();
        assert!((contraction_rate(&bd(0.5, phi.clone(), 1.0), &est) - 0.5).abs() < 1e-9);
        assert_eq!(contraction_rate(&bd(0.0, phi.clone(), 1.0), &est), 1.0);
        let lam_star = crate::potential::uniqueness_threshold(&phi, &est);
        assert_eq!(contraction_rate(&bd(lam_star, phi.clone(), 1.0), &est), 0.0);
        assert_eq!(contraction_rate(&bd(2.0, phi, 1.0), &est), 0.0);
    }

    #[test]
    fn shared_births_are_bitwise_identical_and_marginals_feasible() {
        let phi = PotentialSpec::hard_sphere(1, 0.4).unwrap();
        let g = GibbsSpec::free(1.2, phi.clone(), region(2.0)).unwrap();
        let g2 = g.with_boundary(collar_point(g.region(), 0, 0.1).unwrap()).unwrap();
        let (s1, s2) = (BirthDeathSpec::new(g), BirthDeathSpec::new(g2));
        for seed in 0..30 {
            let tr = coupled_trajectory(&s1, &s2, &conf(&[]), &conf(&[1.0]), 20.0, &mut ReplicaRng::new(seed, 2)).unwrap();
            for st in tr.states() {
                assert!(st.eta1().is_feasible(&phi));
                assert!(st.eta2().sum(s2.gibbs().boundary()).is_feasible(&phi));
                let both = st.eta1().intersect(&st.eta2());
                assert_eq!(both, st.shared);
            }
        }
    }

    #[test]
    fn tv_estimates_on_coalesced_runs() {
        let a = conf(&[0.3]);
        let states = vec![CoupledState::new(&a, &a); 10];
        let tv = tv_estimates(&states, &[region(1.0)]).unwrap();
        assert_eq!(tv.non_coalescence.mean, 0.0);
        assert_eq!(tv.projected[0].distance, 0.0);
        assert!(tv_estimates(&[], &[]).is_err());
    }
}
