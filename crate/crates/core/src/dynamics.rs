//! The spatial birth-death process with deaths at unit rate per point and
//! births at rate `λ exp(-W(x, eta + xi))` per unit volume, simulated by
//! thinning against the envelope `eta(Λ) + λ e^L ν(Λ)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::PointConfiguration;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::gibbs::GibbsSpec;
use crate::potential::PotentialKind;
use crate::quadrature;
use crate::rng::ReplicaRng;
use crate::stats::Welford;

/// A single jump of the process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Jump<'a> {
    Birth(&'a [f64]),
    Death(&'a [f64]),
}

/// Callbacks fired while a trajectory unfolds.
pub trait Observer {
    /// The state was constant on `[previous event, until)`, or on
    /// `[previous event, until]` when `closed` (only at the horizon).
    fn hold(&mut self, _until: f64, _closed: bool, _state: &PointConfiguration) {}
    /// A jump at `time`; `state` is the state after it.
    fn jump(&mut self, _time: f64, _jump: Jump<'_>, _state: &PointConfiguration) {}
}

impl Observer for () {}

/// Allowed slack when checking `W >= -L` against rounding.
fn stability_slack(l: f64) -> f64 {
    1e-9 * (1.0 + l)
}

/// The process driven by a finite-volume Gibbs measure.
#[derive(Clone, Debug)]
pub struct BirthDeathSpec {
    gibbs: GibbsSpec,
}

/// How to evaluate the birth integral in [`BirthDeathSpec::total_rate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateMethod {
    /// Adaptive quadrature with breakpoints at the jump radii; one dimension only.
    Quadrature { tol: f64 },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    /// Quadrature error bound or Monte Carlo standard error.
    pub abs_error: f64,
}

/// Counters of one simulated path.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub final_state: PointConfiguration,
    pub end_time: f64,
    pub births: u64,
    pub deaths: u64,
    pub rejected: u64,
    /// Events whose time did not advance in floating point.
    pub ties: u64,
}

impl BirthDeathSpec {
    pub fn new(gibbs: GibbsSpec) -> Self {
        BirthDeathSpec { gibbs }
    }

    pub fn gibbs(&self) -> &GibbsSpec {
        &self.gibbs
    }

    /// `λ e^L ν(Λ)`, the birth-proposal rate.
    pub fn proposal_rate(&self) -> f64 {
        self.gibbs.envelope_intensity() * self.gibbs.volume()
    }

    /// The envelope `eta(Λ) + λ e^L ν(Λ)`.
    pub fn envelope_rate(&self, eta: &PointConfiguration) -> f64 {
        eta.count() as f64 + self.proposal_rate()
    }

    /// Probability that a birth proposed at `x` is accepted:
    /// `exp(-W(x, eta + xi) - L)`. Fails if `W < -L`.
    pub fn acceptance(&self, x: &[f64], eta: &PointConfiguration) -> Result<f64> {
        acceptance_of(self.gibbs.influence(x, eta), self.gibbs.potential().local_stability())
    }

    pub fn check_start(&self, eta0: &PointConfiguration) -> Result<()> {
        if eta0.dim() != self.gibbs.dim() {
            return Err(Error::DimensionMismatch { expected: self.gibbs.dim(), got: eta0.dim() });
        }
        if !eta0.is_supported_in(self.gibbs.region()) {
            return Err(Error::Contract("initial state not supported in the region".into()));
        }
        if !eta0.sum(self.gibbs.boundary()).is_feasible(self.gibbs.potential()) {
            return Err(Error::Contract("initial state is not feasible with the boundary".into()));
        }
        Ok(())
    }

    /// `κ(eta) = eta(Λ) + λ ∫_Λ exp(-W(x, eta + xi)) dx`.
    pub fn total_rate(&self, eta: &PointConfiguration, method: RateMethod) -> Result<RateEstimate> {
        let g = &self.gibbs;
        let deaths = eta.count() as f64;
        if g.lambda() == 0.0 {
            return Ok(RateEstimate { value: deaths, abs_error: 0.0 });
        }
        match method {
            RateMethod::Quadrature { tol } => {
                if g.dim() != 1 {
                    return Err(Error::Unsupported(format!("quadrature rate in dimension {}", g.dim())));
                }
                let phi = g.potential();
                let mut radii = vec![phi.range()];
                match phi.kind() {
                    PotentialKind::SquareWell { core, .. } => radii.push(*core),
                    PotentialKind::CustomRadial { breakpoints, .. } => radii.extend(breakpoints),
                    _ => {}
                }
                let mut breaks = Vec::new();
                for (p, _) in eta.atoms().chain(g.boundary().atoms()) {
                    for r in &radii {
                        breaks.push(p[0] - r);
                        breaks.push(p[0] + r);
                    }
                }
                let (a, b) = (g.region().lower()[0], g.region().upper()[0]);
                let q = quadrature::integrate(|x| g.influence(&[x], eta).boltzmann(), a, b, &breaks, tol / g.lambda());
                Ok(RateEstimate { value: deaths + g.lambda() * q.value, abs_error: g.lambda() * q.abs_error })
            }
            RateMethod::MonteCarlo { samples, seed } => {
                let mut rng = ReplicaRng::new(seed, 0);
                let mut x = vec![0.0; g.dim()];
                let mut w = Welford::default();
                for _ in 0..samples.max(2) {
                    rng.point_in(g.region(), &mut x);
                    w.push(g.influence(&x, eta).boltzmann());
                }
                let e = w.estimate();
                let scale = g.lambda() * g.volume();
                Ok(RateEstimate { value: deaths + scale * e.mean, abs_error: scale * e.se })
            }
        }
    }

    /// Thinned Gillespie simulation on `[0, t_end]`. Rejected proposals are not
    /// reported as jumps.
    pub fn simulate<O: Observer>(
        &self,
        eta0: &PointConfiguration,
        t_end: f64,
        rng: &mut ReplicaRng,
        observer: &mut O,
    ) -> Result<RunSummary> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be finite and non-negative, got {t_end}")));
        }
        self.check_start(eta0)?;
        let g = &self.gibbs;
        let proposal_rate = self.proposal_rate();
        let mut state = eta0.clone();
        let mut t = 0.0;
        let mut x = vec![0.0; g.dim()];
        let mut summary = RunSummary {
            final_state: PointConfiguration::empty(g.dim()),
            end_time: t_end,
            births: 0,
            deaths: 0,
            rejected: 0,
            ties: 0,
        };
        loop {
            let n = state.count();
            let rate = n as f64 + proposal_rate;
            if rate == 0.0 {
                break;
            }
            let next = t + rng.exponential(rate);
            if next > t_end {
                break;
            }
            if next == t {
                summary.ties += 1;
            }
            t = next;
            if rng.uniform() * rate < n as f64 {
                let k = rng.below(n as usize) as u64;
                let p: Vec<f64> = state.nth_point(k).expect("index below count").to_vec();
                observer.hold(t, false, &state);
                state.remove_point(&p);
                summary.deaths += 1;
                observer.jump(t, Jump::Death(&p), &state);
            } else {
                rng.point_in(g.region(), &mut x);
                let accept = self.acceptance(&x, &state)?;
                if rng.uniform() < accept {
                    observer.hold(t, false, &state);
                    state.add_point(&x)?;
                    summary.births += 1;
                    observer.jump(t, Jump::Birth(&x), &state);
                } else {
                    summary.rejected += 1;
                }
            }
        }
        observer.hold(t_end, true, &state);
        summary.final_state = state;
        Ok(summary)
    }

    /// The state at `t_end`.
    pub fn run_to(&self, eta0: &PointConfiguration, t_end: f64, rng: &mut ReplicaRng) -> Result<PointConfiguration> {
        Ok(self.simulate(eta0, t_end, rng, &mut ())?.final_state)
    }

    /// The full jump chain on `[0, t_end]`.
    pub fn trajectory(&self, eta0: &PointConfiguration, t_end: f64, rng: &mut ReplicaRng) -> Result<Trajectory> {
        let mut rec = Trajectory::start(eta0.clone());
        let summary = self.simulate(eta0, t_end, rng, &mut rec)?;
        rec.end_time = summary.end_time;
        Ok(rec)
    }
}

pub(crate) fn acceptance_of(w: ExtendedReal, l: f64) -> Result<f64> {
    match w {
        ExtendedReal::Infinite => Ok(0.0),
        ExtendedReal::Finite(v) => {
            if v < -l - stability_slack(l) {
                return Err(Error::LocalStabilityViolated { influence: v, bound: -l });
            }
            Ok(libm::exp(-v - l).min(1.0))
        }
    }
}

/// Recorded jump chain `(tau_n, Z_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<PointConfiguration>,
    end_time: f64,
}

impl Trajectory {
    fn start(eta0: PointConfiguration) -> Self {
        Trajectory { times: vec![0.0], states: vec![eta0], end_time: 0.0 }
    }

    /// `tau_0 = 0 < tau_1 < ...`.
    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PointConfiguration] {
        &self.states
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn jump_count(&self) -> usize {
        self.times.len() - 1
    }

    /// `X_t = Z_n` for `tau_n <= t < tau_{n+1}`.
    pub fn state_at(&self, t: f64) -> Result<&PointConfiguration> {
        if !(0.0..=self.end_time).contains(&t) {
            return Err(Error::TimeOutOfRange { t, end: self.end_time });
        }
        let n = self.times.partition_point(|&tau| tau <= t);
        Ok(&self.states[n - 1])
    }
}

impl Observer for Trajectory {
    fn jump(&mut self, time: f64, _jump: Jump<'_>, state: &PointConfiguration) {
        self.times.push(time);
        self.states.push(state.clone());
    }
}

/// Records a statistic of the state at fixed sample times.
#[derive(Clone, Debug)]
pub struct Sampler<T, F> {
    times: Vec<f64>,
    next: usize,
    values: Vec<T>,
    statistic: F,
}

impl<T, F: FnMut(&PointConfiguration) -> T> Sampler<T, F> {
    /// `times` must be sorted.
    pub fn new(times: Vec<f64>, statistic: F) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        Sampler { values: Vec::with_capacity(times.len()), times, next: 0, statistic }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl<T, F: FnMut(&PointConfiguration) -> T> Observer for Sampler<T, F> {
    fn hold(&mut self, until: f64, closed: bool, state: &PointConfiguration) {
        while self.next < self.times.len() {
            let s = self.times[self.next];
            if s < until || (closed && s <= until) {
                let v = (self.statistic)(state);
                self.values.push(v);
                self.next += 1;
            } else {
                break;
            }
        }
    }
}

/// Running pair of observers.
impl<A: Observer, B: Observer> Observer for (A, B) {
    fn hold(&mut self, until: f64, closed: bool, state: &PointConfiguration) {
        self.0.hold(until, closed, state);
        self.1.hold(until, closed, state);
    }
    fn jump(&mut self, time: f64, jump: Jump<'_>, state: &PointConfiguration) {
        self.0.jump(time, jump, state);
        self.1.jump(time, jump, state);
    }
}
