//! Finite-volume Gibbs measures `mu_{Λ|xi}`: partition function, exact
//! rejection sampling and the GNZ identity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::{conditional_energy, PointConfiguration};
use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, KahanSum};
use crate::potential::PotentialSpec;
use crate::rng::ReplicaRng;
use crate::space::BoxRegion;
use crate::stats::{Estimate, Welford};

/// Activity, potential, region and boundary condition. The boundary is kept
/// only on the collar `{x not in Λ : dist(x, Λ) < R}`, which is lossless under
/// bounded range.
#[derive(Clone, Debug)]
pub struct GibbsSpec {
    lambda: f64,
    potential: PotentialSpec,
    region: BoxRegion,
    boundary: PointConfiguration,
}

impl GibbsSpec {
    /// Validates the inputs. Boundary atoms at distance `>= R` from the region
    /// are dropped; atoms inside the region are an error.
    pub fn new(lambda: f64, potential: PotentialSpec, region: BoxRegion, boundary: PointConfiguration) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("activity must be finite and non-negative, got {lambda}")));
        }
        let d = potential.dim();
        if region.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: region.dim() });
        }
        if boundary.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: boundary.dim() });
        }
        if boundary.atoms().any(|(p, _)| region.contains(p)) {
            return Err(Error::Contract("boundary configuration has atoms inside the region".into()));
        }
        let r2 = potential.range() * potential.range();
        let boundary = boundary.filter(|p| region.distance_squared(p) < r2);
        if !boundary.is_feasible(&potential) {
            return Err(Error::Contract("boundary configuration is not feasible".into()));
        }
        Ok(GibbsSpec { lambda, potential, region, boundary })
    }

    /// Empty boundary condition.
    pub fn free(lambda: f64, potential: PotentialSpec, region: BoxRegion) -> Result<Self> {
        let d = potential.dim();
        GibbsSpec::new(lambda, potential, region, PointConfiguration::empty(d))
    }

    pub fn with_boundary(&self, boundary: PointConfiguration) -> Result<Self> {
        GibbsSpec::new(self.lambda, self.potential.clone(), self.region.clone(), boundary)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        GibbsSpec::new(lambda, self.potential.clone(), self.region.clone(), self.boundary.clone())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn boundary(&self) -> &PointConfiguration {
        &self.boundary
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn volume(&self) -> f64 {
        self.region.volume()
    }

    /// `W(x, eta + xi_{Λ^c})`.
    pub fn influence(&self, x: &[f64], eta: &PointConfiguration) -> ExtendedReal {
        eta.influence(x, &self.potential) + self.boundary.influence(x, &self.potential)
    }

    /// `H_Λ(eta | xi)`.
    pub fn conditional_energy(&self, eta: &PointConfiguration) -> Result<ExtendedReal> {
        conditional_energy(eta, &self.boundary, &self.region, &self.potential)
    }

    /// Unnormalized density `lambda^n exp(-H_Λ(eta | xi))` with respect to the
    /// unit-rate Poisson process, up to the factor `exp(ν(Λ))`.
    pub fn weight(&self, eta: &PointConfiguration) -> Result<f64> {
        let h = self.conditional_energy(eta)?;
        Ok(libm::pow(self.lambda, eta.count() as f64) * h.boltzmann())
    }

    /// `lambda e^L`, the dominating birth intensity of the dynamics.
    pub fn envelope_intensity(&self) -> f64 {
        self.lambda * libm::exp(self.potential.local_stability())
    }
}

/// Estimation strategy for the partition function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PartitionMode {
    /// Sum the first `n_max + 1` terms by stratified Monte Carlo; the tail
    /// bound must fall below `tail_tolerance`.
    Series { n_max: usize, samples_per_term: usize, tail_tolerance: f64 },
    /// `Ξ = exp(λν(Λ)) E[exp(-H)]` under a Poisson process of intensity λ.
    MonteCarlo { samples: usize },
}

/// One series term `λ^n / n! ∫_{Λ^n} exp(-H_Λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesTerm {
    pub n: usize,
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionEstimate {
    pub value: f64,
    /// Monte Carlo standard error.
    pub se: f64,
    /// Deterministic bound on the truncated series tail (zero in Monte Carlo mode).
    pub truncation: f64,
    pub terms: Vec<SeriesTerm>,
}

impl PartitionEstimate {
    /// `z * se + truncation`.
    pub fn error_bound(&self, z: f64) -> f64 {
        z * self.se + self.truncation
    }
}

/// Bound on `sum_{n > n_max} a^n / n!` by a geometric majorant; infinite when
/// `a >= n_max + 2`.
pub fn series_tail_bound(a: f64, n_max: usize) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let m = (n_max + 1) as f64;
    if a >= m + 1.0 {
        return f64::INFINITY;
    }
    // a^m / m! in log space
    let log_first = m * libm::log(a) - libm::lgamma(m + 1.0);
    libm::exp(log_first) / (1.0 - a / (m + 1.0))
}

const STRATA: usize = 16;

/// Finite-volume partition function `Ξ_{Λ|xi}(λ)`.
pub fn partition_function(spec: &GibbsSpec, mode: PartitionMode, rng: &mut ReplicaRng) -> Result<PartitionEstimate> {
    let lambda = spec.lambda;
    if lambda == 0.0 {
        return Ok(PartitionEstimate { value: 1.0, se: 0.0, truncation: 0.0, terms: vec![SeriesTerm { n: 0, value: 1.0, se: 0.0 }] });
    }
    let vol = spec.volume();
    let dim = spec.dim();
    match mode {
        PartitionMode::Series { n_max, samples_per_term, tail_tolerance } => {
            let a = lambda * libm::exp(1.5 * spec.potential.local_stability()) * vol;
            let tail = series_tail_bound(a, n_max);
            if !(tail <= tail_tolerance) {
                return Err(Error::SeriesDivergence { tail, tolerance: tail_tolerance, n_max });
            }
            if samples_per_term < 2 * STRATA {
                return Err(Error::InvalidArgument(format!("need at least {} samples per term", 2 * STRATA)));
            }
            let mut terms = vec![SeriesTerm { n: 0, value: 1.0, se: 0.0 }];
            let mut total = KahanSum::default();
            total.add_f64(1.0);
            let mut var = 0.0;
            let mut eta = PointConfiguration::empty(dim);
            let mut x = vec![0.0; dim];
            let lo0 = spec.region.lower()[0];
            let w0 = spec.region.upper()[0] - lo0;
            for n in 1..=n_max {
                // λ^n ν^n / n!
                let scale = libm::exp(n as f64 * libm::log(lambda * vol) - libm::lgamma(n as f64 + 1.0));
                let per = samples_per_term / STRATA;
                let mut mean = 0.0;
                let mut var_mean = 0.0;
                for s in 0..STRATA {
                    let mut w = Welford::default();
                    for _ in 0..per {
                        eta = PointConfiguration::empty(dim);
                        let mut energy = KahanSum::default();
                        for i in 0..n {
                            rng.point_in(&spec.region, &mut x);
                            if i == 0 {
                                x[0] = lo0 + w0 * (s as f64 + rng.uniform()) / STRATA as f64;
                            }
                            energy.add(spec.influence(&x, &eta));
                            if !energy.total().is_finite() {
                                break;
                            }
                            eta.add_point(&x)?;
                        }
                        w.push(energy.total().boltzmann());
                    }
                    let e = w.estimate();
                    mean += e.mean / STRATA as f64;
                    var_mean += e.se * e.se / (STRATA * STRATA) as f64;
                }
                let value = scale * mean;
                let se = scale * libm::sqrt(var_mean);
                total.add_f64(value);
                var += se * se;
                terms.push(SeriesTerm { n, value, se });
            }
            let _ = eta;
            Ok(PartitionEstimate { value: total.total_f64(), se: libm::sqrt(var), truncation: tail, terms })
        }
        PartitionMode::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(Error::InvalidArgument("need at least two samples".into()));
            }
            let mut w = Welford::default();
            let mut x = vec![0.0; dim];
            let mean_count = lambda * vol;
            for _ in 0..samples {
                let n = rng.poisson(mean_count);
                let mut eta = PointConfiguration::empty(dim);
                let mut energy = KahanSum::default();
                for _ in 0..n {
                    rng.point_in(&spec.region, &mut x);
                    energy.add(spec.influence(&x, &eta));
                    if !energy.total().is_finite() {
                        break;
                    }
                    eta.add_point(&x)?;
                }
                w.push(energy.total().boltzmann());
            }
            let e = w.estimate();
            let factor = libm::exp(mean_count);
            Ok(PartitionEstimate { value: factor * e.mean, se: factor * e.se, truncation: 0.0, terms: Vec::new() })
        }
    }
}

/// Threshold below which the analytic acceptance bound triggers a pilot run.
pub const MIN_ACCEPTANCE: f64 = 1e-6;
const PILOT_PROPOSALS: usize = 1_000_000;

/// Rejection sampler from the Poisson process of intensity `λ e^{3L/2}`,
/// accepting with probability `exp(-H_Λ(eta|xi) - 3L/2 eta(Λ))`.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    spec: GibbsSpec,
    proposal_mean: f64,
    shift: f64,
}

/// Outcome of one exact draw.
#[derive(Clone, Debug)]
pub struct ExactDraw {
    pub configuration: PointConfiguration,
    pub proposals: u64,
}

impl ExactSampler {
    /// Checks the acceptance rate first: `exp(-λ e^{3L/2} ν(Λ))` (the
    /// probability of an empty proposal) bounds it from below; if that bound
    /// is under [`MIN_ACCEPTANCE`] a pilot run decides.
    pub fn new(spec: &GibbsSpec, rng: &mut ReplicaRng) -> Result<Self> {
        let shift = 1.5 * spec.potential.local_stability();
        let proposal_mean = spec.lambda * libm::exp(shift) * spec.volume();
        let sampler = ExactSampler { spec: spec.clone(), proposal_mean, shift };
        if libm::exp(-proposal_mean) < MIN_ACCEPTANCE {
            let mut accepted = 0usize;
            for _ in 0..PILOT_PROPOSALS {
                if sampler.propose(rng).is_some() {
                    accepted += 1;
                }
            }
            let acceptance = accepted as f64 / PILOT_PROPOSALS as f64;
            if acceptance < MIN_ACCEPTANCE {
                return Err(Error::DegenerateAcceptance { acceptance });
            }
        }
        Ok(sampler)
    }

    pub fn spec(&self) -> &GibbsSpec {
        &self.spec
    }

    fn propose(&self, rng: &mut ReplicaRng) -> Option<PointConfiguration> {
        let dim = self.spec.dim();
        let n = rng.poisson(self.proposal_mean);
        let mut eta = PointConfiguration::empty(dim);
        let mut x = vec![0.0; dim];
        let mut exponent = KahanSum::default();
        for _ in 0..n {
            rng.point_in(&self.spec.region, &mut x);
            let w = self.spec.influence(&x, &eta);
            if !w.is_finite() {
                return None;
            }
            exponent.add(w);
            exponent.add_f64(self.shift);
            eta.add_point(&x).expect("finite point");
        }
        // exponent = H_Λ(eta|xi) + 3L/2 eta(Λ) >= 0
        let accept = libm::exp(-exponent.total_f64().max(0.0));
        if rng.uniform() < accept {
            Some(eta)
        } else {
            None
        }
    }

    pub fn sample(&self, rng: &mut ReplicaRng) -> ExactDraw {
        let mut proposals = 0;
        loop {
            proposals += 1;
            if let Some(configuration) = self.propose(rng) {
                return ExactDraw { configuration, proposals };
            }
        }
    }
}

/// Convenience wrapper: one exact draw from `mu_{Λ|xi}`.
pub fn sample_exact(spec: &GibbsSpec, rng: &mut ReplicaRng) -> Result<PointConfiguration> {
    Ok(ExactSampler::new(spec, rng)?.sample(rng).configuration)
}

/// Test functions `F(x, eta)` for the GNZ identity.
#[derive(Clone, Debug, PartialEq)]
pub enum GnzStatistic {
    /// `F = 1`; the left side is `E[eta(Λ)]`.
    One,
    /// `F(x, eta) = 1{eta(B) = m}`.
    CountIn { query: BoxRegion, m: u64 },
    /// `F(x, eta) = exp(-W(x, eta - delta_x))` for `x` in `eta`, so that the
    /// right side reads `exp(-W(x, eta))` and the self-pair never enters.
    ReducedBoltzmann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnzReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Standard error of the paired difference.
    pub diff_se: f64,
    pub z_score: f64,
}

fn without_point(eta: &PointConfiguration, x: &[f64]) -> PointConfiguration {
    let mut out = eta.clone();
    out.remove_point(x);
    out
}

/// Both sides of the finite-volume GNZ equation estimated on exact samples,
/// with the z-score of their paired difference.
pub fn gnz_residual(spec: &GibbsSpec, statistic: &GnzStatistic, samples: usize, rng: &mut ReplicaRng) -> Result<GnzReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if let GnzStatistic::CountIn { query, .. } = statistic {
        if query.dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: query.dim() });
        }
    }
    let sampler = ExactSampler::new(spec, rng)?;
    let phi = spec.potential();
    let vol = spec.volume();
    let dim = spec.dim();
    let (mut lhs, mut rhs, mut diff) = (Welford::default(), Welford::default(), Welford::default());
    let mut x = vec![0.0; dim];
    for _ in 0..samples {
        let eta = sampler.sample(rng).configuration;
        let left = match statistic {
            GnzStatistic::One => eta.count() as f64,
            GnzStatistic::CountIn { query, m } => {
                if eta.count_in(query) == *m {
                    eta.count() as f64
                } else {
                    0.0
                }
            }
            GnzStatistic::ReducedBoltzmann => eta.points().map(|p| without_point(&eta, p).influence(p, phi).boltzmann()).sum(),
        };
        rng.point_in(spec.region(), &mut x);
        let birth = spec.lambda() * vol * spec.influence(&x, &eta).boltzmann();
        let right = match statistic {
            GnzStatistic::One => birth,
            GnzStatistic::CountIn { query, m } => {
                let extra = u64::from(query.contains(&x));
                if eta.count_in(query) + extra == *m {
                    birth
                } else {
                    0.0
                }
            }
            GnzStatistic::ReducedBoltzmann => birth * eta.influence(&x, phi).boltzmann(),
        };
        lhs.push(left);
        rhs.push(right);
        diff.push(left - right);
    }
    let d = diff.estimate();
    let z_score = if d.se > 0.0 {
        d.mean / d.se
    } else if d.mean == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(d.mean)
    };
    Ok(GnzReport { lhs: lhs.estimate(), rhs: rhs.estimate(), diff_se: d.se, z_score })
}

/// A single boundary point at `offset` beyond the upper face along `axis`,
/// centered in the other coordinates.
pub fn collar_point(region: &BoxRegion, axis: usize, offset: f64) -> Result<PointConfiguration> {
    if axis >= region.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let mut p = region.center();
    p[axis] = region.upper()[axis] + offset;
    PointConfiguration::from_points(region.dim(), [p])
}

/// Lattice packing of the collar with the given spacing, thinned greedily to
/// a feasible configuration. Lattice sites sit at half-spacing offsets from
/// the inflated box corner.
pub fn saturated_collar(region: &BoxRegion, potential: &PotentialSpec, spacing: f64) -> Result<PointConfiguration> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let r = potential.range();
    let dim = region.dim();
    let outer = region.inflate(r)?;
    let counts: Vec<usize> =
        (0..dim).map(|i| libm::ceil((outer.upper()[i] - outer.lower()[i]) / spacing) as usize).collect();
    let total: usize = counts.iter().product();
    let mut out = PointConfiguration::empty(dim);
    let mut p = vec![0.0; dim];
    for mut lin in 0..total {
        for i in (0..dim).rev() {
            let k = lin % counts[i];
            lin /= counts[i];
            p[i] = outer.lower()[i] + (k as f64 + 0.5) * spacing;
        }
        let d2 = region.distance_squared(&p);
        if region.contains(&p) || d2 >= r * r {
            continue;
        }
        if out.influence(&p, potential).is_finite() {
            out.add_point(&p)?;
        }
    }
    Ok(out)
}

/// Poisson points of the given intensity on the collar, thinned greedily (in
/// draw order) to a feasible configuration.
pub fn poisson_collar(region: &BoxRegion, potential: &PotentialSpec, intensity: f64, rng: &mut ReplicaRng) -> Result<PointConfiguration> {
    let r = potential.range();
    let dim = region.dim();
    let mut out = PointConfiguration::empty(dim);
    if r == 0.0 {
        return Ok(out);
    }
    let outer = region.inflate(r)?;
    let n = rng.poisson(intensity * outer.volume());
    let mut p = vec![0.0; dim];
    for _ in 0..n {
        rng.point_in(&outer, &mut p);
        if region.contains(&p) || region.distance_squared(&p) >= r * r {
            continue;
        }
        if out.influence(&p, potential).is_finite() {
            out.add_point(&p)?;
        }
    }
    Ok(out)
}
