//! Pair potentials with bounded range and a local stability constant.
//!
//! Built-in potentials depend on the distance only, so their weak temperedness
//! constant reduces to a radial integral that is evaluated by adaptive
//! quadrature with a certified error. Custom potentials are truncated at their
//! declared range.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::quadrature;
use crate::rng::ReplicaRng;

/// General pair function for custom potentials.
pub type PairFn = dyn Fn(&[f64], &[f64]) -> ExtendedReal + Send + Sync;
/// Distance profile for custom potentials that depend on `|x - y|` only.
pub type RadialFn = dyn Fn(f64) -> ExtendedReal + Send + Sync;

/// Parameters of the built-in potentials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuiltinPotential {
    /// `+inf` below distance `radius`.
    HardSphere { radius: f64 },
    /// `strength` below distance `radius`.
    Strauss { radius: f64, strength: f64 },
    /// Hard core below `core`, `-depth` on `[core, range)`. `local_stability`
    /// is the user's bound `L`, validated against a packing count.
    SquareWell { core: f64, range: f64, depth: f64, local_stability: f64 },
    Zero,
}

#[derive(Clone)]
pub enum PotentialKind {
    HardSphere { radius: f64 },
    Strauss { radius: f64, strength: f64 },
    SquareWell { core: f64, range: f64, depth: f64 },
    Zero,
    CustomRadial { profile: Arc<RadialFn>, breakpoints: Vec<f64> },
    Custom { pair: Arc<PairFn> },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::HardSphere { radius } => write!(f, "HardSphere {{ radius: {radius} }}"),
            PotentialKind::Strauss { radius, strength } => {
                write!(f, "Strauss {{ radius: {radius}, strength: {strength} }}")
            }
            PotentialKind::SquareWell { core, range, depth } => {
                write!(f, "SquareWell {{ core: {core}, range: {range}, depth: {depth} }}")
            }
            PotentialKind::Zero => f.write_str("Zero"),
            PotentialKind::CustomRadial { breakpoints, .. } => {
                write!(f, "CustomRadial {{ breakpoints: {breakpoints:?} }}")
            }
            PotentialKind::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// How the local stability constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityProvenance {
    /// Exact for the potential (repulsive built-ins).
    Exact,
    /// User bound checked against a packing count.
    Validated,
    /// User bound taken on trust.
    Asserted,
}

/// A symmetric pair potential on `R^dim` with range `R` and local stability `L`.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    dim: usize,
    kind: PotentialKind,
    range: f64,
    range_sq: f64,
    local_stability: f64,
    provenance: StabilityProvenance,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidPotential(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidPotential(format!("{name} must be non-negative and finite, got {v}")))
    }
}

/// Volume of the unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let d = dim as f64;
    libm::pow(PI, 0.5 * d) / libm::tgamma(0.5 * d + 1.0)
}

/// Surface area of the unit sphere in `R^dim`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * libm::pow(PI, 0.5 * d) / libm::tgamma(0.5 * d)
}

/// Upper bound on the number of points with pairwise distance at least `core`
/// inside the shell `core <= |y| < range`. Exact in one dimension; in higher
/// dimensions the shell volume divided by the volume of a cube of diagonal `core`.
pub fn shell_packing_bound(dim: usize, core: f64, range: f64) -> u64 {
    if dim == 1 {
        // Points at core, 2 core, ... below range; the slack absorbs rounding
        // when range is an exact multiple of core.
        let per_side = libm::ceil((range - core) / core - 1e-9);
        return 2 * per_side.max(0.0) as u64;
    }
    let shell = unit_ball_volume(dim) * (libm::pow(range, dim as f64) - libm::pow(core, dim as f64));
    let side = core / libm::sqrt(dim as f64);
    libm::ceil(shell / libm::pow(side, dim as f64)) as u64
}

impl PotentialSpec {
    pub fn builtin(dim: usize, params: BuiltinPotential) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPotential("dimension must be positive".into()));
        }
        let (kind, range, l, provenance) = match params {
            BuiltinPotential::HardSphere { radius } => {
                let r = positive("radius", radius)?;
                (PotentialKind::HardSphere { radius: r }, r, 0.0, StabilityProvenance::Exact)
            }
            BuiltinPotential::Strauss { radius, strength } => {
                let r = positive("radius", radius)?;
                let b = non_negative("strength", strength)?;
                (PotentialKind::Strauss { radius: r, strength: b }, r, 0.0, StabilityProvenance::Exact)
            }
            BuiltinPotential::SquareWell { core, range, depth, local_stability } => {
                let core = positive("core", core)?;
                let range = positive("range", range)?;
                let depth = non_negative("depth", depth)?;
                let l = non_negative("local_stability", local_stability)?;
                if range <= core {
                    return Err(Error::InvalidPotential(format!(
                        "square well range {range} must exceed core {core}"
                    )));
                }
                let packing = shell_packing_bound(dim, core, range);
                let required = depth * packing as f64;
                if l < required {
                    return Err(Error::InvalidPotential(format!(
                        "local_stability {l} below depth * packing bound = {depth} * {packing} = {required}"
                    )));
                }
                (PotentialKind::SquareWell { core, range, depth }, range, l, StabilityProvenance::Validated)
            }
            BuiltinPotential::Zero => (PotentialKind::Zero, 0.0, 0.0, StabilityProvenance::Exact),
        };
        Ok(PotentialSpec { dim, kind, range, range_sq: range * range, local_stability: l, provenance })
    }

    pub fn hard_sphere(dim: usize, radius: f64) -> Result<Self> {
        Self::builtin(dim, BuiltinPotential::HardSphere { radius })
    }

    pub fn strauss(dim: usize, radius: f64, strength: f64) -> Result<Self> {
        Self::builtin(dim, BuiltinPotential::Strauss { radius, strength })
    }

    pub fn square_well(dim: usize, core: f64, range: f64, depth: f64, local_stability: f64) -> Result<Self> {
        Self::builtin(dim, BuiltinPotential::SquareWell { core, range, depth, local_stability })
    }

    pub fn zero(dim: usize) -> Self {
        Self::builtin(dim, BuiltinPotential::Zero).expect("zero potential is always valid")
    }

    /// A potential given by its distance profile. `breakpoints` lists the
    /// distances where the profile jumps.
    pub fn custom_radial(
        dim: usize,
        range: f64,
        local_stability: f64,
        profile: Arc<RadialFn>,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        let range = non_negative("range", range)?;
        let l = non_negative("local_stability", local_stability)?;
        Ok(PotentialSpec {
            dim,
            kind: PotentialKind::CustomRadial { profile, breakpoints },
            range,
            range_sq: range * range,
            local_stability: l,
            provenance: StabilityProvenance::Asserted,
        })
    }

    /// A general symmetric pair function. Symmetry is the caller's contract.
    pub fn custom(dim: usize, range: f64, local_stability: f64, pair: Arc<PairFn>) -> Result<Self> {
        let range = non_negative("range", range)?;
        let l = non_negative("local_stability", local_stability)?;
        Ok(PotentialSpec {
            dim,
            kind: PotentialKind::Custom { pair },
            range,
            range_sq: range * range,
            local_stability: l,
            provenance: StabilityProvenance::Asserted,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PotentialKind::HardSphere { .. } => "hard_sphere",
            PotentialKind::Strauss { .. } => "strauss",
            PotentialKind::SquareWell { .. } => "square_well",
            PotentialKind::Zero => "zero",
            PotentialKind::CustomRadial { .. } | PotentialKind::Custom { .. } => "custom",
        }
    }

    /// Range `R`: the potential vanishes at distance `>= R`.
    pub fn range(&self) -> f64 {
        self.range
    }

    /// Local stability constant `L`.
    pub fn local_stability(&self) -> f64 {
        self.local_stability
    }

    pub fn stability_provenance(&self) -> StabilityProvenance {
        self.provenance
    }

    /// Distance below which two points can never coexist, if any.
    pub fn hard_core(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::HardSphere { radius } => Some(radius),
            PotentialKind::SquareWell { core, .. } => Some(core),
            _ => None,
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        !matches!(self.kind, PotentialKind::Custom { .. })
    }

    /// Same dimension, kind, parameters and constants; custom potentials must
    /// share the same function object.
    pub fn same_as(&self, other: &PotentialSpec) -> bool {
        let kinds = match (&self.kind, &other.kind) {
            (PotentialKind::CustomRadial { profile: a, .. }, PotentialKind::CustomRadial { profile: b, .. }) => Arc::ptr_eq(a, b),
            (PotentialKind::Custom { pair: a }, PotentialKind::Custom { pair: b }) => Arc::ptr_eq(a, b),
            (PotentialKind::HardSphere { radius: a }, PotentialKind::HardSphere { radius: b }) => a == b,
            (PotentialKind::Strauss { radius: a, strength: x }, PotentialKind::Strauss { radius: b, strength: y }) => a == b && x == y,
            (
                PotentialKind::SquareWell { core: a, range: r, depth: x },
                PotentialKind::SquareWell { core: b, range: s, depth: y },
            ) => a == b && r == s && x == y,
            (PotentialKind::Zero, PotentialKind::Zero) => true,
            _ => false,
        };
        kinds && self.dim == other.dim && self.range == other.range && self.local_stability == other.local_stability
    }

    /// Value at distance `r` for distance-only potentials.
    pub fn radial(&self, r: f64) -> Option<ExtendedReal> {
        if r >= self.range {
            return Some(ExtendedReal::ZERO);
        }
        Some(match &self.kind {
            PotentialKind::Zero => ExtendedReal::ZERO,
            PotentialKind::HardSphere { .. } => ExtendedReal::Infinite,
            PotentialKind::Strauss { strength, .. } => ExtendedReal::Finite(*strength),
            PotentialKind::SquareWell { core, depth, .. } => {
                if r < *core {
                    ExtendedReal::Infinite
                } else {
                    ExtendedReal::Finite(-*depth)
                }
            }
            PotentialKind::CustomRadial { profile, .. } => profile(r),
            PotentialKind::Custom { .. } => return None,
        })
    }

    fn radial_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::SquareWell { core, .. } => vec![*core],
            PotentialKind::CustomRadial { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }

    /// `phi(x, y)`.
    #[inline]
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> ExtendedReal {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        if let PotentialKind::Zero = self.kind {
            return ExtendedReal::ZERO;
        }
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 >= self.range_sq {
            return ExtendedReal::ZERO;
        }
        match &self.kind {
            PotentialKind::Zero => ExtendedReal::ZERO,
            PotentialKind::HardSphere { .. } => ExtendedReal::Infinite,
            PotentialKind::Strauss { strength, .. } => ExtendedReal::Finite(*strength),
            PotentialKind::SquareWell { core, depth, .. } => {
                if d2 < core * core {
                    ExtendedReal::Infinite
                } else {
                    ExtendedReal::Finite(-*depth)
                }
            }
            PotentialKind::CustomRadial { profile, .. } => profile(libm::sqrt(d2)),
            PotentialKind::Custom { pair } => pair(x, y),
        }
    }
}

/// How a temperedness estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    Quadrature,
    MonteCarlo,
}

/// Estimates of `C^_phi = sup_x int 1 - exp(-|phi(x, y)|) dy` and of
/// `C_phi = sup_x int |1 - exp(-phi(x, y))| dy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemperednessEstimate {
    pub c_hat: f64,
    pub c_full: f64,
    /// Quadrature error bound, or the CI half-width for Monte Carlo.
    pub abs_error: f64,
    pub method: EstimateMethod,
}

impl TemperednessEstimate {
    /// `c_hat + abs_error`.
    pub fn c_hat_upper(&self) -> f64 {
        self.c_hat + self.abs_error
    }
}

/// Sup over a user-supplied set of centers, used for potentials that are not
/// translation invariant.
#[derive(Clone, Debug)]
pub struct MonteCarloFallback {
    pub centers: Vec<Vec<f64>>,
    pub samples_per_center: usize,
    pub seed: u64,
}

fn weak_integrand(v: ExtendedReal) -> f64 {
    1.0 - v.abs_boltzmann()
}

fn full_integrand(v: ExtendedReal) -> f64 {
    match v {
        ExtendedReal::Infinite => 1.0,
        ExtendedReal::Finite(p) => libm::fabs(-libm::expm1(-p)),
    }
}

/// Weak temperedness constant. Distance-only potentials use radial quadrature
/// with absolute error at most `tol`; other potentials need `fallback`.
pub fn weak_temperedness_constant(
    spec: &PotentialSpec,
    tol: f64,
    fallback: Option<&MonteCarloFallback>,
) -> Result<TemperednessEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if spec.range == 0.0 || matches!(spec.kind, PotentialKind::Zero) {
        return Ok(TemperednessEstimate { c_hat: 0.0, c_full: 0.0, abs_error: 0.0, method: EstimateMethod::Quadrature });
    }
    if !spec.is_translation_invariant() {
        return match fallback {
            Some(fb) => weak_temperedness_monte_carlo(spec, fb),
            None => Err(Error::Unsupported(String::from(
                "potential is not translation invariant; supply Monte Carlo centers",
            ))),
        };
    }
    let area = unit_sphere_area(spec.dim);
    let dpow = spec.dim as i32 - 1;
    let breaks = spec.radial_breakpoints();
    let radial = |r: f64| spec.radial(r).expect("distance-only potential");
    let weak = quadrature::integrate(
        |r| weak_integrand(radial(r)) * area * libm::pow(r, f64::from(dpow)),
        0.0,
        spec.range,
        &breaks,
        0.5 * tol,
    );
    let full = quadrature::integrate(
        |r| full_integrand(radial(r)) * area * libm::pow(r, f64::from(dpow)),
        0.0,
        spec.range,
        &breaks,
        0.5 * tol,
    );
    Ok(TemperednessEstimate {
        c_hat: weak.value,
        c_full: full.value,
        abs_error: weak.abs_error.max(full.abs_error),
        method: EstimateMethod::Quadrature,
    })
}

/// Monte Carlo sup over `fallback.centers`; the error is three standard errors
/// at the maximizing center.
pub fn weak_temperedness_monte_carlo(spec: &PotentialSpec, fallback: &MonteCarloFallback) -> Result<TemperednessEstimate> {
    if fallback.centers.is_empty() || fallback.samples_per_center < 2 {
        return Err(Error::InvalidArgument("need at least one center and two samples".into()));
    }
    let dim = spec.dim;
    let r = spec.range;
    let cube_volume = libm::pow(2.0 * r, dim as f64);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut y = vec![0.0; dim];
    for (i, c) in fallback.centers.iter().enumerate() {
        if c.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
        }
        let mut rng = ReplicaRng::new(fallback.seed, i as u64);
        let (mut s1, mut s2, mut f1) = (0.0, 0.0, 0.0);
        let n = fallback.samples_per_center;
        for _ in 0..n {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk = c[k] + r * (2.0 * rng.uniform() - 1.0);
            }
            let v = spec.evaluate(c, &y);
            let w = weak_integrand(v) * cube_volume;
            s1 += w;
            s2 += w * w;
            f1 += full_integrand(v) * cube_volume;
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let var = ((s2 / nf) - mean * mean).max(0.0) * nf / (nf - 1.0);
        let se = libm::sqrt(var / nf);
        if mean > best.0 {
            best = (mean, 3.0 * se, f1 / nf);
        }
    }
    Ok(TemperednessEstimate { c_hat: best.0, c_full: best.2.max(best.0), abs_error: best.1, method: EstimateMethod::MonteCarlo })
}

/// Activity bound `1 / (e^L (C^ + err))`; `f64::INFINITY` when the potential
/// has no interaction mass.
pub fn uniqueness_threshold(spec: &PotentialSpec, est: &TemperednessEstimate) -> f64 {
    let c = est.c_hat_upper();
    if c <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / (libm::exp(spec.local_stability) * c)
}

/// Classical bound `1 / (e^(L + 1) C)` in its locally stable form.
pub fn penrose_ruelle_threshold(spec: &PotentialSpec, est: &TemperednessEstimate) -> f64 {
    if est.c_full <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / (libm::exp(spec.local_stability + 1.0) * est.c_full)
}

/// Threshold comparison for a potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdReport {
    pub c_hat: f64,
    pub c_full: f64,
    pub abs_error: f64,
    pub lambda_star: f64,
    pub lambda_penrose_ruelle: f64,
}

pub fn threshold_report(spec: &PotentialSpec, est: &TemperednessEstimate) -> ThresholdReport {
    ThresholdReport {
        c_hat: est.c_hat,
        c_full: est.c_full,
        abs_error: est.abs_error,
        lambda_star: uniqueness_threshold(spec, est),
        lambda_penrose_ruelle: penrose_ruelle_threshold(spec, est),
    }
}
