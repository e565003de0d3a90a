//! Experiment configuration: one TOML (or JSON) document per run.

use std::fmt;
use std::path::Path;

use gibbsbd_core::gibbs::{collar_point, poisson_collar, saturated_collar};
use gibbsbd_core::{BoxRegion, PointConfiguration, PotentialSpec, ReplicaRng};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Couple,
    Percolate,
    SpatialMixing,
    GnzCheck,
    Threshold,
    Oracle,
    Partition,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Simulate,
        ExperimentKind::Couple,
        ExperimentKind::Percolate,
        ExperimentKind::SpatialMixing,
        ExperimentKind::GnzCheck,
        ExperimentKind::Threshold,
        ExperimentKind::Oracle,
        ExperimentKind::Partition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Couple => "couple",
            ExperimentKind::Percolate => "percolate",
            ExperimentKind::SpatialMixing => "spatial-mixing",
            ExperimentKind::GnzCheck => "gnz-check",
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Partition => "partition",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    /// `hard_sphere`, `strauss`, `square_well` or `zero`.
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_stability: Option<f64>,
}

impl PotentialBlock {
    pub fn build(&self) -> Result<PotentialSpec, String> {
        let need = |name: &str, v: Option<f64>| v.ok_or_else(|| format!("potential.{name} is required for kind {}", self.kind));
        let built = match self.kind.as_str() {
            "hard_sphere" => PotentialSpec::hard_sphere(self.dim, need("radius", self.radius)?),
            "strauss" => PotentialSpec::strauss(self.dim, need("radius", self.radius)?, need("strength", self.strength)?),
            "square_well" => PotentialSpec::square_well(
                self.dim,
                need("core", self.core)?,
                need("range", self.range)?,
                need("depth", self.depth)?,
                need("local_stability", self.local_stability)?,
            ),
            "zero" => Ok(PotentialSpec::zero(self.dim)),
            other => return Err(format!("potential.kind: unknown potential {other:?} (expected hard_sphere, strauss, square_well or zero)")),
        };
        built.map_err(|e| format!("potential: {e}"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBlock {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RegionBlock {
    pub fn build(&self) -> Result<BoxRegion, String> {
        BoxRegion::new(self.lower.clone(), self.upper.clone()).map_err(|e| format!("region: {e}"))
    }
}

/// A boundary condition, either explicit or generated around the region.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryBlock {
    /// `empty`, `points`, `collar_point`, `saturated_collar` or `poisson_collar`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

impl BoundaryBlock {
    pub fn empty() -> Self {
        BoundaryBlock { kind: "empty".into(), ..Default::default() }
    }

    fn check(&self, field: &str, errors: &mut Vec<String>) {
        let need = |name: &str, present: bool, errors: &mut Vec<String>| {
            if !present {
                errors.push(format!("{field}.{name} is required for kind {}", self.kind));
            }
        };
        match self.kind.as_str() {
            "empty" => {}
            "points" => need("points", self.points.is_some(), errors),
            "collar_point" => need("offset", self.offset.is_some(), errors),
            "saturated_collar" => need("spacing", self.spacing.is_some(), errors),
            "poisson_collar" => need("intensity", self.intensity.is_some(), errors),
            other => errors.push(format!(
                "{field}.kind: unknown boundary {other:?} (expected empty, points, collar_point, saturated_collar or poisson_collar)"
            )),
        }
    }

    /// The boundary configuration for `region`; `stream` selects the random
    /// stream of Poisson collars.
    pub fn build(&self, region: &BoxRegion, potential: &PotentialSpec, seed: u64, stream: u64) -> anyhow::Result<PointConfiguration> {
        let dim = region.dim();
        Ok(match self.kind.as_str() {
            "points" => PointConfiguration::from_points(dim, self.points.clone().unwrap_or_default())?,
            "collar_point" => collar_point(region, self.axis.unwrap_or(0), self.offset.unwrap_or(0.0))?,
            "saturated_collar" => saturated_collar(region, potential, self.spacing.unwrap_or(1.0))?,
            "poisson_collar" => {
                let mut rng = ReplicaRng::new(seed, stream);
                poisson_collar(region, potential, self.intensity.unwrap_or(0.0), &mut rng)?
            }
            _ => PointConfiguration::empty(dim),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolationBlock {
    pub n: u32,
    pub m: u32,
    /// Defaults to the midpoint of `[0, window_upper)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Optional box chain for the ordered hitting-time check, in hitting order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<Vec<i64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialMixingBlock {
    pub k: u32,
    pub n_values: Vec<u32>,
    /// `strict` or `mixing_fallback`.
    #[serde(default = "default_policy")]
    pub policy: String,
}

fn default_policy() -> String {
    "strict".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnzBlock {
    /// `one`, `count_in` or `reduced_boltzmann`.
    pub statistic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<RegionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    pub samples: usize,
    #[serde(default = "one")]
    pub runs: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub cells: usize,
    #[serde(default = "one_u8")]
    pub max_occupancy: u8,
    /// Compare against continuous simulations run to `t_end`.
    #[serde(default)]
    pub compare: bool,
}

fn one_u8() -> u8 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionBlock {
    /// `series` or `monte_carlo`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_term: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceBlock {
    /// Absolute tolerance of the temperedness quadrature.
    #[serde(default = "default_quadrature")]
    pub quadrature: f64,
    /// Standard-error multiplier in statistical checks.
    #[serde(default = "default_z")]
    pub z: f64,
    /// Significance level of chi-square tests.
    #[serde(default = "default_significance")]
    pub significance: f64,
    /// TV budget of the oracle comparison, before the discretization term.
    #[serde(default = "default_tv_budget")]
    pub tv_budget: f64,
}

fn default_quadrature() -> f64 {
    1e-12
}
fn default_z() -> f64 {
    3.0
}
fn default_significance() -> f64 {
    0.01
}
fn default_tv_budget() -> f64 {
    0.02
}

impl Default for ToleranceBlock {
    fn default() -> Self {
        ToleranceBlock { quadrature: default_quadrature(), z: default_z(), significance: default_significance(), tv_budget: default_tv_budget() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// CSV tables next to a JSON report.
    #[default]
    Csv,
    /// Tables embedded in the JSON report.
    Json,
    /// One JSON object per table row.
    Jsonl,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    /// Also dump final states as JSON lines.
    #[serde(default)]
    pub samples: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    /// Observation times; default `[t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryBlock>,
    /// Boundary of the second chain in coupled experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary2: Option<BoundaryBlock>,
    /// Initial configuration; default empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start2: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percolation: Option<PercolationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_mixing: Option<SpatialMixingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnz: Option<GnzBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Validation(vec![format!("{}: {e}", path.display())]))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(vec![e.to_string()]))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Validation(vec![e.to_string()]))
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.expect("validated configs carry a kind")
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated configs carry a seed")
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(0.0)
    }

    pub fn replicas(&self) -> u64 {
        self.replicas.unwrap_or(0)
    }

    pub fn tolerance(&self) -> ToleranceBlock {
        self.tolerance.clone().unwrap_or_default()
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        self.potential.as_ref().expect("validated").build().expect("validated")
    }

    pub fn region_box(&self) -> BoxRegion {
        self.region.as_ref().expect("validated").build().expect("validated")
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| vec![self.t_end()])
    }

    /// Fills defaults so the echoed config is the one that ran.
    pub fn resolve(mut self) -> Self {
        if self.tolerance.is_none() {
            self.tolerance = Some(ToleranceBlock::default());
        }
        let needs_times = matches!(self.experiment, Some(ExperimentKind::Simulate | ExperimentKind::Couple));
        if needs_times && self.times.is_none() {
            if let Some(t) = self.t_end {
                self.times = Some(vec![t]);
            }
        }
        let needs_boundary = !matches!(self.experiment, Some(ExperimentKind::Threshold));
        if needs_boundary && self.boundary.is_none() {
            self.boundary = Some(BoundaryBlock::empty());
        }
        let paired = matches!(self.experiment, Some(ExperimentKind::Couple | ExperimentKind::Percolate | ExperimentKind::SpatialMixing));
        if paired && self.boundary2.is_none() {
            self.boundary2 = Some(BoundaryBlock::empty());
        }
        self
    }

    /// Every violated field, or `Ok` for a runnable config.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut errors = Vec::new();
        if self.seed.is_none() {
            errors.push("seed: missing (runs are seeded explicitly, never from the clock)".into());
        }
        let Some(kind) = self.experiment else {
            errors.push(format!(
                "experiment: missing (one of {})",
                ExperimentKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
            ));
            return Err(HarnessError::Validation(errors));
        };
        let potential = match &self.potential {
            None => {
                errors.push("potential: missing block".into());
                None
            }
            Some(p) => match p.build() {
                Ok(p) => Some(p),
                Err(e) => {
                    errors.push(e);
                    None
                }
            },
        };
        let dim = self.potential.as_ref().map(|p| p.dim);

        let uses_lambda = kind != ExperimentKind::Threshold;
        if uses_lambda {
            match self.lambda {
                None => errors.push("lambda: missing".into()),
                Some(l) if !(l >= 0.0 && l.is_finite()) => errors.push(format!("lambda: must be finite and non-negative, got {l}")),
                _ => {}
            }
        }
        let uses_region = matches!(
            kind,
            ExperimentKind::Simulate | ExperimentKind::Couple | ExperimentKind::GnzCheck | ExperimentKind::Oracle | ExperimentKind::Partition
        );
        if uses_region {
            match &self.region {
                None => errors.push("region: missing block".into()),
                Some(r) => match r.build() {
                    Ok(b) => {
                        if dim.is_some_and(|d| d != b.dim()) {
                            errors.push(format!("region: dimension {} differs from potential.dim {}", b.dim(), dim.unwrap_or(0)));
                        }
                    }
                    Err(e) => errors.push(e),
                },
            }
        }
        let uses_t_end = matches!(kind, ExperimentKind::Simulate | ExperimentKind::Couple)
            || (kind == ExperimentKind::Oracle && self.oracle.as_ref().is_some_and(|o| o.compare));
        if uses_t_end {
            match self.t_end {
                None => errors.push("t_end: missing".into()),
                Some(t) if !(t >= 0.0 && t.is_finite()) => errors.push(format!("t_end: must be finite and non-negative, got {t}")),
                _ => {}
            }
            if let (Some(times), Some(t)) = (&self.times, self.t_end) {
                if times.iter().any(|&s| !(0.0..=t).contains(&s)) {
                    errors.push(format!("times: every observation time must lie in [0, t_end = {t}]"));
                }
                if times.windows(2).any(|w| w[0] > w[1]) {
                    errors.push("times: must be non-decreasing".into());
                }
            }
        }
        let uses_replicas = !matches!(kind, ExperimentKind::Threshold | ExperimentKind::Partition | ExperimentKind::GnzCheck)
            && !(kind == ExperimentKind::Oracle && !self.oracle.as_ref().is_some_and(|o| o.compare));
        if uses_replicas {
            match self.replicas {
                None => errors.push("replicas: missing".into()),
                Some(0) => errors.push("replicas: must be positive".into()),
                _ => {}
            }
        }
        for (field, block) in [("boundary", &self.boundary), ("boundary2", &self.boundary2)] {
            if let Some(b) = block {
                b.check(field, &mut errors);
                if let (Some(points), Some(d)) = (&b.points, dim) {
                    if points.iter().any(|p| p.len() != d) {
                        errors.push(format!("{field}.points: every point needs {d} coordinates"));
                    }
                }
            }
        }
        for (field, start) in [("start", &self.start), ("start2", &self.start2)] {
            if let (Some(points), Some(d)) = (start, dim) {
                if points.iter().any(|p| p.len() != d) {
                    errors.push(format!("{field}: every point needs {d} coordinates"));
                }
            }
        }
        match kind {
            ExperimentKind::Percolate => match &self.percolation {
                None => errors.push("percolation: missing block".into()),
                Some(p) => {
                    if p.m >= p.n {
                        errors.push(format!("percolation.m: must be below percolation.n = {}", p.n));
                    }
                    if p.t.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
                        errors.push("percolation.t: must be finite and non-negative".into());
                    }
                    if let (Some(chain), Some(d)) = (&p.chain, dim) {
                        if chain.is_empty() || chain.iter().any(|k| k.len() != d) {
                            errors.push(format!("percolation.chain: needs at least one box index of length {d}"));
                        }
                    }
                    if potential.as_ref().is_some_and(|p| p.range() <= 0.0) {
                        errors.push("potential: percolation needs a positive interaction range".into());
                    }
                }
            },
            ExperimentKind::SpatialMixing => match &self.spatial_mixing {
                None => errors.push("spatial_mixing: missing block".into()),
                Some(s) => {
                    if s.n_values.is_empty() || s.n_values.contains(&0) {
                        errors.push("spatial_mixing.n_values: needs positive entries".into());
                    }
                    if !matches!(s.policy.as_str(), "strict" | "mixing_fallback") {
                        errors.push(format!("spatial_mixing.policy: expected strict or mixing_fallback, got {:?}", s.policy));
                    }
                    if potential.as_ref().is_some_and(|p| p.range() <= 0.0) {
                        errors.push("potential: spatial mixing needs a positive interaction range".into());
                    }
                }
            },
            ExperimentKind::GnzCheck => match &self.gnz {
                None => errors.push("gnz: missing block".into()),
                Some(g) => {
                    match g.statistic.as_str() {
                        "one" | "reduced_boltzmann" => {}
                        "count_in" => {
                            match &g.query {
                                None => errors.push("gnz.query: required for statistic count_in".into()),
                                Some(q) => {
                                    if let Err(e) = q.build() {
                                        errors.push(format!("gnz.query: {e}"));
                                    }
                                }
                            }
                            if g.m.is_none() {
                                errors.push("gnz.m: required for statistic count_in".into());
                            }
                        }
                        other => errors.push(format!("gnz.statistic: expected one, count_in or reduced_boltzmann, got {other:?}")),
                    }
                    if g.samples < 2 {
                        errors.push("gnz.samples: need at least two".into());
                    }
                    if g.runs == 0 {
                        errors.push("gnz.runs: must be positive".into());
                    }
                }
            },
            ExperimentKind::Oracle => match &self.oracle {
                None => errors.push("oracle: missing block".into()),
                Some(o) => {
                    if o.cells == 0 {
                        errors.push("oracle.cells: must be positive".into());
                    }
                    if o.max_occupancy == 0 {
                        errors.push("oracle.max_occupancy: must be positive".into());
                    }
                }
            },
            ExperimentKind::Partition => match &self.partition {
                None => errors.push("partition: missing block".into()),
                Some(p) => match p.mode.as_str() {
                    "series" => {
                        if p.n_max.is_none() {
                            errors.push("partition.n_max: required for mode series".into());
                        }
                        if p.samples_per_term.is_none() {
                            errors.push("partition.samples_per_term: required for mode series".into());
                        }
                    }
                    "monte_carlo" => {
                        if p.samples.is_none() {
                            errors.push("partition.samples: required for mode monte_carlo".into());
                        }
                    }
                    other => errors.push(format!("partition.mode: expected series or monte_carlo, got {other:?}")),
                },
            },
            _ => {}
        }
        if let Some(t) = &self.tolerance {
            if !(t.quadrature > 0.0) {
                errors.push("tolerance.quadrature: must be positive".into());
            }
            if !(t.z > 0.0) {
                errors.push("tolerance.z: must be positive".into());
            }
            if !(t.significance > 0.0 && t.significance < 1.0) {
                errors.push("tolerance.significance: must lie in (0, 1)".into());
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
            experiment = "simulate"
            seed = 1
            lambda = 0.5
            t_end = 2.0
            replicas = 10
            [potential]
            kind = "hard_sphere"
            dim = 1
            radius = 0.5
            [region]
            lower = [0.0]
            upper = [1.0]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn valid_config_passes() {
        base().resolve().validate().unwrap();
    }

    #[test]
    fn missing_seed_is_rejected() {
        let mut c = base();
        c.seed = None;
        let HarnessError::Validation(errs) = c.validate().unwrap_err() else { panic!() };
        assert!(errs.iter().any(|e| e.starts_with("seed")));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = base();
        c.seed = None;
        c.lambda = Some(-1.0);
        c.replicas = Some(0);
        c.region = None;
        c.times = Some(vec![5.0]);
        let HarnessError::Validation(errs) = c.validate().unwrap_err() else { panic!() };
        for key in ["seed", "lambda", "replicas", "region", "times"] {
            assert!(errs.iter().any(|e| e.starts_with(key)), "{key} missing from {errs:?}");
        }
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        assert!(ExperimentConfig::from_toml("seed = 1\nbogus = 2").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"dance\"").is_err());
        let mut c = base();
        c.potential.as_mut().unwrap().kind = "lennard_jones".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_and_toml_agree() {
        let c = base().resolve();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), c);
        let toml_text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&toml_text).unwrap(), c);
    }
}
