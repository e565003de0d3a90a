//! Small statistical toolkit: running moments, binomial intervals, chi-square
//! statistics and total variation distances. P-values live with the caller.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, se: 0.0, samples: 0 }
    }

    /// `z * se`.
    pub fn half_width(&self, z: f64) -> f64 {
        z * self.se
    }

    pub fn upper(&self, z: f64) -> f64 {
        self.mean + z * self.se
    }

    pub fn lower(&self, z: f64) -> f64 {
        self.mean - z * self.se
    }
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Parallel combination (Chan et al.).
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n == 0 { 0.0 } else { libm::sqrt(self.variance() / self.n as f64) };
        Estimate { mean: self.mean, se, samples: self.n }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::default();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Proportion `successes / trials` with the plug-in binomial standard error.
pub fn binomial(successes: u64, trials: u64) -> Estimate {
    if trials == 0 {
        return Estimate { mean: 0.0, se: 0.0, samples: 0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    Estimate { mean: p, se: libm::sqrt(p * (1.0 - p) / n), samples: trials }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Pearson chi-square statistic and degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
}

/// Pools adjacent categories (in the given order) until every pooled expected
/// count reaches `min_expected`; a short last pool is merged into its neighbor.
fn pool(expected: &[f64], min_expected: f64) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, e) in expected.iter().enumerate() {
        acc += e;
        if acc >= min_expected {
            groups.push((start, i + 1));
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < expected.len() {
        match groups.last_mut() {
            Some(last) => last.1 = expected.len(),
            None => groups.push((start, expected.len())),
        }
    }
    groups
}

/// Goodness of fit of observed counts to category probabilities.
pub fn chi_square_goodness(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), got: observed.len() });
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientSamples("no observations".into()));
    }
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let groups = pool(&expected, min_expected);
    if groups.len() < 2 {
        return Err(Error::InsufficientSamples("fewer than two categories after pooling".into()));
    }
    let mut stat = 0.0;
    for &(a, b) in &groups {
        let o: u64 = observed[a..b].iter().sum();
        let e: f64 = expected[a..b].iter().sum();
        stat += (o as f64 - e) * (o as f64 - e) / e;
    }
    Ok(ChiSquare { statistic: stat, dof: groups.len() - 1 })
}

/// Two-sample chi-square homogeneity test on paired category counts.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_expected: f64) -> Result<ChiSquare> {
    let k = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InsufficientSamples("empty sample".into()));
    }
    let total = (na + nb) as f64;
    let pooled: Vec<f64> = (0..k).map(|i| (get(a, i) + get(b, i)) as f64 / total).collect();
    let smaller = na.min(nb) as f64;
    let groups = pool(&pooled.iter().map(|p| p * smaller).collect::<Vec<_>>(), min_expected);
    if groups.len() < 2 {
        return Err(Error::InsufficientSamples("fewer than two categories after pooling".into()));
    }
    let mut stat = 0.0;
    for &(lo, hi) in &groups {
        let oa: u64 = (lo..hi).map(|i| get(a, i)).sum();
        let ob: u64 = (lo..hi).map(|i| get(b, i)).sum();
        let p: f64 = pooled[lo..hi].iter().sum();
        let ea = p * na as f64;
        let eb = p * nb as f64;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    Ok(ChiSquare { statistic: stat, dof: groups.len() - 1 })
}

/// Total variation distance `1/2 sum |p_i - q_i|`; missing entries count as 0.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let k = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..k).map(|i| libm::fabs(get(p, i) - get(q, i))).sum::<f64>()
}

/// Normalized histogram of non-negative integer values.
pub fn histogram(values: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut counts: Vec<u64> = Vec::new();
    for v in values {
        if v >= counts.len() {
            counts.resize(v + 1, 0);
        }
        counts[v] += 1;
    }
    counts
}

pub fn normalize(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Least-squares fit of `ln y = a - rate * t` over the points with `y > 0`;
/// returns `rate`, or `None` with fewer than two usable points.
pub fn fit_exponential_rate(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(&t, &y)| (t, libm::log(y))).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}
