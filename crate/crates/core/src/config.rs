//! Finite point configurations (counting measures) on R^d.
//!
//! Atoms are kept in a canonical lexicographic order of their coordinates so
//! that set operations are linear merges and energies are summed in a
//! reproducible order. Two locations are equal only if their coordinates are
//! bitwise equal.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, KahanSum};
use crate::potential::PotentialSpec;
use crate::space::BoxRegion;

/// A finite sum of Dirac measures with positive integer weights.
#[derive(Clone, Debug)]
pub struct PointConfiguration {
    dim: usize,
    coords: Vec<f64>,
    mult: Vec<u32>,
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn check_point(dim: usize, p: &[f64]) -> Result<()> {
    if p.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    if p.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument(format!("point coordinates must be finite, got {p:?}")));
    }
    Ok(())
}

impl PartialEq for PointConfiguration {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.mult == other.mult
            && self.coords.len() == other.coords.len()
            && self.coords.iter().zip(&other.coords).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for PointConfiguration {}

impl PointConfiguration {
    /// The empty configuration.
    pub fn empty(dim: usize) -> Self {
        PointConfiguration { dim, coords: Vec::new(), mult: Vec::new() }
    }

    /// Builds a configuration from `(location, multiplicity)` pairs; repeated
    /// locations are merged and zero multiplicities dropped.
    pub fn from_atoms<I, P>(dim: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (P, u32)>,
        P: AsRef<[f64]>,
    {
        let mut out = PointConfiguration::empty(dim);
        for (p, m) in atoms {
            let p = p.as_ref();
            check_point(dim, p)?;
            out.insert(p, m);
        }
        Ok(out)
    }

    /// One unit atom per point.
    pub fn from_points<I, P>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        PointConfiguration::from_atoms(dim, points.into_iter().map(|p| (p, 1)))
    }

    /// Points given as a flat coordinate buffer of length `dim * count`.
    pub fn from_flat(dim: usize, coords: &[f64]) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() });
        }
        PointConfiguration::from_points(dim, coords.chunks_exact(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct locations.
    pub fn atom_count(&self) -> usize {
        self.mult.len()
    }

    /// Total mass `eta(R^d)`, counting multiplicity.
    pub fn count(&self) -> u64 {
        self.mult.iter().map(|&m| u64::from(m)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }

    /// Every multiplicity equals one.
    pub fn is_simple(&self) -> bool {
        self.mult.iter().all(|&m| m == 1)
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn multiplicity(&self, i: usize) -> u32 {
        self.mult[i]
    }

    /// Atoms in canonical order.
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], u32)> + '_ {
        self.coords.chunks_exact(self.dim.max(1)).zip(self.mult.iter().copied())
    }

    /// Every point, repeated according to multiplicity.
    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.atoms().flat_map(|(p, m)| core::iter::repeat_n(p, m as usize))
    }

    /// The `k`-th point in canonical order, counting multiplicity.
    pub fn nth_point(&self, k: u64) -> Option<&[f64]> {
        if self.is_simple() {
            return (k < self.mult.len() as u64).then(|| self.location(k as usize));
        }
        let mut left = k;
        for (p, m) in self.atoms() {
            if left < u64::from(m) {
                return Some(p);
            }
            left -= u64::from(m);
        }
        None
    }

    fn search(&self, p: &[f64]) -> core::result::Result<usize, usize> {
        let (mut lo, mut hi) = (0, self.mult.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match cmp_points(self.location(mid), p) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Ok(mid),
            }
        }
        Err(lo)
    }

    fn insert(&mut self, p: &[f64], m: u32) {
        if m == 0 {
            return;
        }
        match self.search(p) {
            Ok(i) => self.mult[i] += m,
            Err(i) => {
                let at = i * self.dim;
                self.coords.splice(at..at, p.iter().copied());
                self.mult.insert(i, m);
            }
        }
    }

    /// Multiplicity of the exact location `p` (zero if absent).
    pub fn multiplicity_at(&self, p: &[f64]) -> u32 {
        match self.search(p) {
            Ok(i) => self.mult[i],
            Err(_) => 0,
        }
    }

    /// `eta + delta_p`.
    pub fn add_point(&mut self, p: &[f64]) -> Result<()> {
        check_point(self.dim, p)?;
        self.insert(p, 1);
        Ok(())
    }

    /// `eta - delta_p`; returns false if `p` is not an atom.
    pub fn remove_point(&mut self, p: &[f64]) -> bool {
        match self.search(p) {
            Ok(i) => {
                self.mult[i] -= 1;
                if self.mult[i] == 0 {
                    self.mult.remove(i);
                    self.coords.drain(i * self.dim..(i + 1) * self.dim);
                }
                true
            }
            Err(_) => false,
        }
    }

    fn merge_with(&self, other: &Self, rule: impl Fn(u32, u32) -> u32) -> Self {
        assert_eq!(self.dim, other.dim, "configurations of different dimension");
        let mut out = PointConfiguration::empty(self.dim);
        let (mut i, mut j) = (0, 0);
        let (n, k) = (self.mult.len(), other.mult.len());
        while i < n || j < k {
            let ord = if i == n {
                Ordering::Greater
            } else if j == k {
                Ordering::Less
            } else {
                cmp_points(self.location(i), other.location(j))
            };
            let (p, a, b) = match ord {
                Ordering::Less => {
                    i += 1;
                    (self.location(i - 1), self.mult[i - 1], 0)
                }
                Ordering::Greater => {
                    j += 1;
                    (other.location(j - 1), 0, other.mult[j - 1])
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (self.location(i - 1), self.mult[i - 1], other.mult[j - 1])
                }
            };
            let m = rule(a, b);
            if m > 0 {
                out.coords.extend_from_slice(p);
                out.mult.push(m);
            }
        }
        out
    }

    /// `eta ∩ xi`: pointwise minimum of multiplicities.
    pub fn intersect(&self, other: &Self) -> Self {
        self.merge_with(other, u32::min)
    }

    /// `eta ∪ xi`: pointwise maximum of multiplicities.
    pub fn union(&self, other: &Self) -> Self {
        self.merge_with(other, u32::max)
    }

    /// `eta \ xi`: multiplicities `max(a - b, 0)`.
    pub fn subtract(&self, other: &Self) -> Self {
        self.merge_with(other, u32::saturating_sub)
    }

    /// `eta ⊕ xi = (eta \ xi) + (xi \ eta)`, i.e. multiplicities `|a - b|`.
    pub fn sym_diff(&self, other: &Self) -> Self {
        self.merge_with(other, |a, b| a.abs_diff(b))
    }

    /// Measure sum `eta + xi`.
    pub fn sum(&self, other: &Self) -> Self {
        self.merge_with(other, |a, b| a + b)
    }

    /// `eta_Λ`: the atoms located in the closed box.
    pub fn restrict(&self, region: &BoxRegion) -> Self {
        self.filter(|p| region.contains(p))
    }

    /// The atoms located outside the closed box.
    pub fn restrict_complement(&self, region: &BoxRegion) -> Self {
        self.filter(|p| !region.contains(p))
    }

    pub fn filter(&self, keep: impl Fn(&[f64]) -> bool) -> Self {
        let mut out = PointConfiguration::empty(self.dim);
        for (p, m) in self.atoms() {
            if keep(p) {
                out.coords.extend_from_slice(p);
                out.mult.push(m);
            }
        }
        out
    }

    /// `eta(Λ)`.
    pub fn count_in(&self, region: &BoxRegion) -> u64 {
        self.atoms().filter(|(p, _)| region.contains(p)).map(|(_, m)| u64::from(m)).sum()
    }

    pub fn is_supported_in(&self, region: &BoxRegion) -> bool {
        self.atoms().all(|(p, _)| region.contains(p))
    }

    /// `H(eta)`: `phi` summed over unordered pairs of points, counted with
    /// multiplicity.
    pub fn energy(&self, phi: &PotentialSpec) -> ExtendedReal {
        let mut acc = KahanSum::default();
        for i in 0..self.mult.len() {
            let xi = self.location(i);
            let mi = self.mult[i];
            if mi > 1 {
                let pairs = mi * (mi - 1) / 2;
                let v = phi.evaluate(xi, xi).times(pairs);
                if !v.is_finite() {
                    return ExtendedReal::Infinite;
                }
                acc.add(v);
            }
            for j in i + 1..self.mult.len() {
                let v = phi.evaluate(xi, self.location(j)).times(mi * self.mult[j]);
                if !v.is_finite() {
                    return ExtendedReal::Infinite;
                }
                acc.add(v);
            }
        }
        acc.total()
    }

    /// `W(x, eta)`: sum of `phi(x, y)` over the points `y` of `eta`.
    pub fn influence(&self, x: &[f64], phi: &PotentialSpec) -> ExtendedReal {
        let mut acc = KahanSum::default();
        for (p, m) in self.atoms() {
            let v = phi.evaluate(x, p).times(m);
            if !v.is_finite() {
                return ExtendedReal::Infinite;
            }
            acc.add(v);
        }
        acc.total()
    }

    /// True iff every finite sub-configuration has finite energy, which for
    /// pair potentials means no pair (self-pairs included) has `phi = inf`.
    pub fn is_feasible(&self, phi: &PotentialSpec) -> bool {
        self.energy(phi).is_finite()
    }
}

/// `H_Λ(eta | xi) = H(eta) + sum over x in eta of W(x, xi restricted to Λ^c)`.
pub fn conditional_energy(
    eta: &PointConfiguration,
    boundary: &PointConfiguration,
    region: &BoxRegion,
    phi: &PotentialSpec,
) -> Result<ExtendedReal> {
    if !eta.is_supported_in(region) {
        return Err(Error::Contract("configuration not supported in the region".into()));
    }
    let outside = boundary.restrict_complement(region);
    let mut acc = KahanSum::default();
    acc.add(eta.energy(phi));
    for (p, m) in eta.atoms() {
        acc.add(outside.influence(p, phi).times(m));
    }
    Ok(acc.total())
}
