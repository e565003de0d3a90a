//! Brute-force ground truth on discretized instances: occupancy chains over a
//! uniform cell grid, their exact stationary laws, and the coupled discrete
//! chain computed by uniformization.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::config::PointConfiguration;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::gibbs::GibbsSpec;
use crate::space::BoxRegion;
use crate::stats::{chi_square_goodness, tv_distance, ChiSquare};

/// Upper limit on the raw occupancy state space `(c+1)^cells`.
pub const STATE_SPACE_CAP: usize = 1_000_000;
/// Largest feasible state count handed to the dense solver.
pub const DENSE_CAP: usize = 4096;

/// Occupancy vector, one entry per cell.
pub type Occupancy = Vec<u8>;

#[derive(Clone, Debug)]
pub struct DiscretizedInstance {
    spec: GibbsSpec,
    cells_per_dim: usize,
    max_occupancy: u8,
    cells: Vec<BoxRegion>,
    centers: Vec<Vec<f64>>,
    /// Feasible occupancy vectors (finite energy), lexicographic order.
    states: Vec<Occupancy>,
    lookup: BTreeMap<Occupancy, usize>,
}

fn log_factorial(n: u8) -> f64 {
    (2..=u32::from(n)).map(|k| libm::log(f64::from(k))).sum()
}

impl DiscretizedInstance {
    /// Uniform grid with `cells_per_dim` cells per axis; every cell holds at
    /// most `max_occupancy` points, all at the cell center.
    pub fn new(spec: &GibbsSpec, cells_per_dim: usize, max_occupancy: u8) -> Result<Self> {
        if cells_per_dim == 0 || max_occupancy == 0 {
            return Err(Error::InvalidArgument("cells_per_dim and max_occupancy must be positive".into()));
        }
        let d = spec.dim();
        let count = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(cells_per_dim));
        let raw = count.and_then(|c| (0..c).try_fold(1usize, |acc, _| acc.checked_mul(usize::from(max_occupancy) + 1)));
        let count = match (count, raw) {
            (Some(c), Some(r)) if r <= STATE_SPACE_CAP => c,
            _ => return Err(Error::StateSpaceTooLarge { size: raw.unwrap_or(usize::MAX), cap: STATE_SPACE_CAP }),
        };
        let region = spec.region();
        let mut cells = Vec::with_capacity(count);
        let mut centers = Vec::with_capacity(count);
        for linear in 0..count {
            let mut rest = linear;
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            for a in (0..d).rev() {
                let i = rest % cells_per_dim;
                rest /= cells_per_dim;
                let h = (region.upper()[a] - region.lower()[a]) / cells_per_dim as f64;
                lo[a] = region.lower()[a] + i as f64 * h;
                hi[a] = if i + 1 == cells_per_dim { region.upper()[a] } else { region.lower()[a] + (i + 1) as f64 * h };
            }
            let cell = BoxRegion::new(lo, hi)?;
            centers.push(cell.center());
            cells.push(cell);
        }
        let mut inst = DiscretizedInstance {
            spec: spec.clone(),
            cells_per_dim,
            max_occupancy,
            cells,
            centers,
            states: Vec::new(),
            lookup: BTreeMap::new(),
        };
        inst.enumerate();
        Ok(inst)
    }

    /// Depth-first enumeration; energies only grow by adding points, so
    /// infeasible prefixes are pruned.
    fn enumerate(&mut self) {
        let n = self.cells.len();
        let mut occ = vec![0u8; n];
        let mut eta = PointConfiguration::empty(self.spec.dim());
        let mut out = Vec::new();
        self.extend(0, &mut occ, &mut eta, &mut out);
        out.sort();
        self.lookup = out.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        self.states = out;
    }

    fn extend(&self, cell: usize, occ: &mut Occupancy, eta: &mut PointConfiguration, out: &mut Vec<Occupancy>) {
        if cell == self.cells.len() {
            out.push(occ.clone());
            return;
        }
        self.extend(cell + 1, occ, eta, out);
        let mut added = 0;
        while added < self.max_occupancy {
            if !self.spec.influence(&self.centers[cell], eta).is_finite() {
                break;
            }
            eta.add_point(&self.centers[cell]).expect("cell centers lie in the region");
            added += 1;
            occ[cell] = added;
            self.extend(cell + 1, occ, eta, out);
        }
        for _ in 0..added {
            eta.remove_point(&self.centers[cell]);
        }
        occ[cell] = 0;
    }

    pub fn spec(&self) -> &GibbsSpec {
        &self.spec
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn max_occupancy(&self) -> u8 {
        self.max_occupancy
    }

    pub fn cells(&self) -> &[BoxRegion] {
        &self.cells
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// `(c+1)^cells`, feasible or not.
    pub fn raw_state_count(&self) -> usize {
        (0..self.cells.len()).fold(1, |acc, _| acc * (usize::from(self.max_occupancy) + 1))
    }

    pub fn states(&self) -> &[Occupancy] {
        &self.states
    }

    pub fn state_index(&self, occ: &[u8]) -> Option<usize> {
        self.lookup.get(occ).copied()
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let region = self.spec.region();
        if !region.contains(x) {
            return None;
        }
        let mut linear = 0;
        for (a, &xa) in x.iter().enumerate() {
            let h = (region.upper()[a] - region.lower()[a]) / self.cells_per_dim as f64;
            let i = (libm::floor((xa - region.lower()[a]) / h) as usize).min(self.cells_per_dim - 1);
            linear = linear * self.cells_per_dim + i;
        }
        Some(linear)
    }

    /// Occupancy vector of a continuous configuration; `None` if some cell
    /// exceeds the occupancy cap or a point lies outside the region.
    pub fn occupancy_of(&self, eta: &PointConfiguration) -> Option<Occupancy> {
        let mut occ = vec![0u8; self.cells.len()];
        for (x, m) in eta.atoms() {
            let c = self.cell_of(x)?;
            let next = u32::from(occ[c]) + m;
            if next > u32::from(self.max_occupancy) {
                return None;
            }
            occ[c] = next as u8;
        }
        Some(occ)
    }

    /// The configuration placing `occ[c]` points at the center of cell `c`.
    pub fn configuration(&self, occ: &[u8]) -> PointConfiguration {
        PointConfiguration::from_atoms(
            self.spec.dim(),
            occ.iter().enumerate().filter(|(_, &n)| n > 0).map(|(c, &n)| (self.centers[c].clone(), u32::from(n))),
        )
        .expect("cell centers are finite")
    }

    /// Birth rate into cell `c` from state `occ`: `λ vol(c) e^{-W(center, η + ξ)}`.
    pub fn birth_rate(&self, occ: &[u8], c: usize) -> f64 {
        if occ[c] >= self.max_occupancy {
            return 0.0;
        }
        let eta = self.configuration(occ);
        self.spec.lambda() * self.cells[c].volume() * self.spec.influence(&self.centers[c], &eta).boltzmann()
    }

    /// Unnormalized discrete Gibbs weight `Π (λ v_c)^{n_c} / n_c! · e^{-H_Λ}` in log form.
    pub fn log_weight(&self, occ: &[u8]) -> f64 {
        let eta = self.configuration(occ);
        let h = match self.spec.conditional_energy(&eta) {
            Ok(ExtendedReal::Finite(h)) => h,
            _ => return f64::NEG_INFINITY,
        };
        let mut lw = -h;
        for (c, &n) in occ.iter().enumerate() {
            if n > 0 {
                lw += f64::from(n) * libm::log(self.spec.lambda() * self.cells[c].volume()) - log_factorial(n);
            }
        }
        lw
    }

    /// Generator entries `(from, to, rate)` between feasible states.
    pub fn transitions(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            let mut next = s.clone();
            for c in 0..s.len() {
                let rate = self.birth_rate(s, c);
                if rate > 0.0 {
                    next[c] += 1;
                    if let Some(j) = self.state_index(&next) {
                        out.push((i, j, rate));
                    }
                    next[c] -= 1;
                }
                if s[c] > 0 {
                    next[c] -= 1;
                    let j = self.state_index(&next).expect("feasibility is closed under removal");
                    out.push((i, j, f64::from(s[c])));
                    next[c] += 1;
                }
            }
        }
        out
    }
}

pub fn discretize(spec: &GibbsSpec, cells_per_dim: usize) -> Result<DiscretizedInstance> {
    DiscretizedInstance::new(spec, cells_per_dim, 1)
}

#[derive(Clone, Debug)]
pub struct DiscreteChain {
    /// Dense generator over the reachable component, indexed like `states`.
    pub generator: DMatrix<f64>,
    /// Instance state indices of the reachable component.
    pub states: Vec<usize>,
    /// Stationary law over the reachable component.
    pub pi: Vec<f64>,
    /// Feasible states not reachable from the empty state.
    pub unreachable: usize,
    /// `max |πQ|`.
    pub residual: f64,
    /// `max |π_i - w_i|` against the normalized closed-form weights.
    pub gibbs_discrepancy: f64,
    /// `max |π_i - w_i| / w_i`.
    pub relative_discrepancy: f64,
    /// `max |π_i Q_ij - π_j Q_ji|`.
    pub balance_defect: f64,
}

impl DiscreteChain {
    /// Stationary mass of an instance state index (0 outside the component).
    pub fn probability_of_state(&self, state: usize) -> f64 {
        self.states.binary_search(&state).map(|i| self.pi[i]).unwrap_or(0.0)
    }

    pub fn probability(&self, inst: &DiscretizedInstance, occ: &[u8]) -> f64 {
        inst.state_index(occ).map(|s| self.probability_of_state(s)).unwrap_or(0.0)
    }

    /// Law of instance state indices, including zeros outside the component.
    pub fn full_law(&self, inst: &DiscretizedInstance) -> Vec<f64> {
        let mut law = vec![0.0; inst.states().len()];
        for (&s, &p) in self.states.iter().zip(&self.pi) {
            law[s] = p;
        }
        law
    }

    /// `Pr[cell c occupied]` for each cell.
    pub fn occupation(&self, inst: &DiscretizedInstance) -> Vec<f64> {
        let mut out = vec![0.0; inst.cells().len()];
        for (&s, &p) in self.states.iter().zip(&self.pi) {
            for (o, &n) in out.iter_mut().zip(&inst.states()[s]) {
                if n > 0 {
                    *o += p;
                }
            }
        }
        out
    }

    /// Expected number of points whose cell center lies in `region`.
    pub fn expected_count_in(&self, inst: &DiscretizedInstance, region: &BoxRegion) -> f64 {
        let inside: Vec<bool> = inst.centers().iter().map(|c| region.contains(c)).collect();
        self.states
            .iter()
            .zip(&self.pi)
            .map(|(&s, &p)| p * inst.states()[s].iter().zip(&inside).filter(|(_, &i)| i).map(|(&n, _)| f64::from(n)).sum::<f64>())
            .sum()
    }
}

/// States reachable from the empty state through positive rates.
fn reachable(inst: &DiscretizedInstance, transitions: &[(usize, usize, f64)]) -> Vec<usize> {
    let n = inst.states().len();
    let mut adj = vec![Vec::new(); n];
    for &(i, j, r) in transitions {
        if r > 0.0 {
            adj[i].push(j);
        }
    }
    let empty = inst.state_index(&vec![0; inst.cells().len()]).expect("the empty state is feasible");
    let mut seen = vec![false; n];
    seen[empty] = true;
    let mut queue = VecDeque::from([empty]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

/// Solves `πQ = 0, Σπ = 1` densely on the component reachable from the empty
/// state and cross-checks against the closed-form Gibbs weights.
pub fn exact_stationary(inst: &DiscretizedInstance) -> Result<DiscreteChain> {
    let transitions = inst.transitions();
    let states = reachable(inst, &transitions);
    let n = states.len();
    if n > DENSE_CAP {
        return Err(Error::StateSpaceTooLarge { size: n, cap: DENSE_CAP });
    }
    let mut local = vec![usize::MAX; inst.states().len()];
    for (i, &s) in states.iter().enumerate() {
        local[s] = i;
    }
    let mut q = DMatrix::<f64>::zeros(n, n);
    for &(i, j, r) in &transitions {
        let (a, b) = (local[i], local[j]);
        if a != usize::MAX && b != usize::MAX {
            q[(a, b)] += r;
            q[(a, a)] -= r;
        }
    }
    let mut system = q.transpose();
    for c in 0..n {
        system[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Contract("singular generator on the reachable component".into()))?;
    let pi: Vec<f64> = pi.iter().copied().collect();
    let pv = DVector::from_column_slice(&pi);
    let residual = (q.transpose() * &pv).amax();
    if residual > 1e-10 {
        return Err(Error::Contract(format!("stationary residual {residual:e} exceeds 1e-10")));
    }
    let logs: Vec<f64> = states.iter().map(|&s| inst.log_weight(&inst.states()[s])).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| libm::exp(l - top)).collect();
    let z: f64 = raw.iter().sum();
    let mut gibbs_discrepancy = 0.0f64;
    let mut relative_discrepancy = 0.0f64;
    for (p, w) in pi.iter().zip(&raw) {
        let w = w / z;
        gibbs_discrepancy = gibbs_discrepancy.max(libm::fabs(p - w));
        if w > 0.0 {
            relative_discrepancy = relative_discrepancy.max(libm::fabs(p - w) / w);
        }
    }
    if gibbs_discrepancy > 1e-10 {
        return Err(Error::Contract(format!("solved law differs from the Gibbs weights by {gibbs_discrepancy:e}")));
    }
    let mut balance_defect = 0.0f64;
    for a in 0..n {
        for b in (a + 1)..n {
            balance_defect = balance_defect.max(libm::fabs(pi[a] * q[(a, b)] - pi[b] * q[(b, a)]));
        }
    }
    Ok(DiscreteChain {
        generator: q,
        states,
        pi,
        unreachable: inst.states().len() - n,
        residual,
        gibbs_discrepancy,
        relative_discrepancy,
        balance_defect,
    })
}

/// Maps a fine occupancy vector onto the coarse grid with half as many cells
/// per axis; `None` if a coarse cell overflows.
fn coarsen(fine: &DiscretizedInstance, coarse: &DiscretizedInstance, occ: &[u8]) -> Option<usize> {
    let mut out = vec![0u8; coarse.cells().len()];
    for (c, &n) in occ.iter().enumerate() {
        if n > 0 {
            let k = coarse.cell_of(&fine.centers()[c])?;
            let next = u16::from(out[k]) + u16::from(n);
            if next > u16::from(coarse.max_occupancy()) {
                return None;
            }
            out[k] = next as u8;
        }
    }
    coarse.state_index(&out)
}

/// Richardson-style bias estimate `2 TV(π_h, coarsen(π_{h/2}))` for the
/// occupancy law at the instance's resolution.
pub fn discretization_term(inst: &DiscretizedInstance, chain: &DiscreteChain) -> Result<f64> {
    let fine = DiscretizedInstance::new(inst.spec(), 2 * inst.cells_per_dim(), inst.max_occupancy())?;
    let fine_chain = exact_stationary(&fine)?;
    let mut coarse_law = vec![0.0; inst.states().len()];
    let mut overflow = 0.0;
    for (&s, &p) in fine_chain.states.iter().zip(&fine_chain.pi) {
        match coarsen(&fine, inst, &fine.states()[s]) {
            Some(k) => coarse_law[k] += p,
            None => overflow += p,
        }
    }
    Ok(2.0 * (tv_distance(&chain.full_law(inst), &coarse_law) + 0.5 * overflow))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub samples: u64,
    /// Samples whose occupancy vector is not a state of positive mass.
    pub off_support: u64,
    pub tv: f64,
    pub chi_square: ChiSquare,
    pub discretization_term: f64,
}

impl ComparisonReport {
    pub fn passes(&self, budget: f64) -> bool {
        self.tv <= budget + self.discretization_term
    }
}

/// Empirical occupancy law of continuous samples against `π`.
pub fn compare_to_simulation(inst: &DiscretizedInstance, chain: &DiscreteChain, samples: &[PointConfiguration], discretization_term: f64) -> Result<ComparisonReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples("no simulation samples".into()));
    }
    let mut counts = vec![0u64; chain.states.len()];
    let mut off_support = 0u64;
    for eta in samples {
        let idx = inst.occupancy_of(eta).and_then(|o| inst.state_index(&o)).and_then(|s| chain.states.binary_search(&s).ok());
        match idx {
            Some(i) if chain.pi[i] > 0.0 => counts[i] += 1,
            _ => off_support += 1,
        }
    }
    let n = samples.len() as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let tv = tv_distance(&empirical, &chain.pi) + 0.5 * off_support as f64 / n;
    let chi_square = chi_square_goodness(&counts, &chain.pi, 5.0)?;
    Ok(ComparisonReport { samples: samples.len() as u64, off_support, tv, chi_square, discretization_term })
}

/// The identity coupling of two discretized chains sharing cells and
/// activity, differing in boundary conditions.
#[derive(Clone, Debug)]
pub struct CoupledDiscreteChain {
    pairs: Vec<(usize, usize)>,
    transitions: Vec<(usize, usize, f64)>,
    exit: Vec<f64>,
}

impl CoupledDiscreteChain {
    /// Pair states reachable from `(start1, start2)`.
    pub fn new(first: &DiscretizedInstance, second: &DiscretizedInstance, start1: &[u8], start2: &[u8]) -> Result<Self> {
        if first.cells_per_dim != second.cells_per_dim || first.max_occupancy != second.max_occupancy || first.spec.region() != second.spec.region() {
            return Err(Error::Contract("coupled instances must share the cell grid".into()));
        }
        let s1 = first.state_index(start1).ok_or_else(|| Error::InvalidArgument("first start is not a feasible state".into()))?;
        let s2 = second.state_index(start2).ok_or_else(|| Error::InvalidArgument("second start is not a feasible state".into()))?;
        let mut index = BTreeMap::new();
        let mut pairs = vec![(s1, s2)];
        index.insert((s1, s2), 0usize);
        let mut transitions = Vec::new();
        let mut k = 0;
        while k < pairs.len() {
            let (a, b) = pairs[k];
            let (x, y) = (&first.states()[a], &second.states()[b]);
            let mut moves: Vec<(Occupancy, Occupancy, f64)> = Vec::new();
            for c in 0..x.len() {
                let (r1, r2) = (first.birth_rate(x, c), second.birth_rate(y, c));
                let both = r1.min(r2);
                let mut bx = x.clone();
                bx[c] += 1;
                let mut by = y.clone();
                by[c] += 1;
                if both > 0.0 {
                    moves.push((bx.clone(), by.clone(), both));
                }
                if r1 > both {
                    moves.push((bx, y.clone(), r1 - both));
                }
                if r2 > both {
                    moves.push((x.clone(), by, r2 - both));
                }
                let shared = x[c].min(y[c]);
                let mut dx = x.clone();
                let mut dy = y.clone();
                if x[c] > 0 {
                    dx[c] -= 1;
                }
                if y[c] > 0 {
                    dy[c] -= 1;
                }
                if shared > 0 {
                    moves.push((dx.clone(), dy.clone(), f64::from(shared)));
                }
                if x[c] > shared {
                    moves.push((dx, y.clone(), f64::from(x[c] - shared)));
                }
                if y[c] > shared {
                    moves.push((x.clone(), dy, f64::from(y[c] - shared)));
                }
            }
            for (nx, ny, rate) in moves {
                let target = (
                    first.state_index(&nx).ok_or_else(|| Error::Contract("coupled move left the feasible set".into()))?,
                    second.state_index(&ny).ok_or_else(|| Error::Contract("coupled move left the feasible set".into()))?,
                );
                let j = *index.entry(target).or_insert_with(|| {
                    pairs.push(target);
                    pairs.len() - 1
                });
                if pairs.len() > STATE_SPACE_CAP {
                    return Err(Error::StateSpaceTooLarge { size: pairs.len(), cap: STATE_SPACE_CAP });
                }
                transitions.push((k, j, rate));
            }
            k += 1;
        }
        let mut exit = vec![0.0; pairs.len()];
        for &(i, _, r) in &transitions {
            exit[i] += r;
        }
        Ok(CoupledDiscreteChain { pairs, transitions, exit })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Law of the pair state at time `t` by uniformization, truncated once the
    /// remaining Poisson mass falls below `tol`.
    pub fn law_at(&self, t: f64, tol: f64) -> Vec<f64> {
        let n = self.pairs.len();
        let rate = self.exit.iter().copied().fold(0.0, f64::max);
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        if rate == 0.0 || t <= 0.0 {
            return p;
        }
        let mu = rate * t;
        let mut out = vec![0.0; n];
        // accumulate Poisson weights in log space to survive large mu
        let mut log_w = -mu;
        let mut used = 0.0;
        let mut step = 0u64;
        loop {
            let w = libm::exp(log_w);
            for (o, v) in out.iter_mut().zip(&p) {
                *o += w * v;
            }
            used += w;
            if (1.0 - used < tol && step as f64 > mu) || step > 100_000 + 10 * mu as u64 {
                break;
            }
            let mut next: Vec<f64> = p.iter().zip(&self.exit).map(|(v, e)| v * (1.0 - e / rate)).collect();
            for &(i, j, r) in &self.transitions {
                next[j] += p[i] * r / rate;
            }
            p = next;
            step += 1;
            log_w += libm::log(mu) - libm::log(step as f64);
        }
        out
    }

    /// `Pr[the chains agree at time t]`; agreement is absorbing when both
    /// instances share the boundary.
    pub fn coalescence_probability(&self, first: &DiscretizedInstance, second: &DiscretizedInstance, t: f64) -> f64 {
        let law = self.law_at(t, 1e-13);
        self.pairs
            .iter()
            .zip(&law)
            .filter(|((a, b), _)| first.states()[*a] == second.states()[*b])
            .map(|(_, p)| p)
            .sum()
    }
}
