//! Axis-aligned boxes in R^d and the cube grid used for percolation bookkeeping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A closed axis-aligned box `[lower_0, upper_0] x ... x [lower_{d-1}, upper_{d-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidRegion("dimension must be positive".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidRegion(format!(
                    "axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(BoxRegion { lower, upper })
    }

    /// `[-half_width, half_width]^dim`.
    pub fn centered_cube(dim: usize, half_width: f64) -> Result<Self> {
        BoxRegion::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.dim());
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    /// Squared Euclidean distance from `point` to the box (zero inside).
    pub fn distance_squared(&self, point: &[f64]) -> f64 {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (lo, hi))| {
                let gap = if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                };
                gap * gap
            })
            .sum()
    }

    pub fn distance(&self, point: &[f64]) -> f64 {
        libm::sqrt(self.distance_squared(point))
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// The box grown by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> Result<Self> {
        BoxRegion::new(
            self.lower.iter().map(|v| v - margin).collect(),
            self.upper.iter().map(|v| v + margin).collect(),
        )
    }
}

/// Index of a cube in the grid, an element of `Z^d`.
pub type GridIndex = Vec<i64>;

/// Whether a grid vertex touches the outer layer of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexClass {
    Inner,
    Outer,
}

/// The cubes `Lambda_k` of side `R` centered at `R k` for `k` in
/// `V_n = {k : |k|_inf <= n}`, with the graph joining cubes at sup-distance one.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrid {
    dim: usize,
    cell_size: f64,
    radius: u32,
}

impl BoxGrid {
    pub fn new(dim: usize, cell_size: f64, radius: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegion("grid dimension must be positive".into()));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidRegion(format!("cell size must be positive, got {cell_size}")));
        }
        Ok(BoxGrid { dim, cell_size, radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// `(2n + 1)^d`.
    pub fn vertex_count(&self) -> usize {
        let side = 2 * self.radius as usize + 1;
        side.pow(self.dim as u32)
    }

    fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn contains_index(&self, k: &[i64]) -> bool {
        k.len() == self.dim && k.iter().all(|c| c.unsigned_abs() <= u64::from(self.radius))
    }

    fn check(&self, k: &[i64]) -> Result<()> {
        if k.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: k.len() });
        }
        if !self.contains_index(k) {
            return Err(Error::IndexOutOfGrid { index: k.to_vec(), radius: self.radius });
        }
        Ok(())
    }

    /// Row-major position of `k` in `0..vertex_count()`; lexicographic order of indices.
    pub fn linear_index(&self, k: &[i64]) -> Result<usize> {
        self.check(k)?;
        Ok(self.linear_unchecked(k))
    }

    fn linear_unchecked(&self, k: &[i64]) -> usize {
        let n = i64::from(self.radius);
        k.iter().fold(0usize, |acc, c| acc * self.side() + (c + n) as usize)
    }

    pub fn index_at(&self, linear: usize) -> GridIndex {
        let n = i64::from(self.radius);
        let mut k = vec![0i64; self.dim];
        let mut rest = linear;
        for c in k.iter_mut().rev() {
            *c = (rest % self.side()) as i64 - n;
            rest /= self.side();
        }
        k
    }

    /// All of `V_n` in lexicographic order.
    pub fn vertices(&self) -> impl Iterator<Item = GridIndex> + '_ {
        (0..self.vertex_count()).map(move |i| self.index_at(i))
    }

    /// The closed cube `Lambda_k`.
    pub fn box_of_index(&self, k: &[i64]) -> Result<BoxRegion> {
        self.check(k)?;
        let r = self.cell_size;
        BoxRegion::new(
            k.iter().map(|&c| (c as f64 - 0.5) * r).collect(),
            k.iter().map(|&c| (c as f64 + 0.5) * r).collect(),
        )
    }

    /// `Gamma_n(k)`: grid vertices at sup-distance exactly one from `k`.
    pub fn neighbors(&self, k: &[i64]) -> Result<Vec<GridIndex>> {
        self.check(k)?;
        let mut out = Vec::new();
        let offsets = 3usize.pow(self.dim as u32);
        for code in 0..offsets {
            let mut rest = code;
            let mut j = Vec::with_capacity(self.dim);
            let mut zero = true;
            for &c in k {
                let delta = (rest % 3) as i64 - 1;
                rest /= 3;
                zero &= delta == 0;
                j.push(c + delta);
            }
            if !zero && self.contains_index(&j) {
                out.push(j);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn classify_vertex(&self, k: &[i64]) -> Result<VertexClass> {
        self.check(k)?;
        let sup = k.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
        Ok(if sup == u64::from(self.radius) { VertexClass::Outer } else { VertexClass::Inner })
    }

    /// `Lambda^(n) = [-(n + 1/2) R, (n + 1/2) R]^d`.
    pub fn region(&self) -> BoxRegion {
        BoxRegion::centered_cube(self.dim, (f64::from(self.radius) + 0.5) * self.cell_size)
            .expect("positive cell size")
    }

    /// Linear index of the cube holding `point`. Points on shared faces go to
    /// the lexicographically smallest containing index. `None` outside the grid.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        debug_assert_eq!(point.len(), self.dim);
        let n = i64::from(self.radius);
        let mut linear = 0usize;
        for &x in point {
            let c = libm::ceil(x / self.cell_size - 0.5);
            if !c.is_finite() {
                return None;
            }
            let mut c = c as i64;
            // the lower outer face has no smaller neighbor inside the grid
            if c == -n - 1 && x >= -(n as f64 + 0.5) * self.cell_size {
                c = -n;
            }
            if c.abs() > n {
                return None;
            }
            linear = linear * self.side() + (c + n) as usize;
        }
        Some(linear)
    }

    /// Sup-norm of the grid index at a linear position.
    pub fn sup_norm(&self, linear: usize) -> u32 {
        self.index_at(linear).iter().map(|c| c.unsigned_abs() as u32).max().unwrap_or(0)
    }

    /// Linear neighbor lists for every vertex, in vertex order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.vertices()
            .map(|k| {
                self.neighbors(&k)
                    .expect("vertex in grid")
                    .iter()
                    .map(|j| self.linear_unchecked(j))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_of_index_examples() {
        let g = BoxGrid::new(1, 2.0, 3).unwrap();
        let b = g.box_of_index(&[0]).unwrap();
        assert_eq!((b.lower(), b.upper()), (&[-1.0][..], &[1.0][..]));

        let g = BoxGrid::new(2, 1.0, 1).unwrap();
        let b = g.box_of_index(&[1, -1]).unwrap();
        assert_eq!(b.lower(), &[0.5, -1.5]);
        assert_eq!(b.upper(), &[1.5, -0.5]);

        let g = BoxGrid::new(1, 1.0, 2).unwrap();
        assert!(matches!(g.box_of_index(&[3]), Err(Error::IndexOutOfGrid { .. })));
    }

    #[test]
    fn neighbor_examples() {
        let g = BoxGrid::new(1, 1.0, 2).unwrap();
        assert_eq!(g.neighbors(&[0]).unwrap(), vec![vec![-1], vec![1]]);
        let g = BoxGrid::new(2, 1.0, 1).unwrap();
        assert_eq!(g.neighbors(&[1, 1]).unwrap(), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        let g = BoxGrid::new(1, 1.0, 1).unwrap();
        assert_eq!(g.neighbors(&[1]).unwrap(), vec![vec![0]]);
    }

    #[test]
    fn classify_examples() {
        let g = BoxGrid::new(2, 1.0, 3).unwrap();
        assert_eq!(g.classify_vertex(&[0, 0]).unwrap(), VertexClass::Inner);
        assert_eq!(g.classify_vertex(&[3, 1]).unwrap(), VertexClass::Outer);
        let g = BoxGrid::new(1, 1.0, 0).unwrap();
        assert_eq!(g.classify_vertex(&[0]).unwrap(), VertexClass::Outer);
    }

    #[test]
    fn volume_examples() {
        assert_eq!(BoxRegion::new(vec![0.0; 3], vec![1.0; 3]).unwrap().volume(), 1.0);
        assert_eq!(BoxRegion::new(vec![-1.0, 0.0], vec![1.0, 0.5]).unwrap().volume(), 1.0);
        assert_eq!(BoxRegion::new(vec![2.0], vec![5.0]).unwrap().volume(), 3.0);
    }

    #[test]
    fn invalid_regions_rejected() {
        assert!(BoxRegion::new(vec![1.0], vec![1.0]).is_err());
        assert!(BoxRegion::new(vec![], vec![]).is_err());
        assert!(BoxRegion::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn boxes_tile_grid_region() {
        for dim in 1..=3 {
            let g = BoxGrid::new(dim, 0.7, 2).unwrap();
            assert_eq!(g.vertex_count(), 5usize.pow(dim as u32));
            let total: f64 = g.vertices().map(|k| g.box_of_index(&k).unwrap().volume()).sum();
            let expected = libm::pow(5.0 * 0.7, dim as f64);
            assert!((total - expected).abs() < 1e-12 * expected);
            let region = g.region();
            assert!((region.volume() - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn face_points_go_to_smallest_index() {
        let g = BoxGrid::new(2, 1.0, 2).unwrap();
        let at = g.locate(&[0.5, -0.5]).unwrap();
        assert_eq!(g.index_at(at), vec![0, -1]);
        assert_eq!(g.locate(&[2.6, 0.0]), None);
    }

    proptest! {
        #[test]
        fn neighbors_symmetric(dim in 1usize..=3, n in 0u32..3, seed in any::<u64>()) {
            let g = BoxGrid::new(dim, 1.0, n).unwrap();
            let count = g.vertex_count();
            let a = g.index_at(seed as usize % count);
            let ns = g.neighbors(&a).unwrap();
            prop_assert!(ns.len() < 3usize.pow(dim as u32));
            for j in ns {
                prop_assert!(g.neighbors(&j).unwrap().contains(&a));
            }
        }

        #[test]
        fn linear_index_roundtrip(dim in 1usize..=3, n in 0u32..4, seed in any::<u64>()) {
            let g = BoxGrid::new(dim, 1.0, n).unwrap();
            let i = seed as usize % g.vertex_count();
            prop_assert_eq!(g.linear_index(&g.index_at(i)).unwrap(), i);
        }

        #[test]
        fn located_box_contains_point(x in -2.49f64..2.49, y in -2.49f64..2.49) {
            let g = BoxGrid::new(2, 1.0, 2).unwrap();
            let i = g.locate(&[x, y]).unwrap();
            prop_assert!(g.box_of_index(&g.index_at(i)).unwrap().contains(&[x, y]));
        }

        // Points of an inner cube are at least R away from anything outside
        // the cube and its neighbors.
        #[test]
        fn inner_cube_separation(
            dim in 1usize..=3,
            u in proptest::collection::vec(0.0f64..=1.0, 3),
            v in proptest::collection::vec(-3.0f64..3.0, 3),
            pick in any::<u64>(),
        ) {
            let r = 1.3;
            let g = BoxGrid::new(dim, r, 2).unwrap();
            let inner: Vec<GridIndex> = g
                .vertices()
                .filter(|k| g.classify_vertex(k).unwrap() == VertexClass::Inner)
                .collect();
            let k = &inner[pick as usize % inner.len()];
            let cube = g.box_of_index(k).unwrap();
            let x: Vec<f64> = (0..dim)
                .map(|i| cube.lower()[i] + u[i] * (cube.upper()[i] - cube.lower()[i]))
                .collect();
            let y: Vec<f64> = (0..dim).map(|i| v[i] * r * 2.0).collect();
            let mut near = cube.contains(&y);
            for j in g.neighbors(k).unwrap() {
                near |= g.box_of_index(&j).unwrap().contains(&y);
            }
            if !near {
                let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                prop_assert!(d2 >= r * r * (1.0 - 1e-12));
            }
        }
    }
}
