//! Discrete `L^2(0, 1)` on a uniform grid.
//!
//! A [`GridFunction`] stores one value per node `t_k = k h`, `k = 0..=N`.
//! Integrals use the backward rectangle rule, so node 0 carries quadrature
//! weight zero: it is stored (the decay operator is defined there) but never
//! contributes to inner products, norms or cumulative integrals.

use crate::error::{Error, Result};

/// Uniform partition of `[0, 1]` into `n_intervals` pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n_intervals: usize,
}

impl Grid {
    pub const DEFAULT_INTERVALS: usize = 200;

    pub fn new(n_intervals: usize) -> Result<Self> {
        if n_intervals == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { n_intervals })
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    /// Number of stored nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n_intervals as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        // Divide rather than multiply by the step so that t_N == 1 exactly.
        k as f64 / self.n_intervals as f64
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n_intervals != other.n_intervals {
            return Err(Error::GridMismatch {
                left: self.n_intervals,
                right: other.n_intervals,
            });
        }
        Ok(())
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n_intervals: Self::DEFAULT_INTERVALS,
        }
    }
}

/// A real function sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps node values; rejects a wrong length or non-finite entries.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already known to be valid.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    /// `h * sum_{k=1..N} u_k v_k`.
    pub fn inner_product(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(weighted_dot(self.grid.step(), &self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        weighted_dot(self.grid.step(), &self.values, &self.values).sqrt()
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(weighted_dist(self.grid.step(), &self.values, &other.values))
    }

    /// Backward-rectangle antiderivative: `U_0 = 0`, `U_k = h sum_{j=1..k} u_j`.
    pub fn cumint_backward(&self) -> GridFunction {
        let mut out = vec![0.0; self.values.len()];
        cumint_into(self.grid.step(), &self.values, &mut out);
        Self::from_raw(self.grid, out)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<GridFunction> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        self.same_grid(other)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Result<GridFunction> {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    /// Largest `|u_k|` over the weighted nodes `1..=N`.
    pub fn max_abs_weighted(&self) -> f64 {
        self.values[1..].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn weighted_dot(step: f64, a: &[f64], b: &[f64]) -> f64 {
    step * a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>()
}

pub(crate) fn weighted_dist(step: f64, a: &[f64], b: &[f64]) -> f64 {
    (step
        * a[1..]
            .iter()
            .zip(&b[1..])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>())
    .sqrt()
}

pub(crate) fn cumint_into(step: f64, u: &[f64], out: &mut [f64]) {
    let mut acc = 0.0;
    out[0] = 0.0;
    for (o, &v) in out[1..].iter_mut().zip(&u[1..]) {
        acc += v;
        *o = step * acc;
    }
}
