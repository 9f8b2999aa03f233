//! Closed convex sets with exact projections.
//!
//! Node 0 has zero quadrature weight, so it is exempt from every constraint:
//! projections leave it untouched and membership ignores it.

use crate::space::GridFunction;

/// Absolute slack used by membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

pub trait ConvexSet: Sync {
    /// Nearest-point map onto the set.
    fn project(&self, u: &GridFunction) -> GridFunction;

    /// In-place projection of raw node values.
    fn project_in_place(&self, values: &mut [f64]);

    fn contains(&self, u: &GridFunction) -> bool;
}

/// `{ u : u_k >= kappa for k = 1..N }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundSet {
    pub kappa: f64,
}

impl LowerBoundSet {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }
}

impl ConvexSet for LowerBoundSet {
    fn project(&self, u: &GridFunction) -> GridFunction {
        let mut values = u.values().to_vec();
        self.project_in_place(&mut values);
        GridFunction::from_raw(u.grid(), values)
    }

    fn project_in_place(&self, values: &mut [f64]) {
        for v in &mut values[1..] {
            *v = v.max(self.kappa);
        }
    }

    fn contains(&self, u: &GridFunction) -> bool {
        u.values()[1..]
            .iter()
            .all(|&v| v >= self.kappa - MEMBERSHIP_TOL)
    }
}

/// The unconstrained case; the variational inequality reduces to the
/// classical Lavrentiev equation `F u + alpha (u - ubar) = f`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WholeSpace;

impl ConvexSet for WholeSpace {
    fn project(&self, u: &GridFunction) -> GridFunction {
        u.clone()
    }

    fn project_in_place(&self, _values: &mut [f64]) {}

    fn contains(&self, _u: &GridFunction) -> bool {
        true
    }
}
