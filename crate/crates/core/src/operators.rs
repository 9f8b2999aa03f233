//! Monotone operators on grid functions.

use crate::error::{Error, Result};
use crate::space::{cumint_into, GridFunction};

/// Structural constants an operator declares about itself.
///
/// `tau` is a cocoercivity constant valid on the pointwise set `u >= kappa`,
/// `lipschitz` bounds `||F'(u) - F'(v)|| <= L ||u - v||` on that set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConstants {
    pub c0: f64,
    pub kappa: f64,
    pub tau: f64,
    pub lipschitz: f64,
}

/// A nonlinear operator `F` together with its Fréchet derivative and the
/// adjoint of that derivative with respect to the grid inner product.
pub trait MonotoneOperator: Sync {
    fn apply(&self, u: &GridFunction) -> Result<GridFunction>;

    /// `F'(u) h`.
    fn deriv_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction>;

    /// `F'(u)^* w`.
    fn deriv_adjoint_apply(&self, u: &GridFunction, w: &GridFunction) -> Result<GridFunction>;

    fn constants(&self) -> OperatorConstants;
}

impl<T: MonotoneOperator + ?Sized> MonotoneOperator for &T {
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        (**self).apply(u)
    }
    fn deriv_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        (**self).deriv_apply(u, h)
    }
    fn deriv_adjoint_apply(&self, u: &GridFunction, w: &GridFunction) -> Result<GridFunction> {
        (**self).deriv_adjoint_apply(u, w)
    }
    fn constants(&self) -> OperatorConstants {
        (**self).constants()
    }
}

/// `(F u)(t) = -c0 exp(-U(t))` with `U` the backward-rectangle antiderivative
/// of `u`.
///
/// Arises from identifying `u` in `f' + u f = 0`, `f(0) = -c0`. Monotone on
/// `u >= 0`; cocoercive with `tau = kappa / (2 c0)` on `u >= kappa` for
/// `kappa > 0`; `F'` is Lipschitz there with `L = c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOperator {
    c0: f64,
    kappa: f64,
}

impl DecayOperator {
    /// `kappa` is the lower bound of the set the declared constants refer to.
    pub fn new(c0: f64, kappa: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Domain(format!("c0 must be positive, got {c0}")));
        }
        if !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be finite, got {kappa}")));
        }
        Ok(Self { c0, kappa })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl MonotoneOperator for DecayOperator {
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        Ok(decay_apply(u, self.c0))
    }

    fn deriv_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        decay_deriv_apply(u, h, self.c0)
    }

    fn deriv_adjoint_apply(&self, u: &GridFunction, w: &GridFunction) -> Result<GridFunction> {
        decay_deriv_adjoint_apply(u, w, self.c0)
    }

    fn constants(&self) -> OperatorConstants {
        OperatorConstants {
            c0: self.c0,
            kappa: self.kappa,
            tau: if self.kappa > 0.0 {
                self.kappa / (2.0 * self.c0)
            } else {
                0.0
            },
            lipschitz: self.c0,
        }
    }
}

/// `g_k = -c0 exp(-U_k)`; entries lie in `[-c0, 0)` whenever `u >= 0`.
pub fn decay_apply(u: &GridFunction, c0: f64) -> GridFunction {
    let grid = u.grid();
    let mut out = vec![0.0; grid.len()];
    cumint_into(grid.step(), u.values(), &mut out);
    for v in &mut out {
        *v = -c0 * (-*v).exp();
    }
    GridFunction::from_raw(grid, out)
}

/// `(F'(u) h)_k = -(F u)_k H_k`.
pub fn decay_deriv_apply(u: &GridFunction, h: &GridFunction, c0: f64) -> Result<GridFunction> {
    u.same_grid(h)?;
    let fu = decay_apply(u, c0);
    let big_h = h.cumint_backward();
    fu.zip_map(&big_h, |f, hh| -f * hh)
}

/// Exact transpose of [`decay_deriv_apply`] under the grid inner product:
/// `z_k = -h sum_{j=k..N} (F u)_j w_j` for `k >= 1`, `z_0 = 0`.
pub fn decay_deriv_adjoint_apply(
    u: &GridFunction,
    w: &GridFunction,
    c0: f64,
) -> Result<GridFunction> {
    u.same_grid(w)?;
    let grid = u.grid();
    let step = grid.step();
    let fu = decay_apply(u, c0);
    let mut out = vec![0.0; grid.len()];
    let mut acc = 0.0;
    for k in (1..grid.len()).rev() {
        acc += fu.values()[k] * w.values()[k];
        out[k] = -step * acc;
    }
    GridFunction::new(grid, out)
}

/// Componentwise multiplication by nonnegative weights, `(F u)_k = a_k u_k`.
///
/// Linear and cocoercive with `tau = 1 / max a_k`, so the regularized
/// variational inequality over a pointwise lower bound decouples per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    diag: GridFunction,
}

impl DiagonalOperator {
    pub fn new(diag: GridFunction) -> Result<Self> {
        if let Some(node) = diag.values().iter().position(|&a| a < 0.0) {
            return Err(Error::Domain(format!(
                "diagonal entry at node {node} is negative"
            )));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &GridFunction {
        &self.diag
    }
}

impl MonotoneOperator for DiagonalOperator {
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        diagonal_apply(self, u)
    }

    fn deriv_apply(&self, _u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        diagonal_apply(self, h)
    }

    fn deriv_adjoint_apply(&self, _u: &GridFunction, w: &GridFunction) -> Result<GridFunction> {
        diagonal_apply(self, w)
    }

    fn constants(&self) -> OperatorConstants {
        let max = self.diag.values()[1..].iter().fold(0.0f64, |m, &a| m.max(a));
        OperatorConstants {
            c0: max,
            kappa: f64::NEG_INFINITY,
            tau: if max > 0.0 { 1.0 / max } else { f64::INFINITY },
            lipschitz: 0.0,
        }
    }
}

pub fn diagonal_apply(a: &DiagonalOperator, u: &GridFunction) -> Result<GridFunction> {
    a.diag.zip_map(u, |a, v| a * v)
}

/// `-F`, keeping the constants `F` declares. Only useful as a negative
/// control: a correct diagnostic must reject it.
#[derive(Debug, Clone)]
pub struct SignFlipped<O>(pub O);

impl<O: MonotoneOperator> MonotoneOperator for SignFlipped<O> {
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.0.apply(u)?.scale(-1.0)
    }
    fn deriv_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        self.0.deriv_apply(u, h)?.scale(-1.0)
    }
    fn deriv_adjoint_apply(&self, u: &GridFunction, w: &GridFunction) -> Result<GridFunction> {
        self.0.deriv_adjoint_apply(u, w)?.scale(-1.0)
    }
    fn constants(&self) -> OperatorConstants {
        self.0.constants()
    }
}
