//! Projected fixed-point solver for the Lavrentiev-regularized variational
//! inequality
//!
//! ```text
//! find u in M:  <F u + alpha (u - ubar) - f_delta, v - u> >= 0  for all v in M
//! ```
//!
//! via `u <- P_M(u - mu (F u + alpha (u - ubar) - f_delta))`. If `F` is
//! cocoercive with constant `tau`, the map is a contraction with factor
//! `1 - mu alpha` as long as `0 < mu < 2 tau` and
//! `alpha <= 1/mu - 1/(2 tau)`; both are checked before iterating.

use rayon::prelude::*;

use crate::constraints::ConvexSet;
use crate::error::{Error, Result};
use crate::operators::{MonotoneOperator, OperatorConstants};
use crate::space::{weighted_dist, GridFunction};

/// Consecutive growing increments after which a run is declared divergent.
const DIVERGENCE_RUN: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub mu: f64,
    /// Offset `ubar`; the zero function gives the unmodified method.
    pub offset_ubar: GridFunction,
    /// Constant `c` of the stopping rule `||u^{k+1} - u^k|| <= c delta`.
    pub stop_c: f64,
    pub delta: f64,
    /// Accuracy target for noise-free solves (`delta == 0`). `None` means
    /// `1e-10 (1 + ||f||)`.
    pub abs_tol: Option<f64>,
    pub max_iters: usize,
}

impl SolverConfig {
    pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
    /// Default `c` in `||u^{k+1} - u^k|| <= c delta`.
    pub const DEFAULT_STOP_C: f64 = 0.5;

    /// Builds a configuration and checks the step-size constraints against
    /// the operator's declared cocoercivity constant.
    pub fn new(
        constants: &OperatorConstants,
        alpha: f64,
        mu: f64,
        offset_ubar: GridFunction,
    ) -> Result<Self> {
        let cfg = Self {
            alpha,
            mu,
            offset_ubar,
            stop_c: Self::DEFAULT_STOP_C,
            delta: 0.0,
            abs_tol: None,
            max_iters: Self::DEFAULT_MAX_ITERS,
        };
        cfg.validate(constants)?;
        Ok(cfg)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_stop_c(mut self, stop_c: f64) -> Self {
        self.stop_c = stop_c;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = Some(abs_tol);
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Largest admissible `alpha` for step `mu`: `1/mu - 1/(2 tau)`.
    pub fn max_alpha(mu: f64, tau: f64) -> f64 {
        1.0 / mu - 1.0 / (2.0 * tau)
    }

    pub fn contraction_factor(&self) -> f64 {
        1.0 - self.mu * self.alpha
    }

    pub fn validate(&self, constants: &OperatorConstants) -> Result<()> {
        let tau = constants.tau;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.mu < 2.0 * tau) {
            return bad(format!(
                "step size mu = {} violates mu < 2 tau = {}",
                self.mu,
                2.0 * tau
            ));
        }
        let max_alpha = Self::max_alpha(self.mu, tau);
        if self.alpha > max_alpha {
            return bad(format!(
                "alpha = {} violates alpha <= 1/mu - 1/(2 tau) = {max_alpha}",
                self.alpha
            ));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be nonnegative, got {}", self.delta));
        }
        if !(self.stop_c > 0.0) {
            return bad(format!("stop_c must be positive, got {}", self.stop_c));
        }
        if let Some(tol) = self.abs_tol {
            if !(tol > 0.0) {
                return bad(format!("abs_tol must be positive, got {tol}"));
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        Ok(())
    }

    /// Increment threshold at which the iteration stops.
    ///
    /// With noise the rule is `||u^{k+1} - u^k|| <= c delta`. Without noise
    /// the increment must be small enough that the a posteriori contraction
    /// bound `q/(1-q) ||u^{k+1} - u^k||` on the distance to the fixed point
    /// is at most `abs_tol`.
    pub fn increment_tolerance(&self, f: &GridFunction) -> f64 {
        if self.delta > 0.0 {
            self.stop_c * self.delta
        } else {
            let tol = self.effective_abs_tol(f);
            let q = self.contraction_factor();
            tol.min(tol * (1.0 - q) / q)
        }
    }

    pub fn effective_abs_tol(&self, f: &GridFunction) -> f64 {
        self.abs_tol.unwrap_or(1e-10 * (1.0 + f.norm()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub solution: GridFunction,
    pub iterations: usize,
    /// `||u^{k+1} - u^k||` at the last step.
    pub final_increment: f64,
    /// `||F u - f_delta||` at the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
    /// Stopped early because increments kept growing.
    pub diverged: bool,
    /// `1 - mu alpha`.
    pub contraction_factor: f64,
    /// Largest `(inc_{k+1} - q inc_k) / max(1, ||u^{k+1}||)` from the second
    /// increment on; nonpositive up to rounding when the map contracts.
    pub max_contraction_excess: f64,
}

impl SolveResult {
    pub fn contraction_holds(&self, rel_slack: f64) -> bool {
        self.max_contraction_excess <= rel_slack
    }
}

/// Runs the projected fixed-point iteration from `P_M(ubar)`.
///
/// A run that exhausts `max_iters` (or diverges) is returned with
/// `converged == false`; a non-finite iterate is an error.
pub fn vi_solve<O, S>(op: &O, set: &S, f_delta: &GridFunction, cfg: &SolverConfig) -> Result<SolveResult>
where
    O: MonotoneOperator + ?Sized,
    S: ConvexSet + ?Sized,
{
    let start = set.project(&cfg.offset_ubar);
    vi_solve_from(op, set, f_delta, cfg, start)
}

/// Same as [`vi_solve`] but starting from `start` (projected first).
pub fn vi_solve_from<O, S>(
    op: &O,
    set: &S,
    f_delta: &GridFunction,
    cfg: &SolverConfig,
    start: GridFunction,
) -> Result<SolveResult>
where
    O: MonotoneOperator + ?Sized,
    S: ConvexSet + ?Sized,
{
    cfg.validate(&op.constants())?;
    f_delta.same_grid(&cfg.offset_ubar)?;
    f_delta.same_grid(&start)?;

    let grid = f_delta.grid();
    let step = grid.step();
    let (alpha, mu) = (cfg.alpha, cfg.mu);
    let q = cfg.contraction_factor();
    let tol = cfg.increment_tolerance(f_delta);
    let ubar = cfg.offset_ubar.values();
    let f = f_delta.values();
    let pinned = ubar[0];

    let mut u = set.project(&start);
    let mut next = vec![0.0; grid.len()];
    let mut prev_inc: Option<f64> = None;
    let mut max_excess = f64::NEG_INFINITY;
    let mut growing = 0usize;
    let mut increment = f64::INFINITY;
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let fu = op.apply(&u)?;
        let cur = u.values();
        for (k, out) in next.iter_mut().enumerate() {
            let r = fu.values()[k] + alpha * (cur[k] - ubar[k]) - f[k];
            *out = cur[k] - mu * r;
        }
        set.project_in_place(&mut next);
        next[0] = pinned;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericBreakdown { iteration: iterations });
        }
        increment = weighted_dist(step, &next, cur);

        if let Some(prev) = prev_inc {
            let scale = crate::space::weighted_dot(step, &next, &next).sqrt().max(1.0);
            max_excess = max_excess.max((increment - q * prev) / scale);
            if increment > prev {
                growing += 1;
            } else {
                growing = 0;
            }
        }
        prev_inc = Some(increment);

        let new_u = GridFunction::from_raw(grid, next);
        next = u.into_values();
        u = new_u;

        if increment <= tol {
            converged = true;
            break;
        }
        if growing >= DIVERGENCE_RUN {
            diverged = true;
            break;
        }
    }

    let residual_norm = op.apply(&u)?.distance(f_delta)?;
    Ok(SolveResult {
        solution: u,
        iterations,
        final_increment: increment,
        residual_norm,
        converged,
        diverged,
        contraction_factor: q,
        max_contraction_excess: if max_excess.is_finite() { max_excess } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityGap {
    /// `||u_alpha^delta - u_alpha||`.
    pub gap: f64,
    /// `delta / alpha`.
    pub bound: f64,
    /// Accuracy each of the two solves was driven to.
    pub abs_tol: f64,
    pub converged: bool,
    pub max_contraction_excess: f64,
}

impl StabilityGap {
    pub fn holds(&self, slack: f64) -> bool {
        self.gap <= self.bound + slack
    }
}

/// Solves with exact and with noisy data (both noise-free stopping rule) and
/// compares the distance of the solutions to the bound `delta / alpha`.
pub fn stability_gap<O, S>(
    op: &O,
    set: &S,
    f_star: &GridFunction,
    f_delta: &GridFunction,
    cfg: &SolverConfig,
) -> Result<StabilityGap>
where
    O: MonotoneOperator + ?Sized,
    S: ConvexSet + ?Sized,
{
    let noise = f_star.distance(f_delta)?;
    if noise > cfg.delta * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "data error {noise} exceeds the declared noise level {}",
            cfg.delta
        )));
    }
    let exact_cfg = SolverConfig {
        delta: 0.0,
        abs_tol: Some(cfg.effective_abs_tol(f_star)),
        ..cfg.clone()
    };
    let exact = vi_solve(op, set, f_star, &exact_cfg)?;
    let noisy = vi_solve(op, set, f_delta, &exact_cfg)?;
    Ok(StabilityGap {
        gap: exact.solution.distance(&noisy.solution)?,
        bound: cfg.delta / cfg.alpha,
        abs_tol: exact_cfg.abs_tol.unwrap_or_default(),
        converged: exact.converged && noisy.converged,
        max_contraction_excess: exact
            .max_contraction_excess
            .max(noisy.max_contraction_excess),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub alpha: f64,
    /// `||u_alpha - u*||`.
    pub error_norm: f64,
    /// `||F u_alpha - f*||`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_contraction_excess: f64,
}

/// Noise-free solves for each `alpha`, reporting error and residual for rate
/// fitting. The accuracy target is `1e-3 min(alpha) ||u*||`; `base` supplies
/// `mu`, `ubar` and the iteration cap.
pub fn vi_residual_profile<O, S>(
    op: &O,
    set: &S,
    f_star: &GridFunction,
    u_star: &GridFunction,
    alphas: &[f64],
    base: &SolverConfig,
) -> Result<Vec<ProfilePoint>>
where
    O: MonotoneOperator + ?Sized,
    S: ConvexSet + ?Sized,
{
    if alphas.is_empty() {
        return Err(Error::Domain("no regularization parameters given".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("alphas must be positive".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("alphas must be strictly decreasing".into()));
    }
    let min_alpha = alphas[alphas.len() - 1];
    let abs_tol = 1e-3 * min_alpha * u_star.norm().max(f64::MIN_POSITIVE);
    alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = SolverConfig {
                alpha,
                delta: 0.0,
                abs_tol: Some(abs_tol),
                ..base.clone()
            };
            let res = vi_solve(op, set, f_star, &cfg)?;
            Ok(ProfilePoint {
                alpha,
                error_norm: res.solution.distance(u_star)?,
                residual_norm: res.residual_norm,
                iterations: res.iterations,
                converged: res.converged,
                max_contraction_excess: res.max_contraction_excess,
            })
        })
        .collect()
}
