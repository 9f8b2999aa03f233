//! Randomized property suites for operators, projections and the solver.
//!
//! Each suite returns a [`SuiteReport`] with the extremal measured quantity
//! and, on failure, the offending sample serialized as node values.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constraints::{ConvexSet, LowerBoundSet};
use crate::error::Result;
use crate::experiments::{add_noise, build_example, row_seed, verify_source_condition, ExampleSpec, NoiseModel};
use crate::operators::{DecayOperator, DiagonalOperator, MonotoneOperator, SignFlipped};
use crate::solver::{stability_gap, vi_solve, SolverConfig};
use crate::space::{Grid, GridFunction};

/// Slack for the monotonicity and cocoercivity inequalities.
pub const INEQUALITY_SLACK: f64 = 1e-10;
/// Relative tolerance of the adjoint identity.
pub const ADJOINT_TOL: f64 = 1e-12;
/// Norm tolerance of the diagonal closed-form comparison.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    /// Extremal value of the checked quantity.
    pub measured: f64,
    /// Bound the measured value was compared against.
    pub threshold: f64,
    /// Offending sample or extra context.
    pub detail: String,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.3e} (threshold {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

fn serialize(u: &GridFunction) -> String {
    let vals: Vec<String> = u.values().iter().map(|v| format!("{v:.17e}")).collect();
    format!("[{}]", vals.join(","))
}

/// Random element of `{u >= kappa}`: `kappa + |N(0,1)|` per node, optionally
/// smoothed by one pass of three-point averaging.
pub fn sample_member(grid: Grid, kappa: f64, smooth: bool, rng: &mut impl Rng) -> GridFunction {
    let raw: Vec<f64> = (0..grid.len())
        .map(|_| kappa + rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    let values = if smooth {
        (0..raw.len())
            .map(|k| {
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(raw.len() - 1);
                raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect()
    } else {
        raw
    };
    GridFunction::new(grid, values).expect("finite samples")
}

/// Random direction with standard normal node values.
pub fn sample_direction(grid: Grid, rng: &mut impl Rng) -> GridFunction {
    GridFunction::new(grid, (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect())
        .expect("finite samples")
}

/// `min <F u - F v, u - v>` over random pairs in `{u >= kappa}`; passes if
/// the minimum is at least `-INEQUALITY_SLACK`.
pub fn monotonicity_suite(
    op: &dyn MonotoneOperator,
    grid: Grid,
    kappa: f64,
    pairs: usize,
    seed: u64,
) -> Result<SuiteReport> {
    cocoercivity_like(op, grid, kappa, 0.0, pairs, seed, format!("monotonicity (kappa = {kappa:.3e})"))
}

/// `min <F u - F v, u - v> - tau ||F u - F v||^2` with `tau` taken from the
/// operator's declared constants.
pub fn cocoercivity_suite(
    op: &dyn MonotoneOperator,
    grid: Grid,
    kappa: f64,
    pairs: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let tau = op.constants().tau;
    cocoercivity_like(
        op,
        grid,
        kappa,
        tau,
        pairs,
        seed,
        format!("cocoercivity (kappa = {kappa:.3e}, tau = {tau:.3e})"),
    )
}

fn cocoercivity_like(
    op: &dyn MonotoneOperator,
    grid: Grid,
    kappa: f64,
    tau: f64,
    pairs: usize,
    seed: u64,
    name: String,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut worst_pair = None;
    for i in 0..pairs {
        let smooth = i % 2 == 0;
        let u = sample_member(grid, kappa, smooth, &mut rng);
        let v = sample_member(grid, kappa, !smooth, &mut rng);
        let df = op.apply(&u)?.sub(&op.apply(&v)?)?;
        let du = u.sub(&v)?;
        let val = df.inner_product(&du)? - tau * df.norm().powi(2);
        if val < worst {
            worst = val;
            worst_pair = Some((u, v));
        }
    }
    let passed = worst >= -INEQUALITY_SLACK;
    let detail = match (passed, worst_pair) {
        (false, Some((u, v))) => format!("u = {} v = {}", serialize(&u), serialize(&v)),
        _ => String::new(),
    };
    Ok(SuiteReport {
        name,
        passed,
        measured: worst,
        threshold: -INEQUALITY_SLACK,
        detail,
    })
}

/// `min <F'(u) h, h> - tau ||F'(u) h||^2` over random `u` in the set and
/// random directions `h`.
pub fn derivative_cocoercivity_suite(
    op: &dyn MonotoneOperator,
    grid: Grid,
    kappa: f64,
    samples: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let tau = op.constants().tau;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut worst_sample = None;
    for i in 0..samples {
        let u = sample_member(grid, kappa, i % 2 == 0, &mut rng);
        let h = sample_direction(grid, &mut rng);
        let dh = op.deriv_apply(&u, &h)?;
        let val = dh.inner_product(&h)? - tau * dh.norm().powi(2);
        if val < worst {
            worst = val;
            worst_sample = Some((u, h));
        }
    }
    let passed = worst >= -INEQUALITY_SLACK;
    let detail = match (passed, worst_sample) {
        (false, Some((u, h))) => format!("u = {} h = {}", serialize(&u), serialize(&h)),
        _ => String::new(),
    };
    Ok(SuiteReport {
        name: format!("derivative cocoercivity (tau = {tau:.3e})"),
        passed,
        measured: worst,
        threshold: -INEQUALITY_SLACK,
        detail,
    })
}

/// Largest `||(F'(u) - F'(v)) h|| / (||u - v|| ||h||)` over random probes,
/// compared against `L (1 + 10 h)`.
pub fn lipschitz_suite(
    op: &dyn MonotoneOperator,
    grid: Grid,
    kappa: f64,
    samples: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let lip = op.constants().lipschitz;
    let threshold = lip * (1.0 + 10.0 * grid.step());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..samples {
        let u = sample_member(grid, kappa, i % 2 == 0, &mut rng);
        let v = sample_member(grid, kappa, i % 3 == 0, &mut rng);
        let h = sample_direction(grid, &mut rng);
        let diff = op.deriv_apply(&u, &h)?.sub(&op.deriv_apply(&v, &h)?)?;
        let denom = u.distance(&v)? * h.norm();
        if denom > 0.0 {
            worst = worst.max(diff.norm() / denom);
        }
    }
    Ok(SuiteReport {
        name: format!("derivative Lipschitz bound (L = {lip:.3e})"),
        passed: worst <= threshold,
        measured: worst,
        threshold,
        detail: String::new(),
    })
}

/// Largest `|<F'(u) h, w> - <h, F'(u)^* w>| / (||h|| ||w||)`.
pub fn adjoint_suite(
    op: &dyn MonotoneOperator,
    grid: Grid,
    kappa: f64,
    triples: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..triples {
        let u = sample_member(grid, kappa, i % 2 == 0, &mut rng);
        let h = sample_direction(grid, &mut rng);
        let w = sample_direction(grid, &mut rng);
        let lhs = op.deriv_apply(&u, &h)?.inner_product(&w)?;
        let rhs = h.inner_product(&op.deriv_adjoint_apply(&u, &w)?)?;
        worst = worst.max((lhs - rhs).abs() / (h.norm() * w.norm()));
    }
    Ok(SuiteReport {
        name: "adjoint identity".into(),
        passed: worst <= ADJOINT_TOL,
        measured: worst,
        threshold: ADJOINT_TOL,
        detail: String::new(),
    })
}

/// Idempotence (exact), nonexpansiveness and the variational
/// characterization `<u - P u, w - P u> <= 0` of the projection.
pub fn projection_suite(grid: Grid, kappa: f64, pairs: usize, seed: u64) -> Result<SuiteReport> {
    let set = LowerBoundSet::new(kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idempotent = true;
    let mut members = true;
    let mut expansion = f64::NEG_INFINITY;
    let mut vi = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let u = sample_direction(grid, &mut rng).map(|x| kappa + 2.0 * x)?;
        let v = sample_direction(grid, &mut rng).map(|x| kappa + 2.0 * x)?;
        let pu = set.project(&u);
        let pv = set.project(&v);
        idempotent &= set.project(&pu) == pu;
        members &= set.contains(&pu) && set.contains(&pv);
        expansion = expansion.max(pu.distance(&pv)? - u.distance(&v)?);
        let w = sample_member(grid, kappa, false, &mut rng);
        vi = vi.max(u.sub(&pu)?.inner_product(&w.sub(&pu)?)?);
    }
    let passed = idempotent && members && expansion <= 1e-12 && vi <= INEQUALITY_SLACK;
    Ok(SuiteReport {
        name: format!("projection onto u >= {kappa:.3e}"),
        passed,
        measured: expansion.max(vi),
        threshold: 1e-12,
        detail: format!(
            "idempotent={idempotent} members={members} max_expansion={expansion:.3e} max_vi={vi:.3e}"
        ),
    })
}

/// Random diagonal instance and its closed-form VI solution
/// `max(kappa, f_k / (a_k + alpha))`.
#[derive(Debug, Clone)]
pub struct DiagonalInstance {
    pub op: DiagonalOperator,
    pub f: GridFunction,
    pub kappa: f64,
    pub alpha: f64,
}

impl DiagonalInstance {
    pub fn random(grid: Grid, rng: &mut impl Rng) -> Self {
        let a = GridFunction::new(grid, (0..grid.len()).map(|_| rng.random_range(0.0..3.0)).collect())
            .expect("finite");
        let f = GridFunction::new(grid, (0..grid.len()).map(|_| rng.random_range(-2.0..2.0)).collect())
            .expect("finite");
        Self {
            op: DiagonalOperator::new(a).expect("nonnegative"),
            f,
            kappa: rng.random_range(-1.0..1.0),
            alpha: 10f64.powf(rng.random_range(-3.0..0.0)),
        }
    }

    /// Closed form; node 0 is reported as 0 to match the zero offset.
    pub fn exact(&self) -> GridFunction {
        let mut v: Vec<f64> = self
            .op
            .diag()
            .values()
            .iter()
            .zip(self.f.values())
            .map(|(&a, &f)| (f / (a + self.alpha)).max(self.kappa))
            .collect();
        v[0] = 0.0;
        GridFunction::new(self.f.grid(), v).expect("finite")
    }

    /// `mu = 1 / (max a + alpha)` satisfies both step-size constraints.
    pub fn solve(&self) -> Result<crate::solver::SolveResult> {
        let c = self.op.constants();
        let grid = self.f.grid();
        let cfg = SolverConfig::new(&c, self.alpha, 1.0 / (c.c0 + self.alpha), GridFunction::zeros(grid))?
            .with_abs_tol(1e-10)
            .with_max_iters(10_000_000);
        vi_solve(&self.op, &LowerBoundSet::new(self.kappa), &self.f, &cfg)
    }
}

/// Solver versus the componentwise closed form on random diagonal problems.
pub fn diagonal_oracle_suite(grid: Grid, instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut all_converged = true;
    for _ in 0..instances {
        let inst = DiagonalInstance::random(grid, &mut rng);
        let res = inst.solve()?;
        all_converged &= res.converged;
        worst = worst.max(res.solution.distance(&inst.exact())?);
    }
    Ok(SuiteReport {
        name: "diagonal closed-form equivalence".into(),
        passed: all_converged && worst <= ORACLE_TOL,
        measured: worst,
        threshold: ORACLE_TOL,
        detail: if all_converged { String::new() } else { "non-converged solve".into() },
    })
}

/// One cell of the stability check.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCell {
    pub delta: f64,
    pub alpha: f64,
    pub gap: f64,
    pub bound: f64,
    pub slack: f64,
    pub converged: bool,
    pub max_contraction_excess: f64,
}

impl StabilityCell {
    pub fn holds(&self) -> bool {
        self.converged && self.gap <= self.bound + self.slack
    }
}

/// `||u_alpha^delta - u_alpha||` against `delta/alpha + 4 abs_tol` over all
/// `(delta, alpha)` combinations.
pub fn stability_cells(
    spec: &ExampleSpec,
    deltas: &[f64],
    alphas: &[f64],
    seed: u64,
) -> Result<Vec<StabilityCell>> {
    let op = spec.operator();
    let set = spec.set();
    let mut cells = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        let f_delta = add_noise(&spec.f_star, NoiseModel { delta, seed: row_seed(seed, i) })?;
        for &alpha in alphas {
            let cfg = spec.solver_config(alpha)?.with_delta(delta).with_max_iters(10_000_000);
            let sg = stability_gap(&op, &set, &spec.f_star, &f_delta, &cfg)?;
            cells.push(StabilityCell {
                delta,
                alpha,
                gap: sg.gap,
                bound: sg.bound,
                slack: 4.0 * sg.abs_tol,
                converged: sg.converged,
                max_contraction_excess: sg.max_contraction_excess,
            });
        }
    }
    Ok(cells)
}

pub const STABILITY_DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const STABILITY_ALPHAS: [f64; 3] = [1e-1, 1e-2, 5e-3];

pub fn stability_suite(spec: &ExampleSpec, seed: u64) -> Result<SuiteReport> {
    let cells = stability_cells(spec, &STABILITY_DELTAS, &STABILITY_ALPHAS, seed)?;
    let worst = cells
        .iter()
        .map(|c| c.gap - c.bound - c.slack)
        .fold(f64::NEG_INFINITY, f64::max);
    let failing: Vec<String> = cells
        .iter()
        .filter(|c| !c.holds())
        .map(|c| format!("(delta={:.0e}, alpha={:.0e}) gap={:.3e} bound={:.3e}", c.delta, c.alpha, c.gap, c.bound))
        .collect();
    Ok(SuiteReport {
        name: "stability gap <= delta/alpha".into(),
        passed: failing.is_empty(),
        measured: worst,
        threshold: 0.0,
        detail: failing.join("; "),
    })
}

/// Source representation `u* - ubar = F'(u*)^* z` up to `5 h`, with
/// `rho L < 2`.
pub fn source_condition_suite(spec: &ExampleSpec) -> Result<SuiteReport> {
    let sc = verify_source_condition(spec)?;
    let threshold = 5.0 * spec.grid.step();
    Ok(SuiteReport {
        name: format!("source condition ({})", spec.name()),
        passed: sc.defect <= threshold && sc.rho_l < 2.0,
        measured: sc.defect,
        threshold,
        detail: format!("rho = {:.3e}, rho*L = {:.3e}", sc.rho, sc.rho_l),
    })
}

/// Sample counts for [`run_all`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub pairs: usize,
    pub triples: usize,
    pub oracle_instances: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            pairs: 1000,
            triples: 100,
            oracle_instances: 50,
        }
    }
}

/// Every suite for one example. With `sign_flipped` the operator suites see
/// `-F` instead of `F`, which a correct run must reject.
pub fn run_all(
    spec: &ExampleSpec,
    sizes: SuiteSizes,
    seed: u64,
    sign_flipped: bool,
) -> Result<Vec<SuiteReport>> {
    let grid = spec.grid;
    let kappa = spec.kappa;
    let s = |i: usize| row_seed(seed, i);
    let wrap = |op: DecayOperator| -> Box<dyn MonotoneOperator> {
        if sign_flipped {
            Box::new(SignFlipped(op))
        } else {
            Box::new(op)
        }
    };
    // Monotonicity is checked on u >= 0, where no cocoercivity constant exists.
    let monotone = wrap(DecayOperator::new(spec.c0, 0.0)?);
    let op = wrap(spec.operator());
    Ok(vec![
        monotonicity_suite(monotone.as_ref(), grid, 0.0, sizes.pairs, s(0))?,
        cocoercivity_suite(op.as_ref(), grid, kappa, sizes.pairs, s(1))?,
        derivative_cocoercivity_suite(op.as_ref(), grid, kappa, sizes.pairs, s(2))?,
        lipschitz_suite(op.as_ref(), grid, kappa, sizes.pairs, s(3))?,
        adjoint_suite(op.as_ref(), grid, kappa, sizes.triples, s(4))?,
        projection_suite(grid, kappa, sizes.pairs, s(5))?,
        diagonal_oracle_suite(grid, sizes.oracle_instances, s(6))?,
        stability_suite(spec, s(7))?,
        source_condition_suite(spec)?,
    ])
}

/// Builds the example on `grid` and runs every suite against its operator.
pub fn run_example(kind: crate::experiments::ExampleKind, grid: Grid, seed: u64) -> Result<Vec<SuiteReport>> {
    let spec = build_example(kind, grid)?;
    run_all(&spec, SuiteSizes::default(), seed, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExampleKind;

    fn small() -> SuiteSizes {
        SuiteSizes {
            pairs: 100,
            triples: 20,
            oracle_instances: 5,
        }
    }

    #[test]
    fn samples_are_members() {
        let g = Grid::new(30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = LowerBoundSet::new(0.4);
        for smooth in [true, false] {
            assert!(set.contains(&sample_member(g, 0.4, smooth, &mut rng)));
        }
    }

    #[test]
    fn all_suites_pass_on_coarse_grid() {
        let spec = build_example(ExampleKind::Example1, Grid::new(50).unwrap()).unwrap();
        for r in run_all(&spec, small(), 3, false).unwrap() {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let spec = build_example(ExampleKind::Example2, Grid::new(50).unwrap()).unwrap();
        let reports = run_all(&spec, small(), 3, true).unwrap();
        let coco = reports.iter().find(|r| r.name.starts_with("cocoercivity")).unwrap();
        assert!(!coco.passed);
        assert!(coco.detail.starts_with("u = ["));
        assert!(!reports[0].passed);
    }

    #[test]
    fn report_display() {
        let r = SuiteReport {
            name: "x".into(),
            passed: true,
            measured: 1.0,
            threshold: 2.0,
            detail: String::new(),
        };
        assert_eq!(r.to_string(), "PASS x: measured 1.000e0 (threshold 2.000e0)");
    }
}
