//! Coefficient-identification experiments for the decay operator: the two
//! worked examples, seeded uniform noise, the a priori rule
//! `alpha = delta^(2/3)` and result tables.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraints::{ConvexSet, LowerBoundSet};
use crate::error::{Error, Result};
use crate::operators::{decay_apply, decay_deriv_adjoint_apply, DecayOperator};
use crate::solver::{vi_solve, SolverConfig};
use crate::space::{Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleKind {
    /// `u*(t) = t/2 + 1/2`, `kappa = 1/2`.
    Example1,
    /// `u*(t) = sin(pi t)/4 + 1/3`, `kappa = 1/3`.
    Example2,
}

impl ExampleKind {
    pub const ALL: [ExampleKind; 2] = [ExampleKind::Example1, ExampleKind::Example2];

    pub fn name(self) -> &'static str {
        match self {
            ExampleKind::Example1 => "example1",
            ExampleKind::Example2 => "example2",
        }
    }

    /// Slope and offset `(a, b)` of the exact coefficient.
    fn params(self) -> (f64, f64) {
        match self {
            ExampleKind::Example1 => (0.5, 0.5),
            ExampleKind::Example2 => (0.25, 1.0 / 3.0),
        }
    }

    pub fn u_star(self, t: f64) -> f64 {
        let (a, b) = self.params();
        match self {
            ExampleKind::Example1 => a * t + b,
            ExampleKind::Example2 => a * (PI * t).sin() + b,
        }
    }

    pub fn u_star_prime(self, t: f64) -> f64 {
        let (a, _) = self.params();
        match self {
            ExampleKind::Example1 => a,
            ExampleKind::Example2 => a * PI * (PI * t).cos(),
        }
    }

    /// `U*(t) = int_0^t u*(s) ds`.
    pub fn antiderivative(self, t: f64) -> f64 {
        let (a, b) = self.params();
        match self {
            ExampleKind::Example1 => 0.5 * a * t * t + b * t,
            ExampleKind::Example2 => a / PI * (1.0 - (PI * t).cos()) + b * t,
        }
    }

    pub fn kappa(self) -> f64 {
        self.params().1
    }
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ExampleKind::Example1),
            "example2" => Ok(ExampleKind::Example2),
            other => Err(Error::Domain(format!("unknown example `{other}`"))),
        }
    }
}

/// A fully specified test problem on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSpec {
    pub kind: ExampleKind,
    pub grid: Grid,
    pub u_star: GridFunction,
    /// Exact data from the closed form, not `F(u*)` on the grid.
    pub f_star: GridFunction,
    pub kappa: f64,
    pub c0: f64,
    /// Constant `u*(1)`.
    pub ubar: GridFunction,
    /// Source element `z = -(1/c0) u*' e^{U*}` with `u* - ubar = F'(u*)^* z`.
    pub source: GridFunction,
    /// `||z||`.
    pub rho: f64,
}

impl ExampleSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn operator(&self) -> DecayOperator {
        DecayOperator::new(self.c0, self.kappa).expect("example constants are valid")
    }

    pub fn set(&self) -> LowerBoundSet {
        LowerBoundSet::new(self.kappa)
    }

    /// Step size used for every run, `mu = kappa / 2`.
    pub fn mu(&self) -> f64 {
        self.kappa / 2.0
    }

    pub fn tau(&self) -> f64 {
        self.kappa / (2.0 * self.c0)
    }

    pub fn solver_config(&self, alpha: f64) -> Result<SolverConfig> {
        use crate::operators::MonotoneOperator;
        SolverConfig::new(&self.operator().constants(), alpha, self.mu(), self.ubar.clone())
    }
}

pub fn build_example(kind: ExampleKind, grid: Grid) -> Result<ExampleSpec> {
    let c0 = 1.0;
    let u_star = GridFunction::from_fn(grid, |t| kind.u_star(t))?;
    let f_star = GridFunction::from_fn(grid, |t| -c0 * (-kind.antiderivative(t)).exp())?;
    let ubar = GridFunction::constant(grid, kind.u_star(1.0));
    let source = GridFunction::from_fn(grid, |t| {
        -kind.u_star_prime(t) * kind.antiderivative(t).exp() / c0
    })?;
    let rho = source.norm();
    Ok(ExampleSpec {
        kind,
        grid,
        u_star,
        f_star,
        kappa: kind.kappa(),
        c0,
        ubar,
        source,
        rho,
    })
}

/// `alpha(delta) = delta^(2/3)`.
pub fn apriori_alpha(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!(
            "a priori rule needs a positive noise level, got {delta}"
        )));
    }
    Ok(delta.powf(2.0 / 3.0))
}

/// The nine noise levels `1e-2 * 2^-j`, `j = 0..=8`.
pub fn standard_deltas() -> Vec<f64> {
    (0..9).map(|j| 1e-2 * 0.5f64.powi(j)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub delta: f64,
    pub seed: u64,
}

/// `f_k + Delta_k` with `Delta_k` i.i.d. uniform on `[-delta, delta]`.
pub fn add_noise(f: &GridFunction, model: NoiseModel) -> Result<GridFunction> {
    if !(model.delta >= 0.0 && model.delta.is_finite()) {
        return Err(Error::Domain(format!(
            "noise level must be nonnegative, got {}",
            model.delta
        )));
    }
    if model.delta == 0.0 {
        return Ok(f.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let d = model.delta;
    f.map(|v| v + rng.random_range(-d..=d))
}

/// Seed of row `row` derived from a master seed (SplitMix64 finalizer).
pub fn row_seed(master: u64, row: usize) -> u64 {
    let mut z = master ^ (row as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub delta: f64,
    pub alpha: f64,
    /// `100 delta / ||f*||`.
    pub rel_noise_pct: f64,
    /// `||u_alpha^delta - u*||`.
    pub error_norm: f64,
    /// `error_norm / delta^(1/3)`.
    pub ratio: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_contraction_excess: f64,
    /// `||f_delta - f*||`.
    pub data_error: f64,
}

/// Options for [`run_table_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub stop_c: f64,
    pub max_iters: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            stop_c: SolverConfig::DEFAULT_STOP_C,
            max_iters: SolverConfig::DEFAULT_MAX_ITERS,
        }
    }
}

pub fn run_table(spec: &ExampleSpec, deltas: &[f64], seed: u64) -> Result<Vec<ExperimentRow>> {
    run_table_with(spec, deltas, seed, TableOptions::default())
}

/// One noisy solve per noise level with `alpha = delta^(2/3)`, `mu = kappa/2`
/// and the stopping rule `||u^{k+1} - u^k|| <= stop_c delta`.
///
/// Rows are computed in parallel; each row draws its noise from
/// [`row_seed`]`(seed, index)`, so the output does not depend on scheduling.
pub fn run_table_with(
    spec: &ExampleSpec,
    deltas: &[f64],
    seed: u64,
    opts: TableOptions,
) -> Result<Vec<ExperimentRow>> {
    if deltas.is_empty() {
        return Err(Error::Domain("no noise levels given".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Domain(
            "noise levels must be positive; use the rate profile for exact data".into(),
        ));
    }
    if deltas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Domain("noise levels must be descending".into()));
    }
    let op = spec.operator();
    let set = spec.set();
    let f_norm = spec.f_star.norm();
    deltas
        .par_iter()
        .enumerate()
        .map(|(row, &delta)| {
            let alpha = apriori_alpha(delta)?;
            let f_delta = add_noise(
                &spec.f_star,
                NoiseModel {
                    delta,
                    seed: row_seed(seed, row),
                },
            )?;
            let cfg = spec
                .solver_config(alpha)?
                .with_delta(delta)
                .with_stop_c(opts.stop_c)
                .with_max_iters(opts.max_iters);
            let res = vi_solve(&op, &set, &f_delta, &cfg)?;
            debug_assert!(set.contains(&res.solution));
            let error_norm = res.solution.distance(&spec.u_star)?;
            Ok(ExperimentRow {
                delta,
                alpha,
                rel_noise_pct: 100.0 * delta / f_norm,
                error_norm,
                ratio: error_norm / delta.cbrt(),
                converged: res.converged,
                iterations: res.iterations,
                max_contraction_excess: res.max_contraction_excess,
                data_error: f_delta.distance(&spec.f_star)?,
            })
        })
        .collect()
}

/// Checks that the ratio column stays bounded: spread at most 8 and no
/// growth by more than 3x from first to last row. Returns one message per
/// violation.
pub fn rate_boundedness_violations(rows: &[ExperimentRow]) -> Vec<String> {
    let mut out = Vec::new();
    if rows.is_empty() {
        return out;
    }
    let (min, max) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    if !(max / min <= 8.0) {
        out.push(format!(
            "ratio spread {:.3e} exceeds 8 (min {min:.3e}, max {max:.3e})",
            max / min
        ));
    }
    let (first, last) = (rows[0].ratio, rows[rows.len() - 1].ratio);
    if !(last <= 3.0 * first) {
        out.push(format!(
            "last ratio {last:.3e} exceeds 3x first ratio {first:.3e}"
        ));
    }
    for r in rows.iter().filter(|r| !r.converged) {
        out.push(format!("solve for delta = {:.3e} did not converge", r.delta));
    }
    out
}

pub const CSV_HEADER: &str = "delta,rel_noise_pct,error_norm,ratio,converged";

/// Scientific notation with four significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            sci(r.delta),
            sci(r.rel_noise_pct),
            sci(r.error_norm),
            sci(r.ratio),
            r.converged
        ));
    }
    s
}

/// Aligned plain-text table with the four columns delta, relative noise in
/// percent, error norm and error ratio.
pub fn rows_to_text(rows: &[ExperimentRow]) -> String {
    let header = [
        "delta",
        "100*delta/||f||",
        "||u - u*||",
        "||u - u*||/delta^(1/3)",
    ];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                sci(r.delta),
                sci(r.rel_noise_pct),
                sci(r.error_norm),
                format!("{:.2}{}", r.ratio, if r.converged { "" } else { " *" }),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 4]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        format!("| {} |\n", parts.join(" | "))
    };
    let rule = format!(
        "|{}|\n",
        widths
            .iter()
            .map(|w| "-".repeat(w + 2))
            .collect::<Vec<_>>()
            .join("|")
    );
    let mut s = line(header);
    s.push_str(&rule);
    for row in &body {
        s.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    if rows.iter().any(|r| !r.converged) {
        s.push_str("* did not converge\n");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCheck {
    /// `||F'(u*)^* z - (u* - ubar)||`.
    pub defect: f64,
    pub rho: f64,
    /// `rho * L` with `L = c0`; the rate theory needs this below 2.
    pub rho_l: f64,
}

pub fn verify_source_condition(spec: &ExampleSpec) -> Result<SourceCheck> {
    let image = decay_deriv_adjoint_apply(&spec.u_star, &spec.source, spec.c0)?;
    let offset = spec.u_star.sub(&spec.ubar)?;
    Ok(SourceCheck {
        defect: image.distance(&offset)?,
        rho: spec.rho,
        rho_l: spec.rho * spec.c0,
    })
}

/// `||F(u*) - f*||` on the grid.
pub fn discretization_defect(spec: &ExampleSpec) -> Result<f64> {
    decay_apply(&spec.u_star, spec.c0).distance(&spec.f_star)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Domain("slope fit needs equally many x and y".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Domain("slope fit needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("slope fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

/// `count` log-spaced values from `hi` down to `lo`.
pub fn log_spaced_desc(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.log10(), lo.log10());
    (0..count)
        .map(|i| 10f64.powf(lh + (ll - lh) * i as f64 / (count - 1) as f64))
        .collect()
}
