//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lavrentiev::diagnostics::{
    self, sample_direction, sample_member, stability_cells, DiagonalInstance, STABILITY_ALPHAS,
    STABILITY_DELTAS,
};
use lavrentiev::experiments::{
    build_example, loglog_slope, log_spaced_desc, run_table, standard_deltas, verify_source_condition,
};
use lavrentiev::operators::decay_deriv_adjoint_apply;
use lavrentiev::solver::vi_residual_profile;
use lavrentiev::{
    ConvexSet, DecayOperator, ExampleKind, ExampleSpec, Grid, LowerBoundSet,
    MonotoneOperator, SolverConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 200;
const SEED: u64 = 0;
const CONTRACTION_SLACK: f64 = 1e-12;

/// Reference error columns for the nine noise levels `1e-2 * 2^-j`.
const REFERENCE_EXAMPLE1: [f64; 9] = [
    9.87e-2, 8.23e-2, 6.72e-2, 5.42e-2, 4.17e-2, 3.26e-2, 3.26e-2, 2.72e-2, 2.53e-2,
];
const REFERENCE_EXAMPLE2: [f64; 9] = [
    7.00e-2, 4.66e-2, 3.87e-2, 3.01e-2, 2.22e-2, 1.60e-2, 1.08e-2, 7.54e-3, 4.70e-3,
];

struct Outcome {
    passed: bool,
    summary: String,
    /// Contraction excesses of every decay-operator solve run for this criterion.
    excesses: Vec<f64>,
}

impl Outcome {
    fn new(passed: bool, summary: String) -> Self {
        Self { passed, summary, excesses: Vec::new() }
    }
}

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn spec(kind: ExampleKind, n: usize) -> ExampleSpec {
    build_example(kind, grid(n)).unwrap()
}

// Oracles written independently of the library: weighted sums over nodes
// 1..=N and the decay map via a plain running sum.

fn h_dot(h: f64, a: &[f64], b: &[f64]) -> f64 {
    h * a.iter().zip(b).skip(1).map(|(x, y)| x * y).sum::<f64>()
}

fn h_norm(h: f64, a: &[f64]) -> f64 {
    h_dot(h, a, a).sqrt()
}

fn h_dist(h: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    h_norm(h, &d)
}

fn decay_oracle(c0: f64, h: f64, u: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    u.iter()
        .enumerate()
        .map(|(k, &v)| {
            if k > 0 {
                acc += h * v;
            }
            -c0 * (-acc).exp()
        })
        .collect()
}

fn table_criterion(kind: ExampleKind, reference: &[f64; 9], ratio_band: (f64, f64)) -> Outcome {
    let s = spec(kind, N);
    let start = Instant::now();
    let rows = run_table(&s, &standard_deltas(), SEED).unwrap();
    let elapsed = start.elapsed();

    let h = s.grid.step();
    let f_norm = h_norm(h, s.f_star.values());
    let mut worst_factor = 1.0f64;
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    let mut consistent = true;
    for (row, &expected) in rows.iter().zip(reference) {
        worst_factor = worst_factor.max((row.error_norm / expected).max(expected / row.error_norm));
        rmin = rmin.min(row.ratio);
        rmax = rmax.max(row.ratio);
        consistent &= row.converged
            && (row.ratio - row.error_norm / row.delta.cbrt()).abs() <= 1e-12
            && (row.rel_noise_pct - 100.0 * row.delta / f_norm).abs() <= 1e-9 * row.rel_noise_pct
            && row.data_error <= row.delta
            && (row.alpha - row.delta.powf(2.0 / 3.0)).abs() <= 1e-15;
    }
    let passed = rows.len() == 9
        && consistent
        && worst_factor <= 3.0
        && rmin >= ratio_band.0
        && rmax <= ratio_band.1
        && elapsed <= Duration::from_secs(60);
    Outcome {
        passed,
        summary: format!(
            "{kind}: worst error factor {worst_factor:.3} (<= 3), ratio in [{rmin:.3}, {rmax:.3}] \
             (band [{}, {}]), rows consistent {consistent}, {:.2?} (<= 60 s)",
            ratio_band.0, ratio_band.1, elapsed
        ),
        excesses: rows.iter().map(|r| r.max_contraction_excess).collect(),
    }
}

fn criterion_3() -> Outcome {
    let s = spec(ExampleKind::Example1, N);
    let h = s.grid.step();
    let cells = stability_cells(&s, &STABILITY_DELTAS, &STABILITY_ALPHAS, SEED).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut ok = cells.len() == 9;
    for c in &cells {
        let bound = c.delta / c.alpha;
        ok &= c.converged && c.gap <= bound + c.slack;
        worst = worst.max((c.gap - c.slack) / bound);
    }
    // The abs_tol behind the slack must stay small against the bound itself.
    let f_scale = 1.0 + h_norm(h, s.f_star.values());
    ok &= cells.iter().all(|c| c.slack <= 4.0 * 1e-10 * f_scale * (1.0 + 1e-12));
    let mut out = Outcome::new(
        ok,
        format!("example1: 9 cells, max (gap - 4 abs_tol)/(delta/alpha) = {worst:.3e} (<= 1)"),
    );
    out.excesses = cells.iter().map(|c| c.max_contraction_excess).collect();
    out
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let alphas = log_spaced_desc(1e-1, 1e-4, 8);
    let mut ok = alphas.len() == 8;
    let mut parts = Vec::new();
    let mut excesses = Vec::new();
    for kind in ExampleKind::ALL {
        let s = spec(kind, N);
        let base = s
            .solver_config(alphas[0])
            .unwrap()
            .with_max_iters(10 * SolverConfig::DEFAULT_MAX_ITERS);
        let prof =
            vi_residual_profile(&s.operator(), &s.set(), &s.f_star, &s.u_star, &alphas, &base).unwrap();
        let h = s.grid.step();
        let mut errs = Vec::new();
        let mut resid = Vec::new();
        for p in &prof {
            ok &= p.converged;
            excesses.push(p.max_contraction_excess);
            errs.push(p.error_norm);
            resid.push(p.residual_norm);
        }
        // Spot-check the reported residual at the smallest alpha against the oracle.
        let last = SolverConfig {
            abs_tol: Some(1e-3 * 1e-4 * h_norm(h, s.u_star.values())),
            ..base.clone().with_alpha(1e-4)
        };
        let sol = lavrentiev::solver::vi_solve(&s.operator(), &s.set(), &s.f_star, &last).unwrap();
        let r = h_dist(h, &decay_oracle(s.c0, h, sol.solution.values()), s.f_star.values());
        ok &= (r - resid[7]).abs() <= 1e-9 * r.max(1e-12);

        let es = loglog_slope(&alphas, &errs).unwrap();
        let rs = loglog_slope(&alphas, &resid).unwrap();
        ok &= es >= 0.45 && rs >= 0.9;
        parts.push(format!("{kind}: error slope {es:.3} (>= 0.45), residual slope {rs:.3} (>= 0.9)"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= Duration::from_secs(120);
    Outcome {
        passed: ok,
        summary: format!("{}, {elapsed:.2?} (<= 120 s)", parts.join("; ")),
        excesses,
    }
}

fn criterion_5() -> Outcome {
    let g = grid(N);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..50 {
        let inst = DiagonalInstance::random(g, &mut rng);
        ok &= inst.alpha >= 1e-3 && inst.alpha <= 1.0;
        let a = inst.op.diag().values();
        let mut exact: Vec<f64> = a
            .iter()
            .zip(inst.f.values())
            .map(|(&ak, &fk)| (fk / (ak + inst.alpha)).max(inst.kappa))
            .collect();
        exact[0] = 0.0;
        let res = inst.solve().unwrap();
        ok &= res.converged;
        worst = worst.max(h_dist(g.step(), res.solution.values(), &exact));
    }
    ok &= worst <= 1e-8;
    Outcome::new(ok, format!("50 instances, max ||u - closed form|| = {worst:.3e} (<= 1e-8)"))
}

fn criterion_6() -> Outcome {
    let g = grid(N);
    let h = g.step();
    let mut ok = true;
    let mut parts = Vec::new();

    // Library suites at the stated sizes.
    let mono_op = DecayOperator::new(1.0, 0.0).unwrap();
    let r = diagnostics::monotonicity_suite(&mono_op, g, 0.0, 1000, 61).unwrap();
    ok &= r.passed;
    parts.push(format!("monotonicity min {:.3e}", r.measured));
    for kappa in [1.0 / 3.0, 0.5] {
        let op = DecayOperator::new(1.0, kappa).unwrap();
        ok &= (op.constants().tau - kappa / 2.0).abs() <= 1e-15;
        let r = diagnostics::cocoercivity_suite(&op, g, kappa, 1000, 62).unwrap();
        ok &= r.passed;
        parts.push(format!("cocoercivity(kappa={kappa:.3}) min {:.3e}", r.measured));
        let r = diagnostics::adjoint_suite(&op, g, kappa, 100, 63).unwrap();
        ok &= r.passed && r.measured <= 1e-12;
        parts.push(format!("adjoint {:.3e}", r.measured));
        let r = diagnostics::projection_suite(g, kappa, 1000, 64).unwrap();
        ok &= r.passed;
    }

    // Independent re-check on fresh pairs with the oracle operator.
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_coco = f64::INFINITY;
    let mut worst_mono = f64::INFINITY;
    let mut worst_adj = 0.0f64;
    let mut proj_ok = true;
    let mut worst_expansion = f64::NEG_INFINITY;
    for kappa in [1.0 / 3.0, 0.5] {
        let tau = kappa / 2.0;
        let op = DecayOperator::new(1.0, kappa).unwrap();
        let set = LowerBoundSet::new(kappa);
        for i in 0..1000 {
            let u = sample_member(g, kappa, i % 2 == 0, &mut rng);
            let v = sample_member(g, kappa, i % 3 == 0, &mut rng);
            let fu = decay_oracle(1.0, h, u.values());
            let fv = decay_oracle(1.0, h, v.values());
            ok &= h_dist(h, &fu, op.apply(&u).unwrap().values()) <= 1e-14;
            let df: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| a - b).collect();
            let du: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect();
            let lhs = h_dot(h, &df, &du);
            let scale = 1.0 + h_dot(h, &du, &du);
            worst_mono = worst_mono.min(lhs / scale);
            worst_coco = worst_coco.min((lhs - tau * h_dot(h, &df, &df)) / scale);

            let x = sample_direction(g, &mut rng).scale(2.0).unwrap();
            let y = sample_direction(g, &mut rng).scale(2.0).unwrap();
            let (px, py) = (set.project(&x), set.project(&y));
            proj_ok &= set.project(&px).values() == px.values();
            for (&xi, &pi) in x.values().iter().zip(px.values()).skip(1) {
                proj_ok &= pi == xi.max(kappa);
            }
            worst_expansion = worst_expansion
                .max(h_dist(h, px.values(), py.values()) - h_dist(h, x.values(), y.values()));
        }
        for _ in 0..100 {
            let u = sample_member(g, kappa, true, &mut rng);
            let d = sample_direction(g, &mut rng);
            let w = sample_direction(g, &mut rng);
            // <F'(u) d, w> with F'(u) d = -(F u) * cumulative integral of d.
            let fu = decay_oracle(1.0, h, u.values());
            let mut acc = 0.0;
            let jd: Vec<f64> = d
                .values()
                .iter()
                .enumerate()
                .map(|(k, &dk)| {
                    if k > 0 {
                        acc += h * dk;
                    }
                    -fu[k] * acc
                })
                .collect();
            let lhs = h_dot(h, &jd, w.values());
            let z = decay_deriv_adjoint_apply(&u, &w, 1.0).unwrap();
            let rhs = h_dot(h, d.values(), z.values());
            let scale = h_norm(h, &jd) * h_norm(h, w.values()) + h_norm(h, d.values()) * h_norm(h, z.values());
            worst_adj = worst_adj.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    ok &= worst_mono >= -1e-10 && worst_coco >= -1e-10 && worst_adj <= 1e-12;
    ok &= proj_ok && worst_expansion <= 1e-12;
    parts.push(format!(
        "oracle recheck: mono {worst_mono:.3e}, coco {worst_coco:.3e}, adjoint {worst_adj:.3e}, \
         projection exact {proj_ok}, expansion {worst_expansion:.3e}"
    ));
    Outcome::new(ok, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in ExampleKind::ALL {
        let coarse = spec(kind, N);
        let fine = spec(kind, 2 * N);
        let sc = verify_source_condition(&coarse).unwrap();
        let sf = verify_source_condition(&fine).unwrap();

        // Oracle: rebuild F'(u*)^* z from its definition on the coarse grid.
        let h = coarse.grid.step();
        let fu = decay_oracle(coarse.c0, h, coarse.u_star.values());
        let z = coarse.source.values();
        let n = z.len();
        let mut image = vec![0.0; n];
        let mut tail = 0.0;
        for k in (1..n).rev() {
            tail += fu[k] * z[k];
            image[k] = -h * tail;
        }
        let offset: Vec<f64> = coarse
            .u_star
            .values()
            .iter()
            .zip(coarse.ubar.values())
            .map(|(a, b)| a - b)
            .collect();
        let defect = h_dist(h, &image, &offset);
        ok &= (defect - sc.defect).abs() <= 1e-12;

        let halving = sc.defect / sf.defect;
        ok &= sc.defect <= 5.0 * h && sc.rho_l < 2.0 && (halving - 2.0).abs() <= 0.4;
        parts.push(format!(
            "{kind}: defect {:.3e} (<= {:.3e}), rho*L {:.3} (< 2), defect(N)/defect(2N) {halving:.3} (2 +- 0.4)",
            sc.defect,
            5.0 * h,
            sc.rho_l
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn criterion_8(excesses: &[f64]) -> Outcome {
    let worst = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        !excesses.is_empty() && worst <= CONTRACTION_SLACK,
        format!(
            "{} solves, max (inc_k+1 - (1 - mu alpha) inc_k)/max(1, ||u||) = {worst:.3e} (<= 1e-12)",
            excesses.len()
        ),
    )
}

fn main() -> ExitCode {
    // Accept and ignore libtest flags such as `--nocapture` or filters.
    let list_only = std::env::args().any(|a| a == "--list");
    if list_only {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }

    let c1 = table_criterion(ExampleKind::Example1, &REFERENCE_EXAMPLE1, (0.1, 1.5));
    let c2 = table_criterion(ExampleKind::Example2, &REFERENCE_EXAMPLE2, (0.04, 0.6));
    let c3 = criterion_3();
    let c4 = criterion_4();
    let excesses: Vec<f64> = [&c1, &c2, &c3, &c4]
        .iter()
        .flat_map(|c| c.excesses.iter().copied())
        .collect();
    let outcomes = [
        ("table reproduction, example1", c1),
        ("table reproduction, example2", c2),
        ("stability gap", c3),
        ("noise-free rates", c4),
        ("diagonal oracle equivalence", criterion_5()),
        ("property suites", criterion_6()),
        ("source condition", criterion_7()),
        ("contraction", criterion_8(&excesses)),
    ];

    let mut failed = 0;
    for (i, (name, o)) in outcomes.iter().enumerate() {
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}): {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.summary
        );
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
