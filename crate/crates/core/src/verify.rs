//! Acceptance checks.
//!
//! Each `criterion_*` runs one end-to-end check with fixed seeds and
//! returns a [`CriterionReport`]; [`run_all`] runs the eight in order.
//! Quick mode keeps every degree, tolerance and identity but uses fewer
//! Monte Carlo trials and integration points.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeff_models::{sample_coefficients, trial_seed, CoefficientModel, PolyKind};
use crate::constants::{
    compute_c, compute_i_alpha, compute_j, i_alpha_closed_form, monte_carlo_c, Quad2Config,
    C_LOWER, C_UPPER,
};
use crate::error::Result;
use crate::experiment::{run_experiment, ExperimentConfig, Row};
use crate::kac_rice::{abc_direct, expected_zeros_exact_r0, expected_zeros_quadrature, QuadConfig};
use crate::par::{map_indexed, Execution};
use crate::trigpoly::{dirichlet_ratio, factorize_algebraic, horner, trig_sum_cos, trig_sum_sin};
use crate::zeros::{count_zeros, deterministic_zero_set, CountOptions};

pub const MASTER_SEED: u64 = 20_240_901;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub quick: bool,
    pub exec: Execution,
}

impl VerifyOptions {
    fn trials(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionReport {
    fn new(id: u32, title: &str, failures: Vec<String>, notes: Vec<String>) -> Self {
        let passed = failures.is_empty();
        let mut lines = failures;
        lines.extend(notes);
        Self {
            id,
            title: title.to_string(),
            passed,
            detail: lines.join("; "),
        }
    }

    fn errored(id: u32, title: &str, err: crate::Error) -> Self {
        Self {
            id,
            title: title.to_string(),
            passed: false,
            detail: format!("error: {err}"),
        }
    }

    /// `PASS [3] title: detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

fn wrap(
    id: u32,
    title: &str,
    body: impl FnOnce(&mut Vec<String>, &mut Vec<String>) -> Result<()>,
) -> CriterionReport {
    let (mut failures, mut notes) = (Vec::new(), Vec::new());
    match body(&mut failures, &mut notes) {
        Ok(()) => CriterionReport::new(id, title, failures, notes),
        Err(e) => CriterionReport::errored(id, title, e),
    }
}

fn simulate(model: CoefficientModel, n: usize, trials: usize, exec: Execution) -> Result<Row> {
    let config = ExperimentConfig::new(model, vec![n], trials, MASTER_SEED);
    let mut res = run_experiment(&config, exec)?;
    Ok(res.rows.remove(0))
}

fn check_row(row: &Row, failures: &mut Vec<String>) {
    if row.failed {
        failures.push(format!(
            "n={}: {} unstable trials",
            row.n, row.unstable_trials
        ));
    }
}

/// Exact law for `ℓ | n+1`: Monte Carlo mean within 3 standard errors,
/// reduced-model quadrature within `1e-9` relative.
pub fn criterion_1(opts: &VerifyOptions) -> CriterionReport {
    wrap(1, "exact law for l | n+1", |failures, notes| {
        let trials = opts.trials(2000, 300);
        for (ell, n) in [(2, 199), (3, 299), (5, 499)] {
            let model = CoefficientModel::periodic(PolyKind::Trig, ell);
            let exact = expected_zeros_exact_r0(n, ell)?;
            let row = simulate(model, n, trials, opts.exec)?;
            check_row(&row, failures);
            let dev = (row.empirical_mean - exact).abs();
            if dev > 3.0 * row.stderr {
                failures.push(format!(
                    "l={ell} n={n}: mean {:.4} vs {exact:.4}, |dev| {dev:.4} > 3se {:.4}",
                    row.empirical_mean,
                    3.0 * row.stderr
                ));
            }
            let kr = expected_zeros_quadrature(&model, n, &QuadConfig::default(), opts.exec)?;
            let rel = (kr.expected_zeros - exact).abs() / exact;
            if rel > 1e-9 {
                failures.push(format!("l={ell} n={n}: quadrature rel err {rel:.2e}"));
            }
            notes.push(format!(
                "l={ell} n={n}: mean {:.3}±{:.3}, exact {exact:.3}, quad rel {rel:.1e}",
                row.empirical_mean, row.stderr
            ));
        }
        Ok(())
    })
}

/// `ℓ = 1`: every trial has exactly `2n` zeros.
pub fn criterion_2(opts: &VerifyOptions) -> CriterionReport {
    wrap(2, "l = 1 gives exactly 2n zeros", |failures, notes| {
        let trials = opts.trials(200, 50);
        let model = CoefficientModel::periodic(PolyKind::Trig, 1);
        for n in [20, 50, 100] {
            let outcomes = map_indexed(opts.exec, trials, |t| -> Result<(usize, bool)> {
                let s = sample_coefficients(&model, n, trial_seed(MASTER_SEED, n, t as u64))?;
                let rep = count_zeros(&s, &CountOptions::default())?;
                Ok((rep.count, rep.stable))
            });
            let mut bad = 0;
            for o in outcomes {
                let (count, stable) = o?;
                if count != 2 * n || !stable {
                    bad += 1;
                }
            }
            if bad > 0 {
                failures.push(format!(
                    "n={n}: {bad}/{trials} trials without exactly 2n stable zeros"
                ));
            }
        }
        notes.push(format!("{trials} trials at each n in {{20, 50, 100}}"));
        Ok(())
    })
}

/// Periodic cosine, `ℓ = 3`: `|mean − 2n| ≤ K n^{2/3}` with one `K ≤ 5`.
pub fn criterion_3(opts: &VerifyOptions) -> CriterionReport {
    wrap(
        3,
        "cosine l = 3 mean is 2n + O(n^{2/3})",
        |failures, notes| {
            let trials = opts.trials(400, 100);
            let model = CoefficientModel::periodic(PolyKind::Cosine, 3);
            let mut k_fit: f64 = 0.0;
            for n in [299, 599, 1199] {
                let row = simulate(model, n, trials, opts.exec)?;
                check_row(&row, failures);
                let k = (row.empirical_mean - 2.0 * n as f64).abs() / (n as f64).powf(2.0 / 3.0);
                k_fit = k_fit.max(k);
                notes.push(format!(
                    "n={n}: mean {:.2}±{:.2}, K_n {k:.3}",
                    row.empirical_mean, row.stderr
                ));
            }
            if k_fit > 5.0 {
                failures.push(format!("fitted K = {k_fit:.3} > 5"));
            }
            notes.insert(0, format!("K = {k_fit:.3}"));
            Ok(())
        },
    )
}

/// `r ≠ 0`: mean/n matches `C_{ℓ,r}`, and `C_{ℓ,r}` matches a plain
/// Monte Carlo estimate of the double integral.
pub fn criterion_4(opts: &VerifyOptions) -> CriterionReport {
    wrap(
        4,
        "mean/n tends to C_{l,r} for r != 0",
        |failures, notes| {
            let trials = opts.trials(2000, 300);
            let points: u64 = if opts.quick { 1_000_000 } else { 10_000_000 };
            for (ell, r, n) in [(2, 1, 400), (3, 1, 399), (3, 2, 400)] {
                let c = compute_c(ell, r, Quad2Config::default(), opts.exec)?;
                let model = CoefficientModel::periodic(PolyKind::Trig, ell);
                let row = simulate(model, n, trials, opts.exec)?;
                check_row(&row, failures);
                let nf = n as f64;
                let ratio = row.empirical_mean / nf;
                let tol = (3.0 * row.stderr / nf).max(0.01);
                if (ratio - c.value).abs() > tol {
                    failures.push(format!(
                        "l={ell} r={r} n={n}: mean/n {ratio:.5} vs C {:.5}, tol {tol:.4}",
                        c.value
                    ));
                }
                let (mc, se) = monte_carlo_c(
                    ell,
                    r,
                    points,
                    MASTER_SEED ^ (ell * 16 + r) as u64,
                    opts.exec,
                )?;
                let band = 3.0 * (se + c.abs_error_estimate);
                if (mc - c.value).abs() > band {
                    failures.push(format!(
                        "l={ell} r={r}: Monte Carlo C {mc:.5} vs quadrature {:.5}, band {band:.2e}",
                        c.value
                    ));
                }
                notes.push(format!(
                    "l={ell} r={r} n={n}: mean/n {ratio:.4}, C {:.5}, MC {mc:.4}±{se:.4}",
                    c.value
                ));
            }
            Ok(())
        },
    )
}

/// `J = 1`, the closed form of `I_α`, bounds on `C` and the Jensen chain.
pub fn criterion_5(opts: &VerifyOptions) -> CriterionReport {
    wrap(5, "constant identities", |failures, notes| {
        let quad = Quad2Config::default();
        let mut worst_j: f64 = 0.0;
        for ell in 2..=6 {
            for r in 1..ell {
                let j = compute_j(ell, r, quad, opts.exec)?;
                let err = (j.value - 1.0).abs();
                worst_j = worst_j.max(err);
                if err > 1e-7 {
                    failures.push(format!("J_{{{ell},{r}}} = {:.10}", j.value));
                }
                let c = compute_c(ell, r, quad, opts.exec)?;
                if c.value < (1.0 + j.value * j.value).sqrt() - 1e-6 {
                    failures.push(format!(
                        "Jensen: C_{{{ell},{r}}} = {:.8} < sqrt(1+J^2)",
                        c.value
                    ));
                }
            }
        }
        let mut worst_i: f64 = 0.0;
        let (lo, hi) = (0.15, FRAC_PI_2 - 0.15);
        for i in 0..20 {
            let alpha = lo + (hi - lo) * i as f64 / 19.0;
            let got = compute_i_alpha(alpha, quad, opts.exec)?;
            let want = i_alpha_closed_form(alpha);
            let rel = (got.value - want).abs() / want;
            worst_i = worst_i.max(rel);
            if rel > 1e-7 {
                failures.push(format!("I_alpha at alpha={alpha:.4}: rel err {rel:.2e}"));
            }
        }
        let (mut c_min, mut c_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for ell in 2..=8 {
            for r in 1..ell {
                let c = compute_c(ell, r, quad, opts.exec)?.value;
                c_min = c_min.min(c);
                c_max = c_max.max(c);
                if !(c > C_LOWER + 1e-6 && c <= C_UPPER + 1e-9) {
                    failures.push(format!("C_{{{ell},{r}}} = {c:.10} outside (sqrt2, 2]"));
                }
            }
            let c0 = compute_c(ell, 0, quad, opts.exec)?.value;
            if c0 != 1.0 {
                failures.push(format!("C_{{{ell},0}} = {c0} != 1"));
            }
        }
        notes.push(format!(
            "max |J-1| {worst_j:.1e}, max I rel {worst_i:.1e}, C in [{c_min:.5}, {c_max:.5}] for l <= 8"
        ));
        Ok(())
    })
}

/// i.i.d. trig baseline `2n/√3`.
pub fn criterion_6(opts: &VerifyOptions) -> CriterionReport {
    wrap(6, "i.i.d. baseline 2n/sqrt3", |failures, notes| {
        let model = CoefficientModel::iid(PolyKind::Trig);
        let target = |n: usize| 2.0 * n as f64 / 3f64.sqrt();
        let kr = expected_zeros_quadrature(&model, 200, &QuadConfig::default(), opts.exec)?;
        let rel_q = (kr.expected_zeros - target(200)).abs() / target(200);
        if rel_q > 0.005 {
            failures.push(format!("quadrature at n=200: rel dev {rel_q:.4}"));
        }
        let row = simulate(model, 100, opts.trials(2000, 300), opts.exec)?;
        check_row(&row, failures);
        let rel_mc = (row.empirical_mean - target(100)).abs() / target(100);
        if rel_mc > 0.02 {
            failures.push(format!("Monte Carlo at n=100: rel dev {rel_mc:.4}"));
        }
        notes.push(format!(
            "quadrature n=200 {:.3} (rel {rel_q:.2e}), MC n=100 {:.3}±{:.3} (rel {rel_mc:.2e})",
            kr.expected_zeros, row.empirical_mean, row.stderr
        ));
        Ok(())
    })
}

fn random_point(rng: &mut ChaCha8Rng) -> Complex64 {
    let radius = rng.random_range(0.5..1.5);
    Complex64::from_polar(radius, rng.random_range(0.0..TAU))
}

/// `P(z) = (z^{ℓm} − 1)/(z^ℓ − 1) · Q(z)` for `ℓ`-periodic coefficients.
pub fn criterion_7(_opts: &VerifyOptions) -> CriterionReport {
    wrap(7, "algebraic factorization", |failures, notes| {
        let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 7);
        let mut worst: f64 = 0.0;
        for case in 0..100 {
            let ell = rng.random_range(1..=6usize);
            let m = rng.random_range(1..=40usize);
            let n = ell * m - 1;
            let model = CoefficientModel::periodic(PolyKind::Cosine, ell);
            let a = if n == 0 {
                vec![rng.random_range(-1.0..1.0)]
            } else {
                sample_coefficients(&model, n, rng.random())?.a
            };
            let fac = factorize_algebraic(&a, ell)?;
            let l1: f64 = a.iter().map(|v| v.abs()).sum();
            for _ in 0..50 {
                let z = random_point(&mut rng);
                let scale = l1 * z.norm().max(1.0).powi(n as i32);
                let res = (horner(&a, z) - fac.evaluate_factored(z)).norm() / scale;
                worst = worst.max(res);
                if res > 1e-10 {
                    failures.push(format!(
                        "case {case} (l={ell}, m={m}): residual {res:.2e} at {z}"
                    ));
                }
            }
            let roots = &fac.deterministic_roots;
            if roots.len() != n + 1 - ell {
                failures.push(format!(
                    "case {case}: {} deterministic roots, want {}",
                    roots.len(),
                    n + 1 - ell
                ));
            }
            for &(re, im) in roots {
                let z = Complex64::new(re, im);
                if (z.norm() - 1.0).abs() > 1e-14 || horner(&a, z).norm() > 1e-10 * l1 {
                    failures.push(format!("case {case}: {z} is not a unimodular root"));
                }
            }
        }
        notes.push(format!("100 vectors, max scaled residual {worst:.1e}"));
        Ok(())
    })
}

/// Seeded randomized checks of the elementary identities.
pub fn criterion_8(opts: &VerifyOptions) -> CriterionReport {
    wrap(8, "analytic micro-identities", |failures, notes| {
        let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 8);
        let cases = if opts.quick { 500 } else { 2000 };

        let mut worst_sum: f64 = 0.0;
        for _ in 0..cases {
            let r = rng.random_range(1..=20usize);
            let p = rng.random_range(0.05..3.0);
            let q = rng.random_range(-3.0..3.0);
            let x = rng.random_range(0.0..TAU);
            let (mut c, mut s) = (0.0, 0.0);
            for j in 0..r {
                let (sj, cj) = ((2.0 * p * j as f64 + q) * x).sin_cos();
                c += cj;
                s += sj;
            }
            let err = (trig_sum_cos(r, p, q, x) - c)
                .abs()
                .max((trig_sum_sin(r, p, q, x) - s).abs());
            worst_sum = worst_sum.max(err);
            if err > 1e-11 {
                failures.push(format!("closed sum r={r} p={p} q={q} x={x}: err {err:.2e}"));
            }
        }

        for _ in 0..cases {
            let a = rng.random_range(-10.0..10.0f64);
            let b = rng.random_range(-10.0..10.0f64);
            let lhs = a.sin().powi(2) + b.sin().powi(2) + 2.0 * a.sin() * b.sin() * (a + b).cos();
            if (lhs - (a + b).sin().powi(2)).abs() > 1e-12 {
                failures.push(format!("sin^2 identity at a={a} b={b}"));
            }
        }

        let models = [
            CoefficientModel::iid(PolyKind::Trig),
            CoefficientModel::iid(PolyKind::Cosine),
            CoefficientModel::periodic(PolyKind::Trig, 3),
            CoefficientModel::periodic(PolyKind::Cosine, 4),
        ];
        for _ in 0..cases {
            let model = models[rng.random_range(0..models.len())];
            let n = rng.random_range(8..300usize);
            let x = rng.random_range(0.0..TAU);
            let t = abc_direct(&model, n, x)?;
            if t.raw_discriminant() < -1e-12 * t.a * t.c || t.gram < 0.0 {
                failures.push(format!("AC < B^2 for {model:?} n={n} x={x}"));
            }
        }

        for (model, n) in [
            (models[0], 60),
            (models[2], 59),
            (models[2], 61),
            (models[3], 63),
        ] {
            let base = expected_zeros_quadrature(&model, n, &QuadConfig::default(), opts.exec)?
                .expected_zeros;
            for sigma in [0.01, 7.5] {
                let v = expected_zeros_quadrature(
                    &model.with_sigma(sigma),
                    n,
                    &QuadConfig::default(),
                    opts.exec,
                )?
                .expected_zeros;
                if (v - base).abs() > 1e-12 * base {
                    failures.push(format!(
                        "sigma={sigma} changes E[N] for {model:?} n={n}: {v} vs {base}"
                    ));
                }
            }
        }

        for ell in 1..=6 {
            for m in 2..=40 {
                let z = deterministic_zero_set(m, ell);
                let bad = z
                    .iter()
                    .any(|&x| dirichlet_ratio(m, ell, x).abs() > 1e-10 * m as f64);
                if z.len() != ell * (m - 1) || bad {
                    failures.push(format!("phi_m zero set wrong for m={m} l={ell}"));
                }
            }
        }

        notes.push(format!(
            "{cases} cases per identity, max closed-sum err {worst_sum:.1e}; phi_m zero sets for l <= 6, m <= 40"
        ));
        Ok(())
    })
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionReport> {
    let checks: [fn(&VerifyOptions) -> CriterionReport; 8] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
    ];
    checks.iter().map(|f| f(opts)).collect()
}
