use std::f64::consts::{PI, TAU};

use trigzeros::constants::{compute_c, Quad2Config};
use trigzeros::kac_rice::{
    abc_direct, expected_zeros_on, expected_zeros_quadrature, leading_abc, limit_integral_fpm,
    limit_integral_g, QuadConfig, Sign,
};
use trigzeros::{CoefficientModel, Execution, PolyKind};

const EXEC: Execution = Execution::Parallel;

/// `f_k(x)` and `f_k'(x)` for every basis function, from literal sums.
fn naive_basis(model: &CoefficientModel, n: usize, x: f64) -> Vec<(f64, f64)> {
    let ell = model.period().unwrap_or(n + 1);
    let trig = model.kind == PolyKind::Trig;
    let mut out = Vec::new();
    for i in 0..ell {
        let (mut c, mut dc, mut s, mut ds) = (0.0, 0.0, 0.0, 0.0);
        let mut k = i;
        while k <= n {
            let kf = k as f64;
            c += (kf * x).cos();
            dc -= kf * (kf * x).sin();
            s += (kf * x).sin();
            ds += kf * (kf * x).cos();
            k += ell;
        }
        out.push((c, dc));
        if trig {
            out.push((s, ds));
        }
    }
    out
}

/// Trapezoid rule for `(1/π) ∫ √(AC − B²)/A` over a period.
fn naive_expected_zeros(model: &CoefficientModel, n: usize, points: usize) -> f64 {
    let h = TAU / points as f64;
    let mut total = 0.0;
    for i in 0..points {
        let x = (i as f64 + 0.5) * h;
        let basis = naive_basis(model, n, x);
        let a: f64 = basis.iter().map(|(f, _)| f * f).sum();
        let b: f64 = basis.iter().map(|(f, d)| f * d).sum();
        let c: f64 = basis.iter().map(|(_, d)| d * d).sum();
        total += (a * c - b * b).max(0.0).sqrt() / a;
    }
    total * h / PI
}

#[test]
fn iid_trig_matches_closed_form() {
    let model = CoefficientModel::iid(PolyKind::Trig);
    for n in [1usize, 7, 50, 333] {
        let nf = n as f64;
        let want = 2.0 * (nf * (2.0 * nf + 1.0) / 6.0).sqrt();
        let got = expected_zeros_quadrature(&model, n, &QuadConfig::default(), EXEC)
            .unwrap()
            .expected_zeros;
        assert!((got - want).abs() < 1e-10 * want, "n={n}: {got} vs {want}");
    }
}

#[test]
fn quadrature_matches_trapezoid_oracle() {
    let cases = [
        (CoefficientModel::iid(PolyKind::Cosine), 40),
        (CoefficientModel::periodic(PolyKind::Trig, 2), 40),
        (CoefficientModel::periodic(PolyKind::Trig, 3), 40),
        (CoefficientModel::periodic(PolyKind::Cosine, 4), 42),
    ];
    for (model, n) in cases {
        let want = naive_expected_zeros(&model, n, 40_000);
        let got = expected_zeros_quadrature(&model, n, &QuadConfig::default(), EXEC)
            .unwrap()
            .expected_zeros;
        assert!(
            (got - want).abs() < 1e-6 * want,
            "{model:?} n={n}: {got} vs {want}"
        );
    }
}

/// With `ℓ | n+1` every basis function carries the factor `φ_m`, which
/// cancels from the density; the trapezoid rule sees only the smooth
/// part and misses the `ℓ(m−1)` deterministic zeros.
#[test]
fn r_zero_quadrature_is_oracle_plus_deterministic_zeros() {
    for (ell, m) in [(3usize, 14usize), (4, 10)] {
        let n = ell * m - 1;
        let model = CoefficientModel::periodic(PolyKind::Trig, ell);
        let want = naive_expected_zeros(&model, n, 40_000) + (ell * (m - 1)) as f64;
        let got = expected_zeros_quadrature(&model, n, &QuadConfig::default(), EXEC)
            .unwrap()
            .expected_zeros;
        assert!(
            (got - want).abs() < 1e-6 * want,
            "l={ell} n={n}: {got} vs {want}"
        );
    }
}

#[test]
fn sigma_does_not_change_expected_zeros() {
    for model in [
        CoefficientModel::iid(PolyKind::Trig),
        CoefficientModel::periodic(PolyKind::Trig, 3),
        CoefficientModel::periodic(PolyKind::Cosine, 2),
    ] {
        let base = expected_zeros_quadrature(&model, 90, &QuadConfig::default(), EXEC)
            .unwrap()
            .expected_zeros;
        for sigma in [1e-3, 0.5, 40.0] {
            let v = expected_zeros_quadrature(
                &model.with_sigma(sigma),
                90,
                &QuadConfig::default(),
                EXEC,
            )
            .unwrap()
            .expected_zeros;
            assert!((v - base).abs() <= 1e-12 * base, "{model:?} sigma={sigma}");
        }
    }
}

/// `A` is exact; `B²` and `C` differ from the direct values by a
/// remainder that grows no faster than `n^{1.9}` away from the lattice.
#[test]
fn leading_terms_have_lower_order_remainder() {
    for (ell, r) in [(2usize, 1usize), (3, 1), (3, 2), (5, 3)] {
        let model = CoefficientModel::periodic(PolyKind::Trig, ell);
        let mut fitted: Option<(f64, f64)> = None;
        for m in [50usize, 100, 200, 400] {
            let n = ell * m - 1 + r;
            let (mut db, mut dc) = (0.0f64, 0.0f64);
            for i in 0..120 {
                let x = 0.3 + (TAU / ell as f64 - 0.6) * i as f64 / 119.0;
                let d = abc_direct(&model, n, x).unwrap();
                let l = leading_abc(ell, r, m, x);
                assert!(
                    (d.a - l.a).abs() <= 1e-10 * d.a,
                    "A at l={ell} r={r} n={n} x={x}"
                );
                db = db.max((d.b * d.b - l.b_squared).abs());
                dc = dc.max((d.c - l.c).abs());
            }
            let scale = (n as f64).powf(1.9);
            let (kb, kc) = (db / scale, dc / scale);
            match fitted {
                None => fitted = Some((kb, kc)),
                Some((fb, fc)) => {
                    assert!(kb <= fb, "B^2 remainder l={ell} r={r} n={n}: {kb} > {fb}");
                    assert!(kc <= fc, "C remainder l={ell} r={r} n={n}: {kc} > {fc}");
                }
            }
        }
    }
}

#[test]
fn fpm_integrals_tend_to_one_half() {
    for ell in [2usize, 3, 4, 7] {
        for n in [100usize, 400, 1600] {
            for sign in [Sign::Plus, Sign::Minus] {
                let v = limit_integral_fpm(ell, n, sign, &QuadConfig::default(), EXEC)
                    .unwrap()
                    .value;
                assert!(
                    (v - 0.5).abs() <= 1.1 / n as f64,
                    "l={ell} n={n} {sign:?}: {v}"
                );
            }
        }
    }
}

#[test]
fn g_integral_approaches_c_and_tracks_kac_rice() {
    for (ell, r) in [(2usize, 1usize), (3, 2)] {
        let c = compute_c(ell, r, Quad2Config::default(), EXEC)
            .unwrap()
            .value;
        let mut prev_gap = f64::INFINITY;
        for m in [25usize, 100, 400] {
            let g = limit_integral_g(ell, r, m, &QuadConfig::default(), EXEC)
                .unwrap()
                .value;
            let gap = c - g;
            assert!(
                gap > 0.0 && gap < prev_gap,
                "l={ell} r={r} m={m}: g={g} C={c}"
            );
            prev_gap = gap;
            let n = ell * m - 1 + r;
            let model = CoefficientModel::periodic(PolyKind::Trig, ell);
            let on = expected_zeros_on(
                &model,
                n,
                0.0,
                TAU / ell as f64,
                &QuadConfig::default(),
                EXEC,
            )
            .unwrap()
            .value;
            let band = 0.5 * (m as f64).powf(-0.2);
            assert!((on / m as f64 - g).abs() <= band, "l={ell} r={r} m={m}");
        }
    }
}

#[test]
fn finite_n_expectation_approaches_n_times_c() {
    let c = compute_c(3, 1, Quad2Config::default(), EXEC).unwrap().value;
    let model = CoefficientModel::periodic(PolyKind::Trig, 3);
    let mut prev = f64::INFINITY;
    for n in [99usize, 399, 1599] {
        let e = expected_zeros_quadrature(&model, n, &QuadConfig::default(), EXEC)
            .unwrap()
            .expected_zeros;
        let gap = (e / n as f64 - c).abs();
        assert!(
            gap < prev && gap <= (n as f64).powf(-0.2),
            "n={n}: gap {gap}"
        );
        prev = gap;
    }
}
