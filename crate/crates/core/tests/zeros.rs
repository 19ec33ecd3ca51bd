use std::f64::consts::TAU;

use proptest::prelude::*;
use trigzeros::trigpoly::reduce_periodic;
use trigzeros::zeros::{count_zeros, deterministic_zero_set, CountOptions};
use trigzeros::{sample_coefficients, CoefficientModel, PolyKind, PolySample};

/// Sign changes of the literal sum on a uniform grid, starting just off 0.
fn dense_sign_changes(s: &PolySample, points: usize) -> usize {
    let f = |x: f64| -> f64 {
        (0..=s.n)
            .map(|k| s.a[k] * (k as f64 * x).cos() + s.b[k] * (k as f64 * x).sin())
            .sum()
    };
    let h = TAU / points as f64;
    let vals: Vec<f64> = (0..points).map(|i| f((i as f64 + 0.37) * h)).collect();
    (0..points)
        .filter(|&i| vals[i] * vals[(i + 1) % points] < 0.0)
        .count()
}

#[test]
fn counts_match_dense_sampling() {
    for (model, n) in [
        (CoefficientModel::iid(PolyKind::Trig), 25),
        (CoefficientModel::iid(PolyKind::Cosine), 40),
        (CoefficientModel::periodic(PolyKind::Trig, 3), 31),
    ] {
        for seed in 0..20 {
            let s = sample_coefficients(&model, n, seed).unwrap();
            let rep = count_zeros(&s, &CountOptions::default()).unwrap();
            assert!(rep.stable);
            assert_eq!(
                rep.count,
                dense_sign_changes(&s, 4000 * n),
                "{model:?} n={n} seed={seed}"
            );
        }
    }
}

#[test]
fn counts_are_stable_across_grid_densities() {
    let model = CoefficientModel::periodic(PolyKind::Trig, 2);
    for seed in 0..10 {
        let s = sample_coefficients(&model, 300, seed).unwrap();
        let base = count_zeros(&s, &CountOptions::default()).unwrap();
        assert!(base.stable && base.unresolved_cells == 0);
        assert!(base.grid_counts.windows(2).all(|w| w[0] == w[1]));
        for gpd in [8, 64] {
            let opts = CountOptions {
                grid_per_degree: gpd,
                ..CountOptions::default()
            };
            assert_eq!(
                count_zeros(&s, &opts).unwrap().count,
                base.count,
                "seed={seed} gpd={gpd}"
            );
        }
    }
}

/// For `ℓ | n+1` the roots are the zeros of `φ_m` plus those of the
/// reduced factor.
#[test]
fn r_zero_roots_split_into_deterministic_and_reduced() {
    for (ell, m, seed) in [(2usize, 30usize, 1u64), (3, 20, 2), (4, 12, 3)] {
        let n = ell * m - 1;
        let model = CoefficientModel::periodic(PolyKind::Trig, ell);
        let s = sample_coefficients(&model, n, seed).unwrap();
        let opts = CountOptions {
            refine_roots: true,
            ..CountOptions::default()
        };
        let rep = count_zeros(&s, &opts).unwrap();
        let roots = rep.roots.unwrap();
        let det = deterministic_zero_set(m, ell);
        for z in &det {
            assert!(
                roots.iter().any(|r| (r - z).abs() < 1e-9),
                "missing {z} (l={ell}, m={m})"
            );
        }
        let red = reduce_periodic(&s).unwrap();
        let rest: Vec<f64> = roots
            .iter()
            .copied()
            .filter(|r| det.iter().all(|z| (r - z).abs() >= 1e-9))
            .collect();
        assert_eq!(rest.len() + det.len(), rep.count);
        let scale: f64 = red.a.iter().chain(&red.b).map(|v| v.abs()).sum();
        for r in rest {
            assert!(red.evaluate(r).abs() < 1e-8 * scale, "l={ell} m={m} x={r}");
        }
    }
}

fn sample_strategy() -> impl Strategy<Value = PolySample> {
    (1usize..60, any::<u64>(), prop::bool::ANY).prop_map(|(n, seed, cosine)| {
        let kind = if cosine {
            PolyKind::Cosine
        } else {
            PolyKind::Trig
        };
        sample_coefficients(&CoefficientModel::iid(kind), n, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_is_even_and_bounded(s in sample_strategy()) {
        let rep = count_zeros(&s, &CountOptions::default()).unwrap();
        prop_assert!(rep.stable);
        prop_assert_eq!(rep.count % 2, 0);
        prop_assert!(rep.count <= 2 * s.n);
    }

    #[test]
    fn count_ignores_positive_scaling_and_sign(s in sample_strategy(), k in 1e-6f64..1e6) {
        let base = count_zeros(&s, &CountOptions::default()).unwrap().count;
        for factor in [k, -k] {
            let a = s.a.iter().map(|v| v * factor).collect();
            let b = s.b.iter().map(|v| v * factor).collect();
            let t = PolySample::from_coefficients(s.model, a, b).unwrap();
            prop_assert_eq!(count_zeros(&t, &CountOptions::default()).unwrap().count, base);
        }
    }
}
