//! Evaluation of `T_n`, `V_n` and their derivatives, the Dirichlet ratio
//! `φ_m`, the reduced factor of a periodic `r = 0` sample, and the
//! algebraic factorization of `P_n(z) = Σ a_k z^k`.

use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeff_models::{decompose_degree, PolyKind, PolySample};
use crate::error::{Error, Result};
use crate::numeric::{parity_sign, CompensatedSum};

/// Below this `|sin|` the ratio helpers switch to their Taylor expansion.
pub const SINGULAR_WINDOW: f64 = 1e-8;

/// Above this degree the evaluators accumulate with compensated sums.
const COMPENSATE_ABOVE: usize = 1024;

/// Rotation steps between exact reseeds of `(cos jx, sin jx)`.
const RESEED_EVERY: usize = 64;

/// Calls `f(j, cos jx, sin jx)` for `j = 0..=n`.
///
/// Uses the angle-addition recurrence, reseeded with a direct `sin_cos`
/// every 64 steps so the rounding drift stays bounded.
#[inline]
pub fn for_each_harmonic<F: FnMut(usize, f64, f64)>(n: usize, x: f64, mut f: F) {
    let (s1, c1) = x.sin_cos();
    let mut j = 0;
    while j <= n {
        let (mut s, mut c) = (j as f64 * x).sin_cos();
        let end = (j + RESEED_EVERY).min(n + 1);
        while j < end {
            f(j, c, s);
            let c_next = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = c_next;
            j += 1;
        }
    }
}

enum Acc {
    Plain(f64),
    Compensated(CompensatedSum),
}

impl Acc {
    fn new(n: usize) -> Self {
        if n > COMPENSATE_ABOVE {
            Acc::Compensated(CompensatedSum::new())
        } else {
            Acc::Plain(0.0)
        }
    }

    #[inline]
    fn add(&mut self, v: f64) {
        match self {
            Acc::Plain(s) => *s += v,
            Acc::Compensated(s) => s.add(v),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Acc::Plain(s) => *s,
            Acc::Compensated(s) => s.value(),
        }
    }
}

/// `(Σ a_j cos jx + b_j sin jx, Σ j(b_j cos jx − a_j sin jx))`.
pub fn eval_coefficients(a: &[f64], b: &[f64], x: f64) -> (f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().saturating_sub(1);
    let mut f = Acc::new(n);
    let mut df = Acc::new(n);
    for_each_harmonic(n, x, |j, c, s| {
        f.add(a[j] * c + b[j] * s);
        df.add(j as f64 * (b[j] * c - a[j] * s));
    });
    (f.value(), df.value())
}

pub fn evaluate(sample: &PolySample, x: f64) -> f64 {
    let n = sample.n;
    let mut f = Acc::new(n);
    let (a, b) = (&sample.a, &sample.b);
    match sample.kind() {
        PolyKind::Trig => for_each_harmonic(n, x, |j, c, s| f.add(a[j] * c + b[j] * s)),
        PolyKind::Cosine => for_each_harmonic(n, x, |j, c, _| f.add(a[j] * c)),
    }
    f.value()
}

pub fn evaluate_derivative(sample: &PolySample, x: f64) -> f64 {
    evaluate_with_derivative(sample, x).1
}

pub fn evaluate_with_derivative(sample: &PolySample, x: f64) -> (f64, f64) {
    eval_coefficients(&sample.a, &sample.b, x)
}

/// `sin(r·p·x) / sin(p·x)`, with the removable singularities at
/// `p·x ∈ πℤ` filled in by continuity.
///
/// Near `p·x = kπ` write `δ = p·x − kπ`; then the ratio equals
/// `(−1)^{k(r−1)} sin(rδ)/sin δ`, which is replaced by
/// `r(1 − (r²−1)δ²/6)` once `|sin δ| < 1e-8`.
pub fn sin_ratio(r: usize, p: f64, x: f64) -> f64 {
    let (k, delta) = lattice_offset(p * x);
    let rf = r as f64;
    let sign = parity_sign(k as i64 * (r as i64 - 1));
    let s = delta.sin();
    if s.abs() < SINGULAR_WINDOW {
        sign * rf * (1.0 - (rf * rf - 1.0) * delta * delta / 6.0)
    } else {
        sign * (rf * delta).sin() / s
    }
}

/// `(k, θ − kπ)` for the nearest multiple `kπ`, with `π` split in two
/// parts so the offset keeps its relative accuracy near the lattice.
fn lattice_offset(theta: f64) -> (f64, f64) {
    const PI_LO: f64 = 1.224_646_799_147_353_2e-16;
    let k = (theta / PI).round();
    (k, (theta - k * PI) - k * PI_LO)
}

/// `d/dx [sin(r·p·x) / sin(p·x)]`.
pub fn sin_ratio_derivative(r: usize, p: f64, x: f64) -> f64 {
    let (k, delta) = lattice_offset(p * x);
    let rf = r as f64;
    let sign = parity_sign(k as i64 * (r as i64 - 1));
    if (rf * delta).abs() < 1e-3 {
        // d/dδ of r(1 − (r²−1)δ²/6 + (r²−1)(3r²−7)δ⁴/360)
        let q = rf * rf - 1.0;
        let d = rf * (-q * delta / 3.0 + q * (3.0 * rf * rf - 7.0) * delta.powi(3) / 90.0);
        sign * p * d
    } else {
        let (s, c) = delta.sin_cos();
        let (sr, cr) = (rf * delta).sin_cos();
        sign * p * (rf * cr * s - sr * c) / (s * s)
    }
}

/// The Dirichlet ratio `φ_m(x) = sin(mℓx/2) / sin(ℓx/2)`, equal to `±m`
/// on the lattice `x = 2kπ/ℓ`.
pub fn dirichlet_ratio(m: usize, ell: usize, x: f64) -> f64 {
    sin_ratio(m, ell as f64 / 2.0, x)
}

pub fn dirichlet_ratio_derivative(m: usize, ell: usize, x: f64) -> f64 {
    sin_ratio_derivative(m, ell as f64 / 2.0, x)
}

/// Closed form of `Σ_{j<r} cos((2pj + q)x)`.
pub fn trig_sum_cos(r: usize, p: f64, q: f64, x: f64) -> f64 {
    sin_ratio(r, p, x) * (((r as f64 - 1.0) * p + q) * x).cos()
}

/// Closed form of `Σ_{j<r} sin((2pj + q)x)`.
pub fn trig_sum_sin(r: usize, p: f64, q: f64, x: f64) -> f64 {
    sin_ratio(r, p, x) * (((r as f64 - 1.0) * p + q) * x).sin()
}

/// `u_ℓ(x) = sin(ℓx) / (ℓ sin x)`; tends to 1 at `x → 0` and to
/// `(−1)^{ℓ+1}` at `x → π`.
pub fn u_ell(ell: usize, x: f64) -> f64 {
    sin_ratio(ell, 1.0, x) / ell as f64
}

/// The `ℓ`-term random factor `T_n*` (or `V_n*`) of a periodic sample
/// with `r = 0`, so that `T_n = φ_m · T_n*`.
///
/// Frequency `k` is `(2k + (m−1)ℓ) / 2`, stored as the integer numerator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub n: usize,
    pub ell: usize,
    pub m: usize,
    pub kind: PolyKind,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub freq_numerators: Vec<u64>,
}

impl ReducedSample {
    pub fn frequency(&self, k: usize) -> f64 {
        self.freq_numerators[k] as f64 / 2.0
    }

    /// `(T*(x), T*'(x))`. Angles are formed as `numerator · (x/2)` so the
    /// half-integer frequencies are exact.
    pub fn evaluate_with_derivative(&self, x: f64) -> (f64, f64) {
        let half = x / 2.0;
        let mut f = 0.0;
        let mut df = 0.0;
        for k in 0..self.ell {
            let w = self.freq_numerators[k] as f64;
            let (s, c) = (w * half).sin_cos();
            let freq = w / 2.0;
            f += self.a[k] * c + self.b[k] * s;
            df += freq * (self.b[k] * c - self.a[k] * s);
        }
        (f, df)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.evaluate_with_derivative(x).0
    }

    /// `φ_m(x) · T*(x)`; should equal the unreduced evaluation.
    pub fn evaluate_factored(&self, x: f64) -> f64 {
        dirichlet_ratio(self.m, self.ell, x) * self.evaluate(x)
    }
}

/// Reduced frequency numerators `2k + (m−1)ℓ` for `k < ℓ`.
pub fn reduced_frequency_numerators(ell: usize, m: usize) -> Vec<u64> {
    (0..ell).map(|k| (2 * k + (m - 1) * ell) as u64).collect()
}

pub fn reduce_periodic(sample: &PolySample) -> Result<ReducedSample> {
    let ell = sample
        .model
        .period()
        .ok_or_else(|| Error::InvalidArgument("reduction needs a periodic sample".into()))?;
    let d = decompose_degree(sample.n, ell)?;
    if d.r != 0 {
        return Err(Error::Unsupported(format!(
            "no reduced form for r = {} (n = {}, ell = {ell}); only r = 0 factorizes",
            d.r, sample.n
        )));
    }
    Ok(ReducedSample {
        n: sample.n,
        ell,
        m: d.m,
        kind: sample.kind(),
        a: sample.a[..ell].to_vec(),
        b: sample.b[..ell].to_vec(),
        freq_numerators: reduced_frequency_numerators(ell, d.m),
    })
}

/// `P_n(z) = ((z^{ℓm} − 1)/(z^ℓ − 1)) · Σ_{k<ℓ} a_k z^k` for an
/// `ℓ`-periodic coefficient vector of length `ℓm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicFactorization {
    pub ell: usize,
    pub m: usize,
    pub base: Vec<f64>,
    /// `ℓm`-th roots of unity that are not `ℓ`-th roots, as `(re, im)`.
    pub deterministic_roots: Vec<(f64, f64)>,
}

impl AlgebraicFactorization {
    pub fn degree(&self) -> usize {
        self.ell * self.m - 1
    }

    pub fn quotient(&self, z: Complex64) -> Complex64 {
        let num = z.powu((self.ell * self.m) as u32) - 1.0;
        let den = z.powu(self.ell as u32) - 1.0;
        num / den
    }

    pub fn base_value(&self, z: Complex64) -> Complex64 {
        horner(&self.base, z)
    }

    pub fn evaluate_factored(&self, z: Complex64) -> Complex64 {
        self.quotient(z) * self.base_value(z)
    }
}

/// `Σ c_k z^k` by Horner's rule.
pub fn horner(coefficients: &[f64], z: Complex64) -> Complex64 {
    coefficients
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn factorize_algebraic(a: &[f64], ell: usize) -> Result<AlgebraicFactorization> {
    if ell == 0 || a.is_empty() || !a.len().is_multiple_of(ell) {
        return Err(Error::InvalidArgument(format!(
            "length {} is not a positive multiple of ell = {ell}",
            a.len()
        )));
    }
    if let Some(i) = (0..a.len() - ell).find(|&i| a[i + ell] != a[i]) {
        return Err(Error::InvalidArgument(format!(
            "coefficients are not {ell}-periodic at index {i}"
        )));
    }
    let m = a.len() / ell;
    let total = ell * m;
    let deterministic_roots = (0..total)
        .filter(|j| j % m != 0)
        .map(|j| {
            let (s, c) = (TAU * j as f64 / total as f64).sin_cos();
            (c, s)
        })
        .collect();
    Ok(AlgebraicFactorization {
        ell,
        m,
        base: a[..ell].to_vec(),
        deterministic_roots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_models::{sample_coefficients, CoefficientModel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_eval(sample: &PolySample, x: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for j in 0..=sample.n {
            let (s, c) = (j as f64 * x).sin_cos();
            acc.add(sample.a[j] * c);
            acc.add(sample.b[j] * s);
        }
        acc.value()
    }

    fn explicit(kind: PolyKind, a: Vec<f64>) -> PolySample {
        let b = vec![0.0; a.len()];
        PolySample::from_coefficients(CoefficientModel::iid(kind), a, b).unwrap()
    }

    #[test]
    fn trivial_evaluations() {
        let ones = explicit(PolyKind::Cosine, vec![1.0; 8]);
        assert_eq!(evaluate(&ones, 0.0), 8.0);
        let constant = explicit(PolyKind::Trig, vec![1.0, 0.0, 0.0, 0.0]);
        for x in [0.1, 1.0, 4.0] {
            assert!((evaluate(&constant, x) - 1.0).abs() < 1e-15);
            assert_eq!(evaluate_derivative(&constant, x), 0.0);
        }
        let cos1 = explicit(PolyKind::Cosine, vec![0.0, 1.0]);
        assert_eq!(evaluate_derivative(&cos1, 0.0), 0.0);
        assert!((evaluate_derivative(&cos1, PI / 2.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_compensated_reference_at_large_degree() {
        let model = CoefficientModel::iid(PolyKind::Trig);
        for (n, seed) in [(100, 1), (2000, 2), (10_000, 3)] {
            let s = sample_coefficients(&model, n, seed).unwrap();
            let scale: f64 = s.a.iter().chain(&s.b).map(|v| v.abs()).sum();
            for x in [0.3, 1.7, 3.0, 5.9] {
                let got = evaluate(&s, x);
                let want = reference_eval(&s, x);
                assert!((got - want).abs() <= 1e-12 * scale, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let model = CoefficientModel::iid(PolyKind::Trig);
        let s = sample_coefficients(&model, 30, 11).unwrap();
        let h = 1e-6;
        for x in [0.4, 1.3, 2.2, 4.4] {
            let fd = (evaluate(&s, x + h) - evaluate(&s, x - h)) / (2.0 * h);
            let d = evaluate_derivative(&s, x);
            assert!(
                (fd - d).abs() <= 1e-5 * d.abs().max(1.0),
                "x={x} fd={fd} d={d}"
            );
        }
    }

    #[test]
    fn evaluation_is_two_pi_periodic() {
        let model = CoefficientModel::iid(PolyKind::Trig);
        let s = sample_coefficients(&model, 200, 5).unwrap();
        let scale: f64 = s.a.iter().chain(&s.b).map(|v| v.abs()).sum();
        for x in [0.2, 2.5, 6.0] {
            assert!((evaluate(&s, x) - evaluate(&s, x + TAU)).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn dirichlet_limits_and_zeros() {
        assert!((dirichlet_ratio(7, 3, 0.0) - 7.0).abs() < 1e-15);
        assert!((dirichlet_ratio(7, 3, 1e-12) - 7.0).abs() < 1e-12);
        // m=4, l=2: sin(4x)/sin(x), zeros jπ/4 in (0, π)
        for j in 1..4 {
            let x = j as f64 * PI / 4.0;
            assert!(dirichlet_ratio(4, 2, x).abs() < 1e-14);
        }
        // lattice point 2π/ℓ with (m−1) odd gives −m
        assert!((dirichlet_ratio(4, 2, PI) + 4.0).abs() < 1e-12);
        assert!((dirichlet_ratio(5, 2, PI) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_matches_direct_sum() {
        // Σ_{j<m} cos((k + ℓj)x) = φ_m(x) cos((k + (m−1)ℓ/2)x)
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let ell = rng.random_range(1..7usize);
            let m = rng.random_range(1..40usize);
            let k = rng.random_range(0..ell);
            let x = rng.random_range(0.0..TAU);
            let direct: f64 = (0..m).map(|j| ((k + ell * j) as f64 * x).cos()).sum();
            let closed = dirichlet_ratio(m, ell, x)
                * ((k as f64 + (m - 1) as f64 * ell as f64 / 2.0) * x).cos();
            assert!((direct - closed).abs() < 1e-10, "ell={ell} m={m} x={x}");
        }
    }

    #[test]
    fn dirichlet_derivative_matches_finite_difference() {
        let h = 1e-6;
        for (m, ell) in [(3, 2), (10, 3), (40, 1)] {
            for x in [0.0, 1e-9, 0.31, 1.7, TAU / ell as f64 + 1e-7, 2.9] {
                let fd =
                    (dirichlet_ratio(m, ell, x + h) - dirichlet_ratio(m, ell, x - h)) / (2.0 * h);
                let d = dirichlet_ratio_derivative(m, ell, x);
                let scale = (m * m * ell) as f64;
                assert!(
                    (fd - d).abs() <= 1e-5 * scale,
                    "m={m} ell={ell} x={x}: {fd} vs {d}"
                );
            }
        }
    }

    #[test]
    fn trig_sum_examples() {
        assert!((trig_sum_cos(1, 0.7, 2.0, 0.9) - (2.0f64 * 0.9).cos()).abs() < 1e-15);
        assert!((trig_sum_sin(1, 0.7, 2.0, 0.9) - (2.0f64 * 0.9).sin()).abs() < 1e-15);
        assert!((trig_sum_cos(9, 1.5, 0.5, 0.0) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn u_ell_values() {
        for x in [0.1, 1.0, 2.0] {
            assert_eq!(u_ell(1, x), 1.0);
        }
        assert!(u_ell(2, PI / 2.0).abs() < 1e-15);
        assert!((u_ell(4, 0.0) - 1.0).abs() < 1e-15);
        assert!((u_ell(4, PI) + 1.0).abs() < 1e-12);
        assert!((u_ell(5, PI) - 1.0).abs() < 1e-12);
        let n = 300.0f64;
        let lo = n.powf(-1.0 / 3.0);
        for ell in 2..=8 {
            for i in 0..=1000 {
                let x = lo + (PI - 2.0 * lo) * i as f64 / 1000.0;
                assert!(u_ell(ell, x).abs() < 1.0);
            }
        }
    }

    #[test]
    fn reduced_frequencies() {
        let model = CoefficientModel::periodic(PolyKind::Trig, 1);
        let s = sample_coefficients(&model, 9, 1).unwrap();
        let red = reduce_periodic(&s).unwrap();
        assert_eq!(red.frequency(0), 4.5);
        let model = CoefficientModel::periodic(PolyKind::Trig, 3);
        let s = sample_coefficients(&model, 11, 1).unwrap();
        let red = reduce_periodic(&s).unwrap();
        let f: Vec<f64> = (0..3).map(|k| red.frequency(k)).collect();
        assert_eq!(f, vec![4.5, 5.5, 6.5]);
        let bad = sample_coefficients(&model, 12, 1).unwrap();
        assert!(reduce_periodic(&bad).is_err());
    }

    #[test]
    fn factorization_identity_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..200u64 {
            let ell = rng.random_range(1..=6usize);
            let m = rng.random_range(2..=50usize);
            let kind = if case % 2 == 0 {
                PolyKind::Trig
            } else {
                PolyKind::Cosine
            };
            let model = CoefficientModel::periodic(kind, ell);
            let s = sample_coefficients(&model, ell * m - 1, case).unwrap();
            let red = reduce_periodic(&s).unwrap();
            for _ in 0..50 {
                let x = rng.random_range(0.0..TAU);
                let t = evaluate(&s, x);
                assert!((t - red.evaluate_factored(x)).abs() <= 1e-9 * (1.0 + t.abs()));
            }
        }
    }

    #[test]
    fn algebraic_examples() {
        let f = factorize_algebraic(&[1.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(f.deterministic_roots.len(), 2);
        for &(re, im) in &f.deterministic_roots {
            let z = Complex64::new(re, im);
            assert!((z * z + z + 1.0).norm() < 1e-14);
        }
        let f = factorize_algebraic(&[1.0, 2.0, 1.0, 2.0], 2).unwrap();
        let z = Complex64::new(2.0, 0.0);
        let p = horner(&[1.0, 2.0, 1.0, 2.0], z);
        assert_eq!(p.re, 25.0);
        assert!((p - f.evaluate_factored(z)).norm() < 1e-13);
        assert_eq!(f.deterministic_roots.len(), f.degree() - 2 + 1);
        assert!(factorize_algebraic(&[1.0, 2.0, 1.0, 3.0], 2).is_err());
        assert!(factorize_algebraic(&[1.0, 2.0, 1.0], 2).is_err());
    }

    #[test]
    fn factorization_report_serializes_roots_as_pairs() {
        let f = factorize_algebraic(&[1.0, 1.0], 1).unwrap();
        let json = serde_json::to_value(&f).unwrap();
        let roots = json["deterministic_roots"].as_array().unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0][0].as_f64().unwrap() + 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn closed_sums_match_literal_sums(
            r in 1usize..=20,
            p in -3.0f64..3.0,
            q in -10.0f64..10.0,
            x in -7.0f64..7.0,
        ) {
            let lit_c: f64 = (0..r).map(|j| ((2.0 * p * j as f64 + q) * x).cos()).sum();
            let lit_s: f64 = (0..r).map(|j| ((2.0 * p * j as f64 + q) * x).sin()).sum();
            prop_assert!((trig_sum_cos(r, p, q, x) - lit_c).abs() < 1e-11);
            prop_assert!((trig_sum_sin(r, p, q, x) - lit_s).abs() < 1e-11);
        }

        #[test]
        fn sin_squared_identity(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let lhs = a.sin().powi(2) + b.sin().powi(2) + 2.0 * a.sin() * b.sin() * (a + b).cos();
            prop_assert!((lhs - (a + b).sin().powi(2)).abs() < 1e-12);
        }

        #[test]
        fn dirichlet_sign_changes(m in 2usize..30, ell in 1usize..6) {
            // exactly m−1 sign changes on (0, 2π/ℓ), at 2jπ/(mℓ)
            let period = TAU / ell as f64;
            let cells = 64 * m;
            let mut changes = Vec::new();
            let mut prev = dirichlet_ratio(m, ell, period * 0.5 / cells as f64);
            for i in 1..cells {
                let x = period * (i as f64 + 0.5) / cells as f64;
                let v = dirichlet_ratio(m, ell, x);
                if v.signum() != prev.signum() {
                    changes.push(x);
                }
                prev = v;
            }
            prop_assert_eq!(changes.len(), m - 1);
            for (j, x) in changes.iter().enumerate() {
                let zero = TAU * (j + 1) as f64 / (m * ell) as f64;
                prop_assert!((x - zero).abs() <= period / cells as f64);
            }
        }
    }
}
