//! Kac–Rice expected zero counts.
//!
//! For a centred Gaussian process `Σ ξ_k f_k(x)` with independent
//! `ξ_k ~ N(0, σ²)` the expected number of zeros on `(a, b)` is
//!
//! ```text
//! (1/π) ∫_a^b √(A C − B²) / A dx,   A = Σ f_k², B = Σ f_k f_k', C = Σ f_k'²
//! ```
//!
//! For periodic coefficients the basis is the `ℓ` (cosine) or `2ℓ`
//! (trig) grouped sums `Σ_{k ≡ i mod ℓ} cos kx`, `Σ_{k ≡ i mod ℓ} sin kx`.
//! When `ℓ | n+1` the polynomial factors as `φ_m · T_n*` and the count is
//! split into the `n + 1 − ℓ` deterministic zeros of `φ_m` plus a
//! Kac–Rice integral for the `ℓ`-term factor, whose `A` does not vanish
//! on the zeros of `φ_m`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::coeff_models::{decompose_degree, CoefficientModel, Dependence, PolyKind};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::quadrature::{composite_adaptive, Adaptive, GaussLegendre, Integral};
use crate::trigpoly::{
    dirichlet_ratio, dirichlet_ratio_derivative, for_each_harmonic, reduced_frequency_numerators,
    u_ell,
};

/// Bases up to this size get `AC − B²` from Lagrange's identity.
const LAGRANGE_MAX_TERMS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcTriple {
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `A C − B²`. Computed as `Σ_{i<j} (f_i f_j' − f_j f_i')²` for small
    /// bases, so it is never negative there; otherwise `max(AC − B², 0)`.
    pub gram: f64,
}

impl AbcTriple {
    /// `√(AC − B²) / (π A)`.
    pub fn density(&self) -> f64 {
        self.gram.sqrt() / (PI * self.a)
    }

    /// `AC − B²` formed directly, before any clamping.
    pub fn raw_discriminant(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }
}

/// The basis functions of a model at a fixed degree.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    IidTrig {
        n: usize,
    },
    IidCosine {
        n: usize,
    },
    PeriodicTrig {
        n: usize,
        ell: usize,
    },
    PeriodicCosine {
        n: usize,
        ell: usize,
    },
    /// `cos(w_k x / 2)`, `sin(w_k x / 2)` for the reduced factor.
    ReducedTrig {
        numerators: Vec<u64>,
    },
    ReducedCosine {
        numerators: Vec<u64>,
    },
}

impl Basis {
    /// The unreduced basis of `model` at degree `n`.
    pub fn for_model(model: &CoefficientModel, n: usize) -> Result<Self> {
        model.validate()?;
        Ok(match (model.kind, model.dependence) {
            (PolyKind::Trig, Dependence::Iid) => Basis::IidTrig { n },
            (PolyKind::Cosine, Dependence::Iid) => Basis::IidCosine { n },
            (PolyKind::Trig, Dependence::Periodic { ell }) => {
                decompose_degree(n, ell)?;
                Basis::PeriodicTrig { n, ell }
            }
            (PolyKind::Cosine, Dependence::Periodic { ell }) => {
                decompose_degree(n, ell)?;
                Basis::PeriodicCosine { n, ell }
            }
        })
    }

    /// The basis of `T_n*` / `V_n*` for a periodic model with `r = 0`.
    pub fn reduced(kind: PolyKind, ell: usize, m: usize) -> Self {
        let numerators = reduced_frequency_numerators(ell, m);
        match kind {
            PolyKind::Trig => Basis::ReducedTrig { numerators },
            PolyKind::Cosine => Basis::ReducedCosine { numerators },
        }
    }

    /// `A, B, C` at `x` for unit-variance coefficients.
    pub fn abc(&self, x: f64) -> AbcTriple {
        match self {
            Basis::IidTrig { n } => {
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for_each_harmonic(*n, x, |j, cj, sj| {
                    let jf = j as f64;
                    a += cj * cj + sj * sj;
                    b += cj * (-jf * sj) + sj * (jf * cj);
                    c += jf * jf * (sj * sj + cj * cj);
                });
                clamped(x, a, b, c)
            }
            Basis::IidCosine { n } => {
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for_each_harmonic(*n, x, |j, cj, sj| {
                    let jf = j as f64;
                    a += cj * cj;
                    b -= jf * cj * sj;
                    c += jf * jf * sj * sj;
                });
                clamped(x, a, b, c)
            }
            Basis::PeriodicTrig { n, ell } => {
                let (f, df) = grouped(*n, *ell, x, true);
                from_values(x, &f, &df)
            }
            Basis::PeriodicCosine { n, ell } => {
                let (f, df) = grouped(*n, *ell, x, false);
                from_values(x, &f, &df)
            }
            Basis::ReducedTrig { numerators } => {
                let half = x / 2.0;
                let mut f = Vec::with_capacity(2 * numerators.len());
                let mut df = Vec::with_capacity(2 * numerators.len());
                for &w in numerators {
                    let (s, c) = (w as f64 * half).sin_cos();
                    let freq = w as f64 / 2.0;
                    f.extend([c, s]);
                    df.extend([-freq * s, freq * c]);
                }
                from_values(x, &f, &df)
            }
            Basis::ReducedCosine { numerators } => {
                let half = x / 2.0;
                let mut f = Vec::with_capacity(numerators.len());
                let mut df = Vec::with_capacity(numerators.len());
                for &w in numerators {
                    let (s, c) = (w as f64 * half).sin_cos();
                    f.push(c);
                    df.push(-(w as f64 / 2.0) * s);
                }
                from_values(x, &f, &df)
            }
        }
    }
}

/// Grouped sums `Σ_{k ≡ i} cos kx` (and `sin kx` when `trig`) with their
/// derivatives, laid out as `[cos groups…, sin groups…]`.
fn grouped(n: usize, ell: usize, x: f64, trig: bool) -> (Vec<f64>, Vec<f64>) {
    let width = if trig { 2 * ell } else { ell };
    let mut f = vec![0.0; width];
    let mut df = vec![0.0; width];
    let mut i = 0;
    for_each_harmonic(n, x, |j, c, s| {
        let jf = j as f64;
        f[i] += c;
        df[i] -= jf * s;
        if trig {
            f[ell + i] += s;
            df[ell + i] += jf * c;
        }
        i += 1;
        if i == ell {
            i = 0;
        }
    });
    (f, df)
}

fn clamped(x: f64, a: f64, b: f64, c: f64) -> AbcTriple {
    AbcTriple {
        x,
        a,
        b,
        c,
        gram: (a * c - b * b).max(0.0),
    }
}

fn from_values(x: f64, f: &[f64], df: &[f64]) -> AbcTriple {
    let a: f64 = f.iter().map(|v| v * v).sum();
    let b: f64 = f.iter().zip(df).map(|(u, v)| u * v).sum();
    let c: f64 = df.iter().map(|v| v * v).sum();
    if f.len() > LAGRANGE_MAX_TERMS {
        return clamped(x, a, b, c);
    }
    let mut gram = 0.0;
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let w = f[i] * df[j] - f[j] * df[i];
            gram += w * w;
        }
    }
    AbcTriple { x, a, b, c, gram }
}

/// `A, B, C` for `model` at degree `n` and point `x`, scaled by `σ²`.
pub fn abc_direct(model: &CoefficientModel, n: usize, x: f64) -> Result<AbcTriple> {
    let t = Basis::for_model(model, n)?.abc(x);
    Ok(scale(t, model.sigma))
}

fn scale(t: AbcTriple, sigma: f64) -> AbcTriple {
    let s2 = sigma * sigma;
    AbcTriple {
        x: t.x,
        a: s2 * t.a,
        b: s2 * t.b,
        c: s2 * t.c,
        gram: s2 * s2 * t.gram,
    }
}

/// Closed forms of `A`, `B²`, `C` for the periodic trig model with
/// `r ≠ 0`, valid away from the lattice `2kπ/ℓ`.
///
/// `A` is exact. `B²` and `C` keep the leading terms only; the dropped
/// parts are of lower order in `n` on the region bounded away from the
/// lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeadingAbc {
    pub a: f64,
    pub b_squared: f64,
    pub c: f64,
}

pub fn leading_abc(ell: usize, r: usize, m: usize, x: f64) -> LeadingAbc {
    let (lf, rf, mf) = (ell as f64, r as f64, m as f64);
    let phi = dirichlet_ratio(m, ell, x);
    let dphi = dirichlet_ratio_derivative(m, ell, x);
    let half = lf * x / 2.0;
    let s_half = half.sin();
    let cos_m1 = ((mf + 1.0) * half).cos();
    let sin_m1 = ((mf + 1.0) * half).sin();
    let cos_2m1 = ((2.0 * mf + 1.0) * half).cos();

    let a = lf * phi * phi + rf + 2.0 * rf * phi * cos_m1;
    let b_squared = lf * lf * phi * phi * dphi * dphi
        + rf * rf * mf * mf * lf * lf * cos_2m1 * cos_2m1 / (4.0 * s_half * s_half)
        + rf * mf * lf * lf * phi * dphi * cos_2m1 / s_half;
    let c = mf * mf * lf * lf * a / 4.0 + rf * mf * mf * lf * lf / 4.0
        - rf * mf * lf * dphi * sin_m1
        + lf * dphi * dphi;
    LeadingAbc { a, b_squared, c }
}

/// How windows around the singular points are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum ExclusionRule {
    /// Integrate over the whole period.
    #[default]
    None,
    /// Exclude windows of half-width `(2/ℓ)·m^{−a}` around `2kπ/ℓ` (trig)
    /// or `n^{−a}` around `0, π, 2π` (cosine).
    Exponent(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub panels_per_degree: usize,
    pub nodes_per_panel: usize,
    pub exclusion: ExclusionRule,
    pub rel_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            panels_per_degree: 4,
            nodes_per_panel: 16,
            exclusion: ExclusionRule::None,
            rel_tol: 1e-12,
        }
    }
}

impl QuadConfig {
    fn validate(&self) -> Result<()> {
        if self.panels_per_degree == 0 || self.nodes_per_panel == 0 {
            return Err(Error::InvalidArgument(
                "panels_per_degree and nodes_per_panel must be positive".into(),
            ));
        }
        if let ExclusionRule::Exponent(a) = self.exclusion {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "exclusion exponent must be positive, got {a}"
                )));
            }
        }
        Ok(())
    }

    /// Panels for an interval of length `len` at degree `n`: panel width
    /// at most `π / (panels_per_degree · n)`.
    fn panels_for(&self, len: f64, n: usize) -> usize {
        let width = PI / (self.panels_per_degree * n.max(1)) as f64;
        ((len / width).ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacRiceResult {
    pub expected_zeros: f64,
    /// Quadrature error plus the bound on the excluded windows.
    pub abs_error_estimate: f64,
    pub quadrature_error: f64,
    pub excluded_windows: Vec<(f64, f64)>,
    /// `(total window width) · 2n/π`.
    pub excluded_bound: f64,
    pub panels_used: usize,
    /// Zeros of `φ_m` added without integration (`r = 0` periodic).
    pub deterministic_zeros: usize,
}

/// `n + 1 − ℓ + √(n² + (ℓ² − 1)/3)` for `ℓ | n + 1` and `m ≥ 2`.
pub fn expected_zeros_exact_r0(n: usize, ell: usize) -> Result<f64> {
    let d = decompose_degree(n, ell)?;
    if d.r != 0 {
        return Err(Error::InvalidArgument(format!(
            "n + 1 = {} is not divisible by ell = {ell} (r = {})",
            n + 1,
            d.r
        )));
    }
    if d.m < 2 {
        return Err(Error::InvalidDegree(format!(
            "need m >= 2, got m = {} for n = {n}, ell = {ell}",
            d.m
        )));
    }
    let (nf, lf) = (n as f64, ell as f64);
    Ok(nf + 1.0 - lf + (nf * nf + (lf * lf - 1.0) / 3.0).sqrt())
}

/// `E[N(0, 2π)]` by Kac–Rice quadrature.
pub fn expected_zeros_quadrature(
    model: &CoefficientModel,
    n: usize,
    quad: &QuadConfig,
    exec: Execution,
) -> Result<KacRiceResult> {
    quad.validate()?;
    model.validate()?;
    if n < 1 {
        return Err(Error::InvalidDegree("degree n must be at least 1".into()));
    }
    let (basis, deterministic, windows) = match model.dependence {
        Dependence::Iid => (Basis::for_model(model, n)?, 0, Vec::new()),
        Dependence::Periodic { ell } => {
            let d = decompose_degree(n, ell)?;
            let windows = exclusion_windows(model.kind, ell, n, d.m, quad.exclusion)?;
            if d.r == 0 {
                if ell == 1 && model.kind == PolyKind::Cosine {
                    // V_n = a_0 φ_{n+1}(x) cos(nx/2): every zero is deterministic
                    return Ok(KacRiceResult {
                        expected_zeros: 2.0 * n as f64,
                        abs_error_estimate: 0.0,
                        quadrature_error: 0.0,
                        excluded_windows: Vec::new(),
                        excluded_bound: 0.0,
                        panels_used: 0,
                        deterministic_zeros: 2 * n,
                    });
                }
                (
                    Basis::reduced(model.kind, ell, d.m),
                    ell * (d.m - 1),
                    windows,
                )
            } else {
                (Basis::for_model(model, n)?, 0, windows)
            }
        }
    };
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let pieces = complement(0.0, TAU, &windows);
    let mut value = deterministic as f64;
    let mut qerr = 0.0;
    let mut panels = 0;
    for (lo, hi) in pieces {
        let part = integrate_basis(&basis, model.sigma, lo, hi, n, quad, &rule, exec)?;
        value += part.value;
        qerr += part.abs_error;
        panels += part.panels;
    }
    let excluded: f64 = windows.iter().map(|(lo, hi)| hi - lo).sum();
    let excluded_bound = excluded * 2.0 * n as f64 / PI;
    if !(value.is_finite() && value <= 2.0 * n as f64 + 0.5) {
        return Err(Error::Numerical(format!(
            "Kac–Rice value {value} exceeds the ceiling 2n + 0.5 = {}",
            2.0 * n as f64 + 0.5
        )));
    }
    Ok(KacRiceResult {
        expected_zeros: value,
        abs_error_estimate: qerr + excluded_bound,
        quadrature_error: qerr,
        excluded_windows: windows,
        excluded_bound,
        panels_used: panels,
        deterministic_zeros: deterministic,
    })
}

/// Expected zeros of the unreduced model on `(lo, hi)`.
///
/// Requires `A > 0` on the interval, so for periodic `r = 0` models the
/// interval must avoid the zeros of `φ_m`.
pub fn expected_zeros_on(
    model: &CoefficientModel,
    n: usize,
    lo: f64,
    hi: f64,
    quad: &QuadConfig,
    exec: Execution,
) -> Result<Integral> {
    quad.validate()?;
    let basis = Basis::for_model(model, n)?;
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    integrate_basis(&basis, model.sigma, lo, hi, n, quad, &rule, exec)
}

#[allow(clippy::too_many_arguments)]
fn integrate_basis(
    basis: &Basis,
    sigma: f64,
    lo: f64,
    hi: f64,
    n: usize,
    quad: &QuadConfig,
    rule: &GaussLegendre,
    exec: Execution,
) -> Result<Integral> {
    use std::sync::Mutex;
    let bad: Mutex<Option<f64>> = Mutex::new(None);
    let density = |x: f64| {
        let t = scale(basis.abc(x), sigma);
        if t.a > 0.0 {
            t.density()
        } else {
            let mut slot = bad.lock().unwrap();
            if slot.is_none() {
                *slot = Some(x);
            }
            f64::NAN
        }
    };
    let panels = quad.panels_for(hi - lo, n);
    let adaptive = Adaptive {
        rel_tol: quad.rel_tol,
        ..Adaptive::default()
    };
    match composite_adaptive(&density, lo, hi, panels, rule, adaptive, exec) {
        Ok(v) => Ok(v),
        Err(e) => match *bad.lock().unwrap() {
            Some(x) => Err(Error::Numerical(format!(
                "A(x) <= 0 at x = {x:e} inside the domain"
            ))),
            None => Err(e),
        },
    }
}

/// Windows for a periodic model under `rule`, merged and clipped to
/// `[0, 2π]`.
pub fn exclusion_windows(
    kind: PolyKind,
    ell: usize,
    n: usize,
    m: usize,
    rule: ExclusionRule,
) -> Result<Vec<(f64, f64)>> {
    let ExclusionRule::Exponent(a) = rule else {
        return Ok(Vec::new());
    };
    let (centers, half): (Vec<f64>, f64) = match kind {
        PolyKind::Trig => (
            (0..=ell).map(|k| TAU * k as f64 / ell as f64).collect(),
            (2.0 / ell as f64) * (m as f64).powf(-a),
        ),
        PolyKind::Cosine => (vec![0.0, PI, TAU], (n as f64).powf(-a)),
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    for c in centers {
        let w = ((c - half).max(0.0), (c + half).min(TAU));
        match out.last_mut() {
            Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
            _ => out.push(w),
        }
    }
    Ok(out)
}

/// `[lo, hi]` minus sorted disjoint `windows`.
fn complement(lo: f64, hi: f64, windows: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cursor = lo;
    for &(a, b) in windows {
        if a > cursor {
            out.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if cursor < hi {
        out.push((cursor, hi));
    }
    out
}

/// `g_m(x) = √(1 + r(ℓ−r) sin²x / [(ℓ−r) sin²(mx) + r sin²((m+1)x)]²)`.
pub fn limit_integrand_g(ell: usize, r: usize, m: usize, x: f64) -> f64 {
    let (lf, rf, mf) = (ell as f64, r as f64, m as f64);
    let d = (lf - rf) * (mf * x).sin().powi(2) + rf * ((mf + 1.0) * x).sin().powi(2);
    let d = d.max(1e-300);
    (1.0 + rf * (lf - rf) * x.sin().powi(2) / (d * d)).sqrt()
}

/// `(1/π) ∫_{π/m}^{π−π/m} g_m`, which tends to `C_{ℓ,r}` as `m → ∞`.
pub fn limit_integral_g(
    ell: usize,
    r: usize,
    m: usize,
    quad: &QuadConfig,
    exec: Execution,
) -> Result<Integral> {
    check_pair(ell, r)?;
    if m < 3 {
        return Err(Error::InvalidDegree(format!("need m >= 3, got {m}")));
    }
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let lo = PI / m as f64;
    let hi = PI - lo;
    let f = |x: f64| limit_integrand_g(ell, r, m, x) / PI;
    let panels = quad.panels_for(hi - lo, m);
    let adaptive = Adaptive {
        rel_tol: quad.rel_tol,
        ..Adaptive::default()
    };
    composite_adaptive(&f, lo, hi, panels, &rule, adaptive, exec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// `f_n^±(x) = √(1 − u_ℓ(x)²) / (1 ± u_ℓ(x) cos(nx))`.
pub fn limit_integrand_fpm(ell: usize, n: usize, x: f64, sign: Sign) -> f64 {
    let u = u_ell(ell, x);
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    (1.0 - u * u).max(0.0).sqrt() / (1.0 + s * u * (n as f64 * x).cos())
}

/// `I⁺ = (1/π) ∫_0^{π/2} f_n^+` and `I⁻ = (1/π) ∫_{π/2n}^{π/2} f_n^-`;
/// both tend to `1/2`.
pub fn limit_integral_fpm(
    ell: usize,
    n: usize,
    sign: Sign,
    quad: &QuadConfig,
    exec: Execution,
) -> Result<Integral> {
    if ell < 2 || n < 1 {
        return Err(Error::InvalidArgument(format!(
            "need ell >= 2 and n >= 1, got ell = {ell}, n = {n}"
        )));
    }
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let lo = match sign {
        Sign::Plus => 0.0,
        Sign::Minus => PI / (2.0 * n as f64),
    };
    let hi = PI / 2.0;
    let f = |x: f64| limit_integrand_fpm(ell, n, x, sign) / PI;
    let panels = quad.panels_for(hi - lo, n);
    let adaptive = Adaptive {
        rel_tol: quad.rel_tol,
        ..Adaptive::default()
    };
    composite_adaptive(&f, lo, hi, panels, &rule, adaptive, exec)
}

pub(crate) fn check_pair(ell: usize, r: usize) -> Result<()> {
    if ell < 2 || r == 0 || r >= ell {
        return Err(Error::InvalidArgument(format!(
            "need ell >= 2 and 1 <= r <= ell - 1, got ell = {ell}, r = {r}"
        )));
    }
    Ok(())
}
