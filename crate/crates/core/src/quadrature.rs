//! Gauss–Legendre rules, an adaptive composite 1D integrator and a
//! tensor-product 2D integrator on geometrically graded meshes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::par::{try_map_indexed, Execution};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Maps the rule onto `[a, b]`, returning `(x, w)` pairs.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    /// `∫_a^b f`. Fails on the first non-finite integrand value.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (x, w) in self.mapped(a, b) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite integrand {v} at x = {x:e}"
                )));
            }
            sum += w * v;
        }
        Ok(sum)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    /// Leaf panels after adaptive refinement.
    pub panels: usize,
}

/// Settings for [`composite_adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    /// Local tolerance per initial panel, relative to the panel's
    /// absolute integral.
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_depth: 12,
        }
    }
}

/// Composite Gauss–Legendre over `panels` equal panels of `[a, b]`.
///
/// Each panel is compared with the sum over its two halves; panels
/// where they disagree beyond tolerance are bisected recursively. The
/// value is the sum of the refined (half-panel) estimates and the error
/// is the sum of the local disagreements plus a rounding floor.
pub fn composite_adaptive<F>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    rule: &GaussLegendre,
    adaptive: Adaptive,
    exec: Execution,
) -> Result<Integral>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(a.is_finite() && b.is_finite()) || b < a || panels == 0 {
        return Err(Error::InvalidArgument(format!(
            "bad integration range [{a}, {b}] with {panels} panels"
        )));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            panels: 0,
        });
    }
    let width = (b - a) / panels as f64;
    let parts = try_map_indexed(exec, panels, |i| {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        let whole = rule.integrate(f, lo, hi)?;
        refine_panel(f, lo, hi, whole, rule, adaptive, 0)
    })?;
    let mut value = CompensatedSum::new();
    let mut err = 0.0;
    let mut abs = 0.0;
    let mut leaves = 0;
    for (v, e, l, m) in parts {
        value.add(v);
        err += e;
        abs += m;
        leaves += l;
    }
    Ok(Integral {
        value: value.value(),
        abs_error: err + 64.0 * f64::EPSILON * abs,
        panels: leaves,
    })
}

/// Returns `(value, error, leaves, |value|)`.
fn refine_panel<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    whole: f64,
    rule: &GaussLegendre,
    adaptive: Adaptive,
    depth: u32,
) -> Result<(f64, f64, usize, f64)> {
    let mid = 0.5 * (lo + hi);
    let left = rule.integrate(f, lo, mid)?;
    let right = rule.integrate(f, mid, hi)?;
    let halves = left + right;
    let diff = (halves - whole).abs();
    let scale = left.abs() + right.abs();
    if diff <= adaptive.rel_tol * scale.max(f64::MIN_POSITIVE) || depth >= adaptive.max_depth {
        return Ok((halves, diff, 1, scale));
    }
    let (lv, le, ll, lm) = refine_panel(f, lo, mid, left, rule, adaptive, depth + 1)?;
    let (rv, re, rl, rm) = refine_panel(f, mid, hi, right, rule, adaptive, depth + 1)?;
    Ok((lv + rv, le + re, ll + rl, lm + rm))
}

/// Breakpoints of `[lo, hi]` split into `panels` equal panels, with the
/// first and last panels further divided geometrically (ratio `ratio`,
/// `levels` times) toward the endpoints.
pub fn graded_mesh(lo: f64, hi: f64, panels: usize, levels: usize, ratio: f64) -> Vec<f64> {
    graded_mesh_sides(lo, hi, panels, (levels, levels), ratio)
}

/// Like [`graded_mesh`] with independent level counts at each end.
pub fn graded_mesh_sides(
    lo: f64,
    hi: f64,
    panels: usize,
    levels: (usize, usize),
    ratio: f64,
) -> Vec<f64> {
    assert!(panels >= 2 && hi > lo);
    let h = (hi - lo) / panels as f64;
    let mut pts = vec![lo];
    for k in (1..=levels.0).rev() {
        pts.push(lo + h * ratio.powi(k as i32));
    }
    for i in 1..panels {
        pts.push(lo + h * i as f64);
    }
    for k in 1..=levels.1 {
        pts.push(hi - h * ratio.powi(k as i32));
    }
    pts.push(hi);
    pts
}

/// Tensor-product Gauss–Legendre over the cells of `xs × ys`.
///
/// Returns `(Σ w·f, Σ w)`. Dividing the two gives the mean of `f` over
/// the rectangle with the same rounding in numerator and denominator, so
/// a constant integrand yields its value exactly.
pub fn tensor_2d<F>(
    f: &F,
    xs: &[f64],
    ys: &[f64],
    rule: &GaussLegendre,
    exec: Execution,
) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let y_nodes: Vec<(f64, f64)> = ys
        .windows(2)
        .flat_map(|c| rule.mapped(c[0], c[1]).collect::<Vec<_>>())
        .collect();
    let rows = try_map_indexed(exec, xs.len() - 1, |i| {
        let mut wf = CompensatedSum::new();
        let mut ww = CompensatedSum::new();
        for (x, wx) in rule.mapped(xs[i], xs[i + 1]) {
            for &(y, wy) in &y_nodes {
                let v = f(x, y);
                if !v.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite integrand {v} at ({x:e}, {y:e})"
                    )));
                }
                let w = wx * wy;
                wf.add(w * v);
                ww.add(w);
            }
        }
        Ok((wf.value(), ww.value()))
    })?;
    let mut wf = CompensatedSum::new();
    let mut ww = CompensatedSum::new();
    for (a, b) in rows {
        wf.add(a);
        ww.add(b);
    }
    Ok((wf.value(), ww.value()))
}
