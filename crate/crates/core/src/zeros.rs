//! Counting real zeros of a sampled polynomial on the open interval
//! `(0, 2π)`.
//!
//! `f` and `f'` are tabulated on a uniform grid by FFT. Each grid cell is
//! then classified:
//!
//! * a cell whose derivative is bounded away from zero holds exactly as
//!   many roots as it has strict sign changes (0 or 1);
//! * a same-sign cell whose Hermite interpolant stays away from zero by
//!   more than the interpolation error bound is root-free;
//! * anything else is bisected with direct evaluation until one of the
//!   two certificates applies.
//!
//! The bounds use `M_k = Σ j^k (|a_j| + |b_j|) ≥ max |f^{(k)}|`. Cells
//! whose values sink to the rounding floor are counted by their sign
//! pattern only, so tangential zeros are ignored. The whole scan is
//! repeated on doubled grids until the count repeats across two
//! consecutive doublings.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::coeff_models::PolySample;
use crate::error::{Error, Result};
use crate::trigpoly::{eval_coefficients, evaluate};

pub const DEFAULT_GRID_PER_DEGREE: usize = 32;
pub const DEFAULT_MAX_DOUBLINGS: u32 = 4;
pub const MIN_GRID: usize = 256;
const MAX_DEPTH: u32 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountOptions {
    pub grid_per_degree: usize,
    /// Bracket width for root refinement.
    pub tol: f64,
    pub refine_roots: bool,
    pub max_doublings: u32,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            grid_per_degree: DEFAULT_GRID_PER_DEGREE,
            tol: 1e-12,
            refine_roots: false,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountReport {
    pub count: usize,
    /// Sorted refined roots, present when refinement was requested.
    pub roots: Option<Vec<f64>>,
    pub grid_size: usize,
    pub doublings_used: u32,
    pub stable: bool,
    /// Count obtained on each grid, coarsest first.
    pub grid_counts: Vec<usize>,
    /// Cells left uncertified at the bisection depth cap (final grid).
    pub unresolved_cells: usize,
}

/// Grid size for a degree: the next power of two at or above
/// `max(256, grid_per_degree · n)`.
pub fn grid_size(n: usize, grid_per_degree: usize) -> usize {
    (grid_per_degree * n).max(MIN_GRID).next_power_of_two()
}

pub fn count_zeros(sample: &PolySample, options: &CountOptions) -> Result<ZeroCountReport> {
    if options.grid_per_degree < 8 {
        return Err(Error::InvalidArgument(format!(
            "grid_per_degree must be at least 8, got {}",
            options.grid_per_degree
        )));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "refinement tolerance must be positive, got {}",
            options.tol
        )));
    }
    let n = sample.n;
    let ctx = Bounds::new(&sample.a, &sample.b);
    let base = grid_size(n, options.grid_per_degree);

    let mut grid_counts = Vec::new();
    let mut last = scan(sample, &ctx, base)?;
    grid_counts.push(last.brackets.len());
    let mut doublings = 0;
    let mut stable = false;
    while doublings < options.max_doublings {
        doublings += 1;
        last = scan(sample, &ctx, base << doublings)?;
        grid_counts.push(last.brackets.len());
        let k = grid_counts.len();
        if k >= 3
            && grid_counts[k - 1] == grid_counts[k - 2]
            && grid_counts[k - 2] == grid_counts[k - 3]
        {
            stable = last.unresolved == 0;
            break;
        }
    }
    let count = last.brackets.len();
    if count > 2 * n {
        return Err(Error::Numerical(format!(
            "counted {count} zeros for degree {n}, above the bound 2n = {}",
            2 * n
        )));
    }
    let roots = if options.refine_roots {
        let mut roots = last
            .brackets
            .iter()
            .map(|&(lo, hi)| {
                if lo == hi {
                    Ok(lo)
                } else {
                    refine_root(sample, lo, hi, options.tol)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        roots.sort_by(f64::total_cmp);
        Some(roots)
    } else {
        None
    };
    Ok(ZeroCountReport {
        count,
        roots,
        grid_size: base << doublings,
        doublings_used: doublings,
        stable,
        grid_counts,
        unresolved_cells: last.unresolved,
    })
}

/// Bisection on a bracketing interval, down to width `tol`.
///
/// Runs at most `⌈log₂((hi − lo)/tol)⌉` halvings.
pub fn refine_root(sample: &PolySample, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    refine_with(|x| evaluate(sample, x), lo, hi, tol)
}

/// [`refine_root`] for an arbitrary function.
pub fn refine_with<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo >= hi || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bad bracket [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "[{lo}, {hi}] does not bracket a root (f = {flo:e}, {fhi:e})"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The `ℓ(m−1)` zeros of `φ_m` in `(0, 2π)`: `2jπ/(mℓ)` for
/// `j = 1..mℓ−1` with `j` not a multiple of `m`.
pub fn deterministic_zero_set(m: usize, ell: usize) -> Vec<f64> {
    if m < 2 || ell == 0 {
        return Vec::new();
    }
    let total = m * ell;
    (1..total)
        .filter(|j| j % m != 0)
        .map(|j| TAU * j as f64 / total as f64)
        .collect()
}

/// Writes `index,x,residual` rows, one per root.
pub fn write_roots_csv<W: Write>(writer: W, sample: &PolySample, roots: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "x", "residual"])?;
    for (i, &x) in roots.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{x:.17e}"),
            format!("{:.6e}", evaluate(sample, x)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Derivative bounds and rounding floors for one sample.
struct Bounds {
    m3: f64,
    m4: f64,
    noise_f: f64,
    noise_df: f64,
}

impl Bounds {
    fn new(a: &[f64], b: &[f64]) -> Self {
        let n = a.len() - 1;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        let mut scale = 0.0;
        for j in 0..=n {
            let c = a[j].abs() + b[j].abs();
            let jf = j as f64;
            scale += c;
            m3 += jf * jf * jf * c;
            m4 += jf * jf * jf * jf * c;
        }
        let log_n = ((n + 2) as f64).log2();
        let noise_f = 64.0 * f64::EPSILON * scale * (log_n + 8.0);
        Self {
            m3,
            m4,
            noise_f,
            noise_df: noise_f * (n.max(1) as f64),
        }
    }
}

struct Scan {
    /// One `(lo, hi)` bracket per root; `lo == hi` for an exact zero.
    brackets: Vec<(f64, f64)>,
    unresolved: usize,
}

#[derive(Clone, Copy)]
struct Node {
    x: f64,
    f: f64,
    df: f64,
}

fn scan(sample: &PolySample, ctx: &Bounds, size: usize) -> Result<Scan> {
    let (f, df) = grid_values(&sample.a, &sample.b, size);
    let (f0, d0) = eval_coefficients(&sample.a, &sample.b, 0.0);
    let endpoint_left = Node {
        x: 0.0,
        f: f0,
        df: d0,
    };
    let endpoint_right = Node {
        x: TAU,
        f: f0,
        df: d0,
    };
    let mut out = Scan {
        brackets: Vec::new(),
        unresolved: 0,
    };
    let node = |i: usize| Node {
        x: TAU * (i as f64 + 0.5) / size as f64,
        f: f[i],
        df: df[i],
    };
    let mut left = endpoint_left;
    for i in 0..=size {
        let right = if i < size { node(i) } else { endpoint_right };
        if !(right.f.is_finite() && right.df.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite polynomial value at x = {}",
                right.x
            )));
        }
        // x = 2π is outside the open interval
        let count_right = i < size;
        resolve(sample, ctx, left, right, count_right, 0, &mut out)?;
        left = right;
    }
    Ok(out)
}

fn resolve(
    sample: &PolySample,
    ctx: &Bounds,
    l: Node,
    r: Node,
    count_right: bool,
    depth: u32,
    out: &mut Scan,
) -> Result<()> {
    let h = r.x - l.x;
    let strict_change = l.f * r.f < 0.0;
    let right_zero = r.f == 0.0 && count_right;
    let push_sign_pattern = |out: &mut Scan| {
        if strict_change {
            out.brackets.push((l.x, r.x));
        } else if right_zero {
            out.brackets.push((r.x, r.x));
        }
    };

    // Monotone cell: sign pattern is exact.
    if l.df * r.df > 0.0 {
        let lower = l.df.abs().min(r.df.abs()) - h * h / 8.0 * ctx.m3;
        if lower > ctx.noise_df {
            push_sign_pattern(out);
            return Ok(());
        }
    }
    // Same-sign cell kept away from zero by the Hermite interpolant.
    if l.f * r.f > 0.0 {
        let s = l.f.signum();
        let lower =
            hermite_min(s * l.f, s * r.f, s * l.df, s * r.df, h) - h.powi(4) / 384.0 * ctx.m4;
        if lower > ctx.noise_f {
            return Ok(());
        }
    }
    // Values at the rounding floor: sign pattern only (tangential zeros
    // are not counted).
    if l.f.abs().max(r.f.abs()) <= 4.0 * ctx.noise_f
        && h * l.df.abs().max(r.df.abs()) <= 4.0 * ctx.noise_f
    {
        if strict_change {
            out.brackets.push((l.x, r.x));
        }
        return Ok(());
    }
    let mid_x = 0.5 * (l.x + r.x);
    if depth >= MAX_DEPTH || mid_x <= l.x || mid_x >= r.x {
        push_sign_pattern(out);
        out.unresolved += 1;
        return Ok(());
    }
    let (fm, dm) = eval_coefficients(&sample.a, &sample.b, mid_x);
    if !(fm.is_finite() && dm.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite polynomial value at x = {mid_x}"
        )));
    }
    let m = Node {
        x: mid_x,
        f: fm,
        df: dm,
    };
    resolve(sample, ctx, l, m, true, depth + 1, out)?;
    resolve(sample, ctx, m, r, count_right, depth + 1, out)
}

/// Minimum over `[0, h]` of the cubic Hermite interpolant of
/// `(f0, d0)` at 0 and `(f1, d1)` at `h`.
fn hermite_min(f0: f64, f1: f64, d0: f64, d1: f64, h: f64) -> f64 {
    // H(u) = c0 + c1 u + c2 u² + c3 u³ on u ∈ [0, 1]
    let c0 = f0;
    let c1 = h * d0;
    let c2 = 3.0 * (f1 - f0) - h * (2.0 * d0 + d1);
    let c3 = 2.0 * (f0 - f1) + h * (d0 + d1);
    let eval = |u: f64| c0 + u * (c1 + u * (c2 + u * c3));
    let mut best = f0.min(f1);
    // H'(u) = c1 + 2 c2 u + 3 c3 u²
    let (qa, qb, qc) = (3.0 * c3, 2.0 * c2, c1);
    let mut consider = |u: f64| {
        if u > 0.0 && u < 1.0 {
            best = best.min(eval(u));
        }
    };
    if qa.abs() < 1e-300 {
        if qb != 0.0 {
            consider(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                consider(q / qa);
                consider(qc / q);
            } else {
                consider(0.0);
            }
        }
    }
    best
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn inverse_plan(size: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(size))
}

/// `f` and `f'` at the half-shifted nodes `2π(i + ½)/size`.
///
/// With `c_j = a_j − i b_j`, `f(x) = Re Σ c_j e^{ijx}` and
/// `f'(x) = Re Σ i j c_j e^{ijx}`; the half shift becomes the twiddle
/// `e^{iπj/size}` on the coefficients.
pub fn grid_values(a: &[f64], b: &[f64], size: usize) -> (Vec<f64>, Vec<f64>) {
    let n = a.len() - 1;
    assert!(size > n, "grid of {size} nodes cannot resolve degree {n}");
    let mut fbuf = vec![Complex64::new(0.0, 0.0); size];
    let mut dbuf = vec![Complex64::new(0.0, 0.0); size];
    for j in 0..=n {
        let (s, c) = (PI * j as f64 / size as f64).sin_cos();
        let shift = Complex64::new(c, s);
        let cj = Complex64::new(a[j], -b[j]) * shift;
        fbuf[j] = cj;
        dbuf[j] = Complex64::new(0.0, j as f64) * cj;
    }
    let plan = inverse_plan(size);
    plan.process(&mut fbuf);
    plan.process(&mut dbuf);
    (
        fbuf.iter().map(|z| z.re).collect(),
        dbuf.iter().map(|z| z.re).collect(),
    )
}
