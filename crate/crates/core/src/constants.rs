//! Limiting constants by double quadrature, and the theoretical-mean
//! dispatcher.
//!
//! ```text
//! C_{ℓ,r} = (1/π²) ∬_{(0,π)²} √(1 + r(ℓ−r) sin²s / D²)
//! J_{ℓ,r} = (1/π²) ∬_{(0,π)²} √(r(ℓ−r)) sin s / D                   (= 1)
//! D(s,t)  = (ℓ−r) sin²t + r sin²(s+t)
//! I_α     = ∬_{(0,π)²} sin s / (sin²α sin²t + cos²α sin²(s+t))     (= π²/(sin α cos α))
//! K_ℓ     = (1/π²) ∫_0^π ∫_0^{π/2} √(1 + 3(1−u_ℓ(s)²)/(1 + u_ℓ(s) cos t)²) ds dt
//! ```
//!
//! `D` vanishes only at the four corners, where the integrands blow up
//! like `1/ρ`; the meshes are graded geometrically toward every edge. The
//! quadratic form `a² sin²t + b² sin²(s+t)` puts a ridge of width about
//! `min(a,b)/max(a,b)` along `sin t = 0` when `a > b` and along the
//! anti-diagonal `s + t = π` otherwise. In the second case the integral
//! is taken in the variables `(s, u = s + t mod π)`, which maps the
//! anti-diagonal onto the edges `u ∈ {0, π}`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coeff_models::{decompose_degree, CoefficientModel, Dependence, PolyKind};
use crate::error::{Error, Result};
use crate::kac_rice::{check_pair, expected_zeros_exact_r0};
use crate::numeric::splitmix64;
use crate::par::{map_indexed, Execution};
use crate::quadrature::{graded_mesh, tensor_2d, GaussLegendre};
use crate::trigpoly::u_ell;

pub const CACHE_ENV: &str = "TRIGZEROS_CACHE";
pub const CACHE_FILE: &str = "constants.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quad2Config {
    /// Uniform panels per axis before grading.
    pub panels: usize,
    pub nodes: usize,
    /// Geometric refinement levels toward each edge.
    pub levels: usize,
}

impl Default for Quad2Config {
    fn default() -> Self {
        Self {
            panels: 64,
            nodes: 16,
            levels: 14,
        }
    }
}

impl Quad2Config {
    const RATIO: f64 = 0.15;

    pub fn doubled(self) -> Self {
        Self {
            panels: 2 * self.panels,
            ..self
        }
    }

    /// Short descriptor used in cache keys, e.g. `p64n16g14`.
    pub fn descriptor(&self) -> String {
        format!("p{}n{}g{}", self.panels, self.nodes, self.levels)
    }

    fn validate(&self) -> Result<()> {
        if self.panels < 2 || self.nodes == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 panels and 1 node, got {self:?}"
            )));
        }
        Ok(())
    }

    fn mesh(&self, lo: f64, hi: f64) -> Vec<f64> {
        graded_mesh(lo, hi, self.panels, self.levels, Self::RATIO)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantResult {
    /// Value on the doubled grid.
    pub value: f64,
    /// At least `|value(grid) − value(doubled grid)|`.
    pub abs_error_estimate: f64,
    pub grid: Quad2Config,
}

/// Mean of `f` over `(0,π) × (0,hi_t)`, on `quad` and on its doubling.
fn mean_2d<F>(f: &F, t_hi: f64, quad: Quad2Config, exec: Execution) -> Result<ConstantResult>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    quad.validate()?;
    let once = |q: Quad2Config| -> Result<f64> {
        let rule = GaussLegendre::new(q.nodes);
        let xs = q.mesh(0.0, PI);
        let ys = q.mesh(0.0, t_hi);
        let (wf, w) = tensor_2d(f, &xs, &ys, &rule, exec)?;
        Ok(wf / w)
    };
    let coarse = once(quad)?;
    let fine = once(quad.doubled())?;
    let diff = (fine - coarse).abs();
    Ok(ConstantResult {
        value: fine,
        abs_error_estimate: diff.max(4.0 * f64::EPSILON * fine.abs()),
        grid: quad,
    })
}

/// Integrates `h(sin s, a² sin²t + b² sin²(s+t))` over `(0,π)²` as a
/// mean, choosing coordinates so the ridge of `1/D` runs along an edge.
fn mean_quadratic_form<H>(
    a2: f64,
    b2: f64,
    h: H,
    quad: Quad2Config,
    exec: Execution,
) -> Result<ConstantResult>
where
    H: Fn(f64, f64) -> f64 + Sync,
{
    if a2 >= b2 {
        let f = |s: f64, t: f64| {
            let d = a2 * t.sin().powi(2) + b2 * (s + t).sin().powi(2);
            h(s.sin(), d)
        };
        mean_2d(&f, PI, quad, exec)
    } else {
        // t = u − s (mod π); sin²t = sin²(u − s), sin²(s+t) = sin²u
        let f = |s: f64, u: f64| {
            let d = a2 * (u - s).sin().powi(2) + b2 * u.sin().powi(2);
            h(s.sin(), d)
        };
        mean_2d(&f, PI, quad, exec)
    }
}

/// `C_{ℓ,r}`; `r = 0` is accepted and gives exactly 1.
pub fn compute_c(
    ell: usize,
    r: usize,
    quad: Quad2Config,
    exec: Execution,
) -> Result<ConstantResult> {
    if r == 0 {
        if ell < 1 {
            return Err(Error::InvalidArgument("ell must be at least 1".into()));
        }
        return mean_2d(&|_, _| 1.0, PI, quad, exec);
    }
    check_pair(ell, r)?;
    let (lr, rf) = ((ell - r) as f64, r as f64);
    let k = rf * lr;
    mean_quadratic_form(
        lr,
        rf,
        |sin_s, d| (1.0 + k * sin_s * sin_s / (d * d)).sqrt(),
        quad,
        exec,
    )
}

/// `J_{ℓ,r}`, which equals 1 for every admissible pair.
pub fn compute_j(
    ell: usize,
    r: usize,
    quad: Quad2Config,
    exec: Execution,
) -> Result<ConstantResult> {
    check_pair(ell, r)?;
    let (lr, rf) = ((ell - r) as f64, r as f64);
    let k = (rf * lr).sqrt();
    mean_quadratic_form(lr, rf, |sin_s, d| k * sin_s / d, quad, exec)
}

/// `I_α` by quadrature (not normalized by `π²`).
pub fn compute_i_alpha(alpha: f64, quad: Quad2Config, exec: Execution) -> Result<ConstantResult> {
    if !(alpha > 0.0 && alpha < PI / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, π/2), got {alpha}"
        )));
    }
    let (sa, ca) = alpha.sin_cos();
    let mut res = mean_quadratic_form(sa * sa, ca * ca, |sin_s, d| sin_s / d, quad, exec)?;
    let area = PI * PI;
    res.value *= area;
    res.abs_error_estimate *= area;
    Ok(res)
}

/// `π² / (sin α cos α)`.
pub fn i_alpha_closed_form(alpha: f64) -> f64 {
    PI * PI / (alpha.sin() * alpha.cos())
}

pub fn compute_k(ell: usize, quad: Quad2Config, exec: Execution) -> Result<ConstantResult> {
    if ell < 1 {
        return Err(Error::InvalidArgument("ell must be at least 1".into()));
    }
    // outer variable s on (0, π/2) as the second axis; see mean_2d
    let f = |t: f64, s: f64| {
        let u = u_ell(ell, s);
        let num = 3.0 * (1.0 - u * u).max(0.0);
        if num == 0.0 {
            return 1.0;
        }
        let den = 1.0 + u * t.cos();
        (1.0 + num / (den * den)).sqrt()
    };
    let mut res = mean_2d(&f, PI / 2.0, quad, exec)?;
    // (1/π²) · area π²/2
    res.value *= 0.5;
    res.abs_error_estimate *= 0.5;
    Ok(res)
}

/// `∫_0^π dt / (1 − u cos t)` by graded quadrature, to compare with
/// [`pole_integral_closed_form`].
pub fn pole_integral(u: f64, quad: Quad2Config) -> Result<f64> {
    if u.is_nan() || u.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!("need |u| < 1, got {u}")));
    }
    quad.validate()?;
    let rule = GaussLegendre::new(quad.nodes);
    let mesh = quad.mesh(0.0, PI);
    let mut sum = 0.0;
    for w in mesh.windows(2) {
        sum += rule.integrate(&|t: f64| 1.0 / (1.0 - u * t.cos()), w[0], w[1])?;
    }
    Ok(sum)
}

/// `π / √(1 − u²)`.
pub fn pole_integral_closed_form(u: f64) -> f64 {
    PI / (1.0 - u * u).sqrt()
}

/// Plain Monte Carlo estimate of `C_{ℓ,r}` with `points` uniform samples.
/// Returns `(mean, standard error)`.
pub fn monte_carlo_c(
    ell: usize,
    r: usize,
    points: u64,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    check_pair(ell, r)?;
    if points < 2 {
        return Err(Error::InvalidArgument("need at least 2 points".into()));
    }
    let (lr, rf) = ((ell - r) as f64, r as f64);
    let k = rf * lr;
    const CHUNK: u64 = 1 << 16;
    let chunks = points.div_ceil(CHUNK) as usize;
    let partial = map_indexed(exec, chunks, |c| {
        let start = c as u64 * CHUNK;
        let len = CHUNK.min(points - start);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(c as u64)));
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let s: f64 = rng.random::<f64>() * PI;
            let t: f64 = rng.random::<f64>() * PI;
            let d = lr * t.sin().powi(2) + rf * (s + t).sin().powi(2);
            let v = (1.0 + k * s.sin().powi(2) / (d * d)).sqrt();
            if v.is_finite() {
                s1 += v;
                s2 += v * v;
            }
        }
        (s1, s2)
    });
    let (s1, s2) = partial
        .into_iter()
        .fold((0.0, 0.0), |acc, (a, b)| (acc.0 + a, acc.1 + b));
    let nf = points as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Lower bound `√2` and upper bound `2` of every `C_{ℓ,r}`, `r ≠ 0`.
pub const C_LOWER: f64 = SQRT_2;
pub const C_UPPER: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderTag {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "o(n)")]
    LittleO,
    #[serde(rename = "O(n^{2/3})")]
    TwoThirds,
    #[serde(rename = "O(n^{4/5})")]
    FourFifths,
}

impl OrderTag {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderTag::Exact => "exact",
            OrderTag::LittleO => "o(n)",
            OrderTag::TwoThirds => "O(n^{2/3})",
            OrderTag::FourFifths => "O(n^{4/5})",
        }
    }
}

impl std::fmt::Display for OrderTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theory {
    pub value: f64,
    pub order: OrderTag,
}

/// Leading-order prediction of `E[N(0, 2π)]`.
///
/// * i.i.d. (trig or cosine): `2n/√3`, remainder `o(n)`;
/// * periodic trig, `ℓ | n+1`, `m ≥ 2`: exact closed form;
/// * periodic cosine, `ℓ | n+1`: `2n`, remainder `O(n^{2/3})` (exact for `ℓ = 1`);
/// * periodic trig, `r ≠ 0`: `n·C_{ℓ,r}`, remainder `O(n^{4/5})`.
///
/// Periodic cosine with `r ≠ 0` is not covered.
pub fn theoretical_mean(
    model: &CoefficientModel,
    n: usize,
    quad: Quad2Config,
    exec: Execution,
) -> Result<Theory> {
    model.validate()?;
    if n < 1 {
        return Err(Error::InvalidDegree("degree n must be at least 1".into()));
    }
    let nf = n as f64;
    match model.dependence {
        Dependence::Iid => Ok(Theory {
            value: 2.0 * nf / 3f64.sqrt(),
            order: OrderTag::LittleO,
        }),
        Dependence::Periodic { ell } => {
            let d = decompose_degree(n, ell)?;
            match (model.kind, d.r) {
                (PolyKind::Trig, 0) if d.m >= 2 => Ok(Theory {
                    value: expected_zeros_exact_r0(n, ell)?,
                    order: OrderTag::Exact,
                }),
                (PolyKind::Trig, 0) => Err(Error::Unsupported(format!(
                    "m = 1 (n = {n}, ell = {ell}) is the i.i.d. model of degree n; use dep=iid"
                ))),
                (PolyKind::Cosine, 0) => Ok(Theory {
                    value: 2.0 * nf,
                    order: if ell == 1 {
                        OrderTag::Exact
                    } else {
                        OrderTag::TwoThirds
                    },
                }),
                (PolyKind::Trig, r) => {
                    let c = cached_c(ell, r, quad, exec)?;
                    Ok(Theory {
                        value: nf * c.value,
                        order: OrderTag::FourFifths,
                    })
                }
                (PolyKind::Cosine, r) => Err(Error::Unsupported(format!(
                    "no asymptotic law for periodic cosine polynomials with r = {r} != 0"
                ))),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub value: f64,
    pub error: f64,
}

pub fn cache_key(ell: usize, r: usize, quad: &Quad2Config) -> String {
    format!("{ell}:{r}:{}", quad.descriptor())
}

fn memory_cache() -> &'static Mutex<BTreeMap<String, CacheEntry>> {
    static CACHE: OnceLock<Mutex<BTreeMap<String, CacheEntry>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// Directory named by `TRIGZEROS_CACHE`, if set and non-empty.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Reads a cache file; a missing file is an empty cache.
pub fn read_cache(path: &Path) -> Result<BTreeMap<String, CacheEntry>> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(e.into()),
    }
}

/// Writes the map to a temporary file in the same directory and renames
/// it over `path`.
pub fn write_cache_atomic(path: &Path, map: &BTreeMap<String, CacheEntry>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer_pretty(&mut tmp, map)?;
    std::io::Write::write_all(&mut tmp, b"\n")?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// [`compute_c`] through the in-process cache and, when
/// `TRIGZEROS_CACHE` is set, the on-disk cache in that directory.
pub fn cached_c(
    ell: usize,
    r: usize,
    quad: Quad2Config,
    exec: Execution,
) -> Result<ConstantResult> {
    cached_c_in(cache_dir_from_env().as_deref(), ell, r, quad, exec)
}

pub fn cached_c_in(
    dir: Option<&Path>,
    ell: usize,
    r: usize,
    quad: Quad2Config,
    exec: Execution,
) -> Result<ConstantResult> {
    let key = cache_key(ell, r, &quad);
    let from = |e: CacheEntry| ConstantResult {
        value: e.value,
        abs_error_estimate: e.error,
        grid: quad,
    };
    if let Some(e) = memory_cache().lock().unwrap().get(&key) {
        return Ok(from(*e));
    }
    let file = dir.map(|d| d.join(CACHE_FILE));
    if let Some(path) = &file {
        if let Some(e) = read_cache(path)?.get(&key) {
            memory_cache().lock().unwrap().insert(key, *e);
            return Ok(from(*e));
        }
    }
    let res = compute_c(ell, r, quad, exec)?;
    let entry = CacheEntry {
        value: res.value,
        error: res.abs_error_estimate,
    };
    memory_cache().lock().unwrap().insert(key.clone(), entry);
    if let Some(path) = &file {
        let mut map = read_cache(path)?;
        map.insert(key, entry);
        write_cache_atomic(path, &map)?;
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> Quad2Config {
        Quad2Config {
            panels: 16,
            nodes: 16,
            levels: 14,
        }
    }

    #[test]
    fn r_zero_plug_in_is_one() {
        let c = compute_c(4, 0, coarse(), Execution::Sequential).unwrap();
        assert_eq!(c.value, 1.0);
    }

    #[test]
    fn k_one_is_one_half() {
        let k = compute_k(1, coarse(), Execution::Sequential).unwrap();
        assert_eq!(k.value, 0.5);
    }

    #[test]
    fn i_alpha_at_quarter_pi() {
        let i = compute_i_alpha(PI / 4.0, coarse(), Execution::Parallel).unwrap();
        assert!((i.value - 2.0 * PI * PI).abs() < 1e-7 * i.value, "{i:?}");
        assert!((i_alpha_closed_form(PI / 6.0) - 4.0 * PI * PI / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn j_is_one() {
        let j = compute_j(2, 1, coarse(), Execution::Parallel).unwrap();
        assert!((j.value - 1.0).abs() < 1e-7, "{j:?}");
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(compute_c(3, 3, coarse(), Execution::Sequential).is_err());
        assert!(compute_j(1, 0, coarse(), Execution::Sequential).is_err());
        assert!(compute_i_alpha(0.0, coarse(), Execution::Sequential).is_err());
    }

    #[test]
    fn pole_identity() {
        for u in [-0.9, 0.0, 0.5, 0.99, 0.999_999] {
            let q = pole_integral(u, Quad2Config::default()).unwrap();
            let c = pole_integral_closed_form(u);
            assert!((q - c).abs() <= 1e-9 * c, "u={u}: {q} vs {c}");
        }
    }

    #[test]
    fn theory_dispatch() {
        let q = coarse();
        let e = Execution::Sequential;
        let t = theoretical_mean(&CoefficientModel::iid(PolyKind::Trig), 300, q, e).unwrap();
        assert!((t.value - 346.41016).abs() < 1e-4);
        assert_eq!(t.order, OrderTag::LittleO);
        let t =
            theoretical_mean(&CoefficientModel::periodic(PolyKind::Cosine, 4), 399, q, e).unwrap();
        assert_eq!(t.value, 798.0);
        assert_eq!(t.order, OrderTag::TwoThirds);
        let t =
            theoretical_mean(&CoefficientModel::periodic(PolyKind::Trig, 3), 299, q, e).unwrap();
        assert_eq!(t.order, OrderTag::Exact);
        let cos_r = CoefficientModel::periodic(PolyKind::Cosine, 3);
        assert!(matches!(
            theoretical_mean(&cos_r, 300, q, e),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn order_tags_serialize_as_text() {
        assert_eq!(
            serde_json::to_string(&OrderTag::FourFifths).unwrap(),
            "\"O(n^{4/5})\""
        );
    }

    #[test]
    fn cache_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let q = Quad2Config {
            panels: 8,
            nodes: 8,
            levels: 6,
        };
        let first = cached_c_in(Some(dir.path()), 2, 1, q, Execution::Sequential).unwrap();
        let map = read_cache(&dir.path().join(CACHE_FILE)).unwrap();
        let entry = map.get(&cache_key(2, 1, &q)).unwrap();
        assert_eq!(entry.value, first.value);
        assert_eq!(cache_key(2, 1, &q), "2:1:p8n8g6");
    }
}
