//! Coefficient ensembles and reproducible Gaussian samples.
//!
//! A [`CoefficientModel`] describes the law of the coefficients of
//!
//! ```text
//! T_n(x) = Σ_{j=0}^{n} a_j cos(jx) + b_j sin(jx)        (Trig)
//! V_n(x) = Σ_{j=0}^{n} a_j cos(jx)                       (Cosine)
//! ```
//!
//! Coefficients are either i.i.d. `N(0, σ²)` or `ℓ`-periodic: only
//! `a_0..a_{ℓ-1}` (and `b_0..b_{ℓ-1}`) are drawn, the rest are copies with
//! `a_{i+ℓ} = a_i`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::splitmix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyKind {
    Trig,
    Cosine,
}

impl fmt::Display for PolyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyKind::Trig => f.write_str("trig"),
            PolyKind::Cosine => f.write_str("cosine"),
        }
    }
}

impl FromStr for PolyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trig" | "t" => Ok(PolyKind::Trig),
            "cosine" | "cos" | "v" => Ok(PolyKind::Cosine),
            other => Err(Error::InvalidArgument(format!(
                "unknown polynomial kind `{other}` (expected trig|cosine)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "dep")]
pub enum Dependence {
    Iid,
    Periodic { ell: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientModel {
    pub kind: PolyKind,
    #[serde(flatten)]
    pub dependence: Dependence,
    pub sigma: f64,
}

impl CoefficientModel {
    pub fn iid(kind: PolyKind) -> Self {
        Self {
            kind,
            dependence: Dependence::Iid,
            sigma: 1.0,
        }
    }

    pub fn periodic(kind: PolyKind, ell: usize) -> Self {
        Self {
            kind,
            dependence: Dependence::Periodic { ell },
            sigma: 1.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn period(&self) -> Option<usize> {
        match self.dependence {
            Dependence::Iid => None,
            Dependence::Periodic { ell } => Some(ell),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_model(self)
    }
}

impl fmt::Display for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dependence {
            Dependence::Iid => write!(f, "kind={} dep=iid sigma={}", self.kind, self.sigma),
            Dependence::Periodic { ell } => write!(
                f,
                "kind={} dep=periodic ell={ell} sigma={}",
                self.kind, self.sigma
            ),
        }
    }
}

/// Checks `σ > 0` (finite) and `ℓ ≥ 1` for periodic models.
pub fn validate_model(model: &CoefficientModel) -> Result<()> {
    let mut problems = Vec::new();
    if !(model.sigma.is_finite() && model.sigma > 0.0) {
        problems.push(format!(
            "sigma must be a positive finite number, got {}",
            model.sigma
        ));
    }
    if let Dependence::Periodic { ell } = model.dependence {
        if ell == 0 {
            problems.push("period ell must be at least 1, got 0".to_string());
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(problems.join("; ")))
    }
}

/// `n = ℓ·m − 1 + r` with `m ≥ 1` and `0 ≤ r < ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodDecomposition {
    pub n: usize,
    pub ell: usize,
    pub m: usize,
    pub r: usize,
}

pub fn decompose_degree(n: usize, ell: usize) -> Result<PeriodDecomposition> {
    if n < 1 {
        return Err(Error::InvalidDegree("degree n must be at least 1".into()));
    }
    if ell < 1 {
        return Err(Error::InvalidModel("period ell must be at least 1".into()));
    }
    if n + 1 < ell {
        return Err(Error::InvalidDegree(format!(
            "degree n={n} is below ell-1={}; no decomposition n = ell*m - 1 + r with m >= 1",
            ell - 1
        )));
    }
    let m = (n + 1) / ell;
    let r = (n + 1) % ell;
    debug_assert_eq!(ell * m + r, n + 1);
    Ok(PeriodDecomposition { n, ell, m, r })
}

/// Per-trial seed derived from a master seed, the degree and the trial
/// index. Depends only on its arguments, so trials can run in any order.
///
/// `mix(master, n, trial) = splitmix64(splitmix64(master ⊕ splitmix64(n)) ⊕ trial)`
pub fn trial_seed(master_seed: u64, n: usize, trial: u64) -> u64 {
    splitmix64(splitmix64(master_seed ^ splitmix64(n as u64)) ^ trial)
}

/// One realization of a model at degree `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySample {
    pub n: usize,
    pub a: Vec<f64>,
    /// All zeros for cosine polynomials.
    pub b: Vec<f64>,
    pub model: CoefficientModel,
    pub seed: u64,
}

impl PolySample {
    /// Builds a sample from explicit coefficients, checking lengths and,
    /// for periodic models, the exact periodicity of both vectors.
    pub fn from_coefficients(model: CoefficientModel, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        validate_model(&model)?;
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vectors must be non-empty and equally long (a: {}, b: {})",
                a.len(),
                b.len()
            )));
        }
        let n = a.len() - 1;
        if model.kind == PolyKind::Cosine && b.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "cosine polynomials must have an all-zero b vector".into(),
            ));
        }
        if let Some(ell) = model.period() {
            for v in [&a, &b] {
                if let Some(i) = (0..(n + 1).saturating_sub(ell)).find(|&i| v[i + ell] != v[i]) {
                    return Err(Error::InvalidArgument(format!(
                        "coefficients are not {ell}-periodic at index {i}"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            a,
            b,
            model,
            seed: 0,
        })
    }

    pub fn kind(&self) -> PolyKind {
        self.model.kind
    }

    /// `(a[0..ℓ], b[0..ℓ])` for periodic samples.
    pub fn periodic_base(&self) -> Option<(&[f64], &[f64])> {
        self.model.period().map(|ell| {
            let len = ell.min(self.n + 1);
            (&self.a[..len], &self.b[..len])
        })
    }
}

/// Draws a sample. Identical `(model, n, seed)` give bit-identical output.
///
/// Draw order: i.i.d. models take `a_0..a_n` then `b_0..b_n`; periodic
/// models take `a_0..a_{ℓ-1}` then `b_0..b_{ℓ-1}` and expand by copying.
/// Cosine models never draw `b`.
pub fn sample_coefficients(model: &CoefficientModel, n: usize, seed: u64) -> Result<PolySample> {
    validate_model(model)?;
    if n < 1 {
        return Err(Error::InvalidDegree("degree n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = model.sigma;
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect()
    };
    let len = n + 1;
    let (a, b) = match model.dependence {
        Dependence::Iid => {
            let a = draw(len);
            let b = match model.kind {
                PolyKind::Trig => draw(len),
                PolyKind::Cosine => vec![0.0; len],
            };
            (a, b)
        }
        Dependence::Periodic { ell } => {
            decompose_degree(n, ell)?;
            let base_a = draw(ell);
            let base_b = match model.kind {
                PolyKind::Trig => draw(ell),
                PolyKind::Cosine => vec![0.0; ell],
            };
            (expand_periodic(&base_a, len), expand_periodic(&base_b, len))
        }
    };
    Ok(PolySample {
        n,
        a,
        b,
        model: *model,
        seed,
    })
}

/// Copies `base` cyclically into a vector of length `len`.
fn expand_periodic(base: &[f64], len: usize) -> Vec<f64> {
    let ell = base.len();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&base[..ell.min(len)]);
    while out.len() < len {
        let v = out[out.len() - ell];
        out.push(v);
    }
    out
}
