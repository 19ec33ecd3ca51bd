//! Seeded Monte Carlo runs and their reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coeff_models::{
    decompose_degree, sample_coefficients, trial_seed, CoefficientModel, Dependence,
};
use crate::constants::{theoretical_mean, Quad2Config};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::zeros::{count_zeros, CountOptions, DEFAULT_GRID_PER_DEGREE, DEFAULT_MAX_DOUBLINGS};

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 10] = [
    "n",
    "m",
    "r",
    "empirical_mean",
    "stddev",
    "stderr",
    "theory",
    "order_tag",
    "z_score",
    "unstable_trials",
];

/// Rows with more than this fraction of unstable trials are failed.
pub const MAX_UNSTABLE_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown format `{other}` (expected json|csv)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: CoefficientModel,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub grid_per_degree: usize,
    #[serde(default = "default_doublings")]
    pub max_doublings: u32,
    /// Optional consistency check: every `n` must have this remainder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

fn default_doublings() -> u32 {
    DEFAULT_MAX_DOUBLINGS
}

impl ExperimentConfig {
    pub fn new(
        model: CoefficientModel,
        n_values: Vec<usize>,
        trials: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            model,
            n_values,
            trials,
            master_seed,
            grid_per_degree: DEFAULT_GRID_PER_DEGREE,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
            expected_r: None,
            output_path: None,
            format: Format::Json,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.trials < 1 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one degree n is required".into(),
            ));
        }
        if self.grid_per_degree < 8 {
            return Err(Error::InvalidArgument(format!(
                "grid_per_degree must be at least 8, got {}",
                self.grid_per_degree
            )));
        }
        for &n in &self.n_values {
            if n < 1 {
                return Err(Error::InvalidDegree("degree n must be at least 1".into()));
            }
            match self.model.dependence {
                Dependence::Periodic { ell } => {
                    let d = decompose_degree(n, ell)?;
                    if let Some(r) = self.expected_r {
                        if d.r != r {
                            return Err(Error::InvalidArgument(format!(
                                "n = {n} has r = {} for ell = {ell}, but r = {r} was requested",
                                d.r
                            )));
                        }
                    }
                }
                Dependence::Iid => {
                    if self.expected_r.is_some() {
                        return Err(Error::InvalidArgument(
                            "r only applies to periodic models".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: usize,
    pub m: Option<usize>,
    pub r: Option<usize>,
    pub empirical_mean: f64,
    pub stddev: f64,
    pub stderr: f64,
    pub theory: Option<f64>,
    pub order_tag: Option<String>,
    pub z_score: Option<f64>,
    pub unstable_trials: usize,
    /// More than 1% of the trials were unstable.
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
}

impl ExperimentResult {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failed)
    }
}

/// Outcome of one trial: `Some(count)` when the count is certified.
fn run_trial(config: &ExperimentConfig, n: usize, trial: usize) -> Result<Option<usize>> {
    let seed = trial_seed(config.master_seed, n, trial as u64);
    let sample = sample_coefficients(&config.model, n, seed)?;
    let options = CountOptions {
        grid_per_degree: config.grid_per_degree,
        max_doublings: config.max_doublings,
        ..CountOptions::default()
    };
    match count_zeros(&sample, &options) {
        Ok(rep) if rep.stable => Ok(Some(rep.count)),
        Ok(_) => Ok(None),
        Err(e) if e.is_numerical() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Mean, sample standard deviation and standard error of integer counts.
pub fn summarize(counts: &[usize]) -> (f64, f64, f64) {
    let k = counts.len();
    if k == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    let mean = total as f64 / k as f64;
    if k == 1 {
        return (mean, 0.0, 0.0);
    }
    let ss: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
    let sd = (ss / (k - 1) as f64).sqrt();
    (mean, sd, sd / (k as f64).sqrt())
}

pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let outcomes = map_indexed(exec, config.trials, |t| run_trial(config, n, t));
        let mut counts = Vec::with_capacity(config.trials);
        let mut unstable = 0;
        for o in outcomes {
            match o? {
                Some(c) => counts.push(c),
                None => unstable += 1,
            }
        }
        let (mean, sd, se) = summarize(&counts);
        let theory = match theoretical_mean(&config.model, n, Quad2Config::default(), exec) {
            Ok(t) => Some(t),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        let z_score = match theory {
            Some(t) if se > 0.0 => Some((mean - t.value) / se),
            _ => None,
        };
        let (m, r) = match config.model.period() {
            Some(ell) => {
                let d = decompose_degree(n, ell)?;
                (Some(d.m), Some(d.r))
            }
            None => (None, None),
        };
        rows.push(Row {
            n,
            m,
            r,
            empirical_mean: mean,
            stddev: sd,
            stderr: se,
            theory: theory.map(|t| t.value),
            order_tag: theory.map(|t| t.order.to_string()),
            z_score,
            unstable_trials: unstable,
            failed: unstable as f64 > MAX_UNSTABLE_FRACTION * config.trials as f64,
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        rows,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders a report. CSV output starts with a `# config: {…}` comment
/// line (JSON) followed by the header and one row per degree.
pub fn render_report(result: &ExperimentResult, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(result)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut out = format!("# config: {}\n", serde_json::to_string(&result.config)?);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_COLUMNS)?;
            for row in &result.rows {
                w.write_record([
                    row.n.to_string(),
                    opt(row.m),
                    opt(row.r),
                    row.empirical_mean.to_string(),
                    row.stddev.to_string(),
                    row.stderr.to_string(),
                    opt(row.theory),
                    row.order_tag.clone().unwrap_or_default(),
                    opt(row.z_score),
                    row.unstable_trials.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            out.push_str(&String::from_utf8_lossy(&bytes));
            Ok(out)
        }
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(result: &ExperimentResult, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render_report(result, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Parses a flat `key = value` file. Blank lines and lines starting with
/// `#` are skipped; a key may repeat (its values accumulate in order).
/// Keys are normalized to lowercase with `_` replaced by `-`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidArgument(format!(
                "config line {}: expected key=value, got `{line}`",
                lineno + 1
            )));
        };
        let key = k.trim().to_ascii_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "config line {}: empty key",
                lineno + 1
            )));
        }
        map.entry(key).or_default().push(v.trim().to_string());
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff_models::PolyKind;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::new(
            CoefficientModel::periodic(PolyKind::Trig, 1),
            vec![10, 20],
            20,
            7,
        )
    }

    #[test]
    fn ell_one_rows_are_exact() {
        let res = run_experiment(&small_config(), Execution::Parallel).unwrap();
        for row in &res.rows {
            assert_eq!(row.empirical_mean, 2.0 * row.n as f64);
            assert_eq!(row.stddev, 0.0);
            assert_eq!(row.z_score, None);
            assert_eq!(row.theory, Some(2.0 * row.n as f64));
            assert!(!row.failed);
        }
    }

    #[test]
    fn sequential_and_parallel_reports_match() {
        let mut cfg = ExperimentConfig::new(CoefficientModel::iid(PolyKind::Trig), vec![15], 30, 3);
        cfg.format = Format::Csv;
        let a = run_experiment(&cfg, Execution::Sequential).unwrap();
        let b = run_experiment(&cfg, Execution::Parallel).unwrap();
        assert_eq!(
            render_report(&a, Format::Csv).unwrap(),
            render_report(&b, Format::Csv).unwrap()
        );
    }

    #[test]
    fn csv_shape() {
        let res = run_experiment(&small_config(), Execution::Sequential).unwrap();
        let text = render_report(&res, Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config: {"));
        assert_eq!(lines[1], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 2 + res.rows.len());
        let empty = ExperimentResult {
            config: res.config.clone(),
            rows: Vec::new(),
        };
        let text = render_report(&empty, Format::Csv).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn json_round_trip() {
        let res = run_experiment(&small_config(), Execution::Sequential).unwrap();
        let text = render_report(&res, Format::Json).unwrap();
        let back: ExperimentResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, res);
    }

    #[test]
    fn validation() {
        let mut cfg = small_config();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(
            CoefficientModel::periodic(PolyKind::Trig, 2),
            vec![300],
            5,
            1,
        );
        cfg.expected_r = Some(0);
        assert!(cfg.validate().is_err());
        cfg.expected_r = Some(1);
        assert!(cfg.validate().is_ok());
        cfg.n_values.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn summary_statistics() {
        let (m, sd, se) = summarize(&[1, 2, 3, 4]);
        assert_eq!(m, 2.5);
        assert!((sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((se - sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn config_text() {
        let map = parse_config_text("# comment\nkind = trig\nn=10\nn = 20\ngrid_per_degree=64\n")
            .unwrap();
        assert_eq!(map["kind"], vec!["trig"]);
        assert_eq!(map["n"], vec!["10", "20"]);
        assert_eq!(map["grid-per-degree"], vec!["64"]);
        assert!(parse_config_text("oops").is_err());
    }
}
