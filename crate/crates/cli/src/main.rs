//! `trigzeros` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use trigzeros::constants::{
    cached_c, compute_i_alpha, compute_j, compute_k, i_alpha_closed_form, theoretical_mean,
    Quad2Config,
};
use trigzeros::experiment::{
    emit_report, read_config_file, run_experiment, ExperimentConfig, Format,
};
use trigzeros::kac_rice::{
    expected_zeros_exact_r0, expected_zeros_quadrature, ExclusionRule, QuadConfig,
};
use trigzeros::verify::{run_all, VerifyOptions};
use trigzeros::zeros::{count_zeros, write_roots_csv, CountOptions, DEFAULT_GRID_PER_DEGREE};
use trigzeros::{
    decompose_degree, sample_coefficients, trial_seed, CoefficientModel, Dependence, Error,
    Execution, PolyKind,
};

#[derive(Parser, Debug)]
#[command(
    name = "trigzeros",
    version,
    about = "Real zeros of random trigonometric polynomials"
)]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo zero counts against the theoretical mean.
    Simulate(SimulateArgs),
    /// Expected zeros by Kac–Rice quadrature.
    Kacrice(KacRiceArgs),
    /// Tables of the limiting constants C, J, I_alpha and K.
    Constants(ConstantsArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
    /// Count the zeros of one seeded sample.
    Count(CountArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// trig | cosine
    #[arg(long)]
    kind: Option<String>,
    /// iid | periodic (periodic when --ell is given)
    #[arg(long)]
    dep: Option<String>,
    #[arg(long)]
    ell: Option<usize>,
    /// Coefficient standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Degrees; repeat the flag or separate with commas.
    #[arg(long = "n", value_delimiter = ',')]
    n: Vec<usize>,
    /// json | csv
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_per_degree: Option<usize>,
    /// Require n + 1 ≡ r (mod ℓ) for every degree.
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Args, Debug)]
struct KacRiceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    panels_per_degree: Option<usize>,
    #[arg(long)]
    nodes_per_panel: Option<usize>,
    /// Exclude windows of width ~ m^{-a} (trig) or n^{-a} (cosine)
    /// around the singular points; the default integrates everywhere.
    #[arg(long)]
    exclusion_exponent: Option<f64>,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    /// Restrict C and J to this period (default 2..=6).
    #[arg(long)]
    ell: Option<usize>,
    /// Quantities to tabulate: any of c, j, i, k.
    #[arg(long, value_delimiter = ',', default_value = "c")]
    table: Vec<String>,
    /// Number of alpha values for the I table.
    #[arg(long, default_value_t = 20)]
    alphas: usize,
    /// Uniform panels per axis before grading.
    #[arg(long)]
    panels: Option<usize>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Fewer trials and sample points; same degrees and tolerances.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CountArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Trial index mixed into the seed, as in `simulate`.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    grid_per_degree: Option<usize>,
    /// Write refined roots as CSV (index,x,residual).
    #[arg(long)]
    roots: Option<PathBuf>,
}

/// Config-file values keyed by flag name.
#[derive(Default)]
struct FileConfig(BTreeMap<String, Vec<String>>);

impl FileConfig {
    fn load(path: Option<&Path>, allowed: &[&str]) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let map =
            read_config_file(path).with_context(|| format!("reading config {}", path.display()))?;
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!("unknown config key `{k}`")).into());
        }
        Ok(Self(map))
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.0.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.last(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| usage(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> anyhow::Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let mut out = Vec::new();
        for v in self.0.get(key).into_iter().flatten() {
            for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                out.push(
                    part.parse::<T>()
                        .map_err(|e| usage(format!("config key `{key}`: {e}")))?,
                );
            }
        }
        Ok(out)
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

const MODEL_KEYS: [&str; 7] = ["kind", "dep", "ell", "sigma", "n", "format", "out"];

/// Model flags merged over the config file.
struct Resolved {
    model: CoefficientModel,
    n: Vec<usize>,
    format: Format,
    out: Option<PathBuf>,
}

fn resolve_model(args: &ModelArgs, file: &FileConfig) -> anyhow::Result<Resolved> {
    let kind: PolyKind = match &args.kind {
        Some(k) => k.parse()?,
        None => file.get("kind")?.unwrap_or(PolyKind::Trig),
    };
    let dep = args
        .dep
        .clone()
        .or_else(|| file.last("dep").map(str::to_string));
    // an explicit --dep iid drops an ell inherited from the config file
    let cli_iid = args
        .dep
        .as_deref()
        .is_some_and(|d| d.eq_ignore_ascii_case("iid"));
    let ell = match args.ell {
        Some(ell) => Some(ell),
        None if cli_iid => None,
        None => file.get("ell")?,
    };
    let dependence = match (dep.as_deref().map(str::to_ascii_lowercase).as_deref(), ell) {
        (Some("iid"), None) | (None, None) => Dependence::Iid,
        (Some("iid"), Some(_)) => return Err(usage("--ell only applies to --dep periodic")),
        (Some("periodic") | None, Some(ell)) => Dependence::Periodic { ell },
        (Some("periodic"), None) => return Err(usage("--dep periodic needs --ell")),
        (Some(other), _) => {
            return Err(usage(format!(
                "unknown dependence `{other}` (expected iid|periodic)"
            )))
        }
    };
    let sigma = match args.sigma {
        Some(s) => s,
        None => file.get("sigma")?.unwrap_or(1.0),
    };
    let model = CoefficientModel {
        kind,
        dependence,
        sigma,
    };
    model.validate()?;
    let n = if args.n.is_empty() {
        file.list("n")?
    } else {
        args.n.clone()
    };
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => file.get("format")?.unwrap_or_default(),
    };
    let out = args.out.clone().or(file.get("out")?);
    Ok(Resolved {
        model,
        n,
        format,
        out,
    })
}

fn parse_format(flag: &Option<String>, default: Format) -> anyhow::Result<Format> {
    Ok(match flag {
        Some(f) => f.parse()?,
        None => default,
    })
}

fn write_output(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Serializes rows as pretty JSON or as CSV with a header from the
/// field names.
fn render_rows<T: Serialize>(rows: &[T], format: Format) -> anyhow::Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row)?;
            }
            Ok(String::from_utf8(w.into_inner()?)?)
        }
    }
}

fn simulate(args: &SimulateArgs, exec: Execution) -> anyhow::Result<ExitCode> {
    let mut keys = MODEL_KEYS.to_vec();
    keys.extend(["trials", "seed", "grid-per-degree", "r"]);
    let file = FileConfig::load(args.model.config.as_deref(), &keys)?;
    let m = resolve_model(&args.model, &file)?;
    if m.n.is_empty() {
        return Err(usage("at least one --n is required"));
    }
    let trials = match args.trials {
        Some(t) => t,
        None => file.get("trials")?.unwrap_or(1000),
    };
    let seed = match args.seed {
        Some(s) => s,
        None => file.get("seed")?.unwrap_or(0),
    };
    let mut config = ExperimentConfig::new(m.model, m.n, trials, seed);
    config.grid_per_degree = match args.grid_per_degree {
        Some(g) => g,
        None => file
            .get("grid-per-degree")?
            .unwrap_or(DEFAULT_GRID_PER_DEGREE),
    };
    config.expected_r = match args.r {
        Some(r) => Some(r),
        None => file.get("r")?,
    };
    config.format = m.format;
    config.output_path = m.out.clone();
    let result = run_experiment(&config, exec)?;
    emit_report(&result, m.format, m.out.as_deref())?;
    for row in result.rows.iter().filter(|r| r.failed) {
        eprintln!(
            "n = {}: {} of {} trials unstable",
            row.n, row.unstable_trials, config.trials
        );
    }
    Ok(if result.any_failed() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

#[derive(Serialize)]
struct KacRiceRow {
    n: usize,
    m: Option<usize>,
    r: Option<usize>,
    expected_zeros: f64,
    abs_error_estimate: f64,
    deterministic_zeros: usize,
    excluded_bound: f64,
    closed_form: Option<f64>,
    theory: Option<f64>,
    order_tag: Option<String>,
}

fn kacrice(args: &KacRiceArgs, exec: Execution) -> anyhow::Result<ExitCode> {
    let mut keys = MODEL_KEYS.to_vec();
    keys.extend(["panels-per-degree", "nodes-per-panel", "exclusion-exponent"]);
    let file = FileConfig::load(args.model.config.as_deref(), &keys)?;
    let m = resolve_model(&args.model, &file)?;
    if m.n.is_empty() {
        return Err(usage("at least one --n is required"));
    }
    let mut quad = QuadConfig::default();
    if let Some(p) = args.panels_per_degree.or(file.get("panels-per-degree")?) {
        quad.panels_per_degree = p;
    }
    if let Some(p) = args.nodes_per_panel.or(file.get("nodes-per-panel")?) {
        quad.nodes_per_panel = p;
    }
    if let Some(a) = args.exclusion_exponent.or(file.get("exclusion-exponent")?) {
        quad.exclusion = ExclusionRule::Exponent(a);
    }
    let mut rows = Vec::new();
    for &n in &m.n {
        let res = expected_zeros_quadrature(&m.model, n, &quad, exec)?;
        let (dm, dr) = match m.model.period() {
            Some(ell) => {
                let d = decompose_degree(n, ell)?;
                (Some(d.m), Some(d.r))
            }
            None => (None, None),
        };
        let closed_form = match (m.model.kind, m.model.dependence) {
            (PolyKind::Trig, Dependence::Periodic { ell }) => expected_zeros_exact_r0(n, ell).ok(),
            _ => None,
        };
        let theory = match theoretical_mean(&m.model, n, Quad2Config::default(), exec) {
            Ok(t) => Some(t),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e.into()),
        };
        rows.push(KacRiceRow {
            n,
            m: dm,
            r: dr,
            expected_zeros: res.expected_zeros,
            abs_error_estimate: res.abs_error_estimate,
            deterministic_zeros: res.deterministic_zeros,
            excluded_bound: res.excluded_bound,
            closed_form,
            theory: theory.map(|t| t.value),
            order_tag: theory.map(|t| t.order.to_string()),
        });
    }
    write_output(&render_rows(&rows, m.format)?, m.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ConstantRow {
    quantity: &'static str,
    ell: Option<usize>,
    r: Option<usize>,
    alpha: Option<f64>,
    value: f64,
    error: f64,
    reference: Option<f64>,
}

fn constants(args: &ConstantsArgs, exec: Execution) -> anyhow::Result<ExitCode> {
    let format = parse_format(&args.format, Format::Csv)?;
    let mut quad = Quad2Config::default();
    if let Some(p) = args.panels {
        quad.panels = p;
    }
    let ells: Vec<usize> = match args.ell {
        Some(0 | 1) => return Err(usage("--ell must be at least 2 for C and J")),
        Some(ell) => vec![ell],
        None => (2..=6).collect(),
    };
    let mut rows = Vec::new();
    for t in &args.table {
        match t.trim().to_ascii_lowercase().as_str() {
            "c" => {
                for &ell in &ells {
                    for r in 1..ell {
                        let c = cached_c(ell, r, quad, exec)?;
                        rows.push(ConstantRow {
                            quantity: "C",
                            ell: Some(ell),
                            r: Some(r),
                            alpha: None,
                            value: c.value,
                            error: c.abs_error_estimate,
                            reference: None,
                        });
                    }
                }
            }
            "j" => {
                for &ell in &ells {
                    for r in 1..ell {
                        let j = compute_j(ell, r, quad, exec)?;
                        rows.push(ConstantRow {
                            quantity: "J",
                            ell: Some(ell),
                            r: Some(r),
                            alpha: None,
                            value: j.value,
                            error: j.abs_error_estimate,
                            reference: Some(1.0),
                        });
                    }
                }
            }
            "i" => {
                if args.alphas < 2 {
                    return Err(usage("--alphas must be at least 2"));
                }
                let (lo, hi) = (0.15, std::f64::consts::FRAC_PI_2 - 0.15);
                for i in 0..args.alphas {
                    let alpha = lo + (hi - lo) * i as f64 / (args.alphas - 1) as f64;
                    let v = compute_i_alpha(alpha, quad, exec)?;
                    rows.push(ConstantRow {
                        quantity: "I",
                        ell: None,
                        r: None,
                        alpha: Some(alpha),
                        value: v.value,
                        error: v.abs_error_estimate,
                        reference: Some(i_alpha_closed_form(alpha)),
                    });
                }
            }
            "k" => {
                let ks: Vec<usize> = args
                    .ell
                    .map(|l| vec![l])
                    .unwrap_or_else(|| (1..=6).collect());
                for ell in ks {
                    let k = compute_k(ell, quad, exec)?;
                    rows.push(ConstantRow {
                        quantity: "K",
                        ell: Some(ell),
                        r: None,
                        alpha: None,
                        value: k.value,
                        error: k.abs_error_estimate,
                        reference: None,
                    });
                }
            }
            other => {
                return Err(usage(format!(
                    "unknown table `{other}` (expected c, j, i or k)"
                )))
            }
        }
    }
    write_output(&render_rows(&rows, format)?, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &VerifyArgs, exec: Execution) -> anyhow::Result<ExitCode> {
    let format = parse_format(&args.format, Format::Json)?;
    let reports = run_all(&VerifyOptions {
        quick: args.quick,
        exec,
    });
    for r in &reports {
        eprintln!("{}", r.line());
    }
    write_output(&render_rows(&reports, format)?, args.out.as_deref())?;
    Ok(if reports.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

#[derive(Serialize)]
struct CountRow {
    n: usize,
    seed: u64,
    trial: u64,
    count: usize,
    stable: bool,
    grid_size: usize,
    doublings_used: u32,
    unresolved_cells: usize,
}

fn count(args: &CountArgs) -> anyhow::Result<ExitCode> {
    let mut keys = MODEL_KEYS.to_vec();
    keys.extend(["seed", "grid-per-degree"]);
    let file = FileConfig::load(args.model.config.as_deref(), &keys)?;
    let m = resolve_model(&args.model, &file)?;
    let n = match m.n.as_slice() {
        [n] => *n,
        _ => return Err(usage("count takes exactly one --n")),
    };
    let seed = match args.seed {
        Some(s) => s,
        None => file.get("seed")?.unwrap_or(0),
    };
    let options = CountOptions {
        grid_per_degree: match args.grid_per_degree {
            Some(g) => g,
            None => file
                .get("grid-per-degree")?
                .unwrap_or(DEFAULT_GRID_PER_DEGREE),
        },
        refine_roots: args.roots.is_some(),
        ..CountOptions::default()
    };
    let sample = sample_coefficients(&m.model, n, trial_seed(seed, n, args.trial))?;
    let rep = count_zeros(&sample, &options)?;
    if let (Some(path), Some(roots)) = (&args.roots, &rep.roots) {
        let f =
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_roots_csv(std::io::BufWriter::new(f), &sample, roots)?;
    }
    let row = CountRow {
        n,
        seed,
        trial: args.trial,
        count: rep.count,
        stable: rep.stable,
        grid_size: rep.grid_size,
        doublings_used: rep.doublings_used,
        unresolved_cells: rep.unresolved_cells,
    };
    write_output(&render_rows(&[row], m.format)?, m.out.as_deref())?;
    Ok(if rep.stable {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "zero count did not stabilize: grid counts {:?}",
            rep.grid_counts
        );
        ExitCode::from(2)
    })
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Simulate(a) => simulate(a, exec),
        Command::Kacrice(a) => kacrice(a, exec),
        Command::Constants(a) => constants(a, exec),
        Command::Verify(a) => verify(a, exec),
        Command::Count(a) => count(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
