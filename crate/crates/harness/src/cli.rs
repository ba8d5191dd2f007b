//! Command-line front end: `generate`, `recover`, `phase`, `bounds`, and
//! `bench` subcommands. Exit codes: 0 on success, 1 on invalid input
//! (including unknown flags), 2 on internal errors such as solver failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rrsr_core::alg_convex::{self, ConvexSolveConfig};
use rrsr_core::alg_independent::{self, DEFAULT_RANK_TOL};
use rrsr_core::bounds::{self, Algorithm, BoundInputs, BoundResult};
use rrsr_core::matstore::io::{
    read_index_list, read_matrix, write_index_list, write_matrix_bin, write_matrix_csv,
};
use rrsr_core::matstore::CoherenceStats;
use rrsr_core::metrics::{self, RecoveryVerdict};
use rrsr_core::sketch::{Design, SketchPlan};
use rrsr_core::{DataInstance, DenseMatrix, Error, Result};

use crate::baseline::{run_baseline_comparison_with, BASELINE_CAP};
use crate::config::{load_config, parse_count_list};
use crate::grid::{run_phase_transition, sampled_outlier_count, GridSpec, InstanceParams};

#[derive(Parser)]
#[command(
    name = "rrsr",
    version,
    about = "Randomized robust subspace recovery: synthetic experiments, \
             phase-transition grids, sample-size bounds, and timing runs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic low-rank-plus-outliers instance into a directory
    Generate(GenerateArgs),
    /// Run one end-to-end recovery and print the verdict as JSON
    Recover(RecoverArgs),
    /// Monte-Carlo phase-transition grid over sketch sizes, emitted as CSV
    Phase(PhaseArgs),
    /// Evaluate sufficient sketch-size bounds and print them as JSON
    Bounds(BoundsArgs),
    /// Time randomized recovery against the full-data convex baseline
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    rank: usize,
    /// Per-column outlier probability
    #[arg(long, conflicts_with = "k")]
    rho: Option<f64>,
    /// Exact outlier-column count (alternative to --rho)
    #[arg(long)]
    k: Option<usize>,
    /// Outlier magnitude scale
    #[arg(long, default_value_t = 20.0)]
    amplitude: f64,
    /// Dense-noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// Matrix file format: bin or csv
    #[arg(long, default_value = "bin")]
    format: String,
}

#[derive(Args)]
struct RecoverArgs {
    /// Directory previously written by `generate`
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, conflicts_with = "k")]
    rho: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 20.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Instance seed (self-generated instances only)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// alg1 (independence test) or alg2 (convex decomposition)
    #[arg(long)]
    alg: Algorithm,
    /// red (dense embedding) or rrd (row subsampling)
    #[arg(long)]
    design: Design,
    #[arg(long)]
    m1: usize,
    #[arg(long)]
    m2: usize,
    #[arg(long, default_value_t = 0)]
    plan_seed: u64,
    /// Relative-residual outlier threshold (alg1)
    #[arg(long, default_value_t = alg_independent::DEFAULT_REL_THRESHOLD)]
    threshold: f64,
    /// Relative column-norm threshold on the sparse part (alg2)
    #[arg(long, default_value_t = 1e-4)]
    column_tol: f64,
    /// Convex penalty weight; defaults to the sampled-outlier-count rule
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Exact-recovery tolerance on the subspace error
    #[arg(long, default_value_t = 1e-6)]
    success_tol: f64,
}

#[derive(Args)]
struct PhaseArgs {
    /// Flat `key = value` config file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alg: Option<Algorithm>,
    #[arg(long)]
    design: Option<Design>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, conflicts_with = "k")]
    rho: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// m1 grid: `start:end:step`, comma list, or single value
    #[arg(long)]
    m1: Option<String>,
    /// m2 grid: `start:end:step`, comma list, or single value
    #[arg(long)]
    m2: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Attach the sufficient-size bound at this failure probability
    #[arg(long)]
    overlay_delta: Option<f64>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Numbered guarantee: 1 = alg1/red, 2 = alg1/rrd, 3 = alg2/red,
    /// 4 = alg2/rrd (alternative to --alg + --design)
    #[arg(long)]
    theorem: Option<u8>,
    #[arg(long)]
    alg: Option<Algorithm>,
    #[arg(long)]
    design: Option<Design>,
    #[arg(long = "r")]
    r: usize,
    #[arg(long, default_value_t = 1000)]
    n1: usize,
    #[arg(long, default_value_t = 1000)]
    n2: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long = "mu-v", default_value_t = 1.0)]
    mu_v: f64,
    #[arg(long = "mu-v-prime", default_value_t = 1.0)]
    mu_v_prime: f64,
    #[arg(long = "mu-u", default_value_t = 1.0)]
    mu_u: f64,
    #[arg(long = "eta-v", default_value_t = 1.0)]
    eta_v: f64,
    #[arg(long = "eta-u", default_value_t = 1.0)]
    eta_u: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Sampled-outlier slack constant (default 2)
    #[arg(long)]
    c: Option<f64>,
    /// Convex inlier-margin factor (default: twice its minimum)
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// Also emit the intermediate per-step bound values
    #[arg(long, default_value_t = false)]
    lemmas: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Square sizes to time, e.g. 500,1000,2000
    #[arg(long)]
    sizes: String,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long)]
    m1: usize,
    #[arg(long)]
    m2: usize,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 2400)]
    seed: u64,
    /// Baseline time cap in seconds (censored when hit)
    #[arg(long, default_value_t = BASELINE_CAP.as_secs_f64())]
    cap_seconds: f64,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by both `main` and the CLI tests. Never panics on bad
/// input; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as "errors" but exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_)
                | Error::Format(_)
                | Error::MissingGroundTruth(_)
                | Error::DegenerateInput(_)
                | Error::Io(_) => 1,
                _ => 2,
            }
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate(args) => run_generate(args),
        Cmd::Recover(args) => run_recover(args),
        Cmd::Phase(args) => run_phase(args),
        Cmd::Bounds(args) => run_bounds(args),
        Cmd::Bench(args) => run_bench(args),
    }
}

/// Sidecar describing the files of a stored instance.
#[derive(Serialize, Deserialize)]
struct InstanceManifest {
    n1: usize,
    n2: usize,
    rank: usize,
    k: usize,
    seed: u64,
    outlier_sigma: f64,
    noise_sigma: f64,
    format: String,
    observed: String,
    low_rank: String,
    outliers: String,
    noise: Option<String>,
    outlier_indices: String,
}

fn write_matrix(path: &Path, m: &DenseMatrix, format: &str) -> Result<()> {
    match format {
        "bin" => write_matrix_bin(path, m),
        "csv" => write_matrix_csv(path, m),
        other => Err(Error::InvalidParameter(format!(
            "unknown format {other:?}, expected 'bin' or 'csv'"
        ))),
    }
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let params = InstanceParams {
        n1: args.n1,
        n2: args.n2,
        rank: args.rank,
        outlier_prob: args.rho.unwrap_or(0.0),
        outlier_sigma: args.amplitude,
        noise_sigma: args.noise,
        fixed_k: args.k,
    };
    if args.rho.is_none() && args.k.is_none() {
        return Err(Error::InvalidParameter(
            "one of --rho or --k is required".into(),
        ));
    }
    let instance = params.generate(args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let ext = args.format.as_str();
    let manifest = InstanceManifest {
        n1: args.n1,
        n2: args.n2,
        rank: args.rank,
        k: instance.k().unwrap_or(0),
        seed: args.seed,
        outlier_sigma: args.amplitude,
        noise_sigma: args.noise,
        format: args.format.clone(),
        observed: format!("observed.{ext}"),
        low_rank: format!("low_rank.{ext}"),
        outliers: format!("outliers.{ext}"),
        noise: instance.truth_noise.as_ref().map(|_| format!("noise.{ext}")),
        outlier_indices: "outlier_indices.txt".into(),
    };
    write_matrix(&args.out.join(&manifest.observed), &instance.observed, ext)?;
    write_matrix(
        &args.out.join(&manifest.low_rank),
        instance.truth_low_rank.as_ref().unwrap(),
        ext,
    )?;
    write_matrix(
        &args.out.join(&manifest.outliers),
        instance.truth_outliers.as_ref().unwrap(),
        ext,
    )?;
    if let (Some(name), Some(noise)) = (&manifest.noise, &instance.truth_noise) {
        write_matrix(&args.out.join(name), noise, ext)?;
    }
    write_index_list(
        args.out.join(&manifest.outlier_indices),
        instance.outlier_indices.as_ref().unwrap(),
    )?;
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
    std::fs::write(args.out.join("instance.json"), json)?;
    println!(
        "wrote {}x{} instance (rank {}, {} outlier columns) to {}",
        args.n1,
        args.n2,
        args.rank,
        instance.k().unwrap_or(0),
        args.out.display()
    );
    Ok(())
}

fn load_instance(dir: &Path) -> Result<DataInstance> {
    let manifest_path = dir.join("instance.json");
    let text = std::fs::read_to_string(&manifest_path)?;
    let manifest: InstanceManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
    let observed = read_matrix(dir.join(&manifest.observed))?;
    let truth_low_rank = Some(read_matrix(dir.join(&manifest.low_rank))?);
    let truth_outliers = Some(read_matrix(dir.join(&manifest.outliers))?);
    let truth_noise = match &manifest.noise {
        Some(name) => Some(read_matrix(dir.join(name))?),
        None => None,
    };
    let outlier_indices = Some(read_index_list(dir.join(&manifest.outlier_indices))?);
    let instance = DataInstance {
        observed,
        truth_low_rank,
        truth_outliers,
        truth_noise,
        outlier_indices,
        true_rank: Some(manifest.rank),
    };
    instance.validate()?;
    Ok(instance)
}

/// JSON payload printed by `recover`.
#[derive(Serialize)]
struct RecoverOutput<'a> {
    algorithm: Algorithm,
    design: Design,
    m1: usize,
    m2: usize,
    est_rank: usize,
    outlier_count: usize,
    outlier_indices: &'a [usize],
    /// Present only when the instance carries ground truth.
    verdict: Option<&'a RecoveryVerdict>,
}

fn run_recover(args: RecoverArgs) -> Result<()> {
    let instance = match &args.input {
        Some(dir) => load_instance(dir)?,
        None => {
            let (n1, n2, rank) = match (args.n1, args.n2, args.rank) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(Error::InvalidParameter(
                        "without --input, --n1/--n2/--rank are required".into(),
                    ))
                }
            };
            if args.rho.is_none() && args.k.is_none() {
                return Err(Error::InvalidParameter(
                    "without --input, one of --rho or --k is required".into(),
                ));
            }
            InstanceParams {
                n1,
                n2,
                rank,
                outlier_prob: args.rho.unwrap_or(0.0),
                outlier_sigma: args.amplitude,
                noise_sigma: args.noise,
                fixed_k: args.k,
            }
            .generate(args.seed)?
        }
    };

    let (basis, report) = match args.alg {
        Algorithm::Independence => {
            let plan = SketchPlan::for_alg1(args.m1, args.m2, args.design, args.plan_seed);
            alg_independent::recover_subspace_alg1(
                &instance,
                &plan,
                args.threshold,
                args.rank_tol,
            )?
        }
        Algorithm::Convex => {
            let plan = SketchPlan::for_alg2(args.m1, args.m2, args.design, args.plan_seed);
            let lambda = match args.lambda {
                Some(l) => l,
                None => {
                    let k_est = sampled_outlier_count(&instance, &plan)
                        .unwrap_or(plan.m1)
                        .max(1);
                    alg_convex::default_lambda(k_est)?
                }
            };
            let config = ConvexSolveConfig::new(lambda);
            alg_convex::recover_subspace_alg2(
                &instance,
                &plan,
                &config,
                args.column_tol,
                args.rank_tol,
            )?
        }
    };

    let verdict = if instance.truth_low_rank.is_some() && instance.outlier_indices.is_some() {
        Some(metrics::classify_recovery(
            &instance,
            &basis,
            &report,
            args.success_tol,
        )?)
    } else {
        None
    };
    let indices = report.outlier_indices();
    let output = RecoverOutput {
        algorithm: args.alg,
        design: args.design,
        m1: args.m1,
        m2: args.m2,
        est_rank: basis.est_rank,
        outlier_count: indices.len(),
        outlier_indices: &indices,
        verdict: verdict.as_ref(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&output)
            .map_err(|e| Error::Internal(format!("output serialization: {e}")))?
    );
    Ok(())
}

/// Flag value if present, else the config-file value parsed with `parse`.
fn merged<T>(
    flag: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
    parse: impl FnOnce(&str) -> Result<T>,
) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key).map(|v| parse(v)).transpose(),
    }
}

fn parse_num<T>(key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| {
        Error::InvalidParameter(format!("config key {key}: cannot parse {value:?}: {e}"))
    })
}

fn require<T>(name: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidParameter(format!("missing required parameter {name} (flag or config)"))
    })
}

fn run_phase(args: PhaseArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };
    // Accept hyphenated keys too, matching the flag spellings.
    let normalized: BTreeMap<String, String> = cfg
        .iter()
        .map(|(k, v)| (k.replace('-', "_"), v.clone()))
        .collect();
    cfg = normalized;

    let algorithm = require(
        "--alg",
        merged(args.alg, &cfg, "alg", |v| Algorithm::from_str(v))?,
    )?;
    let design = require(
        "--design",
        merged(args.design, &cfg, "design", |v| Design::from_str(v))?,
    )?;
    let n1 = require("--n1", merged(args.n1, &cfg, "n1", |v| parse_num("n1", v))?)?;
    let n2 = require("--n2", merged(args.n2, &cfg, "n2", |v| parse_num("n2", v))?)?;
    let rank = require("--rank", merged(args.rank, &cfg, "rank", |v| parse_num("rank", v))?)?;
    let rho = merged(args.rho, &cfg, "rho", |v| parse_num("rho", v))?;
    let fixed_k = merged(args.k, &cfg, "k", |v| parse_num("k", v))?;
    if rho.is_none() && fixed_k.is_none() {
        return Err(Error::InvalidParameter(
            "one of --rho or --k is required (flag or config)".into(),
        ));
    }
    let amplitude = merged(args.amplitude, &cfg, "amplitude", |v| parse_num("amplitude", v))?
        .unwrap_or(20.0);
    let noise = merged(args.noise, &cfg, "noise", |v| parse_num("noise", v))?.unwrap_or(0.0);
    let m1_values = require(
        "--m1",
        merged(args.m1, &cfg, "m1", |v| Ok(v.to_string()))?
            .map(|v| parse_count_list(&v))
            .transpose()?,
    )?;
    let m2_values = require(
        "--m2",
        merged(args.m2, &cfg, "m2", |v| Ok(v.to_string()))?
            .map(|v| parse_count_list(&v))
            .transpose()?,
    )?;
    let trials = merged(args.trials, &cfg, "trials", |v| parse_num("trials", v))?.unwrap_or(20);
    let base_seed = merged(args.seed, &cfg, "seed", |v| parse_num("seed", v))?.unwrap_or(0);
    let overlay_delta = merged(args.overlay_delta, &cfg, "overlay_delta", |v| {
        parse_num("overlay_delta", v)
    })?;
    let out = match args.out {
        Some(p) => Some(p),
        None => cfg.get("out").map(PathBuf::from),
    };

    let spec = GridSpec {
        m1_values,
        m2_values,
        trials,
        algorithm,
        design,
        instance: InstanceParams {
            n1,
            n2,
            rank,
            outlier_prob: rho.unwrap_or(0.0),
            outlier_sigma: amplitude,
            noise_sigma: noise,
            fixed_k,
        },
        base_seed,
        overlay_delta,
    };
    let result = run_phase_transition(&spec)?;
    match out {
        Some(path) => result.write_csv(&path)?,
        None => print!("{}", result.to_csv()),
    }
    Ok(())
}

/// Everything `bounds` prints: the resolved inputs, the bound, and
/// optionally the intermediate values along the derivation.
#[derive(Serialize)]
struct BoundsOutput {
    inputs: BoundInputs,
    result: BoundResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemmas: Option<BTreeMap<String, f64>>,
}

fn run_bounds(args: BoundsArgs) -> Result<()> {
    let (algorithm, design) = match (args.theorem, args.alg, args.design) {
        (Some(n), alg, design) => {
            let pair = match n {
                1 => (Algorithm::Independence, Design::Red),
                2 => (Algorithm::Independence, Design::Rrd),
                3 => (Algorithm::Convex, Design::Red),
                4 => (Algorithm::Convex, Design::Rrd),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "--theorem {other} is out of range 1..=4"
                    )))
                }
            };
            if alg.is_some_and(|a| a != pair.0) || design.is_some_and(|d| d != pair.1) {
                return Err(Error::InvalidParameter(
                    "--theorem disagrees with --alg/--design".into(),
                ));
            }
            pair
        }
        (None, Some(alg), Some(design)) => (alg, design),
        _ => {
            return Err(Error::InvalidParameter(
                "select a bound with --theorem N or with --alg and --design".into(),
            ))
        }
    };

    let coherence = CoherenceStats {
        mu_v: args.mu_v,
        mu_v_prime: args.mu_v_prime,
        mu_u: args.mu_u,
        eta_v: args.eta_v,
        eta_u: args.eta_u,
        gamma: args.gamma,
        rank_used: args.r,
    };
    let mut inputs = BoundInputs::new(args.r, args.n1, args.n2, args.k, coherence, args.delta)?;
    if let Some(c) = args.c {
        inputs.c = c;
    }
    if let Some(g) = args.g {
        inputs.g = g;
    }
    if let Some(c1) = args.c1 {
        inputs.c1 = c1;
    }
    if let Some(c2) = args.c2 {
        inputs.c2 = c2;
    }

    let result = match (algorithm, design) {
        (Algorithm::Independence, Design::Red) => bounds::bound_alg1_red(&inputs)?,
        (Algorithm::Independence, Design::Rrd) => bounds::bound_alg1_rrd(&inputs)?,
        (Algorithm::Convex, Design::Red) => bounds::bound_alg2_red(&inputs)?,
        (Algorithm::Convex, Design::Rrd) => bounds::bound_alg2_rrd(&inputs)?,
    };
    let lemmas = if args.lemmas {
        Some(bounds::bound_lemmas(&inputs)?)
    } else {
        None
    };
    let output = BoundsOutput {
        inputs,
        result,
        lemmas,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&output)
            .map_err(|e| Error::Internal(format!("output serialization: {e}")))?
    );
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let sizes = parse_count_list(&args.sizes)?;
    if args.cap_seconds <= 0.0 {
        return Err(Error::InvalidParameter(
            "--cap-seconds must be positive".into(),
        ));
    }
    let table = run_baseline_comparison_with(
        &sizes,
        args.rank,
        args.rho,
        args.m1,
        args.m2,
        args.trials,
        args.seed,
        Duration::from_secs_f64(args.cap_seconds),
    )?;
    match args.out {
        Some(path) => std::fs::write(path, table.to_csv())?,
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}
