//! Wall-clock comparison of the randomized pipeline against the full-data
//! convex decomposition it replaces. Reports medians and speedup ratios;
//! absolute seconds are hardware-dependent and only the ratios are
//! meaningful experiment outputs.

use std::time::{Duration, Instant};

use serde::Serialize;

use rrsr_core::alg_convex::{self, ConvexSolveConfig};
use rrsr_core::alg_independent::DEFAULT_RANK_TOL;
use rrsr_core::matstore::{self, derive_seed};
use rrsr_core::sketch::{Design, SketchPlan};
use rrsr_core::{Error, Result};

use crate::grid::sampled_outlier_count;

/// Cap on each full-data baseline solve; runs that hit it are recorded as
/// censored, making the reported speedup a lower bound.
pub const BASELINE_CAP: Duration = Duration::from_secs(600);

const DEFAULT_BASE_SEED: u64 = 2400;

/// One matrix size's timing outcome.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimingRow {
    /// Square instance size (`n1 = n2 = n`).
    pub n: usize,
    /// Median seconds for the randomized pipeline (sketch, convex solve on
    /// the sketch, full-data outlier detection).
    pub randomized_seconds: f64,
    /// Median seconds for the full-data convex decomposition.
    pub baseline_seconds: f64,
    /// `baseline_seconds / randomized_seconds`; a lower bound when the
    /// baseline was censored.
    pub speedup: f64,
    /// True when any baseline trial hit the time cap.
    pub baseline_censored: bool,
}

/// Timing rows plus the parameters that produced them.
#[derive(Clone, Debug, Serialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
    pub rank: usize,
    pub outlier_prob: f64,
    pub m1: usize,
    pub m2: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub cap_seconds: f64,
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Times randomized recovery vs. the full-data decomposition on square
/// `n x n` instances for each `n` in `sizes`, with `trials` repetitions
/// per size. Baseline solves are capped at 600 s and recorded as censored
/// when they hit the cap. Timing runs execute serially to avoid
/// contention skew.
pub fn run_baseline_comparison(
    sizes: &[usize],
    r: usize,
    rho: f64,
    m1: usize,
    m2: usize,
    trials: usize,
) -> Result<TimingTable> {
    run_baseline_comparison_with(sizes, r, rho, m1, m2, trials, DEFAULT_BASE_SEED, BASELINE_CAP)
}

/// [`run_baseline_comparison`] with an explicit seed and baseline cap.
#[allow(clippy::too_many_arguments)]
pub fn run_baseline_comparison_with(
    sizes: &[usize],
    r: usize,
    rho: f64,
    m1: usize,
    m2: usize,
    trials: usize,
    base_seed: u64,
    cap: Duration,
) -> Result<TimingTable> {
    if sizes.is_empty() || trials == 0 {
        return Err(Error::InvalidParameter(
            "timing runs need at least one size and one trial".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (si, &n) in sizes.iter().enumerate() {
        let mut randomized = Vec::with_capacity(trials);
        let mut baseline = Vec::with_capacity(trials);
        let mut censored = false;
        for t in 0..trials {
            let seed = derive_seed(base_seed, (si * trials + t) as u64);
            let instance =
                matstore::generate_synthetic(n, n, r, rho, 20.0, 0.0, derive_seed(seed, 1))?;

            let plan = SketchPlan::for_alg2(m1, m2, Design::Red, derive_seed(seed, 2));
            let k_sampled = sampled_outlier_count(&instance, &plan).unwrap_or(m1).max(1);
            let config = ConvexSolveConfig::new(alg_convex::default_lambda(k_sampled)?);
            let started = Instant::now();
            // A trial that recovers nothing still did the full sketch,
            // solve, and detection work: its wall time is a valid sample.
            // Only parameter errors abort the table.
            match alg_convex::recover_subspace_alg2(&instance, &plan, &config, 1e-4, DEFAULT_RANK_TOL)
            {
                Ok(_) => {}
                Err(e @ Error::InvalidParameter(_)) => return Err(e),
                Err(_) => {}
            }
            randomized.push(started.elapsed().as_secs_f64());

            let k_true = instance.k().unwrap_or(0).max(1);
            let mut full_config = ConvexSolveConfig::new(alg_convex::default_lambda(k_true)?);
            full_config.time_limit = Some(cap);
            let started = Instant::now();
            match alg_convex::decompose(&instance.observed, &full_config) {
                Ok(_) => {}
                Err(Error::Convergence { context, .. }) if context.contains("time limit") => {
                    censored = true;
                }
                Err(e) => return Err(e),
            }
            baseline.push(started.elapsed().as_secs_f64());
        }
        let randomized_seconds = median(&mut randomized);
        let baseline_seconds = median(&mut baseline);
        rows.push(TimingRow {
            n,
            randomized_seconds,
            baseline_seconds,
            speedup: baseline_seconds / randomized_seconds,
            baseline_censored: censored,
        });
    }
    Ok(TimingTable {
        rows,
        rank: r,
        outlier_prob: rho,
        m1,
        m2,
        trials,
        base_seed,
        cap_seconds: cap.as_secs_f64(),
    })
}

impl TimingTable {
    /// CSV rendering with a `#` provenance preamble. All columns are
    /// wall-clock derived and therefore not byte-reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# randomized-vs-full-data timing\n");
        out.push_str(&format!(
            "# rank = {}\n# outlier_prob = {}\n# m1 = {}\n# m2 = {}\n",
            self.rank, self.outlier_prob, self.m1, self.m2
        ));
        out.push_str(&format!(
            "# trials = {}\n# base_seed = {}\n# baseline_cap_seconds = {}\n",
            self.trials, self.base_seed, self.cap_seconds
        ));
        out.push_str("n,randomized_seconds,baseline_seconds,speedup,baseline_censored\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.3},{}\n",
                row.n,
                row.randomized_seconds,
                row.baseline_seconds,
                row.speedup,
                row.baseline_censored
            ));
        }
        out
    }
}
