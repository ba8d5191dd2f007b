//! Monte-Carlo phase-transition grids over the sketch sizes `(m1, m2)`:
//! for every grid cell, generate fresh instances, run the selected recovery
//! pipeline, and aggregate exact-recovery rates.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use rrsr_core::alg_convex::{self, ConvexSolveConfig};
use rrsr_core::alg_independent::{self, DEFAULT_RANK_TOL, DEFAULT_REL_THRESHOLD};
use rrsr_core::bounds::{self, Algorithm, BoundInputs, BoundResult};
use rrsr_core::matstore::{self, derive_seed, estimate_coherence};
use rrsr_core::metrics;
use rrsr_core::sketch::{self, Design, SketchPlan};
use rrsr_core::{DataInstance, Error, Result};

/// Generator parameters shared by every trial of a grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InstanceParams {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    /// Per-column outlier probability; ignored when `fixed_k` is set.
    pub outlier_prob: f64,
    pub outlier_sigma: f64,
    pub noise_sigma: f64,
    /// Draw exactly this many outlier columns instead of Bernoulli draws.
    pub fixed_k: Option<usize>,
}

impl InstanceParams {
    pub fn new(n1: usize, n2: usize, rank: usize, outlier_prob: f64) -> Self {
        Self {
            n1,
            n2,
            rank,
            outlier_prob,
            outlier_sigma: 20.0,
            noise_sigma: 0.0,
            fixed_k: None,
        }
    }

    /// Generates one instance; pure function of the seed.
    pub fn generate(&self, seed: u64) -> Result<DataInstance> {
        match self.fixed_k {
            Some(k) => matstore::generate_synthetic_fixed_k(
                self.n1,
                self.n2,
                self.rank,
                k,
                self.outlier_sigma,
                self.noise_sigma,
                seed,
            ),
            None => matstore::generate_synthetic(
                self.n1,
                self.n2,
                self.rank,
                self.outlier_prob,
                self.outlier_sigma,
                self.noise_sigma,
                seed,
            ),
        }
    }
}

/// A full phase-transition experiment: the `(m1, m2)` grid, the trial
/// count, which pipeline and sketch design to run, and the seed that makes
/// the whole grid reproducible.
#[derive(Clone, Debug, Serialize)]
pub struct GridSpec {
    pub m1_values: Vec<usize>,
    pub m2_values: Vec<usize>,
    pub trials: usize,
    pub algorithm: Algorithm,
    pub design: Design,
    pub instance: InstanceParams,
    pub base_seed: u64,
    /// When set, a sufficient-size bound for the grid's parameters is
    /// evaluated at this failure probability (coherence measured on a probe
    /// instance) and attached to the result as an overlay.
    pub overlay_delta: Option<f64>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter(
                "grids need at least one trial per cell".into(),
            ));
        }
        for (name, axis) in [("m1", &self.m1_values), ("m2", &self.m2_values)] {
            if axis.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "{name} axis must not be empty"
                )));
            }
            if !axis.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} axis must be strictly increasing, got {axis:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Aggregated grid outcome. All matrices are indexed `[m1 index][m2 index]`
/// and dimension-consistent with the spec. The runtime matrix is wall-clock
/// and therefore excluded from the determinism contract; everything else is
/// a pure function of the spec.
#[derive(Clone, Debug, Serialize)]
pub struct GridResult {
    /// Full provenance: the spec that produced this result.
    pub spec: GridSpec,
    /// Fraction of trials with exact recovery, in `[0, 1]`.
    pub success_rate: Vec<Vec<f64>>,
    /// Mean subspace error over trials; failed trials count as 1 (the
    /// largest possible distance).
    pub mean_subspace_error: Vec<Vec<f64>>,
    /// Mean wall-clock seconds per trial (recovery only, not generation).
    pub mean_runtime_seconds: Vec<Vec<f64>>,
    /// Sufficient-size bound evaluated at the grid's parameters, when
    /// requested via `overlay_delta`.
    pub bound_overlay: Option<BoundResult>,
}

/// Outcome of a single recovery trial.
struct TrialOutcome {
    exact: bool,
    subspace_error: f64,
    seconds: f64,
}

/// Runs one end-to-end trial: fresh instance, sketch plan, recovery,
/// classification. Any pipeline error is an honest non-success.
fn run_trial(spec: &GridSpec, m1: usize, m2: usize, trial_seed: u64) -> Result<TrialOutcome> {
    // Generation failures are parameter problems, not trial noise: let them
    // abort the grid rather than masquerade as recovery failures.
    let instance = spec.instance.generate(derive_seed(trial_seed, 1))?;
    let plan_seed = derive_seed(trial_seed, 2);
    let started = Instant::now();
    let recovered = match spec.algorithm {
        Algorithm::Independence => {
            let plan = SketchPlan::for_alg1(m1, m2, spec.design, plan_seed);
            alg_independent::recover_subspace_alg1(
                &instance,
                &plan,
                DEFAULT_REL_THRESHOLD,
                DEFAULT_RANK_TOL,
            )
        }
        Algorithm::Convex => {
            let plan = SketchPlan::for_alg2(m1, m2, spec.design, plan_seed);
            let k_est = sampled_outlier_count(&instance, &plan)
                .unwrap_or(plan.m1)
                .max(1);
            let lambda = alg_convex::default_lambda(k_est)?;
            let config = ConvexSolveConfig::new(lambda);
            alg_convex::recover_subspace_alg2(&instance, &plan, &config, 1e-4, DEFAULT_RANK_TOL)
        }
    };
    let verdict = recovered.and_then(|(basis, report)| {
        metrics::classify_recovery(&instance, &basis, &report, 1e-6)
    });
    let seconds = started.elapsed().as_secs_f64();
    Ok(match verdict {
        Ok(v) => TrialOutcome {
            exact: v.exact,
            subspace_error: v.subspace_error.min(1.0),
            seconds,
        },
        Err(_) => TrialOutcome {
            exact: false,
            subspace_error: 1.0,
            seconds,
        },
    })
}

/// Counts how many of the columns the plan will sample are ground-truth
/// outliers, by replaying the plan's column draw. Used to hand the convex
/// pipeline the true sampled-outlier count for its penalty weight.
pub fn sampled_outlier_count(instance: &DataInstance, plan: &SketchPlan) -> Option<usize> {
    let truth = instance.outlier_indices.as_ref()?;
    let (_, cols) = sketch::sample_columns(
        &instance.observed,
        plan.m1,
        plan.column_replacement,
        plan.dedupe,
        derive_seed(plan.seed, 1),
    )
    .ok()?;
    Some(cols.iter().filter(|c| truth.binary_search(c).is_ok()).count())
}

/// Evaluates the sufficient-size bound matching the spec's pipeline and
/// design, with coherence measured on a probe instance drawn from the
/// spec's own generator. Returns `None` when the parameters fall outside
/// the bound's validity region instead of failing the grid.
fn bound_overlay(spec: &GridSpec, delta: f64) -> Option<BoundResult> {
    let probe = spec.instance.generate(derive_seed(spec.base_seed, 0xb0)).ok()?;
    let low = probe.truth_low_rank.as_ref()?;
    let coherence = estimate_coherence(low, 1e-9).ok()?;
    let inputs = BoundInputs::new(
        spec.instance.rank,
        spec.instance.n1,
        spec.instance.n2,
        probe.k()?,
        coherence,
        delta,
    )
    .ok()?;
    let result = match (spec.algorithm, spec.design) {
        (Algorithm::Independence, Design::Red) => bounds::bound_alg1_red(&inputs),
        (Algorithm::Independence, Design::Rrd) => bounds::bound_alg1_rrd(&inputs),
        (Algorithm::Convex, Design::Red) => bounds::bound_alg2_red(&inputs),
        (Algorithm::Convex, Design::Rrd) => bounds::bound_alg2_rrd(&inputs),
    };
    result.ok()
}

/// Runs the whole grid: `trials` independent trials per `(m1, m2)` cell,
/// each with a fresh instance and sketch, aggregated into success rates.
/// Deterministic for a fixed spec (runtimes aside); trials run in parallel.
pub fn run_phase_transition(spec: &GridSpec) -> Result<GridResult> {
    spec.validate()?;
    let n_m1 = spec.m1_values.len();
    let n_m2 = spec.m2_values.len();
    let cells: Vec<(usize, usize)> =
        (0..n_m1).flat_map(|i| (0..n_m2).map(move |j| (i, j))).collect();

    // One task per (cell, trial); the seed depends only on the cell's grid
    // position and the trial index, so cells are independent and the whole
    // grid is reproducible from base_seed.
    let tasks: Vec<(usize, usize, usize)> = cells
        .iter()
        .flat_map(|&(i, j)| (0..spec.trials).map(move |t| (i, j, t)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome>> = tasks
        .par_iter()
        .map(|&(i, j, t)| {
            let cell_seed = derive_seed(spec.base_seed, (i * n_m2 + j) as u64);
            run_trial(
                spec,
                spec.m1_values[i],
                spec.m2_values[j],
                derive_seed(cell_seed, t as u64),
            )
        })
        .collect();

    let mut success = vec![vec![0.0; n_m2]; n_m1];
    let mut error = vec![vec![0.0; n_m2]; n_m1];
    let mut runtime = vec![vec![0.0; n_m2]; n_m1];
    for (&(i, j, _), outcome) in tasks.iter().zip(outcomes) {
        let o = outcome?;
        success[i][j] += if o.exact { 1.0 } else { 0.0 };
        error[i][j] += o.subspace_error;
        runtime[i][j] += o.seconds;
    }
    let t = spec.trials as f64;
    for m in [&mut success, &mut error, &mut runtime] {
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v /= t;
            }
        }
    }

    Ok(GridResult {
        bound_overlay: spec.overlay_delta.and_then(|d| bound_overlay(spec, d)),
        spec: spec.clone(),
        success_rate: success,
        mean_subspace_error: error,
        mean_runtime_seconds: runtime,
    })
}

impl GridResult {
    /// Success rate at a grid point, if it is on the grid.
    pub fn success_at(&self, m1: usize, m2: usize) -> Option<f64> {
        let i = self.spec.m1_values.iter().position(|&v| v == m1)?;
        let j = self.spec.m2_values.iter().position(|&v| v == m2)?;
        Some(self.success_rate[i][j])
    }

    /// Renders the grid as CSV: a `#`-commented provenance preamble, the
    /// header `m1,m2,success_rate,mean_error,mean_runtime`, then one row
    /// per cell in row-major (m1-outer) order. Every column except
    /// `mean_runtime` is deterministic for a fixed spec.
    pub fn to_csv(&self) -> String {
        let p = &self.spec.instance;
        let mut out = String::new();
        out.push_str("# phase-transition grid\n");
        out.push_str(&format!("# algorithm = {}\n", self.spec.algorithm));
        out.push_str(&format!("# design = {}\n", self.spec.design));
        out.push_str(&format!("# n1 = {}\n# n2 = {}\n# rank = {}\n", p.n1, p.n2, p.rank));
        match p.fixed_k {
            Some(k) => out.push_str(&format!("# fixed_k = {k}\n")),
            None => out.push_str(&format!("# outlier_prob = {}\n", p.outlier_prob)),
        }
        out.push_str(&format!(
            "# outlier_sigma = {}\n# noise_sigma = {}\n",
            p.outlier_sigma, p.noise_sigma
        ));
        out.push_str(&format!(
            "# trials = {}\n# base_seed = {}\n",
            self.spec.trials, self.spec.base_seed
        ));
        if let Some(b) = &self.bound_overlay {
            out.push_str(&format!(
                "# bound_m1_sufficient = {}\n# bound_m2_sufficient = {}\n",
                b.m1_sufficient, b.m2_sufficient
            ));
        }
        out.push_str("# mean_runtime is wall-clock seconds and not reproducible\n");
        out.push_str("m1,m2,success_rate,mean_error,mean_runtime\n");
        for (i, &m1) in self.spec.m1_values.iter().enumerate() {
            for (j, &m2) in self.spec.m2_values.iter().enumerate() {
                out.push_str(&format!(
                    "{m1},{m2},{:.6},{:.6e},{:.6e}\n",
                    self.success_rate[i][j],
                    self.mean_subspace_error[i][j],
                    self.mean_runtime_seconds[i][j],
                ));
            }
        }
        out
    }

    /// Writes [`Self::to_csv`] to a file.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
