//! Convex decomposition of a matrix into a low-rank part plus a
//! column-sparse part by minimizing `||L||_* + lambda * ||C||_{1,2}`
//! subject to `L + C = D` (or, for noisy data, `||L + C - D||_F <= eps`).
//! Both proximal maps are closed-form — singular-value soft-thresholding
//! for the nuclear norm, column-wise soft-thresholding for the column-norm
//! sum — so the program is solved by alternating-direction splitting on the
//! equality constraint. Outlying columns land in the column-sparse part.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matstore::{DataInstance, DenseMatrix};
use crate::metrics::{self, OutlierReport};
use crate::sketch::{self, SketchPlan};
use crate::alg_independent::{self, SubspaceBasis};

/// Default relative column-norm cutoff above which a column of the
/// recovered column-sparse part counts as an outlier.
pub const DEFAULT_COLUMN_NORM_TOL: f64 = 1e-4;

/// Weight rule for the column-sparse penalty: `3 / (7 sqrt(k_estimate))`,
/// where `k_estimate` guesses the number of outlying columns in the matrix
/// being decomposed. When nothing is known, the column count itself is the
/// conservative fallback.
pub fn default_lambda(k_estimate: usize) -> Result<f64> {
    if k_estimate == 0 {
        return Err(Error::InvalidParameter(
            "outlier-count estimate must be at least 1".into(),
        ));
    }
    Ok(3.0 / (7.0 * (k_estimate as f64).sqrt()))
}

/// Solver configuration. `new` fills in the documented defaults; fields are
/// public for adjustment.
#[derive(Clone, Copy, Debug)]
pub struct ConvexSolveConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the relative constraint violation falls below this.
    pub primal_tol: f64,
    /// ... and the relative change-of-iterate (dual residual) below this.
    pub dual_tol: f64,
    /// Augmented-Lagrangian penalty weight.
    pub penalty: f64,
    /// Rebalance the penalty by a factor of 2 whenever one residual runs
    /// more than 10x ahead of the other.
    pub penalty_adapt: bool,
    /// Frobenius radius of the constraint ball for noisy data; `None` for
    /// the exact-constraint program.
    pub noise_epsilon: Option<f64>,
    /// Optional wall-clock budget; exceeding it is reported as a
    /// convergence failure carrying the partial iterate.
    pub time_limit: Option<Duration>,
}

impl ConvexSolveConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iters: 5000,
            primal_tol: 1e-7,
            dual_tol: 1e-7,
            penalty: 1.0,
            penalty_adapt: true,
            noise_epsilon: None,
            time_limit: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(
                "penalty weight lambda must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if self.primal_tol <= 0.0 || self.dual_tol <= 0.0 {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.penalty <= 0.0 {
            return Err(Error::InvalidParameter("penalty must be positive".into()));
        }
        if self.noise_epsilon.is_some_and(|e| !(e >= 0.0)) {
            return Err(Error::InvalidParameter(
                "noise radius must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a decomposition. The objective is recomputed from the returned
/// factors (fresh singular values), not carried over from solver state.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub low_rank: DenseMatrix,
    pub column_sparse: DenseMatrix,
    pub iterations: usize,
    /// Relative Frobenius constraint violation at exit.
    pub final_primal_residual: f64,
    /// Relative Frobenius change of the column-sparse iterate at exit.
    pub final_dual_residual: f64,
    /// `||L||_* + lambda * sum_j ||C_j||_2` at the returned point.
    pub objective: f64,
    /// Lagrange multiplier at exit (negated, it certifies optimality).
    pub dual: DenseMatrix,
    /// Per-iteration merit `rho * (||r||_F^2 + ||C - C_prev||_F^2)`; with a
    /// fixed penalty this sequence is non-increasing, which makes a cheap
    /// sanity check on the splitting.
    pub merit_history: Vec<f64>,
}

/// Singular-value soft-thresholding: shrink every singular value by `tau`,
/// dropping those that hit zero.
fn svt(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (u, sigma, v_t) = linalg::thin_svd(a);
    let kept: Vec<(usize, f64)> = sigma
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| (s > tau).then_some((i, s - tau)))
        .collect();
    if kept.is_empty() {
        return DMatrix::zeros(a.nrows(), a.ncols());
    }
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, s) in kept {
        // Rank-one accumulation of u_i * s * v_i^T.
        let ui = u.column(i);
        let vi = v_t.row(i);
        for c in 0..a.ncols() {
            let w = s * vi[c];
            for r in 0..a.nrows() {
                out[(r, c)] += ui[r] * w;
            }
        }
    }
    out
}

/// Column-wise soft-thresholding: scale each column toward zero by `tau` in
/// norm, zeroing columns shorter than `tau`.
fn column_soft_threshold(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for mut col in out.column_iter_mut() {
        let nrm = col.norm();
        if nrm <= tau {
            col.fill(0.0);
        } else {
            col *= 1.0 - tau / nrm;
        }
    }
    out
}

fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    linalg::singular_values(a).iter().sum()
}

fn l12_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.norm()).sum()
}

/// Splitting loop shared by the exact and noisy variants. For the noisy
/// program a slack block `E` with `||E||_F <= eps` joins the constraint
/// (`L + C + E = D`); its update is a Frobenius-ball projection. With
/// `eps = 0` the slack stays identically zero and the iteration is exactly
/// the two-block exact-constraint one.
fn solve(matrix: &DenseMatrix, config: &ConvexSolveConfig, eps: f64) -> Result<Decomposition> {
    config.validate()?;
    let d = matrix.to_na();
    let (m, n) = (d.nrows(), d.ncols());
    let scale = matrix.frobenius_norm().max(f64::MIN_POSITIVE);
    let start = Instant::now();

    let mut rho = config.penalty;
    let mut l = DMatrix::<f64>::zeros(m, n);
    let mut c = DMatrix::<f64>::zeros(m, n);
    let mut e = DMatrix::<f64>::zeros(m, n);
    let mut y = DMatrix::<f64>::zeros(m, n);
    let mut merit_history = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for k in 1..=config.max_iters {
        iterations = k;
        l = svt(&(&d - &c - &e - &y / rho), 1.0 / rho);
        let c_prev = c;
        c = column_soft_threshold(&(&d - &l - &e - &y / rho), config.lambda / rho);
        if eps > 0.0 {
            e = &d - &l - &c - &y / rho;
            let en = e.norm();
            if en > eps {
                e *= eps / en;
            }
        }
        let r = &l + &c + &e - &d;
        y += rho * &r;

        let r_norm = r.norm();
        let c_step = (&c - &c_prev).norm();
        primal = r_norm / scale;
        dual = rho * c_step / scale;
        merit_history.push(rho * (r_norm * r_norm + c_step * c_step));

        if primal < config.primal_tol && dual < config.dual_tol {
            converged = true;
            break;
        }
        if config.penalty_adapt {
            if primal > 10.0 * dual {
                rho *= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
            }
        }
        if config
            .time_limit
            .is_some_and(|limit| start.elapsed() > limit)
        {
            let partial = finish(config.lambda, &l, &c, &y, iterations, primal, dual, merit_history);
            return Err(Error::Convergence {
                context: "convex decomposition (time limit)",
                iterations,
                residual: primal,
                partial: Some(Box::new(partial)),
            });
        }
    }
    let decomp = finish(config.lambda, &l, &c, &y, iterations, primal, dual, merit_history);
    if !converged {
        return Err(Error::Convergence {
            context: "convex decomposition",
            iterations,
            residual: primal,
            partial: Some(Box::new(decomp)),
        });
    }
    Ok(decomp)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    lambda: f64,
    l: &DMatrix<f64>,
    c: &DMatrix<f64>,
    y: &DMatrix<f64>,
    iterations: usize,
    primal: f64,
    dual: f64,
    merit_history: Vec<f64>,
) -> Decomposition {
    Decomposition {
        objective: nuclear_norm(l) + lambda * l12_norm(c),
        low_rank: DenseMatrix::from_na(l),
        column_sparse: DenseMatrix::from_na(c),
        iterations,
        final_primal_residual: primal,
        final_dual_residual: dual,
        dual: DenseMatrix::from_na(y),
        merit_history,
    }
}

/// Decomposes under the exact constraint `L + C = D`. Fails with a
/// convergence error (carrying the partial iterate) if the residuals do not
/// both drop below their tolerances within the budget. `config.noise_epsilon`
/// must be unset; use [`decompose_noisy`] for the ball constraint.
pub fn decompose(matrix: &DenseMatrix, config: &ConvexSolveConfig) -> Result<Decomposition> {
    if config.noise_epsilon.is_some() {
        return Err(Error::InvalidParameter(
            "noise_epsilon is set; call decompose_noisy".into(),
        ));
    }
    solve(matrix, config, 0.0)
}

/// Decomposes under the relaxed constraint `||L + C - D||_F <= eps`. With
/// `eps = 0` this reduces exactly to [`decompose`]; with `eps >= ||D||_F`
/// the all-zero pair is optimal.
pub fn decompose_noisy(matrix: &DenseMatrix, config: &ConvexSolveConfig) -> Result<Decomposition> {
    let eps = config.noise_epsilon.ok_or_else(|| {
        Error::InvalidParameter("decompose_noisy requires noise_epsilon".into())
    })?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(
            "noise radius must be finite and nonnegative".into(),
        ));
    }
    solve(matrix, config, eps)
}

/// First-order optimality diagnostics for a decomposition: how close the
/// (negated) multiplier comes to lying in both subdifferentials at once.
/// All quantities are violations — at a true optimum every field is ~0.
#[derive(Clone, Debug)]
pub struct OptimalityCertificate {
    /// `max |U^T G V - I|` over entries: G must act as the identity between
    /// the low-rank part's singular subspaces.
    pub alignment_gap: f64,
    /// Spectral norm of the cross blocks `U^T G (I - V V^T)` and
    /// `(I - U U^T) G V`, which must vanish.
    pub cross_leakage: f64,
    /// `max(0, ||(I-UU^T) G (I-VV^T)||_2 - 1)`: the complement block may not
    /// exceed unit spectral norm.
    pub spectral_excess: f64,
    /// `max(0, max_j ||G_j|| / lambda - 1)` over zero columns of C.
    pub zero_column_excess: f64,
    /// `max_j ||G_j - lambda C_j / ||C_j|| || / lambda` over nonzero columns.
    pub nonzero_column_misalignment: f64,
    /// Primal objective minus the dual value of the feasibility-scaled
    /// multiplier — an upper bound on the true optimality gap.
    pub duality_gap_bound: f64,
    /// Maximum of the five violation fields.
    pub max_violation: f64,
}

/// Checks the returned decomposition against the first-order optimality
/// conditions of the exact-constraint program on `matrix`. `rank_tol`
/// controls which singular values of the low-rank part count as nonzero.
pub fn optimality_certificate(
    matrix: &DenseMatrix,
    decomp: &Decomposition,
    lambda: f64,
    rank_tol: f64,
) -> OptimalityCertificate {
    let g = -decomp.dual.to_na();
    let l = decomp.low_rank.to_na();
    let c = decomp.column_sparse.to_na();
    let d = matrix.to_na();
    let n = l.ncols();

    let (u, sigma, v_t) = linalg::thin_svd(&l);
    let rank = linalg::rank_from_singular_values(&sigma, rank_tol);
    let (alignment_gap, cross_leakage, spectral_excess) = if rank == 0 {
        (0.0, 0.0, (linalg::spectral_norm(&g) - 1.0).max(0.0))
    } else {
        let ur = u.columns(0, rank).into_owned();
        let vr = v_t.rows(0, rank).transpose().into_owned();
        let core = ur.transpose() * &g * &vr;
        let mut gap = 0.0f64;
        for i in 0..rank {
            for j in 0..rank {
                let target = if i == j { 1.0 } else { 0.0 };
                gap = gap.max((core[(i, j)] - target).abs());
            }
        }
        let gv = &g * &vr;
        let utg = ur.transpose() * &g;
        let cross_a = &utg - &core * vr.transpose(); // U^T G (I - V V^T)
        let cross_b = &gv - &ur * &core; // (I - U U^T) G V
        let leak = linalg::spectral_norm(&cross_a).max(linalg::spectral_norm(&cross_b));
        let complement = &g - &ur * &utg - &gv * vr.transpose() + &ur * &core * vr.transpose();
        let excess = (linalg::spectral_norm(&complement) - 1.0).max(0.0);
        (gap, leak, excess)
    };

    let mut zero_excess = 0.0f64;
    let mut misalign = 0.0f64;
    for j in 0..n {
        let cj = c.column(j);
        let gj = g.column(j);
        let cn = cj.norm();
        if cn == 0.0 {
            zero_excess = zero_excess.max((gj.norm() / lambda - 1.0).max(0.0));
        } else {
            let diff = gj - (lambda / cn) * cj;
            misalign = misalign.max(diff.norm() / lambda);
        }
    }

    let primal = nuclear_norm(&l) + lambda * l12_norm(&c);
    let col_scale = (0..n)
        .map(|j| g.column(j).norm() / lambda)
        .fold(0.0f64, f64::max);
    let feas_scale = linalg::spectral_norm(&g).max(col_scale).max(1.0);
    let dual_value = (g.transpose() * &d).trace() / feas_scale;
    let duality_gap_bound = primal - dual_value;

    let max_violation = alignment_gap
        .max(cross_leakage)
        .max(spectral_excess)
        .max(zero_excess)
        .max(misalign);
    OptimalityCertificate {
        alignment_gap,
        cross_leakage,
        spectral_excess,
        zero_column_excess: zero_excess,
        nonzero_column_misalignment: misalign,
        duality_gap_bound,
        max_violation,
    }
}

/// End-to-end convex pipeline: sketch, decompose the compressed sketch,
/// take columns whose column-sparse share exceeds `column_norm_tol`
/// (relative to the column's norm) as outliers, build the basis from the
/// rest, then score all original columns against it. The solver's lambda
/// should already be set (e.g. via [`default_lambda`]).
pub fn recover_subspace_alg2(
    instance: &DataInstance,
    plan: &SketchPlan,
    config: &ConvexSolveConfig,
    column_norm_tol: f64,
    rank_tol: f64,
) -> Result<(SubspaceBasis, OutlierReport)> {
    let sk = sketch::build_sketch(instance, plan)?;
    let decomp = match config.noise_epsilon {
        Some(_) => decompose_noisy(&sk.compressed, config)?,
        None => decompose(&sk.compressed, config)?,
    };
    let mut inlier_mask = Vec::with_capacity(sk.effective_m1);
    let mut min_rel = f64::INFINITY;
    for j in 0..sk.effective_m1 {
        let data_norm = sk.compressed.column_norm(j);
        let rel = if data_norm == 0.0 {
            0.0
        } else {
            decomp.column_sparse.column_norm(j) / data_norm
        };
        min_rel = min_rel.min(rel);
        inlier_mask.push(rel <= column_norm_tol);
    }
    if !inlier_mask.iter().any(|&m| m) {
        return Err(Error::NoInliersDetected {
            effective_m1: sk.effective_m1,
            min_relative: min_rel,
        });
    }
    let basis = alg_independent::learn_basis(&sk, &inlier_mask, rank_tol)?;
    let report = metrics::detect_outliers_full(
        &instance.observed,
        &basis,
        Some(&sk.row_operator),
        column_norm_tol,
    )?;
    Ok((basis, report))
}
