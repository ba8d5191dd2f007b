//! Outlier identification through linear independence: a sampled column is
//! an inlier exactly when its compressed version can be written as a
//! combination of the other compressed columns, so the minimum least-squares
//! residual of that regression separates inliers (residual 0) from outliers
//! (residual bounded away from 0). A basis is then read off the surviving
//! unsketched columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Cpqr};
use crate::matstore::{DataInstance, DenseMatrix};
use crate::metrics::{self, DetectionSpace, OutlierReport};
use crate::sketch::{self, Sketch, SketchPlan};

/// Default relative-residual threshold separating inliers from outliers on
/// noiseless data.
pub const DEFAULT_REL_THRESHOLD: f64 = 1e-6;
/// Default relative cutoff below which singular values count as zero when
/// estimating the subspace rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Rank cutoff for the leave-one-out regressor blocks, sized to sit far
/// above floating-point residue (~1e-15 relative) and far below the
/// smallest direction weight that matters at [`DEFAULT_REL_THRESHOLD`].
const LOO_RANK_TOL: f64 = 1e-10;

/// Per-column residuals of the leave-one-out regressions on the compressed
/// sketch, both absolute and relative to each column's norm.
#[derive(Clone, Debug)]
pub struct ResidualProfile {
    pub residuals: Vec<f64>,
    pub relative: Vec<f64>,
    pub threshold_used: f64,
}

/// A basis for the recovered column subspace: `basis` holds actual data
/// columns (unsketched), `orthonormal` their orthonormalized form, and
/// `source_indices` where each basis column came from in the original
/// matrix.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub basis: DenseMatrix,
    pub orthonormal: DenseMatrix,
    pub est_rank: usize,
    pub source_indices: Vec<usize>,
}

/// The compressed sketch reduced to coordinates in an orthonormal basis of
/// its own column span. All leave-one-out least-squares problems are then
/// solved in this `rank`-dimensional space, which costs
/// `O(rank^2 * m1')` per column instead of `O(m2 * m1'^2)`.
struct ReducedSketch {
    /// Coordinate matrix `B = Q^T A`, `rank x m1'`.
    b: DMatrix<f64>,
    /// Per-column norm of the component of `A` outside the span of `Q`
    /// (numerical-noise sized unless the factorization truncated).
    leftover: Vec<f64>,
    /// Norms of the compressed columns.
    col_norms: Vec<f64>,
}

impl ReducedSketch {
    fn new(compressed: &DenseMatrix) -> Self {
        let a = compressed.to_na();
        let n = a.ncols();
        let f = Cpqr::factor(&a, 1e-13, None);
        let q = f.thin_q();
        let b = q.transpose() * &a;
        let outside = &a - &q * &b;
        let leftover = (0..n).map(|j| outside.column(j).norm()).collect();
        let col_norms = (0..n).map(|j| a.column(j).norm()).collect();
        Self {
            b,
            leftover,
            col_norms,
        }
    }

    /// Minimum `l2` residual of regressing column `i` on all other columns.
    fn solve_column(&self, i: usize) -> f64 {
        let (s, n) = (self.b.nrows(), self.b.ncols());
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let m_ni = self.b.select_columns(others.iter());
        let b_i = DVector::from_fn(s, |t, _| self.b[(t, i)]);
        // Rank-truncate the regressors at rounding scale: without a
        // tolerance the factorization would sweep in directions that exist
        // only as floating-point residue, and projecting onto those absorbs
        // any column — even one genuinely independent of the rest.
        let f = Cpqr::factor(&m_ni, LOO_RANK_TOL, None);
        let in_span = f.residual_norm(&b_i);
        (in_span * in_span + self.leftover[i] * self.leftover[i]).sqrt()
    }

    fn relative(&self, i: usize, residual: f64) -> f64 {
        if self.col_norms[i] == 0.0 {
            0.0
        } else {
            (residual / self.col_norms[i]).min(1.0)
        }
    }
}

/// Minimum `l2` residual of regressing compressed column `column_index` on
/// all other compressed columns. Zero (up to rounding) means the column is
/// linearly dependent on the rest — an inlier under the independence model.
///
/// A single-column sketch has no regressors, so its residual is the full
/// column norm; that degenerate case is reported as a value, not an error.
/// For scoring every column, prefer [`detect_outliers_alg1`], which shares
/// the dimension-reduction work across all columns.
pub fn residual_test(sketch: &Sketch, column_index: usize) -> Result<f64> {
    if column_index >= sketch.effective_m1 {
        return Err(Error::InvalidParameter(format!(
            "column {column_index} out of range for {} sketch columns",
            sketch.effective_m1
        )));
    }
    Ok(ReducedSketch::new(&sketch.compressed).solve_column(column_index))
}

/// Which norm bounds the regression coefficients in the noise-robust test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PNorm {
    L1,
    L2,
}

/// Noise-robust variant of [`residual_test`]: minimizes the same residual
/// subject to `||z||_p <= omega`, which stops the regression from
/// assembling an outlier out of noise by using huge coefficients. Solved by
/// accelerated projected gradient descent to objective tolerance 1e-8
/// (iteration cap 10000). `omega = 0` forces `z = 0`, returning the column
/// norm; a large `omega` recovers the unconstrained residual.
pub fn residual_test_noisy(
    sketch: &Sketch,
    column_index: usize,
    omega: f64,
    p_norm: PNorm,
) -> Result<f64> {
    if column_index >= sketch.effective_m1 {
        return Err(Error::InvalidParameter(format!(
            "column {column_index} out of range for {} sketch columns",
            sketch.effective_m1
        )));
    }
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::InvalidParameter(
            "coefficient budget must be finite and nonnegative".into(),
        ));
    }
    let reduced = ReducedSketch::new(&sketch.compressed);
    let (s, n) = (reduced.b.nrows(), reduced.b.ncols());
    let i = column_index;
    let leftover2 = reduced.leftover[i] * reduced.leftover[i];
    if n == 1 || omega == 0.0 {
        return Ok(reduced.col_norms[i]);
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let m = reduced.b.select_columns(others.iter());
    let b = DVector::from_fn(s, |t, _| reduced.b[(t, i)]);

    let lipschitz = linalg::spectral_norm(&(m.transpose() * &m));
    if lipschitz == 0.0 {
        // All other columns are zero; the best (and only) fit is z = 0.
        return Ok(reduced.col_norms[i]);
    }
    let step = 1.0 / lipschitz;
    let project = |z: &mut DVector<f64>| match p_norm {
        PNorm::L2 => {
            let nrm = z.norm();
            if nrm > omega {
                *z *= omega / nrm;
            }
        }
        PNorm::L1 => project_l1_ball(z, omega),
    };

    let objective = |z: &DVector<f64>| -> f64 {
        let r = &m * z - &b;
        0.5 * r.norm_squared()
    };

    const MAX_ITERS: usize = 10_000;
    const TOL: f64 = 1e-8;
    let mut z = DVector::zeros(m.ncols());
    let mut y = z.clone();
    let mut t = 1.0f64;
    let mut obj_prev = objective(&z);
    let mut best_obj = obj_prev;
    for _k in 0..MAX_ITERS {
        let grad = m.transpose() * (&m * &y - &b);
        let mut z_new = &y - step * grad;
        project(&mut z_new);
        let obj = objective(&z_new);
        if obj > obj_prev {
            // Momentum overshoot: restart acceleration from the current point.
            t = 1.0;
            y = z.clone();
            obj_prev = objective(&z);
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &z_new + ((t - 1.0) / t_new) * (&z_new - &z);
        z = z_new;
        t = t_new;
        best_obj = best_obj.min(obj);
        let done = (obj_prev - obj).abs() <= TOL * obj.abs().max(1.0);
        obj_prev = obj;
        if done {
            return Ok((2.0 * obj + leftover2).sqrt());
        }
    }
    Err(Error::Convergence {
        context: "norm-constrained residual test",
        iterations: MAX_ITERS,
        residual: (2.0 * best_obj + leftover2).sqrt(),
        partial: None,
    })
}

/// Projects onto the l1 ball of radius `omega` (sort-based exact
/// projection).
fn project_l1_ball(z: &mut DVector<f64>, omega: f64) {
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    if l1 <= omega {
        return;
    }
    if omega == 0.0 {
        z.fill(0.0);
        return;
    }
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &mag) in mags.iter().enumerate() {
        cumsum += mag;
        let candidate = (cumsum - omega) / (k + 1) as f64;
        if mag > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    for v in z.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

/// Runs the leave-one-out residual test on every sketch column and flags
/// those whose relative residual exceeds `rel_threshold`. Returns the
/// sketch-local report (mask over the `effective_m1` sampled columns, in
/// sketch order) together with the full residual profile for audit.
pub fn detect_outliers_alg1(
    sketch: &Sketch,
    rel_threshold: f64,
) -> Result<(OutlierReport, ResidualProfile)> {
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(Error::InvalidParameter(format!(
            "relative threshold {rel_threshold} must lie in [0, 1)"
        )));
    }
    let reduced = ReducedSketch::new(&sketch.compressed);
    let n = sketch.effective_m1;
    let mut residuals = Vec::with_capacity(n);
    let mut relative = Vec::with_capacity(n);
    for i in 0..n {
        let r = reduced.solve_column(i);
        residuals.push(r);
        relative.push(reduced.relative(i, r));
    }
    let report =
        OutlierReport::from_scores(relative.clone(), rel_threshold, DetectionSpace::Compressed);
    let profile = ResidualProfile {
        residuals,
        relative,
        threshold_used: rel_threshold,
    };
    Ok((report, profile))
}

/// Estimates the subspace rank from the compressed inlier block and selects
/// that many independent columns by greedy pivoting. The returned basis
/// consists of the corresponding *unsketched* sampled columns, so it lives
/// in the original row space.
pub fn learn_basis(sketch: &Sketch, inlier_mask: &[bool], rank_tol: f64) -> Result<SubspaceBasis> {
    if inlier_mask.len() != sketch.effective_m1 {
        return Err(Error::InvalidParameter(format!(
            "inlier mask covers {} columns, sketch has {}",
            inlier_mask.len(),
            sketch.effective_m1
        )));
    }
    let positions: Vec<usize> = (0..inlier_mask.len()).filter(|&i| inlier_mask[i]).collect();
    if positions.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one inlier column is required to learn a basis".into(),
        ));
    }
    let block = sketch.compressed.select_columns(&positions).to_na();
    let sigma = linalg::singular_values(&block);
    let est_rank = linalg::rank_from_singular_values(&sigma, rank_tol);
    if est_rank == 0 {
        return Err(Error::DegenerateInput(
            "inlier block is numerically zero".into(),
        ));
    }
    let f = Cpqr::factor(&block, 1e-14, Some(est_rank));
    if f.rank < est_rank {
        return Err(Error::Internal(format!(
            "pivoting found only {} independent columns for rank {est_rank}",
            f.rank
        )));
    }
    let chosen: Vec<usize> = f.perm[..est_rank].iter().map(|&p| positions[p]).collect();
    let basis = sketch.sampled_columns.select_columns(&chosen);
    let orthonormal = DenseMatrix::from_na(&linalg::orthonormalize(&basis.to_na()));
    let source_indices = chosen.iter().map(|&c| sketch.column_indices[c]).collect();
    Ok(SubspaceBasis {
        basis,
        orthonormal,
        est_rank,
        source_indices,
    })
}

/// End-to-end independence-test pipeline: sketch, flag outliers among the
/// sampled columns, build a basis from the surviving columns, then score
/// every original column against that basis (reusing the sketch's row
/// compression). The returned report covers all `N2` columns.
pub fn recover_subspace_alg1(
    instance: &DataInstance,
    plan: &SketchPlan,
    rel_threshold: f64,
    rank_tol: f64,
) -> Result<(SubspaceBasis, OutlierReport)> {
    let sk = sketch::build_sketch(instance, plan)?;
    let (sketch_report, profile) = detect_outliers_alg1(&sk, rel_threshold)?;
    let inlier_mask: Vec<bool> = sketch_report.mask.iter().map(|&m| !m).collect();
    if !inlier_mask.iter().any(|&m| m) {
        return Err(Error::NoInliersDetected {
            effective_m1: sk.effective_m1,
            min_relative: profile.relative.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let basis = learn_basis(&sk, &inlier_mask, rank_tol)?;
    let report = metrics::detect_outliers_full(
        &instance.observed,
        &basis,
        Some(&sk.row_operator),
        rel_threshold,
    )?;
    Ok((basis, report))
}
