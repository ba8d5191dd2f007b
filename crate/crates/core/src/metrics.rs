//! Evaluation primitives: projection-residual outlier detection on the full
//! data, subspace distance, rank utilities, and success classification.

use serde::Serialize;

use crate::alg_independent::SubspaceBasis;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matstore::{DataInstance, DenseMatrix};
use crate::sketch::RowOperator;

/// Where outlier scores were computed: on the original rows, or after
/// replaying a sketch's row compression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSpace {
    FullData,
    Compressed,
}

/// Per-column outlier scores and the thresholded mask. `mask[i]` holds
/// exactly when `scores[i] > threshold`; scores are relative residuals in
/// `[0, 1]` (0 = fully inside the recovered subspace, 1 = orthogonal).
#[derive(Clone, Debug, Serialize)]
pub struct OutlierReport {
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
    pub threshold: f64,
    pub detection_space: DetectionSpace,
}

impl OutlierReport {
    pub(crate) fn from_scores(
        scores: Vec<f64>,
        threshold: f64,
        detection_space: DetectionSpace,
    ) -> Self {
        let mask = scores.iter().map(|&s| s > threshold).collect();
        Self {
            scores,
            mask,
            threshold,
            detection_space,
        }
    }

    /// Indices flagged as outliers.
    pub fn outlier_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }
}

/// How a recovery attempt scored against ground truth.
#[derive(Clone, Debug, Serialize)]
pub struct RecoveryVerdict {
    /// Sine of the largest principal angle between the recovered and true
    /// column spaces (0 = identical, 1 = some direction entirely missed).
    pub subspace_error: f64,
    pub outlier_precision: f64,
    pub outlier_recall: f64,
    /// Subspace error below tolerance and a perfect outlier mask.
    pub exact: bool,
}

/// Scores every column of `data` by how far it sticks out of the recovered
/// subspace: `score_i = ||(I - U U^T) d_i|| / ||d_i||` with `U` an
/// orthonormal basis. When `row_operator` is given, both the data and the
/// basis are first pushed through the sketch's row compression, so
/// detection runs in the cheap compressed space. Zero columns score 0.
pub fn detect_outliers_full(
    data: &DenseMatrix,
    basis: &SubspaceBasis,
    row_operator: Option<&RowOperator>,
    threshold: f64,
) -> Result<OutlierReport> {
    if basis.est_rank == 0 {
        return Err(Error::InvalidParameter(
            "cannot detect outliers against a rank-0 basis".into(),
        ));
    }
    let (work, u) = match row_operator {
        Some(op) => {
            let compressed_basis = op.apply(&basis.basis).to_na();
            if linalg::rank_from_singular_values(
                &linalg::singular_values(&compressed_basis),
                1e-10,
            ) < basis.est_rank
            {
                return Err(Error::DegenerateInput(
                    "row compression collapsed the basis; detection must run on full rows".into(),
                ));
            }
            (op.apply(data).to_na(), linalg::orthonormalize(&compressed_basis))
        }
        None => (data.to_na(), basis.orthonormal.to_na()),
    };
    let coords = u.transpose() * &work;
    let projected = &u * &coords;
    let n = work.ncols();
    let mut scores = Vec::with_capacity(n);
    for j in 0..n {
        let col_norm = work.column(j).norm();
        if col_norm == 0.0 {
            scores.push(0.0);
        } else {
            let resid = (work.column(j) - projected.column(j)).norm();
            scores.push((resid / col_norm).min(1.0));
        }
    }
    let space = if row_operator.is_some() {
        DetectionSpace::Compressed
    } else {
        DetectionSpace::FullData
    };
    Ok(OutlierReport::from_scores(scores, threshold, space))
}

/// Sine of the largest principal angle between the column spans of `a` and
/// `b` (any bases; they are orthonormalized first, so the result is
/// invariant to right-multiplication by invertible matrices). Symmetric in
/// its arguments. Spans of different dimensions can never coincide, so
/// they get distance 1. Errors on rank-deficient input.
pub fn subspace_distance(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    for (name, m) in [("first", a), ("second", b)] {
        let rank = numerical_rank(m, 1e-10);
        if rank < m.cols() {
            return Err(Error::DegenerateInput(format!(
                "{name} basis is rank-deficient ({rank} < {})",
                m.cols()
            )));
        }
    }
    if a.rows() != b.rows() {
        return Err(Error::InvalidParameter(
            "bases live in different ambient dimensions".into(),
        ));
    }
    if a.cols() != b.cols() {
        return Ok(1.0);
    }
    let qa = linalg::orthonormalize(&a.to_na());
    let qb = linalg::orthonormalize(&b.to_na());
    // Largest principal-angle sine, computed directly as the norm of the
    // part of one basis outside the other's span. (Going through the
    // cosine as the smallest overlap singular value squares away half the
    // precision near zero distance.)
    let outside = &qb - &qa * (qa.transpose() * &qb);
    Ok(linalg::spectral_norm(&outside).clamp(0.0, 1.0))
}

/// Number of singular values at least `rank_tol` times the largest.
/// The zero matrix has rank 0.
pub fn numerical_rank(m: &DenseMatrix, rank_tol: f64) -> usize {
    linalg::rank_from_singular_values(&linalg::singular_values(&m.to_na()), rank_tol)
}

/// Orthonormal basis (exactly `true_rank` columns) of the ground-truth
/// column space. Wide exact-rank matrices take a fixed-seed random range
/// probe — `span(L G)` equals `span(L)` almost surely — whose exactness is
/// then verified directly; anything that fails the check (overstated rank,
/// pathological truth) falls back to a full decomposition. Deterministic:
/// the probe seed is a constant, so this stays a pure function.
fn truth_span_basis(truth_l: &DenseMatrix, true_rank: usize) -> DenseMatrix {
    use rand::prelude::*;
    use rand_distr::StandardNormal;

    let a = truth_l.to_na();
    let probe_cols = true_rank + 8;
    if truth_l.cols() > 4 * probe_cols && probe_cols < truth_l.rows() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7472_7574_6821);
        let g = nalgebra::DMatrix::from_fn(truth_l.cols(), probe_cols, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let y = &a * &g;
        let (u, sigma, _) = linalg::thin_svd(&y);
        if linalg::rank_from_singular_values(&sigma, 1e-12) == true_rank {
            let q = u.columns(0, true_rank).into_owned();
            let residual = (&a - &q * (q.transpose() * &a)).norm();
            if residual <= 1e-8 * a.norm().max(f64::MIN_POSITIVE) {
                return DenseMatrix::from_na(&q);
            }
        }
    }
    let (u, _, _) = linalg::thin_svd(&a);
    DenseMatrix::from_na(&u.columns(0, true_rank).into_owned())
}

/// Scores a recovery against the instance's ground truth: subspace error
/// versus the true low-rank column space, precision/recall of the outlier
/// mask, and the combined exactness flag (`subspace_error < tol` and a
/// perfect mask). Conventions: precision is 1 when nothing was flagged,
/// recall is 1 when there were no true outliers.
pub fn classify_recovery(
    instance: &DataInstance,
    basis: &SubspaceBasis,
    report: &OutlierReport,
    tol: f64,
) -> Result<RecoveryVerdict> {
    let truth_l = instance
        .truth_low_rank
        .as_ref()
        .ok_or(Error::MissingGroundTruth("truth_low_rank"))?;
    let truth_idx = instance
        .outlier_indices
        .as_ref()
        .ok_or(Error::MissingGroundTruth("outlier_indices"))?;
    if report.mask.len() != instance.n2() {
        return Err(Error::InvalidParameter(format!(
            "outlier report covers {} columns, instance has {}",
            report.mask.len(),
            instance.n2()
        )));
    }

    let true_rank = match instance.true_rank {
        Some(r) => r,
        None => numerical_rank(truth_l, 1e-9),
    };
    if true_rank == 0 {
        return Err(Error::DegenerateInput(
            "true low-rank part is zero; there is no subspace to compare against".into(),
        ));
    }
    let truth_basis = truth_span_basis(truth_l, true_rank);
    let subspace_error = subspace_distance(&basis.orthonormal, &truth_basis)?;

    let is_true_outlier = {
        let mut v = vec![false; instance.n2()];
        for &j in truth_idx {
            v[j] = true;
        }
        v
    };
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (j, &flagged) in report.mask.iter().enumerate() {
        if flagged {
            if is_true_outlier[j] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let k = truth_idx.len();
    let outlier_precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let outlier_recall = if k == 0 { 1.0 } else { tp as f64 / k as f64 };
    Ok(RecoveryVerdict {
        subspace_error,
        outlier_precision,
        outlier_recall,
        exact: subspace_error < tol && outlier_precision == 1.0 && outlier_recall == 1.0,
    })
}
