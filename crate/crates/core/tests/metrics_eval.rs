//! Evaluation metrics: subspace distance against planted principal angles,
//! rank estimation on planted spectra, projection scoring in full and
//! compressed space, and recovery classification arithmetic.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rrsr_core::alg_independent::SubspaceBasis;
use rrsr_core::error::Error;
use rrsr_core::matstore::{generate_synthetic_fixed_k, DataInstance};
use rrsr_core::metrics::{
    classify_recovery, detect_outliers_full, numerical_rank, subspace_distance, DetectionSpace,
    OutlierReport,
};
use rrsr_core::sketch::RowOperator;
use rrsr_core::DenseMatrix;

fn unit_col(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

fn from_cols(dim: usize, cols: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i])
}

/// Orthonormalizes the columns of a seeded Gaussian matrix via QR.
fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    DenseMatrix::from_fn(rows, cols, |i, j| q[(i, j)])
}

#[test]
fn distance_matches_planted_principal_angles() {
    let dim = 6;
    let a = from_cols(dim, &[unit_col(dim, 0), unit_col(dim, 1)]);
    for theta in [0.0, 0.01, 0.1, 0.5, 1.0, std::f64::consts::FRAC_PI_2] {
        let mut tilted = vec![0.0; dim];
        tilted[1] = theta.cos();
        tilted[2] = theta.sin();
        let b = from_cols(dim, &[unit_col(dim, 0), tilted]);
        let d = subspace_distance(&a, &b).unwrap();
        assert!(
            (d - theta.sin()).abs() < 1e-12,
            "theta {theta}: {d} vs {}",
            theta.sin()
        );
        // Mixing the basis columns by an invertible matrix changes nothing.
        let mixed = from_cols(
            dim,
            &[
                b.column(0).iter().zip(b.column(1).iter()).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
                b.column(1).iter().map(|y| -3.0 * y).collect(),
            ],
        );
        let dm = subspace_distance(&a, &mixed).unwrap();
        assert!((dm - d).abs() < 1e-11, "mixed basis moved the distance");
    }
}

#[test]
fn distance_is_symmetric_and_zero_on_self() {
    let a = random_orthonormal(10, 3, 1);
    let b = random_orthonormal(10, 3, 2);
    assert!(subspace_distance(&a, &a).unwrap() < 1e-12);
    let ab = subspace_distance(&a, &b).unwrap();
    let ba = subspace_distance(&b, &a).unwrap();
    assert!((ab - ba).abs() < 1e-12);
    assert!(ab > 0.0 && ab <= 1.0, "generic subspaces are apart: {ab}");
}

/// Perturbing an orthonormal basis by eps * E moves the subspace by a
/// distance proportional to eps, to first order.
#[test]
fn distance_grows_linearly_in_small_perturbations() {
    let u = random_orthonormal(10, 3, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = DenseMatrix::from_fn(10, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dist_at = |eps: f64| {
        let perturbed = DenseMatrix::from_fn(10, 3, |i, j| u.get(i, j) + eps * e.get(i, j));
        subspace_distance(&u, &perturbed).unwrap()
    };
    let epss = [1e-6, 1e-5, 1e-4, 1e-3];
    let dists: Vec<f64> = epss.iter().map(|&x| dist_at(x)).collect();
    for w in dists.windows(2) {
        let ratio = w[1] / w[0];
        assert!((8.0..12.0).contains(&ratio), "tenfold eps gave ratio {ratio}");
    }
    assert!(dists[0] > 1e-8, "perturbation must register above noise");
}

#[test]
fn distance_validates_its_inputs() {
    let a = random_orthonormal(6, 2, 3);
    // Rank-deficient basis: second column is a multiple of the first.
    let first = a.column(0);
    let deficient = from_cols(6, &[first.clone(), first.iter().map(|x| 2.0 * x).collect()]);
    assert!(matches!(
        subspace_distance(&deficient, &a),
        Err(Error::DegenerateInput(_))
    ));
    assert!(matches!(
        subspace_distance(&a, &random_orthonormal(5, 2, 4)),
        Err(Error::InvalidParameter(_))
    ));
    // Different dimensions can never coincide.
    assert_eq!(
        subspace_distance(&a, &random_orthonormal(6, 3, 5)).unwrap(),
        1.0
    );
}

#[test]
fn numerical_rank_follows_a_planted_spectrum() {
    let u = random_orthonormal(8, 3, 11);
    let v = random_orthonormal(5, 3, 12);
    let sigma = [1.0, 1e-3, 1e-12];
    let a = DenseMatrix::from_fn(8, 5, |i, j| {
        (0..3).map(|t| u.get(i, t) * sigma[t] * v.get(j, t)).sum()
    });
    assert_eq!(numerical_rank(&a, 1e-2), 1);
    assert_eq!(numerical_rank(&a, 1e-6), 2);
    assert_eq!(numerical_rank(&a, 1e-13), 3);
    assert_eq!(numerical_rank(&DenseMatrix::zeros(4, 4), 1e-12), 0);
}

fn axis_basis(dim: usize, axes: &[usize]) -> SubspaceBasis {
    let cols: Vec<Vec<f64>> = axes.iter().map(|&ax| unit_col(dim, ax)).collect();
    let m = from_cols(dim, &cols);
    SubspaceBasis {
        basis: m.clone(),
        orthonormal: m,
        est_rank: axes.len(),
        source_indices: axes.to_vec(),
    }
}

#[test]
fn full_space_scores_match_hand_projections() {
    let dim = 6;
    let basis = axis_basis(dim, &[0, 1]);
    let sqrt_half = 0.5f64.sqrt();
    let data = from_cols(
        dim,
        &[
            unit_col(dim, 0).iter().map(|x| 3.0 * x).collect(), // inside
            unit_col(dim, 2).iter().map(|x| 5.0 * x).collect(), // orthogonal
            {
                let mut v = unit_col(dim, 0);
                v[2] = 1.0; // half in, half out
                v
            },
            vec![0.0; dim], // zero column
        ],
    );
    let report = detect_outliers_full(&data, &basis, None, 0.5).unwrap();
    assert_eq!(report.detection_space, DetectionSpace::FullData);
    let want = [0.0, 1.0, sqrt_half, 0.0];
    for (got, want) in report.scores.iter().zip(want) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert_eq!(report.mask, vec![false, true, true, false]);
    assert_eq!(report.outlier_indices(), vec![1, 2]);
    assert_eq!(report.threshold, 0.5);
}

#[test]
fn compressed_space_scores_replay_the_row_operator() {
    let dim = 6;
    let basis = axis_basis(dim, &[0, 2]);
    let op = RowOperator::Rows(vec![0, 1, 2]);
    let data = from_cols(
        dim,
        &[
            unit_col(dim, 2),               // inside the compressed span
            unit_col(dim, 1),               // orthogonal in compressed space
            unit_col(dim, 4),               // compression zeroes it: score 0
            {
                let mut v = unit_col(dim, 0);
                v[1] = 1.0; // half in, half out after compression
                v
            },
        ],
    );
    let report = detect_outliers_full(&data, &basis, Some(&op), 0.5).unwrap();
    assert_eq!(report.detection_space, DetectionSpace::Compressed);
    let want = [0.0, 1.0, 0.0, 0.5f64.sqrt()];
    for (got, want) in report.scores.iter().zip(want) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert_eq!(report.outlier_indices(), vec![1, 3]);
}

#[test]
fn degenerate_compressions_are_rejected() {
    let basis = axis_basis(6, &[1]);
    // Keeping only row 0 zeroes out the e2 basis: rank collapses.
    let op = RowOperator::Rows(vec![0]);
    let data = from_cols(6, &[unit_col(6, 1)]);
    match detect_outliers_full(&data, &basis, Some(&op), 0.5) {
        Err(Error::DegenerateInput(msg)) => assert!(msg.contains("collapsed"), "{msg}"),
        other => panic!("expected degenerate input, got {other:?}"),
    }
    let mut rank0 = axis_basis(6, &[1]);
    rank0.est_rank = 0;
    assert!(matches!(
        detect_outliers_full(&data, &rank0, None, 0.5),
        Err(Error::InvalidParameter(_))
    ));
}

/// Instance with two planted outliers plus a basis built from true inlier
/// columns, so the subspace error is numerically zero and only the mask
/// arithmetic varies.
fn classification_fixture() -> (DataInstance, SubspaceBasis) {
    let inst = generate_synthetic_fixed_k(10, 8, 2, 2, 4.0, 0.0, 5).unwrap();
    let idx = inst.outlier_indices.clone().unwrap();
    let low = inst.truth_low_rank.as_ref().unwrap();
    let inliers: Vec<usize> = (0..8).filter(|j| !idx.contains(j)).collect();
    let picked = low.select_columns(&inliers[..3]);
    assert_eq!(numerical_rank(&picked, 1e-9), 2, "fixture needs rank 2");
    let na = DMatrix::from_fn(10, 3, |i, j| picked.get(i, j));
    let svd = na.svd(true, false);
    let u = svd.u.unwrap();
    let orthonormal = DenseMatrix::from_fn(10, 2, |i, j| u[(i, j)]);
    let basis = SubspaceBasis {
        basis: picked.select_columns(&[0, 1]),
        orthonormal,
        est_rank: 2,
        source_indices: inliers[..2].to_vec(),
    };
    (inst, basis)
}

fn report_for(mask_true: &[usize], n: usize) -> OutlierReport {
    let scores: Vec<f64> = (0..n)
        .map(|j| if mask_true.contains(&j) { 1.0 } else { 0.0 })
        .collect();
    let mask: Vec<bool> = scores.iter().map(|&s| s > 0.5).collect();
    OutlierReport {
        scores,
        mask,
        threshold: 0.5,
        detection_space: DetectionSpace::FullData,
    }
}

#[test]
fn classification_counts_precision_and_recall() {
    let (inst, basis) = classification_fixture();
    let idx = inst.outlier_indices.clone().unwrap();
    let some_inlier = (0..8).find(|j| !idx.contains(j)).unwrap();

    let perfect = classify_recovery(&inst, &basis, &report_for(&idx, 8), 1e-6).unwrap();
    assert!(perfect.subspace_error < 1e-10);
    assert_eq!(perfect.outlier_precision, 1.0);
    assert_eq!(perfect.outlier_recall, 1.0);
    assert!(perfect.exact);

    let mut with_fp = idx.clone();
    with_fp.push(some_inlier);
    let fp = classify_recovery(&inst, &basis, &report_for(&with_fp, 8), 1e-6).unwrap();
    assert_eq!(fp.outlier_precision, 2.0 / 3.0);
    assert_eq!(fp.outlier_recall, 1.0);
    assert!(!fp.exact);

    let missed = classify_recovery(&inst, &basis, &report_for(&idx[..1], 8), 1e-6).unwrap();
    assert_eq!(missed.outlier_precision, 1.0);
    assert_eq!(missed.outlier_recall, 0.5);
    assert!(!missed.exact);

    let silent = classify_recovery(&inst, &basis, &report_for(&[], 8), 1e-6).unwrap();
    assert_eq!(silent.outlier_precision, 1.0, "vacuous precision");
    assert_eq!(silent.outlier_recall, 0.0);

    // Tight tolerance turns the same perfect mask inexact.
    let strict = classify_recovery(&inst, &basis, &report_for(&idx, 8), 1e-16).unwrap();
    assert!(!strict.exact);
}

#[test]
fn classification_requires_ground_truth_and_consistent_shapes() {
    let (inst, basis) = classification_fixture();
    let bare = DataInstance::from_observed(inst.observed.clone());
    assert!(matches!(
        classify_recovery(&bare, &basis, &report_for(&[], 8), 1e-6),
        Err(Error::MissingGroundTruth(_))
    ));
    assert!(matches!(
        classify_recovery(&inst, &basis, &report_for(&[], 5), 1e-6),
        Err(Error::InvalidParameter(_))
    ));
    // All columns outliers: no subspace left to compare against.
    let empty = generate_synthetic_fixed_k(10, 4, 2, 4, 3.0, 0.0, 77).unwrap();
    assert!(matches!(
        classify_recovery(&empty, &basis, &report_for(&[], 4), 1e-6),
        Err(Error::DegenerateInput(_))
    ));
}

#[test]
fn outlier_free_instances_score_perfect_recall_by_convention() {
    let inst = generate_synthetic_fixed_k(10, 8, 2, 0, 1.0, 0.0, 9).unwrap();
    let low = inst.truth_low_rank.as_ref().unwrap();
    let picked = low.select_columns(&[0, 1, 2]);
    let na = DMatrix::from_fn(10, 3, |i, j| picked.get(i, j));
    let u = na.svd(true, false).u.unwrap();
    let basis = SubspaceBasis {
        basis: picked,
        orthonormal: DenseMatrix::from_fn(10, 2, |i, j| u[(i, j)]),
        est_rank: 2,
        source_indices: vec![0, 1, 2],
    };
    let verdict = classify_recovery(&inst, &basis, &report_for(&[], 8), 1e-6).unwrap();
    assert_eq!(verdict.outlier_recall, 1.0);
    assert_eq!(verdict.outlier_precision, 1.0);
    assert!(verdict.exact);
}
