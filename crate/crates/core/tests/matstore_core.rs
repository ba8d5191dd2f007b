//! Contracts of the dense matrix type and the instance model-consistency
//! checks.

use rrsr_core::error::Error;
use rrsr_core::{DataInstance, DenseMatrix};

fn m(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
    DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
}

#[test]
fn new_rejects_bad_shapes_and_values() {
    assert!(matches!(
        DenseMatrix::new(0, 3, vec![]),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        DenseMatrix::new(3, 0, vec![]),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        DenseMatrix::new(2, 2, vec![1.0; 3]),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        DenseMatrix::new(1, 2, vec![f64::INFINITY, 0.0]),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
#[should_panic(expected = "dimensions must be positive")]
fn zeros_panics_on_zero_dimension() {
    let _ = DenseMatrix::zeros(0, 4);
}

#[test]
#[should_panic(expected = "non-finite entry")]
fn from_fn_panics_on_non_finite() {
    let _ = DenseMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { f64::NAN });
}

#[test]
fn indexing_is_row_major() {
    let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(a.get(0, 0), 1.0);
    assert_eq!(a.get(0, 2), 3.0);
    assert_eq!(a.get(1, 0), 4.0);
    assert_eq!(a.get(1, 2), 6.0);
    assert_eq!(a.column(1), vec![2.0, 5.0]);
    let mut b = a.clone();
    b.set(1, 1, -7.0);
    assert_eq!(b.get(1, 1), -7.0);
    assert_eq!(b.data()[4], -7.0);
}

#[test]
fn selection_respects_order_and_allows_repeats() {
    let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let c = a.select_columns(&[2, 0, 2]);
    assert_eq!(c.data(), &[3.0, 1.0, 3.0, 6.0, 4.0, 6.0]);
    let r = a.select_rows(&[1, 1]);
    assert_eq!(r.data(), &[4.0, 5.0, 6.0, 4.0, 5.0, 6.0]);
}

#[test]
#[should_panic(expected = "non-empty")]
fn empty_column_selection_panics() {
    let a = m(1, 2, &[1.0, 2.0]);
    let _ = a.select_columns(&[]);
}

#[test]
fn transpose_is_an_involution() {
    let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let t = a.transpose();
    assert_eq!(t.rows(), 3);
    assert_eq!(t.cols(), 2);
    assert_eq!(t.get(2, 1), a.get(1, 2));
    assert_eq!(t.transpose().data(), a.data());
}

#[test]
fn arithmetic_matches_hand_values() {
    let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
    assert_eq!(a.add(&b).data(), &[6.0, 8.0, 10.0, 12.0]);
    assert_eq!(b.sub(&a).data(), &[4.0, 4.0, 4.0, 4.0]);
    let p = a.matmul(&b);
    assert_eq!(p.data(), &[19.0, 22.0, 43.0, 50.0]);
    // (3, 4, 5) triple: norms are exact.
    let v = m(2, 1, &[3.0, 4.0]);
    assert_eq!(v.frobenius_norm(), 5.0);
    assert_eq!(v.column_norm(0), 5.0);
    assert_eq!(m(1, 3, &[-2.0, 0.5, 1.0]).max_abs(), 2.0);
}

#[test]
fn approx_eq_uses_relative_with_absolute_floor() {
    let a = m(1, 1, &[1.0e12]);
    let b = m(1, 1, &[1.0e12 * (1.0 + 1e-13)]);
    assert!(a.approx_eq(&b, 1e-12));
    assert!(!a.approx_eq(&b, 1e-14));
    // Below magnitude 1 the comparison is absolute.
    let c = m(1, 1, &[0.0]);
    let d = m(1, 1, &[1e-13]);
    assert!(c.approx_eq(&d, 1e-12));
    assert!(!c.approx_eq(&d, 1e-14));
    // Shape mismatch is never equal.
    assert!(!a.approx_eq(&m(1, 2, &[1.0e12, 0.0]), 1.0));
}

fn small_instance() -> DataInstance {
    // 2x4, rank-1 inliers in columns {0, 2, 3}, outlier in column 1.
    let low = m(2, 4, &[1.0, 0.0, 2.0, 3.0, 2.0, 0.0, 4.0, 6.0]);
    let out = m(2, 4, &[0.0, 5.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    DataInstance {
        observed: low.add(&out),
        truth_low_rank: Some(low),
        truth_outliers: Some(out),
        truth_noise: None,
        outlier_indices: Some(vec![1]),
        true_rank: Some(1),
    }
}

#[test]
fn instance_accessors_and_validation() {
    let inst = small_instance();
    assert_eq!(inst.n1(), 2);
    assert_eq!(inst.n2(), 4);
    assert_eq!(inst.k(), Some(1));
    assert_eq!(inst.n2_prime(), Some(3));
    inst.validate().unwrap();

    let bare = DataInstance::from_observed(inst.observed.clone());
    assert_eq!(bare.k(), None);
    assert_eq!(bare.n2_prime(), None);
    bare.validate().unwrap();
}

#[test]
fn validation_rejects_shape_mismatch() {
    let mut inst = small_instance();
    inst.truth_noise = Some(DenseMatrix::zeros(3, 4));
    assert!(matches!(inst.validate(), Err(Error::InvalidParameter(_))));
}

#[test]
fn validation_rejects_bad_outlier_indices() {
    let mut inst = small_instance();
    inst.outlier_indices = Some(vec![1, 1]);
    assert!(matches!(inst.validate(), Err(Error::InvalidParameter(_))));
    inst.outlier_indices = Some(vec![2, 1]);
    assert!(matches!(inst.validate(), Err(Error::InvalidParameter(_))));
    inst.outlier_indices = Some(vec![4]);
    assert!(matches!(inst.validate(), Err(Error::InvalidParameter(_))));
}

#[test]
fn validation_rejects_nonzero_low_rank_in_outlier_column() {
    let mut inst = small_instance();
    let mut low = inst.truth_low_rank.clone().unwrap();
    low.set(0, 1, 0.5);
    inst.truth_low_rank = Some(low);
    assert!(matches!(inst.validate(), Err(Error::Internal(_))));
}

#[test]
fn validation_rejects_parts_that_do_not_sum() {
    let mut inst = small_instance();
    let mut obs = inst.observed.clone();
    obs.set(0, 0, obs.get(0, 0) + 1.0);
    inst.observed = obs;
    assert!(matches!(inst.validate(), Err(Error::Internal(_))));
}
