//! On-disk format contracts: round-trips, format sniffing, and rejection of
//! malformed files.

use std::fs;

use rrsr_core::error::Error;
use rrsr_core::matstore::io::{
    read_index_list, read_matrix, read_matrix_bin, read_matrix_csv, write_index_list,
    write_matrix_bin, write_matrix_csv,
};
use rrsr_core::DenseMatrix;

/// Values spanning magnitudes, signs, and edge representations; all finite.
fn awkward_matrix() -> DenseMatrix {
    DenseMatrix::new(
        3,
        4,
        vec![
            0.0,
            -0.0,
            1.0,
            -1.0,
            1.0 / 3.0,
            -2.5e-300,
            7.1e300,
            f64::MIN_POSITIVE,
            5e-324, // smallest subnormal
            -std::f64::consts::PI,
            1e16 + 1.0,
            f64::MAX,
        ],
    )
    .unwrap()
}

fn bits(m: &DenseMatrix) -> Vec<u64> {
    m.data().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let a = awkward_matrix();
    write_matrix_csv(&path, &a).unwrap();
    let b = read_matrix_csv(&path).unwrap();
    assert_eq!((b.rows(), b.cols()), (3, 4));
    assert_eq!(bits(&a), bits(&b), "shortest-round-trip text must restore every bit");
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rmat");
    let a = awkward_matrix();
    write_matrix_bin(&path, &a).unwrap();
    let b = read_matrix_bin(&path).unwrap();
    assert_eq!((b.rows(), b.cols()), (3, 4));
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn read_matrix_sniffs_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let a = awkward_matrix();
    let csv = dir.path().join("m.csv");
    let bin = dir.path().join("m.rmat");
    write_matrix_csv(&csv, &a).unwrap();
    write_matrix_bin(&bin, &a).unwrap();
    assert_eq!(bits(&read_matrix(&csv).unwrap()), bits(&a));
    assert_eq!(bits(&read_matrix(&bin).unwrap()), bits(&a));
}

#[test]
fn csv_layout_matches_documentation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    write_matrix_csv(&path, &DenseMatrix::new(2, 2, vec![1.0, 2.5, -3.0, 4.0]).unwrap()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text, "rows,cols\n2,2\n1,2.5\n-3,4\n");
}

fn csv_err(content: &str) -> Error {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, content).unwrap();
    read_matrix_csv(&path).unwrap_err()
}

#[test]
fn csv_rejects_malformed_files() {
    assert!(matches!(csv_err("1,2\n3,4\n"), Error::Format(_)), "missing header");
    assert!(matches!(csv_err("rows,cols\n"), Error::Format(_)), "missing dims");
    assert!(matches!(csv_err("rows,cols\n2\n1\n2\n"), Error::Format(_)), "one dim");
    assert!(matches!(csv_err("rows,cols\nx,2\n1,2\n"), Error::Format(_)), "bad dim");
    assert!(matches!(csv_err("rows,cols\n2,2\n1,2\n3,oops\n"), Error::Format(_)), "bad value");
    assert!(matches!(csv_err("rows,cols\n2,2\n1,2,9\n3,4\n"), Error::Format(_)), "extra field");
    assert!(matches!(csv_err("rows,cols\n2,2\n1,2\n"), Error::Format(_)), "missing row");
    assert!(
        matches!(csv_err("rows,cols\n1,2\n1,2\n3,4\n"), Error::Format(_)),
        "trailing matrix row"
    );
    assert!(
        matches!(csv_err("rows,cols\n1,2\nnan,0\n"), Error::InvalidParameter(_)),
        "non-finite values fail matrix construction"
    );
}

#[test]
fn binary_rejects_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let good = dir.path().join("good.rmat");
    write_matrix_bin(&good, &a).unwrap();
    let blob = fs::read(&good).unwrap();

    let bad_magic = dir.path().join("magic.rmat");
    let mut b = blob.clone();
    b[0] = b'X';
    fs::write(&bad_magic, &b).unwrap();
    assert!(matches!(read_matrix_bin(&bad_magic), Err(Error::Format(_))));

    let truncated = dir.path().join("trunc.rmat");
    fs::write(&truncated, &blob[..blob.len() - 3]).unwrap();
    assert!(matches!(read_matrix_bin(&truncated), Err(Error::Io(_))));

    let trailing = dir.path().join("trail.rmat");
    let mut t = blob.clone();
    t.push(0);
    fs::write(&trailing, &t).unwrap();
    assert!(matches!(read_matrix_bin(&trailing), Err(Error::Format(_))));
}

#[test]
fn index_list_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cols.idx");
    let idx = vec![0usize, 7, 7, 3, usize::MAX];
    write_index_list(&path, &idx).unwrap();
    assert_eq!(read_index_list(&path).unwrap(), idx);

    // Blank lines are skipped; an empty file is an empty list.
    fs::write(&path, "3\n\n  \n5\n").unwrap();
    assert_eq!(read_index_list(&path).unwrap(), vec![3, 5]);
    fs::write(&path, "").unwrap();
    assert_eq!(read_index_list(&path).unwrap(), Vec::<usize>::new());

    fs::write(&path, "3\n-1\n").unwrap();
    assert!(matches!(read_index_list(&path), Err(Error::Format(_))));

    assert!(matches!(
        read_matrix(dir.path().join("nope.csv")),
        Err(Error::Io(_))
    ));
}
