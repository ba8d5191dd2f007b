//! Matrix storage and file I/O, synthetic data generation, and
//! coherence-parameter estimation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

mod generate;
pub mod io;

pub use generate::{
    derive_seed, generate_clustered_rows, generate_synthetic, generate_synthetic_fixed_k,
};

/// Dense row-major matrix of `f64`, the storage type for every matrix in
/// this crate. Both dimensions are at least 1 and all entries are finite;
/// the checked constructors enforce this.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite entry {} at flat index {bad}",
                data[bad]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero matrix. Panics if either dimension is 0.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds entry `(i, j)` as `f(i, j)`. Panics if a dimension is 0 or if
    /// `f` produces a non-finite value.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(v.is_finite());
        self.data[i * self.cols + j] = v;
    }

    /// Copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| self.get(i, j) * self.get(i, j))
            .sum::<f64>()
            .sqrt()
    }

    /// New matrix keeping the listed columns, in the given order.
    /// Panics on an out-of-range index or an empty list.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        assert!(!indices.is_empty(), "column selection must be non-empty");
        Self::from_fn(self.rows, indices.len(), |i, j| self.get(i, indices[j]))
    }

    /// New matrix keeping the listed rows, in the given order.
    /// Panics on an out-of-range index or an empty list.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        assert!(!indices.is_empty(), "row selection must be non-empty");
        Self::from_fn(indices.len(), self.cols, |i, j| self.get(indices[i], j))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Entrywise sum. Panics on shape mismatch.
    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Entrywise difference. Panics on shape mismatch.
    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Matrix product `self * rhs`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        Self::from_na(&(self.to_na() * rhs.to_na()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every entry of `self` matches `other` within `tol` relative
    /// to the larger of the two magnitudes (absolute below 1.0).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0))
    }

    pub(crate) fn to_na(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// An observed matrix together with whatever ground truth is available. In
/// synthetic experiments all truth fields are populated; on real data only
/// `observed` is.
#[derive(Clone, Debug)]
pub struct DataInstance {
    /// The data matrix `D`, `N1 x N2`.
    pub observed: DenseMatrix,
    /// The low-rank part `L`, with zero columns at the outlier positions.
    pub truth_low_rank: Option<DenseMatrix>,
    /// The outlier part `C`, nonzero exactly at the outlier positions.
    pub truth_outliers: Option<DenseMatrix>,
    /// Dense noise, if any was added.
    pub truth_noise: Option<DenseMatrix>,
    /// Sorted positions of the outlying columns.
    pub outlier_indices: Option<Vec<usize>>,
    /// Rank of `L`.
    pub true_rank: Option<usize>,
}

impl DataInstance {
    /// Wraps an observation with no ground truth attached.
    pub fn from_observed(observed: DenseMatrix) -> Self {
        Self {
            observed,
            truth_low_rank: None,
            truth_outliers: None,
            truth_noise: None,
            outlier_indices: None,
            true_rank: None,
        }
    }

    /// Number of rows `N1`.
    pub fn n1(&self) -> usize {
        self.observed.rows()
    }

    /// Number of columns `N2`.
    pub fn n2(&self) -> usize {
        self.observed.cols()
    }

    /// Number of outlying columns `K`, when known.
    pub fn k(&self) -> Option<usize> {
        self.outlier_indices.as_ref().map(|v| v.len())
    }

    /// Number of inlying columns, when known.
    pub fn n2_prime(&self) -> Option<usize> {
        self.k().map(|k| self.n2() - k)
    }

    /// Checks the model consistency contract: dimensions agree, outlier
    /// indices are sorted, unique, and in range, the low-rank part is
    /// exactly zero on outlier columns, and when every truth part is
    /// present they sum back to the observation entrywise within 1e-12
    /// relative (with an absolute floor of 1.0 on the scale).
    pub fn validate(&self) -> Result<()> {
        let (n1, n2) = (self.n1(), self.n2());
        for (name, m) in [
            ("truth_low_rank", &self.truth_low_rank),
            ("truth_outliers", &self.truth_outliers),
            ("truth_noise", &self.truth_noise),
        ] {
            if let Some(m) = m {
                if m.rows() != n1 || m.cols() != n2 {
                    return Err(Error::InvalidParameter(format!(
                        "{name} is {}x{}, observed is {n1}x{n2}",
                        m.rows(),
                        m.cols()
                    )));
                }
            }
        }
        if let Some(idx) = &self.outlier_indices {
            if !idx.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidParameter(
                    "outlier indices must be strictly increasing".into(),
                ));
            }
            if idx.last().is_some_and(|&last| last >= n2) {
                return Err(Error::InvalidParameter(
                    "outlier index out of column range".into(),
                ));
            }
            if let Some(l) = &self.truth_low_rank {
                for &j in idx {
                    if (0..n1).any(|i| l.get(i, j) != 0.0) {
                        return Err(Error::Internal(format!(
                            "low-rank part has a nonzero entry in outlier column {j}"
                        )));
                    }
                }
            }
        }
        if let (Some(l), Some(c)) = (&self.truth_low_rank, &self.truth_outliers) {
            let mut sum = l.add(c);
            if let Some(n) = &self.truth_noise {
                sum = sum.add(n);
            }
            if !self.observed.approx_eq(&sum, 1e-12) {
                return Err(Error::Internal(
                    "observed matrix does not equal the sum of its truth parts".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Coherence parameters of a low-rank matrix, all computed as the smallest
/// (equality-achieving) values consistent with their defining inequalities.
///
/// For an orthonormal row-space basis `V` (`N2 x r`) and column-space basis
/// `U` (`N1 x r`):
/// * `mu_v`  = `(N2 / r) * max_i ||V^T e_i||^2`, and `mu_u` likewise with
///   `U` and `N1` — how concentrated the row/column space is on single
///   coordinates (1 = perfectly spread, `N2/r` = maximal spike);
/// * `eta_v` = `sqrt(N2) * max |V(i,j)|`, and `eta_u` likewise;
/// * `gamma` = the same maximum as `mu_v` but normalized by the number of
///   nonzero columns: `(N2' / r) * max_i ||V^T e_i||^2`;
/// * `mu_v_prime` = row-space coherence of the submatrix of nonzero
///   columns, `(N2' / r) * max_i ||V'^T e_i||^2` with `V'` from that
///   submatrix's own decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct CoherenceStats {
    pub mu_v: f64,
    pub mu_v_prime: f64,
    pub mu_u: f64,
    pub eta_v: f64,
    pub eta_u: f64,
    pub gamma: f64,
    /// Numerical rank used for the normalizations above.
    pub rank_used: usize,
}

/// Measures the coherence parameters of `low_rank`. Singular values below
/// `rank_tol` times the largest are treated as zero when determining the
/// rank (1e-9 is a sensible default for synthetically generated data).
///
/// Returns a degenerate-input error on the zero matrix.
pub fn estimate_coherence(low_rank: &DenseMatrix, rank_tol: f64) -> Result<CoherenceStats> {
    let (n1, n2) = (low_rank.rows(), low_rank.cols());
    let a = low_rank.to_na();
    let (u, sigma, v_t) = linalg::thin_svd(&a);
    let rank = linalg::rank_from_singular_values(&sigma, rank_tol);
    if rank == 0 {
        return Err(Error::DegenerateInput(
            "coherence is undefined for the zero matrix".into(),
        ));
    }

    // Row leverage of an orthonormal basis: squared norm of each row of U,
    // or equivalently of each column of V^T.
    let max_row_leverage = |basis_t: &nalgebra::DMatrix<f64>, n: usize| -> f64 {
        (0..n)
            .map(|i| (0..rank).map(|t| basis_t[(t, i)].powi(2)).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let max_abs = |basis_t: &nalgebra::DMatrix<f64>, n: usize| -> f64 {
        let mut m = 0.0f64;
        for t in 0..rank {
            for i in 0..n {
                m = m.max(basis_t[(t, i)].abs());
            }
        }
        m
    };

    let u_t = u.transpose();
    let lev_v = max_row_leverage(&v_t, n2);
    let lev_u = max_row_leverage(&u_t, n1);
    let mu_v = n2 as f64 / rank as f64 * lev_v;
    let mu_u = n1 as f64 / rank as f64 * lev_u;
    let eta_v = (n2 as f64).sqrt() * max_abs(&v_t, n2);
    let eta_u = (n1 as f64).sqrt() * max_abs(&u_t, n1);

    let nonzero: Vec<usize> = (0..n2).filter(|&j| low_rank.column_norm(j) > 0.0).collect();
    let n2_prime = nonzero.len();
    let gamma = n2_prime as f64 / rank as f64 * lev_v;

    // Row-space coherence of the nonzero-column submatrix, from its own
    // decomposition (its row space generally differs from a subset of V's
    // rows once the zero columns are dropped).
    let mu_v_prime = if n2_prime == n2 {
        mu_v
    } else {
        let sub = low_rank.select_columns(&nonzero).to_na();
        let (_, sigma_p, v_t_p) = linalg::thin_svd(&sub);
        let rank_p = linalg::rank_from_singular_values(&sigma_p, rank_tol);
        debug_assert_eq!(rank_p, rank, "dropping zero columns must not change rank");
        let lev = (0..n2_prime)
            .map(|i| (0..rank_p).map(|t| v_t_p[(t, i)].powi(2)).sum::<f64>())
            .fold(0.0, f64::max);
        n2_prime as f64 / rank_p as f64 * lev
    };

    Ok(CoherenceStats {
        mu_v,
        mu_v_prime,
        mu_u,
        eta_v,
        eta_u,
        gamma,
        rank_used: rank,
    })
}
