//! Internal dense linear-algebra kernels: thin SVD wrappers, Householder
//! column-pivoted QR with early termination, and orthonormalization.

use nalgebra::{DMatrix, DVector};

/// Thin SVD `a = U * diag(sigma) * V^T` with singular values in descending
/// order. `U` is `m x k`, `V^T` is `k x n`, `k = min(m, n)`.
pub(crate) fn thin_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(true, true);
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    debug_assert!(
        sigma.windows(2).all(|w| w[0] >= w[1]),
        "singular values must be sorted descending"
    );
    (
        svd.u.expect("U was requested"),
        sigma,
        svd.v_t.expect("V^T was requested"),
    )
}

/// Singular values only, descending.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().copied().collect()
}

/// Number of singular values exceeding `rel_tol` times the largest one.
/// Returns 0 for an all-zero spectrum.
pub(crate) fn rank_from_singular_values(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        None => 0,
        Some(&s0) if s0 <= 0.0 => 0,
        Some(&s0) => sigma.iter().filter(|&&s| s > rel_tol * s0).count(),
    }
}

/// Spectral norm (largest singular value).
pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Thin orthonormal basis for the column span of a full-column-rank matrix,
/// via unpivoted Householder QR. The caller is responsible for rank.
pub(crate) fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().qr().q()
}

/// Householder column-pivoted QR with greedy max-norm pivoting, norm
/// downdating, and early termination.
///
/// After `factor`, the first `rank` entries of `perm` name the selected
/// (most independent) columns of the input, and the implicit `Q` factor
/// spans their range. Factoring stops as soon as every remaining column's
/// projection onto the current complement falls below `rel_tol` times the
/// largest original column norm, or when `max_rank` steps have been taken.
pub(crate) struct Cpqr {
    /// Householder vectors below the diagonal (unit leading entry implied),
    /// the triangular factor on and above it.
    work: DMatrix<f64>,
    taus: Vec<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl Cpqr {
    pub fn factor(a: &DMatrix<f64>, rel_tol: f64, max_rank: Option<usize>) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut taus = Vec::new();

        let mut norms2: Vec<f64> = (0..n).map(|j| work.column(j).norm_squared()).collect();
        let mut orig2 = norms2.clone();
        let max0 = norms2.iter().fold(0.0f64, |acc, &v| acc.max(v));
        let tol2 = (rel_tol * rel_tol) * max0;
        let kmax = m.min(n).min(max_rank.unwrap_or(usize::MAX));

        let mut rank = kmax;
        for k in 0..kmax {
            // Greedy pivot: remaining column with the largest downdated norm.
            let (jmax, best) = (k..n)
                .map(|j| (j, norms2[j]))
                .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best <= tol2 || best <= 0.0 {
                rank = k;
                break;
            }
            if jmax != k {
                work.swap_columns(k, jmax);
                norms2.swap(k, jmax);
                orig2.swap(k, jmax);
                perm.swap(k, jmax);
            }

            // Householder reflector zeroing column k below the diagonal:
            // H = I - tau * v v^T with v = [1; tail], stored in place.
            let x0 = work[(k, k)];
            let tail2: f64 = (k + 1..m).map(|i| work[(i, k)].powi(2)).sum();
            let norm = (x0 * x0 + tail2).sqrt();
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let v0 = x0 - alpha;
            let tau = if norm == 0.0 { 0.0 } else { -v0 / alpha };
            if tau != 0.0 {
                for i in k + 1..m {
                    work[(i, k)] /= v0;
                }
            }
            work[(k, k)] = alpha;
            taus.push(tau);

            // Apply the reflector to the trailing columns and downdate the
            // remaining column norms; recompute a norm exactly once
            // cancellation has eaten most of it.
            for j in k + 1..n {
                if tau != 0.0 {
                    let mut w = work[(k, j)];
                    for i in k + 1..m {
                        w += work[(i, k)] * work[(i, j)];
                    }
                    w *= tau;
                    work[(k, j)] -= w;
                    for i in k + 1..m {
                        let vik = work[(i, k)];
                        work[(i, j)] -= w * vik;
                    }
                }
                let rkj = work[(k, j)];
                norms2[j] = (norms2[j] - rkj * rkj).max(0.0);
                if norms2[j] < 1e-12 * orig2[j] {
                    norms2[j] = (k + 1..m).map(|i| work[(i, j)].powi(2)).sum();
                    orig2[j] = norms2[j];
                }
            }
        }
        rank = rank.min(taus.len());
        Self {
            work,
            taus,
            perm,
            rank,
        }
    }

    /// Explicit `m x rank` orthonormal factor.
    pub fn thin_q(&self) -> DMatrix<f64> {
        let m = self.work.nrows();
        let mut q = DMatrix::zeros(m, self.rank);
        for j in 0..self.rank {
            q[(j, j)] = 1.0;
        }
        for k in (0..self.rank).rev() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            for j in 0..self.rank {
                let mut w = q[(k, j)];
                for i in k + 1..m {
                    w += self.work[(i, k)] * q[(i, j)];
                }
                w *= tau;
                q[(k, j)] -= w;
                for i in k + 1..m {
                    let vik = self.work[(i, k)];
                    q[(i, j)] -= w * vik;
                }
            }
        }
        q
    }

    /// Applies `Q^T` (the product of the stored reflectors) to `v` in place.
    pub fn apply_qt(&self, v: &mut DVector<f64>) {
        let m = self.work.nrows();
        debug_assert_eq!(v.len(), m);
        for k in 0..self.rank {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            let mut w = v[k];
            for i in k + 1..m {
                w += self.work[(i, k)] * v[i];
            }
            w *= tau;
            v[k] -= w;
            for i in k + 1..m {
                let vik = self.work[(i, k)];
                v[i] -= w * vik;
            }
        }
    }

    /// Norm of the component of `v` orthogonal to the span of the selected
    /// columns, i.e. the least-squares residual of regressing `v` on them.
    pub fn residual_norm(&self, v: &DVector<f64>) -> f64 {
        let mut w = v.clone();
        self.apply_qt(&mut w);
        let m = w.len();
        (self.rank..m).map(|i| w[i] * w[i]).sum::<f64>().sqrt()
    }

    /// The triangular factor rows `0..rank` in pivoted column order
    /// (so `Q * R` reconstructs the input with columns permuted by `perm`).
    #[cfg(test)]
    pub fn r_factor(&self) -> DMatrix<f64> {
        let n = self.work.ncols();
        DMatrix::from_fn(self.rank, n, |i, j| {
            if i <= j {
                self.work[(i, j)]
            } else {
                0.0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn cpqr_reconstructs_permuted_input() {
        for seed in 0..5 {
            let a = random_matrix(12, 8, seed);
            let f = Cpqr::factor(&a, 1e-13, None);
            assert_eq!(f.rank, 8);
            let q = f.thin_q();
            let recon = q * f.r_factor();
            let permuted = a.select_columns(f.perm.iter());
            assert!((recon - permuted).norm() < 1e-10);
        }
    }

    #[test]
    fn cpqr_q_is_orthonormal() {
        let a = random_matrix(20, 6, 3);
        let q = Cpqr::factor(&a, 1e-13, None).thin_q();
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn cpqr_detects_rank_and_stops_early() {
        // 10x7 matrix of rank 3: product of random factors.
        let a = random_matrix(10, 3, 11) * random_matrix(3, 7, 12);
        let f = Cpqr::factor(&a, 1e-10, None);
        assert_eq!(f.rank, 3);
        assert_eq!(f.taus.len(), 3);

        let capped = Cpqr::factor(&a, 1e-10, Some(2));
        assert_eq!(capped.rank, 2);
    }

    #[test]
    fn residual_norm_matches_explicit_projector() {
        let a = random_matrix(15, 5, 21);
        let f = Cpqr::factor(&a, 1e-13, None);
        let q = f.thin_q();
        for seed in 30..34 {
            let v = DVector::from_fn(15, |i, _| random_matrix(15, 1, seed)[(i, 0)]);
            let explicit = (&v - &q * (q.transpose() * &v)).norm();
            assert!((f.residual_norm(&v) - explicit).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_counting_handles_edge_cases() {
        assert_eq!(rank_from_singular_values(&[], 1e-9), 0);
        assert_eq!(rank_from_singular_values(&[0.0, 0.0], 1e-9), 0);
        assert_eq!(rank_from_singular_values(&[2.0, 1.0, 1e-12], 1e-9), 2);
    }

    #[test]
    fn svd_singular_values_are_sorted() {
        let a = random_matrix(9, 14, 5);
        let (u, sigma, v_t) = thin_svd(&a);
        assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        let s = DMatrix::from_diagonal(&DVector::from_vec(sigma.clone()));
        assert!((u * s * v_t - a).norm() < 1e-10);
    }
}
