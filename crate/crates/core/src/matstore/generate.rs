//! Synthetic data generators for the recovery experiments.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DataInstance, DenseMatrix};
use crate::error::{Error, Result};

/// Derives an independent sub-seed from a base seed and a salt (trial
/// index, grid cell, ...) with a SplitMix64-style scramble, so that
/// per-trial generators are decorrelated but fully reproducible.
pub fn derive_seed(base_seed: u64, salt: u64) -> u64 {
    let mut z = base_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, sigma: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        sigma * rng.sample::<f64, _>(StandardNormal)
    })
}

fn check_common(n1: usize, n2: usize, rank: usize, noise_sigma: f64) -> Result<()> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter(
            "matrix dimensions must be positive".into(),
        ));
    }
    if rank == 0 || rank > n1.min(n2) {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} must lie in [1, min({n1}, {n2})]"
        )));
    }
    if noise_sigma < 0.0 {
        return Err(Error::InvalidParameter(
            "noise level must be nonnegative".into(),
        ));
    }
    Ok(())
}

/// Assembles an instance from its parts: zeroes the outlier columns of `L`,
/// fills them with `N(0, outlier_sigma^2)` entries in `C`, optionally adds
/// dense noise, and records the exact sums as ground truth.
fn assemble(
    mut low_rank: DenseMatrix,
    rank: usize,
    outliers: Vec<usize>,
    outlier_sigma: f64,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> DataInstance {
    let (n1, n2) = (low_rank.rows(), low_rank.cols());
    let mut corruption = DenseMatrix::zeros(n1, n2);
    for &j in &outliers {
        for i in 0..n1 {
            low_rank.set(i, j, 0.0);
            corruption.set(i, j, outlier_sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    let noise = (noise_sigma > 0.0).then(|| gaussian_matrix(rng, n1, n2, noise_sigma));
    let mut observed = low_rank.add(&corruption);
    if let Some(n) = &noise {
        observed = observed.add(n);
    }
    // Zeroing K columns generically leaves rank min(r, N2 - K); the min only
    // bites in extreme regimes where outliers swallow almost every column.
    let true_rank = rank.min(n2 - outliers.len());
    let instance = DataInstance {
        observed,
        truth_low_rank: Some(low_rank),
        truth_outliers: Some(corruption),
        truth_noise: noise,
        outlier_indices: Some(outliers),
        true_rank: Some(true_rank),
    };
    debug_assert!(instance.validate().is_ok());
    instance
}

/// Generates a random instance of the low-rank-plus-outlier model:
/// `L = U V^T` with i.i.d. standard normal factors (`n1 x rank` and
/// `n2 x rank`), each column independently designated an outlier with
/// probability `outlier_prob`, outlier columns of `L` zeroed and replaced
/// in `C` by i.i.d. `N(0, outlier_sigma^2)` entries, plus optional
/// i.i.d. `N(0, noise_sigma^2)` dense noise. Deterministic per seed.
pub fn generate_synthetic(
    n1: usize,
    n2: usize,
    rank: usize,
    outlier_prob: f64,
    outlier_sigma: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<DataInstance> {
    check_common(n1, n2, rank, noise_sigma)?;
    if !(0.0..1.0).contains(&outlier_prob) {
        return Err(Error::InvalidParameter(format!(
            "outlier probability {outlier_prob} must lie in [0, 1)"
        )));
    }
    if outlier_prob > 0.0 && outlier_sigma <= 0.0 {
        return Err(Error::InvalidParameter(
            "outlier scale must be positive when outliers are possible".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = gaussian_matrix(&mut rng, n1, rank, 1.0);
    let v = gaussian_matrix(&mut rng, n2, rank, 1.0);
    let low_rank = u.matmul(&v.transpose());
    let outliers: Vec<usize> = (0..n2).filter(|_| rng.random_bool(outlier_prob)).collect();
    Ok(assemble(
        low_rank,
        rank,
        outliers,
        outlier_sigma,
        noise_sigma,
        &mut rng,
    ))
}

/// Like [`generate_synthetic`] but with exactly `k` outlier columns chosen
/// uniformly at random, for experiments that must control the outlier count
/// rather than its expectation.
pub fn generate_synthetic_fixed_k(
    n1: usize,
    n2: usize,
    rank: usize,
    k: usize,
    outlier_sigma: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<DataInstance> {
    check_common(n1, n2, rank, noise_sigma)?;
    if k > n2 {
        return Err(Error::InvalidParameter(format!(
            "outlier count {k} exceeds column count {n2}"
        )));
    }
    if k > 0 && outlier_sigma <= 0.0 {
        return Err(Error::InvalidParameter(
            "outlier scale must be positive when outliers are requested".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = gaussian_matrix(&mut rng, n1, rank, 1.0);
    let v = gaussian_matrix(&mut rng, n2, rank, 1.0);
    let low_rank = u.matmul(&v.transpose());
    let mut outliers = rand::seq::index::sample(&mut rng, n2, k).into_vec();
    outliers.sort_unstable();
    Ok(assemble(
        low_rank,
        rank,
        outliers,
        outlier_sigma,
        noise_sigma,
        &mut rng,
    ))
}

/// Generates a low-rank matrix whose rows arrive in clusters: group `i`
/// contributes `sizes[i]` rows lying in its own `per_cluster_dims`-dimensional
/// slice of the row space (group rows are `U_i Q_i^T` with i.i.d. standard
/// normal factors). The result is `sum(sizes) x ambient` with rank
/// `n_clusters * per_cluster_dims` almost surely.
///
/// With a single cluster the rows are statistically exchangeable, so a small
/// uniform row sample already spans the row space; with many small clusters,
/// uniform row sampling misses whole slices while a dense random row mix
/// still sees every direction. This is the construction that separates the
/// two sketch designs.
pub fn generate_clustered_rows(
    n_clusters: usize,
    per_cluster_dims: usize,
    sizes: &[usize],
    ambient: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    if n_clusters == 0 || per_cluster_dims == 0 {
        return Err(Error::InvalidParameter(
            "cluster count and per-cluster dimension must be positive".into(),
        ));
    }
    if sizes.len() != n_clusters {
        return Err(Error::InvalidParameter(format!(
            "got {} block sizes for {n_clusters} clusters",
            sizes.len()
        )));
    }
    if let Some(bad) = sizes.iter().position(|&s| s < per_cluster_dims) {
        return Err(Error::InvalidParameter(format!(
            "block {bad} has {} rows, fewer than its dimension {per_cluster_dims}",
            sizes[bad]
        )));
    }
    let rank = n_clusters * per_cluster_dims;
    if ambient < rank {
        return Err(Error::InvalidParameter(format!(
            "ambient dimension {ambient} cannot host rank {rank}"
        )));
    }
    let total_rows: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DenseMatrix::zeros(total_rows, ambient);
    let mut row0 = 0;
    for &size in sizes {
        let u_i = gaussian_matrix(&mut rng, size, per_cluster_dims, 1.0);
        let q_i = gaussian_matrix(&mut rng, ambient, per_cluster_dims, 1.0);
        let block = u_i.matmul(&q_i.transpose());
        for i in 0..size {
            for j in 0..ambient {
                out.set(row0 + i, j, block.get(i, j));
            }
        }
        row0 += size;
    }
    Ok(out)
}
