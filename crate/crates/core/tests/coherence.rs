//! Coherence estimation against hand-computed cases, an independent
//! leverage recomputation, and the exact relations that tie the parameters
//! together.

use nalgebra::DMatrix;
use rrsr_core::error::Error;
use rrsr_core::matstore::{estimate_coherence, generate_synthetic_fixed_k};
use rrsr_core::DenseMatrix;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Rank-one case with every value computable by hand.
///
/// L = u v^T with u = (1,1,1,1)/2 (unit) and v = (2,1,1,1,1,0).
/// The row-space basis is v/||v|| with ||v||^2 = 8, so the largest squared
/// row entry of the basis is 4/8 = 1/2 (first coordinate):
///   mu_v       = (6/1) * 1/2         = 3
///   eta_v      = sqrt(6) * 2/sqrt(8) = sqrt(3)
///   gamma      = (5/1) * 1/2         = 2.5   (five nonzero columns)
///   mu_v_prime = (5/1) * 1/2         = 2.5   (dropping the zero column
///                                             rescales nothing here)
/// u is perfectly spread: mu_u = 1, eta_u = 1.
#[test]
fn rank_one_hand_case() {
    let u = [0.5, 0.5, 0.5, 0.5];
    let v = [2.0, 1.0, 1.0, 1.0, 1.0, 0.0];
    let l = DenseMatrix::from_fn(4, 6, |i, j| u[i] * v[j]);
    let s = estimate_coherence(&l, 1e-9).unwrap();
    assert_eq!(s.rank_used, 1);
    assert!(close(s.mu_v, 3.0, TOL), "mu_v = {}", s.mu_v);
    assert!(close(s.eta_v, 3.0f64.sqrt(), TOL), "eta_v = {}", s.eta_v);
    assert!(close(s.gamma, 2.5, TOL), "gamma = {}", s.gamma);
    assert!(close(s.mu_v_prime, 2.5, TOL), "mu_v_prime = {}", s.mu_v_prime);
    assert!(close(s.mu_u, 1.0, TOL), "mu_u = {}", s.mu_u);
    assert!(close(s.eta_u, 1.0, TOL), "eta_u = {}", s.eta_u);
}

/// Rank-two case with orthogonal factors and distinct singular values, so
/// the singular subspaces are unique and the leverages follow by hand.
///
/// L = 2 e1 f1^T + e2 f2^T in a 4x6 ambient space, with f1 = e1 and
/// f2 = (0,1,1,1,1,1)/sqrt(5). Row leverages of the row-space basis:
/// coordinate 0 has 1 (from f1), coordinates 1..5 have 1/5 each, so
///   mu_v  = (6/2) * 1   = 3
///   eta_v = sqrt(6) * 1 = sqrt(6)
/// Column-space basis rows are e1, e2: mu_u = (4/2) * 1 = 2, eta_u = 2.
#[test]
fn rank_two_hand_case() {
    let mut l = DenseMatrix::zeros(4, 6);
    l.set(0, 0, 2.0);
    for j in 1..6 {
        l.set(1, j, 1.0 / 5.0f64.sqrt());
    }
    let s = estimate_coherence(&l, 1e-9).unwrap();
    assert_eq!(s.rank_used, 2);
    assert!(close(s.mu_v, 3.0, TOL), "mu_v = {}", s.mu_v);
    assert!(close(s.eta_v, 6.0f64.sqrt(), TOL), "eta_v = {}", s.eta_v);
    assert!(close(s.mu_u, 2.0, TOL), "mu_u = {}", s.mu_u);
    assert!(close(s.eta_u, 2.0, TOL), "eta_u = {}", s.eta_u);
    // No zero columns: gamma and mu_v_prime coincide with mu_v.
    assert!(close(s.gamma, s.mu_v, TOL));
    assert_eq!(s.mu_v_prime, s.mu_v);
}

/// Recompute both maximal leverages from an SVD taken directly in the test
/// and compare. Leverages are invariant to the basis rotation ambiguity, so
/// this is a genuine cross-check of the estimator, not of one SVD against
/// itself.
#[test]
fn leverages_match_independent_recomputation() {
    for seed in 0..8u64 {
        let inst = generate_synthetic_fixed_k(9, 14, 3, 3, 2.0, 0.0, seed).unwrap();
        let l = inst.truth_low_rank.unwrap();
        let s = estimate_coherence(&l, 1e-9).unwrap();
        assert_eq!(s.rank_used, 3);

        let a = DMatrix::from_fn(9, 14, |i, j| l.get(i, j));
        let svd = a.svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0f64, |m, &x| m.max(x));
        let rank = svd.singular_values.iter().filter(|&&x| x > 1e-9 * smax).count();
        assert_eq!(rank, 3);
        let u = svd.u.as_ref().unwrap();
        let v_t = svd.v_t.as_ref().unwrap();
        let max_lev_rows = |b: &DMatrix<f64>, n: usize, transpose: bool| -> f64 {
            (0..n)
                .map(|i| {
                    (0..rank)
                        .map(|t| if transpose { b[(t, i)] } else { b[(i, t)] }.powi(2))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        };
        let lev_v = max_lev_rows(v_t, 14, true);
        let lev_u = max_lev_rows(u, 9, false);
        assert!(close(s.mu_v, 14.0 / 3.0 * lev_v, 1e-9), "seed {seed}");
        assert!(close(s.mu_u, 9.0 / 3.0 * lev_u, 1e-9), "seed {seed}");
        // gamma is the same leverage normalized by the nonzero-column count.
        assert!(close(s.gamma, 11.0 / 3.0 * lev_v, 1e-9), "seed {seed}");
    }
}

/// The parameters are pinned to each other and to their attainable ranges:
/// 1 <= mu <= n/r, eta^2/r <= mu <= eta^2, and gamma/mu_v = n2'/n2.
#[test]
fn parameter_relations_hold() {
    for seed in 20..26u64 {
        let inst = generate_synthetic_fixed_k(11, 17, 2, 4, 2.0, 0.0, seed).unwrap();
        let l = inst.truth_low_rank.unwrap();
        let s = estimate_coherence(&l, 1e-9).unwrap();
        let r = s.rank_used as f64;
        let slack = 1.0 + 1e-12;
        assert!(s.mu_v >= 1.0 / slack && s.mu_v <= 17.0 / r * slack);
        assert!(s.mu_u >= 1.0 / slack && s.mu_u <= 11.0 / r * slack);
        assert!(s.mu_v_prime >= 1.0 / slack && s.mu_v_prime <= 13.0 / r * slack);
        assert!(s.eta_v * s.eta_v <= r * s.mu_v * slack);
        assert!(s.mu_v <= s.eta_v * s.eta_v * slack);
        assert!(s.eta_u * s.eta_u <= r * s.mu_u * slack);
        assert!(s.mu_u <= s.eta_u * s.eta_u * slack);
        assert!(close(s.gamma, s.mu_v * 13.0 / 17.0, 1e-12));
    }
}

/// Scaling the matrix moves no coherence parameter: they are properties of
/// the subspaces alone.
#[test]
fn scale_invariance() {
    let inst = generate_synthetic_fixed_k(8, 12, 2, 2, 2.0, 0.0, 5).unwrap();
    let l = inst.truth_low_rank.unwrap();
    let scaled = DenseMatrix::from_fn(8, 12, |i, j| 7.25 * l.get(i, j));
    let a = estimate_coherence(&l, 1e-9).unwrap();
    let b = estimate_coherence(&scaled, 1e-9).unwrap();
    assert!(close(a.mu_v, b.mu_v, 1e-10));
    assert!(close(a.mu_v_prime, b.mu_v_prime, 1e-10));
    assert!(close(a.mu_u, b.mu_u, 1e-10));
    assert!(close(a.eta_v, b.eta_v, 1e-10));
    assert!(close(a.eta_u, b.eta_u, 1e-10));
    assert!(close(a.gamma, b.gamma, 1e-10));
    assert_eq!(a.rank_used, b.rank_used);
}

#[test]
fn rank_tolerance_controls_which_directions_count() {
    // Dominant rank-1 structure plus a 1e-8-sized second direction.
    let mut l = DenseMatrix::from_fn(6, 8, |_, j| if j < 4 { 1.0 } else { 2.0 });
    l.set(5, 0, l.get(5, 0) + 1e-8);
    let loose = estimate_coherence(&l, 1e-6).unwrap();
    assert_eq!(loose.rank_used, 1);
    let tight = estimate_coherence(&l, 1e-12).unwrap();
    assert_eq!(tight.rank_used, 2);
}

#[test]
fn zero_matrix_is_degenerate() {
    assert!(matches!(
        estimate_coherence(&DenseMatrix::zeros(4, 5), 1e-9),
        Err(Error::DegenerateInput(_))
    ));
}
