//! Randomized robust subspace recovery for data matrices corrupted by
//! outlying columns.
//!
//! The observed matrix is modeled as `D = L + C (+ N)` where `L` is low rank
//! with some columns zeroed out, `C` places outliers in exactly those
//! columns, and `N` is optional dense noise. Instead of working on the full
//! `N1 x N2` matrix, the algorithms here operate on a small sketch: a random
//! subset of `m1` columns, compressed down to `m2` rows either by a Gaussian
//! embedding or by row subsampling. Two recovery pipelines are provided:
//!
//! * [`alg_independent`] flags sampled columns whose compressed version is
//!   linearly independent of the rest (outliers under the independent
//!   outlier model) and builds a basis from the survivors;
//! * [`alg_convex`] splits the sketch into a low-rank plus column-sparse
//!   pair by minimizing the nuclear norm plus a weighted sum of column
//!   norms, which handles column-sparse outliers without independence
//!   assumptions.
//!
//! [`bounds`] evaluates the closed-form sample-complexity expressions that
//! say how large `m1`/`m2` must be for each pipeline and sketch design, and
//! [`metrics`] scores recovered subspaces and outlier masks against ground
//! truth. [`matstore`] holds matrix storage, file formats, synthetic data
//! generators, and coherence estimation.

pub mod alg_convex;
pub mod alg_independent;
pub mod bounds;
pub mod error;
mod linalg;
pub mod matstore;
pub mod metrics;
pub mod sketch;

pub use error::{Error, Result};
pub use matstore::{derive_seed, CoherenceStats, DataInstance, DenseMatrix};
