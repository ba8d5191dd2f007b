//! Two-stage sketch construction: uniform column sampling (which columns of
//! the data survive) followed by row compression (how each surviving column
//! is shrunk), either through a dense Gaussian embedding or by keeping a
//! uniform subset of rows.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstore::{self, derive_seed, DataInstance, DenseMatrix};

/// How the sampled columns are compressed down to `m2` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Dense Gaussian embedding: every output row mixes all input rows.
    Red,
    /// Uniform row subsampling without replacement.
    Rrd,
}

impl std::str::FromStr for Design {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "red" => Ok(Design::Red),
            "rrd" => Ok(Design::Rrd),
            other => Err(Error::InvalidParameter(format!(
                "unknown design {other:?}, expected 'red' or 'rrd'"
            ))),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Design::Red => "red",
            Design::Rrd => "rrd",
        })
    }
}

/// Parameters of a sketch: how many columns to draw, how far to compress
/// the rows, which design to use, and the seed that makes it reproducible.
#[derive(Clone, Copy, Debug)]
pub struct SketchPlan {
    /// Number of column draws.
    pub m1: usize,
    /// Number of rows after compression.
    pub m2: usize,
    pub design: Design,
    /// Draw columns with replacement (the analysis-friendly default).
    pub column_replacement: bool,
    /// Drop repeated columns after drawing with replacement. The
    /// independence-based outlier test requires this — a duplicated column
    /// is linearly dependent on its twin and would always look like an
    /// inlier.
    pub dedupe: bool,
    pub seed: u64,
}

impl SketchPlan {
    /// Plan for the independence-test pipeline: with replacement, duplicates
    /// removed.
    pub fn for_alg1(m1: usize, m2: usize, design: Design, seed: u64) -> Self {
        Self {
            m1,
            m2,
            design,
            column_replacement: true,
            dedupe: true,
            seed,
        }
    }

    /// Plan for the convex-decomposition pipeline: with replacement,
    /// duplicates kept (column multiplicity is harmless there).
    pub fn for_alg2(m1: usize, m2: usize, design: Design, seed: u64) -> Self {
        Self {
            m1,
            m2,
            design,
            column_replacement: true,
            dedupe: false,
            seed,
        }
    }

    /// Checks the plan against the data dimensions it will be applied to.
    pub fn validate(&self, n1: usize, n2: usize) -> Result<()> {
        if self.m1 == 0 || self.m2 == 0 {
            return Err(Error::InvalidParameter(
                "sketch sizes must be positive".into(),
            ));
        }
        if !self.column_replacement && self.m1 > n2 {
            return Err(Error::InvalidParameter(format!(
                "cannot draw {} of {n2} columns without replacement",
                self.m1
            )));
        }
        if self.design == Design::Rrd && self.m2 > n1 {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {} of {n1} rows",
                self.m2
            )));
        }
        Ok(())
    }
}

/// The row-compression operator, retained so the identical compression can
/// be replayed on the full data during outlier detection.
#[derive(Clone, Debug)]
pub enum RowOperator {
    /// Dense Gaussian map (`m2 x N1`).
    Gaussian(DenseMatrix),
    /// Sorted indices of the kept rows.
    Rows(Vec<usize>),
}

impl RowOperator {
    /// Applies the compression to any matrix with the original row count.
    pub fn apply(&self, data: &DenseMatrix) -> DenseMatrix {
        match self {
            RowOperator::Gaussian(phi) => phi.matmul(data),
            RowOperator::Rows(idx) => data.select_rows(idx),
        }
    }

    pub fn output_rows(&self) -> usize {
        match self {
            RowOperator::Gaussian(phi) => phi.rows(),
            RowOperator::Rows(idx) => idx.len(),
        }
    }
}

/// A constructed sketch: the sampled columns, their compressed form, and
/// the bookkeeping needed to map results back to the original matrix.
#[derive(Clone, Debug)]
pub struct Sketch {
    /// The sampled (uncompressed) columns, `N1 x effective_m1`.
    pub sampled_columns: DenseMatrix,
    /// The compressed sketch, `m2 x effective_m1`.
    pub compressed: DenseMatrix,
    /// Original column index of each sketch column.
    pub column_indices: Vec<usize>,
    pub row_operator: RowOperator,
    /// Column count after optional duplicate removal.
    pub effective_m1: usize,
}

impl Sketch {
    /// Verifies that `compressed` really is the stored operator applied to
    /// the sampled columns, within `tol` relative.
    pub fn check_consistency(&self, tol: f64) -> Result<()> {
        let recomputed = self.row_operator.apply(&self.sampled_columns);
        if !recomputed.approx_eq(&self.compressed, tol) {
            return Err(Error::Internal(
                "compressed sketch does not match operator * sampled columns".into(),
            ));
        }
        if self.column_indices.len() != self.effective_m1
            || self.sampled_columns.cols() != self.effective_m1
            || self.compressed.cols() != self.effective_m1
        {
            return Err(Error::Internal("sketch column bookkeeping mismatch".into()));
        }
        Ok(())
    }
}

/// The concentration profile of the row embedding: the exponent `f(eps)`
/// governing how unlikely a relative squared-length distortion beyond `eps`
/// is after compression to `m` rows (failure probability `2 exp(-m f(eps))`).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JlConfig {
    pub distribution: JlDistribution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JlDistribution {
    Gaussian,
}

impl JlConfig {
    pub fn gaussian() -> Self {
        Self {
            distribution: JlDistribution::Gaussian,
        }
    }

    /// `f(eps) = eps^2/4 - eps^3/6`, the standard exponent for Gaussian
    /// entries with variance `1/m`. Positive and increasing on `(0, 1)`.
    pub fn f_epsilon(&self, eps: f64) -> f64 {
        match self.distribution {
            JlDistribution::Gaussian => eps * eps / 4.0 - eps * eps * eps / 6.0,
        }
    }

    /// `f(1/2)` — the value the sufficient-size formulas use (= 1/24 for
    /// the Gaussian profile).
    pub fn f_at_half(&self) -> f64 {
        self.f_epsilon(0.5)
    }
}

/// Draws `m1` columns uniformly at random. With `replacement`, repeated
/// draws are allowed and `dedupe` keeps only the first occurrence of each
/// column (output order = first-draw order). Without replacement the output
/// is a uniform `m1`-subset in random order. Returns the selected columns
/// and their original indices.
pub fn sample_columns(
    data: &DenseMatrix,
    m1: usize,
    replacement: bool,
    dedupe: bool,
    seed: u64,
) -> Result<(DenseMatrix, Vec<usize>)> {
    let n2 = data.cols();
    if m1 == 0 {
        return Err(Error::InvalidParameter(
            "must sample at least one column".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = if replacement {
        let draws: Vec<usize> = (0..m1).map(|_| rng.random_range(0..n2)).collect();
        if dedupe {
            let mut seen = vec![false; n2];
            draws
                .into_iter()
                .filter(|&j| !std::mem::replace(&mut seen[j], true))
                .collect()
        } else {
            draws
        }
    } else {
        if m1 > n2 {
            return Err(Error::InvalidParameter(format!(
                "cannot draw {m1} of {n2} columns without replacement"
            )));
        }
        rand::seq::index::sample(&mut rng, n2, m1).into_vec()
    };
    Ok((data.select_columns(&indices), indices))
}

/// Compresses rows with a dense Gaussian map whose entries are i.i.d.
/// `N(0, 1/m2)`, so each output row preserves squared lengths in
/// expectation. Returns the compressed matrix and the operator itself for
/// replay on other inputs.
pub fn embed_rows_gaussian(
    columns: &DenseMatrix,
    m2: usize,
    seed: u64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if m2 == 0 {
        return Err(Error::InvalidParameter(
            "embedding dimension must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (1.0 / m2 as f64).sqrt();
    let phi = DenseMatrix::from_fn(m2, columns.rows(), |_, _| {
        sigma * rng.sample::<f64, _>(StandardNormal)
    });
    Ok((phi.matmul(columns), phi))
}

/// Keeps a uniform without-replacement subset of `m2` rows, indices sorted
/// ascending. Returns the kept rows and their indices.
pub fn sample_rows(
    columns: &DenseMatrix,
    m2: usize,
    seed: u64,
) -> Result<(DenseMatrix, Vec<usize>)> {
    let n1 = columns.rows();
    if m2 == 0 {
        return Err(Error::InvalidParameter(
            "must keep at least one row".into(),
        ));
    }
    if m2 > n1 {
        return Err(Error::InvalidParameter(format!(
            "cannot keep {m2} of {n1} rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n1, m2).into_vec();
    indices.sort_unstable();
    Ok((columns.select_rows(&indices), indices))
}

/// Runs both sketch stages on an instance's observed matrix and records all
/// bookkeeping. Column sampling and row compression use sub-seeds derived
/// from `plan.seed`, so the whole sketch is reproducible from the plan.
pub fn build_sketch(instance: &DataInstance, plan: &SketchPlan) -> Result<Sketch> {
    plan.validate(instance.n1(), instance.n2())?;
    let (sampled_columns, column_indices) = sample_columns(
        &instance.observed,
        plan.m1,
        plan.column_replacement,
        plan.dedupe,
        derive_seed(plan.seed, 1),
    )?;
    let row_seed = derive_seed(plan.seed, 2);
    let (compressed, row_operator) = match plan.design {
        Design::Red => {
            let (c, phi) = embed_rows_gaussian(&sampled_columns, plan.m2, row_seed)?;
            (c, RowOperator::Gaussian(phi))
        }
        Design::Rrd => {
            let (c, rows) = sample_rows(&sampled_columns, plan.m2, row_seed)?;
            (c, RowOperator::Rows(rows))
        }
    };
    let effective_m1 = column_indices.len();
    Ok(Sketch {
        sampled_columns,
        compressed,
        column_indices,
        row_operator,
        effective_m1,
    })
}

/// Writes a sketch into `dir` as binary matrices plus index sidecars:
/// `sampled_columns.rmat`, `compressed.rmat`, `column_indices.idx`, and the
/// row operator as either `row_operator.rmat` or `row_indices.idx`.
pub fn save_sketch<P: AsRef<Path>>(dir: P, sketch: &Sketch) -> Result<()> {
    let dir = dir.as_ref();
    matstore::io::write_matrix_bin(dir.join("sampled_columns.rmat"), &sketch.sampled_columns)?;
    matstore::io::write_matrix_bin(dir.join("compressed.rmat"), &sketch.compressed)?;
    matstore::io::write_index_list(dir.join("column_indices.idx"), &sketch.column_indices)?;
    match &sketch.row_operator {
        RowOperator::Gaussian(phi) => {
            matstore::io::write_matrix_bin(dir.join("row_operator.rmat"), phi)?
        }
        RowOperator::Rows(idx) => matstore::io::write_index_list(dir.join("row_indices.idx"), idx)?,
    }
    Ok(())
}

/// Reads a sketch previously written by [`save_sketch`], verifying the
/// operator/columns consistency invariant.
pub fn load_sketch<P: AsRef<Path>>(dir: P) -> Result<Sketch> {
    let dir = dir.as_ref();
    let sampled_columns = matstore::io::read_matrix_bin(dir.join("sampled_columns.rmat"))?;
    let compressed = matstore::io::read_matrix_bin(dir.join("compressed.rmat"))?;
    let column_indices = matstore::io::read_index_list(dir.join("column_indices.idx"))?;
    let gaussian = dir.join("row_operator.rmat");
    let row_operator = if gaussian.exists() {
        RowOperator::Gaussian(matstore::io::read_matrix_bin(gaussian)?)
    } else {
        RowOperator::Rows(matstore::io::read_index_list(dir.join("row_indices.idx"))?)
    };
    let effective_m1 = column_indices.len();
    let sketch = Sketch {
        sampled_columns,
        compressed,
        column_indices,
        row_operator,
        effective_m1,
    };
    sketch.check_consistency(1e-12)?;
    Ok(sketch)
}
