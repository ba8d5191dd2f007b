//! Closed-form sufficient sample sizes for the randomized pipelines: how
//! many columns (`m1`) and how many compressed rows (`m2`) guarantee exact
//! recovery with probability `1 - O(delta)`, as a function of rank,
//! coherence, outlier fraction, and the sketching design.
//!
//! Each calculator is a pure evaluation of the published inequalities — no
//! tightening, no clamping. Every intermediate branch value lands in
//! [`BoundResult::intermediates`] so a consumer can audit which branch was
//! binding. Regimes where the convex pipeline's guarantee does not apply
//! (too many outliers for the chosen concentration parameter `g`) come back
//! as structured infeasibility, never as an error and never silently
//! adjusted.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstore::CoherenceStats;
use crate::sketch::Design;

/// Which recovery pipeline a bound applies to: the per-column independence
/// test (`alg1`) or the convex norm-decomposition (`alg2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Independence,
    Convex,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alg1" | "independence" => Ok(Algorithm::Independence),
            "alg2" | "convex" => Ok(Algorithm::Convex),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm {other:?}, expected 'alg1' or 'alg2'"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Independence => "alg1",
            Algorithm::Convex => "alg2",
        })
    }
}

/// `ln(42 * sqrt(2))`: the per-dimension covering constant in the embedding
/// rank-preservation bounds.
fn embed_log() -> f64 {
    (42.0 * std::f64::consts::SQRT_2).ln()
}

/// Problem parameters feeding every bound calculator.
///
/// The slack constants have no single principled value: `c > 1` trades the
/// sampled-outlier bound against the inlier-count requirement, `g > 1`
/// plays the same role for the convex pipeline, and `c1`/`c2` are the
/// unspecified numerical constants of the row-span bound. [`Self::new`]
/// fills the defaults used throughout (`c = 2`, `c1 = c2 = 10`, Gaussian
/// `f(1/2) = 1/24`, and `g` at twice its minimum so the simplified
/// closed forms apply).
#[derive(Clone, Debug, Serialize)]
pub struct BoundInputs {
    /// Rank of the low-rank component.
    pub r: usize,
    /// Ambient row count.
    pub n1: usize,
    /// Total column count.
    pub n2: usize,
    /// Inlier column count.
    pub n2_prime: usize,
    /// Outlier column count; `k + n2_prime = n2`.
    pub k: usize,
    pub coherence: CoherenceStats,
    /// Per-event failure probability; the pipelines' overall failure
    /// probability is a small multiple of it.
    pub delta: f64,
    /// Concentration slack for the sampled-outlier bound, `> 1`.
    pub c: f64,
    /// Concentration slack for the convex pipeline's column bound, `> 1`.
    pub g: f64,
    /// Numerical constants of the row-span sufficient condition.
    pub c1: f64,
    pub c2: f64,
    /// Value of the embedding's concentration exponent at `eps = 1/2`.
    pub f_epsilon_at_half: f64,
}

impl BoundInputs {
    /// Builds inputs with the default slack constants. `g` is set to twice
    /// the minimum admissible value `(n2'/n2)(1 + 6 r mu_v * 121/9)`, the
    /// choice under which the convex pipeline's column bound simplifies to
    /// `max(12 (K/N2) (1 + 6 r mu_v * 121/9)^2 ln(2/delta), 10 r mu_v ln(2r/delta))`.
    pub fn new(
        r: usize,
        n1: usize,
        n2: usize,
        k: usize,
        coherence: CoherenceStats,
        delta: f64,
    ) -> Result<Self> {
        if k >= n2 {
            return Err(Error::InvalidParameter(
                "outlier count must be smaller than the column count".into(),
            ));
        }
        let n2_prime = n2 - k;
        let g_min = (n2_prime as f64 / n2 as f64)
            * (1.0 + 6.0 * (r as f64) * coherence.mu_v * (121.0 / 9.0));
        let inputs = Self {
            r,
            n1,
            n2,
            n2_prime,
            k,
            coherence,
            delta,
            c: 2.0,
            g: 2.0 * g_min,
            c1: 10.0,
            c2: 10.0,
            f_epsilon_at_half: 0.25 / 4.0 - 0.125 / 6.0,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.n1 == 0 || self.n2 == 0 || self.n2_prime == 0 {
            return Err(Error::InvalidParameter(
                "rank and dimensions must be positive".into(),
            ));
        }
        if self.k + self.n2_prime != self.n2 {
            return Err(Error::InvalidParameter(
                "outlier count plus inlier count must equal the column count".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 0.2) {
            return Err(Error::InvalidParameter(
                "failure probability must lie in (0, 0.2)".into(),
            ));
        }
        if !(self.c > 1.0 && self.c.is_finite()) || !(self.g > 1.0 && self.g.is_finite()) {
            return Err(Error::InvalidParameter(
                "slack constants c and g must be finite and greater than 1".into(),
            ));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) || !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::InvalidParameter(
                "row-span constants must be positive and finite".into(),
            ));
        }
        if !(self.f_epsilon_at_half > 0.0 && self.f_epsilon_at_half.is_finite()) {
            return Err(Error::InvalidParameter(
                "embedding exponent must be positive and finite".into(),
            ));
        }
        for (name, v) in [
            ("mu_v", self.coherence.mu_v),
            ("mu_u", self.coherence.mu_u),
            ("eta_v", self.coherence.eta_v),
            ("eta_u", self.coherence.eta_u),
            ("gamma", self.coherence.gamma),
            ("mu_v_prime", self.coherence.mu_v_prime),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "coherence parameter {name} must be positive and finite"
                )));
            }
        }
        Ok(())
    }

    fn k_over_n2p(&self) -> f64 {
        self.k as f64 / self.n2_prime as f64
    }

    fn n2_over_n2p(&self) -> f64 {
        self.n2 as f64 / self.n2_prime as f64
    }
}

/// Sufficient sample sizes for one pipeline/design pair, with every
/// intermediate branch recorded for audit.
///
/// `alpha`/`beta` exist only for the independence pipeline, `zeta` and
/// `k_admissible` only for the convex one; `None` means the quantity plays
/// no role in that pipeline's bound, not that it is unknown. All present
/// values are positive and finite, and `m2_sufficient >= r`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundResult {
    pub algorithm: Algorithm,
    pub design: Design,
    /// Sufficient number of sampled inliers (independence pipeline).
    pub alpha: Option<f64>,
    /// Oversampling factor turning `alpha` inliers into `m1` columns.
    pub beta: Option<f64>,
    /// Column-sampling sufficient count before the `n2/n2'` inflation
    /// (convex pipeline).
    pub zeta: Option<f64>,
    /// Upper bound on the number of outliers among the sampled columns
    /// that the row-compression branches are sized for.
    pub q_bound: f64,
    pub m1_sufficient: usize,
    pub m2_sufficient: usize,
    /// Largest outlier count the convex pipeline's guarantee covers at the
    /// given `g`; `None` for the independence pipeline.
    pub k_admissible: Option<f64>,
    /// Whether the guarantee applies to these inputs at all. Always true
    /// for the independence pipeline; false for the convex one when `g` is
    /// below its minimum or `k` exceeds `k_admissible`.
    pub feasible: bool,
    /// Every branch value the final numbers were assembled from, keyed by
    /// a stable descriptive name.
    pub intermediates: BTreeMap<String, f64>,
}

fn ceil_count(x: f64) -> usize {
    debug_assert!(x.is_finite() && x >= 0.0, "bound must be finite, got {x}");
    x.ceil() as usize
}

/// alpha = max(20 mu_v' r ln(4r/delta), 3 c^2 (K/N2') ln(2/delta)):
/// enough sampled inliers to span the subspace, and enough that the
/// outlier-count concentration applies.
fn alpha_branches(inputs: &BoundInputs) -> (f64, f64, f64) {
    let r = inputs.r as f64;
    let sampling = 20.0 * inputs.coherence.mu_v_prime * r * (4.0 * r / inputs.delta).ln();
    let outliers = 3.0 * inputs.c * inputs.c * inputs.k_over_n2p() * (2.0 / inputs.delta).ln();
    (sampling.max(outliers), sampling, outliers)
}

/// Column-sampling quantities shared by both independence-pipeline bounds:
/// (alpha, beta, q, m1_raw) plus the audit entries.
fn independence_column_terms(inputs: &BoundInputs, im: &mut BTreeMap<String, f64>) -> (f64, f64, f64, f64) {
    let (alpha, a_sampling, a_outliers) = alpha_branches(inputs);
    let beta = 2.0 + (3.0 / alpha) * (2.0 / inputs.delta).ln();
    let q = alpha * (beta * inputs.k_over_n2p() + 1.0 / inputs.c);
    let m1_raw = beta * alpha * inputs.n2_over_n2p();
    im.insert("alpha_branch_span".into(), a_sampling);
    im.insert("alpha_branch_outlier_concentration".into(), a_outliers);
    im.insert("alpha".into(), alpha);
    im.insert("beta".into(), beta);
    im.insert("q_bound".into(), q);
    im.insert("m1_raw".into(), m1_raw);
    (alpha, beta, q, m1_raw)
}

/// Independence pipeline with Gaussian row embedding. `m2` must both
/// preserve the rank of the sampled block (a `r + q`-dimensional covering
/// term) and keep every compressed outlier out of the inliers' span
/// (an `r + 1`-dimensional term paying a union bound over the `K`
/// candidate outliers; skipped when `k = 0`).
pub fn bound_alg1_red(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let mut im = BTreeMap::new();
    let (alpha, beta, q, m1_raw) = independence_column_terms(inputs, &mut im);
    let r = inputs.r as f64;
    let f = inputs.f_epsilon_at_half;
    let log_2d = (2.0 / inputs.delta).ln();

    let rank_branch = ((r + q) * embed_log() + log_2d) / f;
    im.insert("m2_branch_embed_rank".into(), rank_branch);
    let mut m2_raw = rank_branch;
    if inputs.k > 0 {
        let sep_branch = ((r + 1.0) * embed_log() + (inputs.k as f64).ln() + log_2d) / f;
        im.insert("m2_branch_embed_separation".into(), sep_branch);
        m2_raw = m2_raw.max(sep_branch);
    }
    im.insert("m2_raw".into(), m2_raw);

    let result = BoundResult {
        algorithm: Algorithm::Independence,
        design: Design::Red,
        alpha: Some(alpha),
        beta: Some(beta),
        zeta: None,
        q_bound: q,
        m1_sufficient: ceil_count(m1_raw),
        m2_sufficient: ceil_count(m2_raw),
        k_admissible: None,
        feasible: true,
        intermediates: im,
    };
    debug_assert!(result.m2_sufficient >= inputs.r);
    Ok(result)
}

/// Independence pipeline with row sampling. The rank-preservation cost now
/// depends on the row coherence `eta_u` (incoherent rows can be subsampled,
/// concentrated ones cannot), plus binomial-tail terms in the sampled
/// dimension. The final outlier-separation branch has two published forms
/// that differ in whether the outlier count enters as the worst case `K` or
/// as the sampled bound `q`; both are evaluated
/// (`m2_branch_row_separation_k` / `m2_branch_row_separation_q`) and the
/// larger governs.
pub fn bound_alg1_rrd(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let mut im = BTreeMap::new();
    let (alpha, beta, q, m1_raw) = independence_column_terms(inputs, &mut im);
    let r = inputs.r as f64;
    let log_2d = (2.0 / inputs.delta).ln();

    let span_branch =
        r * inputs.coherence.eta_u.powi(2) * (inputs.c1 * r.ln()).max(inputs.c2 * (3.0 / inputs.delta).ln());
    let rank_branch = r + q + 2.0 * log_2d + (8.0 * q * log_2d).sqrt();
    im.insert("m2_branch_row_span".into(), span_branch);
    im.insert("m2_branch_row_rank".into(), rank_branch);
    let mut m2_raw = span_branch.max(rank_branch);
    if inputs.k > 0 {
        let log_2kd = (2.0 * inputs.k as f64 / inputs.delta).ln();
        let sep_k = r + 1.0 + 2.0 * log_2kd + (8.0 * log_2kd).sqrt();
        im.insert("m2_branch_row_separation_k".into(), sep_k);
        m2_raw = m2_raw.max(sep_k);
        let log_2qd = (2.0 * q / inputs.delta).ln();
        if log_2qd > 0.0 {
            let sep_q = r + 1.0 + 2.0 * log_2qd + (8.0 * log_2qd).sqrt();
            im.insert("m2_branch_row_separation_q".into(), sep_q);
            m2_raw = m2_raw.max(sep_q);
        }
    }
    im.insert("m2_raw".into(), m2_raw);

    let result = BoundResult {
        algorithm: Algorithm::Independence,
        design: Design::Rrd,
        alpha: Some(alpha),
        beta: Some(beta),
        zeta: None,
        q_bound: q,
        m1_sufficient: ceil_count(m1_raw),
        m2_sufficient: ceil_count(m2_raw),
        k_admissible: None,
        feasible: true,
        intermediates: im,
    };
    debug_assert!(result.m2_sufficient >= inputs.r);
    Ok(result)
}

/// Convex-pipeline column terms shared by both designs: the admissibility
/// check on (g, K) and the sampling count zeta. Returns
/// (zeta, m1_raw, k_admissible, feasible).
fn convex_column_terms(inputs: &BoundInputs, im: &mut BTreeMap<String, f64>) -> (f64, f64, f64, bool) {
    let r = inputs.r as f64;
    let log_2d = (2.0 / inputs.delta).ln();
    let a = 1.0 + 6.0 * r * inputs.coherence.mu_v * (121.0 / 9.0);
    let g_min = a / inputs.n2_over_n2p();
    // K/N2' <= (g n2/n2' - a) / (g a), scaled up to a count.
    let k_ratio_max = (inputs.g * inputs.n2_over_n2p() - a) / (inputs.g * a);
    let k_admissible = k_ratio_max * inputs.n2_prime as f64;
    let feasible = inputs.g >= g_min && inputs.k as f64 <= k_admissible;

    let zeta_outliers = 3.0 * inputs.g * inputs.g * inputs.k_over_n2p() * log_2d;
    let zeta_span =
        (1.0 / inputs.n2_over_n2p()) * 10.0 * r * inputs.coherence.mu_v * (2.0 * r / inputs.delta).ln();
    let zeta = zeta_outliers.max(zeta_span);
    let m1_raw = inputs.n2_over_n2p() * zeta;

    im.insert("outlier_amplification".into(), a);
    im.insert("g".into(), inputs.g);
    im.insert("g_min".into(), g_min);
    im.insert("k_admissible_ratio".into(), k_ratio_max);
    im.insert("k_admissible".into(), k_admissible);
    im.insert("zeta_branch_outlier_concentration".into(), zeta_outliers);
    im.insert("zeta_branch_span".into(), zeta_span);
    im.insert("zeta".into(), zeta);
    im.insert("m1_raw".into(), m1_raw);
    (zeta, m1_raw, k_admissible, feasible)
}

/// Convex pipeline with Gaussian row embedding. The compression only needs
/// to keep compressed outliers out of the compressed inlier span (the
/// decomposition supplies the rest), giving a single `r + 1`-dimensional
/// branch with a union bound over `K`. With `k = 0` that degenerates to
/// plain rank preservation of the sampled inliers.
pub fn bound_alg2_red(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let mut im = BTreeMap::new();
    let (zeta, m1_raw, k_admissible, feasible) = convex_column_terms(inputs, &mut im);
    let r = inputs.r as f64;
    let f = inputs.f_epsilon_at_half;
    let log_2d = (2.0 / inputs.delta).ln();

    let m2_raw = if inputs.k > 0 {
        let sep = ((r + 1.0) * embed_log() + (inputs.k as f64).ln() + log_2d) / f;
        im.insert("m2_branch_embed_separation".into(), sep);
        sep
    } else {
        let rank_only = (r * embed_log() + log_2d) / f;
        im.insert("m2_branch_embed_rank".into(), rank_only);
        rank_only
    };
    im.insert("m2_raw".into(), m2_raw);

    let result = BoundResult {
        algorithm: Algorithm::Convex,
        design: Design::Red,
        alpha: None,
        beta: None,
        zeta: Some(zeta),
        q_bound: inputs.k as f64,
        m1_sufficient: ceil_count(m1_raw),
        m2_sufficient: ceil_count(m2_raw),
        k_admissible: Some(k_admissible),
        feasible,
        intermediates: im,
    };
    debug_assert!(result.m2_sufficient >= inputs.r);
    Ok(result)
}

/// Convex pipeline with row sampling: the row-span coherence branch plus
/// the outlier-separation tail with a union bound over `K` (skipped when
/// `k = 0`, where only the span branch and the `q = 0` rank tail remain).
pub fn bound_alg2_rrd(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let mut im = BTreeMap::new();
    let (zeta, m1_raw, k_admissible, feasible) = convex_column_terms(inputs, &mut im);
    let r = inputs.r as f64;
    let log_2d = (2.0 / inputs.delta).ln();

    let span_branch =
        r * inputs.coherence.eta_u.powi(2) * (inputs.c1 * r.ln()).max(inputs.c2 * (3.0 / inputs.delta).ln());
    im.insert("m2_branch_row_span".into(), span_branch);
    let mut m2_raw = span_branch;
    if inputs.k > 0 {
        let log_2kd = (2.0 * inputs.k as f64 / inputs.delta).ln();
        let sep = r + 1.0 + 2.0 * log_2kd + (8.0 * log_2kd).sqrt();
        im.insert("m2_branch_row_separation_k".into(), sep);
        m2_raw = m2_raw.max(sep);
    } else {
        let rank_tail = r + 2.0 * log_2d;
        im.insert("m2_branch_row_rank".into(), rank_tail);
        m2_raw = m2_raw.max(rank_tail);
    }
    im.insert("m2_raw".into(), m2_raw);

    let result = BoundResult {
        algorithm: Algorithm::Convex,
        design: Design::Rrd,
        alpha: None,
        beta: None,
        zeta: Some(zeta),
        q_bound: inputs.k as f64,
        m1_sufficient: ceil_count(m1_raw),
        m2_sufficient: ceil_count(m2_raw),
        k_admissible: Some(k_admissible),
        feasible,
        intermediates: im,
    };
    debug_assert!(result.m2_sufficient >= inputs.r);
    Ok(result)
}

/// Evaluates every individual sufficient-sample expression the pipeline
/// bounds are assembled from, for diagnostics and for plotting empirical
/// sample requirements against each term separately.
///
/// Keys:
/// - `column_span_count`: columns of the inlier matrix that span its
///   column space whp (`10 mu_v' r ln(2r/delta)`).
/// - `inlier_oversampling_beta`: factor ensuring at least alpha sampled
///   inliers.
/// - `sampled_outlier_bound_q`: high-probability cap on outliers among the
///   sampled columns.
/// - `embed_rank_m2`: embedded dimension preserving the rank of the sampled
///   block (`q`-aware covering bound).
/// - `embed_separation_m2`: embedded dimension keeping each compressed
///   outlier out of the compressed inlier span (pays `ln q`).
/// - `row_span_m2`: sampled rows spanning the row space
///   (`r eta_u^2 max(c1 ln r, c2 ln(3/delta))`).
/// - `row_rank_m2`: rows preserving the rank of the sampled block
///   (span branch plus a `q`-dependent tail).
/// - `row_separation_m2`: rows keeping sampled outliers separated (span
///   branch plus a `ln(2q/delta)` tail).
pub fn bound_lemmas(inputs: &BoundInputs) -> Result<BTreeMap<String, f64>> {
    inputs.validate()?;
    let mut im = BTreeMap::new();
    let (alpha, beta, q, _) = independence_column_terms(inputs, &mut im);
    let mut map = BTreeMap::new();
    let r = inputs.r as f64;
    let f = inputs.f_epsilon_at_half;
    let log_2d = (2.0 / inputs.delta).ln();

    map.insert(
        "column_span_count".to_string(),
        10.0 * inputs.coherence.mu_v_prime * r * (2.0 * r / inputs.delta).ln(),
    );
    map.insert("inlier_oversampling_beta".to_string(), beta);
    map.insert("sampled_outlier_bound_q".to_string(), q);
    map.insert(
        "embed_rank_m2".to_string(),
        ((r + q) * embed_log() + log_2d) / f,
    );
    map.insert(
        "embed_separation_m2".to_string(),
        ((r + 1.0) * embed_log() + q.ln() + log_2d) / f,
    );
    let row_span = r
        * inputs.coherence.eta_u.powi(2)
        * (inputs.c1 * r.ln()).max(inputs.c2 * (3.0 / inputs.delta).ln());
    map.insert("row_span_m2".to_string(), row_span);
    map.insert(
        "row_rank_m2".to_string(),
        row_span.max(r + q + 2.0 * log_2d + (8.0 * q * log_2d).sqrt()),
    );
    let log_2qd = (2.0 * q / inputs.delta).ln();
    map.insert(
        "row_separation_m2".to_string(),
        row_span.max(r + 1.0 + 2.0 * log_2qd + (8.0 * log_2qd).sqrt()),
    );
    map.insert("alpha".to_string(), alpha);
    Ok(map)
}
