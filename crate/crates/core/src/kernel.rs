//! Restricted Gaussian kernel and per-node Gram tensors.
//!
//! For node `j` the kernel ignores coordinate `j`:
//!
//! ```text
//! k(u, v) = exp(-(1/gamma^2) * sum_{a != j} (u_a - v_a)^2)
//! ```
//!
//! A [`GramBundle`] collects everything node `j`'s regression needs:
//!
//! * `K[i][l]`   kernel value between samples `i` and `l`
//! * `D1[i][l][a]` derivative of `k(x^i, s)` in `s_a` at `s = x^l`
//!   (second-argument derivative; the first-argument derivative is its
//!   negation)
//! * `D2[i][l][k][a]` cross second derivative, coordinate `k` of the first
//!   argument and `a` of the second
//!
//! Closed forms, with `c = 2/gamma^2` and `w = u - v` masked at `j`:
//!
//! ```text
//! D1 entry =  c * w_a * K
//! D2 entry =  c * K * (delta_ka - c * w_k * w_a)      (zero if k = j or a = j)
//! ```
//!
//! `D2` is quadratic in the dimension; it is stored in full only while
//! `n^2 d^2` stays under a size threshold and is otherwise evaluated on
//! demand. Both paths share one entry formula, so they agree bitwise.

use ndarray::{Array2, Array3, Array4};
use thiserror::Error;

use crate::data::DataMatrix;

/// Materialized tensors stay below this many scalars by default.
pub const D2_MATERIALIZE_LIMIT: usize = 200_000_000;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("bandwidth must be positive and finite, got {0}")]
    BadBandwidth(f64),
    #[error("node index {node} out of range for {d} columns")]
    NodeOutOfRange { node: usize, d: usize },
    #[error("need at least 2 samples and 2 columns, got {n} x {d}")]
    DegenerateShape { n: usize, d: usize },
    #[error("data contains a non-finite value at row {row}, column {column}")]
    NonFiniteData { row: usize, column: usize },
}

/// Storage policy for the fourth-order derivative tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum D2Policy {
    /// Materialize when `n^2 d^2 <= D2_MATERIALIZE_LIMIT`.
    #[default]
    Auto,
    Materialize,
    OnTheFly,
}

/// Kernel settings for one bundle build.
#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    /// Bandwidth `gamma` of the Gaussian kernel.
    pub gamma: f64,
    pub d2: D2Policy,
}

impl KernelConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            d2: D2Policy::Auto,
        }
    }
}

/// Conventional bandwidth for `d`-dimensional data.
pub fn default_bandwidth(d: usize) -> f64 {
    0.4 * d as f64
}

enum D2Storage {
    Materialized(Array4<f64>),
    OnTheFly,
}

/// Kernel matrix and derivative tensors for a single node.
pub struct GramBundle {
    /// Excluded coordinate.
    pub node: usize,
    pub gamma: f64,
    /// `n x n` kernel matrix, symmetric with unit diagonal.
    pub k: Array2<f64>,
    /// `n x n x d` second-argument first derivatives; slice `[.., .., node]` is zero.
    pub d1: Array3<f64>,
    /// Data with the excluded column zeroed; masked differences drive every
    /// derivative formula.
    pub masked_x: Array2<f64>,
    d2: D2Storage,
}

impl GramBundle {
    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn d(&self) -> usize {
        self.masked_x.ncols()
    }

    /// `2 / gamma^2`, the scale constant of the derivative formulas.
    pub fn deriv_scale(&self) -> f64 {
        2.0 / (self.gamma * self.gamma)
    }

    pub fn d2_materialized(&self) -> bool {
        matches!(self.d2, D2Storage::Materialized(_))
    }

    #[inline]
    fn d2_formula(&self, i: usize, l: usize, k: usize, a: usize) -> f64 {
        let c = self.deriv_scale();
        let delta = if k == a && k != self.node { 1.0 } else { 0.0 };
        let wk = self.masked_x[[i, k]] - self.masked_x[[l, k]];
        let wa = self.masked_x[[i, a]] - self.masked_x[[l, a]];
        c * self.k[[i, l]] * (delta - c * wk * wa)
    }

    /// Cross second derivative `d^2 k(x^i, x^l) / d x^i_k d x^l_a`.
    #[inline]
    pub fn d2(&self, i: usize, l: usize, k: usize, a: usize) -> f64 {
        match &self.d2 {
            D2Storage::Materialized(t) => t[[i, l, k, a]],
            D2Storage::OnTheFly => self.d2_formula(i, l, k, a),
        }
    }
}

/// Full pairwise squared Euclidean distances, all coordinates included.
///
/// Built once per dataset; per-node restricted distances follow by
/// subtracting the excluded coordinate's contribution.
pub fn squared_distance_matrix(x: &DataMatrix) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let xi = x.row(i);
        for l in (i + 1)..n {
            let xl = x.row(l);
            let mut s = 0.0;
            for (u, v) in xi.iter().zip(xl.iter()) {
                let t = u - v;
                s += t * t;
            }
            out[[i, l]] = s;
            out[[l, i]] = s;
        }
    }
    out
}

fn validate(x: &DataMatrix, node: usize, cfg: &KernelConfig) -> Result<(), KernelError> {
    let (n, d) = x.dim();
    if n < 2 || d < 2 {
        return Err(KernelError::DegenerateShape { n, d });
    }
    if node >= d {
        return Err(KernelError::NodeOutOfRange { node, d });
    }
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        return Err(KernelError::BadBandwidth(cfg.gamma));
    }
    for ((row, column), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(KernelError::NonFiniteData { row, column });
        }
    }
    Ok(())
}

/// Builds node `node`'s bundle, computing the shared distance matrix itself.
pub fn gram_bundle(
    x: &DataMatrix,
    node: usize,
    cfg: &KernelConfig,
) -> Result<GramBundle, KernelError> {
    validate(x, node, cfg)?;
    let full = squared_distance_matrix(x);
    gram_bundle_with_distances(x, &full, node, cfg)
}

/// Builds node `node`'s bundle from a precomputed full distance matrix.
pub fn gram_bundle_with_distances(
    x: &DataMatrix,
    full_sq_dist: &Array2<f64>,
    node: usize,
    cfg: &KernelConfig,
) -> Result<GramBundle, KernelError> {
    validate(x, node, cfg)?;
    let (n, d) = x.dim();
    assert_eq!(full_sq_dist.dim(), (n, n), "distance matrix shape mismatch");
    let inv_g2 = 1.0 / (cfg.gamma * cfg.gamma);
    let c = 2.0 * inv_g2;

    let mut masked_x = x.clone();
    masked_x.column_mut(node).fill(0.0);

    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for l in (i + 1)..n {
            let tj = x[[i, node]] - x[[l, node]];
            // Cancellation can leave the restricted distance a few ulps
            // negative, which would push K above 1.
            let restricted = (full_sq_dist[[i, l]] - tj * tj).max(0.0);
            let v = (-restricted * inv_g2).exp();
            k[[i, l]] = v;
            k[[l, i]] = v;
        }
    }

    let mut d1 = Array3::zeros((n, n, d));
    for i in 0..n {
        for l in 0..n {
            if i == l {
                continue;
            }
            let ck = c * k[[i, l]];
            for a in 0..d {
                d1[[i, l, a]] = ck * (masked_x[[i, a]] - masked_x[[l, a]]);
            }
        }
    }

    let materialize = match cfg.d2 {
        D2Policy::Materialize => true,
        D2Policy::OnTheFly => false,
        D2Policy::Auto => n * n * d * d <= D2_MATERIALIZE_LIMIT,
    };

    let mut bundle = GramBundle {
        node,
        gamma: cfg.gamma,
        k,
        d1,
        masked_x,
        d2: D2Storage::OnTheFly,
    };
    if materialize {
        let mut t = Array4::zeros((n, n, d, d));
        for i in 0..n {
            for l in 0..n {
                for kk in 0..d {
                    for a in 0..d {
                        t[[i, l, kk, a]] = bundle.d2_formula(i, l, kk, a);
                    }
                }
            }
        }
        bundle.d2 = D2Storage::Materialized(t);
    }
    Ok(bundle)
}
