//! Per-node regression functions in representer form.
//!
//! Node `j`'s candidate function is a linear combination of kernel sections
//! and kernel derivative sections anchored at the sample:
//!
//! ```text
//! f_j(x) = sum_i alpha_i k(x, x^i) + sum_{i,a} beta_{a,i} dk(x, s)/ds_a |_{s = x^i}
//! ```
//!
//! with the restricted kernel of [`crate::kernel`], so nothing here can
//! depend on coordinate `j`; row `j` of `beta` is structurally zero.
//!
//! Evaluation, partial derivatives, and the RKHS norm are all contractions of
//! the bundle tensors. They are computed in factored form, a handful of
//! `n x n` matrix products, instead of per-entry tensor loops. The factored
//! expressions follow from `D1 = c * W ∘ K` and
//! `D2 = c * K ∘ (delta - c * W ∘ W')` where `W` holds masked coordinate
//! differences, and agree with the literal contractions to rounding error.

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::kernel::GramBundle;

#[derive(Debug, Error)]
pub enum RepresenterError {
    #[error("alpha has length {alpha_len}, expected n = {n}")]
    AlphaShape { alpha_len: usize, n: usize },
    #[error("beta is {rows} x {cols}, expected {d} x {n}")]
    BetaShape {
        rows: usize,
        cols: usize,
        d: usize,
        n: usize,
    },
    #[error("beta row {node} must be zero for the node's own coordinate")]
    ExcludedRowNotZero { node: usize },
}

/// Coefficients of one node's function.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NodeParams {
    /// Kernel-section weights, length `n`.
    pub alpha: Array1<f64>,
    /// Derivative-section weights, `d x n`; row `j` stays zero for node `j`.
    pub beta: Array2<f64>,
}

impl NodeParams {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            alpha: Array1::zeros(n),
            beta: Array2::zeros((d, n)),
        }
    }
}

/// One `NodeParams` per node, indexed by node.
pub type ModelParams = Vec<NodeParams>;

pub fn zero_model(n: usize, d: usize) -> ModelParams {
    (0..d).map(|_| NodeParams::zeros(n, d)).collect()
}

pub(crate) fn validate(bundle: &GramBundle, params: &NodeParams) -> Result<(), RepresenterError> {
    let (n, d) = (bundle.n(), bundle.d());
    if params.alpha.len() != n {
        return Err(RepresenterError::AlphaShape {
            alpha_len: params.alpha.len(),
            n,
        });
    }
    if params.beta.dim() != (d, n) {
        return Err(RepresenterError::BetaShape {
            rows: params.beta.nrows(),
            cols: params.beta.ncols(),
            d,
            n,
        });
    }
    if params.beta.row(bundle.node).iter().any(|&v| v != 0.0) {
        return Err(RepresenterError::ExcludedRowNotZero { node: bundle.node });
    }
    Ok(())
}

/// Shared factored intermediates for one `(bundle, params)` pair.
///
/// `s_beta[p][i] = sum_a (xm[p][a] - xm[i][a]) * beta[a][i]` is the masked
/// difference contraction that appears in every beta term.
pub(crate) struct Contractions {
    /// `(K ∘ s_beta)` row sums; the beta part of evaluation is `c * u`.
    pub u: Array1<f64>,
    pub s_beta: Array2<f64>,
}

pub(crate) fn contractions(bundle: &GramBundle, params: &NodeParams) -> Contractions {
    let n = bundle.n();
    let xm_beta = bundle.masked_x.dot(&params.beta);
    let q = Array1::from_shape_fn(n, |i| xm_beta[[i, i]]);
    let mut s_beta = xm_beta;
    for mut row in s_beta.rows_mut() {
        row -= &q;
    }
    let mut u = Array1::zeros(n);
    for p in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            acc += bundle.k[[p, i]] * s_beta[[p, i]];
        }
        u[p] = acc;
    }
    Contractions { u, s_beta }
}

/// Evaluates the node's function at every sample row.
pub fn eval_node_on_data(
    bundle: &GramBundle,
    params: &NodeParams,
) -> Result<Array1<f64>, RepresenterError> {
    validate(bundle, params)?;
    let c = bundle.deriv_scale();
    let ct = contractions(bundle, params);
    let mut out = bundle.k.dot(&params.alpha);
    out.scaled_add(c, &ct.u);
    Ok(out)
}

/// Evaluates the node's function at an arbitrary point.
///
/// Coordinate `node` of `x_new` is ignored by construction.
pub fn eval_node_at(
    bundle: &GramBundle,
    params: &NodeParams,
    x_new: ArrayView1<f64>,
) -> Result<f64, RepresenterError> {
    validate(bundle, params)?;
    assert_eq!(x_new.len(), bundle.d(), "query point dimension mismatch");
    let inv_g2 = 1.0 / (bundle.gamma * bundle.gamma);
    let c = 2.0 * inv_g2;
    let mut acc = 0.0;
    for i in 0..bundle.n() {
        let mut sq = 0.0;
        let mut sb = 0.0;
        for a in 0..bundle.d() {
            if a == bundle.node {
                continue;
            }
            let w = x_new[a] - bundle.masked_x[[i, a]];
            sq += w * w;
            sb += w * params.beta[[a, i]];
        }
        let k = (-sq * inv_g2).exp();
        acc += k * (params.alpha[i] + c * sb);
    }
    Ok(acc)
}

/// Partial derivatives of the node's function at every sample row: an
/// `n x d` matrix whose column `node` is structurally zero.
pub fn node_partials_on_data(
    bundle: &GramBundle,
    params: &NodeParams,
) -> Result<Array2<f64>, RepresenterError> {
    validate(bundle, params)?;
    let ct = contractions(bundle, params);
    Ok(node_partials_inner(bundle, params, &ct))
}

pub(crate) fn node_partials_inner(
    bundle: &GramBundle,
    params: &NodeParams,
    ct: &Contractions,
) -> Array2<f64> {
    let n = bundle.n();
    let c = bundle.deriv_scale();
    // g[i][l] = K[i][l] * (alpha[l] + c * s_beta[i][l]) collects both the
    // alpha and the cross-difference beta contributions.
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for l in 0..n {
            g[[i, l]] = bundle.k[[i, l]] * (params.alpha[l] + c * ct.s_beta[[i, l]]);
        }
    }
    let g_row_sums = g.sum_axis(ndarray::Axis(1));
    let g_xm = g.dot(&bundle.masked_x);
    let k_bt = bundle.k.dot(&params.beta.t());
    let mut p = k_bt;
    for i in 0..n {
        let r = g_row_sums[i];
        for a in 0..bundle.d() {
            p[[i, a]] -= r * bundle.masked_x[[i, a]] - g_xm[[i, a]];
            p[[i, a]] *= c;
        }
    }
    p.column_mut(bundle.node).fill(0.0);
    p
}

/// Squared RKHS norm of the node's function.
///
/// This is the PSD quadratic form of the kernel and derivative sections; it
/// is clamped at zero against rounding.
pub fn rkhs_norm_sq(bundle: &GramBundle, params: &NodeParams) -> Result<f64, RepresenterError> {
    validate(bundle, params)?;
    let ct = contractions(bundle, params);
    Ok(rkhs_norm_sq_inner(bundle, params, &ct))
}

pub(crate) fn rkhs_norm_sq_inner(
    bundle: &GramBundle,
    params: &NodeParams,
    ct: &Contractions,
) -> f64 {
    let n = bundle.n();
    let c = bundle.deriv_scale();
    let alpha_term = params.alpha.dot(&bundle.k.dot(&params.alpha));
    let cross_term = 2.0 * c * params.alpha.dot(&ct.u);
    // beta' K beta is evaluated through beta K, which the gradient reuses.
    let beta_k = params.beta.dot(&bundle.k);
    let bkb = beta_k
        .iter()
        .zip(params.beta.iter())
        .map(|(x, y)| x * y)
        .sum::<f64>();
    let mut s2 = 0.0;
    for i in 0..n {
        for l in 0..n {
            s2 += bundle.k[[i, l]] * ct.s_beta[[i, l]] * ct.s_beta[[l, i]];
        }
    }
    (alpha_term + cross_term + c * (bkb + c * s2)).max(0.0)
}
