//! Log-determinant acyclicity measure and graph utilities.
//!
//! For a nonnegative matrix `A` with spectral radius below `s`,
//!
//! ```text
//! h(A, s) = -log det(sI - A) + d log s
//! ```
//!
//! is finite, nonnegative, and zero exactly when `A`'s support is acyclic.
//! Its gradient is `(sI - A)^{-T}`, which is entrywise nonnegative on the
//! whole domain.
//!
//! The domain check and the value share one mechanism: `sI - A` is factored
//! by Gaussian elimination **without pivoting**. For a nonnegative `A` this
//! factorization has all-positive pivots exactly when `sI - A` is a
//! nonsingular M-matrix, i.e. when the spectral radius of `A` is below `s`.
//! The log-determinant is the pivot log-sum. Elimination on such matrices
//! never subtracts through a zero multiplier, so entries that are zero by
//! sparsity stay exactly zero; on a DAG-supported matrix every pivot stays
//! exactly `s`, making `h` and the weight-space gradient exact zeros rather
//! than merely small.

use ndarray::Array2;
use thiserror::Error;

/// `d x d` nonnegative matrix of edge strengths; entry `(k, j)` weighs the
/// edge `k -> j`.
pub type WeightedAdjacency = Array2<f64>;

#[derive(Debug, Error)]
pub enum AcyclicityError {
    #[error("matrix is {rows} x {cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) = {value} is negative or non-finite")]
    BadEntry {
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("scale parameter s = {0} must be positive and finite")]
    BadScale(f64),
    #[error("spectral radius is not below s = {s}; log-det barrier undefined")]
    OutOfDomain { s: f64 },
}

/// Boolean adjacency on `d` nodes; entry `(u, v)` is the edge `u -> v`.
/// Self-loops are rejected at construction.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DirectedGraph {
    adj: Array2<bool>,
}

impl DirectedGraph {
    pub fn empty(d: usize) -> Self {
        Self {
            adj: Array2::from_elem((d, d), false),
        }
    }

    /// Builds from 0-based edge pairs.
    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(d);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn d(&self) -> usize {
        self.adj.nrows()
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert_ne!(u, v, "self-loops are not representable");
        self.adj[[u, v]] = true;
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[[u, v]]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count()
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.d() {
            for v in 0..self.d() {
                if self.adj[[u, v]] {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// No-pivot LU factors packed in one matrix: unit-lower multipliers below the
/// diagonal, the upper factor on and above it.
struct LuNoPivot {
    lu: Array2<f64>,
}

impl LuNoPivot {
    /// Returns `None` as soon as a pivot fails to be strictly positive;
    /// for `sI - A` with `A >= 0` that is exactly the out-of-domain signal.
    fn factor(m: &Array2<f64>) -> Option<Self> {
        let d = m.nrows();
        let mut lu = m.clone();
        for k in 0..d {
            let pivot = lu[[k, k]];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return None;
            }
            for i in (k + 1)..d {
                let mult = lu[[i, k]] / pivot;
                lu[[i, k]] = mult;
                if mult != 0.0 {
                    for j in (k + 1)..d {
                        let u = lu[[k, j]];
                        if u != 0.0 {
                            lu[[i, j]] -= mult * u;
                        }
                    }
                }
            }
        }
        Some(Self { lu })
    }

    fn d(&self) -> usize {
        self.lu.nrows()
    }

    /// `sum_k (ln s - ln pivot_k)`; exactly zero when every pivot equals `s`.
    fn neg_log_det_plus_d_log_s(&self, s: f64) -> f64 {
        let ln_s = s.ln();
        (0..self.d()).map(|k| ln_s - self.lu[[k, k]].ln()).sum()
    }

    /// Inverse of the factored matrix via one forward and one back solve per
    /// column. Structural zeros survive exactly.
    fn inverse(&self) -> Array2<f64> {
        let d = self.d();
        let mut inv = Array2::zeros((d, d));
        let mut y = vec![0.0; d];
        for c in 0..d {
            for i in 0..d {
                let mut v = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    let l = self.lu[[i, k]];
                    if l != 0.0 && y[k] != 0.0 {
                        v -= l * y[k];
                    }
                }
                y[i] = v;
            }
            for i in (0..d).rev() {
                let mut v = y[i];
                for k in (i + 1)..d {
                    let u = self.lu[[i, k]];
                    if u != 0.0 && inv[[k, c]] != 0.0 {
                        v -= u * inv[[k, c]];
                    }
                }
                inv[[i, c]] = v / self.lu[[i, i]];
            }
        }
        inv
    }
}

fn validate(a: &Array2<f64>, s: f64) -> Result<(), AcyclicityError> {
    if a.nrows() != a.ncols() {
        return Err(AcyclicityError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(AcyclicityError::BadScale(s));
    }
    for ((row, col), &value) in a.indexed_iter() {
        if !value.is_finite() || value < 0.0 {
            return Err(AcyclicityError::BadEntry { row, col, value });
        }
    }
    Ok(())
}

fn shifted(a: &Array2<f64>, s: f64) -> Array2<f64> {
    let d = a.nrows();
    let mut m = -a.clone();
    for k in 0..d {
        m[[k, k]] += s;
    }
    m
}

fn factor_checked(a: &Array2<f64>, s: f64) -> Result<LuNoPivot, AcyclicityError> {
    validate(a, s)?;
    LuNoPivot::factor(&shifted(a, s)).ok_or(AcyclicityError::OutOfDomain { s })
}

/// Acyclicity measure `-log det(sI - A) + d log s`.
pub fn h_ldet(a: &Array2<f64>, s: f64) -> Result<f64, AcyclicityError> {
    Ok(factor_checked(a, s)?.neg_log_det_plus_d_log_s(s))
}

/// Gradient of [`h_ldet`] in `A`: `(sI - A)^{-T}`.
pub fn grad_h_ldet(a: &Array2<f64>, s: f64) -> Result<Array2<f64>, AcyclicityError> {
    Ok(factor_checked(a, s)?.inverse().reversed_axes())
}

/// Value and gradient from one shared factorization.
pub fn h_ldet_and_grad(a: &Array2<f64>, s: f64) -> Result<(f64, Array2<f64>), AcyclicityError> {
    let lu = factor_checked(a, s)?;
    Ok((
        lu.neg_log_det_plus_d_log_s(s),
        lu.inverse().reversed_axes(),
    ))
}

/// Measure of the elementwise square: `h(W ∘ W, s)` with its `W`-gradient
/// `2 (sI - W∘W)^{-T} ∘ W`, sharing one factorization.
pub fn h_ldet_and_grad_wrt_weights(
    w: &WeightedAdjacency,
    s: f64,
) -> Result<(f64, Array2<f64>), AcyclicityError> {
    let a = w * w;
    let (h, mut g) = h_ldet_and_grad(&a, s)?;
    g *= 2.0;
    g *= w;
    Ok((h, g))
}

/// Gradient of `W -> h(W ∘ W, s)`; exactly zero when `W`'s support is a DAG.
pub fn grad_h_ldet_wrt_weights(
    w: &WeightedAdjacency,
    s: f64,
) -> Result<Array2<f64>, AcyclicityError> {
    Ok(h_ldet_and_grad_wrt_weights(w, s)?.1)
}

/// Membership in the barrier's domain: spectral radius strictly below `s`.
/// Total on any square matrix; junk input simply reports `false`.
pub fn in_domain(a: &Array2<f64>, s: f64) -> bool {
    if a.nrows() != a.ncols() || !(s.is_finite() && s > 0.0) {
        return false;
    }
    if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return false;
    }
    LuNoPivot::factor(&shifted(a, s)).is_some()
}

/// Kahn's algorithm.
pub fn is_dag(graph: &DirectedGraph) -> bool {
    let d = graph.d();
    let mut indeg = vec![0usize; d];
    for (_, v) in graph.edges() {
        indeg[v] += 1;
    }
    let mut queue: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = queue.pop() {
        seen += 1;
        for v in 0..d {
            if graph.has_edge(u, v) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
    }
    seen == d
}
