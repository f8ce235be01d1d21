//! Ground-truth DAG generation and structural-equation data simulation.
//!
//! A dataset is produced in two phases. Planning draws the graph and the
//! per-node mechanism instantiation (network weights, function choices);
//! execution walks the graph in topological order and fills columns with
//! `x_j = g_j(parents) + eps_j`, `eps_j ~ N(0,1)`. Root columns are pure
//! noise. The split exists so tests can inspect or hand-build mechanisms
//! and replay executions.
//!
//! Randomness discipline: one base seed feeds independent ChaCha streams,
//! stream `0` for the graph, stream `2j+1` for node `j`'s plan draws, and
//! stream `2j+2` for its execution draws (noise first, then any mechanism
//! sampling). Changing one node's execution stream therefore perturbs that
//! node and its descendants only.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::acyclicity::DirectedGraph;
use crate::data::DataMatrix;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    BadSpec(String),
    #[error("covariance factorization failed even at maximum jitter")]
    GpFactorization,
}

/// Structural mechanism family applied at every non-root node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// One joint Gaussian-process draw over the parent submatrix.
    Gp,
    /// Independent single-parent Gaussian-process draws, summed.
    GpAdditive,
    /// One hidden layer of 100 sigmoid units, no biases.
    Mlp,
    /// Per-parent function picked uniformly from three fixed forms, summed.
    Combinatorial,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mechanism::Gp => "gp",
            Mechanism::GpAdditive => "gp-additive",
            Mechanism::Mlp => "mlp",
            Mechanism::Combinatorial => "combinatorial",
        };
        f.write_str(s)
    }
}

/// Settings of one simulated dataset. Noise is always standard normal.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SemSpec {
    pub d: usize,
    /// Edge multiplier: the graph has `m * d` expected edges.
    pub m: usize,
    pub mechanism: Mechanism,
    pub n: usize,
    pub seed: u64,
}

/// Data, ground truth, and the settings that made them.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub x: DataMatrix,
    pub dag: DirectedGraph,
    pub spec: SemSpec,
}

/// One of the closed-form mechanism components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum UnivariateFn {
    /// `exp(-|x|)`
    NegAbsExp,
    /// `0.05 * x^2`
    ScaledSquare,
    /// `sin(x)`
    Sine,
}

impl UnivariateFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            UnivariateFn::NegAbsExp => (-x.abs()).exp(),
            UnivariateFn::ScaledSquare => 0.05 * x * x,
            UnivariateFn::Sine => x.sin(),
        }
    }
}

pub const MLP_HIDDEN: usize = 100;

/// Weights of one node's network: `hidden x parents` in, `hidden` out.
#[derive(Debug, Clone)]
pub struct MlpWeights {
    pub input: Array2<f64>,
    pub output: Array1<f64>,
}

/// Fully instantiated mechanism of one node.
#[derive(Debug, Clone)]
pub enum NodeMechanism {
    /// No parents; the column is noise alone.
    Root,
    Gp,
    GpAdditive,
    Mlp(MlpWeights),
    /// One function per parent, in parent order.
    Combinatorial(Vec<UnivariateFn>),
}

#[derive(Debug, Clone)]
pub struct NodePlan {
    /// Parent indices in ascending order; mechanism inputs use this order.
    pub parents: Vec<usize>,
    pub mechanism: NodeMechanism,
}

/// Graph plus per-node mechanism instantiations, ready to execute.
#[derive(Debug, Clone)]
pub struct SimPlan {
    pub dag: DirectedGraph,
    pub nodes: Vec<NodePlan>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const GRAPH_STREAM: u64 = 0;

fn plan_stream(node: usize) -> u64 {
    2 * node as u64 + 1
}

fn exec_stream(node: usize) -> u64 {
    2 * node as u64 + 2
}

/// Random DAG on `d` nodes: a uniform permutation fixes the topological
/// order and each order-respecting pair becomes an edge independently with
/// probability `min(1, m*d / (d*(d-1)/2))`.
pub fn er_dag(d: usize, m: usize, rng: &mut impl Rng) -> DirectedGraph {
    assert!(d >= 2, "need at least two nodes");
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let pairs = (d * (d - 1) / 2) as f64;
    let p = ((m * d) as f64 / pairs).min(1.0);
    let mut g = DirectedGraph::empty(d);
    for a in 0..d {
        for b in (a + 1)..d {
            if rng.random::<f64>() < p {
                g.add_edge(order[a], order[b]);
            }
        }
    }
    g
}

/// Lower-triangular Cholesky factor, or `None` when the matrix is not
/// numerically positive definite.
fn cholesky_lower(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l: Array2<f64> = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// One draw from a zero-mean Gaussian process over the rows of `parents`,
/// with RBF covariance `exp(-||a - b||^2 / (2 l^2))`.
///
/// The covariance is regularized with a diagonal jitter starting at
/// `1e-8 * mean(diag)` and escalating tenfold until the factorization
/// succeeds; past `1e-2 * mean(diag)` the draw fails. The generator is only
/// consumed after a successful factorization, so the escalation path does
/// not shift downstream randomness.
pub fn sample_gp(
    parents: &Array2<f64>,
    lengthscale: f64,
    rng: &mut impl Rng,
) -> Result<Array1<f64>, SimError> {
    let n = parents.nrows();
    assert!(parents.ncols() >= 1, "at least one parent column required");
    assert!(lengthscale > 0.0, "lengthscale must be positive");
    let inv = 1.0 / (2.0 * lengthscale * lengthscale);
    let mut cov = Array2::zeros((n, n));
    for i in 0..n {
        cov[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for (u, v) in parents.row(i).iter().zip(parents.row(j).iter()) {
                let t = u - v;
                d2 += t * t;
            }
            let v = (-d2 * inv).exp();
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    let mean_diag = 1.0;
    let mut jitter = 1e-8 * mean_diag;
    let max_jitter = 1e-2 * mean_diag;
    loop {
        let mut c = cov.clone();
        for i in 0..n {
            c[[i, i]] += jitter;
        }
        if let Some(l) = cholesky_lower(&c) {
            let z = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            return Ok(l.dot(&z));
        }
        jitter *= 10.0;
        if jitter > max_jitter {
            return Err(SimError::GpFactorization);
        }
    }
}

fn draw_mlp_weight(rng: &mut impl Rng) -> f64 {
    // U((-2, -0.5) ∪ (0.5, 2)): magnitude then sign.
    let magnitude = rng.random_range(0.5..2.0);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

fn validate(spec: &SemSpec) -> Result<(), SimError> {
    if spec.d < 2 {
        return Err(SimError::BadSpec("d must be at least 2".into()));
    }
    if spec.m < 1 {
        return Err(SimError::BadSpec("m must be at least 1".into()));
    }
    if spec.n < 1 {
        return Err(SimError::BadSpec("n must be at least 1".into()));
    }
    Ok(())
}

/// Draws the graph and instantiates every node's mechanism.
pub fn plan_sem(spec: &SemSpec) -> Result<SimPlan, SimError> {
    validate(spec)?;
    let mut graph_rng = stream_rng(spec.seed, GRAPH_STREAM);
    let dag = er_dag(spec.d, spec.m, &mut graph_rng);
    let mut nodes = Vec::with_capacity(spec.d);
    for j in 0..spec.d {
        let parents: Vec<usize> = (0..spec.d).filter(|&u| dag.has_edge(u, j)).collect();
        let mechanism = if parents.is_empty() {
            NodeMechanism::Root
        } else {
            let mut rng = stream_rng(spec.seed, plan_stream(j));
            match spec.mechanism {
                Mechanism::Gp => NodeMechanism::Gp,
                Mechanism::GpAdditive => NodeMechanism::GpAdditive,
                Mechanism::Mlp => {
                    let input = Array2::from_shape_fn((MLP_HIDDEN, parents.len()), |_| {
                        draw_mlp_weight(&mut rng)
                    });
                    let output = Array1::from_shape_fn(MLP_HIDDEN, |_| draw_mlp_weight(&mut rng));
                    NodeMechanism::Mlp(MlpWeights { input, output })
                }
                Mechanism::Combinatorial => {
                    let fns = parents
                        .iter()
                        .map(|_| {
                            match rng.random_range(0..3) {
                                0 => UnivariateFn::NegAbsExp,
                                1 => UnivariateFn::ScaledSquare,
                                _ => UnivariateFn::Sine,
                            }
                        })
                        .collect();
                    NodeMechanism::Combinatorial(fns)
                }
            }
        };
        nodes.push(NodePlan { parents, mechanism });
    }
    Ok(SimPlan { dag, nodes })
}

/// Topological order, smallest ready index first; panics on a cyclic graph.
fn topological_order(dag: &DirectedGraph) -> Vec<usize> {
    let d = dag.d();
    let mut indegree = vec![0usize; d];
    for (_, v) in dag.edges() {
        indegree[v] += 1;
    }
    let mut done = vec![false; d];
    let mut order = Vec::with_capacity(d);
    for _ in 0..d {
        let next = (0..d)
            .find(|&j| !done[j] && indegree[j] == 0)
            .expect("graph has a cycle");
        done[next] = true;
        order.push(next);
        for v in 0..d {
            if dag.has_edge(next, v) {
                indegree[v] -= 1;
            }
        }
    }
    order
}

fn node_contribution(
    plan: &NodePlan,
    x: &Array2<f64>,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Array1<f64>, SimError> {
    let pm = |cols: &[usize]| {
        Array2::from_shape_fn((n, cols.len()), |(i, c)| x[[i, cols[c]]])
    };
    match &plan.mechanism {
        NodeMechanism::Root => Ok(Array1::zeros(n)),
        NodeMechanism::Gp => sample_gp(&pm(&plan.parents), 1.0, rng),
        NodeMechanism::GpAdditive => {
            let mut acc = Array1::zeros(n);
            for &p in &plan.parents {
                acc += &sample_gp(&pm(&[p]), 1.0, rng)?;
            }
            Ok(acc)
        }
        NodeMechanism::Mlp(w) => {
            let parents = pm(&plan.parents);
            let pre = parents.dot(&w.input.t());
            let hidden = pre.mapv(|t| 1.0 / (1.0 + (-t).exp()));
            Ok(hidden.dot(&w.output))
        }
        NodeMechanism::Combinatorial(fns) => {
            let mut acc = Array1::zeros(n);
            for (&p, &f) in plan.parents.iter().zip(fns.iter()) {
                for i in 0..n {
                    acc[i] += f.eval(x[[i, p]]);
                }
            }
            Ok(acc)
        }
    }
}

fn execute_with_streams(
    plan: &SimPlan,
    n: usize,
    seed: u64,
    stream_of: impl Fn(usize) -> u64,
) -> Result<(DataMatrix, DataMatrix), SimError> {
    let d = plan.dag.d();
    if plan.nodes.len() != d {
        return Err(SimError::BadSpec("one node plan per graph node".into()));
    }
    let mut x = Array2::zeros((n, d));
    let mut noise = Array2::zeros((n, d));
    for j in topological_order(&plan.dag) {
        let mut rng = stream_rng(seed, stream_of(j));
        for i in 0..n {
            noise[[i, j]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let g = node_contribution(&plan.nodes[j], &x, n, &mut rng)?;
        for i in 0..n {
            x[[i, j]] = g[i] + noise[[i, j]];
        }
    }
    Ok((x, noise))
}

/// Runs a plan: columns in topological order, each node drawing its noise
/// and then any mechanism randomness from its own stream. Returns the data
/// and the noise actually used.
pub fn execute_plan(
    plan: &SimPlan,
    n: usize,
    seed: u64,
) -> Result<(DataMatrix, DataMatrix), SimError> {
    execute_with_streams(plan, n, seed, exec_stream)
}

/// Plans and executes in one call.
pub fn simulate_sem(spec: &SemSpec) -> Result<SimulatedDataset, SimError> {
    let plan = plan_sem(spec)?;
    let (x, _) = execute_plan(&plan, spec.n, spec.seed)?;
    Ok(SimulatedDataset {
        x,
        dag: plan.dag,
        spec: *spec,
    })
}
