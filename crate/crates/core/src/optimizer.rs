//! ADAM inner solver and the annealed outer loop of the discovery method.
//!
//! The driver starts every run at `theta = 0`, which always satisfies the
//! barrier, and solves a short sequence of unconstrained problems
//!
//! ```text
//! minimize  mu_t * penalized_score(theta) + h(W(theta) ∘ W(theta), s)
//! ```
//!
//! with `mu_t = mu0 * decay^t`, warm-starting each round at the previous
//! round's solution. The final weighted adjacency is thresholded at `omega`
//! (strict inequality) and the support becomes the reported graph. When the
//! thresholded graph of a default-length run still has a cycle, one extra
//! round at the next `mu` is appended.
//!
//! The inner solver is plain ADAM with bias correction. A proposed step that
//! leaves the barrier domain is rejected: the iterate stays put and the
//! learning rate is halved for the rest of the round. There is no stochastic
//! element anywhere, so a run is a pure function of the data and the
//! configuration.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::acyclicity::{self, DirectedGraph, WeightedAdjacency};
use crate::data::{standardize, DataError, DataMatrix, Standardization};
use crate::kernel::{
    default_bandwidth, gram_bundle_with_distances, squared_distance_matrix, D2Policy, GramBundle,
    KernelConfig, KernelError,
};
use crate::objective::{
    self, central_path_gradient, score, ObjectiveConfig, ObjectiveError, ObjectiveReport,
};
use crate::representer::{zero_model, ModelParams, NodeParams};
use crate::thread_pool;

/// Learning-rate halvings allowed within one round before the round stops;
/// past this point the step length is below rounding anyway.
const MAX_LR_HALVINGS: usize = 60;

/// Inner-solver settings.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Step budget per outer round.
    pub max_iters: usize,
    /// Early stop once the gradient max-norm falls below this.
    pub grad_tolerance: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 3000,
            grad_tolerance: 1e-7,
        }
    }
}

/// Outer-loop settings of the discovery run.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DagmaConfig {
    /// Initial annealing weight, decayed geometrically each round.
    pub mu0: f64,
    /// Geometric decay factor in `(0, 1)`.
    pub decay: f64,
    /// Sparsity weight `tau`.
    pub tau: f64,
    /// Function-norm weight `lambda`.
    pub lambda: f64,
    /// Log-det scale `s`.
    pub s: f64,
    /// Number of outer rounds before thresholding.
    pub outer_rounds: usize,
    /// Edge-weight threshold, applied with strict inequality.
    pub omega: f64,
    /// Kernel bandwidth; `None` picks `0.4 * d`.
    pub gamma: Option<f64>,
    /// Standardize columns to mean zero, unit variance before fitting.
    pub standardize: bool,
    pub adam: AdamSettings,
    pub d2: D2Policy,
    #[doc(hidden)]
    #[serde(default)]
    pub barrier_on_raw_weights: bool,
}

impl Default for DagmaConfig {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            decay: 0.1,
            tau: 1e-4,
            lambda: 1e-3,
            s: 1.0,
            outer_rounds: 6,
            omega: 0.1,
            gamma: None,
            standardize: false,
            adam: AdamSettings::default(),
            d2: D2Policy::Auto,
            barrier_on_raw_weights: false,
        }
    }
}

impl DagmaConfig {
    fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            tau: self.tau,
            lambda: self.lambda,
            s: self.s,
            barrier_on_raw_weights: self.barrier_on_raw_weights,
        }
    }

    fn validate(&self) -> Result<(), DagmaError> {
        let bad = |msg: &str| Err(DagmaError::BadConfig(msg.to_string()));
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return bad("mu0 must be positive");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie strictly between 0 and 1");
        }
        if !(self.tau >= 0.0 && self.lambda >= 0.0) {
            return bad("tau and lambda must be nonnegative");
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return bad("s must be positive");
        }
        if self.outer_rounds == 0 {
            return bad("at least one outer round is required");
        }
        if !(self.omega >= 0.0) {
            return bad("omega must be nonnegative");
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return bad("gamma must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DagmaError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("objective evaluation failed: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("starting point rejected: {0}")]
    BadStart(AdamError),
    #[error("round {round}: {source}")]
    Inner { round: usize, source: AdamError },
}

#[derive(Debug, Error)]
pub enum AdamError {
    #[error("objective is not finite at the starting point")]
    StartNotFinite,
    #[error("starting point is outside the objective domain")]
    StartOutOfDomain,
    #[error("objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
}

/// Why a callback evaluation at a proposed iterate did not produce a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFailure {
    /// The iterate left the domain; the step gets rejected.
    OutOfDomain,
    /// Unrecoverable numeric failure.
    NonFinite,
}

/// What one inner round did.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AdamReport {
    /// Accepted steps.
    pub iterations: usize,
    /// Rejected proposals, each of which halved the learning rate.
    pub halvings: usize,
    pub lr_final: f64,
    pub value_start: f64,
    pub value_end: f64,
    pub grad_max_norm: f64,
    /// Whether the gradient tolerance stopped the round early.
    pub converged: bool,
}

/// Flat view of a parameter vector: per node, `alpha` then `beta` row-major.
struct FlatLayout {
    shapes: Vec<(usize, usize)>,
    total: usize,
}

impl FlatLayout {
    fn of(theta: &ModelParams) -> Self {
        let shapes: Vec<(usize, usize)> = theta
            .iter()
            .map(|p| (p.alpha.len(), p.beta.nrows()))
            .collect();
        let total = shapes.iter().map(|&(n, d)| n + n * d).sum();
        Self { shapes, total }
    }

    fn flatten(&self, theta: &ModelParams) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total);
        for p in theta {
            out.extend(p.alpha.iter());
            out.extend(p.beta.iter());
        }
        out
    }

    fn unflatten(&self, flat: &[f64]) -> ModelParams {
        let mut out = Vec::with_capacity(self.shapes.len());
        let mut pos = 0;
        for &(n, d) in &self.shapes {
            let alpha = Array1::from_iter(flat[pos..pos + n].iter().copied());
            pos += n;
            let beta =
                Array2::from_shape_vec((d, n), flat[pos..pos + n * d].to_vec()).expect("layout");
            pos += n * d;
            out.push(NodeParams { alpha, beta });
        }
        out
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Runs ADAM from `theta0` against a value-and-gradient callback.
///
/// Proposals whose evaluation reports [`EvalFailure::OutOfDomain`] are
/// rejected: the iterate is kept and the learning rate halves. Each proposal,
/// accepted or not, consumes one unit of the iteration budget. The round ends
/// early when the gradient max-norm drops below the tolerance or the step
/// length has been halved into irrelevance.
pub fn adam_minimize<F>(
    mut eval: F,
    theta0: &ModelParams,
    settings: &AdamSettings,
) -> Result<(ModelParams, AdamReport), AdamError>
where
    F: FnMut(&ModelParams) -> Result<(f64, ModelParams), EvalFailure>,
{
    let layout = FlatLayout::of(theta0);
    let mut flat = layout.flatten(theta0);
    let (mut value, mut grad) = match eval(theta0) {
        Ok((v, g)) if v.is_finite() => (v, layout.flatten(&g)),
        Ok(_) => return Err(AdamError::StartNotFinite),
        Err(EvalFailure::OutOfDomain) => return Err(AdamError::StartOutOfDomain),
        Err(EvalFailure::NonFinite) => return Err(AdamError::StartNotFinite),
    };
    let value_start = value;

    let mut m = vec![0.0; layout.total];
    let mut v1 = vec![0.0; layout.total];
    let mut trial_m = vec![0.0; layout.total];
    let mut trial_v = vec![0.0; layout.total];
    let mut candidate = vec![0.0; layout.total];
    let mut steps_taken = 0usize;
    let mut lr = settings.learning_rate;
    let mut halvings = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < settings.max_iters {
        if max_abs(&grad) < settings.grad_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        // Trial moment update; committed only if the step is accepted, so a
        // rejected proposal repeats with the same moments and a smaller rate.
        let t = (steps_taken + 1) as i32;
        let bc1 = 1.0 - settings.beta1.powi(t);
        let bc2 = 1.0 - settings.beta2.powi(t);
        for i in 0..layout.total {
            let g = grad[i];
            trial_m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * g;
            trial_v[i] = settings.beta2 * v1[i] + (1.0 - settings.beta2) * g * g;
            let mh = trial_m[i] / bc1;
            let vh = trial_v[i] / bc2;
            candidate[i] = flat[i] - lr * mh / (vh.sqrt() + settings.epsilon);
        }

        match eval(&layout.unflatten(&candidate)) {
            Ok((val, g)) if val.is_finite() => {
                let g_flat = layout.flatten(&g);
                if g_flat.iter().any(|x| !x.is_finite()) {
                    return Err(AdamError::NonFinite {
                        iteration: iterations,
                    });
                }
                std::mem::swap(&mut flat, &mut candidate);
                std::mem::swap(&mut m, &mut trial_m);
                std::mem::swap(&mut v1, &mut trial_v);
                steps_taken += 1;
                value = val;
                grad = g_flat;
            }
            Ok(_) | Err(EvalFailure::NonFinite) => {
                return Err(AdamError::NonFinite {
                    iteration: iterations,
                });
            }
            Err(EvalFailure::OutOfDomain) => {
                lr *= 0.5;
                halvings += 1;
                if halvings >= MAX_LR_HALVINGS {
                    break;
                }
            }
        }
    }

    let report = AdamReport {
        iterations,
        halvings,
        lr_final: lr,
        value_start,
        value_end: value,
        grad_max_norm: max_abs(&grad),
        converged,
    };
    Ok((layout.unflatten(&flat), report))
}

/// Thresholds a weighted adjacency at `omega` (strict) and reads off the
/// surviving support as a graph.
pub fn threshold(w_raw: &WeightedAdjacency, omega: f64) -> (WeightedAdjacency, DirectedGraph) {
    let d = w_raw.nrows();
    let mut w_hat = Array2::zeros((d, d));
    let mut graph = DirectedGraph::empty(d);
    for ((i, j), &v) in w_raw.indexed_iter() {
        if i != j && v > omega {
            w_hat[[i, j]] = v;
            graph.add_edge(i, j);
        }
    }
    (w_hat, graph)
}

/// One outer round as recorded in the run trace.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub mu: f64,
    pub adam: AdamReport,
    /// Score components at the round's final parameters, unsmoothed.
    pub report: ObjectiveReport,
}

/// Everything a discovery run produces.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiscoveryResult {
    /// Weighted adjacency at the final parameters, before thresholding.
    pub w_raw: WeightedAdjacency,
    /// `w_raw` masked by `w_raw > omega`.
    pub w_hat: WeightedAdjacency,
    /// Support of `w_hat`.
    pub graph: DirectedGraph,
    pub theta: ModelParams,
    pub trace: Vec<TraceEntry>,
    pub is_dag: bool,
    /// Column statistics used to standardize the data, when enabled.
    pub standardization: Option<Standardization>,
    /// Bandwidth the kernels were built with.
    pub gamma: f64,
}

/// Runs the full annealed discovery on one dataset.
pub fn rkhs_dagma(x: &DataMatrix, cfg: &DagmaConfig) -> Result<DiscoveryResult, DagmaError> {
    cfg.validate()?;
    let d = x.ncols();
    let n = x.nrows();
    let (xs, standardization) = if cfg.standardize {
        let (xs, st) = standardize(x)?;
        (xs, Some(st))
    } else {
        (x.clone(), None)
    };
    let gamma = cfg.gamma.unwrap_or_else(|| default_bandwidth(d));
    let kcfg = KernelConfig {
        gamma,
        d2: cfg.d2,
    };
    let full = squared_distance_matrix(&xs);
    let bundles: Vec<GramBundle> = thread_pool().install(|| {
        (0..d)
            .into_par_iter()
            .map(|j| gram_bundle_with_distances(&xs, &full, j, &kcfg))
            .collect::<Result<_, _>>()
    })?;
    let obj_cfg = cfg.objective();

    let mut theta = zero_model(n, d);
    let mut mu = cfg.mu0;
    let mut trace = Vec::new();
    let mut planned = cfg.outer_rounds;
    let mut escalated = false;
    let mut round = 0;
    while round < planned {
        let mu_now = mu;
        let eval = |t: &ModelParams| match central_path_gradient(t, &xs, &bundles, &obj_cfg, mu_now)
        {
            Ok(e) => Ok((e.value, e.grad)),
            Err(ObjectiveError::OutOfDomain) => Err(EvalFailure::OutOfDomain),
            Err(_) => Err(EvalFailure::NonFinite),
        };
        let (theta_next, adam_report) = adam_minimize(eval, &theta, &cfg.adam).map_err(|e| {
            match e {
                AdamError::StartNotFinite | AdamError::StartOutOfDomain if round == 0 => {
                    DagmaError::BadStart(e)
                }
                other => DagmaError::Inner {
                    round,
                    source: other,
                },
            }
        })?;
        theta = theta_next;
        let report = score(&theta, &xs, &bundles, &obj_cfg)?;
        trace.push(TraceEntry {
            round,
            mu: mu_now,
            adam: adam_report,
            report,
        });
        round += 1;
        mu *= cfg.decay;
        if round == planned && !escalated && planned == 6 {
            let w_raw = objective::weighted_adjacency(&theta, &bundles)?;
            let (_, graph) = threshold(&w_raw, cfg.omega);
            if !acyclicity::is_dag(&graph) {
                escalated = true;
                planned += 1;
            }
        }
    }

    let w_raw = objective::weighted_adjacency(&theta, &bundles)?;
    let (w_hat, graph) = threshold(&w_raw, cfg.omega);
    let is_dag = acyclicity::is_dag(&graph);
    Ok(DiscoveryResult {
        w_raw,
        w_hat,
        graph,
        theta,
        trace,
        is_dag,
        standardization,
        gamma,
    })
}
