//! Score-based discovery of causal DAGs from continuous observational data.
//!
//! Each variable is modelled as a smooth function of the remaining variables
//! plus additive noise. The candidate function for node `j` lives in the RKHS
//! of a Gaussian kernel that ignores coordinate `j`, expanded over the sample
//! both in kernel values and in kernel partial derivatives. Structure is read
//! off a weighted adjacency matrix of empirical partial-derivative norms, and
//! acyclicity is enforced through a log-determinant barrier on the weighted
//! adjacency, annealed along a central path.
//!
//! Pipeline, bottom to top:
//!
//! | module         | responsibility                                              |
//! |----------------|--------------------------------------------------------------|
//! | [`kernel`]     | restricted Gaussian kernel, Gram matrix and derivative tensors |
//! | [`representer`]| per-node function evaluation, partials, RKHS norm            |
//! | [`acyclicity`] | log-det DAG constraint, domain checks, graph utilities       |
//! | [`objective`]  | weighted adjacency, penalized score, central-path gradient   |
//! | [`optimizer`]  | ADAM inner loop and the annealed outer loop                  |
//! | [`sem_sim`]    | synthetic structural equation models for benchmarking        |
//! | [`metrics`]    | structural Hamming distance, cause-effect pair evaluation    |
//! | [`cli`]        | command-line front end and file formats                      |
//!
//! The numeric core is deterministic: discovery involves no randomness, and
//! simulation is reproducible from a single seed.

pub mod acyclicity;
pub mod cli;
pub mod data;
pub mod kernel;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod representer;
pub mod sem_sim;

mod runtime;

pub use runtime::thread_pool;
