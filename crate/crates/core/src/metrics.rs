//! Graph-recovery scoring and the bivariate cause-effect pipeline.
//!
//! `shd` breaks the structural Hamming distance into extra, missing, and
//! reversed counts whose sum is the minimal number of edge additions,
//! deletions, and reversals turning one graph into the other. The pair
//! pipeline standardizes and optionally grids a two-variable dataset,
//! then orients it by running the full discovery procedure on the
//! two-column matrix and reading the thresholded adjacency.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::acyclicity::DirectedGraph;
use crate::data::{self, DataError};
use crate::optimizer::{rkhs_dagma, DagmaConfig, DagmaError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("graphs have {estimated} and {truth} nodes")]
    DimensionMismatch { estimated: usize, truth: usize },
    #[error("pair columns have lengths {a} and {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("pair contains a non-finite value")]
    NonFinite,
    #[error("pair weight must be positive and finite, got {0}")]
    BadWeight(f64),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Discovery(#[from] DagmaError),
    #[error("metadata file not found: {0}")]
    MissingMetadata(PathBuf),
    #[error("bad corpus metadata: {0}")]
    BadMetadata(String),
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// Ground-truth causal direction of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AToB,
    BToA,
}

/// Two aligned variables with a known direction and an evaluation weight.
#[derive(Debug, Clone)]
pub struct PairDataset {
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub label: Direction,
    pub weight: f64,
}

impl PairDataset {
    pub fn new(
        a: Array1<f64>,
        b: Array1<f64>,
        label: Direction,
        weight: f64,
    ) -> Result<Self, MetricsError> {
        if a.len() != b.len() {
            return Err(MetricsError::LengthMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(MetricsError::BadWeight(weight));
        }
        Ok(PairDataset { a, b, label, weight })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Same data with the roles of the two columns exchanged.
    pub fn swapped(&self) -> PairDataset {
        PairDataset {
            a: self.b.clone(),
            b: self.a.clone(),
            label: match self.label {
                Direction::AToB => Direction::BToA,
                Direction::BToA => Direction::AToB,
            },
            weight: self.weight,
        }
    }
}

/// Edge-level comparison of an estimated graph against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub shd: usize,
    pub extra: usize,
    pub missing: usize,
    pub reversed: usize,
    pub predicted_edges: usize,
}

/// Structural Hamming distance with its breakdown.
///
/// Per unordered node pair: an estimated single edge against exactly the
/// opposite truth edge counts one reversal; otherwise every predicted
/// orientation absent from the truth is extra and every truth orientation
/// absent from the estimate is missing. A doubly oriented pair therefore
/// costs one deletion against a single truth edge, matching the minimal
/// edit count move for move.
pub fn shd(estimated: &DirectedGraph, truth: &DirectedGraph) -> Result<EvalReport, MetricsError> {
    if estimated.d() != truth.d() {
        return Err(MetricsError::DimensionMismatch {
            estimated: estimated.d(),
            truth: truth.d(),
        });
    }
    let d = estimated.d();
    let mut extra = 0;
    let mut missing = 0;
    let mut reversed = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let ef = estimated.has_edge(i, j);
            let er = estimated.has_edge(j, i);
            let tf = truth.has_edge(i, j);
            let tr = truth.has_edge(j, i);
            if (ef, er) == (tf, tr) {
                continue;
            }
            if ef != er && tf != tr {
                // Exactly one orientation on each side, and they disagree.
                reversed += 1;
                continue;
            }
            extra += usize::from(ef && !tf) + usize::from(er && !tr);
            missing += usize::from(tf && !ef) + usize::from(tr && !er);
        }
    }
    Ok(EvalReport {
        shd: extra + missing + reversed,
        extra,
        missing,
        reversed,
        predicted_edges: estimated.edge_count(),
    })
}

/// Standardizes both variables; beyond 400 rows, compresses to at most 300
/// grid representatives along the first variable.
///
/// Rows are sorted ascending by the first variable and split into 300
/// contiguous grids whose sizes differ by at most one (earlier grids take
/// the surplus). Each grid is represented by its lower-median row, so the
/// emitted point is an actual observation.
pub fn pairs_preprocess(pair: &PairDataset) -> Result<PairDataset, MetricsError> {
    let n = pair.n();
    if pair.b.len() != n {
        return Err(MetricsError::LengthMismatch {
            a: n,
            b: pair.b.len(),
        });
    }
    let mut m = Array2::zeros((n, 2));
    for i in 0..n {
        m[[i, 0]] = pair.a[i];
        m[[i, 1]] = pair.b[i];
    }
    let (z, _) = data::standardize(&m)?;
    if n <= 400 {
        return PairDataset::new(
            z.column(0).to_owned(),
            z.column(1).to_owned(),
            pair.label,
            pair.weight,
        );
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[[i, 0]].total_cmp(&z[[j, 0]]));
    let grids = 300;
    let base = n / grids;
    let surplus = n % grids;
    let mut a = Vec::with_capacity(grids);
    let mut b = Vec::with_capacity(grids);
    let mut start = 0;
    for g in 0..grids {
        let size = base + usize::from(g < surplus);
        let row = order[start + (size - 1) / 2];
        a.push(z[[row, 0]]);
        b.push(z[[row, 1]]);
        start += size;
    }
    PairDataset::new(Array1::from(a), Array1::from(b), pair.label, pair.weight)
}

/// Outcome of orienting one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairDecision {
    AToB,
    BToA,
    Undecided,
}

impl PairDecision {
    pub fn agrees(self, label: Direction) -> bool {
        matches!(
            (self, label),
            (PairDecision::AToB, Direction::AToB) | (PairDecision::BToA, Direction::BToA)
        )
    }

    /// The decision this one becomes when the two columns trade places.
    pub fn flipped(self) -> PairDecision {
        match self {
            PairDecision::AToB => PairDecision::BToA,
            PairDecision::BToA => PairDecision::AToB,
            PairDecision::Undecided => PairDecision::Undecided,
        }
    }
}

/// Orientation decision together with the evidence behind it.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PairOrientation {
    pub decision: PairDecision,
    /// True when both directions survived thresholding and the larger raw
    /// weight broke the tie; clean single-survivor decisions stay false.
    pub tiebreak: bool,
    pub w_ab: f64,
    pub w_ba: f64,
}

/// Runs discovery on the two-column matrix and reads the direction off the
/// thresholded adjacency. When both entries survive, the larger raw entry
/// decides and the outcome is flagged as a tiebreak.
pub fn orient_pair(
    pair: &PairDataset,
    cfg: &DagmaConfig,
) -> Result<PairOrientation, MetricsError> {
    let n = pair.n();
    if pair.b.len() != n {
        return Err(MetricsError::LengthMismatch {
            a: n,
            b: pair.b.len(),
        });
    }
    let mut x = Array2::zeros((n, 2));
    for i in 0..n {
        x[[i, 0]] = pair.a[i];
        x[[i, 1]] = pair.b[i];
    }
    let result = rkhs_dagma(&x, cfg)?;
    let w_ab = result.w_raw[[0, 1]];
    let w_ba = result.w_raw[[1, 0]];
    let ab = result.graph.has_edge(0, 1);
    let ba = result.graph.has_edge(1, 0);
    let (decision, tiebreak) = match (ab, ba) {
        (true, false) => (PairDecision::AToB, false),
        (false, true) => (PairDecision::BToA, false),
        (false, false) => (PairDecision::Undecided, false),
        (true, true) => {
            if w_ab > w_ba {
                (PairDecision::AToB, true)
            } else if w_ba > w_ab {
                (PairDecision::BToA, true)
            } else {
                (PairDecision::Undecided, false)
            }
        }
    };
    Ok(PairOrientation {
        decision,
        tiebreak,
        w_ab,
        w_ba,
    })
}

/// One named pair from a corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusPair {
    pub name: String,
    pub pair: PairDataset,
}

/// Loaded corpus plus the names skipped for having more than two columns.
#[derive(Debug, Clone)]
pub struct PairsCorpus {
    pub pairs: Vec<CorpusPair>,
    pub skipped: Vec<String>,
}

fn parse_direction(s: &str) -> Result<Direction, MetricsError> {
    match s.trim() {
        "a->b" => Ok(Direction::AToB),
        "b->a" => Ok(Direction::BToA),
        other => Err(MetricsError::BadMetadata(format!(
            "direction must be \"a->b\" or \"b->a\", got {other:?}"
        ))),
    }
}

/// Reads a corpus directory: `meta.csv` with columns name, direction, and
/// weight (blank weight means 1), plus one `<name>.csv` per pair. Pairs
/// whose file has more than two columns are skipped and reported, matching
/// the exclusion of multi-dimensional pairs.
pub fn load_pairs_corpus(dir: &Path) -> Result<PairsCorpus, MetricsError> {
    let meta_path = dir.join("meta.csv");
    if !meta_path.is_file() {
        return Err(MetricsError::MissingMetadata(meta_path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&meta_path)
        .map_err(|e| MetricsError::BadMetadata(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| MetricsError::BadMetadata(e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ni, di) = match (col("name"), col("direction")) {
        (Some(n), Some(d)) => (n, d),
        _ => {
            return Err(MetricsError::BadMetadata(
                "meta.csv needs name and direction columns".into(),
            ))
        }
    };
    let wi = col("weight");

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MetricsError::BadMetadata(e.to_string()))?;
        let name = record
            .get(ni)
            .ok_or_else(|| MetricsError::BadMetadata("missing name field".into()))?
            .to_string();
        let label = parse_direction(record.get(di).unwrap_or(""))?;
        let weight = match wi.and_then(|i| record.get(i)) {
            None | Some("") => 1.0,
            Some(s) => s.parse::<f64>().map_err(|_| {
                MetricsError::BadMetadata(format!("bad weight {s:?} for pair {name}"))
            })?,
        };
        let (matrix, _) = data::read_matrix_csv(&dir.join(format!("{name}.csv")))?;
        if matrix.ncols() > 2 {
            skipped.push(name);
            continue;
        }
        if matrix.ncols() < 2 {
            return Err(MetricsError::BadMetadata(format!(
                "pair {name} has a single column"
            )));
        }
        let pair = PairDataset::new(
            matrix.column(0).to_owned(),
            matrix.column(1).to_owned(),
            label,
            weight,
        )?;
        pairs.push(CorpusPair { name, pair });
    }
    Ok(PairsCorpus { pairs, skipped })
}

/// Weighted and unweighted share of decisions agreeing with the labels.
/// Undecided pairs count against accuracy; weights must be positive.
pub fn corpus_accuracy(decisions: &[(PairDecision, Direction, f64)]) -> (f64, f64) {
    let mut wsum = 0.0;
    let mut wcorrect = 0.0;
    let mut correct = 0usize;
    for &(decision, label, weight) in decisions {
        wsum += weight;
        if decision.agrees(label) {
            wcorrect += weight;
            correct += 1;
        }
    }
    if decisions.is_empty() {
        return (0.0, 0.0);
    }
    (wcorrect / wsum, correct as f64 / decisions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::AdamSettings;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use std::collections::VecDeque;
    use std::io::Write;

    fn graph_from(d: usize, edges: &[(usize, usize)]) -> DirectedGraph {
        let mut g = DirectedGraph::empty(d);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    #[test]
    fn identical_graphs_score_zero() {
        let g = graph_from(4, &[(0, 1), (1, 2), (0, 3)]);
        let r = shd(&g, &g).unwrap();
        assert_eq!(r.shd, 0);
        assert_eq!(r.predicted_edges, 3);
    }

    #[test]
    fn single_reversed_edge_costs_one() {
        let est = graph_from(3, &[(1, 0)]);
        let truth = graph_from(3, &[(0, 1)]);
        let r = shd(&est, &truth).unwrap();
        assert_eq!((r.shd, r.extra, r.missing, r.reversed), (1, 0, 0, 1));
    }

    #[test]
    fn empty_truth_counts_every_edge_as_extra() {
        let est = graph_from(5, &[(0, 1), (2, 3), (4, 0)]);
        let r = shd(&est, &DirectedGraph::empty(5)).unwrap();
        assert_eq!((r.shd, r.extra), (3, 3));
        let r = shd(&DirectedGraph::empty(5), &est).unwrap();
        assert_eq!((r.shd, r.missing), (3, 3));
    }

    #[test]
    fn swapping_arguments_swaps_extra_and_missing() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = random_simple_graph(5, &mut rng);
            let b = random_simple_graph(5, &mut rng);
            let ab = shd(&a, &b).unwrap();
            let ba = shd(&b, &a).unwrap();
            assert_eq!(ab.shd, ba.shd);
            assert_eq!(ab.extra, ba.missing);
            assert_eq!(ab.missing, ba.extra);
            assert_eq!(ab.reversed, ba.reversed);
        }
    }

    #[test]
    fn doubly_oriented_pairs_cost_their_deletions() {
        let est = graph_from(2, &[(0, 1), (1, 0)]);
        let one = graph_from(2, &[(0, 1)]);
        assert_eq!(shd(&est, &one).unwrap().shd, 1);
        assert_eq!(shd(&est, &DirectedGraph::empty(2)).unwrap().shd, 2);
        assert_eq!(shd(&one, &est).unwrap().shd, 1);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = DirectedGraph::empty(3);
        let b = DirectedGraph::empty(4);
        assert!(matches!(
            shd(&a, &b),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    fn random_simple_graph(d: usize, rng: &mut impl Rng) -> DirectedGraph {
        let mut g = DirectedGraph::empty(d);
        for i in 0..d {
            for j in (i + 1)..d {
                if rng.random::<f64>() < 0.3 {
                    if rng.random::<bool>() {
                        g.add_edge(i, j);
                    } else {
                        g.add_edge(j, i);
                    }
                }
            }
        }
        g
    }

    fn graph_mask(g: &DirectedGraph) -> u32 {
        let d = g.d();
        g.edges()
            .into_iter()
            .fold(0u32, |m, (u, v)| m | 1 << (u * d + v))
    }

    /// Breadth-first minimal edit count over add, delete, and reverse moves
    /// on the full edge-set state space.
    fn bfs_edit_distance(d: usize, start: u32, goal: u32) -> usize {
        if start == goal {
            return 0;
        }
        let mut seen = std::collections::HashSet::new();
        seen.insert(start);
        let mut queue = VecDeque::new();
        queue.push_back((start, 0usize));
        while let Some((state, dist)) = queue.pop_front() {
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    let bit = 1u32 << (i * d + j);
                    let mut nexts = Vec::new();
                    if state & bit != 0 {
                        nexts.push(state & !bit);
                        nexts.push((state & !bit) | 1 << (j * d + i));
                    } else {
                        nexts.push(state | bit);
                    }
                    for next in nexts {
                        if next == goal {
                            return dist + 1;
                        }
                        if seen.insert(next) {
                            queue.push_back((next, dist + 1));
                        }
                    }
                }
            }
        }
        unreachable!("edit moves connect the state space");
    }

    #[test]
    fn shd_matches_brute_force_edit_distance() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for trial in 0..60 {
            let est = random_simple_graph(5, &mut rng);
            let truth = random_simple_graph(5, &mut rng);
            let report = shd(&est, &truth).unwrap();
            let oracle = bfs_edit_distance(5, graph_mask(&est), graph_mask(&truth));
            assert_eq!(report.shd, oracle, "trial {trial}");
            assert_eq!(report.shd, report.extra + report.missing + report.reversed);
        }
    }

    fn synthetic_pair(n: usize, seed: u64) -> PairDataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
        let b = a.mapv(|v: f64| v.sin() + 0.1 * rng.random::<f64>());
        PairDataset::new(a, b, Direction::AToB, 1.0).unwrap()
    }

    #[test]
    fn preprocess_below_cutoff_standardizes_only() {
        let pair = synthetic_pair(300, 4);
        let out = pairs_preprocess(&pair).unwrap();
        assert_eq!(out.n(), 300);
        for col in [&out.a, &out.b] {
            let mean = col.sum() / 300.0;
            let var = col.mapv(|v| (v - mean) * (v - mean)).sum() / 300.0;
            assert!(mean.abs() < 1e-12, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-12, "variance {var}");
        }
        let again = pairs_preprocess(&out).unwrap();
        for i in 0..300 {
            assert!((again.a[i] - out.a[i]).abs() < 1e-12);
            assert!((again.b[i] - out.b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn preprocess_grids_down_to_lower_medians() {
        // 600 rows sorted by construction: grids of 2, representative is the
        // first row of each. Recompute expectations independently.
        let n = 600;
        let a = Array1::from_shape_fn(n, |i| i as f64);
        let b = Array1::from_shape_fn(n, |i| (i as f64) * 10.0);
        let pair = PairDataset::new(a.clone(), b.clone(), Direction::BToA, 2.0).unwrap();
        let out = pairs_preprocess(&pair).unwrap();
        assert_eq!(out.n(), 300);
        assert_eq!(out.label, Direction::BToA);
        assert_eq!(out.weight, 2.0);

        let mean_a = a.sum() / n as f64;
        let sd_a = (a.mapv(|v| (v - mean_a) * (v - mean_a)).sum() / n as f64).sqrt();
        for g in 0..300 {
            let row = 2 * g;
            let expect = (a[row] - mean_a) / sd_a;
            assert!((out.a[g] - expect).abs() < 1e-12, "grid {g}");
        }
    }

    #[test]
    fn uneven_grids_put_surplus_rows_first() {
        // 1000 rows: the first 100 grids take 4 rows, the rest 3. Lower
        // medians then sit at known source indices.
        let n = 1000;
        let a = Array1::from_shape_fn(n, |i| i as f64);
        let b = a.clone();
        let pair = PairDataset::new(a.clone(), b, Direction::AToB, 1.0).unwrap();
        let out = pairs_preprocess(&pair).unwrap();
        assert_eq!(out.n(), 300);
        let mean = a.sum() / n as f64;
        let sd = (a.mapv(|v| (v - mean) * (v - mean)).sum() / n as f64).sqrt();
        let mut start = 0usize;
        for g in 0..300 {
            let size = if g < 100 { 4 } else { 3 };
            let row = start + (size - 1) / 2;
            let expect = (row as f64 - mean) / sd;
            assert!((out.a[g] - expect).abs() < 1e-12, "grid {g}");
            start += size;
        }
        assert_eq!(start, n);
    }

    #[test]
    fn constant_column_is_rejected() {
        let a = Array1::from_elem(50, 1.5);
        let b = Array1::from_shape_fn(50, |i| i as f64);
        let pair = PairDataset::new(a, b, Direction::AToB, 1.0).unwrap();
        assert!(matches!(
            pairs_preprocess(&pair),
            Err(MetricsError::Data(DataError::ConstantColumn { .. }))
        ));
    }

    #[test]
    fn pair_invariants_are_enforced() {
        let a = Array1::zeros(4);
        let b = Array1::zeros(5);
        assert!(matches!(
            PairDataset::new(a, b, Direction::AToB, 1.0),
            Err(MetricsError::LengthMismatch { .. })
        ));
        let a = Array1::from_elem(3, f64::NAN);
        let b = Array1::zeros(3);
        assert!(matches!(
            PairDataset::new(a, b, Direction::AToB, 1.0),
            Err(MetricsError::NonFinite)
        ));
        let a = Array1::zeros(3);
        let b = Array1::zeros(3);
        assert!(matches!(
            PairDataset::new(a, b, Direction::AToB, 0.0),
            Err(MetricsError::BadWeight(_))
        ));
    }

    fn quick_config() -> DagmaConfig {
        DagmaConfig {
            outer_rounds: 3,
            adam: AdamSettings {
                max_iters: 250,
                ..AdamSettings::default()
            },
            ..DagmaConfig::default()
        }
    }

    fn quadratic_pair(seed: u64, n: usize) -> PairDataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = Array1::from_shape_fn(n, |_| rng.random_range(0.0..10.0));
        let b = a.mapv(|v| v * v)
            + Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
        PairDataset::new(a, b, Direction::AToB, 1.0).unwrap()
    }

    #[test]
    fn quadratic_pair_is_oriented_forward() {
        let pair = quadratic_pair(3, 100);
        let out = orient_pair(&pair, &quick_config()).unwrap();
        assert_eq!(out.decision, PairDecision::AToB);
        assert!(!out.tiebreak);
        assert!(out.w_ab > out.w_ba);
    }

    #[test]
    fn column_swap_flips_the_decision_exactly() {
        // The label must flip exactly. Raw weights mirror only approximately:
        // the barrier gradient's triangular solves are not bitwise
        // permutation-equivariant, and the optimizer amplifies that ulp.
        let pair = quadratic_pair(8, 100);
        let cfg = quick_config();
        let fwd = orient_pair(&pair, &cfg).unwrap();
        let rev = orient_pair(&pair.swapped(), &cfg).unwrap();
        assert_eq!(fwd.decision, PairDecision::AToB);
        assert_eq!(rev.decision, PairDecision::BToA);
        assert_eq!(fwd.tiebreak, rev.tiebreak);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
        assert!(rel(fwd.w_ab, rev.w_ba) < 1e-2, "{} vs {}", fwd.w_ab, rev.w_ba);
        assert!(rel(fwd.w_ba, rev.w_ab) < 1e-2, "{} vs {}", fwd.w_ba, rev.w_ab);
    }

    #[test]
    fn independent_columns_are_mostly_undecided() {
        let cfg = DagmaConfig {
            tau: 1e-2,
            standardize: true,
            outer_rounds: 6,
            adam: AdamSettings {
                max_iters: 150,
                ..AdamSettings::default()
            },
            ..DagmaConfig::default()
        };
        let mut undecided = 0;
        for seed in 0..5 {
            let mut rng = ChaCha20Rng::seed_from_u64(900 + seed);
            let a = Array1::from_shape_fn(200, |_| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let b = Array1::from_shape_fn(200, |_| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let pair = PairDataset::new(a, b, Direction::AToB, 1.0).unwrap();
            if orient_pair(&pair, &cfg).unwrap().decision == PairDecision::Undecided {
                undecided += 1;
            }
        }
        assert!(undecided >= 3, "only {undecided} of 5 seeds were undecided");
    }

    #[test]
    fn accuracy_weights_the_agreements() {
        let rows = [
            (PairDecision::AToB, Direction::AToB, 3.0),
            (PairDecision::BToA, Direction::AToB, 1.0),
            (PairDecision::Undecided, Direction::BToA, 1.0),
            (PairDecision::BToA, Direction::BToA, 1.0),
        ];
        let (weighted, unweighted) = corpus_accuracy(&rows);
        assert!((weighted - 4.0 / 6.0).abs() < 1e-15);
        assert!((unweighted - 0.5).abs() < 1e-15);
    }

    fn write_pair_csv(dir: &Path, name: &str, cols: usize, n: usize) {
        let mut f = std::fs::File::create(dir.join(format!("{name}.csv"))).unwrap();
        let header: Vec<String> = (1..=cols).map(|c| format!("X{c}")).collect();
        writeln!(f, "{}", header.join(",")).unwrap();
        for i in 0..n {
            let row: Vec<String> = (0..cols).map(|c| format!("{}", (i + c) as f64)).collect();
            writeln!(f, "{}", row.join(",")).unwrap();
        }
    }

    #[test]
    fn corpus_loads_pairs_and_skips_wide_files() {
        let dir = tempfile::tempdir().unwrap();
        write_pair_csv(dir.path(), "pair_a", 2, 10);
        write_pair_csv(dir.path(), "pair_b", 2, 12);
        write_pair_csv(dir.path(), "pair_wide", 4, 8);
        let mut meta = std::fs::File::create(dir.path().join("meta.csv")).unwrap();
        writeln!(meta, "name,direction,weight").unwrap();
        writeln!(meta, "pair_a,a->b,2.5").unwrap();
        writeln!(meta, "pair_b,b->a,").unwrap();
        writeln!(meta, "pair_wide,a->b,1.0").unwrap();
        drop(meta);

        let corpus = load_pairs_corpus(dir.path()).unwrap();
        assert_eq!(corpus.pairs.len(), 2);
        assert_eq!(corpus.skipped, vec!["pair_wide".to_string()]);
        assert_eq!(corpus.pairs[0].name, "pair_a");
        assert_eq!(corpus.pairs[0].pair.weight, 2.5);
        assert_eq!(corpus.pairs[0].pair.label, Direction::AToB);
        assert_eq!(corpus.pairs[1].pair.weight, 1.0);
        assert_eq!(corpus.pairs[1].pair.n(), 12);
    }

    #[test]
    fn corpus_without_metadata_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_pairs_corpus(dir.path()),
            Err(MetricsError::MissingMetadata(_))
        ));
    }

    #[test]
    fn corpus_with_bad_direction_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_pair_csv(dir.path(), "p", 2, 5);
        let mut meta = std::fs::File::create(dir.path().join("meta.csv")).unwrap();
        writeln!(meta, "name,direction,weight").unwrap();
        writeln!(meta, "p,sideways,1").unwrap();
        drop(meta);
        assert!(matches!(
            load_pairs_corpus(dir.path()),
            Err(MetricsError::BadMetadata(_))
        ));
    }

    #[test]
    fn report_serializes_with_named_fields() {
        let r = EvalReport {
            shd: 3,
            extra: 1,
            missing: 1,
            reversed: 1,
            predicted_edges: 4,
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"shd\":3"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
