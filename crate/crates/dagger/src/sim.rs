//! Monte-Carlo harness: layered random DAGs, hereditary truth assignment,
//! Gaussian and propagated p-value models, and replication-averaged FDP /
//! power estimates with standard errors.
//!
//! Graph model: given per-layer sizes, each node at layer d >= 2 picks k_d
//! distinct parents uniformly from layer d-1, so depths coincide with layer
//! indices and the graph is transitively reduced by construction.
//!
//! Truth model: each leaf is null independently with probability
//! `pi0_leaf`; every internal node is null iff all of its children are
//! null, so non-nullness propagates upward and the truth satisfies strong
//! heredity.
//!
//! P-value models: under the Gaussian model each node draws
//! X ~ mu + N(0, 1) with mu = 0 at nulls and a per-depth signal at
//! non-nulls, and reports p = 1 - Phi(X). Under the propagated model only
//! leaves draw from the Gaussian model; interior p-values are the Simes
//! combination of the node's children, computed bottom-up.

use crate::combine::{self, Basis, CombineError};
use crate::dag::{DagGraph, GraphError, NodeIdx};
use crate::dagger::fdp_and_power;
use crate::method::{self, MethodError};
use crate::rng::{open_unit, uniform_index, Purpose, Streams};
use crate::stats;
use crate::counts::effective_counts;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("layer {layer} requests {k} distinct parents but layer {} has only {available} nodes", layer - 1)]
    InsufficientParents {
        layer: usize,
        k: usize,
        available: usize,
    },
    #[error("no signal strength configured for depth {0}")]
    MissingDepthSignal(usize),
    #[error("unknown method {0:?}; known methods: {names}", names = method::method_names().join(", "))]
    UnknownMethod(String),
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Combine(#[from] CombineError),
}

/// How node p-values are generated.
#[derive(Debug, Clone)]
pub enum PValueModel {
    /// Independent X ~ mu + N(0,1), p = 1 - Phi(X), with mu looked up by
    /// depth at non-null nodes and mu = 0 at nulls.
    Gaussian { mu_by_depth: BTreeMap<usize, f64> },
    /// Gaussian leaves (signal `mu_leaf` at non-null leaves), interior
    /// nodes combined bottom-up with Simes over their children.
    SimesPropagated { mu_leaf: f64 },
}

/// The per-depth signal schedule "mu_deepest at the bottom, growing by
/// `step` per level toward the roots".
pub fn mu_schedule(max_depth: usize, mu_deepest: f64, step: f64) -> BTreeMap<usize, f64> {
    (1..=max_depth)
        .map(|d| (d, mu_deepest + step * (max_depth - d) as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Node count per layer, top (depth 1) first.
    pub layers: Vec<usize>,
    /// Distinct parents drawn by each node of layer d from layer d-1;
    /// entry 0 is ignored.
    pub parents_per_node: Vec<usize>,
    pub pi0_leaf: f64,
    pub pvalue_model: PValueModel,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    /// A name registered in [`crate::method`].
    pub method: String,
    /// Redraw the graph every replication instead of fixing one per
    /// experiment.
    pub redraw_graph: bool,
    /// Keep the per-replication (fdp, power) pairs in the result.
    pub keep_per_rep: bool,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub mean_fdp: f64,
    pub se_fdp: f64,
    pub mean_power: f64,
    pub se_power: f64,
    pub reps: usize,
    pub per_rep: Option<Vec<(f64, f64)>>,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn sample_distinct(rng: &mut ChaCha12Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut out;
    if 2 * k >= n {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + uniform_index(rng, n - i);
            idx.swap(i, j);
        }
        out = idx[..k].to_vec();
    } else {
        out = Vec::with_capacity(k);
        while out.len() < k {
            let j = uniform_index(rng, n);
            if !out.contains(&j) {
                out.push(j);
            }
        }
    }
    out.sort_unstable();
    out
}

fn layer_id(layer: usize, i: usize) -> String {
    format!("d{layer:02}n{i:06}")
}

/// Draw a random layered DAG: layer 1 holds `layers[0]` root nodes, and
/// each node of layer d >= 2 connects to `parents_per_node[d-1]` distinct
/// uniformly chosen nodes of layer d-1.
pub fn gen_layered_dag(
    layers: &[usize],
    parents_per_node: &[usize],
    rng: &mut ChaCha12Rng,
) -> Result<DagGraph, SimError> {
    if layers.is_empty() {
        return Err(SimError::InvalidConfig("layers must be nonempty".into()));
    }
    if layers.contains(&0) {
        return Err(SimError::InvalidConfig("layer sizes must be positive".into()));
    }
    if parents_per_node.len() != layers.len() {
        return Err(SimError::InvalidConfig(
            "parents_per_node must have one entry per layer".into(),
        ));
    }
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut nodes: Vec<String> = Vec::new();
    for (d, &size) in layers.iter().enumerate() {
        let layer = d + 1;
        if layer == 1 {
            nodes.extend((0..size).map(|i| layer_id(1, i)));
            continue;
        }
        let k = parents_per_node[d];
        let avail = layers[d - 1];
        if k == 0 || k > avail {
            return Err(SimError::InsufficientParents {
                layer,
                k,
                available: avail,
            });
        }
        for i in 0..size {
            let child = layer_id(layer, i);
            for p in sample_distinct(rng, avail, k) {
                edges.push((layer_id(layer - 1, p), child.clone()));
            }
        }
    }
    Ok(crate::dag::build_graph(
        &edges,
        &nodes,
        crate::dag::EdgePolicy::Strict,
    )?)
}

/// Draw the null set: leaves are null independently with probability
/// `pi0_leaf`, interior nodes are null iff every child is null.
pub fn assign_truth(graph: &DagGraph, pi0_leaf: f64, rng: &mut ChaCha12Rng) -> BTreeSet<NodeIdx> {
    let mut null = vec![false; graph.n()];
    for &leaf in graph.leaves() {
        null[leaf as usize] = open_unit(rng) < pi0_leaf;
    }
    for &a in graph.topo_order().iter().rev() {
        if graph.is_leaf(a) {
            continue;
        }
        null[a as usize] = graph.children_of(a).iter().all(|&b| null[b as usize]);
    }
    (0..graph.n() as NodeIdx)
        .filter(|&i| null[i as usize])
        .collect()
}

fn gaussian_p(mu: f64, rng: &mut ChaCha12Rng) -> f64 {
    let x = mu + stats::std_normal_quantile(open_unit(rng));
    1.0 - stats::std_normal_cdf(x)
}

/// Independent Gaussian p-values, one per node in id order.
pub fn gen_pvalues_gaussian(
    graph: &DagGraph,
    nulls: &BTreeSet<NodeIdx>,
    mu_by_depth: &BTreeMap<usize, f64>,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>, SimError> {
    let mut p = Vec::with_capacity(graph.n());
    for i in 0..graph.n() as NodeIdx {
        let mu = if nulls.contains(&i) {
            0.0
        } else {
            let d = graph.depth_of(i);
            *mu_by_depth
                .get(&d)
                .ok_or(SimError::MissingDepthSignal(d))?
        };
        p.push(gaussian_p(mu, rng));
    }
    Ok(p)
}

/// Gaussian leaves, Simes-of-children everywhere above.
pub fn gen_pvalues_simes(
    graph: &DagGraph,
    nulls: &BTreeSet<NodeIdx>,
    mu_leaf: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>, SimError> {
    let mut leaf_p = BTreeMap::new();
    for &leaf in graph.leaves() {
        let mu = if nulls.contains(&leaf) { 0.0 } else { mu_leaf };
        leaf_p.insert(leaf, gaussian_p(mu, rng));
    }
    Ok(combine::propagate_intersection(
        graph,
        &leaf_p,
        &combine::Simes,
        Basis::Children,
    )?)
}

fn validate(cfg: &SimConfig) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&cfg.pi0_leaf) {
        return Err(SimError::InvalidConfig(format!(
            "pi0_leaf must lie in [0, 1], got {}",
            cfg.pi0_leaf
        )));
    }
    if cfg.reps == 0 {
        return Err(SimError::InvalidConfig("reps must be >= 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(SimError::InvalidConfig(format!(
            "alpha must lie strictly inside (0, 1), got {}",
            cfg.alpha
        )));
    }
    if method::lookup(&cfg.method).is_none() {
        return Err(SimError::UnknownMethod(cfg.method.clone()));
    }
    Ok(())
}

/// Run one experiment: per replication, draw (graph if redrawing, truth,
/// p-values), run the configured method, and record (fdp, power); then
/// aggregate mean and standard error (sample sd / sqrt reps, 0 when
/// reps = 1).
///
/// Replications use independent streams derived from (seed, replication),
/// so results do not depend on the parallel schedule, and two experiments
/// with the same seed see identical data regardless of method.
pub fn run_experiment(cfg: &SimConfig) -> Result<SimResult, SimError> {
    validate(cfg)?;
    let streams = Streams::new(cfg.seed);
    let method = method::lookup(&cfg.method).expect("validated above");
    let shared = if cfg.redraw_graph {
        None
    } else {
        let mut rng = streams.experiment(Purpose::Graph);
        let g = gen_layered_dag(&cfg.layers, &cfg.parents_per_node, &mut rng)?;
        let c = effective_counts(&g);
        Some((g, c))
    };

    let per_rep: Vec<(f64, f64)> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| -> Result<(f64, f64), SimError> {
            let local;
            let (graph, counts) = match &shared {
                Some((g, c)) => (g, c),
                None => {
                    let mut rng = streams.replication(rep, Purpose::Graph);
                    let g = gen_layered_dag(&cfg.layers, &cfg.parents_per_node, &mut rng)?;
                    let c = effective_counts(&g);
                    local = (g, c);
                    (&local.0, &local.1)
                }
            };
            let mut truth_rng = streams.replication(rep, Purpose::Truth);
            let nulls = assign_truth(graph, cfg.pi0_leaf, &mut truth_rng);
            let mut p_rng = streams.replication(rep, Purpose::PValues);
            let pvalues = match &cfg.pvalue_model {
                PValueModel::Gaussian { mu_by_depth } => {
                    gen_pvalues_gaussian(graph, &nulls, mu_by_depth, &mut p_rng)?
                }
                PValueModel::SimesPropagated { mu_leaf } => {
                    gen_pvalues_simes(graph, &nulls, *mu_leaf, &mut p_rng)?
                }
            };
            let outcome = method.run(graph, counts, &pvalues, cfg.alpha)?;
            let fp = fdp_and_power(&outcome.rejected, &nulls, graph.n());
            Ok((fp.fdp, fp.power))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (mean_fdp, se_fdp) = mean_se(per_rep.iter().map(|x| x.0), cfg.reps);
    let (mean_power, se_power) = mean_se(per_rep.iter().map(|x| x.1), cfg.reps);
    Ok(SimResult {
        mean_fdp,
        se_fdp,
        mean_power,
        se_power,
        reps: cfg.reps,
        per_rep: cfg.keep_per_rep.then_some(per_rep),
    })
}

/// One grid cell of a sweep over null proportions and methods.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub pi0_leaf: f64,
    pub method: String,
    pub alpha: f64,
    pub result: SimResult,
    pub seed: u64,
}

/// Sweep pi0 x methods with everything else fixed. All cells share the
/// experiment seed, so any two methods at the same pi0 see identical
/// graphs, truths, and p-values (matched replications).
pub fn run_grid(
    base: &SimConfig,
    pi0_grid: &[f64],
    methods: &[String],
) -> Result<Vec<GridRow>, SimError> {
    let mut rows = Vec::with_capacity(pi0_grid.len() * methods.len());
    for &pi0 in pi0_grid {
        for m in methods {
            let cfg = SimConfig {
                pi0_leaf: pi0,
                method: m.clone(),
                ..base.clone()
            };
            rows.push(GridRow {
                pi0_leaf: pi0,
                method: m.clone(),
                alpha: cfg.alpha,
                seed: cfg.seed,
                result: run_experiment(&cfg)?,
            });
        }
    }
    Ok(rows)
}
