//! Global-null p-value combiners and bottom-up propagation over a DAG.
//!
//! Each combiner turns a group of p-values into a single p-value for the
//! intersection hypothesis of the group:
//!
//! - Simes: min over k of P_(k) * S / k, valid under positive dependence;
//!   a reshaped variant divides by beta(k) instead of k.
//! - Fisher: chi-square survival of -2 * sum log p with 2S degrees of
//!   freedom, valid under independence.
//! - Stouffer: 1 - Phi(sum of Phi^{-1}(1 - p_i) / sqrt(S)), valid under
//!   independence.
//!
//! Every combiner is monotone: raising an input never lowers the output.
//! [`propagate_intersection`] assigns internal nodes their combined
//! p-values bottom-up, either from their direct children or from the leaf
//! set of their sub-DAG.

use crate::dag::{DagGraph, NodeIdx};
use crate::reshape::ReshapeFn;
use crate::stats;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CombineError {
    #[error("cannot combine an empty p-value list")]
    EmptyInput,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("Fisher's method needs strictly positive p-values, got {0}")]
    ZeroPValue(f64),
    #[error("Stouffer's method needs p-values strictly inside (0, 1), got {0}")]
    BoundaryP(f64),
    #[error("no p-value supplied for leaf {0:?}")]
    MissingLeafP(String),
    #[error("p-value supplied for non-leaf node {0:?}")]
    ExtraP(String),
}

fn check_unit_interval(p: &[f64]) -> Result<(), CombineError> {
    if p.is_empty() {
        return Err(CombineError::EmptyInput);
    }
    for &x in p {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(CombineError::InvalidP(x));
        }
    }
    Ok(())
}

/// Simes' combined p-value: min over k of P_(k) * S / k, or with a
/// reshaping function, min over k of P_(k) * S / beta(k); support points
/// with beta(k) = 0 are skipped (their threshold is unreachable). The
/// result is clamped to [0, 1].
pub fn simes(p: &[f64], reshape: Option<&ReshapeFn>) -> Result<f64, CombineError> {
    check_unit_interval(p)?;
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let s = sorted.len() as f64;
    let mut best = f64::INFINITY;
    for (i, &pk) in sorted.iter().enumerate() {
        let k = (i + 1) as f64;
        let denom = match reshape {
            None | Some(ReshapeFn::Identity) => k,
            Some(f) => f.eval(k),
        };
        if denom <= 0.0 {
            continue;
        }
        best = best.min(pk * s / denom);
    }
    Ok(best.min(1.0))
}

/// Fisher's combined p-value: survival of a chi-square with 2S degrees of
/// freedom at -2 * sum log p_i.
pub fn fisher(p: &[f64]) -> Result<f64, CombineError> {
    check_unit_interval(p)?;
    if let Some(&bad) = p.iter().find(|&&x| x <= 0.0) {
        return Err(CombineError::ZeroPValue(bad));
    }
    let stat: f64 = -2.0 * p.iter().map(|&x| x.ln()).sum::<f64>();
    Ok(stats::chi2_sf(stat, 2.0 * p.len() as f64))
}

/// Stouffer's combined p-value: 1 - Phi(sum z_i / sqrt(S)) with
/// z_i = Phi^{-1}(1 - p_i).
pub fn stouffer(p: &[f64]) -> Result<f64, CombineError> {
    check_unit_interval(p)?;
    if let Some(&bad) = p.iter().find(|&&x| x <= 0.0 || x >= 1.0) {
        return Err(CombineError::BoundaryP(bad));
    }
    let z: f64 = p.iter().map(|&x| -stats::std_normal_quantile(x)).sum();
    Ok(1.0 - stats::std_normal_cdf(z / (p.len() as f64).sqrt()))
}

/// A p-value combiner selectable by name. See [`combiner_for`].
pub trait Combiner: Send + Sync {
    fn name(&self) -> &'static str;
    fn combine(&self, p: &[f64]) -> Result<f64, CombineError>;
}

/// Plain Simes.
pub struct Simes;
/// Simes reshaped with the harmonic measure over the group size, the
/// arbitrary-dependence variant.
pub struct SimesBy;
/// Simes with a caller-supplied reshaping function.
pub struct SimesReshaped(pub ReshapeFn);
/// Fisher's method.
pub struct Fisher;
/// Stouffer's (Rosenthal's) method.
pub struct Stouffer;

impl Combiner for Simes {
    fn name(&self) -> &'static str {
        "simes"
    }
    fn combine(&self, p: &[f64]) -> Result<f64, CombineError> {
        simes(p, None)
    }
}

impl Combiner for SimesBy {
    fn name(&self) -> &'static str {
        "simes:by"
    }
    fn combine(&self, p: &[f64]) -> Result<f64, CombineError> {
        if p.is_empty() {
            return Err(CombineError::EmptyInput);
        }
        let f = ReshapeFn::by_global(p.len() as u32).expect("len >= 1");
        simes(p, Some(&f))
    }
}

impl Combiner for SimesReshaped {
    fn name(&self) -> &'static str {
        "simes-reshaped"
    }
    fn combine(&self, p: &[f64]) -> Result<f64, CombineError> {
        simes(p, Some(&self.0))
    }
}

impl Combiner for Fisher {
    fn name(&self) -> &'static str {
        "fisher"
    }
    fn combine(&self, p: &[f64]) -> Result<f64, CombineError> {
        fisher(p)
    }
}

impl Combiner for Stouffer {
    fn name(&self) -> &'static str {
        "stouffer"
    }
    fn combine(&self, p: &[f64]) -> Result<f64, CombineError> {
        stouffer(p)
    }
}

/// Resolve a combiner spec string (`simes`, `simes:by`, `fisher`,
/// `stouffer`) to a combiner.
pub fn combiner_for(spec: &str) -> Option<Box<dyn Combiner>> {
    match spec {
        "simes" => Some(Box::new(Simes)),
        "simes:by" => Some(Box::new(SimesBy)),
        "fisher" => Some(Box::new(Fisher)),
        "stouffer" => Some(Box::new(Stouffer)),
        _ => None,
    }
}

/// Spec strings accepted by [`combiner_for`].
pub const COMBINER_SPECS: [&str; 4] = ["simes", "simes:by", "fisher", "stouffer"];

/// What an internal node combines over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Basis {
    /// The (already combined) p-values of the node's children.
    #[default]
    Children,
    /// The original p-values of the leaves of the node's sub-DAG.
    SubLeaves,
}

/// Word-packed leaf membership per node, filled by one reverse-topological
/// union pass.
struct LeafSets {
    words: usize,
    bits: Vec<u64>,
}

impl LeafSets {
    fn build(graph: &DagGraph, leaf_rank: &[usize]) -> Self {
        let n = graph.n();
        let words = graph.leaf_count().div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for &a in graph.topo_order().iter().rev() {
            let au = a as usize;
            if graph.is_leaf(a) {
                let r = leaf_rank[au];
                bits[au * words + r / 64] |= 1u64 << (r % 64);
                continue;
            }
            for &b in graph.children_of(a) {
                let bu = b as usize;
                for w in 0..words {
                    let v = bits[bu * words + w];
                    bits[au * words + w] |= v;
                }
            }
        }
        LeafSets { words, bits }
    }

    fn leaf_ranks(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for w in 0..self.words {
            let mut v = self.bits[node * self.words + w];
            while v != 0 {
                let b = v.trailing_zeros() as usize;
                out.push(w * 64 + b);
                v &= v - 1;
            }
        }
        out
    }
}

/// Propagate leaf p-values up an intersection DAG: leaves keep their
/// values, every internal node gets the combined p-value of its children
/// (or of its sub-DAG's leaves), computed in reverse topological order.
///
/// `leaf_p` must cover exactly the leaves of the graph.
pub fn propagate_intersection(
    graph: &DagGraph,
    leaf_p: &BTreeMap<NodeIdx, f64>,
    combiner: &dyn Combiner,
    basis: Basis,
) -> Result<Vec<f64>, CombineError> {
    for &i in leaf_p.keys() {
        if !graph.is_leaf(i) {
            return Err(CombineError::ExtraP(graph.id(i).to_owned()));
        }
    }
    let n = graph.n();
    let mut p = vec![f64::NAN; n];
    let mut leaf_rank = vec![usize::MAX; n];
    let mut leaf_values = Vec::with_capacity(graph.leaf_count());
    for (rank, &leaf) in graph.leaves().iter().enumerate() {
        let v = *leaf_p
            .get(&leaf)
            .ok_or_else(|| CombineError::MissingLeafP(graph.id(leaf).to_owned()))?;
        if !(0.0..=1.0).contains(&v) || v.is_nan() {
            return Err(CombineError::InvalidP(v));
        }
        p[leaf as usize] = v;
        leaf_rank[leaf as usize] = rank;
        leaf_values.push(v);
    }

    match basis {
        Basis::Children => {
            for &a in graph.topo_order().iter().rev() {
                if graph.is_leaf(a) {
                    continue;
                }
                let child_p: Vec<f64> = graph
                    .children_of(a)
                    .iter()
                    .map(|&b| p[b as usize])
                    .collect();
                p[a as usize] = combiner.combine(&child_p)?;
            }
        }
        Basis::SubLeaves => {
            let sets = LeafSets::build(graph, &leaf_rank);
            for (a, slot) in p.iter_mut().enumerate() {
                if graph.is_leaf(a as NodeIdx) {
                    continue;
                }
                let group: Vec<f64> = sets
                    .leaf_ranks(a)
                    .into_iter()
                    .map(|r| leaf_values[r])
                    .collect();
                *slot = combiner.combine(&group)?;
            }
        }
    }
    Ok(p)
}
