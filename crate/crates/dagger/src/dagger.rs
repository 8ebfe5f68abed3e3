//! The top-down testing procedure over depths 1..D.
//!
//! Depth by depth, the nodes whose parents have all been rejected form the
//! testable frontier; the frontier is run through the generalized step-up
//! of [`crate::stepup`] with per-node constants `c_i = alpha * ell_i / L`
//! and `m_i` from the effective counts, and the accumulated rejection count
//! feeds the next depth's thresholds. Rejections therefore always satisfy
//! strong heredity: every parent of a rejected node is rejected.
//!
//! Two drivers share the engine: [`run_batch`] reads a full p-value vector
//! up front, [`run_sequential`] requests p-values from a caller-supplied
//! oracle one frontier at a time and never asks for a node whose parents
//! were not all rejected. On the same inputs the two produce identical
//! results; batch mode never reads the p-value of an untestable node.

use crate::counts::EffectiveCounts;
use crate::dag::{DagGraph, GraphError, NodeIdx};
use crate::reshape::{ReshapeError, ReshapeFn};
use crate::stepup::{run_depth, DepthCandidate, DepthOutcome, StepupError};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DaggerError {
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("expected one p-value per node ({expected}), got {got}")]
    PValueCount { expected: usize, got: usize },
    #[error("p-value for node {node:?} is {value}, outside [0, 1]")]
    InvalidPValue { node: String, value: f64 },
    #[error("per-depth reshape list covers {provided} depths but {needed} are needed")]
    ReshapeDepths { provided: usize, needed: usize },
    #[error("oracle returned no p-value for requested node {0:?}")]
    OracleIncomplete(String),
    #[error("oracle returned a p-value for node {0:?}, which was not requested")]
    OracleExtraneous(String),
    #[error(transparent)]
    Stepup(#[from] StepupError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Reshape(#[from] ReshapeError),
}

/// How thresholds are reshaped when protecting against arbitrary dependence.
#[derive(Debug, Clone)]
pub enum ReshapeSpec {
    /// The depth-adapted harmonic measure, instantiated per node with
    /// support {m_i + d - 1, ..., m_i + |depths 1..d| - 1}.
    Suggested,
    /// One caller-supplied function per depth, applied uniformly to every
    /// candidate at that depth. Must cover every depth that is run.
    PerDepth(Vec<ReshapeFn>),
}

#[derive(Debug, Clone)]
pub enum Variant {
    Plain,
    Reshaped(ReshapeSpec),
}

#[derive(Debug, Clone)]
pub struct DaggerConfig {
    /// Target FDR, strictly inside (0, 1).
    pub alpha: f64,
    pub variant: Variant,
    /// Stop after this depth (inclusive); None runs all depths.
    pub depth_limit: Option<usize>,
}

impl DaggerConfig {
    pub fn plain(alpha: f64) -> Self {
        DaggerConfig {
            alpha,
            variant: Variant::Plain,
            depth_limit: None,
        }
    }

    pub fn reshaped_suggested(alpha: f64) -> Self {
        DaggerConfig {
            alpha,
            variant: Variant::Reshaped(ReshapeSpec::Suggested),
            depth_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Rejected,
    Accepted,
    Untested,
}

/// Per-node record of what the procedure did, indexed by node handle.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub node: NodeIdx,
    pub depth: usize,
    pub ell: f64,
    pub m: f64,
    /// Level the node was held to at its depth's decision; 0 when untested.
    pub level: f64,
    /// The p-value actually consumed; None when it was never read.
    pub p: Option<f64>,
    pub decision: Decision,
}

#[derive(Debug, Clone)]
pub struct DaggerResult {
    pub rejected: BTreeSet<NodeIdx>,
    pub per_depth: Vec<DepthOutcome>,
    pub r_total: usize,
    /// Nodes whose p-value was consumed (the union of the frontiers).
    pub tested: BTreeSet<NodeIdx>,
    pub audit: Vec<AuditRecord>,
}

/// False discovery proportion and power of a rejection set against a known
/// null set: fdp = |R & nulls| / max(|R|, 1) (so an empty rejection set has
/// fdp 0), power = |R & non-nulls| / |non-nulls|, taken as 0 when every
/// node is null.
pub fn fdp_and_power(
    rejected: &BTreeSet<NodeIdx>,
    nulls: &BTreeSet<NodeIdx>,
    n_nodes: usize,
) -> FdpPower {
    let false_hits = rejected.intersection(nulls).count();
    let fdp = false_hits as f64 / (rejected.len().max(1)) as f64;
    let non_nulls = n_nodes - nulls.len();
    let power = if non_nulls == 0 {
        0.0
    } else {
        (rejected.len() - false_hits) as f64 / non_nulls as f64
    };
    FdpPower { fdp, power }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdpPower {
    pub fdp: f64,
    pub power: f64,
}

impl DaggerResult {
    pub fn fdp_against_truth(&self, nulls: &BTreeSet<NodeIdx>, n_nodes: usize) -> FdpPower {
        fdp_and_power(&self.rejected, nulls, n_nodes)
    }
}

fn validate_config(cfg: &DaggerConfig, graph: &DagGraph) -> Result<usize, DaggerError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(DaggerError::InvalidAlpha(cfg.alpha));
    }
    let d_max = cfg
        .depth_limit
        .map_or(graph.max_depth(), |dl| dl.min(graph.max_depth()));
    if let Variant::Reshaped(ReshapeSpec::PerDepth(fns)) = &cfg.variant {
        if fns.len() < d_max {
            return Err(DaggerError::ReshapeDepths {
                provided: fns.len(),
                needed: d_max,
            });
        }
    }
    Ok(d_max)
}

fn reshape_for(
    cfg: &DaggerConfig,
    m_i: f64,
    d: usize,
    n_upto_d: usize,
) -> Result<ReshapeFn, DaggerError> {
    match &cfg.variant {
        Variant::Plain => Ok(ReshapeFn::Identity),
        Variant::Reshaped(ReshapeSpec::Suggested) => {
            Ok(ReshapeFn::dagger_by(m_i, d, n_upto_d)?)
        }
        Variant::Reshaped(ReshapeSpec::PerDepth(fns)) => Ok(fns[d - 1].clone()),
    }
}

struct RunState {
    rejected_mask: Vec<bool>,
    rejected: BTreeSet<NodeIdx>,
    tested: BTreeSet<NodeIdx>,
    per_depth: Vec<DepthOutcome>,
    audit: Vec<AuditRecord>,
    r_prev: usize,
}

impl RunState {
    fn new(graph: &DagGraph, counts: &EffectiveCounts) -> Self {
        let audit = (0..graph.n() as NodeIdx)
            .map(|i| AuditRecord {
                node: i,
                depth: graph.depth_of(i),
                ell: counts.ell[i as usize],
                m: counts.m[i as usize],
                level: 0.0,
                p: None,
                decision: Decision::Untested,
            })
            .collect();
        RunState {
            rejected_mask: vec![false; graph.n()],
            rejected: BTreeSet::new(),
            tested: BTreeSet::new(),
            per_depth: Vec::new(),
            audit,
            r_prev: 0,
        }
    }

    fn absorb_depth(&mut self, outcome: DepthOutcome, cands: &[DepthCandidate]) {
        for cand in cands {
            if !cand.testable {
                continue;
            }
            self.tested.insert(cand.node);
            let rec = &mut self.audit[cand.node as usize];
            rec.p = cand.p;
            rec.level = outcome.levels[&cand.node];
            rec.decision = if outcome.rejected.contains(&cand.node) {
                Decision::Rejected
            } else {
                Decision::Accepted
            };
        }
        for &i in &outcome.rejected {
            self.rejected_mask[i as usize] = true;
            self.rejected.insert(i);
        }
        self.r_prev += outcome.r_d;
        self.per_depth.push(outcome);
    }

    fn finish(self) -> DaggerResult {
        DaggerResult {
            rejected: self.rejected,
            r_total: self.r_prev,
            tested: self.tested,
            per_depth: self.per_depth,
            audit: self.audit,
        }
    }
}

/// Shared context for building one depth's candidates.
struct DepthContext<'a> {
    graph: &'a DagGraph,
    counts: &'a EffectiveCounts,
    cfg: &'a DaggerConfig,
    d: usize,
    n_upto_d: usize,
    l_total: f64,
}

impl DepthContext<'_> {
    fn candidate(
        &self,
        node: NodeIdx,
        p: Option<f64>,
        testable: bool,
    ) -> Result<DepthCandidate, DaggerError> {
        let m = self.counts.m[node as usize];
        let reshape = if testable {
            reshape_for(self.cfg, m, self.d, self.n_upto_d)?
        } else {
            ReshapeFn::Identity // threshold is identically 0 anyway
        };
        if let (true, Some(v)) = (testable, p) {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(DaggerError::InvalidPValue {
                    node: self.graph.id(node).to_owned(),
                    value: v,
                });
            }
        }
        Ok(DepthCandidate {
            node,
            p,
            testable,
            c: self.cfg.alpha * self.counts.ell[node as usize] / self.l_total,
            m,
            reshape,
        })
    }
}

/// Run the procedure with every p-value supplied up front. The vector must
/// cover all nodes (indexed by node handle); entries of nodes that never
/// become testable are ignored and are never read into any decision.
pub fn run_batch(
    graph: &DagGraph,
    counts: &EffectiveCounts,
    pvalues: &[f64],
    cfg: &DaggerConfig,
) -> Result<DaggerResult, DaggerError> {
    let d_max = validate_config(cfg, graph)?;
    if pvalues.len() != graph.n() {
        return Err(DaggerError::PValueCount {
            expected: graph.n(),
            got: pvalues.len(),
        });
    }
    let l_total = counts.total_leaves as f64;
    let mut state = RunState::new(graph, counts);
    for d in 1..=d_max {
        let ctx = DepthContext {
            graph,
            counts,
            cfg,
            d,
            n_upto_d: graph.nodes_up_to(d),
            l_total,
        };
        let mut cands = Vec::new();
        for &i in graph.nodes_at_depth(d)? {
            let testable = graph
                .parents_of(i)
                .iter()
                .all(|&p| state.rejected_mask[p as usize]);
            let p = testable.then(|| pvalues[i as usize]);
            cands.push(ctx.candidate(i, p, testable)?);
        }
        let outcome = run_depth(&cands, state.r_prev)?;
        state.absorb_depth(outcome, &cands);
    }
    Ok(state.finish())
}

/// Run the procedure sequentially: at each depth the oracle is called
/// exactly once with the sorted testable frontier (possibly empty) and must
/// return a p-value for exactly those nodes. Supplying an unrequested node
/// is rejected, which is what enforces the sequential contract.
pub fn run_sequential<F>(
    graph: &DagGraph,
    counts: &EffectiveCounts,
    mut oracle: F,
    cfg: &DaggerConfig,
) -> Result<DaggerResult, DaggerError>
where
    F: FnMut(usize, &[NodeIdx]) -> BTreeMap<NodeIdx, f64>,
{
    let d_max = validate_config(cfg, graph)?;
    let l_total = counts.total_leaves as f64;
    let mut state = RunState::new(graph, counts);
    for d in 1..=d_max {
        let ctx = DepthContext {
            graph,
            counts,
            cfg,
            d,
            n_upto_d: graph.nodes_up_to(d),
            l_total,
        };
        let layer = graph.nodes_at_depth(d)?;
        let mut testable_mask = Vec::with_capacity(layer.len());
        let mut frontier = Vec::new();
        for &i in layer {
            let testable = graph
                .parents_of(i)
                .iter()
                .all(|&p| state.rejected_mask[p as usize]);
            testable_mask.push(testable);
            if testable {
                frontier.push(i);
            }
        }
        let answers = oracle(d, &frontier);
        for &i in answers.keys() {
            if !frontier.contains(&i) {
                let id = if (i as usize) < graph.n() {
                    graph.id(i).to_owned()
                } else {
                    format!("#{i}")
                };
                return Err(DaggerError::OracleExtraneous(id));
            }
        }
        let mut cands = Vec::with_capacity(layer.len());
        for (&i, &testable) in layer.iter().zip(&testable_mask) {
            let p = if testable {
                Some(*answers.get(&i).ok_or_else(|| {
                    DaggerError::OracleIncomplete(graph.id(i).to_owned())
                })?)
            } else {
                None
            };
            cands.push(ctx.candidate(i, p, testable)?);
        }
        let outcome = run_depth(&cands, state.r_prev)?;
        state.absorb_depth(outcome, &cands);
    }
    Ok(state.finish())
}
