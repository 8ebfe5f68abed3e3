//! Name-keyed registry of multiple-testing procedures.
//!
//! Every procedure takes the same inputs (graph, effective counts, one
//! p-value per node, target FDR) and produces a [`TestOutcome`], so the
//! simulation harness and the CLI select them interchangeably at runtime:
//!
//! - `dagger-plain`: the top-down graph procedure, valid under independence
//!   or positive dependence;
//! - `dagger-reshaped`: the same with depth-adapted harmonic reshaping,
//!   valid under arbitrary dependence;
//! - `bh`, `by`: the flat step-up baselines, which ignore the graph
//!   structure and test every node.

use crate::baselines;
use crate::counts::EffectiveCounts;
use crate::dag::{DagGraph, NodeIdx};
use crate::dagger::{self, DaggerConfig, DaggerError};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("unknown method {0:?}; known methods: {names}", names = method_names().join(", "))]
    Unknown(String),
    #[error(transparent)]
    Dagger(#[from] DaggerError),
    #[error(transparent)]
    Baseline(#[from] baselines::BaselineError),
}

/// What any procedure reports back: who was rejected, whose p-value was
/// consumed, and the level each node was held to (0 for untested nodes).
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub rejected: BTreeSet<NodeIdx>,
    pub tested: BTreeSet<NodeIdx>,
    pub levels: Vec<f64>,
}

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(
        &self,
        graph: &DagGraph,
        counts: &EffectiveCounts,
        pvalues: &[f64],
        alpha: f64,
    ) -> Result<TestOutcome, MethodError>;
}

pub struct DaggerPlain;
pub struct DaggerReshaped;
pub struct Bh;
pub struct By;

fn dagger_outcome(
    graph: &DagGraph,
    counts: &EffectiveCounts,
    pvalues: &[f64],
    cfg: &DaggerConfig,
) -> Result<TestOutcome, MethodError> {
    let res = dagger::run_batch(graph, counts, pvalues, cfg)?;
    let levels = res.audit.iter().map(|r| r.level).collect();
    Ok(TestOutcome {
        rejected: res.rejected,
        tested: res.tested,
        levels,
    })
}

impl Method for DaggerPlain {
    fn name(&self) -> &'static str {
        "dagger-plain"
    }
    fn run(
        &self,
        graph: &DagGraph,
        counts: &EffectiveCounts,
        pvalues: &[f64],
        alpha: f64,
    ) -> Result<TestOutcome, MethodError> {
        dagger_outcome(graph, counts, pvalues, &DaggerConfig::plain(alpha))
    }
}

impl Method for DaggerReshaped {
    fn name(&self) -> &'static str {
        "dagger-reshaped"
    }
    fn run(
        &self,
        graph: &DagGraph,
        counts: &EffectiveCounts,
        pvalues: &[f64],
        alpha: f64,
    ) -> Result<TestOutcome, MethodError> {
        dagger_outcome(graph, counts, pvalues, &DaggerConfig::reshaped_suggested(alpha))
    }
}

fn flat_outcome(
    rejected: BTreeSet<usize>,
    n: usize,
    alpha: f64,
) -> TestOutcome {
    let level = baselines::bh_level(n, alpha, rejected.len());
    TestOutcome {
        rejected: rejected.into_iter().map(|i| i as NodeIdx).collect(),
        tested: (0..n as NodeIdx).collect(),
        levels: vec![level; n],
    }
}

impl Method for Bh {
    fn name(&self) -> &'static str {
        "bh"
    }
    fn run(
        &self,
        graph: &DagGraph,
        _counts: &EffectiveCounts,
        pvalues: &[f64],
        alpha: f64,
    ) -> Result<TestOutcome, MethodError> {
        let rejected = baselines::bh(pvalues, alpha)?;
        Ok(flat_outcome(rejected, graph.n(), alpha))
    }
}

impl Method for By {
    fn name(&self) -> &'static str {
        "by"
    }
    fn run(
        &self,
        graph: &DagGraph,
        _counts: &EffectiveCounts,
        pvalues: &[f64],
        alpha: f64,
    ) -> Result<TestOutcome, MethodError> {
        let rejected = baselines::by(pvalues, alpha)?;
        let h_k: f64 = (1..=graph.n()).map(|i| 1.0 / i as f64).sum();
        Ok(flat_outcome(rejected, graph.n(), alpha / h_k))
    }
}

static METHODS: [&dyn Method; 4] = [&DaggerPlain, &DaggerReshaped, &Bh, &By];

/// Look up a procedure by its registered name.
pub fn lookup(name: &str) -> Option<&'static dyn Method> {
    METHODS.iter().copied().find(|m| m.name() == name)
}

/// All registered procedure names, in registration order.
pub fn method_names() -> Vec<&'static str> {
    METHODS.iter().map(|m| m.name()).collect()
}
