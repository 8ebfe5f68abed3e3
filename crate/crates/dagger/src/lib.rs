//! False-discovery-rate control for hypotheses arranged on a directed
//! acyclic graph.
//!
//! Hypotheses sit on the nodes of a DAG whose edges encode the order in
//! which they must be tested: a node may only be tested once all of its
//! parents have been rejected. The procedure walks the graph top-down,
//! depth by depth, running a generalized step-up over each testable
//! frontier with per-node thresholds built from water-filled effective node
//! and leaf counts. The rejected set always satisfies strong heredity
//! (every parent of a rejected node is rejected) and the false discovery
//! rate over the whole graph is controlled at the target level — under
//! independence or positive dependence as is, and under arbitrary
//! dependence with reshaped thresholds.
//!
//! The crate also ships the flat Benjamini-Hochberg / Benjamini-Yekutieli
//! baselines the graph procedure reduces to on edgeless graphs, Simes /
//! Fisher / Stouffer p-value combiners for intersection DAGs, and a
//! seeded Monte-Carlo harness for estimating FDR and power on random
//! layered graphs.

pub mod baselines;
pub mod combine;
pub mod counts;
pub mod dag;
pub mod dagger;
pub mod io;
pub mod method;
pub mod reshape;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod stepup;

pub use counts::{effective_counts, effective_counts_exact, verify_conservation, EffectiveCounts};
pub use dag::{build_graph, validate, DagGraph, EdgePolicy, NodeIdx, ValidationReport};
pub use dagger::{run_batch, run_sequential, DaggerConfig, DaggerResult, Variant};
pub use method::{lookup as method_lookup, method_names, Method, TestOutcome};
pub use reshape::ReshapeFn;
pub use sim::{run_experiment, run_grid, SimConfig, SimResult};
