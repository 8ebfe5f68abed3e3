//! Command-line interface.
//!
//! Subcommands: `validate` (structural checks on an edge-list file),
//! `counts` (per-node effective counts as TSV), `test` (run a procedure
//! over a DAG and a p-value file, TSV and optional Graphviz out), and
//! `simulate` (Monte-Carlo FDR/power sweeps, CSV out).
//!
//! Exit codes: 0 success, 1 domain failure (cyclic graph, missing p-value),
//! 2 usage or I/O failure. `DAGGER_THREADS` caps simulation parallelism
//! (0 or unset = automatic).

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use dagger::combine::{combiner_for, Basis};
use dagger::dag::{DagGraph, EdgePolicy};
use dagger::dagger::{DaggerConfig, ReshapeSpec, Variant};
use dagger::io;
use dagger::method::TestOutcome;
use dagger::reshape::ReshapeFn;
use dagger::sim::{mu_schedule, PValueModel, SimConfig};

#[derive(Parser)]
#[command(name = "dagger", version, about = "FDR control for hypotheses on a DAG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dagger,
    Bh,
    By,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Plain,
    Reshaped,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReshapeArg {
    Identity,
    By,
    DaggerBy,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Children,
    SubLeaves,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gaussian,
    Simes,
}

#[derive(Subcommand)]
enum Command {
    /// Check an edge-list file for cycles, duplicate and redundant edges
    Validate {
        dag_file: PathBuf,
        /// Treat transitively redundant edges as removable instead of fatal
        #[arg(long)]
        strip_redundant: bool,
    },
    /// Print per-node depth and effective node/leaf counts as TSV
    Counts {
        dag_file: PathBuf,
        #[arg(long)]
        strip_redundant: bool,
    },
    /// Test the hypotheses in a DAG against a p-value file
    Test {
        dag_file: PathBuf,
        pvalue_file: PathBuf,
        /// Target false discovery rate, strictly inside (0, 1)
        #[arg(long)]
        alpha: f64,
        /// Testing procedure: the graph procedure or a flat baseline
        #[arg(long, value_enum, default_value_t = MethodArg::Dagger)]
        method: MethodArg,
        /// Threshold variant of the graph procedure
        #[arg(long, value_enum, default_value_t = VariantArg::Plain)]
        variant: VariantArg,
        /// Reshaping used by the reshaped variant
        #[arg(long, value_enum, default_value_t = ReshapeArg::DaggerBy)]
        reshape: ReshapeArg,
        /// Combine leaf p-values up the graph first (the p-value file then
        /// covers exactly the leaves): simes, simes:by, fisher, stouffer
        #[arg(long)]
        propagate: Option<String>,
        /// What the combiner aggregates at each internal node
        #[arg(long, value_enum, default_value_t = BasisArg::Children)]
        basis: BasisArg,
        /// Write a Graphviz rendering of the decisions to this path
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        strip_redundant: bool,
    },
    /// Monte-Carlo estimation of FDR and power on random layered DAGs
    Simulate {
        /// TOML config file; inline flags are ignored when present
        #[arg(long)]
        config: Option<PathBuf>,
        /// Layer sizes, roots first, e.g. 125,250,125
        #[arg(long, value_delimiter = ',')]
        layers: Vec<usize>,
        /// Parents drawn per node of each layer (first entry ignored)
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Grid of leaf null proportions
        #[arg(long, value_delimiter = ',')]
        pi0: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModelArg::Gaussian)]
        model: ModelArg,
        /// Gaussian model: signal at the deepest layer
        #[arg(long, default_value_t = 1.0)]
        mu_deepest: f64,
        /// Gaussian model: signal increment per level toward the roots
        #[arg(long, default_value_t = 0.3)]
        mu_step: f64,
        /// Gaussian model: explicit per-depth signals, e.g. 1=1.6,2=1.3,3=1.0
        #[arg(long)]
        mu_by_depth: Option<String>,
        /// Propagated model: signal at non-null leaves
        #[arg(long, default_value_t = 2.0)]
        mu_leaf: f64,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Procedures to sweep, e.g. dagger-plain,bh
        #[arg(long, value_delimiter = ',', default_values_t = [String::from("dagger-plain")])]
        methods: Vec<String>,
        /// Redraw the graph each replication instead of fixing it
        #[arg(long)]
        redraw_graph: bool,
    },
}

/// Domain failures exit 1, usage/IO failures exit 2.
enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
    fn message(&self) -> &anyhow::Error {
        match self {
            Failure::Domain(e) | Failure::Usage(e) => e,
        }
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn domain<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Domain(e.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)
}

fn load_graph(path: &Path, strip: bool) -> Result<DagGraph, Failure> {
    let text = read(path)?;
    let (edges, nodes) = io::parse_edge_list(&text).map_err(usage)?;
    let policy = if strip {
        EdgePolicy::StripRedundant
    } else {
        EdgePolicy::Strict
    };
    dagger::dag::build_graph(&edges, &nodes, policy).map_err(domain)
}

fn cmd_validate(dag_file: &Path, strip: bool) -> Result<(), Failure> {
    let text = read(dag_file)?;
    let (edges, nodes) = io::parse_edge_list(&text).map_err(usage)?;
    let report = dagger::dag::validate(&edges, &nodes).map_err(domain)?;
    print!("{}", io::render_report(&report));
    let acceptable = report.cycles_found.is_empty()
        && report.duplicate_edges.is_empty()
        && (strip || report.redundant_edges.is_empty());
    if acceptable {
        if strip && !report.redundant_edges.is_empty() {
            println!("valid after stripping {} redundant edges", report.redundant_edges.len());
        }
        Ok(())
    } else {
        Err(domain(anyhow!("graph is not a valid reduced DAG")))
    }
}

fn cmd_counts(dag_file: &Path, strip: bool) -> Result<(), Failure> {
    let graph = load_graph(dag_file, strip)?;
    let counts = dagger::effective_counts(&graph);
    print!("{}", io::counts_tsv(&graph, &counts));
    Ok(())
}

fn pvalue_map(graph: &DagGraph, text: &str) -> Result<BTreeMap<u32, f64>, Failure> {
    let pairs = io::parse_pvalues(text).map_err(usage)?;
    let mut map = BTreeMap::new();
    for (id, v) in pairs {
        let idx = graph
            .index_of(&id)
            .ok_or_else(|| domain(anyhow!("p-value for unknown node {id:?}")))?;
        map.insert(idx, v);
    }
    Ok(map)
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    dag_file: &Path,
    pvalue_file: &Path,
    alpha: f64,
    method: MethodArg,
    variant: VariantArg,
    reshape: ReshapeArg,
    propagate: Option<&str>,
    basis: BasisArg,
    dot: Option<&Path>,
    strip: bool,
) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(anyhow!(
            "--alpha must lie strictly inside (0, 1), got {alpha}"
        )));
    }
    let graph = load_graph(dag_file, strip)?;
    let counts = dagger::effective_counts(&graph);
    let by_node = pvalue_map(&graph, &read(pvalue_file)?)?;

    let pvalues: Vec<f64> = match propagate {
        None => {
            let mut dense = vec![0.0; graph.n()];
            for i in 0..graph.n() as u32 {
                match by_node.get(&i) {
                    Some(&v) => dense[i as usize] = v,
                    None => {
                        return Err(domain(anyhow!(
                            "no p-value for node {:?}",
                            graph.id(i)
                        )))
                    }
                }
            }
            dense
        }
        Some(spec) => {
            let combiner = combiner_for(spec)
                .ok_or_else(|| usage(anyhow!("unknown combiner {spec:?}")))?;
            let b = match basis {
                BasisArg::Children => Basis::Children,
                BasisArg::SubLeaves => Basis::SubLeaves,
            };
            dagger::combine::propagate_intersection(&graph, &by_node, combiner.as_ref(), b)
                .map_err(domain)?
        }
    };

    let outcome: TestOutcome = match method {
        MethodArg::Bh => dagger::method::lookup("bh")
            .unwrap()
            .run(&graph, &counts, &pvalues, alpha)
            .map_err(domain)?,
        MethodArg::By => dagger::method::lookup("by")
            .unwrap()
            .run(&graph, &counts, &pvalues, alpha)
            .map_err(domain)?,
        MethodArg::Dagger => {
            let variant = match (variant, reshape) {
                (VariantArg::Plain, _) => Variant::Plain,
                (VariantArg::Reshaped, ReshapeArg::DaggerBy) => {
                    Variant::Reshaped(ReshapeSpec::Suggested)
                }
                (VariantArg::Reshaped, ReshapeArg::Identity) => Variant::Reshaped(
                    ReshapeSpec::PerDepth(vec![ReshapeFn::Identity; graph.max_depth()]),
                ),
                (VariantArg::Reshaped, ReshapeArg::By) => {
                    // one harmonic reshape per depth, over the nodes of
                    // depths 1..=d (the range the threshold argument spans)
                    let fns = (1..=graph.max_depth())
                        .map(|d| ReshapeFn::by_global(graph.nodes_up_to(d) as u32))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(domain)?;
                    Variant::Reshaped(ReshapeSpec::PerDepth(fns))
                }
            };
            let cfg = DaggerConfig {
                alpha,
                variant,
                depth_limit: None,
            };
            let res = dagger::run_batch(&graph, &counts, &pvalues, &cfg).map_err(domain)?;
            TestOutcome {
                levels: res.audit.iter().map(|r| r.level).collect(),
                rejected: res.rejected,
                tested: res.tested,
            }
        }
    };

    print!("{}", io::test_tsv(&graph, &outcome, &pvalues));
    if let Some(path) = dot {
        std::fs::write(path, io::dot_export(&graph, &outcome))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(usage)?;
    }
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFileConfig {
    layers: Vec<usize>,
    k: Vec<usize>,
    pi0: Vec<f64>,
    #[serde(default = "default_model")]
    model: String,
    mu_deepest: Option<f64>,
    mu_step: Option<f64>,
    mu_by_depth: Option<BTreeMap<String, f64>>,
    mu_leaf: Option<f64>,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_reps")]
    reps: usize,
    #[serde(default)]
    seed: u64,
    methods: Vec<String>,
    #[serde(default)]
    redraw_graph: bool,
}

fn default_model() -> String {
    "gaussian".to_owned()
}
fn default_alpha() -> f64 {
    0.2
}
fn default_reps() -> usize {
    100
}

fn parse_mu_by_depth_flag(s: &str) -> Result<BTreeMap<usize, f64>, Failure> {
    let mut map = BTreeMap::new();
    for part in s.split(',') {
        let (d, v) = part
            .split_once('=')
            .ok_or_else(|| usage(anyhow!("bad --mu-by-depth entry {part:?}, want depth=mu")))?;
        let d: usize = d.trim().parse().map_err(|_| {
            usage(anyhow!("bad depth {d:?} in --mu-by-depth"))
        })?;
        let v: f64 = v.trim().parse().map_err(|_| {
            usage(anyhow!("bad signal {v:?} in --mu-by-depth"))
        })?;
        map.insert(d, v);
    }
    Ok(map)
}

struct SimPlan {
    base: SimConfig,
    pi0_grid: Vec<f64>,
    methods: Vec<String>,
}

fn gaussian_model(
    layers: &[usize],
    explicit: Option<BTreeMap<usize, f64>>,
    mu_deepest: f64,
    mu_step: f64,
) -> PValueModel {
    PValueModel::Gaussian {
        mu_by_depth: explicit.unwrap_or_else(|| mu_schedule(layers.len(), mu_deepest, mu_step)),
    }
}

fn plan_from_file(path: &Path) -> Result<SimPlan, Failure> {
    let text = read(path)?;
    let file: SimFileConfig = toml::from_str(&text)
        .with_context(|| format!("cannot parse {}", path.display()))
        .map_err(usage)?;
    let model = match file.model.as_str() {
        "gaussian" => {
            let explicit = match file.mu_by_depth {
                None => None,
                Some(m) => {
                    let mut map = BTreeMap::new();
                    for (k, v) in m {
                        let d: usize = k
                            .parse()
                            .map_err(|_| usage(anyhow!("bad depth key {k:?} in mu_by_depth")))?;
                        map.insert(d, v);
                    }
                    Some(map)
                }
            };
            gaussian_model(
                &file.layers,
                explicit,
                file.mu_deepest.unwrap_or(1.0),
                file.mu_step.unwrap_or(0.3),
            )
        }
        "simes" => PValueModel::SimesPropagated {
            mu_leaf: file.mu_leaf.unwrap_or(2.0),
        },
        other => return Err(usage(anyhow!("unknown model {other:?}"))),
    };
    Ok(SimPlan {
        base: SimConfig {
            layers: file.layers,
            parents_per_node: file.k,
            pi0_leaf: 0.0,
            pvalue_model: model,
            alpha: file.alpha,
            reps: file.reps,
            seed: file.seed,
            method: file
                .methods
                .first()
                .cloned()
                .ok_or_else(|| usage(anyhow!("methods list is empty")))?,
            redraw_graph: file.redraw_graph,
            keep_per_rep: false,
        },
        pi0_grid: file.pi0,
        methods: file.methods,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    config: Option<&Path>,
    layers: Vec<usize>,
    k: Vec<usize>,
    pi0: Vec<f64>,
    model: ModelArg,
    mu_deepest: f64,
    mu_step: f64,
    mu_by_depth: Option<&str>,
    mu_leaf: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
    methods: Vec<String>,
    redraw_graph: bool,
) -> Result<(), Failure> {
    let plan = match config {
        Some(path) => plan_from_file(path)?,
        None => {
            if layers.is_empty() {
                return Err(usage(anyhow!("--layers is required without --config")));
            }
            if pi0.is_empty() {
                return Err(usage(anyhow!("--pi0 is required without --config")));
            }
            let model = match model {
                ModelArg::Gaussian => {
                    let explicit = match mu_by_depth {
                        Some(s) => Some(parse_mu_by_depth_flag(s)?),
                        None => None,
                    };
                    gaussian_model(&layers, explicit, mu_deepest, mu_step)
                }
                ModelArg::Simes => PValueModel::SimesPropagated { mu_leaf },
            };
            SimPlan {
                base: SimConfig {
                    layers,
                    parents_per_node: k,
                    pi0_leaf: 0.0,
                    pvalue_model: model,
                    alpha,
                    reps,
                    seed,
                    method: methods
                        .first()
                        .cloned()
                        .ok_or_else(|| usage(anyhow!("--methods must not be empty")))?,
                    redraw_graph,
                    keep_per_rep: false,
                },
                pi0_grid: pi0,
                methods,
            }
        }
    };
    let rows = dagger::run_grid(&plan.base, &plan.pi0_grid, &plan.methods).map_err(|e| {
        use dagger::sim::SimError::*;
        match &e {
            InvalidConfig(_) | InsufficientParents { .. } | UnknownMethod(_)
            | MissingDepthSignal(_) => usage(e),
            _ => domain(e),
        }
    })?;
    print!("{}", io::sim_csv(&rows));
    Ok(())
}

fn configure_threads() {
    if let Ok(v) = std::env::var("DAGGER_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate {
            dag_file,
            strip_redundant,
        } => cmd_validate(&dag_file, strip_redundant),
        Command::Counts {
            dag_file,
            strip_redundant,
        } => cmd_counts(&dag_file, strip_redundant),
        Command::Test {
            dag_file,
            pvalue_file,
            alpha,
            method,
            variant,
            reshape,
            propagate,
            basis,
            dot,
            strip_redundant,
        } => cmd_test(
            &dag_file,
            &pvalue_file,
            alpha,
            method,
            variant,
            reshape,
            propagate.as_deref(),
            basis,
            dot.as_deref(),
            strip_redundant,
        ),
        Command::Simulate {
            config,
            layers,
            k,
            pi0,
            model,
            mu_deepest,
            mu_step,
            mu_by_depth,
            mu_leaf,
            alpha,
            reps,
            seed,
            methods,
            redraw_graph,
        } => cmd_simulate(
            config.as_deref(),
            layers,
            k,
            pi0,
            model,
            mu_deepest,
            mu_step,
            mu_by_depth.as_deref(),
            mu_leaf,
            alpha,
            reps,
            seed,
            methods,
            redraw_graph,
        ),
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.message());
            ExitCode::from(f.code())
        }
    }
}
