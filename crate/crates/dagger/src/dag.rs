//! Validated directed acyclic graphs of hypotheses.
//!
//! Nodes are opaque string identifiers; internally everything is indexed by
//! dense `u32` handles assigned in lexicographic id order, so every
//! iteration order (and therefore every output) is reproducible.
//!
//! Depth is one plus the length of the longest path from any root, so all
//! roots sit at depth 1 and a node's depth is always one more than the
//! maximum depth of its parents. Construction enforces transitive
//! reduction: an edge that is implied by a longer path either aborts the
//! build (strict policy) or is stripped and reported.

use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

/// Dense node handle; `DagGraph` maps handles to ids and back.
pub type NodeIdx = u32;

/// What to do with transitively redundant edges at build time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgePolicy {
    /// Redundant edges are an error (default, so modeling mistakes surface).
    #[default]
    Strict,
    /// Redundant edges are removed and reported via [`DagGraph::stripped_edges`].
    StripRedundant,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph is empty: supply at least one edge or an explicit node list")]
    Empty,
    #[error("node ids must be nonempty strings")]
    EmptyNodeId,
    #[error("directed cycle: {}", cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
    #[error("redundant edge {parent} -> {child}, implied by path {}", path.join(" -> "))]
    RedundantEdge {
        parent: String,
        child: String,
        path: Vec<String>,
    },
    #[error("duplicate edge {parent} -> {child}")]
    DuplicateEdge { parent: String, child: String },
    #[error("depth {d} out of range 1..={max}")]
    DepthOutOfRange { d: usize, max: usize },
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
}

/// Immutable DAG with parent/child adjacency, longest-path depths, and the
/// partition of nodes by depth. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct DagGraph {
    ids: Vec<String>,
    index: HashMap<String, NodeIdx>,
    parents: Vec<Vec<NodeIdx>>,
    children: Vec<Vec<NodeIdx>>,
    depth: Vec<u32>,
    depth_partition: Vec<Vec<NodeIdx>>,
    nodes_upto: Vec<usize>,
    roots: Vec<NodeIdx>,
    leaves: Vec<NodeIdx>,
    topo: Vec<NodeIdx>,
    stripped: Vec<(NodeIdx, NodeIdx)>,
}

/// Outcome of [`validate`]: every violation found, not just the first.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub cycles_found: Vec<Vec<String>>,
    pub redundant_edges: Vec<(String, String)>,
    pub duplicate_edges: Vec<(String, String)>,
    pub isolated_node_count: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.cycles_found.is_empty()
            && self.redundant_edges.is_empty()
            && self.duplicate_edges.is_empty()
    }
}

/// Id table plus deduplicated index-space edges, shared by build and validate.
struct RawGraph {
    ids: Vec<String>,
    index: HashMap<String, NodeIdx>,
    edges: Vec<(NodeIdx, NodeIdx)>,
    duplicates: Vec<(NodeIdx, NodeIdx)>,
}

fn collect_ids<S: AsRef<str>>(edges: &[(S, S)], nodes: &[S]) -> Result<RawGraph, GraphError> {
    if edges.is_empty() && nodes.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut ids: Vec<&str> = Vec::with_capacity(edges.len() * 2 + nodes.len());
    for (a, b) in edges {
        ids.push(a.as_ref());
        ids.push(b.as_ref());
    }
    for n in nodes {
        ids.push(n.as_ref());
    }
    if ids.iter().any(|s| s.is_empty()) {
        return Err(GraphError::EmptyNodeId);
    }
    ids.sort_unstable();
    ids.dedup();
    let ids: Vec<String> = ids.into_iter().map(str::to_owned).collect();
    let index: HashMap<String, NodeIdx> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as NodeIdx))
        .collect();

    let mut idx_edges: Vec<(NodeIdx, NodeIdx)> = edges
        .iter()
        .map(|(a, b)| (index[a.as_ref()], index[b.as_ref()]))
        .collect();
    idx_edges.sort_unstable();
    let mut duplicates = Vec::new();
    let mut dedup = Vec::with_capacity(idx_edges.len());
    for e in idx_edges {
        if dedup.last() == Some(&e) {
            if duplicates.last() != Some(&e) {
                duplicates.push(e);
            }
        } else {
            dedup.push(e);
        }
    }
    Ok(RawGraph {
        ids,
        index,
        edges: dedup,
        duplicates,
    })
}

fn adjacency(n: usize, edges: &[(NodeIdx, NodeIdx)]) -> (Vec<Vec<NodeIdx>>, Vec<Vec<NodeIdx>>) {
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for &(u, v) in edges {
        children[u as usize].push(v);
        parents[v as usize].push(u);
    }
    // edges come sorted by (u, v), so children lists are already sorted
    for p in &mut parents {
        p.sort_unstable();
    }
    (parents, children)
}

/// Kahn's algorithm with a min-heap so ties break lexicographically.
/// Returns the order of all nodes reachable from in-degree-zero starts, which
/// is everything iff the graph is acyclic.
fn kahn(n: usize, parents: &[Vec<NodeIdx>], children: &[Vec<NodeIdx>]) -> Vec<NodeIdx> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<Reverse<NodeIdx>> = (0..n as NodeIdx)
        .filter(|&i| indeg[i as usize] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = heap.pop() {
        order.push(u);
        for &v in &children[u as usize] {
            indeg[v as usize] -= 1;
            if indeg[v as usize] == 0 {
                heap.push(Reverse(v));
            }
        }
    }
    order
}

/// One witness cycle per nontrivial strongly connected component among
/// `stuck` (the nodes Kahn could not order), plus self-loops.
fn witness_cycles(
    ids: &[String],
    edges: &[(NodeIdx, NodeIdx)],
    stuck: &[NodeIdx],
) -> Vec<Vec<String>> {
    let mut cycles = Vec::new();
    for &(u, v) in edges {
        if u == v {
            cycles.push(vec![ids[u as usize].clone()]);
        }
    }
    if stuck.is_empty() {
        return cycles;
    }
    let in_stuck: BTreeSet<NodeIdx> = stuck.iter().copied().collect();
    let n = ids.len();
    let mut children = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u != v && in_stuck.contains(&u) && in_stuck.contains(&v) {
            children[u as usize].push(v);
        }
    }
    // Iterative Tarjan over the stuck subgraph.
    let mut index_of = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<NodeIdx> = Vec::new();
    let mut next_index = 0usize;
    let mut sccs: Vec<Vec<NodeIdx>> = Vec::new();
    for &start in stuck {
        if index_of[start as usize] != usize::MAX {
            continue;
        }
        // (node, child cursor)
        let mut call: Vec<(NodeIdx, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut cursor)) = call.last_mut() {
            let vu = v as usize;
            if *cursor == 0 {
                index_of[vu] = next_index;
                low[vu] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[vu] = true;
            }
            if *cursor < children[vu].len() {
                let w = children[vu][*cursor];
                *cursor += 1;
                let wu = w as usize;
                if index_of[wu] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[wu] {
                    low[vu] = low[vu].min(index_of[wu]);
                }
            } else {
                if low[vu] == index_of[vu] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w as usize] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    if comp.len() > 1 {
                        comp.sort_unstable();
                        sccs.push(comp);
                    }
                }
                call.pop();
                if let Some(&mut (p, _)) = call.last_mut() {
                    low[p as usize] = low[p as usize].min(low[vu]);
                }
            }
        }
    }
    sccs.sort();
    for comp in sccs {
        let members: BTreeSet<NodeIdx> = comp.iter().copied().collect();
        // walk child edges inside the component until a node repeats
        let mut path = vec![comp[0]];
        let mut seen: HashMap<NodeIdx, usize> = HashMap::new();
        seen.insert(comp[0], 0);
        loop {
            let cur = *path.last().unwrap();
            let next = *children[cur as usize]
                .iter()
                .find(|w| members.contains(w))
                .expect("nontrivial SCC node must have an out-edge inside the SCC");
            if let Some(&pos) = seen.get(&next) {
                let cycle = path[pos..]
                    .iter()
                    .map(|&i| ids[i as usize].clone())
                    .collect();
                cycles.push(cycle);
                break;
            }
            seen.insert(next, path.len());
            path.push(next);
        }
    }
    cycles
}

fn depths(topo: &[NodeIdx], parents: &[Vec<NodeIdx>]) -> Vec<u32> {
    let mut depth = vec![0u32; parents.len()];
    for &v in topo {
        let vu = v as usize;
        depth[vu] = 1 + parents[vu]
            .iter()
            .map(|&p| depth[p as usize])
            .max()
            .unwrap_or(0);
    }
    depth
}

/// An edge (u, v) is redundant iff some path u -> .. -> v of length >= 2
/// exists; that requires depth(v) >= depth(u) + 2, so only those edges are
/// probed, each with a DFS pruned to depths below depth(v). Returns the edge
/// together with one witness path.
fn redundant_edges(
    edges: &[(NodeIdx, NodeIdx)],
    children: &[Vec<NodeIdx>],
    depth: &[u32],
) -> Vec<((NodeIdx, NodeIdx), Vec<NodeIdx>)> {
    let n = children.len();
    let mut found = Vec::new();
    let mut pred = vec![NodeIdx::MAX; n];
    let mut visited = vec![false; n];
    for &(u, v) in edges {
        if depth[v as usize] < depth[u as usize] + 2 {
            continue;
        }
        visited.iter_mut().for_each(|x| *x = false);
        let mut stack: Vec<NodeIdx> = Vec::new();
        for &c in &children[u as usize] {
            if c != v && depth[c as usize] < depth[v as usize] {
                stack.push(c);
                pred[c as usize] = u;
                visited[c as usize] = true;
            }
        }
        let mut hit = false;
        while let Some(w) = stack.pop() {
            if w == v {
                hit = true;
                break;
            }
            for &c in &children[w as usize] {
                if !visited[c as usize] && (c == v || depth[c as usize] < depth[v as usize]) {
                    visited[c as usize] = true;
                    pred[c as usize] = w;
                    stack.push(c);
                }
            }
        }
        if hit {
            let mut path = vec![v];
            let mut cur = v;
            while cur != u {
                cur = pred[cur as usize];
                path.push(cur);
            }
            path.reverse();
            found.push(((u, v), path));
        }
    }
    found
}

/// Build a validated, transitively reduced DAG from an edge list plus an
/// optional list of extra (possibly isolated) node ids.
///
/// Isolated nodes are both roots and leaves at depth 1. Under
/// [`EdgePolicy::StripRedundant`] the redundant edges are removed and kept
/// available through [`DagGraph::stripped_edges`].
pub fn build_graph<S: AsRef<str>>(
    edges: &[(S, S)],
    nodes: &[S],
    policy: EdgePolicy,
) -> Result<DagGraph, GraphError> {
    let raw = collect_ids(edges, nodes)?;
    if let Some(&(u, v)) = raw.duplicates.first() {
        return Err(GraphError::DuplicateEdge {
            parent: raw.ids[u as usize].clone(),
            child: raw.ids[v as usize].clone(),
        });
    }
    let n = raw.ids.len();
    let (parents, children) = adjacency(n, &raw.edges);
    let topo = kahn(n, &parents, &children);
    if topo.len() != n {
        let ordered: BTreeSet<NodeIdx> = topo.iter().copied().collect();
        let stuck: Vec<NodeIdx> = (0..n as NodeIdx).filter(|i| !ordered.contains(i)).collect();
        let cycle = witness_cycles(&raw.ids, &raw.edges, &stuck)
            .into_iter()
            .next()
            .expect("unordered nodes imply a cycle");
        return Err(GraphError::Cycle { cycle });
    }
    let depth = depths(&topo, &parents);
    let redundant = redundant_edges(&raw.edges, &children, &depth);

    let (edges_final, stripped) = if redundant.is_empty() {
        (raw.edges, Vec::new())
    } else {
        match policy {
            EdgePolicy::Strict => {
                let ((u, v), path) = redundant.into_iter().next().unwrap();
                return Err(GraphError::RedundantEdge {
                    parent: raw.ids[u as usize].clone(),
                    child: raw.ids[v as usize].clone(),
                    path: path.into_iter().map(|i| raw.ids[i as usize].clone()).collect(),
                });
            }
            EdgePolicy::StripRedundant => {
                let drop: BTreeSet<(NodeIdx, NodeIdx)> =
                    redundant.iter().map(|&(e, _)| e).collect();
                let kept: Vec<(NodeIdx, NodeIdx)> = raw
                    .edges
                    .iter()
                    .copied()
                    .filter(|e| !drop.contains(e))
                    .collect();
                (kept, drop.into_iter().collect())
            }
        }
    };

    // Stripping cannot change depths, roots, or leaves (every removed edge is
    // dominated by a longer path), but recompute from the kept edges anyway.
    let (parents, children) = adjacency(n, &edges_final);
    let topo = kahn(n, &parents, &children);
    debug_assert_eq!(topo.len(), n);
    let depth = depths(&topo, &parents);
    let max_depth = depth.iter().copied().max().unwrap_or(1) as usize;
    let mut depth_partition = vec![Vec::new(); max_depth];
    for i in 0..n as NodeIdx {
        depth_partition[depth[i as usize] as usize - 1].push(i);
    }
    let mut nodes_upto = Vec::with_capacity(max_depth);
    let mut acc = 0usize;
    for part in &depth_partition {
        acc += part.len();
        nodes_upto.push(acc);
    }
    let roots: Vec<NodeIdx> = (0..n as NodeIdx)
        .filter(|&i| parents[i as usize].is_empty())
        .collect();
    let leaves: Vec<NodeIdx> = (0..n as NodeIdx)
        .filter(|&i| children[i as usize].is_empty())
        .collect();

    Ok(DagGraph {
        ids: raw.ids,
        index: raw.index,
        parents,
        children,
        depth,
        depth_partition,
        nodes_upto,
        roots,
        leaves,
        topo,
        stripped,
    })
}

/// Enumerate every structural violation in an edge list without aborting on
/// the first. Redundancy is only assessed when the graph is acyclic (depths
/// are undefined otherwise).
pub fn validate<S: AsRef<str>>(edges: &[(S, S)], nodes: &[S]) -> Result<ValidationReport, GraphError> {
    let raw = collect_ids(edges, nodes)?;
    let n = raw.ids.len();
    let mut report = ValidationReport {
        duplicate_edges: raw
            .duplicates
            .iter()
            .map(|&(u, v)| (raw.ids[u as usize].clone(), raw.ids[v as usize].clone()))
            .collect(),
        ..Default::default()
    };

    let mut with_edge = vec![false; n];
    for &(u, v) in &raw.edges {
        with_edge[u as usize] = true;
        with_edge[v as usize] = true;
    }
    report.isolated_node_count = with_edge.iter().filter(|x| !**x).count();

    let (parents, children) = adjacency(n, &raw.edges);
    let topo = kahn(n, &parents, &children);
    if topo.len() != n {
        let ordered: BTreeSet<NodeIdx> = topo.iter().copied().collect();
        let stuck: Vec<NodeIdx> = (0..n as NodeIdx).filter(|i| !ordered.contains(i)).collect();
        report.cycles_found = witness_cycles(&raw.ids, &raw.edges, &stuck);
    } else {
        report.cycles_found = witness_cycles(&raw.ids, &raw.edges, &[]);
        if report.cycles_found.is_empty() {
            let depth = depths(&topo, &parents);
            report.redundant_edges = redundant_edges(&raw.edges, &children, &depth)
                .into_iter()
                .map(|((u, v), _)| (raw.ids[u as usize].clone(), raw.ids[v as usize].clone()))
                .collect();
        }
    }
    Ok(report)
}

impl DagGraph {
    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Number of edges after any stripping.
    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Maximum depth D.
    pub fn max_depth(&self) -> usize {
        self.depth_partition.len()
    }

    pub fn id(&self, i: NodeIdx) -> &str {
        &self.ids[i as usize]
    }

    pub fn index_of(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn depth_of(&self, i: NodeIdx) -> usize {
        self.depth[i as usize] as usize
    }

    pub fn parents_of(&self, i: NodeIdx) -> &[NodeIdx] {
        &self.parents[i as usize]
    }

    pub fn children_of(&self, i: NodeIdx) -> &[NodeIdx] {
        &self.children[i as usize]
    }

    /// Nodes at exactly depth `d` (1-based), sorted by id.
    pub fn nodes_at_depth(&self, d: usize) -> Result<&[NodeIdx], GraphError> {
        if d < 1 || d > self.max_depth() {
            return Err(GraphError::DepthOutOfRange {
                d,
                max: self.max_depth(),
            });
        }
        Ok(&self.depth_partition[d - 1])
    }

    /// Number of nodes with depth <= d.
    pub fn nodes_up_to(&self, d: usize) -> usize {
        self.nodes_upto[d - 1]
    }

    pub fn roots(&self) -> &[NodeIdx] {
        &self.roots
    }

    pub fn leaves(&self) -> &[NodeIdx] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_leaf(&self, i: NodeIdx) -> bool {
        self.children[i as usize].is_empty()
    }

    /// Topological order with lexicographic tie-break; parents always precede
    /// their children, so the reverse is a valid bottom-up order.
    pub fn topo_order(&self) -> &[NodeIdx] {
        &self.topo
    }

    /// Edges in sorted (parent, child) index order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(u, cs)| cs.iter().map(move |&v| (u as NodeIdx, v)))
    }

    /// Edges removed under [`EdgePolicy::StripRedundant`].
    pub fn stripped_edges(&self) -> &[(NodeIdx, NodeIdx)] {
        &self.stripped
    }

    /// The testable frontier at depth `d`: nodes of depth `d` all of whose
    /// parents have been rejected. At depth 1 the parent condition is vacuous
    /// and every root is testable.
    pub fn testable_frontier(
        &self,
        rejected: &BTreeSet<NodeIdx>,
        d: usize,
    ) -> Result<BTreeSet<NodeIdx>, GraphError> {
        let layer = self.nodes_at_depth(d)?;
        Ok(layer
            .iter()
            .copied()
            .filter(|&a| self.parents[a as usize].iter().all(|p| rejected.contains(p)))
            .collect())
    }
}
