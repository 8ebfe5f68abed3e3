//! Effective node and leaf counts by water-filling.
//!
//! Pour one unit of mass into every leaf and let it flow upward, each node
//! splitting its accumulated mass evenly among its parents:
//!
//! ```text
//! leaf a:      m_a = ell_a = 1
//! non-leaf a:  ell_a = sum_{b in Child(a)} ell_b / |Par(b)|
//!              m_a   = 1 + sum_{b in Child(a)} m_b / |Par(b)|
//! ```
//!
//! Mass is conserved at the roots: the root ell's sum to the leaf count L
//! and the root m's sum to the node count N. The same recursion applied to
//! rejection indicators yields per-subgraph effective discovery counts,
//! used as a diagnostic.

use crate::dag::{DagGraph, NodeIdx};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeSet;
use thiserror::Error;

/// Absolute tolerance for the conservation identities in floating point.
pub const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CountsError {
    #[error("rational denominators exceeded {max_bits} bits; use the float mode")]
    RationalOverflow { max_bits: u64 },
}

/// Per-node effective counts, 64-bit floats, children accumulated in sorted
/// id order so results are reproducible.
#[derive(Debug, Clone)]
pub struct EffectiveCounts {
    /// Effective number of nodes in Sub(a), indexed by node.
    pub m: Vec<f64>,
    /// Effective number of leaves in Sub(a), indexed by node.
    pub ell: Vec<f64>,
    pub total_nodes: usize,
    pub total_leaves: usize,
}

/// Exact counts over big rationals, for tests and small graphs. Denominators
/// are products of parent-set sizes and can grow combinatorially, so the
/// computation bails out past a bit-size cap instead of grinding on.
#[derive(Debug, Clone)]
pub struct ExactCounts {
    pub m: Vec<BigRational>,
    pub ell: Vec<BigRational>,
    pub total_nodes: usize,
    pub total_leaves: usize,
}

/// Result of checking the root-sum identities.
#[derive(Debug, Clone, Copy)]
pub struct ConservationCheck {
    pub ok: bool,
    pub max_abs_error: f64,
}

/// Effective discovery counts per subgraph (rejections and false
/// rejections), same splitting rule as the node counts.
#[derive(Debug, Clone)]
pub struct EffectiveDiscoveries {
    pub v_sub: Vec<f64>,
    pub r_sub: Vec<f64>,
}

/// One bottom-up pass over the reversed topological order; O(V + E).
pub fn effective_counts(graph: &DagGraph) -> EffectiveCounts {
    let n = graph.n();
    let mut m = vec![0.0f64; n];
    let mut ell = vec![0.0f64; n];
    for &a in graph.topo_order().iter().rev() {
        let au = a as usize;
        if graph.is_leaf(a) {
            m[au] = 1.0;
            ell[au] = 1.0;
            continue;
        }
        let mut m_acc = 0.0;
        let mut ell_acc = 0.0;
        for &b in graph.children_of(a) {
            let share = graph.parents_of(b).len() as f64;
            m_acc += m[b as usize] / share;
            ell_acc += ell[b as usize] / share;
        }
        m[au] = 1.0 + m_acc;
        ell[au] = ell_acc;
    }
    EffectiveCounts {
        m,
        ell,
        total_nodes: n,
        total_leaves: graph.leaf_count(),
    }
}

const RATIONAL_BIT_CAP: u64 = 4096;

/// Same recursion over exact rationals. Intended for graphs up to a few
/// thousand nodes; errors out if denominators blow past the bit cap.
pub fn effective_counts_exact(graph: &DagGraph) -> Result<ExactCounts, CountsError> {
    let n = graph.n();
    let zero = BigRational::zero();
    let mut m = vec![zero.clone(); n];
    let mut ell = vec![zero; n];
    for &a in graph.topo_order().iter().rev() {
        let au = a as usize;
        if graph.is_leaf(a) {
            m[au] = BigRational::one();
            ell[au] = BigRational::one();
            continue;
        }
        let mut m_acc = BigRational::zero();
        let mut ell_acc = BigRational::zero();
        for &b in graph.children_of(a) {
            let share = BigRational::from_integer(BigInt::from(graph.parents_of(b).len()));
            m_acc += &m[b as usize] / &share;
            ell_acc += &ell[b as usize] / &share;
        }
        m[au] = BigRational::one() + m_acc;
        ell[au] = ell_acc;
        if m[au].denom().bits() > RATIONAL_BIT_CAP {
            return Err(CountsError::RationalOverflow {
                max_bits: RATIONAL_BIT_CAP,
            });
        }
    }
    Ok(ExactCounts {
        m,
        ell,
        total_nodes: n,
        total_leaves: graph.leaf_count(),
    })
}

impl ExactCounts {
    pub fn m_f64(&self, i: NodeIdx) -> f64 {
        self.m[i as usize].to_f64().unwrap()
    }

    pub fn ell_f64(&self, i: NodeIdx) -> f64 {
        self.ell[i as usize].to_f64().unwrap()
    }

    /// Exact conservation: root sums must equal L and N with no tolerance.
    pub fn conservation_exact(&self, graph: &DagGraph) -> bool {
        let sum = |v: &[BigRational]| -> BigRational {
            graph
                .roots()
                .iter()
                .map(|&r| v[r as usize].clone())
                .sum()
        };
        sum(&self.ell) == BigRational::from_integer(BigInt::from(self.total_leaves))
            && sum(&self.m) == BigRational::from_integer(BigInt::from(self.total_nodes))
    }
}

/// Check the root-sum identities |sum_roots ell - L| and |sum_roots m - N|
/// against [`CONSERVATION_TOL`].
pub fn verify_conservation(graph: &DagGraph, counts: &EffectiveCounts) -> ConservationCheck {
    let ell_sum: f64 = graph.roots().iter().map(|&r| counts.ell[r as usize]).sum();
    let m_sum: f64 = graph.roots().iter().map(|&r| counts.m[r as usize]).sum();
    let e1 = (ell_sum - counts.total_leaves as f64).abs();
    let e2 = (m_sum - counts.total_nodes as f64).abs();
    let max_abs_error = e1.max(e2);
    ConservationCheck {
        ok: max_abs_error <= CONSERVATION_TOL,
        max_abs_error,
    }
}

/// Water-fill the rejection indicators: at a leaf the subgraph discovery
/// count is just the indicator, higher up each child's count is split among
/// its parents. Root sums recover |rejected & nulls| and |rejected|.
pub fn effective_discoveries(
    graph: &DagGraph,
    rejected: &BTreeSet<NodeIdx>,
    nulls: &BTreeSet<NodeIdx>,
) -> EffectiveDiscoveries {
    let n = graph.n();
    let mut v_sub = vec![0.0f64; n];
    let mut r_sub = vec![0.0f64; n];
    for &a in graph.topo_order().iter().rev() {
        let au = a as usize;
        let in_r = rejected.contains(&a);
        let mut v = if in_r && nulls.contains(&a) { 1.0 } else { 0.0 };
        let mut r = if in_r { 1.0 } else { 0.0 };
        for &b in graph.children_of(a) {
            let share = graph.parents_of(b).len() as f64;
            v += v_sub[b as usize] / share;
            r += r_sub[b as usize] / share;
        }
        v_sub[au] = v;
        r_sub[au] = r;
    }
    EffectiveDiscoveries { v_sub, r_sub }
}

impl EffectiveDiscoveries {
    /// Root sums (effective V, effective R).
    pub fn root_sums(&self, graph: &DagGraph) -> (f64, f64) {
        let v: f64 = graph.roots().iter().map(|&r| self.v_sub[r as usize]).sum();
        let r: f64 = graph.roots().iter().map(|&r| self.r_sub[r as usize]).sum();
        (v, r)
    }
}

/// Relative disagreement between the float and exact computations, for the
/// agreement check.
pub fn float_exact_divergence(float: &EffectiveCounts, exact: &ExactCounts) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..float.m.len() {
        let me = exact.m[i].to_f64().unwrap();
        let le = exact.ell[i].to_f64().unwrap();
        worst = worst
            .max((float.m[i] - me).abs() / me.abs().max(1.0))
            .max((float.ell[i] - le).abs() / le.abs().max(1.0));
    }
    worst
}

#[allow(dead_code)]
fn rational_abs(x: &BigRational) -> BigRational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{build_graph, EdgePolicy};

    fn toy() -> DagGraph {
        build_graph(
            &[
                ("H11", "H21"),
                ("H12", "H21"),
                ("H11", "H22"),
                ("H21", "H31"),
                ("H21", "H32"),
                ("H22", "H32"),
            ],
            &[],
            EdgePolicy::Strict,
        )
        .unwrap()
    }

    fn ix(g: &DagGraph, s: &str) -> NodeIdx {
        g.index_of(s).unwrap()
    }

    #[test]
    fn toy_counts() {
        let g = toy();
        let c = effective_counts(&g);
        let want_m = [
            ("H11", 3.75),
            ("H12", 2.25),
            ("H21", 2.5),
            ("H22", 1.5),
            ("H31", 1.0),
            ("H32", 1.0),
        ];
        let want_ell = [
            ("H11", 1.25),
            ("H12", 0.75),
            ("H21", 1.5),
            ("H22", 0.5),
            ("H31", 1.0),
            ("H32", 1.0),
        ];
        for (id, v) in want_m {
            assert!((c.m[ix(&g, id) as usize] - v).abs() <= 1e-12, "m[{id}]");
        }
        for (id, v) in want_ell {
            assert!((c.ell[ix(&g, id) as usize] - v).abs() <= 1e-12, "ell[{id}]");
        }
        assert_eq!(c.total_leaves, 2);
        assert_eq!(c.total_nodes, 6);
    }

    #[test]
    fn toy_counts_exact() {
        let g = toy();
        let e = effective_counts_exact(&g).unwrap();
        let rat = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(e.m[ix(&g, "H11") as usize], rat(15, 4));
        assert_eq!(e.m[ix(&g, "H12") as usize], rat(9, 4));
        assert_eq!(e.ell[ix(&g, "H11") as usize], rat(5, 4));
        assert_eq!(e.ell[ix(&g, "H22") as usize], rat(1, 2));
        assert!(e.conservation_exact(&g));
    }

    #[test]
    fn edgeless_counts() {
        let edges: Vec<(&str, &str)> = vec![];
        let g = build_graph(&edges, &["a", "b", "c", "d", "e"], EdgePolicy::Strict).unwrap();
        let c = effective_counts(&g);
        assert!(c.m.iter().all(|&x| x == 1.0));
        assert!(c.ell.iter().all(|&x| x == 1.0));
        assert_eq!(c.total_leaves, 5);
        let check = verify_conservation(&g, &c);
        assert!(check.ok);
        assert_eq!(check.max_abs_error, 0.0);
    }

    #[test]
    fn line_counts() {
        let g = build_graph(&[("A", "B"), ("B", "C")], &[], EdgePolicy::Strict).unwrap();
        let c = effective_counts(&g);
        assert_eq!(c.m[ix(&g, "A") as usize], 3.0);
        assert_eq!(c.m[ix(&g, "B") as usize], 2.0);
        assert_eq!(c.m[ix(&g, "C") as usize], 1.0);
        assert!(c.ell.iter().all(|&x| x == 1.0));
        assert_eq!(c.total_leaves, 1);
    }

    #[test]
    fn toy_conservation_is_exact_in_float() {
        let g = toy();
        let c = effective_counts(&g);
        let check = verify_conservation(&g, &c);
        assert!(check.ok);
        // 1.25 + 0.75 = 2 and 3.75 + 2.25 = 6 are exact dyadics
        assert_eq!(check.max_abs_error, 0.0);
    }

    #[test]
    fn tree_counts_match_bruteforce_subtree_sizes() {
        // On trees (every non-root has exactly one parent) the effective
        // counts are the literal subtree node and leaf counts.
        let edges = vec![
            ("r", "a"),
            ("r", "b"),
            ("a", "c"),
            ("a", "d"),
            ("b", "e"),
            ("d", "f"),
            ("d", "g"),
        ];
        let g = build_graph(&edges, &[], EdgePolicy::Strict).unwrap();
        let c = effective_counts(&g);
        for i in 0..g.n() as NodeIdx {
            let (mut size, mut leaves) = (0usize, 0usize);
            let mut stack = vec![i];
            let mut seen = BTreeSet::new();
            while let Some(x) = stack.pop() {
                if !seen.insert(x) {
                    continue;
                }
                size += 1;
                if g.is_leaf(x) {
                    leaves += 1;
                }
                stack.extend_from_slice(g.children_of(x));
            }
            assert_eq!(c.m[i as usize], size as f64, "m at {}", g.id(i));
            assert_eq!(c.ell[i as usize], leaves as f64, "ell at {}", g.id(i));
        }
    }

    #[test]
    fn discoveries_zero_when_nothing_rejected() {
        let g = toy();
        let d = effective_discoveries(&g, &BTreeSet::new(), &BTreeSet::new());
        assert!(d.v_sub.iter().all(|&x| x == 0.0));
        assert!(d.r_sub.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn discoveries_hand_example() {
        let g = toy();
        let rejected: BTreeSet<NodeIdx> =
            ["H11", "H12", "H21", "H31"].iter().map(|s| ix(&g, s)).collect();
        let nulls: BTreeSet<NodeIdx> = [ix(&g, "H31")].into();
        let d = effective_discoveries(&g, &rejected, &nulls);
        assert!((d.r_sub[ix(&g, "H11") as usize] - 2.0).abs() < 1e-12);
        assert!((d.r_sub[ix(&g, "H12") as usize] - 2.0).abs() < 1e-12);
        let (v, r) = d.root_sums(&g);
        assert!((r - 4.0).abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discoveries_reduce_to_counts_when_everything_rejected() {
        let g = toy();
        let all: BTreeSet<NodeIdx> = (0..g.n() as NodeIdx).collect();
        let d = effective_discoveries(&g, &all, &all);
        let c = effective_counts(&g);
        assert_eq!(d.r_sub, c.m);
        assert_eq!(d.v_sub, c.m);
    }

    #[test]
    fn float_and_exact_agree() {
        let g = toy();
        let f = effective_counts(&g);
        let e = effective_counts_exact(&g).unwrap();
        assert!(float_exact_divergence(&f, &e) < 1e-9);
    }
}
