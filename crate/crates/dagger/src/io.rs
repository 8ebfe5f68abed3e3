//! File formats and text emitters.
//!
//! Edge-list files are UTF-8, one `parent<TAB>child` pair per line; lines
//! starting with `#` are comments, and `node<TAB>id` lines declare nodes
//! that may have no edges (which makes the first field name `node`
//! unavailable as an edge endpoint in the first column). P-value files are
//! `node-id<TAB>pvalue` with one line per node.
//!
//! All numeric output goes through a locale-independent 12-significant-digit
//! formatter, so identical inputs produce byte-identical files.

use crate::dag::{DagGraph, NodeIdx, ValidationReport};
use crate::dagger::Decision;
use crate::method::TestOutcome;
use crate::sim::GridRow;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected two tab-separated fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("line {line}: empty identifier")]
    EmptyId { line: usize },
    #[error("line {line}: cannot parse {text:?} as a p-value")]
    BadNumber { line: usize, text: String },
    #[error("line {line}: p-value {value} outside [0, 1]")]
    OutOfRange { line: usize, value: f64 },
    #[error("line {line}: duplicate p-value for node {node:?}")]
    DuplicateNode { line: usize, node: String },
    #[error("file holds no edges or node declarations")]
    EmptyFile,
}

/// Parse an edge-list file into (edges, declared nodes).
#[allow(clippy::type_complexity)]
pub fn parse_edge_list(text: &str) -> Result<(Vec<(String, String)>, Vec<String>), ParseError> {
    let mut edges = Vec::new();
    let mut nodes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 2 {
            return Err(ParseError::FieldCount {
                line,
                got: fields.len(),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(ParseError::EmptyId { line });
        }
        if fields[0] == "node" {
            nodes.push(fields[1].to_owned());
        } else {
            edges.push((fields[0].to_owned(), fields[1].to_owned()));
        }
    }
    if edges.is_empty() && nodes.is_empty() {
        return Err(ParseError::EmptyFile);
    }
    Ok((edges, nodes))
}

/// Emit a graph in the edge-list format: edges in sorted order, then
/// `node` declarations for isolated nodes. `parse_edge_list` of the output
/// reconstructs the graph exactly.
pub fn emit_edge_list(graph: &DagGraph) -> String {
    let mut out = String::new();
    for (u, v) in graph.edges() {
        out.push_str(graph.id(u));
        out.push('\t');
        out.push_str(graph.id(v));
        out.push('\n');
    }
    for i in 0..graph.n() as NodeIdx {
        if graph.parents_of(i).is_empty() && graph.children_of(i).is_empty() {
            out.push_str("node\t");
            out.push_str(graph.id(i));
            out.push('\n');
        }
    }
    out
}

/// Parse a p-value file into (node id, p) pairs in file order.
pub fn parse_pvalues(text: &str) -> Result<Vec<(String, f64)>, ParseError> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 2 {
            return Err(ParseError::FieldCount {
                line,
                got: fields.len(),
            });
        }
        if fields[0].is_empty() {
            return Err(ParseError::EmptyId { line });
        }
        let value: f64 = fields[1].parse().map_err(|_| ParseError::BadNumber {
            line,
            text: fields[1].to_owned(),
        })?;
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(ParseError::OutOfRange { line, value });
        }
        if seen.insert(fields[0].to_owned(), line).is_some() {
            return Err(ParseError::DuplicateNode {
                line,
                node: fields[0].to_owned(),
            });
        }
        out.push((fields[0].to_owned(), value));
    }
    Ok(out)
}

/// Format with up to `sig` significant digits, shortest round-trip of the
/// rounded value (so `3.75` stays `3.75`, not `3.750000000000`).
pub fn fmt_sig(v: f64, sig: i32) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(sig - 1 - exp);
    let rounded = (v * scale).round() / scale;
    if rounded.is_finite() && scale.is_finite() {
        format!("{rounded}")
    } else {
        format!("{:.*e}", (sig - 1) as usize, v)
    }
}

/// TSV of per-node counts: `node depth m ell`, one row per node sorted by
/// (depth, id).
pub fn counts_tsv(graph: &DagGraph, counts: &crate::counts::EffectiveCounts) -> String {
    let mut rows: Vec<NodeIdx> = (0..graph.n() as NodeIdx).collect();
    rows.sort_by_key(|&i| (graph.depth_of(i), graph.id(i).to_owned()));
    let mut out = String::from("node\tdepth\tm\tell\n");
    for i in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            graph.id(i),
            graph.depth_of(i),
            fmt_sig(counts.m[i as usize], 12),
            fmt_sig(counts.ell[i as usize], 12),
        ));
    }
    out
}

/// TSV of a testing run: `node depth tested level p rejected`, sorted by
/// (depth, id).
pub fn test_tsv(graph: &DagGraph, outcome: &TestOutcome, pvalues: &[f64]) -> String {
    let mut rows: Vec<NodeIdx> = (0..graph.n() as NodeIdx).collect();
    rows.sort_by_key(|&i| (graph.depth_of(i), graph.id(i).to_owned()));
    let mut out = String::from("node\tdepth\ttested\tlevel\tp\trejected\n");
    for i in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            graph.id(i),
            graph.depth_of(i),
            outcome.tested.contains(&i) as u8,
            fmt_sig(outcome.levels[i as usize], 12),
            fmt_sig(pvalues[i as usize], 12),
            outcome.rejected.contains(&i) as u8,
        ));
    }
    out
}

fn dot_escape(id: &str) -> String {
    id.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz export of a run: rejected nodes filled green, tested but
/// accepted nodes red-bordered, untested nodes gray.
pub fn dot_export(graph: &DagGraph, outcome: &TestOutcome) -> String {
    let mut out = String::from("digraph dag {\n  rankdir=TB;\n  node [shape=ellipse];\n");
    for i in 0..graph.n() as NodeIdx {
        let id = dot_escape(graph.id(i));
        let attrs = if outcome.rejected.contains(&i) {
            "style=filled, fillcolor=green"
        } else if outcome.tested.contains(&i) {
            "color=red"
        } else {
            "color=gray, fontcolor=gray"
        };
        out.push_str(&format!("  \"{id}\" [{attrs}];\n"));
    }
    for (u, v) in graph.edges() {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\";\n",
            dot_escape(graph.id(u)),
            dot_escape(graph.id(v))
        ));
    }
    out.push_str("}\n");
    out
}

/// Render a validation report the way the CLI prints it.
pub fn render_report(report: &ValidationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("valid: {}\n", report.is_valid()));
    out.push_str(&format!("isolated nodes: {}\n", report.isolated_node_count));
    for c in &report.cycles_found {
        out.push_str(&format!("cycle: {}\n", c.join(" -> ")));
    }
    for (u, v) in &report.redundant_edges {
        out.push_str(&format!("redundant edge: {u} -> {v}\n"));
    }
    for (u, v) in &report.duplicate_edges {
        out.push_str(&format!("duplicate edge: {u} -> {v}\n"));
    }
    out
}

/// CSV of simulation grid rows.
pub fn sim_csv(rows: &[GridRow]) -> String {
    let mut out =
        String::from("pi0_leaf,method,alpha,mean_fdp,se_fdp,mean_power,se_power,reps,seed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_sig(r.pi0_leaf, 12),
            r.method,
            fmt_sig(r.alpha, 12),
            fmt_sig(r.result.mean_fdp, 12),
            fmt_sig(r.result.se_fdp, 12),
            fmt_sig(r.result.mean_power, 12),
            fmt_sig(r.result.se_power, 12),
            r.result.reps,
            r.seed,
        ));
    }
    out
}

/// Summarize a run's audit info for humans on stderr.
pub fn audit_decision(d: Decision) -> &'static str {
    match d {
        Decision::Rejected => "rejected",
        Decision::Accepted => "accepted",
        Decision::Untested => "untested",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::effective_counts;
    use crate::dag::{build_graph, EdgePolicy};

    #[test]
    fn edge_list_round_trip() {
        let text = "# comment\nA\tB\nB\tC\n\nnode\tZ\n";
        let (edges, nodes) = parse_edge_list(text).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(nodes, ["Z"]);
        let g = build_graph(&edges, &nodes, EdgePolicy::Strict).unwrap();
        let emitted = emit_edge_list(&g);
        let (e2, n2) = parse_edge_list(&emitted).unwrap();
        let g2 = build_graph(&e2, &n2, EdgePolicy::Strict).unwrap();
        assert_eq!(g.ids(), g2.ids());
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            g2.edges().collect::<Vec<_>>()
        );
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(parse_edge_list("# nothing\n"), Err(ParseError::EmptyFile)));
        assert!(matches!(
            parse_edge_list("A B\n"),
            Err(ParseError::FieldCount { line: 1, got: 1 })
        ));
        assert!(matches!(
            parse_edge_list("A\t\n"),
            Err(ParseError::EmptyId { line: 1 })
        ));
    }

    #[test]
    fn pvalue_parsing() {
        let got = parse_pvalues("A\t0.25\nB\t1\n").unwrap();
        assert_eq!(got, vec![("A".to_owned(), 0.25), ("B".to_owned(), 1.0)]);
        assert!(matches!(
            parse_pvalues("A\tx\n"),
            Err(ParseError::BadNumber { .. })
        ));
        assert!(matches!(
            parse_pvalues("A\t1.5\n"),
            Err(ParseError::OutOfRange { .. })
        ));
        assert!(matches!(
            parse_pvalues("A\t0.5\nA\t0.6\n"),
            Err(ParseError::DuplicateNode { .. })
        ));
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(3.75, 12), "3.75");
        assert_eq!(fmt_sig(0.0, 12), "0");
        assert_eq!(fmt_sig(1.0, 12), "1");
        assert_eq!(fmt_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_sig(0.05 * 1.25 / 2.0 * (4.75 / 3.75), 12), "0.0395833333333");
        // tiny values fall back to scientific notation rather than overflowing
        assert!(fmt_sig(1e-300, 12).contains('e'));
    }

    #[test]
    fn counts_tsv_golden_rows() {
        let g = build_graph(
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
        .unwrap();
        let tsv = counts_tsv(&g, &effective_counts(&g));
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "node\tdepth\tm\tell");
        assert_eq!(lines[1], "H11\t1\t3.75\t1.25");
        assert_eq!(lines[2], "H12\t1\t2.25\t0.75");

        let solo = build_graph::<&str>(&[], &["A"], EdgePolicy::Strict).unwrap();
        let tsv = counts_tsv(&solo, &effective_counts(&solo));
        assert_eq!(tsv.lines().nth(1).unwrap(), "A\t1\t1\t1");

        let line = build_graph(&[("A", "B"), ("B", "C")], &[], EdgePolicy::Strict).unwrap();
        let tsv = counts_tsv(&line, &effective_counts(&line));
        assert_eq!(tsv.lines().nth(1).unwrap(), "A\t1\t3\t1");
    }

    #[test]
    fn dot_export_has_color_classes() {
        let g = build_graph(&[("A", "B"), ("A", "C")], &[], EdgePolicy::Strict).unwrap();
        let outcome = TestOutcome {
            rejected: [g.index_of("A").unwrap()].into(),
            tested: [g.index_of("A").unwrap(), g.index_of("B").unwrap()].into(),
            levels: vec![0.1; 3],
        };
        let dot = dot_export(&g, &outcome);
        assert!(dot.contains("\"A\" [style=filled, fillcolor=green]"));
        assert!(dot.contains("\"B\" [color=red]"));
        assert!(dot.contains("\"C\" [color=gray"));
        assert!(dot.contains("\"A\" -> \"B\";"));
    }
}
