//! DOT and GraphML serialization of an [`Stn`].
//!
//! Node attributes: `label`, `fitness`, `start`, `end`, `best`, `shared` and
//! one `visits_<algorithm>` per algorithm. Edge attributes: one
//! `traversals_<algorithm>` per algorithm and `color`.

use std::fmt::Write;

use crate::stn::{Stn, StnNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    GraphMl,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" | "gv" => Ok(GraphFormat::Dot),
            "graphml" => Ok(GraphFormat::GraphMl),
            other => Err(format!("unknown graph format `{other}`")),
        }
    }
}

/// Trajectory colors, assigned by algorithm order.
pub const ALGORITHM_PALETTE: [&str; 8] = [
    "#800080", "#008000", "#1f77b4", "#d62728", "#8c564b", "#17becf", "#bcbd22", "#e377c2",
];

const START_COLOR: &str = "#FFD700";
const BEST_COLOR: &str = "#FF0000";
const END_COLOR: &str = "#505050";
const SHARED_COLOR: &str = "#D3D3D3";

pub fn algorithm_color(index: usize) -> &'static str {
    ALGORITHM_PALETTE[index % ALGORITHM_PALETTE.len()]
}

/// Attribute-safe version of an algorithm name.
pub fn attr_suffix(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Fill color and shape following the usual STN legend.
fn node_style(node: &StnNode, stn: &Stn) -> (&'static str, &'static str) {
    if node.is_end && node.is_best {
        (BEST_COLOR, "circle")
    } else if node.is_end {
        (END_COLOR, "triangle")
    } else if node.is_start {
        (START_COLOR, "square")
    } else if node.is_shared {
        (SHARED_COLOR, "circle")
    } else {
        let owner = node.visits.iter().position(|&v| v > 0).unwrap_or(0);
        debug_assert!(owner < stn.algorithms.len());
        (algorithm_color(owner), "circle")
    }
}

fn edge_color(traversals: &[usize]) -> String {
    traversals
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0)
        .map(|(i, _)| algorithm_color(i))
        .collect::<Vec<_>>()
        .join(":")
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn export_graph(stn: &Stn, format: GraphFormat) -> String {
    match format {
        GraphFormat::Dot => to_dot(stn),
        GraphFormat::GraphMl => to_graphml(stn),
    }
}

fn to_dot(stn: &Stn) -> String {
    let suffixes: Vec<String> = stn.algorithms.iter().map(|a| attr_suffix(a)).collect();
    let mut out = String::from("digraph stn {\n");
    out.push_str("  node [style=filled];\n");
    for node in &stn.nodes {
        let (fill, shape) = node_style(node, stn);
        let _ = write!(
            out,
            "  n{} [label=\"{}\", fitness=\"{}\", start={}, end={}, best={}, shared={}",
            node.id.0,
            dot_escape(&node.label),
            node.best_fitness_at_node,
            node.is_start,
            node.is_end,
            node.is_best,
            node.is_shared
        );
        for (suffix, visits) in suffixes.iter().zip(&node.visits) {
            let _ = write!(out, ", visits_{suffix}={visits}");
        }
        let _ = writeln!(
            out,
            ", width={:.2}, fillcolor=\"{fill}\", shape={shape}];",
            0.2 + 0.05 * node.total_visits() as f64
        );
    }
    for edge in &stn.edges {
        let _ = write!(out, "  n{} -> n{} [", edge.from.0, edge.to.0);
        for (suffix, t) in suffixes.iter().zip(&edge.traversals) {
            let _ = write!(out, "traversals_{suffix}={t}, ");
        }
        let _ = writeln!(out, "color=\"{}\"];", edge_color(&edge.traversals));
    }
    out.push_str("}\n");
    out
}

fn to_graphml(stn: &Stn) -> String {
    let suffixes: Vec<String> = stn.algorithms.iter().map(|a| attr_suffix(a)).collect();
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");

    let mut node_keys: Vec<(String, &str)> = vec![
        ("label".into(), "string"),
        ("fitness".into(), "double"),
        ("start".into(), "boolean"),
        ("end".into(), "boolean"),
        ("best".into(), "boolean"),
        ("shared".into(), "boolean"),
        ("color".into(), "string"),
    ];
    node_keys.extend(suffixes.iter().map(|s| (format!("visits_{s}"), "int")));
    let mut edge_keys: Vec<(String, &str)> = vec![("color".into(), "string")];
    edge_keys.extend(suffixes.iter().map(|s| (format!("traversals_{s}"), "int")));

    for (i, (name, ty)) in node_keys.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <key id=\"n{i}\" for=\"node\" attr.name=\"{}\" attr.type=\"{ty}\"/>",
            xml_escape(name)
        );
    }
    for (i, (name, ty)) in edge_keys.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <key id=\"e{i}\" for=\"edge\" attr.name=\"{}\" attr.type=\"{ty}\"/>",
            xml_escape(name)
        );
    }

    out.push_str("  <graph id=\"stn\" edgedefault=\"directed\">\n");
    for node in &stn.nodes {
        let (fill, _) = node_style(node, stn);
        let mut values = vec![
            xml_escape(&node.label),
            node.best_fitness_at_node.to_string(),
            node.is_start.to_string(),
            node.is_end.to_string(),
            node.is_best.to_string(),
            node.is_shared.to_string(),
            fill.to_string(),
        ];
        values.extend(node.visits.iter().map(|v| v.to_string()));
        let _ = writeln!(out, "    <node id=\"n{}\">", node.id.0);
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "      <data key=\"n{i}\">{v}</data>");
        }
        out.push_str("    </node>\n");
    }
    for (k, edge) in stn.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{k}\" source=\"n{}\" target=\"n{}\">",
            edge.from.0, edge.to.0
        );
        let mut values = vec![edge_color(&edge.traversals)];
        values.extend(edge.traversals.iter().map(|t| t.to_string()));
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "      <data key=\"e{i}\">{v}</data>");
        }
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stn::build_stn;
    use crate::trajectory::{AlgorithmRuns, Dataset, Sense, SolutionPoint, SpaceKind, Step, Trajectory};

    fn stn_of(paths: &[&[(f64, f64)]]) -> Stn {
        let trajectories = paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let steps = p
                    .iter()
                    .map(|&(f, x)| Step {
                        fitness: f,
                        solution: SolutionPoint::Continuous(vec![x]),
                    })
                    .collect();
                Trajectory::new(i as u32 + 1, steps, Sense::Minimize)
            })
            .collect();
        let ds = Dataset::new(
            vec![AlgorithmRuns {
                name: "algo 1".into(),
                trajectories,
            }],
            Sense::Minimize,
            SpaceKind::Continuous,
        )
        .unwrap();
        build_stn(&ds, None).unwrap()
    }

    #[test]
    fn nodes_only_document() {
        let stn = stn_of(&[&[(1.0, 0.0)], &[(2.0, 5.0)]]);
        let dot = export_graph(&stn, GraphFormat::Dot);
        assert!(!dot.contains("->"));
        assert_eq!(dot.matches("shape=").count(), 2);
        let gml = export_graph(&stn, GraphFormat::GraphMl);
        assert!(!gml.contains("<edge "));
        let doc = roxmltree::Document::parse(&gml).unwrap();
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("node")).count(), 2);
    }

    #[test]
    fn one_edge_with_traversals() {
        let stn = stn_of(&[&[(2.0, 0.0), (1.0, 1.0)]]);
        let dot = export_graph(&stn, GraphFormat::Dot);
        assert_eq!(dot.matches("->").count(), 1);
        assert!(dot.contains("traversals_algo_1=1"));
        let gml = export_graph(&stn, GraphFormat::GraphMl);
        let doc = roxmltree::Document::parse(&gml).unwrap();
        let edges: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("edge")).collect();
        assert_eq!(edges.len(), 1);
        assert!(gml.contains("attr.name=\"traversals_algo_1\""));
    }

    #[test]
    fn best_flag_attribute() {
        let stn = stn_of(&[&[(2.0, 0.0), (1.0, 1.0)]]);
        let dot = export_graph(&stn, GraphFormat::Dot);
        assert!(dot.contains("best=true"));
        assert!(dot.contains("visits_algo_1=1"));
        graphviz_rust::parse(&dot).unwrap();
    }

    #[test]
    fn deterministic_colors() {
        assert_eq!(algorithm_color(0), algorithm_color(8));
        let stn = stn_of(&[&[(2.0, 0.0), (1.0, 1.0)]]);
        assert_eq!(export_graph(&stn, GraphFormat::Dot), export_graph(&stn, GraphFormat::Dot));
    }
}
