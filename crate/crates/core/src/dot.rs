//! Graphviz export.

use std::fmt::Write;

use crate::model::{CidModel, EdgeKind, NodeKind};

pub const PALETTE: [&str; 8] = ["#a6cee3", "#b2df8a", "#fb9a99", "#fdbf6f", "#cab2d6", "#ffff99", "#8dd3c7", "#d9d9d9"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DotOptions {
    /// Fill decision and utility nodes by owner, in agent declaration order.
    pub color_agents: bool,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT text with nodes in declaration order; identical models give identical bytes.
pub fn export_dot(model: &CidModel, options: DotOptions) -> String {
    let mut out = String::from("digraph cid {\n");
    for node in model.nodes() {
        let shape = match node.kind() {
            NodeKind::Chance => "ellipse",
            NodeKind::Decision(_) => "box",
            NodeKind::Utility(_) => "diamond",
        };
        let mut attrs = vec![format!("shape={shape}")];
        if let (true, Some(owner)) = (options.color_agents, node.kind().owner()) {
            let k = model.agents().iter().position(|a| a == owner).unwrap_or(0);
            attrs.push("style=filled".into());
            attrs.push(format!("fillcolor={}", quote(PALETTE[k % PALETTE.len()])));
        }
        if node.is_world() {
            attrs.push("peripheries=2".into());
        }
        writeln!(out, "  {} [{}];", quote(node.id().as_str()), attrs.join(", ")).unwrap();
    }
    for e in model.edges() {
        let style = if e.kind == EdgeKind::Information { " [style=dashed]" } else { "" };
        writeln!(out, "  {} -> {}{style};", quote(e.from.as_str()), quote(e.to.as_str())).unwrap();
    }
    out.push_str("}\n");
    out
}
