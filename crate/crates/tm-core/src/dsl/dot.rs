//! DOT export of the two diagram levels. Thimacs become clusters, actions
//! nodes labeled by kind, flow arcs solid, trigger arcs dashed. At the
//! behavior level negative edges carry a diamond tail to mark reverts.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Document, ThimacDecl};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotLevel {
    Static,
    Behavior,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("unsupported level `{0}`")]
    UnsupportedLevel(String),
}

impl std::str::FromStr for DotLevel {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<DotLevel, ExportError> {
        match s {
            "static" => Ok(DotLevel::Static),
            "behavior" => Ok(DotLevel::Behavior),
            other => Err(ExportError::UnsupportedLevel(other.to_string())),
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn export_dot(doc: &Document, level: DotLevel) -> String {
    match level {
        DotLevel::Static => export_static(doc),
        DotLevel::Behavior => export_behavior(doc),
    }
}

fn export_static(doc: &Document) -> String {
    let doc = doc.canonical();
    let mut out = String::new();
    out.push_str("digraph static_model {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    for root in doc.thimacs.iter().filter(|t| t.node.parent.is_none()) {
        write_cluster(&mut out, &doc, &root.node, 1);
    }
    for flow in &doc.flows {
        let _ = writeln!(
            out,
            "  {} -> {};",
            quote(&flow.node.from),
            quote(&flow.node.to)
        );
    }
    for trigger in &doc.triggers {
        let _ = writeln!(
            out,
            "  {} -> {} [style=dashed];",
            quote(&trigger.node.from),
            quote(&trigger.node.to)
        );
    }
    out.push_str("}\n");
    out
}

fn write_cluster(out: &mut String, doc: &Document, thimac: &ThimacDecl, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = writeln!(out, "{indent}subgraph cluster_{} {{", thimac.name);
    let _ = writeln!(out, "{indent}  label={};", quote(&thimac.name));
    for action in &thimac.actions {
        let mut label = action.node.kind.to_string();
        if let Some(entity) = &action.node.entity {
            label.push(' ');
            label.push_str(entity);
        }
        let id = format!("{}.{}", thimac.name, action.node.local_name());
        let _ = writeln!(out, "{indent}  {} [label={}];", quote(&id), quote(&label));
    }
    for child in doc
        .thimacs
        .iter()
        .filter(|t| t.node.parent.as_deref() == Some(&thimac.name))
    {
        write_cluster(out, doc, &child.node, depth + 1);
    }
    let _ = writeln!(out, "{indent}}}");
}

fn export_behavior(doc: &Document) -> String {
    let doc = doc.canonical();
    let mut out = String::new();
    out.push_str("digraph behavior_model {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=ellipse, fontname=\"Helvetica\"];\n");
    for event in &doc.events {
        let label = match &event.node.label {
            Some(label) => format!("{}: {}", event.node.id, label),
            None => event.node.id.clone(),
        };
        let _ = writeln!(
            out,
            "  {} [label={}];",
            quote(&event.node.id),
            quote(&label)
        );
    }
    for edge in &doc.edges {
        match &edge.node.guard {
            Some(guard) => {
                let _ = writeln!(
                    out,
                    "  {} -> {} [label={}];",
                    quote(&edge.node.from),
                    quote(&edge.node.to),
                    quote(&guard.to_string())
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "  {} -> {};",
                    quote(&edge.node.from),
                    quote(&edge.node.to)
                );
            }
        }
    }
    for negedge in &doc.negedges {
        let _ = writeln!(
            out,
            "  {} -> {} [dir=both, arrowtail=diamond];",
            quote(&negedge.node.from),
            quote(&negedge.node.revert)
        );
    }
    out.push_str("}\n");
    out
}
