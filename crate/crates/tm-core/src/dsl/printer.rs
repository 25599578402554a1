//! Canonical serializer. Thimacs, events, timelines, and scenarios keep
//! declaration order; flow/trigger arcs and behavior edges are sorted by
//! (from, to); indentation is two spaces; output is newline-terminated and
//! byte-stable across calls.

use std::fmt::Write as _;

use super::{Document, ThimacDecl};
use crate::event::ArcKind;
use crate::model::ActionKind;

pub fn serialize(doc: &Document) -> String {
    let doc = doc.canonical();
    let mut out = String::new();
    let mut sections: Vec<String> = Vec::new();

    let roots: Vec<&ThimacDecl> = doc
        .thimacs
        .iter()
        .filter(|t| t.node.parent.is_none())
        .map(|t| &t.node)
        .collect();
    for root in roots {
        let mut section = String::new();
        write_thimac(&mut section, &doc, root, 0);
        sections.push(section);
    }

    if !doc.variables.is_empty() {
        let mut section = String::new();
        for var in &doc.variables {
            let _ = write!(section, "var {}: {}", var.node.name, var.node.ty);
            if let Some(default) = &var.node.default {
                let _ = write!(section, " = {default}");
            }
            section.push('\n');
        }
        sections.push(section);
    }

    if !doc.queues.is_empty() {
        let mut section = String::new();
        for queue in &doc.queues {
            let _ = writeln!(section, "queue {}", queue.node);
        }
        sections.push(section);
    }

    if !doc.flows.is_empty() {
        let mut section = String::new();
        for flow in &doc.flows {
            match &flow.node.label {
                Some(label) => {
                    let _ = writeln!(
                        section,
                        "flow {label}: {} -> {}",
                        flow.node.from, flow.node.to
                    );
                }
                None => {
                    let _ = writeln!(section, "flow {} -> {}", flow.node.from, flow.node.to);
                }
            }
        }
        sections.push(section);
    }

    if !doc.triggers.is_empty() {
        let mut section = String::new();
        for trigger in &doc.triggers {
            let _ = writeln!(
                section,
                "trigger {} -> {}",
                trigger.node.from, trigger.node.to
            );
        }
        sections.push(section);
    }

    if !doc.events.is_empty() {
        let mut section = String::new();
        for event in &doc.events {
            let node = &event.node;
            let _ = write!(section, "event {}", node.id);
            if node.external {
                section.push_str(" external");
            }
            if let Some(label) = &node.label {
                let _ = write!(section, " {label:?}");
            }
            if let Some(note) = &node.note {
                let _ = write!(section, " note {note:?}");
            }
            section.push_str(" = region {\n");
            for action in &node.actions {
                let _ = writeln!(section, "  {action}");
            }
            for arc in &node.arcs {
                let arrow = match arc.kind {
                    ArcKind::Flow => "->",
                    ArcKind::Trigger => "~>",
                };
                let _ = writeln!(section, "  {} {} {}", arc.from, arrow, arc.to);
            }
            section.push_str("}\n");
            if let Some(guard) = &node.guard {
                let _ = writeln!(section, "  guard {guard}");
            }
            for effect in &node.effects {
                let _ = writeln!(section, "  effect {effect}");
            }
        }
        sections.push(section);
    }

    if !doc.edges.is_empty() || !doc.negedges.is_empty() {
        let mut section = String::new();
        for edge in &doc.edges {
            let _ = write!(section, "edge {} -> {}", edge.node.from, edge.node.to);
            if let Some(guard) = &edge.node.guard {
                let _ = write!(section, " guard {guard}");
            }
            section.push('\n');
        }
        for negedge in &doc.negedges {
            let _ = writeln!(
                section,
                "negedge {} -> revert {}",
                negedge.node.from, negedge.node.revert
            );
        }
        sections.push(section);
    }

    if !doc.timelines.is_empty() {
        let mut section = String::new();
        for timeline in &doc.timelines {
            let _ = writeln!(section, "timeline {} {{", timeline.node.name);
            for event in &timeline.node.events {
                let node = &event.node;
                let _ = writeln!(
                    section,
                    "  event {} {} {:?} {}",
                    node.id, node.category, node.label, node.anchor
                );
            }
            section.push_str("}\n");
        }
        sections.push(section);
    }

    if !doc.scenarios.is_empty() {
        let mut section = String::new();
        for scenario in &doc.scenarios {
            let _ = writeln!(section, "scenario {} {{", scenario.node.name);
            for (var, value) in &scenario.node.bindings {
                let _ = writeln!(section, "  bind {var} = {value}");
            }
            for (event, step) in &scenario.node.stimuli {
                let _ = writeln!(section, "  stimulus {event} at {step}");
            }
            section.push_str("}\n");
        }
        sections.push(section);
    }

    for (i, section) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(section);
    }
    out
}

fn write_thimac(out: &mut String, doc: &Document, thimac: &ThimacDecl, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = write!(out, "{indent}thimac {}", thimac.name);
    if let Some(note) = &thimac.note {
        let _ = write!(out, " note {note:?}");
    }
    out.push_str(" {\n");
    let inner = "  ".repeat(depth + 1);
    for action in &thimac.actions {
        let node = &action.node;
        let keyword = match node.kind {
            ActionKind::Create => "create",
            ActionKind::Process => "process",
            ActionKind::Release => "release",
            ActionKind::TransferIn => "transfer in",
            ActionKind::TransferOut => "transfer out",
            ActionKind::Receive => "receive",
        };
        let _ = write!(out, "{inner}{keyword}");
        if let Some(entity) = &node.entity {
            let _ = write!(out, " {entity}");
        }
        if let Some(name) = &node.name {
            let _ = write!(out, " as {name}");
        }
        if let Some(note) = &node.note {
            let _ = write!(out, " note {note:?}");
        }
        out.push('\n');
    }
    for child in doc
        .thimacs
        .iter()
        .filter(|t| t.node.parent.as_deref() == Some(&thimac.name))
    {
        write_thimac(out, doc, &child.node, depth + 1);
    }
    let _ = writeln!(out, "{indent}}}");
}
