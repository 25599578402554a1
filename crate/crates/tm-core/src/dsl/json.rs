//! JSON export mirroring the document one-to-one: stable field names,
//! arrays ordered as the canonical serializer orders them, versioned with
//! `"tm_version": 1`.

use serde::Serialize;

use super::Document;
use crate::event::ArcKind;
use crate::expr::Value;
use crate::timeline::TimeAnchor;

pub const TM_VERSION: u32 = 1;

#[derive(Serialize)]
struct DocumentJson {
    tm_version: u32,
    thimacs: Vec<ThimacJson>,
    variables: Vec<VariableJson>,
    queues: Vec<String>,
    flows: Vec<FlowJson>,
    triggers: Vec<TriggerJson>,
    events: Vec<EventJson>,
    edges: Vec<EdgeJson>,
    negedges: Vec<NegEdgeJson>,
    timelines: Vec<TimelineJson>,
    scenarios: Vec<ScenarioJson>,
}

#[derive(Serialize)]
struct ThimacJson {
    name: String,
    parent: Option<String>,
    note: Option<String>,
    actions: Vec<ActionJson>,
}

#[derive(Serialize)]
struct ActionJson {
    name: String,
    kind: &'static str,
    entity: Option<String>,
    note: Option<String>,
}

#[derive(Serialize)]
struct VariableJson {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    default: Option<Value>,
}

#[derive(Serialize)]
struct FlowJson {
    label: Option<String>,
    from: String,
    to: String,
}

#[derive(Serialize)]
struct TriggerJson {
    from: String,
    to: String,
}

#[derive(Serialize)]
struct RegionJson {
    actions: Vec<String>,
    arcs: Vec<ArcJson>,
}

#[derive(Serialize)]
struct ArcJson {
    kind: &'static str,
    from: String,
    to: String,
}

#[derive(Serialize)]
struct EventJson {
    id: String,
    label: Option<String>,
    external: bool,
    note: Option<String>,
    region: RegionJson,
    guard: Option<String>,
    effects: Vec<String>,
}

#[derive(Serialize)]
struct EdgeJson {
    from: String,
    to: String,
    guard: Option<String>,
}

#[derive(Serialize)]
struct NegEdgeJson {
    from: String,
    revert: String,
}

#[derive(Serialize)]
struct TimelineJson {
    name: String,
    events: Vec<TimelineEventJson>,
}

#[derive(Serialize)]
struct TimelineEventJson {
    id: String,
    label: String,
    category: String,
    anchor: AnchorJson,
}

#[derive(Serialize)]
struct AnchorJson {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    end: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    after: Option<String>,
}

#[derive(Serialize)]
struct ScenarioJson {
    name: String,
    bindings: Vec<BindingJson>,
    stimuli: Vec<StimulusJson>,
}

#[derive(Serialize)]
struct BindingJson {
    var: String,
    value: Value,
}

#[derive(Serialize)]
struct StimulusJson {
    event: String,
    at_step: u64,
}

fn anchor_to_json(anchor: &TimeAnchor) -> AnchorJson {
    match anchor {
        TimeAnchor::Instant(t) => AnchorJson {
            kind: "instant",
            at: Some(t.to_string()),
            start: None,
            end: None,
            after: None,
        },
        TimeAnchor::Interval(s, e) => AnchorJson {
            kind: "interval",
            at: None,
            start: Some(s.to_string()),
            end: Some(e.to_string()),
            after: None,
        },
        TimeAnchor::After(t) => AnchorJson {
            kind: "after",
            at: None,
            start: None,
            end: None,
            after: Some(t.to_string()),
        },
        TimeAnchor::Unknown => AnchorJson {
            kind: "unknown",
            at: None,
            start: None,
            end: None,
            after: None,
        },
    }
}

/// Pretty-printed JSON mirror of the document, newline-terminated.
pub fn export_json(doc: &Document) -> String {
    let doc = doc.canonical();
    let json = DocumentJson {
        tm_version: TM_VERSION,
        thimacs: doc
            .thimacs
            .iter()
            .map(|t| ThimacJson {
                name: t.node.name.clone(),
                parent: t.node.parent.clone(),
                note: t.node.note.clone(),
                actions: t
                    .node
                    .actions
                    .iter()
                    .map(|a| ActionJson {
                        name: a.node.local_name().to_string(),
                        kind: a.node.kind.default_name(),
                        entity: a.node.entity.clone(),
                        note: a.node.note.clone(),
                    })
                    .collect(),
            })
            .collect(),
        variables: doc
            .variables
            .iter()
            .map(|v| VariableJson {
                name: v.node.name.clone(),
                ty: v.node.ty.to_string(),
                default: v.node.default.clone(),
            })
            .collect(),
        queues: doc.queues.iter().map(|q| q.node.clone()).collect(),
        flows: doc
            .flows
            .iter()
            .map(|f| FlowJson {
                label: f.node.label.clone(),
                from: f.node.from.clone(),
                to: f.node.to.clone(),
            })
            .collect(),
        triggers: doc
            .triggers
            .iter()
            .map(|t| TriggerJson {
                from: t.node.from.clone(),
                to: t.node.to.clone(),
            })
            .collect(),
        events: doc
            .events
            .iter()
            .map(|e| EventJson {
                id: e.node.id.clone(),
                label: e.node.label.clone(),
                external: e.node.external,
                note: e.node.note.clone(),
                region: RegionJson {
                    actions: e.node.actions.clone(),
                    arcs: e
                        .node
                        .arcs
                        .iter()
                        .map(|a| ArcJson {
                            kind: match a.kind {
                                ArcKind::Flow => "flow",
                                ArcKind::Trigger => "trigger",
                            },
                            from: a.from.clone(),
                            to: a.to.clone(),
                        })
                        .collect(),
                },
                guard: e.node.guard.as_ref().map(|g| g.to_string()),
                effects: e.node.effects.iter().map(|a| a.to_string()).collect(),
            })
            .collect(),
        edges: doc
            .edges
            .iter()
            .map(|e| EdgeJson {
                from: e.node.from.clone(),
                to: e.node.to.clone(),
                guard: e.node.guard.as_ref().map(|g| g.to_string()),
            })
            .collect(),
        negedges: doc
            .negedges
            .iter()
            .map(|e| NegEdgeJson {
                from: e.node.from.clone(),
                revert: e.node.revert.clone(),
            })
            .collect(),
        timelines: doc
            .timelines
            .iter()
            .map(|t| TimelineJson {
                name: t.node.name.clone(),
                events: t
                    .node
                    .events
                    .iter()
                    .map(|e| TimelineEventJson {
                        id: e.node.id.clone(),
                        label: e.node.label.clone(),
                        category: e.node.category.to_string(),
                        anchor: anchor_to_json(&e.node.anchor),
                    })
                    .collect(),
            })
            .collect(),
        scenarios: doc
            .scenarios
            .iter()
            .map(|s| ScenarioJson {
                name: s.node.name.clone(),
                bindings: s
                    .node
                    .bindings
                    .iter()
                    .map(|(var, value)| BindingJson {
                        var: var.clone(),
                        value: value.clone(),
                    })
                    .collect(),
                stimuli: s
                    .node
                    .stimuli
                    .iter()
                    .map(|(event, at_step)| StimulusJson {
                        event: event.clone(),
                        at_step: *at_step,
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&json).expect("document serializes");
    text.push('\n');
    text
}
