//! The `.tm` textual language: parser, canonical serializer, and DOT/JSON
//! exporters.
//!
//! A document is line-friendly but token-based: `#` comments run to end of
//! line, blocks use braces, and every declared element carries a source
//! span. One construct exists per model concept:
//!
//! ```text
//! thimac NAME { create LABEL | process | release | transfer in|out | receive [as NAME] ... }
//! flow [LABEL:] A.x -> B.y -> ...
//! trigger A.x -> B.y
//! var NAME: int|bool|text [= LITERAL]
//! queue NAME
//! event ID [external] ["label"] = region { A.x  A.x -> B.y  A.x ~> B.y } [guard EXPR] [effect V := EXPR]...
//! edge E1 -> E2 [guard EXPR]
//! negedge E14 -> revert E1
//! timeline NAME { event ID CATEGORY "label" at D | from D to D | after D | unknown }
//! scenario NAME { bind VAR = LITERAL  stimulus EVENT at STEP }
//! ```

mod dot;
mod json;
mod lexer;
mod parser;
mod printer;

pub use dot::{export_dot, DotLevel, ExportError};
pub use json::{export_json, TM_VERSION};
pub use parser::{parse, parse_expression};
pub use printer::serialize;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::behavior::{build_behavior, BehaviorEdge, BehaviorGraph, BehaviorWarning, EdgeKind};
use crate::engine::Stimulus;
use crate::event::{define_event, ArcKind, EventId};
use crate::expr::{Assignment, Expr, Value, ValueType};
use crate::model::{build_model, ActionId, ActionKind, ModelElement, StaticModel};
use crate::timeline::{Category, TimeAnchor, Timeline};

/// Position of a declared element or error in its source file. Lines and
/// columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    pub fn start_of(file: &Arc<str>) -> SourceSpan {
        SourceSpan {
            file: file.clone(),
            line: 1,
            column: 1,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// A node plus where it was declared. Equality ignores the span, so
/// structural comparison of documents survives re-serialization.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub node: T,
    pub span: SourceSpan,
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T: Eq> Eq for Spanned<T> {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDecl {
    pub kind: ActionKind,
    /// Explicit `as NAME`; defaults to the kind's default name.
    pub name: Option<String>,
    pub entity: Option<String>,
    pub note: Option<String>,
}

impl ActionDecl {
    pub fn local_name(&self) -> &str {
        self.name
            .as_deref()
            .unwrap_or_else(|| self.kind.default_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThimacDecl {
    pub name: String,
    pub parent: Option<String>,
    pub note: Option<String>,
    pub actions: Vec<Spanned<ActionDecl>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowDecl {
    pub label: Option<String>,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerDecl {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDeclNode {
    pub name: String,
    pub ty: ValueType,
    pub default: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArcRefDecl {
    pub kind: ArcKind,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub id: String,
    pub external: bool,
    pub label: Option<String>,
    pub note: Option<String>,
    pub actions: Vec<String>,
    pub arcs: Vec<ArcRefDecl>,
    pub guard: Option<Expr>,
    pub effects: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeDecl {
    pub from: String,
    pub to: String,
    pub guard: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegEdgeDecl {
    pub from: String,
    pub revert: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineEventDecl {
    pub id: String,
    pub category: Category,
    pub label: String,
    pub anchor: TimeAnchor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineDecl {
    pub name: String,
    pub events: Vec<Spanned<TimelineEventDecl>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioDecl {
    pub name: String,
    pub bindings: Vec<(String, Value)>,
    pub stimuli: Vec<(String, u64)>,
}

/// A parsed `.tm` file. Sections hold declaration order; flow chains are
/// expanded to individual arcs at parse time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub thimacs: Vec<Spanned<ThimacDecl>>,
    pub variables: Vec<Spanned<VarDeclNode>>,
    pub queues: Vec<Spanned<String>>,
    pub flows: Vec<Spanned<FlowDecl>>,
    pub triggers: Vec<Spanned<TriggerDecl>>,
    pub events: Vec<Spanned<EventDecl>>,
    pub edges: Vec<Spanned<EdgeDecl>>,
    pub negedges: Vec<Spanned<NegEdgeDecl>>,
    pub timelines: Vec<Spanned<TimelineDecl>>,
    pub scenarios: Vec<Spanned<ScenarioDecl>>,
}

impl Document {
    pub fn is_empty(&self) -> bool {
        self.thimacs.is_empty()
            && self.variables.is_empty()
            && self.queues.is_empty()
            && self.flows.is_empty()
            && self.triggers.is_empty()
            && self.events.is_empty()
            && self.edges.is_empty()
            && self.negedges.is_empty()
            && self.timelines.is_empty()
            && self.scenarios.is_empty()
    }

    /// Normal form for structural comparison: arcs, edges, and region
    /// members sorted the way [`serialize`] emits them.
    pub fn canonical(&self) -> Document {
        let mut doc = self.clone();
        doc.flows
            .sort_by(|a, b| (&a.node.from, &a.node.to).cmp(&(&b.node.from, &b.node.to)));
        doc.triggers
            .sort_by(|a, b| (&a.node.from, &a.node.to).cmp(&(&b.node.from, &b.node.to)));
        doc.edges
            .sort_by(|a, b| (&a.node.from, &a.node.to).cmp(&(&b.node.from, &b.node.to)));
        doc.negedges
            .sort_by(|a, b| (&a.node.from, &a.node.revert).cmp(&(&b.node.from, &b.node.revert)));
        for event in &mut doc.events {
            event.node.actions.sort();
            event.node.actions.dedup();
            event.node.arcs.sort();
            event.node.arcs.dedup();
        }
        doc
    }
}

/// A parse or semantic diagnostic: rule name, message, and where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.span, self.rule, self.message)
    }
}

/// A scenario ready to feed the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub bindings: Vec<(String, Value)>,
    pub stimuli: Vec<Stimulus>,
}

/// Semantic analysis result: the validated model plus everything declared
/// over it.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub model: Arc<StaticModel>,
    pub behavior: Option<Arc<BehaviorGraph>>,
    pub warnings: Vec<BehaviorWarning>,
    pub timelines: Vec<Timeline>,
    pub scenarios: Vec<Scenario>,
}

impl Compiled {
    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }
}

fn lower_model_elements(doc: &Document) -> (Vec<ModelElement>, BTreeMap<String, SourceSpan>) {
    let mut elements = Vec::new();
    let mut spans = BTreeMap::new();
    for thimac in &doc.thimacs {
        spans.insert(thimac.node.name.clone(), thimac.span.clone());
        elements.push(ModelElement::Thimac {
            name: thimac.node.name.clone(),
            parent: thimac.node.parent.clone(),
            note: thimac.node.note.clone(),
        });
        for action in &thimac.node.actions {
            let id = format!("{}.{}", thimac.node.name, action.node.local_name());
            spans.insert(id, action.span.clone());
            elements.push(ModelElement::Action {
                thimac: thimac.node.name.clone(),
                kind: action.node.kind,
                name: action.node.name.clone(),
                entity: action.node.entity.clone(),
                note: action.node.note.clone(),
            });
        }
    }
    for var in &doc.variables {
        spans.insert(var.node.name.clone(), var.span.clone());
        elements.push(ModelElement::Variable {
            name: var.node.name.clone(),
            ty: var.node.ty,
            default: var.node.default.clone(),
        });
    }
    for queue in &doc.queues {
        spans.insert(queue.node.clone(), queue.span.clone());
        elements.push(ModelElement::Queue {
            name: queue.node.clone(),
        });
    }
    for flow in &doc.flows {
        spans.insert(
            format!("{} -> {}", flow.node.from, flow.node.to),
            flow.span.clone(),
        );
        elements.push(ModelElement::Flow {
            from: flow.node.from.clone(),
            to: flow.node.to.clone(),
            label: flow.node.label.clone(),
        });
    }
    for trigger in &doc.triggers {
        spans.insert(
            format!("{} -> {}", trigger.node.from, trigger.node.to),
            trigger.span.clone(),
        );
        elements.push(ModelElement::Trigger {
            from: trigger.node.from.clone(),
            to: trigger.node.to.clone(),
        });
    }
    (elements, spans)
}

/// Build and validate everything a document declares. All semantic errors
/// are collected, each with the span of its subject.
pub fn analyze(doc: &Document) -> Result<Compiled, Vec<Diagnostic>> {
    let (elements, spans) = lower_model_elements(doc);
    let fallback = doc
        .thimacs
        .first()
        .map(|t| t.span.clone())
        .unwrap_or_else(|| SourceSpan::start_of(&Arc::from("<input>")));
    let span_for = |subject: &str| -> SourceSpan {
        spans
            .get(subject)
            .cloned()
            .unwrap_or_else(|| fallback.clone())
    };

    let mut diagnostics = Vec::new();
    let model = match build_model(&elements) {
        Ok(model) => Arc::new(model),
        Err(violations) => {
            for v in violations {
                diagnostics.push(Diagnostic {
                    span: span_for(&v.subject),
                    rule: v.rule.to_string(),
                    message: v.message,
                });
            }
            return Err(diagnostics);
        }
    };

    let mut events = Vec::new();
    for decl in &doc.events {
        let actions = decl.node.actions.iter().cloned().map(ActionId);
        let arcs = decl.node.arcs.iter().map(|a| crate::event::ArcRef {
            kind: a.kind,
            from: ActionId(a.from.clone()),
            to: ActionId(a.to.clone()),
        });
        match define_event(
            &model,
            decl.node.id.clone(),
            decl.node.label.clone(),
            decl.node.external,
            actions,
            arcs,
            decl.node.guard.clone(),
            decl.node.effects.clone(),
        ) {
            Ok(mut event) => {
                event.note = decl.node.note.clone();
                events.push(event);
            }
            Err(errors) => {
                for e in errors {
                    diagnostics.push(Diagnostic {
                        span: decl.span.clone(),
                        rule: rule_of_event_error(&e),
                        message: e.to_string(),
                    });
                }
            }
        }
    }

    let mut edges = Vec::new();
    for decl in &doc.edges {
        edges.push((
            decl.span.clone(),
            BehaviorEdge {
                from: EventId(decl.node.from.clone()),
                to: EventId(decl.node.to.clone()),
                kind: EdgeKind::Sequence,
                guard: decl.node.guard.clone(),
            },
        ));
    }
    for decl in &doc.negedges {
        edges.push((
            decl.span.clone(),
            BehaviorEdge {
                from: EventId(decl.node.from.clone()),
                to: EventId(decl.node.revert.clone()),
                kind: EdgeKind::Negative,
                guard: None,
            },
        ));
    }

    let mut behavior = None;
    let mut warnings = Vec::new();
    if (!events.is_empty() || !edges.is_empty()) && diagnostics.is_empty() {
        let edge_list: Vec<BehaviorEdge> = edges.iter().map(|(_, e)| e.clone()).collect();
        match build_behavior(model.clone(), events, edge_list) {
            Ok((bg, warns)) => {
                behavior = Some(Arc::new(bg));
                warnings = warns;
            }
            Err(errors) => {
                for e in errors {
                    let span = match &e {
                        crate::behavior::BehaviorError::UnknownEvent(id) => edges
                            .iter()
                            .find(|(_, edge)| edge.from.0 == *id || edge.to.0 == *id)
                            .map(|(span, _)| span.clone())
                            .unwrap_or_else(|| fallback.clone()),
                        _ => fallback.clone(),
                    };
                    diagnostics.push(Diagnostic {
                        span,
                        rule: rule_of_behavior_error(&e),
                        message: e.to_string(),
                    });
                }
            }
        }
    }

    let mut timelines = Vec::new();
    for decl in &doc.timelines {
        let events: Vec<_> = decl
            .node
            .events
            .iter()
            .map(|e| crate::timeline::ClinicalEvent {
                id: e.node.id.clone(),
                label: e.node.label.clone(),
                category: e.node.category,
                anchor: e.node.anchor,
            })
            .collect();
        match Timeline::new(decl.node.name.clone(), events) {
            Ok(timeline) => timelines.push(timeline),
            Err(e) => diagnostics.push(Diagnostic {
                span: decl.span.clone(),
                rule: "DuplicateName".into(),
                message: e.to_string(),
            }),
        }
    }

    let mut scenarios = Vec::new();
    for decl in &doc.scenarios {
        for (var, value) in &decl.node.bindings {
            match model.variable(var) {
                None => diagnostics.push(Diagnostic {
                    span: decl.span.clone(),
                    rule: "UnknownReference".into(),
                    message: format!(
                        "scenario `{}` binds undeclared variable `{var}`",
                        decl.node.name
                    ),
                }),
                Some(declared) if declared.ty != value.value_type() => {
                    diagnostics.push(Diagnostic {
                        span: decl.span.clone(),
                        rule: "GuardTypeError".into(),
                        message: format!(
                            "scenario `{}` binds `{var}` with {}, declared {}",
                            decl.node.name,
                            value.value_type(),
                            declared.ty
                        ),
                    })
                }
                Some(_) => {}
            }
        }
        for (event, _) in &decl.node.stimuli {
            let known = behavior
                .as_ref()
                .map(|bg: &Arc<BehaviorGraph>| bg.event(&EventId(event.clone())).is_some())
                .unwrap_or(false);
            if !known {
                diagnostics.push(Diagnostic {
                    span: decl.span.clone(),
                    rule: "UnknownReference".into(),
                    message: format!(
                        "scenario `{}` injects unknown event `{event}`",
                        decl.node.name
                    ),
                });
            }
        }
        scenarios.push(Scenario {
            name: decl.node.name.clone(),
            bindings: decl.node.bindings.clone(),
            stimuli: decl
                .node
                .stimuli
                .iter()
                .map(|(event, at_step)| Stimulus {
                    event: EventId(event.clone()),
                    at_step: *at_step,
                })
                .collect(),
        });
    }

    if diagnostics.is_empty() {
        Ok(Compiled {
            model,
            behavior,
            warnings,
            timelines,
            scenarios,
        })
    } else {
        Err(diagnostics)
    }
}

fn rule_of_event_error(e: &crate::event::EventError) -> String {
    use crate::event::EventError::*;
    match e {
        EmptyRegion(_) => "EmptyRegion",
        DisconnectedRegion(_) => "DisconnectedRegion",
        UnknownId { .. } => "UnknownReference",
        UndeclaredVariable { .. } => "UndeclaredVariable",
    }
    .to_string()
}

fn rule_of_behavior_error(e: &crate::behavior::BehaviorError) -> String {
    use crate::behavior::BehaviorError::*;
    match e {
        UnknownEvent(_) => "UnknownEvent",
        GuardTypeError { .. } => "GuardTypeError",
        NegativeEdgeGuard { .. } => "NegativeEdgeGuard",
        IllegalCycle(_) => "IllegalCycle",
    }
    .to_string()
}
