//! The behavior model: event nodes joined by guarded sequence edges and
//! negative (revert) edges, plus the enabledness computation the engine
//! drives.
//!
//! Sequence cycles are legal only when they pass through an event some
//! negative edge can revert — the partial-fulfillment re-processing loop is
//! the canonical case.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::event::{Event, EventId, NegativeEventRef};
use crate::expr::{Env, EvalError, Expr, ExprTypeError, Value, ValueType};
use crate::model::StaticModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Sequence,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorEdge {
    pub from: EventId,
    pub to: EventId,
    pub kind: EdgeKind,
    /// Guards are legal on sequence edges only; a negative edge fires as a
    /// consequence of its source event's actualization.
    pub guard: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("edge references unknown event `{0}`")]
    UnknownEvent(String),
    #[error("guard on {from} -> {to} is not boolean: {source}")]
    GuardTypeError {
        from: EventId,
        to: EventId,
        source: ExprTypeError,
    },
    #[error("negative edge {from} -> {to} may not carry a guard")]
    NegativeEdgeGuard { from: EventId, to: EventId },
    #[error("sequence cycle through {0:?} has no negative edge to re-open it")]
    IllegalCycle(Vec<EventId>),
}

/// Non-fatal analysis findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BehaviorWarning {
    /// Two or more unguarded sequence edges leave one event toward
    /// non-external targets, so the branch choice is arbitrary.
    UnguardedBranch {
        from: EventId,
        targets: Vec<EventId>,
    },
}

#[derive(Debug, Clone)]
pub struct BehaviorGraph {
    model: Arc<StaticModel>,
    events: Vec<Event>,
    index: BTreeMap<EventId, usize>,
    edges: Vec<BehaviorEdge>,
    initial: Vec<EventId>,
}

impl BehaviorGraph {
    pub fn model(&self) -> &Arc<StaticModel> {
        &self.model
    }

    /// Events in declaration order — the engine's tie-breaking order.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, id: &EventId) -> Option<&Event> {
        self.index.get(id).map(|&i| &self.events[i])
    }

    pub fn edges(&self) -> &[BehaviorEdge] {
        &self.edges
    }

    /// Events with no incoming sequence edge, externals excluded.
    pub fn initial(&self) -> &[EventId] {
        &self.initial
    }

    pub fn sequence_edges_into<'a>(
        &'a self,
        to: &'a EventId,
    ) -> impl Iterator<Item = &'a BehaviorEdge> {
        self.edges
            .iter()
            .filter(move |e| e.kind == EdgeKind::Sequence && &e.to == to)
    }

    pub fn negative_edges_from<'a>(
        &'a self,
        from: &'a EventId,
    ) -> impl Iterator<Item = &'a BehaviorEdge> {
        self.edges
            .iter()
            .filter(move |e| e.kind == EdgeKind::Negative && &e.from == from)
    }

    /// Negation of an event in this graph, usable as a negedge target.
    pub fn negate(&self, target: &EventId) -> Result<NegativeEventRef, BehaviorError> {
        if self.index.contains_key(target) {
            Ok(NegativeEventRef {
                target: target.clone(),
            })
        } else {
            Err(BehaviorError::UnknownEvent(target.0.clone()))
        }
    }
}

/// Validate events and edges into a behavior graph. Errors are collected,
/// not short-circuited; warnings ride along with a successful build.
pub fn build_behavior(
    model: Arc<StaticModel>,
    events: Vec<Event>,
    edges: Vec<BehaviorEdge>,
) -> Result<(BehaviorGraph, Vec<BehaviorWarning>), Vec<BehaviorError>> {
    let mut errors = Vec::new();
    let mut index = BTreeMap::new();
    for (i, event) in events.iter().enumerate() {
        index.insert(event.id.clone(), i);
    }

    let declared = model.variable_types();
    for edge in &edges {
        for endpoint in [&edge.from, &edge.to] {
            if !index.contains_key(endpoint) {
                errors.push(BehaviorError::UnknownEvent(endpoint.0.clone()));
            }
        }
        match edge.kind {
            EdgeKind::Sequence => {
                if let Some(guard) = &edge.guard {
                    match guard.check_type(&declared) {
                        Ok(ValueType::Bool) => {}
                        Ok(found) => errors.push(BehaviorError::GuardTypeError {
                            from: edge.from.clone(),
                            to: edge.to.clone(),
                            source: ExprTypeError::Mismatch {
                                expected: ValueType::Bool,
                                found,
                                context: guard.to_string(),
                            },
                        }),
                        Err(source) => errors.push(BehaviorError::GuardTypeError {
                            from: edge.from.clone(),
                            to: edge.to.clone(),
                            source,
                        }),
                    }
                }
            }
            EdgeKind::Negative => {
                if edge.guard.is_some() {
                    errors.push(BehaviorError::NegativeEdgeGuard {
                        from: edge.from.clone(),
                        to: edge.to.clone(),
                    });
                }
            }
        }
    }

    for event in &events {
        if let Some(guard) = &event.guard {
            match guard.check_type(&declared) {
                Ok(ValueType::Bool) => {}
                Ok(found) => errors.push(BehaviorError::GuardTypeError {
                    from: event.id.clone(),
                    to: event.id.clone(),
                    source: ExprTypeError::Mismatch {
                        expected: ValueType::Bool,
                        found,
                        context: guard.to_string(),
                    },
                }),
                Err(source) => errors.push(BehaviorError::GuardTypeError {
                    from: event.id.clone(),
                    to: event.id.clone(),
                    source,
                }),
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    // Cycles in the sequence graph must pass through a revertable node.
    let reverted: BTreeSet<&EventId> = edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Negative)
        .map(|e| &e.to)
        .collect();
    for component in strongly_connected(&events, &edges, &index) {
        let cyclic = component.len() > 1
            || edges
                .iter()
                .any(|e| e.kind == EdgeKind::Sequence && e.from == e.to && e.from == component[0]);
        if cyclic && !component.iter().any(|id| reverted.contains(id)) {
            errors.push(BehaviorError::IllegalCycle(component));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let mut has_incoming: BTreeSet<&EventId> = BTreeSet::new();
    for edge in &edges {
        if edge.kind == EdgeKind::Sequence {
            has_incoming.insert(&edge.to);
        }
    }
    let initial: Vec<EventId> = events
        .iter()
        .filter(|e| !e.external && !has_incoming.contains(&e.id))
        .map(|e| e.id.clone())
        .collect();

    let mut warnings = Vec::new();
    for event in &events {
        let unguarded: Vec<EventId> = edges
            .iter()
            .filter(|e| {
                e.kind == EdgeKind::Sequence
                    && e.from == event.id
                    && e.guard.is_none()
                    && index
                        .get(&e.to)
                        .map(|&i| !events[i].external)
                        .unwrap_or(false)
            })
            .map(|e| e.to.clone())
            .collect();
        if unguarded.len() > 1 {
            warnings.push(BehaviorWarning::UnguardedBranch {
                from: event.id.clone(),
                targets: unguarded,
            });
        }
    }

    Ok((
        BehaviorGraph {
            model,
            events,
            index,
            edges,
            initial,
        },
        warnings,
    ))
}

/// Iterative Tarjan over the sequence edges; components come back in
/// deterministic order.
fn strongly_connected(
    events: &[Event],
    edges: &[BehaviorEdge],
    index: &BTreeMap<EventId, usize>,
) -> Vec<Vec<EventId>> {
    let n = events.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for edge in edges {
        if edge.kind == EdgeKind::Sequence {
            succ[index[&edge.from]].push(index[&edge.to]);
        }
    }

    let mut order = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_order = 0usize;
    let mut components = Vec::new();

    for root in 0..n {
        if order[root] != usize::MAX {
            continue;
        }
        let mut call_stack: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = call_stack.last_mut() {
            if *child == 0 {
                order[v] = next_order;
                low[v] = next_order;
                next_order += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *child < succ[v].len() {
                let w = succ[v][*child];
                *child += 1;
                if order[w] == usize::MAX {
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
            } else {
                if low[v] == order[v] {
                    let mut component = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        component.push(events[w].id.clone());
                        if w == v {
                            break;
                        }
                    }
                    component.reverse();
                    components.push(component);
                }
                call_stack.pop();
                if let Some(&mut (parent, _)) = call_stack.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    components
}

/// Sequence edges whose guard held when their source fired. The branch
/// decision is made by the firing event: edges light up at fire time
/// (after the source's effects), stay lit while the source remains
/// actualized, and go dark when the source is reverted. Later environment
/// changes never re-open a branch the source did not take.
pub type LitEdges = BTreeSet<(EventId, EventId)>;

/// Ordered list of events that may fire next. An event is enabled iff it
/// is not actualized, it is not external, and either it is initial and
/// has never fired, or a lit sequence edge from an actualized predecessor
/// reaches it - and its own guard (if any) holds under the current
/// environment. Order is event declaration order.
pub fn enabled_events(
    bg: &BehaviorGraph,
    env: &Env,
    actualized: &BTreeMap<EventId, u64>,
    fired_ever: &BTreeSet<EventId>,
    lit: &LitEdges,
) -> Result<Vec<EventId>, EvalError> {
    let initial: BTreeSet<&EventId> = bg.initial().iter().collect();
    let mut out = Vec::new();
    for event in bg.events() {
        if event.external || actualized.contains_key(&event.id) {
            continue;
        }
        let mut enabled = initial.contains(&event.id) && !fired_ever.contains(&event.id);
        if !enabled {
            enabled = bg.sequence_edges_into(&event.id).any(|edge| {
                actualized.contains_key(&edge.from)
                    && lit.contains(&(edge.from.clone(), edge.to.clone()))
            });
        }
        if enabled {
            if let Some(guard) = &event.guard {
                if guard.eval(env)? != Value::Bool(true) {
                    continue;
                }
            }
            out.push(event.id.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{EventStatus, Region};
    use crate::expr::BinOp;
    use crate::model::{build_model, ActionId, ActionKind, ModelElement};

    fn toy_model(vars: &[&str]) -> Arc<StaticModel> {
        let mut elements = vec![ModelElement::Thimac {
            name: "T".into(),
            parent: None,
            note: None,
        }];
        for i in 0..6 {
            elements.push(ModelElement::Action {
                thimac: "T".into(),
                kind: ActionKind::Create,
                name: Some(format!("a{i}")),
                entity: None,
                note: None,
            });
        }
        for var in vars {
            elements.push(ModelElement::Variable {
                name: var.to_string(),
                ty: ValueType::Int,
                default: None,
            });
        }
        Arc::new(build_model(&elements).unwrap())
    }

    fn event(id: &str, action: &str) -> Event {
        Event {
            id: EventId(id.into()),
            label: id.into(),
            external: false,
            region: Region {
                actions: BTreeSet::from([ActionId(format!("T.{action}"))]),
                arcs: BTreeSet::new(),
            },
            guard: None,
            effects: Vec::new(),
            status: EventStatus::Subsisting,
            time: None,
            note: None,
        }
    }

    fn seq(from: &str, to: &str, guard: Option<Expr>) -> BehaviorEdge {
        BehaviorEdge {
            from: EventId(from.into()),
            to: EventId(to.into()),
            kind: EdgeKind::Sequence,
            guard,
        }
    }

    fn neg(from: &str, to: &str) -> BehaviorEdge {
        BehaviorEdge {
            from: EventId(from.into()),
            to: EventId(to.into()),
            kind: EdgeKind::Negative,
            guard: None,
        }
    }

    #[test]
    fn single_event_no_edges_is_initial() {
        let model = toy_model(&[]);
        let (bg, warnings) = build_behavior(model, vec![event("E1", "a0")], Vec::new()).unwrap();
        assert_eq!(bg.initial(), &[EventId("E1".into())]);
        assert!(warnings.is_empty());
    }

    #[test]
    fn unknown_event_endpoint_rejected() {
        let model = toy_model(&[]);
        let err = build_behavior(model, vec![event("E1", "a0")], vec![seq("E1", "E9", None)])
            .unwrap_err();
        assert!(matches!(err[0], BehaviorError::UnknownEvent(ref id) if id == "E9"));
    }

    #[test]
    fn non_boolean_guard_rejected() {
        let model = toy_model(&["X"]);
        let err = build_behavior(
            model,
            vec![event("E1", "a0"), event("E2", "a1")],
            vec![seq(
                "E1",
                "E2",
                Some(Expr::binary(BinOp::Add, Expr::var("X"), Expr::int(1))),
            )],
        )
        .unwrap_err();
        assert!(matches!(err[0], BehaviorError::GuardTypeError { .. }));
    }

    #[test]
    fn cycle_without_revert_rejected_and_with_revert_allowed() {
        let model = toy_model(&[]);
        let events = vec![event("E1", "a0"), event("E2", "a1"), event("E3", "a2")];
        let cyclic = vec![
            seq("E1", "E2", None),
            seq("E2", "E3", None),
            seq("E3", "E2", None),
        ];
        let err = build_behavior(model.clone(), events.clone(), cyclic.clone()).unwrap_err();
        assert!(matches!(err[0], BehaviorError::IllegalCycle(_)));

        let mut with_revert = cyclic;
        with_revert.push(neg("E3", "E2"));
        assert!(build_behavior(model, events, with_revert).is_ok());
    }

    #[test]
    fn unguarded_branch_warns_unless_targets_external() {
        let model = toy_model(&[]);
        let events = vec![event("E1", "a0"), event("E2", "a1"), event("E3", "a2")];
        let edges = vec![seq("E1", "E2", None), seq("E1", "E3", None)];
        let (_, warnings) = build_behavior(model.clone(), events, edges.clone()).unwrap();
        assert_eq!(warnings.len(), 1);

        let mut externals = vec![event("E1", "a0"), event("E2", "a1"), event("E3", "a2")];
        externals[1].external = true;
        externals[2].external = true;
        let (_, warnings) = build_behavior(model, externals, edges).unwrap();
        assert!(warnings.is_empty());
    }

    #[test]
    fn enabledness_follows_lit_edges_and_declaration_order() {
        let model = toy_model(&["X"]);
        let events = vec![event("E1", "a0"), event("E2", "a1"), event("E3", "a2")];
        let edges = vec![
            seq(
                "E1",
                "E2",
                Some(Expr::binary(BinOp::Eq, Expr::var("X"), Expr::int(0))),
            ),
            seq(
                "E1",
                "E3",
                Some(Expr::binary(BinOp::Gt, Expr::var("X"), Expr::int(0))),
            ),
        ];
        let (bg, _) = build_behavior(model, events, edges).unwrap();
        let env: Env = [("X".to_string(), Value::Int(0))].into_iter().collect();

        let fresh = enabled_events(
            &bg,
            &env,
            &BTreeMap::new(),
            &BTreeSet::new(),
            &LitEdges::new(),
        )
        .unwrap();
        assert_eq!(fresh, vec![EventId("E1".into())]);

        // E1 fired with X = 0, lighting only the E2 branch.
        let actualized = BTreeMap::from([(EventId("E1".into()), 0u64)]);
        let fired = BTreeSet::from([EventId("E1".into())]);
        let lit = LitEdges::from([(EventId("E1".into()), EventId("E2".into()))]);
        let next = enabled_events(&bg, &env, &actualized, &fired, &lit).unwrap();
        assert_eq!(next, vec![EventId("E2".into())]);

        // A later environment change does not re-open the other branch.
        let env2: Env = [("X".to_string(), Value::Int(5))].into_iter().collect();
        let next = enabled_events(&bg, &env2, &actualized, &fired, &lit).unwrap();
        assert_eq!(next, vec![EventId("E2".into())]);
    }

    #[test]
    fn lit_edge_needs_actualized_source() {
        let model = toy_model(&[]);
        let events = vec![event("E1", "a0"), event("E2", "a1")];
        let edges = vec![seq("E1", "E2", None)];
        let (bg, _) = build_behavior(model, events, edges).unwrap();
        // Stale lit edge from a reverted source enables nothing.
        let lit = LitEdges::from([(EventId("E1".into()), EventId("E2".into()))]);
        let fired = BTreeSet::from([EventId("E1".into())]);
        let enabled = enabled_events(&bg, &Env::new(), &BTreeMap::new(), &fired, &lit).unwrap();
        assert!(enabled.is_empty());
    }

    #[test]
    fn initial_event_not_re_enabled_after_revert_without_predecessor() {
        let model = toy_model(&[]);
        let events = vec![event("E1", "a0")];
        let (bg, _) = build_behavior(model, events, Vec::new()).unwrap();
        // E1 fired and was reverted: no longer actualized but fired before.
        let fired = BTreeSet::from([EventId("E1".into())]);
        let enabled =
            enabled_events(&bg, &Env::new(), &BTreeMap::new(), &fired, &LitEdges::new()).unwrap();
        assert!(enabled.is_empty());
    }

    #[test]
    fn unbound_own_guard_variable_propagates() {
        let model = toy_model(&["X"]);
        let mut gated = event("E1", "a0");
        gated.guard = Some(Expr::binary(BinOp::Eq, Expr::var("X"), Expr::int(0)));
        let (bg, _) = build_behavior(model, vec![gated], Vec::new()).unwrap();
        let err = enabled_events(
            &bg,
            &Env::new(),
            &BTreeMap::new(),
            &BTreeSet::new(),
            &LitEdges::new(),
        )
        .unwrap_err();
        assert_eq!(err, EvalError::UnboundVariable("X".into()));
    }

    #[test]
    fn negate_requires_known_event() {
        let model = toy_model(&[]);
        let (bg, _) = build_behavior(model, vec![event("E1", "a0")], Vec::new()).unwrap();
        assert!(bg.negate(&EventId("E1".into())).is_ok());
        assert!(matches!(
            bg.negate(&EventId("E9".into())),
            Err(BehaviorError::UnknownEvent(_))
        ));
        assert_eq!(
            bg.negate(&EventId("E1".into())).unwrap(),
            bg.negate(&EventId("E1".into())).unwrap()
        );
    }
}
