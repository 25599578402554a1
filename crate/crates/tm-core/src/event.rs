//! The dynamic-level vocabulary: regions, events over regions, and the
//! generic-event decomposition of a static model.
//!
//! A region is where an event occurs — a weakly connected sub-graph of the
//! static model. An event is a region plus an actualization status and a
//! logical time; outside a running simulation every event subsists.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Assignment, Expr};
use crate::model::{ActionId, ActionKind, StaticModel};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct EventId(pub String);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Flow,
    Trigger,
}

/// Reference to an arc of the owning static model by kind and endpoints.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcRef {
    pub kind: ArcKind,
    pub from: ActionId,
    pub to: ActionId,
}

impl fmt::Display for ArcRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.kind {
            ArcKind::Flow => "->",
            ArcKind::Trigger => "~>",
        };
        write!(f, "{} {} {}", self.from, arrow, self.to)
    }
}

/// Where an event occurs: a non-empty, weakly connected sub-graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub actions: BTreeSet<ActionId>,
    pub arcs: BTreeSet<ArcRef>,
}

impl Region {
    /// All entity labels created inside this region.
    pub fn created_entities<'a>(&'a self, model: &'a StaticModel) -> Vec<&'a str> {
        let mut out: Vec<&str> = self
            .actions
            .iter()
            .filter_map(|id| model.action(id))
            .filter(|a| a.kind == ActionKind::Create)
            .filter_map(|a| a.entity.as_deref())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn is_weakly_connected(&self) -> bool {
        if self.actions.len() <= 1 {
            return true;
        }
        let mut adjacency: BTreeMap<&ActionId, Vec<&ActionId>> = BTreeMap::new();
        for arc in &self.arcs {
            adjacency.entry(&arc.from).or_default().push(&arc.to);
            adjacency.entry(&arc.to).or_default().push(&arc.from);
        }
        let start = self.actions.iter().next().expect("non-empty");
        let mut seen: BTreeSet<&ActionId> = BTreeSet::new();
        seen.insert(start);
        let mut frontier = VecDeque::from([start]);
        while let Some(id) = frontier.pop_front() {
            for next in adjacency.get(id).into_iter().flatten() {
                if self.actions.contains(*next) && seen.insert(next) {
                    frontier.push_back(next);
                }
            }
        }
        seen.len() == self.actions.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventStatus {
    Subsisting,
    Actualized,
}

/// An event: a region that may be injected with time. Stored events always
/// subsist; actualization lives in the engine's state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub id: EventId,
    pub label: String,
    /// External events fire only when a scenario injects them; they never
    /// enter the initial set and are never auto-enabled.
    pub external: bool,
    pub region: Region,
    pub guard: Option<Expr>,
    pub effects: Vec<Assignment>,
    pub status: EventStatus,
    pub time: Option<u64>,
    pub note: Option<String>,
}

/// Lupascian negation: a reference that a behavior edge uses to revert the
/// target event from the dynamic level back to the static level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NegativeEventRef {
    pub target: EventId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("event `{0}` has an empty region")]
    EmptyRegion(String),
    #[error("event `{0}` has a disconnected region")]
    DisconnectedRegion(String),
    #[error("event `{event}` references unknown id `{id}`")]
    UnknownId { event: String, id: String },
    #[error("event `{event}`: variable `{var}` is not declared")]
    UndeclaredVariable { event: String, var: String },
}

/// Define an event over a validated model. The region invariants are
/// enforced here: ids resolve, arcs exist with their endpoints included,
/// the induced sub-graph is weakly connected, and guard/effect variables
/// are declared.
#[allow(clippy::too_many_arguments)]
pub fn define_event(
    model: &StaticModel,
    id: impl Into<String>,
    label: Option<String>,
    external: bool,
    actions: impl IntoIterator<Item = ActionId>,
    arcs: impl IntoIterator<Item = ArcRef>,
    guard: Option<Expr>,
    effects: Vec<Assignment>,
) -> Result<Event, Vec<EventError>> {
    let id = id.into();
    let mut errors = Vec::new();

    let mut region = Region {
        actions: actions.into_iter().collect(),
        arcs: arcs.into_iter().collect(),
    };
    // Arc endpoints are part of the region by definition.
    for arc in &region.arcs {
        region.actions.insert(arc.from.clone());
        region.actions.insert(arc.to.clone());
    }

    if region.actions.is_empty() {
        errors.push(EventError::EmptyRegion(id.clone()));
    }
    for action in &region.actions {
        if model.action(action).is_none() {
            errors.push(EventError::UnknownId {
                event: id.clone(),
                id: action.0.clone(),
            });
        }
    }
    for arc in &region.arcs {
        let exists = match arc.kind {
            ArcKind::Flow => model.has_flow_arc(&arc.from, &arc.to),
            ArcKind::Trigger => model.has_trigger_arc(&arc.from, &arc.to),
        };
        if !exists {
            errors.push(EventError::UnknownId {
                event: id.clone(),
                id: arc.to_string(),
            });
        }
    }
    if errors.is_empty() && !region.is_weakly_connected() {
        errors.push(EventError::DisconnectedRegion(id.clone()));
    }

    // Guard typing proper is checked by build_behavior; here only that the
    // variables exist.
    let declared = model.variable_types();
    let mut vars = BTreeSet::new();
    if let Some(guard) = &guard {
        guard.free_vars(&mut vars);
    }
    for effect in &effects {
        vars.insert(effect.var.clone());
        effect.expr.free_vars(&mut vars);
    }
    for var in vars {
        if !declared.contains_key(&var) {
            errors.push(EventError::UndeclaredVariable {
                event: id.clone(),
                var,
            });
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let label = label.unwrap_or_else(|| id.clone());
    Ok(Event {
        id: EventId(id),
        label,
        external,
        region,
        guard,
        effects,
        status: EventStatus::Subsisting,
        time: None,
        note: None,
    })
}

/// Decompose a model into its generic events: one event per action, each
/// region a single action with no arcs. Ordering is a topological sort of
/// the flow arcs with ties (and cycles) broken by declaration order.
pub fn decompose_generic(model: &StaticModel) -> Vec<Event> {
    let order = topo_order(model);
    order
        .iter()
        .enumerate()
        .map(|(i, &action_idx)| {
            let action = &model.actions()[action_idx];
            Event {
                id: EventId(format!("E{}", i + 1)),
                label: action.id.0.clone(),
                external: false,
                region: Region {
                    actions: BTreeSet::from([action.id.clone()]),
                    arcs: BTreeSet::new(),
                },
                guard: None,
                effects: Vec::new(),
                status: EventStatus::Subsisting,
                time: None,
                note: None,
            }
        })
        .collect()
}

fn topo_order(model: &StaticModel) -> Vec<usize> {
    let n = model.actions().len();
    let index: BTreeMap<&ActionId, usize> = model
        .actions()
        .iter()
        .enumerate()
        .map(|(i, a)| (&a.id, i))
        .collect();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for arc in model.flow_arcs() {
        let from = index[&arc.from];
        let to = index[&arc.to];
        succ[from].push(to);
        indegree[to] += 1;
    }

    let mut emitted = vec![false; n];
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = match ready.iter().next().copied() {
            Some(i) => {
                ready.remove(&i);
                i
            }
            // Flow cycle: force the earliest-declared remaining action.
            None => (0..n).find(|&i| !emitted[i]).expect("actions remain"),
        };
        if emitted[next] {
            continue;
        }
        emitted[next] = true;
        order.push(next);
        for &to in &succ[next] {
            if !emitted[to] {
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    ready.insert(to);
                }
            }
        }
    }
    order
}
