//! Deterministic executor for behavior graphs.
//!
//! One event fires per step, ties broken by declaration order. Firing an
//! event applies its effects, actualizes it, and then atomically applies
//! every negative edge leaving it: each target is de-actualized (back to
//! subsistence) and the entity instances it created are erased. Reverting
//! does not roll variable effects back — the order no longer exists, but
//! the world does not rewind.
//!
//! External happenings enter as scenario stimuli: `(event, at_step)` pairs
//! consumed in declaration order. A due stimulus takes precedence over
//! enabled events; when nothing is enabled and the next stimulus lies in
//! the future, the step clock jumps forward to it. Quiescence means no
//! enabled event and no pending stimulus.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::behavior::{enabled_events, BehaviorGraph, EdgeKind, LitEdges};
use crate::event::{Event, EventId, EventStatus};
use crate::expr::{Env, EvalError, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Fire,
    Revert,
    Stimulus,
}

/// One trace entry. `env` holds only the variables the record's effects
/// touched, valued after the assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub step: u64,
    pub event: EventId,
    pub kind: RecordKind,
    pub env: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// JSON lines, one record per line, newline-terminated. Byte-equal for
    /// equal traces.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            let line = serde_json::to_string(record).expect("trace records serialize");
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// An external injection: fire `event` at (or as soon as possible after)
/// step `at_step`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub event: EventId,
    pub at_step: u64,
}

/// Entity instance bookkeeping: live until erased by a revert of its
/// creating event, re-created only by a later firing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceState {
    pub live: bool,
    pub created_by: EventId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueStimulus {
    Arrive,
    DownstreamFree,
    DownstreamBusy,
}

/// FIFO queue component: orders wait here for a downstream process.
/// Capacity is unbounded by assumption. The empty flag mirrors the item
/// list after every transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueComponent {
    pub name: String,
    items: VecDeque<String>,
    pub empty: bool,
    pub downstream_busy: bool,
    serviced: Vec<String>,
}

impl QueueComponent {
    fn new(name: &str) -> QueueComponent {
        QueueComponent {
            name: name.to_string(),
            items: VecDeque::new(),
            empty: true,
            downstream_busy: false,
            serviced: Vec::new(),
        }
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Dequeue history, in service order.
    pub fn serviced(&self) -> &[String] {
        &self.serviced
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Fired(EventId),
    Reverted {
        fired: EventId,
        reverted: Vec<EventId>,
    },
    Quiescent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("missing binding for variable `{0}` required by a reachable guard")]
    MissingBinding(String),
    #[error("binding for `{name}` has type {found}, declared {declared}")]
    BindingType {
        name: String,
        declared: String,
        found: String,
    },
    #[error("binding targets undeclared variable `{0}`")]
    UndeclaredBinding(String),
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("effect type error: {0}")]
    EffectTypeError(String),
    #[error("unknown queue `{0}`")]
    UnknownQueue(String),
    #[error("stimulus references unknown event `{0}`")]
    UnknownEvent(String),
}

impl From<EvalError> for EngineError {
    fn from(e: EvalError) -> EngineError {
        match e {
            EvalError::UnboundVariable(name) => EngineError::UnboundVariable(name),
            other => EngineError::EffectTypeError(other.to_string()),
        }
    }
}

/// Mutable simulation state, confined to one execution context at a time.
#[derive(Debug, Clone)]
pub struct SimState {
    bg: Arc<BehaviorGraph>,
    env: Env,
    actualized: BTreeMap<EventId, u64>,
    fired_ever: BTreeSet<EventId>,
    /// Sequence edges whose guard held when their source fired; cleared
    /// when the source is reverted.
    lit: LitEdges,
    instances: BTreeMap<String, InstanceState>,
    queues: BTreeMap<String, QueueComponent>,
    step: u64,
    pending: VecDeque<Stimulus>,
    trace: Trace,
}

impl SimState {
    pub fn behavior(&self) -> &Arc<BehaviorGraph> {
        &self.bg
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn actualized(&self) -> &BTreeMap<EventId, u64> {
        &self.actualized
    }

    pub fn instances(&self) -> &BTreeMap<String, InstanceState> {
        &self.instances
    }

    pub fn queue(&self, name: &str) -> Option<&QueueComponent> {
        self.queues.get(name)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn pending_stimuli(&self) -> usize {
        self.pending.len()
    }

    /// Ordered list of events that may fire next.
    pub fn enabled(&self) -> Result<Vec<EventId>, EngineError> {
        Ok(enabled_events(
            &self.bg,
            &self.env,
            &self.actualized,
            &self.fired_ever,
            &self.lit,
        )?)
    }

    /// The event as seen at the dynamic level right now: actualized with
    /// its step index if fired, otherwise subsisting.
    pub fn event_view(&self, id: &EventId) -> Option<Event> {
        let event = self.bg.event(id)?;
        let mut view = event.clone();
        if let Some(&at) = self.actualized.get(id) {
            view.status = EventStatus::Actualized;
            view.time = Some(at);
        }
        Some(view)
    }

    /// Fire the next due stimulus or the first enabled event. Returns
    /// `Quiescent` without state change when neither exists.
    pub fn step(&mut self) -> Result<StepResult, EngineError> {
        let step = self.step;
        if let Some(due) = self.pending.pop_front_if(|head| head.at_step <= step) {
            return self.fire_stimulus(due.event);
        }
        let enabled = self.enabled()?;
        if let Some(next) = enabled.first() {
            let next = next.clone();
            return self.fire(next, RecordKind::Fire);
        }
        if let Some(head) = self.pending.pop_front() {
            // Nothing enabled before the next injection: jump the clock.
            self.step = head.at_step;
            return self.fire_stimulus(head.event);
        }
        Ok(StepResult::Quiescent)
    }

    fn fire_stimulus(&mut self, event: EventId) -> Result<StepResult, EngineError> {
        if self.bg.event(&event).is_none() {
            return Err(EngineError::UnknownEvent(event.0.clone()));
        }
        self.trace.records.push(TraceRecord {
            step: self.step,
            event: event.clone(),
            kind: RecordKind::Stimulus,
            env: BTreeMap::new(),
        });
        self.fire(event, RecordKind::Fire)
    }

    fn fire(&mut self, id: EventId, kind: RecordKind) -> Result<StepResult, EngineError> {
        let event = self
            .bg
            .event(&id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownEvent(id.0.clone()))?;

        let mut touched = BTreeMap::new();
        for effect in &event.effects {
            let value = effect.expr.eval(&self.env)?;
            let declared = self
                .bg
                .model()
                .variable(&effect.var)
                .ok_or_else(|| EngineError::UndeclaredBinding(effect.var.clone()))?;
            if value.value_type() != declared.ty {
                return Err(EngineError::EffectTypeError(format!(
                    "`{}` assigns {} to {} variable",
                    effect,
                    value.value_type(),
                    declared.ty
                )));
            }
            self.env.insert(effect.var.clone(), value.clone());
            touched.insert(effect.var.clone(), value);
        }

        self.actualized.insert(id.clone(), self.step);
        self.fired_ever.insert(id.clone());
        for label in event.region.created_entities(self.bg.model()) {
            self.instances.insert(
                label.to_string(),
                InstanceState {
                    live: true,
                    created_by: id.clone(),
                },
            );
        }
        self.trace.records.push(TraceRecord {
            step: self.step,
            event: id.clone(),
            kind,
            env: touched,
        });

        // The firing event decides its branches now, against the
        // post-effect environment; unlit edges stay dark even if their
        // guard would hold later.
        self.lit.retain(|(from, _)| from != &id);
        let out_edges: Vec<(EventId, Option<crate::expr::Expr>)> = self
            .bg
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Sequence && e.from == id)
            .map(|e| (e.to.clone(), e.guard.clone()))
            .collect();
        for (to, guard) in out_edges {
            let holds = match guard {
                None => true,
                Some(guard) => guard.eval(&self.env)? == Value::Bool(true),
            };
            if holds {
                self.lit.insert((id.clone(), to));
            }
        }

        // Lupascian negation, atomically in the same step: each target
        // drops back to subsistence, its created instances are erased, and
        // its lit branches go dark.
        let mut reverted = Vec::new();
        let targets: Vec<EventId> = self
            .bg
            .negative_edges_from(&id)
            .map(|e| e.to.clone())
            .collect();
        for target in targets {
            if self.actualized.remove(&target).is_none() {
                continue;
            }
            self.lit.retain(|(from, _)| from != &target);
            for instance in self.instances.values_mut() {
                if instance.created_by == target {
                    instance.live = false;
                }
            }
            self.trace.records.push(TraceRecord {
                step: self.step,
                event: target.clone(),
                kind: RecordKind::Revert,
                env: BTreeMap::new(),
            });
            reverted.push(target);
        }

        self.step += 1;
        if reverted.is_empty() {
            Ok(StepResult::Fired(id))
        } else {
            Ok(StepResult::Reverted {
                fired: id,
                reverted,
            })
        }
    }

    /// Drive one queue component. `Arrive` enqueues and clears the empty
    /// flag; `DownstreamFree` dequeues the head FIFO when the queue is not
    /// empty (setting the flag if that empties it); `DownstreamBusy` only
    /// records the flag. Queue transitions live outside the behavior trace.
    pub fn queue_transition(
        &mut self,
        queue: &str,
        stimulus: QueueStimulus,
        instance: Option<&str>,
    ) -> Result<StepResult, EngineError> {
        let q = self
            .queues
            .get_mut(queue)
            .ok_or_else(|| EngineError::UnknownQueue(queue.to_string()))?;
        let result = match stimulus {
            QueueStimulus::Arrive => {
                let id = instance.unwrap_or("item").to_string();
                q.items.push_back(id);
                q.empty = false;
                StepResult::Fired(EventId(format!("{queue}.enqueue")))
            }
            QueueStimulus::DownstreamFree => {
                q.downstream_busy = false;
                match q.items.pop_front() {
                    Some(head) => {
                        q.serviced.push(head);
                        q.empty = q.items.is_empty();
                        StepResult::Fired(EventId(format!("{queue}.dequeue")))
                    }
                    // Guarded no-op: never dequeue from empty.
                    None => StepResult::Quiescent,
                }
            }
            QueueStimulus::DownstreamBusy => {
                q.downstream_busy = true;
                StepResult::Quiescent
            }
        };
        assert_eq!(q.empty, q.items.is_empty(), "queue empty flag invariant");
        Ok(result)
    }
}

/// Initialize state: variable defaults overlaid with scenario bindings,
/// nothing actualized, all queues empty, the step clock at zero.
///
/// Every variable referenced by a guard reachable from the initial events
/// must end up bound, or `MissingBinding` is returned.
pub fn init_state(
    bg: Arc<BehaviorGraph>,
    bindings: &[(String, Value)],
    stimuli: Vec<Stimulus>,
) -> Result<SimState, EngineError> {
    let mut env = Env::new();
    for var in bg.model().variables() {
        if let Some(default) = &var.default {
            env.insert(var.name.clone(), default.clone());
        }
    }
    for (name, value) in bindings {
        let declared = bg
            .model()
            .variable(name)
            .ok_or_else(|| EngineError::UndeclaredBinding(name.clone()))?;
        if value.value_type() != declared.ty {
            return Err(EngineError::BindingType {
                name: name.clone(),
                declared: declared.ty.to_string(),
                found: value.value_type().to_string(),
            });
        }
        env.insert(name.clone(), value.clone());
    }

    for var in reachable_guard_vars(&bg) {
        if !env.contains_key(&var) {
            return Err(EngineError::MissingBinding(var));
        }
    }
    for stimulus in &stimuli {
        if bg.event(&stimulus.event).is_none() {
            return Err(EngineError::UnknownEvent(stimulus.event.0.clone()));
        }
    }

    let queues = bg
        .model()
        .queues()
        .iter()
        .map(|name| (name.clone(), QueueComponent::new(name)))
        .collect();

    Ok(SimState {
        bg,
        env,
        actualized: BTreeMap::new(),
        fired_ever: BTreeSet::new(),
        lit: LitEdges::new(),
        instances: BTreeMap::new(),
        queues,
        step: 0,
        pending: stimuli.into(),
        trace: Trace::default(),
    })
}

/// Variables read by guards on edges (or events) reachable from the
/// initial set along sequence edges.
fn reachable_guard_vars(bg: &BehaviorGraph) -> BTreeSet<String> {
    let mut reachable: BTreeSet<&EventId> = bg.initial().iter().collect();
    let mut frontier: VecDeque<&EventId> = reachable.iter().copied().collect();
    let mut vars = BTreeSet::new();
    for id in &reachable {
        if let Some(event) = bg.event(id) {
            if let Some(guard) = &event.guard {
                guard.free_vars(&mut vars);
            }
        }
    }
    while let Some(id) = frontier.pop_front() {
        for edge in bg.edges() {
            if edge.kind != EdgeKind::Sequence || &edge.from != id {
                continue;
            }
            if let Some(guard) = &edge.guard {
                guard.free_vars(&mut vars);
            }
            if reachable.insert(&edge.to) {
                if let Some(event) = bg.event(&edge.to) {
                    if let Some(guard) = &event.guard {
                        guard.free_vars(&mut vars);
                    }
                }
                frontier.push_back(&edge.to);
            }
        }
    }
    vars
}

/// Step until quiescence or `max_steps` firings, returning the full trace.
/// Equal inputs yield byte-equal serialized traces.
pub fn run(state: &mut SimState, max_steps: u64) -> Result<Trace, EngineError> {
    let mut fired = 0u64;
    while fired < max_steps {
        match state.step()? {
            StepResult::Quiescent => break,
            _ => fired += 1,
        }
    }
    Ok(state.trace.clone())
}
