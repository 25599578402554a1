//! Occurrence-only conceptual modeling toolkit.
//!
//! The static level describes what *subsists*: thimacs (thing/machines)
//! built from the generic actions create, process, release, transfer, and
//! receive, joined by flow and trigger arcs. The dynamic level describes
//! what *exists*: events — regions of the static model injected with time —
//! wired into behavior graphs with guarded sequence edges and negative
//! (revert) edges. A deterministic engine executes behavior graphs; a
//! timeline store answers temporal-relation queries over clinical events;
//! a small DSL (`.tm` files) declares all of it.

pub mod behavior;
pub mod catalog;
pub mod dsl;
pub mod engine;
pub mod event;
pub mod expr;
pub mod model;
pub mod timeline;

pub use behavior::{build_behavior, enabled_events, BehaviorEdge, BehaviorGraph, EdgeKind};
pub use dsl::{analyze, parse, serialize, Compiled, Document};
pub use engine::{init_state, run, SimState, StepResult, Trace};
pub use event::{decompose_generic, define_event, Event, EventId, Region};
pub use expr::{Env, Expr, Value, ValueType};
pub use model::{build_model, simplify, validate, ActionId, ActionKind, StaticModel, ThimacId};
pub use timeline::{parse_query, Query, TemporalRelation, TimeAnchor, Timeline};
