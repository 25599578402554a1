//! Shared test support: an independent brute-force interpreter for
//! behavior graphs, a 13-case interval-relation classifier, and a
//! grammar-level DOT checker. None of this calls into the engine, the
//! expression evaluator, or the serde-based trace writer it is used to
//! check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use tm_core::behavior::{BehaviorGraph, EdgeKind};
use tm_core::event::EventId;
use tm_core::expr::{BinOp, Expr, UnOp, Value};
use tm_core::model::ActionKind;

/// Naive re-evaluation of a guard/effect expression, written against the
/// AST directly.
pub fn naive_eval(expr: &Expr, env: &BTreeMap<String, Value>) -> Result<Value, String> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Var(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| format!("unbound {name}")),
        Expr::Unary(op, inner) => {
            let v = naive_eval(inner, env)?;
            match (op, v) {
                (UnOp::Neg, Value::Int(n)) => Ok(Value::Int(-n)),
                (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                _ => Err("type".into()),
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let l = naive_eval(lhs, env)?;
            let r = naive_eval(rhs, env)?;
            let ints = |l: &Value, r: &Value| match (l, r) {
                (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
                _ => Err("type".to_string()),
            };
            let bools = |l: &Value, r: &Value| match (l, r) {
                (Value::Bool(a), Value::Bool(b)) => Ok((*a, *b)),
                _ => Err("type".to_string()),
            };
            match op {
                BinOp::Add => ints(&l, &r).map(|(a, b)| Value::Int(a + b)),
                BinOp::Sub => ints(&l, &r).map(|(a, b)| Value::Int(a - b)),
                BinOp::Lt => ints(&l, &r).map(|(a, b)| Value::Bool(a < b)),
                BinOp::Le => ints(&l, &r).map(|(a, b)| Value::Bool(a <= b)),
                BinOp::Gt => ints(&l, &r).map(|(a, b)| Value::Bool(a > b)),
                BinOp::Ge => ints(&l, &r).map(|(a, b)| Value::Bool(a >= b)),
                BinOp::Eq => Ok(Value::Bool(l == r)),
                BinOp::Ne => Ok(Value::Bool(l != r)),
                BinOp::And => bools(&l, &r).map(|(a, b)| Value::Bool(a && b)),
                BinOp::Or => bools(&l, &r).map(|(a, b)| Value::Bool(a || b)),
            }
        }
    }
}

fn json_value(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Text(s) => format!("{s:?}"),
    }
}

fn json_record(step: u64, event: &str, kind: &str, env: &BTreeMap<String, Value>) -> String {
    let fields: Vec<String> = env
        .iter()
        .map(|(k, v)| format!("{k:?}:{}", json_value(v)))
        .collect();
    format!(
        "{{\"step\":{step},\"event\":\"{event}\",\"kind\":\"{kind}\",\"env\":{{{}}}}}",
        fields.join(",")
    )
}

/// Independent state-space walk of a behavior graph: one event per step,
/// declaration order, due stimuli first, branch guards decided at fire
/// time, negative edges applied atomically. Produces the JSON-lines trace
/// by direct string formatting.
pub fn oracle_run(
    bg: &BehaviorGraph,
    bindings: &[(String, Value)],
    stimuli: &[(String, u64)],
    max_steps: u64,
) -> String {
    let mut env: BTreeMap<String, Value> = BTreeMap::new();
    for var in bg.model().variables() {
        if let Some(default) = &var.default {
            env.insert(var.name.clone(), default.clone());
        }
    }
    for (name, value) in bindings {
        env.insert(name.clone(), value.clone());
    }

    let ids: Vec<String> = bg.events().iter().map(|e| e.id.0.clone()).collect();
    let external: BTreeSet<&str> = bg
        .events()
        .iter()
        .filter(|e| e.external)
        .map(|e| e.id.0.as_str())
        .collect();
    let has_incoming: BTreeSet<&str> = bg
        .edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::Sequence)
        .map(|e| e.to.0.as_str())
        .collect();

    let mut actualized: BTreeSet<String> = BTreeSet::new();
    let mut fired_ever: BTreeSet<String> = BTreeSet::new();
    let mut lit: BTreeSet<(String, String)> = BTreeSet::new();
    let mut pending: Vec<(String, u64)> = stimuli.to_vec();
    let mut step: u64 = 0;
    let mut lines: Vec<String> = Vec::new();

    let enabled_of = |actualized: &BTreeSet<String>,
                      fired_ever: &BTreeSet<String>,
                      lit: &BTreeSet<(String, String)>,
                      env: &BTreeMap<String, Value>|
     -> Vec<String> {
        let mut out = Vec::new();
        for id in &ids {
            if external.contains(id.as_str()) || actualized.contains(id) {
                continue;
            }
            let initial = !has_incoming.contains(id.as_str()) && !fired_ever.contains(id);
            let via_edge = lit
                .iter()
                .any(|(from, to)| to == id && actualized.contains(from));
            if !(initial || via_edge) {
                continue;
            }
            let own = bg.event(&EventId(id.clone())).and_then(|e| e.guard.clone());
            if let Some(guard) = own {
                if naive_eval(&guard, env) != Ok(Value::Bool(true)) {
                    continue;
                }
            }
            out.push(id.clone());
        }
        out
    };

    for _ in 0..max_steps {
        // Decide what fires: a due stimulus, the first enabled event, or a
        // clock jump to the next pending stimulus.
        let mut stimulated = false;
        let fired: String;
        if !pending.is_empty() && pending[0].1 <= step {
            fired = pending.remove(0).0;
            stimulated = true;
        } else {
            let enabled = enabled_of(&actualized, &fired_ever, &lit, &env);
            if let Some(first) = enabled.first() {
                fired = first.clone();
            } else if !pending.is_empty() {
                let (event, at) = pending.remove(0);
                step = at;
                fired = event;
                stimulated = true;
            } else {
                break;
            }
        }
        if stimulated {
            lines.push(json_record(step, &fired, "stimulus", &BTreeMap::new()));
        }

        let event = bg.event(&EventId(fired.clone())).expect("known event");
        let mut touched = BTreeMap::new();
        for effect in &event.effects {
            let value = naive_eval(&effect.expr, &env).expect("effect evaluates");
            env.insert(effect.var.clone(), value.clone());
            touched.insert(effect.var.clone(), value);
        }
        actualized.insert(fired.clone());
        fired_ever.insert(fired.clone());
        lines.push(json_record(step, &fired, "fire", &touched));

        lit.retain(|(from, _)| from != &fired);
        for edge in bg.edges() {
            if edge.kind != EdgeKind::Sequence || edge.from.0 != fired {
                continue;
            }
            let holds = match &edge.guard {
                None => true,
                Some(guard) => naive_eval(guard, &env) == Ok(Value::Bool(true)),
            };
            if holds {
                lit.insert((fired.clone(), edge.to.0.clone()));
            }
        }

        for edge in bg.edges() {
            if edge.kind != EdgeKind::Negative || edge.from.0 != fired {
                continue;
            }
            let target = edge.to.0.clone();
            if actualized.remove(&target) {
                lit.retain(|(from, _)| from != &target);
                lines.push(json_record(step, &target, "revert", &BTreeMap::new()));
            }
        }

        step += 1;
    }

    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// The thirteen interval configurations, classified by their standard
/// endpoint predicates over integers, boundary families first so
/// degenerate (instant) intervals resolve the same way everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allen {
    Equal,
    Starts,
    StartedBy,
    Finishes,
    FinishedBy,
    Before,
    Meets,
    After,
    MetBy,
    During,
    Contains,
    Overlaps,
    OverlappedBy,
}

pub fn allen_classify(s1: i64, e1: i64, s2: i64, e2: i64) -> Allen {
    assert!(s1 <= e1 && s2 <= e2);
    if s1 == s2 && e1 == e2 {
        Allen::Equal
    } else if s1 == s2 && e1 < e2 {
        Allen::Starts
    } else if s1 == s2 {
        Allen::StartedBy
    } else if e1 == e2 && s1 > s2 {
        Allen::Finishes
    } else if e1 == e2 {
        Allen::FinishedBy
    } else if e1 < s2 {
        Allen::Before
    } else if e1 == s2 {
        Allen::Meets
    } else if s1 > e2 {
        Allen::After
    } else if s1 == e2 {
        Allen::MetBy
    } else if s1 > s2 && e1 < e2 {
        Allen::During
    } else if s1 < s2 && e1 > e2 {
        Allen::Contains
    } else if s1 < s2 {
        Allen::Overlaps
    } else {
        Allen::OverlappedBy
    }
}

/// How each of the thirteen cases folds onto the query vocabulary.
pub fn allen_folded_name(relation: Allen) -> &'static str {
    match relation {
        Allen::Equal => "equals",
        Allen::Starts => "starts",
        Allen::Finishes => "finishes",
        Allen::StartedBy | Allen::FinishedBy | Allen::Contains => "contains",
        Allen::Before | Allen::Meets => "before",
        Allen::After | Allen::MetBy => "after",
        Allen::During => "during",
        Allen::Overlaps | Allen::OverlappedBy => "overlaps",
    }
}

/// Grammar-level check of DOT output: one digraph, balanced blocks, and
/// every inner line shaped like a node, edge, attribute, or subgraph
/// statement.
pub fn check_dot_syntax(dot: &str) -> Result<(), String> {
    let mut lines = dot.lines();
    let header = lines.next().ok_or("empty output")?;
    if !(header.starts_with("digraph ") && header.ends_with('{')) {
        return Err(format!("bad header: {header}"));
    }
    let mut depth = 1i64;
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "}" {
            depth -= 1;
            if depth < 0 {
                return Err("unbalanced closing brace".into());
            }
            continue;
        }
        if trimmed.starts_with("subgraph ") {
            if !trimmed.ends_with('{') {
                return Err(format!("bad subgraph: {trimmed}"));
            }
            depth += 1;
            continue;
        }
        if !trimmed.ends_with(';') {
            return Err(format!("statement missing `;`: {trimmed}"));
        }
        let body = &trimmed[..trimmed.len() - 1];
        let is_attr = body
            .split_once('=')
            .is_some_and(|(k, _)| !k.trim().is_empty() && !k.contains(' '));
        let is_defaults = body.starts_with("node [") || body.starts_with("edge [");
        let is_edge = body.contains(" -> ");
        let is_node = body.starts_with('"');
        if !(is_attr || is_defaults || is_edge || is_node) {
            return Err(format!("unrecognized statement: {trimmed}"));
        }
        // Quotes must pair up.
        if body.matches('"').count() % 2 != 0 {
            return Err(format!("unbalanced quotes: {trimmed}"));
        }
    }
    if depth != 0 {
        return Err("unbalanced braces at end".into());
    }
    Ok(())
}

/// Generated graph plus its initial bindings and `(event, at_step)`
/// stimuli.
pub type GeneratedGraph = (
    std::sync::Arc<BehaviorGraph>,
    Vec<(String, Value)>,
    Vec<(String, u64)>,
);

/// Random behavior graph over a scratch model: up to 8 events, forward
/// sequence edges with comparison guards, occasional negative edges and
/// externals with stimuli, int variables over 0..=4.
pub fn random_graph(rng: &mut rand_chacha::ChaCha8Rng) -> GeneratedGraph {
    use rand::Rng;
    use tm_core::behavior::{build_behavior, BehaviorEdge};
    use tm_core::event::define_event;
    use tm_core::expr::Assignment;
    use tm_core::model::ActionId;

    let vars = ["V0", "V1", "V2"];
    let model = std::sync::Arc::new(scratch_model(8, &vars));
    let n = rng.gen_range(1..=8usize);

    let mut events = Vec::new();
    let mut externals = Vec::new();
    for i in 0..n {
        let external = i > 0 && rng.gen_bool(0.15);
        let guard = if rng.gen_bool(0.2) {
            Some(Expr::binary(
                BinOp::Le,
                Expr::var(vars[rng.gen_range(0..vars.len())]),
                Expr::int(rng.gen_range(0..5)),
            ))
        } else {
            None
        };
        let effects = if rng.gen_bool(0.5) {
            vec![Assignment {
                var: vars[rng.gen_range(0..vars.len())].into(),
                expr: Expr::binary(
                    if rng.gen_bool(0.5) {
                        BinOp::Add
                    } else {
                        BinOp::Sub
                    },
                    Expr::var(vars[rng.gen_range(0..vars.len())]),
                    Expr::int(rng.gen_range(0..3)),
                ),
            }]
        } else {
            Vec::new()
        };
        let id = format!("E{}", i + 1);
        if external {
            externals.push(id.clone());
        }
        let event = define_event(
            &model,
            id,
            None,
            external,
            [ActionId(format!("T.a{i}"))],
            [],
            guard,
            effects,
        )
        .expect("generated event is valid");
        events.push(event);
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.4) {
                let guard = if rng.gen_bool(0.5) {
                    let op = [
                        BinOp::Lt,
                        BinOp::Le,
                        BinOp::Eq,
                        BinOp::Gt,
                        BinOp::Ge,
                        BinOp::Ne,
                    ][rng.gen_range(0..6)];
                    Some(Expr::binary(
                        op,
                        Expr::var(vars[rng.gen_range(0..vars.len())]),
                        Expr::int(rng.gen_range(0..5)),
                    ))
                } else {
                    None
                };
                edges.push(BehaviorEdge {
                    from: EventId(format!("E{}", i + 1)),
                    to: EventId(format!("E{}", j + 1)),
                    kind: EdgeKind::Sequence,
                    guard,
                });
            }
        }
    }
    for j in 1..n {
        if rng.gen_bool(0.25) {
            let target = rng.gen_range(0..j);
            edges.push(BehaviorEdge {
                from: EventId(format!("E{}", j + 1)),
                to: EventId(format!("E{}", target + 1)),
                kind: EdgeKind::Negative,
                guard: None,
            });
        }
    }

    let (bg, _) = build_behavior(model, events, edges).expect("generated graph builds");

    let bindings: Vec<(String, Value)> = vars
        .iter()
        .map(|v| (v.to_string(), Value::Int(rng.gen_range(0..5))))
        .collect();
    let mut stimuli = Vec::new();
    for id in externals {
        if rng.gen_bool(0.7) {
            stimuli.push((id, rng.gen_range(0..10u64)));
        }
    }
    stimuli.sort_by_key(|(_, at)| *at);
    (std::sync::Arc::new(bg), bindings, stimuli)
}

/// Build a one-thimac model whose actions are `T.a0 .. T.a{n-1}` plus the
/// given int variables; handy for generated behavior graphs.
pub fn scratch_model(actions: usize, vars: &[&str]) -> tm_core::model::StaticModel {
    let mut elements = vec![tm_core::model::ModelElement::Thimac {
        name: "T".into(),
        parent: None,
        note: None,
    }];
    for i in 0..actions {
        elements.push(tm_core::model::ModelElement::Action {
            thimac: "T".into(),
            kind: ActionKind::Create,
            name: Some(format!("a{i}")),
            entity: if i % 2 == 0 {
                Some(format!("item{i}"))
            } else {
                None
            },
            note: None,
        });
    }
    for var in vars {
        elements.push(tm_core::model::ModelElement::Variable {
            name: var.to_string(),
            ty: tm_core::expr::ValueType::Int,
            default: None,
        });
    }
    tm_core::model::build_model(&elements).expect("scratch model is valid")
}
