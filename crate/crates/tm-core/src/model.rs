//! The static (subsistence) level: thimacs, the six generic action kinds,
//! flow and trigger arcs, structural validation, and chain contraction.
//!
//! A [`StaticModel`] is immutable once built. [`build_model`] assembles and
//! validates in one shot and reports *every* error it finds; [`validate`]
//! re-checks the flow rules on an already assembled model, which lets tests
//! and tooling inspect rule violations as data.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Value, ValueType};

/// The generic actions. The diagram-level `transfer` is split into its
/// two directed faces so the boundary-crossing rule is machine-checkable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Create,
    Process,
    Release,
    TransferIn,
    TransferOut,
    Receive,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Create,
        ActionKind::Process,
        ActionKind::Release,
        ActionKind::TransferIn,
        ActionKind::TransferOut,
        ActionKind::Receive,
    ];

    /// Default action name inside a thimac when no `as NAME` is given.
    pub fn default_name(self) -> &'static str {
        match self {
            ActionKind::Create => "create",
            ActionKind::Process => "process",
            ActionKind::Release => "release",
            ActionKind::TransferIn => "transfer_in",
            ActionKind::TransferOut => "transfer_out",
            ActionKind::Receive => "receive",
        }
    }

    /// Flow adjacency table. A flow arc `from -> to` is well formed iff
    /// `from.kind.may_flow_to(to.kind)`.
    pub fn may_flow_to(self, to: ActionKind) -> bool {
        use ActionKind::*;
        match self {
            Create => matches!(to, Process | Release),
            Process => matches!(to, Create | Process | Release),
            Receive => matches!(to, Process | Release),
            Release => matches!(to, TransferOut),
            TransferOut => matches!(to, TransferIn),
            TransferIn => matches!(to, Receive),
        }
    }

    /// Kinds eliminated by [`simplify`]: the transport machinery between
    /// create/process nodes.
    pub fn is_transport(self) -> bool {
        matches!(
            self,
            ActionKind::Release
                | ActionKind::TransferOut
                | ActionKind::TransferIn
                | ActionKind::Receive
        )
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Create => write!(f, "create"),
            ActionKind::Process => write!(f, "process"),
            ActionKind::Release => write!(f, "release"),
            ActionKind::TransferIn => write!(f, "transfer in"),
            ActionKind::TransferOut => write!(f, "transfer out"),
            ActionKind::Receive => write!(f, "receive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ThimacId(pub String);

impl fmt::Display for ThimacId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Action ids are qualified: `Thimac.name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ActionId(pub String);

impl ActionId {
    pub fn new(thimac: &str, action: &str) -> ActionId {
        ActionId(format!("{thimac}.{action}"))
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thimac {
    pub id: ThimacId,
    pub name: String,
    pub parent: Option<ThimacId>,
    pub actions: BTreeSet<ActionId>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionInfo {
    pub id: ActionId,
    pub kind: ActionKind,
    pub owner: ThimacId,
    /// Entity label bound by a `create` action; the engine tracks instances
    /// of this label at run time.
    pub entity: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowArc {
    pub from: ActionId,
    pub to: ActionId,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerArc {
    pub from: ActionId,
    pub to: ActionId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: ValueType,
    pub default: Option<Value>,
}

/// Input declarations for [`build_model`]. The DSL lowers a parsed document
/// to this form; programmatic callers can construct it directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelElement {
    Thimac {
        name: String,
        parent: Option<String>,
        note: Option<String>,
    },
    Action {
        thimac: String,
        kind: ActionKind,
        /// Name within the thimac; defaults to the kind's default name.
        name: Option<String>,
        entity: Option<String>,
        note: Option<String>,
    },
    Flow {
        from: String,
        to: String,
        label: Option<String>,
    },
    Trigger {
        from: String,
        to: String,
    },
    Variable {
        name: String,
        ty: ValueType,
        default: Option<Value>,
    },
    Queue {
        name: String,
    },
}

/// Validation rule identifiers, printed verbatim in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    DuplicateId,
    UnknownReference,
    IllegalAdjacency,
    IllegalBoundaryCrossing,
    OrphanAction,
    CyclicContainment,
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RuleName::DuplicateId => "DuplicateId",
            RuleName::UnknownReference => "UnknownReference",
            RuleName::IllegalAdjacency => "IllegalAdjacency",
            RuleName::IllegalBoundaryCrossing => "IllegalBoundaryCrossing",
            RuleName::OrphanAction => "OrphanAction",
            RuleName::CyclicContainment => "CyclicContainment",
        };
        write!(f, "{name}")
    }
}

/// One rule violation. `subject` names the offending element (an action id,
/// a thimac name, or `from -> to` for an arc).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{rule} on {subject}: {message}")]
pub struct Violation {
    pub rule: RuleName,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Which arcs may cross a thimac boundary. `Strict` is the base rule
/// (only `transfer out -> transfer in`); `Simplified` additionally admits
/// the arcs produced by chain contraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryProfile {
    Strict,
    Simplified,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimplifyError {
    #[error("model is not subsisting-well-formed: {0} violation(s)")]
    NotValidated(usize),
}

/// The immutable static model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticModel {
    thimacs: Vec<Thimac>,
    actions: Vec<ActionInfo>,
    flow_arcs: Vec<FlowArc>,
    trigger_arcs: Vec<TriggerArc>,
    variables: Vec<VarDecl>,
    queues: Vec<String>,
    thimac_index: BTreeMap<ThimacId, usize>,
    action_index: BTreeMap<ActionId, usize>,
}

impl StaticModel {
    pub fn empty() -> StaticModel {
        StaticModel::default()
    }

    pub fn thimacs(&self) -> &[Thimac] {
        &self.thimacs
    }

    pub fn actions(&self) -> &[ActionInfo] {
        &self.actions
    }

    pub fn flow_arcs(&self) -> &[FlowArc] {
        &self.flow_arcs
    }

    pub fn trigger_arcs(&self) -> &[TriggerArc] {
        &self.trigger_arcs
    }

    pub fn variables(&self) -> &[VarDecl] {
        &self.variables
    }

    pub fn queues(&self) -> &[String] {
        &self.queues
    }

    pub fn thimac(&self, id: &ThimacId) -> Option<&Thimac> {
        self.thimac_index.get(id).map(|&i| &self.thimacs[i])
    }

    pub fn action(&self, id: &ActionId) -> Option<&ActionInfo> {
        self.action_index.get(id).map(|&i| &self.actions[i])
    }

    pub fn variable(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_types(&self) -> BTreeMap<String, ValueType> {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), v.ty))
            .collect()
    }

    pub fn has_queue(&self, name: &str) -> bool {
        self.queues.iter().any(|q| q == name)
    }

    pub fn has_flow_arc(&self, from: &ActionId, to: &ActionId) -> bool {
        self.flow_arcs
            .iter()
            .any(|a| &a.from == from && &a.to == to)
    }

    pub fn has_trigger_arc(&self, from: &ActionId, to: &ActionId) -> bool {
        self.trigger_arcs
            .iter()
            .any(|a| &a.from == from && &a.to == to)
    }

    /// Assemble a model from declarations, checking only structural
    /// integrity (ids resolve, no duplicates, containment is a forest).
    /// Flow-rule violations are left for [`validate`], so ill-formed but
    /// representable models can be inspected.
    pub fn assemble(elements: &[ModelElement]) -> Result<StaticModel, Vec<Violation>> {
        let mut errors = Vec::new();
        let mut model = StaticModel::default();

        for element in elements {
            if let ModelElement::Thimac { name, parent, note } = element {
                let id = ThimacId(name.clone());
                if model.thimac_index.contains_key(&id) {
                    errors.push(Violation {
                        rule: RuleName::DuplicateId,
                        subject: name.clone(),
                        message: format!("thimac `{name}` declared more than once"),
                    });
                    continue;
                }
                model.thimac_index.insert(id.clone(), model.thimacs.len());
                model.thimacs.push(Thimac {
                    id,
                    name: name.clone(),
                    parent: parent.clone().map(ThimacId),
                    actions: BTreeSet::new(),
                    note: note.clone(),
                });
            }
        }

        // Parent links must resolve and form a forest.
        for thimac in &model.thimacs {
            if let Some(parent) = &thimac.parent {
                if !model.thimac_index.contains_key(parent) {
                    errors.push(Violation {
                        rule: RuleName::UnknownReference,
                        subject: thimac.name.clone(),
                        message: format!("parent thimac `{parent}` does not exist"),
                    });
                }
            }
        }
        for thimac in &model.thimacs {
            let mut seen = BTreeSet::new();
            let mut current = Some(&thimac.id);
            while let Some(id) = current {
                if !seen.insert(id.clone()) {
                    if id == &thimac.id {
                        errors.push(Violation {
                            rule: RuleName::CyclicContainment,
                            subject: thimac.name.clone(),
                            message: format!("thimac `{}` contains itself", thimac.name),
                        });
                    }
                    break;
                }
                current = model
                    .thimac_index
                    .get(id)
                    .and_then(|&i| model.thimacs[i].parent.as_ref());
            }
        }

        for element in elements {
            match element {
                ModelElement::Action {
                    thimac,
                    kind,
                    name,
                    entity,
                    note,
                } => {
                    let owner = ThimacId(thimac.clone());
                    if !model.thimac_index.contains_key(&owner) {
                        errors.push(Violation {
                            rule: RuleName::UnknownReference,
                            subject: thimac.clone(),
                            message: format!("action declared in unknown thimac `{thimac}`"),
                        });
                        continue;
                    }
                    let local = name.clone().unwrap_or_else(|| kind.default_name().into());
                    let id = ActionId::new(thimac, &local);
                    if model.action_index.contains_key(&id) {
                        errors.push(Violation {
                            rule: RuleName::DuplicateId,
                            subject: id.0.clone(),
                            message: format!(
                                "action `{id}` declared more than once; use `as NAME` to disambiguate"
                            ),
                        });
                        continue;
                    }
                    model.action_index.insert(id.clone(), model.actions.len());
                    let owner_idx = model.thimac_index[&owner];
                    model.thimacs[owner_idx].actions.insert(id.clone());
                    model.actions.push(ActionInfo {
                        id,
                        kind: *kind,
                        owner,
                        entity: entity.clone(),
                        note: note.clone(),
                    });
                }
                ModelElement::Variable { name, ty, default } => {
                    if model.variables.iter().any(|v| &v.name == name) {
                        errors.push(Violation {
                            rule: RuleName::DuplicateId,
                            subject: name.clone(),
                            message: format!("variable `{name}` declared more than once"),
                        });
                        continue;
                    }
                    model.variables.push(VarDecl {
                        name: name.clone(),
                        ty: *ty,
                        default: default.clone(),
                    });
                }
                ModelElement::Queue { name } => {
                    if model.queues.iter().any(|q| q == name) {
                        errors.push(Violation {
                            rule: RuleName::DuplicateId,
                            subject: name.clone(),
                            message: format!("queue `{name}` declared more than once"),
                        });
                        continue;
                    }
                    model.queues.push(name.clone());
                }
                _ => {}
            }
        }

        for element in elements {
            match element {
                ModelElement::Flow { from, to, label } => {
                    let from = ActionId(from.clone());
                    let to = ActionId(to.clone());
                    let mut ok = true;
                    for endpoint in [&from, &to] {
                        if !model.action_index.contains_key(endpoint) {
                            errors.push(Violation {
                                rule: RuleName::UnknownReference,
                                subject: format!("{from} -> {to}"),
                                message: format!("flow arc references unknown action `{endpoint}`"),
                            });
                            ok = false;
                        }
                    }
                    if ok {
                        model.flow_arcs.push(FlowArc {
                            from,
                            to,
                            label: label.clone(),
                        });
                    }
                }
                ModelElement::Trigger { from, to } => {
                    let from = ActionId(from.clone());
                    let to = ActionId(to.clone());
                    let mut ok = true;
                    for endpoint in [&from, &to] {
                        if !model.action_index.contains_key(endpoint) {
                            errors.push(Violation {
                                rule: RuleName::UnknownReference,
                                subject: format!("{from} -> {to}"),
                                message: format!(
                                    "trigger arc references unknown action `{endpoint}`"
                                ),
                            });
                            ok = false;
                        }
                    }
                    if ok {
                        model.trigger_arcs.push(TriggerArc { from, to });
                    }
                }
                _ => {}
            }
        }

        if errors.is_empty() {
            Ok(model)
        } else {
            Err(errors)
        }
    }
}

/// Build and fully validate a model. On any violation the complete error
/// list is returned, structural errors first.
pub fn build_model(elements: &[ModelElement]) -> Result<StaticModel, Vec<Violation>> {
    let model = StaticModel::assemble(elements)?;
    let report = validate(&model);
    if report.is_clean() {
        Ok(model)
    } else {
        Err(report.violations)
    }
}

/// Check the flow rules under the strict boundary profile.
pub fn validate(model: &StaticModel) -> ValidationReport {
    validate_with(model, BoundaryProfile::Strict)
}

/// Check the flow rules: adjacency table, boundary crossing, trigger
/// targets, and orphan reachability. Violations are data, not failures.
pub fn validate_with(model: &StaticModel, profile: BoundaryProfile) -> ValidationReport {
    let mut violations = Vec::new();

    for arc in model.flow_arcs() {
        let from = model.action(&arc.from).expect("assembled arc endpoint");
        let to = model.action(&arc.to).expect("assembled arc endpoint");
        let crosses = from.owner != to.owner;
        let relaxed_cross = matches!(profile, BoundaryProfile::Simplified)
            && matches!(from.kind, ActionKind::Create | ActionKind::Process)
            && to.kind == ActionKind::Process;

        if !from.kind.may_flow_to(to.kind) {
            violations.push(Violation {
                rule: RuleName::IllegalAdjacency,
                subject: format!("{} -> {}", arc.from, arc.to),
                message: format!("flow from {} may not enter {}", from.kind, to.kind),
            });
            continue;
        }
        let is_transfer_hop =
            from.kind == ActionKind::TransferOut && to.kind == ActionKind::TransferIn;
        if is_transfer_hop && !crosses {
            violations.push(Violation {
                rule: RuleName::IllegalBoundaryCrossing,
                subject: format!("{} -> {}", arc.from, arc.to),
                message: "transfer out -> transfer in must connect different thimacs".into(),
            });
        } else if !is_transfer_hop && crosses && !relaxed_cross {
            violations.push(Violation {
                rule: RuleName::IllegalBoundaryCrossing,
                subject: format!("{} -> {}", arc.from, arc.to),
                message: format!(
                    "only transfer out -> transfer in may cross a thimac boundary ({} is in `{}`, {} in `{}`)",
                    arc.from, from.owner, arc.to, to.owner
                ),
            });
        }
    }

    for arc in model.trigger_arcs() {
        let to = model.action(&arc.to).expect("assembled arc endpoint");
        if !matches!(to.kind, ActionKind::Create | ActionKind::Process) {
            violations.push(Violation {
                rule: RuleName::IllegalAdjacency,
                subject: format!("{} -> {}", arc.from, arc.to),
                message: format!(
                    "trigger target must be create or process, found {}",
                    to.kind
                ),
            });
        }
    }

    // Orphan rule: every action must be reachable from a create or a
    // transfer-in along flow/trigger arcs.
    let mut succ: BTreeMap<&ActionId, Vec<&ActionId>> = BTreeMap::new();
    for arc in model.flow_arcs() {
        succ.entry(&arc.from).or_default().push(&arc.to);
    }
    for arc in model.trigger_arcs() {
        succ.entry(&arc.from).or_default().push(&arc.to);
    }
    let mut reached: BTreeSet<&ActionId> = BTreeSet::new();
    let mut frontier: VecDeque<&ActionId> = model
        .actions()
        .iter()
        .filter(|a| matches!(a.kind, ActionKind::Create | ActionKind::TransferIn))
        .map(|a| &a.id)
        .collect();
    reached.extend(frontier.iter().copied());
    while let Some(id) = frontier.pop_front() {
        for next in succ.get(id).into_iter().flatten() {
            if reached.insert(next) {
                frontier.push_back(next);
            }
        }
    }
    for action in model.actions() {
        if !reached.contains(&action.id) {
            violations.push(Violation {
                rule: RuleName::OrphanAction,
                subject: action.id.0.clone(),
                message: format!(
                    "`{}` is not reachable from any create or transfer-in action",
                    action.id
                ),
            });
        }
    }

    ValidationReport { violations }
}

/// Contract every transport chain (release, transfer, transfer, receive)
/// to a direct arc between the chain's flow-predecessor and flow-successor,
/// keeping create/process actions and trigger arcs.
///
/// Triggers whose source is eliminated are re-anchored to the nearest kept
/// flow-predecessors of that source. Chains without a kept successor (a
/// terminal receive) are dropped. The result revalidates under
/// [`BoundaryProfile::Simplified`].
pub fn simplify(model: &StaticModel) -> Result<StaticModel, SimplifyError> {
    // Already-simplified models are legal input, so the precondition is
    // well-formedness under the relaxed boundary profile.
    let report = validate_with(model, BoundaryProfile::Simplified);
    if !report.is_clean() {
        return Err(SimplifyError::NotValidated(report.violations.len()));
    }

    let kept = |id: &ActionId| -> bool {
        !model
            .action(id)
            .expect("validated model")
            .kind
            .is_transport()
    };

    let mut succ: BTreeMap<&ActionId, Vec<&FlowArc>> = BTreeMap::new();
    let mut pred: BTreeMap<&ActionId, Vec<&FlowArc>> = BTreeMap::new();
    for arc in model.flow_arcs() {
        succ.entry(&arc.from).or_default().push(arc);
        pred.entry(&arc.to).or_default().push(arc);
    }

    // Kept actions reached from `start` by walking forward through
    // transport actions only.
    let forward_targets = |start: &ActionId| -> Vec<(ActionId, Option<String>)> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack: Vec<(&ActionId, Option<String>)> = vec![(start, None)];
        while let Some((id, label)) = stack.pop() {
            for arc in succ.get(id).into_iter().flatten() {
                let carried = label.clone().or_else(|| arc.label.clone());
                if kept(&arc.to) {
                    out.push((arc.to.clone(), carried));
                } else if seen.insert(&arc.to) {
                    stack.push((&arc.to, carried));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.dedup_by(|a, b| a.0 == b.0);
        out
    };
    let backward_sources = |start: &ActionId| -> Vec<ActionId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&ActionId> = vec![start];
        while let Some(id) = stack.pop() {
            for arc in pred.get(id).into_iter().flatten() {
                if kept(&arc.from) {
                    out.push(arc.from.clone());
                } else if seen.insert(&arc.from) {
                    stack.push(&arc.from);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    };

    let mut flow_arcs: Vec<FlowArc> = Vec::new();
    for action in model.actions().iter().filter(|a| !a.kind.is_transport()) {
        for &arc in succ.get(&action.id).into_iter().flatten() {
            if kept(&arc.to) {
                flow_arcs.push(arc.clone());
            } else {
                for (target, label) in forward_targets(&arc.to) {
                    flow_arcs.push(FlowArc {
                        from: action.id.clone(),
                        to: target,
                        label: arc.label.clone().or(label),
                    });
                }
            }
        }
    }
    flow_arcs.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    flow_arcs.dedup_by(|a, b| a.from == b.from && a.to == b.to);

    let mut trigger_arcs: Vec<TriggerArc> = Vec::new();
    for arc in model.trigger_arcs() {
        if kept(&arc.from) {
            trigger_arcs.push(arc.clone());
        } else {
            for source in backward_sources(&arc.from) {
                trigger_arcs.push(TriggerArc {
                    from: source,
                    to: arc.to.clone(),
                });
            }
        }
    }
    trigger_arcs.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    trigger_arcs.dedup();

    let mut out = StaticModel {
        thimacs: model
            .thimacs
            .iter()
            .map(|t| Thimac {
                actions: BTreeSet::new(),
                ..t.clone()
            })
            .collect(),
        actions: Vec::new(),
        flow_arcs,
        trigger_arcs,
        variables: model.variables.clone(),
        queues: model.queues.clone(),
        thimac_index: model.thimac_index.clone(),
        action_index: BTreeMap::new(),
    };
    for action in model.actions().iter().filter(|a| !a.kind.is_transport()) {
        out.action_index
            .insert(action.id.clone(), out.actions.len());
        let owner_idx = out.thimac_index[&action.owner];
        out.thimacs[owner_idx].actions.insert(action.id.clone());
        out.actions.push(action.clone());
    }
    Ok(out)
}
