//! Clinical timelines: labeled events with instant/interval time anchors,
//! a temporal-relation algebra over them, and a four-form query language.
//!
//! Under-specified anchors propagate three-valued: whenever an endpoint
//! needed for a decision is unknown, the answer is `Unknown` rather than a
//! guess. "Before" is strict — simultaneous starts are not before.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use thiserror::Error;

/// A point in time, date-or-datetime precision. Bare dates anchor at
/// midnight; rendering collapses midnight back to the bare date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimePoint(pub NaiveDateTime);

impl TimePoint {
    pub fn from_day(date: NaiveDate) -> TimePoint {
        TimePoint(date.and_time(NaiveTime::MIN))
    }
}

impl FromStr for TimePoint {
    type Err = String;

    fn from_str(s: &str) -> Result<TimePoint, String> {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
            return Ok(TimePoint(dt));
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(TimePoint::from_day(d));
        }
        Err(format!("`{s}` is not an ISO-8601 date or datetime"))
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.time() == NaiveTime::MIN {
            write!(f, "{}", self.0.format("%Y-%m-%d"))
        } else {
            write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%S"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAnchor {
    Instant(TimePoint),
    /// Closed interval, start <= end.
    Interval(TimePoint, TimePoint),
    /// Some unknown instant strictly after `t`, open-ended.
    After(TimePoint),
    Unknown,
}

impl TimeAnchor {
    pub fn interval(start: TimePoint, end: TimePoint) -> Result<TimeAnchor, String> {
        if start > end {
            return Err(format!("interval start {start} is after end {end}"));
        }
        Ok(TimeAnchor::Interval(start, end))
    }

    /// Known start point, if any. An `After` anchor's start is unknown —
    /// only bounded below.
    fn start(&self) -> Option<TimePoint> {
        match self {
            TimeAnchor::Instant(t) => Some(*t),
            TimeAnchor::Interval(s, _) => Some(*s),
            TimeAnchor::After(_) | TimeAnchor::Unknown => None,
        }
    }

    fn end(&self) -> Option<TimePoint> {
        match self {
            TimeAnchor::Instant(t) => Some(*t),
            TimeAnchor::Interval(_, e) => Some(*e),
            TimeAnchor::After(_) | TimeAnchor::Unknown => None,
        }
    }
}

impl fmt::Display for TimeAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeAnchor::Instant(t) => write!(f, "at {t}"),
            TimeAnchor::Interval(s, e) => write!(f, "from {s} to {e}"),
            TimeAnchor::After(t) => write!(f, "after {t}"),
            TimeAnchor::Unknown => write!(f, "unknown"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Admission,
    Medication,
    LabResult,
    Diagnosis,
    Procedure,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Admission,
        Category::Medication,
        Category::LabResult,
        Category::Diagnosis,
        Category::Procedure,
        Category::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Admission => "Admission",
            Category::Medication => "Medication",
            Category::LabResult => "LabResult",
            Category::Diagnosis => "Diagnosis",
            Category::Procedure => "Procedure",
            Category::Other => "Other",
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Category, String> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClinicalEvent {
    pub id: String,
    pub label: String,
    pub category: Category,
    pub anchor: TimeAnchor,
}

/// Relation of event a to event b. The thirteen interval configurations
/// collapse onto this vocabulary: meets folds into Before (met-by into
/// After), started-by and finished-by into Contains, overlapped-by into
/// Overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalRelation {
    Before,
    After,
    Overlaps,
    Contains,
    During,
    Starts,
    Finishes,
    Equals,
    Unknown,
}

impl fmt::Display for TemporalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TemporalRelation::Before => "before",
            TemporalRelation::After => "after",
            TemporalRelation::Overlaps => "overlaps",
            TemporalRelation::Contains => "contains",
            TemporalRelation::During => "during",
            TemporalRelation::Starts => "starts",
            TemporalRelation::Finishes => "finishes",
            TemporalRelation::Equals => "equals",
            TemporalRelation::Unknown => "unknown",
        };
        write!(f, "{name}")
    }
}

/// Pure anchor-to-anchor relation. Instants behave as degenerate
/// intervals; boundary coincidences resolve to the start/finish relations
/// before the before/after ones.
pub fn relation_anchors(a: &TimeAnchor, b: &TimeAnchor) -> TemporalRelation {
    use TemporalRelation::*;
    match (a, b) {
        (TimeAnchor::Unknown, _) | (_, TimeAnchor::Unknown) => Unknown,
        (TimeAnchor::After(_), TimeAnchor::After(_)) => Unknown,
        // a has a known end: entirely before b's open start?
        (_, TimeAnchor::After(t)) => match a.end() {
            Some(end) if end <= *t => Before,
            _ => Unknown,
        },
        (TimeAnchor::After(t), _) => match b.end() {
            Some(end) if *t >= end => After,
            _ => Unknown,
        },
        _ => {
            let (s1, e1) = (a.start().expect("anchored"), a.end().expect("anchored"));
            let (s2, e2) = (b.start().expect("anchored"), b.end().expect("anchored"));
            if s1 == s2 && e1 == e2 {
                Equals
            } else if s1 == s2 {
                if e1 < e2 {
                    Starts
                } else {
                    Contains // started-by
                }
            } else if e1 == e2 {
                if s1 > s2 {
                    Finishes
                } else {
                    Contains // finished-by
                }
            } else if e1 <= s2 {
                Before // includes meets
            } else if s1 >= e2 {
                After // includes met-by
            } else if s1 > s2 && e1 < e2 {
                During
            } else if s1 < s2 && e1 > e2 {
                Contains
            } else {
                Overlaps // either direction
            }
        }
    }
}

/// Does a start strictly before b? `None` when the anchors cannot decide.
pub fn starts_before_anchors(a: &TimeAnchor, b: &TimeAnchor) -> Option<bool> {
    enum Start {
        Known(TimePoint),
        Bounded(TimePoint),
        Unknown,
    }
    let start = |anchor: &TimeAnchor| match anchor {
        TimeAnchor::Instant(t) => Start::Known(*t),
        TimeAnchor::Interval(s, _) => Start::Known(*s),
        TimeAnchor::After(t) => Start::Bounded(*t),
        TimeAnchor::Unknown => Start::Unknown,
    };
    match (start(a), start(b)) {
        (Start::Known(x), Start::Known(y)) => Some(x < y),
        // b starts strictly after t; a at or before t must precede it.
        (Start::Known(x), Start::Bounded(t)) => {
            if x <= t {
                Some(true)
            } else {
                None
            }
        }
        // a starts strictly after t; at or past b's start it cannot precede.
        (Start::Bounded(t), Start::Known(y)) => {
            if t >= y {
                Some(false)
            } else {
                None
            }
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimelineError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("duplicate event id `{0}`")]
    DuplicateEvent(String),
    #[error("invalid timeline data: {0}")]
    Invalid(String),
}

/// An immutable, query-only clinical timeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    pub name: String,
    events: Vec<ClinicalEvent>,
    index: BTreeMap<String, usize>,
}

impl Timeline {
    pub fn new(
        name: impl Into<String>,
        events: Vec<ClinicalEvent>,
    ) -> Result<Timeline, TimelineError> {
        let mut index = BTreeMap::new();
        for (i, event) in events.iter().enumerate() {
            if index.insert(event.id.clone(), i).is_some() {
                return Err(TimelineError::DuplicateEvent(event.id.clone()));
            }
        }
        Ok(Timeline {
            name: name.into(),
            events,
            index,
        })
    }

    pub fn events(&self) -> &[ClinicalEvent] {
        &self.events
    }

    pub fn event(&self, id: &str) -> Option<&ClinicalEvent> {
        self.index.get(id).map(|&i| &self.events[i])
    }

    fn get(&self, id: &str) -> Result<&ClinicalEvent, TimelineError> {
        self.event(id)
            .ok_or_else(|| TimelineError::UnknownEvent(id.to_string()))
    }

    /// Temporal relation of a to b. The same event relates to itself as
    /// Equals regardless of anchoring.
    pub fn relation(&self, a: &str, b: &str) -> Result<TemporalRelation, TimelineError> {
        let ea = self.get(a)?;
        let eb = self.get(b)?;
        if ea.id == eb.id {
            return Ok(TemporalRelation::Equals);
        }
        Ok(relation_anchors(&ea.anchor, &eb.anchor))
    }

    pub fn starts_before(&self, a: &str, b: &str) -> Result<Option<bool>, TimelineError> {
        let ea = self.get(a)?;
        let eb = self.get(b)?;
        Ok(starts_before_anchors(&ea.anchor, &eb.anchor))
    }

    /// Events that definitely start before b, ordered by start point then
    /// id. Events whose order to b cannot be decided are excluded.
    pub fn events_before(&self, b: &str) -> Result<Vec<&ClinicalEvent>, TimelineError> {
        let eb = self.get(b)?;
        let mut out: Vec<&ClinicalEvent> = self
            .events
            .iter()
            .filter(|e| starts_before_anchors(&e.anchor, &eb.anchor) == Some(true))
            .collect();
        out.sort_by(|x, y| {
            let kx = x.anchor.start();
            let ky = y.anchor.start();
            kx.cmp(&ky).then_with(|| x.id.cmp(&y.id))
        });
        Ok(out)
    }

    /// The event's anchor, verbatim.
    pub fn when(&self, e: &str) -> Result<&TimeAnchor, TimelineError> {
        Ok(&self.get(e)?.anchor)
    }
}

/// The four supported query forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    When(String),
    Relation(String, String),
    StartsBefore(String, String),
    Before(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query syntax error at column {column}: expected {expected}, found `{found}`")]
pub struct QuerySyntaxError {
    pub column: usize,
    pub expected: String,
    pub found: String,
}

/// Parse one of `when(ID)`, `relation(ID, ID)`, `starts_before(ID, ID)`,
/// `before(ID)`.
pub fn parse_query(text: &str) -> Result<Query, QuerySyntaxError> {
    let trimmed = text.trim();
    let offset = text.len() - text.trim_start().len();
    let open = trimmed.find('(').ok_or_else(|| QuerySyntaxError {
        column: offset + trimmed.len() + 1,
        expected: "`(`".into(),
        found: "end of query".into(),
    })?;
    let name = trimmed[..open].trim();
    if !trimmed.ends_with(')') {
        return Err(QuerySyntaxError {
            column: offset + trimmed.len() + 1,
            expected: "`)`".into(),
            found: "end of query".into(),
        });
    }
    let inner = &trimmed[open + 1..trimmed.len() - 1];
    let args: Vec<&str> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    let arity_error = |expected: usize| QuerySyntaxError {
        column: offset + open + 2,
        expected: format!("{expected} argument(s)"),
        found: format!("{}", args.len()),
    };
    for (i, arg) in args.iter().enumerate() {
        if arg.is_empty() || !arg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(QuerySyntaxError {
                column: offset + open + 2 + i,
                expected: "event id".into(),
                found: arg.to_string(),
            });
        }
    }
    match name {
        "when" if args.len() == 1 => Ok(Query::When(args[0].into())),
        "when" => Err(arity_error(1)),
        "relation" if args.len() == 2 => Ok(Query::Relation(args[0].into(), args[1].into())),
        "relation" => Err(arity_error(2)),
        "starts_before" if args.len() == 2 => {
            Ok(Query::StartsBefore(args[0].into(), args[1].into()))
        }
        "starts_before" => Err(arity_error(2)),
        "before" if args.len() == 1 => Ok(Query::Before(args[0].into())),
        "before" => Err(arity_error(1)),
        other => Err(QuerySyntaxError {
            column: offset + 1,
            expected: "one of when, relation, starts_before, before".into(),
            found: other.to_string(),
        }),
    }
}

/// Evaluate a parsed query and render its answer: an anchor, a relation
/// name, `true`/`false`/`unknown`, or a space-separated ordered id list.
pub fn answer_query(timeline: &Timeline, query: &Query) -> Result<String, TimelineError> {
    match query {
        Query::When(id) => Ok(timeline.when(id)?.to_string()),
        Query::Relation(a, b) => Ok(timeline.relation(a, b)?.to_string()),
        Query::StartsBefore(a, b) => Ok(match timeline.starts_before(a, b)? {
            Some(true) => "true".to_string(),
            Some(false) => "false".to_string(),
            None => "unknown".to_string(),
        }),
        Query::Before(b) => {
            let events = timeline.events_before(b)?;
            Ok(events
                .iter()
                .map(|e| e.id.as_str())
                .collect::<Vec<_>>()
                .join(" "))
        }
    }
}

/// Import a timeline from JSON lines, one object per event:
/// `{"id", "label", "category", "anchor"}` where anchor is
/// `{"kind": "instant"|"interval"|"after"|"unknown", ...}`.
pub fn import_jsonl(name: &str, text: &str) -> Result<Timeline, TimelineError> {
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| TimelineError::Invalid(format!("line {}: {e}", lineno + 1)))?;
        let field = |key: &str| -> Result<String, TimelineError> {
            value
                .get(key)
                .and_then(|v| v.as_str())
                .map(String::from)
                .ok_or_else(|| {
                    TimelineError::Invalid(format!("line {}: missing `{key}`", lineno + 1))
                })
        };
        let anchor_value = value.get("anchor").ok_or_else(|| {
            TimelineError::Invalid(format!("line {}: missing `anchor`", lineno + 1))
        })?;
        let anchor_field = |key: &str| -> Result<TimePoint, TimelineError> {
            anchor_value
                .get(key)
                .and_then(|v| v.as_str())
                .ok_or_else(|| {
                    TimelineError::Invalid(format!("line {}: missing anchor `{key}`", lineno + 1))
                })?
                .parse()
                .map_err(|e| TimelineError::Invalid(format!("line {}: {e}", lineno + 1)))
        };
        let kind = anchor_value
            .get("kind")
            .and_then(|v| v.as_str())
            .unwrap_or("");
        let anchor = match kind {
            "instant" => TimeAnchor::Instant(anchor_field("at")?),
            "interval" => TimeAnchor::interval(anchor_field("start")?, anchor_field("end")?)
                .map_err(|e| TimelineError::Invalid(format!("line {}: {e}", lineno + 1)))?,
            "after" => TimeAnchor::After(anchor_field("after")?),
            "unknown" => TimeAnchor::Unknown,
            other => {
                return Err(TimelineError::Invalid(format!(
                    "line {}: unknown anchor kind `{other}`",
                    lineno + 1
                )))
            }
        };
        events.push(ClinicalEvent {
            id: field("id")?,
            label: field("label")?,
            category: field("category")?
                .parse()
                .map_err(|e: String| TimelineError::Invalid(format!("line {}: {e}", lineno + 1)))?,
            anchor,
        });
    }
    Timeline::new(name, events)
}
