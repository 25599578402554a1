//! Executable encodings of the three worked models — Socrates, the
//! inventory system with its queue, and the clinical timeline — shipped as
//! `.tm` fixtures with frozen golden outcomes. Catalog integrity is a
//! build-time guarantee: the test suite parses, validates, and replays
//! every entry.

use std::fmt;
use std::str::FromStr;

use crate::dsl::{self, Document};
use crate::engine::QueueStimulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryName {
    Socrates,
    Inventory,
    Queue,
    Clinical,
}

impl EntryName {
    pub const ALL: [EntryName; 4] = [
        EntryName::Socrates,
        EntryName::Inventory,
        EntryName::Queue,
        EntryName::Clinical,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            EntryName::Socrates => "socrates.tm",
            EntryName::Inventory => "inventory.tm",
            EntryName::Queue => "queue.tm",
            EntryName::Clinical => "clinical.tm",
        }
    }
}

impl fmt::Display for EntryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file_name().trim_end_matches(".tm"))
    }
}

impl FromStr for EntryName {
    type Err = String;

    fn from_str(s: &str) -> Result<EntryName, String> {
        EntryName::ALL
            .into_iter()
            .find(|e| e.to_string() == s)
            .ok_or_else(|| format!("unknown catalog entry `{s}`"))
    }
}

/// Raw `.tm` source of an entry.
pub fn source(name: EntryName) -> &'static str {
    match name {
        EntryName::Socrates => include_str!("../fixtures/socrates.tm"),
        EntryName::Inventory => include_str!("../fixtures/inventory.tm"),
        EntryName::Queue => include_str!("../fixtures/queue.tm"),
        EntryName::Clinical => include_str!("../fixtures/clinical.tm"),
    }
}

/// The clinical timeline in the one-JSON-object-per-event import format,
/// mirroring the `timeline` block of [`EntryName::Clinical`].
pub const CLINICAL_JSONL: &str = include_str!("../fixtures/clinical.json");

/// Parse a catalog entry. Fixtures are shipped valid, so failure here is a
/// build defect.
pub fn load(name: EntryName) -> Document {
    dsl::parse(name.file_name(), source(name))
        .unwrap_or_else(|e| panic!("catalog entry {name} failed to parse: {e:?}"))
}

/// One scripted queue stimulus with an optional arriving instance.
pub type QueueStep = (QueueStimulus, Option<&'static str>);

/// Expected outcome of a catalog scenario, frozen from the oracle.
#[derive(Debug, Clone)]
pub enum Expected {
    /// Golden JSON-lines trace for a simulation scenario.
    Trace(&'static str),
    /// Query strings paired with their rendered answers.
    Answers(&'static [(&'static str, &'static str)]),
    /// A queue script with the serviced order and final flags it must
    /// produce.
    Queue {
        script: &'static [QueueStep],
        serviced: &'static [&'static str],
        final_empty: bool,
    },
}

#[derive(Debug, Clone)]
pub struct ScenarioFixture {
    /// Scenario name inside the fixture, or a script label for queue runs.
    pub scenario: &'static str,
    pub expected: Expected,
}

pub const GOLDEN_DECLINE: &str = include_str!("../fixtures/golden/inventory_decline.jsonl");
pub const GOLDEN_FULFILL: &str = include_str!("../fixtures/golden/inventory_fulfill.jsonl");
pub const GOLDEN_REJECT: &str = include_str!("../fixtures/golden/inventory_reject_partial.jsonl");
pub const GOLDEN_ACCEPT: &str = include_str!("../fixtures/golden/inventory_accept_partial.jsonl");

/// Golden fixtures for an entry, used by the acceptance suite.
pub fn scenarios(name: EntryName) -> Vec<ScenarioFixture> {
    match name {
        EntryName::Socrates => Vec::new(),
        EntryName::Inventory => vec![
            ScenarioFixture {
                scenario: "decline",
                expected: Expected::Trace(GOLDEN_DECLINE),
            },
            ScenarioFixture {
                scenario: "fulfill",
                expected: Expected::Trace(GOLDEN_FULFILL),
            },
            ScenarioFixture {
                scenario: "reject-partial",
                expected: Expected::Trace(GOLDEN_REJECT),
            },
            ScenarioFixture {
                scenario: "accept-partial",
                expected: Expected::Trace(GOLDEN_ACCEPT),
            },
        ],
        EntryName::Queue => vec![
            ScenarioFixture {
                scenario: "fifo-pair",
                expected: Expected::Queue {
                    script: &[
                        (QueueStimulus::Arrive, Some("o1")),
                        (QueueStimulus::Arrive, Some("o2")),
                        (QueueStimulus::DownstreamFree, None),
                    ],
                    serviced: &["o1"],
                    final_empty: false,
                },
            },
            ScenarioFixture {
                scenario: "drain-to-empty",
                expected: Expected::Queue {
                    script: &[
                        (QueueStimulus::Arrive, Some("o1")),
                        (QueueStimulus::DownstreamFree, None),
                    ],
                    serviced: &["o1"],
                    final_empty: true,
                },
            },
        ],
        EntryName::Clinical => vec![ScenarioFixture {
            scenario: "queries",
            expected: Expected::Answers(&[
                ("when(E1)", "at 2020-03-01"),
                ("relation(E1, E7)", "before"),
                ("starts_before(E4, E8)", "true"),
                ("before(E8)", "E1 E2 E3 E4 E5 E6 E7"),
            ]),
        }],
    }
}
