//! Acceptance suite. One test per criterion, each printing a PASS line
//! with its measured runtime; golden traces are checked bit-exactly
//! against both the engine and the independent interpreter in `common`.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tm_core::behavior::BehaviorGraph;
use tm_core::catalog::{self, EntryName, Expected};
use tm_core::dsl::{self, analyze, serialize};
use tm_core::engine::{self, QueueStimulus, RecordKind, Stimulus};
use tm_core::event::EventId;
use tm_core::expr::Value;
use tm_core::timeline::{self, relation_anchors, TimeAnchor, TimePoint};

use common::{allen_classify, allen_folded_name, oracle_run, random_graph};

fn pass(criterion: &str, elapsed: Duration) {
    println!("ACCEPTANCE {criterion}: PASS ({} ms)", elapsed.as_millis());
}

fn compile(name: EntryName) -> dsl::Compiled {
    analyze(&catalog::load(name)).expect("catalog entry analyzes")
}

fn inventory_bg() -> Arc<BehaviorGraph> {
    compile(EntryName::Inventory)
        .behavior
        .expect("inventory declares behavior")
}

fn run_scenario(scenario_name: &str) -> (String, engine::SimState) {
    let compiled = compile(EntryName::Inventory);
    let bg = compiled.behavior.clone().expect("behavior");
    let scenario = compiled
        .scenario(scenario_name)
        .unwrap_or_else(|| panic!("scenario {scenario_name} exists"))
        .clone();
    let mut state =
        engine::init_state(bg, &scenario.bindings, scenario.stimuli.clone()).expect("init");
    let trace = engine::run(&mut state, 10_000).expect("run");
    (trace.to_jsonl(), state)
}

fn oracle_scenario(scenario_name: &str) -> String {
    let compiled = compile(EntryName::Inventory);
    let bg = compiled.behavior.clone().expect("behavior");
    let scenario = compiled.scenario(scenario_name).expect("scenario").clone();
    let stimuli: Vec<(String, u64)> = scenario
        .stimuli
        .iter()
        .map(|s| (s.event.0.clone(), s.at_step))
        .collect();
    oracle_run(&bg, &scenario.bindings, &stimuli, 10_000)
}

fn golden(scenario_name: &str) -> &'static str {
    let fixtures = catalog::scenarios(EntryName::Inventory);
    let fixture = fixtures
        .iter()
        .find(|f| f.scenario == scenario_name)
        .expect("golden exists");
    match fixture.expected {
        Expected::Trace(text) => text,
        _ => panic!("inventory goldens are traces"),
    }
}

#[test]
fn c01_catalog_validity() {
    let start = Instant::now();
    for name in EntryName::ALL {
        let doc = catalog::load(name);
        let compiled =
            analyze(&doc).unwrap_or_else(|e| panic!("catalog entry {name} has violations: {e:#?}"));
        assert!(
            compiled.warnings.is_empty(),
            "catalog entry {name} has warnings"
        );
        let text = serialize(&doc);
        let reparsed = dsl::parse(name.file_name(), &text)
            .unwrap_or_else(|e| panic!("serialized {name} failed to reparse: {e:?}"));
        assert_eq!(
            doc.canonical(),
            reparsed.canonical(),
            "round-trip of {name} is not structural identity"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(1),
        "criterion 1 overran: {elapsed:?}"
    );
    pass("criterion 1 (catalog validity, round-trip, < 1 s)", elapsed);
}

#[test]
fn c02_inventory_decline() {
    let start = Instant::now();
    let (trace, _) = run_scenario("decline");
    assert_eq!(trace, golden("decline"), "engine trace differs from golden");
    assert_eq!(
        oracle_scenario("decline"),
        golden("decline"),
        "oracle trace differs from golden"
    );
    let fired: Vec<&str> = trace
        .lines()
        .filter(|l| l.contains("\"kind\":\"fire\""))
        .map(|l| {
            l.split("\"event\":\"")
                .nth(1)
                .unwrap()
                .split('"')
                .next()
                .unwrap()
        })
        .collect();
    assert_eq!(fired, ["E1", "E2", "E3", "E4", "E11"]);
    pass(
        "criterion 2 (decline: E1,E2,E3,E4,E11 then quiescence)",
        start.elapsed(),
    );
}

#[test]
fn c03_inventory_fulfill_with_reorder() {
    let start = Instant::now();
    let (trace, state) = run_scenario("fulfill");
    assert_eq!(trace, golden("fulfill"));
    assert_eq!(oracle_scenario("fulfill"), golden("fulfill"));
    assert_eq!(state.env()["Inventory"], Value::Int(2));
    let fired: Vec<&str> = trace
        .lines()
        .filter(|l| l.contains("\"kind\":\"fire\""))
        .map(|l| {
            l.split("\"event\":\"")
                .nth(1)
                .unwrap()
                .split('"')
                .next()
                .unwrap()
        })
        .collect();
    assert_eq!(
        fired,
        ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9"],
        "reorder must follow because 2 <= ReorderPoint"
    );
    pass(
        "criterion 3 (fulfill: E1..E8, Inventory=2, then E9)",
        start.elapsed(),
    );
}

#[test]
fn c04_inventory_reject_partial() {
    let start = Instant::now();
    let (trace, state) = run_scenario("reject-partial");
    assert_eq!(trace, golden("reject-partial"));
    assert_eq!(oracle_scenario("reject-partial"), golden("reject-partial"));

    let lines: Vec<&str> = trace.lines().collect();
    let last_two: Vec<&str> = lines[lines.len() - 2..].to_vec();
    assert!(last_two[0].contains("\"event\":\"E14\"") && last_two[0].contains("\"kind\":\"fire\""));
    assert!(
        last_two[1].contains("\"event\":\"E1\"") && last_two[1].contains("\"kind\":\"revert\"")
    );

    let order = &state.instances()["order"];
    assert!(!order.live, "the cancelled order instance must be erased");
    assert!(
        state.enabled().expect("enabledness computes").is_empty(),
        "no event may be enabled after the cancellation"
    );
    pass(
        "criterion 4 (reject: Fire(E14), Revert(E1), order erased)",
        start.elapsed(),
    );
}

#[test]
fn c05_inventory_accept_partial() {
    let start = Instant::now();
    let (trace, _) = run_scenario("accept-partial");
    assert_eq!(trace, golden("accept-partial"));
    assert_eq!(oracle_scenario("accept-partial"), golden("accept-partial"));

    // E13 re-binds Quantity to the stock level, E4 re-fires, and the
    // fulfillment chain completes.
    assert!(trace.contains(r#"{"step":5,"event":"E13","kind":"fire","env":{"Quantity":2}}"#));
    assert!(trace.contains(r#"{"step":5,"event":"E4","kind":"revert","env":{}}"#));
    assert!(trace.contains(r#"{"step":6,"event":"E4","kind":"fire","env":{}}"#));
    for event in ["E5", "E6", "E7", "E8"] {
        assert!(
            trace.contains(&format!("\"event\":\"{event}\",\"kind\":\"fire\"")),
            "{event} must complete after the re-fire"
        );
    }
    pass(
        "criterion 5 (accept: E4 re-fires with Quantity=2, E5..E8)",
        start.elapsed(),
    );
}

#[test]
fn c06_branch_totality_grid() {
    let start = Instant::now();
    let bg = inventory_bg();
    let mut runs = 0u32;
    for quantity in 1..=50i64 {
        for inventory in 0..=50i64 {
            let bindings = vec![
                ("Inventory".to_string(), Value::Int(inventory)),
                ("Quantity".to_string(), Value::Int(quantity)),
            ];
            let mut state = engine::init_state(bg.clone(), &bindings, Vec::new()).expect("init");
            let trace = engine::run(&mut state, 100).expect("run");
            let branches: Vec<&str> = trace
                .records
                .iter()
                .filter(|r| r.kind == RecordKind::Fire)
                .filter(|r| ["E5", "E11", "E12"].contains(&r.event.0.as_str()))
                .map(|r| r.event.0.as_str())
                .collect();
            assert_eq!(
                branches.len(),
                1,
                "Quantity={quantity}, Inventory={inventory}: expected exactly one branch, got {branches:?}"
            );
            runs += 1;
        }
    }
    assert_eq!(runs, 2550);
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "criterion 6 overran: {elapsed:?}"
    );
    pass(
        "criterion 6 (branch totality over 2550 runs, < 10 s)",
        elapsed,
    );
}

#[test]
fn c07_queue_randomized_against_list_oracle() {
    let start = Instant::now();
    let compiled = compile(EntryName::Queue);
    let bg = compiled.behavior.clone().expect("queue doc compiles");
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    for round in 0..10_000u32 {
        let mut state = engine::init_state(bg.clone(), &[], Vec::new()).expect("init");
        let mut model: Vec<String> = Vec::new();
        let mut serviced_model: Vec<String> = Vec::new();
        let mut next_id = 0u32;
        let ops = rng.gen_range(1..=12);
        for _ in 0..ops {
            match rng.gen_range(0..3u8) {
                0 => {
                    let id = format!("o{next_id}");
                    next_id += 1;
                    state
                        .queue_transition("Q", QueueStimulus::Arrive, Some(&id))
                        .expect("arrive");
                    model.push(id);
                }
                1 => {
                    state
                        .queue_transition("Q", QueueStimulus::DownstreamFree, None)
                        .expect("free");
                    if !model.is_empty() {
                        serviced_model.push(model.remove(0));
                    }
                }
                _ => {
                    state
                        .queue_transition("Q", QueueStimulus::DownstreamBusy, None)
                        .expect("busy");
                }
            }
            let q = state.queue("Q").expect("queue exists");
            assert_eq!(q.empty, q.is_empty(), "round {round}: empty flag drifted");
            let items: Vec<&str> = q.items().collect();
            let expected: Vec<&str> = model.iter().map(String::as_str).collect();
            assert_eq!(items, expected, "round {round}: FIFO content drifted");
            assert_eq!(
                q.serviced(),
                serviced_model.as_slice(),
                "round {round}: dequeue order differs from list oracle"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "criterion 7 overran: {elapsed:?}"
    );
    pass(
        "criterion 7 (10,000 randomized queue scripts vs list oracle, < 10 s)",
        elapsed,
    );
}

#[test]
fn c08_engine_matches_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for round in 0..100u32 {
        let (bg, _, stimuli) = random_graph(&mut rng);
        // Several initial bindings per graph probe the reachable space.
        for _ in 0..3 {
            let bindings: Vec<(String, Value)> = ["V0", "V1", "V2"]
                .iter()
                .map(|v| (v.to_string(), Value::Int(rng.gen_range(0..5))))
                .collect();
            let engine_stimuli: Vec<Stimulus> = stimuli
                .iter()
                .map(|(event, at_step)| Stimulus {
                    event: EventId(event.clone()),
                    at_step: *at_step,
                })
                .collect();
            let mut state =
                engine::init_state(bg.clone(), &bindings, engine_stimuli).expect("init");
            let engine_trace = engine::run(&mut state, 200).expect("run").to_jsonl();
            let oracle_trace = oracle_run(&bg, &bindings, &stimuli, 200);
            assert_eq!(
                engine_trace, oracle_trace,
                "round {round}: engine and oracle disagree"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(30),
        "criterion 8 overran: {elapsed:?}"
    );
    pass(
        "criterion 8 (100 random graphs vs brute-force oracle, < 30 s)",
        elapsed,
    );
}

#[test]
fn c09_clinical_queries() {
    let start = Instant::now();
    let compiled = compile(EntryName::Clinical);
    let timeline = &compiled.timelines[0];

    let fixtures = catalog::scenarios(EntryName::Clinical);
    let Expected::Answers(answers) = fixtures[0].expected else {
        panic!("clinical fixture carries query answers");
    };
    for (query, expected) in answers {
        let parsed = timeline::parse_query(query).expect("query parses");
        let answer = timeline::answer_query(timeline, &parsed).expect("query answers");
        assert_eq!(&answer, expected, "query {query}");
    }

    // The three named checks, asserted directly as well.
    assert_eq!(timeline.when("E1").unwrap().to_string(), "at 2020-03-01");
    assert_eq!(timeline.starts_before("E4", "E8").unwrap(), Some(true));
    let before: Vec<&str> = timeline
        .events_before("E8")
        .unwrap()
        .iter()
        .map(|e| e.id.as_str())
        .collect();
    assert_eq!(before, ["E1", "E2", "E3", "E4", "E5", "E6", "E7"]);
    pass(
        "criterion 9 (clinical queries: when, starts_before, before)",
        start.elapsed(),
    );
}

#[test]
fn c10_allen_relation_exhaustive() {
    let start = Instant::now();
    let day = |n: i64| {
        TimePoint::from_day(
            chrono::NaiveDate::from_ymd_opt(2020, 1, 1 + n as u32).expect("valid day"),
        )
    };
    let mut anchors: Vec<(i64, i64, TimeAnchor)> = Vec::new();
    for t in 0..=5 {
        anchors.push((t, t, TimeAnchor::Instant(day(t))));
    }
    for s in 0..=5 {
        for e in s..=5 {
            anchors.push((s, e, TimeAnchor::interval(day(s), day(e)).unwrap()));
        }
    }
    let mut checked = 0u32;
    for (s1, e1, a) in &anchors {
        for (s2, e2, b) in &anchors {
            let expected = allen_folded_name(allen_classify(*s1, *e1, *s2, *e2));
            let got = relation_anchors(a, b).to_string();
            assert_eq!(
                got, expected,
                "[{s1},{e1}] vs [{s2},{e2}]: relation() disagrees with the 13-case oracle"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 27 * 27);
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(1),
        "criterion 10 overran: {elapsed:?}"
    );
    pass(
        "criterion 10 (exhaustive Allen agreement on 0..5 endpoints, < 1 s)",
        elapsed,
    );
}

#[test]
fn c11_trace_determinism() {
    let start = Instant::now();
    for scenario in ["decline", "fulfill", "reject-partial", "accept-partial"] {
        let (first, _) = run_scenario(scenario);
        let (second, _) = run_scenario(scenario);
        assert_eq!(
            first.as_bytes(),
            second.as_bytes(),
            "{scenario} not byte-identical"
        );
    }
    pass(
        "criterion 11 (criteria 2-5 traces byte-identical across runs)",
        start.elapsed(),
    );
}

/// Regenerate the golden trace fixtures from the independent interpreter.
/// Run explicitly (`cargo test -p tm-core --test acceptance regen -- --ignored`)
/// and review the diff; the goldens are otherwise frozen.
#[test]
#[ignore]
fn regen_goldens_from_oracle() {
    let pairs = [
        ("decline", "fixtures/golden/inventory_decline.jsonl"),
        ("fulfill", "fixtures/golden/inventory_fulfill.jsonl"),
        (
            "reject-partial",
            "fixtures/golden/inventory_reject_partial.jsonl",
        ),
        (
            "accept-partial",
            "fixtures/golden/inventory_accept_partial.jsonl",
        ),
    ];
    for (scenario, path) in pairs {
        let text = oracle_scenario(scenario);
        std::fs::write(path, text).expect("write golden");
    }
}
