use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};

use liverkg::ingest::{record_uid, records_to_graph, Category, EncodedRecord, Lab, LabValues, Sex};
use liverkg::rules::builtin::event_rules;
use liverkg::rules::{parse_rule, Rule};
use liverkg::store::Graph;
use liverkg::stream::{detect_all, split_records, BatchConfig, BatchStats, Event, EventSink, StreamEngine};
use liverkg::vocab::{RECORD_BASE, SCHEMA};
use proptest::prelude::*;

fn labs() -> impl Strategy<Value = LabValues> {
    // ALB ALP ALT AST BIL CHE CHOL CREA GGT PROT
    (20.0..50.0f64, 20.0..120.0f64, 0.0..20.0f64, 10.0..60.0f64, 0.0..30.0f64, 5.0..60.0f64, 60.0..140.0f64)
        .prop_map(|(alb, alp, alt, ast, bil, ggt, prot)| {
            LabValues::new([alb, alp, alt, ast, bil, 8.0, 5.0, 80.0, ggt, prot])
        })
}

fn records() -> impl Strategy<Value = Graph> {
    prop::collection::vec((labs(), 20u32..80, any::<bool>()), 1..60).prop_map(|rows| {
        let encoded: Vec<EncodedRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (labs, age, male))| EncodedRecord {
                uid: record_uid(RECORD_BASE, i as u32 + 1).unwrap(),
                row_id: i as u32 + 1,
                category: Category::BloodDonor,
                sex: if male { Sex::Male } else { Sex::Female },
                age,
                labs,
            })
            .collect();
        records_to_graph(&encoded, SCHEMA).unwrap()
    })
}

fn threshold_rule() -> impl Strategy<Value = Rule> {
    (prop::sample::select(Lab::ALL.to_vec()), any::<bool>(), 0u32..100).prop_map(|(lab, gt, t)| {
        let op = if gt { "greaterThan" } else { "lessThanOrEqualTo" };
        parse_rule(&format!(
            "t: schema:MedicalRecord(?r) ^ schema:{lab}(?r, ?v) ^ swrlb:{op}(?v, {t}) -> Flagged(?r)",
            lab = lab.name()
        ))
        .unwrap()
    })
}

fn rule_set() -> impl Strategy<Value = Vec<Rule>> {
    (
        prop::sample::subsequence(event_rules(), 0..=12),
        prop::collection::vec(threshold_rule(), 0..4),
    )
        .prop_map(|(mut rules, extra)| {
            for (i, mut r) in extra.into_iter().enumerate() {
                r.name = format!("threshold_{i}");
                rules.push(r);
            }
            rules
        })
        .prop_filter("at least one rule", |r| !r.is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn events_match_whole_graph_evaluation(g in records(), rules in rule_set(), size in 1usize..25) {
        let expected = detect_all(&rules, &g).unwrap();
        let engine = StreamEngine::with_rules(rules).unwrap();
        let records = split_records(&g);
        let n = records.len();
        let summary = engine.run_stream(records, BatchConfig::new(size, 0).unwrap(), &mut ()).unwrap();
        prop_assert!(summary.complete);
        prop_assert_eq!(summary.batches.len(), n.div_ceil(size));
        prop_assert_eq!(summary.batches.iter().map(|b| b.size).sum::<usize>(), n);
        prop_assert_eq!(summary.events.len(), expected.len());
        prop_assert_eq!(summary.event_keys(), expected);
    }

    #[test]
    fn batch_size_does_not_change_events(g in records(), rules in rule_set(), a in 1usize..30, b in 1usize..30) {
        let engine = StreamEngine::with_rules(rules).unwrap();
        let run = |size| {
            engine
                .run_stream(split_records(&g), BatchConfig::new(size, 0).unwrap(), &mut ())
                .unwrap()
                .event_keys()
        };
        prop_assert_eq!(run(a), run(b));
    }
}

fn fixed_records(n: u32) -> Graph {
    let encoded: Vec<EncodedRecord> = (1..=n)
        .map(|i| EncodedRecord {
            uid: record_uid(RECORD_BASE, i).unwrap(),
            row_id: i,
            category: Category::BloodDonor,
            sex: Sex::Female,
            age: 30 + i,
            labs: LabValues::new([40.0, 70.0, 25.0, 30.0, 8.0, 8.0, 5.0, 80.0, 25.0, 72.0]),
        })
        .collect();
    records_to_graph(&encoded, SCHEMA).unwrap()
}

/// Deploys a rule right after the first batch completes.
struct DeployAfterFirst {
    engine: StreamEngine,
    rule: Rule,
    events: Vec<Event>,
}

impl EventSink for DeployAfterFirst {
    fn emit(&mut self, event: &Event) -> io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }

    fn batch_done(&mut self, stats: &BatchStats) -> io::Result<()> {
        if stats.batch_no == 1 {
            self.engine.deploy_rule(self.rule.clone()).unwrap();
        }
        Ok(())
    }
}

#[test]
fn deployed_rule_applies_from_the_next_batch() {
    let g = fixed_records(23);
    let records = split_records(&g);
    let always = parse_rule("all: schema:MedicalRecord(?r) -> Seen(?r)").unwrap();
    let engine = StreamEngine::new();
    let mut sink = DeployAfterFirst {
        engine: engine.clone(),
        rule: always,
        events: Vec::new(),
    };
    let n = records.len();
    let summary = engine
        .run_stream(records, BatchConfig::new(5, 0).unwrap(), &mut sink)
        .unwrap();
    assert!(summary.complete);
    assert!(sink.events.iter().all(|e| e.batch_no > 1));
    assert_eq!(sink.events.len(), n.saturating_sub(5));
    assert_eq!(engine.active_names(), ["all"]);
    assert!(engine.undeploy_rule("all"));
    assert!(engine.active_names().is_empty());
}

/// Fails on the n-th event.
struct Flaky(AtomicUsize);

impl EventSink for Flaky {
    fn emit(&mut self, _event: &Event) -> io::Result<()> {
        if self.0.fetch_sub(1, Ordering::SeqCst) == 1 {
            return Err(io::Error::other("disk full"));
        }
        Ok(())
    }
}

#[test]
fn failing_sink_stops_the_stream_with_partial_summary() {
    let g = fixed_records(10);
    let always = parse_rule("all: schema:MedicalRecord(?r) -> Seen(?r)").unwrap();
    let engine = StreamEngine::with_rules(vec![always]).unwrap();
    let records = split_records(&g);
    let mut sink = Flaky(AtomicUsize::new(3));
    let summary = engine
        .run_stream(records, BatchConfig::new(1, 0).unwrap(), &mut sink)
        .unwrap();
    assert!(!summary.complete);
    assert_eq!(summary.error.as_deref(), Some("sink failed in batch 3: disk full"));
}
