//! Batched event detection over record streams.
//!
//! A record is the set of triples sharing one subject. Records are grouped
//! into batches of `batch_size`; every active rule body is evaluated against
//! each batch and every satisfying (rule, subject) pair becomes one [`Event`].
//! Rules can be deployed and removed from any thread while a stream runs;
//! changes become visible at the next batch boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::rules::{evaluate_body, ser_bindings, Atom, Bindings, EvalError, Rule, RuleError};
use crate::store::{Graph, Iri, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BatchConfig {
    pub batch_size: usize,
    pub delay_ms: u64,
}

impl BatchConfig {
    pub fn new(batch_size: usize, delay_ms: u64) -> Result<Self, StreamError> {
        if batch_size == 0 {
            return Err(StreamError::ZeroBatchSize);
        }
        Ok(BatchConfig {
            batch_size,
            delay_ms,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub rule: String,
    pub subject: Iri,
    #[serde(serialize_with = "ser_bindings")]
    pub bindings: Bindings,
    pub batch_no: usize,
    /// Microseconds since the engine was created.
    pub detected_at_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub batch_no: usize,
    pub size: usize,
    pub rules_parsed: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StreamSummary {
    pub batches: Vec<BatchStats>,
    pub events: Vec<Event>,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StreamSummary {
    /// Events as (rule, subject) pairs, which is what partition
    /// independence is stated over.
    pub fn event_keys(&self) -> BTreeSet<(String, Iri)> {
        self.events
            .iter()
            .map(|e| (e.rule.clone(), e.subject.clone()))
            .collect()
    }

    pub fn total_elapsed_ms(&self) -> f64 {
        self.batches.iter().map(|b| b.elapsed_ms).sum()
    }
}

/// Receives events as they are detected. A failing sink aborts the stream.
pub trait EventSink {
    fn emit(&mut self, event: &Event) -> io::Result<()>;

    fn batch_done(&mut self, _stats: &BatchStats) -> io::Result<()> {
        Ok(())
    }
}

impl EventSink for () {
    fn emit(&mut self, _event: &Event) -> io::Result<()> {
        Ok(())
    }
}

/// One JSON object per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        JsonLinesSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for JsonLinesSink<W> {
    fn emit(&mut self, event: &Event) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, event)?;
        self.out.write_all(b"\n")
    }

    fn batch_done(&mut self, _stats: &BatchStats) -> io::Result<()> {
        self.out.flush()
    }
}

/// Shared handle to an active rule set. Cloning gives another handle to
/// the same engine.
#[derive(Clone)]
pub struct StreamEngine {
    rules: Arc<Mutex<Vec<Rule>>>,
    epoch: Instant,
}

impl Default for StreamEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamEngine {
    pub fn new() -> Self {
        StreamEngine {
            rules: Arc::new(Mutex::new(Vec::new())),
            epoch: Instant::now(),
        }
    }

    pub fn with_rules(rules: Vec<Rule>) -> Result<Self, StreamError> {
        let engine = Self::new();
        for rule in rules {
            engine.deploy_rule(rule)?;
        }
        Ok(engine)
    }

    /// Activates `rule`, replacing any active rule of the same name.
    /// Returns the wall time from request until the rule is active.
    pub fn deploy_rule(&self, rule: Rule) -> Result<Duration, RuleError> {
        let start = Instant::now();
        rule.validate()?;
        let mut rules = self.lock();
        match rules.iter_mut().find(|r| r.name == rule.name) {
            Some(slot) => *slot = rule,
            None => rules.push(rule),
        }
        drop(rules);
        Ok(start.elapsed())
    }

    pub fn undeploy_rule(&self, name: &str) -> bool {
        let mut rules = self.lock();
        let before = rules.len();
        rules.retain(|r| r.name != name);
        rules.len() != before
    }

    pub fn active_rules(&self) -> Vec<Rule> {
        self.lock().clone()
    }

    pub fn active_names(&self) -> Vec<String> {
        self.lock().iter().map(|r| r.name.clone()).collect()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Vec<Rule>> {
        // A panic while holding the lock cannot leave the Vec half-updated.
        self.rules.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Streams `records` in batches of `config.batch_size`. The active rule
    /// set is snapshotted at the start of every batch.
    pub fn run_stream<I, S>(
        &self,
        records: I,
        config: BatchConfig,
        sink: &mut S,
    ) -> Result<StreamSummary, StreamError>
    where
        I: IntoIterator<Item = Graph>,
        S: EventSink + ?Sized,
    {
        let mut summary = StreamSummary::default();
        let mut pending: Vec<Graph> = Vec::with_capacity(config.batch_size);
        let mut records = records.into_iter().peekable();
        let mut batch_no = 0;
        while records.peek().is_some() {
            pending.clear();
            pending.extend(records.by_ref().take(config.batch_size));
            if batch_no > 0 && config.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(config.delay_ms));
            }
            batch_no += 1;
            if let Err(e) = self.process_batch(batch_no, &pending, sink, &mut summary) {
                match e {
                    BatchFailure::Sink(err) => {
                        summary.error = Some(format!("sink failed in batch {batch_no}: {err}"));
                        return Ok(summary);
                    }
                    BatchFailure::Eval(err) => return Err(err.into()),
                }
            }
        }
        summary.complete = true;
        Ok(summary)
    }

    fn process_batch<S: EventSink + ?Sized>(
        &self,
        batch_no: usize,
        records: &[Graph],
        sink: &mut S,
        summary: &mut StreamSummary,
    ) -> Result<(), BatchFailure> {
        let start = Instant::now();
        let rules = self.active_rules();
        let mut batch = Graph::new();
        for record in records {
            batch.extend(record.iter());
        }
        let mut rules_parsed = 0;
        for rule in &rules {
            let events = detect(rule, &batch).map_err(BatchFailure::Eval)?;
            if !events.is_empty() {
                rules_parsed += 1;
            }
            for (subject, bindings) in events {
                let event = Event {
                    rule: rule.name.clone(),
                    subject,
                    bindings,
                    batch_no,
                    detected_at_us: self.epoch.elapsed().as_micros() as u64,
                };
                sink.emit(&event).map_err(BatchFailure::Sink)?;
                summary.events.push(event);
            }
        }
        let stats = BatchStats {
            batch_no,
            size: records.len(),
            rules_parsed,
            elapsed_ms: start.elapsed().as_secs_f64() * 1000.0,
        };
        let result = sink.batch_done(&stats);
        summary.batches.push(stats);
        result.map_err(BatchFailure::Sink)
    }
}

enum BatchFailure {
    Sink(io::Error),
    Eval(EvalError),
}

/// The variable an event is keyed on: the subject of the first class or
/// property atom in the body.
fn subject_var(rule: &Rule) -> Option<&str> {
    rule.body.iter().find_map(|atom| match atom {
        Atom::Class { arg, .. } => arg.as_var(),
        Atom::Property { subject, .. } => subject.as_var(),
        Atom::Builtin { .. } => None,
    })
}

/// One (subject, bindings) pair per distinct subject satisfying the body.
/// The first binding in canonical order is kept when several exist.
pub fn detect(rule: &Rule, graph: &Graph) -> Result<Vec<(Iri, Bindings)>, EvalError> {
    let Some(var) = subject_var(rule) else {
        return Ok(Vec::new());
    };
    let mut found: BTreeMap<Iri, Bindings> = BTreeMap::new();
    for b in evaluate_body(graph, &rule.body, &Bindings::new())? {
        if let Some(Term::Iri(subject)) = b.get(var) {
            match found.get(subject) {
                Some(existing) if existing <= &b => {}
                _ => {
                    found.insert(subject.clone(), b);
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Events from evaluating every rule over `graph` in one pass.
pub fn detect_all(rules: &[Rule], graph: &Graph) -> Result<BTreeSet<(String, Iri)>, EvalError> {
    let mut out = BTreeSet::new();
    for rule in rules {
        for (subject, _) in detect(rule, graph)? {
            out.insert((rule.name.clone(), subject));
        }
    }
    Ok(out)
}

/// Splits a graph into one record per subject, ordered so that numeric
/// suffixes sort numerically (`uid/2` before `uid/10`).
pub fn split_records(graph: &Graph) -> Vec<Graph> {
    let mut by_subject: BTreeMap<Iri, Graph> = BTreeMap::new();
    for t in graph.iter() {
        by_subject.entry(t.subject.clone()).or_default().insert(t);
    }
    let mut records: Vec<(Iri, Graph)> = by_subject.into_iter().collect();
    records.sort_by(|(a, _), (b, _)| natural_key(a.as_str()).cmp(&natural_key(b.as_str())));
    records.into_iter().map(|(_, g)| g).collect()
}

fn natural_key(s: &str) -> (&str, Option<u64>, &str) {
    let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, tail) = s.split_at(s.len() - digits);
    (head, tail.parse().ok(), s)
}

/// Timing for one sweep cell: one value per run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub batch_size: usize,
    pub rule_count: usize,
    pub mean_ms: f64,
    pub runs_ms: Vec<f64>,
}

/// A completed run tagged with the sweep cell it belongs to.
#[derive(Debug, Clone)]
pub struct TimedRun {
    pub batch_size: usize,
    pub rule_count: usize,
    pub summary: StreamSummary,
}

/// Mean processing time per batch for a run. The trailing partial batch is
/// left out unless it is the only one, so every value measures the same
/// amount of work.
pub fn per_batch_ms(summary: &StreamSummary, batch_size: usize) -> f64 {
    let full: Vec<f64> = summary
        .batches
        .iter()
        .filter(|b| b.size == batch_size)
        .map(|b| b.elapsed_ms)
        .collect();
    let values = if full.is_empty() {
        summary.batches.iter().map(|b| b.elapsed_ms).collect()
    } else {
        full
    };
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Groups runs by (batch size, rule count), first-seen order.
pub fn timing_report(runs: &[TimedRun]) -> Vec<TimingRow> {
    let mut rows: Vec<TimingRow> = Vec::new();
    for run in runs {
        let ms = per_batch_ms(&run.summary, run.batch_size);
        match rows
            .iter_mut()
            .find(|r| r.batch_size == run.batch_size && r.rule_count == run.rule_count)
        {
            Some(row) => row.runs_ms.push(ms),
            None => rows.push(TimingRow {
                batch_size: run.batch_size,
                rule_count: run.rule_count,
                mean_ms: 0.0,
                runs_ms: vec![ms],
            }),
        }
    }
    for row in &mut rows {
        row.mean_ms = row.runs_ms.iter().sum::<f64>() / row.runs_ms.len() as f64;
    }
    rows
}

pub const SWEEP_BATCH_SIZES: [usize; 5] = [20, 40, 60, 80, 100];
pub const SWEEP_FIXED_RULES: usize = 5;
pub const SWEEP_RULE_COUNTS: [usize; 5] = [4, 6, 8, 10, 12];
pub const SWEEP_FIXED_BATCH: usize = 50;

/// Runs each (batch size, rule count) cell `runs` times with no delay.
/// Rule subsets are prefixes of `pool`, cycled with renamed copies if the
/// pool is shorter than the requested count.
pub fn sweep(
    records: &[Graph],
    pool: &[Rule],
    cells: &[(usize, usize)],
    runs: usize,
) -> Result<Vec<TimedRun>, StreamError> {
    let mut out = Vec::new();
    for &(batch_size, rule_count) in cells {
        let config = BatchConfig::new(batch_size, 0)?;
        let engine = StreamEngine::with_rules(rule_subset(pool, rule_count))?;
        for _ in 0..runs {
            let summary = engine.run_stream(records.iter().cloned(), config, &mut ())?;
            out.push(TimedRun {
                batch_size,
                rule_count,
                summary,
            });
        }
    }
    Ok(out)
}

pub fn batch_size_cells() -> Vec<(usize, usize)> {
    SWEEP_BATCH_SIZES
        .iter()
        .map(|&b| (b, SWEEP_FIXED_RULES))
        .collect()
}

pub fn rule_count_cells() -> Vec<(usize, usize)> {
    SWEEP_RULE_COUNTS
        .iter()
        .map(|&n| (SWEEP_FIXED_BATCH, n))
        .collect()
}

fn rule_subset(pool: &[Rule], count: usize) -> Vec<Rule> {
    if pool.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|i| {
            let mut rule = pool[i % pool.len()].clone();
            if i >= pool.len() {
                rule.name = format!("{}_{}", rule.name, i / pool.len());
            }
            rule
        })
        .collect()
}

/// CSV with one column per sweep cell and one row per run, e.g.
/// `Batches,Batch Size 20 (5 Rules),...`.
pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Batches".to_string()];
    header.extend(
        rows.iter()
            .map(|r| format!("Batch Size {} ({} Rules)", r.batch_size, r.rule_count)),
    );
    // Writing into a Vec cannot fail.
    w.write_record(&header).expect("in-memory csv");
    let n_runs = rows.iter().map(|r| r.runs_ms.len()).max().unwrap_or(0);
    for run in 0..n_runs {
        let mut line = vec![(run + 1).to_string()];
        line.extend(rows.iter().map(|r| {
            r.runs_ms
                .get(run)
                .map(|ms| format!("{ms:.3}"))
                .unwrap_or_default()
        }));
        w.write_record(&line).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

/// Per-batch table: batch number, size, rules parsed, elapsed ms.
pub fn batch_table_csv(summary: &StreamSummary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Batch No.", "Batch Size", "Rules Parsed", "Time (ms)"])
        .expect("in-memory csv");
    for b in &summary.batches {
        w.write_record([
            b.batch_no.to_string(),
            b.size.to_string(),
            b.rules_parsed.to_string(),
            format!("{:.3}", b.elapsed_ms),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

/// Deployment latency under concurrent load: while a stream worker runs
/// over `records` with the given rules, deploys and removes `probe` `times`
/// times from this thread and returns each deployment duration. With an
/// empty record list this measures the idle case.
pub fn measure_deployments(
    base_rules: Vec<Rule>,
    records: &[Graph],
    batch_size: usize,
    probe: &Rule,
    times: usize,
) -> Result<Vec<Duration>, StreamError> {
    let engine = StreamEngine::with_rules(base_rules)?;
    let config = BatchConfig::new(batch_size, 0)?;
    std::thread::scope(|scope| {
        let worker = {
            let engine = engine.clone();
            scope.spawn(move || engine.run_stream(records.iter().cloned(), config, &mut ()))
        };
        let mut out = Vec::with_capacity(times);
        for _ in 0..times {
            out.push(engine.deploy_rule(probe.clone())?);
            engine.undeploy_rule(&probe.name);
        }
        worker.join().expect("stream worker panicked")?;
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse_rule;
    use crate::store::{iri, Literal, Triple};
    use crate::vocab::ONTO;

    fn record(id: usize, value: i64) -> Graph {
        let s = iri(&format!("http://example.org/r/{id}"));
        let mut g = Graph::new();
        g.insert(Triple::new(
            s.clone(),
            iri(&format!("{ONTO}value")),
            Literal::integer(value),
        ));
        g.insert(Triple::new(
            s,
            crate::store::rdf_type(),
            iri(&format!("{ONTO}Patient")),
        ));
        g
    }

    fn high() -> Rule {
        parse_rule("high: Patient(?p) ^ value(?p, ?v) ^ swrlb:greaterThan(?v, 50) -> High(?p)")
            .unwrap()
    }

    fn low() -> Rule {
        parse_rule("low: Patient(?p) ^ value(?p, ?v) ^ swrlb:lessThanOrEqualTo(?v, 50) -> Low(?p)")
            .unwrap()
    }

    #[test]
    fn empty_source_has_no_batches() {
        let engine = StreamEngine::with_rules(vec![high()]).unwrap();
        let s = engine
            .run_stream(Vec::new(), BatchConfig::new(10, 0).unwrap(), &mut ())
            .unwrap();
        assert!(s.batches.is_empty() && s.events.is_empty() && s.complete);
    }

    #[test]
    fn zero_batch_size_rejected() {
        assert!(matches!(
            BatchConfig::new(0, 0),
            Err(StreamError::ZeroBatchSize)
        ));
    }

    #[test]
    fn trailing_partial_batch_is_last() {
        let records: Vec<Graph> = (1..=615).map(|i| record(i, i as i64 % 100)).collect();
        let engine = StreamEngine::with_rules(vec![high(), low()]).unwrap();
        let s = engine
            .run_stream(records, BatchConfig::new(10, 0).unwrap(), &mut ())
            .unwrap();
        assert_eq!(s.batches.len(), 62);
        assert!(s.batches[..61].iter().all(|b| b.size == 10));
        assert_eq!(s.batches[61].size, 5);
        assert_eq!(s.batches[61].batch_no, 62);
        assert_eq!(s.events.len(), 615);
    }

    #[test]
    fn rules_parsed_counts_rules_with_events() {
        let records = vec![record(1, 10), record(2, 20)];
        let engine = StreamEngine::with_rules(vec![high(), low()]).unwrap();
        let s = engine
            .run_stream(records, BatchConfig::new(5, 0).unwrap(), &mut ())
            .unwrap();
        assert_eq!(s.batches[0].rules_parsed, 1);
    }

    #[test]
    fn deploy_replaces_same_name_and_rejects_invalid() {
        let engine = StreamEngine::new();
        engine.deploy_rule(high()).unwrap();
        engine.deploy_rule(high()).unwrap();
        assert_eq!(engine.active_names(), vec!["high"]);
        let mut bad = high();
        bad.name = "bad".into();
        bad.head = vec![Atom::Class {
            class: iri(&format!("{ONTO}High")),
            arg: crate::rules::Arg::var("q"),
        }];
        assert!(engine.deploy_rule(bad).is_err());
        assert_eq!(engine.active_names(), vec!["high"]);
        assert!(!engine.undeploy_rule("missing"));
        assert!(engine.undeploy_rule("high"));
        assert!(engine.active_names().is_empty());
    }

    struct Deployer {
        engine: StreamEngine,
        after_batch: usize,
    }

    impl EventSink for Deployer {
        fn emit(&mut self, _event: &Event) -> io::Result<()> {
            Ok(())
        }
        fn batch_done(&mut self, stats: &BatchStats) -> io::Result<()> {
            if stats.batch_no == self.after_batch {
                self.engine.deploy_rule(low()).unwrap();
                self.engine.undeploy_rule("high");
            }
            Ok(())
        }
    }

    #[test]
    fn deploy_takes_effect_at_next_batch() {
        let records: Vec<Graph> = (1..=40).map(|i| record(i, (i as i64 * 7) % 100)).collect();
        let engine = StreamEngine::with_rules(vec![high()]).unwrap();
        let mut sink = Deployer {
            engine: engine.clone(),
            after_batch: 2,
        };
        let s = engine
            .run_stream(records, BatchConfig::new(10, 0).unwrap(), &mut sink)
            .unwrap();
        assert!(s
            .events
            .iter()
            .filter(|e| e.rule == "low")
            .all(|e| e.batch_no >= 3));
        assert!(s
            .events
            .iter()
            .filter(|e| e.rule == "high")
            .all(|e| e.batch_no <= 2));
        assert!(s.events.iter().any(|e| e.rule == "low"));
        assert!(s.events.iter().any(|e| e.rule == "high"));
    }

    struct Failing;

    impl EventSink for Failing {
        fn emit(&mut self, _event: &Event) -> io::Result<()> {
            Err(io::Error::new(io::ErrorKind::BrokenPipe, "closed"))
        }
    }

    #[test]
    fn sink_failure_gives_incomplete_summary() {
        let engine = StreamEngine::with_rules(vec![high()]).unwrap();
        let s = engine
            .run_stream(
                vec![record(1, 90)],
                BatchConfig::new(1, 0).unwrap(),
                &mut Failing,
            )
            .unwrap();
        assert!(!s.complete);
        assert!(s.error.unwrap().contains("batch 1"));
    }

    #[test]
    fn json_lines_sink_writes_one_line_per_event() {
        let engine = StreamEngine::with_rules(vec![high(), low()]).unwrap();
        let mut sink = JsonLinesSink::new(Vec::new());
        let s = engine
            .run_stream(
                vec![record(1, 90), record(2, 10)],
                BatchConfig::new(1, 0).unwrap(),
                &mut sink,
            )
            .unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        assert_eq!(text.lines().count(), s.events.len());
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["rule"], "high");
        assert_eq!(first["bindings"]["v"], "90");
    }

    #[test]
    fn delay_is_not_counted() {
        let engine = StreamEngine::with_rules(vec![high()]).unwrap();
        let records: Vec<Graph> = (1..=3).map(|i| record(i, 60)).collect();
        let s = engine
            .run_stream(records, BatchConfig::new(1, 30).unwrap(), &mut ())
            .unwrap();
        assert!(s.total_elapsed_ms() < 30.0, "{}", s.total_elapsed_ms());
    }

    #[test]
    fn split_records_uses_numeric_order() {
        let mut g = Graph::new();
        for i in [10, 2, 1] {
            g.extend(record(i, 1).iter());
        }
        let subjects: Vec<String> = split_records(&g)
            .iter()
            .map(|r| r.subjects()[0].as_str().to_string())
            .collect();
        assert_eq!(
            subjects,
            [
                "http://example.org/r/1",
                "http://example.org/r/2",
                "http://example.org/r/10"
            ]
        );
    }

    #[test]
    fn report_and_csv_layout() {
        let records: Vec<Graph> = (1..=30).map(|i| record(i, i as i64)).collect();
        let runs = sweep(&records, &[high(), low()], &[(10, 2), (20, 3)], 2).unwrap();
        let rows = timing_report(&runs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].rule_count, 3);
        assert!(rows.iter().all(|r| r.runs_ms.len() == 2));
        let csv = timing_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Batches,Batch Size 10 (2 Rules),Batch Size 20 (3 Rules)"
        );
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn single_run_gives_one_row() {
        let engine = StreamEngine::with_rules(vec![high()]).unwrap();
        let summary = engine
            .run_stream(
                vec![record(1, 99)],
                BatchConfig::new(4, 0).unwrap(),
                &mut (),
            )
            .unwrap();
        let rows = timing_report(&[TimedRun {
            batch_size: 4,
            rule_count: 1,
            summary,
        }]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].runs_ms.len(), 1);
    }

    #[test]
    fn deployments_measured_idle_and_loaded() {
        let records: Vec<Graph> = (1..=200).map(|i| record(i, i as i64 % 100)).collect();
        let idle = measure_deployments(vec![high()], &[], 10, &low(), 5).unwrap();
        let loaded = measure_deployments(vec![high()], &records, 10, &low(), 5).unwrap();
        assert_eq!(idle.len(), 5);
        assert_eq!(loaded.len(), 5);
    }
}
