//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria that need the UCI HCV CSV read it from `HCV_CSV` or
//! `data/hcvdat0.csv` at the workspace root. Without it they print FAIL
//! with a note; the run only exits non-zero for those when
//! `ACCEPTANCE_STRICT=1`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use liverkg::dss::{
    parse_report, plan_treatment, Diagnosis, PatientRecord, ReportFacts,
    SessionState, TREATMENT_WEEKS,
};
use liverkg::dtree::{
    cross_validate, default_class_heads, default_feature_properties, fit, paths_to_rules,
    Criterion, Dataset, Node, TrainConfig,
};
use liverkg::ingest::{
    encode_csv, record_uid, records_to_graph, Category, EncodedRecord, LabValues, Sex,
};
use liverkg::ontology::{compute_metrics, load_schema, MetricCounts, OntologyMetrics};
use liverkg::rules::builtin::{diagnostic_rules, event_rules};
use liverkg::rules::{
    infer, naive_infer, parse_rule, parse_rules, serialize_rule, serialize_rules, Arg, Atom,
    BuiltinOp, Rule,
};
use liverkg::sparql::{
    evaluate, run, Filter, FilterOp, Order, PatternTerm, Query, QueryError, TriplePattern,
    RECORD_QUERY,
};
use liverkg::store::{parse_ntriples, rdf_type, serialize_ntriples, Graph, Iri, Literal, Term, Triple};
use liverkg::stream::{
    batch_size_cells, detect_all, rule_count_cells, split_records, sweep, timing_report,
    BatchConfig, StreamEngine,
};
use liverkg::vocab::{ONTO, RECORD_BASE, SCHEMA};
use liverkg_service::{graph_id, DataDir, SessionSlot};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROUND_TRIP_CASES: u32 = 500;
const GINI_ACCURACY: f64 = 0.9331;
const ENTROPY_ACCURACY: f64 = 0.9302;
const ACCURACY_TOLERANCE: f64 = 0.03;
const TRAIN_BUDGET: Duration = Duration::from_secs(10);
const SPEARMAN_MIN: f64 = 0.9;
const SWEEP_RUNS: usize = 5;

enum Status {
    Pass,
    Fail,
    NoData,
}

struct Outcome {
    status: Status,
    note: String,
}

impl Outcome {
    fn check(ok: bool, note: impl Into<String>) -> Self {
        Outcome {
            status: if ok { Status::Pass } else { Status::Fail },
            note: note.into(),
        }
    }

    fn no_data(note: impl Into<String>) -> Self {
        Outcome {
            status: Status::NoData,
            note: note.into(),
        }
    }
}

const NO_DATA: &str = "dataset not available (set HCV_CSV)";

fn dataset_text() -> Option<String> {
    let path = std::env::var_os("HCV_CSV").map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/hcvdat0.csv")
    });
    std::fs::read_to_string(path).ok()
}

fn onto(local: &str) -> Iri {
    Iri::new(format!("{ONTO}{local}")).unwrap()
}

fn node(i: u8) -> Iri {
    Iri::new(format!("http://example.org/n/{i}")).unwrap()
}

fn pred(i: u8) -> Iri {
    Iri::new(format!("http://example.org/p#{i}")).unwrap()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

// ---- decision tree ----

fn tree_accuracy(csv: Option<&str>) -> Outcome {
    let Some(csv) = csv else { return Outcome::no_data(NO_DATA) };
    let records = match encode_csv(csv, RECORD_BASE) {
        Ok(r) => r,
        Err(e) => return Outcome::check(false, format!("ingest failed: {e}")),
    };
    let data = Dataset::from_records(&records);
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = records.len() == 615;
    for (criterion, target) in [(Criterion::Gini, GINI_ACCURACY), (Criterion::Entropy, ENTROPY_ACCURACY)] {
        let config = TrainConfig { criterion, ..TrainConfig::default() };
        match cross_validate(&data, &config, 10) {
            Ok(m) => {
                ok &= (m.accuracy - target).abs() <= ACCURACY_TOLERANCE;
                notes.push(format!("{criterion} {:.2}% (target {:.2}% ± 3 pp)", m.accuracy * 100.0, target * 100.0));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{criterion}: {e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < TRAIN_BUDGET;
    notes.push(format!("{} records, {:.2} s", records.len(), elapsed.as_secs_f64()));
    Outcome::check(ok, notes.join("; "))
}

fn row_graph(features: &[String], row: &[f64], map: &BTreeMap<String, Iri>) -> Graph {
    let x = node(0);
    let mut g = Graph::new();
    g.insert(Triple::new(x.clone(), rdf_type(), onto("Patient")));
    for (f, v) in features.iter().zip(row) {
        g.insert(Triple::new(x.clone(), map[f].clone(), Literal::double(*v)));
    }
    g
}

fn tree_root(csv: Option<&str>) -> Outcome {
    let Some(csv) = csv else { return Outcome::no_data(NO_DATA) };
    let records = match encode_csv(csv, RECORD_BASE) {
        Ok(r) => r,
        Err(e) => return Outcome::check(false, format!("ingest failed: {e}")),
    };
    let data = Dataset::from_records(&records);
    let tree = match fit(&data, &TrainConfig::default()) {
        Ok(t) => t,
        Err(e) => return Outcome::check(false, e.to_string()),
    };
    let root = match &tree.root {
        Node::Internal { feature, threshold, .. } => format!("{} <= {threshold}", tree.features[*feature]),
        Node::Leaf { .. } => "leaf".to_string(),
    };
    let root_ok = root.starts_with("AST <= ");
    let features = default_feature_properties();
    let heads = default_class_heads();
    let rules = match paths_to_rules(&tree.extract_paths(), &features, &heads) {
        Ok(r) => r,
        Err(e) => return Outcome::check(false, e.to_string()),
    };
    let mut mismatches = 0;
    for row in &data.rows {
        let g = row_graph(&tree.features, row, &features);
        let derived = infer(&g, &rules).map(|i| i.derived.matches(Some(&node(0)), None, None));
        let want = tree.predict(row).map(|c| {
            vec![Triple::new(node(0), heads[&c].clone(), Term::Literal(Literal::boolean(true)))]
        });
        if derived.ok() != want.ok() {
            mismatches += 1;
        }
    }
    Outcome::check(
        root_ok && mismatches == 0,
        format!("root split {root}; {} rules, {mismatches} rule/tree mismatches over {} records", rules.len(), data.len()),
    )
}

// ---- rules ----

const HEPC_RULE: &str = r#"hepc_path: Patient(?x) ^ hasValueAST(?x, ?ast) ^ swrlb:lessThanOrEqualTo(?ast, "53.05"^^xsd:float) ^ hasValueALP(?x, ?alp) ^ swrlb:lessThanOrEqualTo(?alp, "52.3"^^xsd:float) ^ hasValueBIL(?x, ?bil) ^ swrlb:lessThanOrEqualTo(?bil, "11.0"^^xsd:float) ^ hasValueALT(?x, ?alt) ^ swrlb:lessThanOrEqualTo(?alt, "9.25"^^xsd:float) -> isHepatitisCpatient(?x, true)"#;
const HEALTHY_RULE: &str = r#"healthy_path: Patient(?x) ^ hasValueAST(?x, ?ast) ^ swrlb:lessThanOrEqualTo(?ast, "53.05"^^xsd:float) ^ hasValueALB(?x, ?alb) ^ swrlb:greaterThan(?alb, "25.55"^^xsd:float) ^ hasValueALT(?x, ?alt) ^ swrlb:greaterThan(?alt, "9.65"^^xsd:float) ^ hasValueALP(?x, ?alp) ^ swrlb:greaterThan(?alp, "28.2"^^xsd:float) -> isHealthy(?x, true)"#;

fn lab_record(uid: &str, values: &[(&str, f64)]) -> Graph {
    let x = Iri::new(format!("{RECORD_BASE}patient/{uid}")).unwrap();
    let mut g = Graph::new();
    g.insert(Triple::new(x.clone(), rdf_type(), onto("Patient")));
    for (lab, v) in values {
        g.insert(Triple::new(x.clone(), onto(&format!("hasValue{lab}")), Literal::float(*v)));
    }
    g
}

fn derives(graph: &Graph, rules: &[Rule], head: &str) -> bool {
    let x = graph.subjects()[0].clone();
    infer(graph, rules)
        .map(|i| i.derived.contains(&Triple::new(x, onto(head), Literal::boolean(true))))
        .unwrap_or(false)
}

const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn op() -> impl Strategy<Value = BuiltinOp> {
    prop::sample::select(vec![
        BuiltinOp::LessThan,
        BuiltinOp::LessThanOrEqualTo,
        BuiltinOp::GreaterThan,
        BuiltinOp::GreaterThanOrEqualTo,
        BuiltinOp::Equal,
    ])
}

fn chain_graph() -> impl Strategy<Value = Graph> {
    let edge = (0u8..6, 0u8..2, 0u8..6)
        .prop_map(|(s, p, o)| Triple::new(node(s), onto(&format!("e{p}")), node(o)));
    let class = (0u8..6, 0u8..2).prop_map(|(s, c)| Triple::new(node(s), rdf_type(), onto(&format!("C{c}"))));
    let value = (0u8..6, 0i64..10).prop_map(|(s, v)| Triple::new(node(s), onto("val"), Literal::integer(v)));
    prop::collection::vec(prop_oneof![3 => edge, 1 => class, 1 => value], 0..25).prop_map(|ts| {
        let mut g = Graph::new();
        g.extend(ts);
        g
    })
}

fn chain_atom(head: bool) -> impl Strategy<Value = Atom> {
    let n = if head { 3 } else { 2 };
    let v = || prop::sample::select(&VARS[..3]).prop_map(Arg::var);
    prop_oneof![
        (0..n, v()).prop_map(|(c, arg)| Atom::Class { class: onto(&format!("C{c}")), arg }),
        (0..n, v(), v()).prop_map(|(p, subject, object)| Atom::Property {
            property: onto(&format!("e{p}")),
            subject,
            object
        }),
    ]
}

fn chain_rules() -> impl Strategy<Value = Vec<Rule>> {
    let rule = (
        prop::collection::vec(chain_atom(false), 1..4),
        prop::option::of((prop::sample::select(&VARS[..3]), op(), 0i64..10)),
        prop::collection::vec(chain_atom(true), 1..3),
    )
        .prop_map(|(mut body, filter, head)| {
            if let Some((v, op, bound)) = filter {
                body.push(Atom::Property { property: onto("val"), subject: Arg::var(v), object: Arg::var("w") });
                body.push(Atom::Builtin { op, left: Arg::var("w"), right: Arg::Literal(Literal::integer(bound)) });
            }
            Rule { name: String::new(), body, head }
        })
        .prop_filter("valid rule", |r| r.validate().is_ok());
    prop::collection::vec(rule, 1..5).prop_map(|rules| {
        rules
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.name = format!("r{i}");
                r
            })
            .collect()
    })
}

fn rule_inference() -> Outcome {
    let rules = match parse_rules(&format!("{HEPC_RULE}\n{HEALTHY_RULE}")) {
        Ok(r) => r,
        Err(e) => return Outcome::check(false, format!("parse: {e}")),
    };
    let hepc = lab_record("hepc", &[("AST", 40.0), ("ALP", 50.0), ("BIL", 10.0), ("ALT", 9.0)]);
    let healthy = lab_record("p1208", &[("AST", 22.0), ("ALB", 44.0), ("ALT", 30.0), ("ALP", 70.0)]);
    let hepc_ok = derives(&hepc, &rules, "isHepatitisCpatient");
    let healthy_ok = derives(&healthy, &rules, "isHealthy") && !derives(&healthy, &rules, "isHepatitisCpatient");
    let oracle = property(20, (chain_graph(), chain_rules()), |(g, rules)| {
        let semi = infer(&g, &rules).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let naive = naive_infer(&g, &rules).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(semi.derived.triples(), naive.triples());
        Ok(())
    });
    Outcome::check(
        hepc_ok && healthy_ok && oracle.is_ok(),
        format!(
            "HepC fixture {}, healthy fixture {}, semi-naive vs naive on 20 graphs: {}",
            if hepc_ok { "derives isHepatitisCpatient" } else { "MISSING isHepatitisCpatient" },
            if healthy_ok { "derives isHealthy" } else { "MISSING isHealthy" },
            oracle.err().unwrap_or_else(|| "equal".into())
        ),
    )
}

// ---- SPARQL ----

fn sparql_graph() -> impl Strategy<Value = Graph> {
    let object = prop_oneof![
        (0u8..5).prop_map(|i| Term::Iri(node(i))),
        (0i64..6).prop_map(|i| Term::Literal(Literal::integer(i))),
        (0u8..4).prop_map(|i| Term::Literal(Literal::double(i as f64 * 1.5))),
    ];
    prop::collection::vec((0u8..5, 0u8..3, object), 0..200).prop_map(|ts| {
        let mut g = Graph::new();
        g.extend(ts.into_iter().map(|(s, p, o)| Triple::new(node(s), pred(p), o)));
        g
    })
}

const QVARS: [&str; 4] = ["a", "b", "c", "d"];

fn pattern_vars(patterns: &[TriplePattern]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in patterns {
        for t in [&p.s, &p.p, &p.o] {
            if let PatternTerm::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
    }
    out
}

fn sparql_query() -> impl Strategy<Value = Query> {
    let var = || prop::sample::select(&QVARS[..]).prop_map(|v| PatternTerm::Var(v.to_string()));
    let pattern = (
        prop_oneof![3 => var(), 1 => (0u8..5).prop_map(|i| PatternTerm::Iri(node(i)))],
        prop_oneof![1 => var(), 3 => (0u8..3).prop_map(|i| PatternTerm::Iri(pred(i)))],
        prop_oneof![
            3 => var(),
            1 => (0u8..5).prop_map(|i| PatternTerm::Iri(node(i))),
            1 => (0i64..6).prop_map(|i| PatternTerm::Literal(Literal::integer(i))),
        ],
    )
        .prop_map(|(s, p, o)| TriplePattern { s, p, o });
    let filter_op = prop::sample::select(vec![FilterOp::Lt, FilterOp::Le, FilterOp::Gt, FilterOp::Ge, FilterOp::Eq, FilterOp::Ne]);
    (
        prop::collection::vec(pattern, 1..4),
        prop::collection::vec((any::<prop::sample::Index>(), filter_op, 0u8..8), 0..3),
        prop::option::of((any::<prop::sample::Index>(), any::<bool>())),
        prop::option::of(0usize..10),
    )
        .prop_map(|(patterns, filters, order, limit)| {
            let vars = pattern_vars(&patterns);
            let filters = if vars.is_empty() {
                Vec::new()
            } else {
                filters
                    .iter()
                    .map(|(ix, op, v)| Filter { var: ix.get(&vars).clone(), op: *op, value: *v as f64 * 0.75, line: 1, column: 1 })
                    .collect()
            };
            let order_by = order
                .filter(|_| !vars.is_empty())
                .map(|(ix, asc)| (ix.get(&vars).clone(), if asc { Order::Asc } else { Order::Desc }));
            Query { select_all: true, patterns, filters, order_by, limit, ..Query::default() }
        })
}

type Row = BTreeMap<String, Term>;

fn bind(row: &mut Row, t: &PatternTerm, value: &Term) -> bool {
    match t {
        PatternTerm::Var(v) => match row.get(v) {
            Some(existing) => existing == value,
            None => {
                row.insert(v.clone(), value.clone());
                true
            }
        },
        PatternTerm::Iri(i) => *value == Term::Iri(i.clone()),
        PatternTerm::Literal(l) => *value == Term::Literal(l.clone()),
    }
}

/// Exhaustive join: every pattern against every triple, in written order.
fn exhaustive(q: &Query, g: &Graph) -> Result<Vec<Vec<Term>>, ()> {
    let triples = g.triples();
    let mut rows = vec![Row::new()];
    for p in &q.patterns {
        let mut next = Vec::new();
        for r in &rows {
            for t in &triples {
                let mut r = r.clone();
                if bind(&mut r, &p.s, &Term::Iri(t.subject.clone()))
                    && bind(&mut r, &p.p, &Term::Iri(t.predicate.clone()))
                    && bind(&mut r, &p.o, &t.object)
                {
                    next.push(r);
                }
            }
        }
        rows = next;
    }
    let mut kept = Vec::new();
    'rows: for r in rows {
        for f in &q.filters {
            let Some(x) = r[&f.var].as_f64() else { return Err(()) };
            let ok = match f.op {
                FilterOp::Lt => x < f.value,
                FilterOp::Le => x <= f.value,
                FilterOp::Gt => x > f.value,
                FilterOp::Ge => x >= f.value,
                FilterOp::Eq => x == f.value,
                FilterOp::Ne => x != f.value,
            };
            if !ok {
                continue 'rows;
            }
        }
        kept.push(r);
    }
    let vars = pattern_vars(&q.patterns);
    let mut out: Vec<(Option<Term>, Vec<Term>)> = kept
        .into_iter()
        .map(|r| {
            let key = q.order_by.as_ref().map(|(v, _)| r[v].clone());
            (key, vars.iter().map(|v| r[v].clone()).collect())
        })
        .collect();
    out.sort_by(|a, b| a.1.cmp(&b.1));
    if let Some((_, dir)) = &q.order_by {
        out.sort_by(|a, b| {
            let (a, b) = (a.0.as_ref().unwrap(), b.0.as_ref().unwrap());
            let ord = match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => a.cmp(b),
            };
            if *dir == Order::Desc { ord.reverse() } else { ord }
        });
    }
    let mut rows: Vec<Vec<Term>> = out.into_iter().map(|(_, r)| r).collect();
    if let Some(n) = q.limit {
        rows.truncate(n);
    }
    Ok(rows)
}

fn sparql(csv: Option<&str>) -> Outcome {
    let oracle = property(300, (sparql_graph(), sparql_query()), |(g, q)| {
        match (evaluate(&q, &g), exhaustive(&q, &g)) {
            (Ok(sol), Ok(rows)) => prop_assert_eq!(sol.rows, rows),
            (Err(QueryError::Type { .. }), Err(())) => {}
            (got, want) => prop_assert!(false, "evaluator {:?} vs oracle {:?}", got.map(|s| s.rows), want),
        }
        Ok(())
    });
    let oracle_note = match &oracle {
        Ok(()) => "evaluator equals exhaustive join on 300 graphs ≤ 200 triples".to_string(),
        Err(e) => format!("oracle mismatch: {e}"),
    };
    let Some(csv) = csv else {
        return match oracle {
            Ok(()) => Outcome::no_data(format!("{NO_DATA}; {oracle_note}")),
            Err(_) => Outcome::check(false, oracle_note),
        };
    };
    let graph = match encode_csv(csv, RECORD_BASE).and_then(|r| records_to_graph(&r, SCHEMA)) {
        Ok(g) => g,
        Err(e) => return Outcome::check(false, format!("ingest failed: {e}")),
    };
    let sol = match run(RECORD_QUERY, &graph) {
        Ok(s) => s,
        Err(e) => return Outcome::check(false, format!("query failed: {e}")),
    };
    let value = |row: usize, var: &str| sol.get(row, var).and_then(Term::as_f64);
    let all_cirrhosis = (0..sol.len()).all(|r| value(r, "Category") == Some(3.0));
    let expected = [("ALT", 7.1), ("AST", 41.3), ("GGT", 53.0), ("ALB", 38.0), ("ALP", 35.7), ("Category", 3.0)];
    let found = (0..sol.len()).any(|r| {
        value(r, "SNo") == Some(576.0)
            && expected.iter().all(|(v, want)| value(r, v).is_some_and(|x| (x - want).abs() < 1e-9))
    });
    Outcome::check(
        found && all_cirrhosis && oracle.is_ok(),
        format!(
            "{} rows, SNo 576 {}, all Category 3: {all_cirrhosis}; {oracle_note}",
            sol.len(),
            if found { "present with published values" } else { "MISSING" }
        ),
    )
}

// ---- streaming ----

/// `n` records with seeded lab values spread over the ranges seen in the
/// UCI file.
fn synthetic_records(n: u32) -> Vec<EncodedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(615);
    (1..=n)
        .map(|i| {
            let labs = LabValues::new([
                rng.gen_range(14.0..82.0),
                rng.gen_range(11.0..420.0),
                rng.gen_range(0.9..325.0),
                rng.gen_range(10.0..324.0),
                rng.gen_range(0.8..255.0),
                rng.gen_range(1.4..16.5),
                rng.gen_range(1.4..9.7),
                rng.gen_range(8.0..1080.0),
                rng.gen_range(4.5..650.0),
                rng.gen_range(44.0..90.0),
            ]);
            EncodedRecord {
                uid: record_uid(RECORD_BASE, i).unwrap(),
                row_id: i,
                category: Category::BloodDonor,
                sex: if rng.gen_bool(0.6) { Sex::Male } else { Sex::Female },
                age: rng.gen_range(19..78),
                labs,
            }
        })
        .collect()
}

/// Average ranks, ties sharing the mean rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let var = |r: &[f64]| r.iter().map(|a| (a - mean).powi(2)).sum::<f64>();
    cov / (var(&rx) * var(&ry)).sqrt()
}

fn threshold_rule() -> impl Strategy<Value = Rule> {
    (prop::sample::select(liverkg::ingest::Lab::ALL.to_vec()), any::<bool>(), 0u32..200).prop_map(|(lab, gt, t)| {
        let op = if gt { "greaterThan" } else { "lessThanOrEqualTo" };
        parse_rule(&format!(
            "t: schema:MedicalRecord(?r) ^ schema:{lab}(?r, ?v) ^ swrlb:{op}(?v, {t}) -> Flagged(?r)",
            lab = lab.name()
        ))
        .unwrap()
    })
}

fn rule_set() -> impl Strategy<Value = Vec<Rule>> {
    (prop::sample::subsequence(event_rules(), 0..=12), prop::collection::vec(threshold_rule(), 0..4)).prop_map(
        |(mut rules, extra)| {
            for (i, mut r) in extra.into_iter().enumerate() {
                r.name = format!("threshold_{i}");
                rules.push(r);
            }
            rules
        },
    )
}

fn streaming(csv: Option<&str>) -> Outcome {
    let (records, source) = match csv.map(|c| encode_csv(c, RECORD_BASE)) {
        Some(Ok(r)) => (r, "dataset"),
        Some(Err(e)) => return Outcome::check(false, format!("ingest failed: {e}")),
        None => (synthetic_records(615), "615 seeded synthetic records, dataset not available"),
    };
    let graph = records_to_graph(&records, SCHEMA).unwrap();
    let split = split_records(&graph);
    let mut notes = vec![source.to_string()];

    let engine = StreamEngine::with_rules(event_rules()).unwrap();
    let summary = engine.run_stream(split.clone(), BatchConfig::new(10, 0).unwrap(), &mut ()).unwrap();
    let last = summary.batches.last().map(|b| (b.batch_no, b.size));
    let batches_ok = summary.batches.len() == 62 && last == Some((62, 5));
    notes.push(format!("{} batches, last {:?}", summary.batches.len(), last));

    let equal = property(10, rule_set(), |rules| {
        let engine = StreamEngine::with_rules(rules.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let s = engine
            .run_stream(split.clone(), BatchConfig::new(10, 0).unwrap(), &mut ())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let whole = detect_all(&rules, &graph).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(s.event_keys(), whole);
        Ok(())
    });
    notes.push(match &equal {
        Ok(()) => "streamed events equal whole-graph events for 10 rule sets".into(),
        Err(e) => format!("event mismatch: {e}"),
    });

    let mut trends_ok = true;
    for (label, cells, axis) in [
        ("batch size", batch_size_cells(), 0usize),
        ("rule count", rule_count_cells(), 1),
    ] {
        let rows = timing_report(&sweep(&split, &event_rules(), &cells, SWEEP_RUNS).unwrap());
        let x: Vec<f64> = rows.iter().map(|r| if axis == 0 { r.batch_size } else { r.rule_count } as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_ms).collect();
        let rho = spearman(&x, &y);
        trends_ok &= rho >= SPEARMAN_MIN;
        notes.push(format!(
            "Spearman vs {label} {rho:.2} ({})",
            y.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
        ));
    }
    Outcome::check(batches_ok && equal.is_ok() && trends_ok, notes.join("; "))
}

// ---- ontology ----

fn ontology_metrics() -> Outcome {
    let schema = load_schema(
        "class Patient sub SpecificallyDependentContinuant\n\
         dataprop hasAge domain Patient\n\
         dataprop hasSex domain Patient\n\
         dataprop hasValueALT domain Patient\n\
         dataprop hasValueAST domain Patient\n",
    )
    .unwrap();
    let mut graph = Graph::new();
    for (i, class) in schema.classes.keys().enumerate() {
        graph.insert(Triple::new(node(i as u8), rdf_type(), onto(class)));
    }
    let m = compute_metrics(&schema, &graph).unwrap();
    let published = OntologyMetrics::from_counts(MetricCounts::published()).unwrap();
    let ar_ok = schema.classes.len() == 10 && m.attribute_richness == 0.4;
    let cr_ok = m.class_richness == 1.0;
    let rr_ok = published.relationship_richness == 55.0 / 67.0;
    Outcome::check(
        ar_ok && cr_ok && rr_ok,
        format!(
            "AR {} with {} classes / 4 data properties, CR {}, RR from published counts {:.6} (55/67 = {:.6})",
            m.attribute_richness,
            schema.classes.len(),
            m.class_richness,
            published.relationship_richness,
            55.0 / 67.0
        ),
    )
}

// ---- treatment planner ----

fn treatment_grid() -> Outcome {
    let mut bad = Vec::new();
    for rna in ["POSITIVE", "NEGATIVE"] {
        for cp in [None, Some("A"), Some("B"), Some("C")] {
            let mut text = format!("HCV RNA: {rna}");
            if let Some(cp) = cp {
                text.push_str(&format!("\nCHILD-PUGH: {cp}"));
            }
            let cell = text.replace('\n', ", ");
            let plan = match parse_report(&text).map(|r| plan_treatment(&r.facts)) {
                Ok(Ok(p)) => p,
                other => {
                    bad.push(format!("{cell}: {other:?}"));
                    continue;
                }
            };
            let got: Vec<(String, String)> = plan.regimen.iter().map(|d| (d.drug.clone(), d.dose.to_string())).collect();
            let want: Vec<(&str, &str)> = match (rna, cp) {
                ("NEGATIVE", _) => vec![],
                (_, None) => vec![("Sofosbuvir", "400 mg"), ("Daclatasvir", "60 mg")],
                (_, Some("A")) => vec![("Sofosbuvir", "400 mg"), ("Velpatasvir", "100 mg")],
                _ => vec![("Sofosbuvir", "400 mg"), ("Velpatasvir", "100 mg"), ("Ribavirin", "600-1200 mg")],
            };
            let want: Vec<(String, String)> = want.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
            if got != want {
                bad.push(format!("{cell}: regimen {got:?}"));
            }
            if rna == "POSITIVE" {
                let weeks_ok = plan.duration_weeks == 12 && TREATMENT_WEEKS == 12;
                let every4 = plan
                    .monitoring
                    .iter()
                    .any(|m| m.interval.as_deref() == Some("every 4 weeks") && m.provenance == "on_treatment_monitoring");
                let svr = plan.monitoring.iter().any(|m| {
                    m.action == "HCV RNA test"
                        && m.interval.as_deref() == Some("12 weeks post-treatment")
                        && m.provenance == "post_treatment_test"
                });
                if !(weeks_ok && every4 && svr) {
                    bad.push(format!("{cell}: weeks {} monitoring {:?}", plan.duration_weeks, plan.monitoring));
                }
            }
        }
    }
    Outcome::check(
        bad.is_empty(),
        if bad.is_empty() {
            "8 cells match; positive cells carry 12 weeks, 4-weekly review and the 12-week SVR test".to_string()
        } else {
            bad.join(" | ")
        },
    )
}

// ---- round trips ----

fn nt_graph() -> impl Strategy<Value = Graph> {
    let literal = prop_oneof![
        any::<i64>().prop_map(Literal::integer),
        (-1e9f64..1e9).prop_map(Literal::double),
        (-1e6f64..1e6).prop_map(Literal::float),
        any::<bool>().prop_map(Literal::boolean),
        "[ -~\\n\\t\"\\\\é€]{0,12}".prop_map(Literal::string),
    ];
    let object = prop_oneof![(0u8..8).prop_map(|i| Term::Iri(node(i))), literal.prop_map(Term::Literal)];
    prop::collection::vec((0u8..8, 0u8..4, object), 0..40).prop_map(|ts| {
        let mut g = Graph::new();
        g.extend(ts.into_iter().map(|(s, p, o)| Triple::new(node(s), pred(p), o)));
        g
    })
}

fn any_rule() -> impl Strategy<Value = Rule> {
    let name_iri = prop_oneof![
        3 => "[A-Za-z][A-Za-z0-9_]{0,6}".prop_map(|s| onto(&s)),
        1 => "[a-z][a-z0-9]{0,4}".prop_map(|s| Iri::new(format!("http://other.example/v/{s}")).unwrap()),
    ];
    let literal = prop_oneof![
        (-1000i64..1000).prop_map(Literal::integer),
        (-1e4f64..1e4).prop_map(Literal::float),
        (-1e4f64..1e4).prop_map(Literal::double),
        any::<bool>().prop_map(Literal::boolean),
        "[a-zA-Z0-9 \"\\\\]{0,8}".prop_map(Literal::string),
    ];
    let var = || prop::sample::select(&VARS[..]).prop_map(Arg::var);
    let arg = prop_oneof![
        4 => var(),
        1 => literal.clone().prop_map(Arg::Literal),
        1 => "[a-z][A-Za-z0-9]{0,6}".prop_map(|s| Arg::symbol(&s)),
    ];
    let atom = prop_oneof![
        (name_iri.clone(), var()).prop_map(|(class, arg)| Atom::Class { class, arg }),
        (name_iri, var(), arg).prop_map(|(property, subject, object)| Atom::Property { property, subject, object }),
    ];
    (
        "[a-z][a-z0-9_]{0,8}",
        prop::collection::vec(atom.clone(), 1..4),
        prop::collection::vec((op(), var(), prop_oneof![var(), literal.prop_map(Arg::Literal)]), 0..3),
        prop::collection::vec(atom, 1..3),
    )
        .prop_map(|(name, mut body, builtins, head)| {
            body.extend(builtins.into_iter().map(|(op, left, right)| Atom::Builtin { op, left, right }));
            Rule { name, body, head }
        })
        .prop_filter("valid rule", |r| r.validate().is_ok())
}

#[derive(Debug, Clone)]
enum SessionOp {
    Labs([f64; 4]),
    Diagnose,
    Report(&'static str),
    Plan,
    Followup(&'static str),
}

fn session_op() -> impl Strategy<Value = SessionOp> {
    prop_oneof![
        prop::array::uniform4(1.0f64..120.0).prop_map(SessionOp::Labs),
        Just(SessionOp::Diagnose),
        prop::sample::select(vec![
            "HCV RNA: POSITIVE",
            "HCV RNA: POSITIVE\nCHILD-PUGH: A",
            "HCV RNA: POSITIVE\nCHILD-PUGH: C\nASCITES: PRESENT",
            "HCV RNA: NEGATIVE",
            "FIBROSIS STAGE: F4\nHCV RNA: POSITIVE",
        ])
        .prop_map(SessionOp::Report),
        Just(SessionOp::Plan),
        prop::sample::select(vec!["HCV RNA: NEGATIVE", "HCV RNA: POSITIVE"]).prop_map(SessionOp::Followup),
    ]
}

/// Applies an op the way the service does; rejected ops change nothing.
fn apply(slot: &mut SessionSlot, op: &SessionOp, rules: &[Rule]) {
    let s = &mut slot.session;
    match op {
        SessionOp::Labs([ast, alp, bil, alt]) => {
            let labs = LabValues::new([40.0, *alp, *alt, *ast, *bil, 8.0, 5.0, 80.0, 25.0, 72.0]);
            let _ = s.enter_labs(PatientRecord { uid: "p".into(), age: 50, sex: 0, labs });
        }
        SessionOp::Diagnose => {
            if s.diagnose(rules).is_ok() && s.diagnosis != Some(Diagnosis::Healthy) {
                s.recommend_tests().unwrap();
            }
        }
        SessionOp::Report(text) => {
            if s.ingest_report(text).is_ok() {
                slot.report_text = Some(text.to_string());
            }
        }
        SessionOp::Plan => {
            let _ = s.plan_treatment();
        }
        SessionOp::Followup(text) => {
            let facts: ReportFacts = parse_report(text).unwrap().facts;
            if s.record_followup(&facts).is_ok() {
                slot.followup_facts = Some(facts);
            }
        }
    }
}

fn round_trips() -> Outcome {
    let nt = property(ROUND_TRIP_CASES, nt_graph(), |g| {
        let text = serialize_ntriples(&g);
        let back = parse_ntriples(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.triples(), g.triples());
        prop_assert_eq!(serialize_ntriples(&back), text);
        Ok(())
    });
    let rules = property(ROUND_TRIP_CASES, prop::collection::vec(any_rule(), 1..5), |rules| {
        for r in &rules {
            prop_assert_eq!(&parse_rule(&serialize_rule(r)).map_err(|e| TestCaseError::fail(e.to_string()))?, r);
        }
        prop_assert_eq!(parse_rules(&serialize_rules(&rules)).map_err(|e| TestCaseError::fail(e.to_string()))?, rules);
        Ok(())
    });
    let diagnostic = diagnostic_rules();
    let mut reached = BTreeMap::<SessionState, usize>::new();
    let persist = {
        let reached = std::cell::RefCell::new(&mut reached);
        property(
            ROUND_TRIP_CASES,
            (
                prop::collection::vec(nt_graph(), 0..3),
                prop::collection::vec(any_rule(), 0..4),
                prop::collection::vec(prop::collection::vec(session_op(), 0..8), 0..4),
            ),
            |(graphs, rules, sessions)| {
                let dir = tempfile::tempdir().map_err(|e| TestCaseError::fail(e.to_string()))?;
                let data = DataDir::open(dir.path()).map_err(|e| TestCaseError::fail(e.to_string()))?;
                let mut want_graphs = BTreeMap::new();
                for g in graphs {
                    let id = graph_id(&g);
                    data.save_graph(&id, &g).unwrap();
                    want_graphs.insert(id, g.triples());
                }
                let rules: Vec<Rule> = rules
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut r)| {
                        r.name = format!("{}_{i}", r.name);
                        r
                    })
                    .collect();
                data.save_rules(&rules).unwrap();
                let mut want_sessions = BTreeMap::new();
                for (n, ops) in sessions.iter().enumerate() {
                    let mut slot = SessionSlot::new(&format!("s{n}"));
                    for op in ops {
                        apply(&mut slot, op, &diagnostic);
                    }
                    *reached.borrow_mut().entry(slot.session.state).or_default() += 1;
                    data.save_session(&slot).unwrap();
                    want_sessions.insert(slot.session.id.clone(), slot);
                }
                let snap = DataDir::open(dir.path())
                    .and_then(|d| d.load(&diagnostic))
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                let got_graphs: BTreeMap<String, Vec<Triple>> =
                    snap.graphs.iter().map(|(id, g)| (id.clone(), g.triples())).collect();
                prop_assert_eq!(got_graphs, want_graphs);
                prop_assert_eq!(snap.rules, rules);
                prop_assert_eq!(snap.sessions, want_sessions);
                Ok(())
            },
        )
    };
    let status = |r: &Result<(), String>| match r {
        Ok(()) => "identity".to_string(),
        Err(e) => format!("FAILED {e}"),
    };
    Outcome::check(
        nt.is_ok() && rules.is_ok() && persist.is_ok(),
        format!(
            "{ROUND_TRIP_CASES} cases each: N-Triples {}, rules {}, persist/reload {} (session states reached {:?})",
            status(&nt),
            status(&rules),
            status(&persist),
            reached
        ),
    )
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let csv = dataset_text();
    let csv = csv.as_deref();
    let checks: Vec<(&str, Check)> = vec![
        ("decision tree 10-fold accuracy (Gini 93.31%, entropy 93.02%, ± 3 pp, < 10 s)", Box::new(|| tree_accuracy(csv))),
        ("tree root splits on AST; extracted rules reproduce every tree prediction", Box::new(|| tree_root(csv))),
        ("hand-encoded rules derive the HepC and healthy fixtures; semi-naive equals naive", Box::new(rule_inference)),
        ("record query returns SNo 576, only Category 3; evaluator equals join oracle", Box::new(|| sparql(csv))),
        ("stream: 62 batches ending in 5; streamed equals whole-graph; timing trends", Box::new(|| streaming(csv))),
        ("ontology metrics: AR 0.4, CR 1.0, RR 55/67", Box::new(ontology_metrics)),
        ("treatment grid: 8 cells, 12 weeks, monitoring and SVR test", Box::new(treatment_grid)),
        ("round trips: N-Triples, rules, service persist/reload", Box::new(round_trips)),
    ];
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let (mut failed, mut missing) = (0, 0);
    for (n, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::NoData => {
                missing += 1;
                "FAIL"
            }
        };
        println!(
            "{tag} [{}] {name} -- {} ({:.1} s)",
            n + 1,
            outcome.note,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} passed, {failed} failed, {missing} failed for lack of the dataset",
        checks.len() - failed - missing
    );
    if failed > 0 || (strict && missing > 0) {
        std::process::exit(1);
    }
}
