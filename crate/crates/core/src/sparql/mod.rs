//! A SPARQL SELECT subset: PREFIX, basic graph patterns (with `;` and `,`
//! lists and `a`), numeric FILTER comparisons, ORDER BY and LIMIT.

mod parse;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::store::{Datatype, Graph, Iri, Term};

pub use parse::parse_query;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: {message}")]
    Validation {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("FILTER on ?{var} needs a number but the row binds {value}")]
    Type { var: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternTerm {
    Var(String),
    Iri(Iri),
    Literal(crate::store::Literal),
}

impl PatternTerm {
    fn var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub s: PatternTerm,
    pub p: PatternTerm,
    pub o: PatternTerm,
}

impl TriplePattern {
    fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.s, &self.p, &self.o]
            .into_iter()
            .filter_map(PatternTerm::var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl FilterOp {
    fn from_symbol(s: &str) -> Option<FilterOp> {
        Some(match s {
            "<" => FilterOp::Lt,
            "<=" => FilterOp::Le,
            ">" => FilterOp::Gt,
            ">=" => FilterOp::Ge,
            "=" => FilterOp::Eq,
            "!=" => FilterOp::Ne,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            FilterOp::Lt => "<",
            FilterOp::Le => "<=",
            FilterOp::Gt => ">",
            FilterOp::Ge => ">=",
            FilterOp::Eq => "=",
            FilterOp::Ne => "!=",
        }
    }

    /// Same comparison with the operands swapped.
    fn flipped(self) -> FilterOp {
        match self {
            FilterOp::Lt => FilterOp::Gt,
            FilterOp::Le => FilterOp::Ge,
            FilterOp::Gt => FilterOp::Lt,
            FilterOp::Ge => FilterOp::Le,
            other => other,
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            FilterOp::Lt => a < b,
            FilterOp::Le => a <= b,
            FilterOp::Gt => a > b,
            FilterOp::Ge => a >= b,
            FilterOp::Eq => a == b,
            FilterOp::Ne => a != b,
        }
    }
}

/// `?var op value`
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub var: String,
    pub op: FilterOp,
    pub value: f64,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Query {
    pub prefixes: BTreeMap<String, String>,
    pub select: Vec<String>,
    pub select_all: bool,
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<Filter>,
    pub order_by: Option<(String, Order)>,
    pub limit: Option<usize>,
}

impl Query {
    fn pattern_vars(&self) -> BTreeSet<String> {
        self.patterns
            .iter()
            .flat_map(|p| p.vars().map(str::to_string))
            .collect()
    }

    /// Projected variables; for `SELECT *`, pattern variables in order of
    /// first appearance.
    pub fn projection(&self) -> Vec<String> {
        if !self.select_all {
            return self.select.clone();
        }
        let mut out: Vec<String> = Vec::new();
        for v in self.patterns.iter().flat_map(TriplePattern::vars) {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
        out
    }
}

/// Projected rows in select order.
#[derive(Debug, Clone, PartialEq)]
pub struct Solutions {
    pub vars: Vec<String>,
    pub rows: Vec<Vec<Term>>,
}

impl Solutions {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    pub fn get(&self, row: usize, var: &str) -> Option<&Term> {
        self.rows.get(row)?.get(self.column(var)?)
    }

    /// Header of `?var` names, then one tab-separated line of N-Triples
    /// terms per row.
    pub fn to_tsv(&self) -> String {
        let mut out = self
            .vars
            .iter()
            .map(|v| format!("?{v}"))
            .collect::<Vec<_>>()
            .join("\t");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }

    /// SPARQL 1.1 JSON results layout.
    pub fn to_json(&self) -> Value {
        let bindings: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (var, term) in self.vars.iter().zip(row) {
                    obj.insert(var.clone(), term_json(term));
                }
                Value::Object(obj)
            })
            .collect();
        json!({ "head": { "vars": self.vars }, "results": { "bindings": bindings } })
    }
}

fn term_json(term: &Term) -> Value {
    match term {
        Term::Iri(iri) => json!({ "type": "uri", "value": iri.as_str() }),
        Term::Literal(lit) if lit.datatype() == Datatype::String => {
            json!({ "type": "literal", "value": lit.lexical() })
        }
        Term::Literal(lit) => json!({
            "type": "literal",
            "value": lit.lexical(),
            "datatype": lit.datatype().iri(),
        }),
    }
}

type Row = HashMap<String, Term>;

fn resolve(t: &PatternTerm, row: &Row) -> Option<Term> {
    match t {
        PatternTerm::Var(v) => row.get(v).cloned(),
        PatternTerm::Iri(i) => Some(Term::Iri(i.clone())),
        PatternTerm::Literal(l) => Some(Term::Literal(l.clone())),
    }
}

/// Matches of one pattern extending `row`.
fn extend(graph: &Graph, pat: &TriplePattern, row: &Row) -> Vec<Row> {
    let s = resolve(&pat.s, row);
    let p = resolve(&pat.p, row);
    let o = resolve(&pat.o, row);
    let (s, p) = match (s, p) {
        (Some(Term::Literal(_)), _) | (_, Some(Term::Literal(_))) => return Vec::new(),
        (s, p) => (
            s.and_then(|t| t.as_iri().cloned()),
            p.and_then(|t| t.as_iri().cloned()),
        ),
    };
    let mut out = Vec::new();
    for t in graph.matches(s.as_ref(), p.as_ref(), o.as_ref()) {
        let mut next = row.clone();
        let mut ok = true;
        for (pt, value) in [
            (&pat.s, Term::Iri(t.subject.clone())),
            (&pat.p, Term::Iri(t.predicate.clone())),
            (&pat.o, t.object.clone()),
        ] {
            if let PatternTerm::Var(v) = pt {
                match next.get(v) {
                    Some(existing) if *existing != value => ok = false,
                    Some(_) => {}
                    None => {
                        next.insert(v.clone(), value);
                    }
                }
            }
        }
        if ok {
            out.push(next);
        }
    }
    out
}

/// Cardinality estimate for a pattern given the set of bound variables.
fn estimate(graph: &Graph, pat: &TriplePattern, bound: &BTreeSet<&str>) -> (usize, usize) {
    let constant = |t: &PatternTerm| match t {
        PatternTerm::Iri(i) => Some(Term::Iri(i.clone())),
        PatternTerm::Literal(l) => Some(Term::Literal(l.clone())),
        PatternTerm::Var(_) => None,
    };
    let free = [&pat.s, &pat.p, &pat.o]
        .iter()
        .filter(|t| t.var().is_some_and(|v| !bound.contains(v)))
        .count();
    let s = constant(&pat.s).and_then(|t| t.as_iri().cloned());
    let p = constant(&pat.p).and_then(|t| t.as_iri().cloned());
    let o = constant(&pat.o);
    (free, graph.count(s.as_ref(), p.as_ref(), o.as_ref()))
}

/// Greedy left-deep join order: fewest unbound positions first, then
/// smallest index count.
fn join_order(graph: &Graph, patterns: &[TriplePattern]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..patterns.len()).collect();
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(_, &i)| estimate(graph, &patterns[i], &bound))
            .expect("non-empty");
        let i = remaining.remove(pos);
        bound.extend(patterns[i].vars());
        order.push(i);
    }
    order
}

fn order_key(a: &Term, b: &Term) -> Ordering {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

/// Joins every pattern, then applies filters, projection, ordering and
/// limit. Without ORDER BY rows are sorted by term order of the selected
/// variables (first variable first), so output never depends on join order.
pub fn evaluate(query: &Query, graph: &Graph) -> Result<Solutions, QueryError> {
    let mut rows: Vec<Row> = vec![Row::new()];
    if query.patterns.is_empty() {
        rows.clear();
    }
    for i in join_order(graph, &query.patterns) {
        let pat = &query.patterns[i];
        rows = rows.iter().flat_map(|r| extend(graph, pat, r)).collect();
        if rows.is_empty() {
            break;
        }
    }
    let mut kept = Vec::with_capacity(rows.len());
    for row in rows {
        let mut keep = true;
        for f in &query.filters {
            let term = &row[&f.var];
            let value = term.as_f64().ok_or_else(|| QueryError::Type {
                var: f.var.clone(),
                value: term.to_string(),
            })?;
            if !f.op.holds(value, f.value) {
                keep = false;
                break;
            }
        }
        if keep {
            kept.push(row);
        }
    }
    let vars = query.projection();
    let mut keyed: Vec<(Option<Term>, Vec<Term>)> = kept
        .into_iter()
        .map(|row| {
            let key = query.order_by.as_ref().map(|(v, _)| row[v].clone());
            (key, vars.iter().map(|v| row[v].clone()).collect())
        })
        .collect();
    keyed.sort_by(|a, b| a.1.cmp(&b.1));
    if let Some((_, dir)) = &query.order_by {
        keyed.sort_by(|a, b| {
            let ord = order_key(a.0.as_ref().unwrap(), b.0.as_ref().unwrap());
            match dir {
                Order::Asc => ord,
                Order::Desc => ord.reverse(),
            }
        });
    }
    let mut rows: Vec<Vec<Term>> = keyed.into_iter().map(|(_, r)| r).collect();
    if let Some(n) = query.limit {
        rows.truncate(n);
    }
    Ok(Solutions { vars, rows })
}

/// Records in the cirrhosis/fibrosis region of the lab space: low ALT and
/// ALP, AST between 33.9 and 53.05, raised bilirubin.
pub const RECORD_QUERY: &str = r#"
PREFIX ns1: <http://schema.org/>
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>
SELECT ?SNo ?ALT ?AST ?GGT ?ALB ?ALP ?BIL ?Category
WHERE {
    ?record rdf:type ns1:MedicalRecord ;
        ns1:SNo ?SNo ;
        ns1:ALT ?ALT ;
        ns1:AST ?AST ;
        ns1:GGT ?GGT ;
        ns1:ALB ?ALB ;
        ns1:ALP ?ALP ;
        ns1:Sex ?Sex ;
        ns1:BIL ?BIL ;
        ns1:Category ?Category.

    FILTER (?AST <= 53.05)
    FILTER (?ALT <= 9.65)
    FILTER (?ALP <= 52.3)
    FILTER (?AST > 33.9)
    FILTER (?BIL > 11.0)
}"#;

/// Parses and evaluates in one step.
pub fn run(text: &str, graph: &Graph) -> Result<Solutions, QueryError> {
    evaluate(&parse_query(text)?, graph)
}
