use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;

use super::{render_literal, Arg, Atom, BuiltinOp, Rule};
use crate::store::{rdf_type, Graph, Term, Triple};
use crate::vocab::compact_iri;

pub type Bindings = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("builtin {atom}: {value} is not numeric")]
    NonNumeric { atom: String, value: String },
    #[error("{0} was not derived")]
    NotDerived(String),
}

/// A builtin comparison that held during a derivation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub op: BuiltinOp,
    pub left: f64,
    pub right: f64,
    /// The atom as written, e.g. `swrlb:lessThanOrEqualTo(?ast, "53.05"^^xsd:float)`.
    pub atom: String,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofStep {
    #[serde(serialize_with = "ser_display")]
    pub derived: Triple,
    pub rule: String,
    #[serde(serialize_with = "ser_bindings")]
    pub bindings: Bindings,
    /// Graph triples matched by the body's class and property atoms.
    #[serde(serialize_with = "ser_display_vec")]
    pub premises: Vec<Triple>,
    pub comparisons: Vec<Comparison>,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ser_display_vec<T: fmt::Display, S: serde::Serializer>(
    v: &[T],
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

pub(crate) fn ser_bindings<S: serde::Serializer>(b: &Bindings, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(b.iter().map(|(k, v)| (k, render_term(v))))
}

/// Compact rendering for explanations: prefixed names and bare numbers.
pub(crate) fn render_term(term: &Term) -> String {
    match term {
        Term::Iri(iri) => compact_iri(iri.as_str()),
        Term::Literal(lit) => match lit.as_f64() {
            Some(_) => lit.lexical().to_string(),
            None => render_literal(lit),
        },
    }
}

pub(crate) fn render_triple(t: &Triple) -> String {
    format!(
        "{} {} {}",
        compact_iri(t.subject.as_str()),
        compact_iri(t.predicate.as_str()),
        render_term(&t.object)
    )
}

#[derive(Debug, Clone, Default)]
pub struct Inference {
    /// Triples not present in the input graph.
    pub derived: Graph,
    /// One step per derived triple, in derivation order.
    pub proofs: Vec<ProofStep>,
}

impl Inference {
    pub fn proof_for(&self, triple: &Triple) -> Option<&ProofStep> {
        self.proofs.iter().find(|p| &p.derived == triple)
    }

    pub fn fired_rules(&self) -> BTreeSet<&str> {
        self.proofs.iter().map(|p| p.rule.as_str()).collect()
    }
}

struct Match {
    bindings: Bindings,
    premises: Vec<Triple>,
    comparisons: Vec<Comparison>,
}

/// Numeric literals compare by value across datatypes.
fn term_eq(a: &Term, b: &Term) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

fn resolve<'a>(arg: &'a Arg, b: &'a Bindings) -> Option<Term> {
    match arg {
        Arg::Var(v) => b.get(v).cloned(),
        Arg::Literal(l) => Some(Term::Literal(l.clone())),
        Arg::Iri(i) => Some(Term::Iri(i.clone())),
    }
}

fn numeric(arg: &Arg, b: &Bindings, atom: &Atom) -> Result<f64, EvalError> {
    let term = resolve(arg, b).expect("builtin evaluated before its variables were bound");
    term.as_f64().ok_or_else(|| EvalError::NonNumeric {
        atom: atom.to_string(),
        value: term.to_string(),
    })
}

/// Candidate triples for a graph atom under the current bindings.
fn candidates(graph: &Graph, atom: &Atom, b: &Bindings) -> Vec<Triple> {
    let (s, p, o) = match atom {
        Atom::Class { class, arg } => (resolve(arg, b), rdf_type(), Some(Term::Iri(class.clone()))),
        Atom::Property {
            property,
            subject,
            object,
        } => (resolve(subject, b), property.clone(), resolve(object, b)),
        Atom::Builtin { .. } => unreachable!(),
    };
    let s = match s {
        Some(Term::Iri(iri)) => Some(iri),
        Some(Term::Literal(_)) => return Vec::new(),
        None => None,
    };
    match o {
        // numeric objects are matched by value, so scan and filter
        Some(o) if o.as_f64().is_some() => graph
            .matches(s.as_ref(), Some(&p), None)
            .into_iter()
            .filter(|t| term_eq(&t.object, &o))
            .collect(),
        o => graph.matches(s.as_ref(), Some(&p), o.as_ref()),
    }
}

fn bind(atom: &Atom, t: &Triple, b: &Bindings) -> Option<Bindings> {
    let mut out = b.clone();
    let mut unify = |arg: &Arg, term: Term| -> bool {
        match arg {
            Arg::Var(v) => match out.get(v) {
                Some(existing) => term_eq(existing, &term),
                None => {
                    out.insert(v.clone(), term);
                    true
                }
            },
            _ => true,
        }
    };
    let ok = match atom {
        Atom::Class { arg, .. } => unify(arg, Term::Iri(t.subject.clone())),
        Atom::Property {
            subject, object, ..
        } => unify(subject, Term::Iri(t.subject.clone())) && unify(object, t.object.clone()),
        Atom::Builtin { .. } => unreachable!(),
    };
    ok.then_some(out)
}

/// Backtracking evaluation. When `delta` is `Some((j, g))`, graph atom `j`
/// is matched against `g` instead of `full` (semi-naive restriction).
fn matches(
    full: &Graph,
    body: &[Atom],
    seed: &Bindings,
    delta: Option<(usize, &Graph)>,
) -> Result<Vec<Match>, EvalError> {
    let mut out = Vec::new();
    let start = Match {
        bindings: seed.clone(),
        premises: Vec::new(),
        comparisons: Vec::new(),
    };
    let pending: Vec<usize> = (0..body.len()).collect();
    search(full, body, delta, start, pending, &mut out)?;
    Ok(out)
}

fn search(
    full: &Graph,
    body: &[Atom],
    delta: Option<(usize, &Graph)>,
    mut state: Match,
    mut pending: Vec<usize>,
    out: &mut Vec<Match>,
) -> Result<(), EvalError> {
    // run every builtin whose variables are bound
    let mut i = 0;
    while i < pending.len() {
        let atom = &body[pending[i]];
        if let Atom::Builtin { op, left, right } = atom {
            if atom.vars().all(|v| state.bindings.contains_key(v)) {
                let l = numeric(left, &state.bindings, atom)?;
                let r = numeric(right, &state.bindings, atom)?;
                if !op.apply(l, r) {
                    return Ok(());
                }
                state.comparisons.push(Comparison {
                    op: *op,
                    left: l,
                    right: r,
                    atom: atom.to_string(),
                });
                pending.remove(i);
                continue;
            }
        }
        i += 1;
    }
    let Some(pos) = pending.iter().position(|&j| !body[j].is_builtin()) else {
        if pending.is_empty() {
            out.push(state);
        }
        return Ok(());
    };
    let j = pending.remove(pos);
    let graph = match delta {
        Some((k, g)) if k == j => g,
        _ => full,
    };
    for t in candidates(graph, &body[j], &state.bindings) {
        if let Some(bindings) = bind(&body[j], &t, &state.bindings) {
            let mut premises = state.premises.clone();
            premises.push(t);
            let next = Match {
                bindings,
                premises,
                comparisons: state.comparisons.clone(),
            };
            search(full, body, delta, next, pending.clone(), out)?;
        }
    }
    Ok(())
}

/// Every complete extension of `seed` under which all body atoms hold.
pub fn evaluate_body(
    graph: &Graph,
    body: &[Atom],
    seed: &Bindings,
) -> Result<Vec<Bindings>, EvalError> {
    Ok(matches(graph, body, seed, None)?
        .into_iter()
        .map(|m| m.bindings)
        .collect())
}

/// Every head triple `rule` produces over `graph`, whether or not it is
/// already present, one step per distinct (head triple, bindings).
pub fn firings(graph: &Graph, rule: &Rule) -> Result<Vec<ProofStep>, EvalError> {
    let mut out: Vec<ProofStep> = Vec::new();
    for m in matches(graph, &rule.body, &Bindings::new(), None)? {
        for head in &rule.head {
            let Some(triple) = instantiate(head, &m.bindings) else {
                continue;
            };
            if out
                .iter()
                .any(|s| s.derived == triple && s.bindings == m.bindings)
            {
                continue;
            }
            out.push(ProofStep {
                derived: triple,
                rule: rule.name.clone(),
                bindings: m.bindings.clone(),
                premises: m.premises.clone(),
                comparisons: m.comparisons.clone(),
            });
        }
    }
    Ok(out)
}

fn instantiate(atom: &Atom, b: &Bindings) -> Option<Triple> {
    let subject_iri = |arg: &Arg| match resolve(arg, b)? {
        Term::Iri(iri) => Some(iri),
        Term::Literal(_) => None,
    };
    match atom {
        Atom::Class { class, arg } => {
            Some(Triple::new(subject_iri(arg)?, rdf_type(), class.clone()))
        }
        Atom::Property {
            property,
            subject,
            object,
        } => Some(Triple::new(
            subject_iri(subject)?,
            property.clone(),
            resolve(object, b)?,
        )),
        Atom::Builtin { .. } => None,
    }
}

fn graph_atom_indexes(rule: &Rule) -> Vec<usize> {
    (0..rule.body.len())
        .filter(|&j| !rule.body[j].is_builtin())
        .collect()
}

/// Semi-naive forward chaining to fixpoint. After the first round, a rule
/// is only re-evaluated with at least one body atom matched against the
/// previous round's new triples.
pub fn infer(graph: &Graph, rules: &[Rule]) -> Result<Inference, EvalError> {
    let mut all = graph.clone();
    let mut result = Inference::default();
    let mut delta: Option<Graph> = None;
    loop {
        let mut round: BTreeMap<Triple, ProofStep> = BTreeMap::new();
        for rule in rules {
            let found = match &delta {
                None => matches(&all, &rule.body, &Bindings::new(), None)?,
                Some(d) => {
                    let mut found = Vec::new();
                    for j in graph_atom_indexes(rule) {
                        found.extend(matches(&all, &rule.body, &Bindings::new(), Some((j, d)))?);
                    }
                    found
                }
            };
            collect(rule, found, &all, &mut round);
        }
        if round.is_empty() {
            break;
        }
        let mut next = Graph::new();
        for (triple, step) in round {
            all.insert(triple.clone());
            next.insert(triple.clone());
            result.derived.insert(triple);
            result.proofs.push(step);
        }
        delta = Some(next);
    }
    Ok(result)
}

fn collect(rule: &Rule, found: Vec<Match>, all: &Graph, round: &mut BTreeMap<Triple, ProofStep>) {
    for m in found {
        for head in &rule.head {
            let Some(triple) = instantiate(head, &m.bindings) else {
                continue;
            };
            if all.contains(&triple) || round.contains_key(&triple) {
                continue;
            }
            round.insert(
                triple.clone(),
                ProofStep {
                    derived: triple,
                    rule: rule.name.clone(),
                    bindings: m.bindings.clone(),
                    premises: m.premises.clone(),
                    comparisons: m.comparisons.clone(),
                },
            );
        }
    }
}

/// Reference evaluation: re-run every rule over the whole graph until
/// nothing changes. Returns only the derived triples.
pub fn naive_infer(graph: &Graph, rules: &[Rule]) -> Result<Graph, EvalError> {
    let mut all = graph.clone();
    let mut derived = Graph::new();
    loop {
        let mut new = Vec::new();
        for rule in rules {
            for b in evaluate_body(&all, &rule.body, &Bindings::new())? {
                new.extend(rule.head.iter().filter_map(|h| instantiate(h, &b)));
            }
        }
        let mut changed = false;
        for t in new {
            if all.insert(t.clone()) {
                derived.insert(t);
                changed = true;
            }
        }
        if !changed {
            return Ok(derived);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub step: ProofStep,
    /// Explanations of premises that were themselves derived.
    pub supports: Vec<Explanation>,
}

impl Explanation {
    pub fn depth(&self) -> usize {
        1 + self
            .supports
            .iter()
            .map(Explanation::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        let s = &self.step;
        let _ = writeln!(out, "{pad}{} [rule {}]", render_triple(&s.derived), s.rule);
        let bindings: Vec<String> = s
            .bindings
            .iter()
            .map(|(k, v)| format!("?{k}={}", render_term(v)))
            .collect();
        let _ = writeln!(out, "{pad}  bindings: {}", bindings.join(", "));
        for c in &s.comparisons {
            let _ = writeln!(out, "{pad}  holds: {c}");
        }
        for sub in &self.supports {
            sub.render_into(out, indent + 1);
        }
    }
}

/// Explanation tree for a derived triple.
pub fn explain(proofs: &[ProofStep], derived: &Triple) -> Result<Explanation, EvalError> {
    fn build(proofs: &[ProofStep], t: &Triple, seen: &mut Vec<Triple>) -> Option<Explanation> {
        let step = proofs.iter().find(|p| &p.derived == t)?;
        seen.push(t.clone());
        let mut supports = Vec::new();
        for premise in &step.premises {
            if seen.contains(premise) {
                continue;
            }
            supports.extend(build(proofs, premise, seen));
        }
        seen.pop();
        Some(Explanation {
            step: step.clone(),
            supports,
        })
    }
    build(proofs, derived, &mut Vec::new())
        .ok_or_else(|| EvalError::NotDerived(derived.to_string()))
}
