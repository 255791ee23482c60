use std::collections::{BTreeSet, HashMap};
use std::ops::Bound;

use super::term::{Iri, Term, Triple};

type Id = u32;
type Key = (Id, Id, Id);

/// An in-memory RDF graph with set semantics.
///
/// Terms are interned; every triple is stored in three ordered indexes
/// (SPO, POS, OSP) so that any combination of bound positions is answered
/// by a single range scan.
#[derive(Clone, Default)]
pub struct Graph {
    terms: Vec<Term>,
    ids: HashMap<Term, Id>,
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    fn intern(&mut self, term: &Term) -> Id {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = Id::try_from(self.terms.len()).expect("term table overflow");
        self.terms.push(term.clone());
        self.ids.insert(term.clone(), id);
        id
    }

    fn lookup(&self, term: &Term) -> Option<Id> {
        self.ids.get(term).copied()
    }

    /// Returns `true` if the triple was not already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let s = self.intern(&Term::Iri(triple.subject));
        let p = self.intern(&Term::Iri(triple.predicate));
        let o = self.intern(&triple.object);
        if !self.spo.insert((s, p, o)) {
            return false;
        }
        self.pos.insert((p, o, s));
        self.osp.insert((o, s, p));
        true
    }

    pub fn remove(&mut self, triple: &Triple) -> bool {
        let key = match self.key_of(triple) {
            Some(key) => key,
            None => return false,
        };
        let (s, p, o) = key;
        if !self.spo.remove(&key) {
            return false;
        }
        self.pos.remove(&(p, o, s));
        self.osp.remove(&(o, s, p));
        true
    }

    fn key_of(&self, triple: &Triple) -> Option<Key> {
        Some((
            self.lookup(&Term::Iri(triple.subject.clone()))?,
            self.lookup(&Term::Iri(triple.predicate.clone()))?,
            self.lookup(&triple.object)?,
        ))
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.key_of(triple).is_some_and(|k| self.spo.contains(&k))
    }

    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, triples: I) -> usize {
        triples
            .into_iter()
            .filter(|t| self.insert(t.clone()))
            .count()
    }

    fn triple_of(&self, (s, p, o): Key) -> Triple {
        let iri = |id: Id| match &self.terms[id as usize] {
            Term::Iri(iri) => iri.clone(),
            Term::Literal(_) => unreachable!("literal interned in IRI position"),
        };
        Triple {
            subject: iri(s),
            predicate: iri(p),
            object: self.terms[o as usize].clone(),
        }
    }

    fn scan_keys(&self, s: Option<Id>, p: Option<Id>, o: Option<Id>) -> Vec<Key> {
        fn prefix(index: &BTreeSet<Key>, a: Option<Id>, b: Option<Id>) -> Vec<Key> {
            let (lo, hi) = match (a, b) {
                (None, _) => return index.iter().copied().collect(),
                (Some(a), None) => ((a, 0, 0), (a, Id::MAX, Id::MAX)),
                (Some(a), Some(b)) => ((a, b, 0), (a, b, Id::MAX)),
            };
            index
                .range((Bound::Included(lo), Bound::Included(hi)))
                .copied()
                .collect()
        }
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                if self.spo.contains(&(s, p, o)) {
                    vec![(s, p, o)]
                } else {
                    Vec::new()
                }
            }
            (Some(_), _, None) => prefix(&self.spo, s, p),
            (None, Some(_), _) => prefix(&self.pos, p, o)
                .into_iter()
                .map(|(p, o, s)| (s, p, o))
                .collect(),
            (_, None, Some(_)) => prefix(&self.osp, o, s)
                .into_iter()
                .map(|(o, s, p)| (s, p, o))
                .collect(),
            (None, None, None) => self.spo.iter().copied().collect(),
        }
    }

    /// Interned ids for a pattern; `None` when a bound term is unknown and
    /// the pattern therefore matches nothing.
    #[allow(clippy::type_complexity)]
    fn resolve(
        &self,
        s: Option<&Iri>,
        p: Option<&Iri>,
        o: Option<&Term>,
    ) -> Option<(Option<Id>, Option<Id>, Option<Id>)> {
        let iri_id = |iri: Option<&Iri>| match iri {
            None => Some(None),
            Some(iri) => self.lookup(&Term::Iri(iri.clone())).map(Some),
        };
        let o = match o {
            None => None,
            Some(o) => Some(self.lookup(o)?),
        };
        Some((iri_id(s)?, iri_id(p)?, o))
    }

    /// Triples agreeing with every bound position, in ascending
    /// (subject, predicate, object) order.
    pub fn matches(&self, s: Option<&Iri>, p: Option<&Iri>, o: Option<&Term>) -> Vec<Triple> {
        let Some((s, p, o)) = self.resolve(s, p, o) else {
            return Vec::new();
        };
        let mut out: Vec<Triple> = self
            .scan_keys(s, p, o)
            .into_iter()
            .map(|k| self.triple_of(k))
            .collect();
        out.sort();
        out
    }

    /// Number of triples matching the pattern, without materializing them.
    pub fn count(&self, s: Option<&Iri>, p: Option<&Iri>, o: Option<&Term>) -> usize {
        match self.resolve(s, p, o) {
            Some((s, p, o)) => self.scan_keys(s, p, o).len(),
            None => 0,
        }
    }

    /// All triples in canonical order.
    pub fn triples(&self) -> Vec<Triple> {
        self.matches(None, None, None)
    }

    /// Iterates in index order (not canonical term order).
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|&k| self.triple_of(k))
    }

    /// Distinct subjects in canonical order.
    pub fn subjects(&self) -> Vec<Iri> {
        let mut seen = BTreeSet::new();
        for &(s, _, _) in &self.spo {
            seen.insert(s);
        }
        let mut out: Vec<Iri> = seen
            .into_iter()
            .filter_map(|id| self.terms[id as usize].as_iri().cloned())
            .collect();
        out.sort();
        out
    }

    pub fn union(&self, other: &Graph) -> Graph {
        let mut g = self.clone();
        g.extend(other.iter());
        g
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().all(|t| other.contains(&t))
    }
}

impl Eq for Graph {}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.triples()).finish()
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = Graph::new();
        g.extend(iter);
        g
    }
}
