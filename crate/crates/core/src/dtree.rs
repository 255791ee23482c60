//! CART classification trees: training, stratified cross-validation,
//! impurity-decrease feature importance, and root-to-leaf path extraction
//! with conversion to SWRL-lite rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{EncodedRecord, Lab};
use crate::rules::{Arg, Atom, BuiltinOp, Rule};
use crate::store::{Iri, Literal};
use crate::vocab::ONTO;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("no training records")]
    Empty,
    #[error("class counts sum to zero")]
    ZeroCounts,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot make {k} folds from {n} records")]
    Folds { k: usize, n: usize },
    #[error("record is missing feature {0}")]
    MissingFeature(String),
    #[error("no mapping for {0}")]
    Unmapped(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl FromStr for Criterion {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(TreeError::Config(format!("unknown criterion {other:?}"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub random_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_leaf: 1,
            random_seed: 42,
        }
    }
}

/// `counts` must be non-negative with a positive sum.
pub fn impurity(counts: &[usize], criterion: Criterion) -> Result<f64, TreeError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(TreeError::ZeroCounts);
    }
    Ok(impurity_unchecked(counts, total as f64, criterion))
}

fn impurity_unchecked(counts: &[usize], total: f64, criterion: Criterion) -> f64 {
    let probs = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / total);
    match criterion {
        Criterion::Gini => 1.0 - probs.map(|p| p * p).sum::<f64>(),
        Criterion::Entropy => -probs.map(|p| p * p.log2()).sum::<f64>(),
    }
}

/// Feature order used for records; also the split tie-break order.
pub const FEATURES: [&str; 12] = [
    "Age", "Sex", "ALB", "ALP", "ALT", "AST", "BIL", "CHE", "CHOL", "CREA", "GGT", "PROT",
];

pub const N_CATEGORIES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, TreeError> {
        if rows.len() != labels.len() {
            return Err(TreeError::Config("rows and labels differ in length".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != feature_names.len()) {
            return Err(TreeError::Config(format!(
                "row has {} values for {} features",
                r.len(),
                feature_names.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(TreeError::Config(format!("label {l} out of range")));
        }
        Ok(Dataset {
            feature_names,
            rows,
            labels,
            n_classes,
        })
    }

    pub fn from_records(records: &[EncodedRecord]) -> Self {
        Dataset {
            feature_names: FEATURES.iter().map(|s| s.to_string()).collect(),
            rows: records.iter().map(record_features).collect(),
            labels: records.iter().map(|r| r.category.code()).collect(),
            n_classes: N_CATEGORIES,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Feature vector in [`FEATURES`] order.
pub fn record_features(r: &EncodedRecord) -> Vec<f64> {
    let mut v = vec![r.age as f64, r.sex.code() as f64];
    v.extend(Lab::ALL.iter().map(|&lab| r.labs.get(lab)));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        counts: Vec<usize>,
        /// `value <= threshold`
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        counts: Vec<usize>,
        predicted: usize,
    },
}

impl Node {
    pub fn counts(&self) -> &[usize] {
        match self {
            Node::Internal { counts, .. } | Node::Leaf { counts, .. } => counts,
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Internal { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub features: Vec<String>,
    pub n_classes: usize,
    pub criterion: Criterion,
    pub root: Node,
}

/// Argmax with ties going to the lowest class index.
fn argmax(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn class_counts(data: &Dataset, idx: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; data.n_classes];
    for &i in idx {
        counts[data.labels[i]] += 1;
    }
    counts
}

/// Midpoint of two adjacent distinct values, rounded to ten decimals when
/// that keeps it in `[lo, hi)` so thresholds print as `53.05`, not
/// `53.050000000000004`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    let rounded = (mid * 1e10).round() / 1e10;
    if rounded >= lo && rounded < hi {
        rounded
    } else if mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn best_split(data: &Dataset, idx: &[usize], config: &TrainConfig) -> Option<Split> {
    let n = idx.len();
    let msl = config.min_samples_leaf;
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted = idx.to_vec();
    for f in 0..data.feature_names.len() {
        sorted.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]));
        let mut left = vec![0usize; data.n_classes];
        let mut right = class_counts(data, idx);
        for pos in 0..n - 1 {
            let label = data.labels[sorted[pos]];
            left[label] += 1;
            right[label] -= 1;
            let (lo, hi) = (data.rows[sorted[pos]][f], data.rows[sorted[pos + 1]][f]);
            let n_left = pos + 1;
            if lo == hi || n_left < msl || n - n_left < msl {
                continue;
            }
            let score = (n_left as f64
                * impurity_unchecked(&left, n_left as f64, config.criterion)
                + (n - n_left) as f64
                    * impurity_unchecked(&right, (n - n_left) as f64, config.criterion))
                / n as f64;
            // strict: earlier feature, then lower threshold, wins ties
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((f, midpoint(lo, hi), score));
            }
        }
    }
    let (feature, threshold, _) = best?;
    let (left, right) = idx
        .iter()
        .partition(|&&i| data.rows[i][feature] <= threshold);
    Some(Split {
        feature,
        threshold,
        left,
        right,
    })
}

fn grow(data: &Dataset, idx: &[usize], depth: usize, config: &TrainConfig) -> Node {
    let counts = class_counts(data, idx);
    let leaf = |counts: Vec<usize>| Node::Leaf {
        predicted: argmax(&counts),
        counts,
    };
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure
        || config.max_depth.is_some_and(|d| depth >= d)
        || idx.len() < 2 * config.min_samples_leaf
    {
        return leaf(counts);
    }
    match best_split(data, idx, config) {
        None => leaf(counts),
        Some(split) => Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(grow(data, &split.left, depth + 1, config)),
            right: Box::new(grow(data, &split.right, depth + 1, config)),
            counts,
        },
    }
}

pub fn fit(data: &Dataset, config: &TrainConfig) -> Result<DecisionTree, TreeError> {
    if data.is_empty() {
        return Err(TreeError::Empty);
    }
    if config.min_samples_leaf == 0 {
        return Err(TreeError::Config(
            "min_samples_leaf must be at least 1".into(),
        ));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(DecisionTree {
        features: data.feature_names.clone(),
        n_classes: data.n_classes,
        criterion: config.criterion,
        root: grow(data, &idx, 0, config),
    })
}

impl DecisionTree {
    /// Follows `<=` / `>` branches to a leaf.
    pub fn predict(&self, row: &[f64]) -> Result<usize, TreeError> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { predicted, .. } => return Ok(*predicted),
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let value = row
                        .get(*feature)
                        .copied()
                        .filter(|v| !v.is_nan())
                        .ok_or_else(|| {
                            TreeError::MissingFeature(self.features[*feature].clone())
                        })?;
                    node = if value <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Weighted impurity decrease per feature over the records routed
    /// through each split, normalized to sum to 1 (all zero for a leaf).
    pub fn feature_importance(&self, data: &Dataset) -> BTreeMap<String, f64> {
        let mut raw = vec![0.0; self.features.len()];
        let idx: Vec<usize> = (0..data.len()).collect();
        accumulate(&self.root, data, &idx, self.criterion, &mut raw);
        let total: f64 = raw.iter().sum();
        self.features
            .iter()
            .zip(raw)
            .map(|(name, v)| (name.clone(), if total > 0.0 { v / total } else { 0.0 }))
            .collect()
    }

    pub fn extract_paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        walk(&self.root, &self.features, &mut Vec::new(), &mut out);
        out
    }
}

fn accumulate(node: &Node, data: &Dataset, idx: &[usize], criterion: Criterion, raw: &mut [f64]) {
    let Node::Internal {
        feature,
        threshold,
        left,
        right,
        ..
    } = node
    else {
        return;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| data.rows[i][*feature] <= *threshold);
    if !idx.is_empty() {
        let imp = |ids: &[usize]| {
            if ids.is_empty() {
                0.0
            } else {
                impurity_unchecked(&class_counts(data, ids), ids.len() as f64, criterion)
            }
        };
        raw[*feature] +=
            idx.len() as f64 * imp(idx) - l.len() as f64 * imp(&l) - r.len() as f64 * imp(&r);
    }
    accumulate(left, data, &l, criterion, raw);
    accumulate(right, data, &r, criterion, raw);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl CmpOp {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            CmpOp::Le => value <= threshold,
            CmpOp::Gt => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub op: CmpOp,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub conditions: Vec<Condition>,
    pub class: usize,
    pub samples: usize,
}

impl Path {
    pub fn holds(&self, features: &[String], row: &[f64]) -> bool {
        self.conditions.iter().all(|c| {
            features
                .iter()
                .position(|f| *f == c.feature)
                .is_some_and(|i| c.op.holds(row[i], c.threshold))
        })
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let conds: Vec<String> = self
            .conditions
            .iter()
            .map(|c| {
                let op = match c.op {
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                };
                format!("{} {op} {}", c.feature, c.threshold)
            })
            .collect();
        if conds.is_empty() {
            write!(f, "always then class {}", self.class)
        } else {
            write!(f, "if {} then class {}", conds.join(" and "), self.class)
        }
    }
}

fn walk(node: &Node, features: &[String], prefix: &mut Vec<Condition>, out: &mut Vec<Path>) {
    match node {
        Node::Leaf { counts, predicted } => out.push(Path {
            conditions: prefix.clone(),
            class: *predicted,
            samples: counts.iter().sum(),
        }),
        Node::Internal {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            for (op, child) in [(CmpOp::Le, left), (CmpOp::Gt, right)] {
                prefix.push(Condition {
                    feature: features[*feature].clone(),
                    op,
                    threshold: *threshold,
                });
                walk(child, features, prefix, out);
                prefix.pop();
            }
        }
    }
}

/// Head properties for categories 0..=4.
pub const CATEGORY_HEADS: [&str; 5] = [
    "isHealthy",
    "isShowingSigns",
    "isHepatitisCpatient",
    "isFibrosisPatient",
    "isCirrhosisPatient",
];

fn onto(local: &str) -> Iri {
    Iri::new(format!("{ONTO}{local}")).expect("valid ontology IRI")
}

/// Lab features map to `hasValue<LAB>`, Age and Sex to `hasAge`/`hasSex`.
pub fn default_feature_properties() -> BTreeMap<String, Iri> {
    let mut map = BTreeMap::new();
    map.insert("Age".to_string(), onto("hasAge"));
    map.insert("Sex".to_string(), onto("hasSex"));
    for lab in Lab::ALL {
        map.insert(
            lab.name().to_string(),
            onto(&format!("hasValue{}", lab.name())),
        );
    }
    map
}

pub fn default_class_heads() -> BTreeMap<usize, Iri> {
    CATEGORY_HEADS
        .iter()
        .enumerate()
        .map(|(i, h)| (i, onto(h)))
        .collect()
}

/// One rule per path: `Patient(?x)`, then for each condition the value
/// atom (on first use of the feature) and its comparison, and
/// `head(?x, true)`. Rules are named `dt1`, `dt2`, ...
pub fn paths_to_rules(
    paths: &[Path],
    features: &BTreeMap<String, Iri>,
    classes: &BTreeMap<usize, Iri>,
) -> Result<Vec<Rule>, TreeError> {
    let x = Arg::var("x");
    paths
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let mut body = vec![Atom::Class {
                class: onto("Patient"),
                arg: x.clone(),
            }];
            let mut seen: Vec<&str> = Vec::new();
            for c in &path.conditions {
                let var = Arg::var(&c.feature.to_lowercase());
                if !seen.contains(&c.feature.as_str()) {
                    let property = features
                        .get(&c.feature)
                        .ok_or_else(|| TreeError::Unmapped(format!("feature {}", c.feature)))?;
                    body.push(Atom::Property {
                        property: property.clone(),
                        subject: x.clone(),
                        object: var.clone(),
                    });
                    seen.push(&c.feature);
                }
                body.push(Atom::Builtin {
                    op: match c.op {
                        CmpOp::Le => BuiltinOp::LessThanOrEqualTo,
                        CmpOp::Gt => BuiltinOp::GreaterThan,
                    },
                    left: var,
                    right: Arg::Literal(Literal::float(c.threshold)),
                });
            }
            let head = classes
                .get(&path.class)
                .ok_or_else(|| TreeError::Unmapped(format!("class {}", path.class)))?;
            Ok(Rule {
                name: format!("dt{}", i + 1),
                body,
                head: vec![Atom::Property {
                    property: head.clone(),
                    subject: x.clone(),
                    object: Arg::Literal(Literal::boolean(true)),
                }],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Macro averages over all classes.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Support-weighted averages.
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub criterion: Criterion,
    pub folds: usize,
    pub fold_accuracy: Vec<f64>,
}

struct FoldScore {
    accuracy: f64,
    macro_prf: [f64; 3],
    weighted_prf: [f64; 3],
}

fn score_fold(truth: &[usize], pred: &[usize], n_classes: usize) -> FoldScore {
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    let mut macro_prf = [0.0; 3];
    let mut weighted_prf = [0.0; 3];
    for c in 0..n_classes {
        let tp = truth
            .iter()
            .zip(pred)
            .filter(|&(&t, &p)| t == c && p == c)
            .count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let support = truth.iter().filter(|&&t| t == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        for (k, v) in [precision, recall, f1].into_iter().enumerate() {
            macro_prf[k] += v / n_classes as f64;
            weighted_prf[k] += v * support / n;
        }
    }
    FoldScore {
        accuracy: correct as f64 / n,
        macro_prf,
        weighted_prf,
    }
}

/// Stratified fold assignment: each class's indices are shuffled with a
/// seeded ChaCha8 generator and dealt round-robin, continuing the deal
/// across classes so fold sizes differ by at most one.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

pub fn cross_validate(
    data: &Dataset,
    config: &TrainConfig,
    k: usize,
) -> Result<EvalMetrics, TreeError> {
    if k < 2 {
        return Err(TreeError::Config("need at least 2 folds".into()));
    }
    if k > data.len() {
        return Err(TreeError::Folds { k, n: data.len() });
    }
    let folds = stratified_folds(&data.labels, data.n_classes, k, config.random_seed);
    let scores: Vec<Result<FoldScore, TreeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = folds
            .iter()
            .map(|test| {
                let folds = &folds;
                scope.spawn(move || {
                    let train: Vec<usize> = folds
                        .iter()
                        .filter(|f| !std::ptr::eq(*f, test))
                        .flatten()
                        .copied()
                        .collect();
                    let tree = fit(&data.subset(&train), config)?;
                    let truth: Vec<usize> = test.iter().map(|&i| data.labels[i]).collect();
                    let pred = test
                        .iter()
                        .map(|&i| tree.predict(&data.rows[i]))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(score_fold(&truth, &pred, data.n_classes))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    });
    let scores = scores.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean = |f: &dyn Fn(&FoldScore) -> f64| scores.iter().map(f).sum::<f64>() / k as f64;
    Ok(EvalMetrics {
        accuracy: mean(&|s| s.accuracy),
        precision: mean(&|s| s.macro_prf[0]),
        recall: mean(&|s| s.macro_prf[1]),
        f1: mean(&|s| s.macro_prf[2]),
        weighted_precision: mean(&|s| s.weighted_prf[0]),
        weighted_recall: mean(&|s| s.weighted_prf[1]),
        weighted_f1: mean(&|s| s.weighted_prf[2]),
        criterion: config.criterion,
        folds: k,
        fold_accuracy: scores.iter().map(|s| s.accuracy).collect(),
    })
}
