//! Classifiers used to accept or discard generated rows, and for evaluation.
//!
//! Two built-ins are provided: k-nearest-neighbours over a mixed
//! numeric/categorical metric, and a bagged forest of Gini decision trees.
//! Externally produced predictions can be brought in through a CSV of
//! `(index, label)` pairs; see [`PredictionTable`].

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::data::{Dataset, FeatureKind, Schema, Value};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Term {
    Numeric { scale: f64, active: bool },
    Categorical,
}

/// Heterogeneous distance: standardized Euclidean on numeric features plus a
/// fixed penalty per categorical mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistance {
    terms: Vec<Term>,
    penalty: f64,
}

impl MixedDistance {
    /// Scales are the population standard deviations of `rows`. A feature
    /// with zero spread gets scale 1 and is left out of the sum.
    pub fn fit<'a>(
        schema: &Schema,
        rows: impl IntoIterator<Item = &'a [Value]>,
        penalty: f64,
    ) -> Self {
        let p = schema.features().len();
        let (mut n, mut sum, mut sq) = (0usize, vec![0.0; p], vec![0.0; p]);
        for row in rows {
            n += 1;
            for (j, v) in row.iter().enumerate() {
                if let Value::Num(x) = v {
                    sum[j] += x;
                    sq[j] += x * x;
                }
            }
        }
        let terms = schema
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| match f.kind {
                FeatureKind::Categorical { .. } => Term::Categorical,
                FeatureKind::Numeric { .. } => {
                    let var = if n > 0 {
                        let m = sum[j] / n as f64;
                        (sq[j] / n as f64 - m * m).max(0.0)
                    } else {
                        0.0
                    };
                    let sd = var.sqrt();
                    if sd > 1e-12 * (sum[j] / n.max(1) as f64).abs().max(1.0) {
                        Term::Numeric {
                            scale: sd,
                            active: true,
                        }
                    } else {
                        Term::Numeric {
                            scale: 1.0,
                            active: false,
                        }
                    }
                }
            })
            .collect();
        MixedDistance { terms, penalty }
    }

    /// Explicit per-feature scales; `None` marks a categorical feature.
    pub fn with_scales(scales: &[Option<f64>], penalty: f64) -> Self {
        let terms = scales
            .iter()
            .map(|s| match s {
                Some(s) if *s > 0.0 => Term::Numeric {
                    scale: *s,
                    active: true,
                },
                Some(_) => Term::Numeric {
                    scale: 1.0,
                    active: false,
                },
                None => Term::Categorical,
            })
            .collect();
        MixedDistance { terms, penalty }
    }

    pub fn scales(&self) -> Vec<Option<f64>> {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Numeric { scale, .. } => Some(*scale),
                Term::Categorical => None,
            })
            .collect()
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn distance(&self, a: &[Value], b: &[Value]) -> f64 {
        self.squared(a, b).sqrt()
    }

    fn squared(&self, a: &[Value], b: &[Value]) -> f64 {
        let mut acc = 0.0;
        for ((t, x), y) in self.terms.iter().zip(a).zip(b) {
            match (t, x, y) {
                (Term::Numeric { active: false, .. }, _, _) => {}
                (Term::Numeric { scale, .. }, Value::Num(x), Value::Num(y)) => {
                    let d = (x - y) / scale;
                    acc += d * d;
                }
                (_, x, y) => {
                    if x != y {
                        acc += self.penalty * self.penalty;
                    }
                }
            }
        }
        acc
    }
}

pub fn mixed_distance(a: &[Value], b: &[Value], m: &MixedDistance) -> f64 {
    m.distance(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Knn {
        k: usize,
    },
    Forest {
        trees: usize,
        max_depth: usize,
        min_leaf: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn knn(k: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Knn { k },
            seed: 0,
        }
    }

    pub fn forest(trees: usize, max_depth: usize, min_leaf: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Forest {
                trees,
                max_depth,
                min_leaf,
            },
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ClassifierKind::Knn { k } => k >= 1,
            ClassifierKind::Forest {
                trees,
                max_depth,
                min_leaf,
            } => trees >= 1 && max_depth >= 1 && min_leaf >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "classifier parameters must be >= 1: {self}"
            )))
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ClassifierKind::Knn { k } => write!(f, "knn:k={k}"),
            ClassifierKind::Forest {
                trees,
                max_depth,
                min_leaf,
            } => write!(
                f,
                "forest:trees={trees},depth={max_depth},min_leaf={min_leaf}"
            ),
        }
    }
}

/// `knn:k=5` or `forest:trees=50,depth=8[,min_leaf=1]`. Unset fields take defaults.
impl FromStr for ClassifierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidConfig(format!("classifier `{s}`: {msg}"));
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{value}` is not a positive integer")))?;
            kv.push((key.trim(), value));
        }
        let mut spec = match name.trim() {
            "knn" => ClassifierSpec::knn(5),
            "forest" => ClassifierSpec::forest(50, 8, 1),
            other => return Err(bad(format!("unknown classifier `{other}`"))),
        };
        for (key, value) in kv {
            match (&mut spec.kind, key) {
                (ClassifierKind::Knn { k }, "k") => *k = value,
                (ClassifierKind::Forest { trees, .. }, "trees") => *trees = value,
                (ClassifierKind::Forest { max_depth, .. }, "depth" | "max_depth") => {
                    *max_depth = value
                }
                (ClassifierKind::Forest { min_leaf, .. }, "min_leaf" | "leaf") => *min_leaf = value,
                _ => return Err(bad(format!("unknown parameter `{key}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
enum Model {
    Knn {
        k: usize,
        metric: MixedDistance,
        rows: Vec<Vec<Value>>,
        labels: Vec<usize>,
    },
    Forest {
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone)]
pub struct FittedClassifier {
    schema: Arc<Schema>,
    /// Tie-break rank per class index: rarer in training first, then lexical.
    tie_rank: Vec<usize>,
    model: Model,
}

pub fn train(spec: &ClassifierSpec, d: &Dataset) -> Result<FittedClassifier> {
    spec.validate()?;
    let schema = d.shared_schema();
    let labels: Vec<usize> = d
        .rows()
        .iter()
        .map(|r| schema.class_index(&r.label).expect("validated label"))
        .collect();
    let mut freq = vec![0usize; schema.classes().len()];
    for &l in &labels {
        freq[l] += 1;
    }
    if freq.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateTraining);
    }
    let mut order: Vec<usize> = (0..freq.len()).collect();
    order.sort_by(|&a, &b| {
        freq[a]
            .cmp(&freq[b])
            .then_with(|| schema.classes()[a].cmp(&schema.classes()[b]))
    });
    let mut tie_rank = vec![0; freq.len()];
    for (rank, &c) in order.iter().enumerate() {
        tie_rank[c] = rank;
    }

    let model = match spec.kind {
        ClassifierKind::Knn { k } => {
            let rows: Vec<Vec<Value>> = d.rows().iter().map(|r| r.values.clone()).collect();
            let metric = MixedDistance::fit(&schema, rows.iter().map(Vec::as_slice), 1.0);
            Model::Knn {
                k,
                metric,
                rows,
                labels,
            }
        }
        ClassifierKind::Forest {
            trees,
            max_depth,
            min_leaf,
        } => {
            let rows: Vec<&[Value]> = d.rows().iter().map(|r| r.values.as_slice()).collect();
            let p = schema.features().len();
            let params = TreeParams {
                max_depth,
                min_leaf,
                n_classes: freq.len(),
                max_features: if trees == 1 {
                    p
                } else {
                    ((p as f64).sqrt() as usize).max(1)
                },
            };
            let built = (0..trees)
                .map(|t| {
                    let mut rng = seed::rng(spec.seed, &[seed::text_key("tree"), t as u64]);
                    let sample: Vec<usize> = if trees == 1 {
                        (0..rows.len()).collect()
                    } else {
                        (0..rows.len())
                            .map(|_| rng.random_range(0..rows.len()))
                            .collect()
                    };
                    Tree::grow(&rows, &labels, sample, &params, &tie_rank, &mut rng)
                })
                .collect();
            Model::Forest { trees: built }
        }
    };
    Ok(FittedClassifier {
        schema,
        tie_rank,
        model,
    })
}

fn vote(counts: &[usize], tie_rank: &[usize]) -> usize {
    (0..counts.len())
        .max_by(|&a, &b| {
            counts[a]
                .cmp(&counts[b])
                .then(tie_rank[b].cmp(&tie_rank[a]))
        })
        .expect("at least one class")
}

impl FittedClassifier {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn predict(&self, row: &[Value]) -> Result<String> {
        self.predict_index(row)
            .map(|i| self.schema.classes()[i].clone())
    }

    pub fn predict_index(&self, row: &[Value]) -> Result<usize> {
        self.schema.check_values(row)?;
        let n_classes = self.schema.classes().len();
        let mut counts = vec![0usize; n_classes];
        match &self.model {
            Model::Knn {
                k,
                metric,
                rows,
                labels,
            } => {
                let mut dist: Vec<(f64, usize)> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (metric.squared(row, r), i))
                    .collect();
                let k = (*k).min(dist.len());
                let cmp =
                    |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                for &(_, i) in &dist[..k] {
                    counts[labels[i]] += 1;
                }
            }
            Model::Forest { trees } => {
                for t in trees {
                    counts[t.predict(row)] += 1;
                }
            }
        }
        Ok(vote(&counts, &self.tie_rank))
    }

    pub fn predict_all(&self, rows: &[Vec<Value>]) -> Result<Vec<String>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

pub fn predict(c: &FittedClassifier, row: &[Value]) -> Result<String> {
    c.predict(row)
}

/// Keep the candidates the classifier assigns to `target`, in input order.
pub fn filter_generated(
    c: &FittedClassifier,
    target: &str,
    candidates: Vec<Vec<Value>>,
) -> Result<(Vec<Vec<Value>>, usize)> {
    let target = c
        .schema
        .class_index(target)
        .ok_or_else(|| Error::UnknownLabel(target.to_string()))?;
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for row in candidates {
        if c.predict_index(&row)? == target {
            accepted.push(row);
        } else {
            rejected += 1;
        }
    }
    Ok((accepted, rejected))
}

#[derive(Debug, Clone, Copy)]
struct TreeParams {
    max_depth: usize,
    min_leaf: usize,
    n_classes: usize,
    max_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Test {
    AtMost(f64),
    Equals(String),
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        test: Test,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    test: Test,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl Tree {
    fn grow<R: Rng>(
        rows: &[&[Value]],
        labels: &[usize],
        sample: Vec<usize>,
        params: &TreeParams,
        tie_rank: &[usize],
        rng: &mut R,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.build(rows, labels, sample, 0, params, tie_rank, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn build<R: Rng>(
        &mut self,
        rows: &[&[Value]],
        labels: &[usize],
        idx: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        tie_rank: &[usize],
        rng: &mut R,
    ) -> usize {
        let mut counts = vec![0usize; params.n_classes];
        for &i in &idx {
            counts[labels[i]] += 1;
        }
        let node = self.nodes.len();
        self.nodes.push(Node::Leaf(vote(&counts, tie_rank)));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= params.max_depth || idx.len() < 2 * params.min_leaf {
            return node;
        }
        let parent = gini(&counts, idx.len());
        let p = rows[0].len();
        let chosen: Vec<usize> = if params.max_features >= p {
            (0..p).collect()
        } else {
            sample_indices(rng, p, params.max_features).into_vec()
        };
        let mut best = best_split(rows, labels, &idx, &chosen, params);
        if best.is_none() && chosen.len() < p {
            let rest: Vec<usize> = (0..p).filter(|j| !chosen.contains(j)).collect();
            best = best_split(rows, labels, &idx, &rest, params);
        }
        let Some(best) = best.filter(|b| b.impurity < parent - 1e-12) else {
            return node;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| passes(&best.test, &rows[i][best.feature]));
        let l = self.build(rows, labels, left, depth + 1, params, tie_rank, rng);
        let r = self.build(rows, labels, right, depth + 1, params, tie_rank, rng);
        self.nodes[node] = Node::Split {
            feature: best.feature,
            test: best.test,
            left: l,
            right: r,
        };
        node
    }

    fn predict(&self, row: &[Value]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(c) => return *c,
                Node::Split {
                    feature,
                    test,
                    left,
                    right,
                } => {
                    at = if passes(test, &row[*feature]) {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

fn passes(test: &Test, v: &Value) -> bool {
    match (test, v) {
        (Test::AtMost(t), Value::Num(x)) => x <= t,
        (Test::Equals(c), Value::Cat(s)) => c == s,
        _ => false,
    }
}

/// Lowest weighted child Gini over the given features, respecting `min_leaf`.
fn best_split(
    rows: &[&[Value]],
    labels: &[usize],
    idx: &[usize],
    features: &[usize],
    params: &TreeParams,
) -> Option<Candidate> {
    let n = idx.len();
    let mut best: Option<Candidate> = None;
    let mut consider = |impurity: f64, feature: usize, test: Test| {
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            best = Some(Candidate {
                impurity,
                feature,
                test,
            });
        }
    };
    for &j in features {
        match rows[idx[0]][j] {
            Value::Num(_) => {
                let mut sorted: Vec<(f64, usize)> = idx
                    .iter()
                    .map(|&i| (rows[i][j].as_num().unwrap_or(f64::NAN), labels[i]))
                    .collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut left = vec![0usize; params.n_classes];
                let mut right = vec![0usize; params.n_classes];
                for &(_, l) in &sorted {
                    right[l] += 1;
                }
                for s in 0..n - 1 {
                    let (x, l) = sorted[s];
                    left[l] += 1;
                    right[l] -= 1;
                    let next = sorted[s + 1].0;
                    let nl = s + 1;
                    if x == next || nl < params.min_leaf || n - nl < params.min_leaf {
                        continue;
                    }
                    let imp = (nl as f64 * gini(&left, nl)
                        + (n - nl) as f64 * gini(&right, n - nl))
                        / n as f64;
                    let mut thr = x + (next - x) / 2.0;
                    if thr >= next {
                        thr = x;
                    }
                    consider(imp, j, Test::AtMost(thr));
                }
            }
            Value::Cat(_) => {
                let mut cats: Vec<(&str, Vec<usize>)> = Vec::new();
                let mut total = vec![0usize; params.n_classes];
                for &i in idx {
                    let c = rows[i][j].as_cat().unwrap_or("");
                    total[labels[i]] += 1;
                    match cats.iter_mut().find(|(k, _)| *k == c) {
                        Some((_, v)) => v[labels[i]] += 1,
                        None => {
                            let mut v = vec![0usize; params.n_classes];
                            v[labels[i]] += 1;
                            cats.push((c, v));
                        }
                    }
                }
                cats.sort_by(|a, b| a.0.cmp(b.0));
                if cats.len() < 2 {
                    continue;
                }
                for (c, inside) in &cats {
                    let nl: usize = inside.iter().sum();
                    if nl < params.min_leaf || n - nl < params.min_leaf {
                        continue;
                    }
                    let outside: Vec<usize> =
                        total.iter().zip(inside).map(|(t, i)| t - i).collect();
                    let imp = (nl as f64 * gini(inside, nl)
                        + (n - nl) as f64 * gini(&outside, n - nl))
                        / n as f64;
                    consider(imp, j, Test::Equals(c.to_string()));
                }
            }
        }
    }
    best
}

/// Externally produced predictions: one `(row index, label)` pair per line
/// under an `index,label` header.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    entries: Vec<(usize, String)>,
}

impl PredictionTable {
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Predictions(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Predictions(format!("header lacks `{name}` column")))
        };
        let (ic, lc) = (col("index")?, col("label")?);
        let mut entries = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Predictions(e.to_string()))?;
            let raw = rec.get(ic).unwrap_or("").trim();
            let index = raw.parse::<usize>().map_err(|_| {
                Error::Predictions(format!("line {}: `{raw}` is not a row index", line + 2))
            })?;
            entries.push((index, rec.get(lc).unwrap_or("").to_string()));
        }
        Ok(PredictionTable { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn from_labels(labels: &[String]) -> Self {
        PredictionTable {
            entries: labels.iter().cloned().enumerate().collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, String)] {
        &self.entries
    }

    /// One label per row `0..n`. Every index must appear exactly once and every
    /// label must belong to `schema`.
    pub fn labels_for(&self, n: usize, schema: &Schema) -> Result<Vec<String>> {
        let mut out: Vec<Option<String>> = vec![None; n];
        for (i, label) in &self.entries {
            if *i >= n {
                return Err(Error::Predictions(format!(
                    "row index {i} out of range (0..{n})"
                )));
            }
            if !schema.has_class(label) {
                return Err(Error::UnknownLabel(label.clone()));
            }
            if out[*i].replace(label.clone()).is_some() {
                return Err(Error::Predictions(format!("row index {i} listed twice")));
            }
        }
        let missing: Vec<usize> = (0..n).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let shown: Vec<String> = missing.iter().take(20).map(usize::to_string).collect();
            let more = if missing.len() > 20 { ", ..." } else { "" };
            return Err(Error::Predictions(format!(
                "{} row(s) without a prediction: {}{more}",
                missing.len(),
                shown.join(", ")
            )));
        }
        Ok(out.into_iter().map(|l| l.expect("checked")).collect())
    }
}

/// Filter candidates using an external prediction table indexed by candidate position.
pub fn filter_by_predictions(
    table: &PredictionTable,
    schema: &Schema,
    target: &str,
    candidates: Vec<Vec<Value>>,
) -> Result<(Vec<Vec<Value>>, usize)> {
    if !schema.has_class(target) {
        return Err(Error::UnknownLabel(target.to_string()));
    }
    let labels = table.labels_for(candidates.len(), schema)?;
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for (row, label) in candidates.into_iter().zip(labels) {
        if label == target {
            accepted.push(row);
        } else {
            rejected += 1;
        }
    }
    Ok((accepted, rejected))
}
