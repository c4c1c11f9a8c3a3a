//! Tabular datasets: schema, CSV ingestion, seeded splitting and class summaries.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// What to do with a numeric value that falls outside its declared bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundPolicy {
    #[default]
    None,
    Clamp,
    Reject,
}

/// Closed interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidSchema(format!(
                "bounds [{lower}, {upper}] are not an interval"
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Numeric {
        bounds: Option<Bounds>,
        policy: BoundPolicy,
    },
    Categorical {
        categories: Option<Vec<String>>,
    },
}

impl FeatureKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureKind::Numeric { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    features: Vec<Feature>,
    target: String,
    classes: Vec<String>,
}

impl Schema {
    pub fn new(
        features: Vec<Feature>,
        target: impl Into<String>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let target = target.into();
        if features.is_empty() {
            return Err(Error::InvalidSchema(
                "at least one feature is required".into(),
            ));
        }
        if classes.len() < 2 {
            return Err(Error::InvalidSchema(
                "at least two target classes are required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature `{}`",
                    f.name
                )));
            }
            match &f.kind {
                FeatureKind::Numeric {
                    bounds: Some(b), ..
                } => {
                    Bounds::new(b.lower, b.upper)?;
                }
                FeatureKind::Numeric {
                    bounds: None,
                    policy,
                } if *policy != BoundPolicy::None => {
                    return Err(Error::InvalidSchema(format!(
                        "feature `{}` has a bound policy but no bounds",
                        f.name
                    )));
                }
                FeatureKind::Categorical {
                    categories: Some(c),
                } => {
                    if c.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "feature `{}` has an empty category list",
                            f.name
                        )));
                    }
                    let uniq: HashSet<_> = c.iter().collect();
                    if uniq.len() != c.len() {
                        return Err(Error::InvalidSchema(format!(
                            "feature `{}` lists a category twice",
                            f.name
                        )));
                    }
                }
                _ => {}
            }
        }
        if seen.contains(target.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "target `{target}` is also a feature name"
            )));
        }
        let uniq: HashSet<_> = classes.iter().collect();
        if uniq.len() != classes.len() {
            return Err(Error::InvalidSchema("target classes must be unique".into()));
        }
        Ok(Schema {
            features,
            target,
            classes,
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn has_class(&self, label: &str) -> bool {
        self.classes.iter().any(|c| c == label)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Parse the TOML schema document (`[target]` plus `[[feature]]` entries).
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawSchema = toml::from_str(s)?;
        raw.into_schema()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawSchema {
            target: RawTarget {
                name: self.target.clone(),
                classes: self.classes.clone(),
            },
            feature: self
                .features
                .iter()
                .map(|f| match &f.kind {
                    FeatureKind::Numeric { bounds, policy } => RawFeature {
                        name: f.name.clone(),
                        kind: RawKind::Numeric,
                        min: bounds.map(|b| b.lower).filter(|v| v.is_finite()),
                        max: bounds.map(|b| b.upper).filter(|v| v.is_finite()),
                        bound_policy: bounds.map(|_| *policy),
                        categories: None,
                    },
                    FeatureKind::Categorical { categories } => RawFeature {
                        name: f.name.clone(),
                        kind: RawKind::Categorical,
                        min: None,
                        max: None,
                        bound_policy: None,
                        categories: categories.clone(),
                    },
                })
                .collect(),
        };
        toml::to_string(&raw).expect("schema serializes to TOML")
    }

    /// Check that a bare feature vector fits this schema.
    pub fn check_values(&self, values: &[Value]) -> Result<()> {
        if values.len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} feature values, got {}",
                self.features.len(),
                values.len()
            )));
        }
        for (f, v) in self.features.iter().zip(values) {
            let ok = matches!(
                (&f.kind, v),
                (FeatureKind::Numeric { .. }, Value::Num(_))
                    | (FeatureKind::Categorical { .. }, Value::Cat(_))
            );
            if !ok {
                return Err(Error::SchemaMismatch(format!(
                    "value kind does not match feature `{}`",
                    f.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    target: RawTarget,
    #[serde(default)]
    feature: Vec<RawFeature>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    name: String,
    classes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeature {
    name: String,
    kind: RawKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_policy: Option<BoundPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

impl RawSchema {
    fn into_schema(self) -> Result<Schema> {
        let features = self
            .feature
            .into_iter()
            .map(|f| {
                let kind = match f.kind {
                    RawKind::Numeric => {
                        if f.categories.is_some() {
                            return Err(Error::InvalidSchema(format!(
                                "numeric feature `{}` cannot list categories",
                                f.name
                            )));
                        }
                        let bounds = match (f.min, f.max) {
                            (None, None) => None,
                            (lo, hi) => Some(Bounds::new(
                                lo.unwrap_or(f64::NEG_INFINITY),
                                hi.unwrap_or(f64::INFINITY),
                            )?),
                        };
                        let policy = match (bounds, f.bound_policy) {
                            (Some(_), None) => BoundPolicy::Clamp,
                            (_, p) => p.unwrap_or_default(),
                        };
                        FeatureKind::Numeric { bounds, policy }
                    }
                    RawKind::Categorical => {
                        if f.min.is_some() || f.max.is_some() || f.bound_policy.is_some() {
                            return Err(Error::InvalidSchema(format!(
                                "categorical feature `{}` cannot carry numeric bounds",
                                f.name
                            )));
                        }
                        FeatureKind::Categorical {
                            categories: f.categories,
                        }
                    }
                };
                Ok(Feature { name: f.name, kind })
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(features, self.target.name, self.target.classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: Vec<Value>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(schema: impl Into<Arc<Schema>>, rows: Vec<Row>) -> Result<Self> {
        let schema = schema.into();
        for (i, row) in rows.iter().enumerate() {
            check_row(&schema, row, i + 1)?;
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows are checked against the schema before being appended.
    pub fn extended(&self, extra: Vec<Row>) -> Result<Dataset> {
        let base = self.rows.len();
        for (i, row) in extra.iter().enumerate() {
            check_row(&self.schema, row, base + i + 1)?;
        }
        let mut rows = self.rows.clone();
        rows.extend(extra);
        Ok(Dataset {
            schema: Arc::clone(&self.schema),
            rows,
        })
    }

    pub fn with_rows(&self, rows: Vec<Row>) -> Result<Dataset> {
        Dataset::new(Arc::clone(&self.schema), rows)
    }

    pub fn numeric_column(&self, j: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.values[j].as_num())
            .collect()
    }

    pub fn categorical_column(&self, j: usize) -> Vec<&str> {
        self.rows
            .iter()
            .filter_map(|r| r.values[j].as_cat())
            .collect()
    }

    /// Row counts per schema class, in schema class order (zeros included).
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0usize; self.schema.classes.len()];
        for row in &self.rows {
            if let Some(i) = self.schema.class_index(&row.label) {
                counts[i] += 1;
            }
        }
        self.schema.classes.iter().cloned().zip(counts).collect()
    }

    pub fn rows_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.label == label)
    }

    /// Read a dataset from CSV. Extra columns are ignored; data rows are numbered from 1.
    pub fn from_csv_reader<R: Read>(reader: R, schema: impl Into<Arc<Schema>>) -> Result<Self> {
        let schema = schema.into();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(0, e))?.clone();
        let position = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::SchemaMismatch(format!("column `{name}` missing from header"))
            })
        };
        let feature_cols = schema
            .features
            .iter()
            .map(|f| position(&f.name))
            .collect::<Result<Vec<_>>>()?;
        let target_col = position(&schema.target)?;

        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row_no = i + 1;
            let record = record.map_err(|e| csv_error(row_no, e))?;
            let mut values = Vec::with_capacity(feature_cols.len());
            for (f, &col) in schema.features.iter().zip(&feature_cols) {
                let cell = record.get(col).unwrap_or("");
                values.push(parse_cell(f, cell, row_no)?);
            }
            let label = record.get(target_col).unwrap_or("");
            if !schema.has_class(label) {
                return Err(Error::UnknownLabel(label.to_string()));
            }
            rows.push(Row {
                values,
                label: label.to_string(),
            });
        }
        Ok(Dataset { schema, rows })
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self
            .schema
            .features
            .iter()
            .map(|f| f.name.as_str())
            .collect();
        header.push(&self.schema.target);
        wtr.write_record(&header).map_err(|e| csv_error(0, e))?;
        let mut cells = Vec::with_capacity(header.len());
        for row in &self.rows {
            cells.clear();
            cells.extend(row.values.iter().map(Value::to_string));
            cells.push(row.label.clone());
            wtr.write_record(&cells).map_err(|e| csv_error(0, e))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }
}

fn check_row(schema: &Schema, row: &Row, row_no: usize) -> Result<()> {
    schema.check_values(&row.values)?;
    if !schema.has_class(&row.label) {
        return Err(Error::UnknownLabel(row.label.clone()));
    }
    for (f, v) in schema.features.iter().zip(&row.values) {
        match (&f.kind, v) {
            (FeatureKind::Numeric { bounds, .. }, Value::Num(x)) => {
                if !x.is_finite() || bounds.is_some_and(|b| !b.contains(*x)) {
                    return Err(Error::BoundsViolation {
                        row: row_no,
                        column: f.name.clone(),
                        value: *x,
                    });
                }
            }
            (
                FeatureKind::Categorical {
                    categories: Some(c),
                },
                Value::Cat(s),
            ) => {
                if !c.contains(s) {
                    return Err(Error::UnknownCategory {
                        row: row_no,
                        column: f.name.clone(),
                        value: s.clone(),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn parse_cell(f: &Feature, cell: &str, row: usize) -> Result<Value> {
    let parse_err = |message: String| Error::Parse {
        row,
        column: f.name.clone(),
        message,
    };
    match &f.kind {
        FeatureKind::Numeric { bounds, policy } => {
            let x: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("`{cell}` is not a number")))?;
            if !x.is_finite() {
                return Err(parse_err(format!("`{cell}` is not finite")));
            }
            match bounds {
                Some(b) if !b.contains(x) => match policy {
                    BoundPolicy::Clamp => Ok(Value::Num(b.clamp(x))),
                    BoundPolicy::Reject | BoundPolicy::None => Err(Error::BoundsViolation {
                        row,
                        column: f.name.clone(),
                        value: x,
                    }),
                },
                _ => Ok(Value::Num(x)),
            }
        }
        FeatureKind::Categorical { categories } => {
            if cell.is_empty() {
                return Err(parse_err("missing value".into()));
            }
            if let Some(c) = categories {
                if !c.iter().any(|k| k == cell) {
                    return Err(Error::UnknownCategory {
                        row,
                        column: f.name.clone(),
                        value: cell.to_string(),
                    });
                }
            }
            Ok(Value::Cat(cell.to_string()))
        }
    }
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
        _ => Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        },
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: impl Into<Arc<Schema>>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    Dataset::from_csv_reader(std::io::BufReader::new(file), schema)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64, stratified: bool) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test fraction {test_fraction} must lie strictly between 0 and 1"
            )));
        }
        Ok(SplitSpec {
            test_fraction,
            seed,
            stratified,
        })
    }
}

/// Seeded train/test partition. Both halves keep the input's row order.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    let spec = SplitSpec::new(spec.test_fraction, spec.seed, spec.stratified)?;
    let n = d.len();
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    let mut is_test = vec![false; n];

    if spec.stratified {
        let classes = d.schema().classes();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
        for (i, row) in d.rows.iter().enumerate() {
            members[d.schema.class_index(&row.label).expect("validated label")].push(i);
        }
        let quotas: Vec<f64> = members
            .iter()
            .map(|m| m.len() as f64 * spec.test_fraction)
            .collect();
        let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..classes.len()).collect();
        // largest remainder first; class order breaks ties
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut missing = n_test.saturating_sub(alloc.iter().sum());
        for &c in order.iter().cycle().take(classes.len() * 2) {
            if missing == 0 {
                break;
            }
            if alloc[c] < members[c].len() {
                alloc[c] += 1;
                missing -= 1;
            }
        }
        for (c, idx) in members.iter_mut().enumerate() {
            let mut rng = seed::rng(
                spec.seed,
                &[seed::text_key("split"), seed::text_key(&classes[c])],
            );
            idx.shuffle(&mut rng);
            for &i in idx.iter().take(alloc[c]) {
                is_test[i] = true;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = seed::rng(spec.seed, &[seed::text_key("split")]);
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(n_test) {
            is_test[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (row, t) in d.rows.iter().zip(is_test) {
        if t {
            test.push(row.clone());
        } else {
            train.push(row.clone());
        }
    }
    let train = Dataset {
        schema: d.shared_schema(),
        rows: train,
    };
    for (label, count) in d.class_counts() {
        if count > 0 && train.rows_of(&label).next().is_none() {
            return Err(Error::DegenerateSplit(label));
        }
    }
    let test = Dataset {
        schema: d.shared_schema(),
        rows: test,
    };
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassShare {
    pub label: String,
    pub count: usize,
    /// Percentage of all rows, 0..=100.
    pub share: f64,
}

/// Per-class counts and percentage shares for the labels that occur in `d`,
/// in schema class order.
pub fn class_shares(d: &Dataset) -> Vec<ClassShare> {
    let total = d.len() as f64;
    d.class_counts()
        .into_iter()
        .filter(|(_, c)| *c > 0)
        .map(|(label, count)| ClassShare {
            label,
            count,
            share: 100.0 * count as f64 / total,
        })
        .collect()
}

/// Every row whose label differs from `label`, in input order.
pub fn exclude_class(d: &Dataset, label: &str) -> Result<Dataset> {
    if !d.schema.has_class(label) {
        return Err(Error::UnknownLabel(label.to_string()));
    }
    let rows: Vec<Row> = d
        .rows
        .iter()
        .filter(|r| r.label != label)
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyComplement(label.to_string()));
    }
    Ok(Dataset {
        schema: d.shared_schema(),
        rows,
    })
}
