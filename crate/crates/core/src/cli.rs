//! Command implementations behind the `ensy` binary.
//!
//! Every command writes deterministic files given its seed. Augmentation
//! always happens after the train/test split, on the training half only.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{random_oversample, smote_nc, SmoteNcConfig};
use crate::bench::{self, BenchConfig, BenchResult};
use crate::data::{class_shares, load_csv, split, Dataset, Schema, SplitSpec};
use crate::error::{Error, Result};
use crate::gmm::EmConfig;
use crate::metrics::{confusion, report, ClassificationReport};
use crate::pipeline::{
    run_ensy, AugmentPlan, AugmentReport, DEFAULT_ATTEMPTS_MULTIPLIER, DEFAULT_BATCH_SIZE,
};
use crate::seed;
use crate::validator::{train, ClassifierSpec, PredictionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ensy")]
    Ensy,
    #[serde(rename = "ros")]
    Ros,
    #[serde(rename = "smote-nc")]
    SmoteNc,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ensy" => Ok(Method::Ensy),
            "ros" => Ok(Method::Ros),
            "smote-nc" | "smotenc" => Ok(Method::SmoteNc),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ensy => "ensy",
            Method::Ros => "ros",
            Method::SmoteNc => "smote-nc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmSection {
    pub max_k: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub variance_floor: f64,
    pub restarts: usize,
}

impl Default for EmSection {
    fn default() -> Self {
        let d = EmConfig::default();
        EmSection {
            max_k: d.max_k,
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
            variance_floor: d.variance_floor,
            restarts: d.restarts,
        }
    }
}

/// On-disk run configuration. Every field may be overridden from the command line.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub method: Option<String>,
    pub plan: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub test_frac: Option<f64>,
    pub stratified: Option<bool>,
    pub validator: Option<String>,
    pub classifier: Option<String>,
    pub smote_k: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_attempts_multiplier: Option<usize>,
    #[serde(default)]
    pub em: EmSection,
}

impl RunFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    /// Load a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut f = Self::from_toml_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut f.data, &mut f.schema, &mut f.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(f)
    }

    /// Layer `over` on top of `self`; set fields in `over` win.
    pub fn merged(self, over: RunFile) -> RunFile {
        RunFile {
            data: over.data.or(self.data),
            schema: over.schema.or(self.schema),
            method: over.method.or(self.method),
            plan: over.plan.or(self.plan),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            test_frac: over.test_frac.or(self.test_frac),
            stratified: over.stratified.or(self.stratified),
            validator: over.validator.or(self.validator),
            classifier: over.classifier.or(self.classifier),
            smote_k: over.smote_k.or(self.smote_k),
            batch_size: over.batch_size.or(self.batch_size),
            max_attempts_multiplier: over
                .max_attempts_multiplier
                .or(self.max_attempts_multiplier),
            em: if over.em != EmSection::default() {
                over.em
            } else {
                self.em
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanSpec {
    Balance,
    Explicit(String),
}

/// A fully resolved augmentation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub method: Method,
    pub plan: PlanSpec,
    pub split: SplitSpec,
    pub validator: Option<ClassifierSpec>,
    pub classifier: Option<ClassifierSpec>,
    pub em: EmConfig,
    pub smote: Option<SmoteNcConfig>,
    pub batch_size: usize,
    pub max_attempts_multiplier: usize,
    pub out: PathBuf,
    pub seed: u64,
}

impl TryFrom<RunFile> for RunConfig {
    type Error = Error;

    fn try_from(f: RunFile) -> Result<Self> {
        let need = |v: Option<PathBuf>, name: &str| {
            v.ok_or_else(|| Error::InvalidConfig(format!("`{name}` is required")))
        };
        let seed = f.seed.unwrap_or(0);
        let method: Method = f.method.as_deref().unwrap_or("ensy").parse()?;
        let plan = match f.plan.as_deref().map(str::trim) {
            None | Some("balance") => PlanSpec::Balance,
            Some(p) => PlanSpec::Explicit(p.to_string()),
        };
        let parse_spec = |s: &Option<String>, key: &str| {
            s.as_deref()
                .map(|s| {
                    ClassifierSpec::from_str(s)
                        .map(|c| c.with_seed(seed::derive(seed, &[seed::text_key(key)])))
                })
                .transpose()
        };
        let validator = match (method, parse_spec(&f.validator, "validator")?) {
            (Method::Ensy, None) => Some(
                ClassifierSpec::forest(50, 8, 1)
                    .with_seed(seed::derive(seed, &[seed::text_key("validator")])),
            ),
            (_, v) => v,
        };
        let smote = match (method, f.smote_k) {
            (Method::SmoteNc, k) => Some(SmoteNcConfig {
                k: k.unwrap_or(5),
                seed: seed::derive(seed, &[seed::text_key("smote")]),
            }),
            _ => None,
        };
        if smote.is_some_and(|s| s.k < 1) {
            return Err(Error::InvalidConfig("smote_k must be at least 1".into()));
        }
        let em = EmConfig {
            max_k: f.em.max_k,
            max_iterations: f.em.max_iterations,
            tolerance: f.em.tolerance,
            variance_floor: f.em.variance_floor,
            restarts: f.em.restarts,
            seed: seed::derive(seed, &[seed::text_key("em")]),
        };
        em.validate()?;
        Ok(RunConfig {
            data: need(f.data, "data")?,
            schema: need(f.schema, "schema")?,
            method,
            plan,
            split: SplitSpec::new(
                f.test_frac.unwrap_or(0.15),
                seed,
                f.stratified.unwrap_or(false),
            )?,
            validator,
            classifier: parse_spec(&f.classifier, "classifier")?.map(|c| c.with_seed(seed)),
            em,
            smote,
            batch_size: f.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            max_attempts_multiplier: f
                .max_attempts_multiplier
                .unwrap_or(DEFAULT_ATTEMPTS_MULTIPLIER),
            out: f.out.unwrap_or_else(|| PathBuf::from("out")),
            seed,
        })
    }
}

#[derive(Debug, Serialize)]
struct SplitSummary {
    test_fraction: f64,
    stratified: bool,
    train_rows: usize,
    test_rows: usize,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    seed: u64,
    split: SplitSummary,
    #[serde(flatten)]
    report: &'a AugmentReport,
    augmented_rows: usize,
}

#[derive(Debug)]
pub struct AugmentOutcome {
    pub report: AugmentReport,
    pub train: Dataset,
    pub augmented: Dataset,
    pub test: Dataset,
    pub evaluation: Option<ClassificationReport>,
}

impl AugmentOutcome {
    pub fn starvation(&self) -> Option<Error> {
        self.report.starvation()
    }
}

/// Split, augment the training half, and write `train.csv`, `test.csv`,
/// `report.json` (plus `metrics.json`/`metrics.txt` when an evaluation
/// classifier is configured) into `cfg.out`.
pub fn cmd_augment(cfg: &RunConfig) -> Result<AugmentOutcome> {
    let schema = Schema::load(&cfg.schema)?;
    let data = load_csv(&cfg.data, schema)?;
    let (train_set, test) = split(&data, &cfg.split)?;

    let mut plan = match &cfg.plan {
        PlanSpec::Balance => AugmentPlan::parse("balance", &train_set, 0)?,
        PlanSpec::Explicit(s) => AugmentPlan::parse(s, &train_set, 0)?,
    };
    plan.seed = seed::derive(cfg.seed, &[seed::text_key("plan")]);
    plan.batch_size = cfg.batch_size;
    plan.max_attempts_multiplier = cfg.max_attempts_multiplier;

    let started = Instant::now();
    let (augmented, report) = match cfg.method {
        Method::Ensy => {
            let vspec = cfg
                .validator
                .ok_or_else(|| Error::InvalidConfig("ensy requires a validator".into()))?;
            let out = run_ensy(&train_set, &plan, &cfg.em, &vspec)?;
            (out.augmented, out.report)
        }
        Method::Ros => {
            let d = random_oversample(&train_set, &plan)?;
            (d, AugmentReport::exact("ros", &plan, started.elapsed()))
        }
        Method::SmoteNc => {
            let smote = cfg
                .smote
                .ok_or_else(|| Error::InvalidConfig("smote-nc requires k".into()))?;
            let d = smote_nc(&train_set, &plan, &smote)?;
            (
                d,
                AugmentReport::exact("smote-nc", &plan, started.elapsed()),
            )
        }
    };

    fs::create_dir_all(&cfg.out)?;
    augmented.write_csv(cfg.out.join("train.csv"))?;
    test.write_csv(cfg.out.join("test.csv"))?;
    let summary = RunSummary {
        seed: cfg.seed,
        split: SplitSummary {
            test_fraction: cfg.split.test_fraction,
            stratified: cfg.split.stratified,
            train_rows: train_set.len(),
            test_rows: test.len(),
        },
        report: &report,
        augmented_rows: augmented.len(),
    };
    fs::write(
        cfg.out.join("report.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    let evaluation = match &cfg.classifier {
        Some(spec) if !test.is_empty() => {
            let r = evaluate_builtin(spec, &augmented, &test)?;
            write_metrics(&cfg.out, &r)?;
            Some(r)
        }
        _ => None,
    };
    Ok(AugmentOutcome {
        report,
        train: train_set,
        augmented,
        test,
        evaluation,
    })
}

/// Per-class count/share table for a dataset.
pub fn cmd_inspect(data: &Path, schema: &Path) -> Result<String> {
    let schema = Schema::load(schema)?;
    let d = load_csv(data, schema)?;
    let shares = class_shares(&d);
    let width = shares
        .iter()
        .map(|s| s.label.chars().count())
        .chain([d.schema().target().chars().count(), "total".len()])
        .max()
        .unwrap_or(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>10}  {:>9}",
        d.schema().target(),
        "count",
        "share(%)"
    );
    for s in &shares {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>9.3}",
            s.label, s.count, s.share
        );
    }
    let total: f64 = shares.iter().map(|s| s.share).sum();
    let _ = writeln!(out, "{:<width$}  {:>10}  {:>9.3}", "total", d.len(), total);
    Ok(out)
}

pub fn evaluate_builtin(
    spec: &ClassifierSpec,
    train_set: &Dataset,
    test: &Dataset,
) -> Result<ClassificationReport> {
    let model = train(spec, train_set)?;
    let predicted = test
        .rows()
        .iter()
        .map(|r| model.predict(&r.values))
        .collect::<Result<Vec<_>>>()?;
    score(test, &predicted)
}

fn score(test: &Dataset, predicted: &[String]) -> Result<ClassificationReport> {
    let truth: Vec<&str> = test.rows().iter().map(|r| r.label.as_str()).collect();
    report(&confusion(&truth, predicted, test.schema().classes())?)
}

pub enum Evaluator {
    Builtin(ClassifierSpec),
    Predictions(PathBuf),
}

/// Evaluate on `test` using either a built-in classifier trained on `train`
/// or an external prediction file indexed by test row.
pub fn cmd_evaluate(
    train_csv: &Path,
    test_csv: &Path,
    schema: &Path,
    evaluator: &Evaluator,
    out: Option<&Path>,
) -> Result<ClassificationReport> {
    let schema = Schema::load(schema)?;
    let test = load_csv(test_csv, schema.clone())?;
    let r = match evaluator {
        Evaluator::Builtin(spec) => {
            let train_set = load_csv(train_csv, schema)?;
            evaluate_builtin(spec, &train_set, &test)?
        }
        Evaluator::Predictions(path) => {
            let table = PredictionTable::load(path)?;
            let predicted = table.labels_for(test.len(), test.schema())?;
            score(&test, &predicted)?
        }
    };
    if let Some(dir) = out {
        write_metrics(dir, &r)?;
    }
    Ok(r)
}

fn write_metrics(dir: &Path, r: &ClassificationReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.json"), r.to_json() + "\n")?;
    fs::write(dir.join("metrics.txt"), r.to_table())?;
    Ok(())
}

/// Run the desk benchmark and write `comparison.txt`, `comparison.json`,
/// `scatter.csv`, the split CSVs and a schema into `out`.
pub fn cmd_bench(cfg: &BenchConfig, out: &Path) -> Result<BenchResult> {
    let result = bench::run(cfg)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("comparison.txt"), result.to_table())?;
    fs::write(
        out.join("comparison.json"),
        serde_json::to_string_pretty(&result)? + "\n",
    )?;
    fs::write(out.join("scatter.csv"), result.scatter_csv())?;
    fs::write(
        out.join("schema.toml"),
        result.train.schema().to_toml_string(),
    )?;
    result.train.write_csv(out.join("train.csv"))?;
    result.test.write_csv(out.join("test.csv"))?;
    Ok(result)
}
