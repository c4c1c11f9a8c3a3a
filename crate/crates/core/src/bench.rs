//! Two-feature, two-class desk benchmark comparing raw training data with
//! ROS, SMOTE-NC and ENSY augmentation.

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::baselines::{random_oversample, smote_nc, SmoteNcConfig};
use crate::data::{
    split, BoundPolicy, Dataset, Feature, FeatureKind, Row, Schema, SplitSpec, Value,
};
use crate::error::Result;
use crate::gmm::EmConfig;
use crate::metrics::{confusion, report, ClassificationReport};
use crate::pipeline::{balance_plan, run_ensy, AugmentPlan, AugmentReport};
use crate::seed;
use crate::validator::{train, ClassifierSpec};

pub const MAJORITY: &str = "majority";
pub const MINORITY: &str = "minority";
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub n: usize,
    pub minority_frac: f64,
    pub test_frac: f64,
    pub validator: ClassifierSpec,
    pub classifiers: Vec<ClassifierSpec>,
    pub smote_k: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 1,
            n: 2000,
            minority_frac: 0.05,
            test_frac: 0.15,
            validator: ClassifierSpec::forest(50, 8, 1),
            classifiers: vec![ClassifierSpec::forest(50, 8, 1), ClassifierSpec::knn(5)],
            smote_k: 5,
        }
    }
}

pub fn bench_schema() -> Schema {
    let num = |name: &str| Feature {
        name: name.into(),
        kind: FeatureKind::Numeric {
            bounds: None,
            policy: BoundPolicy::None,
        },
    };
    Schema::new(
        vec![num("x"), num("y")],
        "class",
        vec![MAJORITY.into(), MINORITY.into()],
    )
    .expect("static schema")
}

/// A broad majority cloud with a compact minority cluster on its flank.
pub fn generate(n: usize, minority_frac: f64, seed: u64) -> Dataset {
    let n_min = ((n as f64) * minority_frac).round() as usize;
    let mut rng = seed::rng(seed, &[seed::text_key("bench-data")]);
    let normal = |mu: f64, sd: f64| Normal::new(mu, sd).expect("valid normal");
    let majority = (normal(2.0, 1.5), normal(4.0, 1.5));
    let minority = (normal(4.0, 0.7), normal(5.0, 0.7));
    let rows = (0..n)
        .map(|i| {
            let (dist, label) = if i < n - n_min {
                (&majority, MAJORITY)
            } else {
                (&minority, MINORITY)
            };
            Row {
                values: vec![
                    Value::Num(dist.0.sample(&mut rng)),
                    Value::Num(dist.1.sample(&mut rng)),
                ],
                label: label.into(),
            }
        })
        .collect();
    Dataset::new(bench_schema(), rows).expect("generated rows fit schema")
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub classifier: String,
    pub report: ClassificationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub seed: u64,
    pub n: usize,
    pub minority_frac: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub rows: Vec<BenchRow>,
    pub ensy_report: AugmentReport,
    /// Synthetic minority values outside the observed minority range, per method.
    pub smote_out_of_range: usize,
    pub ensy_out_of_range: usize,
    #[serde(skip)]
    pub train: Dataset,
    #[serde(skip)]
    pub test: Dataset,
    #[serde(skip)]
    pub augmented: Vec<(String, Dataset)>,
}

impl BenchResult {
    pub fn row(&self, method: &str, classifier: &str) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.classifier == classifier)
    }

    pub fn minority_f1(&self, method: &str, classifier: &str) -> Option<f64> {
        self.row(method, classifier)
            .map(|r| r.report.classes[MINORITY].f1)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "seed {}  n {}  minority {:.3}  train {}  test {}",
            self.seed, self.n, self.minority_frac, self.train_rows, self.test_rows
        );
        let _ = writeln!(
            out,
            "{:<9}  {:<36}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
            "method", "classifier", "accuracy", "min-P", "min-R", "min-F1", "maj-F1"
        );
        for r in &self.rows {
            let min = &r.report.classes[MINORITY];
            let maj = &r.report.classes[MAJORITY];
            let _ = writeln!(
                out,
                "{:<9}  {:<36}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
                r.method,
                r.classifier,
                r.report.accuracy,
                min.precision,
                min.recall,
                min.f1,
                maj.f1
            );
        }
        let _ = writeln!(
            out,
            "smote-nc values outside minority range: {}",
            self.smote_out_of_range
        );
        let _ = writeln!(
            out,
            "ensy values outside minority range: {}",
            self.ensy_out_of_range
        );
        out
    }

    /// `x,y,class,method` rows: training points under `raw`, then each method's synthetic rows.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("x,y,class,method\n");
        let mut push = |rows: &[Row], method: &str| {
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.values[0], r.values[1], r.label, method
                );
            }
        };
        push(self.train.rows(), "raw");
        for (method, d) in &self.augmented {
            push(&d.rows()[self.train.len()..], method);
        }
        out
    }
}

fn evaluate_with(
    spec: &ClassifierSpec,
    train_set: &Dataset,
    test: &Dataset,
) -> Result<ClassificationReport> {
    let model = train(spec, train_set)?;
    let truth: Vec<&str> = test.rows().iter().map(|r| r.label.as_str()).collect();
    let predicted = test
        .rows()
        .iter()
        .map(|r| model.predict(&r.values))
        .collect::<Result<Vec<_>>>()?;
    report(&confusion(&truth, &predicted, test.schema().classes())?)
}

/// Count synthetic numeric values (rows past `base`) outside the per-feature
/// range of the original minority rows.
pub fn out_of_range(train_set: &Dataset, augmented: &Dataset) -> usize {
    let p = train_set.schema().features().len();
    let ranges: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            train_set
                .rows_of(MINORITY)
                .filter_map(|r| r.values[j].as_num())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x), hi.max(x))
                })
        })
        .collect();
    augmented.rows()[train_set.len()..]
        .iter()
        .flat_map(|r| r.values.iter().zip(&ranges))
        .filter(|(v, (lo, hi))| v.as_num().is_some_and(|x| x < *lo || x > *hi))
        .count()
}

pub fn run(cfg: &BenchConfig) -> Result<BenchResult> {
    let data = generate(cfg.n, cfg.minority_frac, cfg.seed);
    let (train_set, test) = split(&data, &SplitSpec::new(cfg.test_frac, cfg.seed, true)?)?;
    let plan = AugmentPlan {
        seed: seed::derive(cfg.seed, &[seed::text_key("plan")]),
        ..balance_plan(&train_set)
    };
    let ros = random_oversample(&train_set, &plan)?;
    let smote = smote_nc(
        &train_set,
        &plan,
        &SmoteNcConfig {
            k: cfg.smote_k,
            seed: seed::derive(cfg.seed, &[seed::text_key("smote")]),
        },
    )?;
    let em = EmConfig::default().with_seed(seed::derive(cfg.seed, &[seed::text_key("em")]));
    let vspec = cfg
        .validator
        .with_seed(seed::derive(cfg.seed, &[seed::text_key("validator")]));
    let ensy = run_ensy(&train_set, &plan, &em, &vspec)?;

    let methods: Vec<(&str, &Dataset)> = vec![
        ("raw", &train_set),
        ("ros", &ros),
        ("smote-nc", &smote),
        ("ensy", &ensy.augmented),
    ];
    let mut rows = Vec::new();
    for (method, d) in &methods {
        for spec in &cfg.classifiers {
            let spec = spec.with_seed(cfg.seed);
            rows.push(BenchRow {
                method: method.to_string(),
                classifier: spec.to_string(),
                report: evaluate_with(&spec, d, &test)?,
            });
        }
    }
    Ok(BenchResult {
        seed: cfg.seed,
        n: cfg.n,
        minority_frac: cfg.minority_frac,
        train_rows: train_set.len(),
        test_rows: test.len(),
        rows,
        smote_out_of_range: out_of_range(&train_set, &smote),
        ensy_out_of_range: out_of_range(&train_set, &ensy.augmented),
        ensy_report: ensy.report,
        augmented: vec![
            ("ros".into(), ros),
            ("smote-nc".into(), smote),
            ("ensy".into(), ensy.augmented),
        ],
        train: train_set,
        test,
    })
}
