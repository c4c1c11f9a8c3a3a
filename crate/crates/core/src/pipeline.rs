//! Generate → validate → accumulate, per class, until each target is met.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Row, Schema};
use crate::error::{Error, Result};
use crate::generator::{fit_class_synthesizer, synthesize_rows};
use crate::gmm::EmConfig;
use crate::seed;
use crate::validator::{train, ClassifierSpec, FittedClassifier};

pub const DEFAULT_BATCH_SIZE: usize = 512;
pub const DEFAULT_ATTEMPTS_MULTIPLIER: usize = 50;

/// How many synthetic rows to add per class, and how hard to try.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    /// Additional rows per class, in schema class order.
    pub targets: Vec<(String, usize)>,
    pub batch_size: usize,
    pub max_attempts_multiplier: usize,
    pub seed: u64,
}

impl AugmentPlan {
    pub fn new(targets: Vec<(String, usize)>, seed: u64) -> Self {
        AugmentPlan {
            targets,
            batch_size: DEFAULT_BATCH_SIZE,
            max_attempts_multiplier: DEFAULT_ATTEMPTS_MULTIPLIER,
            seed,
        }
    }

    /// Parse `balance` or an explicit `class=count,...` list against `d`.
    /// Classes not listed get a zero target.
    pub fn parse(spec: &str, d: &Dataset, seed: u64) -> Result<Self> {
        let spec = spec.trim();
        if spec == "balance" {
            return Ok(AugmentPlan {
                seed,
                ..balance_plan(d)
            });
        }
        let schema = d.schema();
        let mut targets: Vec<(String, usize)> =
            schema.classes().iter().map(|c| (c.clone(), 0)).collect();
        let mut seen = std::collections::HashSet::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (label, count) = part.rsplit_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("plan entry `{part}` is not class=count"))
            })?;
            let label = label.trim();
            let count: usize = count.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "plan count `{count}` is not a non-negative integer"
                ))
            })?;
            let i = schema
                .class_index(label)
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            if !seen.insert(i) {
                return Err(Error::InvalidConfig(format!(
                    "class `{label}` appears twice in plan"
                )));
            }
            targets[i].1 = count;
        }
        if seen.is_empty() {
            return Err(Error::InvalidConfig("empty plan".into()));
        }
        Ok(AugmentPlan::new(targets, seed))
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.max_attempts_multiplier < 1 {
            return Err(Error::InvalidConfig(
                "attempts multiplier must be at least 1".into(),
            ));
        }
        for (label, _) in &self.targets {
            if !schema.has_class(label) {
                return Err(Error::UnknownLabel(label.clone()));
            }
        }
        Ok(())
    }

    pub fn target(&self, label: &str) -> usize {
        self.targets
            .iter()
            .find(|(l, _)| l == label)
            .map_or(0, |(_, n)| *n)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.iter().all(|(_, n)| *n == 0)
    }
}

/// Targets that lift every class to the majority count.
pub fn balance_plan(d: &Dataset) -> AugmentPlan {
    let counts = d.class_counts();
    let majority = counts.iter().map(|(_, c)| *c).max().unwrap_or(0);
    AugmentPlan::new(
        counts.into_iter().map(|(l, c)| (l, majority - c)).collect(),
        0,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: String,
    pub requested: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub attempts: usize,
    pub acceptance_rate: f64,
    pub starved: bool,
}

impl ClassReport {
    fn new(class: &str, requested: usize) -> Self {
        ClassReport {
            class: class.to_string(),
            requested,
            accepted: 0,
            rejected: 0,
            attempts: 0,
            acceptance_rate: 0.0,
            starved: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentReport {
    pub method: String,
    pub classes: Vec<ClassReport>,
    /// Not serialized, so that reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl AugmentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The first starved class, as an error value.
    pub fn starvation(&self) -> Option<Error> {
        self.classes
            .iter()
            .find(|c| c.starved)
            .map(|c| Error::AcceptanceStarved {
                class: c.class.clone(),
                acceptance_rate: c.acceptance_rate,
            })
    }

    /// Report for methods that append exactly the planned rows.
    pub fn exact(method: &str, plan: &AugmentPlan, wall_time: Duration) -> Self {
        AugmentReport {
            method: method.to_string(),
            classes: plan
                .targets
                .iter()
                .map(|(l, n)| ClassReport {
                    accepted: *n,
                    attempts: *n,
                    acceptance_rate: if *n > 0 { 1.0 } else { 0.0 },
                    ..ClassReport::new(l, *n)
                })
                .collect(),
            wall_time,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsyOutcome {
    pub augmented: Dataset,
    pub report: AugmentReport,
    pub validator: FittedClassifier,
}

/// Augment `train` with validator-accepted synthetic rows.
///
/// The validator is trained on `train` only. Original rows come first in the
/// output, then accepted rows per class in schema class order. A class that
/// exhausts `target × max_attempts_multiplier` candidates is marked starved
/// in the report and keeps whatever it accepted.
pub fn run_ensy(
    train_set: &Dataset,
    plan: &AugmentPlan,
    em: &EmConfig,
    vspec: &ClassifierSpec,
) -> Result<EnsyOutcome> {
    let started = Instant::now();
    plan.validate(train_set.schema())?;
    em.validate()?;
    let validator = train(vspec, train_set)?;
    let classes = train_set.schema().classes();

    let per_class = classes
        .par_iter()
        .map(|label| augment_class(train_set, label, plan.target(label), plan, em, &validator))
        .collect::<Result<Vec<_>>>()?;

    let mut extra = Vec::new();
    let mut reports = Vec::new();
    for (rows, report) in per_class {
        extra.extend(rows);
        reports.push(report);
    }
    let augmented = train_set.extended(extra)?;
    Ok(EnsyOutcome {
        augmented,
        report: AugmentReport {
            method: "ensy".into(),
            classes: reports,
            wall_time: started.elapsed(),
        },
        validator,
    })
}

fn augment_class(
    d: &Dataset,
    label: &str,
    target: usize,
    plan: &AugmentPlan,
    em: &EmConfig,
    validator: &FittedClassifier,
) -> Result<(Vec<Row>, ClassReport)> {
    let mut report = ClassReport::new(label, target);
    if target == 0 {
        return Ok((Vec::new(), report));
    }
    let key = seed::text_key(label);
    let synth = fit_class_synthesizer(d, label, &em.with_seed(seed::derive(plan.seed, &[key])))?;
    let target_idx = d.schema().class_index(label).expect("validated plan");
    let cap = target.saturating_mul(plan.max_attempts_multiplier);
    let mut rows = Vec::with_capacity(target);
    let mut batch = 0u64;

    while rows.len() < target && report.attempts < cap {
        let n = plan.batch_size.min(cap - report.attempts);
        let candidates = synthesize_rows(&synth, n, seed::derive(plan.seed, &[key, batch]))?;
        batch += 1;
        for values in candidates {
            report.attempts += 1;
            if validator.predict_index(&values)? == target_idx {
                rows.push(Row {
                    values,
                    label: label.to_string(),
                });
                if rows.len() == target {
                    break;
                }
            } else {
                report.rejected += 1;
            }
        }
    }
    report.accepted = rows.len();
    report.acceptance_rate = report.accepted as f64 / (report.accepted + report.rejected) as f64;
    report.starved = report.accepted < target;
    Ok((rows, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BoundPolicy, Feature, FeatureKind, Value};

    fn counts_dataset(counts: &[(&str, usize)]) -> Dataset {
        let schema = Schema::new(
            vec![Feature {
                name: "x".into(),
                kind: FeatureKind::Numeric {
                    bounds: None,
                    policy: BoundPolicy::None,
                },
            }],
            "y",
            counts.iter().map(|(l, _)| l.to_string()).collect(),
        )
        .unwrap();
        let mut rows = Vec::new();
        for (ci, (l, c)) in counts.iter().enumerate() {
            for i in 0..*c {
                rows.push(Row {
                    values: vec![Value::Num(ci as f64 * 10.0 + i as f64 * 0.01)],
                    label: l.to_string(),
                });
            }
        }
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn balance_targets() {
        let p = balance_plan(&counts_dataset(&[("A", 95), ("B", 5)]));
        assert_eq!(p.targets, vec![("A".into(), 0), ("B".into(), 90)]);
        let p = balance_plan(&counts_dataset(&[("A", 50), ("B", 50)]));
        assert!(p.is_empty());
    }

    #[test]
    fn table_one_shares_give_cycling_the_largest_gap() {
        let d = counts_dataset(&[
            ("Walking", 14268),
            ("Cycling", 2405),
            ("Public transport", 28605),
            ("Driving", 35808),
        ]);
        let p = balance_plan(&d);
        let best = p.targets.iter().max_by_key(|(_, n)| *n).unwrap();
        assert_eq!(best.0, "Cycling");
        assert_eq!(p.target("Driving"), 0);
    }

    #[test]
    fn plan_parsing() {
        let d = counts_dataset(&[("A", 5), ("B", 3)]);
        let p = AugmentPlan::parse("B=10", &d, 4).unwrap();
        assert_eq!(p.targets, vec![("A".into(), 0), ("B".into(), 10)]);
        assert_eq!(p.seed, 4);
        assert_eq!(AugmentPlan::parse("balance", &d, 1).unwrap().target("B"), 2);
        for bad in ["", "B", "B=-1", "C=3", "B=1,B=2", "B=x"] {
            assert!(AugmentPlan::parse(bad, &d, 0).is_err(), "{bad}");
        }
    }

    #[test]
    fn zero_plan_is_identity() {
        let d = counts_dataset(&[("A", 20), ("B", 20)]);
        let plan = AugmentPlan::new(vec![("A".into(), 0), ("B".into(), 0)], 1);
        let out = run_ensy(&d, &plan, &EmConfig::default(), &ClassifierSpec::knn(3)).unwrap();
        assert_eq!(out.augmented, d);
        assert!(out.report.classes.iter().all(|c| c.attempts == 0));
    }

    #[test]
    fn disjoint_class_starves() {
        // B sits far from A's support; candidates drawn from A's marginal never look like B
        let d = counts_dataset(&[("A", 60), ("B", 6)]);
        let mut plan = AugmentPlan::new(vec![("A".into(), 0), ("B".into(), 20)], 3);
        plan.batch_size = 64;
        let out = run_ensy(&d, &plan, &EmConfig::default(), &ClassifierSpec::knn(1)).unwrap();
        let b = &out.report.classes[1];
        assert!(b.starved);
        assert_eq!(b.accepted, 0);
        assert_eq!(b.acceptance_rate, 0.0);
        assert_eq!(b.attempts, 20 * DEFAULT_ATTEMPTS_MULTIPLIER);
        assert!(matches!(
            out.report.starvation(),
            Some(Error::AcceptanceStarved { acceptance_rate, .. }) if acceptance_rate == 0.0
        ));
        assert_eq!(out.augmented.len(), d.len());
    }

    #[test]
    fn report_json_has_no_timing() {
        let d = counts_dataset(&[("A", 10), ("B", 10)]);
        let plan = AugmentPlan::new(vec![("A".into(), 0), ("B".into(), 0)], 1);
        let out = run_ensy(&d, &plan, &EmConfig::default(), &ClassifierSpec::knn(1)).unwrap();
        let json = out.report.to_json();
        assert!(!json.contains("wall"));
        assert!(json.contains("\"acceptance_rate\""));
    }
}
