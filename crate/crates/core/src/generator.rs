//! Leave-class-out synthesizers.
//!
//! To create candidates for class `i`, every feature is modelled on the rows
//! of all *other* classes (D′): a BIC-selected Gaussian mixture for numeric
//! columns, an empirical CDF for categorical ones. A synthetic row is one
//! independent draw per feature, concatenated in schema order.

use rayon::prelude::*;
use serde::Serialize;

use crate::catsampler::EmpiricalCdf;
use crate::data::{exclude_class, BoundPolicy, Bounds, Dataset, FeatureKind, Value};
use crate::error::Result;
use crate::gmm::{select_k, EmConfig, GaussianMixture};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSampler {
    Numeric {
        mixture: GaussianMixture,
        #[serde(skip_serializing_if = "Option::is_none")]
        bounds: Option<Bounds>,
        policy: BoundPolicy,
    },
    Categorical {
        distribution: EmpiricalCdf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureModel {
    pub name: String,
    #[serde(flatten)]
    pub sampler: FeatureSampler,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSynthesizer {
    label: String,
    source_rows: usize,
    features: Vec<FeatureModel>,
}

impl ClassSynthesizer {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of rows in D′ the models were fitted on.
    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn features(&self) -> &[FeatureModel] {
        &self.features
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("synthesizer serializes")
    }
}

fn feature_key(label: &str, feature: &str) -> [u64; 2] {
    [seed::text_key(label), seed::text_key(feature)]
}

/// Fit per-feature samplers for `label` on every row not labelled `label`.
pub fn fit_class_synthesizer(d: &Dataset, label: &str, cfg: &EmConfig) -> Result<ClassSynthesizer> {
    cfg.validate()?;
    let rest = exclude_class(d, label)?;
    let features = rest
        .schema()
        .features()
        .par_iter()
        .enumerate()
        .map(|(j, f)| {
            let sampler = match &f.kind {
                FeatureKind::Numeric { bounds, policy } => {
                    let key = feature_key(label, &f.name);
                    let fit_cfg = cfg.with_seed(seed::derive(cfg.seed, &key));
                    FeatureSampler::Numeric {
                        mixture: select_k(&rest.numeric_column(j), &fit_cfg)?,
                        bounds: *bounds,
                        policy: *policy,
                    }
                }
                FeatureKind::Categorical { .. } => FeatureSampler::Categorical {
                    distribution: EmpiricalCdf::fit(&rest.categorical_column(j))?,
                },
            };
            Ok(FeatureModel {
                name: f.name.clone(),
                sampler,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassSynthesizer {
        label: label.to_string(),
        source_rows: rest.len(),
        features,
    })
}

/// Draw `n` unlabeled rows. Each feature consumes its own stream keyed by
/// (seed, class label, feature name).
pub fn synthesize_rows(s: &ClassSynthesizer, n: usize, seed: u64) -> Result<Vec<Vec<Value>>> {
    let columns = s
        .features
        .iter()
        .map(|f| {
            let mut rng = seed::rng(seed, &feature_key(&s.label, &f.name));
            Ok(match &f.sampler {
                FeatureSampler::Numeric {
                    mixture,
                    bounds,
                    policy,
                } => mixture
                    .sample_with(&mut rng, n, *bounds, *policy)?
                    .into_iter()
                    .map(Value::Num)
                    .collect(),
                FeatureSampler::Categorical { distribution } => distribution
                    .sample_with(&mut rng, n)
                    .into_iter()
                    .map(Value::Cat)
                    .collect(),
            })
        })
        .collect::<Result<Vec<Vec<Value>>>>()?;

    let mut columns: Vec<_> = columns.into_iter().map(Vec::into_iter).collect();
    Ok((0..n)
        .map(|_| {
            columns
                .iter_mut()
                .map(|c| c.next().expect("column has n values"))
                .collect()
        })
        .collect())
}
