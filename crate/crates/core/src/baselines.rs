//! Random oversampling and SMOTE-NC.

use std::collections::HashMap;

use rand::Rng;

use crate::data::{Dataset, Row, Value};
use crate::error::{Error, Result};
use crate::pipeline::AugmentPlan;
use crate::seed;
use crate::validator::MixedDistance;

/// Append `target` rows per class, drawn uniformly with replacement from that class.
pub fn random_oversample(train: &Dataset, plan: &AugmentPlan) -> Result<Dataset> {
    plan.validate(train.schema())?;
    let mut extra = Vec::new();
    for (label, target) in &plan.targets {
        if *target == 0 {
            continue;
        }
        let pool: Vec<&Row> = train.rows_of(label).collect();
        if pool.is_empty() {
            return Err(Error::EmptyClass(label.clone()));
        }
        let mut rng = seed::rng(plan.seed, &[seed::text_key("ros"), seed::text_key(label)]);
        extra.extend((0..*target).map(|_| pool[rng.random_range(0..pool.len())].clone()));
    }
    train.extended(extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoteNcConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for SmoteNcConfig {
    fn default() -> Self {
        SmoteNcConfig { k: 5, seed: 0 }
    }
}

/// Where one synthetic SMOTE-NC row came from. Row indices point into `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteProvenance {
    pub class: String,
    pub seed_row: usize,
    pub neighbor_row: usize,
    pub neighbors: Vec<usize>,
    pub lambda: f64,
}

pub fn smote_nc(train: &Dataset, plan: &AugmentPlan, cfg: &SmoteNcConfig) -> Result<Dataset> {
    smote_nc_traced(train, plan, cfg).map(|(d, _)| d)
}

/// SMOTE-NC that also reports, for every appended row, its seed row, the
/// chosen neighbor, the full neighbor set and the interpolation factor.
pub fn smote_nc_traced(
    train: &Dataset,
    plan: &AugmentPlan,
    cfg: &SmoteNcConfig,
) -> Result<(Dataset, Vec<SmoteProvenance>)> {
    plan.validate(train.schema())?;
    if cfg.k < 1 {
        return Err(Error::InvalidConfig("SMOTE-NC needs k >= 1".into()));
    }
    let mut extra = Vec::new();
    let mut trace = Vec::new();
    for (label, target) in &plan.targets {
        if *target == 0 {
            continue;
        }
        let members: Vec<usize> = train
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| &r.label == label)
            .map(|(i, _)| i)
            .collect();
        if members.len() < 2 {
            return Err(Error::InsufficientNeighbors(label.clone()));
        }
        let values = |i: usize| train.rows()[i].values.as_slice();
        let metric = MixedDistance::fit(train.schema(), members.iter().map(|&i| values(i)), 1.0);
        let k = cfg.k.min(members.len() - 1);
        let mut cache: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut rng = seed::rng(
            cfg.seed,
            &[seed::text_key("smote-nc"), seed::text_key(label)],
        );

        for _ in 0..*target {
            let s = members[rng.random_range(0..members.len())];
            let neighbors = cache
                .entry(s)
                .or_insert_with(|| nearest_same_class(&metric, &members, s, k, values))
                .clone();
            let nb = neighbors[rng.random_range(0..neighbors.len())];
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let pool: Vec<&[Value]> = neighbors.iter().map(|&i| values(i)).collect();
            let row = interpolate(values(s), values(nb), &pool, lambda);
            extra.push(Row {
                values: row,
                label: label.clone(),
            });
            trace.push(SmoteProvenance {
                class: label.clone(),
                seed_row: s,
                neighbor_row: nb,
                neighbors,
                lambda,
            });
        }
    }
    Ok((train.extended(extra)?, trace))
}

/// k nearest members of `seed`'s class, excluding `seed` itself; distance
/// ties go to the earlier row.
fn nearest_same_class<'a>(
    metric: &MixedDistance,
    members: &[usize],
    seed: usize,
    k: usize,
    values: impl Fn(usize) -> &'a [Value],
) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&i| i != seed)
        .map(|&i| (metric.distance(values(seed), values(i)), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Build one synthetic row: numeric features move from `seed` toward
/// `neighbor` by `lambda`; categorical features take the mode over
/// `neighbors`, preferring the seed's own value among tied modes, then the
/// lexically smallest.
pub fn interpolate(
    seed: &[Value],
    neighbor: &[Value],
    neighbors: &[&[Value]],
    lambda: f64,
) -> Vec<Value> {
    seed.iter()
        .zip(neighbor)
        .enumerate()
        .map(|(j, (s, n))| match (s, n) {
            (Value::Num(a), Value::Num(b)) => {
                let x = a + lambda * (b - a);
                Value::Num(x.clamp(a.min(*b), a.max(*b)))
            }
            (Value::Cat(own), _) => Value::Cat(mode(neighbors.iter().map(|r| &r[j]), own)),
            _ => s.clone(),
        })
        .collect()
}

fn mode<'a>(values: impl Iterator<Item = &'a Value>, own: &str) -> String {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for v in values {
        if let Value::Cat(c) = v {
            match counts.iter_mut().find(|(k, _)| k == c) {
                Some((_, n)) => *n += 1,
                None => counts.push((c, 1)),
            }
        }
    }
    let top = counts.iter().map(|(_, n)| *n).max().unwrap_or(0);
    let mut tied: Vec<&str> = counts
        .iter()
        .filter(|(_, n)| *n == top)
        .map(|(c, _)| *c)
        .collect();
    if tied.contains(&own) || tied.is_empty() {
        return own.to_string();
    }
    tied.sort_unstable();
    tied[0].to_string()
}
