//! Empirical categorical distributions sampled by inverse CDF.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Observed category frequencies with their running cumulative sums.
///
/// Categories keep first-appearance order. The last cumulative entry is
/// exactly 1, so every uniform draw in `[0, 1)` maps to some category.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    categories: Vec<String>,
    probabilities: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CdfDoc {
    categories: Vec<String>,
    probabilities: Vec<f64>,
}

impl Serialize for EmpiricalCdf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CdfDoc {
            categories: self.categories.clone(),
            probabilities: self.probabilities.clone(),
        }
        .serialize(s)
    }
}

impl EmpiricalCdf {
    pub fn fit<S: AsRef<str>>(values: &[S]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut categories: Vec<String> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for v in values {
            let v = v.as_ref();
            match index.get(v) {
                Some(&i) => counts[i] += 1,
                None => {
                    index.insert(v.to_string(), categories.len());
                    categories.push(v.to_string());
                    counts.push(1);
                }
            }
        }
        let n = values.len() as f64;
        let probabilities = counts.iter().map(|&c| c as f64 / n).collect();
        let mut running = 0usize;
        let mut cdf: Vec<f64> = counts
            .iter()
            .map(|&c| {
                running += c;
                running as f64 / n
            })
            .collect();
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(EmpiricalCdf {
            categories,
            probabilities,
            cdf,
        })
    }

    /// Build from explicit probabilities (e.g. a stored JSON document).
    pub fn from_probabilities(categories: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::EmptyInput);
        }
        if categories.len() != probabilities.len() {
            return Err(Error::InvalidConfig(format!(
                "{} categories but {} probabilities",
                categories.len(),
                probabilities.len()
            )));
        }
        let uniq: std::collections::HashSet<_> = categories.iter().collect();
        if uniq.len() != categories.len() {
            return Err(Error::InvalidConfig("duplicate category".into()));
        }
        if probabilities.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidConfig(
                "category probabilities must be positive".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("non-empty") = 1.0;
        if cdf.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "cumulative probabilities are not increasing".into(),
            ));
        }
        Ok(EmpiricalCdf {
            categories,
            probabilities,
            cdf,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CdfDoc = serde_json::from_str(s)?;
        Self::from_probabilities(doc.categories, doc.probabilities)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Index of the first category whose cumulative probability is ≥ `r`.
    pub fn index_for(&self, r: f64) -> usize {
        self.cdf.partition_point(|&c| c < r).min(self.cdf.len() - 1)
    }

    pub fn category_for(&self, r: f64) -> &str {
        &self.categories[self.index_for(r)]
    }

    /// Map an explicit sequence of uniforms through the CDF.
    pub fn map_uniforms(&self, rs: impl IntoIterator<Item = f64>) -> Vec<String> {
        rs.into_iter()
            .map(|r| self.category_for(r).to_string())
            .collect()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<String> {
        let mut rng = seed::rng(seed, &[]);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| self.category_for(rng.random::<f64>()).to_string())
            .collect()
    }
}

pub fn fit_cdf<S: AsRef<str>>(values: &[S]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::fit(values)
}

pub fn sample_cdf(cdf: &EmpiricalCdf, n: usize, seed: u64) -> Vec<String> {
    cdf.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> EmpiricalCdf {
        let mut v = vec!["A"; 5];
        v.extend(["B"; 3]);
        v.extend(["C"; 2]);
        fit_cdf(&v).unwrap()
    }

    #[test]
    fn cumulative_values() {
        let c = abc();
        assert_eq!(c.categories(), ["A", "B", "C"]);
        assert_eq!(c.cdf(), [0.5, 0.8, 1.0]);
    }

    #[test]
    fn single_category() {
        let c = fit_cdf(&["X"; 10]).unwrap();
        assert_eq!(c.probabilities(), [1.0]);
        assert_eq!(c.cdf(), [1.0]);
    }

    #[test]
    fn first_appearance_order() {
        let c = fit_cdf(&["B", "A", "B"]).unwrap();
        assert_eq!(c.categories(), ["B", "A"]);
        assert!((c.probabilities()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.probabilities()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_input() {
        let empty: [&str; 0] = [];
        assert!(matches!(fit_cdf(&empty), Err(Error::EmptyInput)));
    }

    #[test]
    fn inverse_mapping_uses_less_or_equal() {
        let c = abc();
        assert_eq!(c.category_for(0.85), "C");
        assert_eq!(c.category_for(0.5), "A");
        assert_eq!(c.category_for(0.8), "B");
        assert_eq!(c.category_for(0.0), "A");
        assert_eq!(c.category_for(0.999_999), "C");
    }

    #[test]
    fn json_document() {
        let c = abc();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(
            s,
            r#"{"categories":["A","B","C"],"probabilities":[0.5,0.3,0.2]}"#
        );
        assert_eq!(EmpiricalCdf::from_json(&s).unwrap().cdf(), c.cdf());
        assert!(EmpiricalCdf::from_json(r#"{"categories":["A"],"probabilities":[0.4]}"#).is_err());
        assert!(
            EmpiricalCdf::from_json(r#"{"categories":["A","A"],"probabilities":[0.5,0.5]}"#)
                .is_err()
        );
        assert!(
            EmpiricalCdf::from_json(r#"{"categories":["A","B"],"probabilities":[1.0,0.0]}"#)
                .is_err()
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let c = abc();
        assert_eq!(sample_cdf(&c, 50, 4), sample_cdf(&c, 50, 4));
        assert!(sample_cdf(&c, 0, 4).is_empty());
    }
}
