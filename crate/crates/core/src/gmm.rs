//! One-dimensional Gaussian mixtures: EM fitting, BIC model selection,
//! density evaluation and bounded sampling.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{BoundPolicy, Bounds};
use crate::error::{Error, Result};
use crate::seed;

/// Draw attempts allowed per value under [`BoundPolicy::Reject`].
pub const REDRAW_CAP: usize = 1000;

const VARIANCE_EPS: f64 = 1e-12;
const MIN_RESPONSIBILITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GaussianComponent {
    pub fn density(&self, x: f64) -> f64 {
        normal_pdf(x, self.mean, self.variance)
    }
}

// Standardizing first keeps huge variances from overflowing into inf/inf.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sd)
}

fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub max_k: usize,
    pub max_iterations: usize,
    /// Stop once the relative change in log-likelihood drops below this.
    pub tolerance: f64,
    /// Variance floor as a multiple of (sample variance + 1e-12).
    pub variance_floor: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_k: 5,
            max_iterations: 200,
            tolerance: 1e-6,
            variance_floor: 1e-6,
            restarts: 3,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_k < 1 {
            return Err(Error::InvalidConfig("max K must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("EM tolerance must be positive".into()));
        }
        if !(self.variance_floor > 0.0) || !self.variance_floor.is_finite() {
            return Err(Error::InvalidConfig(
                "variance floor must be positive".into(),
            ));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitInfo {
    pub iterations: usize,
    /// Log-likelihood after each M-step, starting with the initial parameters.
    pub trace: Vec<f64>,
    pub bic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    log_likelihood: f64,
    info: FitInfo,
}

#[derive(Serialize, Deserialize)]
struct MixtureDoc {
    components: Vec<GaussianComponent>,
    k: usize,
    #[serde(default)]
    loglik: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bic: Option<f64>,
    #[serde(default)]
    iterations: usize,
}

impl Serialize for GaussianMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MixtureDoc {
            components: self.components.clone(),
            k: self.k(),
            loglik: Some(self.log_likelihood).filter(|l| l.is_finite()),
            bic: self.info.bic,
            iterations: self.info.iterations,
        }
        .serialize(s)
    }
}

impl GaussianMixture {
    /// Build a mixture from explicit components. Weights must be non-negative
    /// and sum to one; variances must be positive.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig(
                "a mixture needs at least one component".into(),
            ));
        }
        let mut total = 0.0;
        for c in &components {
            if !(c.weight >= 0.0)
                || !c.mean.is_finite()
                || !(c.variance > 0.0)
                || !c.variance.is_finite()
            {
                return Err(Error::InvalidConfig(format!(
                    "invalid mixture component {c:?}"
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(GaussianMixture {
            components,
            log_likelihood: f64::NAN,
            info: FitInfo::default(),
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MixtureDoc = serde_json::from_str(s)?;
        if doc.k != doc.components.len() {
            return Err(Error::InvalidConfig(format!(
                "k = {} but {} components listed",
                doc.k,
                doc.components.len()
            )));
        }
        let mut m = GaussianMixture::new(doc.components)?;
        m.log_likelihood = doc.loglik.unwrap_or(f64::NAN);
        m.info.bic = doc.bic;
        m.info.iterations = doc.iterations;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture serializes")
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn info(&self) -> &FitInfo {
        &self.info
    }

    pub fn bic(&self) -> Option<f64> {
        self.info.bic
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + c.mean * c.mean))
            .sum::<f64>()
            - m * m
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.density(x))
            .sum()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        log_sum_exp(
            self.components
                .iter()
                .map(|c| c.weight.ln() + normal_ln_pdf(x, c.mean, c.variance)),
        )
    }

    pub fn total_log_likelihood(&self, values: &[f64]) -> f64 {
        values.iter().map(|&x| self.ln_pdf(x)).sum()
    }

    /// Draw `n` values; see [`sample_with`](Self::sample_with).
    pub fn sample(
        &self,
        n: usize,
        bounds: Option<Bounds>,
        policy: BoundPolicy,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let mut rng = seed::rng(seed, &[]);
        self.sample_with(&mut rng, n, bounds, policy)
    }

    /// Pick component i with probability π_i, draw from N(μ_i, σ_i²), then
    /// apply the bound policy. Clamp maps to the nearest bound; reject redraws.
    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n: usize,
        bounds: Option<Bounds>,
        policy: BoundPolicy,
    ) -> Result<Vec<f64>> {
        let bounds = match (policy, bounds) {
            (BoundPolicy::None, _) => None,
            (_, Some(b)) => Some(b),
            (_, None) => {
                return Err(Error::InvalidConfig(
                    "bounded sampling policy requires bounds".into(),
                ))
            }
        };
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let x = match bounds {
                None => self.draw(rng),
                Some(b) if policy == BoundPolicy::Clamp => b.clamp(self.draw(rng)),
                Some(b) => {
                    let mut accepted = None;
                    for _ in 0..REDRAW_CAP {
                        let x = self.draw(rng);
                        if b.contains(x) {
                            accepted = Some(x);
                            break;
                        }
                    }
                    accepted.ok_or(Error::SamplingStarved {
                        lower: b.lower,
                        upper: b.upper,
                    })?
                }
            };
            out.push(x);
        }
        Ok(out)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().expect("non-empty");
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        chosen.mean + chosen.variance.sqrt() * z
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

fn variance_floor(values: &[f64], cfg: &EmConfig) -> f64 {
    let (_, var) = mean_and_variance(values);
    cfg.variance_floor * (var + VARIANCE_EPS)
}

/// Fit a `k`-component mixture by EM, keeping the best of `cfg.restarts`
/// seeded initializations.
pub fn fit_em(values: &[f64], k: usize, cfg: &EmConfig) -> Result<GaussianMixture> {
    cfg.validate()?;
    if k < 1 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if values.len() < k {
        return Err(Error::InsufficientData {
            needed: k,
            got: values.len(),
        });
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let floor = variance_floor(values, cfg);
    let (mean, var) = mean_and_variance(values);
    if !mean.is_finite() || !floor.is_finite() {
        return Err(Error::NonFinite);
    }

    if var == 0.0 {
        let components = vec![
            GaussianComponent {
                weight: 1.0 / k as f64,
                mean,
                variance: floor,
            };
            k
        ];
        let mut m = GaussianMixture {
            components,
            log_likelihood: 0.0,
            info: FitInfo::default(),
        };
        m.log_likelihood = m.total_log_likelihood(values);
        m.info.trace.push(m.log_likelihood);
        return Ok(m);
    }

    let mut best: Option<GaussianMixture> = None;
    for r in 0..cfg.restarts {
        let mut rng = seed::rng(cfg.seed, &[seed::text_key("em"), k as u64, r as u64]);
        let init = initialize(values, k, var.max(floor), &mut rng);
        let fitted = run_em(values, init, floor, cfg);
        let better = match &best {
            None => true,
            Some(b) => fitted.log_likelihood > b.log_likelihood,
        };
        if better {
            best = Some(fitted);
        }
    }
    let best = best.expect("restarts >= 1");
    let finite = best
        .components
        .iter()
        .all(|c| c.weight.is_finite() && c.mean.is_finite() && c.variance.is_finite());
    if !finite || best.log_likelihood.is_nan() {
        return Err(Error::NonFinite);
    }
    Ok(best)
}

/// k-means++ seeding of the means, uniform weights, pooled variance.
fn initialize<R: Rng>(
    values: &[f64],
    k: usize,
    pooled: f64,
    rng: &mut R,
) -> Vec<GaussianComponent> {
    let mut means = Vec::with_capacity(k);
    means.push(values[rng.random_range(0..values.len())]);
    let mut d2: Vec<f64> = values.iter().map(|x| (x - means[0]).powi(2)).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = values.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            values[pick]
        } else {
            values[rng.random_range(0..values.len())]
        };
        means.push(next);
        for (d, x) in d2.iter_mut().zip(values) {
            *d = d.min((x - next).powi(2));
        }
    }
    means
        .into_iter()
        .map(|mean| GaussianComponent {
            weight: 1.0 / k as f64,
            mean,
            variance: pooled,
        })
        .collect()
}

fn run_em(
    values: &[f64],
    mut comps: Vec<GaussianComponent>,
    floor: f64,
    cfg: &EmConfig,
) -> GaussianMixture {
    let n = values.len();
    let k = comps.len();
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut ll = e_step(values, &comps, &mut resp);
    trace.push(ll);
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        for (j, c) in comps.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            c.weight = nk / n as f64;
            if nk < MIN_RESPONSIBILITY {
                // an empty component keeps its location; its weight is zero
                continue;
            }
            let mean = (0..n).map(|i| resp[i * k + j] * values[i]).sum::<f64>() / nk;
            let var = (0..n)
                .map(|i| resp[i * k + j] * (values[i] - mean).powi(2))
                .sum::<f64>()
                / nk;
            c.mean = mean;
            c.variance = var.max(floor);
        }
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in comps.iter_mut() {
            c.weight /= total;
        }
        let next = e_step(values, &comps, &mut resp);
        trace.push(next);
        let change = (next - ll).abs();
        ll = next;
        if change < cfg.tolerance * ll.abs().max(1e-12) {
            break;
        }
    }
    GaussianMixture {
        components: comps,
        log_likelihood: ll,
        info: FitInfo {
            iterations,
            trace,
            bic: None,
        },
    }
}

/// Fill responsibilities and return the log-likelihood of the current parameters.
fn e_step(values: &[f64], comps: &[GaussianComponent], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let ln_w: Vec<f64> = comps.iter().map(|c| c.weight.ln()).collect();
    let mut ll = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        for (j, c) in comps.iter().enumerate() {
            row[j] = ln_w[j] + normal_ln_pdf(x, c.mean, c.variance);
        }
        let lse = log_sum_exp(row.iter().copied());
        for r in row.iter_mut() {
            *r = (*r - lse).exp();
        }
        ll += lse;
    }
    ll
}

/// Bayesian information criterion with 3k − 1 free parameters.
pub fn bic(log_likelihood: f64, k: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + (3 * k - 1) as f64 * (n as f64).ln()
}

/// Fit k = 1..=min(max K, n) and keep the BIC minimizer; ties go to the smaller k.
pub fn select_k(values: &[f64], cfg: &EmConfig) -> Result<GaussianMixture> {
    cfg.validate()?;
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    let mut best: Option<GaussianMixture> = None;
    for k in 1..=cfg.max_k.min(values.len()) {
        let mut m = fit_em(values, k, cfg)?;
        let score = bic(m.log_likelihood, k, values.len());
        m.info.bic = Some(score);
        if best
            .as_ref()
            .is_none_or(|b| score < b.info.bic.expect("scored"))
        {
            best = Some(m);
        }
    }
    Ok(best.expect("at least k = 1"))
}
