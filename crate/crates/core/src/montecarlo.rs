//! Monte Carlo yield estimation.
//!
//! Sample `i` of a run draws its parameters from a generator derived from
//! `(seed, i)` alone, and the aggregation is integer counting, so results
//! are bit-identical for any number of worker threads. Parallelism comes
//! from the ambient rayon pool; wrap the call in `ThreadPool::install` to
//! control it.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{sample_rng, std_normal_quantile};
use crate::error::{Error, Result};
use crate::problem::{DesignProblem, Specification};

/// Runs with more samples than this do not retain them unless asked to.
pub const RETAIN_LIMIT: u64 = 100_000;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retention {
    /// Retain when `n ≤ RETAIN_LIMIT`.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecPassCount {
    pub spec: Specification,
    pub passed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub n_samples: u64,
    pub n_pass: u64,
    pub yield_estimate: f64,
    pub seed: u64,
    pub per_spec_pass: Vec<SpecPassCount>,
    /// Samples whose metrics could not be evaluated; they count as failures.
    pub eval_failures: u64,
    /// Row `i` is the parameter vector of sample `i`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

#[derive(Default)]
struct Tally {
    pass: u64,
    failures: u64,
    per_spec: Vec<u64>,
    samples: Vec<Vec<f64>>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.pass += other.pass;
        self.failures += other.failures;
        if self.per_spec.len() < other.per_spec.len() {
            self.per_spec.resize(other.per_spec.len(), 0);
        }
        for (a, b) in self.per_spec.iter_mut().zip(other.per_spec) {
            *a += b;
        }
        self.samples.extend(other.samples);
        self
    }
}

/// Estimates the joint yield of all specifications from `n` samples.
pub fn run_monte_carlo(problem: &DesignProblem, n: u64, seed: u64) -> Result<MonteCarloResult> {
    run_monte_carlo_with(problem, n, seed, Retention::Auto)
}

pub fn run_monte_carlo_with(problem: &DesignProblem, n: u64, seed: u64, retention: Retention) -> Result<MonteCarloResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    if problem.specs().is_empty() {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one specification".into()));
    }
    let retain = match retention {
        Retention::Auto => n <= RETAIN_LIMIT,
        Retention::Always => true,
        Retention::Never => false,
    };
    let specs = problem.specs();
    let params = problem.parameters();
    let n_chunks = n.div_ceil(CHUNK);

    let tally = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally { per_spec: vec![0; specs.len()], ..Tally::default() };
            let mut x = vec![0.0; params.len()];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = sample_rng(seed, i);
                for (xj, p) in x.iter_mut().zip(params) {
                    *xj = p.dist.sample(&mut rng);
                }
                match problem.model_at(&x) {
                    Ok(model) => {
                        let mut all = true;
                        let mut failed = false;
                        for (k, spec) in specs.iter().enumerate() {
                            match model.evaluate(spec.metric) {
                                Ok(v) if spec.holds(v) => t.per_spec[k] += 1,
                                Ok(_) => all = false,
                                Err(_) => {
                                    all = false;
                                    failed = true;
                                }
                            }
                        }
                        if failed {
                            // A partially evaluable sample is still a failed evaluation.
                            t.failures += 1;
                        }
                        if all {
                            t.pass += 1;
                        }
                    }
                    Err(_) => t.failures += 1,
                }
                if retain {
                    t.samples.push(x.clone());
                }
            }
            t
        })
        .reduce(Tally::default, Tally::merge);

    Ok(MonteCarloResult {
        n_samples: n,
        n_pass: tally.pass,
        yield_estimate: tally.pass as f64 / n as f64,
        seed,
        per_spec_pass: specs
            .iter()
            .zip(tally.per_spec.iter().copied().chain(std::iter::repeat(0)))
            .map(|(s, passed)| SpecPassCount { spec: *s, passed })
            .collect(),
        eval_failures: tally.failures,
        samples: retain.then_some(tally.samples),
    })
}

/// Wilson score interval for `passed` successes out of `n` trials.
pub fn wilson_interval(passed: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain { what: "confidence level", value: level });
    }
    if n == 0 || passed > n {
        return Err(Error::InvalidArgument(format!("need 0 <= passed <= n and n > 0, got {passed}/{n}")));
    }
    let n_f = n as f64;
    let p = passed as f64 / n_f;
    let z = std_normal_quantile(0.5 + 0.5 * level);
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = if passed == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if passed == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

/// Wilson score interval around a Monte Carlo yield estimate.
pub fn confidence_interval(result: &MonteCarloResult, level: f64) -> Result<(f64, f64)> {
    wilson_interval(result.n_pass, result.n_samples, level)
}
