//! First-order sensitivity analysis at the nominal point.
//!
//! The Jacobian has one row per declared metric and one column per
//! statistical (non-fixed) parameter. Columns scaled by each parameter's
//! standard deviation make sensitivities comparable across parameters and
//! distribution kinds; the ranking sorts by the magnitude of those scaled
//! entries.

use serde::Serialize;

use crate::devices::{Metric, MetricSet};
use crate::error::{Error, Result};
use crate::problem::DesignProblem;

/// Smallest finite-difference step base, used when a nominal is zero.
pub const TINY_FLOOR: f64 = 1e-30;
pub const DEFAULT_REL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Central,
    Forward,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub scheme: Scheme,
    pub nominal_metrics: MetricSet,
    pub metrics: Vec<Metric>,
    /// Statistical parameters, in problem order.
    pub parameters: Vec<String>,
    /// `jacobian[i][j] = ∂metric_i/∂parameter_j`.
    pub jacobian: Vec<Vec<f64>>,
    /// `jacobian[i][j]·std_dev_j`.
    pub scaled: Vec<Vec<f64>>,
    /// Per metric, parameter names by descending `|scaled|`.
    pub ranking: Vec<Vec<String>>,
}

impl SensitivityReport {
    fn row(&self, metric: Metric) -> Result<usize> {
        self.metrics
            .iter()
            .position(|&m| m == metric)
            .ok_or_else(|| Error::UnknownMetric(metric.name().to_string()))
    }

    /// The `k` parameters with the largest scaled sensitivity for `metric`.
    pub fn most_sensitive(&self, metric: Metric, k: usize) -> Result<&[String]> {
        let row = self.row(metric)?;
        if k == 0 || k > self.parameters.len() {
            return Err(Error::InvalidArgument(format!(
                "k must be in 1..={}, got {k}",
                self.parameters.len()
            )));
        }
        Ok(&self.ranking[row][..k])
    }

    pub fn entry(&self, metric: Metric, param: &str) -> Result<f64> {
        let row = self.row(metric)?;
        let col = self
            .parameters
            .iter()
            .position(|p| p == param)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))?;
        Ok(self.jacobian[row][col])
    }
}

/// A metric linearized at the nominal point: `value + gradient·(x − nominal)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    pub metric: Metric,
    pub value_at_nominal: f64,
    /// Statistical parameter names, aligned with `gradient`.
    pub parameters: Vec<String>,
    pub gradient: Vec<f64>,
}

fn fd_step(nominal: f64, rel_step: f64) -> f64 {
    rel_step * nominal.abs().max(TINY_FLOOR)
}

/// Gradient of `metric` at `x` restricted to `cols`, by the requested scheme.
pub(crate) fn gradient_at(
    problem: &DesignProblem,
    x: &[f64],
    metric: Metric,
    cols: &[usize],
    scheme: Scheme,
    rel_step: f64,
) -> Result<Vec<f64>> {
    let names = problem.parameters();
    let eval = |j: usize, v: f64| -> Result<f64> {
        let mut p = x.to_vec();
        p[j] = v;
        problem.evaluate(&p, metric).map_err(|e| Error::Perturbation {
            param: names[j].name.clone(),
            value: v,
            source: Box::new(e),
        })
    };
    match scheme {
        Scheme::Analytic => {
            let full = problem.gradient(x, metric)?;
            Ok(cols.iter().map(|&j| full[j]).collect())
        }
        Scheme::Central => cols
            .iter()
            .map(|&j| {
                let h = fd_step(x[j], rel_step);
                let (up, dn) = (x[j] + h, x[j] - h);
                Ok((eval(j, up)? - eval(j, dn)?) / (up - dn))
            })
            .collect(),
        Scheme::Forward => {
            let f0 = problem.evaluate(x, metric)?;
            cols.iter()
                .map(|&j| {
                    let h = fd_step(x[j], rel_step);
                    let up = x[j] + h;
                    Ok((eval(j, up)? - f0) / (up - x[j]))
                })
                .collect()
        }
    }
}

fn check_rel_step(rel_step: f64) -> Result<()> {
    if rel_step > 0.0 && rel_step <= 0.1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rel_step must be in (0, 0.1], got {rel_step}")))
    }
}

/// Sensitivity report at the problem's nominal point.
pub fn jacobian(problem: &DesignProblem, scheme: Scheme, rel_step: f64) -> Result<SensitivityReport> {
    jacobian_at(problem, &problem.nominal_point(), scheme, rel_step)
}

/// Sensitivity report at an arbitrary parameter point `x`.
pub fn jacobian_at(problem: &DesignProblem, x: &[f64], scheme: Scheme, rel_step: f64) -> Result<SensitivityReport> {
    check_rel_step(rel_step)?;
    let cols = problem.statistical_indices();
    let params = problem.parameters();
    let scales: Vec<f64> = cols.iter().map(|&j| params[j].dist.std_dev()).collect();
    let nominal_metrics = problem.evaluate_metrics(x)?;

    let mut jac = Vec::with_capacity(problem.metrics().len());
    let mut scaled = Vec::with_capacity(problem.metrics().len());
    let mut ranking = Vec::with_capacity(problem.metrics().len());
    for &metric in problem.metrics() {
        let row = gradient_at(problem, x, metric, &cols, scheme, rel_step)?;
        let srow: Vec<f64> = row.iter().zip(&scales).map(|(g, s)| g * s).collect();
        let mut order: Vec<usize> = (0..cols.len()).collect();
        // Stable: ties keep declaration order.
        order.sort_by(|&a, &b| srow[b].abs().total_cmp(&srow[a].abs()));
        ranking.push(order.into_iter().map(|k| params[cols[k]].name.clone()).collect());
        jac.push(row);
        scaled.push(srow);
    }
    Ok(SensitivityReport {
        scheme,
        nominal_metrics,
        metrics: problem.metrics().to_vec(),
        parameters: cols.iter().map(|&j| params[j].name.clone()).collect(),
        jacobian: jac,
        scaled,
        ranking,
    })
}

/// Linearizes `metric` at the nominal point using analytical gradients.
pub fn linearize(problem: &DesignProblem, metric: Metric) -> Result<LinearModel> {
    if !problem.metrics().contains(&metric) {
        return Err(Error::UnknownMetric(metric.name().to_string()));
    }
    let x = problem.nominal_point();
    let cols = problem.statistical_indices();
    Ok(LinearModel {
        metric,
        value_at_nominal: problem.evaluate(&x, metric)?,
        parameters: cols.iter().map(|&j| problem.parameters()[j].name.clone()).collect(),
        gradient: gradient_at(problem, &x, metric, &cols, Scheme::Analytic, DEFAULT_REL_STEP)?,
    })
}
