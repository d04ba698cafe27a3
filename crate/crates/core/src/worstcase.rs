//! Worst-case distance (WCD) analysis.
//!
//! Parameters are mapped into u-space, where each statistical parameter is
//! an independent standard normal variate and the origin is the median
//! design. For one specification the worst-case point is the point of the
//! specification boundary closest to the origin, and its signed distance
//! `β` gives the yield with respect to that specification as `Y = Φ(β)`
//! when the boundary is linear in u-space.
//!
//! `β` is positive when the origin satisfies the specification and
//! negative when it violates it.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::std_normal_cdf;
use crate::error::{Error, Result};
use crate::problem::{DesignProblem, Relation, Specification};
use crate::sensitivity::{linearize, LinearModel};

/// Relative tolerance on `|metric(x*) − bound|` for a converged
/// relinearized solve.
pub const BOUNDARY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseResult {
    pub spec: Specification,
    /// Signed worst-case distance.
    pub beta: f64,
    /// Statistical parameter names; `worst_case_u` and `worst_case_x` are
    /// aligned with it.
    pub parameters: Vec<String>,
    pub worst_case_u: Vec<f64>,
    pub worst_case_x: Vec<f64>,
    /// `Φ(beta)`.
    pub linear_yield: f64,
    /// Relinearizations performed at worst-case candidates (0 for the
    /// one-shot linear solve).
    pub iterations: usize,
}

/// Yield with respect to one specification from its worst-case distance,
/// `Y = ½·(1 + erf(β/√2)) = Φ(β)`.
pub fn yield_from_beta(beta: f64) -> f64 {
    std_normal_cdf(beta)
}

fn sign(spec: &Specification) -> f64 {
    match spec.relation {
        Relation::Ge => 1.0,
        Relation::Le => -1.0,
    }
}

struct UMap<'a> {
    problem: &'a DesignProblem,
    cols: Vec<usize>,
}

impl<'a> UMap<'a> {
    fn new(problem: &'a DesignProblem) -> Self {
        Self { problem, cols: problem.statistical_indices() }
    }

    fn names(&self) -> Vec<String> {
        self.cols.iter().map(|&j| self.problem.parameters()[j].name.clone()).collect()
    }

    /// Statistical coordinates `x_j = from_u(u_j)`.
    fn stat_x(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.cols
            .iter()
            .zip(u)
            .map(|(&j, &uj)| self.problem.parameters()[j].dist.from_u(uj))
            .collect()
    }

    /// Full parameter vector: statistical coordinates from `u`, the rest at nominal.
    fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.problem.nominal_point();
        for (&j, xj) in self.cols.iter().zip(self.stat_x(u)?) {
            x[j] = xj;
        }
        Ok(x)
    }

    fn nominal_u(&self) -> Result<Vec<f64>> {
        self.cols
            .iter()
            .map(|&j| {
                let p = &self.problem.parameters()[j];
                p.dist.to_u(p.nominal)
            })
            .collect()
    }

    /// Margin `G(u)` (positive inside the spec) and its u-space gradient.
    fn margin_and_gradient(&self, spec: &Specification, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let x = self.point(u)?;
        let s = sign(spec);
        let value = self.problem.evaluate(&x, spec.metric)?;
        let grad_x = self.problem.gradient(&x, spec.metric)?;
        let grad_u = self
            .cols
            .iter()
            .zip(u)
            .map(|(&j, &uj)| Ok(s * grad_x[j] * self.problem.parameters()[j].dist.dx_du(uj)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok((spec.margin(value), grad_u))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Closest point to the origin on `{u : G0 + ∇G·(u − u0) = 0}`.
fn project_origin(g0: f64, grad: &[f64], u0: &[f64], metric: &str) -> Result<Vec<f64>> {
    let nn = dot(grad, grad);
    if nn == 0.0 || !nn.is_finite() {
        return Err(Error::DegenerateGradient { metric: metric.to_string() });
    }
    let t = (dot(grad, u0) - g0) / nn;
    Ok(grad.iter().map(|g| t * g).collect())
}

/// WCD of `spec` for a metric linearized at the nominal point.
///
/// The parameter-space gradient is carried into u-space through the
/// derivative of each `from_u` at the nominal's u-coordinate; the
/// resulting hyperplane is then intersected with the ray towards the
/// origin's projection.
pub fn wcd_linear(lin: &LinearModel, problem: &DesignProblem, spec: &Specification) -> Result<WorstCaseResult> {
    if lin.metric != spec.metric {
        return Err(Error::InvalidArgument(format!(
            "linear model is for `{}` but spec constrains `{}`",
            lin.metric, spec.metric
        )));
    }
    let map = UMap::new(problem);
    let names = map.names();
    if names != lin.parameters {
        return Err(Error::InvalidArgument("linear model parameters do not match the problem".into()));
    }
    let u0 = map.nominal_u()?;
    let s = sign(spec);
    let gamma = map
        .cols
        .iter()
        .zip(&u0)
        .zip(&lin.gradient)
        .map(|((&j, &uj), &g)| Ok(s * g * problem.parameters()[j].dist.dx_du(uj)?))
        .collect::<Result<Vec<f64>>>()?;
    let g_nominal = spec.margin(lin.value_at_nominal);
    let u_star = project_origin(g_nominal, &gamma, &u0, spec.metric.name())?;
    let g_origin = g_nominal - dot(&gamma, &u0);
    let beta = g_origin / norm(&gamma);
    Ok(WorstCaseResult {
        spec: *spec,
        beta,
        parameters: names,
        worst_case_x: map.stat_x(&u_star)?,
        worst_case_u: u_star,
        linear_yield: yield_from_beta(beta),
        iterations: 0,
    })
}

/// Convenience: linearize at nominal and solve.
pub fn wcd_linear_for(problem: &DesignProblem, spec: &Specification) -> Result<WorstCaseResult> {
    wcd_linear(&linearize(problem, spec.metric)?, problem, spec)
}

/// WCD of `spec` against the true metric by repeated linearization.
///
/// Starting from the one-shot linear solution, the metric is relinearized
/// at the current worst-case candidate and the origin is projected onto
/// the new tangent hyperplane. The solve stops once the candidate moves
/// less than `tol` in u-space and the metric at the candidate is within
/// [`BOUNDARY_REL_TOL`] of the bound.
pub fn wcd_relinearized(
    problem: &DesignProblem,
    spec: &Specification,
    max_iter: usize,
    tol: f64,
) -> Result<WorstCaseResult> {
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if !problem.metrics().contains(&spec.metric) {
        return Err(Error::UnknownMetric(spec.metric.name().to_string()));
    }
    let map = UMap::new(problem);
    let metric = spec.metric.name();
    let mut u = wcd_linear_for(problem, spec)?.worst_case_u;
    let mut last_step = f64::INFINITY;
    for iteration in 1..=max_iter {
        let (g, grad) = map.margin_and_gradient(spec, &u)?;
        let next = project_origin(g, &grad, &u, metric)?;
        last_step = norm(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        u = next;
        if last_step < tol {
            let x = map.point(&u)?;
            let value = problem.evaluate(&x, spec.metric)?;
            let scale = spec.bound.abs().max(f64::MIN_POSITIVE);
            if (value - spec.bound).abs() <= BOUNDARY_REL_TOL * scale {
                let origin_margin = spec.margin(problem.evaluate(&map.point(&vec![0.0; u.len()])?, spec.metric)?);
                let beta = if origin_margin == 0.0 { 0.0 } else { origin_margin.signum() * norm(&u) };
                return Ok(WorstCaseResult {
                    spec: *spec,
                    beta,
                    parameters: map.names(),
                    worst_case_x: map.stat_x(&u)?,
                    worst_case_u: u,
                    linear_yield: yield_from_beta(beta),
                    iterations: iteration,
                });
            }
        }
    }
    Err(Error::NotConverged { iterations: max_iter, last_step, last_u: u })
}

/// Grid-search estimate of the distance from the u-space origin to the
/// nearest point violating `spec`.
///
/// Every point of a `points_per_axis`-per-side grid over `[−r, r]^d` is
/// mapped to parameter space and checked; points where the metric cannot
/// be evaluated count as violations. Returns 0 when the origin itself
/// violates the spec. The estimate never undershoots the true distance and
/// overshoots by at most [`oracle_grid_error`].
pub fn wcd_brute_oracle(
    problem: &DesignProblem,
    spec: &Specification,
    grid_radius: f64,
    points_per_axis: usize,
) -> Result<f64> {
    let map = UMap::new(problem);
    let d = map.cols.len();
    if d == 0 || d > 3 {
        return Err(Error::InvalidArgument(format!("brute-force oracle needs 1 to 3 statistical parameters, got {d}")));
    }
    if points_per_axis < 11 {
        return Err(Error::InvalidArgument("brute-force oracle needs at least 11 points per axis".into()));
    }
    if !(grid_radius > 0.0 && grid_radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid radius must be positive, got {grid_radius}")));
    }
    let violates = |u: &[f64]| -> bool {
        match map.point(u).and_then(|x| problem.evaluate(&x, spec.metric)) {
            Ok(v) => !spec.holds(v),
            Err(_) => true,
        }
    };
    if violates(&vec![0.0; d]) {
        return Ok(0.0);
    }
    let n = points_per_axis;
    let coord = |k: usize| -grid_radius + 2.0 * grid_radius * k as f64 / (n - 1) as f64;
    let total = n.pow(d as u32);
    let best = (0..total)
        .into_par_iter()
        .filter_map(|mut idx| {
            let mut u = [0.0; 3];
            for uj in u.iter_mut().take(d) {
                *uj = coord(idx % n);
                idx /= n;
            }
            let u = &u[..d];
            violates(u).then(|| norm(u))
        })
        .reduce(|| f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::NoBoundaryWithinRadius { radius: grid_radius })
    }
}

/// Worst-case overshoot of [`wcd_brute_oracle`]: the grid cell diagonal.
pub fn oracle_grid_error(grid_radius: f64, points_per_axis: usize, dims: usize) -> f64 {
    2.0 * grid_radius / (points_per_axis - 1) as f64 * (dims as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Relinearized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseSummary {
    pub method: Method,
    pub per_spec: Vec<WorstCaseResult>,
    /// Minimum of the per-spec yields. Specs are analysed one at a time, so
    /// this is a summary figure, not the joint yield.
    pub min_spec_yield: f64,
}

/// Solves every specification of the problem independently.
pub fn analyze(problem: &DesignProblem, method: Method, max_iter: usize, tol: f64) -> Result<WorstCaseSummary> {
    if problem.specs().is_empty() {
        return Err(Error::InvalidArgument("worst-case analysis needs at least one specification".into()));
    }
    let per_spec = problem
        .specs()
        .par_iter()
        .map(|spec| match method {
            Method::Linear => wcd_linear_for(problem, spec),
            Method::Relinearized => wcd_relinearized(problem, spec, max_iter, tol),
        })
        .collect::<Result<Vec<_>>>()?;
    let min_spec_yield = per_spec.iter().map(|r| r.linear_yield).fold(1.0, f64::min);
    Ok(WorstCaseSummary { method, per_spec, min_spec_yield })
}
