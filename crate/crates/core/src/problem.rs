//! The unit of analysis: a device, its statistical parameters and the
//! specifications its metrics must meet.

use std::fmt;

use serde::Serialize;

use crate::devices::{DeviceKind, DeviceModel, Metric, MetricSet};
use crate::distributions::{DistKind, Distribution};
use crate::error::{Error, Result};

/// A design parameter subject to process variation. Unannotated
/// parameters carry a `Fixed` distribution at their nominal value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticalParameter {
    pub name: String,
    pub nominal: f64,
    pub dist: Distribution,
}

impl StatisticalParameter {
    pub fn new(name: impl Into<String>, nominal: f64, dist: Distribution) -> Result<Self> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(Error::InvalidArgument(format!("`{name}` is not a valid parameter name")));
        }
        if !nominal.is_finite() || !dist.in_support(nominal) {
            return Err(Error::InvalidArgument(format!(
                "nominal {nominal} of `{name}` is outside its distribution's support"
            )));
        }
        match *dist.kind() {
            DistKind::Gaussian { mu, .. } if mu != nominal => {
                return Err(Error::InvalidArgument(format!(
                    "Gaussian parameter `{name}` must have mu equal to its nominal ({mu} != {nominal})"
                )));
            }
            DistKind::Fixed { value } if value != nominal => {
                return Err(Error::InvalidArgument(format!(
                    "fixed parameter `{name}` must equal its nominal ({value} != {nominal})"
                )));
            }
            _ => {}
        }
        Ok(Self { name, nominal, dist })
    }

    pub fn fixed(name: impl Into<String>, value: f64) -> Result<Self> {
        Self::new(name, value, Distribution::fixed(value)?)
    }

    pub fn gaussian(name: impl Into<String>, nominal: f64, sigma: f64) -> Result<Self> {
        Self::new(name, nominal, Distribution::gaussian(nominal, sigma)?)
    }

    pub fn is_statistical(&self) -> bool {
        !self.dist.is_fixed()
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Ge,
    Le,
}

impl Relation {
    pub fn keyword(self) -> &'static str {
        match self {
            Relation::Ge => "ge",
            Relation::Le => "le",
        }
    }
}

/// `metric ≥ bound` or `metric ≤ bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Specification {
    pub metric: Metric,
    pub relation: Relation,
    pub bound: f64,
}

impl Specification {
    pub fn new(metric: Metric, relation: Relation, bound: f64) -> Result<Self> {
        if !bound.is_finite() {
            return Err(Error::InvalidArgument(format!("specification bound must be finite, got {bound}")));
        }
        Ok(Self { metric, relation, bound })
    }

    pub fn ge(metric: Metric, bound: f64) -> Result<Self> {
        Self::new(metric, Relation::Ge, bound)
    }

    pub fn le(metric: Metric, bound: f64) -> Result<Self> {
        Self::new(metric, Relation::Le, bound)
    }

    /// Signed distance to the bound; positive when the spec holds strictly.
    pub fn margin(&self, value: f64) -> f64 {
        match self.relation {
            Relation::Ge => value - self.bound,
            Relation::Le => self.bound - value,
        }
    }

    pub fn holds(&self, value: f64) -> bool {
        self.margin(value) >= 0.0
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:e}", self.metric, self.relation.keyword(), self.bound)
    }
}

/// What a device field is tied to.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Param(String),
    Literal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FieldSource {
    Param(usize),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignProblem {
    device: DeviceKind,
    parameters: Vec<StatisticalParameter>,
    bindings: Vec<(String, Binding)>,
    metrics: Vec<Metric>,
    specs: Vec<Specification>,
    #[serde(skip)]
    sources: Vec<FieldSource>,
}

impl DesignProblem {
    /// Assembles and validates a problem.
    ///
    /// Fields without a binding keep the device's default value.
    pub fn new(
        device: DeviceKind,
        parameters: Vec<StatisticalParameter>,
        bindings: Vec<(String, Binding)>,
        metrics: Vec<Metric>,
        specs: Vec<Specification>,
    ) -> Result<Self> {
        for (i, p) in parameters.iter().enumerate() {
            if parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidArgument(format!("duplicate parameter `{}`", p.name)));
            }
        }
        let mut sources: Vec<FieldSource> =
            device.default_field_values().into_iter().map(FieldSource::Value).collect();
        let mut seen = vec![false; sources.len()];
        for (field, binding) in &bindings {
            let idx = device.field_index(field).ok_or_else(|| {
                Error::InvalidArgument(format!("{} has no field `{field}`", device.name()))
            })?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::InvalidArgument(format!("field `{field}` bound twice")));
            }
            sources[idx] = match binding {
                Binding::Param(name) => FieldSource::Param(
                    parameters
                        .iter()
                        .position(|p| &p.name == name)
                        .ok_or_else(|| Error::UnknownParameter(name.clone()))?,
                ),
                Binding::Literal(v) if v.is_finite() => FieldSource::Value(*v),
                Binding::Literal(v) => {
                    return Err(Error::InvalidArgument(format!("field `{field}` bound to non-finite {v}")))
                }
            };
        }
        for (i, m) in metrics.iter().enumerate() {
            if !device.supports(*m) {
                return Err(Error::UnsupportedMetric { metric: m.name().to_string(), device: device.name() });
            }
            if metrics[..i].contains(m) {
                return Err(Error::InvalidArgument(format!("metric `{m}` declared twice")));
            }
        }
        for s in &specs {
            if !metrics.contains(&s.metric) {
                return Err(Error::InvalidArgument(format!(
                    "specification references undeclared metric `{}`",
                    s.metric
                )));
            }
            if !s.bound.is_finite() {
                return Err(Error::InvalidArgument("specification bound must be finite".into()));
            }
        }
        Ok(Self { device, parameters, bindings, metrics, specs, sources })
    }

    pub fn device(&self) -> &DeviceKind {
        &self.device
    }

    pub fn parameters(&self) -> &[StatisticalParameter] {
        &self.parameters
    }

    pub fn bindings(&self) -> &[(String, Binding)] {
        &self.bindings
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    pub fn specs(&self) -> &[Specification] {
        &self.specs
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    /// Indices of the parameters with a non-degenerate distribution.
    pub fn statistical_indices(&self) -> Vec<usize> {
        (0..self.parameters.len()).filter(|&i| self.parameters[i].is_statistical()).collect()
    }

    pub fn nominal_point(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.nominal).collect()
    }

    /// A copy with one parameter replaced (matched by name).
    pub fn with_parameter(&self, param: StatisticalParameter) -> Result<Self> {
        let idx = self.parameter_index(&param.name).ok_or_else(|| Error::UnknownParameter(param.name.clone()))?;
        let mut out = self.clone();
        out.parameters[idx] = param;
        Ok(out)
    }

    /// A copy with a different specification list.
    pub fn with_specs(&self, specs: Vec<Specification>) -> Result<Self> {
        Self::new(self.device.clone(), self.parameters.clone(), self.bindings.clone(), self.metrics.clone(), specs)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.parameters.len() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, problem has {} parameters",
                x.len(),
                self.parameters.len()
            )));
        }
        Ok(())
    }

    /// Device field values at parameter point `x` (one entry per parameter).
    pub fn field_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self
            .sources
            .iter()
            .map(|s| match *s {
                FieldSource::Param(i) => x[i],
                FieldSource::Value(v) => v,
            })
            .collect())
    }

    pub fn model_at(&self, x: &[f64]) -> Result<DeviceModel> {
        self.device.build(&self.field_values(x)?)
    }

    pub fn evaluate(&self, x: &[f64], metric: Metric) -> Result<f64> {
        self.model_at(x)?.evaluate(metric)
    }

    /// All declared metrics at `x`.
    pub fn evaluate_metrics(&self, x: &[f64]) -> Result<MetricSet> {
        self.model_at(x)?.evaluate_all(&self.metrics)
    }

    /// Analytical `∂metric/∂x_i` for every parameter (zero for parameters
    /// that no field is bound to).
    pub fn gradient(&self, x: &[f64], metric: Metric) -> Result<Vec<f64>> {
        let field_grad = self.model_at(x)?.gradient(metric)?;
        let mut grad = vec![0.0; self.parameters.len()];
        for (src, g) in self.sources.iter().zip(field_grad) {
            if let FieldSource::Param(i) = *src {
                grad[i] += g;
            }
        }
        Ok(grad)
    }

    /// Whether every specification holds at `x`.
    pub fn passes(&self, x: &[f64]) -> Result<bool> {
        let model = self.model_at(x)?;
        for spec in &self.specs {
            if !spec.holds(model.evaluate(spec.metric)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
