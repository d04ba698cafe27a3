//! Closed-form lumped device models.
//!
//! Two physical models are provided, a cantilever beam and a capacitive
//! pressure sensor membrane, plus an affine model used for synthetic
//! problems whose metric is exactly linear in the parameters. Every model
//! exposes analytical partial derivatives with respect to its fields.
//!
//! All quantities are SI.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Young's modulus of single-crystal silicon, the default material.
pub const SILICON_YOUNGS_MODULUS: f64 = 169e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    SpringConstant,
    ResonantFrequency,
    TouchdownForce,
    /// Output of the affine model.
    Response,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::SpringConstant,
        Metric::ResonantFrequency,
        Metric::TouchdownForce,
        Metric::Response,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SpringConstant => "spring_constant",
            Metric::ResonantFrequency => "resonant_frequency",
            Metric::TouchdownForce => "touchdown_force",
            Metric::Response => "response",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Metric values in request order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSet(Vec<(Metric, f64)>);

impl MetricSet {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.0.iter().find(|(m, _)| *m == metric).map(|&(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for MetricSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (m, v) in &self.0 {
            map.serialize_entry(m.name(), v)?;
        }
        map.end()
    }
}

fn positive(what: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain { what, value: v })
    }
}

/// Beam spring constant `K = E·t·w³ / l³`.
pub fn spring_constant(youngs_modulus: f64, thickness: f64, width: f64, length: f64) -> Result<f64> {
    let e = positive("Young's modulus", youngs_modulus)?;
    let t = positive("thickness", thickness)?;
    let w = positive("width", width)?;
    let l = positive("length", length)?;
    Ok(e * t * w.powi(3) / l.powi(3))
}

/// Mass added at the free end of a beam of stiffness `k` whose resonance
/// moved from `f0` to `f1`: `Δm = k/(4π²)·(1/f1² − 1/f0²)`.
///
/// Positive when the frequency dropped.
pub fn mass_change(k: f64, f0: f64, f1: f64) -> Result<f64> {
    let k = positive("spring constant", k)?;
    let f0 = positive("initial frequency", f0)?;
    let f1 = positive("final frequency", f1)?;
    Ok(k / (4.0 * PI * PI) * (1.0 / (f1 * f1) - 1.0 / (f0 * f0)))
}

/// Constant `c_f` such that `c_f·√(w0³/l0³) = f_target`.
pub fn calibrate_frequency_constant(w0: f64, l0: f64, f_target: f64) -> Result<f64> {
    let w0 = positive("calibration width", w0)?;
    let l0 = positive("calibration length", l0)?;
    let f = positive("target frequency", f_target)?;
    Ok(f / (w0.powi(3) / l0.powi(3)).sqrt())
}

/// Cantilever beam. Stiffness follows the simple beam spring formula; the
/// resonant frequency scales as `√(w³/l³)` with an absolute level fixed by
/// the calibration constant `freq_constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CantileverModel {
    pub youngs_modulus: f64,
    pub thickness: f64,
    pub width: f64,
    pub length: f64,
    /// `c_f` in `f_r = c_f·√(w³/l³)`; zero means uncalibrated.
    pub freq_constant: f64,
}

impl CantileverModel {
    pub const FIELDS: [&'static str; 4] = ["E", "t", "w", "l"];

    pub fn new(youngs_modulus: f64, thickness: f64, width: f64, length: f64, freq_constant: f64) -> Result<Self> {
        positive("Young's modulus", youngs_modulus)?;
        positive("thickness", thickness)?;
        positive("width", width)?;
        positive("length", length)?;
        if !(freq_constant.is_finite() && freq_constant >= 0.0) {
            return Err(Error::Domain { what: "frequency constant", value: freq_constant });
        }
        Ok(Self { youngs_modulus, thickness, width, length, freq_constant })
    }

    pub fn spring_constant(&self) -> f64 {
        self.youngs_modulus * self.thickness * self.width.powi(3) / self.length.powi(3)
    }

    /// Partials of `K` in [`Self::FIELDS`] order.
    pub fn spring_constant_gradient(&self) -> [f64; 4] {
        let k = self.spring_constant();
        [
            k / self.youngs_modulus,
            k / self.thickness,
            3.0 * k / self.width,
            -3.0 * k / self.length,
        ]
    }

    pub fn resonant_frequency(&self) -> Result<f64> {
        if self.freq_constant == 0.0 {
            return Err(Error::Uncalibrated);
        }
        Ok(self.freq_constant * (self.width.powi(3) / self.length.powi(3)).sqrt())
    }

    pub fn resonant_frequency_gradient(&self) -> Result<[f64; 4]> {
        let f = self.resonant_frequency()?;
        Ok([0.0, 0.0, 1.5 * f / self.width, -1.5 * f / self.length])
    }
}

/// Capacitive pressure sensor: a membrane strip of width `w`, length `l`
/// and thickness `t` over a chamber of depth `g0`.
///
/// The touchdown force is the centre point load that closes the gap on a
/// clamped-clamped Euler-Bernoulli strip, `F = (192·E·I/l³)·g0` with
/// `I = w·t³/12`, i.e. `F = 16·E·w·t³·g0 / l³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureSensorModel {
    pub youngs_modulus: f64,
    pub thickness: f64,
    pub width: f64,
    pub length: f64,
    pub gap: f64,
}

impl PressureSensorModel {
    pub const FIELDS: [&'static str; 5] = ["E", "t", "w", "l", "g0"];

    pub fn new(youngs_modulus: f64, thickness: f64, width: f64, length: f64, gap: f64) -> Result<Self> {
        positive("Young's modulus", youngs_modulus)?;
        positive("thickness", thickness)?;
        positive("width", width)?;
        positive("length", length)?;
        positive("gap", gap)?;
        Ok(Self { youngs_modulus, thickness, width, length, gap })
    }

    pub fn touchdown_force(&self) -> f64 {
        16.0 * self.youngs_modulus * self.width * self.thickness.powi(3) * self.gap / self.length.powi(3)
    }

    /// Partials of the touchdown force in [`Self::FIELDS`] order.
    pub fn touchdown_force_gradient(&self) -> [f64; 5] {
        let f = self.touchdown_force();
        [
            f / self.youngs_modulus,
            3.0 * f / self.thickness,
            f / self.width,
            -3.0 * f / self.length,
            f / self.gap,
        ]
    }
}

/// `response = offset + Σ coeffs[i]·x[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineModel {
    pub offset: f64,
    pub coeffs: Vec<f64>,
    pub values: Vec<f64>,
}

impl AffineModel {
    pub fn response(&self) -> f64 {
        self.offset + self.coeffs.iter().zip(&self.values).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// A device family plus the settings that are not per-instance fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceKind {
    Cantilever { freq_constant: f64 },
    PressureSensor,
    /// Fields are `x1..xN`, one per coefficient.
    Affine { offset: f64, coeffs: Vec<f64> },
}

impl DeviceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeviceKind::Cantilever { .. } => "cantilever",
            DeviceKind::PressureSensor => "pressure_sensor",
            DeviceKind::Affine { .. } => "linear",
        }
    }

    pub fn field_names(&self) -> Vec<String> {
        match self {
            DeviceKind::Cantilever { .. } => CantileverModel::FIELDS.iter().map(|s| s.to_string()).collect(),
            DeviceKind::PressureSensor => PressureSensorModel::FIELDS.iter().map(|s| s.to_string()).collect(),
            DeviceKind::Affine { coeffs, .. } => (1..=coeffs.len()).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn field_index(&self, field: &str) -> Option<usize> {
        self.field_names().iter().position(|f| f == field)
    }

    /// Value used for a field the design does not bind.
    pub fn default_field_values(&self) -> Vec<f64> {
        match self {
            DeviceKind::Cantilever { .. } => vec![SILICON_YOUNGS_MODULUS, 2e-6, 2e-6, 100e-6],
            DeviceKind::PressureSensor => vec![SILICON_YOUNGS_MODULUS, 1e-6, 100e-6, 300e-6, 2e-6],
            DeviceKind::Affine { coeffs, .. } => vec![0.0; coeffs.len()],
        }
    }

    pub fn supports(&self, metric: Metric) -> bool {
        matches!(
            (self, metric),
            (DeviceKind::Cantilever { .. }, Metric::SpringConstant | Metric::ResonantFrequency)
                | (DeviceKind::PressureSensor, Metric::TouchdownForce)
                | (DeviceKind::Affine { .. }, Metric::Response)
        )
    }

    /// Instantiates the model from field values in [`Self::field_names`] order.
    pub fn build(&self, fields: &[f64]) -> Result<DeviceModel> {
        let n = self.field_names().len();
        if fields.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} expects {n} field values, got {}",
                self.name(),
                fields.len()
            )));
        }
        Ok(match self {
            DeviceKind::Cantilever { freq_constant } => DeviceModel::Cantilever(CantileverModel::new(
                fields[0],
                fields[1],
                fields[2],
                fields[3],
                *freq_constant,
            )?),
            DeviceKind::PressureSensor => DeviceModel::PressureSensor(PressureSensorModel::new(
                fields[0], fields[1], fields[2], fields[3], fields[4],
            )?),
            DeviceKind::Affine { offset, coeffs } => {
                if let Some(&bad) = fields.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Domain { what: "linear model input", value: bad });
                }
                DeviceModel::Affine(AffineModel { offset: *offset, coeffs: coeffs.clone(), values: fields.to_vec() })
            }
        })
    }
}

/// An instantiated device.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceModel {
    Cantilever(CantileverModel),
    PressureSensor(PressureSensorModel),
    Affine(AffineModel),
}

impl DeviceModel {
    fn device_name(&self) -> &'static str {
        match self {
            DeviceModel::Cantilever(_) => "cantilever",
            DeviceModel::PressureSensor(_) => "pressure_sensor",
            DeviceModel::Affine(_) => "linear",
        }
    }

    fn unsupported(&self, metric: Metric) -> Error {
        Error::UnsupportedMetric { metric: metric.name().to_string(), device: self.device_name() }
    }

    pub fn evaluate(&self, metric: Metric) -> Result<f64> {
        match (self, metric) {
            (DeviceModel::Cantilever(m), Metric::SpringConstant) => Ok(m.spring_constant()),
            (DeviceModel::Cantilever(m), Metric::ResonantFrequency) => m.resonant_frequency(),
            (DeviceModel::PressureSensor(m), Metric::TouchdownForce) => Ok(m.touchdown_force()),
            (DeviceModel::Affine(m), Metric::Response) => Ok(m.response()),
            _ => Err(self.unsupported(metric)),
        }
    }

    pub fn evaluate_all(&self, metrics: &[Metric]) -> Result<MetricSet> {
        metrics
            .iter()
            .map(|&m| self.evaluate(m).map(|v| (m, v)))
            .collect::<Result<Vec<_>>>()
            .map(MetricSet)
    }

    /// Analytical partials of `metric` with respect to each device field.
    pub fn gradient(&self, metric: Metric) -> Result<Vec<f64>> {
        match (self, metric) {
            (DeviceModel::Cantilever(m), Metric::SpringConstant) => Ok(m.spring_constant_gradient().to_vec()),
            (DeviceModel::Cantilever(m), Metric::ResonantFrequency) => Ok(m.resonant_frequency_gradient()?.to_vec()),
            (DeviceModel::PressureSensor(m), Metric::TouchdownForce) => Ok(m.touchdown_force_gradient().to_vec()),
            (DeviceModel::Affine(m), Metric::Response) => Ok(m.coeffs.clone()),
            _ => Err(self.unsupported(metric)),
        }
    }
}
