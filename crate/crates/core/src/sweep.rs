//! Two-dimensional design-space sweeps.
//!
//! Two parameters are stepped over an inclusive, evenly spaced grid while
//! every other parameter stays at its nominal value. Each grid point is
//! classified against all specifications. The reported yield is the
//! fraction of passing grid points, i.e. yield under a uniform weighting of
//! the swept rectangle; it is not the distribution-weighted yield that
//! Monte Carlo estimates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::DesignProblem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(param: impl Into<String>, min: f64, max: f64, n: usize) -> Result<Self> {
        let param = param.into();
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidArgument(format!("axis `{param}` needs finite min < max, got {min}..{max}")));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("axis `{param}` needs at least 2 points, got {n}")));
        }
        Ok(Self { param, min, max, n })
    }

    /// Grid coordinates, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n)
            .map(|k| if k + 1 == self.n { self.max } else { self.min + step * k as f64 })
            .collect()
    }

    fn nearest(&self, v: f64) -> Option<usize> {
        if !(self.min..=self.max).contains(&v) {
            return None;
        }
        let t = (v - self.min) / (self.max - self.min) * (self.n - 1) as f64;
        Some(t.round() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldMap {
    pub axis_x: Axis,
    pub axis_y: Axis,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// `classification[i][j]` is the point `(x_values[i], y_values[j])`.
    pub classification: Vec<Vec<Cell>>,
    pub yield_fraction: f64,
    /// Grid point nearest the nominal design, when it lies inside the grid.
    pub nominal_index: Option<(usize, usize)>,
    /// Cells `(i, j)` spanning points `i..=i+1`, `j..=j+1` whose corners
    /// are not all classified alike.
    pub boundary_cells: Vec<(usize, usize)>,
    /// Grid points where the device could not be evaluated (classified Fail).
    pub invalid_points: usize,
}

impl YieldMap {
    pub fn pass_count(&self) -> usize {
        self.classification.iter().flatten().filter(|c| **c == Cell::Pass).count()
    }

    /// `x,y,pass` rows, y-major then x.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,pass\n");
        for (j, y) in self.y_values.iter().enumerate() {
            for (i, x) in self.x_values.iter().enumerate() {
                let pass = u8::from(self.classification[i][j] == Cell::Pass);
                let _ = writeln!(out, "{x:e},{y:e},{pass}");
            }
        }
        out
    }
}

/// Sweeps `axis_x` × `axis_y`, holding the remaining parameters at nominal.
pub fn run_sweep(problem: &DesignProblem, axis_x: Axis, axis_y: Axis) -> Result<YieldMap> {
    let ix = problem.parameter_index(&axis_x.param).ok_or_else(|| Error::UnknownParameter(axis_x.param.clone()))?;
    let iy = problem.parameter_index(&axis_y.param).ok_or_else(|| Error::UnknownParameter(axis_y.param.clone()))?;
    if ix == iy {
        return Err(Error::InvalidArgument("sweep axes must name distinct parameters".into()));
    }
    if problem.specs().is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one specification".into()));
    }
    let xs = axis_x.values();
    let ys = axis_y.values();
    let nominal = problem.nominal_point();

    let columns: Vec<(Vec<Cell>, usize)> = xs
        .par_iter()
        .map(|&xv| {
            let mut point = nominal.clone();
            point[ix] = xv;
            let mut invalid = 0;
            let col = ys
                .iter()
                .map(|&yv| {
                    point[iy] = yv;
                    match problem.passes(&point) {
                        Ok(true) => Cell::Pass,
                        Ok(false) => Cell::Fail,
                        Err(_) => {
                            invalid += 1;
                            Cell::Fail
                        }
                    }
                })
                .collect();
            (col, invalid)
        })
        .collect();
    let invalid_points = columns.iter().map(|(_, k)| k).sum();
    let classification: Vec<Vec<Cell>> = columns.into_iter().map(|(c, _)| c).collect();

    let mut boundary_cells = Vec::new();
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let c = classification[i][j];
            if classification[i + 1][j] != c || classification[i][j + 1] != c || classification[i + 1][j + 1] != c {
                boundary_cells.push((i, j));
            }
        }
    }
    let passes = classification.iter().flatten().filter(|c| **c == Cell::Pass).count();
    let nominal_index = axis_x.nearest(nominal[ix]).zip(axis_y.nearest(nominal[iy]));

    Ok(YieldMap {
        yield_fraction: passes as f64 / (xs.len() * ys.len()) as f64,
        x_values: xs,
        y_values: ys,
        classification,
        nominal_index,
        boundary_cells,
        invalid_points,
        axis_x,
        axis_y,
    })
}
