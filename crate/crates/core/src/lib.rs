//! Parametric yield analysis for devices described by closed-form lumped
//! models.
//!
//! A design is described in the line-oriented `.sam` format ([`netlist`]):
//! a device, the statistical parameters feeding its fields, the metrics
//! to evaluate and the specifications they must meet. From a
//! [`DesignProblem`] the crate computes
//!
//! - sensitivities and linearizations at the nominal point ([`sensitivity`]),
//! - Monte Carlo yield with Wilson confidence intervals ([`montecarlo`]),
//! - worst-case distances and the yield they imply ([`worstcase`]),
//! - two-parameter design-space yield maps ([`sweep`]).
//!
//! ```
//! use memsyield::{montecarlo, netlist, worstcase};
//!
//! let problem = netlist::parse(
//!     "device cantilever calib_f=1.7678e7
//!      param w nominal=2e-6 dist=gaussian sigma=0.01e-6
//!      param l nominal=100e-6 dist=none
//!      bind w = w
//!      bind l = l
//!      metric resonant_frequency
//!      spec resonant_frequency ge 49e3",
//! )?;
//! let mc = montecarlo::run_monte_carlo(&problem, 20_000, 1)?;
//! let wcd = worstcase::wcd_linear_for(&problem, &problem.specs()[0])?;
//! assert!((mc.yield_estimate - wcd.linear_yield).abs() < 0.02);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod devices;
pub mod distributions;
mod error;
pub mod montecarlo;
pub mod netlist;
pub mod problem;
pub mod sensitivity;
pub mod sweep;
pub mod worstcase;

pub use devices::{DeviceKind, Metric, MetricSet};
pub use distributions::Distribution;
pub use error::{Error, Result};
pub use netlist::{parse, serialize, ParseError};
pub use problem::{Binding, DesignProblem, Relation, Specification, StatisticalParameter};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/devices.md")]
    mod devices {}
    #[doc = include_str!("../../../book/src/sam-format.md")]
    mod sam_format {}
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    mod sensitivity {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/worst-case.md")]
    mod worst_case {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
