//! Process-variation models and the standard-normal "u-space" they share.
//!
//! Every non-degenerate [`Distribution`] has a monotone bijection onto a
//! standard normal variate, `u = Φ⁻¹(F(x))`. For a Gaussian this is the
//! familiar `(x − μ)/σ`; for the uniform and exponential models it is the
//! CDF-matching map. Monte Carlo sampling works in parameter space, while
//! worst-case analysis works in u-space, where the yield of a linear
//! specification is `Φ(β)`.
//!
//! Parameters are treated as statistically independent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A process model for one statistical parameter, in the SI units of that
/// parameter.
///
/// Construct through [`Distribution::gaussian`], [`Distribution::uniform`],
/// [`Distribution::exponential`] or [`Distribution::fixed`]; the constructors
/// enforce `sigma > 0`, `lo < hi` and `rate > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution {
    kind: DistKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistKind {
    Gaussian { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `offset + Exp(rate)`: a quantity with a hard minimum at `offset`.
    Exponential { offset: f64, rate: f64 },
    Fixed { value: f64 },
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("{what} must be finite, got {v}")))
    }
}

impl Distribution {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        finite("sigma", sigma)?;
        if sigma <= 0.0 {
            return Err(Error::InvalidDistribution(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { kind: DistKind::Gaussian { mu, sigma } })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        finite("lo", lo)?;
        finite("hi", hi)?;
        if lo >= hi {
            return Err(Error::InvalidDistribution(format!("need lo < hi, got lo={lo} hi={hi}")));
        }
        Ok(Self { kind: DistKind::Uniform { lo, hi } })
    }

    pub fn exponential(offset: f64, rate: f64) -> Result<Self> {
        finite("offset", offset)?;
        finite("rate", rate)?;
        if rate <= 0.0 {
            return Err(Error::InvalidDistribution(format!("rate must be > 0, got {rate}")));
        }
        Ok(Self { kind: DistKind::Exponential { offset, rate } })
    }

    pub fn fixed(value: f64) -> Result<Self> {
        finite("value", value)?;
        Ok(Self { kind: DistKind::Fixed { value } })
    }

    pub fn kind(&self) -> &DistKind {
        &self.kind
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.kind, DistKind::Fixed { .. })
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            DistKind::Gaussian { mu, .. } => mu,
            DistKind::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistKind::Exponential { offset, rate } => offset + 1.0 / rate,
            DistKind::Fixed { value } => value,
        }
    }

    /// Standard deviation; the dispersion scale used to rank sensitivities.
    pub fn std_dev(&self) -> f64 {
        match self.kind {
            DistKind::Gaussian { sigma, .. } => sigma,
            DistKind::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            DistKind::Exponential { rate, .. } => 1.0 / rate,
            DistKind::Fixed { .. } => 0.0,
        }
    }

    /// Closed support `[lo, hi]` (infinite ends where unbounded).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            DistKind::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DistKind::Uniform { lo, hi } => (lo, hi),
            DistKind::Exponential { offset, .. } => (offset, f64::INFINITY),
            DistKind::Fixed { value } => (value, value),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x.is_finite() && lo <= x && x <= hi
    }

    /// Draws one variate. A `Fixed` distribution always returns its value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            DistKind::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            DistKind::Exponential { offset, rate } => {
                let e: f64 = rng.sample(Exp1);
                offset + e / rate
            }
            DistKind::Fixed { value } => value,
        }
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain { what: "cdf", value: x });
        }
        Ok(match self.kind {
            DistKind::Gaussian { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            DistKind::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            DistKind::Exponential { offset, rate } => {
                if x <= offset {
                    0.0
                } else {
                    -(-rate * (x - offset)).exp_m1()
                }
            }
            DistKind::Fixed { .. } => return Err(Error::UnsupportedForFixed { op: "cdf" }),
        })
    }

    /// Inverse CDF for `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain { what: "quantile probability", value: p });
        }
        Ok(match self.kind {
            DistKind::Gaussian { mu, sigma } => mu + sigma * std_normal_quantile(p),
            DistKind::Uniform { lo, hi } => lo + (hi - lo) * p,
            DistKind::Exponential { offset, rate } => offset - (-p).ln_1p() / rate,
            DistKind::Fixed { .. } => return Err(Error::UnsupportedForFixed { op: "quantile" }),
        })
    }

    /// Maps a parameter value to u-space. The value must lie strictly inside
    /// the support, since the support's finite ends map to `±∞`.
    pub fn to_u(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        match self.kind {
            DistKind::Fixed { .. } => return Err(Error::UnsupportedForFixed { op: "to_u" }),
            _ if !(x.is_finite() && x > lo && x < hi) => {
                return Err(Error::Domain { what: "u-space transform", value: x })
            }
            _ => {}
        }
        Ok(match self.kind {
            DistKind::Gaussian { mu, sigma } => (x - mu) / sigma,
            DistKind::Uniform { lo, hi } => {
                let below = (x - lo) / (hi - lo);
                let above = (hi - x) / (hi - lo);
                if below <= above {
                    std_normal_quantile(below)
                } else {
                    -std_normal_quantile(above)
                }
            }
            DistKind::Exponential { offset, rate } => {
                let z = rate * (x - offset);
                let below = -(-z).exp_m1();
                if below <= 0.5 {
                    std_normal_quantile(below)
                } else {
                    -std_normal_quantile((-z).exp())
                }
            }
            DistKind::Fixed { .. } => unreachable!(),
        })
    }

    /// Inverse of [`Distribution::to_u`].
    pub fn from_u(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::Domain { what: "u-space coordinate", value: u });
        }
        Ok(match self.kind {
            DistKind::Gaussian { mu, sigma } => mu + sigma * u,
            DistKind::Uniform { lo, hi } => {
                if u <= 0.0 {
                    lo + (hi - lo) * std_normal_cdf(u)
                } else {
                    hi - (hi - lo) * std_normal_cdf(-u)
                }
            }
            DistKind::Exponential { offset, rate } => {
                let z = if u <= 0.0 {
                    -(-std_normal_cdf(u)).ln_1p()
                } else {
                    -std_normal_cdf(-u).ln()
                };
                offset + z / rate
            }
            DistKind::Fixed { .. } => return Err(Error::UnsupportedForFixed { op: "from_u" }),
        })
    }

    /// Derivative `dx/du` of [`Distribution::from_u`], used to carry
    /// parameter-space gradients into u-space.
    pub fn dx_du(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::Domain { what: "u-space coordinate", value: u });
        }
        Ok(match self.kind {
            DistKind::Gaussian { sigma, .. } => sigma,
            DistKind::Uniform { lo, hi } => (hi - lo) * std_normal_pdf(u),
            DistKind::Exponential { rate, .. } => {
                // f(x) = rate * S(x) with S the survival function; S = Φ(−u).
                std_normal_pdf(u) / (rate * std_normal_cdf(-u))
            }
            DistKind::Fixed { .. } => return Err(Error::UnsupportedForFixed { op: "dx_du" }),
        })
    }
}

/// The standard normal CDF `Φ(u) = ½·erfc(−u/√2)`.
pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

/// `Φ⁻¹(p)` by Wichura's AS 241 (PPND16), good to about 1e-16 relative.
///
/// Returns `±∞` at `p = 1` / `p = 0` and NaN outside `[0, 1]`.
// Coefficients are copied digit for digit from the published algorithm.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
pub fn std_normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5226.495_278_852_546 * r + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_888)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Generator for Monte Carlo sample `index` of a run seeded with `seed`.
///
/// Each sample reads its own ChaCha stream, so a sample's variates depend
/// only on `(seed, index)` and never on how samples are split across threads.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
