//! Zero-mean noise families and reproducible per-cell draws.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::domain::{DemandSnapshot, OdPair, PredictionSnapshot};
use crate::error::{Error, Result};
use crate::quad::integrate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "normal")]
    Gaussian,
    Uniform,
    #[serde(rename = "exp")]
    Exponential,
    #[serde(rename = "neg_exp")]
    NegExponential,
    Weibull,
    NegWeibull,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gaussian,
        Family::Uniform,
        Family::Exponential,
        Family::NegExponential,
        Family::Weibull,
        Family::NegWeibull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "normal",
            Family::Uniform => "uniform",
            Family::Exponential => "exp",
            Family::NegExponential => "neg_exp",
            Family::Weibull => "weibull",
            Family::NegWeibull => "neg_weibull",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Family::Gaussian => 1,
            Family::Uniform => 2,
            Family::Exponential => 3,
            Family::NegExponential => 4,
            Family::Weibull => 5,
            Family::NegWeibull => 6,
        }
    }

    pub fn is_negated(self) -> bool {
        matches!(self, Family::NegExponential | Family::NegWeibull)
    }

    fn base(self) -> Family {
        match self {
            Family::NegExponential => Family::Exponential,
            Family::NegWeibull => Family::Weibull,
            f => f,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown noise family {s:?}")))
    }
}

/// A noise family at a given SD, with the mean that gets subtracted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: Family,
    pub sigma: f64,
    /// Mean of the un-shifted variable (negated for the negated families).
    pub shift: f64,
    pub weibull_shape: Option<f64>,
}

pub fn make_noise_spec(family: Family, sigma: f64) -> Result<NoiseSpec> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Noise(format!("sigma must be positive, got {sigma}")));
    }
    let mut weibull_shape = None;
    let base_mean = match family.base() {
        Family::Gaussian => 0.0,
        Family::Uniform => 3f64.sqrt() * sigma,
        Family::Exponential => sigma,
        Family::Weibull => {
            let k = weibull_shape_for_sd(sigma)?;
            weibull_shape = Some(k);
            gamma_exact(1.0 + 1.0 / k)
        }
        _ => unreachable!(),
    };
    let shift = if family.is_negated() { -base_mean } else { base_mean };
    Ok(NoiseSpec { family, sigma, shift, weibull_shape })
}

/// Variance of a unit-scale Weibull with shape `1/h`, stable for small `h`.
fn weibull_variance(h: f64) -> f64 {
    if h < 1e-3 {
        // ln G(1+2h) - 2 ln G(1+h) as a series in h.
        const Z2: f64 = 1.644_934_066_848_226_4;
        const Z3: f64 = 1.202_056_903_159_594_3;
        const Z4: f64 = 1.082_323_233_711_138_2;
        let d = Z2 * h * h - 2.0 * Z3 * h.powi(3) + 3.5 * Z4 * h.powi(4);
        (2.0 * ln_gamma(1.0 + h)).exp() * d.exp_m1()
    } else {
        gamma(1.0 + 2.0 * h) - gamma(1.0 + h).powi(2)
    }
}

/// Shape `k` of a unit-scale Weibull whose SD is `sigma`, by bisection on `ln k`.
pub fn weibull_shape_for_sd(sigma: f64) -> Result<f64> {
    let target = sigma * sigma;
    let (mut lo, mut hi) = (0.05f64.ln(), 1e15f64.ln());
    let var = |lnk: f64| weibull_variance((-lnk).exp());
    if !(var(lo) >= target && var(hi) <= target) {
        return Err(Error::Noise(format!("cannot bracket a Weibull shape for sigma {sigma}")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if var(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    // Snap the exponential case so it reduces exactly.
    if (k - 1.0).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok(k)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Gamma function, exact at positive integers.
fn gamma_exact(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=170.0).contains(&x) {
        factorial(x as u32 - 1)
    } else {
        gamma(x)
    }
}

/// `E[X^order]` of the un-shifted variable, in closed form.
pub fn raw_moment(spec: &NoiseSpec, order: u32) -> f64 {
    let s = spec.sigma;
    let n = order as i32;
    let base = match spec.family.base() {
        Family::Gaussian => {
            if order % 2 == 1 {
                0.0
            } else {
                // (n-1)!! sigma^n
                let dfact: f64 = (1..order).step_by(2).map(f64::from).product();
                dfact * s.powi(n)
            }
        }
        Family::Uniform => (12f64.sqrt() * s).powi(n) / f64::from(order + 1),
        Family::Exponential => factorial(order) * s.powi(n),
        Family::Weibull => gamma_exact(1.0 + f64::from(order) / spec.weibull_shape.expect("weibull shape")),
        _ => unreachable!(),
    };
    if spec.family.is_negated() && order % 2 == 1 {
        -base
    } else {
        base
    }
}

/// `E[g(X)]` of the un-shifted variable by numerical integration.
pub fn expectation_by_quadrature(spec: &NoiseSpec, g: impl Fn(f64) -> f64) -> f64 {
    let s = spec.sigma;
    let sign = if spec.family.is_negated() { -1.0 } else { 1.0 };
    let tol = 1e-14;
    match spec.family.base() {
        Family::Gaussian => {
            let pdf = |x: f64| (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            integrate(|x| g(x) * pdf(x), -14.0 * s, 14.0 * s, tol, tol)
        }
        Family::Uniform => {
            let c = 12f64.sqrt() * s;
            integrate(|x| g(sign * x) / c, 0.0, c, tol, tol)
        }
        // Substitute x = scale * t^(1/k) so the weight becomes e^-t.
        Family::Exponential => integrate(|t| g(sign * s * t) * (-t).exp(), 0.0, 250.0, tol, tol),
        Family::Weibull => {
            let k = spec.weibull_shape.expect("weibull shape");
            integrate(|t| g(sign * t.powf(1.0 / k)) * (-t).exp(), 0.0, 250.0, tol, tol)
        }
        _ => unreachable!(),
    }
}

pub fn raw_moment_by_quadrature(spec: &NoiseSpec, order: u32) -> f64 {
    expectation_by_quadrature(spec, |x| x.powi(order as i32))
}

/// Standardized skewness and (non-excess) kurtosis of the family.
pub fn standardized_moments(spec: &NoiseSpec) -> (f64, f64) {
    let m1 = raw_moment(spec, 1);
    let m2 = raw_moment(spec, 2);
    let m3 = raw_moment(spec, 3);
    let m4 = raw_moment(spec, 4);
    let var = m2 - m1 * m1;
    let c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
    let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    (c3 / var.powf(1.5), c4 / (var * var))
}

impl NoiseSpec {
    /// Quantile of the zero-mean (shifted) noise.
    pub fn quantile(&self, u: f64) -> f64 {
        let s = self.sigma;
        let x = match self.family.base() {
            Family::Gaussian => s * Normal::standard().inverse_cdf(u),
            Family::Uniform => 12f64.sqrt() * s * u,
            Family::Exponential => -s * (-u).ln_1p(),
            Family::Weibull => (-(-u).ln_1p()).powf(1.0 / self.weibull_shape.expect("weibull shape")),
            _ => unreachable!(),
        };
        if self.family.is_negated() {
            -x - self.shift
        } else {
            x - self.shift
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSample {
    pub hour_index: usize,
    pub od: OdPair,
    pub epsilon: f64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in (0, 1) keyed on the cell; independent of evaluation order.
pub fn cell_uniform(seed: u64, family: Family, sigma: f64, hour_index: usize, od: OdPair) -> f64 {
    let mut h = splitmix(seed);
    for part in [family.tag(), sigma.to_bits(), hour_index as u64, od.origin as u64, od.destination as u64] {
        h = splitmix(h ^ part);
    }
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn draw_noise(spec: &NoiseSpec, hour_index: usize, od: OdPair, seed: u64) -> NoiseSample {
    let u = cell_uniform(seed, spec.family, spec.sigma, hour_index, od);
    NoiseSample { hour_index, od, epsilon: spec.quantile(u) }
}

/// `g + sigma_g * eps` per cell. `None` means no noise: predictions equal the truth.
/// Negative predictions are kept.
pub fn perturb(truth: &DemandSnapshot, spec: Option<&NoiseSpec>, sigma_g: f64, seed: u64) -> PredictionSnapshot {
    let values: BTreeMap<OdPair, f64> = match spec {
        Some(spec) if sigma_g != 0.0 => truth
            .counts
            .iter()
            .map(|(&od, &g)| (od, g + sigma_g * draw_noise(spec, truth.hour_index, od, seed).epsilon))
            .collect(),
        _ => truth.counts.clone(),
    };
    PredictionSnapshot { hour_index: truth.hour_index, values, spec: spec.copied(), seed }
}
