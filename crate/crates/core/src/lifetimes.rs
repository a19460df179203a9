//! Service-time distributions: survival evaluation, sampling and truncated
//! means.
//!
//! The same type serves both fresh-arrival service times and the remaining
//! work of jobs already in the system at time zero. Every variant has a
//! finite mean, and survival is evaluated in closed form (via the normal CDF
//! or the incomplete gamma function where needed) rather than by smoothing.

use std::path::Path;

use rand::Rng;
use rand_distr::Distribution as _;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, gamma_li};

use crate::error::{Error, Result};

/// A nonnegative service-time law with finite mean.
#[derive(Debug, Clone, PartialEq)]
pub enum LifetimeDist {
    /// Rate `mu`; survival `exp(-mu t)`.
    Exponential { rate: f64 },
    /// Unit mass at `value`.
    Deterministic { value: f64 },
    /// `ln S ~ Normal(location, scale^2)`.
    LogNormal { location: f64, scale: f64 },
    /// Survival `exp(-(t/scale)^shape)`.
    Weibull { shape: f64, scale: f64 },
    /// Uniform draw from a fixed sample; survival is the right-continuous
    /// step function of the sorted sample.
    Empirical { samples: Vec<f64>, prefix_sums: Vec<f64> },
}

impl LifetimeDist {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "deterministic service time must be >= 0, got {value}"
            )));
        }
        Ok(Self::Deterministic { value })
    }

    pub fn lognormal(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() || !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lognormal needs finite location and positive scale, got ({location}, {scale})"
            )));
        }
        Ok(Self::LogNormal { location, scale })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weibull needs positive shape and scale, got ({shape}, {scale})"
            )));
        }
        Ok(Self::Weibull { shape, scale })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("empirical sample is empty".into()));
        }
        if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidParameter(
                "empirical samples must be finite and >= 0".into(),
            ));
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        let mut prefix_sums = Vec::with_capacity(samples.len() + 1);
        let mut acc = 0.0;
        prefix_sums.push(0.0);
        for s in &samples {
            acc += s;
            prefix_sums.push(acc);
        }
        Ok(Self::Empirical { samples, prefix_sums })
    }

    /// Loads an empirical sample from a one-column text file of nonnegative
    /// durations (blank lines and `#` comments ignored).
    pub fn empirical_from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read sample file {}: {e}", path.display()))
        })?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "{}:{}: not a number: {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            samples.push(v);
        }
        Self::empirical(samples)
    }

    /// Survival `P(S > t)`, right-continuous and nonincreasing.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::OutOfDomain { t, end: f64::INFINITY });
        }
        Ok(match self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Deterministic { value } => {
                if t < *value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LogNormal { location, scale } => {
                if t == 0.0 {
                    1.0
                } else {
                    normal_survival((t.ln() - location) / scale)
                }
            }
            Self::Weibull { shape, scale } => (-(t / scale).powf(*shape)).exp(),
            Self::Empirical { samples, .. } => {
                let below = samples.partition_point(|s| *s <= t);
                (samples.len() - below) as f64 / samples.len() as f64
            }
        })
    }

    /// One draw with this law; the caller owns the stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => rand_distr::Exp::new(*rate).unwrap().sample(rng),
            Self::Deterministic { value } => *value,
            Self::LogNormal { location, scale } => {
                rand_distr::LogNormal::new(*location, *scale).unwrap().sample(rng)
            }
            Self::Weibull { shape, scale } => {
                rand_distr::Weibull::new(*scale, *shape).unwrap().sample(rng)
            }
            Self::Empirical { samples, .. } => samples[rng.random_range(0..samples.len())],
        }
    }

    /// `E[S ∧ t] = ∫_0^t P(S > s) ds`, in closed form for every variant.
    pub fn truncated_mean(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::OutOfDomain { t, end: f64::INFINITY });
        }
        Ok(match self {
            Self::Exponential { rate } => (1.0 - (-rate * t).exp()) / rate,
            Self::Deterministic { value } => t.min(*value),
            Self::LogNormal { location, scale } => {
                if t == 0.0 {
                    0.0
                } else {
                    // E[S 1{S<=t}] + t P(S>t) with both pieces via the normal CDF.
                    let z = (t.ln() - location) / scale;
                    let mean = (location + 0.5 * scale * scale).exp();
                    mean * normal_cdf(z - scale) + t * normal_survival(z)
                }
            }
            Self::Weibull { shape, scale } => {
                // Substituting x = (s/scale)^shape turns the survival integral
                // into a lower incomplete gamma.
                let x = (t / scale).powf(*shape);
                if x == 0.0 {
                    0.0
                } else {
                    scale / shape * gamma_li(1.0 / shape, x)
                }
            }
            Self::Empirical { samples, prefix_sums } => {
                let below = samples.partition_point(|s| *s <= t);
                let n = samples.len() as f64;
                (prefix_sums[below] + t * (samples.len() - below) as f64) / n
            }
        })
    }

    /// Finite first moment `E[S]`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { value } => *value,
            Self::LogNormal { location, scale } => (location + 0.5 * scale * scale).exp(),
            Self::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
            Self::Empirical { samples, prefix_sums } => {
                prefix_sums[samples.len()] / samples.len() as f64
            }
        }
    }

    /// Times where the survival function jumps; empty for the continuous
    /// variants. Quadrature intervals are split at these points.
    pub fn survival_discontinuities(&self) -> Vec<f64> {
        match self {
            Self::Deterministic { value } => vec![*value],
            Self::Empirical { samples, .. } => {
                let mut out: Vec<f64> = samples.clone();
                out.dedup();
                out
            }
            _ => Vec::new(),
        }
    }
}

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival `1 - Phi(z)` without cancellation.
fn normal_survival(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}
