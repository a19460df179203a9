//! Deterministic arrival-intensity functions and their cumulative integrals.
//!
//! An [`IntensitySpec`] is the per-server arrival rate `lambda(u)`; the
//! simulator scales it by the server count. All variants are nonnegative and
//! locally integrable, so the cumulative mass `Lambda(t)` is finite and
//! nondecreasing on any finite horizon.

use crate::error::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

/// A deterministic, nonnegative arrival-rate function on `[0, T]`.
///
/// Constant and sinusoidal variants are defined for every `t >= 0`;
/// piecewise-constant and table variants are defined up to their last
/// breakpoint and evaluating past it is a domain error.
#[derive(Debug, Clone, PartialEq)]
pub enum IntensitySpec {
    /// `rate(u) = c`.
    Constant { rate: f64 },
    /// `rate(u) = base * (1 + amplitude * sin(2 pi u / period))`.
    Sinusoidal { base: f64, amplitude: f64, period: f64 },
    /// Right-open steps: `rate(u) = rates[i]` on `[breaks[i], breaks[i+1])`.
    PiecewiseConstant { breaks: Vec<f64>, rates: Vec<f64> },
    /// Linear interpolation through sampled `(time, rate)` points.
    Table { points: Vec<(f64, f64)> },
}

impl IntensitySpec {
    pub fn constant(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "constant intensity rate must be finite and >= 0, got {rate}"
            )));
        }
        Ok(Self::Constant { rate })
    }

    /// Requires `base >= 0`, `|amplitude| <= 1` and `period > 0` so the rate
    /// stays nonnegative.
    pub fn sinusoidal(base: f64, amplitude: f64, period: f64) -> Result<Self> {
        if !base.is_finite() || base < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sinusoidal base must be finite and >= 0, got {base}"
            )));
        }
        if !amplitude.is_finite() || amplitude.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "sinusoidal amplitude must satisfy |m| <= 1, got {amplitude}"
            )));
        }
        if !period.is_finite() || period <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sinusoidal period must be positive, got {period}"
            )));
        }
        Ok(Self::Sinusoidal { base, amplitude, period })
    }

    /// `breaks` must be strictly increasing with `breaks[0] = 0` and one more
    /// entry than `rates`; the last break is the end of the domain.
    pub fn piecewise(breaks: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || rates.len() + 1 != breaks.len() {
            return Err(Error::InvalidParameter(
                "piecewise intensity needs k+1 breakpoints for k rates, k >= 1".into(),
            ));
        }
        if breaks[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "piecewise breakpoints must start at 0".into(),
            ));
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "piecewise breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidParameter(
                "piecewise rates must be finite and >= 0".into(),
            ));
        }
        Ok(Self::PiecewiseConstant { breaks, rates })
    }

    /// Sampled `(time, rate)` pairs, strictly increasing in time, starting at
    /// 0. Negative rates are rejected rather than clamped.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(
                "table intensity needs at least two points".into(),
            ));
        }
        if points[0].0 != 0.0 {
            return Err(Error::InvalidParameter("table must start at time 0".into()));
        }
        if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::InvalidParameter(
                "table times must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "table rates must be finite and >= 0".into(),
            ));
        }
        Ok(Self::Table { points })
    }

    /// End of the domain this spec is defined on, if bounded.
    pub fn domain_end(&self) -> Option<f64> {
        match self {
            Self::Constant { .. } | Self::Sinusoidal { .. } => None,
            Self::PiecewiseConstant { breaks, .. } => breaks.last().copied(),
            Self::Table { points } => points.last().map(|p| p.0),
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let end = self.domain_end().unwrap_or(f64::INFINITY);
        if !t.is_finite() || t < 0.0 || t > end {
            return Err(Error::OutOfDomain { t, end });
        }
        Ok(())
    }

    /// Instantaneous rate `lambda(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self {
            Self::Constant { rate } => *rate,
            Self::Sinusoidal { base, amplitude, period } => {
                // Clamp against roundoff at |amplitude| = 1.
                (base * (1.0 + amplitude * (TWO_PI * t / period).sin())).max(0.0)
            }
            Self::PiecewiseConstant { breaks, rates } => {
                let i = segment_index(breaks, t);
                rates[i.min(rates.len() - 1)]
            }
            Self::Table { points } => {
                let i = segment_index_pts(points, t);
                let i = i.min(points.len() - 2);
                let (t0, v0) = points[i];
                let (t1, v1) = points[i + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        })
    }

    /// Cumulative mass `Lambda(t)`, closed form except for the table variant
    /// where the trapezoid rule is exact for the piecewise-linear rate.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self {
            Self::Constant { rate } => rate * t,
            Self::Sinusoidal { base, amplitude, period } => {
                base * (t + amplitude * period / TWO_PI * (1.0 - (TWO_PI * t / period).cos()))
            }
            Self::PiecewiseConstant { breaks, rates } => {
                let mut acc = 0.0;
                for (i, r) in rates.iter().enumerate() {
                    let lo = breaks[i];
                    let hi = breaks[i + 1].min(t);
                    if hi <= lo {
                        break;
                    }
                    acc += r * (hi - lo);
                }
                acc
            }
            Self::Table { points } => {
                let mut acc = 0.0;
                for w in points.windows(2) {
                    let (t0, v0) = w[0];
                    let (t1, v1) = w[1];
                    if t <= t0 {
                        break;
                    }
                    let hi = t1.min(t);
                    let vh = v0 + (v1 - v0) * (hi - t0) / (t1 - t0);
                    acc += 0.5 * (v0 + vh) * (hi - t0);
                }
                acc
            }
        })
    }

    /// A bound `sup_{u in [t0, t1]} lambda(u)`, tight for every variant.
    pub fn upper_bound(&self, t0: f64, t1: f64) -> Result<f64> {
        if !(t0 < t1) {
            return Err(Error::EmptyInterval { t0, t1 });
        }
        self.check_domain(t0)?;
        self.check_domain(t1)?;
        Ok(match self {
            Self::Constant { rate } => *rate,
            Self::Sinusoidal { base, amplitude, period } => {
                let s = |u: f64| amplitude * (TWO_PI * u / period).sin();
                let mut m = s(t0).max(s(t1));
                // Interior extrema of sin sit at odd multiples of period/4.
                let mut k = (t0 / (period / 4.0)).floor();
                loop {
                    let u = k * period / 4.0;
                    if u > t1 {
                        break;
                    }
                    if u >= t0 {
                        m = m.max(s(u));
                    }
                    k += 1.0;
                }
                (base * (1.0 + m)).max(0.0)
            }
            Self::PiecewiseConstant { breaks, rates } => {
                let i0 = segment_index(breaks, t0).min(rates.len() - 1);
                // t1 is an exclusive probe for the segment containing it.
                let i1 = if t1 >= *breaks.last().unwrap() {
                    rates.len() - 1
                } else {
                    segment_index(breaks, t1).min(rates.len() - 1)
                };
                rates[i0..=i1].iter().cloned().fold(0.0, f64::max)
            }
            Self::Table { points } => {
                // Piecewise linear: the sup over an interval is attained at
                // its endpoints or at interior nodes.
                let mut m = self.eval(t0)?.max(self.eval(t1)?);
                for (u, v) in points {
                    if *u > t0 && *u < t1 {
                        m = m.max(*v);
                    }
                }
                m
            }
        })
    }

    /// Points inside `(t0, t1)` where the rate is not smooth; used to split
    /// thinning windows and quadrature intervals. For the sinusoid these are
    /// the quarter-period points, where the rate is monotone in between.
    pub fn partition_points(&self, t0: f64, t1: f64) -> Vec<f64> {
        let inside = |u: f64| u > t0 && u < t1;
        match self {
            Self::Constant { .. } => Vec::new(),
            Self::Sinusoidal { period, .. } => {
                let q = period / 4.0;
                let mut k = (t0 / q).floor() + 1.0;
                let mut out = Vec::new();
                while k * q < t1 {
                    if inside(k * q) {
                        out.push(k * q);
                    }
                    k += 1.0;
                }
                out
            }
            Self::PiecewiseConstant { breaks, .. } => {
                breaks.iter().copied().filter(|u| inside(*u)).collect()
            }
            Self::Table { points } => {
                points.iter().map(|p| p.0).filter(|u| inside(*u)).collect()
            }
        }
    }
}

/// Index of the segment of `xs` containing `t`, treating segments as
/// right-open `[xs[i], xs[i+1])`.
fn segment_index(xs: &[f64], t: f64) -> usize {
    match xs.partition_point(|x| *x <= t) {
        0 => 0,
        i => i - 1,
    }
}

fn segment_index_pts(pts: &[(f64, f64)], t: f64) -> usize {
    match pts.partition_point(|p| p.0 <= t) {
        0 => 0,
        i => i - 1,
    }
}
