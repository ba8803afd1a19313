//! Temperature as a function of simulation time.
//!
//! A profile describes what the chamber was asked to do. Two imperfections are
//! layered on top: a multiplicative set-point error fixed for the whole run and
//! a bounded per-query jitter supplied by the caller.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    Ramp,
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureProfile {
    pub kind: ProfileKind,
    pub base_temp_c: f64,
    #[serde(default)]
    pub ramp_rate_c_per_min: f64,
    #[serde(default)]
    pub ramp_span_c: f64,
    #[serde(default)]
    pub stability_c: f64,
    #[serde(default)]
    pub set_error_fraction: f64,
    /// `(time_s, temp_c)` breakpoints; the value is held flat after the last one.
    #[serde(default)]
    pub segments: Vec<(f64, f64)>,
    /// Correlation time of the chamber jitter. Absent means a fresh uniform
    /// draw at every query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_correlation_s: Option<f64>,
}

impl TemperatureProfile {
    pub fn constant(temp_c: f64) -> Self {
        Self {
            kind: ProfileKind::Constant,
            base_temp_c: temp_c,
            ramp_rate_c_per_min: 0.0,
            ramp_span_c: 0.0,
            stability_c: 0.0,
            set_error_fraction: 0.0,
            segments: Vec::new(),
            jitter_correlation_s: None,
        }
    }

    pub fn ramp(base_temp_c: f64, rate_c_per_min: f64, span_c: f64) -> Self {
        Self {
            kind: ProfileKind::Ramp,
            ramp_rate_c_per_min: rate_c_per_min,
            ramp_span_c: span_c,
            ..Self::constant(base_temp_c)
        }
    }

    pub fn piecewise(segments: Vec<(f64, f64)>) -> Self {
        let base = segments.first().map(|s| s.1).unwrap_or(0.0);
        Self {
            kind: ProfileKind::PiecewiseLinear,
            segments,
            ..Self::constant(base)
        }
    }

    /// Chamber imperfections: ±`stability_c` jitter and a fractional set error.
    pub fn with_chamber(mut self, stability_c: f64, set_error_fraction: f64) -> Self {
        self.stability_c = stability_c;
        self.set_error_fraction = set_error_fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stability_c >= 0.0) {
            return Err(Error::Config("stability_c must be >= 0".into()));
        }
        if !(self.ramp_rate_c_per_min >= 0.0) {
            return Err(Error::Config("ramp_rate_c_per_min must be >= 0".into()));
        }
        if !self.base_temp_c.is_finite() || !self.set_error_fraction.is_finite() || !self.ramp_span_c.is_finite() {
            return Err(Error::Config("temperature parameters must be finite".into()));
        }
        if let Some(tau) = self.jitter_correlation_s {
            if !(tau > 0.0) {
                return Err(Error::Config("jitter_correlation_s must be > 0".into()));
            }
        }
        if self.kind == ProfileKind::PiecewiseLinear {
            if self.segments.is_empty() {
                return Err(Error::Config("piecewise profile needs at least one breakpoint".into()));
            }
            if self.segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::Config(
                    "piecewise breakpoints must be strictly increasing in time".into(),
                ));
            }
        }
        Ok(())
    }

    /// Profile value before any chamber imperfection.
    pub fn ideal_at(&self, t_s: f64) -> Result<f64> {
        if !(t_s >= 0.0) {
            return Err(Error::Domain(format!("time must be >= 0, got {t_s}")));
        }
        match self.kind {
            ProfileKind::Constant => Ok(self.base_temp_c),
            ProfileKind::Ramp => {
                let risen = self.ramp_rate_c_per_min / 60.0 * t_s;
                Ok(self.base_temp_c + risen.min(self.ramp_span_c))
            }
            ProfileKind::PiecewiseLinear => piecewise_at(&self.segments, t_s),
        }
    }
}

fn piecewise_at(segments: &[(f64, f64)], t_s: f64) -> Result<f64> {
    let (first_t, first_v) = *segments
        .first()
        .ok_or_else(|| Error::Config("piecewise profile has no breakpoints".into()))?;
    if t_s < first_t {
        return Err(Error::Domain(format!(
            "time {t_s} s precedes first breakpoint at {first_t} s"
        )));
    }
    let idx = segments.partition_point(|&(t, _)| t <= t_s);
    if idx == segments.len() {
        return Ok(segments[idx - 1].1);
    }
    if idx == 0 {
        return Ok(first_v);
    }
    let (t0, v0) = segments[idx - 1];
    let (t1, v1) = segments[idx];
    Ok(v0 + (v1 - v0) * (t_s - t0) / (t1 - t0))
}

/// `ideal(t) * (1 + set_error_fraction) + jitter_sample`.
pub fn temperature_at(profile: &TemperatureProfile, t_s: f64, jitter_sample_c: f64) -> Result<f64> {
    let ideal = profile.ideal_at(t_s)?;
    Ok(ideal * (1.0 + profile.set_error_fraction) + jitter_sample_c)
}

/// Source of chamber jitter samples, each marginally uniform on
/// `[-stability_c, +stability_c]`.
///
/// Without a correlation time every query is an independent draw. With one,
/// samples follow a Gaussian random walk reflected at the band edges, whose
/// stationary law is the same uniform distribution.
#[derive(Debug, Clone)]
pub struct ChamberJitter {
    half_width_c: f64,
    correlation_s: Option<f64>,
    state: Option<f64>,
}

impl ChamberJitter {
    pub fn new(profile: &TemperatureProfile) -> Self {
        Self {
            half_width_c: profile.stability_c,
            correlation_s: profile.jitter_correlation_s,
            state: None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, dt_s: f64) -> f64 {
        let u: f64 = rng.random_range(-1.0..1.0);
        let z: f64 = StandardNormal.sample(rng);
        let s = self.half_width_c;
        if s == 0.0 {
            return 0.0;
        }
        let next = match (self.correlation_s, self.state) {
            (Some(tau), Some(prev)) => {
                let step = 2.0 * s * (dt_s.max(0.0) / tau).sqrt() * z;
                reflect(prev + step, s)
            }
            _ => s * u,
        };
        self.state = Some(next);
        next
    }
}

fn reflect(x: f64, s: f64) -> f64 {
    // fold onto [-s, s] with period 4s
    let period = 4.0 * s;
    let mut y = (x + s).rem_euclid(period);
    if y > 2.0 * s {
        y = period - y;
    }
    y - s
}
