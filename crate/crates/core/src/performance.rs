//! Per-edge prescribed-performance funnels.
//!
//! An edge error `x` is normalised by the funnel radius to the modulated
//! error `x̂ = x / ρ(t)`, which must stay inside an open region `(lo, hi)`
//! containing zero. The transformation
//!
//! ```text
//! T(x̂) = ln((x̂ - lo) / (hi - x̂)) - ln(-lo / hi)
//! ```
//!
//! maps that region onto the whole real line, is strictly increasing and
//! vanishes at `x̂ = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stage states are pulled this far inside the region boundary when clamped.
pub const CLAMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FunnelError {
    #[error("modulated error {x_hat} outside the funnel region ({lo}, {hi})")]
    OutOfFunnel { x_hat: f64, lo: f64, hi: f64 },
    #[error("invalid performance spec: {0}")]
    InvalidSpec(&'static str),
    #[error("control gain must be positive and finite, got {0}")]
    InvalidGain(f64),
}

/// Exponential funnel `ρ(t) = (ρ₀ - ρ∞) e^{-l t} + ρ∞` with overshoot factor `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceSpec {
    pub rho0: f64,
    pub rho_inf: f64,
    pub l: f64,
    #[serde(rename = "M")]
    pub overshoot: f64,
}

impl PerformanceSpec {
    pub fn new(rho0: f64, rho_inf: f64, l: f64, overshoot: f64) -> Result<Self, FunnelError> {
        let spec = Self {
            rho0,
            rho_inf,
            l,
            overshoot,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FunnelError> {
        let all_finite = [self.rho0, self.rho_inf, self.l, self.overshoot]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(FunnelError::InvalidSpec("parameters must be finite"));
        }
        if !(self.rho_inf > 0.0) {
            return Err(FunnelError::InvalidSpec("rho_inf must be positive"));
        }
        if !(self.rho0 > self.rho_inf) {
            return Err(FunnelError::InvalidSpec("rho0 must exceed rho_inf"));
        }
        if self.l < 0.0 {
            return Err(FunnelError::InvalidSpec("decay rate l must be nonnegative"));
        }
        if !(self.overshoot > 0.0) {
            return Err(FunnelError::InvalidSpec("overshoot M must be positive"));
        }
        Ok(())
    }

    /// Funnel radius at time `t`.
    pub fn rho(&self, t: f64) -> f64 {
        (self.rho0 - self.rho_inf) * (-self.l * t).exp() + self.rho_inf
    }

    /// Normalised decay `α(t) = -ρ̇(t) / ρ(t)`; lies in `[0, l)`.
    pub fn alpha(&self, t: f64) -> f64 {
        let decaying = (self.rho0 - self.rho_inf) * (-self.l * t).exp();
        self.l * decaying / (decaying + self.rho_inf)
    }
}

/// Open modulated-error region `(lo, hi)` with `lo < 0 < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    pub fn contains(&self, x_hat: f64) -> bool {
        self.lo < x_hat && x_hat < self.hi
    }

    fn clamp_inside(&self, x_hat: f64) -> (f64, bool) {
        if x_hat <= self.lo {
            (self.lo + CLAMP_EPS, true)
        } else if x_hat >= self.hi {
            (self.hi - CLAMP_EPS, true)
        } else {
            (x_hat, false)
        }
    }
}

/// Region for an edge whose initial error is `x0`: `(-M, 1)` for `x0 >= 0`,
/// `(-1, M)` for `x0 < 0`.
pub fn select_region(x0: f64, overshoot: f64) -> Region {
    if x0 < 0.0 {
        Region {
            lo: -1.0,
            hi: overshoot,
        }
    } else {
        Region {
            lo: -overshoot,
            hi: 1.0,
        }
    }
}

/// Transformation state of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeChannel {
    pub spec: PerformanceSpec,
    pub region: Region,
    /// Control gain `g_ij`.
    pub gain: f64,
    /// `ln(-lo / hi)`, subtracted so that `T(0) = 0`.
    pub t_offset: f64,
}

impl EdgeChannel {
    /// Channel for an edge with initial error `x0`.
    pub fn new(spec: PerformanceSpec, x0: f64, gain: f64) -> Result<Self, FunnelError> {
        Self::with_region(spec, select_region(x0, spec.overshoot), gain)
    }

    pub fn with_region(spec: PerformanceSpec, region: Region, gain: f64) -> Result<Self, FunnelError> {
        spec.validate()?;
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(FunnelError::InvalidGain(gain));
        }
        Ok(Self {
            spec,
            region,
            gain,
            t_offset: (-region.lo / region.hi).ln(),
        })
    }

    /// The same funnel seen from the other endpoint: the error changes sign,
    /// so the region is mirrored and `T_ji(-x̂) = -T_ij(x̂)`.
    pub fn reversed(&self) -> Self {
        let region = Region {
            lo: -self.region.hi,
            hi: -self.region.lo,
        };
        Self {
            region,
            t_offset: -self.t_offset,
            ..*self
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.spec.rho(t)
    }

    pub fn modulated(&self, x: f64, t: f64) -> f64 {
        x / self.spec.rho(t)
    }

    fn check(&self, x_hat: f64) -> Result<(), FunnelError> {
        if self.region.contains(x_hat) {
            Ok(())
        } else {
            Err(FunnelError::OutOfFunnel {
                x_hat,
                lo: self.region.lo,
                hi: self.region.hi,
            })
        }
    }

    fn transform_unchecked(&self, x_hat: f64) -> f64 {
        ((x_hat - self.region.lo) / (self.region.hi - x_hat)).ln() - self.t_offset
    }

    fn slope_unchecked(&self, x_hat: f64) -> f64 {
        1.0 / (x_hat - self.region.lo) + 1.0 / (self.region.hi - x_hat)
    }

    /// Transformed error `ε = T(x̂)`.
    pub fn transform(&self, x_hat: f64) -> Result<f64, FunnelError> {
        self.check(x_hat)?;
        Ok(self.transform_unchecked(x_hat))
    }

    /// `∂T/∂x̂`.
    pub fn transform_slope(&self, x_hat: f64) -> Result<f64, FunnelError> {
        self.check(x_hat)?;
        Ok(self.slope_unchecked(x_hat))
    }

    /// Normalised Jacobian `(∂T/∂x̂) / ρ(t)`.
    pub fn jacobian(&self, x_hat: f64, t: f64) -> Result<f64, FunnelError> {
        self.check(x_hat)?;
        Ok(self.slope_unchecked(x_hat) / self.spec.rho(t))
    }

    /// `g · J_T · ε` for edge error `x` at time `t`, the per-edge term of the
    /// control law.
    pub fn drive(&self, x: f64, t: f64) -> Result<f64, FunnelError> {
        let rho = self.spec.rho(t);
        let x_hat = x / rho;
        self.check(x_hat)?;
        Ok(self.gain * self.slope_unchecked(x_hat) / rho * self.transform_unchecked(x_hat))
    }

    /// As [`drive`](Self::drive), but a modulated error outside the region is
    /// pulled to [`CLAMP_EPS`] inside its boundary. The flag reports clamping.
    pub fn drive_clamped(&self, x: f64, t: f64) -> (f64, bool) {
        let rho = self.spec.rho(t);
        let (x_hat, clamped) = self.region.clamp_inside(x / rho);
        let value = self.gain * self.slope_unchecked(x_hat) / rho * self.transform_unchecked(x_hat);
        (value, clamped)
    }

    /// `ε(x / ρ(t))`.
    pub fn epsilon(&self, x: f64, t: f64) -> Result<f64, FunnelError> {
        self.transform(self.modulated(x, t))
    }

    /// Closed funnel bounds `(lo·ρ(t), hi·ρ(t))` on the raw edge error.
    pub fn bounds(&self, t: f64) -> (f64, f64) {
        let rho = self.spec.rho(t);
        (self.region.lo * rho, self.region.hi * rho)
    }

    /// `T'(0)`, the slope at the funnel centre.
    pub fn centre_slope(&self) -> f64 {
        self.slope_unchecked(0.0)
    }

    /// Inverse transformation: the modulated error with `T(x̂) = eps`.
    pub fn inverse(&self, eps: f64) -> f64 {
        let e = (eps + self.t_offset).exp();
        (self.region.lo + e * self.region.hi) / (1.0 + e)
    }
}
