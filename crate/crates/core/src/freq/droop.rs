//! Implicit primary droop with smooth saturation.
//!
//! The generator response `ΔP = -(P_R/R)·Δf` is bounded by
//! `[p_min - p_set, p_max - p_set]`. The corners where the linear response
//! meets a bound are replaced by quadratic patches of width `w` centred on the
//! corner, so the function is C1 everywhere and Newton iterations never see a
//! jump in the derivative.
//!
//! Regions in ascending Δf:
//!
//! ```text
//!   flat (dp_max) | patch (quad_max) | linear | patch (quad_min) | flat (dp_min)
//!                 f1                 f2       f3                 f4
//! ```

use crate::error::{Error, Result};
use crate::network::Generator;

/// Default patch width in Hz.
pub const DEFAULT_SMOOTHING_HZ: f64 = 0.02;

/// `a·f² + b·f + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        (self.a * f + self.b) * f + self.c
    }

    #[inline]
    pub fn derivative(&self, f: f64) -> f64 {
        2.0 * self.a * f + self.b
    }

    /// Patch joining a line of slope `slope` at `f_lin` to the constant
    /// `level` at `f_flat`: zero slope and value `level` at `f_flat`, slope
    /// `slope` at `f_lin`.
    fn patch(slope: f64, f_lin: f64, f_flat: f64, level: f64) -> Self {
        let a = slope / (2.0 * (f_lin - f_flat));
        let b = -2.0 * a * f_flat;
        let c = level + a * f_flat * f_flat;
        Quadratic { a, b, c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DroopRegion {
    /// Held at the upper bound (under-frequency side).
    AtMax,
    PatchMax,
    Linear,
    PatchMin,
    /// Held at the lower bound (over-frequency side).
    AtMin,
}

impl DroopRegion {
    pub fn is_saturating(self) -> bool {
        !matches!(self, DroopRegion::Linear)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDroopModel {
    pub dp_min: f64,
    pub dp_max: f64,
    /// dΔP/dΔf in the linear region, i.e. `-P_R/R` (≤ 0).
    pub slope: f64,
    pub width: f64,
    /// `[f1, f2, f3, f4]`, ascending. All zero for the constant model.
    pub breakpoints: [f64; 4],
    pub quad_min: Quadratic,
    pub quad_max: Quadratic,
}

impl SmoothDroopModel {
    pub fn zero(dp_min: f64, dp_max: f64, width: f64) -> Self {
        let flat = Quadratic { a: 0.0, b: 0.0, c: 0.0 };
        SmoothDroopModel {
            dp_min,
            dp_max,
            slope: 0.0,
            width,
            breakpoints: [0.0; 4],
            quad_min: flat,
            quad_max: flat,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.slope == 0.0
    }

    /// Frequency where the linear response reaches `dp_max`.
    pub fn kink_max(&self) -> f64 {
        0.5 * (self.breakpoints[0] + self.breakpoints[1])
    }

    /// Frequency where the linear response reaches `dp_min`.
    pub fn kink_min(&self) -> f64 {
        0.5 * (self.breakpoints[2] + self.breakpoints[3])
    }

    pub fn region(&self, df: f64) -> DroopRegion {
        let [f1, f2, f3, f4] = self.breakpoints;
        if self.is_constant() {
            DroopRegion::Linear
        } else if df <= f1 {
            DroopRegion::AtMax
        } else if df < f2 {
            DroopRegion::PatchMax
        } else if df <= f3 {
            DroopRegion::Linear
        } else if df < f4 {
            DroopRegion::PatchMin
        } else {
            DroopRegion::AtMin
        }
    }

    /// Primary response ΔP^p(Δf).
    pub fn eval(&self, df: f64) -> f64 {
        match self.region(df) {
            _ if self.is_constant() => 0.0,
            DroopRegion::AtMax => self.dp_max,
            DroopRegion::PatchMax => self.quad_max.eval(df),
            DroopRegion::Linear => self.slope * df,
            DroopRegion::PatchMin => self.quad_min.eval(df),
            DroopRegion::AtMin => self.dp_min,
        }
    }

    /// Exact dΔP^p/dΔf.
    pub fn derivative(&self, df: f64) -> f64 {
        match self.region(df) {
            _ if self.is_constant() => 0.0,
            DroopRegion::AtMax | DroopRegion::AtMin => 0.0,
            DroopRegion::PatchMax => self.quad_max.derivative(df),
            DroopRegion::Linear => self.slope,
            DroopRegion::PatchMin => self.quad_min.derivative(df),
        }
    }
}

/// Builds the smoothed droop model of a per-unit generator.
pub fn build_droop_model(gen: &Generator, width: f64) -> Result<SmoothDroopModel> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Parameter(format!("smoothing width must be positive, got {width}")));
    }
    let dp_min = gen.p_min - gen.p_set;
    let dp_max = gen.p_max - gen.p_set;
    if gen.droop_gain == 0.0 {
        return Ok(SmoothDroopModel::zero(dp_min, dp_max, width));
    }
    let slope = -gen.droop_gain;
    let kink_max = dp_max / slope;
    let kink_min = dp_min / slope;
    let span = kink_min - kink_max;
    if !(span > width) {
        return Err(Error::OverlappingPatch { gen_id: gen.id, span_hz: span, width_hz: width });
    }
    let half = 0.5 * width;
    let breakpoints = [kink_max - half, kink_max + half, kink_min - half, kink_min + half];
    let [f1, f2, f3, f4] = breakpoints;
    Ok(SmoothDroopModel {
        dp_min,
        dp_max,
        slope,
        width,
        breakpoints,
        quad_max: Quadratic::patch(slope, f2, f1, dp_max),
        quad_min: Quadratic::patch(slope, f3, f4, dp_min),
    })
}
