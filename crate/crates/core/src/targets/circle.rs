use std::fmt;
use std::sync::Arc;

use super::{Support, Target, TargetError, LN_2PI};

/// Bimodal density on a circle of circumference `4L`, represented as
/// `[−2L, 2L)`:
///
/// ```text
/// log π(θ) = −ν|θ|          for |θ| ≤ L
///          = −ν(2L − |θ|)   otherwise
/// ```
///
/// Modes sit at `0` and at `±2L` (the same point on the circle).
#[derive(Debug, Clone)]
pub struct CircleBimodal {
    pub l: f64,
    pub nu: f64,
    support: Support,
}

pub fn make_circle_bimodal(l: f64, nu: f64) -> Result<CircleBimodal, TargetError> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(TargetError::InvalidParameter { name: "L", reason: format!("{l} is not positive") });
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(TargetError::InvalidParameter { name: "nu", reason: format!("{nu} is not positive") });
    }
    Ok(CircleBimodal { l, nu, support: Support::Circle { half_period: 2.0 * l } })
}

impl CircleBimodal {
    pub fn half_period(&self) -> f64 {
        2.0 * self.l
    }

    /// `log ∫ π` over the whole circle.
    pub fn log_normalizer(&self) -> f64 {
        (4.0 * (1.0 - (-self.nu * self.l).exp()) / self.nu).ln()
    }

    fn log_density_wrapped(&self, theta: f64) -> f64 {
        let a = theta.abs();
        if a <= self.l {
            -self.nu * a
        } else {
            -self.nu * (2.0 * self.l - a)
        }
    }
}

impl Target for CircleBimodal {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !x[0].is_finite() {
            return f64::NEG_INFINITY;
        }
        self.log_density_wrapped(super::wrap_circle(x[0], self.half_period()))
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let t = super::wrap_circle(x[0], self.half_period());
        let s = t.signum();
        grad[0] = if t.abs() <= self.l { -self.nu * s } else { self.nu * s };
        self.log_density_wrapped(t)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }
}

type LogDensity1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `π(θx, θy) = p_x(θx) · u_D(θy)` on `[x_lo, x_hi] × [−D, D]`: identified in
/// `θx`, flat in `θy`.
#[derive(Clone)]
pub struct CylinderFlat {
    pub d: f64,
    log_px: LogDensity1d,
    support: Support,
}

impl fmt::Debug for CylinderFlat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFlat").field("d", &self.d).field("support", &self.support).finish()
    }
}

pub fn make_cylinder_flat(
    d: f64,
    x_bounds: (f64, f64),
    log_px: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<CylinderFlat, TargetError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(TargetError::InvalidParameter { name: "D", reason: format!("{d} is not positive") });
    }
    if !(x_bounds.0 < x_bounds.1) {
        return Err(TargetError::InvalidParameter { name: "x_bounds", reason: "empty interval".into() });
    }
    Ok(CylinderFlat {
        d,
        log_px: Arc::new(log_px),
        support: Support::Box { lo: vec![x_bounds.0, -d], hi: vec![x_bounds.1, d] },
    })
}

impl CylinderFlat {
    /// Standard Gaussian in `θx` restricted to `[−x_half, x_half]`.
    pub fn gaussian(d: f64, x_half: f64) -> Result<Self, TargetError> {
        make_cylinder_flat(d, (-x_half, x_half), |x| -0.5 * x * x - 0.5 * LN_2PI)
    }
}

impl Target for CylinderFlat {
    fn dim(&self) -> usize {
        2
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        (self.log_px)(x[0]) - (2.0 * self.d).ln()
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta_x".into(), "theta_y".into()]
    }
}
