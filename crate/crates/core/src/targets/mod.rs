//! Target distributions.
//!
//! Every target is an unnormalized log-density `log π` (so `U = −log π` is
//! the potential energy used by HMC) together with a [`Support`] descriptor.
//! Points outside the support evaluate to `−∞`.

mod circle;
mod conditional;
pub mod data;
mod finite;
mod ma1;
mod mixture;
pub mod oracle;

pub use circle::{make_circle_bimodal, make_cylinder_flat, CircleBimodal, CylinderFlat};
pub use conditional::{make_conditional_gaussian_loglik, ConditionalGaussian, COND_GAUSS_BOUND};
pub use finite::{four_state_symmetric, make_four_state, FiniteTarget, FOUR_STATE_LABELS};
pub use ma1::{make_ma1_log_posterior, Ma1Posterior, Ma1Prior};
pub use mixture::{make_mixture_gaussian_loglik, MixtureBounds, MixtureGaussian};
pub use oracle::{build_grid_oracle, GridAxis, GridOracle, Marginal, DEFAULT_CELL_CAP};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Step used by the central finite-difference gradient.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("probabilities must be non-negative and sum to 1 (sum = {sum})")]
    InvalidProbabilities { sum: f64 },
    #[error("data must be non-empty")]
    EmptyData,
    #[error("data contains a non-finite value at index {index}")]
    NonFiniteData { index: usize },
    #[error("covariance factorization failed at row {row}")]
    Factorization { row: usize },
    #[error("grid axis {axis} is unbounded or degenerate")]
    UnboundedAxis { axis: usize },
    #[error("grid has {cells} cells, above the cap of {cap}")]
    CellCapExceeded { cells: usize, cap: usize },
    #[error("grid has {got} axes but the target has dimension {want}")]
    AxisCount { got: usize, want: usize },
    #[error("oracle file: {0}")]
    OracleFormat(String),
    #[error("data file: {0}")]
    Data(String),
}

/// Where a target puts mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Support {
    Unbounded,
    /// Per-coordinate closed bounds.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// One-dimensional circle `[−half_period, half_period)` with the end
    /// points identified (circumference `2·half_period`).
    Circle { half_period: f64 },
    Finite { n: usize },
}

impl Support {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Support::Unbounded | Support::Circle { .. } => x.iter().all(|v| v.is_finite()),
            Support::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h),
            Support::Finite { n } => {
                x.len() == 1 && x[0] >= 0.0 && (x[0] as usize) < *n && x[0].fract() == 0.0
            }
        }
    }

    /// Maps a point onto its canonical representative (circle wrap); a
    /// no-op for other supports.
    pub fn canonicalize(&self, x: &mut [f64]) {
        if let Support::Circle { half_period } = self {
            for v in x.iter_mut() {
                *v = wrap_circle(*v, *half_period);
            }
        }
    }

    /// Finite bounds of coordinate `i`, if any.
    pub fn bounds(&self, i: usize) -> Option<(f64, f64)> {
        match self {
            Support::Box { lo, hi } => Some((lo[i], hi[i])),
            Support::Circle { half_period } => Some((-half_period, *half_period)),
            _ => None,
        }
    }
}

/// Wraps `x` into `[−h, h)`.
pub fn wrap_circle(x: f64, h: f64) -> f64 {
    let period = 2.0 * h;
    let mut y = (x + h).rem_euclid(period) - h;
    if y >= h {
        y -= period;
    }
    y
}

/// An unnormalized log-density on `R^dim`.
///
/// Implementations must be deterministic and safe to evaluate from many
/// threads at once.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn support(&self) -> &Support;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Writes `∇ log π(x)` into `grad` and returns `log π(x)`.
    ///
    /// The default is a central difference with step [`FD_STEP`]; targets
    /// with a closed-form gradient override it.
    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        finite_difference_gradient(self, x, grad)
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("theta{}", i + 1)).collect()
    }
}

pub fn finite_difference_gradient<T: Target + ?Sized>(t: &T, x: &[f64], grad: &mut [f64]) -> f64 {
    let f0 = t.log_density(x);
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + FD_STEP;
        let fp = t.log_density(&xp);
        xp[i] = orig - FD_STEP;
        let fm = t.log_density(&xp);
        xp[i] = orig;
        grad[i] = (fp - fm) / (2.0 * FD_STEP);
    }
    f0
}

/// Isotropic standard Gaussian, optionally truncated to a cube.
#[derive(Debug, Clone)]
pub struct StandardGaussian {
    dim: usize,
    support: Support,
}

impl StandardGaussian {
    pub fn new(dim: usize) -> Self {
        Self { dim, support: Support::Unbounded }
    }

    pub fn truncated(dim: usize, lo: f64, hi: f64) -> Self {
        Self { dim, support: Support::Box { lo: vec![lo; dim], hi: vec![hi; dim] } }
    }
}

impl Target for StandardGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        -0.5 * x.iter().map(|v| v * v).sum::<f64>() - 0.5 * self.dim as f64 * LN_2PI
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        for (g, v) in grad.iter_mut().zip(x) {
            *g = -v;
        }
        self.log_density(x)
    }
}

/// Uniform density on a box; used as a prior.
#[derive(Debug, Clone)]
pub struct BoxUniform {
    support: Support,
    log_volume: f64,
}

impl BoxUniform {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let log_volume = lo.iter().zip(&hi).map(|(l, h)| (h - l).ln()).sum();
        Self { support: Support::Box { lo, hi }, log_volume }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn lo(&self) -> &[f64] {
        match &self.support {
            Support::Box { lo, .. } => lo,
            _ => unreachable!(),
        }
    }

    pub fn hi(&self) -> &[f64] {
        match &self.support {
            Support::Box { hi, .. } => hi,
            _ => unreachable!(),
        }
    }
}

impl Target for BoxUniform {
    fn dim(&self) -> usize {
        self.lo().len()
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            -self.log_volume
        } else {
            f64::NEG_INFINITY
        }
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.log_density(x)
    }
}

/// Numerically stable `log(Σ exp(v))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_maps_into_half_open_interval() {
        assert_eq!(wrap_circle(0.0, 20.0), 0.0);
        assert_eq!(wrap_circle(20.0, 20.0), -20.0);
        assert!((wrap_circle(25.0, 20.0) - (-15.0)).abs() < 1e-12);
        assert!((wrap_circle(-21.0, 20.0) - 19.0).abs() < 1e-12);
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let g = StandardGaussian::new(3);
        let x = [0.3, -1.2, 2.0];
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        g.grad_log_density(&x, &mut a);
        finite_difference_gradient(&g, &x, &mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn box_support_contains() {
        let s = Support::Box { lo: vec![-1.0, 0.0], hi: vec![1.0, 2.0] };
        assert!(s.contains(&[0.0, 2.0]));
        assert!(!s.contains(&[1.5, 1.0]));
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
