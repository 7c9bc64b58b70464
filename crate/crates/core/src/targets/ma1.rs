use serde::{Deserialize, Serialize};

use super::{Support, Target, TargetError, LN_2PI};

/// Prior over `(θ, s = log σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Ma1Prior {
    /// Uniform on a box in `(θ, log σ)`.
    Flat { theta: (f64, f64), log_sigma: (f64, f64) },
    /// `θ ~ N(1, 0.5²)`, `log σ ~ N(0, 0.25²)`, independent.
    Gaussian,
}

impl Ma1Prior {
    pub fn flat_default() -> Self {
        Ma1Prior::Flat { theta: (-0.5, 3.5), log_sigma: (-1.5, 1.0) }
    }

    pub fn log_density(&self, theta: f64, s: f64) -> f64 {
        match *self {
            Ma1Prior::Flat { theta: (t0, t1), log_sigma: (s0, s1) } => {
                if theta >= t0 && theta <= t1 && s >= s0 && s <= s1 {
                    -((t1 - t0) * (s1 - s0)).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Ma1Prior::Gaussian => {
                let zt = (theta - 1.0) / 0.5;
                let zs = s / 0.25;
                -0.5 * (zt * zt + zs * zs) - LN_2PI - (0.5f64 * 0.25).ln()
            }
        }
    }
}

/// Posterior of a Gaussian MA(1), `y_t = ε_t + θ ε_{t−1}`, in `(θ, log σ)`.
///
/// The likelihood is exact: the `T×T` covariance is Toeplitz with
/// `γ0 = σ²(1+θ²)` on the diagonal and `γ1 = σ²θ` on the first
/// off-diagonals, and its Cholesky factor is computed row by row (the
/// factor of a tridiagonal matrix is bidiagonal, so this is `O(T)`).
#[derive(Debug, Clone)]
pub struct Ma1Posterior {
    data: Vec<f64>,
    prior: Ma1Prior,
    support: Support,
}

pub fn make_ma1_log_posterior(data: Vec<f64>, prior: Ma1Prior) -> Result<Ma1Posterior, TargetError> {
    if let Some(index) = data.iter().position(|x| !x.is_finite()) {
        return Err(TargetError::NonFiniteData { index });
    }
    let support = match prior {
        Ma1Prior::Flat { theta, log_sigma } => {
            Support::Box { lo: vec![theta.0, log_sigma.0], hi: vec![theta.1, log_sigma.1] }
        }
        Ma1Prior::Gaussian => Support::Unbounded,
    };
    Ok(Ma1Posterior { data, prior, support })
}

impl Ma1Posterior {
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn prior(&self) -> &Ma1Prior {
        &self.prior
    }

    /// Exact Gaussian log-likelihood at `(θ, σ)`.
    pub fn log_likelihood(&self, theta: f64, sigma: f64) -> Result<f64, TargetError> {
        let var = sigma * sigma;
        let g0 = var * (1.0 + theta * theta);
        let g1 = var * theta;
        let mut quad = 0.0;
        let mut log_det_half = 0.0;
        let mut prev_d = 0.0;
        let mut prev_z = 0.0;
        for (t, &y) in self.data.iter().enumerate() {
            let (l, d2) = if t == 0 {
                (0.0, g0)
            } else {
                let l = g1 / prev_d;
                (l, g0 - l * l)
            };
            if !(d2 > 0.0) || !d2.is_finite() {
                return Err(TargetError::Factorization { row: t });
            }
            let d = d2.sqrt();
            let z = (y - l * prev_z) / d;
            quad += z * z;
            log_det_half += d.ln();
            prev_d = d;
            prev_z = z;
        }
        Ok(-0.5 * quad - log_det_half - 0.5 * LN_2PI * self.data.len() as f64)
    }
}

impl Target for Ma1Posterior {
    fn dim(&self) -> usize {
        2
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let (theta, s) = (x[0], x[1]);
        let lp = self.prior.log_density(theta, s);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.log_likelihood(theta, s.exp()) {
            Ok(ll) => ll + lp,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into(), "log_sigma".into()]
    }
}
