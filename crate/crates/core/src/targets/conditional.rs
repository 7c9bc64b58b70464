use super::{Support, Target, TargetError, LN_2PI};

/// Each mean is bounded to `[−10, 10]`.
pub const COND_GAUSS_BOUND: f64 = 10.0;

/// `x_t ~ N(Σ μ_i, 1)` with a flat prior on `[−10, 10]^k`.
///
/// The likelihood only sees the sum `s = Σ μ_i`, so it is stored through
/// the sufficient statistics `(T, x̄, Σ (x_t − x̄)²)`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    k: usize,
    n: f64,
    mean: f64,
    ss: f64,
    support: Support,
}

pub fn make_conditional_gaussian_loglik(data: &[f64], k: usize) -> Result<ConditionalGaussian, TargetError> {
    if data.is_empty() {
        return Err(TargetError::EmptyData);
    }
    if let Some(index) = data.iter().position(|x| !x.is_finite()) {
        return Err(TargetError::NonFiniteData { index });
    }
    if k < 2 {
        return Err(TargetError::InvalidParameter { name: "k", reason: format!("{k} < 2") });
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss = data.iter().map(|x| (x - mean).powi(2)).sum();
    Ok(ConditionalGaussian {
        k,
        n,
        mean,
        ss,
        support: Support::Box { lo: vec![-COND_GAUSS_BOUND; k], hi: vec![COND_GAUSS_BOUND; k] },
    })
}

impl ConditionalGaussian {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data_mean(&self) -> f64 {
        self.mean
    }

    pub fn log_likelihood_of_sum(&self, s: f64) -> f64 {
        -0.5 * (self.ss + self.n * (s - self.mean).powi(2)) - 0.5 * self.n * LN_2PI
    }
}

impl Target for ConditionalGaussian {
    fn dim(&self) -> usize {
        self.k
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood_of_sum(x.iter().sum())
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let s: f64 = x.iter().sum();
        let g = self.n * (self.mean - s);
        grad.iter_mut().for_each(|v| *v = g);
        self.log_density(x)
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.k).map(|i| format!("mu{i}")).collect()
    }
}
