use super::{Support, Target, TargetError, LN_2PI};

/// Box constraints for `(μ1, μ2, σ1, σ2, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureBounds {
    pub mean: (f64, f64),
    pub sigma_max: f64,
    pub weight: (f64, f64),
}

impl Default for MixtureBounds {
    fn default() -> Self {
        Self { mean: (-50.0, 50.0), sigma_max: 50.0, weight: (0.01, 0.99) }
    }
}

/// Two-component Gaussian mixture log-likelihood with a flat prior on a
/// box. Parameter order is `(μ1, μ2, σ1, σ2, p)`.
#[derive(Debug, Clone)]
pub struct MixtureGaussian {
    data: Vec<f64>,
    support: Support,
}

pub fn make_mixture_gaussian_loglik(data: Vec<f64>, bounds: MixtureBounds) -> Result<MixtureGaussian, TargetError> {
    if data.is_empty() {
        return Err(TargetError::EmptyData);
    }
    if let Some(index) = data.iter().position(|x| !x.is_finite()) {
        return Err(TargetError::NonFiniteData { index });
    }
    let (m0, m1) = bounds.mean;
    let (w0, w1) = bounds.weight;
    Ok(MixtureGaussian {
        data,
        support: Support::Box {
            lo: vec![m0, m0, 0.0, 0.0, w0],
            hi: vec![m1, m1, bounds.sigma_max, bounds.sigma_max, w1],
        },
    })
}

impl MixtureGaussian {
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Log-likelihood without the support check (σ > 0, 0 < p < 1 still
    /// required).
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let (m1, m2, s1, s2, p) = (x[0], x[1], x[2], x[3], x[4]);
        if !(s1 > 0.0 && s2 > 0.0 && p > 0.0 && p < 1.0) {
            return f64::NEG_INFINITY;
        }
        let c1 = p.ln() - s1.ln();
        let c2 = (1.0 - p).ln() - s2.ln();
        let (i1, i2) = (1.0 / s1, 1.0 / s2);
        let mut acc = 0.0;
        for &y in &self.data {
            let z1 = (y - m1) * i1;
            let z2 = (y - m2) * i2;
            let a = c1 - 0.5 * z1 * z1;
            let b = c2 - 0.5 * z2 * z2;
            acc += if a > b { a + (b - a).exp().ln_1p() } else { b + (a - b).exp().ln_1p() };
        }
        acc - 0.5 * LN_2PI * self.data.len() as f64
    }
}

impl Target for MixtureGaussian {
    fn dim(&self) -> usize {
        5
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        self.log_likelihood(x)
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.log_density(x);
        grad.iter_mut().for_each(|g| *g = 0.0);
        if !f.is_finite() {
            return f;
        }
        let (m1, m2, s1, s2, p) = (x[0], x[1], x[2], x[3], x[4]);
        let c1 = p.ln() - s1.ln();
        let c2 = (1.0 - p).ln() - s2.ln();
        for &y in &self.data {
            let z1 = (y - m1) / s1;
            let z2 = (y - m2) / s2;
            let a = c1 - 0.5 * z1 * z1;
            let b = c2 - 0.5 * z2 * z2;
            // responsibility of component 1
            let r1 = 1.0 / (1.0 + (b - a).exp());
            let r2 = 1.0 - r1;
            grad[0] += r1 * z1 / s1;
            grad[1] += r2 * z2 / s2;
            grad[2] += r1 * (z1 * z1 - 1.0) / s1;
            grad[3] += r2 * (z2 * z2 - 1.0) / s2;
            grad[4] += r1 / p - r2 / (1.0 - p);
        }
        f
    }

    fn param_names(&self) -> Vec<String> {
        ["mu1", "mu2", "sigma1", "sigma2", "p"].iter().map(|s| s.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::finite_difference_gradient;
    use proptest::prelude::*;

    fn normal_pdf(x: f64, m: f64, s: f64) -> f64 {
        (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn single_observation_value() {
        let t = make_mixture_gaussian_loglik(vec![0.0], MixtureBounds::default()).unwrap();
        let direct = (0.3 * normal_pdf(0.0, 0.0, 1.0) + 0.7 * normal_pdf(0.0, 20.0, 5.0)).ln();
        let v = t.log_density(&[0.0, 20.0, 1.0, 5.0, 0.3]);
        assert!((v - direct).abs() < 1e-12);
        assert!((v - (-2.123)).abs() < 5e-4);
    }

    #[test]
    fn p_one_reduces_to_single_gaussian() {
        let data = vec![-1.0, 0.5, 2.0];
        let t = make_mixture_gaussian_loglik(data.clone(), MixtureBounds::default()).unwrap();
        let v = t.log_likelihood(&[0.2, 5.0, 1.3, 2.0, 1.0 - 1e-15]);
        let direct: f64 = data.iter().map(|y| normal_pdf(*y, 0.2, 1.3).ln()).sum();
        assert!((v - direct).abs() < 1e-9);
    }

    #[test]
    fn outside_support_is_neg_infinity() {
        let t = make_mixture_gaussian_loglik(vec![0.0], MixtureBounds::default()).unwrap();
        assert_eq!(t.log_density(&[0.0, 1.0, -1.0, 1.0, 0.5]), f64::NEG_INFINITY);
        assert_eq!(t.log_density(&[0.0, 1.0, 1.0, 1.0, 0.995]), f64::NEG_INFINITY);
        assert!(make_mixture_gaussian_loglik(vec![], MixtureBounds::default()).is_err());
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        let t = make_mixture_gaussian_loglik(vec![-0.3, 1.0, 18.0, 25.0], MixtureBounds::default()).unwrap();
        let x = [0.1, 19.0, 1.2, 4.0, 0.4];
        let mut a = [0.0; 5];
        let mut b = [0.0; 5];
        t.grad_log_density(&x, &mut a);
        finite_difference_gradient(&t, &x, &mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-5 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    proptest! {
        #[test]
        fn label_switch_invariance(
            m1 in -50.0..50.0f64, m2 in -50.0..50.0f64,
            s1 in 0.1..50.0f64, s2 in 0.1..50.0f64, p in 0.011..0.989f64,
            data in proptest::collection::vec(-30.0..30.0f64, 1..20),
        ) {
            let t = make_mixture_gaussian_loglik(data, MixtureBounds::default()).unwrap();
            let a = t.log_density(&[m1, m2, s1, s2, p]);
            let b = t.log_density(&[m2, m1, s2, s1, 1.0 - p]);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
