use super::{Support, Target, TargetError};

pub const FOUR_STATE_LABELS: [&str; 4] = ["(0,0)", "(0,1)", "(1,0)", "(1,1)"];

/// A probability vector over an ordered list of labelled states.
///
/// As a [`Target`] the position is the one-element vector `[index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTarget {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    support: Support,
}

impl FiniteTarget {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self, TargetError> {
        let sum: f64 = probs.iter().sum();
        if labels.len() != probs.len()
            || probs.iter().any(|p| !(*p >= 0.0))
            || (sum - 1.0).abs() > 1e-12
        {
            return Err(TargetError::InvalidProbabilities { sum });
        }
        let support = Support::Finite { n: probs.len() };
        Ok(Self { labels, probs, support })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl Target for FiniteTarget {
    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return f64::NEG_INFINITY;
        }
        self.probs[x[0] as usize].ln()
    }

    fn grad_log_density(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = 0.0;
        self.log_density(x)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["state".into()]
    }
}

/// The two-bit target over `[(0,0), (0,1), (1,0), (1,1)]`.
///
/// State index is `2·θ1 + θ2`.
pub fn make_four_state(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<FiniteTarget, TargetError> {
    FiniteTarget::new(
        FOUR_STATE_LABELS.iter().map(|s| s.to_string()).collect(),
        vec![p00, p01, p10, p11],
    )
}

/// Four-state target with `π(0,0) = π(1,1) = a`.
pub fn four_state_symmetric(a: f64) -> Result<FiniteTarget, TargetError> {
    let off = (1.0 - 2.0 * a) / 2.0;
    make_four_state(a, off, off, a)
}
