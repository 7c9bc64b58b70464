use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{mh_accept, ChainState, Kernel, KernelError, RobbinsMonro};
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RwmProposal {
    /// Uniform on the ball of radius `scale`.
    Ball,
    /// `N(0, scale² · diag(scales)²)`.
    Gaussian,
}

/// Random-walk Metropolis.
///
/// Proposals on a circle are wrapped; proposals leaving a box are rejected
/// without evaluating the target.
#[derive(Debug, Clone)]
pub struct Rwm {
    proposal: RwmProposal,
    diag: Option<Vec<f64>>,
    adapt: RobbinsMonro,
    adaptive: bool,
    scratch: Vec<f64>,
}

impl Rwm {
    pub fn new(proposal: RwmProposal, scale: f64, diag: Option<Vec<f64>>, adapt_target: Option<f64>) -> Self {
        Self {
            proposal,
            diag,
            adapt: RobbinsMonro::new(scale, adapt_target.unwrap_or(0.234)),
            adaptive: adapt_target.is_some(),
            scratch: Vec::new(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.adapt.scale()
    }

    fn propose(&mut self, x: &[f64], rng: &mut impl Rng) {
        let d = x.len();
        let s = self.adapt.scale();
        self.scratch.clear();
        match self.proposal {
            RwmProposal::Gaussian => {
                for (i, xi) in x.iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    let si = self.diag.as_ref().map_or(1.0, |v| v[i]);
                    self.scratch.push(xi + s * si * z);
                }
            }
            RwmProposal::Ball => {
                let mut norm = 0.0;
                for _ in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    norm += z * z;
                    self.scratch.push(z);
                }
                let r = s * rng.random::<f64>().powf(1.0 / d as f64) / norm.sqrt();
                for (v, xi) in self.scratch.iter_mut().zip(x) {
                    *v = xi + r * *v;
                }
            }
        }
    }
}

impl Kernel for Rwm {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        if !state.log_density.is_finite() {
            return Err(KernelError::InvalidState(format!("log density {} at {:?}", state.log_density, state.position)));
        }
        self.propose(&state.position, &mut state.rng);
        let support = target.support();
        support.canonicalize(&mut self.scratch);
        let (lp, log_ratio) = if support.contains(&self.scratch) {
            let lp = target.log_density(&self.scratch);
            (lp, lp - state.log_density)
        } else {
            (f64::NEG_INFINITY, f64::NEG_INFINITY)
        };
        let accepted = mh_accept(log_ratio, &mut state.rng);
        if accepted {
            state.position.copy_from_slice(&self.scratch);
            state.log_density = lp;
        }
        state.stats.record("rwm", accepted);
        if self.adaptive {
            self.adapt.update(log_ratio.min(0.0).exp());
        }
        Ok(())
    }

    fn set_warmup(&mut self, warmup: bool) {
        self.adapt.set_active(warmup && self.adaptive);
    }

    fn name(&self) -> String {
        match self.proposal {
            RwmProposal::Ball => format!("rwm_ball(delta={})", self.scale()),
            RwmProposal::Gaussian => format!("rwm_gauss(scale={})", self.scale()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{run_chain, KernelSpec, RunSettings};
    use crate::rng::stream;
    use crate::targets::{make_circle_bimodal, BoxUniform, StandardGaussian};

    #[test]
    fn out_of_box_proposal_is_rejected() {
        let t = BoxUniform::cube(1, 0.0, 1.0);
        let mut k = Rwm::new(RwmProposal::Gaussian, 100.0, None, None);
        let mut s = ChainState::new(&t, &[0.5], stream(0, 0)).unwrap();
        let mut stays = 0;
        for _ in 0..1000 {
            let before = s.position[0];
            k.step(&mut s, &t).unwrap();
            stays += (s.position[0] == before) as usize;
            assert!((0.0..=1.0).contains(&s.position[0]));
        }
        assert!(stays > 950);
    }

    #[test]
    fn uphill_move_always_accepted() {
        // on a uniform box every in-box proposal has ratio 1
        let t = BoxUniform::cube(2, -100.0, 100.0);
        let mut k = Rwm::new(RwmProposal::Ball, 0.5, None, None);
        let mut s = ChainState::new(&t, &[0.0, 0.0], stream(1, 0)).unwrap();
        for _ in 0..100 {
            k.step(&mut s, &t).unwrap();
        }
        assert_eq!(s.stats.counters["rwm"].accepted, 100);
    }

    #[test]
    fn ball_proposal_stays_within_delta_and_circle_wraps() {
        let t = make_circle_bimodal(1.0, 0.01).unwrap();
        let mut k = Rwm::new(RwmProposal::Ball, 0.3, None, None);
        let mut s = ChainState::new(&t, &[1.95], stream(2, 0)).unwrap();
        let mut wrapped = false;
        for _ in 0..2000 {
            let before = s.position[0];
            k.step(&mut s, &t).unwrap();
            let mut d = (s.position[0] - before).abs();
            if d > 2.0 {
                wrapped = true;
                d = 4.0 - d;
            }
            assert!(d <= 0.3 + 1e-12);
            assert!((-2.0..2.0).contains(&s.position[0]));
        }
        assert!(wrapped);
    }

    #[test]
    fn gaussian_acceptance_corridor() {
        let t = StandardGaussian::new(1);
        let spec = KernelSpec::RwmGauss { scale: 2.4, scales: None, adapt_target: None };
        let run = run_chain(&spec, &t, &[0.0], &RunSettings::new(100_000, 0, 1, 3)).unwrap();
        let a = run.meta.acceptance["rwm"];
        assert!((0.35..=0.50).contains(&a), "{a}");
    }

    #[test]
    fn adaptation_reaches_target_corridor() {
        let t = StandardGaussian::new(1);
        let spec = KernelSpec::RwmGauss { scale: 0.1, scales: None, adapt_target: Some(0.234) };
        let run = run_chain(&spec, &t, &[0.0], &RunSettings::new(20_000, 5_000, 1, 4)).unwrap();
        let a = run.meta.acceptance["rwm"];
        assert!((0.15..=0.35).contains(&a), "{a}");
    }
}
