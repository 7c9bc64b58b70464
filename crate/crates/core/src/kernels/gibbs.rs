use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ChainState, Kernel, KernelError};
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsScan {
    /// `θ1 | θ2` then `θ2 | θ1`.
    Systematic,
    /// One coordinate, chosen by a fair coin.
    RandomScan,
}

/// Gibbs sampler on the two-bit state space `{0,1}²`, state index
/// `2·θ1 + θ2`. Conditionals are read off the target's log-density.
#[derive(Debug, Clone)]
pub struct GibbsFinite {
    pub scan: GibbsScan,
}

impl GibbsFinite {
    pub fn new(scan: GibbsScan) -> Self {
        Self { scan }
    }

    /// Redraws bit `coord` (0 for `θ1`, 1 for `θ2`) of `state`.
    fn update(coord: usize, s: usize, target: &dyn Target, rng: &mut impl Rng) -> usize {
        let mask = if coord == 0 { 2 } else { 1 };
        let s0 = s & !mask;
        let s1 = s | mask;
        let l0 = target.log_density(&[s0 as f64]);
        let l1 = target.log_density(&[s1 as f64]);
        let p1 = if l1 == f64::NEG_INFINITY { 0.0 } else { 1.0 / (1.0 + (l0 - l1).exp()) };
        if rng.random::<f64>() < p1 {
            s1
        } else {
            s0
        }
    }
}

impl Kernel for GibbsFinite {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        let x = state.position[0];
        if !((0.0..4.0).contains(&x) && x.fract() == 0.0) || target.dim() != 1 {
            return Err(KernelError::InvalidState(format!("{x} is not a four-state index")));
        }
        let mut s = x as usize;
        match self.scan {
            GibbsScan::Systematic => {
                s = Self::update(0, s, target, &mut state.rng);
                s = Self::update(1, s, target, &mut state.rng);
            }
            GibbsScan::RandomScan => {
                let c = state.rng.random_range(0..2);
                s = Self::update(c, s, target, &mut state.rng);
            }
        }
        state.position[0] = s as f64;
        state.log_density = target.log_density(&state.position);
        state.stats.record("gibbs", true);
        Ok(())
    }

    fn name(&self) -> String {
        match self.scan {
            GibbsScan::Systematic => "gibbs_systematic".into(),
            GibbsScan::RandomScan => "gibbs_random_scan".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::targets::make_four_state;

    #[test]
    fn uniform_target_systematic_is_uniform() {
        let t = make_four_state(0.25, 0.25, 0.25, 0.25).unwrap();
        let mut k = GibbsFinite::new(GibbsScan::Systematic);
        let mut s = ChainState::new(&t, &[0.0], stream(0, 0)).unwrap();
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            k.step(&mut s, &t).unwrap();
            counts[s.position[0] as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn random_scan_row_from_origin() {
        // exact row of ½(P1 + P2) from (0,0): conditionals of a = π(0,0)
        let (a, b) = (0.3, 0.2);
        let t = make_four_state(a, b, b, a).unwrap();
        let p_stay = a / (a + b);
        let want = [p_stay, 0.5 * (1.0 - p_stay), 0.5 * (1.0 - p_stay), 0.0];
        let mut k = GibbsFinite::new(GibbsScan::RandomScan);
        let n = 1_000_000;
        let mut counts = [0usize; 4];
        let mut s = ChainState::new(&t, &[0.0], stream(1, 0)).unwrap();
        for _ in 0..n {
            s.position[0] = 0.0;
            k.step(&mut s, &t).unwrap();
            counts[s.position[0] as usize] += 1;
        }
        for (c, w) in counts.iter().zip(want) {
            let f = *c as f64 / n as f64;
            let se = (w * (1.0 - w) / n as f64).sqrt();
            assert!((f - w).abs() <= 3.0 * se + 1e-12, "{f} vs {w}");
        }
    }
}
