use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hmc::{kinetic, leapfrog};
use super::{ChainState, DualAveraging, Kernel, KernelError};
use crate::targets::{log_sum_exp, Target};

/// Energy error above which a trajectory is declared divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

/// No-U-Turn sampler with multinomial selection.
///
/// The trajectory doubles in a random direction until the generalized
/// U-turn criterion fires on the whole tree or any subtree, a subtree
/// diverges, or `max_depth` doublings are reached. The new state is drawn
/// within each subtree with probability proportional to `exp(−H)`, and
/// between the old tree and a new subtree with the biased progressive rule.
/// The step size is tuned by dual averaging during warmup.
#[derive(Debug, Clone)]
pub struct Nuts {
    pub max_depth: usize,
    pub target_accept: f64,
    step_size: f64,
    initial: Option<f64>,
    adapt: Option<DualAveraging>,
    adapting: bool,
    /// Mean acceptance statistic of the last transition.
    pub last_accept_stat: f64,
    pub last_depth: usize,
}

#[derive(Debug, Clone)]
struct Point {
    x: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    lp: f64,
}

struct Subtree {
    left: Point,
    right: Point,
    proposal: Point,
    log_w: f64,
    rho: Vec<f64>,
    accept_sum: f64,
    n_leapfrog: usize,
    diverged: bool,
    turning: bool,
}

fn no_u_turn(rho: &[f64], p_left: &[f64], p_right: &[f64]) -> bool {
    let a: f64 = rho.iter().zip(p_left).map(|(r, p)| r * p).sum();
    let b: f64 = rho.iter().zip(p_right).map(|(r, p)| r * p).sum();
    a > 0.0 && b > 0.0
}

impl Nuts {
    pub fn new(step_size: Option<f64>, max_depth: usize, target_accept: f64) -> Self {
        Self {
            max_depth,
            target_accept,
            step_size: step_size.unwrap_or(0.1),
            initial: step_size,
            adapt: None,
            adapting: false,
            last_accept_stat: 0.0,
            last_depth: 0,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// Doubles or halves `ε` until the one-step acceptance crosses ½.
    fn reasonable_step_size(&self, state: &mut ChainState, target: &dyn Target) -> f64 {
        let d = state.position.len();
        let mut g = vec![0.0; d];
        target.grad_log_density(&state.position, &mut g);
        let p: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut state.rng)).collect();
        let h0 = -state.log_density + kinetic(&p, 1.0);
        let log_accept = |eps: f64| {
            let o = leapfrog(target, &state.position, &p, &g, eps, 1, 1.0);
            if o.diverged {
                f64::NEG_INFINITY
            } else {
                h0 - (-o.log_density + kinetic(&o.momentum, 1.0))
            }
        };
        let mut eps = 1.0;
        let up = log_accept(eps) > 0.5f64.ln();
        for _ in 0..50 {
            let la = log_accept(eps);
            if up != (la > 0.5f64.ln()) {
                break;
            }
            eps = if up { eps * 2.0 } else { eps * 0.5 };
        }
        eps
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &self,
        target: &dyn Target,
        start: &Point,
        dir: f64,
        depth: usize,
        h0: f64,
        rng: &mut impl Rng,
    ) -> Subtree {
        if depth == 0 {
            let o = leapfrog(target, &start.x, &start.p, &start.g, dir * self.step_size, 1, 1.0);
            let h = if o.diverged { f64::INFINITY } else { -o.log_density + kinetic(&o.momentum, 1.0) };
            let diverged = !(h - h0 <= MAX_DELTA_H);
            let log_w = if diverged { f64::NEG_INFINITY } else { h0 - h };
            let pt = Point { x: o.position, p: o.momentum, g: o.gradient, lp: o.log_density };
            return Subtree {
                left: pt.clone(),
                right: pt.clone(),
                rho: pt.p.clone(),
                proposal: pt,
                log_w,
                accept_sum: if diverged { 0.0 } else { (h0 - h).min(0.0).exp() },
                n_leapfrog: 1,
                diverged,
                turning: false,
            };
        }
        let first = self.build(target, start, dir, depth - 1, h0, rng);
        if first.diverged || first.turning {
            return first;
        }
        let edge = if dir > 0.0 { &first.right } else { &first.left };
        let second = self.build(target, &edge.clone(), dir, depth - 1, h0, rng);
        let mut t = first;
        t.n_leapfrog += second.n_leapfrog;
        t.accept_sum += second.accept_sum;
        if second.diverged || second.turning {
            t.diverged |= second.diverged;
            t.turning |= second.turning;
            return t;
        }
        let log_w = log_sum_exp(&[t.log_w, second.log_w]);
        if rng.random::<f64>().ln() < second.log_w - log_w {
            t.proposal = second.proposal;
        }
        t.log_w = log_w;
        for (r, s) in t.rho.iter_mut().zip(&second.rho) {
            *r += s;
        }
        if dir > 0.0 {
            t.right = second.right;
        } else {
            t.left = second.left;
        }
        t.turning = !no_u_turn(&t.rho, &t.left.p, &t.right.p);
        t
    }
}

impl Kernel for Nuts {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        if !state.log_density.is_finite() {
            return Err(KernelError::InvalidState(format!("log density {} at {:?}", state.log_density, state.position)));
        }
        if self.adapting && self.adapt.is_none() {
            let eps0 = self.initial.unwrap_or_else(|| self.reasonable_step_size(state, target));
            self.step_size = eps0;
            self.adapt = Some(DualAveraging::new(eps0, self.target_accept));
        }
        let d = state.position.len();
        let mut g = vec![0.0; d];
        target.grad_log_density(&state.position, &mut g);
        let p: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut state.rng)).collect();
        let h0 = -state.log_density + kinetic(&p, 1.0);
        let root = Point { x: state.position.clone(), p, g, lp: state.log_density };
        let mut left = root.clone();
        let mut right = root.clone();
        let mut proposal = root.clone();
        let mut rho = root.p.clone();
        let mut log_w = 0.0;
        let mut accept_sum = 0.0;
        let mut n_leapfrog = 0usize;
        let mut diverged = false;
        let mut depth = 0;

        for j in 0..self.max_depth.max(1) {
            depth = j + 1;
            let dir = if state.rng.random::<bool>() { 1.0 } else { -1.0 };
            let edge = if dir > 0.0 { right.clone() } else { left.clone() };
            let sub = self.build(target, &edge, dir, j, h0, &mut state.rng);
            accept_sum += sub.accept_sum;
            n_leapfrog += sub.n_leapfrog;
            if sub.diverged {
                diverged = true;
                break;
            }
            if sub.turning {
                break;
            }
            if state.rng.random::<f64>().ln() < sub.log_w - log_w {
                proposal = sub.proposal;
            }
            log_w = log_sum_exp(&[log_w, sub.log_w]);
            for (r, s) in rho.iter_mut().zip(&sub.rho) {
                *r += s;
            }
            if dir > 0.0 {
                right = sub.right;
            } else {
                left = sub.left;
            }
            if !no_u_turn(&rho, &left.p, &right.p) {
                break;
            }
        }

        if diverged {
            state.stats.divergences += 1;
        }
        let moved = proposal.x != state.position;
        state.position = proposal.x;
        state.log_density = proposal.lp;
        self.last_accept_stat = if n_leapfrog > 0 { accept_sum / n_leapfrog as f64 } else { 0.0 };
        self.last_depth = depth;
        state.stats.record("nuts", moved);
        if self.adapting {
            if let Some(da) = self.adapt.as_mut() {
                da.update(self.last_accept_stat);
                self.step_size = da.step_size();
            }
        }
        Ok(())
    }

    fn set_warmup(&mut self, warmup: bool) {
        if self.adapting && !warmup {
            if let Some(da) = &self.adapt {
                self.step_size = da.final_step_size();
            }
        }
        self.adapting = warmup;
    }

    fn name(&self) -> String {
        format!("nuts(eps={}, max_depth={})", self.step_size, self.max_depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{run_kernel, RunSettings};
    use crate::targets::StandardGaussian;

    #[test]
    fn depth_zero_is_one_leapfrog() {
        let t = StandardGaussian::new(1);
        let mut k = Nuts::new(Some(0.2), 0, 0.8);
        let mut s = ChainState::new(&t, &[0.5], crate::rng::stream(0, 0)).unwrap();
        k.step(&mut s, &t).unwrap();
        assert_eq!(k.last_depth, 1);
    }

    #[test]
    fn acceptance_statistic_in_corridor() {
        let t = StandardGaussian::new(2);
        let mut k = Nuts::new(None, 10, 0.8);
        let run = run_kernel(&mut k, &t, &[0.1, 0.1], &RunSettings::new(1, 1000, 1, 5)).unwrap();
        assert_eq!(run.len(), 1);
        let mut s = ChainState::new(&t, &[0.1, 0.1], crate::rng::stream(5, 9)).unwrap();
        let n = 2000;
        let mean: f64 = (0..n)
            .map(|_| {
                k.step(&mut s, &t).unwrap();
                k.last_accept_stat
            })
            .sum::<f64>()
            / n as f64;
        assert!((0.7..=0.9).contains(&mean), "{mean}");
    }

    #[test]
    fn gaussian_moments() {
        let t = StandardGaussian::new(1);
        let mut k = Nuts::new(None, 10, 0.8);
        let run = run_kernel(&mut k, &t, &[0.0], &RunSettings::new(20_000, 1000, 1, 6)).unwrap();
        let x = run.column(0);
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        assert!(m.abs() < 0.03, "{m}");
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }
}
