use rand_distr::{Distribution, StandardNormal};

use super::{mh_accept, ChainState, Kernel, KernelError};
use crate::targets::{Support, Target};

/// End point of a leapfrog trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogOutcome {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub gradient: Vec<f64>,
    pub log_density: f64,
    /// A non-finite density or gradient was met; the rest of the
    /// trajectory was abandoned.
    pub diverged: bool,
}

/// Reflects `x` into the box (if any) and flips the matching momentum
/// components; wraps circle coordinates.
pub(crate) fn enforce_support(support: &Support, x: &mut [f64], p: &mut [f64]) {
    match support {
        Support::Box { lo, hi } => {
            for i in 0..x.len() {
                let (l, h) = (lo[i], hi[i]);
                let mut guard = 0;
                while (x[i] < l || x[i] > h) && guard < 64 {
                    if x[i] < l {
                        x[i] = 2.0 * l - x[i];
                    } else {
                        x[i] = 2.0 * h - x[i];
                    }
                    p[i] = -p[i];
                    guard += 1;
                }
                x[i] = x[i].clamp(l, h);
            }
        }
        Support::Circle { .. } => support.canonicalize(x),
        _ => {}
    }
}

/// `steps` leapfrog steps of size `eps` with kinetic energy
/// `|p|² / (2σ²)`: a half momentum step, alternating full steps, and a
/// closing half step. `grad` is `∇ log π` at `x`.
pub fn leapfrog(
    target: &dyn Target,
    x: &[f64],
    p: &[f64],
    grad: &[f64],
    eps: f64,
    steps: usize,
    mass_sigma: f64,
) -> LeapfrogOutcome {
    let inv_m = 1.0 / (mass_sigma * mass_sigma);
    let mut x = x.to_vec();
    let mut p = p.to_vec();
    let mut g = grad.to_vec();
    let mut lp = f64::NAN;
    let support = target.support();
    for (pi, gi) in p.iter_mut().zip(&g) {
        *pi += 0.5 * eps * gi;
    }
    for s in 0..steps {
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += eps * inv_m * pi;
        }
        enforce_support(support, &mut x, &mut p);
        lp = target.grad_log_density(&x, &mut g);
        if !lp.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return LeapfrogOutcome { position: x, momentum: p, gradient: g, log_density: lp, diverged: true };
        }
        let w = if s + 1 == steps { 0.5 } else { 1.0 };
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += w * eps * gi;
        }
    }
    LeapfrogOutcome { position: x, momentum: p, gradient: g, log_density: lp, diverged: false }
}

pub(crate) fn kinetic(p: &[f64], mass_sigma: f64) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>() / (mass_sigma * mass_sigma)
}

/// Hamiltonian Monte Carlo with a fixed step size and trajectory length.
#[derive(Debug, Clone)]
pub struct Hmc {
    pub step_size: f64,
    pub leapfrog: usize,
    pub mass_sigma: f64,
    /// `H(end) − H(start)` of the last proposal.
    pub last_delta_h: f64,
    grad: Vec<f64>,
}

impl Hmc {
    pub fn new(step_size: f64, leapfrog: usize, mass_sigma: f64) -> Self {
        Self { step_size, leapfrog, mass_sigma, last_delta_h: 0.0, grad: Vec::new() }
    }
}

impl Kernel for Hmc {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        if !state.log_density.is_finite() {
            return Err(KernelError::InvalidState(format!("log density {} at {:?}", state.log_density, state.position)));
        }
        let d = state.position.len();
        self.grad.resize(d, 0.0);
        target.grad_log_density(&state.position, &mut self.grad);
        let p0: Vec<f64> = (0..d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut state.rng);
                self.mass_sigma * z
            })
            .collect();
        let h0 = -state.log_density + kinetic(&p0, self.mass_sigma);
        let out = leapfrog(target, &state.position, &p0, &self.grad, self.step_size, self.leapfrog, self.mass_sigma);
        if out.diverged {
            state.stats.divergences += 1;
            state.stats.record("hmc", false);
            self.last_delta_h = f64::INFINITY;
            return Ok(());
        }
        let h1 = -out.log_density + kinetic(&out.momentum, self.mass_sigma);
        self.last_delta_h = h1 - h0;
        let accepted = mh_accept(h0 - h1, &mut state.rng);
        if accepted {
            state.position = out.position;
            state.log_density = out.log_density;
        }
        state.stats.record("hmc", accepted);
        Ok(())
    }

    fn name(&self) -> String {
        format!("hmc(eps={}, L={})", self.step_size, self.leapfrog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::targets::{BoxUniform, StandardGaussian};

    #[test]
    fn hand_leapfrog_arithmetic() {
        let t = StandardGaussian::new(1);
        let out = leapfrog(&t, &[1.0], &[0.0], &[-1.0], 0.1, 1, 1.0);
        assert!((out.position[0] - 0.995).abs() < 1e-15);
        assert!((out.momentum[0] - (-0.09975)).abs() < 1e-15);
    }

    #[test]
    fn tiny_step_accepts() {
        let t = StandardGaussian::new(2);
        let mut k = Hmc::new(1e-9, 5, 1.0);
        let mut s = ChainState::new(&t, &[0.3, -0.2], stream(0, 0)).unwrap();
        for _ in 0..100 {
            k.step(&mut s, &t).unwrap();
            assert!(k.last_delta_h.abs() < 1e-12);
        }
        assert_eq!(s.stats.counters["hmc"].accepted, 100);
    }

    #[test]
    fn energy_error_is_second_order() {
        let t = StandardGaussian::new(1);
        // fixed integration time ε·L = 1
        let mean_abs_dh = |eps: f64| {
            let mut k = Hmc::new(eps, (1.0 / eps).round() as usize, 1.0);
            let mut s = ChainState::new(&t, &[0.0], stream(9, 0)).unwrap();
            let n = 10_000;
            (0..n)
                .map(|_| {
                    k.step(&mut s, &t).unwrap();
                    k.last_delta_h.abs()
                })
                .sum::<f64>()
                / n as f64
        };
        let a = mean_abs_dh(0.1);
        let b = mean_abs_dh(0.05);
        assert!(a <= 5e-3, "{a}");
        let ratio = a / b;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn reflection_keeps_box() {
        let t = BoxUniform::cube(2, 0.0, 1.0);
        let mut k = Hmc::new(0.7, 7, 1.0);
        let mut s = ChainState::new(&t, &[0.5, 0.5], stream(3, 0)).unwrap();
        for _ in 0..1000 {
            k.step(&mut s, &t).unwrap();
            assert!(s.position.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // flat target, reflection is energy conserving: always accepted
        assert_eq!(s.stats.counters["hmc"].accepted, 1000);
    }
}
