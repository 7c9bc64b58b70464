/// One Robbins–Monro update of a log step scale:
/// `log s ← log s + t^{-0.6} (α̂ − target)`.
pub fn adapt_scale(log_scale: f64, t: u64, alpha_hat: f64, target_rate: f64) -> f64 {
    let gamma = (t.max(1) as f64).powf(-0.6);
    log_scale + gamma * (alpha_hat - target_rate)
}

/// Robbins–Monro scale adaptation, active only during warmup.
#[derive(Debug, Clone)]
pub struct RobbinsMonro {
    pub target: f64,
    pub log_scale: f64,
    t: u64,
    active: bool,
}

impl RobbinsMonro {
    pub fn new(scale: f64, target: f64) -> Self {
        Self { target, log_scale: scale.ln(), t: 0, active: false }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn set_active(&mut self, active: bool) {
        self.active = active;
    }

    pub fn update(&mut self, alpha: f64) {
        if self.active {
            self.t += 1;
            self.log_scale = adapt_scale(self.log_scale, self.t, alpha, self.target);
        }
    }
}

/// Dual-averaging step-size adaptation (Nesterov / Hoffman–Gelman).
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    m: u64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target: f64) -> Self {
        Self { target, mu: (10.0 * eps0).ln(), h_bar: 0.0, log_eps: eps0.ln(), log_eps_bar: 0.0, m: 0 }
    }

    /// Current (adapting) step size.
    pub fn step_size(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Averaged step size to use once adaptation stops.
    pub fn final_step_size(&self) -> f64 {
        if self.m == 0 {
            self.log_eps.exp()
        } else {
            self.log_eps_bar.exp()
        }
    }

    pub fn update(&mut self, accept_stat: f64) {
        self.m += 1;
        let m = self.m as f64;
        let eta = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        self.log_eps = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let x = m.powf(-Self::KAPPA);
        self.log_eps_bar = x * self.log_eps + (1.0 - x) * self.log_eps_bar;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_grows_when_always_accepting() {
        let mut s = 0.0;
        for t in 1..100 {
            let next = adapt_scale(s, t, 1.0, 0.234);
            assert!(next > s);
            s = next;
        }
    }

    #[test]
    fn fixed_point_at_target() {
        assert_eq!(adapt_scale(0.3, 17, 0.234, 0.234), 0.3);
    }

    #[test]
    fn frozen_when_inactive() {
        let mut rm = RobbinsMonro::new(2.0, 0.3);
        rm.update(1.0);
        assert_eq!(rm.scale(), 2.0);
    }

    #[test]
    fn dual_averaging_shrinks_on_low_acceptance() {
        let mut da = DualAveraging::new(1.0, 0.8);
        for _ in 0..50 {
            da.update(0.1);
        }
        assert!(da.final_step_size() < 1.0);
    }
}
