//! Observational-equivalence classes and the teleport kernel.
//!
//! `K(θ)` is the set of parameters with the same likelihood as `θ`. The
//! teleport kernel `T(θ, ·)` draws from the target restricted to `K(θ)`.
//! For finite classes the draw is exact; for flat fibers it is a
//! hit-and-run move (affine slice) or a direct uniform draw (flat axis).
//!
//! Finite classes generated by an involution `f` are weighted by
//! `π(u)·|det Df(u)|^{-1/2}`. This reduces to `π(u)` for label switching and
//! the antipodal shift (volume preserving); for the MA(1) root flip in
//! `(θ, log σ)` coordinates it gives `π(θ, s)·|θ|`, which is what makes the
//! move leave the sampling-space density invariant.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::targets::{log_sum_exp, wrap_circle, Target};

/// Below this `|θ|` the MA(1) class is the singleton `{θ}`.
pub const MA1_FLIP_EPS: f64 = 1e-6;

pub const DEFAULT_INNER_STEPS: usize = 64;

fn default_inner_steps() -> usize {
    DEFAULT_INNER_STEPS
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquivalenceError {
    #[error("point {0:?} is outside the support")]
    OutsideSupport(Vec<f64>),
    #[error("every member of the class has zero density")]
    ZeroMass,
    #[error("structure {structure} needs dimension {want}, got {got}")]
    Dimension { structure: &'static str, want: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EquivalenceStructure {
    /// `K(θ) = {θ}`; teleporting is a no-op.
    Identity,
    /// Two-component mixture `(μ1, μ2, σ1, σ2, p) ↔ (μ2, μ1, σ2, σ1, 1−p)`.
    LabelSwitch,
    /// Partition of the states of a finite target.
    StatePartition { classes: Vec<Vec<usize>> },
    /// `θ ↔ θ + half_period` on a circle of circumference `2·half_period`.
    Antipodal { half_period: f64 },
    /// `(θ, s) ↔ (1/θ, s + ln|θ|)` with `s = log σ`.
    Ma1Flip,
    /// `{μ : Σ μ_i = s} ∩ [lo, hi]^k`.
    AffineSum {
        lo: f64,
        hi: f64,
        #[serde(default = "default_inner_steps")]
        inner_steps: usize,
    },
    /// `{θ : θ_j free in [−half_width, half_width]}` for `j = coord`.
    FlatY { coord: usize, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TeleportMode {
    #[default]
    Exact,
    Mtm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeleportConfig {
    #[serde(default)]
    pub mode: TeleportMode,
    #[serde(default = "default_tries")]
    pub mtm_tries: usize,
}

fn default_tries() -> usize {
    10
}

impl Default for TeleportConfig {
    fn default() -> Self {
        Self { mode: TeleportMode::Exact, mtm_tries: default_tries() }
    }
}

/// What `class_members` returns.
#[derive(Debug, Clone)]
pub enum ClassMembers<'a> {
    Finite(Vec<Vec<f64>>),
    Fiber(FiberSampler<'a>),
}

/// Draws (approximately, for the affine slice) uniform points on the fiber
/// through `anchor`.
#[derive(Debug, Clone)]
pub struct FiberSampler<'a> {
    structure: &'a EquivalenceStructure,
    anchor: Vec<f64>,
}

impl FiberSampler<'_> {
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = self.anchor.clone();
        self.structure.move_on_fiber(&mut x, rng);
        x
    }

    /// Whether `x` satisfies the fiber constraint through the anchor.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match *self.structure {
            EquivalenceStructure::AffineSum { lo, hi, .. } => {
                let s0: f64 = self.anchor.iter().sum();
                let s: f64 = x.iter().sum();
                (s - s0).abs() <= tol && x.iter().all(|v| *v >= lo && *v <= hi)
            }
            EquivalenceStructure::FlatY { coord, half_width } => x.iter().enumerate().all(|(i, v)| {
                if i == coord {
                    v.abs() <= half_width
                } else {
                    *v == self.anchor[i]
                }
            }),
            _ => false,
        }
    }
}

/// Result of one teleport move.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportOutcome {
    pub position: Vec<f64>,
    pub log_density: f64,
    /// The MTM proposal was accepted (always `true` for exact draws).
    pub accepted: bool,
    /// MTM found no candidate with positive weight and stayed put.
    pub degenerate: bool,
}

impl EquivalenceStructure {
    /// Family name of the structure.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Identity | Self::LabelSwitch | Self::StatePartition { .. } => "finite_map",
            Self::Antipodal { .. } => "antipodal_circle",
            Self::Ma1Flip => "ma1_flip",
            Self::AffineSum { .. } => "affine_sum_fiber",
            Self::FlatY { .. } => "flat_y_fiber",
        }
    }

    pub fn is_fiber(&self) -> bool {
        matches!(self, Self::AffineSum { .. } | Self::FlatY { .. })
    }

    pub fn check_dim(&self, dim: usize) -> Result<(), EquivalenceError> {
        let want = match self {
            Self::LabelSwitch => 5,
            Self::StatePartition { .. } | Self::Antipodal { .. } => 1,
            Self::Ma1Flip => 2,
            Self::FlatY { coord, .. } if *coord >= dim => coord + 1,
            _ => dim,
        };
        if want != dim {
            return Err(EquivalenceError::Dimension { structure: self.kind(), want, got: dim });
        }
        Ok(())
    }

    /// `K(θ)`: an explicit list (containing `θ` first) or a fiber sampler.
    pub fn class_members<'a>(&'a self, x: &[f64]) -> ClassMembers<'a> {
        match self {
            Self::Identity => ClassMembers::Finite(vec![x.to_vec()]),
            Self::LabelSwitch => {
                ClassMembers::Finite(vec![x.to_vec(), vec![x[1], x[0], x[3], x[2], 1.0 - x[4]]])
            }
            Self::StatePartition { classes } => {
                let s = x[0] as usize;
                let members = classes
                    .iter()
                    .find(|c| c.contains(&s))
                    .map(|c| {
                        let mut m: Vec<Vec<f64>> = vec![vec![s as f64]];
                        m.extend(c.iter().filter(|&&j| j != s).map(|&j| vec![j as f64]));
                        m
                    })
                    .unwrap_or_else(|| vec![vec![s as f64]]);
                ClassMembers::Finite(members)
            }
            Self::Antipodal { half_period } => {
                ClassMembers::Finite(vec![x.to_vec(), vec![wrap_circle(x[0] + half_period, *half_period)]])
            }
            Self::Ma1Flip => {
                if x[0].abs() < MA1_FLIP_EPS {
                    ClassMembers::Finite(vec![x.to_vec()])
                } else {
                    ClassMembers::Finite(vec![x.to_vec(), vec![1.0 / x[0], x[1] + x[0].abs().ln()]])
                }
            }
            Self::AffineSum { .. } | Self::FlatY { .. } => {
                ClassMembers::Fiber(FiberSampler { structure: self, anchor: x.to_vec() })
            }
        }
    }

    /// `−½ log|det Df(u)|` for the involution generating the class.
    pub fn log_volume_correction(&self, u: &[f64]) -> f64 {
        match self {
            Self::Ma1Flip if u[0].abs() >= MA1_FLIP_EPS => u[0].abs().ln(),
            _ => 0.0,
        }
    }

    fn member_log_weight(&self, target: &dyn Target, u: &[f64]) -> (f64, f64) {
        let lp = target.log_density(u);
        (lp, lp + self.log_volume_correction(u))
    }

    fn move_on_fiber<R: Rng + ?Sized>(&self, x: &mut [f64], rng: &mut R) {
        match *self {
            Self::AffineSum { lo, hi, inner_steps } => hit_and_run_sum(x, lo, hi, inner_steps, rng),
            Self::FlatY { coord, half_width } => {
                x[coord] = rng.random_range(-half_width..=half_width);
            }
            _ => {}
        }
    }

    /// Exact draw from `T(θ, ·)`.
    ///
    /// For the affine slice this is `inner_steps` hit-and-run moves, which
    /// leave the uniform law on the slice invariant.
    pub fn teleport_exact<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<TeleportOutcome, EquivalenceError> {
        if !target.support().contains(x) {
            return Err(EquivalenceError::OutsideSupport(x.to_vec()));
        }
        match self.class_members(x) {
            ClassMembers::Finite(members) => {
                let (lps, lws): (Vec<f64>, Vec<f64>) =
                    members.iter().map(|u| self.member_log_weight(target, u)).unzip();
                let j = sample_log_weights(&lws, rng).ok_or(EquivalenceError::ZeroMass)?;
                Ok(TeleportOutcome {
                    position: members[j].clone(),
                    log_density: lps[j],
                    accepted: true,
                    degenerate: false,
                })
            }
            ClassMembers::Fiber(f) => {
                let y = f.sample(rng);
                let lp = target.log_density(&y);
                Ok(TeleportOutcome { position: y, log_density: lp, accepted: true, degenerate: false })
            }
        }
    }

    /// One multiple-try Metropolis move within `K(θ)`.
    ///
    /// Candidates come from `r(·|θ)`: uniform over the members of a finite
    /// class, or the fiber sampler (treated as uniform, so `r` cancels).
    pub fn teleport_mtm<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        log_density: f64,
        target: &dyn Target,
        tries: usize,
        rng: &mut R,
    ) -> Result<TeleportOutcome, EquivalenceError> {
        if !target.support().contains(x) {
            return Err(EquivalenceError::OutsideSupport(x.to_vec()));
        }
        let tries = tries.max(1);
        let members = self.class_members(x);
        let draw = |rng: &mut R, anchor_members: &ClassMembers| -> Vec<f64> {
            match anchor_members {
                ClassMembers::Finite(m) => m[rng.random_range(0..m.len())].clone(),
                ClassMembers::Fiber(f) => f.sample(rng),
            }
        };
        let stay = |degenerate| TeleportOutcome {
            position: x.to_vec(),
            log_density,
            accepted: false,
            degenerate,
        };

        let mut fwd = Vec::with_capacity(tries);
        let mut fwd_lw = Vec::with_capacity(tries);
        let mut fwd_lp = Vec::with_capacity(tries);
        for _ in 0..tries {
            let u = draw(rng, &members);
            let (lp, lw) = self.member_log_weight(target, &u);
            fwd.push(u);
            fwd_lw.push(lw);
            fwd_lp.push(lp);
        }
        let Some(j) = sample_log_weights(&fwd_lw, rng) else {
            return Ok(stay(true));
        };
        let chosen = self.class_members(&fwd[j]);
        let mut bwd_lw = Vec::with_capacity(tries);
        bwd_lw.push(log_density + self.log_volume_correction(x));
        for _ in 1..tries {
            let v = draw(rng, &chosen);
            bwd_lw.push(self.member_log_weight(target, &v).1);
        }
        let log_ratio = log_sum_exp(&fwd_lw) - log_sum_exp(&bwd_lw);
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            Ok(TeleportOutcome {
                position: fwd.swap_remove(j),
                log_density: fwd_lp[j],
                accepted: true,
                degenerate: false,
            })
        } else {
            Ok(stay(false))
        }
    }

    pub fn teleport<R: Rng + ?Sized>(
        &self,
        config: &TeleportConfig,
        x: &[f64],
        log_density: f64,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<TeleportOutcome, EquivalenceError> {
        match config.mode {
            TeleportMode::Exact => self.teleport_exact(x, target, rng),
            TeleportMode::Mtm => self.teleport_mtm(x, log_density, target, config.mtm_tries, rng),
        }
    }
}

/// Index drawn with probability `∝ exp(lw)`; `None` if all are `−∞`.
pub fn sample_log_weights<R: Rng + ?Sized>(lw: &[f64], rng: &mut R) -> Option<usize> {
    if lw.len() == 1 {
        return lw[0].is_finite().then_some(0);
    }
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let total: f64 = lw.iter().map(|v| (v - m).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, v) in lw.iter().enumerate() {
        let w = (v - m).exp();
        if u < w {
            return Some(i);
        }
        u -= w;
    }
    lw.iter().rposition(|v| v.is_finite())
}

/// Hit-and-run on `{Σ x_i = const} ∩ [lo, hi]^k`: Gaussian directions
/// projected onto the sum-zero subspace, uniform position on the chord.
pub fn hit_and_run_sum<R: Rng + ?Sized>(x: &mut [f64], lo: f64, hi: f64, steps: usize, rng: &mut R) {
    let k = x.len();
    let mut d = vec![0.0; k];
    for _ in 0..steps {
        for v in d.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let m = d.iter().sum::<f64>() / k as f64;
        d.iter_mut().for_each(|v| *v -= m);
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for (xi, di) in x.iter().zip(&d) {
            if di.abs() < 1e-300 {
                continue;
            }
            let a = (lo - xi) / di;
            let b = (hi - xi) / di;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        if !(t1 > t0) {
            continue;
        }
        let t = t0 + (t1 - t0) * rng.random::<f64>();
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi = (*xi + t * di).clamp(lo, hi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::targets::{
        make_circle_bimodal, make_conditional_gaussian_loglik, make_four_state,
        make_ma1_log_posterior, make_mixture_gaussian_loglik, CylinderFlat, Ma1Prior, MixtureBounds,
    };
    use proptest::prelude::*;

    fn finite(m: ClassMembers) -> Vec<Vec<f64>> {
        match m {
            ClassMembers::Finite(v) => v,
            ClassMembers::Fiber(_) => panic!("expected a finite class"),
        }
    }

    #[test]
    fn circle_antipode() {
        let s = EquivalenceStructure::Antipodal { half_period: 20.0 };
        let m = finite(s.class_members(&[5.0]));
        assert_eq!(m[1], vec![-15.0]);
        assert_eq!(s.kind(), "antipodal_circle");
    }

    #[test]
    fn mixture_label_switch_member() {
        let m = finite(EquivalenceStructure::LabelSwitch.class_members(&[0.0, 20.0, 1.0, 5.0, 0.3]));
        assert_eq!(m[1], vec![20.0, 0.0, 5.0, 1.0, 0.7]);
    }

    #[test]
    fn ma1_flip_member() {
        let m = finite(EquivalenceStructure::Ma1Flip.class_members(&[0.5, 0.0]));
        assert!((m[1][0] - 2.0).abs() < 1e-15);
        assert!((m[1][1].exp() - 0.5).abs() < 1e-15);
        assert_eq!(finite(EquivalenceStructure::Ma1Flip.class_members(&[1e-7, 0.0])).len(), 1);
    }

    #[test]
    fn four_state_exact_teleport_is_half_half() {
        let t = make_four_state(0.49999, 0.00001, 0.00001, 0.49999).unwrap();
        let s = EquivalenceStructure::StatePartition { classes: vec![vec![0, 3], vec![1], vec![2]] };
        let mut r = stream(1, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| s.teleport_exact(&[0.0], &t, &mut r).unwrap().position[0] == 3.0).count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3);
        assert_eq!(s.teleport_exact(&[1.0], &t, &mut r).unwrap().position, vec![1.0]);
    }

    #[test]
    fn mixture_members_equally_likely() {
        let t = make_mixture_gaussian_loglik(vec![0.0, 1.0, 19.0], MixtureBounds::default()).unwrap();
        let mut r = stream(2, 0);
        let x = [0.0, 20.0, 1.0, 5.0, 0.3];
        let n = 40_000;
        let switched = (0..n)
            .filter(|_| EquivalenceStructure::LabelSwitch.teleport_exact(&x, &t, &mut r).unwrap().position[0] == 20.0)
            .count();
        assert!((switched as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn ma1_member_probabilities_follow_prior_and_volume() {
        let y = crate::targets::data::simulate_ma1(0.5, 1.0, 50, 3);
        let t = make_ma1_log_posterior(y, Ma1Prior::Gaussian).unwrap();
        let x = [2.0, 0.5f64.ln()];
        let (a, b) = ([2.0, 0.5f64.ln()], [0.5, 0.0]);
        // likelihood cancels; weight is prior × |θ|
        let wa = Ma1Prior::Gaussian.log_density(a[0], a[1]).exp() * 2.0;
        let wb = Ma1Prior::Gaussian.log_density(b[0], b[1]).exp() * 0.5;
        let want = wb / (wa + wb);
        let mut r = stream(3, 0);
        let n = 100_000;
        let flips = (0..n)
            .filter(|_| {
                let o = EquivalenceStructure::Ma1Flip.teleport_exact(&x, &t, &mut r).unwrap();
                (o.position[0] - 0.5).abs() < 1e-12
            })
            .count();
        let f = flips as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((f - want).abs() < 4.0 * se, "{f} vs {want}");
    }

    #[test]
    fn finite_teleport_is_reversible_and_preserves_pi() {
        let t = make_four_state(0.3, 0.15, 0.25, 0.3).unwrap();
        let s = EquivalenceStructure::StatePartition { classes: vec![vec![0, 3], vec![1, 2]] };
        // exact transition matrix from the member weights
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            let mem = finite(s.class_members(&[i as f64]));
            let z: f64 = mem.iter().map(|u| t.probs[u[0] as usize]).sum();
            for u in mem {
                row[u[0] as usize] += t.probs[u[0] as usize] / z;
            }
        }
        for j in 0..4 {
            let pj: f64 = (0..4).map(|i| t.probs[i] * m[i][j]).sum();
            assert!((pj - t.probs[j]).abs() < 1e-15);
            for i in 0..4 {
                assert!((t.probs[i] * m[i][j] - t.probs[j] * m[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mtm_flat_class_always_accepts() {
        let t = make_circle_bimodal(10.0, 2.0).unwrap();
        let s = EquivalenceStructure::Antipodal { half_period: 20.0 };
        let mut r = stream(4, 0);
        let x = [3.0];
        let lp = t.log_density(&x);
        for _ in 0..1000 {
            let o = s.teleport_mtm(&x, lp, &t, 5, &mut r).unwrap();
            assert!(o.accepted);
        }
    }

    #[test]
    fn mtm_single_try_is_mh() {
        // M = 1 on a 2-member class: propose uniform member, accept with the weight ratio
        let t = make_four_state(0.6, 0.1, 0.1, 0.2).unwrap();
        let s = EquivalenceStructure::StatePartition { classes: vec![vec![0, 3]] };
        let mut r = stream(5, 0);
        let n = 200_000;
        let lp = t.log_density(&[0.0]);
        let moved = (0..n).filter(|_| s.teleport_mtm(&[0.0], lp, &t, 1, &mut r).unwrap().position[0] == 3.0).count();
        // P(move) = ½ · min(1, 0.2 / 0.6)
        let want = 0.5 / 3.0;
        assert!((moved as f64 / n as f64 - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt());
    }

    #[test]
    fn zero_mass_class_is_an_error() {
        let t = make_four_state(0.5, 0.0, 0.5, 0.0).unwrap();
        let s = EquivalenceStructure::Identity;
        assert!(s.teleport_exact(&[1.0], &t, &mut stream(0, 0)).is_err());
        assert!(s.teleport_exact(&[7.0], &t, &mut stream(0, 0)).is_err());
    }

    #[test]
    fn class_dimension_checks() {
        assert!(EquivalenceStructure::LabelSwitch.check_dim(5).is_ok());
        assert!(EquivalenceStructure::Ma1Flip.check_dim(3).is_err());
        assert!(EquivalenceStructure::FlatY { coord: 2, half_width: 1.0 }.check_dim(2).is_err());
    }

    proptest! {
        #[test]
        fn finite_classing_is_idempotent(
            theta in prop_oneof![-4.0..-0.01f64, 0.01..4.0f64], s in -2.0..2.0f64,
            c in -19.9..19.9f64,
        ) {
            for (st, x) in [
                (EquivalenceStructure::Ma1Flip, vec![theta, s]),
                (EquivalenceStructure::Antipodal { half_period: 20.0 }, vec![c]),
                (EquivalenceStructure::LabelSwitch, vec![theta, s, 1.0, 2.0, 0.3]),
            ] {
                let k = finite(st.class_members(&x));
                for u in &k {
                    let k2 = finite(st.class_members(u));
                    prop_assert_eq!(k2.len(), k.len());
                    for v in &k2 {
                        prop_assert!(k.iter().any(|w| w.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-9)));
                    }
                }
            }
        }

        #[test]
        fn affine_fiber_membership(mu in proptest::collection::vec(-9.5..9.5f64, 10), seed in 0u64..1000) {
            let t = make_conditional_gaussian_loglik(&[1.0], 10).unwrap();
            let st = EquivalenceStructure::AffineSum { lo: -10.0, hi: 10.0, inner_steps: 64 };
            let o = st.teleport_exact(&mu, &t, &mut stream(seed, 0)).unwrap();
            let s0: f64 = mu.iter().sum();
            let s1: f64 = o.position.iter().sum();
            prop_assert!((s0 - s1).abs() <= 1e-10);
            prop_assert!(o.position.iter().all(|v| v.abs() <= 10.0));
            prop_assert!((o.log_density - t.log_density(&mu)).abs() < 1e-8);
        }

        #[test]
        fn flat_y_membership(x in -4.0..4.0f64, y in -10.0..10.0f64, seed in 0u64..1000) {
            let t = CylinderFlat::gaussian(10.0, 4.0).unwrap();
            let st = EquivalenceStructure::FlatY { coord: 1, half_width: 10.0 };
            let o = st.teleport_exact(&[x, y], &t, &mut stream(seed, 0)).unwrap();
            prop_assert_eq!(o.position[0], x);
            prop_assert!(o.position[1].abs() <= 10.0);
        }
    }
}
