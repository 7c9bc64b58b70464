//! Likelihood-tempered sequential Monte Carlo.
//!
//! Particles move from the initial cloud to the posterior along
//! `π_t ∝ prior × L^{λ_t}`. Each stage reweights by `L^{λ_t − λ_{t−1}}`,
//! resamples systematically when the ESS falls below the threshold, and
//! applies one random-walk Metropolis step per particle.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, stream_id, ChainRng};
use crate::targets::log_sum_exp;

const INIT_STREAM: u64 = 1 << 40;
const RESAMPLE_STREAM: u64 = 1 << 41;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmcError {
    #[error("every particle has zero weight at stage {stage}")]
    Degenerate { stage: usize },
    #[error("tempering schedule must rise strictly from 0 to 1: {0}")]
    Schedule(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// A weighted particle population at one tempering level.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub dim: usize,
    /// Row-major `N × dim`.
    pub particles: Vec<f64>,
    pub log_weights: Vec<f64>,
    /// Cached log-likelihood per particle.
    pub log_lik: Vec<f64>,
    pub lambda: f64,
    pub stage: usize,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.particles.chunks_exact(self.dim).map(|p| p[j]).collect()
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let z = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|w| (w - z).exp()).collect()
    }

    /// `1 / Σ w_i²` of the normalized weights.
    pub fn ess(&self) -> f64 {
        1.0 / self.normalized_weights().iter().map(|w| w * w).sum::<f64>()
    }

    pub fn weighted_mean(&self, j: usize) -> f64 {
        self.normalized_weights().iter().zip(self.particles.chunks_exact(self.dim)).map(|(w, p)| w * p[j]).sum()
    }

    pub fn weighted_variance(&self, j: usize) -> f64 {
        let m = self.weighted_mean(j);
        self.normalized_weights()
            .iter()
            .zip(self.particles.chunks_exact(self.dim))
            .map(|(w, p)| w * (p[j] - m).powi(2))
            .sum()
    }

    /// Unweighted sample standard deviation of coordinate `j`.
    pub fn particle_sd(&self, j: usize) -> f64 {
        let c = self.column(j);
        let n = c.len() as f64;
        let m = c.iter().sum::<f64>() / n;
        (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
    }

    /// Systematic resampling; weights are reset to equal.
    pub fn resample_systematic<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let idx = systematic_indices(&self.normalized_weights(), rng);
        let mut particles = Vec::with_capacity(self.particles.len());
        let mut log_lik = Vec::with_capacity(idx.len());
        for &i in &idx {
            particles.extend_from_slice(self.particle(i));
            log_lik.push(self.log_lik[i]);
        }
        self.particles = particles;
        self.log_lik = log_lik;
        self.log_weights = vec![0.0; idx.len()];
    }

    /// CSV with the parameter columns and a final `weight` column of
    /// normalized weights.
    pub fn write_csv<W: std::io::Write>(&self, names: &[String], w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
        header.push("weight");
        wr.write_record(&header)?;
        for (p, wt) in self.particles.chunks_exact(self.dim).zip(self.normalized_weights()) {
            let mut rec: Vec<String> = p.iter().map(f64::to_string).collect();
            rec.push(wt.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Indices drawn by systematic resampling with one uniform offset.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let u = u0 + i as f64 / n as f64;
        while u > cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

/// Adds `dλ · log L` to every log-weight.
pub fn reweight(system: &mut ParticleSystem, dlambda: f64) {
    if dlambda == 0.0 {
        return;
    }
    for (w, l) in system.log_weights.iter_mut().zip(&system.log_lik) {
        *w += dlambda * l;
    }
}

/// `n` equally spaced stages: `λ_t = t / n`, `t = 0..=n`.
pub fn linear_schedule(stages: usize) -> Vec<f64> {
    (0..=stages).map(|t| t as f64 / stages as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub n_particles: usize,
    /// Tempering levels starting at 0 and ending at 1.
    pub schedule: Vec<f64>,
    /// Resample when `ESS < threshold · N`.
    #[serde(default = "default_threshold")]
    pub ess_threshold: f64,
    /// Initial random-walk scale relative to the particle SD; defaults
    /// to `2.38/√d`.
    #[serde(default)]
    pub initial_scale: Option<f64>,
    /// Target acceptance rate of the scale adaptation.
    #[serde(default = "default_target_accept")]
    pub target_accept: f64,
    pub seed: u64,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_target_accept() -> f64 {
    0.25
}

impl SmcConfig {
    pub fn new(n_particles: usize, stages: usize, seed: u64) -> Self {
        Self {
            n_particles,
            schedule: linear_schedule(stages),
            ess_threshold: default_threshold(),
            initial_scale: None,
            target_accept: default_target_accept(),
            seed,
        }
    }

    fn validate(&self) -> Result<(), SmcError> {
        if self.n_particles == 0 {
            return Err(SmcError::Config("n_particles must be positive".into()));
        }
        let s = &self.schedule;
        if s.len() < 2 || s[0] != 0.0 || *s.last().unwrap() != 1.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SmcError::Schedule(format!("{s:?}")));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(SmcError::Config(format!("ess_threshold {} not in (0, 1]", self.ess_threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub lambda: f64,
    /// ESS after reweighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    pub acceptance: f64,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct SmcResult {
    pub history: Vec<StageSummary>,
    pub particles: ParticleSystem,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(feature = "parallel")]
fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Runs the tempered sampler.
///
/// `init` draws one starting particle from its RNG; initial weights are
/// equal, so the starting cloud plays the role of the prior sample.
/// `log_prior` must be `−∞` outside the support.
pub fn smc_run<L, P, I>(log_lik: &L, log_prior: &P, init: &I, dim: usize, config: &SmcConfig) -> Result<SmcResult, SmcError>
where
    L: Fn(&[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> f64 + Sync,
    I: Fn(&mut ChainRng) -> Vec<f64> + Sync,
{
    config.validate()?;
    let n = config.n_particles;
    let seed = config.seed;
    let starts: Vec<(Vec<f64>, f64)> = par_map(n, |i| {
        let x = init(&mut stream(seed, stream_id(INIT_STREAM, i as u64)));
        let l = log_lik(&x);
        (x, l)
    });
    let mut particles = Vec::with_capacity(n * dim);
    let mut lls = Vec::with_capacity(n);
    for (x, l) in starts {
        if x.len() != dim {
            return Err(SmcError::Config(format!("initial particle has {} coordinates, expected {dim}", x.len())));
        }
        particles.extend(x);
        lls.push(l);
    }
    let mut sys = ParticleSystem { dim, particles, log_weights: vec![0.0; n], log_lik: lls, lambda: 0.0, stage: 0 };
    let mut scale = config.initial_scale.unwrap_or(2.38 / (dim as f64).sqrt());
    let mut history = Vec::with_capacity(config.schedule.len() - 1);
    let mut resample_rng = stream(seed, stream_id(RESAMPLE_STREAM, 0));

    for (t, w) in config.schedule.windows(2).enumerate() {
        let stage = t + 1;
        let lambda = w[1];
        reweight(&mut sys, lambda - w[0]);
        if sys.log_weights.iter().all(|v| *v == f64::NEG_INFINITY || v.is_nan()) {
            return Err(SmcError::Degenerate { stage });
        }
        // NaN weights count as zero
        for v in sys.log_weights.iter_mut().filter(|v| v.is_nan()) {
            *v = f64::NEG_INFINITY;
        }
        sys.lambda = lambda;
        sys.stage = stage;
        let ess = sys.ess();
        let resampled = ess < config.ess_threshold * n as f64;
        if resampled {
            sys.resample_systematic(&mut resample_rng);
        }

        let sd: Vec<f64> = (0..dim).map(|j| sys.weighted_variance(j).sqrt().max(1e-12)).collect();
        let step: Vec<f64> = sd.iter().map(|s| scale * s).collect();
        let moved: Vec<(bool, Vec<f64>, f64)> = par_map(n, |i| {
            let mut rng = stream(seed, stream_id(stage as u64, i as u64));
            let x = sys.particle(i);
            let y: Vec<f64> = x
                .iter()
                .zip(&step)
                .map(|(xi, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    xi + s * z
                })
                .collect();
            let lp_y = log_prior(&y);
            if lp_y == f64::NEG_INFINITY {
                return (false, Vec::new(), 0.0);
            }
            let ll_y = log_lik(&y);
            let log_ratio = lp_y + lambda * ll_y - log_prior(x) - lambda * sys.log_lik[i];
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                (true, y, ll_y)
            } else {
                (false, Vec::new(), 0.0)
            }
        });
        let mut accepted = 0usize;
        for (i, (acc, y, ll)) in moved.into_iter().enumerate() {
            if acc {
                accepted += 1;
                sys.particles[i * dim..(i + 1) * dim].copy_from_slice(&y);
                sys.log_lik[i] = ll;
            }
        }
        let acceptance = accepted as f64 / n as f64;
        history.push(StageSummary { stage, lambda, ess, resampled, acceptance, scale });
        scale *= 0.95 + 0.10 * logistic(16.0 * (acceptance - config.target_accept));
    }
    Ok(SmcResult { history, particles: sys })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_box(lo: f64, hi: f64) -> impl Fn(&[f64]) -> f64 + Sync {
        move |x: &[f64]| if x.iter().all(|v| *v >= lo && *v <= hi) { 0.0 } else { f64::NEG_INFINITY }
    }

    fn system(weights: Vec<f64>, xs: Vec<f64>) -> ParticleSystem {
        let n = xs.len();
        ParticleSystem { dim: 1, particles: xs, log_weights: weights, log_lik: vec![-1.0; n], lambda: 0.0, stage: 0 }
    }

    #[test]
    fn zero_increment_leaves_weights() {
        let mut s = system(vec![0.1, -0.3, 2.0], vec![0.0, 1.0, 2.0]);
        let before = s.log_weights.clone();
        reweight(&mut s, 0.0);
        assert_eq!(s.log_weights, before);
    }

    #[test]
    fn equal_weights_full_ess() {
        let s = system(vec![3.0; 1000], vec![0.0; 1000]);
        assert!((s.ess() - 1000.0).abs() < 1e-9);
        let w: f64 = s.normalized_weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn resampling_restores_ess_and_mean() {
        let mut r = stream(1, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let lw: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        let mut s = system(lw, xs);
        let before = s.weighted_mean(0);
        // bootstrap SE of the weighted mean
        let w = s.normalized_weights();
        let se = w.iter().zip(&s.particles).map(|(w, x)| w * w * (x - before).powi(2)).sum::<f64>().sqrt();
        s.resample_systematic(&mut r);
        assert!((s.ess() - n as f64).abs() < 1e-6);
        assert!((s.weighted_mean(0) - before).abs() <= 3.0 * se.max(1.0 / n as f64), "{} vs {before}", s.weighted_mean(0));
    }

    #[test]
    fn systematic_respects_point_masses() {
        let idx = systematic_indices(&[0.0, 1.0, 0.0], &mut stream(0, 0));
        assert_eq!(idx, vec![1, 1, 1]);
        let idx = systematic_indices(&[0.5, 0.5], &mut stream(0, 0));
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn gaussian_likelihood_flat_prior() {
        let lik = |x: &[f64]| -0.5 * x[0] * x[0];
        let prior = flat_box(-8.0, 8.0);
        let init = |r: &mut ChainRng| vec![r.random_range(-8.0..8.0)];
        let res = smc_run(&lik, &prior, &init, 1, &SmcConfig::new(5000, 20, 3)).unwrap();
        let p = &res.particles;
        assert_eq!(p.lambda, 1.0);
        assert_eq!(res.history.len(), 20);
        assert!(res.history.windows(2).all(|w| w[1].lambda > w[0].lambda));
        assert!(p.weighted_mean(0).abs() < 0.05, "{}", p.weighted_mean(0));
        assert!((p.weighted_variance(0) - 1.0).abs() < 0.1, "{}", p.weighted_variance(0));
    }

    #[test]
    fn deterministic_given_seed() {
        let lik = |x: &[f64]| -0.5 * (x[0] - 1.0).powi(2);
        let prior = flat_box(-5.0, 5.0);
        let init = |r: &mut ChainRng| vec![r.random_range(-5.0..5.0)];
        let a = smc_run(&lik, &prior, &init, 1, &SmcConfig::new(500, 5, 9)).unwrap();
        let b = smc_run(&lik, &prior, &init, 1, &SmcConfig::new(500, 5, 9)).unwrap();
        assert_eq!(a.particles, b.particles);
    }

    #[test]
    fn degenerate_likelihood_aborts() {
        let lik = |_: &[f64]| f64::NEG_INFINITY;
        let prior = flat_box(-1.0, 1.0);
        let init = |_: &mut ChainRng| vec![0.0];
        assert_eq!(
            smc_run(&lik, &prior, &init, 1, &SmcConfig::new(10, 4, 0)).unwrap_err(),
            SmcError::Degenerate { stage: 1 }
        );
    }

    #[test]
    fn schedule_validation() {
        let lik = |_: &[f64]| 0.0;
        let prior = flat_box(-1.0, 1.0);
        let init = |_: &mut ChainRng| vec![0.0];
        let mut c = SmcConfig::new(10, 4, 0);
        c.schedule = vec![0.0, 0.5, 0.5, 1.0];
        assert!(matches!(smc_run(&lik, &prior, &init, 1, &c), Err(SmcError::Schedule(_))));
    }

    #[test]
    fn csv_has_weight_column() {
        let s = system(vec![0.0, 0.0], vec![1.5, 2.5]);
        let mut buf = Vec::new();
        s.write_csv(&["mu1".to_string()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "mu1,weight\n1.5,0.5\n2.5,0.5\n");
    }
}
