//! One-step Markov transitions and chain drivers.
//!
//! A [`Kernel`] mutates a [`ChainState`] in place. Local kernels (random
//! walk, HMC, NUTS, finite Gibbs) and the teleport kernel can be combined
//! with [`Compose`], [`Envelope`] and [`Mixture`]. Kernels carry their own
//! adaptation state, so every chain gets a fresh kernel built from a
//! [`KernelSpec`].

mod adapt;
mod batch;
mod compose;
mod gibbs;
pub(crate) mod hmc;
mod nuts;
mod rwm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::{EquivalenceError, EquivalenceStructure, TeleportConfig};
use crate::rng::{self, ChainRng};
use crate::targets::Target;

pub use adapt::{adapt_scale, DualAveraging, RobbinsMonro};
pub use batch::batch_augment;
pub use compose::{Compose, Envelope, Mixture, Teleport};
pub use gibbs::{GibbsFinite, GibbsScan};
pub use hmc::{leapfrog, Hmc, LeapfrogOutcome};
pub use nuts::Nuts;
pub use rwm::{Rwm, RwmProposal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid chain state: {0}")]
    InvalidState(String),
    #[error("initial point {0:?} is outside the support")]
    InitOutsideSupport(Vec<f64>),
    #[error("invalid kernel specification: {0}")]
    Spec(String),
    #[error(transparent)]
    Teleport(#[from] EquivalenceError),
}

/// Proposal and acceptance counts for one kernel kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptCounter {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptCounter {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelStats {
    pub counters: BTreeMap<String, AcceptCounter>,
    pub divergences: u64,
}

impl KernelStats {
    pub fn record(&mut self, kind: &str, accepted: bool) {
        let c = self.counters.entry(kind.to_string()).or_default();
        c.proposed += 1;
        c.accepted += accepted as u64;
    }

    pub fn rates(&self) -> BTreeMap<String, f64> {
        self.counters.iter().map(|(k, c)| (k.clone(), c.rate())).collect()
    }

    pub fn reset(&mut self) {
        self.counters.clear();
        self.divergences = 0;
    }
}

/// Position, cached `log π(position)`, RNG stream and counters of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub log_density: f64,
    pub rng: ChainRng,
    pub stats: KernelStats,
}

impl ChainState {
    pub fn new(target: &dyn Target, init: &[f64], rng: ChainRng) -> Result<Self, KernelError> {
        if init.len() != target.dim() {
            return Err(KernelError::InvalidState(format!(
                "initial point has dimension {}, target has {}",
                init.len(),
                target.dim()
            )));
        }
        let mut position = init.to_vec();
        target.support().canonicalize(&mut position);
        let log_density = target.log_density(&position);
        if !target.support().contains(&position) || !log_density.is_finite() {
            return Err(KernelError::InitOutsideSupport(init.to_vec()));
        }
        Ok(Self { position, log_density, rng, stats: KernelStats::default() })
    }
}

pub trait Kernel: Send {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError>;

    /// Switches adaptation on (warmup) or freezes it.
    fn set_warmup(&mut self, _warmup: bool) {}

    fn name(&self) -> String;
}

fn one() -> f64 {
    1.0
}

fn default_depth() -> usize {
    10
}

fn default_target_accept() -> f64 {
    0.8
}

/// Serializable description of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelSpec {
    /// Uniform proposal on the `δ`-ball.
    RwmBall {
        delta: f64,
        #[serde(default)]
        adapt_target: Option<f64>,
    },
    /// `θ' = θ + scale · diag(scales) · z`, `z ~ N(0, I)`.
    RwmGauss {
        scale: f64,
        #[serde(default)]
        scales: Option<Vec<f64>>,
        #[serde(default)]
        adapt_target: Option<f64>,
    },
    GibbsFinite { scan: GibbsScan },
    Hmc {
        step_size: f64,
        leapfrog: usize,
        #[serde(default = "one")]
        mass_sigma: f64,
    },
    Nuts {
        #[serde(default)]
        step_size: Option<f64>,
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "default_target_accept")]
        target_accept: f64,
    },
    Teleport {
        structure: EquivalenceStructure,
        #[serde(default)]
        config: TeleportConfig,
    },
    /// `first` then `second`.
    Compose { first: Box<KernelSpec>, second: Box<KernelSpec> },
    /// Fair coin between `local ∘ teleport` and `teleport ∘ local`.
    Envelope { local: Box<KernelSpec>, teleport: Box<KernelSpec> },
    /// Teleport with probability `epsilon`, local move otherwise.
    Mixture { local: Box<KernelSpec>, teleport: Box<KernelSpec>, epsilon: f64 },
    /// Runs `local`; [`run_chain`] emits `m` teleport draws per retained
    /// state.
    BatchAugment { local: Box<KernelSpec>, teleport: Box<KernelSpec>, m: usize },
}

impl KernelSpec {
    /// `teleport` then `local`, the ordering of the identification-aware
    /// MH step.
    pub fn pt(local: KernelSpec, structure: EquivalenceStructure, config: TeleportConfig) -> Self {
        KernelSpec::Compose {
            first: Box::new(KernelSpec::Teleport { structure, config }),
            second: Box::new(local),
        }
    }

    pub fn envelope(local: KernelSpec, structure: EquivalenceStructure, config: TeleportConfig) -> Self {
        KernelSpec::Envelope { local: Box::new(local), teleport: Box::new(KernelSpec::Teleport { structure, config }) }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: String| Err(KernelError::Spec(m));
        match self {
            KernelSpec::RwmBall { delta, adapt_target } => {
                if !(*delta > 0.0) {
                    return bad(format!("rwm_ball delta must be > 0, got {delta}"));
                }
                check_rate(*adapt_target)
            }
            KernelSpec::RwmGauss { scale, scales, adapt_target } => {
                if !(*scale > 0.0) {
                    return bad(format!("rwm_gauss scale must be > 0, got {scale}"));
                }
                if scales.as_ref().is_some_and(|s| s.iter().any(|v| !(*v > 0.0))) {
                    return bad("rwm_gauss scales must be > 0".into());
                }
                check_rate(*adapt_target)
            }
            KernelSpec::GibbsFinite { .. } => Ok(()),
            KernelSpec::Hmc { step_size, leapfrog, mass_sigma } => {
                if !(*step_size > 0.0) || *leapfrog < 1 || !(*mass_sigma > 0.0) {
                    return bad("hmc needs step_size > 0, leapfrog >= 1, mass_sigma > 0".into());
                }
                Ok(())
            }
            KernelSpec::Nuts { step_size, target_accept, .. } => {
                if step_size.is_some_and(|e| !(e > 0.0)) {
                    return bad("nuts step_size must be > 0".into());
                }
                check_rate(Some(*target_accept))
            }
            KernelSpec::Teleport { config, .. } => {
                if config.mtm_tries < 1 {
                    return bad("mtm_tries must be >= 1".into());
                }
                Ok(())
            }
            KernelSpec::Compose { first, second } => {
                first.validate()?;
                second.validate()
            }
            KernelSpec::Envelope { local, teleport } => {
                local.validate()?;
                teleport.validate()
            }
            KernelSpec::Mixture { local, teleport, epsilon } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return bad(format!("mixture epsilon must be in [0, 1], got {epsilon}"));
                }
                local.validate()?;
                teleport.validate()
            }
            KernelSpec::BatchAugment { local, teleport, m } => {
                if *m < 1 {
                    return bad("batch_augment m must be >= 1".into());
                }
                local.validate()?;
                teleport.validate()
            }
        }
    }

    pub fn build(&self) -> Result<Box<dyn Kernel>, KernelError> {
        self.validate()?;
        Ok(match self {
            KernelSpec::RwmBall { delta, adapt_target } => {
                Box::new(Rwm::new(RwmProposal::Ball, *delta, None, *adapt_target))
            }
            KernelSpec::RwmGauss { scale, scales, adapt_target } => {
                Box::new(Rwm::new(RwmProposal::Gaussian, *scale, scales.clone(), *adapt_target))
            }
            KernelSpec::GibbsFinite { scan } => Box::new(GibbsFinite::new(*scan)),
            KernelSpec::Hmc { step_size, leapfrog, mass_sigma } => Box::new(Hmc::new(*step_size, *leapfrog, *mass_sigma)),
            KernelSpec::Nuts { step_size, max_depth, target_accept } => {
                Box::new(Nuts::new(*step_size, *max_depth, *target_accept))
            }
            KernelSpec::Teleport { structure, config } => Box::new(Teleport::new(structure.clone(), *config)),
            KernelSpec::Compose { first, second } => Box::new(Compose::new(first.build()?, second.build()?)),
            KernelSpec::Envelope { local, teleport } => Box::new(Envelope::new(local.build()?, teleport.build()?)),
            KernelSpec::Mixture { local, teleport, epsilon } => {
                Box::new(Mixture::new(local.build()?, teleport.build()?, *epsilon))
            }
            KernelSpec::BatchAugment { local, .. } => local.build()?,
        })
    }

    /// Structure and config of the teleport used for batch augmentation.
    pub fn augmentation(&self) -> Option<(EquivalenceStructure, TeleportConfig, usize)> {
        match self {
            KernelSpec::BatchAugment { teleport, m, .. } => match teleport.as_ref() {
                KernelSpec::Teleport { structure, config } => Some((structure.clone(), *config, *m)),
                _ => None,
            },
            _ => None,
        }
    }

    /// Whether any constituent is a teleport.
    pub fn has_teleport(&self) -> bool {
        match self {
            KernelSpec::Teleport { .. } => true,
            KernelSpec::Compose { first, second } => first.has_teleport() || second.has_teleport(),
            KernelSpec::Envelope { .. } | KernelSpec::Mixture { .. } | KernelSpec::BatchAugment { .. } => true,
            _ => false,
        }
    }
}

fn check_rate(r: Option<f64>) -> Result<(), KernelError> {
    match r {
        Some(r) if !(r > 0.0 && r < 1.0) => Err(KernelError::Spec(format!("target rate {r} is not in (0, 1)"))),
        _ => Ok(()),
    }
}

/// Chain length and bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Retained draws.
    pub n: usize,
    /// Discarded initial steps; adaptation runs during these.
    pub burn: usize,
    pub thin: usize,
    pub seed: u64,
    /// RNG stream index (chain number).
    #[serde(default)]
    pub stream: u64,
}

impl RunSettings {
    pub fn new(n: usize, burn: usize, thin: usize, seed: u64) -> Self {
        Self { n, burn, thin, seed, stream: 0 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub kernel: String,
    pub seed: u64,
    pub stream: u64,
    pub burn: usize,
    pub thin: usize,
    /// Post-burn acceptance rate per kernel kind.
    pub acceptance: BTreeMap<String, f64>,
    pub divergences: u64,
    pub wall_time_s: f64,
}

/// Retained draws, row-major `n × dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub dim: usize,
    pub param_names: Vec<String>,
    pub draws: Vec<f64>,
    pub meta: RunMeta,
}

impl SampleRun {
    pub fn len(&self) -> usize {
        self.draws.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Wall clock for run metadata; reads zero on wasm32, which has no
/// monotonic clock in std.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    #[cfg(not(target_arch = "wasm32"))]
    fn secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    #[cfg(target_arch = "wasm32")]
    fn secs(&self) -> f64 {
        0.0
    }
}

/// Runs one chain: `burn` warmup steps (adaptation on), then `n·thin`
/// steps keeping every `thin`-th state. Deterministic given the settings.
///
/// For a [`KernelSpec::BatchAugment`] spec the retained states are replaced
/// by `m` teleport draws each.
pub fn run_chain(
    spec: &KernelSpec,
    target: &dyn Target,
    init: &[f64],
    settings: &RunSettings,
) -> Result<SampleRun, KernelError> {
    let mut kernel = spec.build()?;
    let mut run = run_kernel(kernel.as_mut(), target, init, settings)?;
    run.meta.kernel = serde_json::to_string(spec).unwrap_or_else(|_| kernel.name());
    if let Some((structure, config, m)) = spec.augmentation() {
        let start = Stopwatch::start();
        let mut r = rng::stream(settings.seed, rng::stream_id(settings.stream, 1));
        run = batch_augment(&run, target, &structure, &config, m, &mut r)?;
        run.meta.wall_time_s += start.secs();
    }
    Ok(run)
}

/// [`run_chain`] for an already built kernel.
pub fn run_kernel(
    kernel: &mut dyn Kernel,
    target: &dyn Target,
    init: &[f64],
    settings: &RunSettings,
) -> Result<SampleRun, KernelError> {
    let start = Stopwatch::start();
    let rng = rng::stream(settings.seed, rng::stream_id(settings.stream, 0));
    let mut state = ChainState::new(target, init, rng)?;
    let thin = settings.thin.max(1);
    let dim = target.dim();

    kernel.set_warmup(true);
    for _ in 0..settings.burn {
        kernel.step(&mut state, target)?;
    }
    kernel.set_warmup(false);
    state.stats.reset();

    let mut draws = Vec::with_capacity(settings.n * dim);
    for _ in 0..settings.n {
        for _ in 0..thin {
            kernel.step(&mut state, target)?;
        }
        draws.extend_from_slice(&state.position);
    }
    Ok(SampleRun {
        dim,
        param_names: target.param_names(),
        draws,
        meta: RunMeta {
            kernel: kernel.name(),
            seed: settings.seed,
            stream: settings.stream,
            burn: settings.burn,
            thin,
            acceptance: state.stats.rates(),
            divergences: state.stats.divergences,
            wall_time_s: start.secs(),
        },
    })
}

/// Metropolis accept/reject on a log ratio.
pub(crate) fn mh_accept(log_ratio: f64, rng: &mut ChainRng) -> bool {
    use rand::Rng;
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}
