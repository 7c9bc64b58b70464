//! Identification-aware Markov chain Monte Carlo.
//!
//! When a model is not point-identified, distinct parameter values can
//! induce the same likelihood. If the set of such values `K(θ)` is
//! computable, a *teleport* kernel can jump directly between its members,
//! drawing from the target restricted to the class. Composed with a local
//! kernel (random-walk Metropolis, HMC, NUTS, Gibbs) it crosses barriers
//! that trap purely local chains.
//!
//! The crate is organised as
//!
//! * [`targets`]: the unnormalized log-densities used by the experiments,
//!   plus grid-integration oracles,
//! * [`equivalence`]: observational-equivalence structures and the teleport
//!   kernel (exact conditional draw and within-class multiple-try Metropolis),
//! * [`kernels`]: one-step transitions, compositions and chain drivers,
//! * [`smc`]: a tempered sequential Monte Carlo baseline,
//! * [`spectral`]: exact finite-state analysis (stationary laws, spectral
//!   gaps, conductance),
//! * [`diagnostics`]: TV/KS distances, ESS, KDE, mode occupancy,
//! * [`config`], [`experiments`]: TOML experiment configs and the runner
//!   used by the CLI,
//! * [`plot`]: small SVG line charts.

pub mod config;
pub mod diagnostics;
pub mod equivalence;
pub mod experiments;
pub mod kernels;
pub mod plot;
pub mod rng;
pub mod smc;
pub mod spectral;
pub mod targets;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use diagnostics::DiagnosticsReport;
pub use equivalence::{EquivalenceStructure, TeleportConfig, TeleportMode};
pub use experiments::{run_experiment, write_artifacts, ExperimentError};
pub use kernels::{run_chain, ChainState, Kernel, KernelSpec, RunSettings, SampleRun};
pub use rng::ChainRng;
pub use smc::{smc_run, ParticleSystem};
pub use targets::{Support, Target};
