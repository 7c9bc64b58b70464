use rand::Rng;

use super::{ChainState, Kernel, KernelError};
use crate::equivalence::{EquivalenceStructure, TeleportConfig, TeleportMode};
use crate::targets::Target;

/// The teleport kernel `T` as a chain step.
#[derive(Debug, Clone)]
pub struct Teleport {
    pub structure: EquivalenceStructure,
    pub config: TeleportConfig,
}

impl Teleport {
    pub fn new(structure: EquivalenceStructure, config: TeleportConfig) -> Self {
        Self { structure, config }
    }
}

impl Kernel for Teleport {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        let out = self.structure.teleport(&self.config, &state.position, state.log_density, target, &mut state.rng)?;
        let moved = out.position != state.position;
        state.position = out.position;
        state.log_density = out.log_density;
        state.stats.record("teleport", if self.config.mode == TeleportMode::Mtm { out.accepted } else { moved });
        if out.degenerate {
            state.stats.record("teleport_degenerate", true);
        }
        Ok(())
    }

    fn name(&self) -> String {
        format!("teleport({})", self.structure.kind())
    }
}

/// `first` then `second`.
pub struct Compose {
    first: Box<dyn Kernel>,
    second: Box<dyn Kernel>,
}

impl Compose {
    pub fn new(first: Box<dyn Kernel>, second: Box<dyn Kernel>) -> Self {
        Self { first, second }
    }
}

impl Kernel for Compose {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        self.first.step(state, target)?;
        self.second.step(state, target)
    }

    fn set_warmup(&mut self, warmup: bool) {
        self.first.set_warmup(warmup);
        self.second.set_warmup(warmup);
    }

    fn name(&self) -> String {
        format!("compose({}, {})", self.first.name(), self.second.name())
    }
}

/// Order-randomized envelope `½(PT + TP)`.
pub struct Envelope {
    local: Box<dyn Kernel>,
    teleport: Box<dyn Kernel>,
}

impl Envelope {
    pub fn new(local: Box<dyn Kernel>, teleport: Box<dyn Kernel>) -> Self {
        Self { local, teleport }
    }
}

impl Kernel for Envelope {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        if state.rng.random::<bool>() {
            self.local.step(state, target)?;
            self.teleport.step(state, target)
        } else {
            self.teleport.step(state, target)?;
            self.local.step(state, target)
        }
    }

    fn set_warmup(&mut self, warmup: bool) {
        self.local.set_warmup(warmup);
        self.teleport.set_warmup(warmup);
    }

    fn name(&self) -> String {
        format!("envelope({}, {})", self.local.name(), self.teleport.name())
    }
}

/// Convex mixture `(1−ε)P + εT`.
pub struct Mixture {
    local: Box<dyn Kernel>,
    teleport: Box<dyn Kernel>,
    epsilon: f64,
}

impl Mixture {
    pub fn new(local: Box<dyn Kernel>, teleport: Box<dyn Kernel>, epsilon: f64) -> Self {
        Self { local, teleport, epsilon }
    }
}

impl Kernel for Mixture {
    fn step(&mut self, state: &mut ChainState, target: &dyn Target) -> Result<(), KernelError> {
        if state.rng.random::<f64>() < self.epsilon {
            self.teleport.step(state, target)
        } else {
            self.local.step(state, target)
        }
    }

    fn set_warmup(&mut self, warmup: bool) {
        self.local.set_warmup(warmup);
        self.teleport.set_warmup(warmup);
    }

    fn name(&self) -> String {
        format!("mixture({}, {}, eps={})", self.local.name(), self.teleport.name(), self.epsilon)
    }
}
