use super::{KernelError, SampleRun};
use crate::equivalence::{EquivalenceStructure, TeleportConfig};
use crate::rng::ChainRng;
use crate::targets::Target;

/// Replaces every retained state `θ_t` of `run` by `m` independent draws
/// from `T(θ_t, ·)`. The pooled draws target the same law as the base chain.
pub fn batch_augment(
    run: &SampleRun,
    target: &dyn Target,
    structure: &EquivalenceStructure,
    config: &TeleportConfig,
    m: usize,
    rng: &mut ChainRng,
) -> Result<SampleRun, KernelError> {
    let mut draws = Vec::with_capacity(run.draws.len() * m);
    for row in run.rows() {
        let lp = target.log_density(row);
        for _ in 0..m {
            let out = structure.teleport(config, row, lp, target, rng)?;
            draws.extend_from_slice(&out.position);
        }
    }
    let mut out = run.clone();
    out.draws = draws;
    Ok(out)
}
