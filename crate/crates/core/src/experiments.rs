//! Configurable experiments: target construction, default kernels and
//! regions, multi-chain runs, diagnostics, and artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, NamedKernel};
use crate::diagnostics::{self, build_report, kde, linspace, DiagnosticsError, DiagnosticsReport, ModeRegion};
use crate::equivalence::EquivalenceStructure;
use crate::kernels::{run_chain, GibbsScan, KernelError, KernelSpec, RunSettings, SampleRun};
use crate::plot::{LinePlot, Series, PALETTE};
use crate::rng::ChainRng;
use crate::smc::{smc_run, SmcConfig, SmcError, SmcResult};
use crate::spectral::{self, GapCurveRow, SpectralError};
use crate::targets::data::{read_series_file, simulate_gaussian, simulate_ma1, simulate_mixture};
use crate::targets::{
    build_grid_oracle, make_circle_bimodal, make_conditional_gaussian_loglik, make_four_state,
    make_ma1_log_posterior, make_mixture_gaussian_loglik, GridAxis, GridOracle, Ma1Prior, MixtureBounds, Support,
    Target, TargetError, COND_GAUSS_BOUND, DEFAULT_CELL_CAP, FOUR_STATE_LABELS,
};

/// Most points drawn in a trace plot.
const TRACE_POINTS: usize = 2000;
const KDE_GRID: usize = 256;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Smc(#[from] SmcError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

/// A target together with its experiment defaults.
#[derive(Clone)]
pub struct ExperimentTarget {
    pub target: Arc<dyn Target>,
    pub init: Vec<f64>,
    pub regions: Vec<ModeRegion>,
    pub oracle_axes: Option<Vec<GridAxis>>,
    /// Equivalence structure used by default IA kernels.
    pub structure: EquivalenceStructure,
    /// Whether marginal KDE plots make sense (continuous parameters).
    pub continuous: bool,
}

fn load_or_simulate(cfg: &ExperimentConfig, simulate: impl FnOnce(usize, u64) -> Vec<f64>, default_len: usize) -> Result<Vec<f64>, TargetError> {
    match &cfg.target.data_file {
        Some(p) => read_series_file(p),
        None => Ok(simulate(cfg.target.data_len.unwrap_or(default_len), cfg.target.data_seed.unwrap_or(cfg.seed))),
    }
}

/// Default mixture truth `(μ1, μ2, σ1, σ2, p)`.
pub const MIXTURE_TRUTH: [f64; 5] = [0.0, 20.0, 1.0, 5.0, 0.3];

pub fn build_target(cfg: &ExperimentConfig) -> Result<ExperimentTarget, ExperimentError> {
    let t = &cfg.target;
    let out = match cfg.experiment {
        ExperimentKind::FourState | ExperimentKind::SpectralCurve => {
            let [a, b, c, d] = t.probs.unwrap_or([0.49999, 0.00001, 0.00001, 0.49999]);
            ExperimentTarget {
                target: Arc::new(make_four_state(a, b, c, d)?),
                init: vec![0.0],
                regions: diagnostics::finite_state_regions(&FOUR_STATE_LABELS),
                oracle_axes: None,
                structure: EquivalenceStructure::StatePartition { classes: vec![vec![0, 3], vec![1], vec![2]] },
                continuous: false,
            }
        }
        ExperimentKind::Circle => {
            let (l, nu) = (t.l.unwrap_or(10.0), t.nu.unwrap_or(2.0));
            ExperimentTarget {
                target: Arc::new(make_circle_bimodal(l, nu)?),
                init: vec![0.0],
                regions: vec![
                    ModeRegion::slab("outer_neg", 0, None, Some(-l)),
                    ModeRegion::slab("inner", 0, Some(-l), Some(l)),
                    ModeRegion::slab("outer_pos", 0, Some(l), None),
                ],
                oracle_axes: Some(vec![GridAxis::new(-2.0 * l, 2.0 * l, 2001)]),
                structure: EquivalenceStructure::Antipodal { half_period: 2.0 * l },
                continuous: true,
            }
        }
        ExperimentKind::MixtureGaussian => {
            let truth = t.truth.unwrap_or(MIXTURE_TRUTH);
            let data = load_or_simulate(cfg, |n, s| simulate_mixture(truth, n, s), 1000)?;
            ExperimentTarget {
                target: Arc::new(make_mixture_gaussian_loglik(data, MixtureBounds::default())?),
                init: truth.to_vec(),
                regions: vec![ModeRegion::slab("mu1_low", 0, None, Some(10.0)), ModeRegion::slab("mu1_high", 0, Some(10.0), None)],
                oracle_axes: None,
                structure: EquivalenceStructure::LabelSwitch,
                continuous: true,
            }
        }
        ExperimentKind::ConditionalGaussian | ExperimentKind::SmcCompare => {
            let k = t.k.unwrap_or(10);
            let sum = t.true_sum.unwrap_or(10.0);
            let data = load_or_simulate(cfg, |n, s| simulate_gaussian(sum, n, s), 1000)?;
            let mut init = vec![0.0; k];
            init[0] = sum.clamp(-COND_GAUSS_BOUND, COND_GAUSS_BOUND);
            ExperimentTarget {
                target: Arc::new(make_conditional_gaussian_loglik(&data, k)?),
                init,
                regions: vec![],
                oracle_axes: None,
                structure: EquivalenceStructure::AffineSum { lo: -COND_GAUSS_BOUND, hi: COND_GAUSS_BOUND, inner_steps: 64 },
                continuous: true,
            }
        }
        ExperimentKind::Ma1 => {
            let (theta, sigma) = (t.theta.unwrap_or(0.5), t.sigma.unwrap_or(1.0));
            let data = load_or_simulate(cfg, |n, s| simulate_ma1(theta, sigma, n, s), 200)?;
            let prior = t.prior.clone().unwrap_or_else(Ma1Prior::flat_default);
            ExperimentTarget {
                target: Arc::new(make_ma1_log_posterior(data, prior)?),
                init: vec![theta, sigma.ln()],
                regions: vec![ModeRegion::slab("theta_lt_1", 0, None, Some(1.0)), ModeRegion::slab("theta_ge_1", 0, Some(1.0), None)],
                oracle_axes: Some(vec![GridAxis::new(-0.5, 3.5, 401), GridAxis::new(-1.5, 1.0, 401)]),
                structure: EquivalenceStructure::Ma1Flip,
                continuous: true,
            }
        }
    };
    Ok(out)
}

/// Kernels run when the config lists none.
pub fn default_kernels(cfg: &ExperimentConfig, et: &ExperimentTarget) -> Vec<NamedKernel> {
    let tc = cfg.teleport;
    let named = |name: &str, spec: KernelSpec| NamedKernel { name: name.into(), spec };
    let st = et.structure.clone();
    match cfg.experiment {
        ExperimentKind::FourState | ExperimentKind::SpectralCurve => {
            let g = KernelSpec::GibbsFinite { scan: GibbsScan::Systematic };
            vec![named("gibbs", g.clone()), named("ia_gibbs", KernelSpec::envelope(g, st, tc))]
        }
        ExperimentKind::Circle => {
            let b = KernelSpec::RwmBall { delta: 1.0, adapt_target: None };
            vec![named("rwm", b.clone()), named("ia_rwm", KernelSpec::envelope(b, st, tc))]
        }
        ExperimentKind::MixtureGaussian => {
            let g = KernelSpec::RwmGauss {
                scale: 1.0,
                scales: Some(vec![0.06, 0.19, 0.04, 0.13, 0.015]),
                adapt_target: Some(0.234),
            };
            vec![named("rwm", g.clone()), named("ia_rwm", KernelSpec::pt(g, st, tc))]
        }
        ExperimentKind::ConditionalGaussian | ExperimentKind::SmcCompare => {
            let g = KernelSpec::RwmGauss { scale: 0.01, scales: None, adapt_target: Some(0.234) };
            let teleport = KernelSpec::Teleport { structure: st.clone(), config: tc };
            vec![named(
                "ia_rwm_batch",
                KernelSpec::BatchAugment { local: Box::new(KernelSpec::pt(g, st, tc)), teleport: Box::new(teleport), m: 100 },
            )]
        }
        ExperimentKind::Ma1 => {
            let g = KernelSpec::RwmGauss { scale: 0.15, scales: None, adapt_target: Some(0.234) };
            vec![
                named("rwm", g.clone()),
                named("nuts", KernelSpec::Nuts { step_size: None, max_depth: 10, target_accept: 0.8 }),
                named("ia_rwm", KernelSpec::pt(g, st, tc)),
            ]
        }
    }
}

/// Stream index of chain `chain` of kernel `kernel`.
pub fn chain_stream(kernel: usize, chain: usize) -> u64 {
    ((kernel as u64) << 32) | chain as u64
}

/// Runs `chains` independent chains of `spec`, in parallel when the
/// `parallel` feature is on. Results are in chain order and independent of
/// scheduling.
pub fn run_chains(
    spec: &KernelSpec,
    target: &dyn Target,
    init: &[f64],
    base: &RunSettings,
    chains: usize,
    kernel_index: usize,
) -> Result<Vec<SampleRun>, KernelError> {
    let one = |c: usize| run_chain(spec, target, init, &base.with_stream(chain_stream(kernel_index, c)));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chains).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chains).map(one).collect()
    }
}

/// All chains of one kernel with their diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct KernelResult {
    pub name: String,
    pub spec: KernelSpec,
    #[serde(skip)]
    pub runs: Vec<SampleRun>,
    pub chain_reports: Vec<DiagnosticsReport>,
    /// Diagnostics of all chains pooled.
    pub pooled: DiagnosticsReport,
    pub acceptance: BTreeMap<String, f64>,
    pub divergences: u64,
    pub wall_time_s: f64,
}

impl KernelResult {
    /// Every chain's draws, concatenated in chain order.
    pub fn pooled_run(&self) -> SampleRun {
        let mut out = self.runs[0].clone();
        out.draws = self.runs.iter().flat_map(|r| r.draws.iter().copied()).collect();
        out
    }
}

/// SMC outcome summary.
#[derive(Debug, Clone, Serialize)]
pub struct SmcSummary {
    pub n_particles: usize,
    pub stages: usize,
    pub particle_sd: Vec<f64>,
    pub weighted_mean: Vec<f64>,
    pub ess_final: f64,
    pub history: Vec<crate::smc::StageSummary>,
}

pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub param_names: Vec<String>,
    pub kernels: Vec<KernelResult>,
    pub oracle: Option<GridOracle>,
    pub smc: Option<SmcResult>,
    pub gap_curve: Option<Vec<GapCurveRow>>,
    pub extra: serde_json::Map<String, Value>,
    /// `(file stem, svg)`.
    pub plots: Vec<(String, String)>,
}

/// Share of `bins` equal bins over `[lo, hi]` holding at least 10% of the
/// uniform share `n / bins` of the samples.
pub fn bin_coverage(samples: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let counts = diagnostics::histogram(samples, lo, hi, bins);
    let floor = 0.1 * samples.len() as f64 / bins as f64;
    counts[..bins].iter().filter(|c| **c as f64 >= floor && **c > 0).count() as f64 / bins as f64
}

pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Tempered SMC on the conditional Gaussian (or any box-supported target):
/// the likelihood is the target density, the tempering prior is flat on
/// the box, and the initial cloud is `N(center, sd²)` reflected into the
/// box, or uniform on the box without a center.
pub fn run_smc_on_box(
    target: &dyn Target,
    n_particles: usize,
    stages: usize,
    init_center: Option<&[f64]>,
    init_sd: f64,
    seed: u64,
) -> Result<SmcResult, ExperimentError> {
    let (lo, hi) = match target.support() {
        Support::Box { lo, hi } => (lo.clone(), hi.clone()),
        _ => return Err(ExperimentError::Invalid("SMC needs a box-supported target".into())),
    };
    let dim = target.dim();
    if let Some(c) = init_center {
        if c.len() != dim {
            return Err(ExperimentError::Invalid(format!("init_center has {} entries, target has {dim}", c.len())));
        }
    }
    let support = target.support().clone();
    let log_prior = |x: &[f64]| if support.contains(x) { 0.0 } else { f64::NEG_INFINITY };
    let log_lik = |x: &[f64]| target.log_density(x);
    let init = |r: &mut ChainRng| -> Vec<f64> {
        use rand::Rng;
        use rand_distr::{Distribution, StandardNormal};
        match init_center {
            Some(c) => {
                let mut x: Vec<f64> = c
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(r);
                        m + init_sd * z
                    })
                    .collect();
                let mut p = vec![0.0; dim];
                crate::kernels::hmc::enforce_support(&support, &mut x, &mut p);
                x
            }
            None => lo.iter().zip(&hi).map(|(l, h)| r.random_range(*l..*h)).collect(),
        }
    };
    Ok(smc_run(&log_lik, &log_prior, &init, dim, &SmcConfig::new(n_particles, stages, seed))?)
}

fn trace_plot(name: &str, results: &[KernelResult], j: usize) -> String {
    let mut p = LinePlot::new(format!("trace of {name} (chain 0)"), "iteration", name);
    for (k, r) in results.iter().enumerate() {
        let x = r.runs[0].column(j);
        let stride = x.len().div_ceil(TRACE_POINTS).max(1);
        let idx: Vec<f64> = (0..x.len()).step_by(stride).map(|i| i as f64).collect();
        let ys: Vec<f64> = x.iter().step_by(stride).copied().collect();
        p = p.with(Series::new(&r.name, idx, ys, PALETTE[k % PALETTE.len()]));
    }
    p.to_svg()
}

fn marginal_plot(
    name: &str,
    j: usize,
    results: &[KernelResult],
    oracle: Option<&GridOracle>,
    extra: &[(String, Vec<f64>)],
) -> Result<String, DiagnosticsError> {
    let mut p = LinePlot::new(format!("marginal of {name}"), name, "density");
    let columns: Vec<(String, Vec<f64>)> = results
        .iter()
        .map(|r| (r.name.clone(), r.pooled_run().column(j)))
        .chain(extra.iter().cloned())
        .collect();
    let (lo, hi) = match oracle.filter(|o| j < o.axes.len()) {
        Some(o) => (o.axes[j].min, o.axes[j].max),
        None => {
            let all = columns.iter().flat_map(|(_, c)| c.iter().copied());
            let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let pad = 0.05 * (hi - lo).max(1e-9);
            (lo - pad, hi + pad)
        }
    };
    if let Some(o) = oracle.filter(|o| j < o.axes.len()) {
        let m = o.marginal(j);
        p = p.with(Series::reference("oracle", m.axis.nodes(), m.density()));
    }
    let grid = linspace(lo, hi, KDE_GRID);
    for (k, (label, col)) in columns.iter().enumerate() {
        if col.len() >= 2 {
            let c = kde(col, &grid, None)?;
            p = p.with(Series::new(label, c.grid, c.density, PALETTE[k % PALETTE.len()]));
        }
    }
    Ok(p.to_svg())
}

pub fn gap_plot(rows: &[GapCurveRow]) -> String {
    let a: Vec<f64> = rows.iter().map(|r| r.a).collect();
    LinePlot::new("spectral gaps of the two-bit Gibbs kernels", "a", "gap")
        .with(Series::new("gamma_rs", a.clone(), rows.iter().map(|r| r.gamma_rs).collect(), PALETTE[0]))
        .with(Series::new("gamma_env_rs", a.clone(), rows.iter().map(|r| r.gamma_env_rs).collect(), PALETTE[1]))
        .with(Series::new("gamma_env_sys", a, rows.iter().map(|r| r.gamma_env_sys).collect(), PALETTE[2]))
        .to_svg()
}

/// Exact gaps of the discretized circle chains for each `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleGapRow {
    pub l: f64,
    pub gamma_rwm: f64,
    pub gamma_env: f64,
}

pub fn circle_gap_curve(ls: &[f64], nu: f64, cells: usize, delta_cells: usize) -> Result<Vec<CircleGapRow>, SpectralError> {
    ls.iter()
        .map(|&l| {
            let c = spectral::circle_chains(l, nu, cells, delta_cells)?;
            Ok(CircleGapRow {
                l,
                gamma_rwm: spectral::spectral_gap(&c.rwm, &c.pi)?,
                gamma_env: spectral::spectral_gap(&c.envelope(), &c.pi)?,
            })
        })
        .collect()
}

pub fn circle_gap_plot(rows: &[CircleGapRow]) -> String {
    let l: Vec<f64> = rows.iter().map(|r| r.l).collect();
    let mut p = LinePlot::new("spectral gaps of the discretized circle chains", "L", "gap")
        .with(Series::new("gamma_rwm", l.clone(), rows.iter().map(|r| r.gamma_rwm).collect(), PALETTE[0]))
        .with(Series::new("gamma_env", l, rows.iter().map(|r| r.gamma_env).collect(), PALETTE[1]));
    p.log_y = true;
    p.to_svg()
}

pub fn write_circle_gaps_csv<W: std::io::Write>(rows: &[CircleGapRow], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["l", "gamma_rwm", "gamma_env"])?;
    for r in rows {
        wr.write_record([r.l.to_string(), r.gamma_rwm.to_string(), r.gamma_env.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn gap_curve_for(cfg: &ExperimentConfig) -> Result<Vec<GapCurveRow>, SpectralError> {
    let (s, e, d) = cfg.spectral.as_ref().map(|s| (s.a_start, s.a_end, s.a_step)).unwrap_or((0.05, 0.49, 0.01));
    spectral::gap_curve(&spectral::a_grid(s, e, d))
}

/// Loads or integrates the oracle requested by the config (or the
/// experiment's default axes when `[oracle]` is absent).
pub fn oracle_for(cfg: &ExperimentConfig, et: &ExperimentTarget) -> Result<Option<GridOracle>, ExperimentError> {
    match &cfg.oracle {
        Some(o) => {
            if let Some(path) = &o.file {
                let bytes = fs::read(path)?;
                return Ok(Some(GridOracle::from_bytes(&bytes)?.0));
            }
            Ok(Some(build_grid_oracle(et.target.as_ref(), &o.axes, o.cell_cap.unwrap_or(DEFAULT_CELL_CAP))?))
        }
        None => match &et.oracle_axes {
            Some(axes) => Ok(Some(build_grid_oracle(et.target.as_ref(), axes, DEFAULT_CELL_CAP)?)),
            None => Ok(None),
        },
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let et = build_target(cfg)?;
    let mut out = ExperimentOutput {
        config: cfg.clone(),
        param_names: et.target.param_names(),
        kernels: vec![],
        oracle: None,
        smc: None,
        gap_curve: None,
        extra: serde_json::Map::new(),
        plots: vec![],
    };
    if cfg.experiment == ExperimentKind::SpectralCurve {
        let rows = gap_curve_for(cfg)?;
        out.plots.push(("gap_curve".into(), gap_plot(&rows)));
        out.gap_curve = Some(rows);
        return Ok(out);
    }

    let target = et.target.as_ref();
    let init = cfg.init.clone().unwrap_or_else(|| et.init.clone());
    if init.len() != target.dim() {
        return Err(ExperimentError::Invalid(format!("init has {} entries, target has dimension {}", init.len(), target.dim())));
    }
    let regions = cfg.regions.clone().unwrap_or_else(|| et.regions.clone());
    out.oracle = oracle_for(cfg, &et)?;
    let kernels = if cfg.kernels.is_empty() { default_kernels(cfg, &et) } else { cfg.kernels.clone() };
    let base = RunSettings::new(cfg.n, cfg.burn, cfg.thin, cfg.seed);

    for (k, nk) in kernels.iter().enumerate() {
        let start = Instant::now();
        let runs = run_chains(&nk.spec, target, &init, &base, cfg.chains, k)?;
        let wall = start.elapsed().as_secs_f64();
        let chain_reports = runs
            .iter()
            .map(|r| build_report(r, target, out.oracle.as_ref(), &regions, cfg.bins))
            .collect::<Result<Vec<_>, _>>()?;
        let mut acceptance: BTreeMap<String, f64> = BTreeMap::new();
        for r in &runs {
            for (key, v) in &r.meta.acceptance {
                *acceptance.entry(key.clone()).or_default() += v / runs.len() as f64;
            }
        }
        let mut res = KernelResult {
            name: nk.name.clone(),
            spec: nk.spec.clone(),
            divergences: runs.iter().map(|r| r.meta.divergences).sum(),
            runs,
            chain_reports,
            pooled: DiagnosticsReport::default(),
            acceptance,
            wall_time_s: wall,
        };
        res.pooled = build_report(&res.pooled_run(), target, out.oracle.as_ref(), &regions, cfg.bins)?;
        out.kernels.push(res);
    }

    let mut smc_columns: Vec<(String, Vec<Vec<f64>>)> = vec![];
    match cfg.experiment {
        ExperimentKind::Circle => {
            let (l, nu) = (cfg.target.l.unwrap_or(10.0), cfg.target.nu.unwrap_or(2.0));
            let cells = cfg.target.cells.unwrap_or(400);
            let dc = cfg.target.delta_cells.unwrap_or(2);
            let rows = circle_gap_curve(&[l], nu, cells, dc)?;
            out.extra.insert("discretized_gaps".into(), serde_json::to_value(rows)?);
        }
        ExperimentKind::SmcCompare => {
            let s = cfg.smc.as_ref().ok_or_else(|| ExperimentError::Invalid("missing [smc] section".into()))?;
            let res = run_smc_on_box(target, s.n_particles, s.stages, s.init_center.as_deref(), s.init_sd, cfg.seed)?;
            let p = &res.particles;
            let summary = SmcSummary {
                n_particles: p.len(),
                stages: s.stages,
                particle_sd: (0..p.dim).map(|j| p.particle_sd(j)).collect(),
                weighted_mean: (0..p.dim).map(|j| p.weighted_mean(j)).collect(),
                ess_final: p.ess(),
                history: res.history.clone(),
            };
            let mut comparison = serde_json::Map::new();
            comparison.insert("smc_mu1_sd".into(), json!(summary.particle_sd[0]));
            comparison.insert("smc_mu1_bin_coverage".into(), json!(bin_coverage(&p.column(0), -10.0, 10.0, 20)));
            for k in &out.kernels {
                let col = k.pooled_run().column(0);
                comparison.insert(format!("{}_mu1_sd", k.name), json!(sample_sd(&col)));
                comparison.insert(format!("{}_mu1_bin_coverage", k.name), json!(bin_coverage(&col, -10.0, 10.0, 20)));
            }
            out.extra.insert("smc".into(), serde_json::to_value(summary)?);
            out.extra.insert("comparison".into(), Value::Object(comparison));
            smc_columns.push(("smc".into(), (0..p.dim).map(|j| p.column(j)).collect()));
            out.smc = Some(res);
        }
        ExperimentKind::Ma1 => {
            if let Some(o) = &out.oracle {
                let m = o.marginal(0);
                let modes: Vec<f64> = m.local_maxima(0.01).into_iter().map(|i| m.axis.node(i)).collect();
                out.extra.insert("oracle_theta_modes".into(), json!(modes));
            }
            let grid = linspace(-0.5, 3.5, 401);
            let mut kde_modes = serde_json::Map::new();
            for k in &out.kernels {
                let c = kde(&k.pooled_run().column(0), &grid, None)?;
                kde_modes.insert(k.name.clone(), json!(c.local_maxima(0.05)));
            }
            out.extra.insert("kde_theta_modes".into(), Value::Object(kde_modes));
        }
        _ => {}
    }

    for (j, name) in out.param_names.clone().iter().enumerate() {
        if out.kernels.is_empty() {
            break;
        }
        out.plots.push((format!("trace_{name}"), trace_plot(name, &out.kernels, j)));
        if et.continuous {
            let extra: Vec<(String, Vec<f64>)> = smc_columns.iter().map(|(l, cols)| (l.clone(), cols[j].clone())).collect();
            out.plots.push((format!("marginal_{name}"), marginal_plot(name, j, &out.kernels, out.oracle.as_ref(), &extra)?));
        }
    }
    Ok(out)
}

/// CSV with one row per draw and one column per parameter.
pub fn write_draws_csv<W: std::io::Write>(run: &SampleRun, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(&run.param_names)?;
    for row in run.rows() {
        wr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

/// Report body shared by `run` and `compare`.
pub fn report_json(out: &ExperimentOutput) -> Value {
    let mut kernels = serde_json::Map::new();
    for k in &out.kernels {
        kernels.insert(k.name.clone(), serde_json::to_value(k).unwrap_or(Value::Null));
    }
    let mut v = json!({
        "experiment": out.config.experiment.as_str(),
        "seed": out.config.seed,
        "config": out.config,
        "param_names": out.param_names,
        "kernels": kernels,
        "extra": out.extra,
    });
    if let Some(first) = out.kernels.first() {
        // top-level diagnostics of the primary kernel
        let p = serde_json::to_value(&first.pooled).unwrap_or(Value::Null);
        if let (Value::Object(map), Value::Object(pm)) = (&mut v, p) {
            for (key, val) in pm {
                map.insert(key, val);
            }
        }
    }
    if let Some(o) = &out.oracle {
        v["oracle"] = json!({ "axes": o.axes, "normalizer": o.normalizer });
    }
    if let Some(rows) = &out.gap_curve {
        v["gap_curve"] = serde_json::to_value(rows).unwrap_or(Value::Null);
    }
    v
}

/// Side-by-side table of the main per-kernel numbers.
pub fn comparison_rows(out: &ExperimentOutput) -> Vec<BTreeMap<String, String>> {
    out.kernels
        .iter()
        .map(|k| {
            let mut row = BTreeMap::new();
            row.insert("kernel".to_string(), k.name.clone());
            row.insert("wall_time_s".into(), format!("{:.3}", k.wall_time_s));
            row.insert("divergences".into(), k.divergences.to_string());
            for (a, v) in &k.acceptance {
                row.insert(format!("accept_{a}"), v.to_string());
            }
            for (p, v) in &k.pooled.tv_to_oracle {
                row.insert(format!("tv_{p}"), v.to_string());
            }
            for (p, v) in &k.pooled.ks_to_oracle {
                row.insert(format!("ks_{p}"), v.to_string());
            }
            for (p, v) in &k.pooled.ess {
                row.insert(format!("ess_{p}"), v.to_string());
            }
            for (m, v) in &k.pooled.mode_fractions {
                row.insert(format!("mode_{m}"), v.to_string());
            }
            row
        })
        .collect()
}

/// Writes `draws.csv` (first kernel), `draws_<kernel>.csv` (every kernel
/// when there are several), `particles.csv`, `gap_curve.csv`,
/// `report.json`, `compare.csv` (compare mode) and `plots/*.svg`.
pub fn write_artifacts(out: &ExperimentOutput, dir: &Path, compare: bool) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir.join("plots"))?;
    if let Some(first) = out.kernels.first() {
        write_draws_csv(&first.pooled_run(), fs::File::create(dir.join("draws.csv"))?)?;
        if out.kernels.len() > 1 || compare {
            for k in &out.kernels {
                write_draws_csv(&k.pooled_run(), fs::File::create(dir.join(format!("draws_{}.csv", sanitize(&k.name))))?)?;
            }
        }
    }
    if let Some(smc) = &out.smc {
        smc.particles.write_csv(&out.param_names, fs::File::create(dir.join("particles.csv"))?)?;
    }
    if let Some(rows) = &out.gap_curve {
        spectral::write_gap_curve_csv(rows, fs::File::create(dir.join("gap_curve.csv"))?)?;
    }
    let mut report = report_json(out);
    if compare {
        let rows = comparison_rows(out);
        report["comparison"] = serde_json::to_value(&rows)?;
        let mut cols: Vec<String> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
        cols.sort();
        cols.dedup();
        cols.retain(|c| c != "kernel");
        cols.insert(0, "kernel".into());
        let mut wr = csv::Writer::from_writer(fs::File::create(dir.join("compare.csv"))?);
        wr.write_record(&cols)?;
        for r in &rows {
            wr.write_record(cols.iter().map(|c| r.get(c).cloned().unwrap_or_default()))?;
        }
        wr.flush()?;
    }
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    for (name, svg) in &out.plots {
        fs::write(dir.join("plots").join(format!("{}.svg", sanitize(name))), svg)?;
    }
    Ok(())
}

/// Oracle file contents for the config's target and axes.
pub fn build_oracle_file(cfg: &ExperimentConfig) -> Result<(GridOracle, Vec<u8>), ExperimentError> {
    let et = build_target(cfg)?;
    let axes = match &cfg.oracle {
        Some(o) if !o.axes.is_empty() => o.axes.clone(),
        _ => et
            .oracle_axes
            .clone()
            .ok_or_else(|| ExperimentError::Invalid("no oracle axes: add an [oracle] section with bounded axes".into()))?,
    };
    let cap = cfg.oracle.as_ref().and_then(|o| o.cell_cap).unwrap_or(DEFAULT_CELL_CAP);
    let oracle = build_grid_oracle(et.target.as_ref(), &axes, cap)?;
    let bytes = oracle.to_bytes(cfg.experiment.as_str());
    Ok((oracle, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(src: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(src).unwrap()
    }

    #[test]
    fn four_state_report_has_state_fractions() {
        let c = cfg("experiment = \"four_state\"\nseed = 1\nn = 2000\n[target]\nprobs = [0.4, 0.1, 0.1, 0.4]\n");
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.kernels.len(), 2);
        let keys: Vec<&String> = out.kernels[0].pooled.mode_fractions.keys().collect();
        assert_eq!(keys.len(), 4);
        for l in FOUR_STATE_LABELS {
            assert!(out.kernels[0].pooled.mode_fractions.contains_key(l));
        }
    }

    #[test]
    fn artifacts_are_deterministic() {
        let c = cfg("experiment = \"circle\"\nseed = 4\nn = 500\nchains = 2\n[target]\nl = 2.0\ncells = 40\n");
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_artifacts(&run_experiment(&c).unwrap(), d1.path(), false).unwrap();
        write_artifacts(&run_experiment(&c).unwrap(), d2.path(), false).unwrap();
        let a = fs::read(d1.path().join("draws.csv")).unwrap();
        assert_eq!(a, fs::read(d2.path().join("draws.csv")).unwrap());
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 500);
        assert!(d1.path().join("report.json").exists());
        assert!(d1.path().join("plots/marginal_theta.svg").exists() || fs::read_dir(d1.path().join("plots")).unwrap().count() > 0);
    }

    #[test]
    fn spectral_curve_rows() {
        let c = cfg("experiment = \"spectral_curve\"\nseed = 1\n[spectral]\na_start = 0.05\na_end = 0.49\na_step = 0.01\n");
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.gap_curve.as_ref().unwrap().len(), 45);
        let d = tempfile::tempdir().unwrap();
        write_artifacts(&out, d.path(), false).unwrap();
        let text = fs::read_to_string(d.path().join("gap_curve.csv")).unwrap();
        assert!(text.starts_with("a,gamma_rs,gamma_env_rs,gamma_env_sys\n"));
        assert_eq!(text.lines().count(), 46);
    }

    #[test]
    fn bin_coverage_counts_occupied_bins() {
        let u: Vec<f64> = (0..2000).map(|i| -10.0 + 20.0 * (i as f64 + 0.5) / 2000.0).collect();
        assert_eq!(bin_coverage(&u, -10.0, 10.0, 20), 1.0);
        assert_eq!(bin_coverage(&[9.9; 100], -10.0, 10.0, 20), 0.05);
    }

    #[test]
    fn oracle_file_roundtrip_from_config() {
        let c = cfg("experiment = \"ma1\"\nseed = 2\n[oracle]\naxes = [{ min = -0.5, max = 3.5, count = 41 }, { min = -1.5, max = 1.0, count = 31 }]\n");
        let (o, bytes) = build_oracle_file(&c).unwrap();
        let (back, desc) = GridOracle::from_bytes(&bytes).unwrap();
        assert_eq!(desc, "ma1");
        assert_eq!(back.log_post, o.log_post);
        let no_axes = cfg("experiment = \"mixture_gaussian\"\nseed = 2\n");
        assert!(build_oracle_file(&no_axes).is_err());
    }
}
