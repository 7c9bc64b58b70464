use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use iamcmc::experiments::{
    build_oracle_file, circle_gap_curve, circle_gap_plot, gap_plot, run_experiment, write_artifacts, write_circle_gaps_csv,
};
use iamcmc::spectral::{a_grid, gap_curve, write_gap_curve_csv};
use iamcmc::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "iamcmc", version, about = "Identification-aware MCMC experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output` or `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for chains; defaults to the number of logical cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write draws.csv, report.json and plots.
    Run(Common),
    /// Run every kernel of the config on one target and write a side-by-side report.
    Compare(Common),
    /// Exact spectral gaps of the finite-state chains.
    Spectral(SpectralArgs),
    /// Integrate the target on a grid and write oracle.bin.
    Oracle(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    /// Two-bit Gibbs kernels as a function of `a`.
    Gibbs,
    /// Discretized circle RWM and its teleport envelope as a function of `L`.
    Circle,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "gibbs")]
    family: Family,
    /// Explicit grid points, comma separated (`a` for gibbs, `L` for circle).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    a_start: Option<f64>,
    #[arg(long)]
    a_end: Option<f64>,
    #[arg(long)]
    a_step: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    nu: f64,
    #[arg(long, default_value_t = 400)]
    cells: usize,
    #[arg(long, default_value_t = 2)]
    delta_cells: usize,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::from_file(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| Path::new("out").join(cfg.map(|c| c.experiment.as_str()).unwrap_or(fallback)))
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn cmd_run(common: &Common, compare: bool) -> Result<()> {
    let cfg = load(common)?;
    if compare && cfg.kernels.len() == 1 {
        eprintln!("note: compare with a single kernel; add more [[kernels]] entries for a side-by-side report");
    }
    let dir = out_dir(common, Some(&cfg), "run");
    let out = run_experiment(&cfg)?;
    write_artifacts(&out, &dir, compare)?;
    for k in &out.kernels {
        let tv: Vec<String> = k.pooled.tv_to_oracle.iter().map(|(p, v)| format!("{p}={v:.3}")).collect();
        println!(
            "{:<16} draws {:>8}  time {:>7.2}s  tv [{}]",
            k.name,
            k.pooled_run().len(),
            k.wall_time_s,
            tv.join(", ")
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_spectral(args: &SpectralArgs) -> Result<()> {
    let cfg = args.common.config.as_ref().map(|_| load(&args.common)).transpose()?;
    let dir = out_dir(&args.common, cfg.as_ref(), "spectral");
    fs::create_dir_all(dir.join("plots"))?;
    match args.family {
        Family::Gibbs => {
            let sec = cfg.as_ref().and_then(|c| c.spectral.clone());
            let grid = match &args.grid {
                Some(g) => g.clone(),
                None => a_grid(
                    args.a_start.or(sec.as_ref().map(|s| s.a_start)).unwrap_or(0.05),
                    args.a_end.or(sec.as_ref().map(|s| s.a_end)).unwrap_or(0.49),
                    args.a_step.or(sec.as_ref().map(|s| s.a_step)).unwrap_or(0.01),
                ),
            };
            if grid.is_empty() {
                bail!("empty a grid");
            }
            let rows = gap_curve(&grid)?;
            write_gap_curve_csv(&rows, fs::File::create(dir.join("gap_curve.csv"))?)?;
            fs::write(dir.join("plots/gap_curve.svg"), gap_plot(&rows))?;
            for r in &rows {
                println!("a={:.4}  gamma_rs={:.6}  gamma_env_rs={:.6}  gamma_env_sys={:.6}", r.a, r.gamma_rs, r.gamma_env_rs, r.gamma_env_sys);
            }
        }
        Family::Circle => {
            let t = cfg.as_ref().map(|c| c.target.clone()).unwrap_or_default();
            let ls = args.grid.clone().or(t.l.map(|l| vec![l])).unwrap_or_else(|| vec![1.0, 2.0, 4.0, 6.0, 8.0]);
            let nu = t.nu.unwrap_or(args.nu);
            let cells = t.cells.unwrap_or(args.cells);
            let dc = t.delta_cells.unwrap_or(args.delta_cells);
            let rows = circle_gap_curve(&ls, nu, cells, dc)?;
            write_circle_gaps_csv(&rows, fs::File::create(dir.join("circle_gaps.csv"))?)?;
            fs::write(dir.join("plots/circle_gaps.svg"), circle_gap_plot(&rows))?;
            for r in &rows {
                println!("L={:.3}  gamma_rwm={:.6e}  gamma_env={:.6e}", r.l, r.gamma_rwm, r.gamma_env);
            }
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_oracle(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let dir = out_dir(common, Some(&cfg), "oracle");
    fs::create_dir_all(&dir)?;
    let (oracle, bytes) = build_oracle_file(&cfg)?;
    let path = dir.join("oracle.bin");
    fs::write(&path, bytes)?;
    let names = iamcmc::experiments::build_target(&cfg)?.target.param_names();
    let mut wr = csv::Writer::from_path(dir.join("oracle_marginals.csv"))?;
    wr.write_record(["param", "x", "density"])?;
    for (j, axis) in oracle.axes.iter().enumerate() {
        let m = oracle.marginal(j);
        let modes: Vec<String> = m.local_maxima(0.05).iter().map(|&i| format!("{:.3}", axis.node(i))).collect();
        println!("{}: {} nodes on [{}, {}], mean {:.4}, modes [{}]", names[j], axis.count, axis.min, axis.max, m.mean(), modes.join(", "));
        for (x, d) in axis.nodes().iter().zip(m.density()) {
            wr.write_record([names[j].clone(), x.to_string(), d.to_string()])?;
        }
    }
    wr.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Run(c) | Command::Compare(c) | Command::Oracle(c) => c.threads,
        Command::Spectral(s) => s.common.threads,
    };
    let res = init_threads(threads).and_then(|_| match &cli.command {
        Command::Run(c) => cmd_run(c, false),
        Command::Compare(c) => cmd_run(c, true),
        Command::Spectral(s) => cmd_spectral(s),
        Command::Oracle(c) => cmd_oracle(c),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
