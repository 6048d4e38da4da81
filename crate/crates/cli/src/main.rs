use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use toml::Value;

use scalar_mfe::config::{parse_override, RunConfig, SweepMode};
use scalar_mfe::equilibrium::{self, Algorithm};
use scalar_mfe::experiments::{comparative_statics_sweep, HeatmapResult, SweepGrid};
use scalar_mfe::io::{self, SolutionRecord};
use scalar_mfe::runner;

/// Exit status for a result that was written but did not converge.
const NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "mfe", version, about = "Stationary mean field equilibria with scalar interactions")]
struct Cli {
    /// Log level when RUST_LOG is unset.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model to run with default parameters (when no config is given).
    #[arg(long)]
    model: Option<String>,
    /// `key=value` override; bare keys address the model section.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and write the solution and its tables.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Overrides the configured solver.
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Seed of every random stream (model-free solvers only).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the `[sweep]` grid of a configuration.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Leave the wall-time column empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Recompute the certificate of a written solution.
    Verify {
        /// Solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Model configuration; defaults to the one echoed in the solution.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    command: String,
    config_path: Option<String>,
    config: String,
    seed: u64,
    out_dir: String,
    artifacts: Vec<String>,
    versions: Versions,
    wall_seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Versions {
    scalar_mfe: String,
    mfe_cli: String,
}

impl Manifest {
    fn new(command: &str, config_path: Option<&Path>, cfg: &RunConfig, seed: u64, out: &Path) -> Self {
        Self {
            command: command.into(),
            config_path: config_path.map(|p| p.display().to_string()),
            config: cfg.to_toml(),
            seed,
            out_dir: out.display().to_string(),
            artifacts: Vec::new(),
            versions: Versions { scalar_mfe: scalar_mfe::VERSION.into(), mfe_cli: env!("CARGO_PKG_VERSION").into() },
            wall_seconds: 0.0,
        }
    }
}

fn load_config(args: &ConfigArgs, extra: &[(String, Value)]) -> Result<RunConfig> {
    let base = match (&args.config, &args.model) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        (None, Some(model)) => RunConfig::for_model(model)?,
        (None, None) => bail!("either --config or --model is required"),
    };
    let mut overrides = Vec::new();
    if let (Some(_), Some(model)) = (&args.config, &args.model) {
        overrides.push(("model".to_string(), Value::String(model.clone())));
    }
    for raw in &args.overrides {
        overrides.push(parse_override(raw)?);
    }
    overrides.extend_from_slice(extra);
    Ok(base.with_overrides(&overrides)?)
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn solve(cfg_args: &ConfigArgs, algorithm: Option<Algorithm>, seed: Option<u64>, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let mut extra = Vec::new();
    if let Some(a) = algorithm {
        extra.push(("algorithm".to_string(), Value::String(a.as_str().into())));
    }
    if let Some(s) = seed {
        extra.push(("seed".to_string(), Value::Integer(i64::try_from(s).context("seed too large")?)));
    }
    let cfg = load_config(cfg_args, &extra)?;
    create_dir(out)?;

    let outcome = runner::solve(&cfg, cfg.algorithm, cfg.seed)?;
    let (model, sol) = (&outcome.model, &outcome.solution);
    let mut manifest = Manifest::new("solve", cfg_args.config.as_deref(), &cfg, cfg.seed, out);
    let mut artifact = |name: &str| {
        manifest.artifacts.push(name.to_string());
        out.join(name)
    };

    let record = SolutionRecord::from_solution(model, sol, serde_json::Value::String(cfg.to_toml()));
    io::write_json(&artifact("solution.json"), &record)?;
    io::write_population_csv(&artifact("population.csv"), model, &sol.population)?;
    io::write_policy_csv(&artifact("policy.csv"), model, &sol.policy)?;
    io::write_trace_csv(&artifact("trace.csv"), &sol.trace)?;
    if let Some(steps) = &outcome.fixed_point {
        io::write_fixed_point_csv(&artifact("fixed_point.csv"), steps)?;
    }
    if let Some(q) = &outcome.q_table {
        io::write_qtable_csv(&artifact("qtable.csv"), model, q)?;
        io::write_learning_trace_csv(&artifact("learning_trace.csv"), &q.episodes)?;
    }
    if let Some(sigma) = &outcome.direct_policy {
        io::write_direct_policy_csv(&artifact("direct_policy.csv"), model, sigma)?;
    }
    manifest.artifacts.push("manifest.json".into());
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    io::write_json(&out.join("manifest.json"), &manifest)?;

    println!(
        "{} {}: m* = [{}], |f| = {}, {:?}, {}",
        sol.model,
        sol.algorithm.as_str(),
        sol.m_star.iter().map(|v| io::fmt_sig(*v)).collect::<Vec<_>>().join(", "),
        io::fmt_sig(sol.residual),
        sol.termination,
        if sol.converged { "converged" } else { "NOT converged" }
    );
    Ok(if sol.converged { 0 } else { NOT_CONVERGED })
}

fn sweep(cfg_args: &ConfigArgs, workers: usize, out: &Path, no_timing: bool) -> Result<u8> {
    let start = Instant::now();
    let cfg = load_config(cfg_args, &[])?;
    let grid = SweepGrid::from_config(&cfg)?;
    create_dir(out)?;
    log::info!("sweeping {} cells on {workers} workers", grid.len());
    let result = comparative_statics_sweep(&grid, workers);

    let mut manifest = Manifest::new("sweep", cfg_args.config.as_deref(), &cfg, grid.base_seed, out);
    result.write_csv(&out.join("sweep.csv"), !no_timing)?;
    manifest.artifacts.push("sweep.csv".into());
    if cfg.sweep.as_ref().is_some_and(|s| s.mode == SweepMode::Heatmap) {
        let hm = HeatmapResult::from_sweep(&grid, result.clone())?;
        hm.write(&out.join("heatmap.csv"), Some(&out.join("heatmap.svg")))?;
        manifest.artifacts.extend(["heatmap.csv".into(), "heatmap.svg".into()]);
    }
    manifest.artifacts.push("manifest.json".into());
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    io::write_json(&out.join("manifest.json"), &manifest)?;

    let unconverged = result.rows.iter().filter(|r| !r.converged).count();
    println!("{} cells, {} failed, {} not converged", result.rows.len(), result.failures(), unconverged);
    Ok(if unconverged == 0 { 0 } else { NOT_CONVERGED })
}

/// Every artifact listed by a sibling manifest must still exist.
fn check_manifest(solution: &Path) -> Result<()> {
    let path = solution.with_file_name("manifest.json");
    if !path.exists() {
        return Ok(());
    }
    let manifest: Manifest = io::read_json(&path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let missing: Vec<&String> = manifest.artifacts.iter().filter(|a| !dir.join(a).exists()).collect();
    if !missing.is_empty() {
        bail!("missing artifacts listed in {}: {missing:?}", path.display());
    }
    Ok(())
}

fn verify(solution: &Path, config: Option<&Path>) -> Result<u8> {
    check_manifest(solution)?;
    let record: SolutionRecord = io::read_json(solution).with_context(|| format!("cannot read {}", solution.display()))?;
    let cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            RunConfig::parse(&text)?
        }
        None => match &record.config {
            serde_json::Value::String(text) => RunConfig::parse(text).context("invalid config echo in solution")?,
            _ => bail!("solution has no config echo; pass --config"),
        },
    };
    let model = runner::build_model(&cfg)?;
    let sol = record.to_solution(&model)?;
    let cert = equilibrium::certify(&model, &sol, &cfg.solver)?;
    for c in &cert.checks {
        println!(
            "{:<12} {}  value = {}  tol = {}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            io::fmt_sig(c.value),
            io::fmt_sig(c.tolerance),
            c.detail
        );
    }
    Ok(if cert.passed() { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { cfg, algorithm, seed, out } => solve(&cfg, algorithm, seed, &out),
        Command::Sweep { cfg, workers, out, no_timing } => sweep(&cfg, workers, &out, no_timing),
        Command::Verify { solution, config } => verify(&solution, config.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
