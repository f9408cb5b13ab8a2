use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use drmarket_core::benchmark::{compare, default_grid, sweep, SweepResult};
use drmarket_core::engine::{run, summarize, CsvLedger, RunOptions};
use drmarket_core::model::config_schema;
use drmarket_core::oracle::verify::{run_suite, Suite, VerifyOptions};
use drmarket_core::{validate_config, BaselineMode, ExperimentConfig};

/// Demand-response market simulator.
#[derive(Parser)]
#[command(name = "drmarket", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-stage mechanism over the configured horizon.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Posted-price average cost over a rebate grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated rebates; defaults to the standard grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Posted-price curve against the optimal mechanism (fig2.csv).
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Run a verification suite on built-in instances.
    Verify {
        suite: SuiteArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print the JSON schema of the experiment configuration.
    PrintConfigSchema,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Dispatch,
    Mechanism,
    Incentives,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Dispatch => Suite::Dispatch,
            SuiteArg::Mechanism => Suite::Mechanism,
            SuiteArg::Incentives => Suite::Incentives,
        }
    }
}

enum Failure {
    /// Bad config or bad invocation: exit 2.
    Usage(anyhow::Error),
    /// Anything that went wrong after the inputs were accepted: exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::Usage)?;
    let mut cfg = validate_config(&raw)
        .map_err(|e| Failure::Usage(anyhow::anyhow!("invalid config {}:\n{e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_grid(raw: &str) -> Result<Vec<f64>, Failure> {
    let grid = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p >= 0.0)
                .ok_or_else(|| usage(format!("invalid rebate `{s}` in --grid")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(usage("--grid is empty"));
    }
    Ok(grid)
}

fn resolve_grid(raw: Option<&str>, cfg: &ExperimentConfig) -> Result<Vec<f64>, Failure> {
    match raw {
        Some(r) => parse_grid(r),
        None => Ok(default_grid(cfg).context("cannot build the default rebate grid")?),
    }
}

fn require_net_demand(cfg: &ExperimentConfig, command: &str) -> CmdResult {
    if cfg.mode != BaselineMode::NetDemand {
        return Err(usage(format!(
            "`{command}` needs a net-demand configuration (mode is explicit-baseline)"
        )));
    }
    Ok(())
}

/// Creates `dir` and returns the output paths, refusing to clobber any of
/// them unless `force` is set.
fn prepare_outputs(dir: &Path, names: &[&str], force: bool) -> Result<Vec<PathBuf>, Failure> {
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(usage(format!(
                "{} already exists (pass --force to overwrite)",
                p.display()
            )));
        }
    }
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(Failure::Runtime)?;
    Ok(paths)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_sweep_csv(path: &Path, result: &SweepResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["p", "posted_avg_cost", "optimal_avg_cost"])?;
    for pt in &result.points {
        w.serialize((pt.rebate, pt.average_social_cost, result.optimal_average))?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>, force: bool) -> CmdResult {
    let cfg = load_config(config, seed)?;
    let paths = prepare_outputs(out, &["ledger.csv", "summary.json", "config.json"], force)?;
    let strategies = cfg.strategies().context("cannot build strategies")?;
    write_json(&paths[2], &cfg)?;

    let mut ledger = CsvLedger::new(create(&paths[0])?);
    let options = RunOptions::default();
    let result = run(&cfg, &strategies, &mut ledger, options).context("simulation failed")?;
    ledger
        .into_inner()
        .context("cannot finish the ledger")?
        .flush()
        .context("cannot write the ledger")?;
    let summary = summarize(&result, options.tail_fraction).context("cannot summarize the run")?;
    write_json(&paths[1], &summary)?;
    eprintln!(
        "simulated {} days x {} loads: average social cost {:.6} (W* = {:.6})",
        summary.days, summary.n_loads, summary.social_cost.mean, summary.w_star
    );
    Ok(())
}

fn run_sweep(config: &Path, grid: Option<&str>, out: &Path, seed: Option<u64>, force: bool) -> CmdResult {
    let cfg = load_config(config, seed)?;
    require_net_demand(&cfg, "sweep")?;
    let grid = resolve_grid(grid, &cfg)?;
    let paths = prepare_outputs(out, &["sweep.csv"], force)?;
    let result = sweep(&grid, &cfg, cfg.seed).context("sweep failed")?;
    write_sweep_csv(&paths[0], &result)?;
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CompareSummary {
    days: u64,
    n_loads: usize,
    seed: u64,
    grid_points: usize,
    min_rebate: f64,
    min_posted_average: f64,
    optimal_average: f64,
    ratio: f64,
    interior_minimum: bool,
    dominated_everywhere: bool,
}

fn run_compare(config: &Path, grid: Option<&str>, out: &Path, seed: Option<u64>, force: bool) -> CmdResult {
    let cfg = load_config(config, seed)?;
    require_net_demand(&cfg, "compare")?;
    let grid = resolve_grid(grid, &cfg)?;
    let paths = prepare_outputs(out, &["fig2.csv", "summary.json"], force)?;
    let c = compare(&cfg, Some(&grid), cfg.seed).context("comparison failed")?;
    write_sweep_csv(&paths[0], &c.sweep)?;
    write_json(
        &paths[1],
        &CompareSummary {
            days: cfg.days,
            n_loads: cfg.n_loads(),
            seed: cfg.seed,
            grid_points: grid.len(),
            min_rebate: c.min_rebate,
            min_posted_average: c.min_posted_average,
            optimal_average: c.optimal_average,
            ratio: c.ratio,
            interior_minimum: c.interior_minimum,
            dominated_everywhere: c.dominated_everywhere,
        },
    )?;
    eprintln!(
        "posted-price minimum {:.6} at p = {:.6}; optimal {:.6}; ratio {:.4}",
        c.min_posted_average, c.min_rebate, c.optimal_average, c.ratio
    );
    Ok(())
}

fn verify(suite: Suite, out: &Path, force: bool) -> CmdResult {
    let mut names = vec!["report.json"];
    if suite == Suite::Incentives {
        names.push("deviations.csv");
    }
    let paths = prepare_outputs(out, &names, force)?;
    let report = run_suite(suite, &VerifyOptions::default()).with_context(|| format!("suite {suite} failed to run"))?;
    write_json(&paths[0], &report)?;
    if let Some(dev) = &report.deviations {
        let mut w = create(&paths[1])?;
        dev.write_csv(&mut w).context("cannot write deviations.csv")?;
        w.flush().context("cannot write deviations.csv")?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    match report.first_failure() {
        None => {
            eprintln!("{suite}: {} checks passed", report.checks.len());
            Ok(())
        }
        Some(c) => Err(Failure::Runtime(anyhow::anyhow!(
            "{suite}: {failed} of {} checks failed; first failure `{}` (measured {:e}, tolerance {:e})",
            report.checks.len(),
            c.name,
            c.measured,
            c.tolerance
        ))),
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            force,
        } => simulate(&config, &out, seed, force),
        Command::Sweep {
            config,
            grid,
            out,
            seed,
            force,
        } => run_sweep(&config, grid.as_deref(), &out, seed, force),
        Command::Compare {
            config,
            grid,
            out,
            seed,
            force,
        } => run_compare(&config, grid.as_deref(), &out, seed, force),
        Command::Verify { suite, out, force } => verify(suite.into(), &out, force),
        Command::PrintConfigSchema => {
            let schema = serde_json::to_string_pretty(&config_schema()).context("cannot render schema")?;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{schema}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(anyhow::Error::from(e).into()),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
