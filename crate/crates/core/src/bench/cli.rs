//! Command-line front end. Exit codes: 0 success, 1 failed verification or
//! runtime I/O failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::{run_batch, run_seed, sweep_k, verify_lemma1, verify_theorem1, write_summary_csv, write_trace, BatchReport};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geom::{DiscBody, Vec2};
use crate::sim::{make_scenario_with, Bounds, PlannerKind, ScenarioKind};

pub const OUT_DIR_ENV: &str = "CROWDNAV_OUT";

// Stdout writes ignore errors so a closed pipe ends output instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "crowdnav", version, about = "Chance-constrained velocity-obstacle crowd navigation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode and optionally write its trace.
    Run(RunArgs),
    /// Run a seeded batch and write per-run and summary CSVs.
    Batch(BatchArgs),
    /// Run one batch per k on shared seeds.
    SweepK(SweepArgs),
    /// Monte-Carlo verification of the clearance moments or the confidence bound.
    Verify(VerifyArgs),
    /// Scenario catalogue.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Print the default configuration file.
    Config,
}

#[derive(Debug, Subcommand)]
enum ScenarioAction {
    List,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "ofvo")]
    planner: String,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration value, e.g. `episode.planner.horizon=3`.
    /// Applied after `--config`; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k: Option<f64>,
    /// JSON-lines trace; a `.scene.json` sidecar is written next to it.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $CROWDNAV_OUT or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.7,1,2")]
    ks: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VerifyTest {
    Theorem1,
    Lemma1,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    test: VerifyTest,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.7,1,2")]
    k: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    configs: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } | Error::Csv { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run(a) => run(a),
        Command::Batch(a) => batch(a),
        Command::SweepK(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Scenarios { action: ScenarioAction::List } => {
            for k in ScenarioKind::ALL {
                outln!("{:<8} {}", k.name(), k.description());
            }
            Ok(0)
        }
        Command::Config => {
            out!("{}", RunConfig::default().to_toml_string());
            Ok(0)
        }
    }
}

fn resolve(common: &Common, k: Option<f64>) -> Result<(ScenarioKind, PlannerKind, RunConfig)> {
    let scenario: ScenarioKind = common.scenario.parse()?;
    let planner: PlannerKind = common.planner.parse()?;
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if !common.overrides.is_empty() {
        config = config.with_overrides(&common.overrides)?;
    }
    if let Some(k) = k {
        config.episode.planner.k = k;
    }
    config.validate()?;
    Ok((scenario, planner, config))
}

fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Static layout and pedestrian paths of one episode, for plotting.
#[derive(Debug, Serialize)]
struct Scene<'a> {
    scenario: ScenarioKind,
    planner: PlannerKind,
    seed: u64,
    outcome: String,
    bounds: Bounds,
    start: Vec2,
    goal: Vec2,
    robot_radius: f64,
    static_obstacles: &'a [DiscBody],
    pedestrians: Vec<ScenePed<'a>>,
}

#[derive(Debug, Serialize)]
struct ScenePed<'a> {
    radius: f64,
    path: &'a [Vec2],
}

fn run(a: RunArgs) -> Result<i32> {
    let (scenario, planner, config) = resolve(&a.common, a.k)?;
    let result = run_seed(scenario, planner, &config, a.seed)?;
    outln!(
        "scenario={scenario} planner={planner} k={} seed={} outcome={} length_m={} time_s={}",
        config.episode.planner.k, a.seed, result.outcome, result.trajectory_length, result.navigation_time
    );
    if let Some(path) = a.trace {
        create_parent(&path)?;
        write_trace(&path, &result)?;
        let (spec, world) = make_scenario_with(scenario, &config.scenario, a.seed)?;
        let scene = Scene {
            scenario,
            planner,
            seed: a.seed,
            outcome: result.outcome.to_string(),
            bounds: world.bounds,
            start: spec.start.position,
            goal: spec.goal,
            robot_radius: world.robot.radius,
            static_obstacles: &world.static_obstacles,
            pedestrians: world
                .pedestrians
                .iter()
                .zip(&result.pedestrian_paths)
                .map(|(p, path)| ScenePed { radius: p.radius, path })
                .collect(),
        };
        let sidecar = path.with_extension("scene.json");
        let text = serde_json::to_string_pretty(&scene).expect("scene serializes");
        fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
        outln!("trace: {}", path.display());
        outln!("scene: {}", sidecar.display());
    }
    Ok(0)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn print_report(r: &BatchReport) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
    outln!(
        "{} {} k={}: {}/{} success ({:.1}%), mean length {} m, mean time {} s",
        r.scenario,
        r.planner,
        r.k,
        r.successes,
        r.runs,
        100.0 * r.success_rate,
        fmt(r.mean_trajectory_length),
        fmt(r.mean_navigation_time)
    );
}

fn batch(a: BatchArgs) -> Result<i32> {
    let (scenario, planner, config) = resolve(&a.common, a.k)?;
    let report = run_batch(scenario, planner, &config, a.runs, a.seed)?;
    let (runs, summary) = report.write(&out_dir(a.out))?;
    print_report(&report);
    outln!("runs: {}\nsummary: {}", runs.display(), summary.display());
    Ok(0)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let (scenario, planner, config) = resolve(&a.common, None)?;
    let reports = sweep_k(scenario, planner, &a.ks, &config, a.runs, a.seed)?;
    let dir = out_dir(a.out);
    for r in &reports {
        r.write(&dir)?;
        print_report(r);
    }
    let path = dir.join(format!("{scenario}_{planner}_sweep.summary.csv"));
    write_summary_csv(&path, &reports)?;
    outln!("summary: {}", path.display());
    Ok(0)
}

fn verify(a: VerifyArgs) -> Result<i32> {
    let report = match a.test {
        VerifyTest::Theorem1 => verify_theorem1(a.configs, a.samples, a.seed)?,
        VerifyTest::Lemma1 => verify_lemma1(&a.k, a.configs, a.samples, a.seed)?,
    };
    out!("{report}");
    Ok(if report.pass { 0 } else { 1 })
}
