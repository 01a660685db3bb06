//! Batch runs, k-sweeps and their CSV outputs.
//!
//! Per-run CSV columns: `scenario,planner,k,seed,outcome,length_m,time_s`.
//! Aggregate CSV columns:
//! `scenario,planner,k,runs,successes,success_rate,mean_length_m,mean_time_s`.
//! Means cover successful runs only and are left empty when there are none.

mod cli;
mod verify;

pub use cli::cli_main;
pub use verify::{verify_lemma1, verify_theorem1, ConfigCheck, VerificationReport};

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sim::{make_scenario_with, run_episode, EpisodeResult, Outcome, PlannerKind, ScenarioKind, ShadowStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: ScenarioKind,
    pub planner: PlannerKind,
    pub k: f64,
    pub seed: u64,
    pub outcome: Outcome,
    pub length_m: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub scenario: ScenarioKind,
    pub planner: PlannerKind,
    pub k: f64,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_trajectory_length: Option<f64>,
    pub mean_navigation_time: Option<f64>,
    pub rows: Vec<RunRow>,
    /// Sum over runs, present when the batch ran with shadow evaluation.
    pub shadow: Option<ShadowStats>,
}

impl BatchReport {
    /// Aggregates rows sorted by seed. All rows must share scenario, planner and k.
    pub fn from_rows(mut rows: Vec<RunRow>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("a batch needs at least one run"))?;
        let (scenario, planner, k) = (first.scenario, first.planner, first.k);
        if rows
            .iter()
            .any(|r| r.scenario != scenario || r.planner != planner || r.k.to_bits() != k.to_bits())
        {
            return Err(Error::invalid("rows mix scenarios, planners or k values"));
        }
        rows.sort_by_key(|r| r.seed);
        let ok: Vec<&RunRow> = rows.iter().filter(|r| r.outcome == Outcome::Success).collect();
        let mean = |f: fn(&RunRow) -> f64| {
            (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
        };
        Ok(Self {
            scenario,
            planner,
            k,
            runs: rows.len(),
            successes: ok.len(),
            success_rate: ok.len() as f64 / rows.len() as f64,
            mean_trajectory_length: mean(|r| r.length_m),
            mean_navigation_time: mean(|r| r.time_s),
            shadow: None,
            rows,
        })
    }

    /// Writes `<stem>.runs.csv` and `<stem>.summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = format!("{}_{}_k{}", self.scenario, self.planner, self.k);
        let runs = dir.join(format!("{stem}.runs.csv"));
        let summary = dir.join(format!("{stem}.summary.csv"));
        write_runs_csv(&runs, &self.rows)?;
        write_summary_csv(&summary, std::slice::from_ref(self))?;
        Ok((runs, summary))
    }
}

/// Runs seeds `base_seed..base_seed + n_runs` in parallel.
pub fn run_batch(
    scenario: ScenarioKind,
    planner: PlannerKind,
    config: &RunConfig,
    n_runs: usize,
    base_seed: u64,
) -> Result<BatchReport> {
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be >= 1"));
    }
    config.validate()?;
    let results: Vec<EpisodeResult> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| run_seed(scenario, planner, config, base_seed + i))
        .collect::<Result<_>>()?;

    let shadow = config.episode.shadow.then(|| {
        results.iter().filter_map(|r| r.shadow).fold(ShadowStats::default(), |a, s| ShadowStats {
            steps: a.steps + s.steps,
            violations: a.violations + s.violations,
            max_excess: a.max_excess.max(s.max_excess),
        })
    });
    let k = config.episode.planner.k;
    let rows = results
        .iter()
        .map(|r| RunRow {
            scenario,
            planner,
            k,
            seed: r.seed,
            outcome: r.outcome,
            length_m: r.trajectory_length,
            time_s: r.navigation_time,
        })
        .collect();
    let mut report = BatchReport::from_rows(rows)?;
    report.shadow = shadow;
    Ok(report)
}

pub fn run_seed(scenario: ScenarioKind, planner: PlannerKind, config: &RunConfig, seed: u64) -> Result<EpisodeResult> {
    let (spec, world) = make_scenario_with(scenario, &config.scenario, seed)?;
    run_episode(&spec, &world, planner, &config.episode, seed)
}

/// One batch per `k`, all on the same seeds.
pub fn sweep_k(
    scenario: ScenarioKind,
    planner: PlannerKind,
    ks: &[f64],
    config: &RunConfig,
    n_runs: usize,
    base_seed: u64,
) -> Result<Vec<BatchReport>> {
    if ks.is_empty() || ks.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::invalid("ks must be non-empty and positive"));
    }
    ks.iter()
        .map(|&k| {
            let mut c = config.clone();
            c.episode.planner.k = k;
            run_batch(scenario, planner, &c, n_runs, base_seed)
        })
        .collect()
}

pub const RUNS_HEADER: [&str; 7] = ["scenario", "planner", "k", "seed", "outcome", "length_m", "time_s"];
pub const SUMMARY_HEADER: [&str; 8] = [
    "scenario",
    "planner",
    "k",
    "runs",
    "successes",
    "success_rate",
    "mean_length_m",
    "mean_time_s",
];

pub fn write_runs_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(RUNS_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.scenario.to_string(),
            r.planner.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            r.outcome.to_string(),
            r.length_m.to_string(),
            r.time_s.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(RUNS_HEADER) {
        return Err(Error::invalid(format!("{}: unexpected header {:?}", path.display(), header)));
    }
    let bad = |line: usize, what: &str| Error::invalid(format!("{}:{line}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(line, what));
        rows.push(RunRow {
            scenario: rec[0].parse().map_err(|_| bad(line, "scenario"))?,
            planner: rec[1].parse().map_err(|_| bad(line, "planner"))?,
            k: num(2, "k")?,
            seed: rec[3].parse().map_err(|_| bad(line, "seed"))?,
            outcome: rec[4].parse().map_err(|_| bad(line, "outcome"))?,
            length_m: num(5, "length_m")?,
            time_s: num(6, "time_s")?,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv(path: &Path, reports: &[BatchReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(path, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        w.write_record([
            r.scenario.to_string(),
            r.planner.to_string(),
            r.k.to_string(),
            r.runs.to_string(),
            r.successes.to_string(),
            r.success_rate.to_string(),
            opt(r.mean_trajectory_length),
            opt(r.mean_navigation_time),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one JSON object per trace record.
pub fn write_trace(path: &Path, result: &EpisodeResult) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in &result.trajectory {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
