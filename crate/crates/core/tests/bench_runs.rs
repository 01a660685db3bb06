use crowdnav::bench::{read_runs_csv, run_batch, run_seed, sweep_k, BatchReport, RUNS_HEADER};
use crowdnav::config::RunConfig;
use crowdnav::perception::PerceptionConfig;
use crowdnav::sim::{make_scenario_with, Outcome, PlannerKind, ScenarioKind};

#[test]
fn static_field_is_crossed_without_contact_with_exact_perception() {
    let mut config = RunConfig::default();
    config.episode.perception = PerceptionConfig::noiseless();
    let mut failures = Vec::new();
    for seed in 0..200 {
        let r = run_seed(ScenarioKind::Static, PlannerKind::Ofvo, &config, seed).unwrap();
        if r.outcome != Outcome::Success || r.min_clearance < 0.0 {
            failures.push((seed, r.outcome, r.min_clearance));
        }
    }
    assert!(failures.is_empty(), "failed runs {failures:?}");
}

fn with_k(config: &RunConfig, k: f64) -> RunConfig {
    let mut c = config.clone();
    c.episode.planner.k = k;
    c
}

#[test]
fn sweep_varies_only_the_planner() {
    let config = RunConfig::default();
    for seed in 0..5 {
        let low = run_seed(ScenarioKind::Dynamic, PlannerKind::Ofvo, &with_k(&config, 0.1), seed).unwrap();
        let high = run_seed(ScenarioKind::Dynamic, PlannerKind::Ofvo, &with_k(&config, 2.0), seed).unwrap();
        // Dynamic pedestrians ignore the robot, so their paths coincide for as
        // long as both episodes run.
        for (a, b) in low.pedestrian_paths.iter().zip(&high.pedestrian_paths) {
            let n = a.len().min(b.len());
            assert_eq!(a[..n], b[..n], "seed {seed}");
        }
    }

    let reports = sweep_k(ScenarioKind::Empty, PlannerKind::Ofvo, &[0.1, 2.0], &config, 10, 7).unwrap();
    let strip = |r: &BatchReport| r.rows.iter().map(|x| (x.seed, x.outcome, x.length_m.to_bits())).collect::<Vec<_>>();
    assert_eq!(strip(&reports[0]), strip(&reports[1]));
    assert!(reports.iter().all(|r| r.rows.iter().map(|x| x.seed).eq(7..17)));
}

#[test]
fn scenario_layout_depends_only_on_seed() {
    let params = RunConfig::default().scenario;
    for kind in ScenarioKind::ALL {
        let (a_spec, a) = make_scenario_with(kind, &params, 3).unwrap();
        let (b_spec, b) = make_scenario_with(kind, &params, 3).unwrap();
        assert_eq!(a_spec, b_spec);
        assert_eq!(a, b);
    }
}

#[test]
fn batch_csv_round_trips_and_is_order_independent() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::default();
    let report = run_batch(ScenarioKind::Cross, PlannerKind::PrvoBaseline, &config, 12, 100).unwrap();
    let (runs, summary) = report.write(dir.path()).unwrap();
    assert_eq!(runs.file_name().unwrap(), "cross_prvo_baseline_k1.runs.csv");
    assert_eq!(read_runs_csv(&runs).unwrap(), report.rows);

    let text = std::fs::read_to_string(&runs).unwrap();
    assert_eq!(text.lines().next().unwrap(), RUNS_HEADER.join(","));
    assert_eq!(text.lines().count(), 13);
    let summary = std::fs::read_to_string(summary).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "scenario,planner,k,runs,successes,success_rate,mean_length_m,mean_time_s"
    );

    let mut reversed = report.rows.clone();
    reversed.reverse();
    assert_eq!(BatchReport::from_rows(reversed).unwrap().rows, report.rows);

    let singles: Vec<_> = (100..112)
        .map(|seed| run_seed(ScenarioKind::Cross, PlannerKind::PrvoBaseline, &config, seed).unwrap().outcome)
        .collect();
    assert_eq!(singles, report.rows.iter().map(|r| r.outcome).collect::<Vec<_>>());
}

#[test]
fn success_means_cover_successes_only() {
    let report = run_batch(ScenarioKind::Dynamic, PlannerKind::Ofvo, &RunConfig::default(), 20, 0).unwrap();
    let ok: Vec<_> = report.rows.iter().filter(|r| r.outcome == Outcome::Success).collect();
    assert_eq!(report.successes, ok.len());
    match report.mean_navigation_time {
        Some(t) => assert!((t - ok.iter().map(|r| r.time_s).sum::<f64>() / ok.len() as f64).abs() < 1e-12),
        None => assert!(ok.is_empty()),
    }
}
