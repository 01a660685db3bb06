//! Acceptance criteria 1-8. Runs as a plain binary so every verdict line is
//! printed; exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use crowdnav::bench::{run_batch, run_seed, sweep_k, verify_lemma1, verify_theorem1, write_runs_csv, write_trace};
use crowdnav::chance::{closest_approach_time, deterministic_vo_contains, is_feasible_chance};
use crowdnav::config::RunConfig;
use crowdnav::geom::{backproject_pixel, project_point, PinholeCamera, Pose2, Vec2};
use crowdnav::perception::{flow_displacement_error, ObstacleObservation};
use crowdnav::planner::Command;
use crowdnav::sim::{PlannerKind, RobotState, ScenarioKind, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KS: [f64; 4] = [0.1, 0.7, 1.0, 2.0];

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn lemma1() -> Verdict {
    let start = Instant::now();
    let report = verify_lemma1(&KS, 200, 100_000, 1).expect("valid arguments");
    let elapsed = start.elapsed();
    let worst = report
        .checks
        .iter()
        .map(|c| (c.empirical - c.analytic) / c.std_error.max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        report.pass && elapsed < Duration::from_secs(120),
        format!(
            "{} configs x 1e5 draws, {} over bound+3SE, worst excess {worst:.2} SE, {}",
            report.checks.len(),
            report.failures().count(),
            secs(elapsed)
        ),
    )
}

fn theorem1() -> Verdict {
    let start = Instant::now();
    let report = verify_theorem1(50, 1_000_000, 2).expect("valid arguments");
    let elapsed = start.elapsed();
    let moment_checks: Vec<_> = report.checks.iter().filter(|c| c.label != "variance grows with s^2").collect();
    let within_1pct = moment_checks
        .iter()
        .filter(|c| (c.empirical - c.analytic).abs() <= 0.01 * c.analytic.abs())
        .count();
    verdict(
        report.pass && elapsed < Duration::from_secs(180),
        format!(
            "50 configs x 1e6 draws, {} failed checks, {within_1pct}/{} moments within 1% relative, {}",
            report.failures().count(),
            moment_checks.len(),
            secs(elapsed)
        ),
    )
}

fn deterministic_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (horizon, n_tau, k) = (2.0, 10, 1.0);
    let (mut compared, mut skipped, mut disagreements) = (0, 0, 0);
    while compared < 10_000 {
        let p = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let u = Vec2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r_sum = rng.random_range(0.3..1.2);
        let obs = ObstacleObservation::camera(p, u, 1e-9, 1e-9, 0.5).expect("valid observation");
        let v_rel = v - u;
        let tau = closest_approach_time(p, v_rel, horizon);
        let mu_f = (p - v_rel * tau).norm_sq() - r_sum * r_sum;
        if mu_f.abs() < 1e-6 {
            skipped += 1;
            continue;
        }
        compared += 1;
        let chance = is_feasible_chance(&obs, v, r_sum, k, horizon, n_tau);
        if chance == deterministic_vo_contains(p, v_rel, r_sum, horizon) {
            disagreements += 1;
        }
    }
    verdict(
        disagreements == 0,
        format!("{compared} pairs, {disagreements} disagreements, {skipped} near-tangent pairs excluded"),
    )
}

fn empty_scenario() -> Verdict {
    let start = Instant::now();
    let report = run_batch(ScenarioKind::Empty, PlannerKind::Ofvo, &RunConfig::default(), 200, 0).expect("batch runs");
    let elapsed = start.elapsed();
    verdict(
        report.successes == 200 && elapsed < Duration::from_secs(60),
        format!("{}/200 success, {}", report.successes, secs(elapsed)),
    )
}

fn k_sweep() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for scenario in [ScenarioKind::Dynamic, ScenarioKind::Cross] {
        let reports = sweep_k(scenario, PlannerKind::Ofvo, &KS, &RunConfig::default(), 100, 0).expect("sweep runs");
        let rates: Vec<f64> = reports.iter().map(|r| r.success_rate).collect();
        let times: Vec<f64> = reports.iter().map(|r| r.mean_navigation_time.unwrap_or(f64::NAN)).collect();
        let rate_ok = rates.windows(2).all(|w| w[1] >= w[0]);
        let time_ok = times.windows(2).all(|w| w[1] >= w[0]);
        pass &= rate_ok && time_ok;
        parts.push(format!(
            "{scenario}: success {:?} ({}), time {:?} ({})",
            rates.iter().map(|r| (r * 100.0).round()).collect::<Vec<_>>(),
            if rate_ok { "non-decreasing" } else { "not monotone" },
            times.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>(),
            if time_ok { "non-decreasing" } else { "not monotone" },
        ));
    }
    verdict(pass, format!("k={KS:?}, 100 runs each; {}", parts.join("; ")))
}

fn partial_observation_advantage() -> Verdict {
    let mut config = RunConfig::default();
    config.episode.shadow = true;
    let ofvo = run_batch(ScenarioKind::Cross, PlannerKind::Ofvo, &config, 200, 0).expect("batch runs");
    let base = run_batch(ScenarioKind::Cross, PlannerKind::PrvoBaseline, &config, 200, 0).expect("batch runs");
    let gap = ofvo.success_rate - base.success_rate;
    let shadow = [ofvo.shadow, base.shadow].map(|s| s.expect("shadow enabled"));
    let steps: usize = shadow.iter().map(|s| s.steps).sum();
    let violations: usize = shadow.iter().map(|s| s.violations).sum();
    let max_excess = shadow.iter().map(|s| s.max_excess).max().unwrap_or(0);
    verdict(
        gap >= 0.10 - 1e-12 && violations == 0,
        format!(
            "ofvo {:.1}% vs baseline {:.1}% (gap {:+.1} pts); baseline count > ofvo count on {violations}/{steps} scenes, max excess {max_excess}",
            100.0 * ofvo.success_rate,
            100.0 * base.success_rate,
            100.0 * gap
        ),
    )
}

fn error_propagation() -> Verdict {
    let e = flow_displacement_error(4.09, 2.0, 457.0).expect("valid inputs");
    let rounded: f64 = format!("{e:.3e}").parse().expect("formatted float");
    verdict(rounded == 1.790e-2, format!("flow_displacement_error(4.09, 2, 457) = {e:.6} m"))
}

fn oracles() -> Verdict {
    let cam = PinholeCamera::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_pixel: f64 = 0.0;
    for _ in 0..10_000 {
        let (px, py) = (rng.random_range(0.0..cam.width as f64), rng.random_range(0.0..cam.height as f64));
        let depth = rng.random_range(0.2..10.0);
        let back = project_point(&cam, backproject_pixel(&cam, px, py, depth).expect("positive depth")).expect("in front");
        worst_pixel = worst_pixel.max((back.px - px).abs()).max((back.py - py).abs()).max((back.depth - depth).abs());
    }

    let mut world = WorldState::new(RobotState::new(Pose2::new(Vec2::ZERO, 0.0), 0.2), vec![], vec![]);
    let cmd = Command { linear: 1.0, angular: PI };
    for _ in 0..1000 {
        world.advance(cmd, 1e-3);
    }
    let arc_error = world.robot.pose.position.distance(Vec2::new(0.0, 2.0 / PI));

    let dir = tempfile::tempdir().expect("temp dir");
    let mut bytes = Vec::new();
    for (i, scenario) in [ScenarioKind::Dynamic, ScenarioKind::Social].into_iter().enumerate() {
        for rep in 0..2 {
            let result = run_seed(scenario, PlannerKind::Ofvo, &RunConfig::default(), 17).expect("episode runs");
            let trace = dir.path().join(format!("{i}_{rep}.jsonl"));
            write_trace(&trace, &result).expect("trace written");
            let batch = run_batch(scenario, PlannerKind::Ofvo, &RunConfig::default(), 8, 40).expect("batch runs");
            let csv = dir.path().join(format!("{i}_{rep}.csv"));
            write_runs_csv(&csv, &batch.rows).expect("csv written");
            bytes.push((std::fs::read(&trace).expect("trace"), std::fs::read(&csv).expect("csv")));
        }
    }
    let identical = bytes.chunks(2).all(|pair| pair[0] == pair[1]);

    verdict(
        worst_pixel <= 1e-9 && arc_error <= 1e-3 && identical,
        format!(
            "round-trip max error {worst_pixel:.1e}, semicircle endpoint error {arc_error:.1e} m, repeated seeds {}",
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 confidence bound", lemma1),
        ("2 clearance moments", theorem1),
        ("3 deterministic limit", deterministic_equivalence),
        ("4 empty scenario", empty_scenario),
        ("5 k-sweep trends", k_sweep),
        ("6 partial-observation advantage", partial_observation_advantage),
        ("7 error propagation", error_propagation),
        ("8 projection/integration/determinism", oracles),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!("criterion {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
