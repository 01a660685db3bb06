use crowdnav::bench::verify_theorem1;
use crowdnav::chance::{is_feasible_chance, relative_stats};
use crowdnav::geom::Vec2;
use crowdnav::perception::ObstacleObservation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Raw moments 1..=4 of a noncentral chi-square with 2 degrees of freedom,
/// from its cumulants `κ_n = 2^(n-1)·(n-1)!·(2 + n·λ)`.
fn ncx2_raw_moments(lambda: f64) -> [f64; 4] {
    let kappa = |n: i32| {
        let fact: f64 = (1..n).map(f64::from).product();
        2f64.powi(n - 1) * fact * (2.0 + f64::from(n) * lambda)
    };
    let (k1, k2, k3, k4) = (kappa(1), kappa(2), kappa(3), kappa(4));
    [
        k1,
        k2 + k1 * k1,
        k3 + 3.0 * k2 * k1 + k1.powi(3),
        k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4),
    ]
}

#[test]
fn scaled_clearance_follows_noncentral_chi_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (p, u, v, sp, sv, t) in [
        (Vec2::new(2.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::ZERO, 0.1, 0.05, 1.0),
        (Vec2::new(1.0, 1.5), Vec2::new(0.2, -0.6), Vec2::new(0.3, 0.8), 0.3, 0.2, 1.5),
        (Vec2::new(0.5, 0.2), Vec2::ZERO, Vec2::ZERO, 0.4, 0.3, 0.5),
    ] {
        let obs = ObstacleObservation::camera(p, u, sp, sv, 0.3).unwrap();
        let rel = relative_stats(&obs, v, t).unwrap();
        let s2 = rel.variance;
        let lambda = rel.mean.norm_sq() / s2;
        let expected = ncx2_raw_moments(lambda);

        let n = 1_000_000;
        let mut sums = [0.0f64; 4];
        for _ in 0..n {
            let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let pos = p + Vec2::new(z[0], z[1]) * sp;
            let vel = u + Vec2::new(z[2], z[3]) * sv;
            let x = (pos + vel * t - v * t).norm_sq() / s2;
            let mut power = 1.0;
            for s in &mut sums {
                power *= x;
                *s += power;
            }
        }
        for (order, (sum, want)) in sums.iter().zip(expected).enumerate() {
            let got = sum / n as f64;
            assert!(
                (got - want).abs() <= 0.02 * want,
                "lambda {lambda:.3}: raw moment {} sampled {got:.4} vs {want:.4}",
                order + 1
            );
        }
    }
}

#[test]
fn moments_match_monte_carlo_on_1000_configs() {
    let report = verify_theorem1(1000, 1_000_000, 21).unwrap();
    assert!(report.pass, "{report}");
}

#[test]
fn refining_the_time_grid_changes_no_verdict() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut flips = Vec::new();
    for case in 0..1000 {
        let p = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(0.5..6.0));
        let u = Vec2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let obs = ObstacleObservation::camera(p, u, rng.random_range(0.01..0.2), rng.random_range(0.01..0.5), 0.45)
            .unwrap();
        let k = rng.random_range(0.1..2.0);
        let coarse = is_feasible_chance(&obs, v, 0.65, k, 2.0, 10);
        let fine = is_feasible_chance(&obs, v, 0.65, k, 2.0, 100);
        if coarse != fine {
            flips.push(case);
        }
    }
    assert!(flips.is_empty(), "verdict changed at n_tau=100 for cases {flips:?}");
}

#[test]
fn vanishing_noise_recovers_the_deterministic_obstacle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let p = Vec2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let u = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r = rng.random_range(0.3..1.0);
        let rel = v - u;
        let clearance = (0..=20_000)
            .map(|i| (p - rel * (2.0 * i as f64 / 20_000.0)).norm())
            .fold(f64::INFINITY, f64::min);
        if (clearance - r).abs() < 1e-3 {
            continue;
        }
        let obs = ObstacleObservation::camera(p, u, 1e-9, 1e-9, 0.5).unwrap();
        for k in [0.1, 1.0, 3.0] {
            assert_eq!(is_feasible_chance(&obs, v, r, k, 2.0, 10), clearance > r, "p {p:?} u {u:?} v {v:?} r {r}");
        }
    }
}
