//! Monte-Carlo checks of the clearance moments and the Cantelli bound.
//!
//! Both checks sample the observation model directly: an obstacle position
//! `p ~ N(μ_p, σ_p²I)` and velocity `u ~ N(μ_u, σ_v²I)` give
//! `d_rel = p + u·t − v·t`. Configurations run in parallel, each on its own
//! stream of the seeded generator.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chance::{cantelli_bound, f_stats, ChanceStats};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::perception::ObstacleObservation;

pub const MIN_SAMPLES: usize = 100_000;
const REL_TOL: f64 = 0.01;
const MEAN_SE_TOL: f64 = 5.0;
const BOUND_SE_TOL: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigCheck {
    pub config: usize,
    pub label: String,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    /// Largest admissible `|empirical − analytic|` (one-sided for bounds).
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub test: String,
    pub configs: usize,
    pub samples: usize,
    pub checks: Vec<ConfigCheck>,
    pub pass: bool,
}

impl VerificationReport {
    fn new(test: &str, configs: usize, samples: usize, checks: Vec<ConfigCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            test: test.into(),
            configs,
            samples,
            checks,
            pass,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConfigCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures().count();
        writeln!(
            f,
            "{}: {} ({} configs, {} samples each, {}/{} checks passed)",
            self.test,
            if self.pass { "PASS" } else { "FAIL" },
            self.configs,
            self.samples,
            self.checks.len() - failed,
            self.checks.len()
        )?;
        for c in self.failures().take(10) {
            writeln!(
                f,
                "  config {} {}: analytic {:.6} empirical {:.6} (se {:.2e}, tol {:.2e})",
                c.config, c.label, c.analytic, c.empirical, c.std_error, c.tolerance
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Config {
    obs: ObstacleObservation,
    v: Vec2,
    t: f64,
    r_sum: f64,
}

impl Config {
    fn sample<R: Rng>(&self, rng: &mut R, scale: f64) -> (Vec2, Vec2) {
        let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let sp = self.obs.sigma_p * scale;
        let sv = self.obs.sigma_v.unwrap_or(0.0) * scale;
        let u = self.obs.mean_velocity.unwrap_or(Vec2::ZERO);
        let p = self.obs.mean_position + Vec2::new(z[0], z[1]) * sp;
        let u = u + Vec2::new(z[2], z[3]) * sv;
        (p, u)
    }

    fn d_rel(&self, p: Vec2, u: Vec2) -> Vec2 {
        p + u * self.t - self.v * self.t
    }

    fn variance(&self) -> f64 {
        let sv = self.obs.sigma_v.unwrap_or(0.0);
        self.obs.sigma_p.powi(2) + sv * sv * self.t * self.t
    }

    fn stats(&self) -> ChanceStats {
        f_stats(&self.obs, self.v, self.t, self.r_sum).expect("generated configs are valid")
    }
}

/// Builds a configuration whose relative mean is `mu_rel` and whose isotropic
/// relative variance is `s2`, splitting the variance randomly between
/// position and velocity noise.
fn realize<R: Rng>(rng: &mut R, mu_rel: Vec2, s2: f64, r_sum: f64) -> Config {
    let t = rng.random_range(0.1..=3.0);
    let share: f64 = rng.random_range(0.0..=1.0);
    let sigma_p = (share * s2).sqrt();
    let sigma_v = ((1.0 - share) * s2).sqrt() / t;
    let u = Vec2::new(rng.random_range(-1.5..=1.5), rng.random_range(-1.5..=1.5));
    let v = Vec2::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
    let p = mu_rel - (u - v) * t;
    let obs = ObstacleObservation::camera(p, u, sigma_p, sigma_v, 0.3).expect("non-negative sigmas");
    Config { obs, v, t, r_sum }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    Ok(())
}

/// Running mean and second central moment.
#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }
}

/// Compares sampled moments of `f = ‖d_rel‖² − r_sum²` with the closed forms.
///
/// Config 0 is noise-free. The mean is checked on `‖d_rel‖²`, which differs from
/// `f` only by the constant `r_sum²` and so has the same absolute error while
/// staying away from zero. A moment passes within 1% relative or within five
/// standard errors. Each config is resampled with doubled variance from the
/// same normal draws, and the sampled variance must grow.
pub fn verify_theorem1(n_configs: usize, n_samples: usize, seed: u64) -> Result<VerificationReport> {
    check_samples(n_samples)?;
    if n_configs == 0 {
        return Err(Error::invalid("n_configs must be >= 1"));
    }
    let checks: Vec<Vec<ConfigCheck>> = (0..n_configs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let mu_rel = Vec2::new(rng.random_range(-4.0..=4.0), rng.random_range(-4.0..=4.0));
            let s2 = if i == 0 { 0.0 } else { rng.random_range(0.0..=1.0f64).powi(2) * 0.8 };
            let r_sum = rng.random_range(0.3..=1.2);
            let cfg = realize(&mut rng, mu_rel, s2, r_sum);
            theorem1_config(i, &cfg, n_samples, &mut rng)
        })
        .collect();
    Ok(VerificationReport::new("theorem1", n_configs, n_samples, checks.concat()))
}

fn theorem1_config(i: usize, cfg: &Config, n: usize, rng: &mut ChaCha8Rng) -> Vec<ConfigCheck> {
    let stats = cfg.stats();
    let r2 = cfg.r_sum * cfg.r_sum;
    let mut base = Moments::default();
    let mut doubled = Moments::default();
    for _ in 0..n {
        let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        for (m, scale) in [(&mut base, 1.0), (&mut doubled, std::f64::consts::SQRT_2)] {
            let sp = cfg.obs.sigma_p * scale;
            let sv = cfg.obs.sigma_v.unwrap_or(0.0) * scale;
            let p = cfg.obs.mean_position + Vec2::new(z[0], z[1]) * sp;
            let u = cfg.obs.mean_velocity.unwrap_or(Vec2::ZERO) + Vec2::new(z[2], z[3]) * sv;
            m.push(cfg.d_rel(p, u).norm_sq() - r2);
        }
    }

    let s2 = cfg.variance();
    let m2 = (stats.mean + r2) - 2.0 * s2;
    let nf = n as f64;
    let mut out = Vec::with_capacity(3);

    let analytic_norm = stats.mean + r2;
    let se_mean = stats.std_dev / nf.sqrt();
    let tol_mean = (REL_TOL * analytic_norm.abs()).max(MEAN_SE_TOL * se_mean);
    let emp_norm = base.mean + r2;
    out.push(ConfigCheck {
        config: i,
        label: "mean |d_rel|^2".into(),
        analytic: analytic_norm,
        empirical: emp_norm,
        std_error: se_mean,
        tolerance: tol_mean,
        pass: (emp_norm - analytic_norm).abs() <= tol_mean,
    });

    // Fourth central moment of s²·χ'²₂(λ): s⁸·(48(2+4λ) + 12(2+2λ)²).
    let emp_std = base.variance().max(0.0).sqrt();
    let (se_std, pass_std, tol_std) = if s2 == 0.0 {
        (0.0, base.m2 == 0.0, 0.0)
    } else {
        let lambda = m2 / s2;
        let mu4 = s2.powi(4) * (48.0 * (2.0 + 4.0 * lambda) + 12.0 * (2.0 + 2.0 * lambda).powi(2));
        let var = stats.std_dev.powi(2);
        let se = ((mu4 - var * var) / nf).sqrt() / (2.0 * stats.std_dev);
        let tol = (REL_TOL * stats.std_dev).max(MEAN_SE_TOL * se);
        (se, (emp_std - stats.std_dev).abs() <= tol, tol)
    };
    out.push(ConfigCheck {
        config: i,
        label: "std f".into(),
        analytic: stats.std_dev,
        empirical: emp_std,
        std_error: se_std,
        tolerance: tol_std,
        pass: pass_std,
    });

    if s2 > 0.0 {
        let grows = doubled.variance() > base.variance();
        out.push(ConfigCheck {
            config: i,
            label: "variance grows with s^2".into(),
            analytic: 1.0,
            empirical: if grows { 1.0 } else { 0.0 },
            std_error: 0.0,
            tolerance: 0.0,
            pass: grows,
        });
    }
    out
}

/// Checks `P(f ≤ 0) ≤ 1/(1+k²)` on configurations that satisfy
/// `μ_f − k·σ_f > 0`.
///
/// For each k, one config is noise-free and must never violate. Of the rest,
/// half sit just inside the boundary with margin below `0.01·σ_f`. A config
/// passes when its violation frequency is at most the bound plus three
/// binomial standard errors evaluated at the bound.
pub fn verify_lemma1(ks: &[f64], n_configs: usize, n_samples: usize, seed: u64) -> Result<VerificationReport> {
    check_samples(n_samples)?;
    if ks.is_empty() || n_configs == 0 {
        return Err(Error::invalid("ks and n_configs must be non-empty"));
    }
    for &k in ks {
        cantelli_bound(k)?;
    }
    let jobs: Vec<(usize, f64, usize)> = ks
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| (0..n_configs).map(move |i| (ki, k, i)))
        .collect();
    let checks: Vec<ConfigCheck> = jobs
        .into_par_iter()
        .map(|(ki, k, i)| {
            let mut rng = rng_for(seed, (ki * n_configs + i) as u64);
            let cfg = boundary_config(&mut rng, k, i);
            lemma1_config(ki * n_configs + i, k, &cfg, n_samples, &mut rng)
        })
        .collect();
    Ok(VerificationReport::new("lemma1", ks.len() * n_configs, n_samples, checks))
}

fn boundary_config<R: Rng>(rng: &mut R, k: f64, i: usize) -> Config {
    let r_sum = rng.random_range(0.3..=1.0);
    let dir = Vec2::from_angle(rng.random_range(-PI..PI));
    if i == 0 {
        return realize(rng, dir * (r_sum + 0.05), 0.0, r_sum);
    }
    // Margin c·σ_f, with σ_f = 2s·x and x = sqrt(m² + s²), solved for x:
    // x² − 2s(k + c)x + s² − r² = 0. The bound on s keeps x ≥ s.
    let c = if i % 2 == 1 {
        rng.random_range(1e-6..0.01)
    } else {
        rng.random_range(0.01..=2.0)
    };
    let s = rng.random_range(0.02..=0.7) * r_sum;
    let a = k + c;
    let x = s * a + (s * s * (a * a - 1.0) + r_sum * r_sum).sqrt();
    let m = (x * x - s * s).max(0.0).sqrt();
    realize(rng, dir * m, s * s, r_sum)
}

fn lemma1_config(index: usize, k: f64, cfg: &Config, n: usize, rng: &mut ChaCha8Rng) -> ConfigCheck {
    let bound = 1.0 - cantelli_bound(k).expect("validated");
    let stats = cfg.stats();
    debug_assert!(stats.margin(k) > 0.0);
    let r2 = cfg.r_sum * cfg.r_sum;
    let violations = (0..n)
        .filter(|_| {
            let (p, u) = cfg.sample(rng, 1.0);
            cfg.d_rel(p, u).norm_sq() - r2 <= 0.0
        })
        .count();
    let empirical = violations as f64 / n as f64;
    let deterministic = cfg.variance() == 0.0;
    let se = (bound * (1.0 - bound) / n as f64).sqrt();
    let (tolerance, pass) = if deterministic {
        (0.0, violations == 0)
    } else {
        let tol = BOUND_SE_TOL * se;
        (tol, stats.margin(k) > 0.0 && empirical <= bound + tol)
    };
    ConfigCheck {
        config: index,
        label: format!("P(f<=0) k={k}"),
        analytic: bound,
        empirical,
        std_error: se,
        tolerance,
        pass,
    }
}
