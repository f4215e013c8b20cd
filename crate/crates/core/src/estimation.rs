//! Photon-counting simulation and maximum-likelihood estimation of a scalar
//! parameter, used to check that `1/(n·CFI)` is reached in practice.
//!
//! `θ` is the offset of the parameter from the scenario template: the sources
//! sit at `r₀ + a · scale · θ`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher::{self, detection_probabilities};
use crate::geometry::{build_amplitude_matrix, displace, Parameter, Scenario};
use crate::interferometer::Interferometer;

/// Points in the coarse likelihood scan.
pub const GRID_POINTS: usize = 64;
/// Golden-section tolerance as a fraction of the search interval.
pub const SEARCH_RTOL: f64 = 1e-8;
/// Default half-width of the search interval in predicted standard deviations.
pub const DEFAULT_HALF_WIDTH_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRecord {
    pub counts: Vec<u64>,
    pub n_photons: u64,
    pub seed: u64,
    pub true_theta: f64,
}

impl DetectionRecord {
    pub fn new(counts: Vec<u64>, seed: u64, true_theta: f64) -> Self {
        let n_photons = counts.iter().sum();
        Self {
            counts,
            n_photons,
            seed,
            true_theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub theta_hat: f64,
    pub log_likelihood: f64,
    /// `1/(n·CFI)` at the true parameter.
    pub fisher_predicted_variance: f64,
    /// Across trials; `None` for a single estimate.
    pub empirical_variance: Option<f64>,
    pub trials: usize,
}

/// Detection probabilities at offset `theta` from the template.
pub fn probabilities_at(
    scenario: &Scenario,
    param: &Parameter,
    r: &Interferometer,
    theta: f64,
) -> Result<Vec<f64>> {
    let moved = displace(scenario, &param.direction, param.to_coordinate_step(theta))?;
    detection_probabilities(&build_amplitude_matrix(&moved)?, r)
}

/// Multinomial draw of `n` photons from `p`, by sequential binomials.
pub fn sample_counts(p: &[f64], n: u64, rng: &mut impl RngCore) -> Vec<u64> {
    let mut counts = vec![0; p.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (q, &pq) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if q + 1 == p.len() {
            counts[q] = left;
            break;
        }
        let frac = if mass > 0.0 {
            (pq / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(left, frac)
            .expect("probability in [0, 1]")
            .sample(rng);
        counts[q] = k;
        left -= k;
        mass -= pq;
    }
    counts
}

/// Simulates `n` detected photons with the sources at offset `theta_true`.
pub fn sample_detections(
    scenario: &Scenario,
    param: &Parameter,
    theta_true: f64,
    r: &Interferometer,
    n: u64,
    seed: u64,
) -> Result<DetectionRecord> {
    if n == 0 {
        return Err(Error::Validation("photon number must be at least 1".into()));
    }
    let p = probabilities_at(scenario, param, r, theta_true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DetectionRecord::new(
        sample_counts(&p, n, &mut rng),
        seed,
        theta_true,
    ))
}

fn log_likelihood(counts: &[u64], p: &[f64]) -> f64 {
    counts
        .iter()
        .zip(p)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &pq)| {
            if pq > 0.0 {
                c as f64 * pq.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// Maximum-likelihood `θ` on `[lo, hi]`: a 64-point scan then golden-section refinement.
///
/// Fails with [`Error::NonIdentifiable`] when no probability moves over the
/// interval and with [`Error::Precondition`] when the scanned likelihood has
/// more than one local maximum.
pub fn mle_estimate(
    record: &DetectionRecord,
    scenario: &Scenario,
    param: &Parameter,
    r: &Interferometer,
    interval: (f64, f64),
) -> Result<EstimationResult> {
    let (theta_hat, log_likelihood) = mle_search(record, scenario, param, r, interval)?;
    let cfi = cfi_at(scenario, param, r, record.true_theta)?;
    Ok(EstimationResult {
        theta_hat,
        log_likelihood,
        fisher_predicted_variance: 1.0 / (record.n_photons as f64 * cfi),
        empirical_variance: None,
        trials: 1,
    })
}

fn mle_search(
    record: &DetectionRecord,
    scenario: &Scenario,
    param: &Parameter,
    r: &Interferometer,
    interval: (f64, f64),
) -> Result<(f64, f64)> {
    let (lo, hi) = interval;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Validation(format!(
            "bad search interval [{lo}, {hi}]"
        )));
    }
    if record.counts.len() != scenario.n_collectors() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} counts", scenario.n_collectors()),
            got: format!("{}", record.counts.len()),
        });
    }
    let probs = |t: f64| probabilities_at(scenario, param, r, t);
    let ll = |t: f64| probs(t).map(|p| log_likelihood(&record.counts, &p));

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let grid_p = grid.iter().map(|&t| probs(t)).collect::<Result<Vec<_>>>()?;
    let spread = (0..scenario.n_collectors())
        .map(|q| {
            let (mn, mx) = grid_p
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                    (a.min(p[q]), b.max(p[q]))
                });
            mx - mn
        })
        .fold(0.0, f64::max);
    if spread < 1e-12 {
        return Err(Error::NonIdentifiable(format!(
            "detection probabilities vary by {spread:.1e} over [{lo}, {hi}]"
        )));
    }
    let values: Vec<f64> = grid_p
        .iter()
        .map(|p| log_likelihood(&record.counts, p))
        .collect();
    let best = (0..GRID_POINTS)
        .max_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("non-empty grid");
    let slack = 1e-9 * values[best].abs().max(1.0);
    let rising = values[..=best]
        .windows(2)
        .all(|w| w[1] >= w[0] - slack || w[0] == f64::NEG_INFINITY);
    let falling = values[best..].windows(2).all(|w| w[1] <= w[0] + slack);
    if !(rising && falling) {
        return Err(Error::Precondition(format!(
            "log-likelihood is not unimodal on [{lo}, {hi}]; narrow the search interval"
        )));
    }

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(GRID_POINTS - 1)];
    let tol = SEARCH_RTOL * (hi - lo);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = ll(x1)?;
    let mut f2 = ll(x2)?;
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = ll(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = ll(x1)?;
        }
    }
    let mut theta_hat = 0.5 * (a + b);
    let mut best_ll = ll(theta_hat)?;
    // The maximum can sit on the interval boundary.
    if values[best] > best_ll {
        theta_hat = grid[best];
        best_ll = values[best];
    }
    Ok((theta_hat, best_ll))
}

fn cfi_at(scenario: &Scenario, param: &Parameter, r: &Interferometer, theta: f64) -> Result<f64> {
    let moved = displace(scenario, &param.direction, param.to_coordinate_step(theta))?;
    Ok(fisher::cfi(&moved, param, r)?.cfi.unwrap_or(0.0))
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub theta_hat: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub photons: u64,
    pub trials: usize,
    pub seed: u64,
    /// True offset of the parameter.
    pub theta_true: f64,
    /// Center of the default search interval.
    pub prior_center: f64,
    /// Overrides the default `±10σ` interval.
    pub interval: Option<(f64, f64)>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn new(photons: u64, trials: usize, seed: u64) -> Self {
        Self {
            photons,
            trials,
            seed,
            theta_true: 0.0,
            prior_center: 0.0,
            interval: None,
            threads: None,
        }
    }
}

/// Aggregate of a Monte-Carlo sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrbSweep {
    pub result: EstimationResult,
    pub cfi: f64,
    pub qfi: f64,
    /// `empirical_variance · n · CFI`.
    pub ratio: f64,
    pub theta_true: f64,
    pub bias: f64,
    /// Standard error of the mean estimate.
    pub bias_standard_error: f64,
    pub interval: (f64, f64),
    pub photons: u64,
    #[serde(skip)]
    pub per_trial: Vec<TrialRecord>,
}

impl CrbSweep {
    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "trial,seed,theta_hat,log_likelihood")?;
        for t in &self.per_trial {
            writeln!(
                out,
                "{},{},{:.17e},{:.17e}",
                t.trial, t.seed, t.theta_hat, t.log_likelihood
            )?;
        }
        Ok(())
    }
}

/// Seeds for each trial, derived deterministically from the master seed.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Repeats sampling and estimation, and compares the spread with `1/(n·CFI)`.
pub fn crb_sweep(
    scenario: &Scenario,
    param: &Parameter,
    r: &Interferometer,
    cfg: &SweepConfig,
) -> Result<CrbSweep> {
    if cfg.trials < 100 {
        return Err(Error::Validation(format!(
            "need at least 100 trials, got {}",
            cfg.trials
        )));
    }
    if cfg.photons == 0 {
        return Err(Error::Validation("photon number must be at least 1".into()));
    }
    let cfi = cfi_at(scenario, param, r, cfg.theta_true)?;
    let moved = displace(
        scenario,
        &param.direction,
        param.to_coordinate_step(cfg.theta_true),
    )?;
    let qfi = fisher::qfi(&moved, param)?.qfi.unwrap_or(0.0);
    if !(cfi > 0.0) {
        return Err(Error::NonIdentifiable(format!(
            "classical Fisher information is {cfi:e}"
        )));
    }
    let n = cfg.photons as f64;
    let predicted = 1.0 / (n * cfi);
    let interval = cfg.interval.unwrap_or_else(|| {
        let w = DEFAULT_HALF_WIDTH_SIGMAS * predicted.sqrt();
        (cfg.prior_center - w, cfg.prior_center + w)
    });

    let seeds = trial_seeds(cfg.seed, cfg.trials);
    let run = |(trial, &seed): (usize, &u64)| -> Result<TrialRecord> {
        let record = sample_detections(scenario, param, cfg.theta_true, r, cfg.photons, seed)?;
        let (theta_hat, log_likelihood) = mle_search(&record, scenario, param, r, interval)?;
        Ok(TrialRecord {
            trial,
            seed,
            theta_hat,
            log_likelihood,
        })
    };
    let per_trial = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Validation(format!("cannot build worker pool: {e}")))?
            .install(|| {
                seeds
                    .par_iter()
                    .enumerate()
                    .map(run)
                    .collect::<Result<Vec<_>>>()
            })?,
        None => seeds
            .par_iter()
            .enumerate()
            .map(run)
            .collect::<Result<Vec<_>>>()?,
    };

    let m = per_trial.len() as f64;
    let mean = per_trial.iter().map(|t| t.theta_hat).sum::<f64>() / m;
    let var = per_trial
        .iter()
        .map(|t| (t.theta_hat - mean).powi(2))
        .sum::<f64>()
        / (m - 1.0);
    let result = EstimationResult {
        theta_hat: mean,
        // mean of the per-trial maxima
        log_likelihood: per_trial.iter().map(|t| t.log_likelihood).sum::<f64>() / m,
        fisher_predicted_variance: predicted,
        empirical_variance: Some(var),
        trials: cfg.trials,
    };
    Ok(CrbSweep {
        result,
        cfi,
        qfi,
        ratio: var * n * cfi,
        theta_true: cfg.theta_true,
        bias: mean - cfg.theta_true,
        bias_standard_error: (var / m).sqrt(),
        interval,
        photons: cfg.photons,
        per_trial,
    })
}
