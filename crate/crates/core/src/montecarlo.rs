//! Simulated measurement campaigns with planted error structure.
//!
//! A trial is one complete campaign under one realized measurement
//! condition: every shared error component is drawn once for the trial,
//! every independent component once per observation, and the resulting
//! observations are adjusted. Across trials all conditions vary.
//!
//! # Reproducibility
//!
//! Trials are processed in chunks of [`CHUNK_TRIALS`]. Chunk `c` draws from
//! a ChaCha8 generator seeded with `seed` (via `seed_from_u64`) on stream
//! `c`, so its values do not depend on how many threads run or in which
//! order chunks finish. Chunk results are concatenated in chunk order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::adjustment::{Adjuster, DesignMatrix};
use crate::distributions::{Center, RegularErrorDistribution};
use crate::error::{Error, Result};
use crate::error_model::{CovarianceMatrix, ErrorBudget, Sharing};

pub const CHUNK_TRIALS: usize = 4096;

/// Generator of chunk `chunk` for a campaign seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub design: DesignMatrix,
    pub true_values: Vec<f64>,
    pub budget: ErrorBudget,
    /// Independent per-observation component on top of the budget.
    pub noise: RegularErrorDistribution,
    pub trials: usize,
    pub seed: u64,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials", "at least one trial is required"));
        }
        if self.true_values.len() != self.design.parameters() {
            return Err(Error::dimension("true_values", self.design.parameters(), self.true_values.len()));
        }
        if self.true_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("true_values", "must be finite"));
        }
        self.noise.validate()?;
        let n = self.design.observations();
        for source in self.budget.sources() {
            if let crate::error_model::SourceKind::Custom { coefficients } = source.kind() {
                if coefficients.len() != n {
                    return Err(Error::dimension("coefficients", n, coefficients.len()));
                }
            }
        }
        Ok(())
    }

    /// Error-free observations `A·true`.
    pub fn true_observations(&self) -> Result<Vec<f64>> {
        self.design.apply(&self.true_values)
    }

    /// Covariance of the observation errors: the budget evaluated at the
    /// error-free observations plus the noise variance on the diagonal.
    pub fn observation_covariance(&self) -> Result<CovarianceMatrix> {
        let x = self.true_observations()?;
        let noise = CovarianceMatrix::diagonal(&vec![self.noise.variance(); x.len()])?;
        if self.budget.is_empty() {
            return Ok(noise);
        }
        &self.budget.observation_covariance(&x)? + &noise
    }

    /// Analytic covariance of the adjusted-value errors.
    pub fn analytic_estimate_covariance(&self) -> Result<CovarianceMatrix> {
        Adjuster::new(self.design.clone())?.estimate_covariance(&self.observation_covariance()?)
    }
}

/// Row-major table with one row per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTable {
    cols: usize,
    data: Vec<f64>,
}

impl TrialTable {
    fn with_capacity(rows: usize, cols: usize) -> Self {
        TrialTable {
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    fn append(&mut self, other: TrialTable) {
        self.data.extend(other.data);
    }
}

/// Per-trial observations and adjusted results.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub true_values: Vec<f64>,
    pub true_observations: Vec<f64>,
    pub observations: TrialTable,
    pub estimates: TrialTable,
    pub residuals: TrialTable,
    pub sigma_unit: Vec<f64>,
}

impl CampaignOutcome {
    pub fn trials(&self) -> usize {
        self.sigma_unit.len()
    }

    /// Errors of the adjusted values, `Y − true`, one row per trial.
    pub fn estimate_errors(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.estimates
            .iter_rows()
            .map(|row| row.iter().zip(&self.true_values).map(|(y, t)| y - t).collect())
    }

    /// Empirical covariance of the adjusted-value errors about zero.
    pub fn estimate_error_covariance(&self) -> Result<CovarianceMatrix> {
        let mut acc = CovarianceAccumulator::new(self.true_values.len());
        for e in self.estimate_errors() {
            acc.push(&e)?;
        }
        acc.finish(Center::Zero)
    }

    pub fn mean_sigma_unit(&self) -> f64 {
        self.sigma_unit.iter().sum::<f64>() / self.sigma_unit.len() as f64
    }
}

struct Chunk {
    observations: TrialTable,
    estimates: TrialTable,
    residuals: TrialTable,
    sigma_unit: Vec<f64>,
}

/// Runs every trial of `spec`. Deterministic for a given spec and seed.
pub fn simulate(spec: &CampaignSpec) -> Result<CampaignOutcome> {
    spec.validate()?;
    let adjuster = Adjuster::new(spec.design.clone())?;
    let x_true = spec.true_observations()?;
    let chunks = spec.trials.div_ceil(CHUNK_TRIALS);

    let results: Vec<Chunk> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_TRIALS;
            let len = CHUNK_TRIALS.min(spec.trials - start);
            run_chunk(spec, &adjuster, &x_true, chunk_rng(spec.seed, c as u64), len)
        })
        .collect::<Result<_>>()?;

    let n = spec.design.observations();
    let t = spec.design.parameters();
    let mut outcome = CampaignOutcome {
        true_values: spec.true_values.clone(),
        true_observations: x_true,
        observations: TrialTable::with_capacity(spec.trials, n),
        estimates: TrialTable::with_capacity(spec.trials, t),
        residuals: TrialTable::with_capacity(spec.trials, n),
        sigma_unit: Vec::with_capacity(spec.trials),
    };
    for chunk in results {
        outcome.observations.append(chunk.observations);
        outcome.estimates.append(chunk.estimates);
        outcome.residuals.append(chunk.residuals);
        outcome.sigma_unit.extend(chunk.sigma_unit);
    }
    Ok(outcome)
}

fn run_chunk(
    spec: &CampaignSpec,
    adjuster: &Adjuster,
    x_true: &[f64],
    mut rng: ChaCha8Rng,
    len: usize,
) -> Result<Chunk> {
    let n = x_true.len();
    let t = spec.true_values.len();
    let mut chunk = Chunk {
        observations: TrialTable::with_capacity(len, n),
        estimates: TrialTable::with_capacity(len, t),
        residuals: TrialTable::with_capacity(len, n),
        sigma_unit: Vec::with_capacity(len),
    };
    let mut errors = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..len {
        draw_errors(spec, x_true, &mut rng, &mut errors)?;
        for i in 0..n {
            x[i] = x_true[i] + errors[i];
        }
        let fit = adjuster.fit(&x)?;
        chunk.observations.data.extend_from_slice(&x);
        chunk.estimates.data.extend(fit.measured_values.iter());
        chunk.residuals.data.extend(fit.residuals.iter());
        chunk.sigma_unit.push(fit.sigma_unit);
    }
    Ok(chunk)
}

/// One realization of the observation errors.
///
/// Source values are normal with the declared sigma and are drawn in budget
/// order: one value for a shared source, `n` values for an independent one.
/// The noise component follows, one value per observation.
fn draw_errors<R: Rng>(spec: &CampaignSpec, x_true: &[f64], rng: &mut R, out: &mut [f64]) -> Result<()> {
    let sources = spec.budget.sources();
    let n = x_true.len();
    let mut per_source: Vec<Vec<f64>> = Vec::with_capacity(sources.len());
    for source in sources {
        let draws = match source.sharing() {
            Sharing::SharedAcrossObservations => vec![normal(rng, source.sigma()); n],
            Sharing::IndependentPerObservation => (0..n).map(|_| normal(rng, source.sigma())).collect(),
        };
        per_source.push(draws);
    }
    let mut realization = vec![0.0; sources.len()];
    for i in 0..n {
        for (slot, draws) in realization.iter_mut().zip(&per_source) {
            *slot = draws[i];
        }
        let composed = if sources.is_empty() {
            0.0
        } else {
            spec.budget.compose_error(&realization, i, x_true[i])?
        };
        out[i] = composed + spec.noise.draw(rng);
    }
    Ok(())
}

fn normal<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Streaming estimator of `E(ΔX ΔXᵀ)` with divisor `n`.
///
/// Keeps the running mean and co-moment (Welford/Chan updates) so the
/// covariance about the mean is available as well as about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    // upper triangle, row-major, of Σ (x − mean)(x − mean)ᵀ
    comoment: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        CovarianceAccumulator {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.dim {
            return Err(Error::dimension("samples", self.dim, sample.len()));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("samples", "samples must be finite"));
        }
        self.count += 1;
        let k = self.count as f64;
        let delta: Vec<f64> = sample.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / k;
        }
        for (i, (x, m)) in sample.iter().zip(&self.mean).enumerate() {
            let after_i = x - m;
            for (j, d) in delta.iter().enumerate().skip(i) {
                self.comoment[i * self.dim + j] += d * after_i;
            }
        }
        Ok(())
    }

    /// Combines two accumulators as if all samples had been pushed into one.
    pub fn merge(&mut self, other: &CovarianceAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::dimension("samples", self.dim, other.dim));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..self.dim {
            for j in i..self.dim {
                self.comoment[i * self.dim + j] +=
                    other.comoment[i * self.dim + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn finish(&self, center: Center) -> Result<CovarianceMatrix> {
        if self.count < 2 {
            return Err(Error::input("samples", "at least two samples are required"));
        }
        let n = self.count as f64;
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let mut v = self.comoment[i * self.dim + j] / n;
                if center == Center::Zero {
                    v += self.mean[i] * self.mean[j];
                }
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        CovarianceMatrix::new(m)
    }
}

/// `(1/n)·Σ ΔX·ΔXᵀ` about zero (errors) or about the sample mean.
pub fn empirical_covariance<S: AsRef<[f64]>>(samples: &[S], center: Center) -> Result<CovarianceMatrix> {
    let dim = samples.first().map_or(0, |s| s.as_ref().len());
    if dim == 0 {
        return Err(Error::input("samples", "samples must be non-empty vectors"));
    }
    let mut acc = CovarianceAccumulator::new(dim);
    for s in samples {
        acc.push(s.as_ref())?;
    }
    acc.finish(center)
}
