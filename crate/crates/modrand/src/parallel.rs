//! Work-pool versions of the Monte Carlo estimators.
//!
//! Each path or trial owns a random stream selected by its index, and results
//! are reduced in index order, so the output is identical to the sequential
//! estimators in `modrand_core` for any thread count.

use anyhow::Result;
use modrand_core::adversary::{count_errors, ErrorEstimate, Pipeline, MIN_TRIALS};
use modrand_core::randomizer::{
    distortion_path_sample, validate_estimation, DistortionFunction, DistortionMatrix,
};
use modrand_core::{ModelHandle, ModelRegistry, ParameterPrior};
use rayon::prelude::*;

const TRIAL_CHUNK: u64 = 4096;

pub fn estimate_distortion_matrix(
    registry: &ModelRegistry,
    prior: &ParameterPrior,
    pseudo: &[ModelHandle],
    horizon: usize,
    distortion: DistortionFunction,
    n_paths: usize,
    seed: u64,
) -> Result<DistortionMatrix> {
    validate_estimation(registry, prior, pseudo, horizon, n_paths)?;
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| distortion_path_sample(registry, prior, pseudo, horizon, distortion, seed, p))
        .collect::<Result<Vec<_>, _>>()?;
    let d = registry.model(prior.labels()[0])?.dim();
    Ok(DistortionMatrix::from_samples(
        prior.len(),
        pseudo.to_vec(),
        horizon * d,
        samples,
    )?)
}

pub fn error_probability(
    pipeline: &Pipeline<'_>,
    n_trials: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    if n_trials < MIN_TRIALS {
        anyhow::bail!("need at least {MIN_TRIALS} trials, got {n_trials}");
    }
    let n = n_trials as u64;
    let chunks: Vec<u64> = (0..n.div_ceil(TRIAL_CHUNK)).collect();
    let errors = chunks
        .into_par_iter()
        .map(|c| {
            count_errors(
                pipeline,
                seed,
                c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(n),
            )
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    Ok(ErrorEstimate::from_counts(errors, n)?)
}
