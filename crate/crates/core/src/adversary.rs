//! Adversary-side inference of the private parameter.
//!
//! The occupancy-style adversary looks at the drift of the shared series: the
//! mean over the last `T_h` samples minus the mean over the `T_h` samples one
//! step earlier, divided by the state decay `a`. That difference equals
//! `(y_k - y_{k-T_h}) / T_h`, so it measures the per-step growth of the
//! series: for a slow first-order model `x_{k+1} = a x_k + b theta + w_k`
//! with `a` close to 1 it approaches `b theta`, while for faster dynamics it
//! only sees the start-up transient. The statistic is snapped to the nearest
//! candidate value.
//!
//! [`error_probability`] evaluates the full pipeline (prior draw, randomizer
//! draw, simulation, transform, estimate) by Monte Carlo, one independent
//! random stream per trial.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{config_err, domain_err, Result};
use crate::model::{sample_index, ModelRegistry, ParameterPrior};
use crate::randomizer::RandomizerPolicy;
use crate::seed::{stream_rng, DOMAIN_TRIALS};
use crate::transform::open_session;

/// Windowed drift estimator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEstimatorConfig {
    /// Window length `T_h`.
    pub window: usize,
    /// State decay `a`; must be non-zero.
    pub decay: f64,
    /// 1-based index of the last sample in the newer window; `None` uses the
    /// final sample.
    pub end: Option<usize>,
    /// Candidate parameter values for the nearest-value decision.
    pub candidates: Vec<f64>,
    /// Measurement component observed by the adversary.
    pub component: usize,
}

impl OccupancyEstimatorConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.window == 0 {
            return Err(config_err!("estimator window must be at least 1"));
        }
        if self.decay == 0.0 || !self.decay.is_finite() {
            return Err(config_err!("estimator decay must be finite and non-zero"));
        }
        if self.candidates.is_empty() || self.candidates.iter().any(|c| !c.is_finite()) {
            return Err(config_err!("estimator needs finite candidate values"));
        }
        let end = self.end.unwrap_or(horizon);
        if end > horizon || end < self.window + 1 {
            return Err(config_err!(
                "estimator windows ending at {end} with length {} do not fit a horizon of {horizon}",
                self.window
            ));
        }
        Ok(())
    }

    /// Statistic then nearest candidate, on a scalar series.
    pub fn estimate(&self, series: &[f64]) -> Result<f64> {
        let s = drift_statistic(series, self.window, self.decay, self.end)?;
        Ok(classify_theta(s, &self.candidates))
    }
}

/// `(mean(y[k-T_h+1..=k]) - mean(y[k-T_h..=k-1])) / a` with 1-based `k`
/// (defaulting to the series length).
pub fn drift_statistic(
    series: &[f64],
    window: usize,
    decay: f64,
    end: Option<usize>,
) -> Result<f64> {
    let k = end.unwrap_or(series.len());
    if window == 0 || k > series.len() || k < window + 1 {
        return Err(domain_err!(
            "drift statistic needs k >= T_h + 1 samples (k = {k}, T_h = {window}, available {})",
            series.len()
        ));
    }
    if decay == 0.0 {
        return Err(domain_err!("decay must be non-zero"));
    }
    let newer = &series[k - window..k];
    let older = &series[k - window - 1..k - 1];
    let n = window as f64;
    let diff = newer.iter().sum::<f64>() / n - older.iter().sum::<f64>() / n;
    Ok(diff / decay)
}

/// The statistic at every `k` from `T_h + 1` to the series length.
pub fn drift_statistic_trace(series: &[f64], window: usize, decay: f64) -> Result<Vec<f64>> {
    (window + 1..=series.len())
        .map(|k| drift_statistic(series, window, decay, Some(k)))
        .collect()
}

/// Nearest candidate; ties go to the smaller value.
pub fn classify_theta(statistic: f64, candidates: &[f64]) -> f64 {
    let mut best = f64::NAN;
    let mut best_dist = f64::INFINITY;
    for &c in candidates {
        let dist = (statistic - c).abs();
        if dist < best_dist || (dist == best_dist && c < best) || best.is_nan() {
            best = c;
            best_dist = dist;
        }
    }
    best
}

/// Everything needed to run one adversary trial.
#[derive(Debug, Clone)]
pub struct Pipeline<'r> {
    pub registry: &'r ModelRegistry,
    pub prior: ParameterPrior,
    /// Numeric parameter value of each prior entry.
    pub theta_values: Vec<f64>,
    pub policy: RandomizerPolicy,
    pub estimator: OccupancyEstimatorConfig,
    pub horizon: usize,
}

impl<'r> Pipeline<'r> {
    pub fn new(
        registry: &'r ModelRegistry,
        prior: ParameterPrior,
        theta_values: Vec<f64>,
        policy: RandomizerPolicy,
        estimator: OccupancyEstimatorConfig,
        horizon: usize,
    ) -> Result<Self> {
        if theta_values.len() != prior.len() {
            return Err(config_err!(
                "{} parameter values for {} prior entries",
                theta_values.len(),
                prior.len()
            ));
        }
        if policy.num_params() != prior.len() {
            return Err(config_err!(
                "policy has {} columns, prior has {} entries",
                policy.num_params(),
                prior.len()
            ));
        }
        if horizon == 0 {
            return Err(config_err!("horizon must be at least 1"));
        }
        estimator.validate(horizon)?;
        let dim = registry.model(prior.labels()[0])?.dim();
        if estimator.component >= dim {
            return Err(config_err!(
                "estimator component {} outside dimension {dim}",
                estimator.component
            ));
        }
        for &a in prior.labels() {
            for &b in policy.pseudo_labels() {
                open_session(registry, a, b)?;
            }
        }
        Ok(Self {
            registry,
            prior,
            theta_values,
            policy,
            estimator,
            horizon,
        })
    }
}

/// Reusable buffers for [`run_trial`].
#[derive(Debug, Default, Clone)]
pub struct TrialWorkspace {
    ys: Vec<f64>,
    out: Vec<f64>,
    series: Vec<f64>,
}

/// What happened in one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub theta_index: usize,
    pub pseudo_index: usize,
    pub statistic: f64,
    pub estimate: f64,
    pub error: bool,
}

/// Runs trial `index` of the stream rooted at `seed`.
pub fn run_trial(
    pipeline: &Pipeline<'_>,
    seed: u64,
    index: u64,
    ws: &mut TrialWorkspace,
) -> Result<TrialOutcome> {
    let mut rng = stream_rng(seed, DOMAIN_TRIALS, index);
    let i = sample_index(pipeline.prior.probs(), rng.random::<f64>());
    let j = pipeline.policy.sample_pseudo(i, rng.random::<f64>());
    let theta = pipeline.prior.labels()[i];
    let pseudo = pipeline.policy.pseudo_labels()[j];
    let model = pipeline.registry.model(theta)?;
    let d = model.dim();
    model.sample_path_into(&mut ws.ys, pipeline.horizon, &mut rng);
    ws.out.resize(d, 0.0);
    ws.series.clear();
    let mut session = open_session(pipeline.registry, theta, pseudo)?;
    for y in ws.ys.chunks_exact(d) {
        session.step_into(y, &mut ws.out, None)?;
        ws.series.push(ws.out[pipeline.estimator.component]);
    }
    let est = &pipeline.estimator;
    let statistic = drift_statistic(&ws.series, est.window, est.decay, est.end)?;
    let estimate = classify_theta(statistic, &est.candidates);
    Ok(TrialOutcome {
        theta_index: i,
        pseudo_index: j,
        statistic,
        estimate,
        error: estimate != pipeline.theta_values[i],
    })
}

/// Number of erroneous trials among `indices`.
pub fn count_errors(
    pipeline: &Pipeline<'_>,
    seed: u64,
    indices: core::ops::Range<u64>,
) -> Result<u64> {
    let mut ws = TrialWorkspace::default();
    let mut errors = 0;
    for t in indices {
        errors += run_trial(pipeline, seed, t, &mut ws)?.error as u64;
    }
    Ok(errors)
}

/// Empirical error probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub p_err: f64,
    /// Half-width of the one-sigma Wilson interval.
    pub std_error: f64,
    pub errors: u64,
    pub trials: u64,
}

/// Smallest trial count accepted by [`error_probability`].
pub const MIN_TRIALS: usize = 100;

impl ErrorEstimate {
    pub fn from_counts(errors: u64, trials: u64) -> Result<Self> {
        if trials == 0 || errors > trials {
            return Err(domain_err!("{errors} errors in {trials} trials"));
        }
        let n = trials as f64;
        let p = errors as f64 / n;
        let se = libm::sqrt(p * (1.0 - p) / n + 1.0 / (4.0 * n * n)) / (1.0 + 1.0 / n);
        Ok(Self {
            p_err: p,
            std_error: se,
            errors,
            trials,
        })
    }
}

/// Sequential Monte Carlo estimate of the adversary's error probability.
pub fn error_probability(
    pipeline: &Pipeline<'_>,
    n_trials: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    if n_trials < MIN_TRIALS {
        return Err(domain_err!(
            "need at least {MIN_TRIALS} trials, got {n_trials}"
        ));
    }
    let errors = count_errors(pipeline, seed, 0..n_trials as u64)?;
    ErrorEstimate::from_counts(errors, n_trials as u64)
}

/// Mean of the statistic per pseudo index over trials, for diagnostics.
pub fn statistic_means(
    pipeline: &Pipeline<'_>,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<(f64, usize)>> {
    let mut acc = vec![(0.0, 0usize); pipeline.policy.num_pseudo()];
    let mut ws = TrialWorkspace::default();
    for t in 0..n_trials as u64 {
        let o = run_trial(pipeline, seed, t, &mut ws)?;
        acc[o.pseudo_index].0 += o.statistic;
        acc[o.pseudo_index].1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(s, n)| (if n > 0 { s / n as f64 } else { f64::NAN }, n))
        .collect())
}
