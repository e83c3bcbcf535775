//! Experiment orchestration behind the CLI subcommands.

use std::fs::{self, File};
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use modrand_core::adversary::{drift_statistic, Pipeline};
use modrand_core::gauss_markov::{GmModel, GmParameter};
use modrand_core::infotheory::{nats_to_bits, PrivacyReport};
use modrand_core::randomizer::{
    mean_signal, relative_distortion_percent, solve_randomizer, DistortionMatrix, RandomizerPolicy,
    RandomizerSolution,
};
use modrand_core::seed::{stream_rng, DOMAIN_NOISE, DOMAIN_PATHS};
use modrand_core::transform::open_session;
use modrand_core::ParameterPrior;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BaselineSpec, Experiment, ExperimentConfig};
use crate::parallel;

pub fn estimate_distortion(
    config: &ExperimentConfig,
    exp: &Experiment,
) -> Result<DistortionMatrix> {
    parallel::estimate_distortion_matrix(
        &exp.registry,
        &exp.prior,
        &exp.pseudo,
        config.horizon,
        config.distortion.into(),
        config.n_paths,
        config.seed,
    )
}

pub fn write_distortion_csv(
    exp: &Experiment,
    matrix: &DistortionMatrix,
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "theta",
        "pseudo",
        "distortion",
        "std_error",
        "saturation_fraction",
        "flagged",
        "samples",
    ])?;
    for (i, &theta) in exp.prior.labels().iter().enumerate() {
        for (j, &pseudo) in matrix.pseudo_labels.iter().enumerate() {
            let sat = matrix.saturation[i][j];
            w.write_record([
                exp.name_of(theta).to_string(),
                exp.name_of(pseudo).to_string(),
                fmt(matrix.values[i][j]),
                fmt(matrix.std_errors[i][j]),
                fmt(sat),
                (sat > modrand_core::randomizer::SATURATION_FLAG).to_string(),
                matrix.samples.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A solved randomizer as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyFile {
    /// Parameter model names (columns).
    pub params: Vec<String>,
    /// Prior probabilities of the parameters.
    pub prior: Vec<f64>,
    /// Pseudo model names (rows).
    pub pseudo: Vec<String>,
    /// `matrix[j][i] = P(pseudo j | parameter i)`.
    pub matrix: Vec<Vec<f64>>,
    /// Leakage budget in nats.
    pub i0: f64,
    pub mutual_information: f64,
    pub expected_distortion: f64,
}

impl PolicyFile {
    pub fn new(exp: &Experiment, solution: &RandomizerSolution, i0: f64) -> Self {
        Self {
            params: exp
                .prior
                .labels()
                .iter()
                .map(|&h| exp.name_of(h).to_string())
                .collect(),
            prior: exp.prior.probs().to_vec(),
            pseudo: solution
                .policy
                .pseudo_labels()
                .iter()
                .map(|&h| exp.name_of(h).to_string())
                .collect(),
            matrix: solution.policy.matrix().to_vec(),
            i0,
            mutual_information: solution.mutual_information,
            expected_distortion: solution.distortion,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Rebuilds the prior and policy over placeholder handles; only the
    /// numbers matter for leakage accounting.
    pub fn to_core(&self) -> Result<(ParameterPrior, RandomizerPolicy)> {
        let mut reg = modrand_core::ModelRegistry::new();
        let m = modrand_core::model::independent_iid(
            modrand_core::model::DensityKind::Gaussian,
            &[0.0],
            &[1.0],
        )?;
        let mut fresh = |n: usize| -> Result<Vec<_>> {
            (0..n)
                .map(|_| Ok(reg.register(modrand_core::ModelDescriptor::Iid(m.clone()))?))
                .collect()
        };
        let params = fresh(self.prior.len())?;
        let pseudo = fresh(self.matrix.len())?;
        if self.params.len() != self.prior.len() || self.pseudo.len() != self.matrix.len() {
            bail!("policy file: name lists do not match prior and matrix sizes");
        }
        let prior = ParameterPrior::new(params, self.prior.clone())?;
        let policy = RandomizerPolicy::new(self.matrix.clone(), pseudo)?;
        if policy.num_params() != prior.len() {
            bail!(
                "policy has {} columns but the prior has {} entries",
                policy.num_params(),
                prior.len()
            );
        }
        Ok((prior, policy))
    }
}

pub fn privacy_report(policy: &PolicyFile) -> Result<PrivacyReport> {
    let (prior, p) = policy.to_core()?;
    Ok(PrivacyReport::new(&prior, &p, policy.i0)?)
}

/// JSON form of a [`PrivacyReport`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportJson {
    pub units: String,
    pub h_theta: f64,
    pub i_theta_thetatilde: f64,
    pub fano_lower_bound: f64,
    pub fano_raw: f64,
    pub leakage_budget: f64,
}

impl ReportJson {
    pub fn new(r: PrivacyReport, bits: bool) -> Self {
        let r = if bits { r.in_bits() } else { r };
        Self {
            units: if bits { "bits" } else { "nats" }.into(),
            h_theta: r.h_theta,
            i_theta_thetatilde: r.i_theta_thetatilde,
            fano_lower_bound: r.fano_lower_bound,
            fano_raw: r.fano_raw,
            leakage_budget: r.leakage_budget,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepRow {
    pub i0: f64,
    pub relative_distortion_percent: f64,
    pub achieved_mi: f64,
    pub p_err: f64,
    pub p_err_se: f64,
    pub fano_bound: f64,
    pub fano_raw: f64,
    pub expected_distortion: f64,
    pub errors: u64,
    pub trials: u64,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub matrix: DistortionMatrix,
    pub mean_signal: f64,
    pub rows: Vec<SweepRow>,
    pub policies: Vec<PolicyFile>,
    pub reports: Vec<PrivacyReport>,
}

/// Solves the randomizer at every budget and evaluates distortion and the
/// adversary. All budgets share the distortion estimate and the trial
/// streams.
pub fn run_sweep(config: &ExperimentConfig, exp: &Experiment) -> Result<Sweep> {
    let matrix = estimate_distortion(config, exp)?;
    sweep_with_matrix(config, exp, matrix, config.n_trials)
}

pub fn sweep_with_matrix(
    config: &ExperimentConfig,
    exp: &Experiment,
    matrix: DistortionMatrix,
    n_trials: usize,
) -> Result<Sweep> {
    let signal = mean_signal(&matrix, &exp.prior);
    let mut rows = Vec::new();
    let mut policies = Vec::new();
    let mut reports = Vec::new();
    for &i0 in &config.i0_grid {
        let solution = solve_randomizer(&matrix, &exp.prior, i0)?;
        let report = PrivacyReport::new(&exp.prior, &solution.policy, i0)?;
        let pipeline = Pipeline::new(
            &exp.registry,
            exp.prior.clone(),
            exp.theta_values.clone(),
            solution.policy.clone(),
            exp.estimator.clone(),
            config.horizon,
        )?;
        let err = parallel::error_probability(&pipeline, n_trials, config.seed)?;
        rows.push(SweepRow {
            i0,
            relative_distortion_percent: relative_distortion_percent(solution.distortion, signal),
            achieved_mi: solution.mutual_information,
            p_err: err.p_err,
            p_err_se: err.std_error,
            fano_bound: report.fano_lower_bound,
            fano_raw: report.fano_raw,
            expected_distortion: solution.distortion,
            errors: err.errors,
            trials: err.trials,
        });
        policies.push(PolicyFile::new(exp, &solution, i0));
        reports.push(report);
    }
    Ok(Sweep {
        matrix,
        mean_signal: signal,
        rows,
        policies,
        reports,
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path, bits: bool) -> Result<()> {
    let mut w = csv_writer(path)?;
    let unit = if bits { "bits" } else { "nats" };
    w.write_record([
        format!("i0_{unit}"),
        "relative_distortion_percent".into(),
        format!("achieved_mi_{unit}"),
        "p_err".into(),
        "p_err_se".into(),
        "fano_bound".into(),
        "fano_raw".into(),
        "expected_distortion".into(),
        "errors".into(),
        "trials".into(),
    ])?;
    let conv = |x: f64| if bits { nats_to_bits(x) } else { x };
    for r in rows {
        w.write_record([
            fmt(conv(r.i0)),
            fmt(r.relative_distortion_percent),
            fmt(conv(r.achieved_mi)),
            fmt(r.p_err),
            fmt(r.p_err_se),
            fmt(r.fano_bound),
            fmt(r.fano_raw),
            fmt(r.expected_distortion),
            r.errors.to_string(),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sweep.csv`, `distortion.csv`, `policies.json` and `reports.json`.
pub fn write_sweep(exp: &Experiment, sweep: &Sweep, dir: &Path, bits: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_sweep_csv(&sweep.rows, &dir.join("sweep.csv"), bits)?;
    write_distortion_csv(exp, &sweep.matrix, &dir.join("distortion.csv"))?;
    write_json(&dir.join("policies.json"), &sweep.policies)?;
    let reports: Vec<ReportJson> = sweep
        .reports
        .iter()
        .map(|r| ReportJson::new(*r, bits))
        .collect();
    write_json(&dir.join("reports.json"), &reports)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BaselineRow {
    pub theta: f64,
    pub k: usize,
    /// First run, unperturbed measurements.
    pub estimate_clean: f64,
    /// First run, with additive noise.
    pub estimate_noisy: f64,
    pub mean_clean: f64,
    pub mean_noisy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSummary {
    pub theta: f64,
    /// Fraction of runs whose final noisy estimate is within 0.5 of theta.
    pub final_within_half: f64,
    pub final_mean_noisy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub rows: Vec<BaselineRow>,
    pub summary: Vec<BaselineSummary>,
}

/// Drift-estimator traces on raw measurements and on measurements with
/// i.i.d. `N(0, noise_variance)` noise added.
pub fn baseline_noise(
    spec: &BaselineSpec,
    noise_variance: f64,
    seed: u64,
) -> Result<BaselineResult> {
    if !noise_variance.is_finite() || noise_variance < 0.0 {
        bail!("noise variance {noise_variance} must be finite and non-negative");
    }
    if spec.runs == 0 || spec.horizon < spec.window + 1 || spec.window == 0 {
        bail!("baseline needs runs >= 1 and horizon > window >= 1");
    }
    let sd = noise_variance.sqrt();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (t, &theta) in spec.thetas.iter().enumerate() {
        let model = GmModel::new(GmParameter::scalar(
            spec.a,
            1.0,
            spec.qw,
            spec.qv,
            spec.q0,
            spec.b * theta,
            spec.m0,
        )?)?;
        let ks: Vec<usize> = (spec.window + 1..=spec.horizon).collect();
        let traces: Vec<(Vec<f64>, Vec<f64>)> = (0..spec.runs as u64)
            .into_par_iter()
            .map(|r| {
                let index = t as u64 * spec.runs as u64 + r;
                let mut ys = Vec::new();
                model.sample_path_into(
                    &mut ys,
                    spec.horizon,
                    &mut stream_rng(seed, DOMAIN_PATHS, index),
                );
                let mut noise = stream_rng(seed, DOMAIN_NOISE, index);
                let noisy: Vec<f64> = ys
                    .iter()
                    .map(|y| {
                        let z: f64 = StandardNormal.sample(&mut noise);
                        y + sd * z
                    })
                    .collect();
                let est = |s: &[f64]| -> Result<Vec<f64>> {
                    ks.iter()
                        .map(|&k| Ok(drift_statistic(s, spec.window, spec.a, Some(k))?))
                        .collect()
                };
                Ok((est(&ys)?, est(&noisy)?))
            })
            .collect::<Result<_>>()?;
        let n = spec.runs as f64;
        for (idx, &k) in ks.iter().enumerate() {
            rows.push(BaselineRow {
                theta,
                k,
                estimate_clean: traces[0].0[idx],
                estimate_noisy: traces[0].1[idx],
                mean_clean: traces.iter().map(|t| t.0[idx]).sum::<f64>() / n,
                mean_noisy: traces.iter().map(|t| t.1[idx]).sum::<f64>() / n,
            });
        }
        let finals: Vec<f64> = traces.iter().map(|t| *t.1.last().unwrap()).collect();
        summary.push(BaselineSummary {
            theta,
            final_within_half: finals.iter().filter(|e| (*e - theta).abs() < 0.5).count() as f64
                / n,
            final_mean_noisy: finals.iter().sum::<f64>() / n,
        });
    }
    Ok(BaselineResult { rows, summary })
}

pub fn write_baseline_csv(result: &BaselineResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "theta",
        "k",
        "estimate_clean",
        "estimate_noisy",
        "mean_clean",
        "mean_noisy",
    ])?;
    for r in &result.rows {
        w.write_record([
            fmt(r.theta),
            r.k.to_string(),
            fmt(r.estimate_clean),
            fmt(r.estimate_noisy),
            fmt(r.mean_clean),
            fmt(r.mean_noisy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Streams measurement lines through the transform. Each line holds the `d`
/// components of one vector, separated by commas and/or whitespace; blank
/// lines are skipped. Output is flushed after every line.
pub fn filter_stream<R: BufRead, W: Write>(
    exp: &Experiment,
    theta: &str,
    pseudo: &str,
    input: R,
    mut output: W,
    emit_u: bool,
) -> Result<usize> {
    let mut session = open_session(&exp.registry, exp.handle(theta)?, exp.handle(pseudo)?)?;
    let d = session.dim();
    let mut y = vec![0.0; d];
    let mut yt = vec![0.0; d];
    let mut u = vec![0.0; d];
    let mut count = 0;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != d {
            bail!(
                "line {}: expected {d} values, found {}",
                lineno + 1,
                fields.len()
            );
        }
        for (slot, f) in y.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| anyhow!("line {}: cannot parse {f:?} as a number", lineno + 1))?;
        }
        session
            .step_into(&y, &mut yt, if emit_u { Some(&mut u) } else { None })
            .with_context(|| format!("line {}", lineno + 1))?;
        let mut out: Vec<String> = yt.iter().map(|v| fmt(*v)).collect();
        if emit_u {
            out.extend(u.iter().map(|v| fmt(*v)));
        }
        writeln!(output, "{}", out.join(","))?;
        output.flush()?;
        count += 1;
    }
    Ok(count)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip representation.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}
