//! Randomizer design.
//!
//! The expected distortion of the privacy filter is linear in the randomizer
//! kernel `P[j][i] = P(pseudo = j | theta = i)`:
//!
//! ```text
//! E[distortion] = sum_i p_i sum_j P[j][i] D[i][j]
//! ```
//!
//! where `D[i][j]` is the horizon-averaged distortion of the transform from
//! model `i` to pseudo model `j`. [`estimate_distortion_matrix`] estimates `D`
//! by Monte Carlo; [`solve_randomizer`] minimizes the expected distortion
//! subject to `I(theta; pseudo) <= I0`.
//!
//! The solver scalarizes the constraint with a multiplier `lambda`. For fixed
//! `lambda` the minimizer of `<D, P> + lambda I(P)` is found by
//! Blahut-Arimoto iterations on the output marginal, stopped by the standard
//! certified duality gap; `lambda` is then bisected until the mutual
//! information meets the budget. A final mixing step between the two
//! bracketing kernels closes the remaining gap, which also covers budgets
//! falling on a linear stretch of the distortion-leakage curve.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, domain_err, input_err, Result};
use crate::model::{sample_index, ModelHandle, ModelRegistry, ParameterPrior};
use crate::seed::{stream_rng, DOMAIN_PATHS};
use crate::transform::open_session;

/// Per-step distortion between a measurement and its disguised value,
/// averaged over components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortionFunction {
    SquaredError,
    AbsoluteError,
}

impl DistortionFunction {
    pub fn eval(self, y: &[f64], y_tilde: &[f64]) -> f64 {
        let total: f64 = y
            .iter()
            .zip(y_tilde)
            .map(|(a, b)| match self {
                DistortionFunction::SquaredError => (a - b) * (a - b),
                DistortionFunction::AbsoluteError => (a - b).abs(),
            })
            .sum();
        total / y.len() as f64
    }
}

/// Randomization kernel over a pseudo-parameter support.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizerPolicy {
    /// `matrix[j][i] = P(pseudo = j | theta = i)`.
    matrix: Vec<Vec<f64>>,
    pseudo_labels: Vec<ModelHandle>,
}

impl RandomizerPolicy {
    /// Checks that every column is a probability vector (sum within 1e-9).
    pub fn new(matrix: Vec<Vec<f64>>, pseudo_labels: Vec<ModelHandle>) -> Result<Self> {
        if matrix.is_empty() || matrix[0].is_empty() {
            return Err(config_err!("policy matrix is empty"));
        }
        if matrix.len() != pseudo_labels.len() {
            return Err(config_err!(
                "policy has {} rows but {} pseudo labels",
                matrix.len(),
                pseudo_labels.len()
            ));
        }
        let m = matrix[0].len();
        if matrix.iter().any(|r| r.len() != m) {
            return Err(config_err!("policy rows differ in length"));
        }
        if matrix.iter().flatten().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(config_err!("policy entries must lie in [0, 1]"));
        }
        for i in 0..m {
            let s: f64 = matrix.iter().map(|r| r[i]).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(config_err!("policy column {i} sums to {s}"));
            }
        }
        Ok(Self {
            matrix,
            pseudo_labels,
        })
    }

    /// Deterministic kernel sending parameter `i` to pseudo index `targets[i]`.
    pub fn deterministic(targets: &[usize], pseudo_labels: Vec<ModelHandle>) -> Result<Self> {
        let mut matrix = vec![vec![0.0; targets.len()]; pseudo_labels.len()];
        for (i, &j) in targets.iter().enumerate() {
            if j >= pseudo_labels.len() {
                return Err(config_err!("target {j} outside pseudo support"));
            }
            matrix[j][i] = 1.0;
        }
        Self::new(matrix, pseudo_labels)
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn pseudo_labels(&self) -> &[ModelHandle] {
        &self.pseudo_labels
    }

    /// Number of pseudo values (rows).
    pub fn num_pseudo(&self) -> usize {
        self.matrix.len()
    }

    /// Number of parameter values (columns).
    pub fn num_params(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn prob(&self, j: usize, i: usize) -> f64 {
        self.matrix[j][i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.matrix.iter().map(|r| r[i]).collect()
    }

    /// Pseudo index drawn for parameter `i` with uniform variate `u`.
    pub fn sample_pseudo(&self, i: usize, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (j, row) in self.matrix.iter().enumerate() {
            let w = row[i];
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = j;
            if u < acc {
                return j;
            }
        }
        last
    }

    /// Every column is a standard basis vector.
    pub fn is_deterministic(&self) -> bool {
        self.matrix.iter().flatten().all(|&x| x == 0.0 || x == 1.0)
    }
}

/// Monte Carlo estimate of the horizon-averaged distortion of every
/// (parameter, pseudo parameter) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMatrix {
    /// `values[i][j]`, `m x m~`.
    pub values: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    /// Paths per cell.
    pub samples: usize,
    /// Fraction of CDF evaluations clamped per cell.
    pub saturation: Vec<Vec<f64>>,
    /// Monte Carlo mean of the unfiltered measurements per parameter,
    /// averaged over time and components.
    pub signal_means: Vec<f64>,
    pub pseudo_labels: Vec<ModelHandle>,
}

/// Cells whose clamped fraction exceeds this are flagged.
pub const SATURATION_FLAG: f64 = 0.01;

impl DistortionMatrix {
    /// Wraps known distortions (no sampling error).
    pub fn exact(values: Vec<Vec<f64>>, pseudo_labels: Vec<ModelHandle>) -> Result<Self> {
        let m = values.len();
        let mt = pseudo_labels.len();
        if m == 0 || mt == 0 || values.iter().any(|r| r.len() != mt) {
            return Err(config_err!(
                "distortion matrix must be non-empty and {m} x {mt}"
            ));
        }
        Ok(Self {
            std_errors: vec![vec![0.0; mt]; m],
            saturation: vec![vec![0.0; mt]; m],
            signal_means: vec![0.0; m],
            samples: 0,
            values,
            pseudo_labels,
        })
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn num_pseudo(&self) -> usize {
        self.pseudo_labels.len()
    }

    /// Cells `(i, j)` whose saturation fraction exceeds [`SATURATION_FLAG`].
    pub fn flagged_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.saturation.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                if s > SATURATION_FLAG {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Range `max D - min D`.
    pub fn range(&self) -> f64 {
        range(&self.values)
    }

    /// Builds the estimate from per-path samples, reduced in the given order.
    pub fn from_samples<I>(
        m: usize,
        pseudo_labels: Vec<ModelHandle>,
        steps_per_path: usize,
        samples: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = PathSample>,
    {
        let mt = pseudo_labels.len();
        let mut mean = vec![0.0; m * mt];
        let mut m2 = vec![0.0; m * mt];
        let mut sat = vec![0u64; m * mt];
        let mut signal = vec![0.0; m];
        let mut n = 0usize;
        for s in samples {
            n += 1;
            let nf = n as f64;
            for c in 0..m * mt {
                let x = s.distortion[c];
                let delta = x - mean[c];
                mean[c] += delta / nf;
                m2[c] += delta * (x - mean[c]);
                sat[c] += s.saturations[c] as u64;
            }
            for (acc, x) in signal.iter_mut().zip(&s.signal) {
                *acc += (x - *acc) / nf;
            }
        }
        if n < 2 {
            return Err(domain_err!("need at least 2 paths, got {n}"));
        }
        let nf = n as f64;
        let cell = |v: &[f64], f: &dyn Fn(f64, usize) -> f64| -> Vec<Vec<f64>> {
            (0..m)
                .map(|i| (0..mt).map(|j| f(v[i * mt + j], i * mt + j)).collect())
                .collect()
        };
        let values = cell(&mean, &|x, _| x);
        let std_errors = cell(&m2, &|x, _| libm::sqrt(x / (nf - 1.0) / nf));
        let denom = (n * steps_per_path.max(1)) as f64;
        let satf: Vec<f64> = sat.iter().map(|&s| s as f64).collect();
        let saturation = cell(&satf, &|x, _| x / denom);
        Ok(Self {
            values,
            std_errors,
            samples: n,
            saturation,
            signal_means: signal,
            pseudo_labels,
        })
    }
}

/// Distortions of one simulated path per parameter, transformed to every
/// pseudo parameter. Cells are stored row-major, `i * m~ + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub distortion: Vec<f64>,
    pub saturations: Vec<u32>,
    pub signal: Vec<f64>,
}

/// Simulates path `path` of every parameter in the prior and transforms it
/// to every pseudo parameter. The same random stream drives every row.
pub fn distortion_path_sample(
    registry: &ModelRegistry,
    prior: &ParameterPrior,
    pseudo: &[ModelHandle],
    horizon: usize,
    distortion: DistortionFunction,
    seed: u64,
    path: u64,
) -> Result<PathSample> {
    let m = prior.len();
    let mt = pseudo.len();
    let mut out = PathSample {
        distortion: vec![0.0; m * mt],
        saturations: vec![0; m * mt],
        signal: vec![0.0; m],
    };
    let mut ys = Vec::new();
    for (i, &theta) in prior.labels().iter().enumerate() {
        let model = registry.model(theta)?;
        let d = model.dim();
        let mut rng = stream_rng(seed, DOMAIN_PATHS, path);
        model.sample_path_into(&mut ys, horizon, &mut rng);
        out.signal[i] = ys.iter().sum::<f64>() / ys.len() as f64;
        let mut yt = vec![0.0; d];
        for (j, &pseudo_theta) in pseudo.iter().enumerate() {
            let mut session = open_session(registry, theta, pseudo_theta)?;
            let mut acc = 0.0;
            for y in ys.chunks_exact(d) {
                session.step_into(y, &mut yt, None)?;
                acc += distortion.eval(y, &yt);
            }
            out.distortion[i * mt + j] = acc / horizon as f64;
            out.saturations[i * mt + j] = session.saturations() as u32;
        }
    }
    Ok(out)
}

fn check_estimation_inputs(
    registry: &ModelRegistry,
    prior: &ParameterPrior,
    pseudo: &[ModelHandle],
    horizon: usize,
    n_paths: usize,
) -> Result<()> {
    if pseudo.is_empty() {
        return Err(config_err!("pseudo support is empty"));
    }
    if horizon == 0 {
        return Err(domain_err!("horizon must be at least 1"));
    }
    if n_paths < 2 {
        return Err(domain_err!("need at least 2 paths, got {n_paths}"));
    }
    for &a in prior.labels() {
        for &b in pseudo {
            open_session(registry, a, b)?;
        }
    }
    Ok(())
}

/// Sequential Monte Carlo estimate of the distortion matrix.
pub fn estimate_distortion_matrix(
    registry: &ModelRegistry,
    prior: &ParameterPrior,
    pseudo: &[ModelHandle],
    horizon: usize,
    distortion: DistortionFunction,
    n_paths: usize,
    seed: u64,
) -> Result<DistortionMatrix> {
    check_estimation_inputs(registry, prior, pseudo, horizon, n_paths)?;
    let samples = (0..n_paths as u64)
        .map(|p| distortion_path_sample(registry, prior, pseudo, horizon, distortion, seed, p))
        .collect::<Result<Vec<_>>>()?;
    let d = registry.model(prior.labels()[0])?.dim();
    DistortionMatrix::from_samples(prior.len(), pseudo.to_vec(), horizon * d, samples)
}

/// Checks arguments shared by the sequential and parallel estimators.
pub fn validate_estimation(
    registry: &ModelRegistry,
    prior: &ParameterPrior,
    pseudo: &[ModelHandle],
    horizon: usize,
    n_paths: usize,
) -> Result<()> {
    check_estimation_inputs(registry, prior, pseudo, horizon, n_paths)
}

/// `I(theta; pseudo)` in nats for prior `probs` and kernel `matrix[j][i]`.
pub fn mutual_information_raw(probs: &[f64], matrix: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for row in matrix {
        let q: f64 = row.iter().zip(probs).map(|(p_ji, p_i)| p_ji * p_i).sum();
        if q <= 0.0 {
            continue;
        }
        for (&p_ji, &p_i) in row.iter().zip(probs) {
            if p_ji > 0.0 && p_i > 0.0 {
                total += p_i * p_ji * libm::log(p_ji / q);
            }
        }
    }
    total.max(0.0)
}

pub fn mutual_information(prior: &ParameterPrior, policy: &RandomizerPolicy) -> f64 {
    mutual_information_raw(prior.probs(), policy.matrix())
}

/// Expected distortion `sum_i p_i sum_j P[j][i] D[i][j]`.
pub fn expected_distortion(probs: &[f64], values: &[Vec<f64>], matrix: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        for (j, row) in matrix.iter().enumerate() {
            total += p * row[i] * values[i][j];
        }
    }
    total
}

fn range(values: &[Vec<f64>]) -> f64 {
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// Optimal randomizer for one leakage budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizerSolution {
    pub policy: RandomizerPolicy,
    /// `I(theta; pseudo)` of the returned policy, in nats.
    pub mutual_information: f64,
    /// Expected distortion of the returned policy.
    pub distortion: f64,
}

/// Minimizes expected distortion subject to `I(theta; pseudo) <= budget`
/// (nats).
pub fn solve_randomizer(
    distortion: &DistortionMatrix,
    prior: &ParameterPrior,
    budget: f64,
) -> Result<RandomizerSolution> {
    let kernel = solve_kernel(&distortion.values, prior.probs(), budget)?;
    let policy = RandomizerPolicy::new(kernel, distortion.pseudo_labels.clone())?;
    let mi = mutual_information(prior, &policy);
    let dist = expected_distortion(prior.probs(), &distortion.values, policy.matrix());
    Ok(RandomizerSolution {
        policy,
        mutual_information: mi,
        distortion: dist,
    })
}

/// Solver core on raw arrays: `values[i][j]`, prior `probs[i]`; returns the
/// kernel as `matrix[j][i]`.
pub fn solve_kernel(values: &[Vec<f64>], probs: &[f64], budget: f64) -> Result<Vec<Vec<f64>>> {
    let m = probs.len();
    if values.len() != m || m == 0 {
        return Err(config_err!(
            "distortion matrix has {} rows, prior has {m}",
            values.len()
        ));
    }
    let mt = values[0].len();
    if mt == 0 || values.iter().any(|r| r.len() != mt) {
        return Err(config_err!(
            "distortion matrix rows must share a non-zero length"
        ));
    }
    if values.iter().flatten().any(|x| !x.is_finite()) {
        return Err(input_err!("distortion matrix has non-finite entries"));
    }
    if !budget.is_finite() || budget < 0.0 {
        return Err(domain_err!(
            "leakage budget {budget} must be finite and non-negative"
        ));
    }

    let argmin = |row: &[f64]| {
        row.iter()
            .enumerate()
            .fold(0, |best, (j, &x)| if x < row[best] { j } else { best })
    };
    let vertex: Vec<usize> = values.iter().map(|r| argmin(r)).collect();
    let deterministic = to_kernel(&vertex, mt);
    if mutual_information_raw(probs, &deterministic) <= budget {
        return Ok(deterministic);
    }
    if budget == 0.0 {
        let avg: Vec<f64> = (0..mt)
            .map(|j| (0..m).map(|i| probs[i] * values[i][j]).sum())
            .collect();
        return Ok(to_kernel(&vec![argmin(&avg); m], mt));
    }

    // Rows with zero prior weight influence neither objective nor leakage.
    let scale = range(values);
    let solver = Lagrangian {
        values,
        probs,
        scale,
    };
    let mut lo = 1e-8;
    let mut lo_kernel = solver.minimize(lo);
    let mut hi = 1.0;
    let mut hi_kernel = solver.minimize(hi);
    let mut doublings = 0;
    while mutual_information_raw(probs, &hi_kernel) > budget {
        lo = hi;
        lo_kernel = hi_kernel;
        hi *= 2.0;
        hi_kernel = solver.minimize(hi);
        doublings += 1;
        if doublings > 200 {
            return Err(domain_err!("could not bracket the leakage budget {budget}"));
        }
    }
    for _ in 0..200 {
        let hi_mi = mutual_information_raw(probs, &hi_kernel);
        if budget - hi_mi <= 1e-9 || hi / lo - 1.0 < 1e-13 {
            break;
        }
        let mid = libm::sqrt(lo * hi);
        let k = solver.minimize(mid);
        if mutual_information_raw(probs, &k) > budget {
            lo = mid;
            lo_kernel = k;
        } else {
            hi = mid;
            hi_kernel = k;
        }
    }
    let mut kernel = mix_to_budget(probs, &hi_kernel, &lo_kernel, budget);
    for (i, &v) in vertex.iter().enumerate() {
        if probs[i] == 0.0 {
            kernel.iter_mut().for_each(|r| r[i] = 0.0);
            kernel[v][i] = 1.0;
        }
    }
    normalize_columns(&mut kernel);
    Ok(kernel)
}

fn to_kernel(targets: &[usize], mt: usize) -> Vec<Vec<f64>> {
    let mut k = vec![vec![0.0; targets.len()]; mt];
    for (i, &j) in targets.iter().enumerate() {
        k[j][i] = 1.0;
    }
    k
}

fn normalize_columns(kernel: &mut [Vec<f64>]) {
    let m = kernel[0].len();
    for i in 0..m {
        kernel.iter_mut().for_each(|r| r[i] = r[i].max(0.0));
        let s: f64 = kernel.iter().map(|r| r[i]).sum();
        kernel.iter_mut().for_each(|r| r[i] /= s);
    }
}

/// Largest mixture `(1 - t) feasible + t infeasible` whose leakage stays
/// within the budget. Leakage is convex in `t`, distortion linear.
fn mix_to_budget(
    probs: &[f64],
    feasible: &[Vec<f64>],
    infeasible: &[Vec<f64>],
    budget: f64,
) -> Vec<Vec<f64>> {
    let mix = |t: f64| -> Vec<Vec<f64>> {
        feasible
            .iter()
            .zip(infeasible)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (1.0 - t) * x + t * y)
                    .collect()
            })
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mutual_information_raw(probs, &mix(mid)) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mix(lo)
}

struct Lagrangian<'a> {
    values: &'a [Vec<f64>],
    probs: &'a [f64],
    scale: f64,
}

impl Lagrangian<'_> {
    /// Blahut-Arimoto minimization of `<D, P> + lambda * scale * I(P)`,
    /// returning the kernel as `matrix[j][i]`.
    fn minimize(&self, lambda: f64) -> Vec<Vec<f64>> {
        let m = self.probs.len();
        let mt = self.values[0].len();
        let beta = 1.0 / (lambda * self.scale);
        // exponents relative to each row minimum keep exp() in range
        let weights: Vec<Vec<f64>> = self
            .values
            .iter()
            .map(|row| {
                let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
                row.iter().map(|&x| libm::exp(-(x - lo) * beta)).collect()
            })
            .collect();
        let mut q = vec![1.0 / mt as f64; mt];
        let mut c = vec![0.0; mt];
        for _ in 0..200_000 {
            c.iter_mut().for_each(|x| *x = 0.0);
            for (&p, w) in self.probs.iter().zip(&weights) {
                if p == 0.0 {
                    continue;
                }
                let z: f64 = w.iter().zip(&q).map(|(wj, qj)| wj * qj).sum();
                for (cj, wj) in c.iter_mut().zip(w) {
                    *cj += p * wj / z;
                }
            }
            // certified gap of the dual objective: lambda * ln max_j c_j
            let gap = libm::log(
                c.iter()
                    .zip(&q)
                    .filter(|(_, &qj)| qj > 0.0)
                    .map(|(cj, _)| *cj)
                    .fold(0.0, f64::max),
            );
            q.iter_mut().zip(&c).for_each(|(qj, cj)| *qj *= cj);
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|qj| *qj /= s);
            if gap <= 1e-13 {
                break;
            }
        }
        let mut kernel = vec![vec![0.0; m]; mt];
        for i in 0..m {
            let z: f64 = weights[i].iter().zip(&q).map(|(w, qj)| w * qj).sum();
            for j in 0..mt {
                kernel[j][i] = q[j] * weights[i][j] / z;
            }
        }
        kernel
    }
}

/// Relative distortion in percent: expected distortion over mean signal level.
pub fn relative_distortion_percent(distortion: f64, mean_signal: f64) -> f64 {
    100.0 * distortion / mean_signal
}

/// Prior-weighted mean signal from a distortion estimate.
pub fn mean_signal(matrix: &DistortionMatrix, prior: &ParameterPrior) -> f64 {
    matrix
        .signal_means
        .iter()
        .zip(prior.probs())
        .map(|(s, p)| s * p)
        .sum()
}

/// Draws a parameter index from the prior.
pub fn sample_parameter(prior: &ParameterPrior, u: f64) -> usize {
    sample_index(prior.probs(), u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs(n: u32) -> Vec<ModelHandle> {
        let mut reg = ModelRegistry::new();
        let m = crate::model::independent_iid(crate::model::DensityKind::Gaussian, &[0.0], &[1.0])
            .unwrap();
        (0..n)
            .map(|_| {
                reg.register(crate::ModelDescriptor::Iid(m.clone()))
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn mi_examples() {
        let p = [0.5, 0.5];
        assert_eq!(
            mutual_information_raw(&p, &[vec![0.3, 0.3], vec![0.7, 0.7]]),
            0.0
        );
        let id = [vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((mutual_information_raw(&p, &id) - core::f64::consts::LN_2).abs() < 1e-15);
        // hand summation: q = (0.5, 0.5); four terms 0.5 * P ln(P / 0.5)
        let k = [vec![0.75, 0.25], vec![0.25, 0.75]];
        let hand =
            2.0 * (0.5 * 0.75 * libm::log(0.75 / 0.5)) + 2.0 * (0.5 * 0.25 * libm::log(0.25 / 0.5));
        assert!((mutual_information_raw(&p, &k) - hand).abs() <= 1e-12);
    }

    #[test]
    fn policy_validation() {
        let l = hs(2);
        assert!(RandomizerPolicy::new(vec![vec![0.5, 1.0], vec![0.4, 0.0]], l.clone()).is_err());
        assert!(RandomizerPolicy::new(vec![vec![1.5, 1.0], vec![-0.5, 0.0]], l.clone()).is_err());
        assert!(RandomizerPolicy::new(vec![vec![1.0, 1.0]], l.clone()).is_err());
        let p = RandomizerPolicy::new(vec![vec![0.5, 1.0], vec![0.5, 0.0]], l).unwrap();
        assert_eq!(p.sample_pseudo(0, 0.49), 0);
        assert_eq!(p.sample_pseudo(0, 0.5), 1);
        assert_eq!(p.sample_pseudo(1, 0.999), 0);
    }

    #[test]
    fn unconstrained_budget_picks_row_minima() {
        let values = vec![vec![3.0, 1.0, 1.0], vec![0.0, 2.0, 5.0]];
        let k = solve_kernel(&values, &[0.4, 0.6], 10.0).unwrap();
        assert_eq!(k, vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn zero_budget_shares_one_column() {
        let values = vec![vec![0.0, 1.0, 4.0], vec![3.0, 1.0, 0.0]];
        let k = solve_kernel(&values, &[0.5, 0.5], 0.0).unwrap();
        // averages: 1.5, 1.0, 2.0 -> pseudo 1
        assert_eq!(k, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            solve_kernel(&[vec![f64::NAN]], &[1.0], 0.1),
            Err(crate::Error::Input(_))
        ));
        assert!(solve_kernel(&[vec![1.0]], &[1.0], -0.1).is_err());
        assert!(solve_kernel(&[vec![1.0, 2.0], vec![1.0]], &[0.5, 0.5], 0.1).is_err());
    }

    // Dense grid over (P11, P12) for the binary case.
    fn grid_2x2(values: &[Vec<f64>], probs: &[f64], budget: f64) -> f64 {
        let n = 1000;
        let mut best = f64::INFINITY;
        for a in 0..=n {
            for b in 0..=n {
                let (x, y) = (a as f64 / n as f64, b as f64 / n as f64);
                let k = [vec![x, y], vec![1.0 - x, 1.0 - y]];
                if mutual_information_raw(probs, &k) <= budget {
                    best = best.min(expected_distortion(probs, values, &k));
                }
            }
        }
        best
    }

    #[test]
    fn binary_symmetric_matches_grid() {
        let values = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let probs = [0.5, 0.5];
        let k = solve_kernel(&values, &probs, 0.2).unwrap();
        let mi = mutual_information_raw(&probs, &k);
        assert!(mi <= 0.2 + 1e-6);
        let obj = expected_distortion(&probs, &values, &k);
        let grid = grid_2x2(&values, &probs, 0.2);
        assert!((obj - grid).abs() <= 1e-3, "{obj} vs {grid}");
        assert!(obj <= grid + 1e-9);
    }

    #[test]
    fn zero_prior_rows_go_to_their_minimum() {
        let values = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![5.0, 0.0]];
        let k = solve_kernel(&values, &[0.5, 0.5, 0.0], 0.1).unwrap();
        assert_eq!(k[1][2], 1.0);
    }

    #[test]
    fn distortion_functions() {
        assert_eq!(
            DistortionFunction::AbsoluteError.eval(&[1.0, -1.0], &[2.0, 1.0]),
            1.5
        );
        assert_eq!(
            DistortionFunction::SquaredError.eval(&[1.0, -1.0], &[2.0, 1.0]),
            2.5
        );
        assert_eq!(DistortionFunction::SquaredError.eval(&[3.0], &[3.0]), 0.0);
    }
}
