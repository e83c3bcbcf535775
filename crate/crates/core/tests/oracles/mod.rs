//! Independent reference computations shared by integration and acceptance
//! tests. Nothing here calls into the recursive machinery under test.
#![allow(dead_code)]

use modrand_core::gauss_markov::GmParameter;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random stable, observable system with `n` states and `d` outputs.
pub fn random_gm<R: Rng>(rng: &mut R, n: usize, d: usize) -> GmParameter {
    loop {
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let radius = a
            .complex_eigenvalues()
            .iter()
            .map(|z: &nalgebra::Complex<f64>| (z.re * z.re + z.im * z.im).sqrt())
            .fold(0.0, f64::max);
        let target = rng.random_range(0.2..0.95);
        if radius > 1e-6 {
            a *= target / radius;
        }
        let c = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.5..1.5));
        let spd = |k: usize, rng: &mut R| {
            let b = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            &b * b.transpose() + DMatrix::identity(k, k) * rng.random_range(0.05..0.5)
        };
        let qw = spd(n, rng);
        let qv = spd(d, rng);
        let q0 = spd(n, rng);
        let drift = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let m0 = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        if let Ok(p) = GmParameter::new(a, c, qw, qv, q0, drift, m0) {
            return p;
        }
    }
}

/// Mean and covariance of all stacked outputs `(Y_1, ..., Y_T)`, built from
/// the explicit linear map of the primitive Gaussians
/// `(X_1, W_1..W_{T-1}, V_1..V_T)` into `(X_1..X_T, Y_1..Y_T)`.
pub fn joint_output_law(p: &GmParameter, horizon: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = p.a.nrows();
    let d = p.c.nrows();
    let t = horizon;
    let prim = n + (t - 1) * n + t * d;
    let total = t * (n + d);
    let mut map = DMatrix::<f64>::zeros(total, prim);
    let mut offset = DVector::<f64>::zeros(total);
    // states: X_1 = m0 + e0;  X_{k+1} = A X_k + drift + W_k
    for i in 0..n {
        map[(i, i)] = 1.0;
        offset[i] = p.m0[i];
    }
    for k in 1..t {
        let prev = map.rows((k - 1) * n, n).into_owned();
        let prev_off = offset.rows((k - 1) * n, n).into_owned();
        let mut rows = &p.a * prev;
        for i in 0..n {
            rows[(i, n + (k - 1) * n + i)] += 1.0;
        }
        map.rows_mut(k * n, n).copy_from(&rows);
        offset
            .rows_mut(k * n, n)
            .copy_from(&(&p.a * prev_off + &p.drift));
    }
    // outputs: Y_k = C X_k + V_k
    let vbase = n + (t - 1) * n;
    for k in 0..t {
        let xs = map.rows(k * n, n).into_owned();
        let mut rows = &p.c * xs;
        for i in 0..d {
            rows[(i, vbase + k * d + i)] += 1.0;
        }
        map.rows_mut(t * n + k * d, d).copy_from(&rows);
        let xo = offset.rows(k * n, n).into_owned();
        offset.rows_mut(t * n + k * d, d).copy_from(&(&p.c * xo));
    }
    let mut cov_prim = DMatrix::<f64>::zeros(prim, prim);
    cov_prim.view_mut((0, 0), (n, n)).copy_from(&p.q0);
    for k in 0..t - 1 {
        cov_prim
            .view_mut((n + k * n, n + k * n), (n, n))
            .copy_from(&p.qw);
    }
    for k in 0..t {
        cov_prim
            .view_mut((vbase + k * d, vbase + k * d), (d, d))
            .copy_from(&p.qv);
    }
    let full = &map * cov_prim * map.transpose();
    let ys = t * n;
    (
        offset.rows(ys, t * d).into_owned(),
        full.view((ys, ys), (t * d, t * d)).into_owned(),
    )
}

/// Conditional law of flat entry `idx` given entries `0..idx` equal `obs`,
/// by Schur complement.
pub fn schur_conditional(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    idx: usize,
    obs: &[f64],
) -> (f64, f64) {
    if idx == 0 {
        return (mean[0], cov[(0, 0)]);
    }
    let s11 = cov.view((0, 0), (idx, idx)).into_owned();
    let s21 = cov.view((idx, 0), (1, idx)).into_owned();
    let inv = s11.try_inverse().expect("past covariance invertible");
    let dev = DVector::from_iterator(idx, (0..idx).map(|i| obs[i] - mean[i]));
    let m = mean[idx] + (&s21 * &inv * dev)[0];
    let v = cov[(idx, idx)] - (&s21 * &inv * s21.transpose())[(0, 0)];
    (m, v)
}

/// Joint Gaussian log density.
pub fn gaussian_log_density(mean: &DVector<f64>, cov: &DMatrix<f64>, x: &[f64]) -> f64 {
    let k = mean.len();
    let dev = DVector::from_iterator(k, x.iter().zip(mean.iter()).map(|(a, b)| a - b));
    let ch = cov.clone().cholesky().expect("SPD");
    let logdet = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = dev.dot(&ch.solve(&dev));
    -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

/// `sum_i p_i sum_j P[j][i] D[i][j]`.
pub fn objective(values: &[Vec<f64>], probs: &[f64], kernel: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, p) in probs.iter().enumerate() {
        for (j, row) in kernel.iter().enumerate() {
            s += p * row[i] * values[i][j];
        }
    }
    s
}

/// Mutual information (nats) straight from the definition.
pub fn mutual_information(probs: &[f64], kernel: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for row in kernel {
        let q: f64 = row.iter().zip(probs).map(|(a, b)| a * b).sum();
        for (pji, pi) in row.iter().zip(probs) {
            if *pji > 0.0 && *pi > 0.0 {
                s += pi * pji * (pji / q).ln();
            }
        }
    }
    s
}

/// Lagrange dual of the leakage-constrained problem at multiplier `lambda`:
/// `min_r  -lambda sum_i p_i ln sum_j r_j exp(-D_ij / lambda) - lambda I0`,
/// minimized by grid search over the output simplex with successive zooms.
fn dual_value(values: &[Vec<f64>], probs: &[f64], budget: f64, lambda: f64) -> f64 {
    let mt = values[0].len();
    if lambda == 0.0 {
        return probs
            .iter()
            .zip(values)
            .map(|(p, r)| p * r.iter().cloned().fold(f64::INFINITY, f64::min))
            .sum();
    }
    let f = |r: &[f64]| -> f64 {
        let mut s = 0.0;
        for (p, row) in probs.iter().zip(values) {
            if *p == 0.0 {
                continue;
            }
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let z: f64 = row
                .iter()
                .zip(r)
                .map(|(dij, rj)| rj * (-(dij - lo) / lambda).exp())
                .sum();
            s += p * (lo - lambda * z.ln());
        }
        s - lambda * budget
    };
    let mut center = vec![1.0 / mt as f64; mt];
    let mut half = 1.0;
    let mut best = f64::INFINITY;
    let steps = 40usize;
    for _ in 0..8 {
        let mut best_r = center.clone();
        let h = 2.0 * half / steps as f64;
        match mt {
            1 => best = best.min(f(&[1.0])),
            2 => {
                for a in 0..=steps {
                    let x = (center[0] - half + a as f64 * h).clamp(0.0, 1.0);
                    let r = [x, 1.0 - x];
                    let v = f(&r);
                    if v < best {
                        best = v;
                        best_r = r.to_vec();
                    }
                }
            }
            3 => {
                for a in 0..=steps {
                    for b in 0..=steps {
                        let x = center[0] - half + a as f64 * h;
                        let y = center[1] - half + b as f64 * h;
                        if x < 0.0 || y < 0.0 || x + y > 1.0 {
                            continue;
                        }
                        let r = [x, y, 1.0 - x - y];
                        let v = f(&r);
                        if v < best {
                            best = v;
                            best_r = r.to_vec();
                        }
                    }
                }
            }
            _ => panic!("grid oracle supports at most 3 pseudo values"),
        }
        center = best_r;
        half *= 0.25;
    }
    best
}

/// Optimal value of `min <D, P>  s.t.  I(P) <= I0` via strong duality:
/// ternary search of the concave dual over `lambda` in `[0, range(D) / I0]`.
pub fn randomizer_optimum(values: &[Vec<f64>], probs: &[f64], budget: f64) -> f64 {
    let flat: Vec<f64> = values.iter().flatten().copied().collect();
    let range = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - flat.iter().cloned().fold(f64::INFINITY, f64::min);
    if range == 0.0 {
        return flat[0];
    }
    if budget == 0.0 {
        // independent kernel: one common column
        let mt = values[0].len();
        return (0..mt)
            .map(|j| probs.iter().zip(values).map(|(p, r)| p * r[j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
    }
    let (mut lo, mut hi) = (0.0, 1.01 * range / budget);
    for _ in 0..120 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if dual_value(values, probs, budget, m1) < dual_value(values, probs, budget, m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    dual_value(values, probs, budget, 0.5 * (lo + hi)).max(dual_value(values, probs, budget, 0.0))
}

/// Kolmogorov-Smirnov distance of `samples` from U(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &u)| (u - i as f64 / n).max((i + 1) as f64 / n - u))
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Per-time mean, variance and lag-1 autocovariance with standard errors,
/// from `paths` scalar series of common length.
pub struct PathMoments {
    pub mean: Vec<(f64, f64)>,
    pub var: Vec<(f64, f64)>,
    pub lag1: Vec<(f64, f64)>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn path_moments(paths: &[Vec<f64>]) -> PathMoments {
    let t = paths[0].len();
    let col = |k: usize| -> Vec<f64> { paths.iter().map(|p| p[k]).collect() };
    let means: Vec<(f64, f64)> = (0..t).map(|k| mean_se(&col(k))).collect();
    let var = (0..t)
        .map(|k| {
            let m = means[k].0;
            mean_se(
                &paths
                    .iter()
                    .map(|p| (p[k] - m) * (p[k] - m))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let lag1 = (1..t)
        .map(|k| {
            let (a, b) = (means[k - 1].0, means[k].0);
            mean_se(
                &paths
                    .iter()
                    .map(|p| (p[k - 1] - a) * (p[k] - b))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    PathMoments {
        mean: means,
        var,
        lag1,
    }
}

/// Largest `|a - b| / sqrt(se_a^2 + se_b^2)` across matching statistics.
pub fn max_z(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let se = (x.1 * x.1 + y.1 * y.1).sqrt();
            if se == 0.0 {
                if x.0 == y.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (x.0 - y.0).abs() / se
            }
        })
        .fold(0.0, f64::max)
}
