//! Linear-Gaussian state-space models and one-step-ahead Kalman prediction.
//!
//! The state model is
//!
//! ```text
//! X_1     ~ N(m0, Q0)
//! X_{k+1} = A X_k + W_k + drift,   W_k ~ N(0, Qw)
//! Y_k     = C X_k + V_k,           V_k ~ N(0, Qv)
//! ```
//!
//! Given `y_1..y_{k-1}`, `Y_k` is Gaussian with mean `C x_{k|k-1}` and
//! covariance `C S_{k|k-1} C' + Qv`; conditioning further on the first `l`
//! components of `Y_k` gives the per-component Gaussian laws the privacy
//! transform needs.
//!
//! [`GmModel`] is the registered form of a [`GmParameter`]: it precomputes the
//! Riccati recursion and all per-step gains until the recursion reaches its
//! fixed point, after which the converged gains are reused.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config_err, Result};
use crate::model::ConditionalModel;
use crate::normal::{gaussian_quantile, gaussian_tail};
use crate::seed::{stream_rng, DOMAIN_PATHS};
use crate::tail::Tail;

/// Parameters of one Gauss-Markov model.
#[derive(Debug, Clone, PartialEq)]
pub struct GmParameter {
    /// State transition, `n x n`.
    pub a: DMatrix<f64>,
    /// Output map, `d x n`.
    pub c: DMatrix<f64>,
    /// Process noise covariance, `n x n`.
    pub qw: DMatrix<f64>,
    /// Measurement noise covariance, `d x d`.
    pub qv: DMatrix<f64>,
    /// Covariance of the first state, `n x n`.
    pub q0: DMatrix<f64>,
    /// Constant input added to every state transition.
    pub drift: DVector<f64>,
    /// Mean of the first state.
    pub m0: DVector<f64>,
}

impl GmParameter {
    pub fn new(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        qw: DMatrix<f64>,
        qv: DMatrix<f64>,
        q0: DMatrix<f64>,
        drift: DVector<f64>,
        m0: DVector<f64>,
    ) -> Result<Self> {
        let p = Self {
            a,
            c,
            qw,
            qv,
            q0,
            drift,
            m0,
        };
        p.validate()?;
        Ok(p)
    }

    /// One-dimensional state and output.
    pub fn scalar(a: f64, c: f64, qw: f64, qv: f64, q0: f64, drift: f64, m0: f64) -> Result<Self> {
        let s = |x| DMatrix::from_element(1, 1, x);
        Self::new(
            s(a),
            s(c),
            s(qw),
            s(qv),
            s(q0),
            DVector::from_element(1, drift),
            DVector::from_element(1, m0),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Checks shapes, positive definiteness, Schur stability and observability.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let d = self.c.nrows();
        if n == 0 || d == 0 {
            return Err(config_err!(
                "gauss-markov model needs non-empty state and output"
            ));
        }
        let shapes = [
            ("A", self.a.shape(), (n, n)),
            ("C", self.c.shape(), (d, n)),
            ("Qw", self.qw.shape(), (n, n)),
            ("Qv", self.qv.shape(), (d, d)),
            ("Q0", self.q0.shape(), (n, n)),
            ("drift", self.drift.shape(), (n, 1)),
            ("m0", self.m0.shape(), (n, 1)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(config_err!("{name} has shape {got:?}, expected {want:?}"));
            }
        }
        let all = [&self.a, &self.c, &self.qw, &self.qv, &self.q0];
        if all.iter().any(|m| m.iter().any(|x| !x.is_finite()))
            || self
                .drift
                .iter()
                .chain(self.m0.iter())
                .any(|x| !x.is_finite())
        {
            return Err(config_err!("gauss-markov parameters must be finite"));
        }
        for (name, m) in [("Qw", &self.qw), ("Qv", &self.qv), ("Q0", &self.q0)] {
            check_spd(name, m)?;
        }
        let rho = spectral_radius(&self.a);
        if rho.is_nan() || rho >= 1.0 {
            return Err(config_err!("A is not Schur stable (spectral radius {rho})"));
        }
        let mut obs = DMatrix::zeros(n * d, n);
        let mut block = self.c.clone();
        for i in 0..n {
            obs.view_mut((i * d, 0), (d, n)).copy_from(&block);
            block = &block * &self.a;
        }
        let scale = obs.amax().max(f64::MIN_POSITIVE);
        if obs.rank(1e-10 * scale) < n {
            return Err(config_err!("(A, C) is not observable"));
        }
        Ok(())
    }
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(config_err!("{name} is not symmetric"));
    }
    if m.clone().cholesky().is_none() {
        return Err(config_err!("{name} is not positive definite"));
    }
    Ok(())
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| libm::sqrt(z.re * z.re + z.im * z.im))
        .fold(0.0, f64::max)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// One-step-ahead predictor state `(x_{k|k-1}, S_{k|k-1})` for measurement `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    pub xhat_pred: DVector<f64>,
    pub sigma_pred: DMatrix<f64>,
    /// 1-based index of the measurement being predicted.
    pub k: usize,
}

impl PredictorState {
    /// Prediction of the first measurement: `x_{1|0} = m0`, `S_{1|0} = Q0`.
    pub fn initial(theta: &GmParameter) -> Self {
        Self {
            xhat_pred: theta.m0.clone(),
            sigma_pred: theta.q0.clone(),
            k: 1,
        }
    }
}

/// Predicted output mean `C x_{k|k-1}` and covariance `C S_{k|k-1} C' + Qv`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPrediction {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Gaussian law of one output component given its same-time prefix and the past.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentConditional {
    pub mean: f64,
    pub variance: f64,
}

pub fn predict_output(state: &PredictorState, theta: &GmParameter) -> OutputPrediction {
    let mean = &theta.c * &state.xhat_pred;
    let mut cov = &theta.c * &state.sigma_pred * theta.c.transpose() + &theta.qv;
    symmetrize(&mut cov);
    OutputPrediction { mean, cov }
}

/// Solves `S X = B` for symmetric positive definite `S`, adding a small
/// diagonal jitter if rounding has broken definiteness.
fn spd_solve(s: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = s.clone().cholesky() {
        return ch.solve(b);
    }
    let dim = s.nrows().max(1);
    let jitter = 1e-12 * s.trace().abs() / dim as f64;
    log::warn!("covariance lost definiteness; adding jitter {jitter:e}");
    let mut sj = s.clone();
    for i in 0..s.nrows() {
        sj[(i, i)] += jitter;
    }
    match sj.cholesky() {
        Some(ch) => ch.solve(b),
        None => panic!("innovation covariance is singular even after jitter"),
    }
}

/// The Riccati map `S -> A S A' + Qw - A S C' (C S C' + Qv)^{-1} C S A'`.
pub fn riccati_step(sigma: &DMatrix<f64>, theta: &GmParameter) -> DMatrix<f64> {
    let (a, c) = (&theta.a, &theta.c);
    let s = c * sigma * c.transpose() + &theta.qv;
    let cs_at = c * sigma * a.transpose();
    let corr = cs_at.transpose() * spd_solve(&s, &cs_at);
    let mut next = a * sigma * a.transpose() + &theta.qw - corr;
    symmetrize(&mut next);
    next
}

/// Max-norm of `riccati_step(S) - S`.
pub fn riccati_residual(sigma: &DMatrix<f64>, theta: &GmParameter) -> f64 {
    (riccati_step(sigma, theta) - sigma).amax()
}

/// Measurement update with `y_k` followed by the time update, giving the
/// predictor for measurement `k + 1`.
pub fn update_state(
    state: &PredictorState,
    y: &DVector<f64>,
    theta: &GmParameter,
) -> PredictorState {
    let (a, c) = (&theta.a, &theta.c);
    let sigma = &state.sigma_pred;
    let s = c * sigma * c.transpose() + &theta.qv;
    let innovation = y - c * &state.xhat_pred;
    // K = S_pred C' S^{-1}, applied to the innovation.
    let sc = c * sigma;
    let gain_t = spd_solve(&s, &sc);
    let xhat_filt = &state.xhat_pred + gain_t.transpose() * innovation;
    PredictorState {
        xhat_pred: a * xhat_filt + &theta.drift,
        sigma_pred: riccati_step(sigma, theta),
        k: state.k + 1,
    }
}

impl OutputPrediction {
    /// Law of component `component` (0-based) given the first `component`
    /// entries of the current output, `prefix`.
    pub fn conditional(&self, component: usize, prefix: &[f64]) -> ComponentConditional {
        let (beta, variance) = regression(&self.cov, component);
        let shift: f64 = (0..component)
            .map(|m| beta[m] * (prefix[m] - self.mean[m]))
            .sum();
        ComponentConditional {
            mean: self.mean[component] + shift,
            variance,
        }
    }
}

/// Regression weights of component `l` on components `0..l` and the residual
/// variance, from the output covariance.
fn regression(cov: &DMatrix<f64>, l: usize) -> (Vec<f64>, f64) {
    if l == 0 {
        return (Vec::new(), cov[(0, 0)]);
    }
    let block = cov.view((0, 0), (l, l)).into_owned();
    let delta = cov.view((0, l), (l, 1)).into_owned();
    let beta = spd_solve(&block, &delta);
    let explained = (beta.transpose() * &delta)[(0, 0)];
    (beta.iter().copied().collect(), cov[(l, l)] - explained)
}

/// Conditional mean and variance of component `component` (0-based) of
/// `Y_k`, given `prefix` and the measurements summarized by `state`.
pub fn component_conditional(
    state: &PredictorState,
    theta: &GmParameter,
    component: usize,
    prefix: &[f64],
) -> ComponentConditional {
    predict_output(state, theta).conditional(component, prefix)
}

/// Gains for one time step, with matrices flattened row-major.
#[derive(Debug, Clone)]
struct StepGains {
    /// `A (I - K C)`, `n x n`.
    transition: Vec<f64>,
    /// `A K`, `n x d`.
    gain: Vec<f64>,
    /// `beta[l]` has `l` weights.
    beta: Vec<Vec<f64>>,
    cond_var: Vec<f64>,
    sigma_pred: DMatrix<f64>,
    output_cov: DMatrix<f64>,
}

/// Upper bound on precomputed steps; stable systems converge far earlier.
const MAX_SCHEDULE: usize = 20_000;

/// A validated Gauss-Markov model with precomputed Kalman gains.
#[derive(Debug, Clone)]
pub struct GmModel {
    param: GmParameter,
    n: usize,
    d: usize,
    c: Vec<f64>,
    a: Vec<f64>,
    chol_qw: Vec<f64>,
    chol_qv: Vec<f64>,
    chol_q0: Vec<f64>,
    schedule: Vec<StepGains>,
    converged: bool,
}

/// Recursive predictor state used by the transform's fast path.
#[derive(Debug, Clone, PartialEq)]
pub struct GmState {
    /// `x_{k|k-1}`.
    pub xhat: Vec<f64>,
    /// `C x_{k|k-1}`.
    pub yhat: Vec<f64>,
    /// Measurements consumed so far.
    pub steps: usize,
    scratch: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

#[inline]
fn matvec_acc(out: &mut [f64], m: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl GmModel {
    pub fn new(param: GmParameter) -> Result<Self> {
        param.validate()?;
        let n = param.state_dim();
        let d = param.output_dim();
        let chol = |m: &DMatrix<f64>| row_major(&m.clone().cholesky().expect("validated SPD").l());
        let mut model = Self {
            n,
            d,
            c: row_major(&param.c),
            a: row_major(&param.a),
            chol_qw: chol(&param.qw),
            chol_qv: chol(&param.qv),
            chol_q0: chol(&param.q0),
            schedule: Vec::new(),
            converged: false,
            param,
        };
        model.build_schedule();
        Ok(model)
    }

    fn build_schedule(&mut self) {
        let p = &self.param;
        let (a, c) = (&p.a, &p.c);
        let mut sigma = p.q0.clone();
        for _ in 0..MAX_SCHEDULE {
            let mut s = c * &sigma * c.transpose() + &p.qv;
            symmetrize(&mut s);
            let sc = c * &sigma;
            let k = spd_solve(&s, &sc).transpose();
            let eye = DMatrix::<f64>::identity(self.n, self.n);
            let transition = a * (eye - &k * c);
            let gain = a * &k;
            let (beta, cond_var): (Vec<_>, Vec<_>) = (0..self.d).map(|l| regression(&s, l)).unzip();
            let next = riccati_step(&sigma, p);
            let diff = (&next - &sigma).amax();
            let scale = sigma.amax().max(1.0);
            self.schedule.push(StepGains {
                transition: row_major(&transition),
                gain: row_major(&gain),
                beta,
                cond_var,
                sigma_pred: sigma,
                output_cov: s,
            });
            if diff <= 1e-15 * scale {
                self.converged = true;
                break;
            }
            sigma = next;
        }
    }

    pub fn param(&self) -> &GmParameter {
        &self.param
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// Number of distinct gain steps before the Riccati recursion reached its
    /// fixed point (or the cap, if it did not).
    pub fn schedule_len(&self) -> usize {
        self.schedule.len()
    }

    pub fn riccati_converged(&self) -> bool {
        self.converged
    }

    fn gains(&self, steps: usize) -> &StepGains {
        &self.schedule[steps.min(self.schedule.len() - 1)]
    }

    /// `S_{k|k-1}` for 0-based step `steps` (the measurement index minus one).
    pub fn sigma_pred(&self, steps: usize) -> &DMatrix<f64> {
        &self.gains(steps).sigma_pred
    }

    pub fn output_cov(&self, steps: usize) -> &DMatrix<f64> {
        &self.gains(steps).output_cov
    }

    /// Conditional law of `component` under the fast-path state.
    pub fn component_law(
        &self,
        state: &GmState,
        component: usize,
        prefix: &[f64],
    ) -> ComponentConditional {
        let g = self.gains(state.steps);
        let beta = &g.beta[component];
        let shift: f64 = (0..component)
            .map(|m| beta[m] * (prefix[m] - state.yhat[m]))
            .sum();
        ComponentConditional {
            mean: state.yhat[component] + shift,
            variance: g.cond_var[component],
        }
    }

    /// Replaces the contents of `out` with `horizon` simulated outputs
    /// (row-major, `horizon * d`).
    pub fn sample_path_into<R: Rng + ?Sized>(
        &self,
        out: &mut Vec<f64>,
        horizon: usize,
        rng: &mut R,
    ) {
        let (n, d) = (self.n, self.d);
        out.clear();
        let mut x: Vec<f64> = self.param.m0.iter().copied().collect();
        let mut z = vec![0.0; n.max(d)];
        let mut next = vec![0.0; n];
        let mut y = vec![0.0; d];
        fill_normal(&mut z[..n], rng);
        matvec_acc(&mut x, &self.chol_q0, &z[..n]);
        for _ in 0..horizon {
            y.iter_mut().for_each(|v| *v = 0.0);
            matvec_acc(&mut y, &self.c, &x);
            fill_normal(&mut z[..d], rng);
            matvec_acc(&mut y, &self.chol_qv, &z[..d]);
            out.extend_from_slice(&y);
            next.copy_from_slice(self.param.drift.as_slice());
            matvec_acc(&mut next, &self.a, &x);
            fill_normal(&mut z[..n], rng);
            matvec_acc(&mut next, &self.chol_qw, &z[..n]);
            core::mem::swap(&mut x, &mut next);
        }
    }

    /// Deterministic simulation from a seed.
    pub fn simulate_seeded(&self, horizon: usize, seed: u64) -> Vec<Vec<f64>> {
        simulate_path(self, horizon, &mut stream_rng(seed, DOMAIN_PATHS, 0))
    }
}

fn fill_normal<R: Rng + ?Sized>(z: &mut [f64], rng: &mut R) {
    for v in z {
        *v = StandardNormal.sample(rng);
    }
}

/// Simulates `horizon` measurement vectors of a Gauss-Markov model.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &GmModel,
    horizon: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut flat = Vec::with_capacity(horizon * model.d);
    model.sample_path_into(&mut flat, horizon, rng);
    flat.chunks_exact(model.d).map(|y| y.to_vec()).collect()
}

impl ConditionalModel for GmModel {
    type State = GmState;

    fn dim(&self) -> usize {
        self.d
    }

    fn initial_state(&self) -> GmState {
        let xhat: Vec<f64> = self.param.m0.iter().copied().collect();
        let mut yhat = vec![0.0; self.d];
        matvec_acc(&mut yhat, &self.c, &xhat);
        GmState {
            scratch: vec![0.0; xhat.len()],
            xhat,
            yhat,
            steps: 0,
        }
    }

    fn advance(&self, state: &mut GmState, y: &[f64]) {
        let g = self.gains(state.steps);
        state.scratch.copy_from_slice(self.param.drift.as_slice());
        matvec_acc(&mut state.scratch, &g.transition, &state.xhat);
        matvec_acc(&mut state.scratch, &g.gain, y);
        core::mem::swap(&mut state.xhat, &mut state.scratch);
        state.yhat.iter_mut().for_each(|v| *v = 0.0);
        matvec_acc(&mut state.yhat, &self.c, &state.xhat);
        state.steps += 1;
    }

    fn component_cdf(&self, state: &GmState, component: usize, prefix: &[f64], z: f64) -> Tail {
        let law = self.component_law(state, component, prefix);
        gaussian_tail(z, law.mean, law.variance)
    }

    fn component_quantile(
        &self,
        state: &GmState,
        component: usize,
        prefix: &[f64],
        p: Tail,
    ) -> f64 {
        let law = self.component_law(state, component, prefix);
        gaussian_quantile(p, law.mean, law.variance)
    }

    fn sample_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<Vec<f64>> {
        simulate_path(self, horizon, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, qw: f64, qv: f64, q0: f64, drift: f64, m0: f64) -> GmParameter {
        GmParameter::scalar(a, 1.0, qw, qv, q0, drift, m0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GmParameter::scalar(0.95, 1.0, -0.1, 0.1, 0.1, 0.0, 0.0).is_err());
        assert!(GmParameter::scalar(1.01, 1.0, 0.1, 0.1, 0.1, 0.0, 0.0).is_err());
        assert!(GmParameter::scalar(0.5, 0.0, 0.1, 0.1, 0.1, 0.0, 0.0).is_err());
        let a = DMatrix::from_row_slice(2, 3, &[0.1; 6]);
        let p = GmParameter {
            a,
            c: DMatrix::identity(2, 2),
            qw: DMatrix::identity(2, 2),
            qv: DMatrix::identity(2, 2),
            q0: DMatrix::identity(2, 2),
            drift: DVector::zeros(2),
            m0: DVector::zeros(2),
        };
        assert!(p.validate().is_err());
        // unobservable: second state never reaches the output
        let p = GmParameter::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::zeros(2),
        );
        assert!(p.is_err());
    }

    #[test]
    fn first_prediction_is_prior() {
        let th = scalar(0.95, 0.1, 0.1, 0.1, 0.0, 0.0);
        let out = predict_output(&PredictorState::initial(&th), &th);
        assert_eq!(out.mean[0], 0.0);
        assert!((out.cov[(0, 0)] - 0.2).abs() < 1e-15);

        let th = scalar(0.95, 0.1, 0.1, 1.0, 10.0, 100.0);
        let out = predict_output(&PredictorState::initial(&th), &th);
        assert_eq!(out.mean[0], 100.0);
    }

    #[test]
    fn stationary_output_variance_matches_dare() {
        let th = scalar(0.95, 0.1, 0.1, 0.1, 0.0, 0.0);
        // oracle: iterate the scalar Riccati map s -> a^2 s + q - a^2 s^2 / (s + r)
        let mut s: f64 = 0.1;
        for _ in 0..10_000 {
            s = 0.95 * 0.95 * s + 0.1 - 0.95 * 0.95 * s * s / (s + 0.1);
        }
        let mut st = PredictorState::initial(&th);
        for _ in 0..200 {
            st = update_state(&st, &DVector::from_element(1, 0.3), &th);
        }
        let out = predict_output(&st, &th);
        assert!((out.cov[(0, 0)] - (s + 0.1)).abs() <= 1e-10);
    }

    #[test]
    fn huge_measurement_noise_ignores_measurement() {
        let th = scalar(0.9, 0.1, 1e12, 0.5, 2.0, 3.0);
        let st = PredictorState::initial(&th);
        let next = update_state(&st, &DVector::from_element(1, 1e3), &th);
        let expect = 0.9 * 3.0 + 2.0;
        assert!(((next.xhat_pred[0] - expect) / expect).abs() <= 1e-6);
        assert_eq!(next.k, 2);
    }

    #[test]
    fn riccati_fixed_point() {
        let th = GmParameter::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.7]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.2]),
            DMatrix::from_row_slice(2, 2, &[0.1, 0.02, 0.02, 0.4]),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        let mut sigma = th.q0.clone();
        let mut converged_at = None;
        for k in 0..500 {
            let next = riccati_step(&sigma, &th);
            let asym = (&next - next.transpose()).amax();
            assert!(asym <= 1e-13);
            if (&next - &sigma).amax() < 1e-12 && converged_at.is_none() {
                converged_at = Some(k);
            }
            sigma = next;
        }
        assert!(converged_at.is_some());
        assert!(riccati_residual(&sigma, &th) <= 1e-10);
    }

    #[test]
    fn diagonal_output_covariance_decouples_components() {
        let out = OutputPrediction {
            mean: DVector::from_vec(vec![1.0, -2.0]),
            cov: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]),
        };
        for prefix in [0.0, 5.0, -40.0] {
            let c = out.conditional(1, &[prefix]);
            assert_eq!(c.mean, -2.0);
            assert_eq!(c.variance, 3.0);
        }
        let c = out.conditional(0, &[]);
        assert_eq!((c.mean, c.variance), (1.0, 2.0));
    }

    #[test]
    fn conditioning_moves_toward_prefix() {
        // positive correlation: a prefix above its mean raises the conditional mean
        let out = OutputPrediction {
            mean: DVector::from_vec(vec![0.0, 0.0]),
            cov: DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]),
        };
        let c = out.conditional(1, &[1.0]);
        assert!((c.mean - 0.8).abs() < 1e-14);
        assert!((c.variance - 0.36).abs() < 1e-14);
    }

    #[test]
    fn fast_path_matches_pure_updates() {
        let th = GmParameter::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 0.8]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]),
            DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.1]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]),
            DVector::from_vec(vec![1.0, -0.5]),
            DVector::from_vec(vec![3.0, 1.0]),
        )
        .unwrap();
        let model = GmModel::new(th.clone()).unwrap();
        assert!(model.riccati_converged());
        let path = model.simulate_seeded(80, 3);
        let mut pure = PredictorState::initial(&th);
        let mut fast = model.initial_state();
        for y in &path {
            for l in 0..2 {
                let a = component_conditional(&pure, &th, l, &y[..l]);
                let b = model.component_law(&fast, l, &y[..l]);
                assert!((a.mean - b.mean).abs() <= 1e-10 * a.mean.abs().max(1.0));
                assert!((a.variance - b.variance).abs() <= 1e-12);
            }
            pure = update_state(&pure, &DVector::from_column_slice(y), &th);
            model.advance(&mut fast, y);
        }
    }

    #[test]
    fn noiseless_propagation() {
        let eps = 1e-18;
        let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let m0 = DVector::from_vec(vec![5.0, -3.0]);
        let th = GmParameter::new(
            a.clone(),
            c.clone(),
            DMatrix::identity(2, 2) * eps,
            DMatrix::identity(1, 1) * eps,
            DMatrix::identity(2, 2) * eps,
            DVector::zeros(2),
            m0.clone(),
        )
        .unwrap();
        let model = GmModel::new(th).unwrap();
        let path = model.simulate_seeded(12, 9);
        let mut x = m0;
        for y in &path {
            let expect = (&c * &x)[0];
            assert!((y[0] - expect).abs() <= 1e-7, "{} vs {}", y[0], expect);
            x = &a * x;
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let model = GmModel::new(scalar(0.95, 0.1, 0.1, 1.0, 10.0, 100.0)).unwrap();
        assert_eq!(model.simulate_seeded(50, 42), model.simulate_seeded(50, 42));
        assert_ne!(model.simulate_seeded(50, 42), model.simulate_seeded(50, 43));
    }
}
