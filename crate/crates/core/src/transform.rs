//! The streaming privacy transform.
//!
//! At every step each measurement component is pushed through the conditional
//! CDF of the true model (conditioned on the true past and the current
//! prefix), then through the inverse conditional CDF of the pseudo model
//! (conditioned on the *disguised* past and prefix). The two conditioning
//! states are advanced separately, each with its own side's vectors, so the
//! output is produced causally one vector at a time.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, input_err, Result};
use crate::gauss_markov::GmModel;
use crate::model::{ConditionalModel, IidModel, MarkovModel, Model, ModelHandle, ModelRegistry};

pub use crate::normal::{gaussian_cdf, gaussian_icdf};

/// Probabilities are clamped to `[CLAMP_EPS, 1 - CLAMP_EPS]` before inversion.
pub const CLAMP_EPS: f64 = 1e-15;

/// Transform state for one pair of models of the same concrete type.
#[derive(Debug, Clone)]
pub struct Session<'m, M: ConditionalModel> {
    true_model: &'m M,
    pseudo_model: &'m M,
    true_state: M::State,
    pseudo_state: M::State,
    identity: bool,
    steps: usize,
    saturations: usize,
}

impl<'m, M: ConditionalModel> Session<'m, M> {
    /// `identity` marks the two sides as the same registered model; the
    /// output is then the input, bit for bit.
    pub fn new(true_model: &'m M, pseudo_model: &'m M, identity: bool) -> Self {
        Self {
            true_state: true_model.initial_state(),
            pseudo_state: pseudo_model.initial_state(),
            true_model,
            pseudo_model,
            identity,
            steps: 0,
            saturations: 0,
        }
    }

    /// Transforms one measurement vector. `u`, when given, receives the
    /// (clamped) CDF values of the true side.
    pub fn step_into(&mut self, y: &[f64], out: &mut [f64], mut u: Option<&mut [f64]>) {
        let d = self.true_model.dim();
        debug_assert_eq!(y.len(), d);
        debug_assert_eq!(out.len(), d);
        if self.identity {
            out.copy_from_slice(y);
            if let Some(u) = u.as_deref_mut() {
                for l in 0..d {
                    let p = self
                        .true_model
                        .component_cdf(&self.true_state, l, &y[..l], y[l]);
                    u[l] = p.clamp(CLAMP_EPS).0.value();
                }
            }
            self.true_model.advance(&mut self.true_state, y);
        } else {
            for l in 0..d {
                let p = self
                    .true_model
                    .component_cdf(&self.true_state, l, &y[..l], y[l]);
                let (p, saturated) = p.clamp(CLAMP_EPS);
                self.saturations += saturated as usize;
                if let Some(u) = u.as_deref_mut() {
                    u[l] = p.value();
                }
                let (done, rest) = out.split_at_mut(l);
                rest[0] = self
                    .pseudo_model
                    .component_quantile(&self.pseudo_state, l, done, p);
            }
            self.true_model.advance(&mut self.true_state, y);
            self.pseudo_model.advance(&mut self.pseudo_state, out);
        }
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn saturations(&self) -> usize {
        self.saturations
    }
}

/// A transform session over two registered models of one family.
#[derive(Debug, Clone)]
pub enum FilterSession<'r> {
    Iid(Session<'r, IidModel>),
    Markov(Session<'r, MarkovModel>),
    GaussMarkov(Session<'r, GmModel>),
}

/// Result of one transform step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub y_tilde: Vec<f64>,
    pub u: Vec<f64>,
}

/// Opens a session that disguises data from `theta_true` as data from
/// `theta_pseudo`. Both models must share family and dimension.
pub fn open_session<'r>(
    registry: &'r ModelRegistry,
    theta_true: ModelHandle,
    theta_pseudo: ModelHandle,
) -> Result<FilterSession<'r>> {
    let t = registry.model(theta_true)?;
    let p = registry.model(theta_pseudo)?;
    if t.family() != p.family() {
        return Err(config_err!(
            "family mismatch: {:?} model cannot be disguised as {:?}",
            t.family(),
            p.family()
        ));
    }
    if t.dim() != p.dim() {
        return Err(config_err!(
            "dimension mismatch: {} vs {}",
            t.dim(),
            p.dim()
        ));
    }
    let identity = theta_true == theta_pseudo;
    Ok(match (t, p) {
        (Model::Iid(a), Model::Iid(b)) => FilterSession::Iid(Session::new(a, b, identity)),
        (Model::Markov(a), Model::Markov(b)) => FilterSession::Markov(Session::new(a, b, identity)),
        (Model::GaussMarkov(a), Model::GaussMarkov(b)) => {
            FilterSession::GaussMarkov(Session::new(a, b, identity))
        }
        _ => unreachable!("families checked above"),
    })
}

macro_rules! dispatch {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            FilterSession::Iid($s) => $e,
            FilterSession::Markov($s) => $e,
            FilterSession::GaussMarkov($s) => $e,
        }
    };
}

impl FilterSession<'_> {
    pub fn dim(&self) -> usize {
        dispatch!(self, s => s.true_model.dim())
    }

    /// Number of vectors consumed.
    pub fn steps(&self) -> usize {
        dispatch!(self, s => s.steps())
    }

    /// CDF values that had to be clamped away from 0 or 1.
    pub fn saturations(&self) -> usize {
        dispatch!(self, s => s.saturations())
    }

    /// Transforms one vector after checking its length and finiteness.
    pub fn step_into(&mut self, y: &[f64], out: &mut [f64], u: Option<&mut [f64]>) -> Result<()> {
        let d = self.dim();
        if y.len() != d || out.len() != d || u.as_ref().is_some_and(|u| u.len() != d) {
            return Err(input_err!("expected {d}-vectors, got {}", y.len()));
        }
        if let Some(x) = y.iter().find(|x| !x.is_finite()) {
            return Err(input_err!("non-finite measurement {x}"));
        }
        dispatch!(self, s => s.step_into(y, out, u));
        Ok(())
    }

    pub fn step(&mut self, y: &[f64]) -> Result<StepOutput> {
        let d = self.dim();
        let mut out = StepOutput {
            y_tilde: vec![0.0; d],
            u: vec![0.0; d],
        };
        self.step_into(y, &mut out.y_tilde, Some(&mut out.u))?;
        Ok(out)
    }
}

/// Captured CDF values `u_k^l`, all in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UniformTrace {
    values: Vec<f64>,
}

impl UniformTrace {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Transforms a whole sequence.
pub fn run_filter(
    registry: &ModelRegistry,
    theta_true: ModelHandle,
    theta_pseudo: ModelHandle,
    ys: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let mut session = open_session(registry, theta_true, theta_pseudo)?;
    ys.iter()
        .map(|y| session.step(y).map(|s| s.y_tilde))
        .collect()
}

/// As [`run_filter`], also returning the CDF values in time-major order.
pub fn run_filter_traced(
    registry: &ModelRegistry,
    theta_true: ModelHandle,
    theta_pseudo: ModelHandle,
    ys: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, UniformTrace)> {
    let mut session = open_session(registry, theta_true, theta_pseudo)?;
    let mut trace = UniformTrace::default();
    let mut out = Vec::with_capacity(ys.len());
    for y in ys {
        let s = session.step(y)?;
        trace.values.extend_from_slice(&s.u);
        out.push(s.y_tilde);
    }
    Ok((out, trace))
}
