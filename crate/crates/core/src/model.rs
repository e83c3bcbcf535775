//! Parameter spaces, priors, and the conditional-model abstraction.
//!
//! A statistical model is anything that can report the conditional CDF of one
//! measurement component given the same-time prefix and the past, invert it,
//! and simulate paths. [`ConditionalModel`] expresses this recursively: a model
//! keeps a summary `State` of the past that it advances one measurement vector
//! at a time, and the history-based queries are derived by replaying a
//! history into that state.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{config_err, Result};
use crate::gauss_markov::{GmModel, GmParameter};
use crate::normal::{std_normal_quantile, std_normal_tail};
use crate::tail::Tail;

/// Opaque identifier of a registered model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelHandle(u32);

impl ModelHandle {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Discrete prior over a finite set of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPrior {
    labels: Vec<ModelHandle>,
    probs: Vec<f64>,
}

impl ParameterPrior {
    pub fn new(labels: Vec<ModelHandle>, probs: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(config_err!("prior needs at least one parameter"));
        }
        if labels.len() != probs.len() {
            return Err(config_err!(
                "prior has {} labels but {} probabilities",
                labels.len(),
                probs.len()
            ));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(config_err!("prior label {:?} repeated", a));
            }
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(config_err!(
                "prior probability {p} is not a finite non-negative number"
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(config_err!("prior probabilities sum to {total}, not 1"));
        }
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &[ModelHandle] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        prior_entropy(self)
    }
}

/// Shannon entropy of the prior in nats, with `0 ln 0 = 0`.
pub fn prior_entropy(prior: &ParameterPrior) -> f64 {
    entropy(prior.probs())
}

pub(crate) fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum::<f64>()
}

/// Index drawn from `weights` (summing to about 1) by inverting their CDF at
/// `u`. Indices with zero weight are never returned.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Conditional law of each measurement component given its same-time prefix
/// and the past.
///
/// Components and time steps are 0-based. `State` summarizes `y_1..y_{k-1}`;
/// it must not retain references to caller data.
pub trait ConditionalModel {
    type State: Clone;

    /// Measurement dimension `d`.
    fn dim(&self) -> usize;

    /// State before the first measurement.
    fn initial_state(&self) -> Self::State;

    /// Folds measurement vector `y` into the state.
    fn advance(&self, state: &mut Self::State, y: &[f64]);

    /// CDF of component `component` at `z`, given the state and the first
    /// `component` entries of the current vector.
    fn component_cdf(&self, state: &Self::State, component: usize, prefix: &[f64], z: f64) -> Tail;

    /// Inverse of [`Self::component_cdf`]. The default inverts by bisection.
    fn component_quantile(
        &self,
        state: &Self::State,
        component: usize,
        prefix: &[f64],
        p: Tail,
    ) -> f64 {
        invert_by_bisection(|z| self.component_cdf(state, component, prefix, z), p)
    }

    /// Simulates `horizon` measurement vectors.
    fn sample_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<Vec<f64>>;

    /// State after folding in a flat history of `k * d` values.
    fn state_after(&self, history: &[f64]) -> Self::State {
        let d = self.dim();
        assert!(
            history.len().is_multiple_of(d),
            "history length {} not a multiple of {d}",
            history.len()
        );
        let mut state = self.initial_state();
        for y in history.chunks_exact(d) {
            self.advance(&mut state, y);
        }
        state
    }

    /// `F_{l,k}(z | prefix, history)`, with `k = history.len() / d`.
    fn cond_cdf(&self, z: f64, component: usize, prefix: &[f64], history: &[f64]) -> f64 {
        let state = self.state_after(history);
        self.component_cdf(&state, component, prefix, z).value()
    }

    /// `F^{-1}_{l,k}(u | prefix, history)`.
    fn cond_icdf(&self, u: f64, component: usize, prefix: &[f64], history: &[f64]) -> f64 {
        let state = self.state_after(history);
        self.component_quantile(&state, component, prefix, Tail::from_value(u))
    }
}

/// Solves `cdf(z) = p` by bisection over an automatically expanded bracket.
///
/// Iterates until the bracket stops shrinking in floating point, which is
/// well inside a 1e-12 tolerance on `u` for any continuous CDF.
pub fn invert_by_bisection<F: Fn(f64) -> Tail>(cdf: F, p: Tail) -> f64 {
    let below = |z: f64| cdf(z).cmp_value(p) == Ordering::Less;
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut width = 1.0;
    while below(hi) {
        lo = hi;
        width *= 2.0;
        hi += width;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    width = 1.0;
    while !below(lo) {
        hi = lo;
        width *= 2.0;
        lo -= width;
        if !lo.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Named univariate density families, parameterized by location and scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// Normal with standard deviation `scale`.
    Gaussian,
    /// Laplace with diversity `scale`.
    Laplace,
    /// Exponential supported on `[location, inf)` with mean excess `scale`.
    /// The CDF saturates at 0 below the support.
    Exponential,
}

impl DensityKind {
    pub fn tail(self, z: f64, location: f64, scale: f64) -> Tail {
        let x = (z - location) / scale;
        match self {
            DensityKind::Gaussian => std_normal_tail(x),
            DensityKind::Laplace => {
                if x < 0.0 {
                    Tail::Lower(0.5 * libm::exp(x))
                } else {
                    Tail::Upper(0.5 * libm::exp(-x))
                }
            }
            DensityKind::Exponential => {
                if x <= 0.0 {
                    Tail::Lower(0.0)
                } else {
                    Tail::from_masses(-libm::expm1(-x), libm::exp(-x))
                }
            }
        }
    }

    pub fn quantile(self, p: Tail, location: f64, scale: f64) -> f64 {
        let x = match (self, p) {
            (DensityKind::Gaussian, p) => std_normal_quantile(p),
            (DensityKind::Laplace, Tail::Lower(p)) => libm::log(2.0 * p),
            (DensityKind::Laplace, Tail::Upper(q)) => -libm::log(2.0 * q),
            (DensityKind::Exponential, Tail::Lower(p)) => -libm::log1p(-p),
            (DensityKind::Exponential, Tail::Upper(q)) => -libm::log(q),
        };
        location + scale * x
    }

    pub fn sample<R: Rng + ?Sized>(self, location: f64, scale: f64, rng: &mut R) -> f64 {
        let x: f64 = match self {
            DensityKind::Gaussian => StandardNormal.sample(rng),
            DensityKind::Laplace => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                a - b
            }
            DensityKind::Exponential => Exp1.sample(rng),
        };
        location + scale * x
    }
}

/// Law of one component: a density family whose location is
/// `location + coupling . prefix` (plus a lag term for Markov transitions).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLaw {
    pub kind: DensityKind,
    pub location: f64,
    pub scale: f64,
    /// Weights on the same-time prefix; length equals the component index.
    pub coupling: Vec<f64>,
}

impl ComponentLaw {
    pub fn new(kind: DensityKind, location: f64, scale: f64) -> Self {
        Self {
            kind,
            location,
            scale,
            coupling: Vec::new(),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(config_err!(
                "component {index}: scale {} must be positive",
                self.scale
            ));
        }
        if !self.location.is_finite() {
            return Err(config_err!("component {index}: location must be finite"));
        }
        if !self.coupling.is_empty() && self.coupling.len() != index {
            return Err(config_err!(
                "component {index}: coupling has {} weights, expected {index}",
                self.coupling.len()
            ));
        }
        if self.coupling.iter().any(|c| !c.is_finite()) {
            return Err(config_err!(
                "component {index}: coupling weights must be finite"
            ));
        }
        Ok(())
    }

    fn location_given(&self, prefix: &[f64]) -> f64 {
        self.location + dot(&self.coupling, prefix)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Measurements independent over time with a common per-step density.
#[derive(Debug, Clone, PartialEq)]
pub struct IidModel {
    pub components: Vec<ComponentLaw>,
}

impl IidModel {
    pub fn new(components: Vec<ComponentLaw>) -> Result<Self> {
        let m = Self { components };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(config_err!("iid model needs at least one component"));
        }
        self.components
            .iter()
            .enumerate()
            .try_for_each(|(i, c)| c.validate(i))
    }
}

impl ConditionalModel for IidModel {
    type State = ();

    fn dim(&self) -> usize {
        self.components.len()
    }

    fn initial_state(&self) {}

    fn advance(&self, _: &mut (), _: &[f64]) {}

    fn component_cdf(&self, _: &(), component: usize, prefix: &[f64], z: f64) -> Tail {
        let law = &self.components[component];
        law.kind.tail(z, law.location_given(prefix), law.scale)
    }

    fn component_quantile(&self, _: &(), component: usize, prefix: &[f64], p: Tail) -> f64 {
        let law = &self.components[component];
        law.kind.quantile(p, law.location_given(prefix), law.scale)
    }

    fn sample_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..horizon)
            .map(|_| {
                let mut y = Vec::with_capacity(self.dim());
                for law in &self.components {
                    let loc = law.location_given(&y);
                    y.push(law.kind.sample(loc, law.scale, rng));
                }
                y
            })
            .collect()
    }
}

/// First-order Markov measurements: an initial law for `y_1` and a
/// transition law whose component locations also depend linearly on `y_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub initial: Vec<ComponentLaw>,
    pub transition: Vec<ComponentLaw>,
    /// `lag[l][m]` weights `y_{k-1}^m` in the location of component `l`.
    pub lag: Vec<Vec<f64>>,
}

impl MarkovModel {
    pub fn new(
        initial: Vec<ComponentLaw>,
        transition: Vec<ComponentLaw>,
        lag: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = Self {
            initial,
            transition,
            lag,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.initial.len();
        if d == 0 {
            return Err(config_err!("markov model needs at least one component"));
        }
        if self.transition.len() != d {
            return Err(config_err!(
                "markov model: {} initial components but {} transition components",
                d,
                self.transition.len()
            ));
        }
        if self.lag.len() != d || self.lag.iter().any(|r| r.len() != d) {
            return Err(config_err!("markov model: lag matrix must be {d}x{d}"));
        }
        if self.lag.iter().flatten().any(|c| !c.is_finite()) {
            return Err(config_err!("markov model: lag weights must be finite"));
        }
        self.initial
            .iter()
            .enumerate()
            .try_for_each(|(i, c)| c.validate(i))?;
        self.transition
            .iter()
            .enumerate()
            .try_for_each(|(i, c)| c.validate(i))
    }

    fn law_location(
        &self,
        state: &Option<Vec<f64>>,
        component: usize,
        prefix: &[f64],
    ) -> (&ComponentLaw, f64) {
        match state {
            None => {
                let law = &self.initial[component];
                (law, law.location_given(prefix))
            }
            Some(prev) => {
                let law = &self.transition[component];
                (
                    law,
                    law.location_given(prefix) + dot(&self.lag[component], prev),
                )
            }
        }
    }
}

impl ConditionalModel for MarkovModel {
    /// The previous measurement vector, once there is one.
    type State = Option<Vec<f64>>;

    fn dim(&self) -> usize {
        self.initial.len()
    }

    fn initial_state(&self) -> Self::State {
        None
    }

    fn advance(&self, state: &mut Self::State, y: &[f64]) {
        match state {
            Some(prev) => prev.copy_from_slice(y),
            None => *state = Some(y.to_vec()),
        }
    }

    fn component_cdf(&self, state: &Self::State, component: usize, prefix: &[f64], z: f64) -> Tail {
        let (law, loc) = self.law_location(state, component, prefix);
        law.kind.tail(z, loc, law.scale)
    }

    fn component_quantile(
        &self,
        state: &Self::State,
        component: usize,
        prefix: &[f64],
        p: Tail,
    ) -> f64 {
        let (law, loc) = self.law_location(state, component, prefix);
        law.kind.quantile(p, loc, law.scale)
    }

    fn sample_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut state = self.initial_state();
        let mut path = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut y = Vec::with_capacity(d);
            for l in 0..d {
                let (law, loc) = self.law_location(&state, l, &y);
                y.push(law.kind.sample(loc, law.scale, rng));
            }
            self.advance(&mut state, &y);
            path.push(y);
        }
        path
    }
}

/// Model family; both sides of a filter session must share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Iid,
    Markov,
    GaussMarkov,
}

/// Complete description of a model, as supplied for registration.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDescriptor {
    Iid(IidModel),
    Markov(MarkovModel),
    GaussMarkov(GmParameter),
}

/// A validated, registered model.
// registries hold a handful of long-lived models, so the size spread is harmless
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Model {
    Iid(IidModel),
    Markov(MarkovModel),
    GaussMarkov(GmModel),
}

impl Model {
    pub fn from_descriptor(descriptor: ModelDescriptor) -> Result<Self> {
        Ok(match descriptor {
            ModelDescriptor::Iid(m) => {
                m.validate()?;
                Model::Iid(m)
            }
            ModelDescriptor::Markov(m) => {
                m.validate()?;
                Model::Markov(m)
            }
            ModelDescriptor::GaussMarkov(p) => Model::GaussMarkov(GmModel::new(p)?),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Model::Iid(_) => Family::Iid,
            Model::Markov(_) => Family::Markov,
            Model::GaussMarkov(_) => Family::GaussMarkov,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Iid(m) => m.dim(),
            Model::Markov(m) => m.dim(),
            Model::GaussMarkov(m) => m.dim(),
        }
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            Model::Iid(m) => m.sample_path(horizon, rng),
            Model::Markov(m) => m.sample_path(horizon, rng),
            Model::GaussMarkov(m) => m.sample_path(horizon, rng),
        }
    }

    /// Simulates into a flat row-major buffer of `horizon * d` values.
    pub fn sample_path_into<R: Rng + ?Sized>(
        &self,
        out: &mut Vec<f64>,
        horizon: usize,
        rng: &mut R,
    ) {
        out.clear();
        match self {
            Model::GaussMarkov(m) => m.sample_path_into(out, horizon, rng),
            other => other
                .sample_path(horizon, rng)
                .iter()
                .for_each(|y| out.extend_from_slice(y)),
        }
    }

    /// History-based conditional CDF, dispatched to the concrete model.
    pub fn cond_cdf(&self, z: f64, component: usize, prefix: &[f64], history: &[f64]) -> f64 {
        match self {
            Model::Iid(m) => m.cond_cdf(z, component, prefix, history),
            Model::Markov(m) => m.cond_cdf(z, component, prefix, history),
            Model::GaussMarkov(m) => m.cond_cdf(z, component, prefix, history),
        }
    }

    pub fn cond_icdf(&self, u: f64, component: usize, prefix: &[f64], history: &[f64]) -> f64 {
        match self {
            Model::Iid(m) => m.cond_icdf(u, component, prefix, history),
            Model::Markov(m) => m.cond_icdf(u, component, prefix, history),
            Model::GaussMarkov(m) => m.cond_icdf(u, component, prefix, history),
        }
    }
}

/// Append-only store of registered models. Share it by reference once built.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    models: Vec<Model>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates the descriptor and returns a fresh handle. Registering equal
    /// descriptors twice yields two distinct handles.
    pub fn register(&mut self, descriptor: ModelDescriptor) -> Result<ModelHandle> {
        let model = Model::from_descriptor(descriptor)?;
        let handle = ModelHandle(self.models.len() as u32);
        self.models.push(model);
        Ok(handle)
    }

    pub fn get(&self, handle: ModelHandle) -> Option<&Model> {
        self.models.get(handle.index())
    }

    pub fn model(&self, handle: ModelHandle) -> Result<&Model> {
        self.get(handle)
            .ok_or_else(|| config_err!("unknown model handle {:?}", handle))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Handles of all registered models, in registration order.
    pub fn handles(&self) -> impl Iterator<Item = ModelHandle> + '_ {
        (0..self.models.len() as u32).map(ModelHandle)
    }
}

/// Convenience: an i.i.d. model with independent components of one family.
pub fn independent_iid(kind: DensityKind, locations: &[f64], scales: &[f64]) -> Result<IidModel> {
    if locations.len() != scales.len() {
        return Err(config_err!("locations and scales differ in length"));
    }
    IidModel::new(
        locations
            .iter()
            .zip(scales)
            .map(|(&l, &s)| ComponentLaw::new(kind, l, s))
            .collect(),
    )
}
