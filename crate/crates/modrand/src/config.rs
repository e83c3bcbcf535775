//! JSON experiment configuration.
//!
//! A config names every model once in `models`; the prior, the pseudo support
//! and the CLI refer to models by those names. Gauss-Markov matrices may be
//! written as nested arrays or, for scalar systems, as plain numbers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use modrand_core::adversary::OccupancyEstimatorConfig;
use modrand_core::gauss_markov::GmParameter;
use modrand_core::model::{ComponentLaw, DensityKind, IidModel, MarkovModel};
use modrand_core::randomizer::DistortionFunction;
use modrand_core::{ModelDescriptor, ModelHandle, ModelRegistry, ParameterPrior};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn to_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(x) => Ok(DMatrix::from_element(1, 1, *x)),
            MatrixSpec::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
                    bail!("{name} must be a non-empty rectangular matrix");
                }
                Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum VectorSpec {
    Scalar(f64),
    Values(Vec<f64>),
}

impl VectorSpec {
    fn to_vector(&self) -> DVector<f64> {
        match self {
            VectorSpec::Scalar(x) => DVector::from_element(1, *x),
            VectorSpec::Values(v) => DVector::from_column_slice(v),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FamilySpec {
    Gaussian,
    Laplace,
    Exponential,
}

impl From<FamilySpec> for DensityKind {
    fn from(f: FamilySpec) -> Self {
        match f {
            FamilySpec::Gaussian => DensityKind::Gaussian,
            FamilySpec::Laplace => DensityKind::Laplace,
            FamilySpec::Exponential => DensityKind::Exponential,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub family: FamilySpec,
    pub location: f64,
    pub scale: f64,
    #[serde(default)]
    pub coupling: Vec<f64>,
}

impl ComponentSpec {
    fn to_law(&self) -> ComponentLaw {
        ComponentLaw {
            kind: self.family.into(),
            location: self.location,
            scale: self.scale,
            coupling: self.coupling.clone(),
        }
    }
}

/// One model of the registry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Iid {
        components: Vec<ComponentSpec>,
    },
    Markov {
        initial: Vec<ComponentSpec>,
        transition: Vec<ComponentSpec>,
        lag: Vec<Vec<f64>>,
    },
    GaussMarkov {
        #[serde(rename = "A")]
        a: MatrixSpec,
        #[serde(rename = "C")]
        c: MatrixSpec,
        #[serde(rename = "Qw")]
        qw: MatrixSpec,
        #[serde(rename = "Qv")]
        qv: MatrixSpec,
        #[serde(rename = "Q0")]
        q0: MatrixSpec,
        drift: VectorSpec,
        m0: VectorSpec,
    },
}

impl ModelSpec {
    pub fn to_descriptor(&self) -> Result<ModelDescriptor> {
        Ok(match self {
            ModelSpec::Iid { components } => ModelDescriptor::Iid(IidModel::new(
                components.iter().map(ComponentSpec::to_law).collect(),
            )?),
            ModelSpec::Markov {
                initial,
                transition,
                lag,
            } => ModelDescriptor::Markov(MarkovModel::new(
                initial.iter().map(ComponentSpec::to_law).collect(),
                transition.iter().map(ComponentSpec::to_law).collect(),
                lag.clone(),
            )?),
            ModelSpec::GaussMarkov {
                a,
                c,
                qw,
                qv,
                q0,
                drift,
                m0,
            } => ModelDescriptor::GaussMarkov(GmParameter::new(
                a.to_matrix("A")?,
                c.to_matrix("C")?,
                qw.to_matrix("Qw")?,
                qv.to_matrix("Qv")?,
                q0.to_matrix("Q0")?,
                drift.to_vector(),
                m0.to_vector(),
            )?),
        })
    }

    /// Scalar Gauss-Markov model `x' = a x + drift + w`, `y = x + v`.
    pub fn scalar_gm(a: f64, qw: f64, qv: f64, q0: f64, drift: f64, m0: f64) -> Self {
        ModelSpec::GaussMarkov {
            a: MatrixSpec::Scalar(a),
            c: MatrixSpec::Scalar(1.0),
            qw: MatrixSpec::Scalar(qw),
            qv: MatrixSpec::Scalar(qv),
            q0: MatrixSpec::Scalar(q0),
            drift: VectorSpec::Scalar(drift),
            m0: VectorSpec::Scalar(m0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorEntry {
    pub model: String,
    pub prob: f64,
    /// Numeric parameter value, used by the adversary's decision rule.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistortionSpec {
    #[default]
    Absolute,
    Squared,
}

impl From<DistortionSpec> for DistortionFunction {
    fn from(d: DistortionSpec) -> Self {
        match d {
            DistortionSpec::Absolute => DistortionFunction::AbsoluteError,
            DistortionSpec::Squared => DistortionFunction::SquaredError,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub window: usize,
    pub decay: f64,
    /// 1-based end of the newer window; defaults to the horizon.
    #[serde(default)]
    pub end: Option<usize>,
    /// Decision candidates; defaults to the prior's parameter values.
    #[serde(default)]
    pub candidates: Option<Vec<f64>>,
    #[serde(default)]
    pub component: usize,
}

/// The additive-noise baseline: a first-order model
/// `x' = a x + b theta + w`, `y = x + v`, observed with extra i.i.d.
/// Gaussian noise.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub a: f64,
    pub b: f64,
    pub qw: f64,
    pub qv: f64,
    pub q0: f64,
    pub m0: f64,
    pub horizon: usize,
    pub window: usize,
    pub thetas: Vec<f64>,
    pub noise_variance: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub models: BTreeMap<String, ModelSpec>,
    pub prior: Vec<PriorEntry>,
    pub pseudo: Vec<String>,
    pub horizon: usize,
    #[serde(default)]
    pub distortion: DistortionSpec,
    pub i0_grid: Vec<f64>,
    pub n_paths: usize,
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub estimator: EstimatorSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub baseline: Option<BaselineSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Registers the models and resolves every name.
    pub fn build(&self) -> Result<Experiment> {
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if self.i0_grid.is_empty() {
            bail!("i0_grid is empty");
        }
        if let Some(x) = self.i0_grid.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            bail!("leakage budget {x} must be finite and non-negative");
        }
        if self.pseudo.is_empty() {
            bail!("pseudo support is empty");
        }
        let mut registry = ModelRegistry::new();
        let mut names = BTreeMap::new();
        for (name, spec) in &self.models {
            let d = spec
                .to_descriptor()
                .with_context(|| format!("model {name:?}"))?;
            names.insert(name.clone(), registry.register(d)?);
        }
        let lookup = |n: &str| {
            names
                .get(n)
                .copied()
                .ok_or_else(|| anyhow!("unknown model {n:?}"))
        };
        let labels = self
            .prior
            .iter()
            .map(|e| lookup(&e.model))
            .collect::<Result<Vec<_>>>()?;
        let prior = ParameterPrior::new(labels, self.prior.iter().map(|e| e.prob).collect())?;
        let pseudo = self
            .pseudo
            .iter()
            .map(|n| lookup(n))
            .collect::<Result<Vec<_>>>()?;
        let theta_values: Vec<f64> = self.prior.iter().map(|e| e.value).collect();
        let est = &self.estimator;
        let estimator = OccupancyEstimatorConfig {
            window: est.window,
            decay: est.decay,
            end: est.end,
            candidates: est
                .candidates
                .clone()
                .unwrap_or_else(|| theta_values.clone()),
            component: est.component,
        };
        estimator.validate(self.horizon)?;
        Ok(Experiment {
            registry,
            names,
            prior,
            pseudo,
            theta_values,
            estimator,
        })
    }
}

/// A config resolved against a live registry.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub registry: ModelRegistry,
    pub names: BTreeMap<String, ModelHandle>,
    pub prior: ParameterPrior,
    pub pseudo: Vec<ModelHandle>,
    pub theta_values: Vec<f64>,
    pub estimator: OccupancyEstimatorConfig,
}

impl Experiment {
    pub fn handle(&self, name: &str) -> Result<ModelHandle> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| anyhow!("unknown model {name:?}"))
    }

    pub fn name_of(&self, handle: ModelHandle) -> &str {
        self.names
            .iter()
            .find(|(_, h)| **h == handle)
            .map_or("?", |(n, _)| n.as_str())
    }
}

/// The occupancy experiment: `x' = 0.95 x + w + 10 theta`, `y = x + v`,
/// noise variances 0.1, `x_1 ~ N(100, 1)`, `T = 50`, theta uniform on
/// {0, 1}, pseudo values {0, 0.2, ..., 1}.
pub fn occupancy_config() -> ExperimentConfig {
    let drifts = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
    let pseudo_values = drifts.map(|b| b / 10.0);
    let mut models = BTreeMap::new();
    for b in drifts {
        models.insert(
            occupancy_name(b / 10.0),
            ModelSpec::scalar_gm(0.95, 0.1, 0.1, 1.0, b, 100.0),
        );
    }
    ExperimentConfig {
        models,
        prior: vec![
            PriorEntry {
                model: occupancy_name(0.0),
                prob: 0.5,
                value: 0.0,
            },
            PriorEntry {
                model: occupancy_name(1.0),
                prob: 0.5,
                value: 1.0,
            },
        ],
        pseudo: pseudo_values.iter().map(|&v| occupancy_name(v)).collect(),
        horizon: 50,
        distortion: DistortionSpec::Absolute,
        i0_grid: vec![
            0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.68, 0.69,
        ],
        n_paths: 10_000,
        n_trials: 100_000,
        seed: 2024,
        estimator: EstimatorSpec {
            window: 10,
            decay: 0.95,
            end: Some(50),
            candidates: Some(vec![0.0, 1.0]),
            component: 0,
        },
        output_dir: default_output_dir(),
        baseline: Some(BaselineSpec {
            a: 0.9999,
            b: 1.0,
            qw: 0.1,
            qv: 0.1,
            q0: 1.0,
            m0: 100.0,
            horizon: 100,
            window: 10,
            thetas: vec![1.0, 2.0],
            noise_variance: 1.0,
            runs: 1000,
        }),
    }
}

fn occupancy_name(v: f64) -> String {
    format!("theta_{v:.1}")
}
