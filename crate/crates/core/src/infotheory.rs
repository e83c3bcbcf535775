//! Leakage accounting.
//!
//! All quantities are in nats. The Fano-type lower bound on the error
//! probability of any estimator of `theta` from the disguised data is
//!
//! ```text
//! P_err >= (H(theta) - I0 - 1) / ln m
//! ```
//!
//! which is vacuous (negative) for small alphabets; both the raw and the
//! clamped value are reported. The end-to-end leakage `I(theta; Y~_{1:T})` is
//! bounded above by `I(theta; pseudo)` through data processing, since the
//! disguised sequence depends on `theta` only through the pseudo parameter.

use crate::error::{domain_err, Result};
use crate::model::ParameterPrior;
use crate::randomizer::{mutual_information, RandomizerPolicy};

/// Unclamped Fano bound `(h - i0 - 1) / ln m`.
pub fn fano_bound_raw(h: f64, i0: f64, alphabet_size: usize) -> Result<f64> {
    if alphabet_size < 2 {
        return Err(domain_err!(
            "Fano bound needs an alphabet of at least 2, got {alphabet_size}"
        ));
    }
    if h.is_nan() || i0.is_nan() || h < 0.0 || i0 < 0.0 {
        return Err(domain_err!(
            "entropy {h} and leakage {i0} must be non-negative"
        ));
    }
    Ok((h - i0 - 1.0) / libm::log(alphabet_size as f64))
}

/// Fano bound clamped to `[0, 1]`.
pub fn fano_bound(h: f64, i0: f64, alphabet_size: usize) -> Result<f64> {
    Ok(fano_bound_raw(h, i0, alphabet_size)?.clamp(0.0, 1.0))
}

/// Upper bound on `I(theta; Y~_{1:T})`: the leakage of the randomizer alone.
pub fn data_processing_bound(prior: &ParameterPrior, policy: &RandomizerPolicy) -> f64 {
    mutual_information(prior, policy)
}

pub fn nats_to_bits(x: f64) -> f64 {
    x / core::f64::consts::LN_2
}

pub fn bits_to_nats(x: f64) -> f64 {
    x * core::f64::consts::LN_2
}

/// Summary of the analytic privacy guarantees of a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyReport {
    pub h_theta: f64,
    pub i_theta_thetatilde: f64,
    pub fano_lower_bound: f64,
    pub fano_raw: f64,
    pub leakage_budget: f64,
}

impl PrivacyReport {
    /// The Fano bound is evaluated at the achieved leakage over the
    /// parameter alphabet. `budget` is carried for reporting only.
    pub fn new(prior: &ParameterPrior, policy: &RandomizerPolicy, budget: f64) -> Result<Self> {
        let h = prior.entropy();
        let mi = data_processing_bound(prior, policy);
        let m = prior.len().max(2);
        Ok(Self {
            h_theta: h,
            i_theta_thetatilde: mi,
            fano_lower_bound: fano_bound(h, mi, m)?,
            fano_raw: fano_bound_raw(h, mi, m)?,
            leakage_budget: budget,
        })
    }

    /// Same report with information quantities in bits.
    pub fn in_bits(self) -> Self {
        Self {
            h_theta: nats_to_bits(self.h_theta),
            i_theta_thetatilde: nats_to_bits(self.i_theta_thetatilde),
            leakage_budget: nats_to_bits(self.leakage_budget),
            ..self
        }
    }
}
