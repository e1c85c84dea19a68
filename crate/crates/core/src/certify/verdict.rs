//! Turning a measured `T ± σ` into a certification level.

use serde::Serialize;
use thiserror::Error;

use super::bounds::{self, BoundError, StateSet, DEFAULT_FILTERS};
use crate::witness::{WitnessValue, T_ONE_PAIR, T_PPT};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("sigma is zero and T = {t} sits on the bound {bound}")]
    DegenerateStatistics { t: f64, bound: f64 },
    #[error("sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    None,
    AtLeastOnePair,
    MoreThanOnePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Shipped constants `2√2` and `5/√2`.
    Cached,
    /// Computed in this run by the SDP routines.
    Recomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationBounds {
    pub separable: f64,
    pub one_pair: f64,
    pub provenance: Provenance,
}

impl CertificationBounds {
    pub fn cached() -> Self {
        Self { separable: T_PPT, one_pair: T_ONE_PAIR, provenance: Provenance::Cached }
    }

    /// Runs both SDP bounds (each cross-checked by bisection).
    pub fn recompute() -> Result<Self, BoundError> {
        let (ppt, one_pair) = rayon::join(
            || bounds::max_ratio_bound(StateSet::Ppt, &[]),
            || bounds::max_ratio_bound(StateSet::SchmidtNumber(2), &DEFAULT_FILTERS),
        );
        Ok(Self {
            separable: ppt?.fractional.value,
            one_pair: one_pair?.fractional.value,
            provenance: Provenance::Recomputed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationVerdict {
    pub level: Level,
    /// `(T - bound) / σ` against the bound that decides the level: the
    /// one-pair bound for `more_than_one_pair`, the separable bound otherwise.
    pub margin_sigmas: f64,
    pub t: f64,
    pub sigma_t: f64,
    pub bounds: CertificationBounds,
}

pub fn certify(value: &WitnessValue, bounds: &CertificationBounds) -> Result<CertificationVerdict, CertifyError> {
    certify_t(value.t, value.sigma_t, bounds)
}

pub fn certify_t(t: f64, sigma_t: f64, bounds: &CertificationBounds) -> Result<CertificationVerdict, CertifyError> {
    if !(sigma_t.is_finite() && sigma_t >= 0.0) {
        return Err(CertifyError::InvalidSigma(sigma_t));
    }
    let (level, bound) = if t > bounds.one_pair {
        (Level::MoreThanOnePair, bounds.one_pair)
    } else if t > bounds.separable {
        (Level::AtLeastOnePair, bounds.separable)
    } else {
        (Level::None, bounds.separable)
    };
    if sigma_t == 0.0 && (t == bounds.one_pair || t == bounds.separable) {
        return Err(CertifyError::DegenerateStatistics { t, bound });
    }
    let margin_sigmas = if sigma_t == 0.0 {
        (t - bound).signum() * f64::INFINITY
    } else {
        (t - bound) / sigma_t
    };
    Ok(CertificationVerdict { level, margin_sigmas, t, sigma_t, bounds: *bounds })
}
