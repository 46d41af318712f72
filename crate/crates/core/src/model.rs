//! Rate profiles for the inhomogeneous contact process on the non-negative
//! integers.
//!
//! A profile assigns to every site `n` a rightward birth probability
//! `p_up(n)` in (0, 1] and a death rate `delta(n) > 0`. Site 0 is special:
//! its occupant can only give birth to the right, so `p_up(0) = 1` always.
//! The asymptotic behaviour of the process is governed by the limit of the
//! tail ratio `p_up(n) / delta(n)`, which the built-in families expose
//! analytically and tabulated profiles estimate numerically.

use serde::Serialize;

use crate::error::{Error, Result};

/// Extended non-negative limit of the tail ratio `p_up(n) / delta(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioLimit {
    Finite(f64),
    Infinite,
}

impl RatioLimit {
    /// The limit scaled by a positive multiplier, as an extended real.
    pub fn scaled_by(self, lambda: f64) -> f64 {
        match self {
            RatioLimit::Finite(v) => lambda * v,
            RatioLimit::Infinite => f64::INFINITY,
        }
    }
}

/// Site-indexed birth probabilities and death rates.
///
/// Immutable after construction and cheap to clone; safe to share across
/// concurrently running replicas.
#[derive(Debug, Clone, PartialEq)]
pub enum RateProfile {
    /// `p_up(n) = p` for n >= 1, `delta(n) = d`.
    Homogeneous { p: f64, d: f64 },
    /// `p_up(n) = 1`, `delta(n) = 1`: births only to the right.
    OneSided,
    /// `p_up(n) = min(1, c (n+1)^-a)`, `delta(n) = d (n+1)^-b`, a, b >= 0.
    Power { a: f64, b: f64, c: f64, d: f64 },
    /// Explicit tables with a constant tail: indices past the end repeat
    /// the last entry.
    Tabulated { p: Vec<f64>, delta: Vec<f64> },
}

fn check_probability(p: f64) -> Result<f64> {
    if p <= 0.0 || p > 1.0 || !p.is_finite() {
        return Err(Error::InvalidBirthProbability(p));
    }
    Ok(p)
}

fn check_death_rate(d: f64) -> Result<f64> {
    if d <= 0.0 || !d.is_finite() {
        return Err(Error::InvalidDeathRate(d));
    }
    Ok(d)
}

impl RateProfile {
    pub fn homogeneous(p: f64, d: f64) -> Result<Self> {
        check_probability(p)?;
        check_death_rate(d)?;
        Ok(RateProfile::Homogeneous { p, d })
    }

    pub fn one_sided() -> Self {
        RateProfile::OneSided
    }

    pub fn power(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if a < 0.0 || b < 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidExponent { a, b });
        }
        if c <= 0.0 || d <= 0.0 || !c.is_finite() || !d.is_finite() {
            return Err(Error::InvalidCoefficient { c, d });
        }
        Ok(RateProfile::Power { a, b, c, d })
    }

    pub fn tabulated(p: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if p.is_empty() || delta.is_empty() {
            return Err(Error::EmptyTable);
        }
        for &v in &p {
            check_probability(v)?;
        }
        for &v in &delta {
            check_death_rate(v)?;
        }
        Ok(RateProfile::Tabulated { p, delta })
    }

    /// Build one of the parametric families from its kind tag.
    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self> {
        match kind {
            "homogeneous" => {
                if params.len() != 2 {
                    return Err(Error::BadParamCount {
                        kind: "homogeneous",
                        expected: 2,
                        got: params.len(),
                    });
                }
                Self::homogeneous(params[0], params[1])
            }
            "one_sided" => {
                if !params.is_empty() {
                    return Err(Error::BadParamCount {
                        kind: "one_sided",
                        expected: 0,
                        got: params.len(),
                    });
                }
                Ok(Self::one_sided())
            }
            "power" => {
                if params.len() != 4 {
                    return Err(Error::BadParamCount {
                        kind: "power",
                        expected: 4,
                        got: params.len(),
                    });
                }
                Self::power(params[0], params[1], params[2], params[3])
            }
            other => Err(Error::UnknownProfileKind(other.to_string())),
        }
    }

    /// Rightward birth probability at site `n`. Pinned to 1 at site 0.
    pub fn p_up(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self {
            RateProfile::Homogeneous { p, .. } => *p,
            RateProfile::OneSided => 1.0,
            RateProfile::Power { a, c, .. } => (c * ((n + 1) as f64).powf(-a)).min(1.0),
            RateProfile::Tabulated { p, .. } => p[n.min(p.len() - 1)],
        }
    }

    /// Death rate at site `n`.
    pub fn delta(&self, n: usize) -> f64 {
        match self {
            RateProfile::Homogeneous { d, .. } => *d,
            RateProfile::OneSided => 1.0,
            RateProfile::Power { b, d, .. } => d * ((n + 1) as f64).powf(-b),
            RateProfile::Tabulated { delta, .. } => delta[n.min(delta.len() - 1)],
        }
    }

    /// Analytic tail-ratio limit, when the family has one.
    ///
    /// Tabulated profiles return `None`; their limit has to be estimated.
    pub fn declared_limit(&self) -> Option<RatioLimit> {
        match self {
            RateProfile::Homogeneous { p, d } => Some(RatioLimit::Finite(p / d)),
            RateProfile::OneSided => Some(RatioLimit::Finite(1.0)),
            RateProfile::Power { a, b, c, d } => {
                if a > b {
                    Some(RatioLimit::Finite(0.0))
                } else if a < b {
                    Some(RatioLimit::Infinite)
                } else if *a == 0.0 {
                    // The clamp on p_up never expires: the limit uses min(1, c).
                    Some(RatioLimit::Finite(c.min(1.0) / d))
                } else {
                    Some(RatioLimit::Finite(c / d))
                }
            }
            RateProfile::Tabulated { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RateProfile::Homogeneous { .. } => "homogeneous",
            RateProfile::OneSided => "one_sided",
            RateProfile::Power { .. } => "power",
            RateProfile::Tabulated { .. } => "tabulated",
        }
    }
}

/// Minimum horizon accepted by [`rate_ratio_limit`].
pub const MIN_RATIO_HORIZON: usize = 10;

/// Tail-ratio limit of a profile: the declared value when the family has
/// one, otherwise a numeric estimate over `n in [horizon/2, horizon]`.
///
/// Returns `None` when the tail is inconclusive: the window oscillates and
/// is not uniformly above `1/tol` (increasing) or below `tol` (decreasing).
pub fn rate_ratio_limit(
    profile: &RateProfile,
    horizon: usize,
    tol: f64,
) -> Result<Option<RatioLimit>> {
    if horizon < MIN_RATIO_HORIZON {
        return Err(Error::HorizonTooShort {
            min: MIN_RATIO_HORIZON,
            got: horizon,
        });
    }
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidTolerance(tol));
    }
    if let Some(limit) = profile.declared_limit() {
        return Ok(Some(limit));
    }
    Ok(estimate_ratio_limit(profile, horizon, tol))
}

/// The numeric estimator behind [`rate_ratio_limit`], ignoring any declared
/// limit. Exposed so the estimator can be validated against families whose
/// limit is known.
pub fn estimate_ratio_limit(profile: &RateProfile, horizon: usize, tol: f64) -> Option<RatioLimit> {
    let lo = horizon / 2;
    let ratios: Vec<f64> = (lo..=horizon)
        .map(|n| profile.p_up(n) / profile.delta(n))
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min < tol * (1.0 + mean.abs()) {
        return Some(RatioLimit::Finite(mean));
    }
    let non_decreasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    if non_decreasing && min > 1.0 / tol {
        return Some(RatioLimit::Infinite);
    }
    let non_increasing = ratios.windows(2).all(|w| w[1] <= w[0]);
    if non_increasing && max < tol {
        return Some(RatioLimit::Finite(0.0));
    }
    None
}

/// Parameters of one simulated process.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Global birth-rate multiplier (events per unit time).
    pub lambda: f64,
    pub profile: RateProfile,
    /// Site of the single initial occupant.
    pub initial_site: usize,
}

impl ModelParams {
    pub fn new(lambda: f64, profile: RateProfile, initial_site: usize) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(ModelParams {
            lambda,
            profile,
            initial_site,
        })
    }
}
