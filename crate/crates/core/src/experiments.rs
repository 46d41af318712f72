//! Monte Carlo estimation layer: survival curves over the birth-rate
//! multiplier, critical-value bracketing and regime classification.
//!
//! Survival of the process is an infinite-time event; every estimate here is
//! censored by a [`StopRule`] and counts alive-at-horizon together with
//! escaped-right as alive. Replicas use seeds derived from the master seed
//! and the replica index, so the estimates are reproducible no matter how
//! the replicas are scheduled, and aggregation is a commutative count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front_chain::{series_test, FrontChain, SeriesVerdict};
use crate::model::{rate_ratio_limit, ModelParams, RateProfile, RatioLimit};
use crate::rng::replica_seed;
use crate::simulator::{monotone_coupled_run, simulate_run, StopRule};
use crate::stats::wilson_interval;

/// Default survival-decision threshold for critical-value probes.
pub const DEFAULT_P_FLOOR: f64 = 0.02;
/// Default confidence level for Wilson intervals.
pub const DEFAULT_CI_LEVEL: f64 = 0.95;
/// Default censoring horizon.
pub const DEFAULT_HORIZON: f64 = 500.0;
/// Tail horizon used when classifying a profile's ratio limit.
pub const CLASSIFY_RATIO_HORIZON: usize = 10_000;
/// Tail tolerance used when classifying a profile's ratio limit.
pub const CLASSIFY_RATIO_TOL: f64 = 1e-3;
/// Series depth for the extinction-bound cross-check.
pub const CLASSIFY_SERIES_DEPTH: usize = 10_000;

/// Default right cutoff paired with a horizon: twice the horizon.
pub fn default_right_cutoff(horizon: f64) -> usize {
    (2.0 * horizon).ceil() as usize
}

/// Monte Carlo survival frequency at one multiplier, with its Wilson
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub lambda: f64,
    pub runs: u64,
    pub alive: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub horizon: f64,
    pub right_cutoff: Option<usize>,
}

impl SurvivalEstimate {
    fn from_counts(
        lambda: f64,
        alive: u64,
        runs: u64,
        stop: &StopRule,
        level: f64,
    ) -> Result<Self> {
        let (wilson_lo, wilson_hi) = wilson_interval(alive, runs, level)?;
        Ok(SurvivalEstimate {
            lambda,
            runs,
            alive,
            p_hat: alive as f64 / runs as f64,
            wilson_lo,
            wilson_hi,
            horizon: stop.horizon,
            right_cutoff: stop.right_cutoff,
        })
    }

    pub fn ci_width(&self) -> f64 {
        self.wilson_hi - self.wilson_lo
    }
}

fn alive_count(params: &ModelParams, stop: &StopRule, runs: u64, master_seed: u64) -> Result<u64> {
    let alive = (0..runs)
        .into_par_iter()
        .map(|k| simulate_run(params, stop, replica_seed(master_seed, k)).map(|r| r.is_alive()))
        .try_fold(|| 0u64, |acc, r| r.map(|alive| acc + alive as u64))
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(alive)
}

/// Estimates the censored survival probability from independent replicas.
/// Deterministic in `master_seed`; replica `k` runs on its derived seed.
pub fn estimate_survival(
    params: &ModelParams,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
    level: f64,
) -> Result<SurvivalEstimate> {
    if runs == 0 {
        return Err(Error::NoReplicas);
    }
    stop.validate_for(params.initial_site)?;
    let alive = alive_count(params, stop, runs, master_seed)?;
    SurvivalEstimate::from_counts(params.lambda, alive, runs, stop, level)
}

/// How a sweep draws its randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Fresh replicas at each grid point.
    Independent,
    /// One proposal stream per replica drives the whole grid through the
    /// thinning coupling; the per-replica alive indicators are then exactly
    /// monotone in the multiplier, and every grid entry is classified when
    /// the largest-multiplier process stops.
    SharedRandomness,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|l| *l <= 0.0 || !l.is_finite())
        || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidGrid);
    }
    Ok(())
}

/// Per-replica alive indicators of a shared-randomness sweep, replica-major.
pub fn shared_sweep_indicators(
    profile: &RateProfile,
    grid: &[f64],
    start: usize,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
) -> Result<Vec<Vec<bool>>> {
    if runs == 0 {
        return Err(Error::NoReplicas);
    }
    validate_grid(grid)?;
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    (0..runs)
        .into_par_iter()
        .map(|k| {
            monotone_coupled_run(profile, grid, start, stop, replica_seed(master_seed, k), 256)
                .map(|out| out.alive)
        })
        .collect()
}

/// Survival estimates over a strictly increasing multiplier grid.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    profile: &RateProfile,
    grid: &[f64],
    start: usize,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
    mode: SweepMode,
    level: f64,
) -> Result<Vec<SurvivalEstimate>> {
    validate_grid(grid)?;
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    stop.validate_for(start)?;
    match mode {
        SweepMode::Independent => grid
            .iter()
            .enumerate()
            .map(|(i, &lambda)| {
                let params = ModelParams::new(lambda, profile.clone(), start)?;
                estimate_survival(
                    &params,
                    stop,
                    runs,
                    replica_seed(master_seed, 0x5eed_0000 + i as u64),
                    level,
                )
            })
            .collect(),
        SweepMode::SharedRandomness => {
            let indicators = shared_sweep_indicators(profile, grid, start, stop, runs, master_seed)?;
            grid.iter()
                .enumerate()
                .map(|(i, &lambda)| {
                    let alive = indicators.iter().filter(|row| row[i]).count() as u64;
                    SurvivalEstimate::from_counts(lambda, alive, runs, stop, level)
                })
                .collect()
        }
    }
}

/// Options for the critical-value bisection.
#[derive(Debug, Clone)]
pub struct CriticalValueOptions {
    pub p_floor: f64,
    pub ci_level: f64,
    /// Replica budget per probe before the widening steps.
    pub runs_per_probe: u64,
    /// Target bracket width.
    pub tol: f64,
    /// Upper end of the exponential search for a surviving multiplier.
    pub lambda_cap: f64,
    /// Lower end of the exponential search for a dying multiplier.
    pub lambda_floor: f64,
}

impl Default for CriticalValueOptions {
    fn default() -> Self {
        CriticalValueOptions {
            p_floor: DEFAULT_P_FLOOR,
            ci_level: DEFAULT_CI_LEVEL,
            runs_per_probe: 3200,
            tol: 0.2,
            lambda_cap: 64.0,
            lambda_floor: 1.0 / 64.0,
        }
    }
}

/// Why a critical-value bracket may be left unresolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStatus {
    Resolved,
    /// No probe survived up to the multiplier cap.
    NoSurvivalUpToCap,
    /// Every probe survived down to the multiplier floor.
    NoExtinctionDownToFloor,
}

/// Bracketing interval for the critical multiplier.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaCEstimate {
    pub lo: f64,
    pub hi: f64,
    pub status: BracketStatus,
    pub probes: u32,
    /// Probes that stayed undecided after the widening steps and were
    /// settled by the point estimate against the floor.
    pub soft_decisions: u32,
}

impl LambdaCEstimate {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_resolved(&self) -> bool {
        self.status == BracketStatus::Resolved
    }

    /// A configured bracket, for verdicts built from a known interval.
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        LambdaCEstimate {
            lo,
            hi,
            status: BracketStatus::Resolved,
            probes: 0,
            soft_decisions: 0,
        }
    }
}

struct Prober<'a> {
    profile: &'a RateProfile,
    start: usize,
    stop: StopRule,
    opts: &'a CriticalValueOptions,
    master_seed: u64,
    probes: u32,
    soft_decisions: u32,
}

impl Prober<'_> {
    /// Decides whether the process survives at this multiplier: Wilson lower
    /// bound above the floor means survive, upper bound below means die.
    /// Undecided probes widen the replica count in batches, then double the
    /// horizon, and finally fall back to the point estimate.
    fn survives(&mut self, lambda: f64) -> Result<bool> {
        let probe_index = self.probes;
        self.probes += 1;
        let probe_seed = replica_seed(self.master_seed, 0x9_0000_0000 + probe_index as u64);
        let params = ModelParams::new(lambda, self.profile.clone(), self.start)?;

        let full = self.opts.runs_per_probe.max(4);
        let batch = (full / 4).max(1);
        let mut done = 0u64;
        let mut alive = 0u64;
        for target in [batch, 2 * batch, full] {
            while done < target {
                let r = simulate_run(&params, &self.stop, replica_seed(probe_seed, done))?;
                alive += r.is_alive() as u64;
                done += 1;
            }
            let (lo, hi) = wilson_interval(alive, done, self.opts.ci_level)?;
            if lo > self.opts.p_floor {
                return Ok(true);
            }
            if hi < self.opts.p_floor {
                return Ok(false);
            }
        }

        // Undecided: double the horizon once and re-run the full budget.
        let doubled = StopRule {
            horizon: self.stop.horizon * 2.0,
            right_cutoff: self.stop.right_cutoff.map(|c| c * 2),
        };
        let double_seed = replica_seed(probe_seed, u64::MAX);
        let mut alive2 = 0u64;
        for k in 0..full {
            let r = simulate_run(&params, &doubled, replica_seed(double_seed, k))?;
            alive2 += r.is_alive() as u64;
        }
        let (lo, hi) = wilson_interval(alive2, full, self.opts.ci_level)?;
        if lo > self.opts.p_floor {
            return Ok(true);
        }
        if hi < self.opts.p_floor {
            return Ok(false);
        }

        self.soft_decisions += 1;
        Ok(alive2 as f64 / full as f64 >= self.opts.p_floor)
    }
}

/// Brackets the critical multiplier of the profile by bisection on the
/// censored survival decision.
///
/// Exponential search first finds a dying and a surviving multiplier
/// between `lambda_floor` and `lambda_cap`; bisection then shrinks the
/// bracket to `tol`. When no surviving (or no dying) probe exists within
/// the search range, the partial bracket is returned flagged.
pub fn estimate_lambda_c(
    profile: &RateProfile,
    start: usize,
    stop: &StopRule,
    opts: &CriticalValueOptions,
    master_seed: u64,
) -> Result<LambdaCEstimate> {
    if opts.tol <= 0.0 || !opts.tol.is_finite() {
        return Err(Error::InvalidTolerance(opts.tol));
    }
    stop.validate_for(start)?;
    let mut prober = Prober {
        profile,
        start,
        stop: *stop,
        opts,
        master_seed,
        probes: 0,
        soft_decisions: 0,
    };

    // Upward exponential search for a survivor.
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    let mut lambda = 1.0;
    while lambda <= opts.lambda_cap {
        if prober.survives(lambda)? {
            hi = Some(lambda);
            break;
        }
        lo = Some(lambda);
        lambda *= 2.0;
    }
    let Some(mut hi) = hi else {
        return Ok(LambdaCEstimate {
            lo: lo.unwrap_or(opts.lambda_floor),
            hi: opts.lambda_cap,
            status: BracketStatus::NoSurvivalUpToCap,
            probes: prober.probes,
            soft_decisions: prober.soft_decisions,
        });
    };

    // Downward search when even the first probe survived.
    let mut lo = match lo {
        Some(l) => l,
        None => {
            let mut lambda = 0.5;
            let mut found = None;
            while lambda >= opts.lambda_floor {
                if prober.survives(lambda)? {
                    hi = lambda;
                } else {
                    found = Some(lambda);
                    break;
                }
                lambda /= 2.0;
            }
            match found {
                Some(l) => l,
                None => {
                    return Ok(LambdaCEstimate {
                        lo: opts.lambda_floor,
                        hi,
                        status: BracketStatus::NoExtinctionDownToFloor,
                        probes: prober.probes,
                        soft_decisions: prober.soft_decisions,
                    })
                }
            }
        }
    };

    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if prober.survives(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    Ok(LambdaCEstimate {
        lo,
        hi,
        status: BracketStatus::Resolved,
        probes: prober.probes,
        soft_decisions: prober.soft_decisions,
    })
}

/// Where a multiplier sits relative to the phase-transition window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPosition {
    /// Below the window: extinction is certain.
    BelowWindow,
    /// Inside the window the classification is open; only existence and
    /// monotonicity are known.
    InsideWindow,
    /// Above the window: survival is certain.
    AboveWindow,
}

/// Asymptotic regime of a profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Regime {
    /// Vanishing tail ratio: extinction at every multiplier.
    DiesOutAlways,
    /// Finite positive tail ratio: a critical multiplier exists inside
    /// `[window_lo, window_hi]`.
    PhaseTransition { window_lo: f64, window_hi: f64 },
    /// Diverging tail ratio: survival at every multiplier.
    SurvivesAlways,
    /// The tail ratio is inconclusive; no classification is claimed.
    Unclassifiable,
}

/// Classification of one `(profile, lambda)` pair.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub regime: Regime,
    /// Tail-ratio limit; `None` when inconclusive.
    pub ratio_limit: Option<RatioLimit>,
    /// Scaled limit below one: the extinction bound applies (cross-checked
    /// against the divergence of the rate-ratio series).
    pub extinction_bound_applies: bool,
    /// Scaled limit above the one-sided critical estimate: the survival
    /// bound applies.
    pub survival_bound_applies: bool,
    pub window_position: Option<WindowPosition>,
}

/// Classifies the regime of a profile at a given multiplier, using a
/// bracket for the one-sided critical value.
pub fn classify_regime(
    profile: &RateProfile,
    lambda: f64,
    lambda_c: &LambdaCEstimate,
) -> Result<Verdict> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    let ratio_limit = rate_ratio_limit(profile, CLASSIFY_RATIO_HORIZON, CLASSIFY_RATIO_TOL)?;
    let Some(limit) = ratio_limit else {
        return Ok(Verdict {
            regime: Regime::Unclassifiable,
            ratio_limit: None,
            extinction_bound_applies: false,
            survival_bound_applies: false,
            window_position: None,
        });
    };

    let scaled = limit.scaled_by(lambda);
    let extinction_bound_applies = scaled < 1.0;
    let survival_bound_applies = scaled > lambda_c.hi;

    if extinction_bound_applies {
        let chain = FrontChain::new(profile.clone(), lambda)?;
        let report = series_test(&chain, CLASSIFY_SERIES_DEPTH)?;
        if report.verdict != SeriesVerdict::Diverges {
            return Err(Error::SeriesCrossCheck);
        }
    }

    let (regime, window_position) = match limit {
        RatioLimit::Finite(0.0) => (Regime::DiesOutAlways, None),
        RatioLimit::Infinite => (Regime::SurvivesAlways, None),
        RatioLimit::Finite(v) => {
            let window_lo = 1.0 / v;
            let window_hi = lambda_c.hi / v;
            let position = if lambda < window_lo {
                WindowPosition::BelowWindow
            } else if lambda > window_hi {
                WindowPosition::AboveWindow
            } else {
                WindowPosition::InsideWindow
            };
            (
                Regime::PhaseTransition {
                    window_lo,
                    window_hi,
                },
                Some(position),
            )
        }
    };

    Ok(Verdict {
        regime,
        ratio_limit: Some(limit),
        extinction_bound_applies,
        survival_bound_applies,
        window_position,
    })
}

/// Censoring-bias guard: estimates at the horizon and at twice the horizon
/// should agree within twice the wider interval.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonCheck {
    pub base: SurvivalEstimate,
    pub doubled: SurvivalEstimate,
    pub consistent: bool,
}

pub fn horizon_doubling_check(
    params: &ModelParams,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
    level: f64,
) -> Result<HorizonCheck> {
    let base = estimate_survival(params, stop, runs, master_seed, level)?;
    let doubled_rule = StopRule {
        horizon: stop.horizon * 2.0,
        right_cutoff: stop.right_cutoff.map(|c| c * 2),
    };
    let doubled = estimate_survival(
        params,
        &doubled_rule,
        runs,
        replica_seed(master_seed, u64::MAX / 2),
        level,
    )?;
    let width = base.ci_width().max(doubled.ci_width());
    let consistent = (base.p_hat - doubled.p_hat).abs() < 2.0 * width;
    Ok(HorizonCheck {
        base,
        doubled,
        consistent,
    })
}
