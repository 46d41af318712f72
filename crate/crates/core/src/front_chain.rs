//! The rightmost-site birth and death chain that dominates the contact
//! process, with exact absorption analytics.
//!
//! From a model with birth multiplier `lambda`, state `n` of the chain moves
//! up at rate `b_n = lambda * p_up(n)` and down at rate `d_n = delta(n)`.
//! Analysis and simulation both use the absorbing-at-zero convention: the
//! chain is absorbed when it reaches state 0, and the certain-absorption
//! criterion is the divergence of the series of products `d_1..d_i / b_1..b_i`.
//! All products and sums are evaluated in log space; the raw products
//! underflow within a few dozen terms.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateProfile};
use crate::rng::{exp_time, replica_seed, seeded_rng};
use crate::simulator::{Event, NullSink, Outcome, RunResult, StopRule, TraceSink};

use rand::Rng;

/// Ratio-test margin around 1.
const RATIO_EPS: f64 = 1e-6;
/// Partial sums past this value with non-decreasing terms certify divergence.
const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// How many ratios past the truncation are probed for the tail bound.
const TAIL_PROBE: usize = 64;
/// Absolute widening of the bracket against floating-point rounding.
const BRACKET_PAD: f64 = 1e-13;

/// Birth and death rates of the front chain.
#[derive(Debug, Clone)]
pub struct FrontChain {
    profile: RateProfile,
    lambda: f64,
}

impl FrontChain {
    /// Rejects non-positive multipliers: every birth rate must be positive.
    pub fn new(profile: RateProfile, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(FrontChain { profile, lambda })
    }

    pub fn from_params(params: &ModelParams) -> Self {
        FrontChain {
            profile: params.profile.clone(),
            lambda: params.lambda,
        }
    }

    /// Up-jump rate from state `n`.
    pub fn birth_rate(&self, n: usize) -> f64 {
        self.lambda * self.profile.p_up(n)
    }

    /// Down-jump rate from state `n`.
    pub fn death_rate(&self, n: usize) -> f64 {
        self.profile.delta(n)
    }

    /// `d_n / b_n`, the ratio of consecutive series terms.
    fn term_ratio(&self, n: usize) -> f64 {
        self.death_rate(n) / self.birth_rate(n)
    }
}

/// Outcome of the divergence test on the rate-ratio product series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Diverges,
    Converges,
    Inconclusive,
}

/// Series verdict plus the diagnostic tail ratio.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub verdict: SeriesVerdict,
    /// Mean of `d_i / b_i` over the examined tail window.
    pub tail_ratio: f64,
    pub terms: usize,
}

/// Ratio test on the series with terms `prod_{j<=i} d_j / b_j`.
///
/// Diverges when the tail ratios sit above `1 + eps`, or when the terms are
/// non-decreasing on the tail: each remaining term is then at least the last
/// one, so the partial sums cross any divergence threshold at a finite
/// index. Converges when the tail ratios sit below `1 - eps`. Anything else
/// is inconclusive.
pub fn series_test(chain: &FrontChain, max_terms: usize) -> Result<SeriesReport> {
    if max_terms < 2 {
        return Err(Error::TooFewTerms {
            min: 2,
            got: max_terms,
        });
    }

    let mut log_term = 0.0;
    // Max-shifted accumulation of sum(exp(log_term)).
    let mut shift = f64::NEG_INFINITY;
    let mut scaled_sum = 0.0;
    let tail_from = (max_terms / 2).max(1);
    let mut tail = Vec::with_capacity(max_terms - tail_from + 1);

    for i in 1..=max_terms {
        let ratio = chain.term_ratio(i);
        log_term += ratio.ln();
        if log_term <= shift {
            scaled_sum += (log_term - shift).exp();
        } else {
            scaled_sum = scaled_sum * (shift - log_term).exp() + 1.0;
            shift = log_term;
        }
        if i >= tail_from {
            tail.push(ratio);
        }
    }
    let log_partial_sum = shift + scaled_sum.ln();

    let tail_min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let tail_max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail_ratio = tail.iter().sum::<f64>() / tail.len() as f64;

    let verdict = if tail_min > 1.0 + RATIO_EPS {
        SeriesVerdict::Diverges
    } else if tail_max < 1.0 - RATIO_EPS {
        SeriesVerdict::Converges
    } else if log_partial_sum > DIVERGENCE_THRESHOLD.ln() {
        SeriesVerdict::Diverges
    } else if tail_min >= 1.0 {
        // Non-decreasing positive terms: the sum grows by at least the last
        // term forever and crosses the threshold at a finite index.
        SeriesVerdict::Diverges
    } else {
        SeriesVerdict::Inconclusive
    };

    Ok(SeriesReport {
        verdict,
        tail_ratio,
        terms: max_terms,
    })
}

/// Rigorous enclosure of the absorption probability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AbsorptionBracket {
    pub lower: f64,
    pub upper: f64,
    pub truncation_level: usize,
}

impl AbsorptionBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Probability that the chain started at `start` ever reaches state 0,
/// bracketed rigorously from a finite truncation.
///
/// With `gamma_i = prod_{j=1..i} d_j / b_j`, the truncated chain with the
/// top state counted as alive gives the lower bound
/// `sum_{i=start..M-1} gamma_i / sum_{i=0..M-1} gamma_i`; the upper bound
/// adds a certified geometric bound on the tail `sum_{i>=M} gamma_i` to both
/// sums. When no tail certificate exists (the term ratios at the truncation
/// are not bounded below 1) the upper bound is 1, which is the reflecting
/// truncation. The bracket is padded by 1e-13 on each side against rounding.
pub fn absorption_probability(
    chain: &FrontChain,
    start: usize,
    truncation: usize,
) -> Result<AbsorptionBracket> {
    if truncation <= start + 1 {
        return Err(Error::TruncationTooSmall { truncation, start });
    }
    let m = truncation;

    // log gamma_i for i = 0..m-1.
    let mut log_gamma = Vec::with_capacity(m);
    log_gamma.push(0.0);
    for i in 1..m {
        let prev = log_gamma[i - 1];
        log_gamma.push(prev + chain.term_ratio(i).ln());
    }

    let log_all = log_sum_exp(&log_gamma);
    let log_from_start = log_sum_exp(&log_gamma[start.min(m)..]);
    let lower_raw = if start == 0 {
        1.0
    } else {
        (log_from_start - log_all).exp()
    };

    // Tail certificate: ratios past the truncation non-increasing and below 1.
    let probe: Vec<f64> = (m..m + TAIL_PROBE).map(|i| chain.term_ratio(i)).collect();
    let rho_bar = probe.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let non_increasing = probe.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let upper_raw = if non_increasing && rho_bar < 1.0 - 1e-12 {
        let log_tail = log_gamma[m - 1] + (rho_bar / (1.0 - rho_bar)).ln();
        (log_add(log_from_start, log_tail) - log_add(log_all, log_tail)).exp()
    } else {
        1.0
    };

    let lower = (lower_raw - BRACKET_PAD).max(0.0);
    let upper = (upper_raw + BRACKET_PAD).min(1.0);
    Ok(AbsorptionBracket {
        lower: lower.min(upper),
        upper,
        truncation_level: m,
    })
}

/// Exact trajectory of the front chain from `start`, absorbed on reaching
/// state 0, censored by `stop`. Same determinism contract as the full
/// simulator: identical `(chain, start, stop, seed)` give identical runs.
pub fn simulate_front(
    chain: &FrontChain,
    start: usize,
    stop: &StopRule,
    seed: u64,
) -> Result<RunResult> {
    simulate_front_trace(chain, start, stop, seed, &mut NullSink)
}

/// As [`simulate_front`], streaming each jump as a birth (up) or death
/// (down) event at the new state.
pub fn simulate_front_trace<S: TraceSink>(
    chain: &FrontChain,
    start: usize,
    stop: &StopRule,
    seed: u64,
    sink: &mut S,
) -> Result<RunResult> {
    stop.validate_for(start)?;
    if start == 0 {
        return Ok(RunResult {
            outcome: Outcome::ExtinctAt(0.0),
            extinction_time: Some(0.0),
            max_right: 0,
            events: 0,
            seed,
        });
    }

    let mut rng = seeded_rng(seed);
    let mut state = start;
    let mut t = 0.0;
    let mut events: u64 = 0;
    let mut max_right = start;

    let outcome = loop {
        let up = chain.birth_rate(state);
        let down = chain.death_rate(state);
        let total = up + down;
        let dt = exp_time(&mut rng, total);
        if t + dt > stop.horizon {
            break Outcome::AliveAtHorizon;
        }
        t += dt;
        if rng.random::<f64>() * total < up {
            state += 1;
            if state > max_right {
                max_right = state;
            }
            sink.record(t, Event::Birth(state))?;
        } else {
            // The death happens at the current front site.
            sink.record(t, Event::Death(state))?;
            state -= 1;
        }
        events += 1;
        if state == 0 {
            break Outcome::ExtinctAt(t);
        }
        if let Some(cutoff) = stop.right_cutoff {
            if max_right >= cutoff {
                break Outcome::EscapedRight;
            }
        }
    };

    let extinction_time = match outcome {
        Outcome::ExtinctAt(time) => Some(time),
        _ => None,
    };
    Ok(RunResult {
        outcome,
        extinction_time,
        max_right,
        events,
        seed,
    })
}

/// Absorbed count over independent front-chain replicas with derived seeds.
pub fn absorption_frequency(
    chain: &FrontChain,
    start: usize,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
) -> Result<u64> {
    if runs == 0 {
        return Err(Error::NoReplicas);
    }
    let absorbed = (0..runs)
        .into_par_iter()
        .map(|k| {
            simulate_front(chain, start, stop, replica_seed(master_seed, k))
                .map(|r| r.extinction_time.is_some())
        })
        .try_fold(|| 0u64, |acc, r| r.map(|hit| acc + hit as u64))
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(absorbed)
}
