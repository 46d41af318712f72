//! Executable couplings between the contact process and its dominating
//! front process, plus the embedded-jump-chain rate comparisons against the
//! one-sided process.
//!
//! The coupled run drives both processes from one event-proposal stream:
//! clocks are keyed by (site, event type), the front consumes the death
//! proposal at its position and the birth proposal one step to its right,
//! and the contact process consumes the proposals at its own enabled sites,
//! sharing the realizations where the keys coincide. The front is
//! interpreted as "everything at or left of the front is occupied", so
//! domination means the rightmost occupant never exceeds the front. The
//! invariant is asserted after every event and failures are counted.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateProfile, RatioLimit};
use crate::rng::{exp_time, replica_seed, seeded_rng};
use crate::simulator::{
    drive, step_rates, Configuration, Event, NullSink, Outcome, RunResult, StopRule, TraceSink,
};

use rand::Rng;

/// Result of one coupled trajectory.
#[derive(Debug, Clone)]
pub struct CoupledRunReport {
    pub eta: RunResult,
    pub xi: RunResult,
    /// Domination-invariant failures observed along the run. Zero when the
    /// coupling is sound.
    pub violations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrontState {
    Alive(usize),
    Dead,
}

#[derive(Debug, Clone, Copy)]
enum Clock {
    Death(usize),
    /// Shared birth proposal at front + 1; also grows the contact process
    /// when its rightmost occupant sits on the front.
    FrontBirth,
    EtaBirth(usize),
}

/// Runs the coupled pair on shared randomness, streaming both traces.
///
/// The front starts at the initial site with everything to its left filled;
/// the contact process starts with the single occupant. After the front is
/// decided the contact process, if still undecided, continues alone on the
/// same stream.
pub fn coupled_run_traced<SE: TraceSink, SX: TraceSink>(
    params: &ModelParams,
    stop: &StopRule,
    seed: u64,
    eta_sink: &mut SE,
    xi_sink: &mut SX,
) -> Result<CoupledRunReport> {
    stop.validate_for(params.initial_site)?;
    let profile = &params.profile;
    let lambda = params.lambda;
    let start = params.initial_site;

    let mut rng = seeded_rng(seed);
    let mut eta = Configuration::single(start);
    let mut front = FrontState::Alive(start);
    let mut t = 0.0;
    let mut violations: u64 = 0;
    let mut eta_events: u64 = 0;
    let mut xi_events: u64 = 0;
    let mut eta_max = start;
    let mut xi_max = start;
    let mut eta_result: Option<RunResult> = None;
    let mut clocks: Vec<(Clock, f64)> = Vec::new();

    let record_eta = |outcome: Outcome, events: u64, max_right: usize| RunResult {
        outcome,
        extinction_time: match outcome {
            Outcome::ExtinctAt(s) => Some(s),
            _ => None,
        },
        max_right,
        events,
        seed,
    };

    let xi_outcome = loop {
        let r = match front {
            FrontState::Alive(r) => r,
            FrontState::Dead => unreachable!("loop exits when the front dies"),
        };

        clocks.clear();
        let mut total = 0.0;
        for n in eta.sites() {
            let d = profile.delta(n);
            clocks.push((Clock::Death(n), d));
            total += d;
        }
        if !eta.contains(r) {
            let d = profile.delta(r);
            clocks.push((Clock::Death(r), d));
            total += d;
        }
        let front_birth = lambda * profile.p_up(r);
        clocks.push((Clock::FrontBirth, front_birth));
        total += front_birth;
        {
            let mut iter = eta.sites().peekable();
            let mut prev: Option<usize> = None;
            while let Some(n) = iter.next() {
                let right_occupied = iter.peek() == Some(&(n + 1));
                let left_occupied = n > 0 && prev == Some(n - 1);
                let p = profile.p_up(n);
                if n != r && !right_occupied {
                    clocks.push((Clock::EtaBirth(n + 1), lambda * p));
                    total += lambda * p;
                }
                let q = 1.0 - p;
                if n >= 1 && !left_occupied && q > 0.0 {
                    clocks.push((Clock::EtaBirth(n - 1), lambda * q));
                    total += lambda * q;
                }
                prev = Some(n);
            }
        }

        let dt = exp_time(&mut rng, total);
        if t + dt > stop.horizon {
            break Outcome::AliveAtHorizon;
        }
        t += dt;

        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = clocks.len() - 1;
        for (i, (_, rate)) in clocks.iter().enumerate() {
            acc += rate;
            if target < acc {
                chosen = i;
                break;
            }
        }

        match clocks[chosen].0 {
            Clock::Death(n) => {
                if eta.remove(n) {
                    eta_events += 1;
                    eta_sink.record(t, Event::Death(n))?;
                }
                if n == r {
                    xi_events += 1;
                    xi_sink.record(t, Event::Death(r))?;
                    if r == 0 {
                        front = FrontState::Dead;
                    } else {
                        front = FrontState::Alive(r - 1);
                    }
                }
            }
            Clock::FrontBirth => {
                let eta_on_front = eta.contains(r);
                front = FrontState::Alive(r + 1);
                xi_events += 1;
                xi_sink.record(t, Event::Birth(r + 1))?;
                if r + 1 > xi_max {
                    xi_max = r + 1;
                }
                if eta_on_front {
                    let inserted = eta.insert(r + 1);
                    debug_assert!(inserted);
                    eta_events += 1;
                    eta_sink.record(t, Event::Birth(r + 1))?;
                    if r + 1 > eta_max {
                        eta_max = r + 1;
                    }
                }
            }
            Clock::EtaBirth(site) => {
                let inserted = eta.insert(site);
                debug_assert!(inserted);
                eta_events += 1;
                eta_sink.record(t, Event::Birth(site))?;
                if site > eta_max {
                    eta_max = site;
                }
            }
        }

        // Domination invariant, checked after every event.
        match front {
            FrontState::Alive(r) => {
                if eta.max_site().is_some_and(|m| m > r) {
                    violations += 1;
                }
            }
            FrontState::Dead => {
                if !eta.is_empty() {
                    violations += 1;
                }
            }
        }

        if eta_result.is_none() {
            if eta.is_empty() {
                eta_result = Some(record_eta(Outcome::ExtinctAt(t), eta_events, eta_max));
            } else if stop.right_cutoff.is_some_and(|c| eta_max >= c) {
                eta_result = Some(record_eta(Outcome::EscapedRight, eta_events, eta_max));
            }
        }

        match front {
            FrontState::Dead => break Outcome::ExtinctAt(t),
            FrontState::Alive(_) => {
                if stop.right_cutoff.is_some_and(|c| xi_max >= c) {
                    break Outcome::EscapedRight;
                }
            }
        }
    };

    let xi = RunResult {
        outcome: xi_outcome,
        extinction_time: match xi_outcome {
            Outcome::ExtinctAt(s) => Some(s),
            _ => None,
        },
        max_right: xi_max,
        events: xi_events,
        seed,
    };

    let eta = match eta_result {
        Some(r) => r,
        None => match xi_outcome {
            // The front died, so the contact process must already be empty.
            Outcome::ExtinctAt(s) => {
                debug_assert!(eta.is_empty());
                record_eta(Outcome::ExtinctAt(s), eta_events, eta_max)
            }
            // Both ran out of horizon together.
            Outcome::AliveAtHorizon => record_eta(Outcome::AliveAtHorizon, eta_events, eta_max),
            // The front escaped early; finish the contact process alone.
            Outcome::EscapedRight => drive(
                params, stop, &mut rng, eta, t, eta_events, eta_max, seed, eta_sink,
            )?,
        },
    };

    Ok(CoupledRunReport {
        eta,
        xi,
        violations,
    })
}

/// As [`coupled_run_traced`] without trace collection.
pub fn coupled_run(params: &ModelParams, stop: &StopRule, seed: u64) -> Result<CoupledRunReport> {
    coupled_run_traced(params, stop, seed, &mut NullSink, &mut NullSink)
}

/// Aggregate of many independent coupled runs.
#[derive(Debug, Clone, Serialize)]
pub struct CoupleSummary {
    pub runs: u64,
    pub violations: u64,
    pub eta_alive: u64,
    pub xi_alive: u64,
    pub eta_survival: f64,
    pub xi_survival: f64,
    /// Runs where the contact process survived but its dominating front did
    /// not; zero when the coupling is sound.
    pub ordering_breaches: u64,
}

/// Runs `runs` coupled replicas with per-replica derived seeds.
pub fn couple_many(
    params: &ModelParams,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
) -> Result<CoupleSummary> {
    if runs == 0 {
        return Err(Error::NoReplicas);
    }
    stop.validate_for(params.initial_site)?;
    let reports: Vec<(u64, bool, bool)> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let report = coupled_run(params, stop, replica_seed(master_seed, k))?;
            Ok((
                report.violations,
                report.eta.is_alive(),
                report.xi.is_alive(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let violations = reports.iter().map(|r| r.0).sum();
    let eta_alive = reports.iter().filter(|r| r.1).count() as u64;
    let xi_alive = reports.iter().filter(|r| r.2).count() as u64;
    let ordering_breaches = reports.iter().filter(|r| r.1 && !r.2).count() as u64;
    Ok(CoupleSummary {
        runs,
        violations,
        eta_alive,
        xi_alive,
        eta_survival: eta_alive as f64 / runs as f64,
        xi_survival: xi_alive as f64 / runs as f64,
        ordering_breaches,
    })
}

/// Per-site comparison of the embedded jump-chain probabilities against a
/// one-sided process with birth rate `lambda_prime` and death rate 1.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedChainReport {
    pub from: usize,
    pub depth: usize,
    pub lambda_prime: f64,
    /// Smallest site from which both inequalities hold through the end of
    /// the examined range; `None` when the last site fails.
    pub first_uniform: Option<usize>,
    pub failures: u64,
    pub first_failure: Option<usize>,
    /// Sites where the two complementary inequalities disagreed; a
    /// consistency self-check that must stay zero.
    pub complement_mismatches: u64,
}

impl EmbeddedChainReport {
    pub fn holds_everywhere(&self) -> bool {
        self.failures == 0
    }
}

/// Checks, for every `n` in `[from, from + depth]`, that a birth is more
/// likely and a death less likely for the embedded chain of the model than
/// for the embedded chain of the one-sided process at rate `lambda_prime`:
///
/// `lambda p_up(n) / (lambda p_up(n) + delta(n)) > lambda' / (lambda' + 1)`
/// and
/// `delta(n) / (lambda p_up(n) + delta(n)) < 1 / (lambda' + 1)`.
///
/// Comparisons are exact; a report of failures is a valid outcome.
pub fn embedded_chain_check(
    params: &ModelParams,
    lambda_prime: f64,
    from: usize,
    depth: usize,
) -> Result<EmbeddedChainReport> {
    if lambda_prime <= 0.0 || !lambda_prime.is_finite() {
        return Err(Error::InvalidLambda(lambda_prime));
    }
    let birth_threshold = lambda_prime / (lambda_prime + 1.0);
    let death_threshold = 1.0 / (lambda_prime + 1.0);

    let mut failures = 0u64;
    let mut first_failure = None;
    let mut last_failure = None;
    let mut complement_mismatches = 0u64;

    for n in from..=from + depth {
        let birth = params.lambda * params.profile.p_up(n);
        let death = params.profile.delta(n);
        let total = birth + death;
        let birth_ok = birth / total > birth_threshold;
        let death_ok = death / total < death_threshold;
        if birth_ok != death_ok {
            complement_mismatches += 1;
        }
        if !(birth_ok && death_ok) {
            failures += 1;
            if first_failure.is_none() {
                first_failure = Some(n);
            }
            last_failure = Some(n);
        }
    }

    let first_uniform = match last_failure {
        None => Some(from),
        Some(last) if last < from + depth => Some(last + 1),
        Some(_) => None,
    };

    Ok(EmbeddedChainReport {
        from,
        depth,
        lambda_prime,
        first_uniform,
        failures,
        first_failure,
        complement_mismatches,
    })
}

/// Smallest site `N <= search_cap` from which the rate ratio
/// `lambda p_up(n) / delta(n)` exceeds `lambda_prime` for every `n` in
/// `[N, search_cap]`; `None` when no such site exists.
///
/// When the profile declares a tail-ratio limit and the scaled limit does
/// not exceed `lambda_prime`, the inequality eventually fails and the answer
/// is `None` without scanning. For the built-in families the ratio is
/// eventually monotone, so a clean scan up to the cap certifies the tail.
pub fn find_domination_start(
    profile: &RateProfile,
    lambda: f64,
    lambda_prime: f64,
    search_cap: usize,
) -> Result<Option<usize>> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    if lambda_prime <= 0.0 || !lambda_prime.is_finite() {
        return Err(Error::InvalidLambda(lambda_prime));
    }
    if let Some(limit) = profile.declared_limit() {
        let scaled = limit.scaled_by(lambda);
        let eventually_holds = match limit {
            RatioLimit::Infinite => true,
            RatioLimit::Finite(_) => scaled > lambda_prime,
        };
        if !eventually_holds {
            return Ok(None);
        }
    }

    let mut last_bad = None;
    for n in 0..=search_cap {
        let ratio = lambda * profile.p_up(n) / profile.delta(n);
        if ratio <= lambda_prime {
            last_bad = Some(n);
        }
    }
    Ok(match last_bad {
        None => Some(0),
        Some(last) if last < search_cap => Some(last + 1),
        Some(_) => None,
    })
}

/// Replays a trace through the rate function and rejects it unless every
/// event was enabled with positive rate when it fired, times strictly
/// increase, births land next to an occupant on an empty site and deaths
/// remove an occupant.
pub fn validate_trace(params: &ModelParams, trace: &[(f64, Event)]) -> Result<()> {
    let mut config = Configuration::single(params.initial_site);
    let mut last_time = 0.0;
    for (index, &(time, event)) in trace.iter().enumerate() {
        let fail = |reason: String| Error::ReplayFailed { index, reason };
        if time <= last_time {
            return Err(fail(format!("time {time} does not increase past {last_time}")));
        }
        last_time = time;
        let enabled = step_rates(&config, params)
            .map_err(|e| fail(format!("rates unavailable: {e}")))?;
        let rate = enabled
            .iter()
            .find(|(ev, _)| *ev == event)
            .map(|(_, rate)| *rate);
        match rate {
            Some(rate) if rate > 0.0 => {}
            Some(rate) => return Err(fail(format!("event {event:?} had rate {rate}"))),
            None => return Err(fail(format!("event {event:?} was not enabled"))),
        }
        match event {
            Event::Birth(site) => {
                if !config.insert(site) {
                    return Err(fail(format!("birth onto occupied site {site}")));
                }
            }
            Event::Death(site) => {
                if !config.remove(site) {
                    return Err(fail(format!("death at empty site {site}")));
                }
            }
        }
    }
    Ok(())
}
