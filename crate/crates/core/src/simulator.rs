//! Exact continuous-time simulation of the inhomogeneous contact process.
//!
//! The engine is the direct Gillespie method over the list of enabled
//! transitions: the holding time in a configuration is exponential with the
//! total enabled rate and the next event is picked proportionally to its
//! rate. Occupied sets stay small at the scales this crate targets, so the
//! event list is rebuilt from the ordered configuration at every step.
//!
//! Identical `(params, stop, seed)` reproduce the identical trajectory.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateProfile};
use crate::rng::{exp_time, seeded_rng};

/// Finite set of occupied sites.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Configuration(BTreeSet<usize>);

impl Configuration {
    pub fn new() -> Self {
        Configuration(BTreeSet::new())
    }

    pub fn single(site: usize) -> Self {
        let mut s = BTreeSet::new();
        s.insert(site);
        Configuration(s)
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.contains(&site)
    }

    /// Inserts a site; at most one occupant per site, so inserting an
    /// occupied site is a logic error in the engine.
    pub fn insert(&mut self, site: usize) -> bool {
        self.0.insert(site)
    }

    pub fn remove(&mut self, site: usize) -> bool {
        self.0.remove(&site)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn min_site(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &Configuration) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl FromIterator<usize> for Configuration {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Configuration(iter.into_iter().collect())
    }
}

/// One transition of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Birth(usize),
    Death(usize),
}

impl Event {
    pub fn site(&self) -> usize {
        match self {
            Event::Birth(s) | Event::Death(s) => *s,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Event::Birth(_) => "birth",
            Event::Death(_) => "death",
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The configuration emptied at this time.
    ExtinctAt(f64),
    /// Still occupied when the horizon was reached.
    AliveAtHorizon,
    /// The rightmost extent reached the configured cutoff.
    EscapedRight,
}

/// Outcome of one simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub outcome: Outcome,
    pub extinction_time: Option<f64>,
    /// Largest site ever occupied.
    pub max_right: usize,
    /// Total transition count.
    pub events: u64,
    /// The RNG seed that produced this trajectory.
    pub seed: u64,
}

impl RunResult {
    /// Survived the censoring scheme: alive at the horizon or escaped right.
    pub fn is_alive(&self) -> bool {
        matches!(self.outcome, Outcome::AliveAtHorizon | Outcome::EscapedRight)
    }
}

/// Censoring rule for a run: a time horizon, and optionally a rightmost
/// extent past which the run is classified as escaped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopRule {
    pub horizon: f64,
    pub right_cutoff: Option<usize>,
}

impl StopRule {
    pub fn new(horizon: f64, right_cutoff: Option<usize>) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidHorizon(horizon));
        }
        Ok(StopRule {
            horizon,
            right_cutoff,
        })
    }

    pub(crate) fn validate_for(&self, initial_site: usize) -> Result<()> {
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return Err(Error::InvalidHorizon(self.horizon));
        }
        if let Some(cutoff) = self.right_cutoff {
            if cutoff <= initial_site {
                return Err(Error::CutoffBelowStart {
                    cutoff,
                    start: initial_site,
                });
            }
        }
        Ok(())
    }
}

/// Receives every event of a run as it fires.
pub trait TraceSink {
    fn record(&mut self, time: f64, event: Event) -> io::Result<()>;
}

/// Discards the trace.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _time: f64, _event: Event) -> io::Result<()> {
        Ok(())
    }
}

/// Collects the trace in memory.
#[derive(Debug, Default)]
pub struct VecSink(pub Vec<(f64, Event)>);

impl TraceSink for VecSink {
    fn record(&mut self, time: f64, event: Event) -> io::Result<()> {
        self.0.push((time, event));
        Ok(())
    }
}

/// Streams the trace as CSV rows `time,event,site`.
pub struct CsvTraceSink<W: Write> {
    writer: W,
}

impl<W: Write> CsvTraceSink<W> {
    pub fn new(mut writer: W) -> io::Result<Self> {
        writeln!(writer, "time,event,site")?;
        Ok(CsvTraceSink { writer })
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write> TraceSink for CsvTraceSink<W> {
    fn record(&mut self, time: f64, event: Event) -> io::Result<()> {
        writeln!(self.writer, "{},{},{}", time, event.label(), event.site())
    }
}

/// Lazily grown per-site rate tables; keeps `powf` out of the event loop.
struct RateCache<'a> {
    profile: &'a RateProfile,
    lambda: f64,
    birth_right: Vec<f64>,
    birth_left: Vec<f64>,
    death: Vec<f64>,
}

impl<'a> RateCache<'a> {
    fn new(profile: &'a RateProfile, lambda: f64) -> Self {
        RateCache {
            profile,
            lambda,
            birth_right: Vec::new(),
            birth_left: Vec::new(),
            death: Vec::new(),
        }
    }

    fn ensure(&mut self, site: usize) {
        while self.birth_right.len() <= site {
            let n = self.birth_right.len();
            let p = self.profile.p_up(n);
            self.birth_right.push(self.lambda * p);
            self.birth_left.push(self.lambda * (1.0 - p));
            self.death.push(self.profile.delta(n));
        }
    }

    fn rates(&mut self, site: usize) -> (f64, f64, f64) {
        self.ensure(site);
        (
            self.birth_right[site],
            self.birth_left[site],
            self.death[site],
        )
    }
}

/// Appends the enabled transitions of `config` to `out`, returning the total
/// rate. One ordered pass; neighbour occupancy comes from the previous and
/// next elements of the set.
fn fill_rates(
    config: &Configuration,
    cache: &mut RateCache<'_>,
    out: &mut Vec<(Event, f64)>,
) -> f64 {
    out.clear();
    let mut total = 0.0;
    let mut iter = config.sites().peekable();
    let mut prev: Option<usize> = None;
    while let Some(n) = iter.next() {
        let right_occupied = iter.peek() == Some(&(n + 1));
        let left_occupied = n > 0 && prev == Some(n - 1);
        let (b_right, b_left, death) = cache.rates(n);

        out.push((Event::Death(n), death));
        total += death;
        if !right_occupied {
            out.push((Event::Birth(n + 1), b_right));
            total += b_right;
        }
        if n >= 1 && !left_occupied && b_left > 0.0 {
            out.push((Event::Birth(n - 1), b_left));
            total += b_left;
        }
        prev = Some(n);
    }
    total
}

/// The enabled transitions of a configuration with their exact rates.
///
/// For each occupied site `n`: a death at rate `delta(n)`; a birth at `n+1`
/// at rate `lambda * p_up(n)` when `n+1` is empty; a birth at `n-1` at rate
/// `lambda * (1 - p_up(n))` when `n >= 1`, `n-1` is empty and `p_up(n) < 1`.
/// Nothing else.
pub fn step_rates(config: &Configuration, params: &ModelParams) -> Result<Vec<(Event, f64)>> {
    if config.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    let mut cache = RateCache::new(&params.profile, params.lambda);
    let mut out = Vec::new();
    fill_rates(config, &mut cache, &mut out);
    Ok(out)
}

fn select_event(rng: &mut ChaCha8Rng, total: f64, events: &[(Event, f64)]) -> Event {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(ev, rate) in events {
        acc += rate;
        if target < acc {
            return ev;
        }
    }
    events[events.len() - 1].0
}

/// Core event loop, resumable from an existing state so that couplings can
/// hand a process over to the plain engine.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<S: TraceSink>(
    params: &ModelParams,
    stop: &StopRule,
    rng: &mut ChaCha8Rng,
    mut config: Configuration,
    mut t: f64,
    mut events: u64,
    mut max_right: usize,
    seed: u64,
    sink: &mut S,
) -> Result<RunResult> {
    let mut cache = RateCache::new(&params.profile, params.lambda);
    let mut enabled: Vec<(Event, f64)> = Vec::new();

    let outcome = loop {
        if config.is_empty() {
            break Outcome::ExtinctAt(t);
        }
        let total = fill_rates(&config, &mut cache, &mut enabled);
        let dt = exp_time(rng, total);
        if t + dt > stop.horizon {
            break Outcome::AliveAtHorizon;
        }
        t += dt;
        let ev = select_event(rng, total, &enabled);
        match ev {
            Event::Birth(site) => {
                let inserted = config.insert(site);
                debug_assert!(inserted, "birth onto an occupied site");
                if site > max_right {
                    max_right = site;
                }
            }
            Event::Death(site) => {
                let removed = config.remove(site);
                debug_assert!(removed, "death at an empty site");
            }
        }
        events += 1;
        sink.record(t, ev)?;
        if let Some(cutoff) = stop.right_cutoff {
            if max_right >= cutoff {
                break Outcome::EscapedRight;
            }
        }
        if config.is_empty() {
            break Outcome::ExtinctAt(t);
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

/// One statistically exact trajectory from a single occupant at
/// `params.initial_site`, censored by `stop`.
pub fn simulate_run(params: &ModelParams, stop: &StopRule, seed: u64) -> Result<RunResult> {
    simulate_trace(params, stop, seed, &mut NullSink)
}

/// As [`simulate_run`], streaming every `(time, event, site)` to `sink`.
/// Sink failures abort the run.
pub fn simulate_trace<S: TraceSink>(
    params: &ModelParams,
    stop: &StopRule,
    seed: u64,
    sink: &mut S,
) -> Result<RunResult> {
    stop.validate_for(params.initial_site)?;
    let mut rng = seeded_rng(seed);
    drive(
        params,
        stop,
        &mut rng,
        Configuration::single(params.initial_site),
        0.0,
        0,
        params.initial_site,
        seed,
        sink,
    )
}

/// Result of one shared-randomness run across an increasing birth-rate grid.
#[derive(Debug, Clone)]
pub struct MonotoneOutcome {
    /// Alive indicator per grid entry, classified when the largest-rate
    /// process stops. Non-decreasing when the coupling invariant holds.
    pub alive: Vec<bool>,
    /// Containment-audit failures; zero when the coupling is sound.
    pub violations: u64,
    pub stop_time: f64,
    pub events: u64,
}

enum Proposal {
    Death(usize),
    AttemptRight(usize),
    AttemptLeft(usize),
}

/// Runs the whole birth-rate grid on one event-proposal stream.
///
/// Proposals are generated at the largest rate from the largest process and
/// thinned per grid entry with a shared uniform mark, so the occupied sets
/// stay nested along the grid and the per-replica alive indicators are
/// exactly monotone. All grid entries are classified at the moment the
/// largest process stops (extinction, escape, or horizon).
///
/// `audit_stride` controls how often the full nesting chain is re-checked;
/// 1 checks after every event.
pub fn monotone_coupled_run(
    profile: &RateProfile,
    lambdas: &[f64],
    start: usize,
    stop: &StopRule,
    seed: u64,
    audit_stride: u64,
) -> Result<MonotoneOutcome> {
    if lambdas.is_empty()
        || lambdas
            .iter()
            .any(|l| *l <= 0.0 || !l.is_finite())
        || lambdas.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidGrid);
    }
    stop.validate_for(start)?;
    let stride = audit_stride.max(1);
    let lambda_max = *lambdas.last().unwrap();

    let mut rng = seeded_rng(seed);
    let mut configs: Vec<Configuration> =
        lambdas.iter().map(|_| Configuration::single(start)).collect();
    let mut cache = RateCache::new(profile, lambda_max);
    let mut proposals: Vec<(Proposal, f64)> = Vec::new();
    let mut t = 0.0;
    let mut events: u64 = 0;
    let mut violations: u64 = 0;
    let mut master_max_right = start;

    let audit = |configs: &[Configuration], violations: &mut u64| {
        for pair in configs.windows(2) {
            if !pair[0].is_subset(&pair[1]) {
                *violations += 1;
            }
        }
    };

    loop {
        let master = configs.last().unwrap();
        if master.is_empty() {
            break;
        }

        proposals.clear();
        let mut total = 0.0;
        for n in master.sites() {
            let (b_right, b_left, death) = cache.rates(n);
            proposals.push((Proposal::Death(n), death));
            total += death;
            // Attempts are generated regardless of target occupancy: a site
            // occupied in the master may be empty in a smaller process.
            proposals.push((Proposal::AttemptRight(n), b_right));
            total += b_right;
            if n >= 1 && b_left > 0.0 {
                proposals.push((Proposal::AttemptLeft(n), b_left));
                total += b_left;
            }
        }

        let dt = exp_time(&mut rng, total);
        if t + dt > stop.horizon {
            t = stop.horizon;
            break;
        }
        t += dt;

        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = proposals.len() - 1;
        for (i, (_, rate)) in proposals.iter().enumerate() {
            acc += rate;
            if target < acc {
                chosen = i;
                break;
            }
        }

        match proposals[chosen].0 {
            Proposal::Death(n) => {
                for cfg in configs.iter_mut() {
                    cfg.remove(n);
                }
            }
            Proposal::AttemptRight(n) => {
                let mark = rng.random::<f64>();
                for (cfg, &lambda) in configs.iter_mut().zip(lambdas) {
                    if mark * lambda_max < lambda && cfg.contains(n) && !cfg.contains(n + 1) {
                        cfg.insert(n + 1);
                    }
                }
                if n + 1 > master_max_right && configs.last().unwrap().contains(n + 1) {
                    master_max_right = n + 1;
                }
            }
            Proposal::AttemptLeft(n) => {
                let mark = rng.random::<f64>();
                for (cfg, &lambda) in configs.iter_mut().zip(lambdas) {
                    if mark * lambda_max < lambda && cfg.contains(n) && !cfg.contains(n - 1) {
                        cfg.insert(n - 1);
                    }
                }
            }
        }
        events += 1;
        if events.is_multiple_of(stride) {
            audit(&configs, &mut violations);
        }
        if let Some(cutoff) = stop.right_cutoff {
            if master_max_right >= cutoff {
                break;
            }
        }
    }

    audit(&configs, &mut violations);
    Ok(MonotoneOutcome {
        alive: configs.iter().map(|c| !c.is_empty()).collect(),
        violations,
        stop_time: t,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, RateProfile};
    use proptest::prelude::*;

    fn params(lambda: f64, profile: RateProfile, start: usize) -> ModelParams {
        ModelParams::new(lambda, profile, start).unwrap()
    }

    #[test]
    fn step_rates_site_zero_is_forced_right() {
        let p = params(2.0, RateProfile::homogeneous(0.5, 1.0).unwrap(), 0);
        let rates = step_rates(&Configuration::single(0), &p).unwrap();
        assert_eq!(
            rates,
            vec![(Event::Death(0), 1.0), (Event::Birth(1), 2.0)]
        );
    }

    #[test]
    fn step_rates_suppresses_births_between_neighbours() {
        let p = params(2.0, RateProfile::homogeneous(0.5, 1.0).unwrap(), 3);
        let config: Configuration = [3usize, 4].into_iter().collect();
        let rates = step_rates(&config, &p).unwrap();
        assert_eq!(
            rates,
            vec![
                (Event::Death(3), 1.0),
                (Event::Birth(2), 1.0),
                (Event::Death(4), 1.0),
                (Event::Birth(5), 1.0),
            ]
        );
    }

    #[test]
    fn step_rates_power_family_example() {
        let p = params(3.0, RateProfile::power(1.0, 0.0, 1.0, 1.0).unwrap(), 1);
        let rates = step_rates(&Configuration::single(1), &p).unwrap();
        assert_eq!(
            rates,
            vec![
                (Event::Death(1), 1.0),
                (Event::Birth(2), 1.5),
                (Event::Birth(0), 1.5),
            ]
        );
    }

    #[test]
    fn step_rates_rejects_empty_configuration() {
        let p = params(1.0, RateProfile::one_sided(), 0);
        assert!(matches!(
            step_rates(&Configuration::new(), &p),
            Err(Error::EmptyConfiguration)
        ));
    }

    #[test]
    fn negligible_birth_rate_gives_one_death_event() {
        let p = params(1e-9, RateProfile::homogeneous(0.5, 1.0).unwrap(), 0);
        let stop = StopRule::new(1e6, None).unwrap();
        for seed in 0..200 {
            let mut sink = VecSink::default();
            let r = simulate_trace(&p, &stop, seed, &mut sink).unwrap();
            assert!(matches!(r.outcome, Outcome::ExtinctAt(_)));
            assert_eq!(r.events, 1);
            assert_eq!(sink.0.len(), 1);
            assert_eq!(sink.0[0].1, Event::Death(0));
        }
    }

    #[test]
    fn same_seed_reproduces_the_trace_bit_for_bit() {
        let p = params(2.0, RateProfile::homogeneous(0.5, 1.0).unwrap(), 2);
        let stop = StopRule::new(30.0, Some(200)).unwrap();
        let mut a = VecSink::default();
        let mut b = VecSink::default();
        let ra = simulate_trace(&p, &stop, 99, &mut a).unwrap();
        let rb = simulate_trace(&p, &stop, 99, &mut b).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.0, b.0);
        let rc = simulate_run(&p, &stop, 100).unwrap();
        assert_ne!(ra, rc);
    }

    #[test]
    fn event_times_strictly_increase() {
        let p = params(4.0, RateProfile::homogeneous(0.5, 1.0).unwrap(), 0);
        let stop = StopRule::new(20.0, Some(500)).unwrap();
        let mut sink = VecSink::default();
        simulate_trace(&p, &stop, 5, &mut sink).unwrap();
        assert!(sink.0.len() > 10);
        for w in sink.0.windows(2) {
            assert!(w[1].0 > w[0].0, "times {} -> {}", w[0].0, w[1].0);
        }
    }

    #[test]
    fn escape_is_reported_when_the_front_hits_the_cutoff() {
        let p = params(50.0, RateProfile::one_sided(), 0);
        let stop = StopRule::new(1e4, Some(40)).unwrap();
        let r = simulate_run(&p, &stop, 1).unwrap();
        assert_eq!(r.outcome, Outcome::EscapedRight);
        assert!(r.max_right >= 40);
        assert!(r.extinction_time.is_none());
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::new(0.0, None).is_err());
        assert!(StopRule::new(f64::INFINITY, None).is_err());
        let p = params(1.0, RateProfile::one_sided(), 10);
        let stop = StopRule::new(5.0, Some(10)).unwrap();
        assert!(matches!(
            simulate_run(&p, &stop, 0),
            Err(Error::CutoffBelowStart { .. })
        ));
    }

    #[test]
    fn csv_sink_writes_header_and_rows() {
        let p = params(1e-9, RateProfile::homogeneous(0.5, 1.0).unwrap(), 0);
        let stop = StopRule::new(1e6, None).unwrap();
        let mut sink = CsvTraceSink::new(Vec::new()).unwrap();
        simulate_trace(&p, &stop, 3, &mut sink).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,event,site"));
        let row = lines.next().unwrap();
        assert!(row.ends_with(",death,0"), "row {row}");
    }

    #[test]
    fn monotone_coupling_keeps_sets_nested_and_indicators_ordered() {
        let profile = RateProfile::homogeneous(0.5, 1.0).unwrap();
        let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
        let stop = StopRule::new(25.0, Some(120)).unwrap();
        for seed in 0..150 {
            let out = monotone_coupled_run(&profile, &grid, 0, &stop, seed, 1).unwrap();
            assert_eq!(out.violations, 0, "seed {seed}");
            for w in out.alive.windows(2) {
                assert!(!w[0] | w[1], "indicators must be non-decreasing");
            }
        }
    }

    #[test]
    fn monotone_coupling_rejects_bad_grids() {
        let profile = RateProfile::one_sided();
        let stop = StopRule::new(1.0, None).unwrap();
        for grid in [vec![], vec![2.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]] {
            assert!(matches!(
                monotone_coupled_run(&profile, &grid, 0, &stop, 0, 1),
                Err(Error::InvalidGrid)
            ));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn runs_are_deterministic_in_the_seed(
            seed in any::<u64>(),
            lambda in 0.1f64..6.0,
            start in 0usize..4,
        ) {
            let p = params(lambda, RateProfile::homogeneous(0.5, 1.0).unwrap(), start);
            let stop = StopRule::new(8.0, Some(100)).unwrap();
            let a = simulate_run(&p, &stop, seed).unwrap();
            let b = simulate_run(&p, &stop, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
