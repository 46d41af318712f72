//! Shared helpers for the integration suites (each suite uses a subset,
//! so some helpers are unused in any single target): a Kolmogorov-Smirnov test
//! against the exponential distribution and per-state jump tallies for the
//! front chain.

#![allow(dead_code)]

use std::collections::BTreeMap;

use icp_core::front_chain::{simulate_front_trace, FrontChain};
use icp_core::model::ModelParams;
use icp_core::rng::replica_seed;
use icp_core::simulator::{simulate_trace, Event, StopRule, TraceSink, VecSink};

/// One-sample KS statistic against Exp(rate).
pub fn ks_statistic_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        let above = (i as f64 + 1.0) / n - cdf;
        let below = cdf - i as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

/// Asymptotic KS critical value at the given level.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = match alpha {
        a if (a - 0.01).abs() < 1e-12 => 1.62762,
        a if (a - 0.05).abs() < 1e-12 => 1.35810,
        _ => panic!("unsupported KS level {alpha}"),
    };
    let sqrt_n = (n as f64).sqrt();
    c / (sqrt_n + 0.12 + 0.11 / sqrt_n)
}

/// Samples the holding time of the initial configuration across seeds.
pub fn holding_time_samples(params: &ModelParams, runs: u64, master_seed: u64) -> Vec<f64> {
    let stop = StopRule::new(1e6, None).unwrap();
    (0..runs)
        .map(|k| {
            let mut sink = VecSink::default();
            simulate_trace(params, &stop, replica_seed(master_seed, k), &mut sink)
                .expect("holding-time run");
            sink.0
                .first()
                .expect("at least one event fires well before the horizon")
                .0
        })
        .collect()
}

/// Sink that tallies up/down jump counts per originating front state.
#[derive(Default)]
pub struct JumpTally {
    /// state -> (up jumps, down jumps)
    pub counts: BTreeMap<usize, (u64, u64)>,
    state: usize,
}

impl JumpTally {
    pub fn start_at(&mut self, state: usize) {
        self.state = state;
    }
}

impl TraceSink for JumpTally {
    fn record(&mut self, _time: f64, event: Event) -> std::io::Result<()> {
        match event {
            Event::Birth(new_state) => {
                let entry = self.counts.entry(self.state).or_default();
                entry.0 += 1;
                self.state = new_state;
            }
            Event::Death(at_state) => {
                let entry = self.counts.entry(at_state).or_default();
                entry.1 += 1;
                // A death at state 0 kills the coupled front outright.
                self.state = at_state.saturating_sub(1);
            }
        }
        Ok(())
    }
}

/// Accumulates per-state jump counts of the front chain over many runs.
pub fn front_jump_tally(
    chain: &FrontChain,
    start: usize,
    stop: &StopRule,
    runs: u64,
    master_seed: u64,
) -> BTreeMap<usize, (u64, u64)> {
    let mut tally = JumpTally::default();
    for k in 0..runs {
        tally.start_at(start);
        simulate_front_trace(chain, start, stop, replica_seed(master_seed, k), &mut tally)
            .expect("front run");
    }
    tally.counts
}
