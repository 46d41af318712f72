//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured values. Tolerances are pinned here, next to the checks
//! that use them. The criteria run one at a time (they share a lock) so the
//! stated runtime budgets refer to a criterion running alone.

mod common;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{front_jump_tally, holding_time_samples, ks_critical, ks_statistic_exponential};
use icp_core::config::ExperimentConfig;
use icp_core::coupling::{couple_many, embedded_chain_check};
use icp_core::experiments::{
    estimate_survival, shared_sweep_indicators, sweep, CriticalValueOptions, SweepMode,
    estimate_lambda_c,
};
use icp_core::front_chain::{
    absorption_frequency, absorption_probability, series_test, FrontChain, SeriesVerdict,
};
use icp_core::model::{ModelParams, RateProfile};
use icp_core::report::{emit_report, render_csv, ReportFormat};
use icp_core::simulator::{StopRule};
use icp_core::stats::wilson_interval;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

struct Criterion {
    name: &'static str,
    started: Instant,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            started: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, pass: bool, detail: String) {
        self.checks.push((detail, pass));
    }

    fn budget(&mut self, limit: Duration) -> Duration {
        let elapsed = self.started.elapsed();
        self.check(
            elapsed < limit,
            format!("runtime {:.1?} < {:.0?}", elapsed, limit),
        );
        elapsed
    }

    /// Prints the one-line verdict and panics on any failed check.
    fn finish(self) {
        let failed: Vec<&(String, bool)> = self.checks.iter().filter(|(_, ok)| !ok).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let details: Vec<String> = self
            .checks
            .iter()
            .map(|(d, ok)| format!("{}{}", if *ok { "" } else { "[FAILED] " }, d))
            .collect();
        println!(
            "[acceptance] {}: {} — {}",
            self.name,
            verdict,
            details.join("; ")
        );
        assert!(
            failed.is_empty(),
            "{} failed checks: {:?}",
            self.name,
            failed.iter().map(|(d, _)| d.clone()).collect::<Vec<_>>()
        );
    }
}

/// Vanishing tail ratio: extinction at every multiplier. The survival
/// estimate must be tiny at both multipliers and the front-chain series
/// must diverge.
#[test]
fn criterion_1_vanishing_ratio_regime() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 1 (vanishing-ratio regime dies out)");
    const P_HAT_MAX: f64 = 0.01;
    const WILSON_HI_MAX: f64 = 0.02;

    let profile = RateProfile::power(1.0, 0.0, 1.0, 1.0).unwrap();
    let stop = StopRule::new(500.0, Some(1000)).unwrap();
    for (lambda, seed) in [(5.0, 111u64), (20.0, 222u64)] {
        let params = ModelParams::new(lambda, profile.clone(), 0).unwrap();
        let est = estimate_survival(&params, &stop, 5000, seed, 0.95).unwrap();
        c.check(
            est.p_hat <= P_HAT_MAX && est.wilson_hi < WILSON_HI_MAX,
            format!(
                "lambda {}: p_hat {:.4} <= {P_HAT_MAX} and wilson_hi {:.4} < {WILSON_HI_MAX}",
                lambda, est.p_hat, est.wilson_hi
            ),
        );
        let chain = FrontChain::new(profile.clone(), lambda).unwrap();
        let series = series_test(&chain, 10_000).unwrap();
        c.check(
            series.verdict == SeriesVerdict::Diverges,
            format!("lambda {}: series {:?}", lambda, series.verdict),
        );
    }
    c.budget(Duration::from_secs(120));
    c.finish();
}

/// Diverging tail ratio: survival at every multiplier, here at a tiny one.
#[test]
fn criterion_2_divergent_ratio_regime() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 2 (divergent-ratio regime survives)");
    const P_HAT_MIN: f64 = 0.05;
    const WILSON_LO_MIN: f64 = 0.01;

    let profile = RateProfile::power(0.0, 1.0, 0.5, 1.0).unwrap();
    let params = ModelParams::new(0.05, profile, 200).unwrap();
    let stop = StopRule::new(500.0, None).unwrap();
    let est = estimate_survival(&params, &stop, 5000, 13, 0.95).unwrap();
    c.check(
        est.p_hat >= P_HAT_MIN,
        format!("p_hat {:.4} >= {P_HAT_MIN}", est.p_hat),
    );
    c.check(
        est.wilson_lo > WILSON_LO_MIN,
        format!("wilson_lo {:.4} > {WILSON_LO_MIN}", est.wilson_lo),
    );
    c.budget(Duration::from_secs(120));
    c.finish();
}

/// Phase-transition window: the one-sided critical bracket, then the
/// homogeneous(0.5, 1) bracket contained in twice the one-sided window.
#[test]
fn criterion_3_phase_transition_window() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 3 (phase-transition window)");
    const WIDTH_MAX: f64 = 0.4;
    const SLACK: f64 = 0.2;

    let stop = StopRule::new(400.0, Some(800)).unwrap();
    let opts = CriticalValueOptions {
        runs_per_probe: 3200,
        tol: WIDTH_MAX,
        ..CriticalValueOptions::default()
    };

    let one_sided = estimate_lambda_c(&RateProfile::one_sided(), 0, &stop, &opts, 5).unwrap();
    c.check(
        one_sided.is_resolved() && one_sided.width() <= WIDTH_MAX,
        format!(
            "one-sided bracket [{:.3}, {:.3}] width {:.3} <= {WIDTH_MAX}",
            one_sided.lo,
            one_sided.hi,
            one_sided.width()
        ),
    );

    let homog = estimate_lambda_c(
        &RateProfile::homogeneous(0.5, 1.0).unwrap(),
        0,
        &stop,
        &opts,
        5,
    )
    .unwrap();
    let window_lo = 2.0 - SLACK;
    let window_hi = 2.0 * one_sided.hi + SLACK;
    c.check(
        homog.is_resolved() && homog.lo >= window_lo && homog.hi <= window_hi,
        format!(
            "homogeneous bracket [{:.3}, {:.3}] inside [{window_lo:.3}, {window_hi:.3}]",
            homog.lo, homog.hi
        ),
    );
    c.budget(Duration::from_secs(900));
    c.finish();
}

/// Sub-threshold extinction: scaled limit 0.75 < 1, so survival is censored
/// to zero and the front chain is absorbed almost surely.
#[test]
fn criterion_4_subthreshold_extinction() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 4 (sub-threshold extinction)");
    const WILSON_HI_MAX: f64 = 0.01;
    const BRACKET_LO_MIN: f64 = 1.0 - 1e-9;

    let params = ModelParams::new(
        1.5,
        RateProfile::homogeneous(0.5, 1.0).unwrap(),
        0,
    )
    .unwrap();
    let stop = StopRule::new(500.0, Some(1000)).unwrap();
    let est = estimate_survival(&params, &stop, 10_000, 17, 0.95).unwrap();
    c.check(
        est.wilson_hi < WILSON_HI_MAX,
        format!(
            "wilson_hi {:.5} < {WILSON_HI_MAX} (alive {}/{})",
            est.wilson_hi, est.alive, est.runs
        ),
    );

    let chain = FrontChain::from_params(&params);
    let bracket = absorption_probability(&chain, 1, 256).unwrap();
    c.check(
        bracket.lower >= BRACKET_LO_MIN && bracket.upper == 1.0,
        format!(
            "absorption bracket [{:.12}, {}]",
            bracket.lower, bracket.upper
        ),
    );
    c.budget(Duration::from_secs(120));
    c.finish();
}

/// Front-chain oracle equivalence: analytic bracket against Monte Carlo for
/// the constant chain b = 2, d = 1 from state 1.
#[test]
fn criterion_5_front_chain_oracle_equivalence() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 5 (front-chain oracle equivalence)");
    const WIDTH_MAX: f64 = 1e-9;
    const MC_RUNS: u64 = 100_000;
    const CI_LEVEL: f64 = 0.997;

    let chain = FrontChain::new(RateProfile::homogeneous(1.0, 1.0).unwrap(), 2.0).unwrap();
    let bracket = absorption_probability(&chain, 1, 64).unwrap();
    c.check(
        bracket.lower <= 0.5 && 0.5 <= bracket.upper && bracket.width() < WIDTH_MAX,
        format!(
            "bracket [{:.12}, {:.12}] contains 0.5, width {:.2e} < {WIDTH_MAX:.0e}",
            bracket.lower,
            bracket.upper,
            bracket.width()
        ),
    );

    let stop = StopRule::new(1000.0, Some(400)).unwrap();
    let absorbed = absorption_frequency(&chain, 1, &stop, MC_RUNS, 7777).unwrap();
    let freq = absorbed as f64 / MC_RUNS as f64;
    let (lo, hi) = wilson_interval(absorbed, MC_RUNS, CI_LEVEL).unwrap();
    c.check(
        lo <= 0.5 && 0.5 <= hi,
        format!("mc frequency {freq:.4}, 99.7% interval [{lo:.4}, {hi:.4}] contains 0.5"),
    );
    c.budget(Duration::from_secs(60));
    c.finish();
}

/// Coupled domination: no invariant violations over a thousand runs, and
/// the dominated process never survives more often than its front.
#[test]
fn criterion_6_coupling_domination() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 6 (coupling domination)");

    let params = ModelParams::new(
        2.0,
        RateProfile::homogeneous(0.5, 1.0).unwrap(),
        5,
    )
    .unwrap();
    let stop = StopRule::new(100.0, None).unwrap();
    let summary = couple_many(&params, &stop, 1000, 23).unwrap();
    c.check(
        summary.violations == 0,
        format!("violations {} over {} runs", summary.violations, summary.runs),
    );
    c.check(
        summary.ordering_breaches == 0 && summary.eta_survival <= summary.xi_survival,
        format!(
            "survival ordering {:.3} <= {:.3}, breaches {}",
            summary.eta_survival, summary.xi_survival, summary.ordering_breaches
        ),
    );
    c.finish();
}

/// Embedded-chain inequalities: exact comparisons, no tolerance. They hold
/// uniformly with slack below the scaled limit and fail past it.
#[test]
fn criterion_7_embedded_chain_inequalities() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 7 (embedded-chain inequalities)");

    let params = ModelParams::new(
        8.0,
        RateProfile::homogeneous(0.5, 1.0).unwrap(),
        0,
    )
    .unwrap();
    let hold = embedded_chain_check(&params, 3.0, 0, 10_000).unwrap();
    c.check(
        hold.failures == 0 && hold.first_uniform == Some(0) && hold.complement_mismatches == 0,
        format!(
            "lambda'=3: {} failures over sites 0..=10000",
            hold.failures
        ),
    );

    let fail = embedded_chain_check(&params, 4.1, 0, 10_000).unwrap();
    c.check(
        fail.first_uniform.is_none() && fail.failures > 0,
        format!(
            "lambda'=4.1: reported failure ({} failing sites, first {:?})",
            fail.failures, fail.first_failure
        ),
    );
    c.finish();
}

/// Simulator exactness: holding-time KS tests for three distinct
/// (profile, lambda, site) triples and per-state front-chain jump
/// frequencies inside binomial confidence intervals.
#[test]
fn criterion_8_simulator_exactness() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 8 (simulator exactness)");
    const KS_LEVEL: f64 = 0.01;
    const KS_SAMPLES: u64 = 10_000;
    const JUMP_CI_LEVEL: f64 = 0.99;
    const JUMP_MIN_VISITS: u64 = 1000;

    // Holding time of a frozen single occupant at site n is exponential
    // with rate delta(n) + lambda*p_up(n) + lambda*(1-p_up(n))*[n >= 1].
    let triples = [
        (RateProfile::homogeneous(0.5, 1.0).unwrap(), 2.0, 3usize, 901u64),
        (RateProfile::power(1.0, 0.0, 1.0, 1.0).unwrap(), 3.0, 1, 902),
        (RateProfile::one_sided(), 0.7, 0, 903),
    ];
    for (profile, lambda, site, seed) in triples {
        let p_up = profile.p_up(site);
        let rate = profile.delta(site)
            + lambda * p_up
            + lambda * (1.0 - p_up) * if site >= 1 { 1.0 } else { 0.0 };
        let params = ModelParams::new(lambda, profile, site).unwrap();
        let mut samples = holding_time_samples(&params, KS_SAMPLES, seed);
        let d = ks_statistic_exponential(&mut samples, rate);
        let crit = ks_critical(samples.len(), KS_LEVEL);
        c.check(
            d < crit,
            format!(
                "KS(site {site}, rate {rate:.2}): {d:.5} < {crit:.5}"
            ),
        );
    }

    // Per-state up-jump frequencies of the front chain against
    // b_n / (b_n + d_n), for every state with enough visits.
    let chains = [
        (
            FrontChain::new(RateProfile::homogeneous(0.5, 1.0).unwrap(), 2.0).unwrap(),
            10usize,
            StopRule::new(30.0, None).unwrap(),
            3000u64,
            904u64,
        ),
        (
            FrontChain::new(RateProfile::power(1.0, 1.0, 2.0, 1.0).unwrap(), 3.0).unwrap(),
            5,
            StopRule::new(25.0, Some(60)).unwrap(),
            3000,
            905,
        ),
    ];
    for (chain, start, stop, runs, seed) in chains {
        let tally = front_jump_tally(&chain, start, &stop, runs, seed);
        let mut states_checked = 0usize;
        let mut worst: Option<String> = None;
        let mut all_ok = true;
        for (&state, &(up, down)) in &tally {
            let total = up + down;
            if total < JUMP_MIN_VISITS {
                continue;
            }
            states_checked += 1;
            let expected =
                chain.birth_rate(state) / (chain.birth_rate(state) + chain.death_rate(state));
            let (lo, hi) = wilson_interval(up, total, JUMP_CI_LEVEL).unwrap();
            if !(lo <= expected && expected <= hi) {
                all_ok = false;
                worst = Some(format!(
                    "state {state}: expected {expected:.4} outside [{lo:.4}, {hi:.4}] ({total} visits)"
                ));
            }
        }
        c.check(
            all_ok && states_checked >= 10,
            format!(
                "jump frequencies: {states_checked} states within 99% CIs{}",
                worst.map_or(String::new(), |w| format!(" ({w})"))
            ),
        );
    }
    c.finish();
}

/// Determinism and monotonicity: identical (config, seed) give
/// byte-identical CSV files, and a shared-randomness sweep yields
/// per-replica alive indicators non-decreasing in the multiplier.
#[test]
fn criterion_9_determinism_and_monotonicity() {
    let _guard = serial();
    let mut c = Criterion::new("criterion 9 (determinism and monotone sweep)");

    let config_text = r#"{
        "profile": {"kind": "homogeneous", "params": [0.5, 1.0]},
        "lambda_grid": [0.5, 1, 2, 4, 8],
        "start": 0,
        "tmax": 100,
        "rmax": 200,
        "runs": 250,
        "seed": 33
    }"#;
    let mut csv_files: Vec<Vec<u8>> = Vec::new();
    let mut csv_strings: Vec<String> = Vec::new();
    for attempt in 0..2 {
        let config = ExperimentConfig::parse_str(config_text).unwrap();
        let profile = config.profile.build().unwrap();
        let stop = config.stop_rule().unwrap();
        let estimates = sweep(
            &profile,
            config.lambda_grid.as_deref().unwrap(),
            config.start,
            &stop,
            config.runs(),
            config.seed.unwrap(),
            SweepMode::Independent,
            config.ci_level(),
        )
        .unwrap();
        csv_strings.push(render_csv(&estimates));
        let dir = std::env::temp_dir().join(format!("icp-acceptance-{attempt}"));
        let paths = emit_report(&estimates, &[ReportFormat::Csv], &dir).unwrap();
        csv_files.push(std::fs::read(&paths[0]).unwrap());
    }
    c.check(
        csv_strings[0] == csv_strings[1] && csv_files[0] == csv_files[1],
        "identical (config, seed) produced byte-identical CSV".to_string(),
    );

    let profile = RateProfile::homogeneous(0.5, 1.0).unwrap();
    let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    let stop = StopRule::new(100.0, Some(200)).unwrap();
    let runs = 300u64;
    let indicators = shared_sweep_indicators(&profile, &grid, 0, &stop, runs, 29).unwrap();
    let exceptions = indicators
        .iter()
        .filter(|row| row.windows(2).any(|w| w[0] && !w[1]))
        .count();
    c.check(
        exceptions == 0 && indicators.len() == runs as usize,
        format!(
            "shared sweep: {} replicas, {} monotonicity exceptions",
            indicators.len(),
            exceptions
        ),
    );
    c.finish();
}
