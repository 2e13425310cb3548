//! Monte-Carlo operating characteristics.
//!
//! Each trial draws its stage-I cohort from stream `(seed, trial, basket, 1)`
//! and its stage-II increment from `(seed, trial, basket, 2)`, whether or not
//! the basket survives, so outcomes are fixed by the seed alone. Results are
//! accumulated as integer counts and do not depend on the worker count.

use std::ops::Add;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Boundary, Design};
use crate::error::{ensure, Error, Result};
use crate::numerics::RngStream;
use crate::posterior::BasketData;

/// Default number of simulated trials per scenario.
pub const DEFAULT_N_SIMS: u64 = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub label: String,
    pub true_rates: Vec<f64>,
    pub promising: Vec<bool>,
}

impl Scenario {
    pub fn new(label: impl Into<String>, true_rates: Vec<f64>, promising: Vec<bool>) -> Result<Self> {
        let s = Self { label: label.into(), true_rates, promising };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.true_rates.len() == self.promising.len(),
            Shape,
            "scenario '{}': {} rates but {} promising flags",
            self.label,
            self.true_rates.len(),
            self.promising.len()
        );
        ensure!(
            self.true_rates.iter().all(|p| (0.0..=1.0).contains(p)),
            Domain,
            "scenario '{}': response rates must lie in [0, 1]",
            self.label
        );
        Ok(())
    }

    pub fn num_promising(&self) -> usize {
        self.promising.iter().filter(|&&p| p).count()
    }
}

/// `0 success` through `B success`; promising baskets fill from the last basket backward.
pub fn scenario_suite(theta0: &[f64], theta1: &[f64]) -> Vec<Scenario> {
    let b = theta0.len();
    (0..=b)
        .map(|k| {
            let promising: Vec<bool> = (0..b).map(|i| i >= b - k).collect();
            let rates = (0..b).map(|i| if promising[i] { theta1[i] } else { theta0[i] }).collect();
            Scenario { label: format!("{k} success"), true_rates: rates, promising }
        })
        .collect()
}

pub fn global_null(theta0: &[f64]) -> Scenario {
    Scenario { label: "global null".into(), true_rates: theta0.to_vec(), promising: vec![false; theta0.len()] }
}

pub fn global_alternative(theta1: &[f64]) -> Scenario {
    Scenario { label: "global alternative".into(), true_rates: theta1.to_vec(), promising: vec![true; theta1.len()] }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub label: String,
    /// Power for promising baskets, type-I error for the others.
    pub per_basket_reject_rate: Vec<f64>,
    /// Absent when the scenario has no null basket.
    pub fwer: Option<f64>,
    /// Absent when the scenario has no promising basket.
    pub trialwise_power: Option<f64>,
    pub expected_n: Vec<f64>,
    /// Absent for exact (non-simulated) characteristics.
    pub n_sims: Option<u64>,
    pub seed: Option<u64>,
}

/// Integer tallies over simulated trials.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tally {
    pub trials: u64,
    pub rejections: Vec<u64>,
    pub continued: Vec<u64>,
    pub family_errors: u64,
}

impl Tally {
    fn zero(b: usize) -> Self {
        Self { trials: 0, rejections: vec![0; b], continued: vec![0; b], family_errors: 0 }
    }
}

impl Add for Tally {
    type Output = Tally;
    fn add(mut self, rhs: Tally) -> Tally {
        if self.rejections.is_empty() {
            return rhs;
        }
        if rhs.rejections.is_empty() {
            return self;
        }
        self.trials += rhs.trials;
        self.family_errors += rhs.family_errors;
        for (a, b) in self.rejections.iter_mut().zip(rhs.rejections) {
            *a += b;
        }
        for (a, b) in self.continued.iter_mut().zip(rhs.continued) {
            *a += b;
        }
        self
    }
}

/// Simulated responses of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialDraw {
    pub stage1: Vec<u32>,
    /// Stage-II increments; empty for single-stage designs.
    pub stage2: Vec<u32>,
}

pub fn draw_trial(design: &Design, rates: &[f64], seed: u64, trial: u64) -> TrialDraw {
    let sizes = design.interim_sizes();
    let max_n = &design.spec().max_n;
    let stage1 = (0..rates.len()).map(|b| RngStream::new(seed, trial, b, 1).binomial(sizes[b], rates[b])).collect();
    let stage2 = if design.spec().stages == 2 {
        (0..rates.len()).map(|b| RngStream::new(seed, trial, b, 2).binomial(max_n[b] - sizes[b], rates[b])).collect()
    } else {
        vec![]
    };
    TrialDraw { stage1, stage2 }
}

impl TrialDraw {
    pub fn interim_data(&self, design: &Design) -> Result<BasketData> {
        BasketData::new(self.stage1.clone(), design.interim_sizes().to_vec())
    }

    /// Cumulative data at full size for every basket.
    pub fn final_data(&self, design: &Design) -> Result<BasketData> {
        let x = if self.stage2.is_empty() {
            self.stage1.clone()
        } else {
            self.stage1.iter().zip(&self.stage2).map(|(a, b)| a + b).collect()
        };
        BasketData::new(x, design.spec().max_n.clone())
    }
}

/// Per-basket outcome of one simulated trial: `(continued past interim, rejected)`.
pub fn run_trial(design: &Design, draw: &TrialDraw, boundaries: &[Boundary]) -> Result<Vec<(bool, bool)>> {
    let b = design.num_baskets();
    let all: Vec<usize> = (0..b).collect();
    if design.spec().stages == 1 {
        let p = design.exceedance(&draw.final_data(design)?, &all)?;
        return Ok((0..b).map(|i| (true, p[i] > boundaries[i].q2)).collect());
    }
    let p1 = design.exceedance(&draw.interim_data(design)?, &all)?;
    let survivors: Vec<usize> = (0..b).filter(|&i| p1[i] > boundaries[i].q1).collect();
    let mut out: Vec<(bool, bool)> = vec![(false, false); b];
    if survivors.is_empty() {
        return Ok(out);
    }
    let p2 = design.exceedance(&draw.final_data(design)?, &survivors)?;
    for (k, &i) in survivors.iter().enumerate() {
        out[i] = (true, p2[k] > boundaries[i].q2);
    }
    Ok(out)
}

/// Run `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn check_scenario(design: &Design, scenario: &Scenario) -> Result<()> {
    scenario.validate()?;
    ensure!(
        scenario.true_rates.len() == design.num_baskets(),
        Shape,
        "scenario '{}' has {} baskets, design has {}",
        scenario.label,
        scenario.true_rates.len(),
        design.num_baskets()
    );
    Ok(())
}

/// Raw tallies for `n_sims` trials under the design's own boundary.
pub fn simulate_tally(design: &Design, scenario: &Scenario, n_sims: u64, seed: u64) -> Result<Tally> {
    check_scenario(design, scenario)?;
    let b = design.num_baskets();
    let boundaries = design.boundaries();
    (0..n_sims)
        .into_par_iter()
        .map(|t| {
            let draw = draw_trial(design, &scenario.true_rates, seed, t);
            let outcome = run_trial(design, &draw, boundaries)?;
            let mut tally = Tally::zero(b);
            tally.trials = 1;
            let mut family_error = false;
            for (i, &(cont, rej)) in outcome.iter().enumerate() {
                tally.continued[i] += cont as u64;
                tally.rejections[i] += rej as u64;
                family_error |= rej && !scenario.promising[i];
            }
            tally.family_errors = family_error as u64;
            Ok(tally)
        })
        .try_reduce(|| Tally::zero(b), |a, c| Ok(a + c))
}

pub fn summarize(design: &Design, scenario: &Scenario, tally: &Tally, seed: Option<u64>) -> OperatingCharacteristics {
    let n = tally.trials.max(1) as f64;
    let spec = design.spec();
    let sizes = design.interim_sizes();
    let reject: Vec<f64> = tally.rejections.iter().map(|&r| r as f64 / n).collect();
    let expected_n = (0..design.num_baskets())
        .map(|i| {
            let extra = (spec.max_n[i] - sizes[i]) as f64;
            sizes[i] as f64 + extra * tally.continued[i] as f64 / n
        })
        .collect();
    OperatingCharacteristics {
        label: scenario.label.clone(),
        fwer: (scenario.num_promising() < scenario.promising.len()).then(|| tally.family_errors as f64 / n),
        trialwise_power: trialwise_power(&reject, &spec.max_n, &scenario.promising),
        per_basket_reject_rate: reject,
        expected_n,
        n_sims: Some(tally.trials),
        seed,
    }
}

/// Sample-size weighted mean of basket-wise power over promising baskets.
pub fn trialwise_power(reject: &[f64], max_n: &[u32], promising: &[bool]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..reject.len() {
        if promising[i] {
            num += reject[i] * max_n[i] as f64;
            den += max_n[i] as f64;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Operating characteristics of `design` under `scenario`, on the current rayon pool.
pub fn simulate(design: &Design, scenario: &Scenario, n_sims: u64, seed: u64) -> Result<OperatingCharacteristics> {
    ensure!(n_sims >= 1, Domain, "need at least one simulated trial");
    let tally = simulate_tally(design, scenario, n_sims, seed)?;
    Ok(summarize(design, scenario, &tally, Some(seed)))
}

/// [`simulate`] on a dedicated pool of `workers` threads.
pub fn simulate_with_workers(
    design: &Design,
    scenario: &Scenario,
    n_sims: u64,
    seed: u64,
    workers: usize,
) -> Result<OperatingCharacteristics> {
    with_workers(workers, || simulate(design, scenario, n_sims, seed))?
}
