//! Boundary calibration.
//!
//! Picks the grid point `(λ, γ)` with the largest trial-wise power under the
//! global alternative among those whose global-null FWER stays at or below the
//! target. Every grid point sees the same simulated trials. Stage-I
//! probabilities do not depend on the boundary, and stage-II probabilities only
//! depend on which baskets survive, so each trial is analyzed once per distinct
//! survivor set and the grid sweep itself is pure counting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignSpec};
use crate::error::{ensure, Error, Result};
use crate::simulation::{draw_trial, global_alternative, global_null, Scenario, DEFAULT_N_SIMS};

pub const DEFAULT_FWER_TARGET: f64 = 0.10;

/// λ ∈ {0.900, 0.901, …, 0.999}.
pub fn default_lambda_grid() -> Vec<f64> {
    (900..=999).map(|i| i as f64 / 1000.0).collect()
}

/// γ ∈ {0.00, 0.05, …, 3.00}.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * 0.05).collect()
}

fn default_fwer_target() -> f64 {
    DEFAULT_FWER_TARGET
}

fn default_n_sims() -> u64 {
    DEFAULT_N_SIMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationProblem {
    pub spec_template: DesignSpec,
    #[serde(default = "default_fwer_target")]
    pub fwer_target: f64,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_n_sims")]
    pub n_sims: u64,
    #[serde(default)]
    pub seed: u64,
}

impl CalibrationProblem {
    pub fn new(spec_template: DesignSpec, seed: u64) -> Self {
        Self {
            spec_template,
            fwer_target: DEFAULT_FWER_TARGET,
            lambda_grid: default_lambda_grid(),
            gamma_grid: default_gamma_grid(),
            n_sims: DEFAULT_N_SIMS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec_template.validate_template()?;
        ensure!(!self.lambda_grid.is_empty(), Domain, "λ grid is empty");
        ensure!(self.lambda_grid.iter().all(|&l| l > 0.0 && l < 1.0), Domain, "λ grid values must lie in (0, 1)");
        if self.spec_template.stages == 2 {
            ensure!(!self.gamma_grid.is_empty(), Domain, "γ grid is empty");
        }
        ensure!(
            self.gamma_grid.iter().all(|&g| g.is_finite() && g >= 0.0),
            Domain,
            "γ grid values must be non-negative"
        );
        ensure!((0.0..=1.0).contains(&self.fwer_target), Domain, "FWER target must lie in [0, 1]");
        ensure!(self.n_sims >= 1, Domain, "need at least one simulated trial");
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub lambda: f64,
    pub gamma: f64,
    pub fwer: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub lambda: f64,
    pub gamma: f64,
    /// Stage-I cutoff per basket (equal to `q2` for single-stage designs).
    pub q1: Vec<f64>,
    pub q2: f64,
    pub achieved_fwer: f64,
    pub achieved_power: f64,
    pub fwer_target: f64,
    pub n_sims: u64,
    pub seed: u64,
    /// Every feasible grid point.
    pub frontier: Vec<FrontierPoint>,
}

/// Seed for re-running the chosen design on trials it was not tuned on.
pub fn validation_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stage-II probabilities of one trial for one survivor set.
#[derive(Debug, Clone)]
struct SurvivorAnalysis {
    mask: u32,
    prob_exceeds: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PreparedTrial {
    /// Stage-I probabilities; for single-stage designs the only analysis.
    first: Vec<f64>,
    finals: Vec<SurvivorAnalysis>,
}

fn survivor_mask(p1: &[f64], q1: &[f64]) -> u32 {
    p1.iter().zip(q1).enumerate().fold(0, |m, (b, (p, q))| if p > q { m | (1 << b) } else { m })
}

fn prepare(
    design: &Design,
    scenario: &Scenario,
    n_sims: u64,
    seed: u64,
    q1_grid: &[Vec<f64>],
) -> Result<Vec<PreparedTrial>> {
    let b = design.num_baskets();
    let all: Vec<usize> = (0..b).collect();
    let two_stage = design.spec().stages == 2;
    (0..n_sims)
        .into_par_iter()
        .map(|t| {
            let draw = draw_trial(design, &scenario.true_rates, seed, t);
            if !two_stage {
                let first = design.exceedance(&draw.final_data(design)?, &all)?;
                return Ok(PreparedTrial { first, finals: vec![] });
            }
            let first = design.exceedance(&draw.interim_data(design)?, &all)?;
            let mut masks: Vec<u32> = q1_grid.iter().map(|q1| survivor_mask(&first, q1)).collect();
            masks.sort_unstable();
            masks.dedup();
            let full = draw.final_data(design)?;
            let finals = masks
                .into_iter()
                .filter(|&m| m != 0)
                .map(|mask| {
                    let survivors: Vec<usize> = (0..b).filter(|i| mask & (1 << i) != 0).collect();
                    Ok(SurvivorAnalysis { mask, prob_exceeds: design.exceedance(&full, &survivors)? })
                })
                .collect::<Result<_>>()?;
            Ok(PreparedTrial { first, finals })
        })
        .collect()
}

/// Per-basket rejection counts and family-error count at one boundary.
fn count_rejections(trials: &[PreparedTrial], q1: &[f64], q2: f64, two_stage: bool) -> (Vec<u64>, u64) {
    let b = q1.len();
    let mut rejections = vec![0u64; b];
    let mut any = 0u64;
    for trial in trials {
        let mut rejected = false;
        if two_stage {
            let mask = survivor_mask(&trial.first, q1);
            if mask == 0 {
                continue;
            }
            let fin = trial.finals.iter().find(|f| f.mask == mask).expect("survivor set prepared");
            let mut k = 0;
            for (i, slot) in rejections.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    if fin.prob_exceeds[k] > q2 {
                        *slot += 1;
                        rejected = true;
                    }
                    k += 1;
                }
            }
        } else {
            for (i, slot) in rejections.iter_mut().enumerate() {
                if trial.first[i] > q2 {
                    *slot += 1;
                    rejected = true;
                }
            }
        }
        any += rejected as u64;
    }
    (rejections, any)
}

#[derive(Debug, Clone, Copy)]
struct GridOutcome {
    lambda: f64,
    gamma: f64,
    family_errors: u64,
    /// `Σ_b rejections_b · N_b` under the global alternative.
    weighted_power: u64,
}

/// Calibrate `problem` on the current rayon pool. Single-stage templates
/// delegate to [`calibrate_fixed`].
pub fn calibrate(problem: &CalibrationProblem) -> Result<CalibrationResult> {
    problem.validate()?;
    if problem.spec_template.stages == 1 {
        return calibrate_fixed(problem);
    }
    run(problem, &problem.gamma_grid)
}

/// Threshold search for a single-stage design: `q2 = λ`, reported `γ = 0`.
pub fn calibrate_fixed(problem: &CalibrationProblem) -> Result<CalibrationResult> {
    problem.validate()?;
    ensure!(problem.spec_template.stages == 1, Domain, "fixed-design calibration requires stages = 1");
    run(problem, &[0.0])
}

fn run(problem: &CalibrationProblem, gammas: &[f64]) -> Result<CalibrationResult> {
    let spec = &problem.spec_template;
    let design = Design::from_template(spec.clone())?;
    let two_stage = spec.stages == 2;
    let fractions = spec.information_fractions()?;

    let grid: Vec<(f64, f64)> = gammas.iter().flat_map(|&g| problem.lambda_grid.iter().map(move |&l| (l, g))).collect();
    let q1_of = |lambda: f64, gamma: f64| -> Vec<f64> { fractions.iter().map(|t| lambda * t.powf(gamma)).collect() };
    let q1_grid: Vec<Vec<f64>> = if two_stage { grid.iter().map(|&(l, g)| q1_of(l, g)).collect() } else { vec![] };

    let null = prepare(&design, &global_null(&spec.theta0), problem.n_sims, problem.seed, &q1_grid)?;
    let alt = prepare(&design, &global_alternative(&spec.theta1), problem.n_sims, problem.seed, &q1_grid)?;

    let outcomes: Vec<GridOutcome> = grid
        .par_iter()
        .map(|&(lambda, gamma)| {
            let q1 = q1_of(lambda, gamma);
            let (_, family_errors) = count_rejections(&null, &q1, lambda, two_stage);
            let (alt_rej, _) = count_rejections(&alt, &q1, lambda, two_stage);
            let weighted_power = alt_rej.iter().zip(&spec.max_n).map(|(&r, &n)| r * n as u64).sum();
            GridOutcome { lambda, gamma, family_errors, weighted_power }
        })
        .collect();

    let n = problem.n_sims as f64;
    let total_n: u64 = spec.max_n.iter().map(|&v| v as u64).sum();
    let fwer = |o: &GridOutcome| o.family_errors as f64 / n;
    let power = |o: &GridOutcome| o.weighted_power as f64 / (n * total_n as f64);

    let feasible: Vec<&GridOutcome> = outcomes.iter().filter(|o| fwer(o) <= problem.fwer_target).collect();
    let best = feasible
        .iter()
        .copied()
        .min_by(|a, b| {
            b.weighted_power
                .cmp(&a.weighted_power)
                .then(a.family_errors.cmp(&b.family_errors))
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.gamma.total_cmp(&b.gamma))
        })
        .ok_or_else(|| Error::Infeasible {
            min_fwer: outcomes.iter().map(fwer).fold(f64::INFINITY, f64::min),
            target: problem.fwer_target,
        })?;

    let q1 = if two_stage { q1_of(best.lambda, best.gamma) } else { vec![best.lambda; spec.num_baskets()] };
    Ok(CalibrationResult {
        lambda: best.lambda,
        gamma: best.gamma,
        q1,
        q2: best.lambda,
        achieved_fwer: fwer(best),
        achieved_power: power(best),
        fwer_target: problem.fwer_target,
        n_sims: problem.n_sims,
        seed: problem.seed,
        frontier: feasible
            .iter()
            .map(|o| FrontierPoint { lambda: o.lambda, gamma: o.gamma, fwer: fwer(o), power: power(o) })
            .collect(),
    })
}

impl CalibrationResult {
    /// The template with the selected boundary filled in.
    pub fn apply(&self, template: &DesignSpec) -> DesignSpec {
        let mut spec = template.clone();
        spec.boundary = Some(crate::design::BoundarySpec::PowerFunction { lambda: self.lambda, gamma: self.gamma });
        spec
    }
}
