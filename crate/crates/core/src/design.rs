//! Two-stage go/no-go monitoring.
//!
//! Stage I analyzes every basket at its interim size and stops those whose
//! exceedance probability is at most `q1`. Stage II re-enumerates partitions
//! over the surviving baskets only and declares efficacy where the probability
//! exceeds `q2`. The boundary follows the power function `q1 = λ t^γ`, `q2 = λ`.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::partitions::{PartitionPrior, PartitionSet};
use crate::posterior::{effective_sample_size, local_exceedance, BasketData, BetaParams, Evidence};

/// Posterior-probability cutoffs for one basket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub q1: f64,
    pub q2: f64,
}

/// `(q1, q2) = (λ t^γ, λ)`.
pub fn stopping_boundary(lambda: f64, gamma: f64, t: f64) -> Result<Boundary> {
    ensure!(lambda > 0.0 && lambda < 1.0, Domain, "λ must lie in (0, 1), got {lambda}");
    ensure!(gamma.is_finite() && gamma >= 0.0, Domain, "γ must be non-negative, got {gamma}");
    ensure!(t > 0.0 && t <= 1.0, Domain, "information fraction must lie in (0, 1], got {t}");
    Ok(Boundary { q1: lambda * t.powf(gamma), q2: lambda })
}

/// How the boundary is given in a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    PowerFunction { lambda: f64, gamma: f64 },
    Explicit { q1: f64, q2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interim {
    /// Interim size `round(t N_b)`.
    Fraction(f64),
    Sizes(Vec<u32>),
}

fn default_stages() -> u8 {
    2
}

/// Everything needed to run a basket trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// Maximum sample size per basket.
    pub max_n: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interim: Option<Interim>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    #[serde(default)]
    pub prior: BetaParams,
    #[serde(default)]
    pub evidence: Evidence,
    #[serde(default)]
    pub delta: f64,
    /// Replaces the `K^δ` prior when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
    #[serde(default = "default_stages")]
    pub stages: u8,
}

impl DesignSpec {
    pub fn num_baskets(&self) -> usize {
        self.max_n.len()
    }

    /// Checks everything except the boundary, which calibration leaves unset.
    pub fn validate_template(&self) -> Result<()> {
        let b = self.num_baskets();
        ensure!(b >= 1, Shape, "design needs at least one basket");
        ensure!(
            self.theta0.len() == b && self.theta1.len() == b,
            Shape,
            "theta0/theta1 need {b} entries, got {}/{}",
            self.theta0.len(),
            self.theta1.len()
        );
        for i in 0..b {
            let (t0, t1) = (self.theta0[i], self.theta1[i]);
            ensure!(t0 > 0.0 && t0 < 1.0, Domain, "basket {i}: null rate {t0} outside (0, 1)");
            ensure!(t1 > t0 && t1 <= 1.0, Domain, "basket {i}: target rate {t1} must exceed null rate {t0}");
            ensure!(self.max_n[i] >= 1, Domain, "basket {i}: maximum sample size must be positive");
        }
        self.prior.validate()?;
        ensure!(self.delta.is_finite(), Domain, "δ must be finite");
        match self.stages {
            1 => {}
            2 => {
                let sizes = self.interim_sizes()?;
                for (i, (&n1, &nmax)) in sizes.iter().zip(&self.max_n).enumerate() {
                    ensure!(
                        n1 > 0 && n1 < nmax,
                        Domain,
                        "basket {i}: interim size {n1} must lie strictly between 0 and {nmax}"
                    );
                }
            }
            s => return Err(Error::Domain(format!("stages must be 1 or 2, got {s}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_template()?;
        self.boundaries().map(|_| ())
    }

    /// Stage-I sample sizes; equals `max_n` for single-stage designs.
    pub fn interim_sizes(&self) -> Result<Vec<u32>> {
        if self.stages == 1 {
            return Ok(self.max_n.clone());
        }
        match &self.interim {
            None => Err(Error::Domain("two-stage design needs an interim fraction or sizes".into())),
            Some(Interim::Fraction(t)) => {
                ensure!(*t > 0.0 && *t < 1.0, Domain, "interim fraction must lie in (0, 1), got {t}");
                Ok(self.max_n.iter().map(|&n| (t * n as f64).round() as u32).collect())
            }
            Some(Interim::Sizes(s)) => {
                ensure!(s.len() == self.num_baskets(), Shape, "need one interim size per basket");
                Ok(s.clone())
            }
        }
    }

    /// Information fraction `t_b = n1_b / N_b` per basket.
    pub fn information_fractions(&self) -> Result<Vec<f64>> {
        if self.stages == 1 {
            return Ok(vec![1.0; self.num_baskets()]);
        }
        match &self.interim {
            Some(Interim::Fraction(t)) => Ok(vec![*t; self.num_baskets()]),
            _ => Ok(self.interim_sizes()?.iter().zip(&self.max_n).map(|(&n1, &n)| n1 as f64 / n as f64).collect()),
        }
    }

    /// Per-basket boundary implied by `self.boundary`.
    pub fn boundaries(&self) -> Result<Vec<Boundary>> {
        let spec = self.boundary.ok_or_else(|| Error::Domain("design has no boundary".into()))?;
        self.boundaries_for(spec)
    }

    pub fn boundaries_for(&self, spec: BoundarySpec) -> Result<Vec<Boundary>> {
        match spec {
            BoundarySpec::PowerFunction { lambda, gamma } => {
                self.information_fractions()?.into_iter().map(|t| stopping_boundary(lambda, gamma, t)).collect()
            }
            BoundarySpec::Explicit { q1, q2 } => {
                ensure!(
                    q1 > 0.0 && q1 <= q2 && q2 < 1.0,
                    Domain,
                    "explicit boundary needs 0 < q1 <= q2 < 1, got ({q1}, {q2})"
                );
                Ok(vec![Boundary { q1, q2 }; self.num_baskets()])
            }
        }
    }

    pub fn partition_prior(&self) -> PartitionPrior {
        match &self.partition_weights {
            Some(w) => PartitionPrior::Custom { weights: w.clone() },
            None => PartitionPrior::Power { delta: self.delta },
        }
    }
}

#[derive(Debug)]
enum PartitionCache {
    /// `K^δ` prior re-evaluated on each survivor count; index is count - 1.
    Power(Vec<Arc<PartitionSet>>),
    /// Full-trial custom prior marginalized onto each survivor set; index is the bitmask.
    Custom { full: Arc<PartitionSet>, by_mask: Vec<OnceLock<Arc<PartitionSet>>> },
}

/// A validated design with its partition sets prepared.
#[derive(Debug)]
pub struct Design {
    spec: DesignSpec,
    boundaries: Vec<Boundary>,
    interim_sizes: Vec<u32>,
    cache: PartitionCache,
}

impl Design {
    pub fn new(spec: DesignSpec) -> Result<Self> {
        spec.validate()?;
        let boundaries = spec.boundaries()?;
        Self::build(spec, boundaries)
    }

    /// Design without a usable boundary, for calibration sweeps.
    pub fn from_template(spec: DesignSpec) -> Result<Self> {
        spec.validate_template()?;
        let b = spec.num_baskets();
        Self::build(spec, vec![Boundary { q1: 0.5, q2: 0.5 }; b])
    }

    fn build(spec: DesignSpec, boundaries: Vec<Boundary>) -> Result<Self> {
        let b = spec.num_baskets();
        let cache = match spec.partition_prior() {
            PartitionPrior::Power { delta } => PartitionCache::Power(
                (1..=b).map(|k| PartitionSet::with_power_prior(k, delta).map(Arc::new)).collect::<Result<_>>()?,
            ),
            PartitionPrior::Custom { weights } => PartitionCache::Custom {
                full: Arc::new(PartitionSet::with_custom_prior(b, &weights)?),
                by_mask: (0..(1usize << b)).map(|_| OnceLock::new()).collect(),
            },
        };
        let interim_sizes = spec.interim_sizes()?;
        Ok(Self { spec, boundaries, interim_sizes, cache })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundaries
    }

    pub fn interim_sizes(&self) -> &[u32] {
        &self.interim_sizes
    }

    pub fn num_baskets(&self) -> usize {
        self.spec.num_baskets()
    }

    /// Partition set over the baskets listed in `active` (ascending).
    pub fn partition_set(&self, active: &[usize]) -> Result<Arc<PartitionSet>> {
        ensure!(!active.is_empty(), Shape, "no baskets to analyze");
        match &self.cache {
            PartitionCache::Power(sets) => Ok(sets[active.len() - 1].clone()),
            PartitionCache::Custom { full, by_mask } => {
                if active.len() == full.num_baskets() {
                    return Ok(full.clone());
                }
                let mask = active.iter().fold(0usize, |m, &b| m | (1 << b));
                if let Some(set) = by_mask[mask].get() {
                    return Ok(set.clone());
                }
                let set = Arc::new(full.marginalize(active)?);
                Ok(by_mask[mask].get_or_init(|| set).clone())
            }
        }
    }

    /// Local-borrowing exceedance probabilities for the baskets in `active`,
    /// using only their data.
    pub fn exceedance(&self, data: &BasketData, active: &[usize]) -> Result<Vec<f64>> {
        Ok(self.analyze_subset(data, active)?.prob_exceeds)
    }

    pub fn analyze_subset(&self, data: &BasketData, active: &[usize]) -> Result<SubsetAnalysis> {
        ensure!(
            data.len() == self.num_baskets(),
            Shape,
            "data covers {} of {} baskets",
            data.len(),
            self.num_baskets()
        );
        let sub = data.subset(active)?;
        let pset = self.partition_set(active)?;
        let theta0: Vec<f64> = active.iter().map(|&b| self.spec.theta0[b]).collect();
        let (pp, prob_exceeds) = local_exceedance(&sub, &pset, self.spec.prior, self.spec.evidence, &theta0)?;
        let ess = (0..sub.len())
            .map(|i| effective_sample_size(i, &sub, &pp, &pset, self.spec.prior))
            .collect::<Result<_>>()?;
        Ok(SubsetAnalysis {
            baskets: active.to_vec(),
            prob_exceeds,
            ess,
            top_partition: pset.partitions()[pp.top_index].to_string(),
            top_prob: pp.top_prob,
        })
    }

    /// Stage I: analyze all baskets at their interim sizes, stop for futility
    /// where `P_b <= q1`.
    pub fn interim_step(&self, state: &TrialState) -> Result<TrialState> {
        ensure!(state.stage == Stage::Interim, Domain, "interim step requires a stage-I state");
        ensure!(self.spec.stages == 2, Domain, "interim step requires a two-stage design");
        self.check_sizes(&state.data, |b| self.interim_sizes[b], "interim")?;
        let all: Vec<usize> = (0..self.num_baskets()).collect();
        let analysis = self.analyze_subset(&state.data, &all)?;
        let mut next = state.clone();
        for (i, &b) in analysis.baskets.iter().enumerate() {
            if analysis.prob_exceeds[i] <= self.boundaries[b].q1 {
                next.active[b] = false;
                next.decisions[b] = Decision::FutilityStopped;
            }
        }
        next.stage = if next.active.iter().any(|&a| a) { Stage::Final } else { Stage::Done };
        next.analyses.push(analysis);
        Ok(next)
    }

    /// Stage II: re-analyze the surviving baskets at full size.
    pub fn final_step(&self, state: &TrialState) -> Result<TrialState> {
        ensure!(state.stage == Stage::Final, Domain, "final step requires a stage-II state");
        self.check_stage_two_data(state)?;
        let survivors = state.active_baskets();
        let mut next = state.clone();
        next.stage = Stage::Done;
        if survivors.is_empty() {
            return Ok(next);
        }
        let analysis = self.analyze_subset(&state.data, &survivors)?;
        for (i, &b) in survivors.iter().enumerate() {
            next.decisions[b] = if analysis.prob_exceeds[i] > self.boundaries[b].q2 {
                Decision::Efficacious
            } else {
                Decision::NotPromising
            };
        }
        next.analyses.push(analysis);
        Ok(next)
    }

    /// One analysis of all baskets at full size; efficacious iff `P_b > q2`.
    pub fn run_single_stage(&self, data: &BasketData) -> Result<Vec<Decision>> {
        ensure!(self.spec.stages == 1, Domain, "single-stage analysis requires stages = 1");
        self.check_sizes(data, |b| self.spec.max_n[b], "final")?;
        let all: Vec<usize> = (0..self.num_baskets()).collect();
        let p = self.exceedance(data, &all)?;
        Ok(p.iter()
            .zip(&self.boundaries)
            .map(|(&p, bd)| if p > bd.q2 { Decision::Efficacious } else { Decision::NotPromising })
            .collect())
    }

    fn check_sizes(&self, data: &BasketData, want: impl Fn(usize) -> u32, what: &str) -> Result<()> {
        ensure!(
            data.len() == self.num_baskets(),
            Shape,
            "data covers {} of {} baskets",
            data.len(),
            self.num_baskets()
        );
        for b in 0..data.len() {
            ensure!(
                data.n()[b] == want(b),
                Shape,
                "basket {b}: {} patients but the {what} size is {}",
                data.n()[b],
                want(b)
            );
        }
        Ok(())
    }

    /// Stage-II snapshots: survivors at full size, stopped baskets frozen at interim.
    pub fn check_stage_two_data(&self, state: &TrialState) -> Result<()> {
        ensure!(state.data.len() == self.num_baskets(), Shape, "data/design basket count mismatch");
        for b in 0..self.num_baskets() {
            let want = if state.active[b] { self.spec.max_n[b] } else { self.interim_sizes[b] };
            ensure!(
                state.data.n()[b] == want,
                Shape,
                "basket {b} ({}): {} patients, expected {want}",
                if state.active[b] { "active" } else { "stopped" },
                state.data.n()[b]
            );
        }
        Ok(())
    }
}

/// Posterior summary of one analysis over a set of baskets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetAnalysis {
    /// Trial-level indices of the analyzed baskets.
    pub baskets: Vec<usize>,
    pub prob_exceeds: Vec<f64>,
    pub ess: Vec<f64>,
    pub top_partition: String,
    pub top_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Interim,
    Final,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pending,
    FutilityStopped,
    Efficacious,
    NotPromising,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialState {
    pub stage: Stage,
    pub active: Vec<bool>,
    /// Cumulative data.
    pub data: BasketData,
    pub decisions: Vec<Decision>,
    pub analyses: Vec<SubsetAnalysis>,
}

impl TrialState {
    pub fn at_interim(data: BasketData) -> Self {
        let b = data.len();
        Self {
            stage: Stage::Interim,
            active: vec![true; b],
            data,
            decisions: vec![Decision::Pending; b],
            analyses: vec![],
        }
    }

    /// Replace the cumulative data after stage-II accrual. Stopped baskets
    /// must keep their interim counts.
    pub fn with_final_data(&self, data: BasketData) -> Result<Self> {
        ensure!(self.stage == Stage::Final, Domain, "final data only accepted in stage II");
        ensure!(data.len() == self.data.len(), Shape, "basket count changed between stages");
        for b in 0..data.len() {
            if !self.active[b] {
                ensure!(
                    data.x()[b] == self.data.x()[b] && data.n()[b] == self.data.n()[b],
                    Domain,
                    "basket {b} was stopped for futility but its data changed"
                );
            } else {
                ensure!(
                    data.x()[b] >= self.data.x()[b] && data.n()[b] >= self.data.n()[b],
                    Domain,
                    "basket {b}: cumulative counts decreased"
                );
            }
        }
        let mut next = self.clone();
        next.data = data;
        Ok(next)
    }

    pub fn active_baskets(&self) -> Vec<usize> {
        self.active.iter().enumerate().filter(|(_, &a)| a).map(|(b, _)| b).collect()
    }
}
