//! Simon's two-stage single-arm design, searched exhaustively with exact
//! binomial probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::{binom_cdf, binom_pmf, binom_sf};
use crate::simulation::{trialwise_power, OperatingCharacteristics, Scenario};

pub const DEFAULT_N_MAX: u32 = 55;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimonDesign {
    /// Stop after stage I when responses `<= r1`.
    pub r1: u32,
    pub n1: u32,
    /// Efficacious when total responses `> r`.
    pub r: u32,
    pub n: u32,
    pub alpha_actual: f64,
    pub power_actual: f64,
    pub en_null: f64,
    pub pet_null: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimonDesigns {
    pub minimax: SimonDesign,
    pub optimal: SimonDesign,
}

/// Per-basket level under a Bonferroni split of `fwer` across `baskets`.
pub fn bonferroni_alpha(fwer: f64, baskets: usize) -> f64 {
    fwer / baskets as f64
}

fn pmf_table(n: u32, p: f64) -> Vec<f64> {
    (0..=n).map(|k| binom_pmf(k, n, p).expect("k <= n")).collect()
}

/// `sf[k] = P(X > k)` for `k = 0..=n`, plus callers treat `k < 0` as 1.
fn sf_table(n: u32, p: f64) -> Vec<f64> {
    (0..=n).map(|k| binom_sf(k as i64, n, p).expect("valid p")).collect()
}

fn tail(sf: &[f64], k: i64) -> f64 {
    if k < 0 {
        1.0
    } else {
        sf.get(k as usize).copied().unwrap_or(0.0)
    }
}

/// Probability of declaring efficacy with rule `(r1, n1, r, n)` when the true rate is `p`.
pub fn reject_probability(r1: u32, n1: u32, r: u32, n: u32, p: f64) -> Result<f64> {
    ensure!(r1 <= n1 && n1 < n && r <= n, Domain, "invalid Simon rule ({r1}, {n1}, {r}, {n})");
    let f1 = pmf_table(n1, p);
    let sf2 = sf_table(n - n1, p);
    Ok(((r1 + 1)..=n1).map(|x1| f1[x1 as usize] * tail(&sf2, r as i64 - x1 as i64)).sum())
}

/// Probability of stopping after stage I.
pub fn early_termination(r1: u32, n1: u32, p: f64) -> Result<f64> {
    binom_cdf(r1, n1, p)
}

/// Exhaustive search over `(n, n1, r1, r)` with `n <= n_max`.
///
/// Minimax: smallest `n`, then smallest null expected size. Optimal: smallest
/// null expected size, then smallest `n`. For each `(n, n1, r1)` only the
/// smallest `r` meeting the type-I constraint is considered; it has the
/// largest power.
pub fn simon_search(p0: f64, p1: f64, alpha: f64, beta: f64, n_max: u32) -> Result<SimonDesigns> {
    ensure!(p0 > 0.0 && p1 < 1.0 && p0 < p1, Domain, "need 0 < p0 < p1 < 1, got ({p0}, {p1})");
    ensure!(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0, Domain, "α and β must lie in (0, 1)");
    let target_power = 1.0 - beta;
    let mut minimax: Option<SimonDesign> = None;
    let mut optimal: Option<SimonDesign> = None;

    for n in 2..=n_max {
        for n1 in 1..n {
            let n2 = n - n1;
            let f0 = pmf_table(n1, p0);
            let f1 = pmf_table(n1, p1);
            let sf0 = sf_table(n2, p0);
            let sf1 = sf_table(n2, p1);
            let mut pet = 0.0;
            for r1 in 0..n1 {
                pet += f0[r1 as usize];
                let size = |r: u32, f: &[f64], sf: &[f64]| -> f64 {
                    ((r1 + 1)..=n1).map(|x1| f[x1 as usize] * tail(sf, r as i64 - x1 as i64)).sum()
                };
                // α(r) decreases in r; take the first r that meets it
                let Some((r, a)) = (r1..n).map(|r| (r, size(r, &f0, &sf0))).find(|&(_, a)| a <= alpha) else {
                    continue;
                };
                let power = size(r, &f1, &sf1);
                if power < target_power {
                    // power only falls as r1 grows
                    break;
                }
                let design = SimonDesign {
                    r1,
                    n1,
                    r,
                    n,
                    alpha_actual: a,
                    power_actual: power,
                    en_null: n1 as f64 + (1.0 - pet) * n2 as f64,
                    pet_null: pet,
                };
                let key_mm = |d: &SimonDesign| (d.n, d.en_null, d.n1, d.r1, d.r);
                let key_opt = |d: &SimonDesign| (d.en_null, d.n, d.n1, d.r1, d.r);
                if minimax
                    .as_ref()
                    .is_none_or(|m| key_mm(&design).partial_cmp(&key_mm(m)) == Some(std::cmp::Ordering::Less))
                {
                    minimax = Some(design);
                }
                if optimal
                    .as_ref()
                    .is_none_or(|o| key_opt(&design).partial_cmp(&key_opt(o)) == Some(std::cmp::Ordering::Less))
                {
                    optimal = Some(design);
                }
            }
        }
    }
    match (minimax, optimal) {
        (Some(minimax), Some(optimal)) => Ok(SimonDesigns { minimax, optimal }),
        _ => Err(Error::Capacity(format!("no admissible Simon design with n <= {n_max}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimonDecision {
    FutilityStop,
    Continue,
    Efficacious,
    NotPromising,
}

/// Decision after stage I (`x_total = None`) or at the end of the trial.
pub fn simon_decide(design: &SimonDesign, x1: u32, x_total: Option<u32>) -> Result<SimonDecision> {
    ensure!(x1 <= design.n1, Domain, "stage-I responses {x1} exceed n1 = {}", design.n1);
    if let Some(total) = x_total {
        ensure!(
            total >= x1 && total - x1 <= design.n - design.n1,
            Domain,
            "total responses {total} inconsistent with stage-I count {x1} and n = {}",
            design.n
        );
    }
    if x1 <= design.r1 {
        return Ok(SimonDecision::FutilityStop);
    }
    Ok(match x_total {
        None => SimonDecision::Continue,
        Some(t) if t > design.r => SimonDecision::Efficacious,
        Some(_) => SimonDecision::NotPromising,
    })
}

/// Exact operating characteristics of running `design` independently in every basket.
pub fn simon_oc(design: &SimonDesign, scenario: &Scenario) -> Result<OperatingCharacteristics> {
    scenario.validate()?;
    let mut reject = Vec::with_capacity(scenario.true_rates.len());
    let mut en = Vec::with_capacity(scenario.true_rates.len());
    for &p in &scenario.true_rates {
        reject.push(reject_probability(design.r1, design.n1, design.r, design.n, p)?);
        let pet = early_termination(design.r1, design.n1, p)?;
        en.push(design.n1 as f64 + (1.0 - pet) * (design.n - design.n1) as f64);
    }
    let has_null = scenario.promising.iter().any(|&p| !p);
    let fwer = has_null.then(|| {
        1.0 - reject.iter().zip(&scenario.promising).filter(|(_, &prom)| !prom).map(|(r, _)| 1.0 - r).product::<f64>()
    });
    let max_n = vec![design.n; reject.len()];
    Ok(OperatingCharacteristics {
        label: scenario.label.clone(),
        trialwise_power: trialwise_power(&reject, &max_n, &scenario.promising),
        per_basket_reject_rate: reject,
        fwer,
        expected_n: en,
        n_sims: None,
        seed: None,
    })
}
