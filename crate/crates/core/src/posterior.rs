//! Closed-form posterior engine.
//!
//! Block marginals are Beta-Binomial evidences; the partition posterior is the
//! prior reweighted by their product, normalized on the log scale. Borrowing
//! then happens either locally, inside the blocks of the top partition and
//! scaled by its posterior mass, or globally through the pairwise similarity
//! matrix.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::{beta_tails, ln_choose, log_beta_unchecked, log_sum_exp, LogValue};
use crate::partitions::{Partition, PartitionSet};

/// Weights within this distance of the maximum count as tied for the top partition.
pub const TOP_TIE_TOLERANCE: f64 = 1e-12;

/// Responses `x` out of `n` patients, per basket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasketData {
    x: Vec<u32>,
    n: Vec<u32>,
    basket_ids: Vec<String>,
}

fn default_ids(len: usize) -> Vec<String> {
    (0..len).map(|i| if i < 26 { ((b'A' + i as u8) as char).to_string() } else { format!("B{}", i + 1) }).collect()
}

impl BasketData {
    /// Baskets get ids `A`, `B`, ...
    pub fn new(x: Vec<u32>, n: Vec<u32>) -> Result<Self> {
        let ids = default_ids(x.len());
        Self::with_ids(x, n, ids)
    }

    pub fn with_ids(x: Vec<u32>, n: Vec<u32>, basket_ids: Vec<String>) -> Result<Self> {
        ensure!(!x.is_empty(), Shape, "need at least one basket");
        ensure!(
            x.len() == n.len() && x.len() == basket_ids.len(),
            Shape,
            "x, n and ids lengths differ ({}, {}, {})",
            x.len(),
            n.len(),
            basket_ids.len()
        );
        for (b, (&xb, &nb)) in x.iter().zip(&n).enumerate() {
            ensure!(xb <= nb, Domain, "basket {b}: {xb} responses out of {nb} patients");
        }
        Ok(Self { x, n, basket_ids })
    }

    pub fn x(&self) -> &[u32] {
        &self.x
    }

    pub fn n(&self) -> &[u32] {
        &self.n
    }

    /// Non-responders `y = n - x`.
    pub fn y(&self, b: usize) -> u32 {
        self.n[b] - self.x[b]
    }

    pub fn basket_ids(&self) -> &[String] {
        &self.basket_ids
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Data for the baskets at `keep`, in that order.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        ensure!(keep.iter().all(|&b| b < self.len()), Shape, "basket index out of range");
        Self::with_ids(
            keep.iter().map(|&b| self.x[b]).collect(),
            keep.iter().map(|&b| self.n[b]).collect(),
            keep.iter().map(|&b| self.basket_ids[b].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        ensure!(
            alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0,
            Domain,
            "Beta shapes must be finite and positive, got ({alpha}, {beta})"
        );
        Ok(Self { alpha, beta })
    }

    pub fn uniform() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }

    pub fn jeffreys() -> Self {
        Self { alpha: 0.5, beta: 0.5 }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.alpha, self.beta).map(|_| ())
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        Self::uniform()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPosterior {
    pub weights: Vec<f64>,
    pub top_index: usize,
    pub top_prob: f64,
}

/// Pairwise posterior co-clustering probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub psi: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.psi[s][t]
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// `ln m(S | Ω)`: log Beta-Binomial evidence of `s` responses in a block of `n`.
pub fn log_block_marginal(s: u32, n: u32, prior: BetaParams) -> Result<f64> {
    ensure!(s <= n, Domain, "block responses {s} exceed block size {n}");
    prior.validate()?;
    Ok(block_marginal_unchecked(s, n, prior))
}

fn block_marginal_unchecked(s: u32, n: u32, prior: BetaParams) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ln_choose(n, s) + log_beta_unchecked(prior.alpha + s as f64, prior.beta + (n - s) as f64)
        - log_beta_unchecked(prior.alpha, prior.beta)
}

/// How a block's data enter the partition evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Joint likelihood of the individual basket counts,
    /// `Π_b C(n_b, x_b) · Π_k 𝓑(α+S_k, β+N_k-S_k) / 𝓑(α, β)`. The basket
    /// coefficients are common to every partition and cancel.
    #[default]
    BasketLikelihood,
    /// Marginal density of each block total on its own, `Π_k m(S_k | Ω)`
    /// with the pooled coefficient `C(N_k, S_k)`. Under a Beta(1,1) prior
    /// this is `Π_k 1/(N_k+1)` and ignores the responses entirely.
    PooledCount,
}

/// Log evidence of every non-empty block, indexed by basket bitmask.
fn block_evidence_table(data: &BasketData, prior: BetaParams, evidence: Evidence) -> Vec<f64> {
    let b = data.len();
    let size = 1usize << b;
    let mut s = vec![0u32; size];
    let mut n = vec![0u32; size];
    let mut table = vec![0.0; size];
    let ln_b0 = log_beta_unchecked(prior.alpha, prior.beta);
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        s[mask] = s[rest] + data.x()[low];
        n[mask] = n[rest] + data.n()[low];
        table[mask] = match evidence {
            Evidence::PooledCount => block_marginal_unchecked(s[mask], n[mask], prior),
            Evidence::BasketLikelihood => {
                log_beta_unchecked(prior.alpha + s[mask] as f64, prior.beta + (n[mask] - s[mask]) as f64) - ln_b0
            }
        };
    }
    table
}

fn check_dims(data: &BasketData, pset: &PartitionSet) -> Result<()> {
    ensure!(
        data.len() == pset.num_baskets(),
        Shape,
        "data has {} baskets but partition set covers {}",
        data.len(),
        pset.num_baskets()
    );
    Ok(())
}

/// Posterior probability of every partition and the selected top partition.
///
/// Ties within [`TOP_TIE_TOLERANCE`] of the maximum go to the partition with
/// the most blocks, then to the lexicographically smallest membership.
pub fn partition_posterior(
    data: &BasketData,
    pset: &PartitionSet,
    prior: BetaParams,
    evidence: Evidence,
) -> Result<PartitionPosterior> {
    check_dims(data, pset)?;
    prior.validate()?;
    let table = block_evidence_table(data, prior, evidence);
    let log_post: Vec<LogValue> = pset
        .partitions()
        .iter()
        .zip(pset.prior())
        .map(|(p, &w)| {
            let ll: f64 = p.block_masks().iter().map(|&m| table[m as usize]).sum();
            LogValue::from_linear(w) * LogValue(ll)
        })
        .collect();
    let norm = log_sum_exp(&log_post);
    if !norm.ln().is_finite() {
        return Err(Error::Numeric("partition posterior normalizer is not finite".into()));
    }
    let weights: Vec<f64> = log_post.iter().map(|l| (l.ln() - norm.ln()).exp()).collect();
    let top_index = select_top(&weights, pset.partitions());
    Ok(PartitionPosterior { top_prob: weights[top_index], top_index, weights })
}

fn select_top(weights: &[f64], partitions: &[Partition]) -> usize {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (j, &w) in weights.iter().enumerate() {
        if w < max - TOP_TIE_TOLERANCE {
            continue;
        }
        // partitions are in lexicographic order, so the first of a block count wins
        match best {
            Some(i) if partitions[i].num_blocks() >= partitions[j].num_blocks() => {}
            _ => best = Some(j),
        }
    }
    best.expect("non-empty partition set")
}

/// `Ψ_st`, the posterior probability that baskets `s` and `t` share a block.
pub fn similarity_matrix(pp: &PartitionPosterior, pset: &PartitionSet) -> Result<SimilarityMatrix> {
    ensure!(pp.weights.len() == pset.len(), Shape, "posterior and partition set lengths differ");
    let b = pset.num_baskets();
    let mut psi = vec![vec![0.0; b]; b];
    for (p, &w) in pset.partitions().iter().zip(&pp.weights) {
        for s in 0..b {
            for t in (s + 1)..b {
                if p.same_block(s, t) {
                    psi[s][t] += w;
                }
            }
        }
    }
    for s in 0..b {
        psi[s][s] = 1.0;
        for t in (s + 1)..b {
            let v = psi[s][t].min(1.0);
            psi[s][t] = v;
            psi[t][s] = v;
        }
    }
    Ok(SimilarityMatrix { psi })
}

fn check_basket(b: usize, data: &BasketData) -> Result<()> {
    ensure!(b < data.len(), Shape, "basket index {b} out of range for {} baskets", data.len());
    Ok(())
}

/// Borrowed response and non-response mass for basket `b` under the top partition.
fn borrowed(b: usize, data: &BasketData, pp: &PartitionPosterior, pset: &PartitionSet) -> (f64, f64, f64) {
    let top = &pset.partitions()[pp.top_index];
    let (mut x, mut y, mut n) = (0u64, 0u64, 0u64);
    for t in 0..data.len() {
        if t != b && top.same_block(b, t) {
            x += data.x()[t] as u64;
            y += data.y(t) as u64;
            n += data.n()[t] as u64;
        }
    }
    (pp.top_prob * x as f64, pp.top_prob * y as f64, pp.top_prob * n as f64)
}

/// Local-borrowing posterior of basket `b`'s response rate.
pub fn local_posterior(
    b: usize,
    data: &BasketData,
    pp: &PartitionPosterior,
    pset: &PartitionSet,
    prior: BetaParams,
) -> Result<BetaParams> {
    check_dims(data, pset)?;
    check_basket(b, data)?;
    let (bx, by, _) = borrowed(b, data, pp, pset);
    BetaParams::new(prior.alpha + data.x()[b] as f64 + bx, prior.beta + data.y(b) as f64 + by)
}

/// Similarity-weighted posterior of basket `b` borrowing from every basket.
pub fn global_posterior(b: usize, data: &BasketData, psi: &SimilarityMatrix, prior: BetaParams) -> Result<BetaParams> {
    check_basket(b, data)?;
    ensure!(psi.len() == data.len(), Shape, "similarity matrix and data sizes differ");
    let (mut a, mut c) = (prior.alpha, prior.beta);
    for t in 0..data.len() {
        a += psi.get(b, t) * data.x()[t] as f64;
        c += psi.get(b, t) * data.y(t) as f64;
    }
    BetaParams::new(a, c)
}

/// Prior mass plus own and borrowed sample size of basket `b`.
pub fn effective_sample_size(
    b: usize,
    data: &BasketData,
    pp: &PartitionPosterior,
    pset: &PartitionSet,
    prior: BetaParams,
) -> Result<f64> {
    check_dims(data, pset)?;
    check_basket(b, data)?;
    let (_, _, bn) = borrowed(b, data, pp, pset);
    Ok(prior.alpha + prior.beta + data.n()[b] as f64 + bn)
}

/// `Pr(θ > θ₀)` under `post`.
pub fn prob_exceeds(post: BetaParams, theta0: f64) -> Result<f64> {
    post.validate()?;
    ensure!(theta0 > 0.0 && theta0 < 1.0, Domain, "null rate {theta0} outside (0, 1)");
    beta_tails(theta0, post.alpha, post.beta).map(|(_, upper)| upper)
}

/// Exceedance probabilities under local borrowing, without the reporting extras.
pub fn local_exceedance(
    data: &BasketData,
    pset: &PartitionSet,
    prior: BetaParams,
    evidence: Evidence,
    theta0: &[f64],
) -> Result<(PartitionPosterior, Vec<f64>)> {
    ensure!(theta0.len() == data.len(), Shape, "one null rate per basket required");
    let pp = partition_posterior(data, pset, prior, evidence)?;
    let probs = (0..data.len())
        .map(|b| prob_exceeds(local_posterior(b, data, &pp, pset, prior)?, theta0[b]))
        .collect::<Result<Vec<_>>>()?;
    Ok((pp, probs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasketSummary {
    pub basket: String,
    pub x: u32,
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub ess: f64,
    pub prob_exceeds: f64,
    pub global_alpha: f64,
    pub global_beta: f64,
    pub global_prob_exceeds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub membership: String,
    pub blocks: usize,
    pub prior: f64,
    pub posterior: f64,
}

/// Full one-shot analysis of observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub top_partition: String,
    pub top_prob: f64,
    pub baskets: Vec<BasketSummary>,
    pub partitions: Vec<PartitionRow>,
    pub similarity: SimilarityMatrix,
}

pub fn analyze(
    data: &BasketData,
    pset: &PartitionSet,
    prior: BetaParams,
    evidence: Evidence,
    theta0: &[f64],
) -> Result<Analysis> {
    ensure!(theta0.len() == data.len(), Shape, "one null rate per basket required");
    let pp = partition_posterior(data, pset, prior, evidence)?;
    let psi = similarity_matrix(&pp, pset)?;
    let mut baskets = Vec::with_capacity(data.len());
    for b in 0..data.len() {
        let local = local_posterior(b, data, &pp, pset, prior)?;
        let global = global_posterior(b, data, &psi, prior)?;
        baskets.push(BasketSummary {
            basket: data.basket_ids()[b].clone(),
            x: data.x()[b],
            n: data.n()[b],
            alpha: local.alpha,
            beta: local.beta,
            mean: local.mean(),
            ess: effective_sample_size(b, data, &pp, pset, prior)?,
            prob_exceeds: prob_exceeds(local, theta0[b])?,
            global_alpha: global.alpha,
            global_beta: global.beta,
            global_prob_exceeds: prob_exceeds(global, theta0[b])?,
        });
    }
    let partitions = pset
        .partitions()
        .iter()
        .zip(pset.prior())
        .zip(&pp.weights)
        .map(|((p, &prior), &posterior)| PartitionRow {
            membership: p.to_string(),
            blocks: p.num_blocks(),
            prior,
            posterior,
        })
        .collect();
    Ok(Analysis {
        top_partition: pset.partitions()[pp.top_index].to_string(),
        top_prob: pp.top_prob,
        baskets,
        partitions,
        similarity: psi,
    })
}
