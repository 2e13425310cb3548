//! Set partitions of the baskets and the prior over them.
//!
//! Partitions are stored as restricted-growth strings (first label 1, each new
//! label one more than the running maximum) and listed in lexicographic order,
//! so partition indices are stable across runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::posterior::BasketData;

/// Default limit on the number of baskets; Bell(10) = 115 975 partitions.
pub const DEFAULT_MAX_BASKETS: usize = 10;

/// Hard limit imposed by the bitmask block representation.
const MASK_BITS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    membership: Vec<u8>,
    num_blocks: usize,
    /// Bit `b` of `blocks[k]` is set when basket `b` sits in block `k + 1`.
    blocks: Vec<u32>,
}

impl Partition {
    /// Builds a partition from a restricted-growth string of 1-based labels.
    pub fn from_membership(membership: Vec<u8>) -> Result<Self> {
        ensure!(!membership.is_empty(), Shape, "partition needs at least one basket");
        ensure!(membership.len() <= MASK_BITS, Capacity, "at most {MASK_BITS} baskets supported");
        let mut max = 0u8;
        for (i, &label) in membership.iter().enumerate() {
            ensure!(
                label >= 1 && label <= max + 1,
                Domain,
                "membership {membership:?} is not a restricted-growth string (position {i})"
            );
            max = max.max(label);
        }
        let mut blocks = vec![0u32; max as usize];
        for (b, &label) in membership.iter().enumerate() {
            blocks[label as usize - 1] |= 1 << b;
        }
        Ok(Self { num_blocks: max as usize, membership, blocks })
    }

    pub fn membership(&self) -> &[u8] {
        &self.membership
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn num_baskets(&self) -> usize {
        self.membership.len()
    }

    /// Basket bitmasks, one per block, in label order.
    pub fn block_masks(&self) -> &[u32] {
        &self.blocks
    }

    pub fn same_block(&self, s: usize, t: usize) -> bool {
        self.membership[s] == self.membership[t]
    }

    /// Canonical form of this partition restricted to the baskets in `keep`
    /// (ascending indices), relabelled to 0..keep.len().
    pub fn restrict(&self, keep: &[usize]) -> Partition {
        let mut relabel = [0u8; 256];
        let mut next = 0u8;
        let membership = keep
            .iter()
            .map(|&b| {
                let old = self.membership[b] as usize;
                if relabel[old] == 0 {
                    next += 1;
                    relabel[old] = next;
                }
                relabel[old]
            })
            .collect();
        Partition::from_membership(membership).expect("restriction of a valid partition")
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, label) in self.membership.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{label}")?;
        }
        Ok(())
    }
}

/// Bell number B_n from the Bell triangle. Saturates on overflow.
pub fn bell(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for v in &row {
            let prev = *next.last().unwrap();
            next.push(prev.saturating_add(*v));
        }
        row = next;
    }
    row[0]
}

/// All partitions of `num_baskets` baskets, lexicographic in membership.
pub fn enumerate_partitions(num_baskets: usize) -> Result<Vec<Partition>> {
    enumerate_partitions_capped(num_baskets, DEFAULT_MAX_BASKETS)
}

pub fn enumerate_partitions_capped(num_baskets: usize, cap: usize) -> Result<Vec<Partition>> {
    ensure!(num_baskets >= 1, Domain, "need at least one basket");
    if num_baskets > cap.min(MASK_BITS) {
        return Err(Error::Capacity(format!(
            "{num_baskets} baskets would need Bell({num_baskets}) = {} partitions; cap is {cap}",
            bell(num_baskets)
        )));
    }
    let mut out = Vec::with_capacity(bell(num_baskets) as usize);
    let mut rgs = vec![1u8; num_baskets];
    grow(&mut rgs, 1, 1, &mut out);
    Ok(out)
}

fn grow(rgs: &mut [u8], pos: usize, max: u8, out: &mut Vec<Partition>) {
    if pos == rgs.len() {
        out.push(Partition::from_membership(rgs.to_vec()).expect("generated string is canonical"));
        return;
    }
    for label in 1..=max + 1 {
        rgs[pos] = label;
        grow(rgs, pos + 1, max.max(label), out);
    }
}

/// `π(Ω_j) ∝ K_j^δ`, normalized.
pub fn partition_prior(partitions: &[Partition], delta: f64) -> Vec<f64> {
    // log scale keeps large |δ| from overflowing
    let logs: Vec<f64> = partitions.iter().map(|p| delta * (p.num_blocks() as f64).ln()).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Per-block `(S_jk, N_jk)` response and sample-size totals.
pub fn block_aggregates(partition: &Partition, data: &BasketData) -> Result<Vec<(u32, u32)>> {
    ensure!(
        partition.num_baskets() == data.len(),
        Shape,
        "partition covers {} baskets but data has {}",
        partition.num_baskets(),
        data.len()
    );
    let mut agg = vec![(0u32, 0u32); partition.num_blocks()];
    for (b, &label) in partition.membership().iter().enumerate() {
        let slot = &mut agg[label as usize - 1];
        slot.0 += data.x()[b];
        slot.1 += data.n()[b];
    }
    Ok(agg)
}

/// How the prior over partitions is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPrior {
    /// `K^δ` family.
    Power { delta: f64 },
    /// Explicit weights in enumeration order; normalized on use.
    Custom { weights: Vec<f64> },
}

/// Every partition of `num_baskets` baskets with its prior weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSet {
    num_baskets: usize,
    partitions: Vec<Partition>,
    prior: Vec<f64>,
}

impl PartitionSet {
    pub fn with_power_prior(num_baskets: usize, delta: f64) -> Result<Self> {
        ensure!(delta.is_finite(), Domain, "prior exponent must be finite, got {delta}");
        let partitions = enumerate_partitions(num_baskets)?;
        let prior = partition_prior(&partitions, delta);
        Ok(Self { num_baskets, partitions, prior })
    }

    /// User-supplied weights, one per partition in enumeration order.
    /// Zero weights are allowed as long as some weight is positive.
    pub fn with_custom_prior(num_baskets: usize, weights: &[f64]) -> Result<Self> {
        let partitions = enumerate_partitions(num_baskets)?;
        ensure!(
            weights.len() == partitions.len(),
            Shape,
            "prior has {} entries but {num_baskets} baskets have {} partitions",
            weights.len(),
            partitions.len()
        );
        ensure!(
            weights.iter().all(|w| w.is_finite() && *w >= 0.0),
            Domain,
            "partition prior weights must be finite and non-negative"
        );
        let total: f64 = weights.iter().sum();
        ensure!(total > 0.0, Domain, "partition prior weights sum to zero");
        let prior = weights.iter().map(|w| w / total).collect();
        Ok(Self { num_baskets, partitions, prior })
    }

    pub fn from_prior(num_baskets: usize, prior: &PartitionPrior) -> Result<Self> {
        match prior {
            PartitionPrior::Power { delta } => Self::with_power_prior(num_baskets, *delta),
            PartitionPrior::Custom { weights } => Self::with_custom_prior(num_baskets, weights),
        }
    }

    /// Prior induced on the baskets in `keep` (ascending) by marginalizing
    /// this set's prior over the dropped baskets.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Self> {
        ensure!(!keep.is_empty(), Shape, "cannot marginalize onto zero baskets");
        ensure!(
            keep.windows(2).all(|w| w[0] < w[1]) && *keep.last().unwrap() < self.num_baskets,
            Shape,
            "kept baskets must be ascending indices below {}",
            self.num_baskets
        );
        let partitions = enumerate_partitions(keep.len())?;
        let mut prior = vec![0.0; partitions.len()];
        for (p, w) in self.partitions.iter().zip(&self.prior) {
            let r = p.restrict(keep);
            let idx = partitions.binary_search_by(|q| q.membership().cmp(r.membership())).expect("enumerated");
            prior[idx] += w;
        }
        Ok(Self { num_baskets: keep.len(), partitions, prior })
    }

    pub fn num_baskets(&self) -> usize {
        self.num_baskets
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Index of the all-singletons partition (always last).
    pub fn singletons_index(&self) -> usize {
        self.partitions.len() - 1
    }
}
