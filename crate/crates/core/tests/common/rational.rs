//! Exact rational brute force for the partition posterior and borrowing
//! quantities on small trials.

use std::collections::BTreeSet;

use localmem::{
    effective_sample_size, local_posterior, partition_posterior, similarity_matrix, BasketData, BetaParams, Evidence,
    PartitionSet,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

pub const TOL: f64 = 1e-9;

fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn factorial(n: u64) -> BigRational {
    (1..=n).fold(BigRational::one(), |acc, k| acc * int(k))
}

fn choose(n: u64, k: u64) -> BigRational {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// 𝓑(a, b) for positive integers.
fn beta_fn(a: u64, b: u64) -> BigRational {
    factorial(a - 1) * factorial(b - 1) / factorial(a + b - 1)
}

/// Canonical memberships of every set partition, built from all labelings.
pub fn brute_partitions(b: usize) -> Vec<Vec<u8>> {
    let mut seen = BTreeSet::new();
    let total = b.pow(b as u32);
    for code in 0..total {
        let mut labels = Vec::with_capacity(b);
        let mut c = code;
        for _ in 0..b {
            labels.push(c % b);
            c /= b;
        }
        let mut map: Vec<Option<u8>> = vec![None; b];
        let mut next = 0u8;
        let canon: Vec<u8> = labels
            .iter()
            .map(|&l| {
                *map[l].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        seen.insert(canon);
    }
    seen.into_iter().collect()
}

fn blocks(membership: &[u8]) -> Vec<Vec<usize>> {
    let k = *membership.iter().max().unwrap() as usize + 1;
    let mut out = vec![Vec::new(); k];
    for (i, &m) in membership.iter().enumerate() {
        out[m as usize].push(i);
    }
    out
}

struct Oracle {
    weights: Vec<BigRational>,
    top: usize,
    psi: Vec<Vec<BigRational>>,
    local: Vec<(BigRational, BigRational)>,
    ess: Vec<BigRational>,
}

fn oracle(x: &[u64], n: &[u64], alpha: u64, beta: u64, delta: i32, evidence: Evidence) -> Oracle {
    let b = x.len();
    let parts = brute_partitions(b);
    let unnorm: Vec<BigRational> = parts
        .iter()
        .map(|m| {
            let bl = blocks(m);
            let k = int(bl.len() as u64);
            let mut w = if delta >= 0 { k.pow(delta as u32) } else { k.pow(-delta as u32).recip() };
            for block in &bl {
                let s: u64 = block.iter().map(|&i| x[i]).sum();
                let nn: u64 = block.iter().map(|&i| n[i]).sum();
                w *= beta_fn(alpha + s, beta + nn - s) / beta_fn(alpha, beta);
                if evidence == Evidence::PooledCount {
                    w *= choose(nn, s);
                }
            }
            w
        })
        .collect();
    let total = unnorm.iter().fold(BigRational::zero(), |a, w| a + w);
    let weights: Vec<BigRational> = unnorm.iter().map(|w| w / &total).collect();

    let mut top = 0;
    for j in 1..parts.len() {
        let better = weights[j] > weights[top]
            || (weights[j] == weights[top] && blocks(&parts[j]).len() > blocks(&parts[top]).len());
        if better {
            top = j;
        }
    }

    let mut psi = vec![vec![BigRational::zero(); b]; b];
    for (m, w) in parts.iter().zip(&weights) {
        for s in 0..b {
            for t in 0..b {
                if m[s] == m[t] {
                    psi[s][t] += w;
                }
            }
        }
    }

    let pi = &weights[top];
    let mut local = Vec::new();
    let mut ess = Vec::new();
    for i in 0..b {
        let (mut bx, mut by) = (BigRational::zero(), BigRational::zero());
        for t in 0..b {
            if t != i && parts[top][t] == parts[top][i] {
                bx += int(x[t]);
                by += int(n[t] - x[t]);
            }
        }
        let a = int(alpha + x[i]) + pi * &bx;
        let c = int(beta + n[i] - x[i]) + pi * &by;
        ess.push(&a + &c);
        local.push((a, c));
    }
    Oracle { weights, top, psi, local, ess }
}

fn f(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Compare the library with the oracle on one trial; `Err` describes the first mismatch.
pub fn check(x: &[u64], n: &[u64], alpha: u64, beta: u64, delta: i32, evidence: Evidence) -> Result<(), String> {
    let b = x.len();
    let data = BasketData::new(x.iter().map(|&v| v as u32).collect(), n.iter().map(|&v| v as u32).collect()).unwrap();
    let pset = PartitionSet::with_power_prior(b, delta as f64).unwrap();
    let prior = BetaParams::new(alpha as f64, beta as f64).unwrap();
    let pp = partition_posterior(&data, &pset, prior, evidence).unwrap();
    let o = oracle(x, n, alpha, beta, delta, evidence);

    let memberships: Vec<Vec<u8>> =
        pset.partitions().iter().map(|p| p.membership().iter().map(|m| m - 1).collect()).collect();
    let ctx = format!("x={x:?} n={n:?} Beta({alpha},{beta}) δ={delta} {evidence:?}");
    if memberships != brute_partitions(b) {
        return Err(format!("{ctx}: partition list differs"));
    }
    for (got, want) in pp.weights.iter().zip(&o.weights) {
        close(*got, f(want), &format!("{ctx}: weight"))?;
    }
    if pp.top_index != o.top {
        return Err(format!("{ctx}: top partition {} vs {}", pp.top_index, o.top));
    }

    let psi = similarity_matrix(&pp, &pset).unwrap();
    for s in 0..b {
        for t in 0..b {
            close(psi.get(s, t), f(&o.psi[s][t]), &format!("{ctx}: Ψ[{s}][{t}]"))?;
        }
    }
    for i in 0..b {
        let post = local_posterior(i, &data, &pp, &pset, prior).unwrap();
        close(post.alpha, f(&o.local[i].0), &format!("{ctx}: α of basket {i}"))?;
        close(post.beta, f(&o.local[i].1), &format!("{ctx}: β of basket {i}"))?;
        let ess = effective_sample_size(i, &data, &pp, &pset, prior).unwrap();
        close(ess, f(&o.ess[i]), &format!("{ctx}: ESS of basket {i}"))?;
    }
    Ok(())
}

fn close(got: f64, want: f64, what: &str) -> Result<(), String> {
    if (got - want).abs() < TOL {
        Ok(())
    } else {
        Err(format!("{what}: {got} vs {want}"))
    }
}

/// Every trial with `b` baskets of at most `max_n` patients.
pub fn all_data(b: usize, max_n: u64) -> Vec<(Vec<u64>, Vec<u64>)> {
    let cells: Vec<(u64, u64)> = (0..=max_n).flat_map(|n| (0..=n).map(move |x| (x, n))).collect();
    let mut out = vec![(Vec::new(), Vec::new())];
    for _ in 0..b {
        out = out
            .into_iter()
            .flat_map(|(x, n)| {
                cells.iter().map(move |&(cx, cn)| {
                    let mut x2 = x.clone();
                    let mut n2 = n.clone();
                    x2.push(cx);
                    n2.push(cn);
                    (x2, n2)
                })
            })
            .collect();
    }
    out
}
