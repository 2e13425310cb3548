//! Acceptance criteria. Each test prints one `ACn PASS|FAIL` line with the
//! measured values and the tolerance it was judged against.
//!
//! Monte-Carlo criteria use 5000 trials per scenario. Calibrated designs are
//! judged on the trials they were calibrated on (the FWER cap is an in-sample
//! constraint); the same design on fresh trials is printed for information.
//! A range "within ±tol of lo–hi" is read as `[lo - tol, hi + tol]`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::Command;
use std::time::Instant;

use localmem::calibration::validation_seed;
use localmem::numerics::{log_beta, reg_inc_beta};
use localmem::partitions::bell;
use localmem::simon::DEFAULT_N_MAX;
use localmem::{
    calibrate, calibrate_fixed, enumerate_partitions, partition_prior, scenario_suite, simon_oc, simon_search,
    simulate, BetaParams, BoundarySpec, CalibrationProblem, Design, DesignSpec, Evidence, Interim,
    OperatingCharacteristics, Partition,
};

const N_SIMS: u64 = 5000;
const SEED: u64 = 2024;

fn verdict(id: u32, pass: bool, detail: &str, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("AC{id} {status} ({:.1}s): {detail}", started.elapsed().as_secs_f64());
    assert!(pass, "AC{id} failed: {detail}");
}

fn within(v: f64, lo: f64, hi: f64, tol: f64) -> bool {
    v >= lo - tol && v <= hi + tol
}

fn fmt(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", cells.join(", "))
}

fn spec(max_n: u32, b: usize, theta0: &[f64], theta1: &[f64], delta: f64, two_stage: bool) -> DesignSpec {
    assert_eq!(theta0.len(), b);
    DesignSpec {
        max_n: vec![max_n; b],
        interim: two_stage.then(|| Interim::Sizes(vec![10; b])),
        theta0: theta0.to_vec(),
        theta1: theta1.to_vec(),
        prior: BetaParams::uniform(),
        evidence: Evidence::default(),
        delta,
        partition_weights: None,
        boundary: None,
        stages: if two_stage { 2 } else { 1 },
    }
}

/// Operating characteristics of every suite scenario at `seed`.
fn suite_oc(design: &Design, seed: u64) -> Vec<OperatingCharacteristics> {
    let s = design.spec();
    scenario_suite(&s.theta0, &s.theta1).iter().map(|sc| simulate(design, sc, N_SIMS, seed).unwrap()).collect()
}

/// Calibrate `template` and return the design with its in-sample and fresh-trial OCs.
fn calibrated(template: DesignSpec) -> (Design, Vec<OperatingCharacteristics>, Vec<OperatingCharacteristics>, String) {
    let mut problem = CalibrationProblem::new(template.clone(), SEED);
    problem.n_sims = N_SIMS;
    let result = if template.stages == 1 { calibrate_fixed(&problem) } else { calibrate(&problem) }.unwrap();
    let design = Design::new(result.apply(&template)).unwrap();
    let ins = suite_oc(&design, SEED);
    let fresh = suite_oc(&design, validation_seed(SEED));
    let chosen = format!("λ={:.3} γ={:.2} calib FWER={:.3}", result.lambda, result.gamma, result.achieved_fwer);
    (design, ins, fresh, chosen)
}

fn null_rates(oc: &OperatingCharacteristics, promising: &[bool]) -> Vec<f64> {
    oc.per_basket_reject_rate.iter().zip(promising).filter(|(_, &p)| !p).map(|(&r, _)| r).collect()
}

#[test]
fn ac01_four_basket_partition_priors() {
    let t = Instant::now();
    // membership (as printed, not canonical), then priors for δ = 0, 1, 2
    let rows: [(&str, [f64; 3]); 15] = [
        ("1111", [0.067, 0.027, 0.010]),
        ("1112", [0.067, 0.054, 0.040]),
        ("1121", [0.067, 0.054, 0.040]),
        ("1211", [0.067, 0.054, 0.040]),
        ("2111", [0.067, 0.054, 0.040]),
        ("1221", [0.067, 0.054, 0.040]),
        ("1122", [0.067, 0.054, 0.040]),
        ("1212", [0.067, 0.054, 0.040]),
        ("1231", [0.067, 0.081, 0.091]),
        ("1123", [0.067, 0.081, 0.091]),
        ("1213", [0.067, 0.081, 0.091]),
        ("2131", [0.067, 0.081, 0.091]),
        ("2113", [0.067, 0.081, 0.091]),
        ("2311", [0.067, 0.081, 0.091]),
        ("1234", [0.067, 0.108, 0.162]),
    ];
    let parts = enumerate_partitions(4).unwrap();
    let priors: Vec<Vec<f64>> = [0.0, 1.0, 2.0].iter().map(|&d| partition_prior(&parts, d)).collect();
    let mut seen = std::collections::HashSet::new();
    let mut mismatches = Vec::new();
    for (label, want) in rows {
        // relabel blocks in order of first appearance
        let mut order: Vec<u8> = Vec::new();
        let rgs: Vec<u8> = label
            .bytes()
            .map(|c| match order.iter().position(|&o| o == c) {
                Some(i) => i as u8 + 1,
                None => {
                    order.push(c);
                    order.len() as u8
                }
            })
            .collect();
        let canon = Partition::from_membership(rgs).unwrap();
        let j = parts.iter().position(|p| p.membership() == canon.membership()).expect("listed partition");
        seen.insert(j);
        for (d, &w) in want.iter().enumerate() {
            let got = (priors[d][j] * 1000.0).round() / 1000.0;
            if (got - w).abs() > 1e-9 {
                mismatches.push(format!("{label} δ={d}: {got} vs {w}"));
            }
        }
    }
    let pass = mismatches.is_empty() && seen.len() == 15 && parts.len() == 15;
    verdict(1, pass, &format!("45 prior values to 3 decimals, {} mismatches {mismatches:?}", mismatches.len()), t);
}

#[test]
fn ac02_bell_counts() {
    let t = Instant::now();
    let want = [1usize, 2, 5, 15, 52, 203, 877, 4140];
    let got: Vec<usize> = (1..=8).map(|b| enumerate_partitions(b).unwrap().len()).collect();
    let pass = got == want && (1..=8).all(|b| bell(b) as usize == want[b - 1]);
    verdict(2, pass, &format!("sizes {got:?}"), t);
}

#[test]
fn ac03_simon_minimax() {
    let t = Instant::now();
    let d = simon_search(0.15, 0.45, 0.025, 0.20, DEFAULT_N_MAX).unwrap().minimax;
    let null = &scenario_suite(&[0.15; 4], &[0.45; 4])[0];
    let oc = simon_oc(&d, null).unwrap();
    let fwer = oc.fwer.unwrap();
    let en = oc.expected_n[0];
    let pass = (d.r1, d.n1, d.r, d.n) == (1, 10, 5, 16) && (fwer - 0.091).abs() <= 0.005 && (en - 12.7).abs() <= 0.2;
    verdict(
        3,
        pass,
        &format!(
            "minimax r1={} n1={} r={} n={}; FWER {fwer:.4} (0.091±0.005); EN {en:.3} (12.7±0.2)",
            d.r1, d.n1, d.r, d.n
        ),
        t,
    );
}

#[test]
fn ac04_two_stage_fixed_boundary() {
    let t = Instant::now();
    let mut s = spec(16, 4, &[0.15; 4], &[0.45; 4], 2.0, true);
    s.boundary = Some(BoundarySpec::Explicit { q1: 0.703, q2: 0.977 });
    let design = Design::new(s).unwrap();
    let ocs = suite_oc(&design, SEED);
    let suite = scenario_suite(&[0.15; 4], &[0.45; 4]);
    let fwer = ocs[0].fwer.unwrap();
    let four = &ocs[4].per_basket_reject_rate;
    let one = ocs[1].per_basket_reject_rate[3];
    let max_null = ocs.iter().zip(&suite).flat_map(|(o, sc)| null_rates(o, &sc.promising)).fold(0.0, f64::max);
    let pass = (fwer - 0.098).abs() <= 0.02
        && four.iter().all(|&p| within(p, 0.835, 0.845, 0.02))
        && (one - 0.810).abs() <= 0.02
        && max_null <= 0.06;
    verdict(
        4,
        pass,
        &format!(
            "null FWER {fwer:.3} (0.098±0.02); 4-success power {} (0.835–0.845±0.02); 1-success power {one:.3} \
             (0.810±0.02); max null type-I {max_null:.3} (≤0.06)",
            fmt(four)
        ),
        t,
    );
}

#[test]
fn ac05_two_stage_calibrated_delta_0_and_1() {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (delta, fwer_want, power_want) in [(0.0, 0.131, 0.90), (1.0, 0.118, 0.86)] {
        let (_, ins, fresh, chosen) = calibrated(spec(16, 4, &[0.15; 4], &[0.45; 4], delta, true));
        let fwer1 = ins[1].fwer.unwrap();
        let four = &ins[4].per_basket_reject_rate;
        let ok = (fwer1 - fwer_want).abs() <= 0.025 && four.iter().all(|&p| (p - power_want).abs() <= 0.025);
        pass &= ok;
        parts.push(format!(
            "δ={delta}: {chosen}; 1-success FWER {fwer1:.3} ({fwer_want}±0.025); 4-success power {} ({power_want}±0.025); \
             fresh trials: 1-success FWER {:.3}, 4-success {}",
            fmt(four),
            fresh[1].fwer.unwrap(),
            fmt(&fresh[4].per_basket_reject_rate)
        ));
    }
    verdict(5, pass, &parts.join(" | "), t);
}

#[test]
fn ac06_fixed_design_calibrated() {
    let t = Instant::now();
    let (_, ins, fresh, chosen) = calibrated(spec(19, 4, &[0.15; 4], &[0.45; 4], 2.0, false));
    let fwer = ins[0].fwer.unwrap();
    let four = &ins[4].per_basket_reject_rate;
    let three_null = ins[3].per_basket_reject_rate[0];
    let pass =
        fwer <= 0.10 && four.iter().all(|&p| within(p, 0.885, 0.897, 0.03)) && (three_null - 0.043).abs() <= 0.015;
    verdict(
        6,
        pass,
        &format!(
            "{chosen}; null FWER {fwer:.3} (≤0.10); 4-success power {} (0.885–0.897±0.03); 3-success null type-I \
             {three_null:.3} (0.043±0.015); fresh trials: null FWER {:.3}, 4-success {}",
            fmt(four),
            fresh[0].fwer.unwrap(),
            fmt(&fresh[4].per_basket_reject_rate)
        ),
        t,
    );
}

#[test]
fn ac07_heterogeneous_nulls() {
    let t = Instant::now();
    let theta0 = [0.25, 0.25, 0.15, 0.15];
    let theta1 = [0.55, 0.55, 0.45, 0.45];
    let (_, ins, fresh, chosen) = calibrated(spec(19, 4, &theta0, &theta1, 2.0, false));
    let fwers: Vec<f64> = ins.iter().filter_map(|o| o.fwer).collect();
    let four = &ins[4].per_basket_reject_rate;
    let want = [0.822, 0.816, 0.857, 0.852];
    let pass = fwers.iter().all(|&f| f <= 0.10) && four.iter().zip(&want).all(|(&p, &w)| (p - w).abs() <= 0.03);
    verdict(
        7,
        pass,
        &format!(
            "{chosen}; FWER by scenario {} (≤0.10); 4-success power {} ({want:?}±0.03); fresh trials: FWER {}, \
             4-success {}",
            fmt(&fwers),
            fmt(four),
            fmt(&fresh.iter().filter_map(|o| o.fwer).collect::<Vec<_>>()),
            fmt(&fresh[4].per_basket_reject_rate)
        ),
        t,
    );
}

#[test]
fn ac08_six_baskets() {
    let t = Instant::now();
    let (design, ins, fresh, chosen) = calibrated(spec(19, 6, &[0.15; 6], &[0.45; 6], 2.0, false));
    assert_eq!(design.partition_set(&[0, 1, 2, 3, 4, 5]).unwrap().len(), 203);
    let fwer = ins[0].fwer.unwrap();
    let six = &ins[6].per_basket_reject_rate;
    let pass = (fwer - 0.096).abs() <= 0.02 && six.iter().all(|&p| within(p, 0.860, 0.875, 0.03));
    verdict(
        8,
        pass,
        &format!(
            "{chosen}; null FWER {fwer:.3} (0.096±0.02); 6-success power {} (0.860–0.875±0.03); fresh trials: null \
             FWER {:.3}, 6-success {}",
            fmt(six),
            fresh[0].fwer.unwrap(),
            fmt(&fresh[6].per_basket_reject_rate)
        ),
        t,
    );
}

#[test]
fn ac09_rational_oracle_equivalence() {
    let t = Instant::now();
    let mut cases = 0;
    let mut failures = Vec::new();
    for b in 1..=3 {
        for (x, n) in common::rational::all_data(b, 4) {
            for (alpha, beta) in [(1, 1), (2, 3)] {
                for delta in [0, 1, 2] {
                    for evidence in [Evidence::BasketLikelihood, Evidence::PooledCount] {
                        cases += 1;
                        if let Err(e) = common::rational::check(&x, &n, alpha, beta, delta, evidence) {
                            failures.push(e);
                        }
                    }
                }
            }
        }
    }
    let detail = format!(
        "{cases} cases (B≤3, n_b≤4, all x_b) to {:e}; {} mismatches{}",
        common::rational::TOL,
        failures.len(),
        failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
    );
    verdict(9, failures.is_empty(), &detail, t);
}

#[test]
fn ac10_worker_count_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("simulate.json");
    std::fs::write(
        &config,
        r#"{"design":{"max_n":[16,16,16,16],"interim":{"sizes":[10,10,10,10]},
            "theta0":[0.15,0.15,0.15,0.15],"theta1":[0.45,0.45,0.45,0.45],"delta":2,
            "boundary":{"q1":0.703,"q2":0.977}},"n_sims":2000,"seed":7}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 4, 16] {
        let out = dir.path().join(format!("w{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_localmem"))
            .args(["simulate", "--format", "csv", "--workers", &workers.to_string()])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out.join("simulate.csv")).unwrap());
    }
    let pass = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
    verdict(10, pass, &format!("simulate CSV ({} bytes) identical for --workers 1, 4, 16", outputs[0].len()), t);
}

#[test]
fn ac11_numerics() {
    let t = Instant::now();
    let shapes = [1.0, 1.5, 2.0, 16.0 / 7.0, 3.0, 4.0, 6.5, 10.0, 17.0, 30.0];
    let xs = [0.01, 0.05, 0.15, 0.25, 0.4, 0.5, 0.65, 0.8, 0.9, 0.99];
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for &a in &shapes {
        for &b in &shapes {
            for &x in &xs {
                let err = (reg_inc_beta(x, a, b).unwrap() - common::quadrature::quad_inc_beta(x, a, b)).abs();
                worst = worst.max(err);
                points += 1;
            }
        }
    }
    let mut sym_ok = true;
    for &a in &[0.01, 0.5, 1.0, 2.5, 16.0 / 7.0, 40.0, 1e3, 1e6] {
        for &b in &[0.02, 0.5, 3.0, 17.0, 250.0, 1e5] {
            sym_ok &= log_beta(a, b).unwrap() == log_beta(b, a).unwrap();
        }
    }
    let identities = [
        (log_beta(1.0, 1.0).unwrap(), 0.0),
        (log_beta(3.0, 3.0).unwrap(), (1.0f64 / 30.0).ln()),
        (log_beta(0.5, 0.5).unwrap(), std::f64::consts::PI.ln()),
        (log_beta(2.0, 1.0).unwrap(), 0.5f64.ln()),
    ];
    let ident_err = identities.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let pass = points == 1000 && worst <= 1e-8 && sym_ok && ident_err <= 1e-12;
    verdict(
        11,
        pass,
        &format!(
            "reg_inc_beta max error {worst:.2e} over {points} points (≤1e-8); log_beta symmetric: {sym_ok}; \
             identity error {ident_err:.1e} (≤1e-12)"
        ),
        t,
    );
}
