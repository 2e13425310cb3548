use localmem::calibration::validation_seed;
use localmem::design::SubsetAnalysis;
use localmem::simon::{bonferroni_alpha, DEFAULT_N_MAX};
use localmem::simulation::with_workers;
use localmem::{
    analyze, calibrate, scenario_suite, simon_oc, simon_search, simulate, Analysis, BasketData, Boundary,
    CalibrationResult, Decision, Design, DesignSpec, OperatingCharacteristics, PartitionPrior, PartitionSet, Scenario,
    SimonDesign, SimonDesigns, TrialState,
};
use serde::{Deserialize, Serialize};

use crate::config::{
    load, sha256_hex, AnalyzeConfig, CalibrateConfig, CliError, CliResult, MonitorConfig, SimonConfig, SimulateConfig,
};
use crate::report::{opt6, sig6, Meta, Sink, Table};
use crate::{Cli, Command, SimonArgs};

pub fn run(cli: &Cli) -> CliResult<()> {
    let sink = Sink::new(cli.global.out.as_deref(), cli.global.format)?;
    match &cli.command {
        Command::Analyze => cmd_analyze(cli, &sink),
        Command::Monitor => cmd_monitor(cli, &sink),
        Command::Simulate => cmd_simulate(cli, &sink),
        Command::Calibrate => cmd_calibrate(cli, &sink),
        Command::Simon(args) => cmd_simon(cli, args, &sink),
    }
}

fn data_with_ids(x: Vec<u32>, n: Vec<u32>, ids: Option<Vec<String>>) -> CliResult<BasketData> {
    Ok(match ids {
        Some(ids) => BasketData::with_ids(x, n, ids)?,
        None => BasketData::new(x, n)?,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub meta: Meta,
    pub analysis: Analysis,
}

fn cmd_analyze(cli: &Cli, sink: &Sink) -> CliResult<()> {
    let cfg = load::<AnalyzeConfig>(cli.global.config.as_deref())?;
    let c = cfg.value;
    let data = data_with_ids(c.x, c.n, c.basket_ids)?;
    let prior = match c.partition_weights {
        Some(weights) => PartitionPrior::Custom { weights },
        None => PartitionPrior::Power { delta: c.delta },
    };
    let pset = PartitionSet::from_prior(data.len(), &prior)?;
    let analysis = analyze(&data, &pset, c.prior, c.evidence, &c.theta0)?;
    let meta = Meta::new(&cfg.sha256, None, None);

    let header = ["basket", "x", "n", "alpha", "beta", "mean", "ess", "prob_exceeds", "global_prob_exceeds"];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect(), &meta);
    for b in &analysis.baskets {
        table.push(vec![
            b.basket.clone(),
            b.x.to_string(),
            b.n.to_string(),
            sig6(b.alpha),
            sig6(b.beta),
            sig6(b.mean),
            sig6(b.ess),
            sig6(b.prob_exceeds),
            sig6(b.global_prob_exceeds),
        ]);
    }
    sink.emit("analyze", &AnalyzeReport { meta, analysis }, &table, &[])
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MonitorBasket {
    pub basket: String,
    pub x: u32,
    pub n: u32,
    pub decision: String,
    /// Look at which `prob_exceeds` was compared with `threshold`.
    pub look: String,
    pub prob_exceeds: f64,
    pub threshold: f64,
    pub ess: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LookSummary {
    pub look: String,
    pub baskets: Vec<String>,
    pub top_partition: String,
    pub top_prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MonitorReport {
    pub meta: Meta,
    pub stage: u8,
    pub boundaries: Vec<Boundary>,
    pub baskets: Vec<MonitorBasket>,
    pub analyses: Vec<LookSummary>,
}

fn decision_label(d: Decision) -> &'static str {
    match d {
        Decision::Pending => "continue",
        Decision::FutilityStopped => "futility_stopped",
        Decision::Efficacious => "efficacious",
        Decision::NotPromising => "not_promising",
    }
}

fn look_summary(look: &str, a: &SubsetAnalysis, ids: &[String]) -> LookSummary {
    LookSummary {
        look: look.into(),
        baskets: a.baskets.iter().map(|&b| ids[b].clone()).collect(),
        top_partition: a.top_partition.clone(),
        top_prob: a.top_prob,
    }
}

fn cmd_monitor(cli: &Cli, sink: &Sink) -> CliResult<()> {
    let cfg = load::<MonitorConfig>(cli.global.config.as_deref())?;
    let c = cfg.value;
    let design = Design::new(c.design)?;
    let ids = c.basket_ids.clone();
    let data = data_with_ids(c.x, c.n, ids.clone())?;
    let bounds = design.boundaries().to_vec();
    let names = data.basket_ids().to_vec();

    // (look, analysis) pairs in the order they were run
    let mut looks: Vec<(&str, SubsetAnalysis)> = Vec::new();
    let decisions: Vec<Decision> = match (design.spec().stages, c.stage) {
        (1, 1) => {
            let all: Vec<usize> = (0..design.num_baskets()).collect();
            looks.push(("final", design.analyze_subset(&data, &all)?));
            design.run_single_stage(&data)?
        }
        (2, 1) => {
            let next = design.interim_step(&TrialState::at_interim(data.clone()))?;
            looks.push(("interim", next.analyses[0].clone()));
            next.decisions
        }
        (2, 2) => {
            let interim_x = c.interim_x.ok_or_else(|| CliError::Input("stage 2 snapshot needs interim_x".into()))?;
            let interim = data_with_ids(interim_x, design.interim_sizes().to_vec(), ids)?;
            let after = design.interim_step(&TrialState::at_interim(interim))?;
            if let Some(active) = &c.active {
                if active.len() != after.active.len() {
                    return Err(CliError::Input(format!(
                        "active has {} flags, expected {}",
                        active.len(),
                        after.active.len()
                    )));
                }
                for (b, (&claimed, &actual)) in active.iter().zip(&after.active).enumerate() {
                    if claimed != actual {
                        let why = if actual { "continued past" } else { "was stopped at" };
                        return Err(CliError::Input(format!(
                            "basket {} {why} the interim look but is marked {}",
                            names[b],
                            if claimed { "active" } else { "stopped" }
                        )));
                    }
                }
            }
            looks.push(("interim", after.analyses[0].clone()));
            let done = design.final_step(&after.with_final_data(data.clone())?)?;
            if let Some(a) = done.analyses.get(1) {
                looks.push(("final", a.clone()));
            }
            done.decisions
        }
        (1, s) | (2, s) => {
            return Err(CliError::Input(format!("stage {s} is not a look of a {}-stage design", design.spec().stages)))
        }
        _ => unreachable!("validated design has one or two stages"),
    };

    let mut baskets = Vec::with_capacity(data.len());
    for b in 0..data.len() {
        // the last look that analyzed this basket decided it
        let (look, a) = looks.iter().rev().find(|(_, a)| a.baskets.contains(&b)).expect("every basket analyzed");
        let i = a.baskets.iter().position(|&k| k == b).unwrap();
        let threshold = if *look == "interim" { bounds[b].q1 } else { bounds[b].q2 };
        baskets.push(MonitorBasket {
            basket: names[b].clone(),
            x: data.x()[b],
            n: data.n()[b],
            decision: decision_label(decisions[b]).into(),
            look: look.to_string(),
            prob_exceeds: a.prob_exceeds[i],
            threshold,
            ess: a.ess[i],
        });
    }
    let meta = Meta::new(&cfg.sha256, None, None);
    let header = ["basket", "x", "n", "decision", "look", "prob_exceeds", "threshold", "ess"];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect(), &meta);
    for m in &baskets {
        table.push(vec![
            m.basket.clone(),
            m.x.to_string(),
            m.n.to_string(),
            m.decision.clone(),
            m.look.clone(),
            sig6(m.prob_exceeds),
            sig6(m.threshold),
            sig6(m.ess),
        ]);
    }
    let analyses = looks.iter().map(|(l, a)| look_summary(l, a, &names)).collect();
    let report = MonitorReport { meta, stage: c.stage, boundaries: bounds, baskets, analyses };
    sink.emit("monitor", &report, &table, &[])
}

/// One row per scenario: true rates, rejection rates, FWER, trial-wise power, EN.
fn oc_table(ocs: &[OperatingCharacteristics], scenarios: &[Scenario], meta: &Meta) -> Table {
    let b = scenarios.first().map_or(0, |s| s.true_rates.len());
    let mut header = vec!["label".to_string()];
    header.extend((1..=b).map(|i| format!("rate_{i}")));
    header.extend((1..=b).map(|i| format!("reject_{i}")));
    header.push("fwer".into());
    header.push("trialwise_power".into());
    header.extend((1..=b).map(|i| format!("en_{i}")));
    let mut table = Table::new(header, meta);
    for (oc, sc) in ocs.iter().zip(scenarios) {
        let mut row = vec![oc.label.clone()];
        row.extend(sc.true_rates.iter().map(|&v| sig6(v)));
        row.extend(oc.per_basket_reject_rate.iter().map(|&v| sig6(v)));
        row.push(opt6(oc.fwer));
        row.push(opt6(oc.trialwise_power));
        row.extend(oc.expected_n.iter().map(|&v| sig6(v)));
        table.push(row);
    }
    table
}

fn run_scenarios(
    design: &Design,
    scenarios: &[Scenario],
    n_sims: u64,
    seed: u64,
    workers: usize,
) -> CliResult<Vec<OperatingCharacteristics>> {
    let ocs = with_workers(workers, || {
        scenarios.iter().map(|s| simulate(design, s, n_sims, seed)).collect::<localmem::Result<Vec<_>>>()
    })??;
    Ok(ocs)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateReport {
    pub meta: Meta,
    pub design: DesignSpec,
    pub boundaries: Vec<Boundary>,
    pub results: Vec<OperatingCharacteristics>,
}

fn cmd_simulate(cli: &Cli, sink: &Sink) -> CliResult<()> {
    let cfg = load::<SimulateConfig>(cli.global.config.as_deref())?;
    let c = cfg.value;
    let seed = cli.global.seed.unwrap_or(c.seed);
    let design = Design::new(c.design.clone())?;
    let scenarios = c.scenarios.unwrap_or_else(|| scenario_suite(&c.design.theta0, &c.design.theta1));
    let results = run_scenarios(&design, &scenarios, c.n_sims, seed, cli.global.workers)?;
    let meta = Meta::new(&cfg.sha256, Some(seed), Some(c.n_sims));
    let table = oc_table(&results, &scenarios, &meta);
    let report = SimulateReport { meta, design: c.design, boundaries: design.boundaries().to_vec(), results };
    sink.emit("simulate", &report, &table, &[])
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrateReport {
    pub meta: Meta,
    pub result: CalibrationResult,
    /// The template with the chosen boundary filled in.
    pub design: DesignSpec,
    pub validation_seed: u64,
    /// Operating characteristics of the chosen design on fresh trials.
    pub validation: Vec<OperatingCharacteristics>,
}

fn cmd_calibrate(cli: &Cli, sink: &Sink) -> CliResult<()> {
    let cfg = load::<CalibrateConfig>(cli.global.config.as_deref())?;
    let mut problem = cfg.value;
    if let Some(seed) = cli.global.seed {
        problem.seed = seed;
    }
    let result = with_workers(cli.global.workers, || calibrate(&problem))??;
    let spec = result.apply(&problem.spec_template);
    let design = Design::new(spec.clone())?;
    let scenarios = scenario_suite(&spec.theta0, &spec.theta1);
    let vseed = validation_seed(problem.seed);
    let validation = run_scenarios(&design, &scenarios, problem.n_sims, vseed, cli.global.workers)?;

    let meta = Meta::new(&cfg.sha256, Some(problem.seed), Some(problem.n_sims));
    let table = oc_table(&validation, &scenarios, &meta);
    let header = ["lambda", "gamma", "fwer", "power"].iter().map(|s| s.to_string()).collect();
    let mut frontier = Table::new(header, &meta);
    for p in &result.frontier {
        frontier.push(vec![sig6(p.lambda), sig6(p.gamma), sig6(p.fwer), sig6(p.power)]);
    }
    let report = CalibrateReport { meta, result, design: spec, validation_seed: vseed, validation };
    sink.emit("calibrate", &report, &table, &[("frontier", &frontier)])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimonParams {
    pub p0: f64,
    pub p1: f64,
    pub alpha: f64,
    pub power: f64,
    pub baskets: usize,
    pub n_max: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimonReport {
    pub meta: Meta,
    pub params: SimonParams,
    pub designs: SimonDesigns,
    /// Exact characteristics of each design run in every basket.
    pub minimax_oc: Vec<OperatingCharacteristics>,
    pub optimal_oc: Vec<OperatingCharacteristics>,
}

fn resolve_simon(cfg: SimonConfig, args: &SimonArgs) -> CliResult<SimonParams> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Input(format!("simon needs --{name}")));
    let baskets = args.baskets.or(cfg.baskets).unwrap_or(1);
    if baskets == 0 {
        return Err(CliError::Input("--baskets must be at least 1".into()));
    }
    let fwer = args.fwer.or(cfg.fwer).unwrap_or(0.10);
    Ok(SimonParams {
        p0: need(args.p0.or(cfg.p0), "p0")?,
        p1: need(args.p1.or(cfg.p1), "p1")?,
        alpha: args.alpha.or(cfg.alpha).unwrap_or_else(|| bonferroni_alpha(fwer, baskets)),
        power: args.power.or(cfg.power).unwrap_or(0.80),
        baskets,
        n_max: args.n_max.or(cfg.n_max).unwrap_or(DEFAULT_N_MAX),
    })
}

fn simon_row(name: &str, d: &SimonDesign, null_fwer: Option<f64>) -> Vec<String> {
    vec![
        name.into(),
        d.r1.to_string(),
        d.n1.to_string(),
        d.r.to_string(),
        d.n.to_string(),
        sig6(d.alpha_actual),
        sig6(d.power_actual),
        sig6(d.en_null),
        sig6(d.pet_null),
        opt6(null_fwer),
    ]
}

fn cmd_simon(cli: &Cli, args: &SimonArgs, sink: &Sink) -> CliResult<()> {
    let (cfg, hash) = match cli.global.config.as_deref() {
        Some(path) => {
            let loaded = load::<SimonConfig>(Some(path))?;
            (loaded.value, loaded.sha256)
        }
        None => (SimonConfig::default(), String::new()),
    };
    let params = resolve_simon(cfg, args)?;
    let hash = if hash.is_empty() {
        sha256_hex(serde_json::to_string(&params).expect("plain struct").as_bytes())
    } else {
        hash
    };
    let designs = simon_search(params.p0, params.p1, params.alpha, 1.0 - params.power, params.n_max)?;
    let scenarios = scenario_suite(&vec![params.p0; params.baskets], &vec![params.p1; params.baskets]);
    let oc = |d: &SimonDesign| scenarios.iter().map(|s| simon_oc(d, s)).collect::<localmem::Result<Vec<_>>>();
    let minimax_oc = oc(&designs.minimax)?;
    let optimal_oc = oc(&designs.optimal)?;

    let meta = Meta::new(&hash, None, None);
    let header = ["design", "r1", "n1", "r", "n", "alpha", "power", "en_null", "pet_null", "fwer_global_null"];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect(), &meta);
    table.push(simon_row("minimax", &designs.minimax, minimax_oc[0].fwer));
    table.push(simon_row("optimal", &designs.optimal, optimal_oc[0].fwer));
    let report = SimonReport { meta, params, designs, minimax_oc, optimal_oc };
    sink.emit("simon", &report, &table, &[])
}
