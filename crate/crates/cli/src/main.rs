//! csc-sim: collective self-consumption community simulator.
//!
//! Data goes to files, progress and diagnostics to stderr.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use csc_sim::allocation::{run_mechanism, Mechanism};
use csc_sim::billing::MarketContext;
use csc_sim::fairness::{contributions, FairnessReport, UtilityVector};
use csc_sim::harness::{run_sweep, SweepOptions};
use csc_sim::io::{
    ingest_meter_csv, read_allocations, read_bills, write_allocations, write_bills, write_fairness,
    write_meters, write_tariffs, BillRow, FairnessRow,
};
use csc_sim::model::{Community, MemberId};
use csc_sim::scenario::{generate_community, ScenarioConfig};
use csc_sim::Execution;

#[derive(Parser)]
#[command(name = "csc-sim", version, about = "Collective self-consumption community simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic community as meter CSV + tariff JSON
    GenCommunity {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        uptake: f64,
        /// Output directory (meters.csv, tariffs.json)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one distribution mechanism over a metered community
    Allocate {
        #[arg(long)]
        meters: PathBuf,
        #[arg(long)]
        tariffs: PathBuf,
        /// prorata | glass | priority-glass | auction
        #[arg(long)]
        mechanism: Mechanism,
        #[arg(long)]
        out: PathBuf,
        /// Proceed despite validation findings
        #[arg(long)]
        force: bool,
        /// Priority window of priority-glass, days
        #[arg(long, default_value_t = 365)]
        priority_window_days: i64,
    },
    /// Bill every member with and without local trading
    Bill {
        #[arg(long)]
        meters: PathBuf,
        #[arg(long)]
        tariffs: PathBuf,
        #[arg(long)]
        allocations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario label written to every row
        #[arg(long, default_value = "csc")]
        scenario: String,
        /// Mechanism label of the local-trading rows
        #[arg(long, default_value = "lem")]
        mechanism: String,
        /// Share of local payments kept by the organiser
        #[arg(long, default_value_t = 0.0)]
        pmo_fee: f64,
        #[arg(long)]
        force: bool,
    },
    /// Fairness indicators from a bills CSV
    Fairness {
        #[arg(long)]
        bills: PathBuf,
        #[arg(long)]
        meters: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON object of member id -> weight
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Full sweep: communities x uptake levels x mechanisms
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Root output directory; results go to <out>/<config-hash>/
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Reuse finished communities of an interrupted run
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write every allocation (large)
        #[arg(long)]
        write_allocations: bool,
        /// Disable data parallelism
        #[arg(long)]
        sequential: bool,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ingest(meters: &Path, tariffs: &Path, force: bool) -> Result<Community> {
    let community = ingest_meter_csv(meters, tariffs, force)?;
    log::info!(
        "{} members, {} intervals from {}",
        community.len(),
        community.axis.count,
        meters.display()
    );
    Ok(community)
}

fn gen_community(config: Option<&Path>, index: usize, uptake: f64, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config, seed)?;
    if index >= cfg.communities {
        log::warn!("index {index} is outside the configured {} communities", cfg.communities);
    }
    let community = generate_community(&cfg, index, uptake)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_meters(&community, &out.join("meters.csv"))?;
    write_tariffs(&community, &out.join("tariffs.json"))?;
    log::info!("wrote community {index} at uptake {uptake} to {}", out.display());
    Ok(())
}

fn allocate(
    meters: &Path,
    tariffs: &Path,
    mechanism: Mechanism,
    out: &Path,
    force: bool,
    window_days: i64,
) -> Result<()> {
    let community = ingest(meters, tariffs, force)?;
    let ctx = MarketContext::new(&community)?
        .with_priority_window(chrono::TimeDelta::days(window_days));
    let outcomes = run_mechanism(&community, mechanism, &ctx, Execution::default())?;
    let inverted = outcomes.iter().filter(|o| o.flags.price_inversion).count();
    if inverted > 0 {
        log::warn!("{inverted} intervals cleared with inverted prices");
    }
    write_allocations(&community, &outcomes, out)?;
    log::info!(
        "{mechanism}: {:.3} kWh traded locally",
        outcomes.iter().map(|o| o.community_energy).sum::<f64>()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bill(
    meters: &Path,
    tariffs: &Path,
    allocations: &Path,
    out: &Path,
    scenario: &str,
    mechanism: &str,
    pmo_fee: f64,
    force: bool,
) -> Result<()> {
    let community = ingest(meters, tariffs, force)?;
    let ctx = MarketContext::new(&community)?.with_pmo_fee(pmo_fee);
    let outcomes = read_allocations(allocations, &community)?;
    let mut rows = Vec::with_capacity(2 * community.len());
    for (i, m) in community.members.iter().enumerate() {
        let base = ctx.bill_without_csc(&community, i);
        rows.push(BillRow::new(&m.id, scenario, "none", &base, 0.0));
    }
    for (i, m) in community.members.iter().enumerate() {
        let base = ctx.bill_without_csc(&community, i);
        let with = ctx.bill_with_csc(&community, i, &outcomes)?;
        rows.push(BillRow::new(&m.id, scenario, mechanism, &with, base.total - with.total));
    }
    write_bills(&rows, out)?;
    Ok(())
}

/// Splits a sweep label `c0003-u0.40` into community and uptake.
fn parse_scenario(label: &str) -> (String, Option<f64>) {
    if let Some((c, u)) = label.split_once("-u") {
        if let Ok(u) = u.parse() {
            return (c.to_owned(), Some(u));
        }
    }
    (label.to_owned(), None)
}

fn fairness(bills: &Path, meters: &Path, out: &Path, weights: Option<&Path>) -> Result<()> {
    let meter_data = csc_sim::io::read_meters(meters)?;
    let ids: Vec<MemberId> = meter_data.members.iter().map(|(id, ..)| id.clone()).collect();
    let net: Vec<Vec<f64>> = meter_data
        .members
        .iter()
        .map(|(_, imp, exp)| exp.iter().zip(imp).map(|(e, i)| e - i).collect())
        .collect();
    let contributions = contributions(&net);
    let weights: Option<HashMap<MemberId, f64>> = match weights {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };

    // (scenario, mechanism) -> member -> utility, in file order
    let mut groups: BTreeMap<(String, String), HashMap<String, f64>> = BTreeMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for row in read_bills(bills)? {
        if row.mechanism == "none" {
            continue;
        }
        let key = (row.scenario.clone(), row.mechanism.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().insert(row.member_id, row.utility);
    }

    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let utilities = &groups[&key];
        let values = ids
            .iter()
            .map(|id| {
                utilities
                    .get(&id.0)
                    .copied()
                    .with_context(|| format!("member {id} has no bill in {} / {}", key.0, key.1))
            })
            .collect::<Result<Vec<f64>>>()?;
        if utilities.len() != ids.len() {
            bail!("bills for {} / {} name members absent from the meters", key.0, key.1);
        }
        let report = FairnessReport::compute(
            &UtilityVector::new(ids.clone(), values),
            contributions.clone(),
            weights.as_ref(),
        )?;
        let (community_id, uptake) = parse_scenario(&key.0);
        rows.push(FairnessRow {
            community_id,
            uptake,
            mechanism: key.1,
            jain: report.jain,
            min_max: report.min_max,
            merit_index: report.meritocratic_index,
            social_welfare: report.social_welfare,
            weighted_utility: report.weighted_utility,
        });
    }
    write_fairness(&rows, out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: &Path,
    out: &Path,
    jobs: Option<usize>,
    resume: bool,
    seed: Option<u64>,
    write_allocations: bool,
    sequential: bool,
) -> Result<()> {
    let cfg = load_config(Some(config), seed)?;
    let opts = SweepOptions {
        out_dir: out.to_owned(),
        jobs,
        resume,
        write_allocations,
        execution: if sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    log::info!(
        "sweep: {} communities x {} uptake levels x {} mechanisms",
        cfg.communities,
        cfg.uptake_levels.len(),
        cfg.mechanisms.len()
    );
    let (dir, sweep) = run_sweep(&cfg, &opts)?;
    log::info!("finished in {:.1}s; results in {}", sweep.runtime.as_secs_f64(), dir.display());
    println!("{}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match Cli::parse().command {
        Command::GenCommunity {
            config,
            index,
            uptake,
            out,
            seed,
        } => gen_community(config.as_deref(), index, uptake, &out, seed),
        Command::Allocate {
            meters,
            tariffs,
            mechanism,
            out,
            force,
            priority_window_days,
        } => allocate(&meters, &tariffs, mechanism, &out, force, priority_window_days),
        Command::Bill {
            meters,
            tariffs,
            allocations,
            out,
            scenario,
            mechanism,
            pmo_fee,
            force,
        } => bill(&meters, &tariffs, &allocations, &out, &scenario, &mechanism, pmo_fee, force),
        Command::Fairness {
            bills,
            meters,
            out,
            weights,
        } => fairness(&bills, &meters, &out, weights.as_deref()),
        Command::Simulate {
            config,
            out,
            jobs,
            resume,
            seed,
            write_allocations,
            sequential,
        } => simulate(&config, &out, jobs, resume, seed, write_allocations, sequential),
    }
}
