//! Scenario sweep: every (community, uptake, mechanism) is generated,
//! allocated, billed and scored, then aggregated into savings profiles and
//! fairness matrices.

mod aggregate;
mod output;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{run_mechanism, AllocationOutcome, Mechanism};
use crate::billing::{BillBreakdown, MarketContext};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fairness::{contributions, FairnessReport, UtilityVector};
use crate::io::write_tagged_allocations;
use crate::model::{MemberId, Role};
use crate::scenario::{generate_community, ScenarioConfig};

pub use aggregate::{
    fairness_matrix, mean_saving_pct, savings_profile, FairnessCell, RankSaving, SavingScope,
    SummaryRow,
};
pub use output::{write_outputs, OUTPUT_FILES};

/// Annual saving of one member: relative to the baseline bill when that bill
/// is positive, in euros otherwise (net producers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Saving {
    Percent(f64),
    Absolute(f64),
}

impl Saving {
    pub fn new(utility: f64, baseline: f64) -> Self {
        if baseline > 0.0 {
            Saving::Percent(100.0 * utility / baseline)
        } else {
            Saving::Absolute(utility)
        }
    }

    pub fn percent(self) -> Option<f64> {
        match self {
            Saving::Percent(p) => Some(p),
            Saving::Absolute(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub id: MemberId,
    pub role: Role,
    /// Annual grid import, kWh.
    pub consumption_kwh: f64,
    pub baseline: BillBreakdown,
}

/// Outcome of one mechanism on one community at one uptake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mechanism: Mechanism,
    pub bills: Vec<BillBreakdown>,
    pub utilities: Vec<f64>,
    pub savings: Vec<Saving>,
    pub report: FairnessReport,
    pub traded_kwh: f64,
    pub inverted_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UptakeResult {
    pub uptake: f64,
    pub members: Vec<MemberInfo>,
    /// Runs in configuration order of mechanisms.
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityResult {
    pub index: usize,
    pub uptakes: Vec<UptakeResult>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub communities: Vec<CommunityResult>,
    pub runtime: Duration,
}

impl SweepResult {
    /// All runs in (community, uptake, mechanism) order.
    pub fn runs(&self) -> impl Iterator<Item = (usize, &UptakeResult, &RunRecord)> {
        self.communities.iter().flat_map(|c| {
            c.uptakes
                .iter()
                .flat_map(move |u| u.runs.iter().map(move |r| (c.index, u, r)))
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Root output directory; artifacts go to `<out_dir>/<config-hash>/`.
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    pub resume: bool,
    pub write_allocations: bool,
    pub execution: Execution,
}

impl SweepOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            jobs: None,
            resume: false,
            write_allocations: false,
            execution: Execution::default(),
        }
    }
}

/// First 16 hex digits of the SHA-256 of the config's JSON form.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    let mut hex = hex::encode(Sha256::digest(&json));
    hex.truncate(16);
    hex
}

pub fn scenario_label(community: usize, uptake: f64) -> String {
    format!("c{community:04}-u{uptake:.2}")
}

pub fn community_label(community: usize) -> String {
    format!("c{community:04}")
}

/// Generates, allocates, bills and scores one community at every uptake.
/// When `allocations` is given, every positive allocation is streamed to it.
fn run_community<W: Write>(
    cfg: &ScenarioConfig,
    index: usize,
    exec: Execution,
    mut allocations: Option<&mut csv::Writer<W>>,
) -> Result<CommunityResult> {
    let mut uptakes = Vec::with_capacity(cfg.uptake_levels.len());
    for &uptake in &cfg.uptake_levels {
        let community = generate_community(cfg, index, uptake)?;
        let ctx = MarketContext::new(&community)?
            .with_pmo_fee(cfg.pmo_fee)
            .with_priority_window(TimeDelta::days(cfg.priority_window_days));
        let members: Vec<MemberInfo> = (0..community.len())
            .map(|i| {
                let m = &community.members[i];
                MemberInfo {
                    id: m.id.clone(),
                    role: m.role(),
                    consumption_kwh: m.imports.total(),
                    baseline: ctx.bill_without_csc(&community, i),
                }
            })
            .collect();
        let net: Vec<Vec<f64>> = community
            .members
            .iter()
            .map(|m| m.net_injection_series())
            .collect();
        let contributions = contributions(&net);
        let ids: Vec<MemberId> = members.iter().map(|m| m.id.clone()).collect();
        let keep = allocations.is_some();

        let results = exec.try_map_range(cfg.mechanisms.len(), |k| {
            let mechanism = cfg.mechanisms[k];
            let outcomes = run_mechanism(&community, mechanism, &ctx, exec)?;
            let bills = (0..community.len())
                .map(|i| ctx.bill_with_csc(&community, i, &outcomes))
                .collect::<Result<Vec<_>>>()?;
            let utilities: Vec<f64> = members
                .iter()
                .zip(&bills)
                .map(|(m, b)| m.baseline.total - b.total)
                .collect();
            let savings = members
                .iter()
                .zip(&utilities)
                .map(|(m, &u)| Saving::new(u, m.baseline.total))
                .collect();
            let report = FairnessReport::compute(
                &UtilityVector::new(ids.clone(), utilities.clone()),
                contributions.clone(),
                None,
            )?;
            let record = RunRecord {
                mechanism,
                bills,
                utilities,
                savings,
                report,
                traded_kwh: outcomes.iter().map(|o| o.community_energy).sum(),
                inverted_intervals: outcomes.iter().filter(|o| o.flags.price_inversion).count(),
            };
            Ok::<_, Error>((record, keep.then_some(outcomes)))
        })?;

        let mut runs = Vec::with_capacity(results.len());
        for (record, outcomes) in results {
            if let (Some(w), Some(outcomes)) = (allocations.as_deref_mut(), outcomes) {
                write_outcomes(w, index, uptake, record.mechanism, &community, &outcomes)?;
            }
            runs.push(record);
        }
        uptakes.push(UptakeResult {
            uptake,
            members,
            runs,
        });
    }
    Ok(CommunityResult { index, uptakes })
}

fn write_outcomes<W: Write>(
    w: &mut csv::Writer<W>,
    index: usize,
    uptake: f64,
    mechanism: Mechanism,
    community: &crate::model::Community,
    outcomes: &[AllocationOutcome],
) -> Result<()> {
    write_tagged_allocations(w, &community_label(index), uptake, mechanism, community, outcomes)
        .map_err(|e| Error::Csv {
            path: PathBuf::from("<allocations>"),
            source: e,
        })
}

/// Runs the sweep without touching the file system.
pub fn run_sweep_in_memory(
    cfg: &ScenarioConfig,
    execution: Execution,
    jobs: Option<usize>,
) -> Result<SweepResult> {
    cfg.validate()?;
    let started = Instant::now();
    let communities = execution.with_jobs(jobs, || {
        execution.try_map_range(cfg.communities, |k| {
            let r = run_community::<std::io::Sink>(cfg, k, execution, None);
            log::info!("community {k} done");
            r
        })
    })?;
    Ok(SweepResult {
        config: cfg.clone(),
        config_hash: config_hash(cfg),
        communities,
        runtime: started.elapsed(),
    })
}

/// Directory holding the artifacts of `cfg` under `root`.
pub fn output_dir(root: &Path, cfg: &ScenarioConfig) -> PathBuf {
    root.join(config_hash(cfg))
}

fn partial_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("community_{index:04}.json")),
        dir.join(format!("community_{index:04}.allocations.csv")),
    )
}

fn write_atomically(path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    f(&tmp)?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

fn load_partial(path: &Path) -> Result<CommunityResult> {
    let file = File::open(path).map_err(Error::io(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(Error::json(path))
}

fn run_and_flush(cfg: &ScenarioConfig, index: usize, opts: &SweepOptions, partial: &Path) -> Result<CommunityResult> {
    let (json, alloc) = partial_paths(partial, index);
    if opts.resume && json.exists() && (!opts.write_allocations || alloc.exists()) {
        log::info!("community {index}: resumed from {}", json.display());
        return load_partial(&json);
    }
    let result = if opts.write_allocations {
        let mut result = None;
        write_atomically(&alloc, |tmp| {
            let file = File::create(tmp).map_err(Error::io(tmp))?;
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(BufWriter::new(file));
            result = Some(run_community(cfg, index, opts.execution, Some(&mut w))?);
            w.flush().map_err(Error::io(tmp))
        })?;
        result.expect("set on success")
    } else {
        run_community::<std::io::Sink>(cfg, index, opts.execution, None)?
    };
    // the JSON marks the community complete, so it is written last
    write_atomically(&json, |tmp| {
        let file = File::create(tmp).map_err(Error::io(tmp))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &result).map_err(Error::json(tmp))?;
        w.flush().map_err(Error::io(tmp))
    })?;
    log::info!("community {index} done");
    Ok(result)
}

/// Runs the sweep, flushing each finished community to
/// `<out>/<hash>/partial/` so an interrupted run can resume, then writes the
/// aggregated artifacts. Returns the artifact directory with the result.
pub fn run_sweep(cfg: &ScenarioConfig, opts: &SweepOptions) -> Result<(PathBuf, SweepResult)> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = output_dir(&opts.out_dir, cfg);
    let partial = dir.join("partial");
    fs::create_dir_all(&partial).map_err(Error::io(&partial))?;

    let communities = opts.execution.with_jobs(opts.jobs, || {
        opts.execution
            .try_map_range(cfg.communities, |k| run_and_flush(cfg, k, opts, &partial))
    })?;
    let sweep = SweepResult {
        config: cfg.clone(),
        config_hash: config_hash(cfg),
        communities,
        runtime: started.elapsed(),
    };
    let allocation_parts: Option<Vec<PathBuf>> = opts
        .write_allocations
        .then(|| (0..cfg.communities).map(|k| partial_paths(&partial, k).1).collect());
    write_outputs(&sweep, &dir, allocation_parts.as_deref())?;
    Ok((dir, sweep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            communities: 2,
            members_per_community: 4,
            uptake_levels: vec![0.0, 0.5],
            days: 2,
            ..Default::default()
        }
    }

    #[test]
    fn hash_is_stable_and_config_sensitive() {
        let a = tiny();
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_eq!(config_hash(&a).len(), 16);
        let b = ScenarioConfig { seed: 7, ..tiny() };
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn zero_uptake_gives_zero_utilities_and_degenerate_markers() {
        let cfg = ScenarioConfig {
            communities: 1,
            members_per_community: 2,
            uptake_levels: vec![0.0],
            days: 1,
            ..Default::default()
        };
        let sweep = run_sweep_in_memory(&cfg, Execution::Sequential, None).unwrap();
        for (_, _, run) in sweep.runs() {
            assert!(run.utilities.iter().all(|&u| u == 0.0));
            assert!(run.report.jain.is_degenerate());
            assert!(run.report.min_max.is_degenerate());
            // consumers still carry (negative) contributions, so the index is defined
            assert_eq!(run.report.meritocratic_index, crate::fairness::Indicator::Value(0.0));
        }
    }

    #[test]
    fn welfare_equals_sum_of_utilities() {
        let sweep = run_sweep_in_memory(&tiny(), Execution::Parallel, Some(2)).unwrap();
        assert_eq!(sweep.runs().count(), 2 * 2 * 4);
        for (_, _, run) in sweep.runs() {
            assert_eq!(run.report.social_welfare, run.utilities.iter().sum::<f64>());
        }
    }

    #[test]
    fn execution_strategy_does_not_change_results() {
        let a = run_sweep_in_memory(&tiny(), Execution::Sequential, None).unwrap();
        let b = run_sweep_in_memory(&tiny(), Execution::Parallel, None).unwrap();
        assert_eq!(a.communities, b.communities);
    }

    #[test]
    fn resume_reproduces_outputs() {
        let root = tempfile::tempdir().unwrap();
        let mut opts = SweepOptions::new(root.path().join("full"));
        opts.write_allocations = true;
        let (full, _) = run_sweep(&tiny(), &opts).unwrap();

        opts.out_dir = root.path().join("resumed");
        let (resumed, _) = run_sweep(&tiny(), &opts).unwrap();
        // simulate an interruption after community 0
        let (json1, _) = partial_paths(&resumed.join("partial"), 1);
        fs::remove_file(json1).unwrap();
        for f in OUTPUT_FILES {
            let _ = fs::remove_file(resumed.join(f));
        }
        opts.resume = true;
        run_sweep(&tiny(), &opts).unwrap();

        for f in OUTPUT_FILES {
            assert_eq!(
                fs::read(full.join(f)).unwrap(),
                fs::read(resumed.join(f)).unwrap(),
                "{f}"
            );
        }
    }
}
