use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    csv_writer, write_bill_rows, write_fairness_rows, BillRow, FairnessRow, ALLOCATION_HEADER,
    BILL_HEADER, FAIRNESS_HEADER,
};
use crate::scenario::ScenarioConfig;

use super::aggregate::{fairness_matrix, savings_profile, summary};
use super::{community_label, scenario_label, SweepResult};

/// Artifacts written by every sweep. `allocations.csv` is added on request.
pub const OUTPUT_FILES: [&str; 7] = [
    "bills.csv",
    "fairness.csv",
    "summary.csv",
    "savings_profile.csv",
    "fairness_matrix.csv",
    "fairness_matrix.json",
    "manifest.json",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn uptake(u: f64) -> String {
    format!("{u:.2}")
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_name: &'static str,
    crate_version: &'static str,
    config_hash: &'a str,
    seed: u64,
    config: &'a ScenarioConfig,
    files: Vec<&'a str>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::json(path))?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

fn csv_file(
    dir: &Path,
    name: &str,
    header: &[&str],
    body: impl FnOnce(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let mut w = csv_writer(&path)?;
    w.write_record(header).map_err(Error::csv(&path))?;
    body(&mut w).map_err(Error::csv(&path))?;
    w.flush().map_err(Error::io(&path))
}

fn concat_allocations(dir: &Path, parts: &[impl AsRef<Path>]) -> Result<()> {
    let path = dir.join("allocations.csv");
    let mut out = BufWriter::new(File::create(&path).map_err(Error::io(&path))?);
    let header: Vec<&str> = ["community_id", "uptake", "mechanism"]
        .into_iter()
        .chain(ALLOCATION_HEADER)
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(Error::io(&path))?;
    for part in parts {
        let part = part.as_ref();
        let mut r = BufReader::new(File::open(part).map_err(Error::io(part))?);
        io::copy(&mut r, &mut out).map_err(Error::io(&path))?;
    }
    out.flush().map_err(Error::io(&path))
}

/// Writes all aggregated artifacts of `sweep` into `dir`. Rows are ordered by
/// (community, uptake, mechanism), so the bytes never depend on scheduling.
pub fn write_outputs(
    sweep: &SweepResult,
    dir: &Path,
    allocation_parts: Option<&[impl AsRef<Path>]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let cfg = &sweep.config;

    if let Some(parts) = allocation_parts {
        concat_allocations(dir, parts)?;
    }

    csv_file(dir, "bills.csv", &BILL_HEADER, |w| {
        for c in &sweep.communities {
            for slice in &c.uptakes {
                let label = scenario_label(c.index, slice.uptake);
                write_bill_rows(
                    w,
                    slice
                        .members
                        .iter()
                        .map(|m| BillRow::new(&m.id, &label, "none", &m.baseline, 0.0)),
                )?;
                for run in &slice.runs {
                    write_bill_rows(
                        w,
                        slice.members.iter().enumerate().map(|(i, m)| {
                            BillRow::new(
                                &m.id,
                                &label,
                                run.mechanism.as_str(),
                                &run.bills[i],
                                run.utilities[i],
                            )
                        }),
                    )?;
                }
            }
        }
        Ok(())
    })?;

    csv_file(dir, "fairness.csv", &FAIRNESS_HEADER, |w| {
        write_fairness_rows(
            w,
            sweep.runs().map(|(index, slice, run)| FairnessRow {
                community_id: community_label(index),
                uptake: Some(slice.uptake),
                mechanism: run.mechanism.as_str().to_owned(),
                jain: run.report.jain,
                min_max: run.report.min_max,
                merit_index: run.report.meritocratic_index,
                social_welfare: run.report.social_welfare,
                weighted_utility: run.report.weighted_utility,
            }),
        )
    })?;

    csv_file(
        dir,
        "summary.csv",
        &[
            "mechanism",
            "uptake",
            "mean_saving_pct",
            "mean_consumer_saving_pct",
            "mean_social_welfare_eur",
            "mean_traded_kwh",
            "inverted_intervals",
        ],
        |w| {
            for r in summary(sweep) {
                w.write_record([
                    r.mechanism.as_str().to_owned(),
                    uptake(r.uptake),
                    opt(r.mean_saving_pct),
                    opt(r.mean_consumer_saving_pct),
                    r.mean_social_welfare_eur.to_string(),
                    r.mean_traded_kwh.to_string(),
                    r.inverted_intervals.to_string(),
                ])?;
            }
            Ok(())
        },
    )?;

    let mut profiles = Vec::new();
    for &mechanism in &cfg.mechanisms {
        for &u in &cfg.uptake_levels {
            profiles.push((mechanism, u, savings_profile(sweep, mechanism, u)?));
        }
    }
    csv_file(
        dir,
        "savings_profile.csv",
        &["mechanism", "uptake", "rank", "mean_saving_pct", "samples"],
        |w| {
            for (mechanism, u, profile) in &profiles {
                for r in profile {
                    w.write_record([
                        mechanism.as_str().to_owned(),
                        uptake(*u),
                        r.rank.to_string(),
                        opt(r.mean_saving_pct),
                        r.samples.to_string(),
                    ])?;
                }
            }
            Ok(())
        },
    )?;

    let matrix = fairness_matrix(sweep);
    csv_file(
        dir,
        "fairness_matrix.csv",
        &["mechanism", "uptake", "jain", "min_max", "merit", "social_welfare"],
        |w| {
            for c in &matrix {
                w.write_record([
                    c.mechanism.as_str().to_owned(),
                    uptake(c.uptake),
                    opt(c.jain),
                    opt(c.min_max),
                    opt(c.merit),
                    opt(c.social_welfare),
                ])?;
            }
            Ok(())
        },
    )?;
    write_json(&dir.join("fairness_matrix.json"), &matrix)?;

    let mut files: Vec<&str> = OUTPUT_FILES.to_vec();
    if allocation_parts.is_some() {
        files.insert(0, "allocations.csv");
    }
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            crate_name: env!("CARGO_PKG_NAME"),
            crate_version: env!("CARGO_PKG_VERSION"),
            config_hash: &sweep.config_hash,
            seed: cfg.seed,
            config: cfg,
            files,
        },
    )
}
