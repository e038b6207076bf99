//! File formats: meter CSV, tariff JSON, allocation / bill / fairness CSVs.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationOutcome, Mechanism, OutcomeFlags};
use crate::billing::BillBreakdown;
use crate::error::{Error, Result};
use crate::fairness::Indicator;
use crate::model::{
    Community, EnergySeries, FiscalStatus, Member, MemberId, TariffId, TimeAxis,
};
use crate::tariff::{TariffSchedule, TariffTable};

pub const METER_HEADER: [&str; 4] = ["member_id", "timestamp", "import_kwh", "export_kwh"];
pub const ALLOCATION_HEADER: [&str; 6] = [
    "timestamp",
    "member_id",
    "role",
    "allocated_kwh",
    "price_eur_per_kwh",
    "flags",
];
pub const BILL_HEADER: [&str; 10] = [
    "member_id",
    "scenario",
    "mechanism",
    "energy_cost",
    "excise_cost",
    "network_cost",
    "csc_cost",
    "producer_revenue",
    "total",
    "utility",
];
pub const FAIRNESS_HEADER: [&str; 8] = [
    "community_id",
    "uptake",
    "mechanism",
    "jain",
    "min_max",
    "merit_index",
    "social_welfare",
    "weighted_utility",
];

/// Tariff table key applied to members without an entry of their own.
pub const DEFAULT_TARIFF_KEY: &str = "default";

pub fn timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Euro amount rounded to cents, without a negative zero.
pub fn money(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn indicator(i: Indicator) -> String {
    i.value().map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(Error::io(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(Error::io(path))?;
    Ok(csv::Reader::from_reader(BufReader::new(file)))
}

fn malformed(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_owned(),
        row,
        message: message.into(),
    }
}

// --- meters -----------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct MeterRow {
    member_id: String,
    timestamp: DateTime<Utc>,
    import_kwh: f64,
    export_kwh: f64,
}

/// Series parsed from a meter CSV, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterData {
    pub axis: TimeAxis,
    pub members: Vec<(MemberId, Vec<f64>, Vec<f64>)>,
}

pub fn write_meters(community: &Community, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = Error::csv;
    w.write_record(METER_HEADER).map_err(err(path))?;
    let stamps: Vec<String> = (0..community.axis.count)
        .map(|t| timestamp(community.axis.timestamp(t)))
        .collect();
    for m in &community.members {
        for (t, stamp) in stamps.iter().enumerate() {
            w.write_record([
                m.id.0.as_str(),
                stamp,
                &m.imports.values[t].to_string(),
                &m.exports.values[t].to_string(),
            ])
            .map_err(err(path))?;
        }
    }
    w.flush().map_err(Error::io(path))
}

/// (row, timestamp, import, export) as read.
type RawMeterRow = (usize, DateTime<Utc>, f64, f64);

/// Parses a meter CSV. Timestamps must strictly increase per member and every
/// member must cover the same uniformly spaced intervals.
pub fn read_meters(path: &Path) -> Result<MeterData> {
    let mut reader = csv_reader(path)?;
    let mut order: Vec<MemberId> = Vec::new();
    let mut rows: HashMap<MemberId, Vec<RawMeterRow>> = HashMap::new();
    for (i, record) in reader.deserialize::<MeterRow>().enumerate() {
        // header is row 1
        let row = i + 2;
        let r = record.map_err(|e| malformed(path, row, e.to_string()))?;
        let id = MemberId(r.member_id);
        let series = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        if let Some(&(_, last, _, _)) = series.last() {
            if r.timestamp <= last {
                return Err(Error::NonMonotonic {
                    path: path.to_owned(),
                    member: id,
                    row,
                });
            }
        }
        series.push((row, r.timestamp, r.import_kwh, r.export_kwh));
    }
    if order.is_empty() {
        return Err(malformed(path, 1, "no meter rows"));
    }

    let start = rows.values().map(|s| s[0].1).min().expect("non-empty");
    let step = rows
        .values()
        .filter(|s| s.len() > 1)
        .map(|s| s[1].1 - s[0].1)
        .min()
        .unwrap_or(TimeDelta::minutes(15));
    let count = rows.values().map(Vec::len).max().expect("non-empty");
    let axis = TimeAxis::new(start, step, count)
        .map_err(|e| malformed(path, 1, e.to_string()))?;

    let mut members = Vec::with_capacity(order.len());
    for id in order {
        let series = &rows[&id];
        if series.len() != count {
            return Err(malformed(
                path,
                series.last().map_or(1, |r| r.0),
                format!(
                    "length mismatch: member {id} has {} intervals, expected {count}",
                    series.len()
                ),
            ));
        }
        for (k, &(row, ts, _, _)) in series.iter().enumerate() {
            if ts != axis.timestamp(k) {
                return Err(malformed(
                    path,
                    row,
                    format!("member {id}: timestamp {} is off the {step} grid", timestamp(ts)),
                ));
            }
        }
        let imports = series.iter().map(|r| r.2).collect();
        let exports = series.iter().map(|r| r.3).collect();
        members.push((id, imports, exports));
    }
    Ok(MeterData { axis, members })
}

// --- tariffs ----------------------------------------------------------------

/// One entry of the tariff JSON: schedule fields plus the tax status of the
/// members billed under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffEntry {
    #[serde(flatten)]
    pub schedule: TariffSchedule,
    #[serde(default)]
    pub vat_liable: bool,
    #[serde(default)]
    pub excise_liable: bool,
}

pub type TariffFile = BTreeMap<String, TariffEntry>;

pub fn read_tariffs(path: &Path) -> Result<TariffFile> {
    let file = File::open(path).map_err(Error::io(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(Error::json(path))
}

/// Writes one entry per member, keyed by member id.
pub fn write_tariffs(community: &Community, path: &Path) -> Result<()> {
    let mut out = TariffFile::new();
    for m in &community.members {
        let schedule = community
            .tariff_of(m)
            .ok_or_else(|| Error::UnknownMember {
                member: m.id.clone(),
            })?
            .clone();
        out.insert(
            m.id.0.clone(),
            TariffEntry {
                schedule,
                vat_liable: m.fiscal.vat_liable,
                excise_liable: m.fiscal.excise_liable,
            },
        );
    }
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &out).map_err(Error::json(path))?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

/// Builds a community from parsed meters and a tariff file. Each member uses
/// the entry keyed by its id, else the `default` entry.
pub fn assemble_community(meters: MeterData, tariffs: &TariffFile) -> Result<Community> {
    let table: TariffTable = tariffs
        .iter()
        .map(|(k, e)| (TariffId(k.clone()), e.schedule.clone()))
        .collect();
    let members = meters
        .members
        .into_iter()
        .map(|(id, imports, exports)| {
            let key = if tariffs.contains_key(&id.0) {
                id.0.clone()
            } else if tariffs.contains_key(DEFAULT_TARIFF_KEY) {
                DEFAULT_TARIFF_KEY.to_owned()
            } else {
                return Err(Error::UnknownMember { member: id });
            };
            let entry = &tariffs[&key];
            Ok(Member {
                id,
                imports: EnergySeries::new(meters.axis, imports),
                exports: EnergySeries::new(meters.axis, exports),
                tariff_id: TariffId(key),
                fiscal: FiscalStatus {
                    vat_liable: entry.vat_liable,
                    excise_liable: entry.excise_liable,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Community {
        axis: meters.axis,
        members,
        tariffs: table,
    })
}

/// Reads and validates a community. Validation findings are fatal unless
/// `force` is set, in which case they are logged.
pub fn ingest_meter_csv(meters: &Path, tariffs: &Path, force: bool) -> Result<Community> {
    let community = assemble_community(read_meters(meters)?, &read_tariffs(tariffs)?)?;
    let report = community.validate();
    if !report.is_empty() {
        if !force {
            return Err(Error::Validation(report));
        }
        for finding in &report.findings {
            log::warn!("{}: {finding}", meters.display());
        }
    }
    Ok(community)
}

// --- allocations ------------------------------------------------------------

fn allocation_rows<'a>(
    community: &'a Community,
    outcome: &'a AllocationOutcome,
) -> impl Iterator<Item = [String; 6]> + 'a {
    let stamp = timestamp(community.axis.timestamp(outcome.t));
    let price = outcome.price.map(|p| p.to_string()).unwrap_or_default();
    let flags = outcome.flags.labels().join("|");
    let sides = [
        ("consumer", &outcome.consumer_alloc),
        ("producer", &outcome.producer_alloc),
    ];
    sides.into_iter().flat_map(move |(role, alloc)| {
        let (stamp, price, flags) = (stamp.clone(), price.clone(), flags.clone());
        alloc
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(move |(i, a)| {
                [
                    stamp.clone(),
                    community.members[i].id.0.clone(),
                    role.to_owned(),
                    a.to_string(),
                    price.clone(),
                    flags.clone(),
                ]
            })
    })
}

/// Writes every positive allocation, one row per member and role.
pub fn write_allocations(
    community: &Community,
    outcomes: &[AllocationOutcome],
    path: &Path,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ALLOCATION_HEADER).map_err(Error::csv(path))?;
    for outcome in outcomes {
        for row in allocation_rows(community, outcome) {
            w.write_record(&row).map_err(Error::csv(path))?;
        }
    }
    w.flush().map_err(Error::io(path))
}

/// Allocation rows prefixed with the sweep coordinates.
pub(crate) fn write_tagged_allocations<W: Write>(
    w: &mut csv::Writer<W>,
    community_id: &str,
    uptake: f64,
    mechanism: Mechanism,
    community: &Community,
    outcomes: &[AllocationOutcome],
) -> csv::Result<()> {
    let uptake = format!("{uptake:.2}");
    for outcome in outcomes {
        for row in allocation_rows(community, outcome) {
            w.write_record(
                [community_id, uptake.as_str(), mechanism.as_str()]
                    .into_iter()
                    .chain(row.iter().map(String::as_str)),
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct AllocationRow {
    timestamp: DateTime<Utc>,
    member_id: String,
    role: String,
    allocated_kwh: f64,
    price_eur_per_kwh: Option<f64>,
    flags: String,
}

/// Rebuilds per-interval outcomes for `community` from an allocation CSV.
/// Intervals without rows traded nothing.
pub fn read_allocations(path: &Path, community: &Community) -> Result<Vec<AllocationOutcome>> {
    let n = community.len();
    let index: HashMap<&str, usize> = community
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.0.as_str(), i))
        .collect();
    let mut outcomes: Vec<AllocationOutcome> = (0..community.axis.count)
        .map(|t| AllocationOutcome::unpriced(t, vec![0.0; n], vec![0.0; n], 0.0))
        .collect();
    let axis = community.axis;
    let step_ms = axis.step.num_milliseconds();

    let mut reader = csv_reader(path)?;
    for (i, record) in reader.deserialize::<AllocationRow>().enumerate() {
        let row = i + 2;
        let r = record.map_err(|e| malformed(path, row, e.to_string()))?;
        let offset = (r.timestamp - axis.start).num_milliseconds();
        if offset < 0 || offset % step_ms != 0 || (offset / step_ms) as usize >= axis.count {
            return Err(malformed(path, row, "timestamp is not an interval of the meter axis"));
        }
        let t = (offset / step_ms) as usize;
        let &m = index
            .get(r.member_id.as_str())
            .ok_or_else(|| malformed(path, row, format!("unknown member {}", r.member_id)))?;
        let outcome = &mut outcomes[t];
        match r.role.as_str() {
            "consumer" => outcome.consumer_alloc[m] = r.allocated_kwh,
            "producer" => outcome.producer_alloc[m] = r.allocated_kwh,
            other => return Err(malformed(path, row, format!("unknown role {other:?}"))),
        }
        outcome.price = outcome.price.or(r.price_eur_per_kwh);
        let flags = OutcomeFlags::from_labels(&r.flags).map_err(|e| malformed(path, row, e))?;
        outcome.flags.price_inversion |= flags.price_inversion;
    }
    for o in &mut outcomes {
        o.community_energy = o.consumer_alloc.iter().sum();
    }
    Ok(outcomes)
}

// --- bills ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillRow {
    pub member_id: String,
    pub scenario: String,
    pub mechanism: String,
    pub energy_cost: f64,
    pub excise_cost: f64,
    pub network_cost: f64,
    pub csc_cost: f64,
    pub producer_revenue: f64,
    pub total: f64,
    pub utility: f64,
}

impl BillRow {
    pub fn new(
        member_id: &MemberId,
        scenario: &str,
        mechanism: &str,
        bill: &BillBreakdown,
        utility: f64,
    ) -> Self {
        Self {
            member_id: member_id.0.clone(),
            scenario: scenario.to_owned(),
            mechanism: mechanism.to_owned(),
            energy_cost: bill.energy_cost,
            excise_cost: bill.excise_cost,
            network_cost: bill.network_cost,
            csc_cost: bill.csc_cost,
            producer_revenue: bill.producer_revenue,
            total: bill.total,
            utility,
        }
    }

    fn record(&self) -> [String; 10] {
        [
            self.member_id.clone(),
            self.scenario.clone(),
            self.mechanism.clone(),
            money(self.energy_cost),
            money(self.excise_cost),
            money(self.network_cost),
            money(self.csc_cost),
            money(self.producer_revenue),
            money(self.total),
            money(self.utility),
        ]
    }
}

pub(crate) fn write_bill_rows<W: Write>(
    w: &mut csv::Writer<W>,
    rows: impl IntoIterator<Item = BillRow>,
) -> csv::Result<()> {
    for row in rows {
        w.write_record(row.record())?;
    }
    Ok(())
}

/// Writes bills with money rounded to cents.
pub fn write_bills(rows: &[BillRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(BILL_HEADER).map_err(Error::csv(path))?;
    write_bill_rows(&mut w, rows.iter().cloned()).map_err(Error::csv(path))?;
    w.flush().map_err(Error::io(path))
}

pub fn read_bills(path: &Path) -> Result<Vec<BillRow>> {
    let mut reader = csv_reader(path)?;
    reader
        .deserialize::<BillRow>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| malformed(path, i + 2, e.to_string())))
        .collect()
}

// --- fairness ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessRow {
    pub community_id: String,
    pub uptake: Option<f64>,
    pub mechanism: String,
    pub jain: Indicator,
    pub min_max: Indicator,
    pub merit_index: Indicator,
    pub social_welfare: f64,
    pub weighted_utility: Option<f64>,
}

impl FairnessRow {
    fn record(&self) -> [String; 8] {
        [
            self.community_id.clone(),
            self.uptake.map(|u| format!("{u:.2}")).unwrap_or_default(),
            self.mechanism.clone(),
            indicator(self.jain),
            indicator(self.min_max),
            indicator(self.merit_index),
            self.social_welfare.to_string(),
            self.weighted_utility.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }
}

pub(crate) fn write_fairness_rows<W: Write>(
    w: &mut csv::Writer<W>,
    rows: impl IntoIterator<Item = FairnessRow>,
) -> csv::Result<()> {
    for row in rows {
        w.write_record(row.record())?;
    }
    Ok(())
}

pub fn write_fairness(rows: &[FairnessRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(FAIRNESS_HEADER).map_err(Error::csv(path))?;
    write_fairness_rows(&mut w, rows.iter().cloned()).map_err(Error::csv(path))?;
    w.flush().map_err(Error::io(path))
}
