//! Community data model: time axis, metered series, members and validation.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tariff::{TariffSchedule, TariffTable};
use crate::EPSILON_KWH;

/// Number of 15-minute intervals in a 365-day year.
pub const INTERVALS_PER_YEAR: usize = 365 * 96;

/// Uniform sampling grid shared by every series of a community.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeAxis {
    pub start: DateTime<Utc>,
    pub step: TimeDelta,
    pub count: usize,
}

impl TimeAxis {
    pub fn new(start: DateTime<Utc>, step: TimeDelta, count: usize) -> Result<Self> {
        if step <= TimeDelta::zero() {
            return Err(Error::InvalidConfig("time step must be positive".into()));
        }
        if count == 0 {
            return Err(Error::InvalidConfig("time axis must not be empty".into()));
        }
        Ok(Self { start, step, count })
    }

    /// 15-minute axis covering `days` days from `start`.
    pub fn quarter_hourly(start: DateTime<Utc>, days: usize) -> Result<Self> {
        Self::new(start, TimeDelta::minutes(15), days * 96)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn timestamp(&self, t: usize) -> DateTime<Utc> {
        self.start + self.step * t as i32
    }

    pub fn step_hours(&self) -> f64 {
        self.step.num_milliseconds() as f64 / 3_600_000.0
    }

    /// Clock hour (fractional) at the start of interval `t`.
    pub fn hour_of_day(&self, t: usize) -> f64 {
        let secs = self.start.timestamp() + self.step.num_seconds() * t as i64;
        secs.rem_euclid(86_400) as f64 / 3600.0
    }

    /// Zero-based day index since the start of the axis.
    pub fn day_index(&self, t: usize) -> usize {
        let secs = self.step.num_seconds() * t as i64;
        (secs / 86_400) as usize
    }

    /// Number of whole intervals in `duration`.
    pub fn intervals_in(&self, duration: TimeDelta) -> usize {
        (duration.num_seconds() / self.step.num_seconds()).max(0) as usize
    }
}

/// Non-negative energy quantities (kWh), one per interval of the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub axis: TimeAxis,
    pub values: Vec<f64>,
}

impl EnergySeries {
    pub fn new(axis: TimeAxis, values: Vec<f64>) -> Self {
        Self { axis, values }
    }

    pub fn zeros(axis: TimeAxis) -> Self {
        Self {
            axis,
            values: vec![0.0; axis.count],
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, t: usize) -> Result<f64> {
        self.values.get(t).copied().ok_or(Error::IndexOutOfRange {
            index: t,
            count: self.values.len(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemberId(pub String);

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MemberId {
    fn from(s: &str) -> Self {
        MemberId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TariffId(pub String);

impl fmt::Display for TariffId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TariffId {
    fn from(s: &str) -> Self {
        TariffId(s.to_owned())
    }
}

/// Tax liabilities of a member acting as a producer. Residential members are
/// liable to neither.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiscalStatus {
    #[serde(default)]
    pub vat_liable: bool,
    #[serde(default)]
    pub excise_liable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Consumer,
    Producer,
    Prosumer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: MemberId,
    pub imports: EnergySeries,
    pub exports: EnergySeries,
    pub tariff_id: TariffId,
    pub fiscal: FiscalStatus,
}

impl Member {
    pub fn role(&self) -> Role {
        if self.exports.is_zero() {
            Role::Consumer
        } else if self.imports.is_zero() {
            Role::Producer
        } else {
            Role::Prosumer
        }
    }

    /// Signed net injection at `t`: positive when exporting.
    pub fn net_injection(&self, t: usize) -> Result<f64> {
        Ok(self.exports.get(t)? - self.imports.get(t)?)
    }

    pub fn net_injection_series(&self) -> Vec<f64> {
        self.exports
            .values
            .iter()
            .zip(&self.imports.values)
            .map(|(e, i)| e - i)
            .collect()
    }
}

/// Members sharing one time axis plus the tariffs they reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Community {
    pub axis: TimeAxis,
    pub members: Vec<Member>,
    pub tariffs: TariffTable,
}

impl Community {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn tariff_of(&self, member: &Member) -> Option<&TariffSchedule> {
        self.tariffs.get(&member.tariff_id)
    }

    /// Highest excise rate among the community's tariffs.
    pub fn max_excise(&self) -> f64 {
        self.members
            .iter()
            .filter_map(|m| self.tariff_of(m))
            .map(|s| s.excise_rate)
            .fold(0.0, f64::max)
    }

    pub fn imports_at(&self, t: usize) -> Vec<f64> {
        self.members.iter().map(|m| m.imports.values[t]).collect()
    }

    pub fn exports_at(&self, t: usize) -> Vec<f64> {
        self.members.iter().map(|m| m.exports.values[t]).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_community(&self.axis, &self.members, &self.tariffs)
    }
}

/// Signed net injection of `member` at interval `t`.
pub fn net_injection(member: &Member, t: usize) -> Result<f64> {
    member.net_injection(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    AxisMismatch {
        member: MemberId,
        series: &'static str,
    },
    LengthMismatch {
        member: MemberId,
        series: &'static str,
        expected: usize,
        found: usize,
    },
    NegativeValue {
        member: MemberId,
        series: &'static str,
        t: usize,
        value: f64,
    },
    SimultaneousFlow {
        member: MemberId,
        t: usize,
        import: f64,
        export: f64,
    },
    DanglingTariff {
        member: MemberId,
        tariff: TariffId,
    },
    InvalidTariff {
        tariff: TariffId,
        reason: String,
    },
    DuplicateMember {
        member: MemberId,
    },
    PriceInversion {
        t: usize,
        max_ask: f64,
        min_bid: f64,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::AxisMismatch { member, series } => {
                write!(f, "{member}: {series} series has a different time axis")
            }
            Finding::LengthMismatch {
                member,
                series,
                expected,
                found,
            } => write!(
                f,
                "{member}: {series} series has {found} values, axis has {expected} intervals"
            ),
            Finding::NegativeValue {
                member,
                series,
                t,
                value,
            } => write!(f, "{member}: negative {series} value {value} at interval {t}"),
            Finding::SimultaneousFlow {
                member,
                t,
                import,
                export,
            } => write!(
                f,
                "{member}: simultaneous import {import} and export {export} at interval {t}"
            ),
            Finding::DanglingTariff { member, tariff } => {
                write!(f, "{member}: tariff {tariff} is not in the tariff table")
            }
            Finding::InvalidTariff { tariff, reason } => write!(f, "tariff {tariff}: {reason}"),
            Finding::DuplicateMember { member } => write!(f, "{member}: duplicate member id"),
            Finding::PriceInversion {
                t,
                max_ask,
                min_bid,
            } => write!(
                f,
                "interval {t}: highest ask {max_ask} is not below lowest bid {min_bid}"
            ),
        }
    }
}

/// Every invariant violation found in a community. Empty means accepted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "  {finding}")?;
        }
        Ok(())
    }
}

/// Checks series shape and sign, metering exclusivity, tariff references and
/// tariff ranges. Never aborts.
pub fn validate_community(
    axis: &TimeAxis,
    members: &[Member],
    tariffs: &TariffTable,
) -> ValidationReport {
    validate_community_with(axis, members, tariffs, EPSILON_KWH)
}

pub fn validate_community_with(
    axis: &TimeAxis,
    members: &[Member],
    tariffs: &TariffTable,
    simultaneous_tolerance: f64,
) -> ValidationReport {
    let mut findings = Vec::new();

    let mut seen = BTreeMap::new();
    for m in members {
        if seen.insert(&m.id, ()).is_some() {
            findings.push(Finding::DuplicateMember {
                member: m.id.clone(),
            });
        }
    }

    for m in members {
        for (name, series) in [("import", &m.imports), ("export", &m.exports)] {
            if series.axis != *axis {
                findings.push(Finding::AxisMismatch {
                    member: m.id.clone(),
                    series: name,
                });
            }
            if series.values.len() != axis.count {
                findings.push(Finding::LengthMismatch {
                    member: m.id.clone(),
                    series: name,
                    expected: axis.count,
                    found: series.values.len(),
                });
            }
            for (t, &v) in series.values.iter().enumerate() {
                if v < 0.0 || !v.is_finite() {
                    findings.push(Finding::NegativeValue {
                        member: m.id.clone(),
                        series: name,
                        t,
                        value: v,
                    });
                }
            }
        }
        for (t, (&i, &e)) in m.imports.values.iter().zip(&m.exports.values).enumerate() {
            if i > simultaneous_tolerance && e > simultaneous_tolerance {
                findings.push(Finding::SimultaneousFlow {
                    member: m.id.clone(),
                    t,
                    import: i,
                    export: e,
                });
            }
        }
        if !tariffs.contains_key(&m.tariff_id) {
            findings.push(Finding::DanglingTariff {
                member: m.id.clone(),
                tariff: m.tariff_id.clone(),
            });
        }
    }

    for (id, schedule) in tariffs {
        if let Err(reason) = schedule.check() {
            findings.push(Finding::InvalidTariff {
                tariff: id.clone(),
                reason,
            });
        }
    }

    ValidationReport { findings }
}

/// Reports every interval where some producer's ask is not strictly below
/// some consumer's bid, i.e. where a local trade cannot benefit both sides.
///
/// Producers are members that export at least once over the axis, consumers
/// those that import at least once.
pub fn validate_tariffs(community: &Community) -> ValidationReport {
    let max_excise = community.max_excise();
    let resolved: Vec<(&Member, &TariffSchedule)> = community
        .members
        .iter()
        .filter_map(|m| community.tariff_of(m).map(|s| (m, s)))
        .collect();
    let producers: Vec<_> = resolved
        .iter()
        .filter(|(m, _)| !m.exports.is_zero())
        .collect();
    let consumers: Vec<_> = resolved
        .iter()
        .filter(|(m, _)| !m.imports.is_zero())
        .collect();

    let mut findings = Vec::new();
    if producers.is_empty() || consumers.is_empty() {
        return ValidationReport { findings };
    }
    for t in 0..community.axis.count {
        let max_ask = producers
            .iter()
            .map(|(m, s)| crate::billing::ask_price(s, &m.fiscal, max_excise))
            .fold(f64::NEG_INFINITY, f64::max);
        let min_bid = consumers
            .iter()
            .map(|(_, s)| crate::billing::bid_price(s, &community.axis, t))
            .fold(f64::INFINITY, f64::min);
        if max_ask >= min_bid {
            findings.push(Finding::PriceInversion {
                t,
                max_ask,
                min_bid,
            });
        }
    }
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tariff::PriceShape;
    use chrono::TimeZone;

    fn axis(count: usize) -> TimeAxis {
        TimeAxis::new(
            Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
            TimeDelta::minutes(15),
            count,
        )
        .unwrap()
    }

    fn member(id: &str, axis: TimeAxis, imports: Vec<f64>, exports: Vec<f64>) -> Member {
        Member {
            id: id.into(),
            imports: EnergySeries::new(axis, imports),
            exports: EnergySeries::new(axis, exports),
            tariff_id: "t".into(),
            fiscal: FiscalStatus::default(),
        }
    }

    fn tariffs(energy: PriceShape, export: f64) -> TariffTable {
        let mut table = TariffTable::new();
        table.insert(
            "t".into(),
            TariffSchedule {
                energy_price: energy,
                network_charge: PriceShape::Fixed(0.05),
                csc_network_charge: None,
                excise_rate: 0.0,
                vat_rate: 0.0,
                export_tariff: export,
            },
        );
        table
    }

    #[test]
    fn valid_pair_has_empty_report() {
        let a = axis(12);
        let members = vec![
            member("a", a, vec![1.0; 12], vec![0.0; 12]),
            member("b", a, vec![0.0; 12], vec![0.5; 12]),
        ];
        let report = validate_community(&a, &members, &tariffs(PriceShape::Fixed(0.2), 0.04));
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn short_series_is_one_length_finding() {
        let a = axis(12);
        let mut m = member("a", a, vec![1.0; 10], vec![0.0; 12]);
        m.imports.values.truncate(10);
        let report = validate_community(&a, &[m], &tariffs(PriceShape::Fixed(0.2), 0.04));
        assert_eq!(report.len(), 1);
        assert!(matches!(
            report.findings[0],
            Finding::LengthMismatch {
                expected: 12,
                found: 10,
                ..
            }
        ));
    }

    #[test]
    fn simultaneous_flow_is_reported() {
        let a = axis(3);
        let m = member("a", a, vec![0.0, 1.0, 0.0], vec![0.0, 0.5, 0.0]);
        let report = validate_community(&a, &[m], &tariffs(PriceShape::Fixed(0.2), 0.04));
        assert_eq!(report.len(), 1);
        assert!(matches!(
            report.findings[0],
            Finding::SimultaneousFlow { t: 1, .. }
        ));
    }

    #[test]
    fn dangling_tariff_and_negative_values() {
        let a = axis(2);
        let mut m = member("a", a, vec![-1.0, 0.0], vec![0.0, 0.0]);
        m.tariff_id = "missing".into();
        let report = validate_community(&a, &[m], &tariffs(PriceShape::Fixed(0.2), 0.04));
        assert_eq!(report.len(), 2);
    }

    #[test]
    fn validation_is_idempotent() {
        let a = axis(4);
        let m = member("a", a, vec![1.0, -1.0, 0.0, 2.0], vec![0.0, 0.0, 0.0, 1.0]);
        let t = tariffs(PriceShape::Fixed(0.2), 0.04);
        assert_eq!(
            validate_community(&a, std::slice::from_ref(&m), &t),
            validate_community(&a, &[m], &t)
        );
    }

    #[test]
    fn net_injection_cases() {
        let a = axis(3);
        let m = member("a", a, vec![0.0, 3.0, 0.0], vec![2.0, 0.0, 0.0]);
        assert_eq!(net_injection(&m, 0).unwrap(), 2.0);
        assert_eq!(net_injection(&m, 1).unwrap(), -3.0);
        assert_eq!(net_injection(&m, 2).unwrap(), 0.0);
        assert!(matches!(
            net_injection(&m, 3),
            Err(Error::IndexOutOfRange { index: 3, count: 3 })
        ));
    }

    #[test]
    fn roles_are_derived() {
        let a = axis(2);
        assert_eq!(member("c", a, vec![1.0, 0.0], vec![0.0; 2]).role(), Role::Consumer);
        assert_eq!(member("p", a, vec![0.0; 2], vec![1.0, 0.0]).role(), Role::Producer);
        assert_eq!(member("x", a, vec![1.0, 0.0], vec![0.0, 1.0]).role(), Role::Prosumer);
    }

    fn tariff_community(energy: PriceShape, export: f64, count: usize) -> Community {
        let a = axis(count);
        Community {
            axis: a,
            members: vec![
                member("c", a, vec![1.0; count], vec![0.0; count]),
                member("p", a, vec![0.0; count], vec![1.0; count]),
            ],
            tariffs: tariffs(energy, export),
        }
    }

    #[test]
    fn feed_in_below_retail_passes() {
        let c = tariff_community(PriceShape::Fixed(0.25), 0.04, 8);
        assert!(validate_tariffs(&c).is_empty());
    }

    #[test]
    fn feed_in_above_retail_inverts_everywhere() {
        let c = tariff_community(PriceShape::Fixed(0.25), 0.30, 8);
        assert_eq!(validate_tariffs(&c).len(), 8);
    }

    #[test]
    fn inversion_only_in_off_peak_band() {
        let tou = PriceShape::TimeOfUse(crate::tariff::TouBands {
            peak: 0.30,
            off_peak: 0.10,
            peak_start_hour: 6.0,
            peak_end_hour: 22.0,
        });
        // one day of 15-minute intervals
        let c = tariff_community(tou.clone(), 0.15, 96);
        let report = validate_tariffs(&c);
        // scalar oracle: enumerate intervals and compare prices directly
        let expected: Vec<usize> = (0..96)
            .filter(|&t| {
                let hour = t as f64 * 0.25;
                let bid = if (6.0..22.0).contains(&hour) { 0.30 } else { 0.10 };
                0.15 >= bid
            })
            .collect();
        let got: Vec<usize> = report
            .findings
            .iter()
            .map(|f| match f {
                Finding::PriceInversion { t, .. } => *t,
                other => panic!("unexpected {other}"),
            })
            .collect();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 32);
    }
}
