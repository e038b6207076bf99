//! Member bills with and without local trading, and the resulting utility.
//!
//! Consumers pay VAT on supplier energy, excise and network charges. Under
//! local trading the excise and supplier energy apply only to grid-drawn
//! energy while network charges apply to the full metered import. Producers
//! earn the feed-in tariff on energy not sold locally and the local price,
//! net of any VAT and excise they must remit, on energy sold locally.

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationOutcome, DEFAULT_PRIORITY_WINDOW_DAYS};
use crate::error::{Error, Result};
use crate::model::{Community, FiscalStatus, Member, TimeAxis};
use crate::tariff::TariffSchedule;

/// Consumer-side price: supplier energy plus excise, VAT included, network
/// charges excluded.
pub fn bid_price(tariff: &TariffSchedule, axis: &TimeAxis, t: usize) -> f64 {
    (tariff.energy_price.at(axis, t) + tariff.excise_rate) * (1.0 + tariff.vat_rate)
}

/// Producer-side price: feed-in tariff, plus the community's highest excise
/// when excise-liable, inflated by VAT when VAT-liable.
pub fn ask_price(tariff: &TariffSchedule, fiscal: &FiscalStatus, max_excise: f64) -> f64 {
    let mut price = tariff.export_tariff;
    if fiscal.excise_liable {
        price += max_excise;
    }
    if fiscal.vat_liable {
        price *= 1.0 + tariff.vat_rate;
    }
    price
}

/// Variable part of one member's annual bill, in €.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BillBreakdown {
    pub energy_cost: f64,
    pub excise_cost: f64,
    pub network_cost: f64,
    pub csc_cost: f64,
    pub producer_revenue: f64,
    pub total: f64,
}

impl BillBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.energy_cost + self.excise_cost + self.network_cost + self.csc_cost
            - self.producer_revenue;
        self
    }
}

/// Producer-side settlement parameters shared by a community.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProducerTerms {
    pub max_excise: f64,
    /// Fraction of local payments retained by the community organiser.
    pub pmo_fee: f64,
}

impl ProducerTerms {
    /// What a producer keeps per locally sold kWh at price `price`.
    pub fn net_local_rate(&self, tariff: &TariffSchedule, fiscal: &FiscalStatus, price: f64) -> f64 {
        let mut rate = price * (1.0 - self.pmo_fee);
        if fiscal.vat_liable {
            rate -= rate * tariff.vat_rate / (1.0 + tariff.vat_rate);
        }
        if fiscal.excise_liable {
            rate -= self.max_excise;
        }
        rate
    }
}

/// Bill `B_i` without local trading.
pub fn bill_without_csc(member: &Member, tariff: &TariffSchedule) -> BillBreakdown {
    let axis = &member.imports.axis;
    let vat = 1.0 + tariff.vat_rate;
    let mut bill = BillBreakdown::default();
    for (t, &e) in member.imports.values.iter().enumerate() {
        bill.energy_cost += e * tariff.energy_price.at(axis, t) * vat;
        bill.excise_cost += e * tariff.excise_rate * vat;
        bill.network_cost += e * tariff.network_charge.at(axis, t) * vat;
    }
    for &p in &member.exports.values {
        bill.producer_revenue += p * tariff.export_tariff;
    }
    bill.finish()
}

/// Bill `B̂_i` given the community's allocation outcomes. `index` is the
/// member's position in the outcomes' allocation vectors.
pub fn bill_with_csc(
    member: &Member,
    index: usize,
    tariff: &TariffSchedule,
    outcomes: &[AllocationOutcome],
    terms: &ProducerTerms,
) -> Result<BillBreakdown> {
    let axis = &member.imports.axis;
    if outcomes.len() != member.imports.values.len()
        || outcomes.len() != member.exports.values.len()
    {
        return Err(Error::AxisMismatch(format!(
            "{} outcomes for member {} with {} intervals",
            outcomes.len(),
            member.id,
            member.imports.values.len()
        )));
    }
    let vat = 1.0 + tariff.vat_rate;
    let mut bill = BillBreakdown::default();
    for (t, outcome) in outcomes.iter().enumerate() {
        let (Some(&local_in), Some(&local_out)) = (
            outcome.consumer_alloc.get(index),
            outcome.producer_alloc.get(index),
        ) else {
            return Err(Error::AxisMismatch(format!(
                "outcome {t} has no entry for member index {index}"
            )));
        };
        let price = outcome.price.unwrap_or(0.0);

        let e = member.imports.values[t];
        let grid = (e - local_in).max(0.0);
        bill.energy_cost += grid * tariff.energy_price.at(axis, t) * vat;
        bill.excise_cost += grid * tariff.excise_rate * vat;
        bill.network_cost += match &tariff.csc_network_charge {
            None => e * tariff.network_charge.at(axis, t) * vat,
            Some(csc) => {
                (grid * tariff.network_charge.at(axis, t) + local_in * csc.at(axis, t)) * vat
            }
        };
        bill.csc_cost += local_in * price;

        let p = member.exports.values[t];
        bill.producer_revenue += (p - local_out).max(0.0) * tariff.export_tariff;
        if local_out > 0.0 {
            bill.producer_revenue +=
                local_out * terms.net_local_rate(tariff, &member.fiscal, price);
        }
    }
    Ok(bill.finish())
}

/// `u_i = B_i − B̂_i`.
pub fn utility(
    member: &Member,
    index: usize,
    tariff: &TariffSchedule,
    outcomes: &[AllocationOutcome],
    terms: &ProducerTerms,
) -> Result<f64> {
    Ok(bill_without_csc(member, tariff).total
        - bill_with_csc(member, index, tariff, outcomes, terms)?.total)
}

/// Per-member prices and settlement terms resolved for one community.
#[derive(Debug, Clone)]
pub struct MarketContext {
    axis: TimeAxis,
    tariffs: Vec<TariffSchedule>,
    asks: Vec<f64>,
    terms: ProducerTerms,
    priority_window: TimeDelta,
}

impl MarketContext {
    pub fn new(community: &Community) -> Result<Self> {
        let max_excise = community.max_excise();
        let tariffs = community
            .members
            .iter()
            .map(|m| {
                community
                    .tariff_of(m)
                    .cloned()
                    .ok_or_else(|| Error::UnknownMember {
                        member: m.id.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let asks = community
            .members
            .iter()
            .zip(&tariffs)
            .map(|(m, s)| ask_price(s, &m.fiscal, max_excise))
            .collect();
        Ok(Self {
            axis: community.axis,
            tariffs,
            asks,
            terms: ProducerTerms {
                max_excise,
                pmo_fee: 0.0,
            },
            priority_window: TimeDelta::days(DEFAULT_PRIORITY_WINDOW_DAYS),
        })
    }

    pub fn with_pmo_fee(mut self, fee: f64) -> Self {
        self.terms.pmo_fee = fee;
        self
    }

    pub fn with_priority_window(mut self, window: TimeDelta) -> Self {
        self.priority_window = window;
        self
    }

    pub fn len(&self) -> usize {
        self.tariffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tariffs.is_empty()
    }

    pub fn terms(&self) -> &ProducerTerms {
        &self.terms
    }

    pub fn priority_window(&self) -> TimeDelta {
        self.priority_window
    }

    pub fn tariff(&self, index: usize) -> &TariffSchedule {
        &self.tariffs[index]
    }

    pub fn bids_at(&self, t: usize) -> Vec<f64> {
        self.tariffs
            .iter()
            .map(|s| bid_price(s, &self.axis, t))
            .collect()
    }

    pub fn asks(&self) -> &[f64] {
        &self.asks
    }

    pub fn bill_without_csc(&self, community: &Community, index: usize) -> BillBreakdown {
        bill_without_csc(&community.members[index], &self.tariffs[index])
    }

    pub fn bill_with_csc(
        &self,
        community: &Community,
        index: usize,
        outcomes: &[AllocationOutcome],
    ) -> Result<BillBreakdown> {
        bill_with_csc(
            &community.members[index],
            index,
            &self.tariffs[index],
            outcomes,
            &self.terms,
        )
    }
}
