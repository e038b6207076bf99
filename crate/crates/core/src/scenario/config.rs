use serde::{Deserialize, Serialize};

use crate::allocation::Mechanism;
use crate::error::{Error, Result};

/// Sweep and community-generation parameters. Serialized as a flat JSON
/// object; every field is optional and falls back to its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub communities: usize,
    pub members_per_community: usize,
    pub uptake_levels: Vec<f64>,
    pub mechanisms: Vec<Mechanism>,
    pub seed: u64,
    pub year: i32,
    /// Simulated days from 1 January (at most 365).
    pub days: usize,

    pub pv_capacity_kw: f64,
    pub pv_capacity_factor: f64,
    /// Fraction of PV owners on the reduced (new installation) feed-in tariff.
    pub new_pv_share: f64,
    pub new_feed_in: f64,
    pub old_feed_in: f64,

    /// Number of distinct synthetic households communities draw from.
    pub pool_size: usize,
    pub load_min_kwh: f64,
    pub load_max_kwh: f64,
    /// Standard deviation of the multiplicative load noise (log scale).
    pub load_noise: f64,

    /// Probability that a member is on the time-of-use tariff.
    pub tariff_mix: f64,
    pub fixed_energy_price: f64,
    pub tou_peak_price: f64,
    pub tou_off_peak_price: f64,
    pub peak_start_hour: f64,
    pub peak_end_hour: f64,
    pub network_charge: f64,
    pub excise_rate: f64,
    pub vat_rate: f64,
    pub pmo_fee: f64,
    pub priority_window_days: i64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            communities: 50,
            members_per_community: 20,
            uptake_levels: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            mechanisms: Mechanism::ALL.to_vec(),
            seed: 2025,
            year: 2025,
            days: 365,
            pv_capacity_kw: 3.0,
            pv_capacity_factor: 0.14,
            new_pv_share: 0.3,
            new_feed_in: 0.04,
            old_feed_in: 0.1269,
            pool_size: 200,
            load_min_kwh: 1500.0,
            load_max_kwh: 6000.0,
            load_noise: 0.25,
            tariff_mix: 0.5,
            fixed_energy_price: 0.20,
            tou_peak_price: 0.24,
            tou_off_peak_price: 0.16,
            peak_start_hour: 6.0,
            peak_end_hour: 22.0,
            network_charge: 0.05,
            excise_rate: 0.02998,
            vat_rate: 0.20,
            pmo_fee: 0.0,
            priority_window_days: 365,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.communities == 0 || self.members_per_community == 0 {
            return fail("community and member counts must be at least 1".into());
        }
        if self.members_per_community > self.pool_size {
            return fail(format!(
                "members_per_community ({}) exceeds pool_size ({})",
                self.members_per_community, self.pool_size
            ));
        }
        if self.uptake_levels.is_empty() || self.mechanisms.is_empty() {
            return fail("at least one uptake level and one mechanism are required".into());
        }
        if let Some(u) = self.uptake_levels.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return fail(format!("uptake level {u} outside [0, 1]"));
        }
        for (name, v) in [("new_pv_share", self.new_pv_share), ("tariff_mix", self.tariff_mix)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(1..=365).contains(&self.days) {
            return fail(format!("days {} outside 1..=365", self.days));
        }
        if self.pv_capacity_kw <= 0.0 || !(0.0..1.0).contains(&self.pv_capacity_factor) {
            return fail("PV capacity must be positive and capacity factor in [0, 1)".into());
        }
        if !(0.0 < self.load_min_kwh && self.load_min_kwh <= self.load_max_kwh) {
            return fail("load range must satisfy 0 < min <= max".into());
        }
        if !(0.0..1.0).contains(&self.vat_rate) || !(0.0..1.0).contains(&self.pmo_fee) {
            return fail("vat_rate and pmo_fee must lie in [0, 1)".into());
        }
        if self.priority_window_days <= 0 {
            return fail("priority_window_days must be positive".into());
        }
        Ok(())
    }

    /// Number of PV owners at `uptake`.
    pub fn pv_owners(&self, uptake: f64) -> usize {
        (uptake * self.members_per_community as f64).round() as usize
    }

    /// Number of owners on the reduced feed-in tariff.
    pub fn new_pv_owners(&self, owners: usize) -> usize {
        (self.new_pv_share * owners as f64).round() as usize
    }
}
