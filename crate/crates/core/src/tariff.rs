//! Supplier tariffs: energy price shapes, network charges and taxes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{TariffId, TimeAxis};

/// Two daily bands. Intervals whose start hour lies in
/// `[peak_start_hour, peak_end_hour)` are peak; the band may wrap midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouBands {
    pub peak: f64,
    pub off_peak: f64,
    pub peak_start_hour: f64,
    pub peak_end_hour: f64,
}

impl TouBands {
    pub fn is_peak(&self, hour: f64) -> bool {
        if self.peak_start_hour <= self.peak_end_hour {
            hour >= self.peak_start_hour && hour < self.peak_end_hour
        } else {
            hour >= self.peak_start_hour || hour < self.peak_end_hour
        }
    }
}

/// Per-kWh rate, either flat or time-of-use. Serialized as a bare number for
/// the flat case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceShape {
    Fixed(f64),
    TimeOfUse(TouBands),
}

impl PriceShape {
    pub fn at(&self, axis: &TimeAxis, t: usize) -> f64 {
        match self {
            PriceShape::Fixed(p) => *p,
            PriceShape::TimeOfUse(bands) => {
                if bands.is_peak(axis.hour_of_day(t)) {
                    bands.peak
                } else {
                    bands.off_peak
                }
            }
        }
    }

    fn rates(&self) -> Vec<f64> {
        match self {
            PriceShape::Fixed(p) => vec![*p],
            PriceShape::TimeOfUse(b) => vec![b.peak, b.off_peak],
        }
    }
}

/// All money rates in €/kWh excluding VAT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    pub energy_price: PriceShape,
    pub network_charge: PriceShape,
    /// Network rate applied to locally supplied energy when it differs from
    /// the grid rate. `None` charges all imports at `network_charge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csc_network_charge: Option<PriceShape>,
    pub excise_rate: f64,
    pub vat_rate: f64,
    pub export_tariff: f64,
}

impl TariffSchedule {
    pub(crate) fn check(&self) -> Result<(), String> {
        let mut rates = self.energy_price.rates();
        rates.extend(self.network_charge.rates());
        if let Some(csc) = &self.csc_network_charge {
            rates.extend(csc.rates());
        }
        rates.extend([self.excise_rate, self.export_tariff]);
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err("rates must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.vat_rate) {
            return Err(format!("vat_rate {} outside [0, 1)", self.vat_rate));
        }
        Ok(())
    }
}

pub type TariffTable = BTreeMap<TariffId, TariffSchedule>;
