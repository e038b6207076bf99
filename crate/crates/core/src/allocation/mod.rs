//! Ex-post local energy market: distribution of community energy among
//! consumers and producers, one interval at a time.
//!
//! Per-interval functions take member-indexed slices (position `i` is the
//! community's `i`-th member). Members with zero quantity at an interval are
//! not part of that interval's market.

mod auction;
mod fill;
mod price;
mod priority;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use auction::allocate_double_auction;
pub use fill::{fill_by_levels, glass_fill, pro_rata_split};
pub use price::{clearing_price, ClearingPrice};
pub use priority::{allocate_prioritized_glass_filling, PriorityState, DEFAULT_PRIORITY_WINDOW_DAYS};

use crate::billing::MarketContext;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::Community;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "prorata")]
    ProRata,
    #[serde(rename = "glass")]
    GlassFilling,
    #[serde(rename = "priority-glass")]
    PrioritizedGlassFilling,
    #[serde(rename = "auction")]
    DoubleAuction,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::ProRata,
        Mechanism::GlassFilling,
        Mechanism::PrioritizedGlassFilling,
        Mechanism::DoubleAuction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::ProRata => "prorata",
            Mechanism::GlassFilling => "glass",
            Mechanism::PrioritizedGlassFilling => "priority-glass",
            Mechanism::DoubleAuction => "auction",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mechanism {s:?} (expected prorata, glass, priority-glass or auction)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutcomeFlags {
    /// The marginal awarded ask exceeds the marginal awarded bid.
    pub price_inversion: bool,
}

impl OutcomeFlags {
    pub fn is_empty(&self) -> bool {
        !self.price_inversion
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.price_inversion {
            out.push("price_inversion");
        }
        out
    }

    pub fn from_labels(s: &str) -> Result<Self, String> {
        let mut flags = OutcomeFlags::default();
        for label in s.split('|').map(str::trim).filter(|l| !l.is_empty()) {
            match label {
                "price_inversion" => flags.price_inversion = true,
                other => return Err(format!("unknown flag {other:?}")),
            }
        }
        Ok(flags)
    }
}

/// Local allocations of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub t: usize,
    pub consumer_alloc: Vec<f64>,
    pub producer_alloc: Vec<f64>,
    /// Energy available for local allocation, `min(Σ imports, Σ exports)`.
    pub community_energy: f64,
    /// Uniform €/kWh price; absent when nothing traded.
    pub price: Option<f64>,
    pub flags: OutcomeFlags,
}

impl AllocationOutcome {
    pub fn unpriced(
        t: usize,
        consumer_alloc: Vec<f64>,
        producer_alloc: Vec<f64>,
        community_energy: f64,
    ) -> Self {
        Self {
            t,
            consumer_alloc,
            producer_alloc,
            community_energy,
            price: None,
            flags: OutcomeFlags::default(),
        }
    }

    /// Sets the uniform clearing price from the awarded members' prices.
    pub fn settle(&mut self, bids: &[f64], asks: &[f64]) {
        match clearing_price(&self.consumer_alloc, &self.producer_alloc, bids, asks) {
            Some(cp) => {
                self.price = Some(cp.price);
                self.flags.price_inversion = cp.inverted;
            }
            None => {
                self.price = None;
                self.flags.price_inversion = false;
            }
        }
    }

    pub fn traded(&self) -> f64 {
        self.consumer_alloc.iter().sum()
    }
}

/// `min(Σ imports, Σ exports)`.
pub fn community_energy(imports: &[f64], exports: &[f64]) -> f64 {
    let demand: f64 = imports.iter().sum();
    let supply: f64 = exports.iter().sum();
    demand.min(supply).max(0.0)
}

/// Each side receives community energy in proportion to its metered quantity.
pub fn allocate_pro_rata(t: usize, imports: &[f64], exports: &[f64]) -> AllocationOutcome {
    let total = community_energy(imports, exports);
    AllocationOutcome::unpriced(
        t,
        pro_rata_split(imports, total),
        pro_rata_split(exports, total),
        total,
    )
}

/// Each side receives community energy by glass filling: the result is
/// `min(quantity, L)` for a single water level `L` per side.
pub fn allocate_glass_filling(t: usize, imports: &[f64], exports: &[f64]) -> AllocationOutcome {
    let total = community_energy(imports, exports);
    AllocationOutcome::unpriced(t, glass_fill(imports, total), glass_fill(exports, total), total)
}

/// Runs `mechanism` over every interval of the community and prices each
/// outcome. Prioritized glass filling is sequential in time; the other
/// mechanisms evaluate intervals independently under `exec`.
pub fn run_mechanism(
    community: &Community,
    mechanism: Mechanism,
    ctx: &MarketContext,
    exec: Execution,
) -> Result<Vec<AllocationOutcome>> {
    if ctx.len() != community.len() {
        return Err(Error::AxisMismatch(format!(
            "market context covers {} members, community has {}",
            ctx.len(),
            community.len()
        )));
    }
    let n = community.axis.count;
    let step = |t: usize| -> Result<AllocationOutcome> {
        let imports = community.imports_at(t);
        let exports = community.exports_at(t);
        let bids = ctx.bids_at(t);
        let asks = ctx.asks();
        let mut outcome = match mechanism {
            Mechanism::ProRata => allocate_pro_rata(t, &imports, &exports),
            Mechanism::GlassFilling => allocate_glass_filling(t, &imports, &exports),
            Mechanism::DoubleAuction => {
                return allocate_double_auction(t, &imports, &exports, &bids, asks)
            }
            Mechanism::PrioritizedGlassFilling => unreachable!("sequential path"),
        };
        outcome.settle(&bids, asks);
        Ok(outcome)
    };

    match mechanism {
        Mechanism::PrioritizedGlassFilling => {
            let mut state = PriorityState::for_axis(&community.axis, ctx.priority_window());
            let mut outcomes = Vec::with_capacity(n);
            for t in 0..n {
                let imports = community.imports_at(t);
                let exports = community.exports_at(t);
                let mut outcome =
                    allocate_prioritized_glass_filling(t, &imports, &exports, &mut state);
                outcome.settle(&ctx.bids_at(t), ctx.asks());
                outcomes.push(outcome);
            }
            Ok(outcomes)
        }
        _ => exec.try_map_range(n, step),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn community_energy_cases() {
        assert_eq!(community_energy(&[1.0, 3.0], &[2.0]), 2.0);
        assert_eq!(community_energy(&[], &[5.0]), 0.0);
        assert_eq!(community_energy(&[2.0], &[2.0]), 2.0);
    }

    #[test]
    fn pro_rata_cases() {
        let o = allocate_pro_rata(0, &[2.0, 2.0], &[2.0]);
        close(&o.consumer_alloc, &[1.0, 1.0]);
        close(&o.producer_alloc, &[2.0]);

        let o = allocate_pro_rata(0, &[1.0, 3.0], &[2.0]);
        close(&o.consumer_alloc, &[0.5, 1.5]);
        close(&o.producer_alloc, &[2.0]);

        let o = allocate_pro_rata(0, &[1.0, 1.0], &[4.0]);
        assert_eq!(o.community_energy, 2.0);
        close(&o.consumer_alloc, &[1.0, 1.0]);
        close(&o.producer_alloc, &[2.0]);
    }

    #[test]
    fn glass_filling_cases() {
        let o = allocate_glass_filling(0, &[2.0, 2.0, 2.0], &[3.0]);
        close(&o.consumer_alloc, &[1.0, 1.0, 1.0]);
        let o = allocate_glass_filling(0, &[1.0, 5.0], &[4.0]);
        close(&o.consumer_alloc, &[1.0, 3.0]);
        let o = allocate_glass_filling(0, &[1.0, 2.0, 9.0], &[6.0]);
        close(&o.consumer_alloc, &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn mechanism_names_round_trip() {
        for m in Mechanism::ALL {
            assert_eq!(m.as_str().parse::<Mechanism>().unwrap(), m);
        }
        assert!("fifo".parse::<Mechanism>().is_err());
    }

    #[test]
    fn flags_round_trip() {
        let f = OutcomeFlags {
            price_inversion: true,
        };
        assert_eq!(OutcomeFlags::from_labels(&f.labels().join("|")).unwrap(), f);
        assert!(OutcomeFlags::from_labels("").unwrap().is_empty());
    }
}
