//! Fairness indicators over annual member utilities.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MemberId;

/// An indicator value, or a marker that it is undefined for the input
/// (e.g. every utility is zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Indicator {
    Value(f64),
    Degenerate,
}

impl Indicator {
    pub fn value(self) -> Option<f64> {
        match self {
            Indicator::Value(v) => Some(v),
            Indicator::Degenerate => None,
        }
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, Indicator::Degenerate)
    }
}

/// Annual utilities keyed by member.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UtilityVector {
    pub ids: Vec<MemberId>,
    pub values: Vec<f64>,
}

impl UtilityVector {
    pub fn new(ids: Vec<MemberId>, values: Vec<f64>) -> Self {
        assert_eq!(ids.len(), values.len(), "one utility per member");
        Self { ids, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(Σu)² / (n·Σu²)`.
pub fn jain_index(u: &[f64]) -> Indicator {
    let sum_sq: f64 = u.iter().map(|x| x * x).sum();
    if u.is_empty() || sum_sq == 0.0 {
        return Indicator::Degenerate;
    }
    let sum: f64 = u.iter().sum();
    Indicator::Value(sum * sum / (u.len() as f64 * sum_sq))
}

/// `min u / max u`. Degenerate unless the best-off member gains something,
/// since a non-positive maximum makes the ratio meaningless.
pub fn min_max_ratio(u: &[f64]) -> Indicator {
    let Some(max) = u.iter().copied().reduce(f64::max) else {
        return Indicator::Degenerate;
    };
    if max <= 0.0 {
        return Indicator::Degenerate;
    }
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    Indicator::Value(min / max)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Contribution of a member to the trades of everyone else (kWh²):
/// `Σ_t −sign(own_t)·min(|own_t|, |rest_t|)·rest_t` over net injections.
pub fn contribution(own: &[f64], rest: &[f64]) -> f64 {
    own.iter()
        .zip(rest)
        .map(|(&e, &r)| -sign(e) * e.abs().min(r.abs()) * r)
        .sum()
}

/// Contributions of every member from their net-injection series, using one
/// pass for the community total.
pub fn contributions(net_injections: &[Vec<f64>]) -> Vec<f64> {
    let n = net_injections.first().map_or(0, Vec::len);
    let mut total = vec![0.0; n];
    for series in net_injections {
        for (acc, v) in total.iter_mut().zip(series) {
            *acc += v;
        }
    }
    net_injections
        .iter()
        .map(|own| {
            own.iter()
                .zip(&total)
                .map(|(&e, &sum)| {
                    let r = sum - e;
                    -sign(e) * e.abs().min(r.abs()) * r
                })
                .sum()
        })
        .collect()
}

/// RMS gap between utilities and contribution-proportional shares of the
/// total. Lower is more meritocratic.
pub fn meritocratic_index(u: &[f64], contributions: &[f64]) -> Indicator {
    assert_eq!(u.len(), contributions.len(), "one contribution per member");
    let total_c: f64 = contributions.iter().sum();
    if u.is_empty() || total_c == 0.0 {
        return Indicator::Degenerate;
    }
    let total_u: f64 = u.iter().sum();
    let mean_sq = u
        .iter()
        .zip(contributions)
        .map(|(&ui, &ci)| {
            let ideal = ci / total_c * total_u;
            (ui - ideal).powi(2)
        })
        .sum::<f64>()
        / u.len() as f64;
    Indicator::Value(mean_sq.sqrt())
}

pub fn social_welfare(u: &[f64]) -> f64 {
    u.iter().sum()
}

/// `Σ w_i·u_i`; every member needs a weight.
pub fn weighted_utility(u: &UtilityVector, weights: &HashMap<MemberId, f64>) -> Result<f64> {
    u.ids
        .iter()
        .zip(&u.values)
        .map(|(id, &ui)| {
            weights
                .get(id)
                .map(|w| w * ui)
                .ok_or_else(|| Error::MissingWeight(id.clone()))
        })
        .sum()
}

/// All indicators of one (community, mechanism) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub jain: Indicator,
    pub min_max: Indicator,
    pub meritocratic_index: Indicator,
    pub social_welfare: f64,
    pub weighted_utility: Option<f64>,
    pub contributions: Vec<f64>,
}

impl FairnessReport {
    pub fn compute(
        u: &UtilityVector,
        contributions: Vec<f64>,
        weights: Option<&HashMap<MemberId, f64>>,
    ) -> Result<Self> {
        Ok(Self {
            jain: jain_index(&u.values),
            min_max: min_max_ratio(&u.values),
            meritocratic_index: meritocratic_index(&u.values, &contributions),
            social_welfare: social_welfare(&u.values),
            weighted_utility: weights.map(|w| weighted_utility(u, w)).transpose()?,
            contributions,
        })
    }
}

/// Indicators mapped to `[0, 1]` across mechanisms at a fixed uptake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedFairness {
    pub jain: Indicator,
    pub min_max: Indicator,
    /// `(max x − x) / (max x − min x)`, so 1 is the most meritocratic
    /// mechanism and 0 the least; 1 for all when they tie, degenerate when
    /// every index is zero.
    pub merit: Indicator,
    /// Welfare divided by the best mechanism's welfare.
    pub social_welfare: Indicator,
}

/// Normalizes one community's reports (one per mechanism, same uptake).
pub fn normalize_report(reports: &[&FairnessReport]) -> Vec<NormalizedFairness> {
    let max_welfare = reports
        .iter()
        .map(|r| r.social_welfare)
        .fold(f64::NEG_INFINITY, f64::max);
    let merits = reports.iter().filter_map(|r| r.meritocratic_index.value());
    let max_merit = merits.clone().fold(f64::NEG_INFINITY, f64::max);
    let min_merit = merits.fold(f64::INFINITY, f64::min);
    reports
        .iter()
        .map(|r| NormalizedFairness {
            jain: r.jain,
            min_max: r.min_max,
            merit: match r.meritocratic_index {
                Indicator::Value(_) if max_merit <= 0.0 => Indicator::Degenerate,
                Indicator::Value(_) if max_merit == min_merit => Indicator::Value(1.0),
                Indicator::Value(x) => Indicator::Value((max_merit - x) / (max_merit - min_merit)),
                Indicator::Degenerate => Indicator::Degenerate,
            },
            social_welfare: if max_welfare > 0.0 {
                Indicator::Value(r.social_welfare / max_welfare)
            } else {
                Indicator::Degenerate
            },
        })
        .collect()
}
