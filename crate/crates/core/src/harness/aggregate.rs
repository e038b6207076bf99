use serde::Serialize;

use crate::allocation::Mechanism;
use crate::error::{Error, Result};
use crate::fairness::{normalize_report, Indicator};
use crate::model::Role;

use super::SweepResult;

/// Which members a mean saving is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SavingScope {
    /// Every member with a positive baseline bill.
    All,
    /// Members without production.
    Consumers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSaving {
    /// 1 is the largest consumer.
    pub rank: usize,
    /// Mean over communities; `None` when no member at this rank has a
    /// percentage saving.
    pub mean_saving_pct: Option<f64>,
    pub samples: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean percentage saving per consumption rank, across communities.
pub fn savings_profile(
    sweep: &SweepResult,
    mechanism: Mechanism,
    uptake: f64,
) -> Result<Vec<RankSaving>> {
    let mut per_rank: Vec<Vec<f64>> = Vec::new();
    let mut found = false;
    for (_, slice, run) in sweep.runs() {
        if run.mechanism != mechanism || slice.uptake != uptake {
            continue;
        }
        found = true;
        let mut order: Vec<usize> = (0..slice.members.len()).collect();
        order.sort_by(|&a, &b| {
            slice.members[b]
                .consumption_kwh
                .total_cmp(&slice.members[a].consumption_kwh)
                .then(a.cmp(&b))
        });
        if per_rank.len() < order.len() {
            per_rank.resize(order.len(), Vec::new());
        }
        for (rank, &i) in order.iter().enumerate() {
            if let Some(p) = run.savings[i].percent() {
                per_rank[rank].push(p);
            }
        }
    }
    if !found {
        return Err(Error::SliceAbsent(format!("{mechanism} at uptake {uptake}")));
    }
    Ok(per_rank
        .into_iter()
        .enumerate()
        .map(|(rank, v)| RankSaving {
            rank: rank + 1,
            samples: v.len(),
            mean_saving_pct: mean(v),
        })
        .collect())
}

/// Mean percentage saving over all members in `scope`, pooled across
/// communities.
pub fn mean_saving_pct(
    sweep: &SweepResult,
    mechanism: Mechanism,
    uptake: f64,
    scope: SavingScope,
) -> Option<f64> {
    mean(
        sweep
            .runs()
            .filter(|(_, s, r)| r.mechanism == mechanism && s.uptake == uptake)
            .flat_map(|(_, s, r)| {
                s.members.iter().zip(&r.savings).filter_map(move |(m, sv)| {
                    (scope == SavingScope::All || m.role == Role::Consumer)
                        .then_some(sv.percent())
                        .flatten()
                })
            }),
    )
}

/// Normalized indicators of one mechanism at one uptake, averaged over
/// communities. Degenerate values are skipped; `None` when all are.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessCell {
    pub mechanism: Mechanism,
    pub uptake: f64,
    pub jain: Option<f64>,
    pub min_max: Option<f64>,
    pub merit: Option<f64>,
    pub social_welfare: Option<f64>,
}

/// Mechanism × uptake table of normalized fairness, in configuration order.
pub fn fairness_matrix(sweep: &SweepResult) -> Vec<FairnessCell> {
    let cfg = &sweep.config;
    let (nm, nu) = (cfg.mechanisms.len(), cfg.uptake_levels.len());
    // [uptake][mechanism][indicator] samples
    let mut acc = vec![vec![[(0.0, 0usize); 4]; nm]; nu];
    for community in &sweep.communities {
        for (u, slice) in community.uptakes.iter().enumerate() {
            let reports: Vec<_> = slice.runs.iter().map(|r| &r.report).collect();
            for (m, norm) in normalize_report(&reports).into_iter().enumerate() {
                let values = [norm.jain, norm.min_max, norm.merit, norm.social_welfare];
                for (slot, ind) in acc[u][m].iter_mut().zip(values) {
                    if let Indicator::Value(v) = ind {
                        slot.0 += v;
                        slot.1 += 1;
                    }
                }
            }
        }
    }
    let avg = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    let mut cells = Vec::with_capacity(nm * nu);
    for (m, &mechanism) in cfg.mechanisms.iter().enumerate() {
        for (u, &uptake) in cfg.uptake_levels.iter().enumerate() {
            let a = acc[u][m];
            cells.push(FairnessCell {
                mechanism,
                uptake,
                jain: avg(a[0]),
                min_max: avg(a[1]),
                merit: avg(a[2]),
                social_welfare: avg(a[3]),
            });
        }
    }
    cells
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mechanism: Mechanism,
    pub uptake: f64,
    pub mean_saving_pct: Option<f64>,
    pub mean_consumer_saving_pct: Option<f64>,
    pub mean_social_welfare_eur: f64,
    pub mean_traded_kwh: f64,
    pub inverted_intervals: usize,
}

pub(crate) fn summary(sweep: &SweepResult) -> Vec<SummaryRow> {
    let cfg = &sweep.config;
    let mut rows = Vec::new();
    for &mechanism in &cfg.mechanisms {
        for &uptake in &cfg.uptake_levels {
            let runs: Vec<_> = sweep
                .runs()
                .filter(|(_, s, r)| r.mechanism == mechanism && s.uptake == uptake)
                .map(|(_, _, r)| r)
                .collect();
            rows.push(SummaryRow {
                mechanism,
                uptake,
                mean_saving_pct: mean_saving_pct(sweep, mechanism, uptake, SavingScope::All),
                mean_consumer_saving_pct: mean_saving_pct(
                    sweep,
                    mechanism,
                    uptake,
                    SavingScope::Consumers,
                ),
                mean_social_welfare_eur: mean(runs.iter().map(|r| r.report.social_welfare))
                    .unwrap_or(0.0),
                mean_traded_kwh: mean(runs.iter().map(|r| r.traded_kwh)).unwrap_or(0.0),
                inverted_intervals: runs.iter().map(|r| r.inverted_intervals).sum(),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::harness::run_sweep_in_memory;
    use crate::scenario::ScenarioConfig;

    fn sweep(mechanisms: Vec<Mechanism>) -> SweepResult {
        let cfg = ScenarioConfig {
            communities: 2,
            members_per_community: 5,
            uptake_levels: vec![0.0, 0.4],
            mechanisms,
            days: 3,
            ..Default::default()
        };
        run_sweep_in_memory(&cfg, Execution::Parallel, None).unwrap()
    }

    #[test]
    fn uptake_zero_profile_is_flat_zero() {
        let s = sweep(Mechanism::ALL.to_vec());
        let p = savings_profile(&s, Mechanism::ProRata, 0.0).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.iter().all(|r| r.mean_saving_pct == Some(0.0) && r.samples == 2));
    }

    #[test]
    fn missing_slice_is_an_error() {
        let s = sweep(vec![Mechanism::GlassFilling]);
        assert!(matches!(
            savings_profile(&s, Mechanism::DoubleAuction, 0.4),
            Err(Error::SliceAbsent(_))
        ));
        assert!(savings_profile(&s, Mechanism::GlassFilling, 0.3).is_err());
    }

    #[test]
    fn single_mechanism_normalizes_to_one() {
        let s = sweep(vec![Mechanism::PrioritizedGlassFilling]);
        let m = fairness_matrix(&s);
        let cell = m.iter().find(|c| c.uptake == 0.4).unwrap();
        assert_eq!(cell.social_welfare, Some(1.0));
        assert_eq!(cell.merit, Some(1.0));
        let zero = m.iter().find(|c| c.uptake == 0.0).unwrap();
        assert_eq!((zero.jain, zero.min_max, zero.merit, zero.social_welfare), (None, None, None, None));
    }
}
