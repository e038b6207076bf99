use std::collections::VecDeque;

use chrono::TimeDelta;

use super::fill::fill_by_levels;
use super::{community_energy, AllocationOutcome};
use crate::model::TimeAxis;

/// Default look-back of the prioritized mechanism.
pub const DEFAULT_PRIORITY_WINDOW_DAYS: i64 = 365;

/// Cumulative locally allocated energy per member over a sliding window,
/// kept separately for the consumer and producer sides.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityState {
    consumer: SideLedger,
    producer: SideLedger,
    window: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SideLedger {
    cumulative: Vec<f64>,
    history: VecDeque<(usize, Vec<f64>)>,
}

impl SideLedger {
    fn ensure_len(&mut self, n: usize) {
        if self.cumulative.len() < n {
            self.cumulative.resize(n, 0.0);
        }
    }

    fn expire(&mut self, t: usize, window: usize) {
        while let Some((t0, _)) = self.history.front() {
            if t0 + window > t {
                break;
            }
            let (_, alloc) = self.history.pop_front().expect("front exists");
            for (c, a) in self.cumulative.iter_mut().zip(alloc) {
                *c = (*c - a).max(0.0);
            }
        }
    }

    fn record(&mut self, t: usize, alloc: &[f64]) {
        if alloc.iter().all(|&a| a == 0.0) {
            return;
        }
        self.ensure_len(alloc.len());
        for (c, a) in self.cumulative.iter_mut().zip(alloc) {
            *c += a;
        }
        self.history.push_back((t, alloc.to_vec()));
    }

    /// Cumulative energy quantized to 1 Wh.
    fn levels(&self, n: usize) -> Vec<i64> {
        (0..n)
            .map(|i| {
                let kwh = self.cumulative.get(i).copied().unwrap_or(0.0);
                (kwh * 1000.0).round() as i64
            })
            .collect()
    }
}

impl PriorityState {
    /// Empty state with a window of `window` intervals.
    pub fn new(window: usize) -> Self {
        Self {
            consumer: SideLedger::default(),
            producer: SideLedger::default(),
            window: window.max(1),
        }
    }

    pub fn for_axis(axis: &TimeAxis, window: TimeDelta) -> Self {
        Self::new(axis.intervals_in(window))
    }

    /// State seeded with cumulative totals that predate the simulation and
    /// never expire.
    pub fn with_cumulative(consumer: Vec<f64>, producer: Vec<f64>, window: usize) -> Self {
        let mut state = Self::new(window);
        state.consumer.cumulative = consumer;
        state.producer.cumulative = producer;
        state
    }

    pub fn consumer_cumulative(&self) -> &[f64] {
        &self.consumer.cumulative
    }

    pub fn producer_cumulative(&self) -> &[f64] {
        &self.producer.cumulative
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

/// Glass filling served level by level, least-served members first. Levels
/// are cumulative allocated energy rounded to 1 Wh. Updates `state` with this
/// interval's allocations.
pub fn allocate_prioritized_glass_filling(
    t: usize,
    imports: &[f64],
    exports: &[f64],
    state: &mut PriorityState,
) -> AllocationOutcome {
    state.consumer.expire(t, state.window);
    state.producer.expire(t, state.window);

    let total = community_energy(imports, exports);
    let consumer_alloc = fill_by_levels(imports, &state.consumer.levels(imports.len()), total);
    let producer_alloc = fill_by_levels(exports, &state.producer.levels(exports.len()), total);

    state.consumer.record(t, &consumer_alloc);
    state.producer.record(t, &producer_alloc);

    AllocationOutcome::unpriced(t, consumer_alloc, producer_alloc, total)
}
