//! One-sided distribution primitives shared by the mechanisms.
//!
//! Each function splits `total` kWh over members with positive `quantities`,
//! never awarding a member more than its own quantity.

use crate::EPSILON_KWH;

/// Proportional split: member `i` receives `q_i / Σq · total`.
pub fn pro_rata_split(quantities: &[f64], total: f64) -> Vec<f64> {
    let sum: f64 = quantities.iter().filter(|&&q| q > 0.0).sum();
    if sum <= 0.0 || total <= 0.0 {
        return vec![0.0; quantities.len()];
    }
    if total >= sum {
        return quantities.iter().map(|&q| q.max(0.0)).collect();
    }
    quantities
        .iter()
        .map(|&q| if q > 0.0 { q / sum * total } else { 0.0 })
        .collect()
}

/// Iterative equal-share split with surplus redistribution ("glass filling").
pub fn glass_fill(quantities: &[f64], total: f64) -> Vec<f64> {
    let mut out = vec![0.0; quantities.len()];
    let members: Vec<usize> = (0..quantities.len()).collect();
    glass_fill_into(quantities, &members, total, &mut out);
    out
}

/// Glass-fills `total` over the listed `members`, writing into `out` (which
/// must hold zeros for them). Returns the energy distributed.
///
/// Iteration 0 hands every eligible member `total / |eligible|`, capped at its
/// quantity; each later iteration spreads the remaining surplus equally over
/// members still below their quantity. Every iteration either saturates a
/// member or exhausts the surplus, so at most `|members|` rounds run.
pub(crate) fn glass_fill_into(
    quantities: &[f64],
    members: &[usize],
    total: f64,
    out: &mut [f64],
) -> f64 {
    let mut eligible: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| quantities[i] > 0.0)
        .collect();
    if eligible.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let demand: f64 = eligible.iter().map(|&i| quantities[i]).sum();
    if total >= demand {
        for &i in &eligible {
            out[i] = quantities[i];
        }
        return demand;
    }

    let mut surplus = total;
    let mut rounds = 0;
    while !eligible.is_empty() && surplus > EPSILON_KWH && rounds <= members.len() {
        let share = surplus / eligible.len() as f64;
        for &i in &eligible {
            out[i] = (out[i] + share).min(quantities[i]);
        }
        surplus = total - members.iter().map(|&i| out[i]).sum::<f64>();
        eligible.retain(|&i| out[i] < quantities[i]);
        rounds += 1;
    }
    total - surplus.max(0.0)
}

/// Serves priority levels in ascending `keys` order, glass-filling the
/// remaining energy within each level. Members with equal keys share a level.
pub fn fill_by_levels(quantities: &[f64], keys: &[i64], total: f64) -> Vec<f64> {
    debug_assert_eq!(quantities.len(), keys.len());
    let mut out = vec![0.0; quantities.len()];
    let mut order: Vec<usize> = (0..quantities.len())
        .filter(|&i| quantities[i] > 0.0)
        .collect();
    order.sort_by_key(|&i| (keys[i], i));

    let mut remaining = total;
    for level in order.chunk_by(|&a, &b| keys[a] == keys[b]) {
        if remaining <= EPSILON_KWH {
            break;
        }
        remaining -= glass_fill_into(quantities, level, remaining, &mut out);
    }
    out
}
