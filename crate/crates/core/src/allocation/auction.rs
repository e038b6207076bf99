use super::fill::fill_by_levels;
use super::{community_energy, AllocationOutcome};
use crate::error::{Error, Result};

/// Prices closer than a nano-euro share a level.
fn price_key(price: f64) -> i64 {
    (price * 1e9).round() as i64
}

fn keys(
    t: usize,
    quantities: &[f64],
    prices: &[f64],
    side: &'static str,
    descending: bool,
) -> Result<Vec<i64>> {
    quantities
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            if q <= 0.0 {
                return Ok(0);
            }
            match prices.get(i) {
                Some(&p) if p.is_finite() => Ok(if descending {
                    -price_key(p)
                } else {
                    price_key(p)
                }),
                _ => Err(Error::MissingPrice { member: i, t, side }),
            }
        })
        .collect()
}

/// Uniform-price double auction: the full community energy is distributed
/// with price priority (highest bids, lowest asks first), glass filling
/// inside each price level, then settled at the clearing price.
///
/// Quantity is never truncated at a bid/ask crossing; the outcome is flagged
/// instead.
pub fn allocate_double_auction(
    t: usize,
    imports: &[f64],
    exports: &[f64],
    bids: &[f64],
    asks: &[f64],
) -> Result<AllocationOutcome> {
    let consumer_keys = keys(t, imports, bids, "bid", true)?;
    let producer_keys = keys(t, exports, asks, "ask", false)?;
    let total = community_energy(imports, exports);
    let mut outcome = AllocationOutcome::unpriced(
        t,
        fill_by_levels(imports, &consumer_keys, total),
        fill_by_levels(exports, &producer_keys, total),
        total,
    );
    outcome.settle(bids, asks);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::allocate_glass_filling;
    use approx::assert_abs_diff_eq;

    #[test]
    fn price_priority_then_midpoint() {
        let o = allocate_double_auction(0, &[2.0, 2.0], &[3.0], &[0.25, 0.20], &[0.05]).unwrap();
        assert_abs_diff_eq!(o.consumer_alloc[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.consumer_alloc[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.producer_alloc[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.price.unwrap(), 0.125, epsilon = 1e-12);
        assert!(!o.flags.price_inversion);
    }

    #[test]
    fn equal_prices_reduce_to_glass_filling() {
        let imports = [0.5, 3.0, 1.0];
        let exports = [2.0, 0.4];
        let o = allocate_double_auction(0, &imports, &exports, &[0.3; 3], &[0.1; 2]).unwrap();
        let g = allocate_glass_filling(0, &imports, &exports);
        assert_eq!(o.consumer_alloc, g.consumer_alloc);
        assert_eq!(o.producer_alloc, g.producer_alloc);
    }

    #[test]
    fn crossing_prices_trade_and_flag() {
        let o = allocate_double_auction(0, &[1.0], &[1.0], &[0.10], &[0.30]).unwrap();
        assert_eq!(o.consumer_alloc, vec![1.0]);
        assert_abs_diff_eq!(o.price.unwrap(), 0.20, epsilon = 1e-12);
        assert!(o.flags.price_inversion);
    }

    #[test]
    fn missing_price_for_active_member() {
        let err = allocate_double_auction(4, &[1.0, 1.0], &[1.0], &[0.2, f64::NAN], &[0.1]);
        assert!(matches!(
            err,
            Err(Error::MissingPrice {
                member: 1,
                t: 4,
                side: "bid"
            })
        ));
        // inactive members need no price
        assert!(allocate_double_auction(0, &[1.0, 0.0], &[1.0], &[0.2], &[0.1]).is_ok());
    }
}
