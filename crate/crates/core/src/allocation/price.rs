/// Uniform local price of one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingPrice {
    pub price: f64,
    /// Highest awarded ask exceeds lowest awarded bid.
    pub inverted: bool,
}

/// Midpoint between the highest ask among producers awarded energy and the
/// lowest bid among consumers awarded energy. `None` when nothing traded.
pub fn clearing_price(
    consumer_alloc: &[f64],
    producer_alloc: &[f64],
    bids: &[f64],
    asks: &[f64],
) -> Option<ClearingPrice> {
    let min_bid = consumer_alloc
        .iter()
        .zip(bids)
        .filter(|(&a, _)| a > 0.0)
        .map(|(_, &b)| b)
        .reduce(f64::min)?;
    let max_ask = producer_alloc
        .iter()
        .zip(asks)
        .filter(|(&a, _)| a > 0.0)
        .map(|(_, &p)| p)
        .reduce(f64::max)?;
    Some(ClearingPrice {
        price: (max_ask + min_bid) / 2.0,
        inverted: max_ask > min_bid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_pair_midpoint() {
        let p = clearing_price(&[1.0], &[1.0], &[0.24], &[0.04]).unwrap();
        assert_abs_diff_eq!(p.price, 0.14, epsilon = 1e-12);
        assert!(!p.inverted);
    }

    #[test]
    fn no_trade_no_price() {
        assert_eq!(clearing_price(&[0.0], &[0.0], &[0.24], &[0.04]), None);
        assert_eq!(clearing_price(&[], &[], &[], &[]), None);
    }

    #[test]
    fn marginal_awarded_prices() {
        // unawarded members (zero allocation) must not influence the price
        let p = clearing_price(
            &[1.0, 2.0, 0.0],
            &[1.5, 1.5, 0.0],
            &[0.22, 0.30, 0.01],
            &[0.04, 0.06, 0.90],
        )
        .unwrap();
        assert_abs_diff_eq!(p.price, 0.14, epsilon = 1e-12);
    }
}
