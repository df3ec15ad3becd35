//! Benchmark instances for the clearing engine.

use quasifisher::generate::{random_market, MarketShape};
use quasifisher::{Market, Rational};

/// Deterministic random market with `buyers` buyers and `goods` goods.
pub fn instance(buyers: usize, goods: usize, seed: u64) -> Market<Rational> {
    random_market(
        &MarketShape {
            buyers,
            goods,
            ..MarketShape::default()
        },
        seed,
    )
}
