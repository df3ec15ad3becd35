//! Seeded random markets with small-denominator rational entries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixtures::rat;
use crate::market::Market;
use crate::numeric::Rational;

#[derive(Clone, Debug)]
pub struct MarketShape {
    pub buyers: usize,
    pub goods: usize,
    /// Entries are multiples of `1 / denominator`.
    pub denominator: i64,
    pub max_value: i64,
    pub max_budget: i64,
    pub max_supply: i64,
    /// Probability that a value entry is zero.
    pub zero_value: f64,
}

impl Default for MarketShape {
    fn default() -> Self {
        Self {
            buyers: 3,
            goods: 2,
            denominator: 4,
            max_value: 5,
            max_budget: 3,
            max_supply: 4,
            zero_value: 0.2,
        }
    }
}

fn positive(rng: &mut ChaCha8Rng, max: i64, den: i64) -> Rational {
    rat(rng.gen_range(1..=max * den), den)
}

/// Valid market: positive budgets and supplies, and every good valued by at
/// least one buyer.
pub fn random_market(shape: &MarketShape, seed: u64) -> Market<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, den) = (
        shape.buyers.max(1),
        shape.goods.max(1),
        shape.denominator.max(1),
    );
    let supply = (0..n)
        .map(|_| positive(&mut rng, shape.max_supply, den))
        .collect();
    let mut values: Vec<Vec<Rational>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(shape.zero_value.clamp(0.0, 1.0)) {
                        rat(0, 1)
                    } else {
                        positive(&mut rng, shape.max_value, den)
                    }
                })
                .collect()
        })
        .collect();
    for j in 0..n {
        if values.iter().all(|row| row[j] == rat(0, 1)) {
            let i = rng.gen_range(0..m);
            values[i][j] = positive(&mut rng, shape.max_value, den);
        }
    }
    let budgets = (0..m)
        .map(|_| positive(&mut rng, shape.max_budget, den))
        .collect();
    Market::from_parts(supply, values, budgets).expect("generated market is valid")
}
