//! Small reference markets used by tests, benches and the CLI.

use crate::market::Market;
use crate::numeric::Rational;

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(p.into(), q.into())
}

fn int(p: i64) -> Rational {
    rat(p, 1)
}

/// Two goods A, B with supply (3, 2); three unit-budget buyers valuing
/// (2, 3), (2, 2) and (4, 2). Equilibrium prices are (3/5, 3/5).
pub fn example2() -> Market<Rational> {
    Market::from_parts(
        vec![int(3), int(2)],
        vec![
            vec![int(2), int(3)],
            vec![int(2), int(2)],
            vec![int(4), int(2)],
        ],
        vec![int(1), int(1), int(1)],
    )
    .expect("reference market is valid")
}

/// One good in unit supply and two buyers with values `v1 > v2` and budgets
/// `b1 > b2`. When `b1 + b2 <= v2` the equilibrium price is `b1 + b2`.
pub fn example1(b1: Rational, b2: Rational, v1: Rational, v2: Rational) -> Market<Rational> {
    Market::from_parts(vec![int(1)], vec![vec![v1], vec![v2]], vec![b1, b2])
        .expect("reference market is valid")
}

/// One buyer, one good.
pub fn single(value: Rational, budget: Rational, supply: Rational) -> Market<Rational> {
    Market::from_parts(vec![supply], vec![vec![value]], vec![budget]).expect("valid market")
}
